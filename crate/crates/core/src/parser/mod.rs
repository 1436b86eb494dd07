//! The norm language: lexer, grammar, static validation and a canonical
//! pretty-printer.

mod ast;
mod error;
mod grammar;
mod lexer;
mod print;
mod validate;

pub use ast::{
    AssertStmt, Before, ComputeStmt, Consequent, CreateStmt, ExceptionAst, ExceptionKind, Inner, Item, NormAst, Span,
    Trigger,
};
pub use error::{ErrorKind, ParseError};
pub use print::pretty_print;
pub use validate::validate_cross_refs;

/// Parses every block in `text`, in source order, and checks each block on
/// its own. Cross references are checked by [`validate_cross_refs`].
pub fn parse(text: &str) -> Result<Vec<Item>, Vec<ParseError>> {
    let tokens = lexer::tokenize(text).map_err(|e| vec![e])?;
    let (items, mut errors) = grammar::Parser::new(tokens).parse_file();
    for item in &items {
        errors.extend(match item {
            Item::Norm(n) => validate::validate_norm(n),
            Item::Exception(e) => validate::validate_exception(e),
        });
    }
    if errors.is_empty() {
        Ok(items)
    } else {
        errors.sort_by_key(|e| (e.line, e.col));
        Err(errors)
    }
}

/// [`parse`] followed by [`validate_cross_refs`].
pub fn parse_and_check(text: &str) -> Result<Vec<Item>, Vec<ParseError>> {
    let items = parse(text)?;
    validate_cross_refs(&items)?;
    Ok(items)
}
