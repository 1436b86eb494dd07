//! Reading norm, schema and scenario files, and reporting their errors.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde_json::json;
use tnorm::compiler::{compile, CompileError, RuleSet};
use tnorm::parser::{parse, validate_cross_refs, Item, ParseError};
use tnorm::runtime::{parse_scenario, Background, EventRecord};

/// One structured error record.
#[derive(Debug, Clone)]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub col: usize,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(file: impl Into<String>, line: usize, col: usize, code: &'static str, message: impl Into<String>) -> Self {
        Diagnostic { file: file.into(), line, col, code, message: message.into() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"file": self.file, "line": self.line, "col": self.col, "code": self.code, "message": self.message})
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read(path: &Path) -> Result<String, Diagnostic> {
    fs::read_to_string(path).map_err(|e| Diagnostic::new(display(path), 0, 0, "io", e.to_string()))
}

/// Norm files concatenated into one text, remembering where each starts so
/// that positions map back to files.
struct Sources {
    text: String,
    /// (file, first line in `text`, line count)
    files: Vec<(String, usize, usize)>,
}

impl Sources {
    fn read(paths: &[PathBuf]) -> Result<Self, Vec<Diagnostic>> {
        let mut text = String::new();
        let mut files = Vec::new();
        let mut errors = Vec::new();
        for path in paths {
            match read(path) {
                Ok(mut content) => {
                    if !content.ends_with('\n') {
                        content.push('\n');
                    }
                    let first = text.matches('\n').count() + 1;
                    files.push((display(path), first, content.matches('\n').count()));
                    text.push_str(&content);
                }
                Err(d) => errors.push(d),
            }
        }
        if errors.is_empty() {
            Ok(Sources { text, files })
        } else {
            Err(errors)
        }
    }

    fn diagnostic(&self, e: &ParseError) -> Diagnostic {
        let (file, line) = self
            .files
            .iter()
            .find(|(_, first, count)| e.line >= *first && e.line < first + count)
            .map(|(file, first, _)| (file.clone(), e.line - first + 1))
            .or_else(|| self.files.last().map(|(file, first, _)| (file.clone(), e.line.saturating_sub(*first) + 1)))
            .unwrap_or_default();
        Diagnostic::new(file, line, e.col, e.kind.code(), e.kind.to_string())
    }
}

/// Parses and cross-validates the norm files.
pub fn check(paths: &[PathBuf]) -> Result<Vec<Item>, Vec<Diagnostic>> {
    let sources = Sources::read(paths)?;
    let report = |errors: Vec<ParseError>| errors.iter().map(|e| sources.diagnostic(e)).collect::<Vec<_>>();
    let items = parse(&sources.text).map_err(report)?;
    validate_cross_refs(&items).map_err(report)?;
    Ok(items)
}

fn compile_code(e: &CompileError) -> &'static str {
    match e {
        CompileError::Unthreadable { .. } => "unthreadable",
        CompileError::KindMismatch { .. } => "consequent-mismatch",
        CompileError::UnknownTarget { .. } => "unknown-target",
        CompileError::MissingDeonticRelation { .. } => "missing-deontic-relation",
    }
}

/// Checks and compiles the norm files.
pub fn rules(paths: &[PathBuf]) -> Result<RuleSet, Vec<Diagnostic>> {
    let items = check(paths)?;
    compile(&items).map_err(|e| {
        let file = paths.iter().map(|p| display(p)).collect::<Vec<_>>().join(",");
        vec![Diagnostic::new(file, 0, 0, compile_code(&e), e.to_string())]
    })
}

/// The prelude plus the given schema and fact files.
pub fn background(paths: &[PathBuf]) -> Result<Background, Vec<Diagnostic>> {
    let texts = paths.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>().map_err(|d| vec![d])?;
    Background::from_documents(&texts.iter().map(String::as_str).collect::<Vec<_>>()).map_err(|e| {
        let file = paths.iter().map(|p| display(p)).collect::<Vec<_>>().join(",");
        vec![Diagnostic::new(file, 0, 0, "schema", e.to_string())]
    })
}

/// Name used in diagnostics for a scenario source.
pub fn scenario_name(path: Option<&Path>) -> String {
    path.map(display).unwrap_or_else(|| "<stdin>".into())
}

/// Reads a whole scenario from a file or standard input.
pub fn scenario(path: Option<&Path>) -> Result<Vec<EventRecord>, Diagnostic> {
    let name = scenario_name(path);
    let text = match path {
        Some(p) => read(p)?,
        None => {
            let mut text = String::new();
            io::stdin().read_to_string(&mut text).map_err(|e| Diagnostic::new(&name, 0, 0, "io", e.to_string()))?;
            text
        }
    };
    parse_scenario(&text).map_err(|e| Diagnostic::new(name, e.line, 1, "scenario", e.message))
}
