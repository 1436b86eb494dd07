pub mod compiler;
pub mod engine;
pub mod kb;
pub mod parser;
pub mod runtime;
