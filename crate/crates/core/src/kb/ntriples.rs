//! Line-oriented triple files: `<subject> <predicate> <object> .`
//!
//! Names may be written bare or in angle brackets. `rdf:type` (or `a`) with
//! object `owl:Class` / `rdf:Property` / `owl:ObjectProperty` /
//! `owl:DatatypeProperty` declares vocabulary; `rdfs:subClassOf` and
//! `rdfs:subPropertyOf` statements become schema axioms; everything else is a
//! fact.

use super::value::{format_duration, parse_duration, Timestamp, Value};
use super::{vocab, Declaration, Fact, KbError, SchemaAxiom};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub axioms: Vec<SchemaAxiom>,
    pub declarations: Vec<Declaration>,
    pub facts: Vec<Fact>,
}

impl Document {
    pub fn merge(&mut self, other: Document) {
        self.axioms.extend(other.axioms);
        self.declarations.extend(other.declarations);
        self.facts.extend(other.facts);
    }
}

const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
const OWL: &str = "http://www.w3.org/2002/07/owl#";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Literal { text: String, datatype: Option<String> },
    Number(String),
    Dot,
}

fn shorten(iri: &str) -> String {
    for (ns, prefix) in [(RDF, "rdf:"), (RDFS, "rdfs:"), (OWL, "owl:"), (XSD, "xsd:")] {
        if let Some(local) = iri.strip_prefix(ns) {
            return format!("{prefix}{local}");
        }
    }
    iri.to_string()
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token>, KbError> {
    let err = |message: String| KbError::Syntax { line: lineno, message };
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '<' {
            let start = i + 1;
            let end = chars[start..]
                .iter()
                .position(|&c| c == '>')
                .ok_or_else(|| err("unterminated `<`".into()))?;
            out.push(Token::Name(shorten(&chars[start..start + end].iter().collect::<String>())));
            i = start + end + 1;
        } else if c == '"' {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err("unterminated string literal".into())),
                    Some('"') => {
                        i += 1;
                        break;
                    }
                    Some('\\') => {
                        let escaped = chars.get(i + 1).ok_or_else(|| err("dangling escape".into()))?;
                        text.push(match escaped {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            other => *other,
                        });
                        i += 2;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            let mut datatype = None;
            if chars.get(i) == Some(&'^') && chars.get(i + 1) == Some(&'^') {
                i += 2;
                let rest: String = chars[i..].iter().collect();
                let toks = tokenize(&rest, lineno)?;
                let Some(Token::Name(dt)) = toks.first() else {
                    return Err(err("expected a datatype after `^^`".into()));
                };
                datatype = Some(dt.clone());
                // Skip the datatype token in the original stream.
                if chars.get(i) == Some(&'<') {
                    i += chars[i..].iter().position(|&c| c == '>').unwrap_or(0) + 1;
                } else {
                    while i < chars.len() && !chars[i].is_whitespace() && !is_final_dot(&chars, i) {
                        i += 1;
                    }
                }
            } else if chars.get(i) == Some(&'@') {
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
            }
            out.push(Token::Literal { text, datatype });
        } else if c == '.' && is_final_dot(&chars, i) {
            out.push(Token::Dot);
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !is_final_dot(&chars, i) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            if word.parse::<f64>().is_ok() && word.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') {
                out.push(Token::Number(word));
            } else {
                out.push(Token::Name(word));
            }
        }
    }
    Ok(out)
}

/// A `.` that ends a statement: followed by whitespace, a comment or the end
/// of the line.
fn is_final_dot(chars: &[char], i: usize) -> bool {
    chars[i] == '.' && chars.get(i + 1).is_none_or(|c| c.is_whitespace() || *c == '#')
}

fn is_type(name: &str) -> bool {
    name == "a" || name == "rdf:type"
}

fn literal_value(text: String, datatype: Option<String>, lineno: usize) -> Result<Value, KbError> {
    let err = |message: String| KbError::Syntax { line: lineno, message };
    let Some(dt) = datatype else {
        return Ok(Value::text(text));
    };
    match dt.as_str() {
        "xsd:string" => Ok(Value::text(text)),
        "xsd:dateTimeStamp" | "xsd:dateTime" => Timestamp::parse(&text)
            .map(Value::Timestamp)
            .ok_or_else(|| err(format!("invalid timestamp `{text}` (a time zone is required)"))),
        "xsd:integer" | "xsd:int" | "xsd:long" => {
            text.parse().map(Value::Integer).map_err(|_| err(format!("invalid integer `{text}`")))
        }
        "xsd:decimal" | "xsd:double" | "xsd:float" => {
            text.parse().map(Value::decimal).map_err(|_| err(format!("invalid decimal `{text}`")))
        }
        "xsd:duration" | "xsd:dayTimeDuration" => {
            parse_duration(&text).map(Value::Duration).ok_or_else(|| err(format!("invalid duration `{text}`")))
        }
        other => Err(err(format!("unsupported datatype `{other}`"))),
    }
}

fn number_value(word: &str) -> Value {
    match word.parse::<i64>() {
        Ok(i) => Value::Integer(i),
        Err(_) => Value::decimal(word.parse().expect("checked by the tokenizer")),
    }
}

/// Parses a triple file.
pub fn parse_document(text: &str) -> Result<Document, KbError> {
    let mut doc = Document::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let tokens = tokenize(line, lineno)?;
        if tokens.is_empty() {
            continue;
        }
        let err = |message: &str| KbError::Syntax { line: lineno, message: message.to_string() };
        let [s, p, o, Token::Dot] = tokens.as_slice() else {
            return Err(err("expected `subject predicate object .`"));
        };
        let Token::Name(subject) = s else {
            return Err(err("subject must be a name"));
        };
        let Token::Name(predicate) = p else {
            return Err(err("predicate must be a name"));
        };
        let object = match o {
            Token::Name(n) => Value::resource(n),
            Token::Literal { text, datatype } => literal_value(text.clone(), datatype.clone(), lineno)?,
            Token::Number(w) => number_value(w),
            Token::Dot => return Err(err("missing object")),
        };
        let object_name = object.as_resource().map(|r| r.as_str().to_string());
        match (predicate.as_str(), object_name.as_deref()) {
            (p, Some("owl:Class" | "rdfs:Class")) if is_type(p) => {
                doc.declarations.push(Declaration::Class(subject.clone()))
            }
            (p, Some("rdf:Property" | "owl:ObjectProperty" | "owl:DatatypeProperty")) if is_type(p) => {
                doc.declarations.push(Declaration::Property(subject.clone()))
            }
            ("rdfs:subClassOf", Some(sup)) => {
                doc.axioms.push(SchemaAxiom::SubClassOf { sub: subject.clone(), sup: sup.to_string() })
            }
            ("rdfs:subPropertyOf", Some(sup)) => {
                doc.axioms.push(SchemaAxiom::SubPropertyOf { sub: subject.clone(), sup: sup.to_string() })
            }
            ("rdfs:subClassOf" | "rdfs:subPropertyOf", None) => {
                return Err(err("hierarchy axioms need a name as object"));
            }
            (p, _) => {
                let predicate = if is_type(p) { vocab::A } else { p };
                doc.facts.push(Fact::new(subject.as_str(), predicate, object));
            }
        }
    }
    Ok(doc)
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n").replace('\t', "\\t")
}

/// Object in triple file syntax.
pub fn format_object(value: &Value) -> String {
    match value {
        Value::Resource(r) => format!("<{r}>"),
        Value::Text(t) => format!("\"{}\"", escape(t)),
        Value::Integer(i) => format!("\"{i}\"^^xsd:integer"),
        Value::Decimal(d) => format!("\"{}\"^^xsd:decimal", d.0),
        Value::Timestamp(t) => format!("\"{t}\"^^xsd:dateTimeStamp"),
        Value::Duration(ms) => format!("\"{}\"^^xsd:duration", format_duration(*ms)),
    }
}

pub(super) fn format_fact(fact: &Fact) -> String {
    let predicate = if fact.is_class_membership() { "rdf:type" } else { &fact.predicate };
    format!("<{}> <{}> {} .", fact.subject, predicate, format_object(&fact.object))
}
