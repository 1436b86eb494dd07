use std::fmt;

use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::kb::{parse_duration, Resource, Timestamp, Value};

/// A timestamped event from a stream or scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub id: Resource,
    pub classes: Vec<String>,
    pub properties: Vec<(String, Value)>,
    pub time: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

impl EventRecord {
    pub fn new(id: &str, classes: &[&str], time: Timestamp) -> Self {
        EventRecord {
            id: Resource::new(id),
            classes: classes.iter().map(|c| c.to_string()).collect(),
            properties: Vec::new(),
            time,
        }
    }

    pub fn with(mut self, property: &str, value: Value) -> Self {
        self.properties.push((property.to_string(), value));
        self
    }

    /// Parses one record. Property values follow these conventions:
    /// plain strings are individuals (or timestamps when they parse as
    /// one), `'quoted'` strings and `{"text": ..}` are literals, numbers are
    /// numbers, `{"timestamp": ..}` and `{"duration": ..}` are typed, and
    /// arrays give several values.
    pub fn from_json_str(line: &str) -> Result<Self, String> {
        let json: Json = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
        let obj = json.as_object().ok_or("record must be an object")?;
        let id = obj.get("id").and_then(Json::as_str).ok_or("missing string field `id`")?;
        if id.is_empty() {
            return Err("empty `id`".into());
        }
        let time = obj.get("time").and_then(Json::as_str).ok_or("missing string field `time`")?;
        let time = Timestamp::parse(time).ok_or_else(|| format!("unparseable time `{time}`"))?;
        let classes = match obj.get("classes") {
            None => Vec::new(),
            Some(Json::Array(items)) => items
                .iter()
                .map(|c| c.as_str().map(str::to_string).ok_or("`classes` must hold strings"))
                .collect::<Result<_, _>>()?,
            Some(Json::String(c)) => vec![c.clone()],
            Some(_) => return Err("`classes` must be a list of strings".into()),
        };
        let mut properties = Vec::new();
        match obj.get("props") {
            None => {}
            Some(Json::Object(props)) => {
                for (name, raw) in props {
                    for value in values(raw).map_err(|e| format!("property `{name}`: {e}"))? {
                        properties.push((name.clone(), value));
                    }
                }
            }
            Some(_) => return Err("`props` must be an object".into()),
        }
        Ok(EventRecord { id: Resource::new(id), classes, properties, time })
    }

    pub fn to_json(&self) -> Json {
        let mut props = Map::new();
        for (name, value) in &self.properties {
            let v = value_to_json(value);
            match props.get_mut(name) {
                Some(Json::Array(items)) => items.push(v),
                Some(existing) => *existing = Json::Array(vec![existing.clone(), v]),
                None => {
                    props.insert(name.clone(), v);
                }
            }
        }
        serde_json::json!({
            "id": self.id.as_str(),
            "classes": self.classes,
            "time": self.time.to_string(),
            "props": props,
        })
    }
}

impl fmt::Display for EventRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

fn values(raw: &Json) -> Result<Vec<Value>, String> {
    match raw {
        Json::Array(items) => items.iter().map(value).collect(),
        other => Ok(vec![value(other)?]),
    }
}

fn value(raw: &Json) -> Result<Value, String> {
    match raw {
        Json::String(s) => {
            if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
                Ok(Value::text(&s[1..s.len() - 1]))
            } else if let Some(ts) = Timestamp::parse(s) {
                Ok(Value::Timestamp(ts))
            } else if s.is_empty() {
                Err("empty individual name".into())
            } else {
                Ok(Value::resource(s))
            }
        }
        Json::Number(n) => match n.as_i64() {
            Some(i) => Ok(Value::Integer(i)),
            None => n.as_f64().map(Value::decimal).ok_or_else(|| format!("unsupported number {n}")),
        },
        Json::Bool(b) => Ok(Value::text(b.to_string())),
        Json::Object(o) if o.len() == 1 => {
            let (kind, inner) = o.iter().next().expect("one entry");
            let text = inner.as_str().ok_or_else(|| format!("`{kind}` expects a string"))?;
            match kind.as_str() {
                "text" => Ok(Value::text(text)),
                "id" => Ok(Value::resource(text)),
                "timestamp" => {
                    Timestamp::parse(text).map(Value::Timestamp).ok_or_else(|| format!("bad timestamp `{text}`"))
                }
                "duration" => parse_duration(text).map(Value::Duration).ok_or_else(|| format!("bad duration `{text}`")),
                other => Err(format!("unknown typed value `{other}`")),
            }
        }
        Json::Null | Json::Array(_) | Json::Object(_) => Err(format!("unsupported value {raw}")),
    }
}

fn value_to_json(value: &Value) -> Json {
    match value {
        Value::Resource(r) => Json::String(r.as_str().to_string()),
        Value::Text(t) => serde_json::json!({ "text": &**t }),
        Value::Integer(i) => Json::from(*i),
        Value::Decimal(d) => Json::from(d.0),
        Value::Timestamp(t) => serde_json::json!({ "timestamp": t.to_string() }),
        Value::Duration(ms) => serde_json::json!({ "duration": crate::kb::format_duration(*ms) }),
    }
}

/// Parses a line-delimited scenario. Blank lines and lines starting with
/// `#` are skipped; ids must be unique and times non-decreasing.
pub fn parse_scenario(text: &str) -> Result<Vec<EventRecord>, ScenarioError> {
    let mut out: Vec<EventRecord> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record = EventRecord::from_json_str(trimmed).map_err(|message| ScenarioError { line, message })?;
        if !ids.insert(record.id.clone()) {
            return Err(ScenarioError { line, message: format!("duplicate event id `{}`", record.id) });
        }
        if let Some(prev) = out.last() {
            if record.time < prev.time {
                return Err(ScenarioError {
                    line,
                    message: format!("event `{}` at {} is earlier than the previous event", record.id, record.time),
                });
            }
        }
        out.push(record);
    }
    Ok(out)
}
