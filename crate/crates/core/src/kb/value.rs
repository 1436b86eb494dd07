use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use chrono::{DateTime, Datelike, FixedOffset, Months, SecondsFormat, TimeZone, Timelike, Utc};
use ordered_float::OrderedFloat;

/// A named individual (or class / property name when used as an object).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Resource(Arc<str>);

impl Resource {
    pub fn new(id: impl AsRef<str>) -> Self {
        Resource(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Resource {
    fn from(s: &str) -> Self {
        Resource::new(s)
    }
}

/// A UTC instant at millisecond precision.
///
/// The offset the value was written with is kept for hour-of-day style field
/// access and for serialization, but equality, ordering and hashing only look
/// at the instant.
#[derive(Clone, Copy)]
pub struct Timestamp {
    millis: i64,
    offset_secs: i32,
}

impl Timestamp {
    pub fn from_millis(millis: i64) -> Self {
        Timestamp { millis, offset_secs: 0 }
    }

    pub fn with_offset(millis: i64, offset_secs: i32) -> Self {
        Timestamp { millis, offset_secs }
    }

    pub fn millis(&self) -> i64 {
        self.millis
    }

    pub fn offset_secs(&self) -> i32 {
        self.offset_secs
    }

    /// Parses the xsd:dateTimeStamp lexical form (an RFC 3339 timestamp with a
    /// mandatory zone designator).
    pub fn parse(text: &str) -> Option<Self> {
        let dt = DateTime::parse_from_rfc3339(text.trim()).ok()?;
        Some(Self::from_fixed(&dt))
    }

    fn from_fixed(dt: &DateTime<FixedOffset>) -> Self {
        Timestamp {
            millis: dt.timestamp_millis(),
            offset_secs: dt.offset().local_minus_utc(),
        }
    }

    fn local(&self) -> DateTime<FixedOffset> {
        let offset = FixedOffset::east_opt(self.offset_secs).unwrap_or(FixedOffset::east_opt(0).unwrap());
        let utc = Utc.timestamp_millis_opt(self.millis).single().unwrap_or_default();
        utc.with_timezone(&offset)
    }

    /// Extracts a calendar field in the timestamp's own offset.
    pub fn field(&self, unit: TimeUnit) -> i64 {
        let local = self.local();
        match unit {
            TimeUnit::Year => local.year() as i64,
            TimeUnit::Month => local.month() as i64,
            TimeUnit::Day => local.day() as i64,
            TimeUnit::Hour => local.hour() as i64,
            TimeUnit::Minute => local.minute() as i64,
            TimeUnit::Second => local.second() as i64,
        }
    }

    /// Shifts the instant by `amount` units. Years and months are calendar
    /// aware (clamped to the end of month); smaller units are fixed lengths.
    pub fn shift(&self, amount: i64, unit: TimeUnit) -> Option<Self> {
        match unit.fixed_millis() {
            Some(ms) => {
                let delta = amount.checked_mul(ms)?;
                Some(Timestamp { millis: self.millis.checked_add(delta)?, offset_secs: self.offset_secs })
            }
            None => {
                let months = if unit == TimeUnit::Year { amount.checked_mul(12)? } else { amount };
                let local = self.local();
                let shifted = if months >= 0 {
                    local.checked_add_months(Months::new(u32::try_from(months).ok()?))?
                } else {
                    local.checked_sub_months(Months::new(u32::try_from(-months).ok()?))?
                };
                Some(Self::from_fixed(&shifted))
            }
        }
    }

    pub fn add_millis(&self, delta: i64) -> Option<Self> {
        Some(Timestamp { millis: self.millis.checked_add(delta)?, offset_secs: self.offset_secs })
    }
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.millis == other.millis
    }
}

impl Eq for Timestamp {}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.millis.cmp(&other.millis)
    }
}

impl Hash for Timestamp {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.millis.hash(state);
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = if self.offset_secs == 0 {
            self.local().with_timezone(&Utc).to_rfc3339_opts(SecondsFormat::Millis, true)
        } else {
            self.local().to_rfc3339_opts(SecondsFormat::Millis, false)
        };
        f.write_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeUnit {
    Year,
    Month,
    Day,
    Hour,
    Minute,
    Second,
}

impl TimeUnit {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "year" | "years" => TimeUnit::Year,
            "month" | "months" => TimeUnit::Month,
            "day" | "days" => TimeUnit::Day,
            "hour" | "hours" => TimeUnit::Hour,
            "minute" | "minutes" => TimeUnit::Minute,
            "second" | "seconds" => TimeUnit::Second,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TimeUnit::Year => "year",
            TimeUnit::Month => "month",
            TimeUnit::Day => "day",
            TimeUnit::Hour => "hour",
            TimeUnit::Minute => "minute",
            TimeUnit::Second => "second",
        }
    }

    pub fn fixed_millis(&self) -> Option<i64> {
        match self {
            TimeUnit::Year | TimeUnit::Month => None,
            TimeUnit::Day => Some(86_400_000),
            TimeUnit::Hour => Some(3_600_000),
            TimeUnit::Minute => Some(60_000),
            TimeUnit::Second => Some(1_000),
        }
    }
}

/// Object position of a fact.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Resource(Resource),
    Text(Arc<str>),
    Integer(i64),
    Decimal(OrderedFloat<f64>),
    Timestamp(Timestamp),
    /// Milliseconds.
    Duration(i64),
}

impl Value {
    pub fn resource(id: impl AsRef<str>) -> Self {
        Value::Resource(Resource::new(id))
    }

    pub fn text(s: impl AsRef<str>) -> Self {
        Value::Text(Arc::from(s.as_ref()))
    }

    pub fn decimal(v: f64) -> Self {
        Value::Decimal(OrderedFloat(v))
    }

    pub fn as_resource(&self) -> Option<&Resource> {
        match self {
            Value::Resource(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_timestamp(&self) -> Option<Timestamp> {
        match self {
            Value::Timestamp(t) => Some(*t),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Decimal(d) => Some(d.0),
            _ => None,
        }
    }

    /// Equality used by matching: integers and decimals compare numerically.
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Integer(a), Value::Decimal(b)) | (Value::Decimal(b), Value::Integer(a)) => (*a as f64) == b.0,
            _ => self == other,
        }
    }

    /// Ordering for comparisons; `None` when the two values are not comparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => Some(a.cmp(b)),
            (Value::Integer(_) | Value::Decimal(_), Value::Integer(_) | Value::Decimal(_)) => {
                self.as_f64()?.partial_cmp(&other.as_f64()?)
            }
            (Value::Timestamp(a), Value::Timestamp(b)) => Some(a.cmp(b)),
            (Value::Duration(a), Value::Duration(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Resource(a), Value::Resource(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Plain rendering: resources bare, text single-quoted, numbers as written,
/// timestamps in RFC 3339, durations as `<ms>ms`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Resource(r) => write!(f, "{r}"),
            Value::Text(t) => write!(f, "'{}'", t.replace('\\', "\\\\").replace('\'', "\\'")),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => {
                if d.0.fract() == 0.0 && d.0.is_finite() {
                    write!(f, "{:.1}", d.0)
                } else {
                    write!(f, "{}", d.0)
                }
            }
            Value::Timestamp(t) => write!(f, "{t}"),
            Value::Duration(ms) => write!(f, "{ms}ms"),
        }
    }
}

/// Renders a duration in the `PnDTnHnMn.nnnS` subset of xsd:duration.
pub fn format_duration(ms: i64) -> String {
    let sign = if ms < 0 { "-" } else { "" };
    let ms = ms.unsigned_abs();
    let days = ms / 86_400_000;
    let rem = ms % 86_400_000;
    let hours = rem / 3_600_000;
    let minutes = (rem % 3_600_000) / 60_000;
    let secs = (rem % 60_000) / 1000;
    let millis = rem % 1000;
    let mut out = format!("{sign}P");
    if days > 0 {
        out.push_str(&format!("{days}D"));
    }
    out.push('T');
    if hours > 0 {
        out.push_str(&format!("{hours}H"));
    }
    if minutes > 0 {
        out.push_str(&format!("{minutes}M"));
    }
    if millis > 0 {
        out.push_str(&format!("{secs}.{millis:03}S"));
    } else {
        out.push_str(&format!("{secs}S"));
    }
    out
}

/// Parses the day-time subset of xsd:duration (`-?PnDTnHnMn.nS`).
pub fn parse_duration(text: &str) -> Option<i64> {
    let text = text.trim();
    let (negative, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text),
    };
    let rest = rest.strip_prefix('P')?;
    let (date_part, time_part) = match rest.split_once('T') {
        Some((d, t)) => (d, Some(t)),
        None => (rest, None),
    };
    let mut total: f64 = 0.0;
    let mut seen = false;
    let mut consume = |part: &str, units: &[(char, f64)]| -> Option<()> {
        let mut num = String::new();
        let mut allowed = units.iter();
        for c in part.chars() {
            if c.is_ascii_digit() || c == '.' {
                num.push(c);
            } else {
                let (_, scale) = allowed.by_ref().find(|(u, _)| *u == c)?;
                total += num.parse::<f64>().ok()? * scale;
                num.clear();
                seen = true;
            }
        }
        num.is_empty().then_some(())
    };
    consume(date_part, &[('D', 86_400_000.0)])?;
    if let Some(t) = time_part {
        consume(t, &[('H', 3_600_000.0), ('M', 60_000.0), ('S', 1000.0)])?;
    }
    if !seen {
        return None;
    }
    let ms = total.round() as i64;
    Some(if negative { -ms } else { ms })
}
