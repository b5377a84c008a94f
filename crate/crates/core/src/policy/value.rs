//! Attribute values and references used in policy expressions and request
//! contexts.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A point on the globe in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Builds a point, rejecting out-of-range coordinates.
    pub fn new(lat: f64, lon: f64) -> Result<Self, String> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(format!("latitude {lat} out of range [-90,90]"));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(format!("longitude {lon} out of range [-180,180]"));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// A single attribute value. Timestamps are UTC unix seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    String(String),
    Double(f64),
    Integer(i64),
    Boolean(bool),
    Geo(GeoPoint),
    Time(i64),
}

impl AttributeValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            AttributeValue::String(_) => "string",
            AttributeValue::Double(_) => "double",
            AttributeValue::Integer(_) => "integer",
            AttributeValue::Boolean(_) => "boolean",
            AttributeValue::Geo(_) => "geo",
            AttributeValue::Time(_) => "time",
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        AttributeValue::String(s.into())
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::String(s) => write!(f, "{s:?}"),
            AttributeValue::Double(d) => write!(f, "{d}"),
            AttributeValue::Integer(i) => write!(f, "{i}"),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Geo(g) => write!(f, "({}, {})", g.lat, g.lon),
            AttributeValue::Time(t) => write!(f, "@{t}"),
        }
    }
}

/// One of the four fixed attribute categories of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeCategory {
    Subject,
    Resource,
    Action,
    Environment,
}

impl AttributeCategory {
    pub const ALL: [AttributeCategory; 4] = [
        AttributeCategory::Subject,
        AttributeCategory::Resource,
        AttributeCategory::Action,
        AttributeCategory::Environment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttributeCategory::Subject => "subject",
            AttributeCategory::Resource => "resource",
            AttributeCategory::Action => "action",
            AttributeCategory::Environment => "environment",
        }
    }

    pub fn parse_name(s: &str) -> Option<Self> {
        match s {
            "subject" => Some(AttributeCategory::Subject),
            "resource" => Some(AttributeCategory::Resource),
            "action" => Some(AttributeCategory::Action),
            "environment" => Some(AttributeCategory::Environment),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference to an attribute in one of the request's category bags,
/// e.g. `subject.org` or `action.id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeRef {
    pub category: AttributeCategory,
    pub key: String,
}

impl AttributeRef {
    pub fn new(category: AttributeCategory, key: impl Into<String>) -> Result<Self, String> {
        let key = key.into();
        if key.is_empty() {
            return Err("attribute key must be non-empty".into());
        }
        Ok(AttributeRef { category, key })
    }

    /// Parses the `<category>.<key>` form used in policy documents.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (cat, key) = s
            .split_once('.')
            .ok_or_else(|| format!("attribute reference {s:?} must be <category>.<key>"))?;
        let category = AttributeCategory::parse_name(cat)
            .ok_or_else(|| format!("unknown attribute category {cat:?}"))?;
        AttributeRef::new(category, key)
    }
}

impl fmt::Display for AttributeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.category, self.key)
    }
}
