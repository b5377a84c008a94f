//! Policy document AST and the request context evaluated against it.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{AttributeCategory, AttributeRef, AttributeValue};

/// A policy condition or target expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(AttributeValue),
    Attribute(AttributeRef),
    Apply {
        function: String,
        args: Vec<Expression>,
    },
}

impl Expression {
    pub fn literal(v: AttributeValue) -> Self {
        Expression::Literal(v)
    }

    pub fn attribute(r: AttributeRef) -> Self {
        Expression::Attribute(r)
    }

    pub fn apply(function: impl Into<String>, args: Vec<Expression>) -> Self {
        Expression::Apply {
            function: function.into(),
            args,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleEffect {
    Permit,
    Deny,
}

/// A single access rule. An absent condition is vacuously true.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub rule_id: String,
    pub effect: RuleEffect,
    pub condition: Option<Expression>,
}

/// How rule (or policy) decisions are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombiningAlgorithm {
    #[serde(rename = "deny-overrides")]
    DenyOverrides,
    #[serde(rename = "permit-overrides")]
    PermitOverrides,
    #[serde(rename = "first-applicable")]
    FirstApplicable,
}

impl CombiningAlgorithm {
    pub const ALL: [CombiningAlgorithm; 3] = [
        CombiningAlgorithm::DenyOverrides,
        CombiningAlgorithm::PermitOverrides,
        CombiningAlgorithm::FirstApplicable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CombiningAlgorithm::DenyOverrides => "deny-overrides",
            CombiningAlgorithm::PermitOverrides => "permit-overrides",
            CombiningAlgorithm::FirstApplicable => "first-applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub policy_id: String,
    pub combining: CombiningAlgorithm,
    pub target: Option<Expression>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    pub policy_set_id: String,
    pub combining: CombiningAlgorithm,
    pub policies: Vec<Policy>,
    /// Bumped by the PAP on every update; not part of the document format.
    pub version: u64,
}

impl PolicySet {
    /// An empty set; evaluates to NotApplicable for every request.
    pub fn empty(id: impl Into<String>) -> Self {
        PolicySet {
            policy_set_id: id.into(),
            combining: CombiningAlgorithm::DenyOverrides,
            policies: Vec::new(),
            version: 0,
        }
    }
}

/// PDP output. NotApplicable is internal: callers map it to deny-by-default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PdpDecision {
    Permit,
    Deny,
    Indeterminate,
    NotApplicable,
}

impl fmt::Display for PdpDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PdpDecision::Permit => "Permit",
            PdpDecision::Deny => "Deny",
            PdpDecision::Indeterminate => "Indeterminate",
            PdpDecision::NotApplicable => "NotApplicable",
        })
    }
}

/// The four attribute bags for one authorization request.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RequestContext {
    subject: HashMap<String, AttributeValue>,
    resource: HashMap<String, AttributeValue>,
    action: HashMap<String, AttributeValue>,
    environment: HashMap<String, AttributeValue>,
}

impl RequestContext {
    /// Creates a context carrying `environment.time` set to `now`.
    pub fn new(now: i64) -> Self {
        let mut ctx = RequestContext::default();
        ctx.insert(
            AttributeCategory::Environment,
            "time",
            AttributeValue::Time(now),
        );
        ctx
    }

    fn bag(&self, category: AttributeCategory) -> &HashMap<String, AttributeValue> {
        match category {
            AttributeCategory::Subject => &self.subject,
            AttributeCategory::Resource => &self.resource,
            AttributeCategory::Action => &self.action,
            AttributeCategory::Environment => &self.environment,
        }
    }

    fn bag_mut(&mut self, category: AttributeCategory) -> &mut HashMap<String, AttributeValue> {
        match category {
            AttributeCategory::Subject => &mut self.subject,
            AttributeCategory::Resource => &mut self.resource,
            AttributeCategory::Action => &mut self.action,
            AttributeCategory::Environment => &mut self.environment,
        }
    }

    pub fn insert(
        &mut self,
        category: AttributeCategory,
        key: impl Into<String>,
        value: AttributeValue,
    ) {
        self.bag_mut(category).insert(key.into(), value);
    }

    pub fn get(&self, category: AttributeCategory, key: &str) -> Option<&AttributeValue> {
        self.bag(category).get(key)
    }

    pub fn remove(&mut self, category: AttributeCategory, key: &str) -> Option<AttributeValue> {
        self.bag_mut(category).remove(key)
    }

    pub fn iter_bag(
        &self,
        category: AttributeCategory,
    ) -> impl Iterator<Item = (&String, &AttributeValue)> {
        self.bag(category).iter()
    }
}
