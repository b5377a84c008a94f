//! ABAC policy engine: document parsing, expression evaluation, rule and
//! policy combination, and the registered condition functions.

mod ast;
mod eval;
mod functions;
pub mod geo;
mod parse;
mod value;

pub use ast::{
    CombiningAlgorithm, Expression, PdpDecision, Policy, PolicySet, RequestContext, Rule,
    RuleEffect,
};
pub use eval::{combine, evaluate, evaluate_expression, evaluate_rule, EvalOutcome, EvalTrace};
pub use functions::{lookup_function, ValueType};
pub use parse::{
    decode_value, encode_value, parse_policy_set, parse_request_context, serialize_policy_set,
    PolicyParseError,
};
pub use value::{AttributeCategory, AttributeRef, AttributeValue, GeoPoint};
