//! Policy document and context document parsing.
//!
//! The on-the-wire policy format is UTF-8 JSON with top-level fields
//! `policy_set_id`, `combining`, and `policies`. Expressions are encoded as
//! `{"fn": ..., "args": [...]}`, `{"attr": "<category>.<key>"}`, or
//! `{"value": {"type": ..., "v": ...}}` with geo values as `[lat, lon]`.

use std::collections::HashSet;

use serde_json::Value as Json;
use thiserror::Error;

use super::ast::{CombiningAlgorithm, Expression, Policy, PolicySet, Rule, RuleEffect};
use super::functions::{lookup_function, ValueType};
use super::value::{AttributeCategory, AttributeRef, AttributeValue, GeoPoint};
use crate::policy::RequestContext;

#[derive(Debug, Error)]
pub enum PolicyParseError {
    /// Malformed document. Location is `line:column` for JSON-level errors
    /// and a field path for structural ones.
    #[error("syntax error at {location}: {message}")]
    Syntax { location: String, message: String },
    #[error("unknown function {id:?} at {path}")]
    UnknownFunction { id: String, path: String },
    #[error("function {id:?} at {path} takes {expected} args, got {found}")]
    ArityMismatch {
        id: String,
        path: String,
        expected: String,
        found: usize,
    },
    #[error("type mismatch at {path}: {detail}")]
    TypeMismatch { path: String, detail: String },
    #[error("duplicate id {id:?} at {path}")]
    DuplicateId { id: String, path: String },
}

impl PolicyParseError {
    fn syntax(path: &str, message: impl Into<String>) -> Self {
        PolicyParseError::Syntax {
            location: path.to_string(),
            message: message.into(),
        }
    }
}

type Result<T> = std::result::Result<T, PolicyParseError>;

/// Parses and validates a policy set document.
///
/// Every `fn` node is checked against the function registry, including arity
/// and the argument types that are statically known.
pub fn parse_policy_set(document: &str) -> Result<PolicySet> {
    let root: Json = serde_json::from_str(document).map_err(|e| PolicyParseError::Syntax {
        location: format!("{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;

    let policy_set_id = req_string(obj, "policy_set_id", "$")?;
    let combining = parse_combining(obj, "$")?;
    let policies_json = match obj.get("policies") {
        Some(Json::Array(a)) => a,
        Some(_) => return Err(PolicyParseError::syntax("$.policies", "must be an array")),
        None => return Err(PolicyParseError::syntax("$", "missing field `policies`")),
    };

    let mut policies = Vec::with_capacity(policies_json.len());
    let mut seen_policy_ids = HashSet::new();
    for (i, pj) in policies_json.iter().enumerate() {
        let path = format!("$.policies[{i}]");
        let policy = parse_policy(pj, &path)?;
        if !seen_policy_ids.insert(policy.policy_id.clone()) {
            return Err(PolicyParseError::DuplicateId {
                id: policy.policy_id,
                path,
            });
        }
        policies.push(policy);
    }

    Ok(PolicySet {
        policy_set_id,
        combining,
        policies,
        version: 0,
    })
}

/// Serializes a policy set back to the document format. Round-trips through
/// [`parse_policy_set`] up to the PAP-managed `version` field.
pub fn serialize_policy_set(ps: &PolicySet) -> String {
    let policies: Vec<Json> = ps
        .policies
        .iter()
        .map(|p| {
            serde_json::json!({
                "policy_id": p.policy_id,
                "combining": p.combining.as_str(),
                "target": p.target.as_ref().map(expression_to_json),
                "rules": p.rules.iter().map(|r| serde_json::json!({
                    "rule_id": r.rule_id,
                    "effect": match r.effect { RuleEffect::Permit => "Permit", RuleEffect::Deny => "Deny" },
                    "condition": r.condition.as_ref().map(expression_to_json),
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "policy_set_id": ps.policy_set_id,
        "combining": ps.combining.as_str(),
        "policies": policies,
    });
    serde_json::to_string_pretty(&doc).expect("policy document serialization")
}

/// Parses a context document: an object with any of the four category bags,
/// each mapping keys to encoded attribute values.
pub fn parse_request_context(document: &str, now: i64) -> Result<RequestContext> {
    let root: Json = serde_json::from_str(document).map_err(|e| PolicyParseError::Syntax {
        location: format!("{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;
    let mut ctx = RequestContext::new(now);
    for (key, val) in obj {
        let category = AttributeCategory::parse_name(key)
            .ok_or_else(|| PolicyParseError::syntax(&format!("$.{key}"), "unknown category"))?;
        let bag = as_object(val, &format!("$.{key}"))?;
        for (attr_key, encoded) in bag {
            let path = format!("$.{key}.{attr_key}");
            if attr_key.is_empty() {
                return Err(PolicyParseError::syntax(&path, "empty attribute key"));
            }
            let value = parse_value(encoded, &path)?;
            ctx.insert(category, attr_key.clone(), value);
        }
    }
    Ok(ctx)
}

fn as_object<'a>(v: &'a Json, path: &str) -> Result<&'a serde_json::Map<String, Json>> {
    v.as_object()
        .ok_or_else(|| PolicyParseError::syntax(path, "must be an object"))
}

fn req_string(obj: &serde_json::Map<String, Json>, field: &str, path: &str) -> Result<String> {
    match obj.get(field) {
        Some(Json::String(s)) if !s.is_empty() => Ok(s.clone()),
        Some(Json::String(_)) => Err(PolicyParseError::syntax(
            &format!("{path}.{field}"),
            "must be non-empty",
        )),
        Some(_) => Err(PolicyParseError::syntax(
            &format!("{path}.{field}"),
            "must be a string",
        )),
        None => Err(PolicyParseError::syntax(
            path,
            format!("missing field `{field}`"),
        )),
    }
}

fn parse_combining(obj: &serde_json::Map<String, Json>, path: &str) -> Result<CombiningAlgorithm> {
    let s = req_string(obj, "combining", path)?;
    CombiningAlgorithm::ALL
        .into_iter()
        .find(|a| a.as_str() == s)
        .ok_or_else(|| {
            PolicyParseError::syntax(
                &format!("{path}.combining"),
                format!("unknown combining algorithm {s:?}"),
            )
        })
}

fn parse_policy(v: &Json, path: &str) -> Result<Policy> {
    let obj = as_object(v, path)?;
    let policy_id = req_string(obj, "policy_id", path)?;
    let combining = parse_combining(obj, path)?;
    let target = match obj.get("target") {
        None | Some(Json::Null) => None,
        Some(t) => Some(parse_checked_boolean_expr(t, &format!("{path}.target"))?),
    };
    let rules_json = match obj.get("rules") {
        Some(Json::Array(a)) if !a.is_empty() => a,
        Some(Json::Array(_)) => {
            return Err(PolicyParseError::syntax(
                &format!("{path}.rules"),
                "must be non-empty",
            ))
        }
        Some(_) => {
            return Err(PolicyParseError::syntax(
                &format!("{path}.rules"),
                "must be an array",
            ))
        }
        None => return Err(PolicyParseError::syntax(path, "missing field `rules`")),
    };
    let mut rules = Vec::with_capacity(rules_json.len());
    let mut seen = HashSet::new();
    for (i, rj) in rules_json.iter().enumerate() {
        let rpath = format!("{path}.rules[{i}]");
        let rule = parse_rule(rj, &rpath)?;
        if !seen.insert(rule.rule_id.clone()) {
            return Err(PolicyParseError::DuplicateId {
                id: rule.rule_id,
                path: rpath,
            });
        }
        rules.push(rule);
    }
    Ok(Policy {
        policy_id,
        combining,
        target,
        rules,
    })
}

fn parse_rule(v: &Json, path: &str) -> Result<Rule> {
    let obj = as_object(v, path)?;
    let rule_id = req_string(obj, "rule_id", path)?;
    let effect = match obj.get("effect").and_then(Json::as_str) {
        Some("Permit") => RuleEffect::Permit,
        Some("Deny") => RuleEffect::Deny,
        Some(other) => {
            return Err(PolicyParseError::syntax(
                &format!("{path}.effect"),
                format!("must be \"Permit\" or \"Deny\", got {other:?}"),
            ))
        }
        None => return Err(PolicyParseError::syntax(path, "missing field `effect`")),
    };
    let condition = match obj.get("condition") {
        None | Some(Json::Null) => None,
        Some(c) => Some(parse_checked_boolean_expr(c, &format!("{path}.condition"))?),
    };
    Ok(Rule {
        rule_id,
        effect,
        condition,
    })
}

fn parse_checked_boolean_expr(v: &Json, path: &str) -> Result<Expression> {
    let expr = parse_expression(v, path)?;
    if let Some(ty) = static_type(&expr, path)? {
        if ty != ValueType::Boolean {
            return Err(PolicyParseError::TypeMismatch {
                path: path.to_string(),
                detail: format!("expression must be boolean-typed, found {}", ty.name()),
            });
        }
    }
    Ok(expr)
}

fn parse_expression(v: &Json, path: &str) -> Result<Expression> {
    let obj = as_object(v, path)?;
    match (obj.get("fn"), obj.get("attr"), obj.get("value")) {
        (Some(f), None, None) => {
            let id = f
                .as_str()
                .ok_or_else(|| PolicyParseError::syntax(&format!("{path}.fn"), "must be a string"))?
                .to_string();
            let args_json = match obj.get("args") {
                Some(Json::Array(a)) => a,
                Some(_) => {
                    return Err(PolicyParseError::syntax(
                        &format!("{path}.args"),
                        "must be an array",
                    ))
                }
                None => return Err(PolicyParseError::syntax(path, "missing field `args`")),
            };
            let sig = lookup_function(&id).ok_or_else(|| PolicyParseError::UnknownFunction {
                id: id.clone(),
                path: path.to_string(),
            })?;
            if !sig.arity_ok(args_json.len()) {
                return Err(PolicyParseError::ArityMismatch {
                    id,
                    path: path.to_string(),
                    expected: sig.arity_text(),
                    found: args_json.len(),
                });
            }
            let mut args = Vec::with_capacity(args_json.len());
            for (i, aj) in args_json.iter().enumerate() {
                args.push(parse_expression(aj, &format!("{path}.args[{i}]"))?);
            }
            Ok(Expression::Apply { function: id, args })
        }
        (None, Some(a), None) => {
            let s = a.as_str().ok_or_else(|| {
                PolicyParseError::syntax(&format!("{path}.attr"), "must be a string")
            })?;
            let r = AttributeRef::parse(s)
                .map_err(|e| PolicyParseError::syntax(&format!("{path}.attr"), e))?;
            Ok(Expression::Attribute(r))
        }
        (None, None, Some(val)) => Ok(Expression::Literal(parse_value(
            val,
            &format!("{path}.value"),
        )?)),
        _ => Err(PolicyParseError::syntax(
            path,
            "expression must have exactly one of `fn`, `attr`, `value`",
        )),
    }
}

fn parse_value(v: &Json, path: &str) -> Result<AttributeValue> {
    let obj = as_object(v, path)?;
    let ty = req_string(obj, "type", path)?;
    let raw = obj
        .get("v")
        .ok_or_else(|| PolicyParseError::syntax(path, "missing field `v`"))?;
    let bad = |msg: &str| PolicyParseError::syntax(&format!("{path}.v"), msg);
    match ty.as_str() {
        "string" => Ok(AttributeValue::String(
            raw.as_str()
                .ok_or_else(|| bad("must be a string"))?
                .to_string(),
        )),
        "double" => Ok(AttributeValue::Double(
            raw.as_f64().ok_or_else(|| bad("must be a number"))?,
        )),
        "integer" => Ok(AttributeValue::Integer(
            raw.as_i64().ok_or_else(|| bad("must be an integer"))?,
        )),
        "boolean" => Ok(AttributeValue::Boolean(
            raw.as_bool().ok_or_else(|| bad("must be a boolean"))?,
        )),
        "geo" => {
            let arr = raw.as_array().ok_or_else(|| bad("must be [lat, lon]"))?;
            if arr.len() != 2 {
                return Err(bad("must be [lat, lon]"));
            }
            let lat = arr[0].as_f64().ok_or_else(|| bad("lat must be a number"))?;
            let lon = arr[1].as_f64().ok_or_else(|| bad("lon must be a number"))?;
            let point = GeoPoint::new(lat, lon).map_err(|e| bad(&e))?;
            Ok(AttributeValue::Geo(point))
        }
        "time" => {
            let t = raw
                .as_i64()
                .ok_or_else(|| bad("must be an integer timestamp"))?;
            if t < 0 {
                return Err(bad("timestamp must be non-negative"));
            }
            Ok(AttributeValue::Time(t))
        }
        other => Err(PolicyParseError::syntax(
            &format!("{path}.type"),
            format!("unknown value type {other:?}"),
        )),
    }
}

fn expression_to_json(e: &Expression) -> Json {
    match e {
        Expression::Literal(v) => serde_json::json!({ "value": value_to_json(v) }),
        Expression::Attribute(r) => serde_json::json!({ "attr": r.to_string() }),
        Expression::Apply { function, args } => serde_json::json!({
            "fn": function,
            "args": args.iter().map(expression_to_json).collect::<Vec<_>>(),
        }),
    }
}

fn value_to_json(v: &AttributeValue) -> Json {
    match v {
        AttributeValue::String(s) => serde_json::json!({"type": "string", "v": s}),
        AttributeValue::Double(d) => serde_json::json!({"type": "double", "v": d}),
        AttributeValue::Integer(i) => serde_json::json!({"type": "integer", "v": i}),
        AttributeValue::Boolean(b) => serde_json::json!({"type": "boolean", "v": b}),
        AttributeValue::Geo(g) => serde_json::json!({"type": "geo", "v": [g.lat, g.lon]}),
        AttributeValue::Time(t) => serde_json::json!({"type": "time", "v": t}),
    }
}

/// Encodes a single attribute value in the document form; used by the
/// gateway when echoing attributes.
pub fn encode_value(v: &AttributeValue) -> Json {
    value_to_json(v)
}

/// Decodes a single attribute value from the document form.
pub fn decode_value(v: &Json) -> Result<AttributeValue> {
    parse_value(v, "$")
}

/// Static type of an expression where determinable; attribute references
/// have unknown type until runtime.
fn static_type(e: &Expression, path: &str) -> Result<Option<ValueType>> {
    match e {
        Expression::Literal(v) => Ok(Some(ValueType::of(v))),
        Expression::Attribute(_) => Ok(None),
        Expression::Apply { function, args } => {
            let sig =
                lookup_function(function).ok_or_else(|| PolicyParseError::UnknownFunction {
                    id: function.clone(),
                    path: path.to_string(),
                })?;
            for (i, arg) in args.iter().enumerate() {
                let apath = format!("{path}.args[{i}]");
                if let Some(actual) = static_type(arg, &apath)? {
                    let expected = sig.param_type(i).expect("arity checked at parse");
                    if actual != expected {
                        return Err(PolicyParseError::TypeMismatch {
                            path: apath,
                            detail: format!(
                                "{function} argument {} must be {}, found {}",
                                i + 1,
                                expected.name(),
                                actual.name()
                            ),
                        });
                    }
                }
            }
            Ok(Some(sig.ret))
        }
    }
}
