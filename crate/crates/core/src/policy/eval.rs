//! Expression, rule, policy, and policy-set evaluation.
//!
//! Evaluation is pure: the policy set and request context are immutable for
//! the duration of a call, so the engine is safe for unlimited concurrent
//! evaluations.

use super::ast::{
    CombiningAlgorithm, Expression, PdpDecision, Policy, PolicySet, RequestContext, Rule,
    RuleEffect,
};
use super::functions;
use super::value::{AttributeRef, AttributeValue};

/// Result of evaluating an expression: a value, or "no value" with the
/// reason recorded for audit purposes.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutcome {
    Value(AttributeValue),
    /// The referenced attribute is absent from the request context.
    MissingAttribute(AttributeRef),
    /// A value variant was incompatible with a function at runtime. Treated
    /// as a missing value for decision purposes but logged distinctly.
    TypeError {
        function: String,
        detail: String,
    },
}

/// Diagnostics collected during one evaluation, for the audit trail.
#[derive(Debug, Clone, Default)]
pub struct EvalTrace {
    pub missing_attributes: Vec<String>,
    pub type_errors: Vec<String>,
}

impl EvalTrace {
    fn record(&mut self, outcome: &EvalOutcome) {
        match outcome {
            EvalOutcome::Value(_) => {}
            EvalOutcome::MissingAttribute(r) => self.missing_attributes.push(r.to_string()),
            EvalOutcome::TypeError { function, detail } => {
                self.type_errors.push(format!("{function}: {detail}"))
            }
        }
    }
}

/// Evaluates one expression against a request context.
///
/// Missing attributes propagate strictly: any missing argument makes the
/// enclosing apply missing as well.
pub fn evaluate_expression(expr: &Expression, ctx: &RequestContext) -> EvalOutcome {
    match expr {
        Expression::Literal(v) => EvalOutcome::Value(v.clone()),
        Expression::Attribute(r) => match ctx.get(r.category, &r.key) {
            Some(v) => EvalOutcome::Value(v.clone()),
            None => EvalOutcome::MissingAttribute(r.clone()),
        },
        Expression::Apply { function, args } => {
            let mut values = Vec::with_capacity(args.len());
            for arg in args {
                match evaluate_expression(arg, ctx) {
                    EvalOutcome::Value(v) => values.push(v),
                    missing => return missing,
                }
            }
            match functions::invoke(function, &values) {
                Ok(v) => EvalOutcome::Value(v),
                Err(e) => EvalOutcome::TypeError {
                    function: e.function,
                    detail: e.detail,
                },
            }
        }
    }
}

/// Truth of a boolean-typed expression, with non-values surfaced.
enum Truth {
    True,
    False,
    NoValue,
}

fn evaluate_boolean(expr: &Expression, ctx: &RequestContext, trace: &mut EvalTrace) -> Truth {
    let outcome = evaluate_expression(expr, ctx);
    trace.record(&outcome);
    match outcome {
        EvalOutcome::Value(AttributeValue::Boolean(true)) => Truth::True,
        EvalOutcome::Value(AttributeValue::Boolean(false)) => Truth::False,
        EvalOutcome::Value(v) => {
            // a non-boolean condition is a runtime type error
            let o = EvalOutcome::TypeError {
                function: "<condition>".into(),
                detail: format!("expected boolean, got {}", v.type_name()),
            };
            trace.record(&o);
            Truth::NoValue
        }
        _ => Truth::NoValue,
    }
}

/// Evaluates one rule: condition true yields the rule's effect, false yields
/// NotApplicable, and a missing condition value yields Indeterminate.
pub fn evaluate_rule(rule: &Rule, ctx: &RequestContext) -> PdpDecision {
    evaluate_rule_traced(rule, ctx, &mut EvalTrace::default())
}

fn evaluate_rule_traced(rule: &Rule, ctx: &RequestContext, trace: &mut EvalTrace) -> PdpDecision {
    let effect = match rule.effect {
        RuleEffect::Permit => PdpDecision::Permit,
        RuleEffect::Deny => PdpDecision::Deny,
    };
    match &rule.condition {
        None => effect,
        Some(cond) => match evaluate_boolean(cond, ctx, trace) {
            Truth::True => effect,
            Truth::False => PdpDecision::NotApplicable,
            Truth::NoValue => PdpDecision::Indeterminate,
        },
    }
}

/// Merges an ordered list of decisions under a combining algorithm.
pub fn combine(
    decisions: impl IntoIterator<Item = PdpDecision>,
    alg: CombiningAlgorithm,
) -> PdpDecision {
    use PdpDecision::*;
    match alg {
        CombiningAlgorithm::DenyOverrides | CombiningAlgorithm::PermitOverrides => {
            let dominant = if alg == CombiningAlgorithm::DenyOverrides {
                Deny
            } else {
                Permit
            };
            let recessive = if alg == CombiningAlgorithm::DenyOverrides {
                Permit
            } else {
                Deny
            };
            let mut seen_indeterminate = false;
            let mut seen_recessive = false;
            for d in decisions {
                match d {
                    d if d == dominant => return dominant,
                    Indeterminate => seen_indeterminate = true,
                    d if d == recessive => seen_recessive = true,
                    _ => {}
                }
            }
            if seen_indeterminate {
                Indeterminate
            } else if seen_recessive {
                recessive
            } else {
                NotApplicable
            }
        }
        CombiningAlgorithm::FirstApplicable => decisions
            .into_iter()
            .find(|d| *d != NotApplicable)
            .unwrap_or(NotApplicable),
    }
}

fn evaluate_policy(policy: &Policy, ctx: &RequestContext, trace: &mut EvalTrace) -> PdpDecision {
    if let Some(target) = &policy.target {
        match evaluate_boolean(target, ctx, trace) {
            Truth::True => {}
            Truth::False => return PdpDecision::NotApplicable,
            // absence of evidence must not silently skip a policy
            Truth::NoValue => return PdpDecision::Indeterminate,
        }
    }
    let decisions = policy
        .rules
        .iter()
        .map(|r| evaluate_rule_traced(r, ctx, trace));
    combine(decisions.collect::<Vec<_>>(), policy.combining)
}

/// Evaluates a whole policy set to a single decision.
pub fn evaluate(policy_set: &PolicySet, ctx: &RequestContext) -> PdpDecision {
    evaluate_traced(policy_set, ctx).0
}

/// As [`evaluate`], additionally returning the diagnostics collected along
/// the way (missing attributes and runtime type errors).
pub fn evaluate_traced(policy_set: &PolicySet, ctx: &RequestContext) -> (PdpDecision, EvalTrace) {
    let mut trace = EvalTrace::default();
    let decisions: Vec<PdpDecision> = policy_set
        .policies
        .iter()
        .map(|p| evaluate_policy(p, ctx, &mut trace))
        .collect();
    (combine(decisions, policy_set.combining), trace)
}
