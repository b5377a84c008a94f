//! The closed registry of condition functions available to policies.
//!
//! Every function is total over type-correct arguments: evaluation returns a
//! value or a runtime type error, it never aborts the decision point.

use super::geo::geo_distance_km;
use super::value::AttributeValue;

/// Static argument/return types used by the parse-time checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    String,
    Double,
    Integer,
    Boolean,
    Geo,
    Time,
}

impl ValueType {
    pub fn of(v: &AttributeValue) -> Self {
        match v {
            AttributeValue::String(_) => ValueType::String,
            AttributeValue::Double(_) => ValueType::Double,
            AttributeValue::Integer(_) => ValueType::Integer,
            AttributeValue::Boolean(_) => ValueType::Boolean,
            AttributeValue::Geo(_) => ValueType::Geo,
            AttributeValue::Time(_) => ValueType::Time,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Double => "double",
            ValueType::Integer => "integer",
            ValueType::Boolean => "boolean",
            ValueType::Geo => "geo",
            ValueType::Time => "time",
        }
    }
}

/// Parameter shape of a registered function.
#[derive(Debug, Clone, Copy)]
pub enum Params {
    Fixed(&'static [ValueType]),
    /// All parameters share one type; at least `min` arguments required.
    Variadic {
        elem: ValueType,
        min: usize,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct FunctionSig {
    pub id: &'static str,
    pub params: Params,
    pub ret: ValueType,
}

impl FunctionSig {
    /// Checks an argument count against the signature.
    pub fn arity_ok(&self, n: usize) -> bool {
        match self.params {
            Params::Fixed(tys) => n == tys.len(),
            Params::Variadic { min, .. } => n >= min,
        }
    }

    /// Expected type of the i-th parameter.
    pub fn param_type(&self, i: usize) -> Option<ValueType> {
        match self.params {
            Params::Fixed(tys) => tys.get(i).copied(),
            Params::Variadic { elem, .. } => Some(elem),
        }
    }

    pub fn arity_text(&self) -> String {
        match self.params {
            Params::Fixed(tys) => format!("{}", tys.len()),
            Params::Variadic { min, .. } => format!(">= {min}"),
        }
    }
}

use ValueType as T;

const REGISTRY: &[FunctionSig] = &[
    FunctionSig {
        id: "string-equal",
        params: Params::Fixed(&[T::String, T::String]),
        ret: T::Boolean,
    },
    // first argument is the needle, the rest the allowed set
    FunctionSig {
        id: "string-one-of",
        params: Params::Variadic {
            elem: T::String,
            min: 2,
        },
        ret: T::Boolean,
    },
    FunctionSig {
        id: "integer-equal",
        params: Params::Fixed(&[T::Integer, T::Integer]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "integer-less-than-or-equal",
        params: Params::Fixed(&[T::Integer, T::Integer]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "integer-greater-than-or-equal",
        params: Params::Fixed(&[T::Integer, T::Integer]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "double-less-than-or-equal",
        params: Params::Fixed(&[T::Double, T::Double]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "double-greater-than-or-equal",
        params: Params::Fixed(&[T::Double, T::Double]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "double-less-than",
        params: Params::Fixed(&[T::Double, T::Double]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "double-greater-than",
        params: Params::Fixed(&[T::Double, T::Double]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "and",
        params: Params::Variadic {
            elem: T::Boolean,
            min: 1,
        },
        ret: T::Boolean,
    },
    FunctionSig {
        id: "or",
        params: Params::Variadic {
            elem: T::Boolean,
            min: 1,
        },
        ret: T::Boolean,
    },
    FunctionSig {
        id: "not",
        params: Params::Fixed(&[T::Boolean]),
        ret: T::Boolean,
    },
    FunctionSig {
        id: "geo-distance-km",
        params: Params::Fixed(&[T::Geo, T::Geo]),
        ret: T::Double,
    },
    // time-in-range(t, window-start, window-end): daily window on
    // seconds-of-day, inclusive on both ends; start > end wraps midnight
    FunctionSig {
        id: "time-in-range",
        params: Params::Fixed(&[T::Time, T::Time, T::Time]),
        ret: T::Boolean,
    },
];

pub fn lookup_function(id: &str) -> Option<&'static FunctionSig> {
    REGISTRY.iter().find(|f| f.id == id)
}

/// Runtime type error: a value variant incompatible with the function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeTypeError {
    pub function: String,
    pub detail: String,
}

fn type_err(function: &str, detail: impl Into<String>) -> RuntimeTypeError {
    RuntimeTypeError {
        function: function.to_string(),
        detail: detail.into(),
    }
}

fn seconds_of_day(t: i64) -> i64 {
    t.rem_euclid(86_400)
}

/// Applies a registered function to already-evaluated arguments.
pub fn invoke(id: &str, args: &[AttributeValue]) -> Result<AttributeValue, RuntimeTypeError> {
    use AttributeValue as V;
    let sig = lookup_function(id).ok_or_else(|| type_err(id, "unknown function"))?;
    if !sig.arity_ok(args.len()) {
        return Err(type_err(
            id,
            format!("expected {} args, got {}", sig.arity_text(), args.len()),
        ));
    }
    for (i, a) in args.iter().enumerate() {
        let expect = sig.param_type(i).expect("arity checked");
        if ValueType::of(a) != expect {
            return Err(type_err(
                id,
                format!(
                    "argument {} must be {}, got {}",
                    i + 1,
                    expect.name(),
                    a.type_name()
                ),
            ));
        }
    }

    let b = |v: bool| Ok(V::Boolean(v));
    match (id, args) {
        ("string-equal", [V::String(a), V::String(x)]) => b(a == x),
        ("string-one-of", [V::String(needle), rest @ ..]) => b(rest
            .iter()
            .any(|v| matches!(v, V::String(s) if s == needle))),
        ("integer-equal", [V::Integer(a), V::Integer(x)]) => b(a == x),
        ("integer-less-than-or-equal", [V::Integer(a), V::Integer(x)]) => b(a <= x),
        ("integer-greater-than-or-equal", [V::Integer(a), V::Integer(x)]) => b(a >= x),
        ("double-less-than-or-equal", [V::Double(a), V::Double(x)]) => b(a <= x),
        ("double-greater-than-or-equal", [V::Double(a), V::Double(x)]) => b(a >= x),
        ("double-less-than", [V::Double(a), V::Double(x)]) => b(a < x),
        ("double-greater-than", [V::Double(a), V::Double(x)]) => b(a > x),
        ("and", bools) => b(bools.iter().all(|v| matches!(v, V::Boolean(true)))),
        ("or", bools) => b(bools.iter().any(|v| matches!(v, V::Boolean(true)))),
        ("not", [V::Boolean(a)]) => b(!a),
        ("geo-distance-km", [V::Geo(a), V::Geo(x)]) => Ok(V::Double(geo_distance_km(*a, *x))),
        ("time-in-range", [V::Time(t), V::Time(start), V::Time(end)]) => {
            let (t, s, e) = (
                seconds_of_day(*t),
                seconds_of_day(*start),
                seconds_of_day(*end),
            );
            b(if s <= e {
                s <= t && t <= e
            } else {
                t >= s || t <= e
            })
        }
        _ => unreachable!("signature check admits no other shape"),
    }
}
