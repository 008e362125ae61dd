use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Query families with closed-form expectations under both models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum QueryFamily {
    /// `q ≡ value`.
    Constant { value: f64 },
    /// `1(X_t ≥ c)`.
    CoordinateThreshold { t: usize, c: f64 },
    /// `1(Σ_j X_j / √d ≥ c)`.
    ScaledSumThreshold { c: f64 },
    /// `1(Σ_{j∈subset} X_j ≥ c)`.
    SubsetSumThreshold { subset: Vec<usize>, c: f64 },
    /// `1(X_t² ≥ c)`.
    CoordinateSquareThreshold { t: usize, c: f64 },
    /// `1((Σ_{j∈subset} X_j)² / |subset| ≥ c)`.
    SubsetSquareThreshold { subset: Vec<usize>, c: f64 },
}

/// `1(w·X ≥ c)` or `1((w·X)² ≥ c)` with sparse weights `w` (0-based indices).
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub weights: Vec<(usize, f64)>,
    pub c: f64,
    pub squared: bool,
}

impl QueryFamily {
    /// The linear form behind an indicator family; `None` for constants.
    pub fn projection(&self, d: usize) -> Option<Projection> {
        let unit = |subset: &[usize], w: f64| subset.iter().map(|&j| (j - 1, w)).collect::<Vec<_>>();
        match self {
            QueryFamily::Constant { .. } => None,
            QueryFamily::CoordinateThreshold { t, c } => Some(Projection {
                weights: vec![(t - 1, 1.0)],
                c: *c,
                squared: false,
            }),
            QueryFamily::ScaledSumThreshold { c } => {
                let w = 1.0 / (d as f64).sqrt();
                Some(Projection {
                    weights: (0..d).map(|j| (j, w)).collect(),
                    c: *c,
                    squared: false,
                })
            }
            QueryFamily::SubsetSumThreshold { subset, c } => Some(Projection {
                weights: unit(subset, 1.0),
                c: *c,
                squared: false,
            }),
            QueryFamily::CoordinateSquareThreshold { t, c } => Some(Projection {
                weights: vec![(t - 1, 1.0)],
                c: *c,
                squared: true,
            }),
            QueryFamily::SubsetSquareThreshold { subset, c } => {
                let w = 1.0 / (subset.len() as f64).sqrt();
                Some(Projection {
                    weights: unit(subset, w),
                    c: *c,
                    squared: true,
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            QueryFamily::Constant { value } if !value.is_finite() => invalid("constant query must be finite"),
            QueryFamily::CoordinateThreshold { t, .. } | QueryFamily::CoordinateSquareThreshold { t, .. } if *t == 0 => {
                invalid("coordinates are 1-based")
            }
            QueryFamily::SubsetSumThreshold { subset, .. } | QueryFamily::SubsetSquareThreshold { subset, .. } => {
                if subset.is_empty() || subset.contains(&0) {
                    invalid("subset must be nonempty and 1-based")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let sum = |subset: &[usize]| subset.iter().map(|&j| x[j - 1]).sum::<f64>();
        match self {
            QueryFamily::Constant { value } => *value,
            QueryFamily::CoordinateThreshold { t, c } => ind(x[t - 1] >= *c),
            QueryFamily::ScaledSumThreshold { c } => ind(x.iter().sum::<f64>() / (x.len() as f64).sqrt() >= *c),
            QueryFamily::SubsetSumThreshold { subset, c } => ind(sum(subset) >= *c),
            QueryFamily::CoordinateSquareThreshold { t, c } => ind(x[t - 1] * x[t - 1] >= *c),
            QueryFamily::SubsetSquareThreshold { subset, c } => {
                let s = sum(subset);
                ind(s * s / subset.len() as f64 >= *c)
            }
        }
    }

    fn max_index(&self) -> usize {
        match self {
            QueryFamily::CoordinateThreshold { t, .. } | QueryFamily::CoordinateSquareThreshold { t, .. } => *t,
            QueryFamily::SubsetSumThreshold { subset, .. } | QueryFamily::SubsetSquareThreshold { subset, .. } => {
                subset.iter().copied().max().unwrap_or(0)
            }
            _ => 0,
        }
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Canonical(QueryFamily),
    Custom { label: String, f: Evaluator },
}

/// A bounded query `q : R^d → [−b, b]`.
#[derive(Clone)]
pub struct Query {
    bound_b: f64,
    kind: Kind,
}

impl Query {
    /// Canonical query. Indicators get `b = 1`; constants get `b = max(1, |value|)`.
    pub fn canonical(family: QueryFamily) -> Result<Self> {
        family.validate()?;
        let bound_b = match &family {
            QueryFamily::Constant { value } => value.abs().max(1.0),
            _ => 1.0,
        };
        Ok(Query {
            bound_b,
            kind: Kind::Canonical(family),
        })
    }

    pub fn custom<F>(label: impl Into<String>, bound_b: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(bound_b > 0.0 && bound_b.is_finite()) {
            return invalid("query bound must be positive and finite");
        }
        Ok(Query {
            bound_b,
            kind: Kind::Custom {
                label: label.into(),
                f: Arc::new(f),
            },
        })
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    pub fn descriptor(&self) -> Option<&QueryFamily> {
        match &self.kind {
            Kind::Canonical(f) => Some(f),
            Kind::Custom { .. } => None,
        }
    }

    /// Evaluates the query. Panics if the value leaves `[−b, b]`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let v = match &self.kind {
            Kind::Canonical(f) => f.evaluate(x),
            Kind::Custom { f, .. } => f(x),
        };
        assert!(v.abs() <= self.bound_b, "query {} returned {v} outside [-b, b]", self.label());
        v
    }

    /// Largest coordinate the query reads, 0 if it does not name one.
    pub fn max_index(&self) -> usize {
        self.descriptor().map_or(0, QueryFamily::max_index)
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Canonical(f) => serde_json::to_string(f).expect("descriptor serializes"),
            Kind::Custom { label, .. } => format!("{{\"family\":\"custom\",\"label\":{}}}", serde_json::Value::from(label.as_str())),
        }
    }

    /// Same query structure, used to deduplicate schedules.
    pub fn same_as(&self, other: &Query) -> bool {
        match (&self.kind, &other.kind) {
            (Kind::Canonical(a), Kind::Canonical(b)) => a == b,
            (Kind::Custom { f: a, .. }, Kind::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Query")
            .field("bound_b", &self.bound_b)
            .field("label", &self.label())
            .finish()
    }
}
