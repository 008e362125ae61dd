//! Query-schedule detectors with closed-form thresholds, and the exhaustive
//! likelihood-ratio test.

mod lr;
pub mod permanent;

pub use lr::{
    generalized_permanent_sum, generalized_permanent_sum_paths, lr_statistic, lr_statistic_expansion, matching_lr_via_permanent,
    GeneralizedPermanent, DEFAULT_ROW_SUBSET_CAP,
};
pub use permanent::{permanent, permanent_brute_force};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{DataMatrix, ModelKind, ProblemInstance};
use crate::numeric::{big_ln, normal_sf};
use crate::oracle::{OracleConfig, OracleSession, Query, QueryFamily};
use crate::structure_classes::{enumerate_class, ClassKind, StructureClass, DEFAULT_ENUMERATION_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    SM1,
    SM2,
    SM3,
    SM4a,
    SM4b,
    #[serde(rename = "PM_SM1")]
    PmSm1,
    #[serde(rename = "PM_SM3")]
    PmSm3,
    #[serde(rename = "PM_SM4a")]
    PmSm4a,
    SPCA1,
    SPCA2,
    LR,
    /// Never rejects. Baseline for the risk lower bound.
    AcceptAll,
    /// Always rejects.
    RejectAll,
}

impl Setting {
    pub const ALL: [Setting; 13] = [
        Setting::SM1,
        Setting::SM2,
        Setting::SM3,
        Setting::SM4a,
        Setting::SM4b,
        Setting::PmSm1,
        Setting::PmSm3,
        Setting::PmSm4a,
        Setting::SPCA1,
        Setting::SPCA2,
        Setting::LR,
        Setting::AcceptAll,
        Setting::RejectAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::SM1 => "SM1",
            Setting::SM2 => "SM2",
            Setting::SM3 => "SM3",
            Setting::SM4a => "SM4a",
            Setting::SM4b => "SM4b",
            Setting::PmSm1 => "PM_SM1",
            Setting::PmSm3 => "PM_SM3",
            Setting::PmSm4a => "PM_SM4a",
            Setting::SPCA1 => "SPCA1",
            Setting::SPCA2 => "SPCA2",
            Setting::LR => "LR",
            Setting::AcceptAll => "AcceptAll",
            Setting::RejectAll => "RejectAll",
        }
    }

    fn requirement(self) -> Option<(ModelKind, ClassKind)> {
        use Setting::*;
        match self {
            SM1 | SM2 | SM3 | SM4a | SM4b => Some((ModelKind::ShiftedMean, ClassKind::SparseSet)),
            PmSm1 | PmSm3 | PmSm4a => Some((ModelKind::ShiftedMean, ClassKind::PerfectMatching)),
            SPCA1 | SPCA2 => Some((ModelKind::SpikedCovariance, ClassKind::SparseSet)),
            LR | AcceptAll | RejectAll => None,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown detector setting `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorOptions {
    /// The constant `C` in the SM4b subset size.
    pub c_const: f64,
    pub cap: u64,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        DetectorOptions {
            c_const: 8.0,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Detector {
    setting: Setting,
    instance: ProblemInstance,
    n: usize,
    options: DetectorOptions,
    schedule: Vec<Query>,
    threshold: f64,
    eta: f64,
    s_bar: Option<usize>,
}

/// `s̄* = ⌈2nα/(C·ln d)⌉` clamped to `[1, s*]`.
pub fn reduced_sparsity(n: usize, alpha: f64, d: usize, s_star: usize, c_const: f64) -> Result<usize> {
    if !(c_const > 0.0) || d < 2 {
        return invalid("reduced sparsity needs C > 0 and d ≥ 2");
    }
    let raw = (2.0 * n as f64 * alpha / (c_const * (d as f64).ln())).ceil();
    Ok((raw.max(1.0) as usize).min(s_star))
}

fn canonical(family: QueryFamily) -> Query {
    Query::canonical(family).expect("detector queries are well formed")
}

fn subset_scan(class: &StructureClass, cap: u64, c: f64, squared: bool) -> Result<Vec<Query>> {
    Ok(enumerate_class(class, cap)?
        .into_iter()
        .map(|s| {
            let subset = s.indices().to_vec();
            canonical(if squared {
                QueryFamily::SubsetSquareThreshold { subset, c }
            } else {
                QueryFamily::SubsetSumThreshold { subset, c }
            })
        })
        .collect())
}

impl Detector {
    pub fn new(setting: Setting, instance: &ProblemInstance, n: usize, options: DetectorOptions) -> Result<Self> {
        if n == 0 {
            return invalid("sample size n must be positive");
        }
        if let Some((model, kind)) = setting.requirement() {
            if instance.model() != model || instance.class().kind() != kind {
                return invalid(format!(
                    "{setting} needs a {model:?} model over a {kind:?} class (got {:?} over {:?})",
                    instance.model(),
                    instance.class().kind()
                ));
            }
        }
        let (d, s) = (instance.d(), instance.s_star());
        let (beta, alpha) = (instance.beta_star(), instance.alpha());
        let (sd, ss) = (d as f64, s as f64);
        let mut s_bar = None;
        use Setting::*;
        let (schedule, threshold) = match setting {
            SM1 | PmSm1 => {
                let c = (2.0 * (n as f64).ln()).max(0.0).sqrt();
                (vec![canonical(QueryFamily::ScaledSumThreshold { c })], normal_sf(c) + alpha / 8.0)
            }
            SM2 => (
                (1..=d)
                    .map(|t| canonical(QueryFamily::CoordinateThreshold { t, c: beta / 2.0 }))
                    .collect(),
                normal_sf(beta / 2.0) + alpha * beta / (4.0 * PI),
            ),
            SM3 | PmSm3 => {
                let z = beta * ss / (2.0 * sd.sqrt());
                (
                    vec![canonical(QueryFamily::SubsetSumThreshold {
                        subset: (1..=d).collect(),
                        c: beta * ss / 2.0,
                    })],
                    normal_sf(z) + alpha * z / (2.0 * PI),
                )
            }
            SM4a | PmSm4a => (
                subset_scan(instance.class(), options.cap, beta * ss / 2.0, false)?,
                normal_sf(beta * ss.sqrt() / 2.0) + alpha / 4.0,
            ),
            SM4b => {
                let sb = reduced_sparsity(n, alpha, d, s, options.c_const)?;
                s_bar = Some(sb);
                let sbf = sb as f64;
                (
                    subset_scan(&StructureClass::sparse(d, sb)?, options.cap, beta * sbf / 2.0, false)?,
                    normal_sf(beta * sbf.sqrt() / 2.0) + alpha / 4.0,
                )
            }
            SPCA1 => {
                let c = 1.0 + beta / ss;
                (
                    (1..=d)
                        .map(|t| canonical(QueryFamily::CoordinateSquareThreshold { t, c }))
                        .collect(),
                    2.0 * normal_sf(c.sqrt()) + beta / (8.0 * PI * ss),
                )
            }
            SPCA2 => (
                subset_scan(instance.class(), options.cap, 1.0 + beta, true)?,
                2.0 * normal_sf((1.0 + beta).sqrt()) + beta / (8.0 * PI),
            ),
            LR => (Vec::new(), 0.0),
            AcceptAll => (Vec::new(), f64::INFINITY),
            RejectAll => (Vec::new(), f64::NEG_INFINITY),
        };
        let eta = if schedule.len() > 1 {
            match setting {
                SM4b => big_ln(&StructureClass::sparse(d, s_bar.unwrap_or(1))?.cardinality()),
                _ => (schedule.len() as f64).ln(),
            }
        } else {
            0.0
        };
        Ok(Detector {
            setting,
            instance: instance.clone(),
            n,
            options,
            schedule,
            threshold,
            eta,
            s_bar,
        })
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> DetectorOptions {
        self.options
    }

    pub fn schedule(&self) -> &[Query] {
        &self.schedule
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Declared query-space capacity `η = ln T` (zero for single-query tests).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `s̄*` for SM4b.
    pub fn s_bar(&self) -> Option<usize> {
        self.s_bar
    }

    /// Oracle parameters matching this detector: its `n`, its `η`, `b = 1`.
    pub fn oracle_config(&self, xi: f64) -> Result<OracleConfig> {
        OracleConfig::new(self.n, xi, self.eta, 1.0)
    }

    /// The same test restricted to the first `t` queries of the schedule.
    pub fn truncated(&self, t: usize) -> Detector {
        let mut out = self.clone();
        out.schedule.truncate(t);
        out.eta = if out.schedule.len() > 1 {
            (out.schedule.len() as f64).ln()
        } else {
            0.0
        };
        out
    }

    pub fn to_spec(&self) -> DetectorSpec {
        DetectorSpec {
            setting: self.setting,
            model: self.instance.model(),
            class: self.instance.class().kind(),
            d: self.instance.d(),
            s_star: self.instance.s_star(),
            beta_star: self.instance.beta_star(),
            alpha: self.instance.alpha(),
            n: self.n,
            c_const: self.options.c_const,
            threshold: self.threshold,
            eta: self.eta,
            queries: self.schedule.len(),
        }
    }
}

/// Serializable detector description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub setting: Setting,
    pub model: ModelKind,
    pub class: ClassKind,
    pub d: usize,
    pub s_star: usize,
    pub beta_star: f64,
    pub alpha: f64,
    pub n: usize,
    pub c_const: f64,
    pub threshold: f64,
    pub eta: f64,
    pub queries: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
}

impl Verdict {
    /// Ties reject.
    pub fn from_statistic(statistic: f64, threshold: f64) -> Self {
        let decision = if statistic >= threshold {
            Decision::RejectNull
        } else {
            Decision::AcceptNull
        };
        Verdict {
            decision,
            statistic,
            threshold,
        }
    }

    pub fn rejects(&self) -> bool {
        self.decision == Decision::RejectNull
    }
}

/// Ask every scheduled query and threshold the largest response. An empty
/// schedule has statistic `−∞`.
pub fn run(detector: &Detector, session: &mut dyn OracleSession) -> Result<Verdict> {
    if detector.setting == Setting::LR {
        return Err(Error::Unsupported(
            "the likelihood-ratio test needs raw data; use run_on_data".into(),
        ));
    }
    let mut stat = f64::NEG_INFINITY;
    for q in &detector.schedule {
        stat = stat.max(session.respond(q)?);
    }
    Ok(Verdict::from_statistic(stat, detector.threshold))
}

/// Run against raw data: the likelihood ratio thresholds `ln L` at 0, every
/// other detector uses sample-mean responses.
pub fn run_on_data(detector: &Detector, data: &DataMatrix) -> Result<Verdict> {
    if detector.setting == Setting::LR {
        let l = lr_statistic(data, &detector.instance, detector.options.cap)?;
        return Ok(Verdict::from_statistic(l.ln, detector.threshold));
    }
    run(detector, &mut crate::oracle::DataOracle::new(data))
}
