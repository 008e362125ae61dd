//! Detection models: the shifted-mean Gaussian mixture and the spiked
//! covariance model, with samplers, likelihood ratios, `h` functions and
//! closed-form expectations of canonical queries.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{normal_cdf, normal_sf};
use crate::oracle::{Query, QueryFamily};
use crate::rng::{stream, Role};
use crate::structure_classes::{IndexSet, StructureClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ShiftedMean,
    SpikedCovariance,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemInstance {
    model: ModelKind,
    class: StructureClass,
    beta_star: f64,
    alpha: f64,
    planted: Option<IndexSet>,
}

impl ProblemInstance {
    /// `(1 − α)N(0, I) + αN(θ, I)` with `θ_j = β*` on the planted set.
    pub fn shifted_mean(class: StructureClass, beta_star: f64, alpha: f64) -> Result<Self> {
        if !(beta_star > 0.0 && beta_star.is_finite()) {
            return invalid(format!("beta* must be positive (got {beta_star})"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return invalid(format!("alpha must lie in (0, 1] (got {alpha})"));
        }
        Ok(ProblemInstance {
            model: ModelKind::ShiftedMean,
            class,
            beta_star,
            alpha,
            planted: None,
        })
    }

    /// `N(0, I + β* v vᵀ)` with `v_j = 1/√s*` on the planted set.
    pub fn spiked(class: StructureClass, beta_star: f64) -> Result<Self> {
        if !(beta_star > 0.0 && beta_star < 1.0) {
            return invalid(format!("spiked model needs 0 < beta* < 1 (got {beta_star})"));
        }
        Ok(ProblemInstance {
            model: ModelKind::SpikedCovariance,
            class,
            beta_star,
            alpha: 1.0,
            planted: None,
        })
    }

    /// Like [`ProblemInstance::shifted_mean`] but accepts `α = 0`, which only
    /// makes sense for likelihood-ratio identities.
    pub fn shifted_mean_unchecked_alpha(class: StructureClass, beta_star: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return invalid("alpha must lie in [0, 1]");
        }
        let mut inst = Self::shifted_mean(class, beta_star, 1.0)?;
        inst.alpha = alpha;
        Ok(inst)
    }

    pub fn new(model: ModelKind, class: StructureClass, beta_star: f64, alpha: f64) -> Result<Self> {
        match model {
            ModelKind::ShiftedMean => Self::shifted_mean(class, beta_star, alpha),
            ModelKind::SpikedCovariance => Self::spiked(class, beta_star),
        }
    }

    pub fn with_planted(mut self, planted: IndexSet) -> Result<Self> {
        self.class.check_member(&planted)?;
        self.planted = Some(planted);
        Ok(self)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn class(&self) -> &StructureClass {
        &self.class
    }

    pub fn d(&self) -> usize {
        self.class.d()
    }

    pub fn s_star(&self) -> usize {
        self.class.s_star()
    }

    pub fn beta_star(&self) -> f64 {
        self.beta_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn planted(&self) -> Option<&IndexSet> {
        self.planted.as_ref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Null,
    Alternative,
}

/// The distribution an expectation or sample is taken under.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truth<'a> {
    Null,
    Planted(&'a IndexSet),
}

/// `n × d` observations, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return invalid("data matrix needs at least one row");
        }
        let d = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Ok(DataMatrix {
            n,
            d,
            values: rows.concat(),
        })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        DataMatrix {
            n,
            d,
            values: vec![0.0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    /// Same rows in a different order.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        DataMatrix {
            n: self.n,
            d: self.d,
            values,
        }
    }

    /// Column sums over the given rows.
    pub fn column_sums(&self, rows: impl IntoIterator<Item = usize>) -> Vec<f64> {
        let mut sums = vec![0.0; self.d];
        for i in rows {
            for (s, x) in sums.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        sums
    }
}

pub fn sample<R: Rng + ?Sized>(inst: &ProblemInstance, hypothesis: Hypothesis, n: usize, rng: &mut R) -> Result<DataMatrix> {
    let truth = match hypothesis {
        Hypothesis::Null => Truth::Null,
        Hypothesis::Alternative => Truth::Planted(inst.planted().ok_or(Error::MissingPlanted)?),
    };
    sample_under(inst, truth, n, rng)
}

pub fn sample_under<R: Rng + ?Sized>(inst: &ProblemInstance, truth: Truth<'_>, n: usize, rng: &mut R) -> Result<DataMatrix> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let d = inst.d();
    let mut values: Vec<f64> = Vec::with_capacity(n * d);
    let spike = (inst.beta_star / inst.s_star() as f64).sqrt();
    for _ in 0..n {
        let start = values.len();
        values.extend((0..d).map(|_| -> f64 { StandardNormal.sample(rng) }));
        if let Truth::Planted(s) = truth {
            let row = &mut values[start..];
            match inst.model {
                ModelKind::ShiftedMean => {
                    // latent mixture coin, never exposed
                    if inst.alpha >= 1.0 || rng.random::<f64>() < inst.alpha {
                        for &j in s.indices() {
                            row[j - 1] += inst.beta_star;
                        }
                    }
                }
                ModelKind::SpikedCovariance => {
                    let g: f64 = StandardNormal.sample(rng);
                    for &j in s.indices() {
                        row[j - 1] += spike * g;
                    }
                }
            }
        }
    }
    Ok(DataMatrix { n, d, values })
}

/// `dP_S/dP_0(x)` for a single observation.
pub fn likelihood_ratio_point(inst: &ProblemInstance, s: &IndexSet, x: &[f64]) -> f64 {
    log_likelihood_ratio_point(inst, s, x).exp()
}

pub fn log_likelihood_ratio_point(inst: &ProblemInstance, s: &IndexSet, x: &[f64]) -> f64 {
    let b = inst.beta_star;
    let sx: f64 = s.indices().iter().map(|&j| x[j - 1]).sum();
    match inst.model {
        ModelKind::ShiftedMean => {
            let a = b * sx - inst.s_star() as f64 * b * b / 2.0;
            log_mix(inst.alpha, a)
        }
        ModelKind::SpikedCovariance => {
            let xv2 = sx * sx / inst.s_star() as f64;
            -0.5 * (1.0 + b).ln() + b / (2.0 * (1.0 + b)) * xv2
        }
    }
}

/// `ln(α·e^a + 1 − α)`.
pub(crate) fn log_mix(alpha: f64, a: f64) -> f64 {
    if alpha >= 1.0 {
        a
    } else if alpha <= 0.0 {
        0.0
    } else {
        let (x, y) = (alpha.ln() + a, (1.0 - alpha).ln());
        let m = x.max(y);
        m + ((x - m).exp() + (y - m).exp()).ln()
    }
}

/// `h(k) = E_0[(dP_{S1}/dP_0)(dP_{S2}/dP_0)]` for `|S1 ∩ S2| = k`.
pub fn h_value(inst: &ProblemInstance, overlap: usize) -> Result<f64> {
    Ok(1.0 + h_excess(inst, overlap)?)
}

/// `h(k) − 1`, computed without cancellation near 1.
pub fn h_excess(inst: &ProblemInstance, overlap: usize) -> Result<f64> {
    let s = inst.s_star();
    if overlap > s {
        return invalid(format!("overlap {overlap} exceeds s* = {s}"));
    }
    let b = inst.beta_star;
    let k = overlap as f64;
    Ok(match inst.model {
        ModelKind::ShiftedMean => inst.alpha * inst.alpha * (k * b * b).exp_m1(),
        ModelKind::SpikedCovariance => {
            let r = b * k / s as f64;
            (-0.5 * (-r * r).ln_1p()).exp_m1()
        }
    })
}

/// Monte Carlo settings for expectations without a closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 100_000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `mean`; zero for closed forms.
    pub std_error: f64,
    pub exact: bool,
}

/// `E[q(X)]` for one observation, exact for canonical families.
pub fn expected_query_value(inst: &ProblemInstance, truth: Truth<'_>, query: &Query, mc: &McConfig) -> Result<Moments> {
    if query.max_index() > inst.d() {
        return Err(Error::DimensionMismatch {
            expected: inst.d(),
            got: query.max_index(),
        });
    }
    match query.descriptor() {
        Some(family) => Ok(closed_form(inst, truth, family)),
        None => monte_carlo(inst, truth, query, mc),
    }
}

/// Sample moments of `q` from `mc.samples` fresh observations.
pub fn monte_carlo(inst: &ProblemInstance, truth: Truth<'_>, query: &Query, mc: &McConfig) -> Result<Moments> {
    if mc.samples < 2 {
        return invalid("Monte Carlo needs at least two samples");
    }
    let mut rng = stream(mc.seed, 0, Role::Aux);
    let data = sample_under(inst, truth, mc.samples, &mut rng)?;
    let vals: Vec<f64> = data.rows().map(|r| query.evaluate(r)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(Moments {
        mean,
        variance: var,
        std_error: (var / n).sqrt(),
        exact: false,
    })
}

fn closed_form(inst: &ProblemInstance, truth: Truth<'_>, family: &QueryFamily) -> Moments {
    let p = match family.projection(inst.d()) {
        None => {
            let QueryFamily::Constant { value } = family else { unreachable!() };
            return Moments {
                mean: *value,
                variance: 0.0,
                std_error: 0.0,
                exact: true,
            };
        }
        Some(p) => p,
    };
    let w2: f64 = p.weights.iter().map(|(_, w)| w * w).sum();
    let tail = |mu: f64, var: f64| gaussian_tail(mu, var.sqrt(), p.c, p.squared);
    let mean = match truth {
        Truth::Null => tail(0.0, w2),
        Truth::Planted(s) => {
            let ws: f64 = p.weights.iter().filter(|(j, _)| s.contains(j + 1)).map(|(_, w)| w).sum();
            let b = inst.beta_star;
            match inst.model {
                ModelKind::ShiftedMean => {
                    let shifted = tail(b * ws, w2);
                    if inst.alpha >= 1.0 {
                        shifted
                    } else {
                        inst.alpha * shifted + (1.0 - inst.alpha) * tail(0.0, w2)
                    }
                }
                ModelKind::SpikedCovariance => tail(0.0, w2 + b * ws * ws / inst.s_star() as f64),
            }
        }
    };
    Moments {
        mean,
        variance: mean * (1.0 - mean),
        std_error: 0.0,
        exact: true,
    }
}

/// `P(Y ≥ c)` or `P(Y² ≥ c)` for `Y ~ N(mu, sd²)`.
fn gaussian_tail(mu: f64, sd: f64, c: f64, squared: bool) -> f64 {
    if !squared {
        return normal_sf((c - mu) / sd);
    }
    if c <= 0.0 {
        return 1.0;
    }
    let r = c.sqrt();
    normal_sf((r - mu) / sd) + normal_cdf((-r - mu) / sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sm(d: usize, s: usize, beta: f64, alpha: f64) -> ProblemInstance {
        ProblemInstance::shifted_mean(StructureClass::sparse(d, s).unwrap(), beta, alpha).unwrap()
    }

    fn set(d: usize, v: &[usize]) -> IndexSet {
        IndexSet::new(d, v.to_vec()).unwrap()
    }

    #[test]
    fn instance_validation() {
        let c = StructureClass::sparse(4, 2).unwrap();
        assert!(ProblemInstance::spiked(c.clone(), 1.0).is_err());
        assert!(ProblemInstance::shifted_mean(c.clone(), 0.5, 0.0).is_err());
        assert!(ProblemInstance::shifted_mean(c.clone(), 0.5, 1.0)
            .unwrap()
            .with_planted(set(4, &[1]))
            .is_err());
        let inst = ProblemInstance::spiked(c, 0.5).unwrap();
        assert_eq!(inst.alpha(), 1.0);
        let mut rng = stream(0, 0, Role::Data);
        assert_eq!(sample(&inst, Hypothesis::Alternative, 3, &mut rng), Err(Error::MissingPlanted));
    }

    #[test]
    fn lr_point_examples() {
        let inst = sm(3, 1, 1.0, 0.5);
        let s = set(3, &[2]);
        assert_abs_diff_eq!(likelihood_ratio_point(&inst, &s, &[0.0, 2.0, -1.0]), 2.740845, epsilon = 1e-6);
        let inst = sm(4, 2, 0.6, 1.0);
        let s = set(4, &[1, 3]);
        assert_abs_diff_eq!(likelihood_ratio_point(&inst, &s, &[0.3, 5.0, 0.3, -2.0]), 1.0, epsilon = 1e-12);
        let inst = ProblemInstance::spiked(StructureClass::sparse(4, 2).unwrap(), 0.5).unwrap();
        assert_abs_diff_eq!(
            likelihood_ratio_point(&inst, &s, &[1.0, 7.0, -1.0, 3.0]),
            1.5f64.powf(-0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_value(&sm(4, 2, 0.7, 0.3), 0).unwrap(), 1.0);
        let spiked = ProblemInstance::spiked(StructureClass::sparse(4, 2).unwrap(), 0.5).unwrap();
        assert_eq!(h_value(&spiked, 0).unwrap(), 1.0);
        assert_abs_diff_eq!(h_value(&sm(4, 2, 1.0, 0.5), 2).unwrap(), 2.597264, epsilon = 1e-6);
        assert_abs_diff_eq!(h_value(&spiked, 2).unwrap(), 1.154701, epsilon = 1e-6);
        assert!(h_value(&spiked, 3).is_err());
    }

    #[test]
    fn canonical_expectations() {
        let mc = McConfig::default();
        let inst = sm(4, 2, 0.8, 0.5);
        let q = Query::canonical(QueryFamily::CoordinateThreshold { t: 1, c: 0.4 }).unwrap();
        let m = expected_query_value(&inst, Truth::Null, &q, &mc).unwrap();
        assert_abs_diff_eq!(m.mean, 0.344578, epsilon = 1e-6);
        assert_abs_diff_eq!(m.variance, m.mean * (1.0 - m.mean), epsilon = 1e-15);
        let s = set(4, &[1, 2]);
        let alt = expected_query_value(&inst, Truth::Planted(&s), &q, &mc).unwrap().mean;
        let want = 0.5 * normal_sf(0.4 - 0.8) + 0.5 * normal_sf(0.4);
        assert_abs_diff_eq!(alt, want, epsilon = 1e-15);
        // coordinate outside S: unchanged
        let q3 = Query::canonical(QueryFamily::CoordinateThreshold { t: 3, c: 0.4 }).unwrap();
        assert_eq!(expected_query_value(&inst, Truth::Planted(&s), &q3, &mc).unwrap().mean, m.mean);

        let spiked = ProblemInstance::spiked(StructureClass::sparse(4, 2).unwrap(), 0.4).unwrap();
        let q = Query::canonical(QueryFamily::CoordinateSquareThreshold { t: 2, c: 1.2 }).unwrap();
        let v = expected_query_value(&spiked, Truth::Planted(&s), &q, &mc).unwrap().mean;
        assert_abs_diff_eq!(v, 0.317311, epsilon = 1e-6);
        let q = Query::canonical(QueryFamily::SubsetSquareThreshold {
            subset: vec![1, 2],
            c: 1.4,
        })
        .unwrap();
        let v = expected_query_value(&spiked, Truth::Planted(&s), &q, &mc).unwrap().mean;
        assert_abs_diff_eq!(v, 2.0 * normal_sf(1.0), epsilon = 1e-14);

        let qc = Query::canonical(QueryFamily::Constant { value: -0.3 }).unwrap();
        let m = expected_query_value(&inst, Truth::Planted(&s), &qc, &mc).unwrap();
        assert_eq!((m.mean, m.variance), (-0.3, 0.0));
    }

    #[test]
    fn sampler_means_and_variances() {
        let mut rng = stream(3, 0, Role::Data);
        let inst = sm(3, 1, 0.5, 1.0).with_planted(set(3, &[1])).unwrap();
        let data = sample(&inst, Hypothesis::Alternative, 100_000, &mut rng).unwrap();
        let sums = data.column_sums(0..data.n());
        let sigma = (1.0f64 / 100_000.0).sqrt();
        assert!((sums[0] / 1e5 - 0.5).abs() < 3.0 * sigma);
        assert!((sums[1] / 1e5).abs() < 3.0 * sigma);

        let inst = ProblemInstance::spiked(StructureClass::sparse(4, 2).unwrap(), 0.5)
            .unwrap()
            .with_planted(set(4, &[1, 2]))
            .unwrap();
        let data = sample(&inst, Hypothesis::Alternative, 100_000, &mut rng).unwrap();
        let var1 = data.rows().map(|r| r[0] * r[0]).sum::<f64>() / 1e5;
        // Var of X_1^2 estimate is 2·1.25², so SE ≈ 1.77/√n
        assert!((var1 - 1.25).abs() < 3.0 * 1.77 / 1e5f64.sqrt(), "{var1}");
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let mc = McConfig { samples: 200_000, seed: 9 };
        let s = set(5, &[2, 4]);
        let sm_inst = sm(5, 2, 0.7, 0.6);
        let sp_inst = ProblemInstance::spiked(StructureClass::sparse(5, 2).unwrap(), 0.6).unwrap();
        let families = vec![
            QueryFamily::CoordinateThreshold { t: 2, c: 0.3 },
            QueryFamily::ScaledSumThreshold { c: 0.5 },
            QueryFamily::SubsetSumThreshold {
                subset: vec![1, 2, 4],
                c: 0.7,
            },
            QueryFamily::CoordinateSquareThreshold { t: 4, c: 1.1 },
            QueryFamily::SubsetSquareThreshold {
                subset: vec![2, 3],
                c: 1.3,
            },
        ];
        for inst in [&sm_inst, &sp_inst] {
            for fam in &families {
                let q = Query::canonical(fam.clone()).unwrap();
                let wrapped = {
                    let q = q.clone();
                    Query::custom("wrapped", 1.0, move |x| q.evaluate(x)).unwrap()
                };
                for truth in [Truth::Null, Truth::Planted(&s)] {
                    let exact = expected_query_value(inst, truth, &q, &mc).unwrap();
                    let est = expected_query_value(inst, truth, &wrapped, &mc).unwrap();
                    assert!(!est.exact);
                    assert!((exact.mean - est.mean).abs() < 4.0 * est.std_error, "{fam:?} {truth:?}");
                }
            }
        }
    }
}
