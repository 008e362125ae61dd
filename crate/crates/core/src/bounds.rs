//! Lower bounds: the oracle-game risk bound, the overlap-shell quantity
//! behind `sup|C(q)|`, closed-form ratio bounds, exact χ² divergences and
//! the phase-regime classifier.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{h_excess, ProblemInstance};
use crate::numeric::{big_ratio, NeumaierSum};
use crate::structure_classes::{overlap, overlap_distribution, shell_counts, IndexSet, StructureClass};

/// `min{1 − T·sup/|C| + min{2ξ, T/|C|, sup/|C|}, T/|C| + 1 − 2ξ, 1}`.
pub fn risk_lower_bound(t: u64, sup_cq: &BigUint, class_size: &BigUint, xi: f64) -> Result<f64> {
    if class_size.is_zero() {
        return invalid("class size must be at least 1");
    }
    if !(0.0..0.25).contains(&xi) {
        return invalid(format!("xi must lie in [0, 1/4) (got {xi})"));
    }
    let r = big_ratio(sup_cq, class_size);
    let tr = big_ratio(&BigUint::from(t), class_size);
    let t_times = big_ratio(&(BigUint::from(t) * sup_cq), class_size);
    let first = 1.0 - t_times + (2.0 * xi).min(tr).min(r);
    let second = tr + 1.0 - 2.0 * xi;
    Ok(first.min(second).min(1.0))
}

fn h_excess_table(inst: &ProblemInstance) -> Result<Vec<f64>> {
    (0..=inst.s_star()).map(|z| h_excess(inst, z)).collect()
}

/// `E[h(|S ∩ S′|)] − 1` for `S′` uniform over the `m` elements nearest any anchor
/// `S`: full shells by count, the last shell by the remainder.
pub fn combinatorial_excess(class: &StructureClass, inst: &ProblemInstance, m: &BigUint) -> Result<f64> {
    let table = shell_counts(class);
    if m.is_zero() || *m > table.total {
        return invalid(format!("ball size {m} outside [1, {}]", table.total));
    }
    if inst.class() != class {
        return invalid("instance class differs from the requested class");
    }
    let ex = h_excess_table(inst)?;
    let s = class.s_star();
    let mut left = m.clone();
    let mut acc = NeumaierSum::default();
    for (j, count) in table.counts.iter().enumerate() {
        let take = if *count <= left { count.clone() } else { left.clone() };
        acc.add(big_ratio(&take, m) * ex[s - j]);
        left -= &take;
        if left.is_zero() {
            break;
        }
    }
    Ok(acc.value())
}

/// `E[h(|S ∩ S′|)]` over the `m`-element Hamming ball.
pub fn combinatorial_quantity(class: &StructureClass, inst: &ProblemInstance, m: &BigUint) -> Result<f64> {
    Ok(1.0 + combinatorial_excess(class, inst, m)?)
}

/// Largest `m` for which `E[h] − 1 ≥ threshold_excess` can hold: one less than
/// the smallest failing `m`, `|C|` when nothing fails, 0 when `m = 1` fails.
pub fn sup_distinguishable_for_threshold(class: &StructureClass, inst: &ProblemInstance, threshold_excess: f64) -> Result<BigUint> {
    let total = class.cardinality();
    let fails = |m: &BigUint| -> Result<bool> { Ok(combinatorial_excess(class, inst, m)? < threshold_excess) };
    if !fails(&total)? {
        return Ok(total);
    }
    let one = BigUint::one();
    if fails(&one)? {
        return Ok(BigUint::zero());
    }
    // fails(lo) is false, fails(hi) is true.
    let (mut lo, mut hi) = (one, total);
    while &hi - &lo > BigUint::one() {
        let mid: BigUint = (&lo + &hi) >> 1u32;
        if fails(&mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}

/// Numeric bound on `sup_q |C(q)|` with threshold `1 + ln(1/ξ)/n`.
pub fn sup_distinguishable_numeric(class: &StructureClass, inst: &ProblemInstance, n: usize, xi: f64) -> Result<BigUint> {
    if n == 0 || !(xi > 0.0 && xi < 0.25) {
        return invalid("need n ≥ 1 and xi in (0, 1/4)");
    }
    sup_distinguishable_for_threshold(class, inst, (1.0 / xi).ln() / n as f64)
}

/// Linear-scan counterpart of [`sup_distinguishable_for_threshold`]; test oracle.
pub fn sup_distinguishable_linear(class: &StructureClass, inst: &ProblemInstance, threshold_excess: f64, cap: u64) -> Result<BigUint> {
    let total = class.check_cap(cap)? as u64;
    for m in 1..=total {
        if combinatorial_excess(class, inst, &BigUint::from(m))? < threshold_excess {
            return Ok(BigUint::from(m - 1));
        }
    }
    Ok(BigUint::from(total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d: usize,
    pub s_star: usize,
    pub n: usize,
    pub beta_star: f64,
    pub alpha: f64,
    pub xi: f64,
    /// The small constant in the matching bound.
    pub delta: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.s_star == 0 || self.s_star > self.d || self.n == 0 {
            return invalid("need 1 ≤ s* ≤ d and n ≥ 1");
        }
        if !(self.beta_star > 0.0) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid("need beta* > 0 and alpha in (0, 1]");
        }
        if !(self.xi > 0.0 && self.xi < 0.25) {
            return invalid("xi must lie in (0, 1/4)");
        }
        Ok(())
    }

    /// `ζ = d/(2s*²)`.
    pub fn zeta(&self) -> f64 {
        self.d as f64 / (2.0 * (self.s_star as f64).powi(2))
    }

    /// `τ = √(ln(1/ξ)/n)`.
    pub fn tau(&self) -> f64 {
        ((1.0 / self.xi).ln() / self.n as f64).sqrt()
    }

    fn log_signal(&self) -> f64 {
        (self.tau().powi(2) / self.alpha.powi(2)).ln_1p() / self.beta_star.powi(2)
    }

    /// `γ = ζ·ln(1 + τ²/α²)/(2β*²)`.
    pub fn gamma(&self) -> f64 {
        self.zeta() * self.log_signal() / 2.0
    }

    /// `γ̄ = [1 − (1+2s*)β*²/(s*² − s*²β*²)]^{−1/2}`; needs the bracket positive.
    pub fn gamma_bar(&self) -> Result<f64> {
        let (s, b2) = ((self.s_star as f64), self.beta_star.powi(2));
        let inner = 1.0 - (1.0 + 2.0 * s) * b2 / (s * s - s * s * b2);
        if !(b2 < 1.0) || !(inner > 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "gamma-bar undefined: bracket {inner} at beta*={}",
                self.beta_star
            )));
        }
        Ok(inner.powf(-0.5))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparseRegime {
    /// `s*²/d` small.
    Dilute,
    /// `s*²/d` bounded away from zero.
    Dense,
}

impl SparseRegime {
    /// `Dilute` when `s*² < d`.
    pub fn for_params(p: &BoundParams) -> Self {
        if p.s_star * p.s_star < p.d {
            SparseRegime::Dilute
        } else {
            SparseRegime::Dense
        }
    }
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        1.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Ratio bound for sparse sets: `2·exp{−ln ζ·[ln(1+τ²/α²)/β*² − 2]}` (dilute) or
/// `2·exp[−ln γ·(2γs*²/d − 1)]` (dense), clamped to `[0, 1]`.
pub fn closed_form_bound_sparse(p: &BoundParams, regime: SparseRegime) -> Result<f64> {
    p.validate()?;
    let v = match regime {
        SparseRegime::Dilute => 2.0 * (-p.zeta().ln() * (p.log_signal() - 2.0)).exp(),
        SparseRegime::Dense => {
            let g = p.gamma();
            let s2 = (p.s_star as f64).powi(2);
            2.0 * (-g.ln() * (2.0 * g * s2 / p.d as f64 - 1.0)).exp()
        }
    };
    Ok(clamp_unit(v))
}

/// Ratio bound for matchings, `2·exp(−δ ln d · 3d^δ/8)`, valid when
/// `ln(1+τ²/α²)/β*² ≥ 3d^δ/2 + 1`.
pub fn closed_form_bound_matching(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    if !(p.delta > 0.0) {
        return invalid("delta must be positive");
    }
    let (d, dd) = (p.d as f64, (p.d as f64).powf(p.delta));
    let need = 1.5 * dd + 1.0;
    if p.log_signal() < need {
        return Err(Error::HypothesisViolated(format!(
            "matching bound needs ln(1+tau^2/alpha^2)/beta*^2 = {} >= {need}",
            p.log_signal()
        )));
    }
    Ok(clamp_unit(2.0 * (-p.delta * d.ln() * 3.0 * dd / 8.0).exp()))
}

/// `δ` solving `d/s*² = d^{2δ}`.
pub fn spca_delta(d: usize, s_star: usize) -> f64 {
    let (d, s) = (d as f64, s_star as f64);
    (d / (s * s)).ln() / (2.0 * d.ln())
}

/// Ratio bound for sparse PCA with `δ` from [`spca_delta`], valid when
/// `2d^{−δ}(γ̄ − 1) ≤ τ²`.
pub fn closed_form_bound_spca(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    let delta = spca_delta(p.d, p.s_star);
    if !(delta > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "sparse PCA bound needs d > s*^2 (delta = {delta})"
        )));
    }
    let d = p.d as f64;
    let gb = p.gamma_bar()?;
    let tau2 = p.tau().powi(2);
    let lift = 2.0 * d.powf(-delta) * (gb - 1.0);
    if lift > tau2 {
        return Err(Error::HypothesisViolated(format!(
            "sparse PCA bound needs 2d^-delta(gamma_bar - 1) = {lift} <= tau^2 = {tau2}"
        )));
    }
    let ratio = (1.0 + tau2) / (1.0 + lift);
    let brace = (1.0 - ratio.powi(-2)).max(0.0).sqrt();
    let s = p.s_star as f64;
    Ok(clamp_unit(2.0 * (-delta * d.ln() * (s / p.beta_star * brace - 1.0)).exp()))
}

/// `χ²(mixture, P_0^n) = E[h(Z)^n] − 1`: over the whole class through the
/// overlap distribution, or over `subset` by pairwise sums.
pub fn chi2_mixture_exact(class: &StructureClass, inst: &ProblemInstance, subset: Option<&[IndexSet]>, n: usize) -> Result<f64> {
    if inst.class() != class {
        return invalid("instance class differs from the requested class");
    }
    let ex = h_excess_table(inst)?;
    let power = |z: usize| (n as f64 * ex[z].ln_1p()).exp_m1();
    match subset {
        None => {
            let p = overlap_distribution(class);
            Ok(p.iter().enumerate().map(|(z, pz)| pz * power(z)).collect::<NeumaierSum>().value())
        }
        Some(sets) => {
            if sets.is_empty() {
                return invalid("subset must be nonempty");
            }
            let mut hist = vec![0u64; class.s_star() + 1];
            for a in sets {
                class.check_member(a)?;
                for b in sets {
                    hist[overlap(a, b)?] += 1;
                }
            }
            let m2 = (sets.len() as f64).powi(2);
            Ok(hist
                .iter()
                .enumerate()
                .map(|(z, &c)| c as f64 / m2 * power(z))
                .collect::<NeumaierSum>()
                .value())
        }
    }
}

/// `max(0, 1 − √χ²)`.
pub fn lecam_risk_lower_bound(chi2: f64) -> Result<f64> {
    if !(chi2 >= 0.0) {
        return invalid(format!("chi2 must be nonnegative (got {chi2})"));
    }
    Ok((1.0 - chi2.sqrt()).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p_s: f64,
    pub p_beta: f64,
    pub p_n: f64,
    pub p_alpha: f64,
}

impl PhasePoint {
    pub fn new(p_s: f64, p_beta: f64, p_n: f64, p_alpha: f64) -> Result<Self> {
        let pt = PhasePoint { p_s, p_beta, p_n, p_alpha };
        pt.validate()?;
        Ok(pt)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.p_s)
            && self.p_beta >= 0.0
            && self.p_alpha >= 0.0
            && self.p_n.is_finite()
            && self.p_beta.is_finite()
            && self.p_alpha.is_finite();
        if !ok {
            return invalid(format!("invalid phase point {self:?}"));
        }
        Ok(())
    }

    /// Exponents of a concrete parameter tuple.
    pub fn from_parameters(d: f64, s_star: f64, beta_star: f64, n: f64, alpha: f64) -> Result<Self> {
        let ld = d.ln();
        Self::new(s_star.ln() / ld, (1.0 / beta_star).ln() / ld, n.ln() / ld, (1.0 / alpha).ln() / ld)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseProblem {
    SparseSm,
    MatchingSm,
    Spca,
}

impl PhaseProblem {
    pub fn name(self) -> &'static str {
        match self {
            PhaseProblem::SparseSm => "sparse_sm",
            PhaseProblem::MatchingSm => "matching_sm",
            PhaseProblem::Spca => "spca",
        }
    }
}

impl fmt::Display for PhaseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "sparse_sm" => Ok(PhaseProblem::SparseSm),
            "matching_sm" => Ok(PhaseProblem::MatchingSm),
            "spca" => Ok(PhaseProblem::Spca),
            _ => invalid(format!("unknown problem `{s}` (expected sparse-sm, matching-sm or spca)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Impossible,
    IntractablePossible,
    Tractable,
    Boundary,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Impossible => "impossible",
            Regime::IntractablePossible => "intractable_possible",
            Regime::Tractable => "tractable",
            Regime::Boundary => "boundary",
        }
    }

    /// Order by how much is achievable; `None` for boundary points.
    pub fn rank(self) -> Option<u8> {
        match self {
            Regime::Impossible => Some(0),
            Regime::IntractablePossible => Some(1),
            Regime::Tractable => Some(2),
            Regime::Boundary => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const PHASE_TOLERANCE: f64 = 1e-12;

fn pos(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Sign {
    Neg,
    Zero,
    Pos,
}

fn sign(x: f64) -> Sign {
    if x.abs() <= PHASE_TOLERANCE {
        Sign::Zero
    } else if x > 0.0 {
        Sign::Pos
    } else {
        Sign::Neg
    }
}

fn classify_mean(a: f64, b1: f64, b2: f64) -> Regime {
    match sign(a) {
        Sign::Zero => Regime::Boundary,
        Sign::Pos => Regime::Tractable,
        Sign::Neg => match (sign(b1), sign(b2)) {
            (Sign::Neg, _) | (_, Sign::Neg) => Regime::Impossible,
            (Sign::Pos, Sign::Pos) => Regime::IntractablePossible,
            _ => Regime::Boundary,
        },
    }
}

/// Regime of a phase point, log factors ignored. Matching problems use
/// `p_s = 1/2` regardless of the input.
pub fn phase_classify(pt: &PhasePoint, problem: PhaseProblem) -> Result<Regime> {
    pt.validate()?;
    let PhasePoint { p_s, p_beta, p_n, p_alpha } = *pt;
    Ok(match problem {
        PhaseProblem::SparseSm => {
            let a = pos(p_n - 2.0 * p_alpha) + pos(2.0 * p_s - 1.0) - 2.0 * p_beta;
            classify_mean(a, p_s - 2.0 * p_beta, p_n - p_alpha - 2.0 * p_beta)
        }
        PhaseProblem::MatchingSm => {
            let a = pos(p_n - 2.0 * p_alpha) - 2.0 * p_beta;
            classify_mean(a, 0.5 - 2.0 * p_beta, p_n - p_alpha - 2.0 * p_beta)
        }
        PhaseProblem::Spca => {
            let x = -p_beta;
            let statistical = x - (p_s - p_n) / 2.0;
            let computational = x - (p_s - p_n / 2.0);
            match (sign(statistical), sign(computational)) {
                (Sign::Zero, _) | (_, Sign::Zero) => Regime::Boundary,
                (Sign::Neg, _) => Regime::Impossible,
                (_, Sign::Pos) => Regime::Tractable,
                _ => Regime::IntractablePossible,
            }
        }
    })
}

/// `(Σ h a / Σ a, Σ h b / Σ b)` for positive `a`, `b` with `b_{i+1}/b_i = κ > 1`,
/// `a_{i+1}/a_i ≥ κ` and nonincreasing `h`; the first is at most the second.
pub fn weighted_monotone_average(a: &[f64], b: &[f64], h: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || a.len() != b.len() || a.len() != h.len() {
        return invalid("sequences must be nonempty and of equal length");
    }
    if a.iter().chain(b).any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::HypothesisViolated("a and b must be positive".into()));
    }
    if h.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::HypothesisViolated("h must be nonincreasing".into()));
    }
    if b.len() > 1 {
        let kappa = b[1] / b[0];
        if !(kappa > 1.0) {
            return Err(Error::HypothesisViolated(format!("ratio kappa = {kappa} must exceed 1")));
        }
        for (wa, wb) in a.windows(2).zip(b.windows(2)) {
            let (ra, rb) = (wa[1] / wa[0], wb[1] / wb[0]);
            if (rb - kappa).abs() > 1e-9 * kappa {
                return Err(Error::HypothesisViolated("b must grow geometrically".into()));
            }
            if ra < kappa * (1.0 - 1e-12) {
                return Err(Error::HypothesisViolated(format!("a ratio {ra} below kappa {kappa}")));
            }
        }
    }
    let avg = |w: &[f64]| {
        let num: NeumaierSum = w.iter().zip(h).map(|(x, y)| x * y).collect();
        let den: NeumaierSum = w.iter().copied().collect();
        num.value() / den.value()
    };
    Ok((avg(a), avg(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::h_value;
    use crate::rng::{stream, Role};
    use crate::structure_classes::{enumerate_class, hamming_ball, DEFAULT_ENUMERATION_CAP};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn sm(class: StructureClass, beta: f64, alpha: f64) -> ProblemInstance {
        ProblemInstance::shifted_mean(class, beta, alpha).unwrap()
    }

    #[test]
    fn risk_bound_examples() {
        assert_abs_diff_eq!(risk_lower_bound(2, &big(1), &big(20), 0.05).unwrap(), 0.95, epsilon = 1e-15);
        assert_eq!(risk_lower_bound(0, &big(3), &big(20), 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(risk_lower_bound(0, &big(3), &big(20), 0.05).unwrap(), 0.9, epsilon = 1e-15);
        assert!(risk_lower_bound(1, &big(1), &big(0), 0.05).is_err());
        // Large T with large sup becomes vacuous.
        assert!(risk_lower_bound(50, &big(10), &big(20), 0.05).unwrap() < 0.1);
    }

    #[test]
    fn risk_bound_monotone_in_sup() {
        for t in 0..12u64 {
            for c in [8u64, 20, 100] {
                let mut prev = f64::INFINITY;
                for sup in 0..=c {
                    let v = risk_lower_bound(t, &big(sup), &big(c), 0.05).unwrap();
                    assert!(v <= prev + 1e-15);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn risk_bound_first_branch_monotone_in_t() {
        // Once the first branch binds, more queries can only lower the bound.
        for c in [8u64, 20] {
            for sup in 1..=c {
                let first = |t: u64| {
                    let (r, tr) = (sup as f64 / c as f64, t as f64 / c as f64);
                    1.0 - t as f64 * r + (0.1f64).min(tr).min(r)
                };
                for t in 0..30 {
                    assert!(first(t + 1) <= first(t) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn shell_quantity_examples() {
        let class = StructureClass::sparse(4, 2).unwrap();
        let inst = sm(class.clone(), 0.1f64.sqrt(), 1.0);
        let top = combinatorial_quantity(&class, &inst, &big(1)).unwrap();
        assert_abs_diff_eq!(top, h_value(&inst, 2).unwrap(), epsilon = 1e-15);
        let all = combinatorial_quantity(&class, &inst, &big(6)).unwrap();
        assert!((all - 1.107014).abs() < 5e-7, "{all}");
        assert!(combinatorial_quantity(&class, &inst, &big(0)).is_err());
        assert!(combinatorial_quantity(&class, &inst, &big(7)).is_err());
    }

    fn ball_average(class: &StructureClass, inst: &ProblemInstance, anchor: &IndexSet, m: usize) -> f64 {
        let ball = hamming_ball(class, anchor, m, DEFAULT_ENUMERATION_CAP).unwrap();
        ball.iter()
            .map(|s| h_excess(inst, overlap(anchor, s).unwrap()).unwrap())
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn shell_quantity_matches_explicit_balls() {
        let classes = [StructureClass::sparse(7, 3).unwrap(), StructureClass::perfect_matching(16).unwrap()];
        for class in classes {
            let inst = sm(class.clone(), 0.6, 0.7);
            let all = enumerate_class(&class, DEFAULT_ENUMERATION_CAP).unwrap();
            let mut rng = stream(3, 0, Role::Aux);
            let mut prev = f64::INFINITY;
            for m in 1..=all.len() {
                let q = combinatorial_excess(&class, &inst, &big(m as u64)).unwrap();
                assert!(q <= prev + 1e-15);
                prev = q;
                if m % 5 == 1 {
                    for _ in 0..3 {
                        let anchor = &all[rng.random_range(0..all.len())];
                        assert_abs_diff_eq!(ball_average(&class, &inst, anchor, m), q, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sup_distinguishable_examples() {
        let class = StructureClass::sparse(6, 2).unwrap();
        let inst = sm(class.clone(), 0.5f64.sqrt(), 1.0);
        let h_top = h_excess(&inst, 2).unwrap();
        assert_eq!(sup_distinguishable_for_threshold(&class, &inst, h_top * 1.01).unwrap(), big(0));
        assert_eq!(sup_distinguishable_for_threshold(&class, &inst, 0.0).unwrap(), big(15));
        let bin = sup_distinguishable_for_threshold(&class, &inst, 0.2).unwrap();
        let lin = sup_distinguishable_linear(&class, &inst, 0.2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(bin, lin);
        assert_eq!(bin, big(15));
        let bin = sup_distinguishable_for_threshold(&class, &inst, 0.5).unwrap();
        assert_eq!(
            bin,
            sup_distinguishable_linear(&class, &inst, 0.5, DEFAULT_ENUMERATION_CAP).unwrap()
        );
        assert_eq!(bin, big(13));
        // n → ∞ drives the threshold to 1.
        assert_eq!(sup_distinguishable_numeric(&class, &inst, 1 << 40, 0.05).unwrap(), big(15));
    }

    #[test]
    fn binary_search_equals_linear_scan() {
        let classes = [StructureClass::sparse(8, 3).unwrap(), StructureClass::perfect_matching(25).unwrap()];
        for class in classes {
            for beta in [0.2, 0.5, 0.9] {
                let inst = sm(class.clone(), beta, 0.8);
                let hi = h_excess(&inst, inst.s_star()).unwrap();
                for k in 0..=40 {
                    let thr = hi * k as f64 / 36.0;
                    let a = sup_distinguishable_for_threshold(&class, &inst, thr).unwrap();
                    let b = sup_distinguishable_linear(&class, &inst, thr, DEFAULT_ENUMERATION_CAP).unwrap();
                    assert_eq!(a, b, "{class} beta={beta} thr={thr}");
                }
            }
        }
    }

    #[test]
    fn sparse_closed_form_examples() {
        // ln(1+τ²/α²)/β*² = 2 makes the exponent vanish.
        let xi: f64 = 0.05;
        let n = 10usize;
        let tau2 = (1.0 / xi).ln() / n as f64;
        let beta = (tau2.ln_1p() / 2.0).sqrt();
        let p = BoundParams {
            d: 100,
            s_star: 2,
            n,
            beta_star: beta,
            alpha: 1.0,
            xi,
            delta: 0.1,
        };
        assert_abs_diff_eq!(closed_form_bound_sparse(&p, SparseRegime::Dilute).unwrap(), 1.0, epsilon = 1e-12);
        // ζ = 10 (d = 80, s* = 2), τ² = 1 (ξ = e⁻², n = 2), β*² = 0.1.
        let p = BoundParams {
            d: 80,
            s_star: 2,
            n: 2,
            beta_star: 0.1f64.sqrt(),
            alpha: 1.0,
            xi: (-2f64).exp(),
            delta: 0.1,
        };
        assert_abs_diff_eq!(p.zeta(), 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.tau(), 1.0, epsilon = 1e-15);
        let v = closed_form_bound_sparse(&p, SparseRegime::Dilute).unwrap();
        let want = 2.0 * (-(10f64.ln()) * (2f64.ln() / 0.1 - 2.0)).exp();
        assert_abs_diff_eq!(v, want, epsilon = 1e-18);
        assert!((v - 2.34e-5).abs() < 1e-7, "{v}");
        let dense = closed_form_bound_sparse(&BoundParams { d: 16, s_star: 4, ..p }, SparseRegime::Dense).unwrap();
        assert!((0.0..=1.0).contains(&dense));
    }

    #[test]
    fn matching_closed_form_examples() {
        let p = BoundParams {
            d: 16,
            s_star: 4,
            n: 2,
            beta_star: 0.1,
            alpha: 1.0,
            xi: (-2f64).exp(),
            delta: 0.5,
        };
        assert_abs_diff_eq!(p.tau(), 1.0, epsilon = 1e-15);
        let v = closed_form_bound_matching(&p).unwrap();
        assert_abs_diff_eq!(v, 2.0 * (-0.5 * 16f64.ln() * 1.5).exp(), epsilon = 1e-15);
        assert!((v - 0.25).abs() < 1e-12);
        let weak = BoundParams { beta_star: 1.0, ..p };
        assert!(matches!(closed_form_bound_matching(&weak), Err(Error::HypothesisViolated(_))));
        let tiny = BoundParams { delta: 1e-9, ..p };
        assert_abs_diff_eq!(closed_form_bound_matching(&tiny).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spca_closed_form_examples() {
        let p = BoundParams {
            d: 10,
            s_star: 2,
            n: 1,
            beta_star: 0.5,
            alpha: 1.0,
            xi: 0.05,
            delta: 0.1,
        };
        assert!((p.gamma_bar().unwrap() - 1.309307).abs() < 5e-7);
        assert_abs_diff_eq!(spca_delta(256, 2), 0.375, epsilon = 1e-15);
        // τ² = 0.04 with ξ = e⁻², n = 50.
        let p = BoundParams {
            d: 256,
            s_star: 2,
            n: 50,
            beta_star: 0.05,
            alpha: 1.0,
            xi: (-2f64).exp(),
            delta: 0.0,
        };
        assert_abs_diff_eq!(p.tau().powi(2), 0.04, epsilon = 1e-15);
        let v = closed_form_bound_spca(&p).unwrap();
        let gb = p.gamma_bar().unwrap();
        let lift = 2.0 * 256f64.powf(-0.375) * (gb - 1.0);
        let brace = (1.0 - (1.04 / (1.0 + lift)).powi(-2)).sqrt();
        let want = (2.0 * (-0.375 * 256f64.ln() * (2.0 / 0.05 * brace - 1.0)).exp()).min(1.0);
        assert_abs_diff_eq!(v, want, epsilon = 1e-15);
        let fail = BoundParams { n: 100000, ..p };
        assert!(matches!(closed_form_bound_spca(&fail), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn chi2_examples() {
        let class = StructureClass::sparse(4, 2).unwrap();
        let inst = sm(class.clone(), 0.1f64.sqrt(), 1.0);
        let v = chi2_mixture_exact(&class, &inst, None, 1).unwrap();
        assert!((v - 0.107014).abs() < 1e-6, "{v}");
        let all = enumerate_class(&class, DEFAULT_ENUMERATION_CAP).unwrap();
        let w = chi2_mixture_exact(&class, &inst, Some(&all), 1).unwrap();
        assert!((v - w).abs() <= 1e-12 * v);
        let single = chi2_mixture_exact(&class, &inst, Some(&all[2..3]), 7).unwrap();
        assert_abs_diff_eq!(single, h_value(&inst, 2).unwrap().powi(7) - 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lecam_risk_lower_bound(0.0).unwrap(), 1.0);
        // 1 − √0.107014 = 0.6728701 (the rounded reference 0.672866 is off in the sixth place).
        assert!((lecam_risk_lower_bound(0.107014).unwrap() - 0.672866).abs() < 5e-6);
        assert_eq!(lecam_risk_lower_bound(1.5).unwrap(), 0.0);
    }

    #[test]
    fn phase_examples() {
        let c = |a, b, n, al| phase_classify(&PhasePoint::new(a, b, n, al).unwrap(), PhaseProblem::SparseSm).unwrap();
        assert_eq!(c(0.25, 0.05, 0.3, 0.0), Regime::Tractable);
        assert_eq!(c(0.25, 0.2, 0.3, 0.0), Regime::Impossible);
        assert_eq!(c(0.5, 0.15, 0.7, 0.3), Regime::IntractablePossible);
        assert_eq!(c(0.25, 0.15, 0.3, 0.0), Regime::Boundary);
        for p_s in [0.0, 0.3, 0.9] {
            let pt = PhasePoint::new(p_s, 0.1, 0.5, 0.1).unwrap();
            let base = PhasePoint { p_s: 0.5, ..pt };
            assert_eq!(
                phase_classify(&pt, PhaseProblem::MatchingSm).unwrap(),
                phase_classify(&base, PhaseProblem::MatchingSm).unwrap()
            );
        }
        let sp = |b, n| phase_classify(&PhasePoint::new(0.25, b, n, 0.0).unwrap(), PhaseProblem::Spca).unwrap();
        assert_eq!(sp(0.0, 1.0), Regime::Tractable);
        assert_eq!(sp(0.5, 1.0), Regime::Impossible);
        assert_eq!(sp(0.3, 1.0), Regime::IntractablePossible);
        assert!(PhasePoint::new(1.5, 0.0, 0.0, 0.0).is_err());
        assert_eq!("matching-sm".parse::<PhaseProblem>().unwrap(), PhaseProblem::MatchingSm);
    }

    #[test]
    fn weighted_average_trivial_cases() {
        let b = [1.0, 2.0, 4.0];
        let (l, r) = weighted_monotone_average(&b, &b, &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(l, r);
        let (l, r) = weighted_monotone_average(&[1.0, 5.0, 50.0], &b, &[2.0; 3]).unwrap();
        assert_abs_diff_eq!(l, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-15);
        assert!(weighted_monotone_average(&[1.0, 1.5, 2.0], &b, &[3.0, 2.0, 1.0]).is_err());
        assert!(weighted_monotone_average(&b, &b, &[1.0, 2.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn weighted_average_inequality(
            kappa in 1.0001f64..3.0,
            len in 1usize..12,
            extra in proptest::collection::vec(1.0f64..2.0, 12),
            drops in proptest::collection::vec(0.0f64..1.0, 12),
            a0 in 0.1f64..10.0,
            b0 in 0.1f64..10.0,
        ) {
            let b: Vec<f64> = (0..len).map(|i| b0 * kappa.powi(i as i32)).collect();
            let mut a = vec![a0];
            for i in 1..len {
                a.push(a[i - 1] * kappa * extra[i]);
            }
            let mut h = vec![5.0];
            for i in 1..len {
                h.push(h[i - 1] - drops[i]);
            }
            let (l, r) = weighted_monotone_average(&a, &b, &h).unwrap();
            prop_assert!(l <= r + 1e-12 * r.abs().max(1.0));
        }
    }
}
