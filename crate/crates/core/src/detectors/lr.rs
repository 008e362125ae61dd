//! Exact likelihood-ratio statistics `L(X) = |C|⁻¹ Σ_S Π_i dP_S/dP_0(x_i)`.

use super::permanent::log_permanent_exp;
use crate::error::{invalid, Error, Result};
use crate::models::{log_likelihood_ratio_point, log_mix, DataMatrix, ModelKind, ProblemInstance};
use crate::numeric::{big_ln, log_sum_exp, LogValue};
use crate::structure_classes::{enumerate_class, ClassKind, IndexSet};

/// Default cap on `n` for the subset-of-rows expansion.
pub const DEFAULT_ROW_SUBSET_CAP: usize = 12;

fn check_dims(data: &DataMatrix, inst: &ProblemInstance) -> Result<()> {
    if data.d() != inst.d() {
        return Err(Error::DimensionMismatch {
            expected: inst.d(),
            got: data.d(),
        });
    }
    Ok(())
}

fn set_sum(col: &[f64], s: &IndexSet) -> f64 {
    s.indices().iter().map(|&j| col[j - 1]).sum()
}

/// `ln L(X)`. For the shifted-mean model with `α = 1` each term collapses to
/// `exp(β* Σ_{j∈S} Σ_i x_ij − s*β*²n/2)`; otherwise the per-row product is
/// taken directly.
pub fn lr_statistic(data: &DataMatrix, inst: &ProblemInstance, cap: u64) -> Result<LogValue> {
    check_dims(data, inst)?;
    let all = enumerate_class(inst.class(), cap)?;
    let (b, s, n) = (inst.beta_star(), inst.s_star() as f64, data.n() as f64);
    let terms: Vec<f64> = if inst.model() == ModelKind::ShiftedMean && inst.alpha() >= 1.0 {
        let col = data.column_sums(0..data.n());
        all.iter().map(|set| b * set_sum(&col, set) - s * b * b * n / 2.0).collect()
    } else {
        all.iter()
            .map(|set| data.rows().map(|x| log_likelihood_ratio_point(inst, set, x)).sum())
            .collect()
    };
    Ok(LogValue::from_ln(log_sum_exp(terms) - big_ln(&inst.class().cardinality())))
}

/// `ln Σ_S Π_i [α exp(β* Σ_{j∈S} x_ij − s*β*²/2) + 1 − α]`, summed directly.
fn term_direct(data: &DataMatrix, inst: &ProblemInstance, all: &[IndexSet]) -> f64 {
    let (b, s) = (inst.beta_star(), inst.s_star() as f64);
    log_sum_exp(all.iter().map(|set| {
        data.rows()
            .map(|x| log_mix(inst.alpha(), b * set_sum(x, set) - s * b * b / 2.0))
            .sum::<f64>()
    }))
}

/// The same sum expanded over row subsets `I ⊆ [n]`:
/// `Σ_I α^{|I|}(1−α)^{n−|I|} e^{−s*β*²|I|/2} Σ_S exp(β* Σ_{j∈S} Σ_{i∈I} x_ij)`.
/// The inner sum is a permanent for matchings and an enumeration otherwise.
fn term_expansion(data: &DataMatrix, inst: &ProblemInstance, all: &[IndexSet], use_permanent: bool) -> Result<f64> {
    let n = data.n();
    let (b, s, a) = (inst.beta_star(), inst.s_star(), inst.alpha());
    let (ln_a, ln_1a) = (a.ln(), (1.0 - a).ln());
    let mut terms = Vec::with_capacity(1 << n);
    for mask in 0u64..(1u64 << n) {
        let k = mask.count_ones() as f64;
        let weight = match (k as usize, n - k as usize) {
            (0, m) => m as f64 * ln_1a,
            (i, 0) => i as f64 * ln_a,
            (_, m) => k * ln_a + m as f64 * ln_1a,
        };
        if weight == f64::NEG_INFINITY {
            continue;
        }
        let col = data.column_sums((0..n).filter(|i| mask >> i & 1 == 1));
        let inner = if use_permanent {
            let logs: Vec<Vec<f64>> = (0..s).map(|row| (0..s).map(|c| b * col[row * s + c]).collect()).collect();
            log_permanent_exp(&logs)?
        } else {
            log_sum_exp(all.iter().map(|set| b * set_sum(&col, set)))
        };
        terms.push(weight - s as f64 * b * b * k / 2.0 + inner);
    }
    Ok(log_sum_exp(terms))
}

fn check_shifted_mean(inst: &ProblemInstance) -> Result<()> {
    if inst.model() != ModelKind::ShiftedMean {
        return Err(Error::Unsupported(
            "row-subset expansion is defined for the shifted-mean model".into(),
        ));
    }
    Ok(())
}

fn check_rows(data: &DataMatrix, row_cap: usize) -> Result<()> {
    if data.n() > row_cap {
        return Err(Error::CapExceeded {
            what: "row-subset expansion".into(),
            size: data.n().to_string(),
            cap: row_cap as u64,
        });
    }
    Ok(())
}

/// `ln L(X)` through the row-subset expansion, enumerating `C` for each subset.
pub fn lr_statistic_expansion(data: &DataMatrix, inst: &ProblemInstance, cap: u64, row_cap: usize) -> Result<LogValue> {
    check_dims(data, inst)?;
    check_shifted_mean(inst)?;
    check_rows(data, row_cap)?;
    let all = enumerate_class(inst.class(), cap)?;
    let t = term_expansion(data, inst, &all, false)?;
    Ok(LogValue::from_ln(t - big_ln(&inst.class().cardinality())))
}

fn check_matching(inst: &ProblemInstance) -> Result<()> {
    if inst.class().kind() != ClassKind::PerfectMatching {
        return invalid("permanent evaluation needs the perfect matching class");
    }
    if inst.s_star() > 5 {
        return Err(Error::CapExceeded {
            what: "matching side".into(),
            size: inst.s_star().to_string(),
            cap: 5,
        });
    }
    Ok(())
}

/// `L = (1/s*!)·exp(−s*β*²n/2)·perm(M̄)`, `M̄_{k,k′} = exp(β*·Σ_i x_{i,(k−1)√d+k′})`.
pub fn matching_lr_via_permanent(data: &DataMatrix, inst: &ProblemInstance) -> Result<LogValue> {
    check_dims(data, inst)?;
    check_matching(inst)?;
    check_shifted_mean(inst)?;
    if inst.alpha() < 1.0 {
        return invalid("the single-permanent form needs alpha = 1");
    }
    let s = inst.s_star();
    let (b, n) = (inst.beta_star(), data.n() as f64);
    let col = data.column_sums(0..data.n());
    let logs: Vec<Vec<f64>> = (0..s).map(|k| (0..s).map(|c| b * col[k * s + c]).collect()).collect();
    let lp = log_permanent_exp(&logs)?;
    Ok(LogValue::from_ln(
        lp - s as f64 * b * b * n / 2.0 - big_ln(&inst.class().cardinality()),
    ))
}

/// Both evaluations of the generalized permanent sum (not divided by `|C|`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizedPermanent {
    pub direct: LogValue,
    pub expansion: LogValue,
}

pub fn generalized_permanent_sum_paths(data: &DataMatrix, inst: &ProblemInstance, row_cap: usize) -> Result<GeneralizedPermanent> {
    check_dims(data, inst)?;
    check_matching(inst)?;
    check_shifted_mean(inst)?;
    check_rows(data, row_cap)?;
    let all = enumerate_class(inst.class(), u64::MAX)?;
    Ok(GeneralizedPermanent {
        direct: LogValue::from_ln(term_direct(data, inst, &all)),
        expansion: LogValue::from_ln(term_expansion(data, inst, &all, true)?),
    })
}

/// `Σ_{S∈C} Π_i [α exp(β* Σ_{j∈S} x_ij − s*β*²/2) + 1 − α]`, direct route.
pub fn generalized_permanent_sum(data: &DataMatrix, inst: &ProblemInstance, row_cap: usize) -> Result<LogValue> {
    Ok(generalized_permanent_sum_paths(data, inst, row_cap)?.direct)
}
