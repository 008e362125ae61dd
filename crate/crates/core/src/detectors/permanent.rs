//! Exact matrix permanents.

use crate::error::{invalid, Error, Result};
use crate::numeric::log_sum_exp;

pub const RYSER_CAP: usize = 12;
pub const BRUTE_FORCE_CAP: usize = 8;

fn check_square(m: &[Vec<f64>], cap: usize) -> Result<usize> {
    let n = m.len();
    if let Some(r) = m.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: r.len() });
    }
    if n > cap {
        return Err(Error::CapExceeded {
            what: format!("{n}x{n} permanent"),
            size: n.to_string(),
            cap: cap as u64,
        });
    }
    Ok(n)
}

/// Ryser's inclusion-exclusion formula with Gray-code subset order,
/// `O(2^n · n)`.
pub fn permanent(m: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(m, RYSER_CAP)?;
    if n == 0 {
        return Ok(1.0);
    }
    let mut row_sums = vec![0.0; n];
    let mut in_set = vec![false; n];
    let mut total = 0.0;
    let mut size = 0usize;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        let sign = if in_set[j] { -1.0 } else { 1.0 };
        in_set[j] = !in_set[j];
        size = if in_set[j] { size + 1 } else { size - 1 };
        for (s, row) in row_sums.iter_mut().zip(m) {
            *s += sign * row[j];
        }
        let prod: f64 = row_sums.iter().product();
        if size.is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    Ok(if n % 2 == 0 { total } else { -total })
}

/// Sum over all `n!` permutations. Test oracle only.
pub fn permanent_brute_force(m: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(m, BRUTE_FORCE_CAP)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    permute(&mut perm, 0, &mut |p| {
        total += p.iter().enumerate().map(|(i, &j)| m[i][j]).product::<f64>()
    });
    Ok(total)
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// `ln perm(exp(L))` for a matrix of log-entries, with per-row rescaling so
/// large exponents do not overflow.
pub fn log_permanent_exp(log_entries: &[Vec<f64>]) -> Result<f64> {
    check_square(log_entries, RYSER_CAP)?;
    let mut shift = 0.0;
    let scaled: Vec<Vec<f64>> = log_entries
        .iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return vec![0.0; row.len()];
            }
            shift += m;
            row.iter().map(|x| (x - m).exp()).collect()
        })
        .collect();
    if log_entries.iter().any(|r| r.iter().all(|x| *x == f64::NEG_INFINITY)) {
        return Ok(f64::NEG_INFINITY);
    }
    let p = permanent(&scaled)?;
    if p < 0.0 {
        return invalid("negative permanent of a nonnegative matrix (round-off)");
    }
    Ok(shift + p.ln())
}

/// Brute-force counterpart of [`log_permanent_exp`].
pub fn log_permanent_exp_brute_force(log_entries: &[Vec<f64>]) -> Result<f64> {
    let n = check_square(log_entries, BRUTE_FORCE_CAP)?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut terms = Vec::new();
    permute(&mut perm, 0, &mut |p| {
        terms.push(p.iter().enumerate().map(|(i, &j)| log_entries[i][j]).sum::<f64>())
    });
    Ok(log_sum_exp(terms))
}
