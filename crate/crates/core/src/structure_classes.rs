//! Combinatorial classes of planted supports: `s*`-sparse subsets of `[d]`
//! and perfect matchings of a `√d × √d` bipartite graph.
//!
//! Indices are 1-based. A matching edge `(k, k′)` is stored as the index
//! `(k − 1)·√d + k′`, so both kinds share [`IndexSet`].

use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{big_ratio, binomial, derangement, factorial};

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet {
    d: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    /// Builds a set from indices in any order. Duplicates and out-of-range
    /// entries are rejected.
    pub fn new(d: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("index set contains duplicates");
        }
        if let Some(&j) = indices.iter().find(|&&j| j == 0 || j > d) {
            return invalid(format!("index {j} outside [1, {d}]"));
        }
        Ok(IndexSet { d, indices })
    }

    /// Matching encoded by a permutation `σ` of `[√d]` (1-based values):
    /// edge `(k, σ(k))` for every row block `k`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let s = perm.len();
        let mut seen = vec![false; s + 1];
        for &p in perm {
            if p == 0 || p > s || seen[p] {
                return invalid("not a permutation of [s]");
            }
            seen[p] = true;
        }
        let indices = perm.iter().enumerate().map(|(k, &p)| k * s + p).collect();
        Ok(IndexSet { d: s * s, indices })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// Column assignment `σ` when the set encodes a perfect matching.
    pub fn to_permutation(&self) -> Option<Vec<usize>> {
        let s = isqrt(self.d)?;
        if self.indices.len() != s {
            return None;
        }
        let mut perm = Vec::with_capacity(s);
        let mut seen = vec![false; s + 1];
        for (k, &j) in self.indices.iter().enumerate() {
            let (row, col) = ((j - 1) / s, (j - 1) % s + 1);
            if row != k || seen[col] {
                return None;
            }
            seen[col] = true;
            perm.push(col);
        }
        Some(perm)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.indices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    SparseSet,
    PerfectMatching,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructureClass {
    kind: ClassKind,
    d: usize,
    s_star: usize,
}

impl StructureClass {
    pub fn sparse(d: usize, s_star: usize) -> Result<Self> {
        if s_star == 0 || s_star > d {
            return invalid(format!("sparse class needs 1 <= s* <= d (d={d}, s*={s_star})"));
        }
        Ok(StructureClass {
            kind: ClassKind::SparseSet,
            d,
            s_star,
        })
    }

    pub fn perfect_matching(d: usize) -> Result<Self> {
        match isqrt(d) {
            Some(s) if s >= 1 => Ok(StructureClass {
                kind: ClassKind::PerfectMatching,
                d,
                s_star: s,
            }),
            _ => invalid(format!("perfect matching class needs d to be a perfect square (d={d})")),
        }
    }

    pub fn new(kind: ClassKind, d: usize, s_star: usize) -> Result<Self> {
        match kind {
            ClassKind::SparseSet => Self::sparse(d, s_star),
            ClassKind::PerfectMatching => {
                let c = Self::perfect_matching(d)?;
                if c.s_star != s_star {
                    return invalid(format!("perfect matching class needs s*^2 = d (d={d}, s*={s_star})"));
                }
                Ok(c)
            }
        }
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s_star(&self) -> usize {
        self.s_star
    }

    pub fn cardinality(&self) -> BigUint {
        match self.kind {
            ClassKind::SparseSet => binomial(self.d as u64, self.s_star as u64),
            ClassKind::PerfectMatching => factorial(self.s_star as u64),
        }
    }

    pub fn contains(&self, set: &IndexSet) -> bool {
        if set.d != self.d || set.len() != self.s_star {
            return false;
        }
        match self.kind {
            ClassKind::SparseSet => true,
            ClassKind::PerfectMatching => set.to_permutation().is_some(),
        }
    }

    pub fn check_member(&self, set: &IndexSet) -> Result<()> {
        if self.contains(set) {
            Ok(())
        } else {
            invalid(format!("{set} is not an element of the class"))
        }
    }

    /// Checks `|C| <= cap` and returns `|C|` as usize.
    pub fn check_cap(&self, cap: u64) -> Result<usize> {
        let size = self.cardinality();
        match size.to_u64() {
            Some(s) if s <= cap => Ok(s as usize),
            _ => Err(Error::CapExceeded {
                what: format!("{self}"),
                size: size.to_string(),
                cap,
            }),
        }
    }
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ClassKind::SparseSet => write!(f, "sparse_set(d={}, s*={})", self.d, self.s_star),
            ClassKind::PerfectMatching => write!(f, "perfect_matching(d={}, s*={})", self.d, self.s_star),
        }
    }
}

fn isqrt(d: usize) -> Option<usize> {
    let r = (d as f64).sqrt().round() as usize;
    (r.checked_mul(r) == Some(d)).then_some(r)
}

/// All elements of the class in lexicographic order of their index lists.
pub fn enumerate_class(class: &StructureClass, cap: u64) -> Result<Vec<IndexSet>> {
    let size = class.check_cap(cap)?;
    let mut out = Vec::with_capacity(size);
    match class.kind {
        ClassKind::SparseSet => {
            let (d, s) = (class.d, class.s_star);
            let mut comb: Vec<usize> = (1..=s).collect();
            loop {
                out.push(IndexSet { d, indices: comb.clone() });
                // advance to the next combination
                let mut i = s;
                while i > 0 && comb[i - 1] == d - s + i {
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
                comb[i - 1] += 1;
                for k in i..s {
                    comb[k] = comb[k - 1] + 1;
                }
            }
        }
        ClassKind::PerfectMatching => {
            // lexicographic permutations give lexicographic edge lists
            let mut perm: Vec<usize> = (1..=class.s_star).collect();
            loop {
                out.push(IndexSet::from_permutation(&perm)?);
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
    }
    Ok(out)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

pub fn overlap(a: &IndexSet, b: &IndexSet) -> Result<usize> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch { expected: a.d, got: b.d });
    }
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(count)
}

/// `counts[j]` is the number of elements at overlap `s* − j` from any anchor.
/// Sparse tables stop at `j = min(s*, d − s*)`, the largest reachable distance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShellTable {
    pub counts: Vec<BigUint>,
    pub total: BigUint,
}

pub fn shell_counts(class: &StructureClass) -> ShellTable {
    let (d, s) = (class.d as u64, class.s_star as u64);
    let j_max = match class.kind {
        ClassKind::SparseSet => s.min(d - s),
        ClassKind::PerfectMatching => s,
    };
    let counts: Vec<BigUint> = (0..=j_max)
        .map(|j| match class.kind {
            ClassKind::SparseSet => binomial(s, s - j) * binomial(d - s, j),
            ClassKind::PerfectMatching => binomial(s, s - j) * derangement(j),
        })
        .collect();
    ShellTable {
        counts,
        total: class.cardinality(),
    }
}

/// Distribution of `Z = |S ∩ S′|` for independent uniform `S, S′`, indexed by
/// the overlap value `z = 0..=s*`.
pub fn overlap_distribution(class: &StructureClass) -> Vec<f64> {
    let table = shell_counts(class);
    let s = class.s_star;
    let mut p = vec![0.0; s + 1];
    for (j, c) in table.counts.iter().enumerate() {
        p[s - j] = big_ratio(c, &table.total);
    }
    p
}

/// The first `m` elements in order of decreasing overlap with `anchor`,
/// lexicographic within a shell.
pub fn hamming_ball(class: &StructureClass, anchor: &IndexSet, m: usize, cap: u64) -> Result<Vec<IndexSet>> {
    class.check_member(anchor)?;
    let all = enumerate_class(class, cap)?;
    if m == 0 || m > all.len() {
        return invalid(format!("ball size {m} outside [1, {}]", all.len()));
    }
    let mut keyed: Vec<(usize, IndexSet)> = all.into_iter().map(|s| (overlap(anchor, &s).unwrap(), s)).collect();
    keyed.sort_by_key(|k| std::cmp::Reverse(k.0));
    Ok(keyed.into_iter().take(m).map(|(_, s)| s).collect())
}

pub fn sample_uniform<R: Rng + ?Sized>(class: &StructureClass, rng: &mut R) -> IndexSet {
    match class.kind {
        ClassKind::SparseSet => {
            let picked = rand::seq::index::sample(rng, class.d, class.s_star);
            let mut indices: Vec<usize> = picked.into_iter().map(|i| i + 1).collect();
            indices.sort_unstable();
            IndexSet { d: class.d, indices }
        }
        ClassKind::PerfectMatching => {
            let mut perm: Vec<usize> = (1..=class.s_star).collect();
            perm.shuffle(rng);
            IndexSet::from_permutation(&perm).expect("shuffled identity is a permutation")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Role};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn set(d: usize, v: &[usize]) -> IndexSet {
        IndexSet::new(d, v.to_vec()).unwrap()
    }

    fn u(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn enumerate_small_classes() {
        let c = StructureClass::sparse(3, 2).unwrap();
        let all = enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all, vec![set(3, &[1, 2]), set(3, &[1, 3]), set(3, &[2, 3])]);

        let pm = StructureClass::perfect_matching(4).unwrap();
        let all = enumerate_class(&pm, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all, vec![set(4, &[1, 4]), set(4, &[2, 3])]);
        assert_eq!(all[1].to_permutation().unwrap(), vec![2, 1]);

        let c = StructureClass::sparse(6, 3).unwrap();
        assert_eq!(enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap().len(), 20);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let c = StructureClass::sparse(30, 15).unwrap();
        assert!(matches!(enumerate_class(&c, 1000), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn class_validation() {
        assert!(StructureClass::sparse(3, 0).is_err());
        assert!(StructureClass::sparse(3, 4).is_err());
        assert!(StructureClass::perfect_matching(8).is_err());
        assert!(StructureClass::new(ClassKind::PerfectMatching, 9, 2).is_err());
        assert!(IndexSet::new(3, vec![1, 1]).is_err());
        assert!(IndexSet::new(3, vec![4]).is_err());
        let pm = StructureClass::perfect_matching(9).unwrap();
        assert!(pm.contains(&set(9, &[1, 5, 9])));
        assert!(!pm.contains(&set(9, &[1, 2, 9])));
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(&set(5, &[1, 2, 3]), &set(5, &[1, 2, 3])).unwrap(), 3);
        assert_eq!(overlap(&set(5, &[1, 2]), &set(5, &[3, 4])).unwrap(), 0);
        assert_eq!(overlap(&set(5, &[1, 2, 3]), &set(5, &[2, 3, 5])).unwrap(), 2);
        assert!(overlap(&set(5, &[1]), &set(6, &[1])).is_err());
    }

    #[test]
    fn shell_examples() {
        let t = shell_counts(&StructureClass::sparse(6, 3).unwrap());
        assert_eq!(t.counts, u(&[1, 9, 9, 1]));
        let t = shell_counts(&StructureClass::perfect_matching(9).unwrap());
        assert_eq!(t.counts, u(&[1, 0, 3, 2]));
        assert_eq!(t.total, BigUint::from(6u32));
        let t = shell_counts(&StructureClass::sparse(2, 2).unwrap());
        assert_eq!(t.counts, u(&[1]));
    }

    #[test]
    fn overlap_distribution_examples() {
        let p = overlap_distribution(&StructureClass::sparse(4, 2).unwrap());
        let want = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = overlap_distribution(&StructureClass::perfect_matching(9).unwrap());
        let want = [2.0 / 6.0, 3.0 / 6.0, 0.0, 1.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hamming_ball_examples() {
        let c = StructureClass::sparse(4, 2).unwrap();
        let a = set(4, &[1, 2]);
        assert_eq!(hamming_ball(&c, &a, 1, DEFAULT_ENUMERATION_CAP).unwrap(), vec![a.clone()]);
        assert_eq!(
            hamming_ball(&c, &a, 3, DEFAULT_ENUMERATION_CAP).unwrap(),
            vec![set(4, &[1, 2]), set(4, &[1, 3]), set(4, &[1, 4])]
        );
        let mut whole = hamming_ball(&c, &a, 6, DEFAULT_ENUMERATION_CAP).unwrap();
        whole.sort();
        assert_eq!(whole, enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap());
        assert!(hamming_ball(&c, &a, 0, DEFAULT_ENUMERATION_CAP).is_err());
        assert!(hamming_ball(&c, &a, 7, DEFAULT_ENUMERATION_CAP).is_err());
    }

    fn draw_counts(class: &StructureClass, draws: usize) -> HashMap<IndexSet, usize> {
        let mut rng = stream(11, 0, Role::Planted);
        let mut counts = HashMap::new();
        for _ in 0..draws {
            *counts.entry(sample_uniform(class, &mut rng)).or_insert(0) += 1;
        }
        counts
    }

    #[test]
    fn uniform_sampling_sparse() {
        let c = StructureClass::sparse(4, 2).unwrap();
        let counts = draw_counts(&c, 60_000);
        assert_eq!(counts.len(), 6);
        let sigma = (60_000.0f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for &v in counts.values() {
            assert!((v as f64 - 10_000.0).abs() < 3.0 * sigma, "{v}");
        }
    }

    #[test]
    fn uniform_sampling_matching() {
        let c = StructureClass::perfect_matching(4).unwrap();
        let counts = draw_counts(&c, 20_000);
        assert_eq!(counts.len(), 2);
        let sigma = (20_000.0f64 * 0.25).sqrt();
        for &v in counts.values() {
            assert!((v as f64 - 10_000.0).abs() < 3.0 * sigma, "{v}");
        }
        let single = StructureClass::perfect_matching(1).unwrap();
        assert_eq!(sample_uniform(&single, &mut stream(0, 0, Role::Aux)), set(1, &[1]));
    }

    fn brute_histogram(class: &StructureClass, anchor: &IndexSet) -> Vec<BigUint> {
        let s = class.s_star();
        let mut h = vec![0u64; s + 1];
        for other in enumerate_class(class, DEFAULT_ENUMERATION_CAP).unwrap() {
            h[s - overlap(anchor, &other).unwrap()] += 1;
        }
        if class.kind() == ClassKind::SparseSet {
            h.truncate(s.min(class.d() - s) + 1);
        }
        h.into_iter().map(BigUint::from).collect()
    }

    proptest! {
        #[test]
        fn sparse_shells_match_histogram(d in 1usize..=9, s_raw in 1usize..=9, pick in 0usize..1000) {
            let s = 1 + (s_raw - 1) % d;
            let c = StructureClass::sparse(d, s).unwrap();
            let all = enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap();
            let anchor = &all[pick % all.len()];
            let t = shell_counts(&c);
            prop_assert_eq!(&t.counts, &brute_histogram(&c, anchor));
            prop_assert_eq!(t.counts.iter().sum::<BigUint>(), t.total);
        }

        #[test]
        fn matching_shells_match_histogram(s in 1usize..=5, pick in 0usize..1000) {
            let c = StructureClass::perfect_matching(s * s).unwrap();
            let all = enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap();
            let anchor = &all[pick % all.len()];
            prop_assert_eq!(shell_counts(&c).counts, brute_histogram(&c, anchor));
        }

        #[test]
        fn ball_overlaps_nonincreasing(d in 2usize..=8, s_raw in 1usize..=8, pick in 0usize..1000, m_raw in 1usize..1000) {
            let s = 1 + (s_raw - 1) % d;
            let c = StructureClass::sparse(d, s).unwrap();
            let all = enumerate_class(&c, DEFAULT_ENUMERATION_CAP).unwrap();
            let anchor = &all[pick % all.len()];
            let m = 1 + (m_raw - 1) % all.len();
            let ball = hamming_ball(&c, anchor, m, DEFAULT_ENUMERATION_CAP).unwrap();
            prop_assert_eq!(ball.len(), m);
            let ov: Vec<usize> = ball.iter().map(|b| overlap(anchor, b).unwrap()).collect();
            prop_assert!(ov.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn overlap_distribution_normalized(d in 1usize..=20, s_raw in 1usize..=20) {
            let s = 1 + (s_raw - 1) % d;
            let p = overlap_distribution(&StructureClass::sparse(d, s).unwrap());
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
