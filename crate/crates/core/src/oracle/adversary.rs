//! Worst-case oracle for the lower-bound game.
//!
//! The adversary commits to a planted set (or to the null) at the first
//! query and answers every later query with exact expectations under that
//! commitment. For a declared schedule `q_1..q_T` the commitment is drawn
//! from one of two constructions:
//!
//! * sequence: if every `C(q_t)` has an element `S^t` outside all other
//!   `C(q_t′)`, each `S^t` gets mass `2ξ/T` and the elements outside
//!   `∪ C(q_t)` share `1 − 2ξ`;
//! * uniform: otherwise all mass goes uniformly to `C \ ∪ C(q_t)`.
//!
//! Mass that has no eligible element left goes to answering the null
//! expectation, which is always valid.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{distinguishable_mask, OracleConfig, OracleSession, OracleTranscript, Query, ResponseSource};
use crate::error::{Error, Result};
use crate::models::{expected_query_value, McConfig, ProblemInstance, Truth};
use crate::structure_classes::{enumerate_class, IndexSet};

#[derive(Clone, Debug, PartialEq)]
pub enum AdversaryMode {
    NullWorstCase,
    Alternative(IndexSet),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Commitment {
    Planted(IndexSet),
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Sequence,
    Uniform,
    /// No declared schedule: the pool shrinks as queries arrive.
    Dynamic,
}

/// Commitment distribution for a declared schedule.
#[derive(Clone, Debug, Serialize)]
pub struct CommitmentPlan {
    pub construction: Construction,
    pub atoms: Vec<(Commitment, f64)>,
    /// `|C(q_t)|` for each scheduled query.
    pub distinguishable_sizes: Vec<usize>,
    /// `|C \ ∪ C(q_t)|`.
    pub pool_size: usize,
}

impl CommitmentPlan {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Commitment {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, w) in &self.atoms {
            acc += w;
            if u < acc {
                return c.clone();
            }
        }
        self.atoms.last().map(|(c, _)| c.clone()).unwrap_or(Commitment::Null)
    }
}

pub fn commitment_plan(inst: &ProblemInstance, cfg: &OracleConfig, schedule: &[Query], cap: u64, mc: &McConfig) -> Result<CommitmentPlan> {
    let all = enumerate_class(inst.class(), cap)?;
    let masks: Vec<Vec<bool>> = schedule
        .iter()
        .map(|q| distinguishable_mask(q, inst, cfg, &all, mc))
        .collect::<Result<_>>()?;
    let hits: Vec<usize> = (0..all.len()).map(|i| masks.iter().filter(|m| m[i]).count()).collect();
    let pool: Vec<usize> = (0..all.len()).filter(|&i| hits[i] == 0).collect();
    let t_len = schedule.len();

    // greedy: lexicographically first element private to each C(q_t)
    let sequence: Option<Vec<usize>> = (0..t_len).map(|t| (0..all.len()).find(|&i| masks[t][i] && hits[i] == 1)).collect();

    let mut atoms = Vec::new();
    let construction = match sequence {
        Some(seq) if t_len > 0 => {
            for i in seq {
                atoms.push((Commitment::Planted(all[i].clone()), 2.0 * cfg.xi / t_len as f64));
            }
            spread(&mut atoms, &all, &pool, 1.0 - 2.0 * cfg.xi);
            Construction::Sequence
        }
        _ => {
            spread(&mut atoms, &all, &pool, 1.0);
            Construction::Uniform
        }
    };
    Ok(CommitmentPlan {
        construction,
        atoms,
        distinguishable_sizes: masks.iter().map(|m| m.iter().filter(|&&b| b).count()).collect(),
        pool_size: pool.len(),
    })
}

fn spread(atoms: &mut Vec<(Commitment, f64)>, all: &[IndexSet], pool: &[usize], mass: f64) {
    if pool.is_empty() {
        atoms.push((Commitment::Null, mass));
    } else {
        let w = mass / pool.len() as f64;
        atoms.extend(pool.iter().map(|&i| (Commitment::Planted(all[i].clone()), w)));
    }
}

pub struct AdversaryState {
    inst: ProblemInstance,
    cfg: OracleConfig,
    budget: usize,
    mode: AdversaryMode,
    mc: McConfig,
    schedule: Option<Vec<Query>>,
    plan: Option<CommitmentPlan>,
    committed: Option<Commitment>,
    pool: Vec<IndexSet>,
    rng: ChaCha8Rng,
    transcript: OracleTranscript,
}

impl AdversaryState {
    /// With a declared schedule the budget is the schedule length.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inst: ProblemInstance,
        cfg: OracleConfig,
        budget: usize,
        mode: AdversaryMode,
        schedule: Option<&[Query]>,
        cap: u64,
        mc: McConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        if let AdversaryMode::Alternative(s) = &mode {
            inst.class().check_member(s)?;
        }
        let (plan, pool, budget) = match (&mode, schedule) {
            (AdversaryMode::NullWorstCase, Some(sched)) => (Some(commitment_plan(&inst, &cfg, sched, cap, &mc)?), Vec::new(), sched.len()),
            (AdversaryMode::NullWorstCase, None) => (None, enumerate_class(inst.class(), cap)?, budget),
            (AdversaryMode::Alternative(_), sched) => (None, Vec::new(), sched.map_or(budget, |s| s.len())),
        };
        Ok(AdversaryState {
            inst,
            cfg,
            budget,
            mode,
            mc,
            schedule: schedule.map(<[Query]>::to_vec),
            plan,
            committed: None,
            pool,
            rng,
            transcript: OracleTranscript::default(),
        })
    }

    /// An adversary whose commitment is fixed up front; used to play out
    /// every atom of a plan exactly.
    pub fn with_commitment(inst: ProblemInstance, cfg: OracleConfig, schedule: &[Query], commitment: Commitment, mc: McConfig) -> Self {
        AdversaryState {
            inst,
            cfg,
            budget: schedule.len(),
            mode: AdversaryMode::NullWorstCase,
            mc,
            schedule: Some(schedule.to_vec()),
            plan: None,
            committed: Some(commitment),
            pool: Vec::new(),
            rng: crate::rng::stream(0, 0, crate::rng::Role::Commitment),
            transcript: OracleTranscript::default(),
        }
    }

    pub fn plan(&self) -> Option<&CommitmentPlan> {
        self.plan.as_ref()
    }

    pub fn committed(&self) -> Option<&Commitment> {
        self.committed.as_ref()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    fn mean(&self, commitment: &Commitment, query: &Query) -> Result<f64> {
        let truth = match commitment {
            Commitment::Planted(s) => Truth::Planted(s),
            Commitment::Null => Truth::Null,
        };
        Ok(expected_query_value(&self.inst, truth, query, &self.mc)?.mean)
    }

    fn answer(&mut self, query: &Query) -> Result<f64> {
        if let AdversaryMode::Alternative(s) = &self.mode {
            return Ok(expected_query_value(&self.inst, Truth::Planted(s), query, &self.mc)?.mean);
        }
        let scheduled = self.schedule.as_ref().map(|sch| sch.iter().any(|q| q.same_as(query)));
        match scheduled {
            Some(_) => {
                if self.committed.is_none() {
                    let plan = self.plan.as_ref().expect("declared schedules carry a plan");
                    self.committed = Some(plan.draw(&mut self.rng));
                }
                let c = self.committed.clone().unwrap();
                let z = self.mean(&c, query)?;
                if scheduled == Some(true) {
                    return Ok(z);
                }
                // off-schedule: never reveal the commitment
                let mask = distinguishable_mask(query, &self.inst, &self.cfg, &self.committed_slice(), &self.mc)?;
                if mask.first().copied().unwrap_or(false) {
                    self.mean(&Commitment::Null, query)
                } else {
                    Ok(z)
                }
            }
            None => {
                let mask = distinguishable_mask(query, &self.inst, &self.cfg, &self.pool, &self.mc)?;
                let mut keep = mask.iter().map(|m| !m);
                self.pool.retain(|_| keep.next().unwrap());
                let exposed = match &self.committed {
                    None => true,
                    Some(Commitment::Null) => false,
                    Some(Commitment::Planted(s)) => !self.pool.contains(s),
                };
                if exposed {
                    self.committed = Some(if self.pool.is_empty() {
                        Commitment::Null
                    } else {
                        let i = self.rng.random_range(0..self.pool.len());
                        Commitment::Planted(self.pool[i].clone())
                    });
                }
                let c = self.committed.clone().unwrap();
                self.mean(&c, query)
            }
        }
    }

    fn committed_slice(&self) -> Vec<IndexSet> {
        match &self.committed {
            Some(Commitment::Planted(s)) => vec![s.clone()],
            _ => Vec::new(),
        }
    }
}

impl OracleSession for AdversaryState {
    fn respond(&mut self, query: &Query) -> Result<f64> {
        if self.transcript.len() >= self.budget {
            return Err(Error::BudgetExhausted { budget: self.budget });
        }
        let z = self.answer(query)?;
        self.transcript.push(query.clone(), z, ResponseSource::Adversary);
        Ok(z)
    }

    fn transcript(&self) -> &OracleTranscript {
        &self.transcript
    }
}

pub fn adversary_respond(state: &mut AdversaryState, query: &Query) -> Result<f64> {
    state.respond(query)
}
