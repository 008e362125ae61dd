//! Statistical-query oracles: tolerance accounting, data-backed and ideal
//! responders, distinguishable sets, transcript validation and the
//! worst-case adversary.

mod adversary;
mod query;

pub use adversary::{adversary_respond, commitment_plan, AdversaryMode, AdversaryState, Commitment, CommitmentPlan, Construction};
pub use query::{Projection, Query, QueryFamily};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::models::{expected_query_value, DataMatrix, McConfig, ProblemInstance, Truth};
use crate::structure_classes::{enumerate_class, IndexSet};

/// Sample budget `n`, tail probability `ξ`, capacity `η` and query bound `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub n: usize,
    pub xi: f64,
    pub eta: f64,
    pub bound_b: f64,
}

impl OracleConfig {
    pub fn new(n: usize, xi: f64, eta: f64, bound_b: f64) -> Result<Self> {
        let cfg = OracleConfig { n, xi, eta, bound_b };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("oracle sample budget n must be positive");
        }
        if !(self.xi > 0.0 && self.xi < 0.25) {
            return invalid(format!("xi must lie in (0, 1/4) (got {})", self.xi));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return invalid("eta must be finite and nonnegative");
        }
        if !(self.bound_b > 0.0 && self.bound_b.is_finite()) {
            return invalid("query bound b must be positive");
        }
        Ok(())
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }
}

/// `τ_q = max{2b/3·(η + log(1/ξ))/n, √(2·Var·(η + log(1/ξ))/n)}`.
pub fn tolerance(cfg: &OracleConfig, variance: f64) -> Result<f64> {
    cfg.validate()?;
    if !(variance >= 0.0) {
        return invalid(format!("variance must be nonnegative (got {variance})"));
    }
    let load = (cfg.eta + (1.0 / cfg.xi).ln()) / cfg.n as f64;
    Ok((2.0 * cfg.bound_b / 3.0 * load).max((2.0 * variance * load).sqrt()))
}

/// Tolerance with `η = 0` and the variance taken under the null.
pub fn reduced_tolerance(cfg: &OracleConfig, variance_under_null: f64) -> Result<f64> {
    tolerance(&cfg.with_eta(0.0), variance_under_null)
}

/// Sample average of the query over the rows.
pub fn data_oracle_respond(query: &Query, data: &DataMatrix) -> f64 {
    data.rows().map(|r| query.evaluate(r)).sum::<f64>() / data.n() as f64
}

pub fn ideal_oracle_respond(query: &Query, inst: &ProblemInstance, truth: Truth<'_>, mc: &McConfig) -> Result<f64> {
    Ok(expected_query_value(inst, truth, query, mc)?.mean)
}

/// `C(q)`: elements whose expectation gap strictly exceeds the reduced tolerance.
pub fn distinguishable_set(query: &Query, inst: &ProblemInstance, cfg: &OracleConfig, cap: u64, mc: &McConfig) -> Result<Vec<IndexSet>> {
    let all = enumerate_class(inst.class(), cap)?;
    let mask = distinguishable_mask(query, inst, cfg, &all, mc)?;
    Ok(all.into_iter().zip(mask).filter(|(_, m)| *m).map(|(s, _)| s).collect())
}

/// Membership of each listed element in `C(q)`.
pub fn distinguishable_mask(
    query: &Query,
    inst: &ProblemInstance,
    cfg: &OracleConfig,
    elems: &[IndexSet],
    mc: &McConfig,
) -> Result<Vec<bool>> {
    let null = expected_query_value(inst, Truth::Null, query, mc)?;
    let tau = reduced_tolerance(cfg, null.variance)?;
    elems
        .iter()
        .map(|s| Ok((expected_query_value(inst, Truth::Planted(s), query, mc)?.mean - null.mean).abs() > tau))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    Data,
    Ideal,
    Adversary,
}

#[derive(Clone, Debug)]
pub struct TranscriptEntry {
    pub query: Query,
    pub response: f64,
    pub source: ResponseSource,
}

#[derive(Clone, Debug, Default)]
pub struct OracleTranscript {
    entries: Vec<TranscriptEntry>,
}

/// One audited line of a transcript.
#[derive(Clone, Debug, Serialize)]
pub struct TranscriptRecord {
    pub descriptor: serde_json::Value,
    pub source: ResponseSource,
    pub response: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleTranscript {
    pub fn push(&mut self, query: Query, response: f64, source: ResponseSource) {
        assert!(response.is_finite(), "oracle responses must be finite");
        self.entries.push(TranscriptEntry { query, response, source });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn responses(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.response)
    }

    /// Per-entry deviation check against the true distribution.
    pub fn records(&self, inst: &ProblemInstance, truth: Truth<'_>, cfg: &OracleConfig, mc: &McConfig) -> Result<Vec<TranscriptRecord>> {
        self.entries
            .iter()
            .map(|e| {
                let m = expected_query_value(inst, truth, &e.query, mc)?;
                let tol = tolerance(cfg, m.variance)?;
                Ok(TranscriptRecord {
                    descriptor: serde_json::from_str(&e.query.label()).expect("labels are JSON"),
                    source: e.source,
                    response: e.response,
                    expected: m.mean,
                    tolerance: tol,
                    pass: (e.response - m.mean).abs() <= tol,
                })
            })
            .collect()
    }

    /// SHA-256 over `label\tresponse` lines, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.query.label().as_bytes());
            h.update(b"\t");
            h.update(format!("{:e}", e.response).as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Serializes records as JSON lines.
pub fn records_to_jsonl(records: &[TranscriptRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// True iff every response lies within `τ_q` of the true expectation.
pub fn validate_transcript(
    transcript: &OracleTranscript,
    inst: &ProblemInstance,
    truth: Truth<'_>,
    cfg: &OracleConfig,
    mc: &McConfig,
) -> Result<bool> {
    Ok(transcript.records(inst, truth, cfg, mc)?.iter().all(|r| r.pass))
}

/// Something that answers queries and remembers what it was asked.
pub trait OracleSession {
    fn respond(&mut self, query: &Query) -> Result<f64>;
    fn transcript(&self) -> &OracleTranscript;
}

pub struct DataOracle<'a> {
    data: &'a DataMatrix,
    transcript: OracleTranscript,
}

impl<'a> DataOracle<'a> {
    pub fn new(data: &'a DataMatrix) -> Self {
        DataOracle {
            data,
            transcript: OracleTranscript::default(),
        }
    }
}

impl OracleSession for DataOracle<'_> {
    fn respond(&mut self, query: &Query) -> Result<f64> {
        if query.max_index() > self.data.d() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.data.d(),
                got: query.max_index(),
            });
        }
        let z = data_oracle_respond(query, self.data);
        self.transcript.push(query.clone(), z, ResponseSource::Data);
        Ok(z)
    }

    fn transcript(&self) -> &OracleTranscript {
        &self.transcript
    }
}

pub struct IdealOracle<'a> {
    inst: &'a ProblemInstance,
    truth: Truth<'a>,
    mc: McConfig,
    transcript: OracleTranscript,
}

impl<'a> IdealOracle<'a> {
    pub fn new(inst: &'a ProblemInstance, truth: Truth<'a>, mc: McConfig) -> Self {
        IdealOracle {
            inst,
            truth,
            mc,
            transcript: OracleTranscript::default(),
        }
    }
}

impl OracleSession for IdealOracle<'_> {
    fn respond(&mut self, query: &Query) -> Result<f64> {
        let z = ideal_oracle_respond(query, self.inst, self.truth, &self.mc)?;
        self.transcript.push(query.clone(), z, ResponseSource::Ideal);
        Ok(z)
    }

    fn transcript(&self) -> &OracleTranscript {
        &self.transcript
    }
}
