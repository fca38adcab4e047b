//! Look-up table estimation from a validation set and verification-time
//! classification.
//!
//! Each of the eight codes gets the class posteriors observed among the
//! validation samples that produced it and the baseline PAD accuracy on
//! those same samples. A code is mapped to the majority class unless both
//! posteriors fall strictly below the PAD accuracy, in which case the
//! decision is deferred to the PAD. Code `0 0 0` is always PA and `1 1 1`
//! always BF.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::closeness::{training_codes, verification_code};
use crate::error::{Error, Result};
use crate::nn::Metric;
use crate::types::{ClosenessCode, Dataset, EmbeddingRecord, Finger, Gallery, Label};

/// Outcome stored in a LUT cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "BF")]
    Bf,
    #[serde(rename = "PA")]
    Pa,
    /// Leave the sample to the wrapped PAD.
    #[serde(rename = "DEFER")]
    Defer,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Bf => "BF",
            Decision::Pa => "PA",
            Decision::Defer => "DEFER",
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Baseline PAD acceptance: bona fide iff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadDecisionRule {
    threshold: f64,
}

impl PadDecisionRule {
    pub fn new(threshold: f64) -> Result<Self> {
        if threshold > 0.0 && threshold < 1.0 {
            Ok(PadDecisionRule { threshold })
        } else {
            Err(Error::InvalidThreshold(threshold))
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn decide(&self, score: f64) -> Label {
        if score >= self.threshold {
            Label::Bf
        } else {
            Label::Pa
        }
    }
}

impl Default for PadDecisionRule {
    fn default() -> Self {
        PadDecisionRule { threshold: 0.5 }
    }
}

/// Raw tallies for one code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub n_bf: u64,
    pub n_pa: u64,
    /// Samples of this code the baseline PAD classified correctly.
    pub n_correct: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.n_bf + self.n_pa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutCell {
    pub code: ClosenessCode,
    pub n_bf: u64,
    pub n_pa: u64,
    pub p_bf: f64,
    pub p_pa: f64,
    /// Baseline PAD accuracy on validation samples with this code.
    pub a: f64,
    pub decision: Decision,
}

impl LutCell {
    pub fn from_counts(code: ClosenessCode, counts: CellCounts) -> Self {
        let total = counts.total();
        let (p_bf, p_pa, a) = if total == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let p_bf = counts.n_bf as f64 / total as f64;
            (p_bf, 1.0 - p_bf, counts.n_correct as f64 / total as f64)
        };
        let decision = if code == ClosenessCode::NONE_CLOSE {
            Decision::Pa
        } else if code == ClosenessCode::ALL_CLOSE {
            Decision::Bf
        } else if total == 0 {
            Decision::Defer
        } else {
            decide(p_bf, p_pa, a)
        };
        LutCell { code, n_bf: counts.n_bf, n_pa: counts.n_pa, p_bf, p_pa, a, decision }
    }
}

/// Decision rule for a non-forced, non-empty cell. Strict inequalities: a
/// posterior equal to `a` does not defer, and equal posteriors give PA.
pub fn decide(p_bf: f64, p_pa: f64, a: f64) -> Decision {
    if p_bf < a && p_pa < a {
        Decision::Defer
    } else if p_bf > p_pa {
        Decision::Bf
    } else {
        Decision::Pa
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LutFile", into = "LutFile")]
pub struct Lut {
    threshold: f64,
    cells: [LutCell; 8],
}

#[derive(Serialize, Deserialize)]
struct LutFile {
    threshold: f64,
    cells: Vec<LutCell>,
}

impl From<Lut> for LutFile {
    fn from(lut: Lut) -> Self {
        LutFile { threshold: lut.threshold, cells: lut.cells.to_vec() }
    }
}

impl TryFrom<LutFile> for Lut {
    type Error = Error;

    fn try_from(file: LutFile) -> Result<Self> {
        PadDecisionRule::new(file.threshold)?;
        if file.cells.len() != 8 {
            return Err(Error::InvalidLut(format!("expected 8 cells, found {}", file.cells.len())));
        }
        let mut slots: [Option<LutCell>; 8] = [None; 8];
        for cell in file.cells {
            let slot = &mut slots[cell.code.index()];
            if slot.is_some() {
                return Err(Error::InvalidLut(format!("code {} listed twice", cell.code.bits())));
            }
            *slot = Some(cell);
        }
        let cells = slots.map(|c| c.expect("eight distinct codes"));
        if cells[0].decision != Decision::Pa || cells[7].decision != Decision::Bf {
            return Err(Error::InvalidLut("codes 000 and 111 must map to PA and BF".into()));
        }
        Ok(Lut { threshold: file.threshold, cells })
    }
}

/// Result of classifying one probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub code: ClosenessCode,
    pub lut_decision: Decision,
    pub pad_decision: Label,
    pub label: Label,
}

impl Lut {
    pub fn from_counts(rule: PadDecisionRule, counts: [CellCounts; 8]) -> Self {
        let cells =
            std::array::from_fn(|i| LutCell::from_counts(ClosenessCode::from_index(i).expect("index < 8"), counts[i]));
        Lut { threshold: rule.threshold(), cells }
    }

    /// Overrides the decision of non-forced cells; used to build test tables.
    pub fn with_decisions(mut self, decisions: [Decision; 8]) -> Self {
        for (cell, d) in self.cells.iter_mut().zip(decisions).skip(1).take(6) {
            cell.decision = d;
        }
        self
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn rule(&self) -> PadDecisionRule {
        PadDecisionRule { threshold: self.threshold }
    }

    pub fn cells(&self) -> &[LutCell; 8] {
        &self.cells
    }

    pub fn cell(&self, code: ClosenessCode) -> &LutCell {
        &self.cells[code.index()]
    }

    pub fn decision(&self, code: ClosenessCode) -> Decision {
        self.cells[code.index()].decision
    }

    /// Final label for a probe with a known code.
    pub fn apply(&self, code: ClosenessCode, pad_score: f64) -> Verdict {
        let lut_decision = self.decision(code);
        let pad_decision = self.rule().decide(pad_score);
        let label = match lut_decision {
            Decision::Bf => Label::Bf,
            Decision::Pa => Label::Pa,
            Decision::Defer => pad_decision,
        };
        Verdict { code, lut_decision, pad_decision, label }
    }

    /// Percent table in the layout `b | P(BF|b) | P(PA|b) | A(b) | D(b)`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("b      P(BF|b)  P(PA|b)  A(b)     D(b)\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{}  {:>7.2}  {:>7.2}  {:>7.2}  {}",
                c.code,
                c.p_bf * 100.0,
                c.p_pa * 100.0,
                c.a * 100.0,
                c.decision
            );
        }
        out
    }
}

/// Builds the LUT from a validation set with at least two users and both labels.
pub fn estimate_lut(v: &Dataset, rule: PadDecisionRule, metric: Metric) -> Result<Lut> {
    if v.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for label in [Label::Bf, Label::Pa] {
        if v.count(label) == 0 {
            return Err(Error::MissingClass(label));
        }
    }
    let codes = training_codes(v, metric)?;
    let mut counts = [CellCounts::default(); 8];
    for (rec, code) in v.records().iter().zip(&codes) {
        let cell = &mut counts[code.index()];
        match rec.label {
            Label::Bf => cell.n_bf += 1,
            Label::Pa => cell.n_pa += 1,
        }
        if rule.decide(rec.pad_score) == rec.label {
            cell.n_correct += 1;
        }
    }
    Ok(Lut::from_counts(rule, counts))
}

/// Classifies a probe claiming `claimed_finger` of the gallery's user.
pub fn classify(
    x: &[f64],
    pad_score: f64,
    claimed_finger: Finger,
    gallery: &Gallery,
    v: &Dataset,
    lut: &Lut,
    metric: Metric,
) -> Result<Verdict> {
    if !(0.0..=1.0).contains(&pad_score) {
        return Err(Error::PadScoreOutOfRange { row: 0, value: pad_score });
    }
    let code = verification_code(x, claimed_finger, gallery, v, metric)?;
    Ok(lut.apply(code, pad_score))
}

/// Classifies probe records, each against the gallery of its own user.
/// Verdicts come back in probe order; the first failing probe aborts with
/// its 1-based row.
pub fn classify_records(
    probes: &[EmbeddingRecord],
    galleries: &BTreeMap<String, Gallery>,
    v: &Dataset,
    lut: &Lut,
    metric: Metric,
) -> Result<Vec<Verdict>> {
    let verdicts: Vec<Result<Verdict>> = probes
        .par_iter()
        .map(|p| {
            let gallery = galleries.get(&p.id.user).ok_or_else(|| Error::UnknownGallery(p.id.user.clone()))?;
            classify(&p.embedding, p.pad_score, p.id.finger, gallery, v, lut, metric)
        })
        .collect();
    verdicts
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Probe { row: i + 1, source: Box::new(e) }))
        .collect()
}
