//! Serial PAD → comparator fusion.
//!
//! A presentation is accepted when the PAD says bona fide and the comparator
//! score reaches the threshold. The global false match rate mixes zero-effort
//! impostors and attacks with the attack prior `w`:
//! `gfmr = (1 - w) * fmr + w * iapar`.
//!
//! The analytic mode works from the comparator ROC and a single PAD operating
//! point, assuming PAD and comparator errors are independent and that an
//! attack matches its target template as often as a genuine presentation
//! does. The empirical mode counts per-trial outcomes and needs neither
//! assumption.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{roc_from_scores, sweep_thresholds, RocCurve};
use crate::types::Label;

/// PAD error rates at its chosen threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadOperatingPoint {
    pub bpcer: f64,
    pub apcer: f64,
}

impl PadOperatingPoint {
    pub const PERFECT: PadOperatingPoint = PadOperatingPoint { bpcer: 0.0, apcer: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ComparatorInput {
    /// FMR in `false_accept`, FNMR in `false_reject`.
    Roc(RocCurve),
    Scores {
        genuine: Vec<f64>,
        impostor: Vec<f64>,
    },
}

impl ComparatorInput {
    pub fn roc(&self) -> Result<RocCurve> {
        match self {
            ComparatorInput::Roc(roc) if roc.is_empty() => Err(Error::EmptyScores("comparator ROC")),
            ComparatorInput::Roc(roc) => Ok(roc.clone()),
            ComparatorInput::Scores { genuine, impostor } => roc_from_scores(genuine, impostor),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionInput {
    pub comparator: ComparatorInput,
    pub pad: PadOperatingPoint,
    /// Prior probability of a presentation attack.
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionPoint {
    pub threshold: f64,
    pub gfmr: f64,
    pub gfnmr: f64,
    pub iapar: f64,
    /// Zero-effort impostors accepted by both stages.
    pub fmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub w: f64,
    pub points: Vec<FusionPoint>,
}

impl FusionReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["threshold", "gfmr", "gfnmr", "iapar"])?;
        for p in &self.points {
            wtr.write_record([p.threshold.to_string(), p.gfmr.to_string(), p.gfnmr.to_string(), p.iapar.to_string()])?;
        }
        wtr.flush().map_err(|source| Error::Io { path: Default::default(), source })?;
        Ok(())
    }
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {x} outside [0, 1]")))
    }
}

fn mix(w: f64, fmr: f64, iapar: f64) -> f64 {
    (1.0 - w) * fmr + w * iapar
}

pub fn fuse_analytic(input: &FusionInput) -> Result<FusionReport> {
    check_rate("w", input.w)?;
    check_rate("bpcer", input.pad.bpcer)?;
    check_rate("apcer", input.pad.apcer)?;
    let roc = input.comparator.roc()?;
    let PadOperatingPoint { bpcer, apcer } = input.pad;
    let points = roc
        .points
        .iter()
        .map(|p| {
            let (fmr, fnmr) = (p.false_accept, p.false_reject);
            let fmr_int = (1.0 - bpcer) * fmr;
            let iapar = apcer * (1.0 - fnmr);
            FusionPoint {
                threshold: p.threshold,
                gfmr: mix(input.w, fmr_int, iapar),
                // 1 - (1 - fnmr)(1 - bpcer), arranged so bpcer = 0 returns fnmr bit for bit
                gfnmr: fnmr + bpcer * (1.0 - fnmr),
                iapar,
                fmr: fmr_int,
            }
        })
        .collect();
    Ok(FusionReport { w: input.w, points })
}

/// One comparison: comparator score and the PAD's decision on the presentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub score: f64,
    pub pad: Label,
}

struct Passing {
    sorted: Vec<f64>,
    total: usize,
}

impl Passing {
    fn new(trials: &[Trial], what: &'static str) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptyScores(what));
        }
        if let Some(i) = trials.iter().position(|t| !t.score.is_finite()) {
            return Err(Error::NonFinite { row: i + 1, field: what });
        }
        let mut sorted: Vec<f64> = trials.iter().filter(|t| t.pad == Label::Bf).map(|t| t.score).collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Passing { sorted, total: trials.len() })
    }

    fn accepted(&self, t: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&s| s < t)
    }
}

/// Counts outcomes over the threshold sweep of all comparator scores.
pub fn fuse_empirical(genuine: &[Trial], impostor: &[Trial], attacks: &[Trial], w: f64) -> Result<FusionReport> {
    let all: Vec<f64> = genuine.iter().chain(impostor).chain(attacks).map(|t| t.score).collect();
    let mut sorted = all;
    sorted.sort_by(f64::total_cmp);
    let thresholds = sweep_thresholds(&[&sorted]);
    fuse_empirical_at(genuine, impostor, attacks, w, &thresholds)
}

/// Counts outcomes at the given comparator thresholds.
pub fn fuse_empirical_at(
    genuine: &[Trial],
    impostor: &[Trial],
    attacks: &[Trial],
    w: f64,
    thresholds: &[f64],
) -> Result<FusionReport> {
    check_rate("w", w)?;
    let genuine = Passing::new(genuine, "genuine trial")?;
    let impostor = Passing::new(impostor, "zero-effort impostor trial")?;
    let attacks = Passing::new(attacks, "attack trial")?;
    let points = thresholds
        .iter()
        .map(|&t| {
            let gfnmr = (genuine.total - genuine.accepted(t)) as f64 / genuine.total as f64;
            let fmr = impostor.accepted(t) as f64 / impostor.total as f64;
            let iapar = attacks.accepted(t) as f64 / attacks.total as f64;
            FusionPoint { threshold: t, gfmr: mix(w, fmr, iapar), gfnmr, iapar, fmr }
        })
        .collect();
    Ok(FusionReport { w, points })
}
