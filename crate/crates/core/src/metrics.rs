//! PAD error rates, threshold sweeps and matched-BPCER recalibration.
//!
//! All rates are fractions in `[0, 1]`. A score is accepted as bona fide (or
//! as a match, for comparator scores) when it is `>=` the threshold.

use serde::{Deserialize, Serialize};

use crate::closeness::training_codes;
use crate::error::{Error, Result};
use crate::nn::Metric;
use crate::types::{Dataset, Label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadReport {
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
    pub n_bf: usize,
    pub n_pa: usize,
}

impl PadReport {
    pub fn from_rates(apcer: f64, bpcer: f64) -> Self {
        PadReport { apcer, bpcer, acer: (apcer + bpcer) / 2.0, n_bf: 0, n_pa: 0 }
    }
}

/// Error rates of `(predicted, truth)` pairs.
pub fn evaluate(decisions: &[(Label, Label)]) -> Result<PadReport> {
    let (mut n_bf, mut n_pa, mut bf_rejected, mut pa_accepted) = (0usize, 0usize, 0usize, 0usize);
    for &(pred, truth) in decisions {
        match truth {
            Label::Bf => {
                n_bf += 1;
                bf_rejected += usize::from(pred == Label::Pa);
            }
            Label::Pa => {
                n_pa += 1;
                pa_accepted += usize::from(pred == Label::Bf);
            }
        }
    }
    if n_bf == 0 {
        return Err(Error::MissingClass(Label::Bf));
    }
    if n_pa == 0 {
        return Err(Error::MissingClass(Label::Pa));
    }
    let apcer = pa_accepted as f64 / n_pa as f64;
    let bpcer = bf_rejected as f64 / n_bf as f64;
    Ok(PadReport { apcer, bpcer, acer: (apcer + bpcer) / 2.0, n_bf, n_pa })
}

/// One operating point. For PAD scores `false_accept` is the APCER and
/// `false_reject` the BPCER; for comparator scores they are FMR and FNMR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_accept: f64,
    pub false_reject: f64,
}

/// Points ordered by strictly increasing threshold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn sorted_finite(scores: &[f64], what: &'static str) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores(what));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { row: i + 1, field: what });
    }
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Sweep thresholds: every distinct score plus a low sentinel (`min(0, lowest
/// score)`, where nothing is rejected) and a high sentinel just above
/// `max(1, highest score)`, where nothing is accepted.
pub(crate) fn sweep_thresholds(sorted_lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = sorted_lists.iter().flat_map(|l| l.iter().copied()).collect();
    let lo = all.iter().copied().fold(0.0_f64, f64::min);
    let hi = all.iter().copied().fold(1.0_f64, f64::max).next_up();
    all.push(lo);
    all.push(hi);
    all.sort_by(f64::total_cmp);
    // -0.0 and 0.0 are the same threshold
    all.dedup_by(|a, b| a == b);
    all
}

/// Fraction of `sorted` strictly below `t`.
pub(crate) fn frac_below(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&s| s < t) as f64 / sorted.len() as f64
}

/// Fraction of `sorted` at or above `t`.
pub(crate) fn frac_at_or_above(sorted: &[f64], t: f64) -> f64 {
    (sorted.len() - sorted.partition_point(|&s| s < t)) as f64 / sorted.len() as f64
}

/// Operating characteristic of a detector whose positives are `bf_scores`
/// and negatives are `pa_scores`.
pub fn roc_from_scores(bf_scores: &[f64], pa_scores: &[f64]) -> Result<RocCurve> {
    let bf = sorted_finite(bf_scores, "bona fide score")?;
    let pa = sorted_finite(pa_scores, "attack score")?;
    let points = sweep_thresholds(&[&bf, &pa])
        .into_iter()
        .map(|t| RocPoint { threshold: t, false_accept: frac_at_or_above(&pa, t), false_reject: frac_below(&bf, t) })
        .collect();
    Ok(RocCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recalibration {
    pub threshold: f64,
    pub bpcer: f64,
    pub apcer: f64,
}

/// Largest swept threshold whose BPCER does not exceed `target_bpcer`,
/// with the APCER reached there.
pub fn recalibrate_threshold(bf_scores: &[f64], pa_scores: &[f64], target_bpcer: f64) -> Result<Recalibration> {
    if !(0.0..=1.0).contains(&target_bpcer) {
        return Err(Error::InvalidConfig(format!("target BPCER {target_bpcer} outside [0, 1]")));
    }
    let roc = roc_from_scores(bf_scores, pa_scores)?;
    // BPCER is non-decreasing along the sweep and 0 at the first point.
    let p = roc
        .points
        .iter()
        .rev()
        .find(|p| p.false_reject <= target_bpcer)
        .expect("lowest sweep threshold rejects nothing");
    Ok(Recalibration { threshold: p.threshold, bpcer: p.false_reject, apcer: p.false_accept })
}

/// Fractions of samples with each closeness bit set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BitRates {
    pub same_finger: f64,
    pub same_person: f64,
    pub generic_user: f64,
}

/// How often bona fide and attack samples sit next to bona fide samples of
/// the same finger, the same person, or any other user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    pub bf: BitRates,
    pub pa: BitRates,
    pub n_bf: usize,
    pub n_pa: usize,
}

pub fn hierarchy_stats(v: &Dataset, metric: Metric) -> Result<HierarchyStats> {
    let n_bf = v.count(Label::Bf);
    let n_pa = v.count(Label::Pa);
    if n_bf == 0 {
        return Err(Error::MissingClass(Label::Bf));
    }
    if n_pa == 0 {
        return Err(Error::MissingClass(Label::Pa));
    }
    let codes = training_codes(v, metric)?;
    let mut tally = [[0usize; 3]; 2];
    for (rec, code) in v.records().iter().zip(&codes) {
        let row = &mut tally[usize::from(rec.label == Label::Pa)];
        row[0] += usize::from(code.same_finger);
        row[1] += usize::from(code.same_person);
        row[2] += usize::from(code.generic_user);
    }
    let rates = |t: [usize; 3], n: usize| BitRates {
        same_finger: t[0] as f64 / n as f64,
        same_person: t[1] as f64 / n as f64,
        generic_user: t[2] as f64 / n as f64,
    };
    Ok(HierarchyStats { bf: rates(tally[0], n_bf), pa: rates(tally[1], n_pa), n_bf, n_pa })
}

impl HierarchyStats {
    /// Mean over sets, each set weighted by its sample count per class.
    pub fn mean_weighted(sets: &[HierarchyStats]) -> Option<HierarchyStats> {
        let n_bf: usize = sets.iter().map(|s| s.n_bf).sum();
        let n_pa: usize = sets.iter().map(|s| s.n_pa).sum();
        if sets.is_empty() || n_bf == 0 || n_pa == 0 {
            return None;
        }
        let combine = |pick: fn(&HierarchyStats) -> (BitRates, usize), total: usize| {
            let mut acc = [0.0; 3];
            for s in sets {
                let (r, n) = pick(s);
                acc[0] += r.same_finger * n as f64;
                acc[1] += r.same_person * n as f64;
                acc[2] += r.generic_user * n as f64;
            }
            BitRates {
                same_finger: acc[0] / total as f64,
                same_person: acc[1] / total as f64,
                generic_user: acc[2] / total as f64,
            }
        };
        Some(HierarchyStats {
            bf: combine(|s| (s.bf, s.n_bf), n_bf),
            pa: combine(|s| (s.pa, s.n_pa), n_pa),
            n_bf,
            n_pa,
        })
    }

    /// Unweighted mean over sets.
    pub fn mean_uniform(sets: &[HierarchyStats]) -> Option<HierarchyStats> {
        if sets.is_empty() {
            return None;
        }
        let k = sets.len() as f64;
        let avg = |pick: fn(&HierarchyStats) -> BitRates| BitRates {
            same_finger: sets.iter().map(|s| pick(s).same_finger).sum::<f64>() / k,
            same_person: sets.iter().map(|s| pick(s).same_person).sum::<f64>() / k,
            generic_user: sets.iter().map(|s| pick(s).generic_user).sum::<f64>() / k,
        };
        Some(HierarchyStats {
            bf: avg(|s| s.bf),
            pa: avg(|s| s.pa),
            n_bf: sets.iter().map(|s| s.n_bf).sum(),
            n_pa: sets.iter().map(|s| s.n_pa).sum(),
        })
    }

    /// `name,bf_f,bf_p,bf_o,pa_f,pa_p,pa_o` in percent with two decimals.
    pub fn to_percent_row(&self, name: &str) -> String {
        format!(
            "{name},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}",
            self.bf.same_finger * 100.0,
            self.bf.same_person * 100.0,
            self.bf.generic_user * 100.0,
            self.pa.same_finger * 100.0,
            self.pa.same_person * 100.0,
            self.pa.generic_user * 100.0,
        )
    }

    /// Inverse of [`HierarchyStats::to_percent_row`]; sample counts are not
    /// part of the row and come back as zero.
    pub fn parse_percent_row(row: &str) -> Result<(String, HierarchyStats)> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse { row: 1, message: format!("expected 7 fields, found {}", fields.len()) });
        }
        let nums = fields[1..]
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map(|p| p / 100.0).map_err(|e| Error::Parse { row: 1, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        let rates = |s: &[f64]| BitRates { same_finger: s[0], same_person: s[1], generic_user: s[2] };
        Ok((fields[0].to_owned(), HierarchyStats { bf: rates(&nums[..3]), pa: rates(&nums[3..]), n_bf: 0, n_pa: 0 }))
    }
}

/// One row of a baseline-vs-enhanced comparison, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub val_set: String,
    pub test_set: String,
    pub bpcer: String,
    pub apcer: String,
    pub delta_bpcer: String,
    pub delta_apcer: String,
}

impl ComparisonRow {
    /// Rates of `enhanced` with deltas relative to `baseline`.
    pub fn new(val_set: &str, test_set: &str, baseline: &PadReport, enhanced: &PadReport) -> Self {
        let pct = |x: f64| format!("{:.2}", x * 100.0);
        ComparisonRow {
            val_set: val_set.to_owned(),
            test_set: test_set.to_owned(),
            bpcer: pct(enhanced.bpcer),
            apcer: pct(enhanced.apcer),
            delta_bpcer: pct(enhanced.bpcer - baseline.bpcer),
            delta_apcer: pct(enhanced.apcer - baseline.apcer),
        }
    }
}
