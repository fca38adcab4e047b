//! Brute-force oracles shared by the integration tests.
//!
//! Everything here recomputes results from full distance tables with plain
//! loops, without touching the search code under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ccpad_core::{ClosenessCode, EmbeddingRecord, Finger, Label, Metric, SampleId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dist(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        match metric {
            Metric::L2 => acc += d * d,
            Metric::L1 => acc += d.abs(),
        }
    }
    match metric {
        Metric::L2 => acc.sqrt(),
        Metric::L1 => acc,
    }
}

/// Index of the first minimum among candidates that `keep` accepts.
pub fn argmin<F: Fn(usize) -> bool>(dists: &[f64], keep: F) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..dists.len() {
        if !keep(i) {
            continue;
        }
        match best {
            Some(b) if dists[b] <= dists[i] => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn distances(x: &[f64], records: &[EmbeddingRecord], metric: Metric) -> Vec<f64> {
    records.iter().map(|r| dist(x, &r.embedding, metric)).collect()
}

pub fn brute_training_code(records: &[EmbeddingRecord], i: usize, metric: Metric) -> Option<ClosenessCode> {
    let x = &records[i];
    let d = distances(&x.embedding, records, metric);
    let same_user = |j: usize| records[j].id.user == x.id.user;
    let same_finger = |j: usize| same_user(j) && records[j].id.finger == x.id.finger;

    let a = argmin(&d, |j| j != i)?;
    let b = argmin(&d, |j| !same_finger(j))?;
    let c = argmin(&d, |j| !same_user(j))?;
    Some(ClosenessCode {
        same_finger: records[a].label == Label::Bf && same_finger(a),
        same_person: records[b].label == Label::Bf && same_user(b),
        generic_user: records[c].label == Label::Bf,
    })
}

pub fn brute_verification_code(
    x: &[f64],
    claimed: Finger,
    templates: &BTreeMap<Finger, Vec<Vec<f64>>>,
    v: &[EmbeddingRecord],
    metric: Metric,
) -> ClosenessCode {
    let dv = distances(x, v, metric);
    let k = argmin(&dv, |_| true).unwrap();
    let min_v = dv[k];
    let min_over = |lists: Vec<&Vec<f64>>| lists.iter().map(|t| dist(x, t, metric)).fold(f64::INFINITY, f64::min);
    let own = min_over(templates[&claimed].iter().collect());
    let others = min_over(templates.iter().filter(|(f, _)| **f != claimed).flat_map(|(_, l)| l).collect());
    // the gallery is searched ahead of V, so equal distances favour the template
    ClosenessCode { same_finger: own <= min_v, same_person: others <= min_v, generic_user: v[k].label == Label::Bf }
}

/// Per-label rates of each bit over the validation set, from the brute-force codes.
pub fn brute_hierarchy(records: &[EmbeddingRecord], metric: Metric) -> [[f64; 3]; 2] {
    let mut hits = [[0usize; 3]; 2];
    let mut totals = [0usize; 2];
    for i in 0..records.len() {
        let c = brute_training_code(records, i, metric).unwrap();
        let row = usize::from(records[i].label == Label::Pa);
        totals[row] += 1;
        for (k, bit) in [c.same_finger, c.same_person, c.generic_user].into_iter().enumerate() {
            hits[row][k] += usize::from(bit);
        }
    }
    let mut out = [[0.0; 3]; 2];
    for row in 0..2 {
        for k in 0..3 {
            out[row][k] = hits[row][k] as f64 / totals[row] as f64;
        }
    }
    out
}

pub fn record(
    user: &str,
    finger: Finger,
    index: u32,
    label: Label,
    embedding: Vec<f64>,
    pad_score: f64,
) -> EmbeddingRecord {
    EmbeddingRecord { id: SampleId { user: user.into(), finger, index }, label, embedding, pad_score }
}

/// Random records over a few users and fingers. With `grid` the coordinates
/// are small integers so exact distance ties are common.
pub fn random_records(seed: u64, n: usize, dim: usize, n_users: usize, grid: bool) -> Vec<EmbeddingRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next_index: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    (0..n)
        .map(|_| {
            let u = rng.random_range(0..n_users);
            let f = rng.random_range(0..3usize);
            let idx = next_index.entry((u, f)).or_insert(0);
            let index = *idx;
            *idx += 1;
            let embedding = (0..dim)
                .map(|_| if grid { f64::from(rng.random_range(-2i32..=2)) } else { rng.random_range(-10.0..10.0) })
                .collect();
            let label = if rng.random_bool(0.6) { Label::Bf } else { Label::Pa };
            record(&format!("u{u}"), Finger::ALL[f], index, label, embedding, rng.random_range(0.0..=1.0))
        })
        .collect()
}
