//! Synthetic embeddings with nested user / finger / sample clusters and a
//! tunable synthetic PAD.
//!
//! User centres are isotropic Gaussians with spread `sigma_user`, finger
//! centres scatter around them with `sigma_finger`, and bona fide samples
//! around finger centres with `sigma_sample`. Attacks come from a cloud of
//! spread `sigma_finger` displaced by `pa_offset` along a random direction,
//! except a `pa_overlap_rate` fraction placed next to a random finger centre
//! of another user (attacks made with unseen materials that land among bona
//! fide samples).
//!
//! The PAD score is a logistic of the saturated distance to the attack-cloud
//! centre plus Gaussian noise. Its cut sits halfway between the farthest
//! cloud attack and the nearest bona fide sample, so with `pad_noise = 0` and
//! no overlap the PAD separates the classes exactly.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, EmbeddingRecord, Finger, Gallery, Label, SampleId};

const PAD_GAIN: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub n_users: usize,
    pub fingers_per_user: usize,
    pub bf_per_finger: usize,
    pub pa_per_finger: usize,
    pub sigma_sample: f64,
    pub sigma_finger: f64,
    pub sigma_user: f64,
    /// Distance of the attack-cloud centre from the origin.
    pub pa_offset: f64,
    pub pa_overlap_rate: f64,
    pub pad_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 32,
            n_users: 20,
            fingers_per_user: 4,
            bf_per_finger: 6,
            pa_per_finger: 3,
            sigma_sample: 1.0,
            sigma_finger: 4.0,
            sigma_user: 16.0,
            pa_offset: 160.0,
            pa_overlap_rate: 0.15,
            pad_noise: 0.75,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.dim == 0 || self.n_users == 0 || self.fingers_per_user == 0 || self.bf_per_finger == 0 {
            return bad("dim, n_users, fingers_per_user and bf_per_finger must be positive");
        }
        if self.fingers_per_user > 10 {
            return bad("fingers_per_user must be at most 10");
        }
        let sigmas = [self.sigma_sample, self.sigma_finger, self.sigma_user];
        if sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return bad("spreads must be positive and finite");
        }
        if !(self.sigma_sample < self.sigma_finger && self.sigma_finger < self.sigma_user) {
            return bad("spreads must satisfy sigma_sample < sigma_finger < sigma_user");
        }
        if !self.pa_offset.is_finite() || self.pa_offset < 0.0 {
            return bad("pa_offset must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.pa_overlap_rate) {
            return bad("pa_overlap_rate must lie in [0, 1]");
        }
        if !self.pad_noise.is_finite() || self.pad_noise < 0.0 {
            return bad("pad_noise must be finite and non-negative");
        }
        Ok(())
    }

    /// Parses a JSON object or `key = value` lines (`#` starts a comment).
    /// The seed must be given explicitly; other keys default.
    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str::<serde_json::Value>(text)?
        } else {
            let mut map = serde_json::Map::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                    row: i + 1,
                    message: format!("expected key=value, found {line:?}"),
                })?;
                let v = v.trim();
                let parsed = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_owned()));
                map.insert(k.trim().to_owned(), parsed);
            }
            serde_json::Value::Object(map)
        };
        if value.get("seed").is_none() {
            return Err(Error::InvalidConfig("seed is mandatory in config files".into()));
        }
        let cfg: SynthConfig = serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn user_name(i: usize) -> String {
    format!("u{i:03}")
}

fn gaussian(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64) -> Vec<f64> {
    center.iter().map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

enum Origin {
    BonaFide,
    Cloud,
    Overlap,
}

/// Generates a dataset; a pure function of `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;

    let mut direction: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    direction.iter_mut().for_each(|x| *x /= norm);
    let pa_center: Vec<f64> = direction.iter().map(|x| x * cfg.pa_offset).collect();

    let origin = vec![0.0; d];
    let user_centers: Vec<Vec<f64>> = (0..cfg.n_users).map(|_| gaussian(&mut rng, &origin, cfg.sigma_user)).collect();
    let finger_centers: Vec<Vec<Vec<f64>>> = user_centers
        .iter()
        .map(|uc| (0..cfg.fingers_per_user).map(|_| gaussian(&mut rng, uc, cfg.sigma_finger)).collect())
        .collect();

    let mut samples: Vec<(SampleId, Origin, Vec<f64>)> = Vec::new();
    for u in 0..cfg.n_users {
        for f in 0..cfg.fingers_per_user {
            let id = |index: usize| SampleId { user: user_name(u), finger: Finger::ALL[f], index: index as u32 };
            for i in 0..cfg.bf_per_finger {
                let x = gaussian(&mut rng, &finger_centers[u][f], cfg.sigma_sample);
                samples.push((id(i), Origin::BonaFide, x));
            }
            for i in 0..cfg.pa_per_finger {
                let index = cfg.bf_per_finger + i;
                if rng.random::<f64>() < cfg.pa_overlap_rate {
                    let other = if cfg.n_users > 1 {
                        let k = rng.random_range(0..cfg.n_users - 1);
                        if k >= u {
                            k + 1
                        } else {
                            k
                        }
                    } else {
                        u
                    };
                    let of = rng.random_range(0..cfg.fingers_per_user);
                    let x = gaussian(&mut rng, &finger_centers[other][of], 2.0 * cfg.sigma_sample);
                    samples.push((id(index), Origin::Overlap, x));
                } else {
                    let x = gaussian(&mut rng, &pa_center, cfg.sigma_finger);
                    samples.push((id(index), Origin::Cloud, x));
                }
            }
        }
    }

    let cloud_radius = cfg.sigma_finger * (d as f64).sqrt();
    let far_cloud = samples
        .iter()
        .filter(|s| matches!(s.1, Origin::Cloud))
        .map(|s| distance(&s.2, &pa_center))
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let near_bf = samples
        .iter()
        .filter(|s| matches!(s.1, Origin::BonaFide))
        .map(|s| distance(&s.2, &pa_center))
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
    let cut = match (far_cloud, near_bf) {
        (Some(a), Some(b)) => (a + b) / 2.0,
        _ => 2.0 * cloud_radius,
    };

    let records = samples
        .into_iter()
        .map(|(id, origin, embedding)| {
            let stat = ((distance(&embedding, &pa_center) - cut) / cloud_radius).tanh();
            let noise: f64 = rng.sample(StandardNormal);
            let pad_score = sigmoid(PAD_GAIN * (stat + cfg.pad_noise * noise));
            let label = match origin {
                Origin::BonaFide => Label::Bf,
                Origin::Cloud | Origin::Overlap => Label::Pa,
            };
            EmbeddingRecord { id, label, embedding, pad_score }
        })
        .collect();
    Dataset::new(d, records)
}

/// Validation set, enrolled galleries and probes produced by [`split`].
#[derive(Debug, Clone)]
pub struct Split {
    pub validation: Dataset,
    pub galleries: BTreeMap<String, Gallery>,
    /// Gallery templates as records, for writing to disk.
    pub gallery_records: Vec<EmbeddingRecord>,
    /// Probes; `id.user` and `id.finger` name the claimed identity.
    pub probes: Vec<EmbeddingRecord>,
}

/// Moves `holdout_users` users (chosen by `seed`) out of the validation set.
///
/// For each of their fingers the first half (rounded up) of the bona fide
/// samples become gallery templates and the rest bona fide probes; their
/// attack samples become attack probes against their own gallery.
pub fn split(v: &Dataset, holdout_users: usize, seed: u64) -> Result<Split> {
    let total = v.users().len();
    if holdout_users >= total || total - holdout_users < 2 {
        return Err(Error::InvalidConfig(format!(
            "holding out {holdout_users} of {total} users leaves fewer than 2 validation users"
        )));
    }
    let mut users = v.users().to_vec();
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: std::collections::BTreeSet<String> = users.into_iter().take(holdout_users).collect();

    let mut templates_left: BTreeMap<(String, Finger), usize> = BTreeMap::new();
    for ((user, finger), positions) in v.finger_index() {
        if held.contains(user) {
            let n_bf = positions.iter().filter(|&&p| v.record(p).label == Label::Bf).count();
            templates_left.insert((user.clone(), *finger), n_bf.div_ceil(2));
        }
    }

    let mut validation = Vec::new();
    let mut gallery_records = Vec::new();
    let mut probes = Vec::new();
    for rec in v.records() {
        if !held.contains(&rec.id.user) {
            validation.push(rec.clone());
            continue;
        }
        if rec.label == Label::Pa {
            probes.push(rec.clone());
            continue;
        }
        let left = templates_left.get_mut(&(rec.id.user.clone(), rec.id.finger)).expect("held-out finger tallied");
        if *left > 0 {
            *left -= 1;
            gallery_records.push(rec.clone());
        } else {
            probes.push(rec.clone());
        }
    }
    Ok(Split {
        validation: Dataset::new(v.dim(), validation)?,
        galleries: Gallery::group(&gallery_records)?,
        gallery_records,
        probes,
    })
}
