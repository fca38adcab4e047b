//! Exact nearest-neighbour search with per-query exclusions.
//!
//! A query scans one or more candidate sets in order. Candidates are compared
//! on the metric's monotone key (squared L2 or plain L1); the reported
//! distance is derived from the key of the winner. A partial sum that already
//! exceeds the best key abandons the candidate early, which never changes the
//! result because every term is non-negative. Ties go to the lowest
//! (set, position) pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, Finger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    L2,
    L1,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        self.key_to_distance(self.key(a, b, f64::INFINITY).expect("unbounded key"))
    }

    /// Comparison key, or `None` once the running sum exceeds `bound`.
    #[inline]
    fn key(self, a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
        const CHECK_EVERY: usize = 16;
        let mut acc = 0.0;
        for (ca, cb) in a.chunks(CHECK_EVERY).zip(b.chunks(CHECK_EVERY)) {
            match self {
                Metric::L2 => {
                    for (x, y) in ca.iter().zip(cb) {
                        let d = x - y;
                        acc += d * d;
                    }
                }
                Metric::L1 => {
                    for (x, y) in ca.iter().zip(cb) {
                        acc += (x - y).abs();
                    }
                }
            }
            if acc > bound {
                return None;
            }
        }
        Some(acc)
    }

    fn key_to_distance(self, key: f64) -> f64 {
        match self {
            Metric::L2 => key.sqrt(),
            Metric::L1 => key,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Metric::L2),
            "l1" => Ok(Metric::L1),
            other => Err(format!("unknown metric {other:?}, expected l2 or l1")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::L1 => "l1",
        })
    }
}

/// A collection of candidate vectors.
///
/// Sets that know sample identities expose them through `owner` and
/// `user_key` so identity-based exclusions can be applied; anonymous sets
/// (gallery template lists) keep the defaults and are never excluded by
/// identity.
pub trait VectorSet: Sync {
    fn len(&self) -> usize;

    fn vector(&self, pos: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interned user id and finger of the candidate at `pos`.
    fn owner(&self, _pos: usize) -> Option<(u32, Finger)> {
        None
    }

    /// Interned id of `user` within this set.
    fn user_key(&self, _user: &str) -> Option<u32> {
        None
    }
}

impl VectorSet for Dataset {
    fn len(&self) -> usize {
        Dataset::len(self)
    }

    fn vector(&self, pos: usize) -> &[f64] {
        self.embedding(pos)
    }

    fn owner(&self, pos: usize) -> Option<(u32, Finger)> {
        Some(Dataset::owner(self, pos))
    }

    fn user_key(&self, user: &str) -> Option<u32> {
        self.user_id(user)
    }
}

impl VectorSet for [Vec<f64>] {
    fn len(&self) -> usize {
        <[Vec<f64>]>::len(self)
    }

    fn vector(&self, pos: usize) -> &[f64] {
        &self[pos]
    }
}

impl VectorSet for Vec<Vec<f64>> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn vector(&self, pos: usize) -> &[f64] {
        &self[pos]
    }
}

impl VectorSet for [&[f64]] {
    fn len(&self) -> usize {
        <[&[f64]]>::len(self)
    }

    fn vector(&self, pos: usize) -> &[f64] {
        self[pos]
    }
}

impl VectorSet for Vec<&[f64]> {
    fn len(&self) -> usize {
        Vec::len(self)
    }

    fn vector(&self, pos: usize) -> &[f64] {
        self[pos]
    }
}

/// Location of a candidate: index of its set in the query and position within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hit {
    pub set: usize,
    pub position: usize,
}

/// Candidates removed from a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion<'a> {
    None,
    /// One specific record, by location rather than by value.
    SelfOnly(Hit),
    /// Every record of one finger of one user.
    SameFinger(&'a str, Finger),
    /// Every record of one user.
    SameUser(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnResult {
    pub set: usize,
    pub position: usize,
    pub distance: f64,
    pub(crate) key: f64,
}

impl NnResult {
    pub fn hit(&self) -> Hit {
        Hit { set: self.set, position: self.position }
    }
}

enum Filter {
    Keep,
    Position(usize),
    Owner(u32, Option<Finger>),
}

impl Filter {
    fn for_set(set_idx: usize, set: &dyn VectorSet, excl: &Exclusion<'_>) -> Filter {
        match *excl {
            Exclusion::None => Filter::Keep,
            Exclusion::SelfOnly(hit) if hit.set == set_idx => Filter::Position(hit.position),
            Exclusion::SelfOnly(_) => Filter::Keep,
            Exclusion::SameFinger(user, finger) => match set.user_key(user) {
                Some(id) => Filter::Owner(id, Some(finger)),
                None => Filter::Keep,
            },
            Exclusion::SameUser(user) => match set.user_key(user) {
                Some(id) => Filter::Owner(id, None),
                None => Filter::Keep,
            },
        }
    }

    #[inline]
    fn excludes(&self, set: &dyn VectorSet, pos: usize) -> bool {
        match *self {
            Filter::Keep => false,
            Filter::Position(p) => p == pos,
            Filter::Owner(id, finger) => match set.owner(pos) {
                Some((u, f)) => u == id && finger.is_none_or(|want| want == f),
                None => false,
            },
        }
    }
}

/// Nearest candidate to `query` across `sets` after applying `excl`.
pub fn nearest(query: &[f64], sets: &[&dyn VectorSet], metric: Metric, excl: Exclusion<'_>) -> Result<NnResult> {
    let mut best: Option<NnResult> = None;
    for (set_idx, set) in sets.iter().enumerate() {
        let n = set.len();
        if n == 0 {
            continue;
        }
        let found = set.vector(0).len();
        if found != query.len() {
            return Err(Error::QueryDimension { expected: found, found: query.len() });
        }
        let filter = Filter::for_set(set_idx, *set, &excl);
        for pos in 0..n {
            if filter.excludes(*set, pos) {
                continue;
            }
            let bound = best.map_or(f64::INFINITY, |b| b.key);
            if let Some(key) = metric.key(query, set.vector(pos), bound) {
                if best.is_none_or(|b| key < b.key) {
                    best = Some(NnResult { set: set_idx, position: pos, distance: 0.0, key });
                }
            }
        }
    }
    let mut best = best.ok_or(Error::NoCandidates)?;
    best.distance = metric.key_to_distance(best.key);
    Ok(best)
}

/// `nearest` over many queries. Output order follows input order; the
/// first failing query (by index) is reported.
pub fn nearest_batch<Q>(
    queries: &[Q],
    sets: &[&dyn VectorSet],
    metric: Metric,
    excl: Exclusion<'_>,
) -> Result<Vec<NnResult>>
where
    Q: AsRef<[f64]> + Sync,
{
    let results: Vec<Result<NnResult>> = queries.par_iter().map(|q| nearest(q.as_ref(), sets, metric, excl)).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|e| Error::BatchQuery { index, source: Box::new(e) }))
        .collect()
}
