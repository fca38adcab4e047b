//! Domain types shared across the crate: labels, identities, samples,
//! closeness codes, template galleries and the validation dataset.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ground-truth or predicted class of a presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Bona fide presentation.
    #[serde(rename = "BF")]
    Bf,
    /// Presentation attack.
    #[serde(rename = "PA")]
    Pa,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Bf => "BF",
            Label::Pa => "PA",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "BF" => Ok(Label::Bf),
            "PA" => Ok(Label::Pa),
            other => Err(format!("unknown label {other:?}, expected BF or PA")),
        }
    }
}

/// The ten reference fingers. Files may name them or use their index 0..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Finger {
    ThumbL,
    IndexL,
    MiddleL,
    RingL,
    PinkieL,
    ThumbR,
    IndexR,
    MiddleR,
    RingR,
    PinkieR,
}

impl Finger {
    pub const ALL: [Finger; 10] = [
        Finger::ThumbL,
        Finger::IndexL,
        Finger::MiddleL,
        Finger::RingL,
        Finger::PinkieL,
        Finger::ThumbR,
        Finger::IndexR,
        Finger::MiddleR,
        Finger::RingR,
        Finger::PinkieR,
    ];

    const NAMES: [&'static str; 10] = [
        "thumb_l", "index_l", "middle_l", "ring_l", "pinkie_l", "thumb_r", "index_r", "middle_r", "ring_r", "pinkie_r",
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u64) -> Option<Finger> {
        Finger::ALL.get(usize::try_from(i).ok()?).copied()
    }

    pub fn name(self) -> &'static str {
        Finger::NAMES[self as usize]
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Finger {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(i) = s.parse::<u64>() {
            return Finger::from_index(i).ok_or_else(|| format!("finger index {i} outside 0..=9"));
        }
        Finger::NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(s))
            .map(|i| Finger::ALL[i])
            .ok_or_else(|| format!("unknown finger {s:?}"))
    }
}

impl Serialize for Finger {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Finger {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FingerVisitor;

        impl de::Visitor<'_> for FingerVisitor {
            type Value = Finger;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a finger index 0..=9 or a finger name")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Finger, E> {
                Finger::from_index(v).ok_or_else(|| E::custom(format!("finger index {v} outside 0..=9")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Finger, E> {
                u64::try_from(v)
                    .map_err(|_| E::custom(format!("negative finger index {v}")))
                    .and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Finger, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(FingerVisitor)
    }
}

/// Identity of a sample. Attack samples carry the identity of the spoofed finger.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleId {
    pub user: String,
    pub finger: Finger,
    pub index: u32,
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.user, self.finger, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: SampleId,
    pub label: Label,
    pub embedding: Vec<f64>,
    /// PAD probability that the presentation is bona fide.
    pub pad_score: f64,
}

impl EmbeddingRecord {
    /// Checks finiteness and score range. `row` is used in error messages.
    pub(crate) fn validate(&self, row: usize) -> Result<()> {
        if !self.pad_score.is_finite() {
            return Err(Error::NonFinite { row, field: "pad_score" });
        }
        if !(0.0..=1.0).contains(&self.pad_score) {
            return Err(Error::PadScoreOutOfRange { row, value: self.pad_score });
        }
        if self.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, field: "embedding" });
        }
        Ok(())
    }
}

/// The three closeness bits of a sample.
///
/// `same_finger` is set when the nearest neighbour is a bona fide sample of
/// the same finger, `same_person` when the nearest neighbour outside that
/// finger is a bona fide sample of another finger of the same person, and
/// `generic_user` when the nearest neighbour among other users is bona fide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ClosenessCode {
    pub same_finger: bool,
    pub same_person: bool,
    pub generic_user: bool,
}

impl ClosenessCode {
    pub const ALL_CLOSE: ClosenessCode = ClosenessCode { same_finger: true, same_person: true, generic_user: true };
    pub const NONE_CLOSE: ClosenessCode = ClosenessCode { same_finger: false, same_person: false, generic_user: false };

    pub fn new(same_finger: bool, same_person: bool, generic_user: bool) -> Self {
        ClosenessCode { same_finger, same_person, generic_user }
    }

    /// `4·b_f + 2·b_p + b_o`.
    pub fn index(self) -> usize {
        (usize::from(self.same_finger) << 2) | (usize::from(self.same_person) << 1) | usize::from(self.generic_user)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < 8).then_some(ClosenessCode {
            same_finger: index & 4 != 0,
            same_person: index & 2 != 0,
            generic_user: index & 1 != 0,
        })
    }

    pub fn all() -> impl Iterator<Item = ClosenessCode> {
        (0..8).filter_map(ClosenessCode::from_index)
    }

    /// Compact form, e.g. `"010"`.
    pub fn bits(self) -> String {
        format!("{}{}{}", u8::from(self.same_finger), u8::from(self.same_person), u8::from(self.generic_user))
    }
}

/// Text form `"b_f b_p b_o"`, e.g. `"0 1 0"`.
impl fmt::Display for ClosenessCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", u8::from(self.same_finger), u8::from(self.same_person), u8::from(self.generic_user))
    }
}

impl FromStr for ClosenessCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if bits.len() != 3 || bits.iter().any(|c| *c != '0' && *c != '1') {
            return Err(format!("invalid closeness code {s:?}"));
        }
        Ok(ClosenessCode::new(bits[0] == '1', bits[1] == '1', bits[2] == '1'))
    }
}

impl Serialize for ClosenessCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.bits())
    }
}

impl<'de> Deserialize<'de> for ClosenessCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Validation set partitioned by user and by (user, finger).
///
/// Immutable once built. Embeddings are also kept in one row-major buffer so
/// nearest-neighbour scans walk contiguous memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    flat: Vec<f64>,
    users: Vec<String>,
    user_of: Vec<u32>,
    by_user: BTreeMap<String, Vec<usize>>,
    by_finger: BTreeMap<(String, Finger), Vec<usize>>,
}

impl Dataset {
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        if records.is_empty() || dim == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        let mut flat = Vec::with_capacity(records.len() * dim);
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_finger: BTreeMap<(String, Finger), Vec<usize>> = BTreeMap::new();
        for (pos, rec) in records.iter().enumerate() {
            let row = pos + 1;
            if rec.embedding.len() != dim {
                return Err(Error::DimensionMismatch { row, expected: dim, found: rec.embedding.len() });
            }
            rec.validate(row)?;
            if !seen.insert(&rec.id) {
                return Err(Error::DuplicateSample {
                    row,
                    user: rec.id.user.clone(),
                    finger: rec.id.finger,
                    index: rec.id.index,
                });
            }
            flat.extend_from_slice(&rec.embedding);
            by_user.entry(rec.id.user.clone()).or_default().push(pos);
            by_finger.entry((rec.id.user.clone(), rec.id.finger)).or_default().push(pos);
        }
        let users: Vec<String> = by_user.keys().cloned().collect();
        let user_of = records.iter().map(|r| users.binary_search(&r.id.user).expect("user interned") as u32).collect();
        Ok(Dataset { dim, records, flat, users, user_of, by_user, by_finger })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn record(&self, pos: usize) -> &EmbeddingRecord {
        &self.records[pos]
    }

    pub fn embedding(&self, pos: usize) -> &[f64] {
        &self.flat[pos * self.dim..(pos + 1) * self.dim]
    }

    /// Users in sorted order.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn contains_user(&self, user: &str) -> bool {
        self.by_user.contains_key(user)
    }

    pub fn user_positions(&self, user: &str) -> &[usize] {
        self.by_user.get(user).map_or(&[], Vec::as_slice)
    }

    pub fn finger_positions(&self, user: &str, finger: Finger) -> &[usize] {
        self.by_finger.get(&(user.to_owned(), finger)).map_or(&[], Vec::as_slice)
    }

    pub fn user_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.by_user
    }

    pub fn finger_index(&self) -> &BTreeMap<(String, Finger), Vec<usize>> {
        &self.by_finger
    }

    pub(crate) fn user_id(&self, user: &str) -> Option<u32> {
        self.users.binary_search_by(|u| u.as_str().cmp(user)).ok().map(|i| i as u32)
    }

    pub(crate) fn owner(&self, pos: usize) -> (u32, Finger) {
        (self.user_of[pos], self.records[pos].id.finger)
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }
}

/// Enrolled bona fide templates of one claimed identity, partitioned by finger.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    user: String,
    dim: usize,
    templates: BTreeMap<Finger, Vec<Vec<f64>>>,
}

impl Gallery {
    pub fn new(user: impl Into<String>, templates: BTreeMap<Finger, Vec<Vec<f64>>>) -> Result<Self> {
        let user = user.into();
        let dim = templates.values().flatten().map(Vec::len).next().ok_or(Error::EmptyDataset)?;
        let mut row = 0;
        for list in templates.values() {
            if list.is_empty() {
                return Err(Error::EmptyDataset);
            }
            for t in list {
                row += 1;
                if t.len() != dim {
                    return Err(Error::DimensionMismatch { row, expected: dim, found: t.len() });
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { row, field: "embedding" });
                }
            }
        }
        Ok(Gallery { user, dim, templates })
    }

    /// Groups bona fide records by user into galleries.
    pub fn group(records: &[EmbeddingRecord]) -> Result<BTreeMap<String, Gallery>> {
        let mut raw: BTreeMap<String, BTreeMap<Finger, Vec<Vec<f64>>>> = BTreeMap::new();
        for (pos, rec) in records.iter().enumerate() {
            if rec.label != Label::Bf {
                return Err(Error::GalleryLabel { row: pos + 1 });
            }
            raw.entry(rec.id.user.clone()).or_default().entry(rec.id.finger).or_default().push(rec.embedding.clone());
        }
        raw.into_iter().map(|(user, templates)| Ok((user.clone(), Gallery::new(user, templates)?))).collect()
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn templates(&self) -> &BTreeMap<Finger, Vec<Vec<f64>>> {
        &self.templates
    }

    pub fn finger(&self, finger: Finger) -> Option<&[Vec<f64>]> {
        self.templates.get(&finger).map(Vec::as_slice)
    }

    pub fn template_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }
}
