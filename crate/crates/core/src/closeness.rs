//! Closeness codes for validation samples and for probes at verification time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{nearest, Exclusion, Hit, Metric, VectorSet};
use crate::types::{ClosenessCode, Dataset, Finger, Gallery, Label};

/// Code of the validation sample at `pos`, computed against the rest of `v`.
///
/// The three neighbours are searched in `v` minus the sample itself, minus
/// the sample's finger, and minus every finger of the sample's user.
pub fn training_code(pos: usize, v: &Dataset, metric: Metric) -> Result<ClosenessCode> {
    let rec = v.record(pos);
    let x = v.embedding(pos);
    let user = rec.id.user.as_str();
    let sets: [&dyn VectorSet; 1] = [v];

    let xi = v.record(nearest(x, &sets, metric, Exclusion::SelfOnly(Hit { set: 0, position: pos }))?.position);
    let same_finger = xi.label == Label::Bf && xi.id.user == user && xi.id.finger == rec.id.finger;

    let xj = v.record(nearest(x, &sets, metric, Exclusion::SameFinger(user, rec.id.finger))?.position);
    let same_person = xj.label == Label::Bf && xj.id.user == user;

    let xk = v.record(nearest(x, &sets, metric, Exclusion::SameUser(user))?.position);
    let generic_user = xk.label == Label::Bf;

    Ok(ClosenessCode { same_finger, same_person, generic_user })
}

/// Codes of every validation sample, in record order.
pub fn training_codes(v: &Dataset, metric: Metric) -> Result<Vec<ClosenessCode>> {
    let codes: Vec<Result<ClosenessCode>> =
        (0..v.len()).into_par_iter().map(|pos| training_code(pos, v, metric)).collect();
    codes.into_iter().collect()
}

/// Code of a probe claiming `claimed_finger` of the gallery's user.
///
/// Gallery templates count as bona fide. The union searches place the
/// gallery before `v`, so an exact distance tie resolves to the template.
pub fn verification_code(
    x: &[f64],
    claimed_finger: Finger,
    gallery: &Gallery,
    v: &Dataset,
    metric: Metric,
) -> Result<ClosenessCode> {
    if v.contains_user(gallery.user()) {
        return Err(Error::UserCollision(gallery.user().to_owned()));
    }
    if x.len() != v.dim() {
        return Err(Error::QueryDimension { expected: v.dim(), found: x.len() });
    }
    if gallery.dim() != v.dim() {
        return Err(Error::QueryDimension { expected: v.dim(), found: gallery.dim() });
    }
    let same: Vec<&[f64]> = gallery
        .finger(claimed_finger)
        .ok_or_else(|| Error::NoTemplatesForFinger { user: gallery.user().to_owned(), finger: claimed_finger })?
        .iter()
        .map(Vec::as_slice)
        .collect();

    let in_v = nearest(x, &[v], metric, Exclusion::None)?;
    let generic_user = v.record(in_v.position).label == Label::Bf;

    let to_same = nearest(x, &[&same], metric, Exclusion::None)?;
    let same_finger = to_same.key <= in_v.key;

    let others: Vec<&[f64]> = gallery
        .templates()
        .iter()
        .filter(|(f, _)| **f != claimed_finger)
        .flat_map(|(_, list)| list.iter().map(Vec::as_slice))
        .collect();
    let same_person =
        if others.is_empty() { false } else { nearest(x, &[&others], metric, Exclusion::None)?.key <= in_v.key };

    Ok(ClosenessCode { same_finger, same_person, generic_user })
}
