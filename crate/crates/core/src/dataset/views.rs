//! Rendered-view records and the windowed multi-view sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular spacing of the rendered views.
pub const ANGLE_STEP_DEG: u32 = 12;
/// Number of distinct view angles (`360 / 12`).
pub const NUM_ANGLE_BUCKETS: usize = 30;
/// Default window width for multi-view sampling.
pub const DEFAULT_OMEGA_DEG: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Rgb,
    Depth,
}

/// 8-bit raster, row-major `height × width × channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViewPayload {
    /// Feature vector already produced by a frozen image encoder.
    Feature(Vec<f64>),
    Raster(Raster),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewRecord {
    pub angle_deg: u32,
    pub kind: ViewKind,
    pub payload: Option<ViewPayload>,
}

impl ViewRecord {
    pub fn new(angle_deg: u32, kind: ViewKind, payload: ViewPayload) -> Result<Self> {
        angle_bucket(angle_deg)?;
        Ok(Self {
            angle_deg,
            kind,
            payload: Some(payload),
        })
    }

    pub fn bucket(&self) -> usize {
        (self.angle_deg / ANGLE_STEP_DEG) as usize
    }
}

/// Index of a view angle among the 30 rendered directions.
pub fn angle_bucket(angle_deg: u32) -> Result<usize> {
    if angle_deg % ANGLE_STEP_DEG != 0 || angle_deg >= 360 {
        return Err(Error::Contract(format!(
            "view angle {angle_deg} is not a multiple of {ANGLE_STEP_DEG} in [0, 348]"
        )));
    }
    Ok((angle_deg / ANGLE_STEP_DEG) as usize)
}

/// `min(|a − b|, 360 − |a − b|)` in degrees.
pub fn circular_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Draws `v` distinct view records whose angles lie in a common window of
/// width `omega_deg`, returning their indices into `views`.
///
/// A window starts at one of the candidate angles `a` and holds every record
/// whose angle `θ` has `(θ − a) mod 360 < ω`; any two members are then
/// closer than `ω` on the circle. Each admissible subset (one whose members
/// fit in such a window) is drawn with equal probability: the anchor is
/// picked with weight equal to the number of subsets whose first angle is
/// the anchor, then a subset of that window containing an anchor record is
/// drawn uniformly. `ω` must lie in `(0, 180]` so that the first angle of a
/// subset is unique.
pub fn sample_window_indices(
    views: &[ViewRecord],
    v: usize,
    omega_deg: f64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if v == 0 {
        return Err(Error::Contract("must sample at least one view".into()));
    }
    if !(omega_deg > 0.0 && omega_deg <= 180.0) {
        return Err(Error::Contract(format!(
            "window width must be in (0, 180] degrees, got {omega_deg}"
        )));
    }
    if views.is_empty() {
        return Err(Error::Sampling("no candidate views".into()));
    }

    let mut anchors: Vec<u32> = views.iter().map(|r| r.angle_deg).collect();
    anchors.sort_unstable();
    anchors.dedup();

    let offset = |angle: u32, anchor: u32| (angle as f64 - anchor as f64).rem_euclid(360.0);
    let windows: Vec<(u32, Vec<usize>, f64)> = anchors
        .iter()
        .map(|&a| {
            let members: Vec<usize> = (0..views.len())
                .filter(|&i| offset(views[i].angle_deg, a) < omega_deg)
                .collect();
            let at_anchor = members.iter().filter(|&&i| views[i].angle_deg == a).count();
            let weight = binomial(members.len(), v) - binomial(members.len() - at_anchor, v);
            (a, members, weight)
        })
        .collect();

    let total: f64 = windows.iter().map(|w| w.2).sum();
    if total <= 0.0 {
        return Err(Error::Sampling(format!(
            "no window of width {omega_deg} degrees holds {v} views"
        )));
    }
    let mut target = rng.random::<f64>() * total;
    let mut chosen = windows.iter().rev().find(|w| w.2 > 0.0).expect("positive weight");
    for w in &windows {
        if w.2 <= 0.0 {
            continue;
        }
        if target < w.2 {
            chosen = w;
            break;
        }
        target -= w.2;
    }
    let (anchor, members, _) = chosen;

    loop {
        let pick = rand::seq::index::sample(rng, members.len(), v);
        if pick.iter().any(|j| views[members[j]].angle_deg == *anchor) {
            let mut out: Vec<usize> = pick.iter().map(|j| members[j]).collect();
            out.sort_by(|&x, &y| {
                offset(views[x].angle_deg, *anchor)
                    .total_cmp(&offset(views[y].angle_deg, *anchor))
                    .then(x.cmp(&y))
            });
            return Ok(out);
        }
    }
}

/// Windowed sampler returning the chosen records.
pub fn sample_within_window<'a>(
    views: &'a [ViewRecord],
    v: usize,
    omega_deg: f64,
    rng: &mut impl Rng,
) -> Result<Vec<&'a ViewRecord>> {
    Ok(sample_window_indices(views, v, omega_deg, rng)?
        .into_iter()
        .map(|i| &views[i])
        .collect())
}

/// `v` distinct records drawn uniformly with no angular constraint.
pub fn sample_random_indices(
    views: &[ViewRecord],
    v: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if v == 0 {
        return Err(Error::Contract("must sample at least one view".into()));
    }
    if v > views.len() {
        return Err(Error::Sampling(format!(
            "asked for {v} views but only {} exist",
            views.len()
        )));
    }
    Ok(rand::seq::index::sample(rng, views.len(), v).into_vec())
}
