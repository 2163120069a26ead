use rand::Rng;

use crate::error::{Error, Result};

/// An unordered set of 3-D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("point cloud has no points".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("point cloud has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for k in 0..3 {
                c[k] += p[k];
            }
        }
        c.map(|v| v / n)
    }

    pub fn max_radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Centers on the centroid and scales so the farthest point has radius 1.
    /// A cloud of identical points maps to the origin.
    pub fn normalized(&self) -> Self {
        let c = self.centroid();
        let mut points: Vec<[f64; 3]> = self
            .points
            .iter()
            .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
            .collect();
        let r = points
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max);
        if r > 0.0 {
            for p in &mut points {
                p.iter_mut().for_each(|v| *v /= r);
            }
        }
        Self { points }
    }

    /// Row-major `N×3` coordinates.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }
}

/// Uniform random subset of `n` points (in random order), re-normalized.
pub fn downsample_points(cloud: &PointCloud, n: usize, rng: &mut impl Rng) -> Result<PointCloud> {
    if n == 0 || cloud.len() < n {
        return Err(Error::Input(format!(
            "cannot downsample {} points to {n}",
            cloud.len()
        )));
    }
    let picked = rand::seq::index::sample(rng, cloud.len(), n);
    let points = picked.iter().map(|i| cloud.points[i]).collect();
    Ok(PointCloud { points }.normalized())
}
