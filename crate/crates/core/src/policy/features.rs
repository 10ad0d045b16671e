//! Instance featurization.
//!
//! Component rows are `(x, y, t_d, CL_d, depot distance)`: position and
//! repair duration first, then the engineered extras. All columns are
//! rescaled by instance statistics so that differently sized instances land
//! on comparable ranges.

use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use crate::dispatch::{cluster_to_depots, DispatchInstance};
use crate::grid::Point;

pub const COMPONENT_FEATURES: usize = 5;
pub const CREW_FEATURES: usize = 8;
pub const PAIR_FEATURES: usize = 5;
pub const GLOBAL_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    /// Mean depot position.
    pub center: Point,
    /// Mean repair duration (hours).
    pub tau: f64,
    /// Distance a crew covers in `tau` hours.
    pub distance_scale: f64,
    /// Largest curtailed load, or 1 when every load is zero.
    pub load_scale: f64,
}

impl FeatureStats {
    pub fn of(instance: &DispatchInstance) -> Self {
        let n = instance.failed.len().max(1) as f64;
        let tau = (instance.failed.iter().map(|f| f.repair_duration).sum::<f64>() / n).max(1e-9);
        let m = instance.depots.len().max(1) as f64;
        let center = Point::new(
            instance.depots.iter().map(|d| d.coords.x).sum::<f64>() / m,
            instance.depots.iter().map(|d| d.coords.y).sum::<f64>() / m,
        );
        let max_cl = instance.failed.iter().map(|f| f.curtailed_load).fold(0.0, f64::max);
        FeatureStats {
            center,
            tau,
            distance_scale: instance.travel_speed * tau,
            load_scale: if max_cl > 0.0 { max_cl } else { 1.0 },
        }
    }

    pub fn rel_x(&self, p: Point) -> f64 {
        (p.x - self.center.x) / self.distance_scale
    }

    pub fn rel_y(&self, p: Point) -> f64 {
        (p.y - self.center.y) / self.distance_scale
    }
}

/// Normalized component features plus the depot cluster of every component.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub components: Matrix,
    pub stats: FeatureStats,
    pub cluster: Vec<usize>,
}

pub fn featurize(instance: &DispatchInstance) -> FeatureVector {
    let stats = FeatureStats::of(instance);
    let cluster = cluster_to_depots(&instance.failed, &instance.depots);
    let rows: Vec<Vec<f64>> = instance
        .failed
        .iter()
        .zip(&cluster)
        .map(|(f, &d)| {
            vec![
                stats.rel_x(f.coords),
                stats.rel_y(f.coords),
                f.repair_duration / stats.tau,
                f.curtailed_load / stats.load_scale,
                f.coords.distance(&instance.depots[d].coords) / stats.distance_scale,
            ]
        })
        .collect();
    FeatureVector {
        components: Matrix::from_rows(&rows),
        stats,
        cluster,
    }
}
