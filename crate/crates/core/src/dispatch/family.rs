use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DispatchInstance, FailedComponent, DEFAULT_GAMMA, DEFAULT_SPEED_KMH};
use crate::grid::{Depot, Point};
use crate::rng::{self, Rng};

/// Distribution over random dispatch instances: components and depots
/// uniform in a square, repair durations drawn from a fixed menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceFamily {
    pub min_components: usize,
    pub max_components: usize,
    pub depots: usize,
    pub crews_per_depot: usize,
    /// Side of the square, km.
    pub area_km: f64,
    pub repair_hours: Vec<f64>,
    pub max_curtailed_mw: f64,
    pub travel_speed: f64,
    pub gamma: f64,
}

impl Default for InstanceFamily {
    fn default() -> Self {
        InstanceFamily {
            min_components: 5,
            max_components: 8,
            depots: 2,
            crews_per_depot: 2,
            area_km: 40.0,
            repair_hours: vec![1.0, 2.0],
            max_curtailed_mw: 5.0,
            travel_speed: DEFAULT_SPEED_KMH,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl InstanceFamily {
    pub fn sample(&self, rng: &mut Rng) -> DispatchInstance {
        let n = rng.random_range(self.min_components..=self.max_components.max(self.min_components));
        let point = |rng: &mut Rng| {
            Point::new(
                rng.random::<f64>() * self.area_km,
                rng.random::<f64>() * self.area_km,
            )
        };
        let depots = (0..self.depots)
            .map(|d| Depot {
                id: format!("D{d}"),
                coords: point(rng),
                crew_count: self.crews_per_depot,
            })
            .collect();
        let failed = (0..n)
            .map(|i| FailedComponent {
                id: format!("c{i}"),
                coords: point(rng),
                repair_duration: self.repair_hours[rng.random_range(0..self.repair_hours.len())],
                curtailed_load: (rng.random::<f64>() * self.max_curtailed_mw * 100.0).round() / 100.0,
            })
            .collect();
        DispatchInstance {
            failed,
            depots,
            travel_speed: self.travel_speed,
            gamma: self.gamma,
            horizon: None,
            timestep_hours: 1.0,
        }
    }

    /// Instance `index` of the seeded sequence under `seed`.
    pub fn instance(&self, seed: u64, index: u64) -> DispatchInstance {
        self.sample(&mut rng::stream(seed, index))
    }
}
