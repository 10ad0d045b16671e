//! Ground motion and fragility.
//!
//! Site intensity follows the log-linear attenuation form
//!
//! ```text
//! ln PGA = a + b1·M − b2·ln(max(R, r_floor)) + site_term + ε
//! ```
//!
//! with `R` the hypocentral distance. Failure probability is the lognormal
//! fragility `Φ(ln(PGA / median) / β)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Network, Point};
use crate::scenario::DamageScenario;

#[derive(Debug, Error, PartialEq)]
pub enum SeismicError {
    #[error("unknown site class \"{0}\"")]
    UnknownSiteClass(String),
    #[error("peak ground acceleration must be positive, got {0}")]
    NonPositivePga(f64),
    #[error("no PGA entry for component \"{0}\"")]
    MissingPga(String),
    #[error("invalid fragility curve: {0}")]
    InvalidFragility(String),
    #[error("invalid seismic event: {0}")]
    InvalidEvent(String),
}

/// Standard normal CDF.
///
/// Evaluated through the complementary error function, which keeps full
/// relative precision in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Lognormal fragility curve for a single damage state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragilityCurve {
    /// Median demand in g.
    pub median: f64,
    /// Lognormal standard deviation.
    pub beta: f64,
}

impl FragilityCurve {
    pub const DG: FragilityCurve = FragilityCurve { median: 0.4, beta: 0.6 };
    pub const SUBSTATION: FragilityCurve = FragilityCurve { median: 0.5, beta: 0.5 };
    pub const FEEDER: FragilityCurve = FragilityCurve { median: 0.3, beta: 0.7 };

    pub fn new(median: f64, beta: f64) -> Result<Self, SeismicError> {
        let c = FragilityCurve { median, beta };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SeismicError> {
        if !(self.median > 0.0 && self.median.is_finite()) {
            return Err(SeismicError::InvalidFragility(format!(
                "median must be > 0, got {}",
                self.median
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SeismicError::InvalidFragility(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn failure_probability(&self, pga: f64) -> Result<f64, SeismicError> {
        failure_probability(pga, self)
    }
}

/// Probability of reaching or exceeding the damage state at `pga` (g).
pub fn failure_probability(pga: f64, curve: &FragilityCurve) -> Result<f64, SeismicError> {
    if !(pga > 0.0) {
        return Err(SeismicError::NonPositivePga(pga));
    }
    Ok(normal_cdf((pga / curve.median).ln() / curve.beta))
}

/// Attenuation coefficients. The defaults are placeholders, not a regional
/// calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmpeCoefficients {
    pub a: f64,
    /// Magnitude scaling.
    pub b1: f64,
    /// Geometric attenuation, `>= 0`.
    pub b2: f64,
    /// Additive site term per soil class.
    pub site_terms: BTreeMap<String, f64>,
}

impl Default for GmpeCoefficients {
    fn default() -> Self {
        GmpeCoefficients {
            a: -3.512,
            b1: 0.904,
            b2: 1.328,
            site_terms: BTreeMap::from([("rock".to_string(), 0.0), ("soil".to_string(), 0.2)]),
        }
    }
}

fn default_sigma() -> f64 {
    0.45
}
fn default_r_floor() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeismicEvent {
    pub epicenter: Point,
    /// km below the surface.
    pub focal_depth: f64,
    /// Moment magnitude.
    pub magnitude: f64,
    #[serde(default)]
    pub gmpe: GmpeCoefficients,
    /// Standard deviation of the log residual ε.
    #[serde(default = "default_sigma")]
    pub sigma_eps: f64,
    /// Distances below this clamp (km) are treated as `r_floor`.
    #[serde(default = "default_r_floor")]
    pub r_floor: f64,
}

impl SeismicEvent {
    pub fn new(epicenter: Point, focal_depth: f64, magnitude: f64) -> Self {
        SeismicEvent {
            epicenter,
            focal_depth,
            magnitude,
            gmpe: GmpeCoefficients::default(),
            sigma_eps: default_sigma(),
            r_floor: default_r_floor(),
        }
    }

    pub fn validate(&self) -> Result<(), SeismicError> {
        let bad = |m: String| Err(SeismicError::InvalidEvent(m));
        if !(self.focal_depth >= 0.0) {
            return bad(format!("focal_depth must be >= 0, got {}", self.focal_depth));
        }
        if !(4.0..=10.0).contains(&self.magnitude) {
            return bad(format!("magnitude must lie in [4, 10], got {}", self.magnitude));
        }
        if !(self.sigma_eps >= 0.0) {
            return bad(format!("sigma_eps must be >= 0, got {}", self.sigma_eps));
        }
        if !(self.gmpe.b2 >= 0.0) {
            return bad(format!("gmpe.b2 must be >= 0, got {}", self.gmpe.b2));
        }
        if !(self.r_floor > 0.0) {
            return bad(format!("r_floor must be > 0, got {}", self.r_floor));
        }
        Ok(())
    }

    /// Hypocentral distance to `site` in km.
    pub fn site_distance(&self, site: Point) -> f64 {
        self.epicenter.distance(&site).hypot(self.focal_depth)
    }

    /// Peak ground acceleration (g) at `site` on soil `site_class` with log
    /// residual `eps`.
    pub fn ground_motion_pga(
        &self,
        site: Point,
        site_class: &str,
        eps: f64,
    ) -> Result<f64, SeismicError> {
        let site_term = *self
            .gmpe
            .site_terms
            .get(site_class)
            .ok_or_else(|| SeismicError::UnknownSiteClass(site_class.to_string()))?;
        let r = self.site_distance(site).max(self.r_floor);
        let g = &self.gmpe;
        Ok((g.a + g.b1 * self.magnitude - g.b2 * r.ln() + site_term + eps).exp())
    }

    /// Copy of the event at another magnitude.
    pub fn with_magnitude(&self, magnitude: f64) -> Self {
        SeismicEvent {
            magnitude,
            ..self.clone()
        }
    }
}

/// PGA (g) at every component, in network component order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgaField {
    pub magnitude: f64,
    pub pga: Vec<f64>,
}

impl PgaField {
    /// Field with the given per-component log residuals (`eps.len()` must equal
    /// the component count).
    pub fn with_residuals(
        network: &Network,
        event: &SeismicEvent,
        eps: &[f64],
    ) -> Result<Self, SeismicError> {
        assert_eq!(eps.len(), network.component_count(), "one residual per component");
        let pga = (0..network.component_count())
            .map(|c| {
                let site = &network.buses[network.component_site_bus(c)].site_class;
                event.ground_motion_pga(network.component_location(c), site, eps[c])
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PgaField {
            magnitude: event.magnitude,
            pga,
        })
    }

    /// Median field (ε = 0 everywhere).
    pub fn median(network: &Network, event: &SeismicEvent) -> Result<Self, SeismicError> {
        Self::with_residuals(network, event, &vec![0.0; network.component_count()])
    }

    /// Field with independent residuals ε ~ N(0, sigma_eps²) per component site.
    pub fn sample(
        network: &Network,
        event: &SeismicEvent,
        rng: &mut impl Rng,
    ) -> Result<Self, SeismicError> {
        let eps: Vec<f64> = if event.sigma_eps > 0.0 {
            let normal = Normal::new(0.0, event.sigma_eps).expect("sigma checked");
            (0..network.component_count()).map(|_| normal.sample(rng)).collect()
        } else {
            vec![0.0; network.component_count()]
        };
        Self::with_residuals(network, event, &eps)
    }

    /// Failure probability of every component under this field.
    pub fn failure_probabilities(&self, network: &Network) -> Result<Vec<f64>, SeismicError> {
        if self.pga.len() != network.component_count() {
            let missing = network
                .components
                .get(self.pga.len())
                .map(|c| c.id.clone())
                .unwrap_or_default();
            return Err(SeismicError::MissingPga(missing));
        }
        network
            .components
            .iter()
            .zip(&self.pga)
            .map(|(c, &pga)| failure_probability(pga, &c.fragility))
            .collect()
    }
}

/// Draws one failure indicator per component: failed iff `U(0,1) < p_fail`.
pub fn sample_failures(probabilities: &[f64], rng: &mut impl Rng) -> Vec<bool> {
    probabilities
        .iter()
        .map(|&p| rng.random::<f64>() < p)
        .collect()
}

/// Samples one damage scenario from a PGA field. The returned scenario has
/// id 0, unit weight and no loss score yet.
pub fn sample_damage(
    network: &Network,
    field: &PgaField,
    rng: &mut impl Rng,
) -> Result<DamageScenario, SeismicError> {
    let probabilities = field.failure_probabilities(network)?;
    Ok(DamageScenario {
        id: 0,
        failures: sample_failures(&probabilities, rng),
        pga: Some(field.pga.clone()),
        loss: 0.0,
        ens_mwh: 0.0,
        weight: 1.0,
    })
}
