//! Network data model, ingestion and structural validation.
//!
//! A [`Network`] is immutable once loaded. All collections are stored in
//! document order; cross references are resolved to indices at load time so
//! downstream modules never look ids up by string in hot loops.

mod io;
mod topology;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seismic::FragilityCurve;

pub use io::{load_network, load_network_file, load_profile_csv, NetworkDocument};
pub use topology::{validate_radiality, RadialityReport};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference at `{path}`: unknown id \"{id}\"")]
    DanglingReference { path: String, id: String },
    #[error("duplicate id \"{id}\" in {collection}")]
    DuplicateId { collection: &'static str, id: String },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("network is not radial: {0}")]
    NonRadial(RadialityReport),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("load profile csv: {0}")]
    Csv(String),
}

/// Planar position in kilometres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

fn default_v_min() -> f64 {
    0.9
}
fn default_v_max() -> f64 {
    1.1
}
fn default_one() -> f64 {
    1.0
}
fn default_site() -> String {
    "rock".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub coords: Point,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Power factor angle in radians.
    #[serde(default)]
    pub power_factor_angle: f64,
    #[serde(default)]
    pub is_substation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_profile_ref: Option<String>,
    /// Multiplier applied to the referenced profile.
    #[serde(default = "default_one")]
    pub load_scale: f64,
    /// Soil class used for the ground-motion site term.
    #[serde(default = "default_site")]
    pub site_class: String,
    /// Substation import limit in MVA; `None` means the sum of peak loads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import_limit_mva: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Per-unit resistance.
    pub resistance: f64,
    /// Per-unit reactance.
    pub reactance: f64,
    pub capacity_mva: f64,
    /// Length in km; zero in a document means "use the bus distance".
    #[serde(default)]
    pub length_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadProfile {
    pub id: String,
    /// MW per timestep.
    pub hourly_p: Vec<f64>,
    /// MVAr per timestep; derived from the bus power factor when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hourly_q: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Depot {
    pub id: String,
    pub coords: Point,
    pub crew_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Line,
    Generator,
    Substation,
}

impl ComponentKind {
    /// Class defaults for the fragility curve (DG, substation, feeder).
    pub fn default_fragility(self) -> FragilityCurve {
        match self {
            ComponentKind::Generator => FragilityCurve::DG,
            ComponentKind::Substation => FragilityCurve::SUBSTATION,
            ComponentKind::Line => FragilityCurve::FEEDER,
        }
    }

    /// Hours to repair: one for distribution lines, two for DGs and
    /// substations.
    pub fn default_repair_hours(self) -> f64 {
        match self {
            ComponentKind::Line => 1.0,
            ComponentKind::Generator | ComponentKind::Substation => 2.0,
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Line => "line",
            ComponentKind::Generator => "generator",
            ComponentKind::Substation => "substation",
        })
    }
}

/// A damageable piece of equipment. `target` is the id of the line,
/// generator or substation bus it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    pub target: String,
    pub fragility: FragilityCurve,
    pub repair_duration: f64,
}

#[derive(Debug, Clone, Default)]
struct Index {
    bus: HashMap<String, usize>,
    line: HashMap<String, usize>,
    generator: HashMap<String, usize>,
    depot: HashMap<String, usize>,
    component: HashMap<String, usize>,
    profile: HashMap<String, usize>,
    line_ends: Vec<(usize, usize)>,
    generator_bus: Vec<usize>,
    bus_profile: Vec<Option<usize>>,
    component_target: Vec<usize>,
    line_component: Vec<Option<usize>>,
    generator_component: Vec<Option<usize>>,
    substation_component: Vec<Option<usize>>,
    generators_at: Vec<Vec<usize>>,
    profile_len: usize,
    peak_step: usize,
    default_import_limit: f64,
}

/// Fully cross-referenced distribution network.
#[derive(Debug, Clone)]
pub struct Network {
    pub timestep_hours: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub depots: Vec<Depot>,
    pub components: Vec<Component>,
    pub profiles: Vec<LoadProfile>,
    index: Index,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.timestep_hours == other.timestep_hours
            && self.buses == other.buses
            && self.lines == other.lines
            && self.generators == other.generators
            && self.depots == other.depots
            && self.components == other.components
            && self.profiles == other.profiles
    }
}

impl Network {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.bus.get(id).copied()
    }
    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.index.line.get(id).copied()
    }
    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.index.generator.get(id).copied()
    }
    pub fn depot_index(&self, id: &str) -> Option<usize> {
        self.index.depot.get(id).copied()
    }
    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.index.component.get(id).copied()
    }
    pub fn profile_index(&self, id: &str) -> Option<usize> {
        self.index.profile.get(id).copied()
    }

    /// (from, to) bus indices of a line.
    pub fn line_ends(&self, line: usize) -> (usize, usize) {
        self.index.line_ends[line]
    }

    pub fn generator_bus(&self, generator: usize) -> usize {
        self.index.generator_bus[generator]
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.index.generators_at[bus]
    }

    /// Index into the kind-specific collection (line, generator or bus).
    pub fn component_target(&self, component: usize) -> usize {
        self.index.component_target[component]
    }

    pub fn line_component(&self, line: usize) -> Option<usize> {
        self.index.line_component[line]
    }

    pub fn generator_component(&self, generator: usize) -> Option<usize> {
        self.index.generator_component[generator]
    }

    pub fn substation_component(&self, bus: usize) -> Option<usize> {
        self.index.substation_component[bus]
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Representative location of a component: line midpoint, or the bus
    /// hosting a generator or substation.
    pub fn component_location(&self, component: usize) -> Point {
        let target = self.component_target(component);
        match self.components[component].kind {
            ComponentKind::Line => {
                let (a, b) = self.line_ends(target);
                self.buses[a].coords.midpoint(&self.buses[b].coords)
            }
            ComponentKind::Generator => self.buses[self.generator_bus(target)].coords,
            ComponentKind::Substation => self.buses[target].coords,
        }
    }

    /// Bus whose site class applies to a component (a line uses its
    /// `from_bus`).
    pub fn component_site_bus(&self, component: usize) -> usize {
        let target = self.component_target(component);
        match self.components[component].kind {
            ComponentKind::Line => self.line_ends(target).0,
            ComponentKind::Generator => self.generator_bus(target),
            ComponentKind::Substation => target,
        }
    }

    /// Length of the load cycle in timesteps (longest profile, at least 1).
    pub fn profile_len(&self) -> usize {
        self.index.profile_len
    }

    /// Timestep with the largest total active load.
    pub fn peak_step(&self) -> usize {
        self.index.peak_step
    }

    /// Active and reactive load (MW, MVAr) at a bus for a timestep. Profiles
    /// repeat cyclically.
    pub fn bus_load(&self, bus: usize, step: usize) -> (f64, f64) {
        let Some(pi) = self.index.bus_profile[bus] else {
            return (0.0, 0.0);
        };
        let profile = &self.profiles[pi];
        let b = &self.buses[bus];
        let k = step % profile.hourly_p.len();
        let p = profile.hourly_p[k] * b.load_scale;
        let q = match &profile.hourly_q {
            Some(q) => q[k] * b.load_scale,
            None => p * b.power_factor_angle.tan(),
        };
        (p, q)
    }

    /// Ratio q_shed / p_shed used by the shedding model at this bus and step.
    /// Equals `tan(phi)` for derived profiles; explicit reactive profiles
    /// define their own ratio so that shedding all active load also sheds
    /// all reactive load.
    pub fn shed_ratio(&self, bus: usize, step: usize) -> f64 {
        let (p, q) = self.bus_load(bus, step);
        if p > 0.0 {
            q / p
        } else {
            self.buses[bus].power_factor_angle.tan()
        }
    }

    pub fn total_load(&self, step: usize) -> f64 {
        (0..self.buses.len()).map(|b| self.bus_load(b, step).0).sum()
    }

    pub fn peak_bus_load(&self, bus: usize) -> f64 {
        (0..self.profile_len())
            .map(|t| self.bus_load(bus, t).0)
            .fold(0.0, f64::max)
    }

    /// MVA the substation at `bus` can import.
    pub fn import_limit(&self, bus: usize) -> f64 {
        self.buses[bus]
            .import_limit_mva
            .unwrap_or(self.index.default_import_limit)
    }

    /// Whether a bus hosts a source (substation or any generator).
    pub fn is_source_bus(&self, bus: usize) -> bool {
        self.buses[bus].is_substation || !self.index.generators_at[bus].is_empty()
    }

    /// Serialises back to the document schema.
    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument::from_network(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("network serialises")
    }
}
