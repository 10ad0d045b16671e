use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_radiality, Bus, Component, ComponentKind, Depot, Generator, GridError, Index, Line,
    LoadProfile, Network,
};
use crate::seismic::FragilityCurve;

fn default_timestep() -> f64 {
    1.0
}

/// Component entry as written in a document. Fragility and repair duration
/// fall back to the per-kind defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    pub kind: ComponentKind,
    #[serde(rename = "ref")]
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragility: Option<FragilityCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair_duration: Option<f64>,
}

/// On-disk network schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    #[serde(default = "default_timestep")]
    pub timestep_hours: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub depots: Vec<Depot>,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub profiles: Vec<LoadProfile>,
}

impl NetworkDocument {
    pub(super) fn from_network(net: &Network) -> Self {
        NetworkDocument {
            timestep_hours: net.timestep_hours,
            buses: net.buses.clone(),
            lines: net.lines.clone(),
            generators: net.generators.clone(),
            depots: net.depots.clone(),
            components: net
                .components
                .iter()
                .map(|c| ComponentSpec {
                    id: c.id.clone(),
                    kind: c.kind,
                    target: c.target.clone(),
                    fragility: Some(c.fragility),
                    repair_duration: Some(c.repair_duration),
                })
                .collect(),
            profiles: net.profiles.clone(),
        }
    }

    /// Resolves references, applies defaults and checks every invariant.
    pub fn into_network(self) -> Result<Network, GridError> {
        build(self)
    }
}

/// Parses a JSON network document.
pub fn load_network(document: &str) -> Result<Network, GridError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: NetworkDocument =
        serde_path_to_error::deserialize(de).map_err(|e| GridError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    doc.into_network()
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<Network, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_network(&text)
}

/// Reads a load profile from CSV with header `hour,p_mw[,q_mvar]`.
pub fn load_profile_csv(id: &str, reader: impl Read) -> Result<LoadProfile, GridError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| GridError::Csv(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let has_q = match cols.as_slice() {
        ["hour", "p_mw"] => false,
        ["hour", "p_mw", "q_mvar"] => true,
        _ => {
            return Err(GridError::Csv(format!(
                "expected header `hour,p_mw[,q_mvar]`, found `{}`",
                cols.join(",")
            )))
        }
    };
    let mut rows: Vec<(usize, f64, Option<f64>)> = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| GridError::Csv(e.to_string()))?;
        let parse = |i: usize| -> Result<f64, GridError> {
            record
                .get(i)
                .ok_or_else(|| GridError::Csv(format!("row {}: missing column {i}", n + 1)))?
                .parse::<f64>()
                .map_err(|e| GridError::Csv(format!("row {}: {e}", n + 1)))
        };
        let hour = parse(0)?;
        if hour < 0.0 || hour.fract() != 0.0 {
            return Err(GridError::Csv(format!("row {}: bad hour {hour}", n + 1)));
        }
        rows.push((hour as usize, parse(1)?, if has_q { Some(parse(2)?) } else { None }));
    }
    rows.sort_by_key(|r| r.0);
    for (i, r) in rows.iter().enumerate() {
        if r.0 != i {
            return Err(GridError::Csv(format!(
                "hours must be consecutive from 0; expected {i}, found {}",
                r.0
            )));
        }
    }
    let profile = LoadProfile {
        id: id.to_string(),
        hourly_p: rows.iter().map(|r| r.1).collect(),
        hourly_q: has_q.then(|| rows.iter().map(|r| r.2.unwrap_or(0.0)).collect()),
    };
    check_profile(&profile, 0)?;
    Ok(profile)
}

fn invalid(path: String, message: impl Into<String>) -> GridError {
    GridError::Invalid {
        path,
        message: message.into(),
    }
}

fn index_ids<'a>(
    collection: &'static str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<HashMap<String, usize>, GridError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.clone(), i).is_some() {
            return Err(GridError::DuplicateId {
                collection,
                id: id.clone(),
            });
        }
    }
    Ok(map)
}

fn resolve(map: &HashMap<String, usize>, id: &str, path: String) -> Result<usize, GridError> {
    map.get(id).copied().ok_or_else(|| GridError::DanglingReference {
        path,
        id: id.to_string(),
    })
}

fn check_profile(p: &LoadProfile, i: usize) -> Result<(), GridError> {
    if p.hourly_p.is_empty() {
        return Err(invalid(format!("profiles[{i}].hourly_p"), "empty profile"));
    }
    if let Some(k) = p.hourly_p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid(format!("profiles[{i}].hourly_p[{k}]"), "must be >= 0"));
    }
    if let Some(q) = &p.hourly_q {
        if q.len() != p.hourly_p.len() {
            return Err(invalid(
                format!("profiles[{i}].hourly_q"),
                "length differs from hourly_p",
            ));
        }
        if let Some(k) = q.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(format!("profiles[{i}].hourly_q[{k}]"), "must be >= 0"));
        }
    }
    Ok(())
}

fn build(doc: NetworkDocument) -> Result<Network, GridError> {
    if !(doc.timestep_hours > 0.0) {
        return Err(invalid("timestep_hours".into(), "must be positive"));
    }
    let bus = index_ids("buses", doc.buses.iter().map(|b| &b.id))?;
    let line = index_ids("lines", doc.lines.iter().map(|l| &l.id))?;
    let generator = index_ids("generators", doc.generators.iter().map(|g| &g.id))?;
    let depot = index_ids("depots", doc.depots.iter().map(|d| &d.id))?;
    let component = index_ids("components", doc.components.iter().map(|c| &c.id))?;
    let profile = index_ids("profiles", doc.profiles.iter().map(|p| &p.id))?;

    for (i, b) in doc.buses.iter().enumerate() {
        if !(b.v_min > 0.0) {
            return Err(invalid(format!("buses[{i}].v_min"), "must be > 0"));
        }
        if !(b.v_min <= b.v_max) {
            return Err(invalid(format!("buses[{i}].v_max"), "must be >= v_min"));
        }
        let phi = b.power_factor_angle;
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&phi) {
            return Err(invalid(
                format!("buses[{i}].power_factor_angle"),
                "must lie in [0, pi/2)",
            ));
        }
        if !(b.load_scale >= 0.0) {
            return Err(invalid(format!("buses[{i}].load_scale"), "must be >= 0"));
        }
        if let Some(limit) = b.import_limit_mva {
            if !(limit >= 0.0) {
                return Err(invalid(format!("buses[{i}].import_limit_mva"), "must be >= 0"));
            }
        }
    }
    for (i, p) in doc.profiles.iter().enumerate() {
        check_profile(p, i)?;
    }
    let bus_profile = doc
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.load_profile_ref
                .as_deref()
                .map(|r| resolve(&profile, r, format!("buses[{i}].load_profile_ref")))
                .transpose()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut lines = doc.lines;
    let mut line_ends = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter_mut().enumerate() {
        let a = resolve(&bus, &l.from_bus, format!("lines[{i}].from_bus"))?;
        let b = resolve(&bus, &l.to_bus, format!("lines[{i}].to_bus"))?;
        if a == b {
            return Err(invalid(format!("lines[{i}].to_bus"), "line endpoints coincide"));
        }
        if !(l.resistance >= 0.0 && l.reactance >= 0.0) {
            return Err(invalid(format!("lines[{i}]"), "impedance must be >= 0"));
        }
        if !(l.capacity_mva > 0.0) {
            return Err(invalid(format!("lines[{i}].capacity_mva"), "must be > 0"));
        }
        if l.length_km == 0.0 {
            l.length_km = doc.buses[a].coords.distance(&doc.buses[b].coords);
        }
        line_ends.push((a, b));
    }

    let mut generators_at = vec![Vec::new(); doc.buses.len()];
    let mut generator_bus = Vec::with_capacity(doc.generators.len());
    for (i, g) in doc.generators.iter().enumerate() {
        let b = resolve(&bus, &g.bus, format!("generators[{i}].bus"))?;
        if !(g.p_min >= 0.0 && g.p_min <= g.p_max) {
            return Err(invalid(format!("generators[{i}]"), "need 0 <= p_min <= p_max"));
        }
        if !(g.q_min <= g.q_max) {
            return Err(invalid(format!("generators[{i}]"), "need q_min <= q_max"));
        }
        generator_bus.push(b);
        generators_at[b].push(i);
    }
    for (i, d) in doc.depots.iter().enumerate() {
        if d.crew_count < 1 {
            return Err(invalid(format!("depots[{i}].crew_count"), "must be >= 1"));
        }
    }

    let mut components = Vec::with_capacity(doc.components.len());
    let mut component_target = Vec::with_capacity(doc.components.len());
    let mut line_component = vec![None; lines.len()];
    let mut generator_component = vec![None; doc.generators.len()];
    let mut substation_component = vec![None; doc.buses.len()];
    for (i, c) in doc.components.into_iter().enumerate() {
        let path = format!("components[{i}].ref");
        let (target, slot) = match c.kind {
            ComponentKind::Line => {
                let t = resolve(&line, &c.target, path)?;
                (t, &mut line_component[t])
            }
            ComponentKind::Generator => {
                let t = resolve(&generator, &c.target, path)?;
                (t, &mut generator_component[t])
            }
            ComponentKind::Substation => {
                let t = resolve(&bus, &c.target, path.clone())?;
                if !doc.buses[t].is_substation {
                    return Err(invalid(path, "substation component must reference a substation bus"));
                }
                (t, &mut substation_component[t])
            }
        };
        if slot.replace(i).is_some() {
            return Err(invalid(
                format!("components[{i}].ref"),
                format!("{} \"{}\" already has a component", c.kind, c.target),
            ));
        }
        let fragility = c.fragility.unwrap_or_else(|| c.kind.default_fragility());
        fragility
            .validate()
            .map_err(|e| invalid(format!("components[{i}].fragility"), e.to_string()))?;
        let repair_duration = c.repair_duration.unwrap_or_else(|| c.kind.default_repair_hours());
        if !(repair_duration > 0.0) {
            return Err(invalid(format!("components[{i}].repair_duration"), "must be > 0"));
        }
        component_target.push(target);
        components.push(Component {
            id: c.id,
            kind: c.kind,
            target: c.target,
            fragility,
            repair_duration,
        });
    }

    let profile_len = doc
        .profiles
        .iter()
        .map(|p| p.hourly_p.len())
        .max()
        .unwrap_or(1);

    let mut net = Network {
        timestep_hours: doc.timestep_hours,
        buses: doc.buses,
        lines,
        generators: doc.generators,
        depots: doc.depots,
        components,
        profiles: doc.profiles,
        index: Index {
            bus,
            line,
            generator,
            depot,
            component,
            profile,
            line_ends,
            generator_bus,
            bus_profile,
            component_target,
            line_component,
            generator_component,
            substation_component,
            generators_at,
            profile_len,
            peak_step: 0,
            default_import_limit: 0.0,
        },
    };
    net.index.peak_step = (0..profile_len)
        .map(|t| (t, net.total_load(t)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    net.index.default_import_limit = (0..net.buses.len()).map(|b| net.peak_bus_load(b)).sum();

    let report = validate_radiality(&net);
    if !report.is_empty() {
        return Err(GridError::NonRadial(report));
    }
    Ok(net)
}
