//! Repair-crew dispatch: instances, plan timing, objective and the exact
//! solver.
//!
//! Each failed component is served by a crew of its nearest depot. A crew
//! leaves its depot at t = 0 and works its route sequentially; a job
//! completes at arrival plus repair duration. The restoration time `T` is the
//! latest completion over all crews and the return leg to the depot is not
//! counted in `T` or in outage times. The objective is
//! `γ·T + (1 − γ)·Σ CL_d · completion_d`.

mod curtail;
mod exact;
mod family;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Depot, Point};

pub use curtail::{attribute_curtailed_load, build_instance, singleton_curtailment};
pub use family::InstanceFamily;
pub use exact::{enumerate_optimum, exact_dispatch, greedy_dispatch, ExactLimits, ExactOutcome};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_SPEED_KMH: f64 = 40.0;

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error("invalid dispatch instance: {0}")]
    InvalidInstance(String),
    #[error("route refers to unknown job index {0}")]
    UnknownJob(usize),
    #[error("component \"{0}\" is visited more than once")]
    DuplicateVisit(String),
    #[error("component \"{0}\" is not visited by any route")]
    Unvisited(String),
    #[error("component \"{component}\" belongs to depot \"{expected}\" but is routed from \"{got}\"")]
    CrossCluster {
        component: String,
        expected: String,
        got: String,
    },
    #[error("depot {depot} has no crew {crew}")]
    UnknownCrew { depot: usize, crew: usize },
    #[error("crew {crew} of depot {depot} has more than one route")]
    DuplicateCrew { depot: usize, crew: usize },
    #[error(
        "depot \"{depot}\" has {components} components and {crews} crews; exact limits are {max_components} and {max_crews}"
    )]
    LimitExceeded {
        depot: String,
        components: usize,
        crews: usize,
        max_components: usize,
        max_crews: usize,
    },
    #[error("plan has {got} jobs, instance has {expected}")]
    PlanMismatch { expected: usize, got: usize },
}

impl DispatchError {
    /// Whether the error reports an instance beyond a solver limit rather
    /// than malformed input.
    pub fn is_limit(&self) -> bool {
        matches!(self, DispatchError::LimitExceeded { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailedComponent {
    pub id: String,
    pub coords: Point,
    /// Hours.
    pub repair_duration: f64,
    /// MW of load lost while this component is down.
    pub curtailed_load: f64,
}

fn default_timestep() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchInstance {
    pub failed: Vec<FailedComponent>,
    pub depots: Vec<Depot>,
    /// km/h.
    pub travel_speed: f64,
    pub gamma: f64,
    /// Number of reporting steps for the status indicators; derived from
    /// the plan when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "default_timestep")]
    pub timestep_hours: f64,
}

impl DispatchInstance {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |m: String| Err(DispatchError::InvalidInstance(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.travel_speed > 0.0) {
            return bad(format!("travel_speed must be > 0, got {}", self.travel_speed));
        }
        if !(self.timestep_hours > 0.0) {
            return bad(format!("timestep_hours must be > 0, got {}", self.timestep_hours));
        }
        if self.failed.is_empty() {
            return bad("no failed components".into());
        }
        if self.depots.is_empty() {
            return bad("no depots".into());
        }
        for d in &self.depots {
            if d.crew_count == 0 {
                return bad(format!("depot \"{}\" has no crews", d.id));
            }
        }
        let mut seen = BTreeSet::new();
        for f in &self.failed {
            if !seen.insert(f.id.as_str()) {
                return bad(format!("duplicate component id \"{}\"", f.id));
            }
            if !(f.repair_duration > 0.0) {
                return bad(format!("component \"{}\" has non-positive repair duration", f.id));
            }
            if !(f.curtailed_load >= 0.0) {
                return bad(format!("component \"{}\" has negative curtailed load", f.id));
            }
        }
        Ok(())
    }

    pub fn crew_count(&self) -> usize {
        self.depots.iter().map(|d| d.crew_count).sum()
    }

    /// Travel time in hours between two points.
    pub fn travel(&self, a: Point, b: Point) -> f64 {
        travel_time(a, b, self.travel_speed)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        DispatchInstance {
            gamma,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }
}

/// Euclidean distance over speed, in hours.
pub fn travel_time(from: Point, to: Point, speed: f64) -> f64 {
    from.distance(&to) / speed
}

/// Depot index for each failed component: nearest by distance, ties to the
/// depot with the lexicographically smaller id.
pub fn cluster_to_depots(failed: &[FailedComponent], depots: &[Depot]) -> Vec<usize> {
    failed
        .iter()
        .map(|f| {
            (0..depots.len())
                .min_by(|&a, &b| {
                    let da = depots[a].coords.distance(&f.coords);
                    let db = depots[b].coords.distance(&f.coords);
                    da.total_cmp(&db).then_with(|| depots[a].id.cmp(&depots[b].id))
                })
                .expect("at least one depot")
        })
        .collect()
}

/// Ordered jobs (indices into `instance.failed`) of one crew.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Route {
    pub depot: usize,
    pub crew: usize,
    pub jobs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobTiming {
    pub arrival: f64,
    pub start: f64,
    pub completion: f64,
    /// First step at which the component is back in service.
    pub repair_step: usize,
}

/// Fully timed plan. Routes cover every crew of every depot in depot-major
/// order; idle crews have empty routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    pub routes: Vec<Route>,
    /// Depot serving each job.
    pub assignment: Vec<usize>,
    pub timing: Vec<JobTiming>,
    /// Time each crew finishes its last repair (0 for idle crews).
    pub route_end: Vec<f64>,
    /// Time each crew is back at its depot.
    pub return_time: Vec<f64>,
}

impl DispatchPlan {
    /// `k[d][t]`: whether job `d` is operational at step `t`.
    pub fn status_indicators(&self, horizon: usize) -> Vec<Vec<bool>> {
        self.timing
            .iter()
            .map(|j| (0..horizon).map(|t| t >= j.repair_step).collect())
            .collect()
    }

    /// `τ[d][t]`: whether job `d` completes during step `t`.
    pub fn repair_indicators(&self, horizon: usize) -> Vec<Vec<bool>> {
        self.timing
            .iter()
            .map(|j| (0..horizon).map(|t| t == j.repair_step).collect())
            .collect()
    }

    pub fn horizon(&self) -> usize {
        self.timing.iter().map(|j| j.repair_step).max().unwrap_or(0) + 1
    }

    /// Canonical job sequences per crew, for comparing plans.
    pub fn sequences(&self) -> Vec<Vec<usize>> {
        self.routes.iter().map(|r| r.jobs.clone()).collect()
    }
}

/// Computes arrival and completion times for `routes`.
///
/// Every job must appear exactly once, in a route of the depot it is
/// clustered to. Crews missing from `routes` are idle.
pub fn schedule_plan(
    instance: &DispatchInstance,
    routes: &[Route],
) -> Result<DispatchPlan, DispatchError> {
    let assignment = cluster_to_depots(&instance.failed, &instance.depots);
    let n = instance.failed.len();
    let mut slots: Vec<Vec<Option<Vec<usize>>>> = instance
        .depots
        .iter()
        .map(|d| vec![None; d.crew_count])
        .collect();
    let mut visited = vec![false; n];
    for r in routes {
        let slot = slots
            .get_mut(r.depot)
            .and_then(|s| s.get_mut(r.crew))
            .ok_or(DispatchError::UnknownCrew {
                depot: r.depot,
                crew: r.crew,
            })?;
        if slot.is_some() {
            return Err(DispatchError::DuplicateCrew {
                depot: r.depot,
                crew: r.crew,
            });
        }
        for &j in &r.jobs {
            if j >= n {
                return Err(DispatchError::UnknownJob(j));
            }
            if visited[j] {
                return Err(DispatchError::DuplicateVisit(instance.failed[j].id.clone()));
            }
            visited[j] = true;
            if assignment[j] != r.depot {
                return Err(DispatchError::CrossCluster {
                    component: instance.failed[j].id.clone(),
                    expected: instance.depots[assignment[j]].id.clone(),
                    got: instance.depots[r.depot].id.clone(),
                });
            }
        }
        *slot = Some(r.jobs.clone());
    }
    if let Some(j) = visited.iter().position(|v| !v) {
        return Err(DispatchError::Unvisited(instance.failed[j].id.clone()));
    }

    let step = instance.timestep_hours;
    let mut timing = vec![
        JobTiming {
            arrival: 0.0,
            start: 0.0,
            completion: 0.0,
            repair_step: 0,
        };
        n
    ];
    let mut full_routes = Vec::new();
    let mut route_end = Vec::new();
    let mut return_time = Vec::new();
    for (d, crews) in slots.into_iter().enumerate() {
        let home = instance.depots[d].coords;
        for (c, jobs) in crews.into_iter().enumerate() {
            let jobs = jobs.unwrap_or_default();
            let mut t = 0.0;
            let mut at = home;
            for &j in &jobs {
                let f = &instance.failed[j];
                let arrival = t + instance.travel(at, f.coords);
                let completion = arrival + f.repair_duration;
                timing[j] = JobTiming {
                    arrival,
                    start: arrival,
                    completion,
                    repair_step: (completion / step - 1e-9).ceil().max(0.0) as usize,
                };
                t = completion;
                at = f.coords;
            }
            route_end.push(t);
            return_time.push(t + instance.travel(at, home));
            full_routes.push(Route {
                depot: d,
                crew: c,
                jobs,
            });
        }
    }
    Ok(DispatchPlan {
        routes: full_routes,
        assignment,
        timing,
        route_end,
        return_time,
    })
}

/// Violations of the subtour-elimination potentials: a route is valid iff
/// assigning potential `k` to its `k`-th job satisfies `φ_j ≥ φ_i + 1` along
/// every arc, i.e. iff no job repeats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubtourReport {
    pub violations: Vec<String>,
}

impl SubtourReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_subtour_free(routes: &[Route]) -> SubtourReport {
    let mut report = SubtourReport::default();
    for r in routes {
        let mut first_pos = std::collections::HashMap::new();
        for (pos, &j) in r.jobs.iter().enumerate() {
            if let Some(prev) = first_pos.insert(j, pos) {
                report.violations.push(format!(
                    "depot {} crew {}: job {} revisited at positions {} and {}",
                    r.depot, r.crew, j, prev, pos
                ));
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Hours until the last repair completes.
    pub restoration_time: f64,
    /// `Σ CL_d · completion_d`, MWh.
    pub ens_surrogate: f64,
    pub gamma: f64,
    pub value: f64,
}

impl ObjectiveBreakdown {
    pub fn new(restoration_time: f64, ens_surrogate: f64, gamma: f64) -> Self {
        ObjectiveBreakdown {
            restoration_time,
            ens_surrogate,
            gamma,
            value: gamma * restoration_time + (1.0 - gamma) * ens_surrogate,
        }
    }
}

pub fn objective(
    plan: &DispatchPlan,
    instance: &DispatchInstance,
) -> Result<ObjectiveBreakdown, DispatchError> {
    if plan.timing.len() != instance.failed.len() {
        return Err(DispatchError::PlanMismatch {
            expected: instance.failed.len(),
            got: plan.timing.len(),
        });
    }
    let t = plan.route_end.iter().copied().fold(0.0, f64::max);
    let ens = instance
        .failed
        .iter()
        .zip(&plan.timing)
        .map(|(f, j)| f.curtailed_load * j.completion)
        .sum();
    Ok(ObjectiveBreakdown::new(t, ens, instance.gamma))
}

/// Route shapes for serialisation, with ids instead of indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRecord {
    pub depot: String,
    pub crew: usize,
    pub components: Vec<String>,
    pub arrivals: Vec<f64>,
    pub completions: Vec<f64>,
    pub return_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub solver: String,
    /// Whether the plan is a proven optimum.
    pub optimal: bool,
    pub objective: ObjectiveBreakdown,
    pub routes: Vec<RouteRecord>,
}

impl PlanDocument {
    pub fn new(
        solver: &str,
        optimal: bool,
        instance: &DispatchInstance,
        plan: &DispatchPlan,
        objective: ObjectiveBreakdown,
    ) -> Self {
        let routes = plan
            .routes
            .iter()
            .enumerate()
            .map(|(k, r)| RouteRecord {
                depot: instance.depots[r.depot].id.clone(),
                crew: r.crew,
                components: r.jobs.iter().map(|&j| instance.failed[j].id.clone()).collect(),
                arrivals: r.jobs.iter().map(|&j| plan.timing[j].arrival).collect(),
                completions: r.jobs.iter().map(|&j| plan.timing[j].completion).collect(),
                return_time: plan.return_time[k],
            })
            .collect();
        PlanDocument {
            solver: solver.to_string(),
            optimal,
            objective,
            routes,
        }
    }

    /// Rebuilds routes against `instance` and reschedules them.
    pub fn to_plan(&self, instance: &DispatchInstance) -> Result<DispatchPlan, DispatchError> {
        let mut routes = Vec::new();
        for r in &self.routes {
            let depot = instance
                .depots
                .iter()
                .position(|d| d.id == r.depot)
                .ok_or_else(|| DispatchError::InvalidInstance(format!("unknown depot \"{}\"", r.depot)))?;
            let jobs = r
                .components
                .iter()
                .map(|id| {
                    instance
                        .failed
                        .iter()
                        .position(|f| f.id == *id)
                        .ok_or_else(|| DispatchError::InvalidInstance(format!("unknown component \"{id}\"")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            routes.push(Route {
                depot,
                crew: r.crew,
                jobs,
            });
        }
        schedule_plan(instance, &routes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }
}
