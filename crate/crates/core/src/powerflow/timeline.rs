use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{energization_state, solve_shedding_lp, FlowSolution, OperationalState, PowerFlowError};
use crate::grid::Network;

/// Timestep from which each component is back in service. `None` marks a
/// component that never failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairSchedule {
    pub repair_step: Vec<Option<usize>>,
}

impl RepairSchedule {
    /// Every failed component repaired at the given step.
    pub fn new(repair_step: Vec<Option<usize>>) -> Self {
        RepairSchedule { repair_step }
    }

    /// Discretises continuous completion times (hours after the event) to
    /// the enclosing step: a job finishing at 2.3 h with 1 h steps is in
    /// service from step 3.
    pub fn from_completions(
        net: &Network,
        completions: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let mut repair_step = vec![None; net.component_count()];
        for (c, hours) in completions {
            let step = (hours / net.timestep_hours - 1e-9).ceil().max(0.0) as usize;
            repair_step[c] = Some(step);
        }
        RepairSchedule { repair_step }
    }

    /// Status vector at step `t` (`true` = operational).
    pub fn status_at(&self, t: usize) -> Vec<bool> {
        self.repair_step.iter().map(|r| r.is_none_or(|s| t >= s)).collect()
    }

    /// Number of steps until every component is back plus the first fully
    /// restored step.
    pub fn horizon(&self) -> usize {
        self.repair_step.iter().flatten().copied().max().unwrap_or(0) + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineStep {
    pub t: usize,
    pub state: OperationalState,
    pub flow: FlowSolution,
    pub resilience: f64,
    pub ens_cum_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationTimeline {
    pub timestep_hours: f64,
    pub steps: Vec<TimelineStep>,
    pub ens_mwh: f64,
}

impl RestorationTimeline {
    pub fn resilience(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.resilience).collect()
    }

    pub fn shed_mw(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.flow.total_shed_mw).collect()
    }

    /// First step at which every component is operational.
    pub fn first_full_restoration(&self) -> Option<usize> {
        self.steps.iter().find(|s| s.resilience >= 1.0).map(|s| s.t)
    }
}

/// Steps the network through a repair schedule, solving the shedding LP at
/// each step. Loads are read at `(start_step + t)` on the cyclic profile.
pub fn ens_timeline(
    net: &Network,
    failures: &[bool],
    schedule: &RepairSchedule,
    start_step: usize,
) -> Result<RestorationTimeline, PowerFlowError> {
    let n = net.component_count();
    if failures.len() != n {
        return Err(PowerFlowError::StatusLength { expected: n, got: failures.len() });
    }
    if schedule.repair_step.len() != n {
        return Err(PowerFlowError::StatusLength {
            expected: n,
            got: schedule.repair_step.len(),
        });
    }
    let mut repair_step = vec![None; n];
    for c in 0..n {
        if failures[c] {
            match schedule.repair_step[c] {
                Some(s) => repair_step[c] = Some(s),
                None => return Err(PowerFlowError::Unscheduled(net.components[c].id.clone())),
            }
        }
    }
    let effective = RepairSchedule { repair_step };
    let horizon = effective.horizon();

    let solved: Vec<(OperationalState, FlowSolution)> = (0..horizon)
        .into_par_iter()
        .map(|t| {
            let state = energization_state(net, &effective.status_at(t), start_step + t)?;
            let flow = solve_shedding_lp(net, &state)?;
            Ok((state, flow))
        })
        .collect::<Result<_, PowerFlowError>>()?;

    let mut ens = 0.0;
    let steps = solved
        .into_iter()
        .enumerate()
        .map(|(t, (state, flow))| {
            ens += flow.total_shed_mw * net.timestep_hours;
            TimelineStep {
                t,
                resilience: state.operational_fraction(),
                state,
                flow,
                ens_cum_mwh: ens,
            }
        })
        .collect();
    Ok(RestorationTimeline {
        timestep_hours: net.timestep_hours,
        steps,
        ens_mwh: ens,
    })
}

/// `(t, operational fraction)` per step.
pub fn resilience_curve(timeline: &RestorationTimeline) -> Vec<(usize, f64)> {
    timeline.steps.iter().map(|s| (s.t, s.resilience)).collect()
}

/// CSV with columns `t,resilience,shed_mw,ens_cum_mwh`.
pub fn write_resilience_csv<W: Write>(timeline: &RestorationTimeline, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "resilience", "shed_mw", "ens_cum_mwh"])?;
    for s in &timeline.steps {
        w.write_record([
            s.t.to_string(),
            s.resilience.to_string(),
            s.flow.total_shed_mw.to_string(),
            s.ens_cum_mwh.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
