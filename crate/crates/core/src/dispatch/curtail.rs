use rayon::prelude::*;

use super::{DispatchInstance, FailedComponent};
use crate::grid::Network;
use crate::powerflow::{energization_state, solve_shedding_lp, PowerFlowError};
use crate::scenario::DamageScenario;

/// Load (MW) lost at the peak step when each component alone is out of
/// service, relative to the undamaged network.
pub fn singleton_curtailment(net: &Network) -> Result<Vec<f64>, PowerFlowError> {
    let n = net.component_count();
    let step = net.peak_step();
    let shed = |status: &[bool]| -> Result<f64, PowerFlowError> {
        let state = energization_state(net, status, step)?;
        Ok(solve_shedding_lp(net, &state)?.total_shed_mw)
    };
    let base = shed(&vec![true; n])?;
    (0..n)
        .into_par_iter()
        .map(|c| {
            let mut status = vec![true; n];
            status[c] = false;
            Ok((shed(&status)? - base).max(0.0))
        })
        .collect()
}

/// `(component index, CL_d)` for every failed component of `scenario`.
pub fn attribute_curtailed_load(
    net: &Network,
    scenario: &DamageScenario,
) -> Result<Vec<(usize, f64)>, PowerFlowError> {
    let all = singleton_curtailment(net)?;
    Ok(scenario.failed_indices().map(|c| (c, all[c])).collect())
}

/// Dispatch instance for the failed components of `scenario`. `curtailment`
/// is the per-component table from [`singleton_curtailment`].
pub fn build_instance(
    net: &Network,
    scenario: &DamageScenario,
    curtailment: &[f64],
    gamma: f64,
    travel_speed: f64,
) -> DispatchInstance {
    DispatchInstance {
        failed: scenario
            .failed_indices()
            .map(|c| FailedComponent {
                id: net.components[c].id.clone(),
                coords: net.component_location(c),
                repair_duration: net.components[c].repair_duration,
                curtailed_load: curtailment[c],
            })
            .collect(),
        depots: net.depots.clone(),
        travel_speed,
        gamma,
        horizon: None,
        timestep_hours: net.timestep_hours,
    }
}
