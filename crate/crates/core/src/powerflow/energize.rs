use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PowerFlowError;
use crate::grid::Network;

/// Energization of buses and lines for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalState {
    pub step: usize,
    pub bus: Vec<bool>,
    pub line: Vec<bool>,
    /// Operational status per component (`true` = working).
    pub component: Vec<bool>,
}

impl OperationalState {
    pub fn line_operational(&self, net: &Network, line: usize) -> bool {
        net.line_component(line).is_none_or(|c| self.component[c])
    }

    pub fn generator_operational(&self, net: &Network, generator: usize) -> bool {
        net.generator_component(generator).is_none_or(|c| self.component[c])
    }

    /// Whether `bus` has a working substation source.
    pub fn substation_operational(&self, net: &Network, bus: usize) -> bool {
        net.buses[bus].is_substation && net.substation_component(bus).is_none_or(|c| self.component[c])
    }

    pub fn operational_fraction(&self) -> f64 {
        if self.component.is_empty() {
            return 1.0;
        }
        self.component.iter().filter(|&&ok| ok).count() as f64 / self.component.len() as f64
    }
}

/// A bus is energized iff operational lines connect it to an operational
/// substation or generator; a line is energized iff it is operational and
/// both ends are energized.
pub fn energization_state(
    net: &Network,
    status: &[bool],
    step: usize,
) -> Result<OperationalState, PowerFlowError> {
    if status.len() != net.component_count() {
        return Err(PowerFlowError::StatusLength {
            expected: net.component_count(),
            got: status.len(),
        });
    }
    let mut state = OperationalState {
        step,
        bus: vec![false; net.buses.len()],
        line: vec![false; net.lines.len()],
        component: status.to_vec(),
    };
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); net.buses.len()];
    for l in 0..net.lines.len() {
        if state.line_operational(net, l) {
            let (a, b) = net.line_ends(l);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut queue = VecDeque::new();
    for b in 0..net.buses.len() {
        let live_gen = net
            .generators_at(b)
            .iter()
            .any(|&g| state.generator_operational(net, g));
        if state.substation_operational(net, b) || live_gen {
            state.bus[b] = true;
            queue.push_back(b);
        }
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !state.bus[v] {
                state.bus[v] = true;
                queue.push_back(v);
            }
        }
    }
    for l in 0..net.lines.len() {
        let (a, b) = net.line_ends(l);
        state.line[l] = state.line_operational(net, l) && state.bus[a] && state.bus[b];
    }
    Ok(state)
}
