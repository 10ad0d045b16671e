use serde::{Deserialize, Serialize};

use super::simplex::{self, LinearProgram, LpError};
use super::{OperationalState, PowerFlowError};
use crate::grid::Network;

/// Optimal operating point for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub step: usize,
    /// Active flow from `from_bus` to `to_bus`, MW.
    pub p_line: Vec<f64>,
    pub q_line: Vec<f64>,
    /// Per-unit voltage; `None` on de-energized buses.
    pub v: Vec<Option<f64>>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// Substation import per bus (zero on non-substation buses).
    pub p_import: Vec<f64>,
    pub q_import: Vec<f64>,
    pub p_shed: Vec<f64>,
    pub q_shed: Vec<f64>,
    pub total_shed_mw: f64,
}

/// Minimum-shedding dispatch with energization fixed by `state`.
///
/// Energized lines carry `|p|, |q| ≤ S_max` and obey the linear voltage drop
/// `v_from − v_to = ρ·p + χ·q`; energized buses balance generation, import,
/// line flows and served load; de-energized buses shed their whole load.
pub fn solve_shedding_lp(
    net: &Network,
    state: &OperationalState,
) -> Result<FlowSolution, PowerFlowError> {
    let step = state.step;
    let nb = net.buses.len();
    let mut lp = LinearProgram::default();

    let mut v_var = vec![None; nb];
    let mut shed_var = vec![None; nb];
    let mut import_var = vec![None; nb];
    let mut p_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    let mut q_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];

    for b in 0..nb {
        if !state.bus[b] {
            continue;
        }
        let bus = &net.buses[b];
        v_var[b] = Some(lp.add_var(0.0, bus.v_min, bus.v_max));
        let (p_load, _) = net.bus_load(b, step);
        if p_load > 0.0 {
            let s = lp.add_var(1.0, 0.0, p_load);
            shed_var[b] = Some(s);
            p_rows[b].push((s, 1.0));
            q_rows[b].push((s, net.shed_ratio(b, step)));
        }
        if state.substation_operational(net, b) {
            let limit = net.import_limit(b);
            let p = lp.add_var(0.0, 0.0, limit);
            let q = lp.add_var(0.0, -limit, limit);
            import_var[b] = Some((p, q));
            p_rows[b].push((p, 1.0));
            q_rows[b].push((q, 1.0));
        }
    }

    let mut gen_var = vec![None; net.generators.len()];
    for (g, gen) in net.generators.iter().enumerate() {
        let b = net.generator_bus(g);
        if state.bus[b] && state.generator_operational(net, g) {
            let p = lp.add_var(0.0, gen.p_min, gen.p_max);
            let q = lp.add_var(0.0, gen.q_min, gen.q_max);
            gen_var[g] = Some((p, q));
            p_rows[b].push((p, 1.0));
            q_rows[b].push((q, 1.0));
        }
    }

    let mut line_var = vec![None; net.lines.len()];
    for (l, line) in net.lines.iter().enumerate() {
        if !state.line[l] {
            continue;
        }
        let (from, to) = net.line_ends(l);
        let s = line.capacity_mva;
        let p = lp.add_var(0.0, -s, s);
        let q = lp.add_var(0.0, -s, s);
        line_var[l] = Some((p, q));
        // flow leaves `from`, arrives at `to`
        p_rows[from].push((p, -1.0));
        q_rows[from].push((q, -1.0));
        p_rows[to].push((p, 1.0));
        q_rows[to].push((q, 1.0));
        let (vf, vt) = (v_var[from].expect("energized"), v_var[to].expect("energized"));
        lp.add_row(
            vec![(vf, 1.0), (vt, -1.0), (p, -line.resistance), (q, -line.reactance)],
            0.0,
        );
    }

    for b in 0..nb {
        if !state.bus[b] {
            continue;
        }
        let (p_load, q_load) = net.bus_load(b, step);
        let q_load = if p_load > 0.0 { p_load * net.shed_ratio(b, step) } else { q_load };
        lp.add_row(std::mem::take(&mut p_rows[b]), p_load);
        lp.add_row(std::mem::take(&mut q_rows[b]), q_load);
    }

    let sol = if lp.num_vars() == 0 {
        simplex::LpSolution {
            x: Vec::new(),
            objective: 0.0,
            iterations: 0,
        }
    } else {
        simplex::solve(&lp).map_err(|source| match source {
            LpError::Infeasible(_) => PowerFlowError::Infeasible { step, source },
            _ => PowerFlowError::Solver { step, source },
        })?
    };
    let x = |v: Option<usize>| v.map_or(0.0, |i| sol.x[i]);

    let mut out = FlowSolution {
        step,
        p_line: line_var.iter().map(|v| x(v.map(|p| p.0))).collect(),
        q_line: line_var.iter().map(|v| x(v.map(|p| p.1))).collect(),
        v: v_var.iter().map(|v| v.map(|i| sol.x[i])).collect(),
        p_gen: gen_var.iter().map(|v| x(v.map(|p| p.0))).collect(),
        q_gen: gen_var.iter().map(|v| x(v.map(|p| p.1))).collect(),
        p_import: import_var.iter().map(|v| x(v.map(|p| p.0))).collect(),
        q_import: import_var.iter().map(|v| x(v.map(|p| p.1))).collect(),
        p_shed: vec![0.0; nb],
        q_shed: vec![0.0; nb],
        total_shed_mw: 0.0,
    };
    for b in 0..nb {
        let (p_load, _) = net.bus_load(b, step);
        let shed = if state.bus[b] { x(shed_var[b]) } else { p_load };
        out.p_shed[b] = shed;
        out.q_shed[b] = shed * net.shed_ratio(b, step);
    }
    out.total_shed_mw = out.p_shed.iter().sum();
    Ok(out)
}
