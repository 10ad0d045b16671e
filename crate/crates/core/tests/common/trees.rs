use quake_restore::grid::{load_network, Network};
use rand::Rng;

/// Random tree: bus i hangs off a uniformly chosen earlier bus. Loads and
/// capacities are multiples of 0.5 MW; impedances are small enough that
/// voltage limits never bind.
pub fn random_tree(rng: &mut impl Rng, with_dg: bool) -> (Network, Vec<usize>) {
    let n = rng.random_range(2..=6);
    let parent: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { rng.random_range(0..i) }).collect();
    let buses: Vec<String> = (0..n)
        .map(|i| {
            let load = if i == 0 { 0.0 } else { 0.5 * rng.random_range(0..=6) as f64 };
            let mut s = format!(r#"{{"id": "B{i}", "coords": [{i}, {}], "power_factor_angle": 0.3"#, parent[i]);
            if i == 0 {
                let limit = 0.5 * rng.random_range(1..=16) as f64;
                s.push_str(&format!(r#", "is_substation": true, "import_limit_mva": {limit}"#));
            }
            if load > 0.0 {
                s.push_str(&format!(r#", "load_profile_ref": "flat", "load_scale": {load}"#));
            }
            s.push('}');
            s
        })
        .collect();
    let lines: Vec<String> = (1..n)
        .map(|i| {
            let cap = 0.5 * rng.random_range(1..=12) as f64;
            format!(
                r#"{{"id": "L{i}", "from_bus": "B{}", "to_bus": "B{i}", "resistance": 0.0005, "reactance": 0.0005, "capacity_mva": {cap}}}"#,
                parent[i]
            )
        })
        .collect();
    let mut components: Vec<String> = (1..n)
        .map(|i| format!(r#"{{"id": "C{i}", "kind": "line", "ref": "L{i}"}}"#))
        .collect();
    components.push(r#"{"id": "S0", "kind": "substation", "ref": "B0"}"#.into());
    let mut generators = String::new();
    if with_dg {
        let at = rng.random_range(1..n);
        let p = 0.5 * rng.random_range(1..=4) as f64;
        generators = format!(r#""generators": [{{"id": "G", "bus": "B{at}", "p_min": 0, "p_max": {p}, "q_min": -1, "q_max": 1}}],"#);
        components.push(r#"{"id": "CG", "kind": "generator", "ref": "G"}"#.into());
    }
    let doc = format!(
        r#"{{"buses": [{}], "lines": [{}], {generators} "components": [{}],
            "depots": [{{"id": "D0", "coords": [0, 1], "crew_count": 1}}],
            "profiles": [{{"id": "flat", "hourly_p": [1.0]}}]}}"#,
        buses.join(","),
        lines.join(","),
        components.join(",")
    );
    (load_network(&doc).expect("random tree is valid"), parent)
}

/// Minimum total shed by exhaustive search over shed vectors on a 0.5 MW
/// grid. Flows on a source-at-root tree are fixed by the served loads, so
/// each candidate is checked directly against line, import and voltage
/// limits. The shedding polytope is defined by a laminar (subtree) family
/// with half-integral data, so an optimal vertex lies on this grid.
pub fn brute_force_shed(net: &Network, parent: &[usize], status: &[bool]) -> f64 {
    let n = parent.len();
    // line i (bus i's feeder) is component i-1; the substation is last
    let line_ok = |i: usize| status[i - 1];
    let sub_ok = status[n - 1];
    let mut energized = vec![false; n];
    energized[0] = sub_ok;
    for i in 1..n {
        // parents precede children
        energized[i] = energized[parent[i]] && line_ok(i);
    }
    let load: Vec<f64> = (0..n).map(|b| net.bus_load(b, 0).0).collect();
    let forced: f64 = (0..n).filter(|&b| !energized[b]).map(|b| load[b]).sum();
    let live: Vec<usize> = (1..n).filter(|&b| energized[b] && load[b] > 0.0).collect();
    if live.is_empty() {
        return forced;
    }
    let tan = 0.3f64.tan();
    let limit = net.import_limit(0);
    let v_min = net.buses[0].v_min;
    let v_max = net.buses[0].v_max;
    let steps: Vec<usize> = live.iter().map(|&b| (load[b] / 0.5).round() as usize).collect();
    let mut idx = vec![0usize; live.len()];
    let mut best = f64::INFINITY;
    loop {
        let mut served = vec![0.0; n];
        for (k, &b) in live.iter().enumerate() {
            served[b] = load[b] - 0.5 * idx[k] as f64;
        }
        // subtree sums, children have larger indices
        let mut flow = served.clone();
        for i in (1..n).rev() {
            let f = flow[i];
            flow[parent[i]] += f;
        }
        let mut ok = flow[0] <= limit + 1e-12 && flow[0] * tan <= limit + 1e-12;
        let mut drop = vec![0.0; n];
        for i in 1..n {
            if !energized[i] {
                continue;
            }
            let line = &net.lines[i - 1];
            ok &= flow[i] <= line.capacity_mva + 1e-12 && flow[i] * tan <= line.capacity_mva + 1e-12;
            drop[i] = drop[parent[i]] + line.resistance * flow[i] + line.reactance * flow[i] * tan;
        }
        let max_drop = drop.iter().cloned().fold(0.0, f64::max);
        ok &= max_drop <= v_max - v_min;
        if ok {
            let shed: f64 = idx.iter().map(|&k| 0.5 * k as f64).sum();
            best = best.min(shed);
        }
        // odometer
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] <= steps[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            break;
        }
    }
    forced + best
}
