use super::{ScenarioError, ScenarioSet};

/// 1-Wasserstein distance between two weighted point sets on the real line,
/// `∫ |F_a(x) − F_b(x)| dx`. Each side is normalised to unit mass.
pub fn wasserstein_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let norm = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let total: f64 = pts.iter().map(|p| p.1).sum();
        pts.iter().map(|&(x, w)| (x, w / total)).collect()
    };
    // signed mass: +a, −b
    let mut events: Vec<(f64, f64)> = norm(a);
    events.extend(norm(b).into_iter().map(|(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut dist = 0.0;
    for i in 0..events.len() {
        diff += events[i].1;
        if let Some(next) = events.get(i + 1) {
            dist += diff.abs() * (next.0 - events[i].0);
        }
    }
    dist
}

/// Index of the retained scenario nearest in loss to `loss`; ties go to the
/// lower id.
fn nearest(set: &ScenarioSet, retained: &[usize], loss: f64) -> usize {
    *retained
        .iter()
        .min_by(|&&a, &&b| {
            let (sa, sb) = (&set.scenarios[a], &set.scenarios[b]);
            (sa.loss - loss)
                .abs()
                .total_cmp(&(sb.loss - loss).abs())
                .then(sa.id.cmp(&sb.id))
        })
        .expect("retained set non-empty")
}

/// Distance between the full set and the reduced set obtained by moving
/// each removed scenario's weight to its nearest retained scenario.
pub fn reduction_distance(set: &ScenarioSet, retained_ids: &[usize]) -> Result<f64, ScenarioError> {
    let positions = positions_of(set, retained_ids)?;
    let reduced = redistribute(set, &positions);
    let full: Vec<(f64, f64)> = set.scenarios.iter().map(|s| (s.loss, s.weight)).collect();
    let part: Vec<(f64, f64)> = positions
        .iter()
        .map(|&i| (set.scenarios[i].loss, reduced[i]))
        .collect();
    Ok(wasserstein_1d(&full, &part))
}

fn positions_of(set: &ScenarioSet, ids: &[usize]) -> Result<Vec<usize>, ScenarioError> {
    let mut out = Vec::new();
    for &id in ids {
        let pos = set
            .scenarios
            .iter()
            .position(|s| s.id == id)
            .ok_or(ScenarioError::UnknownScenario(id))?;
        if !out.contains(&pos) {
            out.push(pos);
        }
    }
    Ok(out)
}

/// New weight per scenario position (zero for removed ones). Retained
/// scenarios keep their own mass.
fn redistribute(set: &ScenarioSet, retained: &[usize]) -> Vec<f64> {
    let mut w = vec![0.0; set.scenarios.len()];
    for (i, s) in set.scenarios.iter().enumerate() {
        let to = if retained.contains(&i) { i } else { nearest(set, retained, s.loss) };
        w[to] += s.weight;
    }
    w
}

/// Greedy forward selection of `k` scenarios starting from `protected`.
///
/// Each step adds the scenario that minimises the Wasserstein distance between
/// the full and reduced loss distributions (ties: lower id). Removed weight is
/// moved to the nearest retained scenario by loss, and the result is
/// renormalised to unit mass.
pub fn forward_reduce(
    set: &ScenarioSet,
    k: usize,
    protected: &[usize],
) -> Result<ScenarioSet, ScenarioError> {
    let n = set.scenarios.len();
    if n == 0 {
        return Err(ScenarioError::Empty);
    }
    let mut selected = positions_of(set, protected)?;
    if k < selected.len() || k > n || k == 0 {
        return Err(ScenarioError::TargetSize {
            k,
            protected: selected.len(),
            available: n,
        });
    }
    let total: f64 = set.scenarios.iter().map(|s| s.weight).sum();
    let losses: Vec<f64> = set.scenarios.iter().map(|s| s.loss).collect();
    let weights: Vec<f64> = set.scenarios.iter().map(|s| s.weight / total).collect();

    // For nearest-loss redistribution the Wasserstein distance equals
    // Σ w_i · |L_i − L_nearest(i)|, which makes each candidate O(n).
    let mut gap: Vec<f64> = vec![f64::INFINITY; n];
    for &j in &selected {
        for i in 0..n {
            gap[i] = gap[i].min((losses[i] - losses[j]).abs());
        }
    }
    let mut in_set = vec![false; n];
    selected.iter().for_each(|&j| in_set[j] = true);

    while selected.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|&c| !in_set[c]) {
            let d: f64 = (0..n)
                .map(|i| weights[i] * gap[i].min((losses[i] - losses[c]).abs()))
                .sum();
            let better = match best {
                None => true,
                Some((bd, bc)) => {
                    d < bd || (d == bd && set.scenarios[c].id < set.scenarios[bc].id)
                }
            };
            if better {
                best = Some((d, c));
            }
        }
        let (_, c) = best.expect("candidates remain while below k");
        in_set[c] = true;
        selected.push(c);
        for i in 0..n {
            gap[i] = gap[i].min((losses[i] - losses[c]).abs());
        }
    }

    let new_weights = redistribute(set, &selected);
    let mass: f64 = new_weights.iter().sum();
    let mut keep: Vec<usize> = selected;
    keep.sort_by_key(|&i| set.scenarios[i].id);
    let scenarios = keep
        .into_iter()
        .map(|i| {
            let mut s = set.scenarios[i].clone();
            s.weight = new_weights[i] / mass;
            s
        })
        .collect();
    Ok(ScenarioSet {
        magnitude: set.magnitude,
        n_sce: set.n_sce,
        seed: set.seed,
        component_ids: set.component_ids.clone(),
        reduced_from: Some(n),
        scenarios,
    })
}
