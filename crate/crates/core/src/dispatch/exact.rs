//! Exact dispatch by dynamic programming over job subsets.
//!
//! For one crew, a partial route is summarised by the set of jobs done, the
//! last job, its finishing time and its accumulated `Σ CL·completion`. Any
//! extension of a route costs more when started later, so at each
//! (set, last) only Pareto-minimal (time, cost) pairs are kept. Crews of a
//! depot are combined over set partitions, and depots are combined by
//! sweeping a threshold on the restoration time: for a threshold `T*` every
//! depot independently takes its cheapest plan finishing by `T*`. The
//! minimum over all thresholds equal to some achievable finishing time is the
//! optimum of `γ·max T + (1 − γ)·Σ cost`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    cluster_to_depots, objective, schedule_plan, DispatchError, DispatchInstance, DispatchPlan,
    ObjectiveBreakdown, Route,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactLimits {
    pub max_components: usize,
    pub max_crews: usize,
    /// Wall-clock budget; the greedy plan is returned, marked non-optimal,
    /// when it runs out.
    pub timeout: Option<Duration>,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits {
            max_components: 9,
            max_crews: 3,
            timeout: Some(Duration::from_secs(60)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub plan: DispatchPlan,
    pub objective: ObjectiveBreakdown,
    pub optimal: bool,
}

#[derive(Debug, Clone)]
struct Label {
    time: f64,
    cost: f64,
    routes: Vec<Vec<u8>>,
}

fn insert_pareto(front: &mut Vec<Label>, label: Label) {
    if front
        .iter()
        .any(|l| l.time <= label.time && l.cost <= label.cost)
    {
        return;
    }
    front.retain(|l| !(label.time <= l.time && label.cost <= l.cost));
    front.push(label);
}

struct Cluster {
    jobs: Vec<usize>,
    crews: usize,
    /// Travel from depot to each local job.
    from_depot: Vec<f64>,
    /// Travel between local jobs.
    between: Vec<Vec<f64>>,
    repair: Vec<f64>,
    cl: Vec<f64>,
}

impl Cluster {
    fn new(instance: &DispatchInstance, depot: usize, jobs: Vec<usize>) -> Self {
        let home = instance.depots[depot].coords;
        let pts: Vec<_> = jobs.iter().map(|&j| instance.failed[j].coords).collect();
        Cluster {
            from_depot: pts.iter().map(|&p| instance.travel(home, p)).collect(),
            between: pts
                .iter()
                .map(|&a| pts.iter().map(|&b| instance.travel(a, b)).collect())
                .collect(),
            repair: jobs.iter().map(|&j| instance.failed[j].repair_duration).collect(),
            cl: jobs.iter().map(|&j| instance.failed[j].curtailed_load).collect(),
            crews: instance.depots[depot].crew_count,
            jobs,
        }
    }
}

struct Deadline(Option<Instant>);

impl Deadline {
    fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }
}

/// Pareto front of (finish time, cost) for one crew over every job subset.
fn single_crew_fronts(c: &Cluster, deadline: &Deadline) -> Option<Vec<Vec<Label>>> {
    let m = c.jobs.len();
    let full = 1usize << m;
    // states[mask][last]
    let mut states: Vec<Vec<Vec<Label>>> = vec![vec![Vec::new(); m]; full];
    for j in 0..m {
        let t = c.from_depot[j] + c.repair[j];
        states[1 << j][j].push(Label {
            time: t,
            cost: c.cl[j] * t,
            routes: vec![vec![j as u8]],
        });
    }
    for mask in 1..full {
        if mask & 0xff == 0 && deadline.expired() {
            return None;
        }
        for last in 0..m {
            if states[mask][last].is_empty() {
                continue;
            }
            let labels = std::mem::take(&mut states[mask][last]);
            for next in (0..m).filter(|&n| mask & (1 << n) == 0) {
                let nmask = mask | (1 << next);
                for l in &labels {
                    let t = l.time + c.between[last][next] + c.repair[next];
                    let mut order = l.routes[0].clone();
                    order.push(next as u8);
                    insert_pareto(
                        &mut states[nmask][next],
                        Label {
                            time: t,
                            cost: l.cost + c.cl[next] * t,
                            routes: vec![order],
                        },
                    );
                }
            }
            states[mask][last] = labels;
        }
    }
    let mut fronts: Vec<Vec<Label>> = vec![Vec::new(); full];
    fronts[0].push(Label {
        time: 0.0,
        cost: 0.0,
        routes: vec![Vec::new()],
    });
    for mask in 1..full {
        for last in 0..m {
            for l in std::mem::take(&mut states[mask][last]) {
                insert_pareto(&mut fronts[mask], l);
            }
        }
    }
    Some(fronts)
}

/// Pareto front of (max finish time, total cost) over assignments of the
/// whole cluster to its crews. Each label carries one route per crew.
fn cluster_front(c: &Cluster, deadline: &Deadline) -> Option<Vec<Label>> {
    let m = c.jobs.len();
    let full = (1usize << m) - 1;
    let single = single_crew_fronts(c, deadline)?;
    let mut prev = single.clone();
    for _ in 1..c.crews {
        let mut next: Vec<Vec<Label>> = vec![Vec::new(); full + 1];
        for mask in 0..=full {
            if mask & 0x3f == 0 && deadline.expired() {
                return None;
            }
            // this crew idle
            for l in &prev[mask] {
                let mut routes = l.routes.clone();
                routes.push(Vec::new());
                insert_pareto(
                    &mut next[mask],
                    Label {
                        time: l.time,
                        cost: l.cost,
                        routes,
                    },
                );
            }
            if mask == 0 {
                continue;
            }
            // this crew takes a subset containing the lowest job of `mask`
            let low = mask & mask.wrapping_neg();
            let rest_bits = mask ^ low;
            let mut sub = rest_bits;
            loop {
                let s = sub | low;
                let other = mask ^ s;
                for a in &single[s] {
                    for b in &prev[other] {
                        let mut routes = vec![a.routes[0].clone()];
                        routes.extend(b.routes.iter().cloned());
                        insert_pareto(
                            &mut next[mask],
                            Label {
                                time: a.time.max(b.time),
                                cost: a.cost + b.cost,
                                routes,
                            },
                        );
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest_bits;
            }
        }
        prev = next;
    }
    Some(std::mem::take(&mut prev[full]))
}

fn check_limits(
    instance: &DispatchInstance,
    clusters: &[Vec<usize>],
    limits: &ExactLimits,
) -> Result<(), DispatchError> {
    for (d, jobs) in clusters.iter().enumerate() {
        let crews = instance.depots[d].crew_count;
        if jobs.len() > limits.max_components || crews > limits.max_crews {
            return Err(DispatchError::LimitExceeded {
                depot: instance.depots[d].id.clone(),
                components: jobs.len(),
                crews,
                max_components: limits.max_components,
                max_crews: limits.max_crews,
            });
        }
    }
    Ok(())
}

fn clusters(instance: &DispatchInstance) -> Vec<Vec<usize>> {
    let assignment = cluster_to_depots(&instance.failed, &instance.depots);
    let mut out = vec![Vec::new(); instance.depots.len()];
    for (j, &d) in assignment.iter().enumerate() {
        out[d].push(j);
    }
    out
}

/// Minimum-objective plan. Depots whose cluster or crew count exceeds
/// `limits` are rejected; on timeout the greedy plan is returned with
/// `optimal = false`.
pub fn exact_dispatch(
    instance: &DispatchInstance,
    limits: &ExactLimits,
) -> Result<ExactOutcome, DispatchError> {
    instance.validate()?;
    let clusters = clusters(instance);
    check_limits(instance, &clusters, limits)?;
    let deadline = Deadline(limits.timeout.map(|t| Instant::now() + t));

    let mut fronts = Vec::with_capacity(clusters.len());
    for (d, jobs) in clusters.iter().enumerate() {
        let c = Cluster::new(instance, d, jobs.clone());
        match cluster_front(&c, &deadline) {
            Some(f) => fronts.push((c, f)),
            None => {
                let (plan, objective) = greedy_dispatch(instance)?;
                return Ok(ExactOutcome {
                    plan,
                    objective,
                    optimal: false,
                });
            }
        }
    }

    let gamma = instance.gamma;
    let mut thresholds: Vec<f64> = fronts
        .iter()
        .flat_map(|(_, f)| f.iter().map(|l| l.time))
        .collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for &t_star in &thresholds {
        let mut pick = Vec::with_capacity(fronts.len());
        let (mut t_max, mut cost) = (0.0f64, 0.0);
        for (_, f) in &fronts {
            let chosen = f
                .iter()
                .enumerate()
                .filter(|(_, l)| l.time <= t_star)
                .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.1.time.total_cmp(&b.1.time)));
            match chosen {
                Some((i, l)) => {
                    pick.push(i);
                    t_max = t_max.max(l.time);
                    cost += l.cost;
                }
                None => break,
            }
        }
        if pick.len() < fronts.len() {
            continue;
        }
        let value = gamma * t_max + (1.0 - gamma) * cost;
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, pick));
        }
    }
    let (_, pick) = best.expect("every front is non-empty");

    let mut routes = Vec::new();
    for (d, ((c, f), &i)) in fronts.iter().zip(&pick).enumerate() {
        for (crew, order) in f[i].routes.iter().enumerate() {
            routes.push(Route {
                depot: d,
                crew,
                jobs: order.iter().map(|&k| c.jobs[k as usize]).collect(),
            });
        }
    }
    let plan = schedule_plan(instance, &routes)?;
    let objective = objective(&plan, instance)?;
    Ok(ExactOutcome {
        plan,
        objective,
        optimal: true,
    })
}

/// List-scheduling heuristic: jobs of each depot in decreasing
/// `CL / (travel + repair)` order, each appended to the crew that is free
/// first.
pub fn greedy_dispatch(
    instance: &DispatchInstance,
) -> Result<(DispatchPlan, ObjectiveBreakdown), DispatchError> {
    let mut routes = Vec::new();
    for (d, jobs) in clusters(instance).into_iter().enumerate() {
        let depot = &instance.depots[d];
        let mut jobs = jobs;
        let ratio = |j: usize| {
            let f = &instance.failed[j];
            f.curtailed_load / (instance.travel(depot.coords, f.coords) + f.repair_duration)
        };
        jobs.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(a.cmp(&b)));
        let mut free = vec![0.0f64; depot.crew_count];
        let mut at = vec![depot.coords; depot.crew_count];
        let mut seqs = vec![Vec::new(); depot.crew_count];
        for j in jobs {
            let f = &instance.failed[j];
            let crew = (0..depot.crew_count)
                .min_by(|&a, &b| {
                    let ea = free[a] + instance.travel(at[a], f.coords);
                    let eb = free[b] + instance.travel(at[b], f.coords);
                    ea.total_cmp(&eb).then(a.cmp(&b))
                })
                .expect("crew_count >= 1");
            free[crew] += instance.travel(at[crew], f.coords) + f.repair_duration;
            at[crew] = f.coords;
            seqs[crew].push(j);
        }
        for (crew, jobs) in seqs.into_iter().enumerate() {
            routes.push(Route { depot: d, crew, jobs });
        }
    }
    let plan = schedule_plan(instance, &routes)?;
    let obj = objective(&plan, instance)?;
    Ok((plan, obj))
}

/// All labelled sequences of `jobs` split over `crews` crews.
fn ordered_partitions(jobs: &[usize], crews: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(
        remaining: &mut Vec<usize>,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if remaining.is_empty() {
            out.push(current.clone());
            return;
        }
        for i in 0..remaining.len() {
            let j = remaining.remove(i);
            for c in 0..current.len() {
                current[c].push(j);
                rec(remaining, current, out);
                current[c].pop();
            }
            remaining.insert(i, j);
        }
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    rec(&mut jobs.to_vec(), &mut vec![Vec::new(); crews], &mut out);
    out.retain(|p| seen.insert(p.clone()));
    out
}

/// Unpruned enumeration of every feasible plan. Only for small instances.
pub fn enumerate_optimum(
    instance: &DispatchInstance,
) -> Result<(DispatchPlan, ObjectiveBreakdown), DispatchError> {
    instance.validate()?;
    let per_depot: Vec<Vec<Vec<Vec<usize>>>> = clusters(instance)
        .iter()
        .enumerate()
        .map(|(d, jobs)| ordered_partitions(jobs, instance.depots[d].crew_count))
        .collect();
    let mut best: Option<(DispatchPlan, ObjectiveBreakdown)> = None;
    let mut idx = vec![0usize; per_depot.len()];
    loop {
        let routes: Vec<Route> = idx
            .iter()
            .enumerate()
            .flat_map(|(d, &i)| {
                per_depot[d][i]
                    .iter()
                    .enumerate()
                    .map(move |(crew, jobs)| Route {
                        depot: d,
                        crew,
                        jobs: jobs.clone(),
                    })
            })
            .collect();
        let plan = schedule_plan(instance, &routes)?;
        let obj = objective(&plan, instance)?;
        if best.as_ref().is_none_or(|(_, b)| obj.value < b.value) {
            best = Some((plan, obj));
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(best.expect("at least one plan"));
            }
            idx[d] += 1;
            if idx[d] < per_depot[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
