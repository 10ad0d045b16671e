//! Genetic-algorithm dispatch baseline.
//!
//! A chromosome holds, per depot, a permutation of the depot's cluster and
//! `crews − 1` cut points splitting it into crew routes. Offspring come from
//! order crossover on the permutations, a per-depot choice of parent cut
//! points, swap/insert mutation and single cut-point shifts.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{
    cluster_to_depots, greedy_dispatch, objective, schedule_plan, DispatchError, DispatchInstance,
    DispatchPlan, ObjectiveBreakdown, Route,
};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 200,
            generations: 500,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            elitism: 2,
            tournament: 3,
            seed: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |m: &str| Err(DispatchError::InvalidInstance(format!("ga config: {m}")));
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.elitism >= self.population {
            return bad("elitism must be below the population size");
        }
        if self.tournament == 0 {
            return bad("tournament size must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaChromosome {
    /// Per depot: permutation of its cluster (job indices).
    pub perms: Vec<Vec<usize>>,
    /// Per depot: non-decreasing cut positions, `crews − 1` of them.
    pub cuts: Vec<Vec<usize>>,
}

impl GaChromosome {
    pub fn routes(&self) -> Vec<Route> {
        let mut out = Vec::new();
        for (d, (perm, cuts)) in self.perms.iter().zip(&self.cuts).enumerate() {
            let mut start = 0;
            for (crew, &end) in cuts.iter().chain(std::iter::once(&perm.len())).enumerate() {
                out.push(Route {
                    depot: d,
                    crew,
                    jobs: perm[start..end].to_vec(),
                });
                start = end;
            }
        }
        out
    }

    fn from_plan(plan: &DispatchPlan, depots: usize) -> Self {
        let mut perms = vec![Vec::new(); depots];
        let mut cuts = vec![Vec::new(); depots];
        for r in &plan.routes {
            if r.crew > 0 {
                cuts[r.depot].push(perms[r.depot].len());
            }
            perms[r.depot].extend(&r.jobs);
        }
        GaChromosome { perms, cuts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub plan: DispatchPlan,
    pub objective: ObjectiveBreakdown,
    pub best: GaChromosome,
    /// Best-ever objective value after each generation.
    pub trace: Vec<f64>,
}

/// Allocation-light objective of a chromosome; agrees with
/// [`objective`] on the scheduled plan.
struct Evaluator<'a> {
    instance: &'a DispatchInstance,
}

impl Evaluator<'_> {
    fn value(&self, c: &GaChromosome) -> f64 {
        let inst = self.instance;
        let mut t_max = 0.0f64;
        let mut cost = 0.0;
        for (d, (perm, cuts)) in c.perms.iter().zip(&c.cuts).enumerate() {
            let home = inst.depots[d].coords;
            let mut start = 0;
            for &end in cuts.iter().chain(std::iter::once(&perm.len())) {
                let mut t = 0.0;
                let mut at = home;
                for &j in &perm[start..end] {
                    let f = &inst.failed[j];
                    t += inst.travel(at, f.coords) + f.repair_duration;
                    cost += f.curtailed_load * t;
                    at = f.coords;
                }
                t_max = t_max.max(t);
                start = end;
            }
        }
        inst.gamma * t_max + (1.0 - inst.gamma) * cost
    }
}

fn random_chromosome(clusters: &[Vec<usize>], crews: &[usize], rng: &mut Rng) -> GaChromosome {
    let mut perms = clusters.to_vec();
    let mut cuts = Vec::new();
    for (perm, &k) in perms.iter_mut().zip(crews) {
        perm.shuffle(rng);
        let mut c: Vec<usize> = (1..k).map(|_| rng.random_range(0..=perm.len())).collect();
        c.sort_unstable();
        cuts.push(c);
    }
    GaChromosome { perms, cuts }
}

/// Order crossover: copy a slice from `a`, fill the rest in `b`'s order.
fn order_crossover(a: &[usize], b: &[usize], rng: &mut Rng) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.to_vec();
    }
    let mut i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n);
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let slice = &a[i..=j];
    let mut rest = b.iter().filter(|x| !slice.contains(x));
    let mut child = Vec::with_capacity(n);
    for pos in 0..n {
        if pos >= i && pos <= j {
            child.push(a[pos]);
        } else {
            child.push(*rest.next().expect("same multiset"));
        }
    }
    child
}

fn mutate(c: &mut GaChromosome, rate: f64, rng: &mut Rng) {
    for d in 0..c.perms.len() {
        let n = c.perms[d].len();
        if n >= 2 && rng.random::<f64>() < rate {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if rng.random::<bool>() {
                c.perms[d].swap(i, j);
            } else {
                let x = c.perms[d].remove(i);
                c.perms[d].insert(j, x);
            }
        }
        if !c.cuts[d].is_empty() && rng.random::<f64>() < rate {
            let k = rng.random_range(0..c.cuts[d].len());
            let cut = &mut c.cuts[d][k];
            if rng.random::<bool>() {
                *cut = (*cut + 1).min(n);
            } else {
                *cut = cut.saturating_sub(1);
            }
            c.cuts[d].sort_unstable();
        }
    }
}

fn tournament<'a>(pop: &'a [(GaChromosome, f64)], size: usize, rng: &mut Rng) -> &'a GaChromosome {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let i = rng.random_range(0..pop.len());
        if pop[i].1 < pop[best].1 || (pop[i].1 == pop[best].1 && i < best) {
            best = i;
        }
    }
    &pop[best].0
}

/// Evolves dispatch plans; returns the best plan ever seen. Deterministic for
/// a fixed `config.seed` regardless of thread count.
pub fn ga_dispatch(instance: &DispatchInstance, config: &GaConfig) -> Result<GaOutcome, DispatchError> {
    instance.validate()?;
    config.validate()?;
    let assignment = cluster_to_depots(&instance.failed, &instance.depots);
    let mut clusters = vec![Vec::new(); instance.depots.len()];
    for (j, &d) in assignment.iter().enumerate() {
        clusters[d].push(j);
    }
    let crews: Vec<usize> = instance.depots.iter().map(|d| d.crew_count).collect();
    let eval = Evaluator { instance };
    let mut rng = rng::stream(config.seed, 0);

    let (greedy, _) = greedy_dispatch(instance)?;
    let mut members = vec![GaChromosome::from_plan(&greedy, instance.depots.len())];
    while members.len() < config.population {
        members.push(random_chromosome(&clusters, &crews, &mut rng));
    }
    let score = |members: Vec<GaChromosome>| -> Vec<(GaChromosome, f64)> {
        let values: Vec<f64> = members.par_iter().map(|c| eval.value(c)).collect();
        let mut pop: Vec<_> = members.into_iter().zip(values).collect();
        // stable: ties keep insertion order
        pop.sort_by(|a, b| a.1.total_cmp(&b.1));
        pop
    };
    let mut pop = score(members);
    let mut best = pop[0].clone();
    let mut trace = Vec::with_capacity(config.generations);

    for _ in 0..config.generations {
        let mut next: Vec<GaChromosome> = pop.iter().take(config.elitism).map(|p| p.0.clone()).collect();
        while next.len() < config.population {
            let a = tournament(&pop, config.tournament, &mut rng);
            let b = tournament(&pop, config.tournament, &mut rng);
            let mut child = if rng.random::<f64>() < config.crossover_rate {
                let perms = a
                    .perms
                    .iter()
                    .zip(&b.perms)
                    .map(|(pa, pb)| order_crossover(pa, pb, &mut rng))
                    .collect();
                let cuts = a
                    .cuts
                    .iter()
                    .zip(&b.cuts)
                    .map(|(ca, cb)| if rng.random::<bool>() { ca.clone() } else { cb.clone() })
                    .collect();
                GaChromosome { perms, cuts }
            } else {
                a.clone()
            };
            mutate(&mut child, config.mutation_rate, &mut rng);
            next.push(child);
        }
        pop = score(next);
        if pop[0].1 < best.1 {
            best = pop[0].clone();
        }
        trace.push(best.1);
    }

    let plan = schedule_plan(instance, &best.0.routes())?;
    let objective = objective(&plan, instance)?;
    Ok(GaOutcome {
        plan,
        objective,
        best: best.0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_crossover_keeps_permutation() {
        let mut rng = rng::stream(3, 0);
        let a = vec![0, 1, 2, 3, 4, 5, 6];
        let b = vec![6, 4, 2, 0, 5, 3, 1];
        for _ in 0..100 {
            let mut c = order_crossover(&a, &b, &mut rng);
            c.sort_unstable();
            assert_eq!(c, a);
        }
    }

    #[test]
    fn routes_split_at_cuts() {
        let c = GaChromosome {
            perms: vec![vec![3, 1, 2]],
            cuts: vec![vec![1, 1]],
        };
        let r = c.routes();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].jobs, vec![3]);
        assert!(r[1].jobs.is_empty());
        assert_eq!(r[2].jobs, vec![1, 2]);
    }
}
