//! End-to-end runs: scenarios, reduction, dispatch, timelines and reports,
//! written to an artifact directory with a content-hash manifest.
//!
//! Layout of a run directory:
//!
//! ```text
//! scenarios.json            full scenario set
//! reduced.json              reduced set (representatives protected)
//! plans/s<id>-<solver>.json one plan per scenario and solver
//! timelines/s<id>-<solver>.csv
//! reports/comparison.csv    objective and gap per scenario and solver
//! reports/comparison.txt
//! reports/resilience-s<id>.csv / .svg
//! manifest.json             sha256 of every file above
//! timing.json               wall-clock sidecar, not hashed
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SolverKind};
use crate::dispatch::{
    build_instance, exact_dispatch, objective, singleton_curtailment, DispatchInstance, DispatchPlan,
    ObjectiveBreakdown, PlanDocument,
};
use crate::ga::ga_dispatch;
use crate::grid::{load_network_file, Network};
use crate::policy::{load_checkpoint, policy_dispatch, PolicyModel};
use crate::powerflow::{ens_timeline, write_resilience_csv, RepairSchedule, RestorationTimeline};
use crate::report::{emit_comparison, resilience_csv, resilience_svg, ComparisonReport, SolverPlan};
use crate::scenario::{forward_reduce, generate_scenarios, select_representatives, DamageScenario, ScenarioSet};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Samples the full set.
pub fn run_gen(cfg: &RunConfig, net: &Network) -> Result<ScenarioSet> {
    let s = &cfg.scenario;
    generate_scenarios(net, &cfg.event, s.n_sce, s.weights, s.ens_mode, cfg.seed)
}

/// Return-period representatives, then forward reduction to `k` with the
/// representatives kept.
pub fn run_reduce(cfg: &RunConfig, set: &ScenarioSet) -> Result<(ScenarioSet, Vec<usize>)> {
    let reps = select_representatives(set, &cfg.scenario.periods)?;
    let k = cfg.scenario.k.min(set.scenarios.len()).max(reps.len());
    Ok((forward_reduce(set, k, &reps)?, reps))
}

/// A solved plan with its provenance.
#[derive(Debug, Clone)]
pub struct SolvedPlan {
    pub solver: SolverKind,
    pub plan: DispatchPlan,
    pub objective: ObjectiveBreakdown,
    pub optimal: bool,
    pub seconds: f64,
}

/// Per-scenario solver seeds, so that results do not depend on which
/// scenarios survived reduction.
fn scenario_seed(base: u64, scenario: usize) -> u64 {
    base ^ (scenario as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs one solver on an instance.
pub fn solve(
    cfg: &RunConfig,
    solver: SolverKind,
    instance: &DispatchInstance,
    model: Option<&PolicyModel>,
    scenario: usize,
) -> Result<SolvedPlan> {
    let start = Instant::now();
    let d = &cfg.dispatch;
    let (plan, objective, optimal) = match solver {
        SolverKind::Exact => {
            let out = exact_dispatch(instance, &d.exact.limits())?;
            (out.plan, out.objective, out.optimal)
        }
        SolverKind::Ga => {
            let mut ga = d.ga.clone();
            ga.seed = scenario_seed(ga.seed, scenario);
            let out = ga_dispatch(instance, &ga)?;
            (out.plan, out.objective, false)
        }
        SolverKind::Policy => {
            let model = model.ok_or_else(|| Error::Config("policy solver needs a trained model".into()))?;
            let out = policy_dispatch(model, instance, d.policy.samples, scenario_seed(cfg.seed, scenario))?;
            (out.plan, out.objective, false)
        }
    };
    Ok(SolvedPlan {
        solver,
        plan,
        objective,
        optimal,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Timeline of `scenario` when the crews follow `plan`, a plan for the
/// instance built from `scenario`.
pub fn plan_timeline(net: &Network, scenario: &DamageScenario, plan: &DispatchPlan) -> Result<RestorationTimeline> {
    let failed: Vec<usize> = scenario.failed_indices().collect();
    if failed.len() != plan.timing.len() {
        return Err(crate::dispatch::DispatchError::PlanMismatch {
            expected: failed.len(),
            got: plan.timing.len(),
        }
        .into());
    }
    let schedule = RepairSchedule::from_completions(net, failed.iter().zip(&plan.timing).map(|(&c, t)| (c, t.completion)));
    Ok(ens_timeline(net, &scenario.failures, &schedule, net.peak_step())?)
}

/// Timeline of an undamaged or fully repaired scenario.
fn idle_timeline(net: &Network, scenario: &DamageScenario) -> Result<RestorationTimeline> {
    let schedule = RepairSchedule::from_completions(net, std::iter::empty());
    Ok(ens_timeline(net, &scenario.failures, &schedule, net.peak_step())?)
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub scenario: usize,
    /// `None` when nothing failed.
    pub instance: Option<DispatchInstance>,
    pub plans: Vec<SolvedPlan>,
    pub timelines: Vec<(SolverKind, RestorationTimeline)>,
}

fn run_scenario(
    cfg: &RunConfig,
    net: &Network,
    curtailment: &[f64],
    scenario: &DamageScenario,
    model: Option<&PolicyModel>,
) -> Result<ScenarioOutcome> {
    let solvers = &cfg.dispatch.solvers;
    if scenario.failure_count() == 0 {
        let t = idle_timeline(net, scenario)?;
        return Ok(ScenarioOutcome {
            scenario: scenario.id,
            instance: None,
            plans: Vec::new(),
            timelines: solvers.iter().map(|&s| (s, t.clone())).collect(),
        });
    }
    let instance = build_instance(net, scenario, curtailment, cfg.dispatch.gamma, cfg.dispatch.speed);
    let mut plans = Vec::with_capacity(solvers.len());
    let mut timelines = Vec::with_capacity(solvers.len());
    for &s in solvers {
        let solved = solve(cfg, s, &instance, model, scenario.id)?;
        timelines.push((s, plan_timeline(net, scenario, &solved.plan)?));
        plans.push(solved);
    }
    Ok(ScenarioOutcome {
        scenario: scenario.id,
        instance: Some(instance),
        plans,
        timelines,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub network_sha256: String,
    pub representatives: Vec<usize>,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub stages: BTreeMap<String, f64>,
    /// `s<id>-<solver>` to seconds.
    pub solvers: BTreeMap<String, f64>,
}

/// Result of a finished run.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub comparison: ComparisonReport,
    pub outcomes: Vec<ScenarioOutcome>,
    pub timing: Timing,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }
}

/// Config as recorded in the manifest: paths reduced to file names so the
/// record does not depend on where the run lives.
fn portable_config(cfg: &RunConfig) -> RunConfig {
    let name = |p: &Path| PathBuf::from(p.file_name().unwrap_or_default());
    let mut c = cfg.clone();
    c.network = name(&cfg.network);
    c.output = PathBuf::from(".");
    c.dispatch.policy.model = cfg.dispatch.policy.model.as_deref().map(name);
    c
}

/// Runs every stage and writes the artifact directory `cfg.output`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    let mut timing = Timing::default();
    let mut clock = Instant::now();
    let mut lap = |timing: &mut Timing, name: &str| {
        timing.stages.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let (net, network_sha256, model) = stage("parse", (|| {
        cfg.validate()?;
        let bytes = fs::read(&cfg.network).map_err(|e| Error::io(format!("reading {}", cfg.network.display()), e))?;
        let net = load_network_file(&cfg.network)?;
        let model = match (&cfg.dispatch.policy.model, cfg.dispatch.solvers.contains(&SolverKind::Policy)) {
            (Some(p), true) => Some(load_checkpoint(p)?),
            _ => None,
        };
        Ok((net, sha256_hex(&bytes), model))
    })())?;
    lap(&mut timing, "parse");

    let root = cfg.output.as_path();
    fs::create_dir_all(root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
    let mut w = Writer { root, files: Vec::new() };

    let set = stage("gen", run_gen(cfg, &net))?;
    stage("gen", w.put("scenarios.json", set.to_json().as_bytes()))?;
    lap(&mut timing, "gen");

    let (reduced, reps) = stage("reduce", run_reduce(cfg, &set))?;
    stage("reduce", w.put("reduced.json", reduced.to_json().as_bytes()))?;
    lap(&mut timing, "reduce");

    let outcomes = stage("dispatch", (|| {
        let curtailment = singleton_curtailment(&net)?;
        reduced
            .scenarios
            .par_iter()
            .map(|sc| run_scenario(cfg, &net, &curtailment, sc, model.as_ref()))
            .collect::<Result<Vec<_>>>()
    })())?;
    lap(&mut timing, "dispatch");

    let mut comparison = ComparisonReport::default();
    stage("report", (|| {
        let exact_name = cfg.dispatch.solvers.contains(&SolverKind::Exact).then_some("exact");
        for o in &outcomes {
            if let Some(inst) = &o.instance {
                for p in &o.plans {
                    let doc = PlanDocument::new(p.solver.name(), p.optimal, inst, &p.plan, p.objective.clone());
                    w.put(&format!("plans/s{}-{}.json", o.scenario, p.solver), doc.to_json().as_bytes())?;
                    timing.solvers.insert(format!("s{}-{}", o.scenario, p.solver), p.seconds);
                }
                let named: Vec<SolverPlan> = o
                    .plans
                    .iter()
                    .map(|p| SolverPlan {
                        solver: p.solver.name(),
                        plan: &p.plan,
                        seconds: Some(p.seconds),
                    })
                    .collect();
                comparison.extend(emit_comparison(o.scenario, inst, &named, exact_name)?);
            }
            for (s, t) in &o.timelines {
                let mut buf = Vec::new();
                write_resilience_csv(t, &mut buf).map_err(|e| Error::Config(format!("csv: {e}")))?;
                w.put(&format!("timelines/s{}-{}.csv", o.scenario, s), &buf)?;
            }
            let series: Vec<(String, Vec<f64>)> =
                o.timelines.iter().map(|(s, t)| (s.name().to_string(), t.resilience())).collect();
            w.put(&format!("reports/resilience-s{}.csv", o.scenario), resilience_csv(&series)?.as_bytes())?;
            let title = format!("scenario {}", o.scenario);
            w.put(&format!("reports/resilience-s{}.svg", o.scenario), resilience_svg(&series, &title)?.as_bytes())?;
        }
        w.put("reports/comparison.csv", comparison.to_csv(false).as_bytes())?;
        w.put("reports/comparison.txt", comparison.to_text(false).as_bytes())?;
        Ok(())
    })())?;
    lap(&mut timing, "report");

    let mut files = std::mem::take(&mut w.files);
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: portable_config(cfg),
        network_sha256,
        representatives: reps,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    stage("manifest", write_file(&root.join(MANIFEST), text.as_bytes()))?;
    let timing_text = serde_json::to_string_pretty(&timing).expect("timing serialises");
    stage("manifest", write_file(&root.join(TIMING), timing_text.as_bytes()))?;

    Ok(RunSummary {
        dir: root.to_path_buf(),
        manifest,
        comparison,
        outcomes,
        timing,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

/// Problems found when re-hashing a run directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ManifestCheck {
    pub missing: Vec<String>,
    pub changed: Vec<String>,
    /// Files present on disk but not listed.
    pub unlisted: Vec<String>,
}

impl ManifestCheck {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.changed.is_empty() && self.unlisted.is_empty()
    }
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

/// Re-hashes every listed file and looks for files the manifest misses.
pub fn verify_manifest(dir: &Path) -> Result<ManifestCheck> {
    let manifest = read_manifest(dir)?;
    let mut check = ManifestCheck::default();
    for f in &manifest.files {
        match fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            Ok(_) => check.changed.push(f.path.clone()),
            Err(_) => check.missing.push(f.path.clone()),
        }
    }
    let mut on_disk = Vec::new();
    walk(dir, dir, &mut on_disk).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    on_disk.sort();
    for p in on_disk {
        if p != MANIFEST && p != TIMING && !manifest.files.iter().any(|f| f.path == p) {
            check.unlisted.push(p);
        }
    }
    Ok(check)
}

/// Objective of a stored plan document re-evaluated on `instance`.
pub fn rescore(doc: &PlanDocument, instance: &DispatchInstance) -> Result<(DispatchPlan, ObjectiveBreakdown)> {
    let plan = doc.to_plan(instance)?;
    let obj = objective(&plan, instance)?;
    Ok((plan, obj))
}
