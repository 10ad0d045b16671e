use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use quake_restore::config::{RunConfig, SolverKind};
use quake_restore::dispatch::{build_instance, singleton_curtailment, DispatchInstance, InstanceFamily, PlanDocument};
use quake_restore::grid::{load_network_file, Point};
use quake_restore::pipeline::{self, plan_timeline, rescore, run_gen, run_reduce, run_pipeline, verify_manifest};
use quake_restore::policy::{load_checkpoint, ppo_train_on, save_checkpoint, PolicyModel};
use quake_restore::powerflow::write_resilience_csv;
use quake_restore::report::{emit_comparison, resilience_csv, resilience_svg, ComparisonReport, SolverPlan};
use quake_restore::scenario::{parse_scenario_set, EnsMode, ScenarioSet};
use quake_restore::{Error, Result};

#[derive(Parser)]
#[command(name = "quake-restore", version, about = "Earthquake damage scenarios and repair-crew dispatch")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

/// Event and scenario settings that override the config.
#[derive(Args, Default)]
struct Overrides {
    /// Number of Monte Carlo scenarios.
    #[arg(long = "n")]
    n_sce: Option<usize>,
    #[arg(long)]
    magnitude: Option<f64>,
    /// `x,y` in km.
    #[arg(long, value_parser = parse_point)]
    epicenter: Option<Point>,
    /// Focal depth in km.
    #[arg(long)]
    depth: Option<f64>,
    /// Score scenarios with full restoration timelines.
    #[arg(long)]
    exact_ens: bool,
    /// Reduced set size.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated return periods.
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let s = &mut cfg.scenario;
        if let Some(n) = self.n_sce {
            s.n_sce = n;
        }
        if let Some(k) = self.k {
            s.k = k;
        }
        if let Some(p) = &self.periods {
            s.periods = p.clone();
        }
        if self.exact_ens {
            s.ens_mode = EnsMode::Exact;
        }
        let e = &mut cfg.event;
        if let Some(m) = self.magnitude {
            e.magnitude = m;
        }
        if let Some(p) = self.epicenter {
            e.epicenter = p;
        }
        if let Some(d) = self.depth {
            e.focal_depth = d;
        }
        cfg.validate()
    }
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(Point::new(num(x)?, num(y)?))
}

/// `--out` naming a `.json` file rather than a directory.
fn out_file(out: &Path, default_name: &str) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.to_path_buf()
    } else {
        out.join(default_name)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the full scenario set.
    Gen {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Reduce a scenario set, keeping return-period representatives.
    Reduce {
        /// Full set; `scenarios.json` under the output directory when absent.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Restoration timeline of one scenario under a stored plan.
    Eval {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        id: usize,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Solve one dispatch instance.
    Dispatch {
        solver: Solver,
        #[command(flatten)]
        source: InstanceArgs,
        /// Policy checkpoint.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Policy decodes (greedy plus samples − 1).
        #[arg(long)]
        samples: Option<usize>,
        /// Overrides the instance's trade-off weight.
        #[arg(long)]
        gamma: Option<f64>,
        /// GA population.
        #[arg(long)]
        pop: Option<usize>,
        /// GA generations.
        #[arg(long)]
        gens: Option<usize>,
    },
    /// Train the dispatch policy with PPO.
    Train {
        /// Instance family (JSON); the configured family when absent.
        #[arg(long)]
        instances: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        /// Checkpoint path; `policy.json` under `--out` when absent.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Tables and plots from stored artifacts.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Run every stage and write a hashed artifact directory.
    Pipeline {
        /// Re-hash an existing run directory instead of running.
        #[arg(long)]
        verify: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Objective and signed gap of several plans on one instance.
    Compare {
        #[command(flatten)]
        source: InstanceArgs,
        /// Plan documents; the solver name is read from each.
        #[arg(long = "plan", required = true)]
        plans: Vec<PathBuf>,
        /// Solver whose plan is the gap reference.
        #[arg(long, default_value = "exact")]
        exact: String,
    },
    /// Resilience curves from timeline CSVs written by `eval`.
    Resilience {
        /// `name=path.csv`, one per solver.
        #[arg(long = "series", required = true)]
        series: Vec<String>,
        #[arg(long, default_value = "resilience")]
        title: String,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Dispatch instance (JSON).
    #[arg(long, visible_alias = "in", conflicts_with_all = ["scenarios", "id"])]
    instance: Option<PathBuf>,
    /// Scenario set to build the instance from, with `--id` and `--config`.
    #[arg(long, requires = "id")]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    id: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Ga,
    Policy,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Exact => SolverKind::Exact,
            Solver::Ga => SolverKind::Ga,
            Solver::Policy => SolverKind::Policy,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

struct Ctx {
    global: Global,
}

impl Ctx {
    fn config(&self) -> Result<RunConfig> {
        let path = self
            .global
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = self.global.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.global.out {
            cfg.output = o.clone();
        }
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.global
            .out
            .clone()
            .or_else(|| cfg.map(|c| c.output.clone()))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn scenario_set(path: &Path) -> Result<ScenarioSet> {
        parse_scenario_set(&read(path)?)
    }

    /// The instance named by `--instance`, or built from a stored scenario.
    fn instance(&self, args: &InstanceArgs) -> Result<DispatchInstance> {
        if let Some(p) = &args.instance {
            let inst: DispatchInstance = parse_json(p)?;
            inst.validate()?;
            return Ok(inst);
        }
        let (Some(sp), Some(id)) = (&args.scenarios, args.id) else {
            return Err(Error::Config("give --instance, or --scenarios with --id".into()));
        };
        let cfg = self.config()?;
        let net = load_network_file(&cfg.network)?;
        let set = Self::scenario_set(sp)?;
        set.check_network(&net)?;
        let sc = set
            .get(id)
            .ok_or_else(|| Error::Config(format!("scenario {id} not in {}", sp.display())))?;
        let cl = singleton_curtailment(&net)?;
        Ok(build_instance(&net, sc, &cl, cfg.dispatch.gamma, cfg.dispatch.speed))
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let ctx = Ctx { global: cli.global };
    match cli.command {
        Command::Gen { overrides } => {
            let mut cfg = ctx.config()?;
            overrides.apply(&mut cfg)?;
            let net = load_network_file(&cfg.network)?;
            let set = run_gen(&cfg, &net)?;
            write(&out_file(&ctx.out_dir(Some(&cfg)), "scenarios.json"), &set.to_json())?;
        }
        Command::Reduce { scenarios, overrides } => {
            let mut cfg = ctx.config()?;
            overrides.apply(&mut cfg)?;
            let out = ctx.out_dir(Some(&cfg));
            let input = scenarios.unwrap_or_else(|| out.join("scenarios.json"));
            let set = Ctx::scenario_set(&input)?;
            let (reduced, reps) = run_reduce(&cfg, &set)?;
            eprintln!("representatives {reps:?}");
            write(&out_file(&out, "reduced.json"), &reduced.to_json())?;
        }
        Command::Eval { scenarios, id, plan } => {
            let cfg = ctx.config()?;
            let net = load_network_file(&cfg.network)?;
            let set = Ctx::scenario_set(&scenarios)?;
            set.check_network(&net)?;
            let sc = set.get(id).ok_or_else(|| Error::Config(format!("scenario {id} not in set")))?;
            let cl = singleton_curtailment(&net)?;
            let inst = build_instance(&net, sc, &cl, cfg.dispatch.gamma, cfg.dispatch.speed);
            let doc: PlanDocument = parse_json(&plan)?;
            let (plan, obj) = rescore(&doc, &inst)?;
            let timeline = plan_timeline(&net, sc, &plan)?;
            let mut buf = Vec::new();
            write_resilience_csv(&timeline, &mut buf).map_err(|e| Error::Config(format!("csv: {e}")))?;
            let path = ctx.out_dir(Some(&cfg)).join(format!("timeline-s{id}-{}.csv", doc.solver));
            write(&path, &String::from_utf8_lossy(&buf))?;
            println!(
                "objective {:.6}  ens {:.6} MWh  full restoration at step {}",
                obj.value,
                timeline.ens_mwh,
                timeline.first_full_restoration().map_or("-".into(), |t| t.to_string())
            );
        }
        Command::Dispatch { solver, source, model, samples, gamma, pop, gens } => {
            let mut inst = ctx.instance(&source)?;
            let mut cfg = match &ctx.global.config {
                Some(_) => ctx.config()?,
                None => bare_config(&ctx)?,
            };
            if let Some(g) = gamma {
                inst = inst.with_gamma(g);
                inst.validate()?;
            }
            if let Some(s) = samples {
                cfg.dispatch.policy.samples = s;
            }
            if let Some(p) = pop {
                cfg.dispatch.ga.population = p;
            }
            if let Some(g) = gens {
                cfg.dispatch.ga.generations = g;
            }
            if let Some(s) = ctx.global.seed {
                cfg.dispatch.ga.seed = s;
            }
            let kind = SolverKind::from(solver);
            let model = match kind {
                SolverKind::Policy => {
                    let path = model
                        .or_else(|| cfg.dispatch.policy.model.clone())
                        .ok_or_else(|| Error::Config("policy dispatch needs --model".into()))?;
                    Some(load_checkpoint(&path)?)
                }
                _ => None,
            };
            let id = source.id.unwrap_or(0);
            let solved = pipeline::solve(&cfg, kind, &inst, model.as_ref(), id)?;
            let doc = PlanDocument::new(kind.name(), solved.optimal, &inst, &solved.plan, solved.objective.clone());
            eprintln!("{kind}: objective {:.6} in {:.3}s", solved.objective.value, solved.seconds);
            match &ctx.global.out {
                Some(out) => write(&out_file(out, &format!("plan-{kind}.json")), &doc.to_json())?,
                None => println!("{}", doc.to_json()),
            }
        }
        Command::Train { instances, iters, model_out } => {
            let cfg = match &ctx.global.config {
                Some(_) => ctx.config()?,
                None => bare_config(&ctx)?,
            };
            let family: InstanceFamily = match &instances {
                Some(p) => parse_json(p)?,
                None => cfg.training.family.clone(),
            };
            let mut ppo = cfg.training.ppo.clone();
            if let Some(n) = iters {
                ppo.iterations = n;
            }
            if let Some(s) = ctx.global.seed {
                ppo.seed = s;
            }
            let mut model = PolicyModel::new(cfg.training.model.clone())?;
            let trace = ppo_train_on(&mut model, &family, &ppo, |i, t| {
                if i % 10 == 0 || i + 1 == ppo.iterations {
                    eprintln!("iteration {i:>4}  mean reward {:.4}", t.mean_reward[i]);
                }
            })?;
            model.meta.gamma = Some(family.gamma);
            model.meta.seed = Some(ppo.seed);
            model.meta.iterations = trace.mean_reward.len();
            model.meta.family = Some(family);
            let path = model_out.unwrap_or_else(|| ctx.out_dir(Some(&cfg)).join("policy.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
            }
            save_checkpoint(&model, &path)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Report(ReportCommand::Compare { source, plans, exact }) => {
            let inst = ctx.instance(&source)?;
            let docs = plans.iter().map(|p| parse_json::<PlanDocument>(p)).collect::<Result<Vec<_>>>()?;
            let built = docs.iter().map(|d| d.to_plan(&inst)).collect::<std::result::Result<Vec<_>, _>>()?;
            let named: Vec<SolverPlan> = docs
                .iter()
                .zip(&built)
                .map(|(d, p)| SolverPlan {
                    solver: &d.solver,
                    plan: p,
                    seconds: None,
                })
                .collect();
            let report: ComparisonReport = emit_comparison(source.id.unwrap_or(0), &inst, &named, Some(&exact))?;
            print!("{}", report.to_text(false));
            if let Some(dir) = &ctx.global.out {
                write(&dir.join("comparison.csv"), &report.to_csv(false))?;
            }
        }
        Command::Report(ReportCommand::Resilience { series, title }) => {
            let mut named = Vec::new();
            for s in &series {
                let (name, path) = s
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--series expects name=path, got `{s}`")))?;
                named.push((name.to_string(), read_resilience(Path::new(path))?));
            }
            let dir = ctx.out_dir(None);
            write(&dir.join("resilience.csv"), &resilience_csv(&named)?)?;
            write(&dir.join("resilience.svg"), &resilience_svg(&named, &title)?)?;
        }
        Command::Pipeline { verify: Some(dir), .. } => {
            let check = verify_manifest(&dir)?;
            if !check.is_ok() {
                return Err(Error::Config(format!(
                    "manifest mismatch in {}: missing {:?}, changed {:?}, unlisted {:?}",
                    dir.display(),
                    check.missing,
                    check.changed,
                    check.unlisted
                )));
            }
            println!("{}: all files match the manifest", dir.display());
        }
        Command::Pipeline { verify: None, overrides } => {
            let mut cfg = ctx.config()?;
            overrides.apply(&mut cfg)?;
            let summary = run_pipeline(&cfg)?;
            print!("{}", summary.comparison.to_text(true));
            println!("{} files in {}", summary.manifest.files.len(), summary.dir.display());
        }
    }
    Ok(())
}

/// Defaults for commands that can run without a config file.
fn bare_config(ctx: &Ctx) -> Result<RunConfig> {
    let text = r#"{"network": "", "event": {"epicenter": [0, 0], "focal_depth": 10, "magnitude": 7}}"#;
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::json("default config", e))?;
    if let Some(s) = ctx.global.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Resilience column of a timeline CSV.
fn read_resilience(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let col = r
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .iter()
        .position(|h| h == "resilience")
        .ok_or_else(|| Error::Config(format!("{}: no `resilience` column", path.display())))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            rec.get(col)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad resilience value", path.display())))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
