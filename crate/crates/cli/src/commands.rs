use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use eit_core::forward::{stability_probe, ForwardModel};
use eit_core::geometry::electrode_gap_stat;
use eit_core::inference::{bvm_diagnostics, coverage_experiment, rate_experiment, run_posterior, BvmReport, BvmThresholds};
use eit_core::rng::child_seed;
use eit_core::statmodel::{information_matrix, recentering, simulate, InformationMatrix};
use eit_core::{fem, ProblemSetup};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::io::{read_dataset, write_chain, write_dataset, write_json, write_matrix, write_sensitivity};
use crate::{configure_threads, Cli, Command, Solver};

/// Pairs in the probe bundled with `eit delta`.
const DELTA_PROBE_PAIRS: usize = 20;

struct Context {
    config: ExperimentConfig,
    setup: ProblemSetup,
    model: Box<dyn ForwardModel>,
    out_dir: PathBuf,
    check: bool,
}

impl Context {
    fn output(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out_dir.join(default))
    }
}

fn check(enabled: bool, ok: bool, message: impl FnOnce() -> String) -> Result<(), CliError> {
    if enabled && !ok {
        return Err(CliError::Check { message: message() });
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let config = ExperimentConfig::load(&cli.config)?;
    configure_threads(cli.jobs)?;
    let setup = ProblemSetup::build(&config.problem_spec())?;
    let model: Box<dyn ForwardModel> = match cli.solver {
        Solver::Fem => Box::new(setup.fem_forward()?),
        Solver::Condensed => Box::new(setup.condensed_forward()?),
    };
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| config.out_dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let ctx = Context { config, setup, model, out_dir, check: cli.check };

    let (name, details, outcome) = match &cli.command {
        Command::Forward { theta, out, sensitivity, stiffness, export_mesh } => {
            ("forward", forward(&ctx, theta, out, sensitivity, stiffness, *export_mesh))
        }
        Command::Simulate { n, seed, out } => ("simulate", simulate_cmd(&ctx, *n, *seed, out)),
        Command::Mcmc { data, iters, burnin, thin, seed, out } => {
            ("mcmc", mcmc(&ctx, data, *iters, *burnin, *thin, *seed, out))
        }
        Command::Bvm { seed, out } => ("bvm", bvm(&ctx, *seed, out)),
        Command::Coverage { seed, out } => ("coverage", coverage(&ctx, *seed, out)),
        Command::Rate { seed, out } => ("rate", rate(&ctx, *seed, out)),
        Command::Stability { pairs, seed, out } => ("stability", stability(&ctx, *pairs, *seed, out)),
        Command::Delta => ("delta", delta(&ctx)),
    }
    .split();

    let manifest = manifest(&ctx, cli, name, details, started);
    write_json(&ctx.out_dir.join("manifest.json"), &manifest)?;
    outcome
}

/// A subcommand's manifest fields and its check verdict. Artifacts are
/// written before the check, so a failed check still leaves a manifest.
type Outcome = Result<(Value, Result<(), CliError>), CliError>;

trait Split {
    fn split(self) -> (&'static str, Value, Result<(), CliError>);
}

impl Split for (&'static str, Outcome) {
    fn split(self) -> (&'static str, Value, Result<(), CliError>) {
        match self.1 {
            Ok((details, verdict)) => (self.0, details, verdict),
            Err(e) => (self.0, json!({"failed": e.to_string()}), Err(e)),
        }
    }
}

fn manifest(ctx: &Context, cli: &Cli, name: &str, details: Value, started: Instant) -> Value {
    let mesh = &ctx.setup.mesh;
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    json!({
        "subcommand": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": ctx.config.hash(),
        "config": ctx.config,
        "seed": ctx.config.seed,
        "solver": format!("{:?}", cli.solver).to_lowercase(),
        "jobs": rayon::current_num_threads(),
        "check": cli.check,
        "mesh": {
            "id": mesh.id(),
            "target_h": mesh.target_h(),
            "max_edge_length": mesh.max_edge_length(),
            "vertices": mesh.vertices.len(),
            "triangles": mesh.triangles.len(),
            "boundary_vertices": mesh.boundary.len(),
            "forward_model": ctx.model.mesh_id(),
        },
        "run": details,
        "finished_unix_s": unix,
        "wall_time_s": started.elapsed().as_secs_f64(),
    })
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn forward(
    ctx: &Context,
    theta: &Option<Vec<f64>>,
    out: &Option<PathBuf>,
    sensitivity: &Option<PathBuf>,
    stiffness: &Option<PathBuf>,
    export_mesh: bool,
) -> Outcome {
    let theta = theta.clone().unwrap_or_else(|| ctx.config.model.theta0.clone());
    ctx.model.space().check(&theta)?;
    let g_path = ctx.output(out, "g.csv");
    let mut files = vec![path_str(&g_path)];
    let g = if let Some(s_path) = sensitivity {
        let (g, s) = ctx.model.forward_with_sensitivity(&theta)?;
        write_sensitivity(s_path, &s)?;
        files.push(path_str(s_path));
        g
    } else {
        ctx.model.forward_matrix(&theta)?
    };
    write_matrix(&g_path, &g.g)?;
    if let Some(k_path) = stiffness {
        let k = fem::assemble(&theta, &ctx.setup.stiffness)?;
        let mut buf = Vec::new();
        k.write_coo(&mut buf).map_err(|e| CliError::io(k_path, e))?;
        std::fs::write(k_path, buf).map_err(|e| CliError::io(k_path, e))?;
        files.push(path_str(k_path));
    }
    if export_mesh {
        for (name, vertices) in [("vertices.csv", true), ("triangles.csv", false)] {
            let path = ctx.out_dir.join(name);
            let mut buf = Vec::new();
            let written = if vertices {
                ctx.setup.mesh.write_vertices_csv(&mut buf)
            } else {
                ctx.setup.mesh.write_triangles_csv(&mut buf)
            };
            written.and_then(|_| std::fs::write(&path, buf)).map_err(|e| CliError::io(&path, e))?;
            files.push(path_str(&path));
        }
    }
    let (spectral, frobenius) = g.norms();
    println!("wrote {}", files.join(", "));
    let null = theta.iter().all(|t| *t == 1.0);
    let verdict = check(ctx.check, (!null || g.max_abs() <= 1e-12) && g.max_asymmetry() <= 1e-10, || {
        format!("G at {theta:?}: max |G| {:e}, asymmetry {:e}", g.max_abs(), g.max_asymmetry())
    });
    Ok((
        json!({"theta": theta, "files": files, "spectral_norm": spectral, "frobenius_norm": frobenius,
               "max_asymmetry": g.max_asymmetry()}),
        verdict,
    ))
}

fn simulate_cmd(ctx: &Context, n: Option<usize>, seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let n = n.unwrap_or(ctx.config.experiment.n);
    if n == 0 {
        return Err(CliError::Config { message: "--n must be >= 1".into() });
    }
    let seed = seed.unwrap_or(ctx.config.seed);
    let data = simulate(ctx.model.as_ref(), &ctx.config.model.theta0, n, seed)?;
    let path = ctx.output(out, "z.csv");
    write_dataset(&path, &data)?;
    println!("wrote {} observations to {}", n, path.display());
    Ok((json!({"n": n, "seed": seed, "theta": ctx.config.model.theta0, "file": path_str(&path)}), Ok(())))
}

#[allow(clippy::too_many_arguments)]
fn mcmc(
    ctx: &Context,
    data: &Path,
    iters: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    out: &Option<PathBuf>,
) -> Outcome {
    let mut config = ctx.config.clone();
    config.mcmc.iters = iters.unwrap_or(config.mcmc.iters);
    config.mcmc.burnin = burnin.unwrap_or(config.mcmc.burnin);
    config.mcmc.thin = thin.unwrap_or(config.mcmc.thin);
    config.validate()?;
    let plan = config.sampler_plan()?;
    let seed = seed.unwrap_or(config.seed);
    let dataset = read_dataset(data)?;
    if dataset.electrodes != ctx.model.electrode_count() {
        return Err(CliError::Input {
            path: data.to_path_buf(),
            message: format!("{} response columns but the configuration has M = {}", dataset.electrodes, ctx.model.electrode_count()),
        });
    }
    let run = run_posterior(ctx.model.as_ref(), &dataset, &config.prior_spec()?, &plan, seed)?;
    let path = ctx.output(out, "chain.csv");
    write_chain(&path, &run.chain)?;
    for w in &run.chain.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "wrote {} samples to {} (acceptance {:.3}, min ESS {:.0})",
        run.chain.samples.len(),
        path.display(),
        run.chain.acceptance_rate,
        run.chain.min_ess()
    );
    let verdict = check(ctx.check, run.chain.warnings.is_empty(), || run.chain.warnings.join("; "));
    Ok((
        json!({"data": path_str(data), "n": dataset.len(), "seed": seed, "mcmc": config.mcmc, "file": path_str(&path),
               "init": run.init, "posterior_mean": run.mean, "acceptance_rate": run.chain.acceptance_rate,
               "ess": run.chain.ess, "warnings": run.chain.warnings}),
        verdict,
    ))
}

#[derive(Serialize)]
struct BvmOutput {
    n: usize,
    seed: u64,
    data_seed: u64,
    chain_seed: u64,
    theta0: Vec<f64>,
    mle: Vec<f64>,
    posterior_mean: Vec<f64>,
    /// Recentred estimator `theta0 + (N N_theta0)^{-1} sum score`.
    psi: Vec<f64>,
    information_theta0: InformationMatrix,
    centred_at_psi: BvmReport,
    centred_at_posterior_mean: BvmReport,
    thresholds: BvmThresholds,
    passes_at_psi: bool,
    passes_at_posterior_mean: bool,
    acceptance_rate: f64,
    ess: Vec<f64>,
    warnings: Vec<String>,
    mesh_id: String,
}

fn bvm(ctx: &Context, seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let c = &ctx.config;
    let seed = seed.unwrap_or(c.seed);
    let (data_seed, chain_seed) = (child_seed(seed, "data", 0), child_seed(seed, "mcmc", 0));
    let model = ctx.model.as_ref();
    let n = c.experiment.n;
    let data = simulate(model, &c.model.theta0, n, data_seed)?;
    let run = run_posterior(model, &data, &c.prior_spec()?, &c.sampler_plan()?, chain_seed)?;
    let info = information_matrix(model, &c.model.theta0)?;
    let psi = recentering(model, &c.model.theta0, &data)?;
    let at_psi = bvm_diagnostics(&run.chain, &psi, &info, n)?;
    let at_mean = bvm_diagnostics(&run.chain, &run.mean, &info, n)?;
    let thresholds = BvmThresholds::DESK;
    let report = BvmOutput {
        n,
        seed,
        data_seed,
        chain_seed,
        theta0: c.model.theta0.clone(),
        mle: run.init.clone(),
        posterior_mean: run.mean.clone(),
        psi,
        information_theta0: info,
        passes_at_psi: at_psi.passes(thresholds),
        passes_at_posterior_mean: at_mean.passes(thresholds),
        centred_at_psi: at_psi,
        centred_at_posterior_mean: at_mean,
        thresholds,
        acceptance_rate: run.chain.acceptance_rate,
        ess: run.chain.ess.clone(),
        warnings: run.chain.warnings.clone(),
        mesh_id: model.mesh_id().to_string(),
    };
    let path = ctx.output(out, "bvm.json");
    write_json(&path, &report)?;
    let chain_path = ctx.out_dir.join("bvm_chain.csv");
    write_chain(&chain_path, &run.chain)?;
    println!(
        "BvM at N = {n}: passes centred at Psi: {}, centred at posterior mean: {} ({})",
        report.passes_at_psi,
        report.passes_at_posterior_mean,
        path.display()
    );
    let verdict = check(ctx.check, report.passes_at_psi, || {
        format!(
            "whitened mean {:?}, covariance gap {:.3}, KS {:?}",
            report.centred_at_psi.whitened_mean,
            report.centred_at_psi.whitened_cov_spectral_gap,
            report.centred_at_psi.ks_stats
        )
    });
    Ok((json!({"n": n, "seed": seed, "data_seed": data_seed, "chain_seed": chain_seed,
               "files": [path_str(&path), path_str(&chain_path)], "passes_at_psi": report.passes_at_psi}), verdict))
}

fn coverage(ctx: &Context, seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let c = &ctx.config;
    let seed = seed.unwrap_or(c.seed);
    let e = &c.experiment;
    let report = coverage_experiment(
        ctx.model.as_ref(),
        &c.model.theta0,
        e.n,
        e.replicates,
        e.alpha,
        &c.prior_spec()?,
        &c.sampler_plan()?,
        seed,
    )?;
    let path = ctx.output(out, "coverage.json");
    write_json(&path, &json!({"seed": seed, "theta0": c.model.theta0, "mesh_id": ctx.model.mesh_id(), "report": report}))?;
    println!("coverage {:.3} at nominal {:.3} ({})", report.coverage_rate, 1.0 - e.alpha, path.display());
    let nominal = 1.0 - e.alpha;
    let verdict = check(ctx.check, (report.coverage_rate - nominal).abs() <= 0.06, || {
        format!("coverage {:.3} is more than 0.06 from {nominal:.3}", report.coverage_rate)
    });
    Ok((json!({"seed": seed, "file": path_str(&path), "coverage_rate": report.coverage_rate}), verdict))
}

fn rate(ctx: &Context, seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let c = &ctx.config;
    let seed = seed.unwrap_or(c.seed);
    let e = &c.experiment;
    let report = rate_experiment(
        ctx.model.as_ref(),
        &c.model.theta0,
        &e.n_grid,
        e.replicates,
        &c.prior_spec()?,
        &c.sampler_plan()?,
        seed,
    )?;
    let path = ctx.output(out, "rate.json");
    write_json(&path, &json!({"seed": seed, "theta0": c.model.theta0, "mesh_id": ctx.model.mesh_id(), "report": report}))?;
    println!("log-log RMSE slope {:.3} ({})", report.loglog_slope, path.display());
    let slope = report.loglog_slope;
    let verdict = check(ctx.check, (-0.65..=-0.35).contains(&slope), || format!("slope {slope:.3} outside [-0.65, -0.35]"));
    Ok((json!({"seed": seed, "file": path_str(&path), "loglog_slope": slope}), verdict))
}

fn stability(ctx: &Context, pairs: usize, seed: Option<u64>, out: &Option<PathBuf>) -> Outcome {
    let seed = seed.unwrap_or(ctx.config.seed);
    let report = stability_probe(ctx.model.as_ref(), pairs, seed)?;
    let path = ctx.output(out, "stability.json");
    write_json(&path, &json!({"seed": seed, "pairs": pairs, "mesh_id": ctx.model.mesh_id(), "report": report}))?;
    println!(
        "max ratio {:.6}, min |dG|_F {:.3e}, {} injectivity flags ({})",
        report.max_ratio,
        report.min_g_gap,
        report.flags.len(),
        path.display()
    );
    let verdict = check(ctx.check, report.flags.is_empty(), || format!("{} injectivity flags", report.flags.len()));
    Ok((json!({"seed": seed, "pairs": pairs, "file": path_str(&path), "flags": report.flags.len()}), verdict))
}

fn delta(ctx: &Context) -> Outcome {
    let delta = electrode_gap_stat(&ctx.setup.electrodes);
    let report = stability_probe(ctx.model.as_ref(), DELTA_PROBE_PAIRS, child_seed(ctx.config.seed, "delta", 0))?;
    let flagged = !report.flags.is_empty();
    println!("{delta:.6}");
    println!("injectivity flag raised: {flagged} ({DELTA_PROBE_PAIRS} pairs, max ratio {:.6})", report.max_ratio);
    let verdict = check(ctx.check, !flagged, || format!("{} injectivity flags", report.flags.len()));
    Ok((json!({"delta": delta, "probe_pairs": DELTA_PROBE_PAIRS, "flags": report.flags.len(), "max_ratio": report.max_ratio}), verdict))
}
