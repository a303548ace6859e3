use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracvisco::config::{parse_config, RunConfig};
use fracvisco::convergence::fem_self_convergence;
use fracvisco::diagnostics::{energy_ledger, long_time_limit};
use fracvisco::mlf::ml_e;
use fracvisco::output::{
    probe_file_name, resolve_output_dir, write_convergence, write_ledger, write_mesh,
    write_probe_trace, write_text, write_weights,
};
use fracvisco::scalar::{convergence_study, ScalarModel};
use fracvisco::stepper::run;
use fracvisco::{KernelParams, WeightMode};

#[derive(Parser)]
#[command(
    name = "fracvisco",
    version,
    about = "dG(0) solver for dynamic fractional-order viscoelasticity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write probe traces and the mesh.
    Simulate(RunArgs),
    /// Run a configuration and write every term of the discrete energy identity.
    EnergyCheck {
        #[command(flatten)]
        run: RunArgs,
        /// Largest accepted |LHS - RHS| / RHS.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Observed temporal convergence order, written as `k,error,order`.
    ConvergeTime(ConvergeArgs),
    /// Write the weight table of a configuration's time grid.
    WeightsDump(RunArgs),
    /// Print E_{alpha,b}(-x).
    MlEval {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        x: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file.
    config: PathBuf,
    /// Output directory; takes precedence over FRACVISCO_OUTPUT_DIR and the configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Finite element self-convergence for this configuration instead of the
    /// single-mode model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Decreasing step sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<f64>>,
    /// Step of the fine run (self-convergence only).
    #[arg(long, default_value_t = 1.0 / 64.0)]
    k_min: f64,
    /// Final time; defaults to 4 for the single-mode model and to the configured end otherwise.
    #[arg(long)]
    end: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    u0: f64,
    #[arg(long, default_value_t = 0.0)]
    v0: f64,
    /// closed_form or midpoint (single-mode model).
    #[arg(long, default_value = "closed_form")]
    weights: WeightMode,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

/// A failure reported on stderr as one JSON line.
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<fracvisco::Error> for Failure {
    fn from(e: fracvisco::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        kind: "io",
        message: format!("{}: {e}", path.display()),
    })?;
    let parsed = parse_config(&text).map_err(fracvisco::Error::from)?;
    Ok(parsed.config)
}

fn out_dir(flag: &Option<PathBuf>, configured: &str) -> PathBuf {
    flag.clone()
        .unwrap_or_else(|| resolve_output_dir(configured))
}

fn simulate(args: &RunArgs) -> CmdResult {
    let cfg = load(&args.config)?;
    let dir = out_dir(&args.output_dir, &cfg.output_dir);
    let mesh = cfg.build_mesh()?;
    let sys = cfg.system(&mesh)?;
    let grid = cfg.grid()?;
    let w = cfg.weights(&grid)?;
    let (u0, v0) = cfg.initial_state(&mesh)?;
    let h = run(&sys, &grid, &w, &u0, &v0, cfg.stepper_options(&mesh))?;
    for (i, p) in h.probes.iter().enumerate() {
        write_probe_trace(&dir.join(probe_file_name(i)), &grid, p)?;
    }
    write_mesh(&dir.join("mesh"), &mesh)?;
    write_text(&dir.join("config.cfg"), &cfg.to_text())?;
    println!(
        "steps {} dofs {} output {}",
        grid.len(),
        mesh.n_dofs(),
        dir.display()
    );
    for (i, (p, spec)) in h.probes.iter().zip(&cfg.probes).enumerate() {
        let last = p.u1.last().copied().unwrap_or_default();
        println!(
            "probe {i} at ({}, {}): final u1 = ({}, {})",
            p.point[0], p.point[1], last[0], last[1]
        );
        if !cfg.loads.is_zero() {
            let lim = long_time_limit(&h, &sys, cfg.kernel.gamma, i, spec.component, 0.05)?;
            println!(
                "probe {i} tail mean {} relaxed static {} gap {:.4} settled {}",
                lim.tail_mean, lim.static_value, lim.gap, lim.settled
            );
        }
    }
    Ok(())
}

fn energy_check(args: &RunArgs, tol: f64) -> CmdResult {
    let cfg = load(&args.config)?;
    let dir = out_dir(&args.output_dir, &cfg.output_dir);
    let mesh = cfg.build_mesh()?;
    let sys = cfg.system(&mesh)?;
    let grid = cfg.grid()?;
    let w = cfg.weights(&grid)?;
    let (u0, v0) = cfg.initial_state(&mesh)?;
    let h = run(&sys, &grid, &w, &u0, &v0, cfg.stepper_options(&mesh))?;
    let ledger = energy_ledger(&h, &sys, &w)?;
    write_ledger(&dir.join("energy_ledger.csv"), &ledger)?;
    println!("{ledger}");
    let residual = ledger.residual_rel();
    let ratio = ledger.min_dissipation_ratio();
    if residual.is_nan() || residual > tol {
        return Err(Failure {
            kind: "energy_identity",
            message: format!("relative residual {residual:e} exceeds {tol:e}"),
        });
    }
    if ratio < -1e-12 {
        return Err(Failure {
            kind: "energy_identity",
            message: format!("a dissipation term is negative: {ratio:e} of the right-hand side"),
        });
    }
    Ok(())
}

fn converge_time(args: &ConvergeArgs) -> CmdResult {
    let pow2 =
        |range: std::ops::RangeInclusive<i32>| range.map(|p| 2f64.powi(-p)).collect::<Vec<f64>>();
    if let Some(path) = &args.config {
        let cfg = load(path)?;
        let dir = out_dir(&args.output_dir, &cfg.output_dir);
        let steps = args.k_list.clone().unwrap_or_else(|| pow2(2..=5));
        let end = args.end.unwrap_or(cfg.time.end);
        let mesh = cfg.build_mesh()?;
        let sys = cfg.system(&mesh)?;
        let (u0, v0) = cfg.initial_state(&mesh)?;
        let mut opts = cfg.stepper_options(&mesh);
        opts.probes.clear();
        let study = fem_self_convergence(
            &sys,
            &cfg.kernel,
            end,
            &steps,
            args.k_min,
            cfg.solver.weights,
            &u0,
            &v0,
            &opts,
        )?;
        write_convergence(&dir.join("convergence.csv"), &study.table)?;
        print_table(&study.table);
        let fmt = |o: Option<f64>| o.map_or("NaN".to_string(), |v| format!("{v:.4}"));
        println!("least-squares slope {}", fmt(study.table.slope()));
        println!("slope against k - k_min {}", fmt(study.shifted_slope));
        let succ: Vec<String> = study.successive_orders.iter().map(|o| fmt(*o)).collect();
        println!("three-run orders {}", succ.join(" "));
    } else {
        let kernel = KernelParams::new(args.alpha, args.tau, args.gamma)?;
        let m = ScalarModel::new(args.rho, args.kappa, kernel, args.u0, args.v0)?;
        let steps = args.k_list.clone().unwrap_or_else(|| pow2(3..=7));
        let end = args.end.unwrap_or(4.0);
        let study = convergence_study(&m, end, &steps, args.weights)?;
        let dir = out_dir(&args.output_dir, "output");
        write_convergence(&dir.join("convergence.csv"), &study.table)?;
        print_table(&study.table);
        println!(
            "reference u(T) {} step {} estimated error {:.3e}",
            study.reference.value_at_end(),
            study.reference.step,
            study.reference.error_estimate
        );
    }
    Ok(())
}

fn print_table(t: &fracvisco::convergence::ConvergenceTable) {
    println!("k,error,order");
    for r in &t.rows {
        println!("{},{},{}", r.k, r.error, r.order.unwrap_or(f64::NAN));
    }
}

fn weights_dump(args: &RunArgs) -> CmdResult {
    let cfg = load(&args.config)?;
    let dir = out_dir(&args.output_dir, &cfg.output_dir);
    let grid = cfg.grid()?;
    let w = cfg.weights(&grid)?;
    let path = dir.join("weights.csv");
    write_weights(&path, &w)?;
    println!(
        "{} rows written to {}",
        grid.len() * (grid.len() + 1) / 2,
        path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, result) = match &cli.command {
        Command::Simulate(a) => ("simulate", simulate(a)),
        Command::EnergyCheck { run, tol } => ("energy-check", energy_check(run, *tol)),
        Command::ConvergeTime(a) => ("converge-time", converge_time(a)),
        Command::WeightsDump(a) => ("weights-dump", weights_dump(a)),
        Command::MlEval { alpha, b, x } => (
            "ml-eval",
            ml_e(*alpha, *b, *x)
                .map(|v| println!("{v}"))
                .map_err(Failure::from),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let line = serde_json::json!({
                "status": "error",
                "subcommand": name,
                "kind": f.kind,
                "message": f.message,
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
