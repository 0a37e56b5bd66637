use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cvbench_core::bench::{self, OutputFormat, RunConfig, RunManifest};
use cvbench_core::fock::{mean_photon, parity_expectation};
use cvbench_core::matching::{solve_family, Family, MATCH_CSV_HEADER};
use cvbench_core::response::{axis_radii, polar_contour};
use cvbench_core::wigner::{integrated_negativity, wigner_field};
use cvbench_core::{Error, StateSpec};

const EXIT_GENERIC: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_TAIL_GUARD: u8 = 4;
const EXIT_WINDOW: u8 = 5;
const EXIT_VERIFY: u8 = 6;

/// Matched-energy benchmarking of non-Gaussian optical states.
///
/// Exit codes: 0 success, 1 generic failure, 2 parse error, 3 infeasible
/// target, 4 truncation guard, 5 Wigner window warning, 6 verification failure.
#[derive(Parser, Debug)]
#[command(name = "cvbench", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags override values from `--config`, which override the built-in defaults.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON config file (a RunConfig object or a previous run.json)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fock-space cutoff [default: 80]
    #[arg(long, global = true)]
    cutoff: Option<usize>,
    /// Wigner grid points per axis, odd [default: 201]
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Wigner window half-width in x and p [default: 7]
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Displacement-fidelity threshold [default: 0.90]
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Comma-separated matched mean photon numbers [default: 0.5,1,1.5,2,2.5,3,3.5,4]
    #[arg(long, global = true, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    /// Comma-separated families [default: one_photon_subtracted,two_photon_subtracted,even_cat,odd_cat,fock]
    #[arg(long, global = true, value_delimiter = ',')]
    families: Option<Vec<Family>>,
    /// Number of polar directions [default: 72]
    #[arg(long, global = true)]
    angles: Option<usize>,
    /// Largest displacement amplitude of each scan [default: 2.0]
    #[arg(long, global = true)]
    eps_max: Option<f64>,
    /// Samples per displacement scan [default: 201]
    #[arg(long, global = true)]
    eps_steps: Option<usize>,
    /// Tolerance factor for the tolerance sector [default: 0.9]
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Reference family for polar sectors [default: fock]
    #[arg(long, global = true)]
    reference: Option<Family>,
    /// Output directory for experiment tables [default: cvbench-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format, csv or json [default: csv]
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Skip per-panel Wigner field exports in `landscape`
    #[arg(long, global = true)]
    no_fields: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a state and print its amplitudes
    State {
        /// State specification, e.g. subtracted_squeezed{r_db=6,theta=0,k=2,cutoff=80}
        spec: String,
    },
    /// Scalar and directional metrics of one state
    Metrics {
        /// State specification, e.g. odd_cat{alpha=1.6}
        spec: String,
    },
    /// Solve one family for a target mean photon number
    Match {
        /// Family to solve: one_photon_subtracted, two_photon_subtracted, even_cat, odd_cat or fock
        #[arg(long)]
        family: Family,
        /// Matched mean photon number
        #[arg(long)]
        target_n: f64,
    },
    /// Wigner snapshot of the six reference states
    Landscape,
    /// Negativity and its energy-normalized form at matched energies
    SweepScalar,
    /// Axis radii and anisotropy at matched energies
    SweepRadii,
    /// Polar contours and angular sectors at one matched energy
    Polar {
        /// Matched mean photon number [default: 3]
        #[arg(long)]
        target_n: Option<f64>,
    },
    /// Internal consistency checks
    Verify,
    /// Cutoff, grid and window convergence probes
    Converge,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::State { .. } => "state",
            Command::Metrics { .. } => "metrics",
            Command::Match { .. } => "match",
            Command::Landscape => "landscape",
            Command::SweepScalar => "sweep-scalar",
            Command::SweepRadii => "sweep-radii",
            Command::Polar { .. } => "polar",
            Command::Verify => "verify",
            Command::Converge => "converge",
        }
    }
}

fn effective_config(o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = o.$field.clone() { cfg.$field = v; })*
        };
    }
    apply!(
        cutoff,
        grid_points,
        window,
        threshold,
        targets,
        families,
        angles,
        eps_max,
        eps_steps,
        eta,
        reference,
        out,
        format
    );
    if o.no_fields {
        cfg.export_fields = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let (code, kind) = match err.downcast_ref::<Error>() {
            Some(Error::Parse(_)) | Some(Error::Json(_)) => (EXIT_PARSE, "parse"),
            Some(Error::Infeasible(_)) => (EXIT_INFEASIBLE, "infeasible"),
            Some(Error::TailGuard { .. }) => (EXIT_TAIL_GUARD, "tail_guard"),
            Some(Error::InvalidParameter(_)) => (EXIT_PARSE, "invalid_parameter"),
            _ => (EXIT_GENERIC, "error"),
        };
        Failure {
            code,
            kind,
            message: format!("{err:#}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::from(err).into()
    }
}

fn emit_error(f: &Failure) {
    eprintln!(
        "{}",
        json!({ "error": f.kind, "message": f.message, "exit_code": f.code })
    );
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run_state(spec: &str) -> Result<u8, Failure> {
    let spec: StateSpec = spec.parse()?;
    let state = spec.build()?;
    let amps: Vec<[f64; 2]> = state.amplitudes().iter().map(|c| [c.re, c.im]).collect();
    print_json(&json!({
        "spec": spec.to_string(),
        "cutoff": state.cutoff(),
        "mean_photon": mean_photon(&state),
        "parity": parity_expectation(&state),
        "tail_mass": state.tail_mass(),
        "amplitudes": amps,
    }));
    Ok(0)
}

fn run_metrics(spec: &str, cfg: &RunConfig) -> Result<u8, Failure> {
    let spec: StateSpec = spec.parse()?;
    let state = spec.build()?;
    let field = wigner_field(&state, &cfg.grid()?)?;
    let neg = integrated_negativity(&field);
    let n = mean_photon(&state);
    let scan = cfg.scan();
    let (rx, rp) = axis_radii(&state, cfg.threshold, &scan)?;
    let contour = polar_contour(&state, cfg.angles, cfg.threshold, &scan)?;
    print_json(&json!({
        "spec": spec.to_string(),
        "mean_photon": n,
        "parity": parity_expectation(&state),
        "w_origin": field.value_at_origin(),
        "delta": neg.delta,
        "delta_per_n": (n > 0.0).then(|| neg.delta / n),
        "normalization": neg.normalization,
        "window_limited": neg.window_limited,
        "r_x": rx,
        "r_p": rp,
        "anisotropy": contour.anisotropy(),
        "grid_points": cfg.grid_points,
        "window": cfg.window,
        "threshold": cfg.threshold,
        "eps_max": cfg.eps_max,
        "eps_steps": cfg.eps_steps,
        "angles": cfg.angles,
    }));
    if neg.window_limited {
        emit_error(&Failure {
            code: EXIT_WINDOW,
            kind: "window_limited",
            message: format!(
                "grid integral of W is {:.6}, outside the accepted band",
                neg.normalization
            ),
        });
        return Ok(EXIT_WINDOW);
    }
    Ok(0)
}

fn run_match(family: Family, target_n: f64, format: OutputFormat) -> Result<u8, Failure> {
    let sol = solve_family(family, target_n)?;
    match format {
        OutputFormat::Json => print_json(&serde_json::to_value(&sol).map_err(Error::from)?),
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(std::io::stdout());
            wtr.write_record(MATCH_CSV_HEADER).map_err(Error::from)?;
            wtr.write_record(sol.csv_record()).map_err(Error::from)?;
            wtr.flush().map_err(Error::from)?;
        }
    }
    if sol.feasible {
        Ok(0)
    } else {
        emit_error(&Failure {
            code: EXIT_INFEASIBLE,
            kind: "infeasible",
            message: sol.reason.clone().unwrap_or_default(),
        });
        Ok(EXIT_INFEASIBLE)
    }
}

fn finish(command: &str, cfg: &RunConfig, outputs: Vec<String>) -> Result<(), Failure> {
    let manifest = RunManifest::new(command, cfg, outputs);
    let path = manifest.write(&cfg.out)?;
    print_json(&json!({ "out": cfg.out, "manifest": path, "outputs": manifest.outputs }));
    Ok(())
}

fn run_experiment(command: &Command, cfg: &mut RunConfig) -> Result<u8, Failure> {
    let dir: &Path = &cfg.out.clone();
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let mut code = 0;
    let outputs = match command {
        Command::Landscape => {
            let panels = bench::landscape_snapshot(cfg, bench::LANDSCAPE_R_DB, 0.0, bench::LANDSCAPE_CAT_ALPHA)?;
            bench::write_landscape(dir, cfg.format, &panels, cfg.export_fields)?
        }
        Command::SweepScalar => {
            let recs = bench::scalar_sweep(cfg)?;
            vec![bench::write_records(dir, "scalar_sweep", cfg.format, &recs)?]
        }
        Command::SweepRadii => {
            let recs = bench::radii_sweep(cfg)?;
            vec![bench::write_records(dir, "radii_sweep", cfg.format, &recs)?]
        }
        Command::Polar { target_n } => {
            if let Some(t) = target_n {
                cfg.polar_target = *t;
            }
            let report = bench::polar_report(cfg)?;
            bench::write_polar(dir, cfg.format, &report)?
        }
        Command::Verify => {
            let checks = bench::consistency_suite(cfg)?;
            for c in &checks {
                eprintln!(
                    "{} {}: measured {:.3e}, tolerance {:.1e}, margin {:.3e} ({})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.margin,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                code = EXIT_VERIFY;
            }
            vec![bench::write_checks(dir, cfg.format, &checks)?]
        }
        Command::Converge => {
            let probes = bench::convergence_probes(cfg)?;
            vec![bench::write_probes(dir, cfg.format, &probes)?]
        }
        _ => unreachable!("not an experiment"),
    };
    finish(command.name(), cfg, outputs)?;
    Ok(code)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("CVBENCH_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parse(format!("CVBENCH_THREADS={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!(e))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let mut cfg = effective_config(&cli.overrides)?;
    match &cli.command {
        Command::State { spec } => run_state(spec),
        Command::Metrics { spec } => run_metrics(spec, &cfg),
        Command::Match { family, target_n } => run_match(*family, *target_n, cfg.format),
        other => run_experiment(other, &mut cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error(&Failure {
                code: EXIT_PARSE,
                kind: "parse",
                message: e.to_string().trim().to_string(),
            });
            return ExitCode::from(EXIT_PARSE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            emit_error(&f);
            ExitCode::from(f.code)
        }
    }
}
