use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{self, hs_norm, identity, pauli_x, pauli_y, random_hermitian};
use crate::liouville::{build_projectors, verify_projector_algebra_seeded, BohrDecomposition};
use crate::mixing::{
    autocorrelation_report, bath_autocorrelation, bath_spectrum_report, free_factorization_check,
    relaxation_check,
};
use crate::model::{
    build_correlated_state, build_random_model, build_spin_bath, center_interaction,
    friedrichs_local_mode, random_recipe, SpinBathParams,
};
use crate::nz::{
    correlation_series, interaction_picture_exact, memory_kernel, r_operator, solve_nz,
    vanhove_generator, NzOptions, MAX_EXPM_DIM,
};

use super::config::{ModelConfig, StudyConfig};
use super::study::{couple, exact_states};
use super::{factorization_decay, scaling_study, secular_demo, study_csv, write_study_outputs};

const EXIT_PASS: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "vanhove", version, about = "Projection-operator master equations with correlated initial states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Study configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Resolvent damping.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Step in unscaled time.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Built-in model used when no config is given.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelName>,
    /// Single coupling, replacing the config's list.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Friedrichs: number of bath modes.
    #[arg(long, global = true)]
    n_modes: Option<usize>,
    /// Friedrichs: flat coupling strength.
    #[arg(long, global = true)]
    coupling: Option<f64>,
    /// Friedrichs: relative frequency jitter.
    #[arg(long, global = true)]
    jitter: Option<f64>,
    /// Spin bath: number of bath spins.
    #[arg(long, global = true)]
    n_spins: Option<usize>,
    /// Spin bath: inverse temperature of the reference state.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Random model: system dimension.
    #[arg(long, global = true)]
    dim_s: Option<usize>,
    /// Random model: bath dimension.
    #[arg(long, global = true)]
    dim_b: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Projector algebra and NZ exactness on built-in small models.
    Check,
    /// Exact trajectory dump.
    Simulate,
    /// Correlation term, key operators and memory kernels.
    Kernel,
    /// Weak-coupling generator export.
    Generator,
    /// Bath autocorrelation, relaxation and factorization diagnostics.
    Mixing,
    /// Scaling study across couplings (needs --config).
    Study,
    /// Secular growth under a wrong reference state (needs --config).
    Secular,
    /// Factorization table (needs --config).
    Factorize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum ModelName {
    Friedrichs,
    SpinBath,
    Random,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code:
/// 0 on pass, 1 on a failed criterion, 2 on usage or validation errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match dispatch(&cli) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            let mut cmd = <Cli as clap::CommandFactory>::command();
            let _ = cmd.print_help();
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<bool, Failure> {
    match cli.command {
        Command::Check => check(cli),
        Command::Simulate => simulate(cli),
        Command::Kernel => kernel(cli),
        Command::Generator => generator(cli),
        Command::Mixing => mixing(cli),
        Command::Study => study(cli),
        Command::Secular => secular(cli),
        Command::Factorize => factorize(cli),
    }
}

fn config(cli: &Cli, required: bool) -> std::result::Result<StudyConfig, Failure> {
    let mut cfg = match (&cli.config, required) {
        (Some(path), _) => StudyConfig::load(path)?,
        (None, true) => {
            return Err(Failure::Usage(format!(
                "`{}` needs --config PATH",
                format!("{:?}", cli.command).to_lowercase()
            )))
        }
        (None, false) => default_config(cli.model.unwrap_or(ModelName::Friedrichs)),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(eta) = cli.eta {
        cfg.eta = eta;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(l) = cli.lambda {
        cfg.lambdas = vec![l];
    }
    match &mut cfg.model {
        ModelConfig::Friedrichs(p) => {
            if let Some(n) = cli.n_modes {
                p.n_modes = n;
            }
            if let Some(g) = cli.coupling {
                p.profile = crate::model::CouplingProfile::Flat { g };
            }
            if let Some(j) = cli.jitter {
                p.jitter = j;
                p.seed = cfg.seed;
            }
        }
        ModelConfig::SpinBath(p) => {
            if let Some(n) = cli.n_spins {
                p.n_spins = n;
                p.couplings = (0..n).map(|k| 0.3 / (k + 1) as f64).collect();
            }
            if let Some(b) = cli.beta {
                p.beta = b;
            }
        }
        ModelConfig::Random { dim_s, dim_b } => {
            if let Some(n) = cli.dim_s {
                *dim_s = n;
            }
            if let Some(n) = cli.dim_b {
                *dim_b = n;
            }
        }
        ModelConfig::Explicit { .. } => {}
    }
    if cli.output.is_some() {
        cfg.output = cli.output.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_config(name: ModelName) -> StudyConfig {
    match name {
        ModelName::Friedrichs => StudyConfig::friedrichs_demo(),
        ModelName::SpinBath => StudyConfig::spin_bath_demo(),
        ModelName::Random => StudyConfig {
            model: ModelConfig::Random { dim_s: 2, dim_b: 3 },
            recipe: super::RecipeConfig::Random,
            lambdas: vec![0.3],
            tau_grid: (0..=10).map(|k| 0.09 * k as f64).collect(),
            eta: 0.1,
            dt: 0.01,
            ..StudyConfig::friedrichs_demo()
        },
    }
}

/// Writes `name` into the output directory, or prints it when there is none.
fn emit(output: Option<&PathBuf>, name: &str, body: &str) -> Result<()> {
    match output {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            eprintln!("wrote {}", path.display());
        }
        None => write_stdout(body)?,
    }
    Ok(())
}

/// Prints `body`; a closed pipe on the reading side is not an error.
fn write_stdout(body: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{body}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit_json(output: Option<&PathBuf>, name: &str, value: &impl Serialize) -> Result<()> {
    emit(output, name, &serde_json::to_string_pretty(value)?)
}

fn verdict(name: &str, passed: bool, detail: &str) {
    eprintln!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
}

fn check(cli: &Cli) -> std::result::Result<bool, Failure> {
    let seed = cli.seed.unwrap_or(0);
    let spin = center_interaction(&build_spin_bath(&SpinBathParams::default_demo())?)?;
    let pair = build_projectors(&spin)?;
    let algebra = verify_projector_algebra_seeded(&pair, &spin, 20, seed);

    let lambda = 0.3;
    let small = center_interaction(&build_random_model(2, 3, lambda, seed)?)?;
    let pair_s = build_projectors(&small)?;
    let bohr = BohrDecomposition::from_spec(&small)?;
    let rho0 = build_correlated_state(&small, &random_recipe(&small, seed.wrapping_add(1)))?.rho;
    let taus: Vec<f64> = (0..=20).map(|k| lambda * lambda * 0.5 * k as f64).collect();
    let nz = solve_nz(&pair_s, &small, &bohr, &rho0, &taus, lambda, 0.01, NzOptions::default())?;
    let exact = interaction_picture_exact(&pair_s, &small, &bohr, &rho0, &taus, lambda)?;
    let mut nz_err = 0.0_f64;
    for (a, b) in nz.states.iter().zip(&exact.states) {
        nz_err = nz_err.max(linalg::trace_distance(a, b)?);
    }
    let nz_ok = nz_err <= 1e-5;
    verdict("projector_algebra", algebra.passed, &format!("max residual {:.3e}", algebra.max_residual));
    verdict("nz_exactness", nz_ok, &format!("max trace distance {nz_err:.3e}"));
    let passed = algebra.passed && nz_ok;
    emit_json(
        cli.output.as_ref(),
        "check.json",
        &json!({
            "projector_algebra": algebra,
            "nz_exactness": { "max_trace_distance": nz_err, "tolerance": 1e-5, "passed": nz_ok },
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

fn simulate(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, false)?;
    let setup = cfg.setup()?;
    let lambda = cfg.lambdas[0];
    let c = couple(&setup.spec, lambda)?;
    let states = exact_states(&c, &setup.rho0, &cfg.tau_grid, lambda)?;
    let n = c.spec.dim_s;
    let mut csv = String::from("tau,t");
    for k in 0..n {
        let _ = write!(csv, ",p{k}");
    }
    csv.push_str(",q_norm\n");
    let mut reduced = Vec::with_capacity(states.len());
    for (tau, s) in cfg.tau_grid.iter().zip(&states) {
        let r = c.pair.reduce(s);
        let _ = write!(csv, "{tau:.16e},{:.16e}", tau / (lambda * lambda));
        for k in 0..n {
            let _ = write!(csv, ",{:.16e}", r[(k, k)].re);
        }
        let _ = writeln!(csv, ",{:.16e}", hs_norm(&c.pair.q(s)));
        reduced.push(crate::codec::matrix_to_json(&r));
    }
    emit(cli.output.as_ref(), "trajectory.csv", &csv)?;
    if cli.output.is_some() {
        emit_json(
            cli.output.as_ref(),
            "trajectory.json",
            &json!({ "lambda": lambda, "taus": cfg.tau_grid, "reduced_states": reduced }),
        )?;
    }
    Ok(true)
}

fn kernel(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, false)?;
    let setup = cfg.setup()?;
    let lambda = cfg.lambdas[0];
    let c = couple(&setup.spec, lambda)?;
    let corr = correlation_series(&c.pair, &c.spec, &c.bohr, &setup.rho0, &cfg.tau_grid, lambda, cfg.dt)?;
    let i_norm: Vec<f64> = corr.iter().map(hs_norm).collect();
    let mut body = json!({
        "lambda": lambda,
        "taus": cfg.tau_grid,
        "omegas": c.bohr.omegas(),
        "i_norm": i_norm,
        "correlation_term": corr.iter().map(crate::codec::matrix_to_json).collect::<Vec<_>>(),
    });
    if c.spec.dim() <= MAX_EXPM_DIM {
        let tau = *cfg.tau_grid.last().unwrap_or(&0.0);
        let nb = c.bohr.len();
        let mut r_norms = Vec::with_capacity(nb);
        let mut k_norms = vec![vec![0.0; nb]; nb];
        for m in 0..nb {
            r_norms.push(r_operator(&c.pair, &c.spec, &c.bohr, m, tau, lambda)?.hs_operator_norm());
            for (nn, slot) in k_norms[m].iter_mut().enumerate() {
                *slot = memory_kernel(&c.pair, &c.spec, &c.bohr, m, nn, tau, lambda)?.hs_operator_norm();
            }
        }
        body["tau_dense"] = json!(tau);
        body["r_norms"] = json!(r_norms);
        body["memory_kernel_norms"] = json!(k_norms);
    }
    emit_json(cli.output.as_ref(), "kernel.json", &body)?;
    Ok(true)
}

fn generator(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, false)?;
    let setup = cfg.setup()?;
    let c = couple(&setup.spec, cfg.lambdas[0])?;
    let gen = vanhove_generator(&c.pair, &c.spec, &c.bohr, cfg.eta)?;
    let passed = gen.trace_defect() <= 1e-10 && gen.hermiticity_defect() <= 1e-10;
    verdict(
        "generator_invariants",
        passed,
        &format!("trace defect {:.3e}, hermiticity defect {:.3e}", gen.trace_defect(), gen.hermiticity_defect()),
    );
    emit(cli.output.as_ref(), "generator.json", &gen.to_json()?)?;
    Ok(passed)
}

fn mixing(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, false)?;
    let setup = cfg.setup()?;
    let spec = &setup.spec;
    let window = spec
        .window
        .ok_or_else(|| Error::Config("mixing diagnostics need a model with a bath window".into()))?;
    let end = window.usable();
    let times: Vec<f64> = (0..=200).map(|k| end * k as f64 / 200.0).collect();
    let (x, panel) = match &setup.friedrichs {
        Some(m) => {
            let n = m.frequencies.len();
            let (quad, occ) = friedrichs_local_mode(n, &m.couplings);
            let panel = vec![
                pauli_y().kronecker(&quad),
                identity(2).kronecker(&occ),
                linalg::ket_bra(2, 0, 0).kronecker(&occ),
            ];
            (quad, panel)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let x = random_hermitian(&mut rng, spec.dim_b);
            let a = if spec.dim_s == 2 { pauli_x() } else { random_hermitian(&mut rng, spec.dim_s) };
            (x.clone(), vec![a.kronecker(&x), identity(spec.dim_s).kronecker(&x)])
        }
    };
    let auto = autocorrelation_report(&times, &bath_autocorrelation(spec, &x, &x, &times)?);
    let relax = relaxation_check(spec, &setup.rho0, &panel, &times)?;
    let free = free_factorization_check(spec, &setup.rho0, &panel, &times)?;
    let spectrum = bath_spectrum_report(spec);
    verdict("autocorrelation", auto.passed, &format!("tail {:.3e} of initial {:.3e}", auto.tail_max, auto.initial));
    verdict("relaxation", relax.passed, "bath-only evolution");
    verdict("free_factorization", free.passed, "free evolution");
    if spectrum.flagged {
        eprintln!(
            "note: {} degenerate bath frequencies (max multiplicity {})",
            spectrum.degenerate_count, spectrum.max_multiplicity
        );
    }
    let passed = auto.passed && free.passed;
    emit_json(
        cli.output.as_ref(),
        "mixing.json",
        &json!({
            "autocorrelation": auto,
            "relaxation": relax,
            "free_factorization": free,
            "bath_spectrum": spectrum,
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

fn study(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, true)?;
    let result = scaling_study(&cfg)?;
    for c in &result.checks {
        verdict(&c.name, c.passed, &c.detail);
    }
    match &cfg.output {
        Some(dir) => {
            let (csv, json) = write_study_outputs(&result, dir)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        None => write_stdout(study_csv(&result.rows).trim_end())?,
    }
    Ok(result.passed)
}

fn secular(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, true)?;
    let report = secular_demo(&cfg)?;
    for c in &report.checks {
        verdict(&c.name, c.passed, &c.detail);
    }
    emit_json(cfg.output.as_ref(), "secular.json", &report)?;
    Ok(report.passed)
}

fn factorize(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = config(cli, true)?;
    let report = factorization_decay(&cfg)?;
    for c in &report.checks {
        verdict(&c.name, c.passed, &c.detail);
    }
    emit_json(cfg.output.as_ref(), "factorize.json", &report)?;
    Ok(report.passed)
}
