//! Command-line front end: manifest loading, subcommands and output writers.

pub mod csvio;
pub mod error;
pub mod manifest;
pub mod mtx;
pub mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use delaytrack::init::{normalize_t, refine_newton};
use delaytrack::linalg::LuSolver;
use delaytrack::oracle::{compare_trajectory, rand_ddae, spectrum_for, CompareOptions};
use delaytrack::track::{find_crossing, track_run, Method, Regime, Termination, TrackState, Trajectory};
use num_complex::Complex64;

use crate::error::{exit, CliError};
use crate::manifest::{load_manifest, Manifest};

#[derive(Debug, Parser)]
#[command(name = "delaytrack", version, about = "Eigenvalue tracking for parameterized delay differential-algebraic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the refined spectrum at one parameter value.
    Spectrum {
        manifest: PathBuf,
        /// Parameter value (defaults to the manifest's p_init).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track one eigenvalue over the parameter range and write the trajectory CSV.
    Track {
        manifest: PathBuf,
        #[command(flatten)]
        flags: TrackFlags,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a root-locus plot here and a damping plot next to it.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Track, then locate every crossing of the imaginary axis.
    Margin {
        manifest: PathBuf,
        #[command(flatten)]
        flags: TrackFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track, then compare against independently computed spectra.
    Validate {
        manifest: PathBuf,
        #[command(flatten)]
        flags: TrackFlags,
        #[arg(long, default_value_t = 11)]
        checkpoints: usize,
        #[arg(long, default_value_t = 1e-6)]
        pass_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random sparse model bundle (manifest and matrices).
    Gen {
        #[arg(long)]
        r: usize,
        /// Dynamic states (defaults to all).
        #[arg(long)]
        n_dyn: Option<usize>,
        #[arg(long, default_value_t = 0.01)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        mu: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args, Default, Clone)]
pub struct TrackFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub dp: Option<f64>,
    #[arg(long, value_parser = ["euler", "heun", "rk4"])]
    pub method: Option<String>,
    #[arg(long)]
    pub corrector_every: Option<usize>,
    /// Corrector tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_init: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_fin: Option<f64>,
    /// Delay (0-based) whose magnitude is the parameter.
    #[arg(long)]
    pub delay_index: Option<usize>,
    /// Start from the eigenvalue nearest this seed, given as RE,IM.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
    pub init_from: Option<Complex64>,
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got '{s}'"))?;
    let re: f64 = re.trim().parse().map_err(|_| format!("bad real part '{re}'"))?;
    let im: f64 = im.trim().parse().map_err(|_| format!("bad imaginary part '{im}'"))?;
    Ok(Complex64::new(re, im))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Spectrum { manifest, p, out } => cmd_spectrum(&manifest, p, out.as_deref()),
        Command::Track { manifest, flags, out, svg } => cmd_track(&manifest, &flags, out.as_deref(), svg.as_deref()),
        Command::Margin { manifest, flags, out } => cmd_margin(&manifest, &flags, out.as_deref()),
        Command::Validate { manifest, flags, checkpoints, pass_tol, out } => {
            cmd_validate(&manifest, &flags, checkpoints, pass_tol, out.as_deref())
        }
        Command::Gen { r, n_dyn, density, mu, seed, out } => cmd_gen(r, n_dyn.unwrap_or(r), density, mu, seed, &out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            e.exit_code()
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Output { path: path.to_path_buf(), source: e }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Output { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}

/// Loads the manifest and applies command-line overrides.
pub fn configure(path: &Path, flags: &TrackFlags) -> Result<Manifest, CliError> {
    let mut m = load_manifest(path)?;
    if let Some(idx) = flags.delay_index {
        m = m.with_delay_index(idx)?;
    }
    let (lo, hi) = m.family.p_range();
    let p_init = flags.p_init.unwrap_or(m.p_init);
    let p_fin = flags.p_fin.unwrap_or(m.options.p_fin);
    for (name, v) in [("p-init", p_init), ("p-fin", p_fin)] {
        if !(lo..=hi).contains(&v) {
            return Err(CliError::Usage(format!("--{name} {v} outside the family range [{lo}, {hi}]")));
        }
    }
    if flags.p_init.is_some() || flags.p_fin.is_some() {
        if flags.dp.is_none() {
            m.options.dp = (p_fin - p_init) / 1000.0;
        }
        m.p_init = p_init;
        m.options.p_fin = p_fin;
    }
    if let Some(dp) = flags.dp {
        m.options.dp = dp;
    }
    if let Some(method) = &flags.method {
        m.options.method = method.parse::<Method>()?;
    }
    if let Some(k) = flags.corrector_every {
        m.options.corrector_every = k;
    }
    if let Some(tol) = flags.tol {
        if !(tol > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        m.options.corrector_tol = tol;
    }
    Ok(m)
}

/// Starting eigenpair: Newton from `seed` with an inverse-iteration vector,
/// or the rightmost refined eigenpair of the initializer.
pub fn initial_state(m: &Manifest, seed: Option<Complex64>) -> Result<TrackState, CliError> {
    let p = m.p_init;
    let model = m.family.evaluate(p)?;
    let ch = m.regime().characteristic(&model);
    let tol = m.options.corrector_tol;
    match seed {
        Some(s0) => {
            let r = model.dim();
            let mut x: Vec<Complex64> = (0..r).map(|i| Complex64::new(1.0, 0.1 * i as f64)).collect();
            let mut shift = s0;
            let lu = loop {
                match LuSolver::factor(&ch.eval(shift)?) {
                    Ok(lu) => break lu,
                    Err(delaytrack::Error::SingularMatrix(_)) if shift == s0 => shift += Complex64::new(1e-8, 1e-8),
                    Err(e) => return Err(e.into()),
                }
            };
            for _ in 0..3 {
                x = lu.solve_unchecked(&x);
                let n = delaytrack::sparse::norm2(&x);
                if !(n > 0.0 && n.is_finite()) {
                    return Err(delaytrack::Error::SingularMatrix("inverse iteration broke down".into()).into());
                }
                x.iter_mut().for_each(|v| *v /= n);
            }
            normalize_t(&mut x);
            let out = refine_newton(&ch, s0, &x, tol, 50)?;
            Ok(TrackState::new(p, out.s, &out.phi, out.residual))
        }
        None => {
            let sol = spectrum_for(&m.family, p, &m.options.init, m.regime(), tol)?;
            let best = sol
                .entries
                .first()
                .ok_or_else(|| delaytrack::Error::Eigensolver(format!("no eigenpair converged at p = {p}")))?;
            Ok(TrackState::new(p, best.s, &best.phi, best.residual))
        }
    }
}

fn run_tracking(path: &Path, flags: &TrackFlags) -> Result<(Manifest, Trajectory), CliError> {
    let m = configure(path, flags)?;
    let start = initial_state(&m, flags.init_from)?;
    let traj = track_run(&m.family, &start, &m.options)?;
    Ok((m, traj))
}

fn termination_code(traj: &Trajectory) -> u8 {
    match &traj.termination {
        Termination::Completed => exit::OK,
        Termination::Fold { p } => {
            eprintln!("trajectory truncated by a fold at p = {p}");
            exit::TRUNCATED
        }
        Termination::Aborted { p, reason } => {
            eprintln!("tracking aborted at p = {p}: {reason}");
            exit::NUMERICAL
        }
    }
}

pub fn cmd_spectrum(path: &Path, p: Option<f64>, out: Option<&Path>) -> Result<u8, CliError> {
    let m = load_manifest(path)?;
    let p = p.unwrap_or(m.p_init);
    let sol = spectrum_for(&m.family, p, &m.options.init, m.regime(), m.options.corrector_tol)?;
    emit(out, &csvio::format_spectrum(&sol))?;
    Ok(if sol.is_empty() { exit::NO_RESULT } else { exit::OK })
}

pub fn cmd_track(path: &Path, flags: &TrackFlags, out: Option<&Path>, svg: Option<&Path>) -> Result<u8, CliError> {
    let (_, traj) = run_tracking(path, flags)?;
    emit(out, &csvio::format_trajectory(&traj))?;
    if let Some(svg_path) = svg {
        let stem = svg_path.file_stem().and_then(|s| s.to_str()).unwrap_or("locus");
        let damping_path = svg_path.with_file_name(format!("{stem}_damping.svg"));
        for (p, body) in [(svg_path.to_path_buf(), svg::root_locus(&traj)), (damping_path, svg::damping(&traj))] {
            fs::write(&p, body).map_err(|e| CliError::Output { path: p.clone(), source: e })?;
        }
    }
    Ok(termination_code(&traj))
}

pub fn cmd_margin(path: &Path, flags: &TrackFlags, out: Option<&Path>) -> Result<u8, CliError> {
    let (m, traj) = run_tracking(path, flags)?;
    if !traj.is_complete() {
        termination_code(&traj);
    }
    let crossings = find_crossing(&m.family, &traj, &m.options)?;
    let text: String = crossings.iter().map(|c| format!("{},{}\n", c.p, c.s.im)).collect();
    emit(out, &text)?;
    Ok(if crossings.is_empty() { exit::NO_RESULT } else { exit::OK })
}

pub fn cmd_validate(
    path: &Path,
    flags: &TrackFlags,
    checkpoints: usize,
    pass_tol: f64,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    if checkpoints == 0 || !(pass_tol > 0.0) {
        return Err(CliError::Usage("--checkpoints must be positive and --pass-tol > 0".into()));
    }
    let (m, traj) = run_tracking(path, flags)?;
    if !traj.is_complete() {
        termination_code(&traj);
    }
    let opts = CompareOptions {
        pass_tol,
        tol: 1e-12,
        nodes: m.options.init.nodes,
        count: m.options.init.count,
    };
    let report = compare_trajectory(&traj, &m.family, checkpoints, &opts);
    emit(out, &csvio::format_report(&report))?;
    eprintln!("max_distance = {:e}, matched_fraction = {}", report.max_distance, report.matched_fraction);
    Ok(if report.matched_fraction == 1.0 { exit::OK } else { exit::NO_RESULT })
}

pub fn cmd_gen(r: usize, n_dyn: usize, density: f64, mu: usize, seed: u64, dir: &Path) -> Result<u8, CliError> {
    if r == 0 || n_dyn > r || !(density > 0.0 && density <= 1.0) {
        return Err(CliError::Usage("need r > 0, n-dyn <= r and 0 < density <= 1".into()));
    }
    let model = rand_ddae(r, n_dyn, density, mu, seed);
    let write = |name: &str, body: String| -> Result<(), CliError> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| CliError::Output { path: p, source: e })
    };
    fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.to_path_buf(), source: e })?;
    write("E.mtx", mtx::format_matrix_market(&model.e))?;
    write("A0.mtx", mtx::format_matrix_market(&model.a0))?;
    let regime = if mu == 1 { "single" } else { "multi" };
    let mut manifest = format!(
        "# random model: r = {r}, n_dyn = {n_dyn}, density = {density}, mu = {mu}, seed = {seed}\n\
         format_version = 1\n\n[model]\ndim = {r}\nn_dyn = {n_dyn}\nE = \"E.mtx\"\nA0 = \"A0.mtx\"\n"
    );
    for (j, d) in model.delays.iter().enumerate() {
        let name = format!("A{}.mtx", j + 1);
        write(&name, mtx::format_matrix_market(&d.matrix))?;
        manifest.push_str(&format!("\n[[model.delays]]\ntau = {}\nA = \"{name}\"\n", d.tau));
    }
    manifest.push_str(&format!(
        "\n[family]\nkind = \"affine\"\np_range = [0.0, 1.0]\n\n[regime]\nkind = \"{regime}\"\n\n\
         [tracking]\np_init = 0.0\np_fin = 1.0\n\n[init]\nnodes = 8\ncount = 6\n"
    ));
    write("manifest.toml", manifest)?;
    println!("{}", dir.join("manifest.toml").display());
    Ok(exit::OK)
}

/// Regime label for diagnostics.
pub fn regime_name(r: &Regime) -> &'static str {
    r.name()
}
