//! `must-dp`: command-line front end for the amplification engine.
//!
//! Every subcommand writes one table, as CSV (with a leading `# schema=1`
//! line) or JSON. Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure.

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use must_dp::accountant::compose_many;
use must_dp::amplification::{aligned_profile, contour, eta};
use must_dp::harness::{run_experiment1, run_experiment2, Experiment1Config, Experiment2Config};
use must_dp::mechanisms::profile;
use must_dp::pld::PrivacyLossModel;
use must_dp::report::fmt_g;
use must_dp::sampling::mc_stats;
use must_dp::{Family, MechanismSpec, SamplingScheme};
use serde::Deserialize;

use output::{Cell, Format, Table};

#[derive(Parser, Debug)]
#[command(name = "must-dp", version, about = "Privacy amplification by multistage subsampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the table here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
    /// Master seed for randomized commands (overrides a config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Privacy profile δ(ε) of a base mechanism.
    Profile {
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long = "eps", alias = "eps-grid", allow_hyphen_values = true)]
        eps: Grid,
    },
    /// Amplified (ε′, δ′) and amplification class for one scheme.
    Amplify {
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long = "eps", alias = "eps-grid", allow_hyphen_values = true)]
        eps: Grid,
    },
    /// Aligned privacy profiles (ε′/ε, δ′ − δ) for several schemes.
    Aligned {
        /// Comma-separated scheme names; they share n, b, m and gamma.
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<String>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        b: Option<u64>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        families: Vec<Family>,
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        #[arg(long = "eps-grid", alias = "eps")]
        eps: Grid,
        /// Write one CSV per (scheme, family) here instead of one table.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// η, ε′/ε and δ′ − δ over a (b, m) grid for a two-stage scheme.
    Contour {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        n: u64,
        /// Inclusive range `lo:hi`.
        #[arg(long)]
        b_range: IntRange,
        #[arg(long)]
        m_range: IntRange,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// k-fold composition of a subsampled Gaussian with the Fourier accountant.
    Account {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Noise multiplier of the Gaussian mechanism (sensitivity 1).
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        k_list: Vec<u64>,
        #[arg(long = "eps-list", alias = "eps")]
        eps: Grid,
        /// Truncation bound L of the loss grid [−L, L].
        #[arg(long = "trunc-l", alias = "L", default_value_t = 10.0)]
        trunc_l: f64,
        /// Number of grid points (even).
        #[arg(long, default_value_t = 1 << 17)]
        r: usize,
        /// Compare against the direct tail integral (k = 1 only).
        #[arg(long)]
        verify: bool,
        /// Write the discretized PLD as CSV.
        #[arg(long)]
        dump_pld: Option<PathBuf>,
    },
    /// Monte-Carlo subsample statistics.
    SampleStats {
        #[command(flatten)]
        scheme: OptSchemeArgs,
        /// JSON list of schemes, e.g. `[{"scheme":"wor","n":300,"m":30}]`.
        #[arg(long, conflicts_with = "scheme")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
    },
    /// Run a utility experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's repeat count.
        #[arg(long)]
        repeats: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct MechArgs {
    #[arg(long)]
    family: Family,
    /// Sensitivity-to-scale ratio Δ/b (Laplace) or Δ/σ (Gaussian).
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
}

impl MechArgs {
    fn spec(&self) -> Result<MechanismSpec, Failure> {
        Ok(MechanismSpec::new(self.family, self.theta)?)
    }
}

#[derive(Args, Debug)]
struct SchemeArgs {
    /// poisson, wor, wr, mustwo, mustow or mustww.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    b: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
}

impl SchemeArgs {
    fn build(&self) -> Result<SamplingScheme, Failure> {
        Ok(SamplingScheme::from_parts(&self.scheme, self.n, self.b, self.m, self.gamma)?)
    }
}

#[derive(Args, Debug)]
struct OptSchemeArgs {
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, requires = "scheme")]
    n: Option<u64>,
    #[arg(long, requires = "scheme")]
    b: Option<u64>,
    #[arg(long, requires = "scheme")]
    m: Option<u64>,
    #[arg(long, requires = "scheme")]
    gamma: Option<f64>,
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        if let Some((a, rest)) = s.split_once(':') {
            let (b, c) = rest.split_once(':').ok_or("expected start:stop:count")?;
            let (a, b) = (num(a)?, num(b)?);
            let count: usize = c.trim().parse().map_err(|e| format!("`{c}`: {e}"))?;
            if count == 0 {
                return Err("count must be at least 1".into());
            }
            if count == 1 {
                return Ok(Grid(vec![a]));
            }
            let step = (b - a) / (count - 1) as f64;
            Ok(Grid((0..count).map(|i| if i + 1 == count { b } else { a + step * i as f64 }).collect()))
        } else {
            s.split(',').map(num).collect::<Result<_, _>>().map(Grid)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct IntRange(u64, u64);

impl FromStr for IntRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(format!("empty range {a}:{b}"));
        }
        Ok(IntRange(a, b))
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
enum ExperimentFile {
    Bootstrap(Experiment1Config),
    Dpsgd(Experiment2Config),
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<must_dp::Error> for Failure {
    fn from(e: must_dp::Error) -> Self {
        if e.is_validation() {
            Failure::usage(e.to_string())
        } else {
            Failure::numeric(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::usage(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::usage(format!("--threads: {e}")))?;
    }
    let seed = cli.seed;
    let mut deferred = None;
    let table = match cli.command {
        Command::Profile { mech, eps } => cmd_profile(&mech, &eps.0)?,
        Command::Amplify { scheme, mech, eps } => cmd_amplify(&scheme.build()?, &mech.spec()?, &eps.0)?,
        Command::Aligned { schemes, n, b, m, gamma, families, thetas, eps, out_dir } => {
            let schemes = schemes
                .iter()
                .map(|s| SamplingScheme::from_parts(s, n, b, m, gamma))
                .collect::<Result<Vec<_>, _>>()?;
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    for s in &schemes {
                        for &f in &families {
                            let t = cmd_aligned(std::slice::from_ref(s), &[f], &thetas, &eps.0)?;
                            let path = dir.join(format!("aligned_{}_{}.csv", s.name(), f.name()));
                            t.write(Format::Csv, BufWriter::new(File::create(&path)?))?;
                        }
                    }
                    return Ok(());
                }
                None => cmd_aligned(&schemes, &families, &thetas, &eps.0)?,
            }
        }
        Command::Contour { scheme, n, b_range, m_range, mech, eps } => {
            cmd_contour(&scheme, n, b_range, m_range, &mech.spec()?, eps)?
        }
        Command::Account { scheme, sigma, k_list, eps, trunc_l, r, verify, dump_pld } => {
            let (t, f) = cmd_account(&scheme.build()?, sigma, &k_list, &eps.0, trunc_l, r, verify, dump_pld.as_deref())?;
            deferred = f;
            t
        }
        Command::SampleStats { scheme, config, trials } => {
            let schemes = match (config, scheme.scheme) {
                (Some(path), _) => {
                    let text = read_config(&path)?;
                    serde_json::from_str::<Vec<SamplingScheme>>(&text)
                        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
                }
                (None, Some(name)) => vec![SamplingScheme::from_parts(&name, scheme.n, scheme.b, scheme.m, scheme.gamma)?],
                (None, None) => return Err(Failure::usage("give --scheme or --config")),
            };
            cmd_sample_stats(&schemes, trials, seed.unwrap_or(0))?
        }
        Command::Experiment { config, repeats } => {
            let text = read_config(&config)?;
            let file: ExperimentFile =
                serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", config.display())))?;
            cmd_experiment(file, repeats, seed)?
        }
    };
    match cli.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            table.write(cli.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            table.write(cli.format, stdout.lock())?;
        }
    }
    deferred.map_or(Ok(()), Err)
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn cmd_profile(mech: &MechArgs, eps: &[f64]) -> Result<Table, Failure> {
    let spec = mech.spec()?;
    let mut t = Table::new(&["epsilon", "delta"]);
    for &e in eps {
        t.push(vec![e.into(), profile(&spec, e)?.into()]);
    }
    Ok(t)
}

fn scheme_cells(s: &SamplingScheme) -> Vec<Cell> {
    vec![s.name().into(), s.n().into(), s.b().into(), s.m().into()]
}

fn cmd_amplify(scheme: &SamplingScheme, mech: &MechanismSpec, eps: &[f64]) -> Result<Table, Failure> {
    let eta_value = eta(scheme)?;
    let points = aligned_profile(scheme, mech, eps)?;
    let mut t = Table::new(&[
        "scheme", "n", "b", "m", "family", "theta", "epsilon", "eta", "eps_prime", "delta", "delta_prime",
        "pa_class", "on_boundary", "neighboring",
    ]);
    for p in points {
        let mut row = scheme_cells(scheme);
        row.extend([
            mech.family().name().into(),
            mech.theta().into(),
            p.epsilon.into(),
            eta_value.into(),
            p.eps_prime.into(),
            p.delta.into(),
            p.delta_prime.into(),
            p.pa_class.name().into(),
            p.on_boundary.into(),
            p.neighboring.code().into(),
        ]);
        t.push(row);
    }
    Ok(t)
}

fn cmd_aligned(schemes: &[SamplingScheme], families: &[Family], thetas: &[f64], eps: &[f64]) -> Result<Table, Failure> {
    let mut t = Table::new(&[
        "scheme", "n", "b", "m", "family", "theta", "epsilon", "eps_prime", "delta", "delta_prime", "eps_ratio",
        "delta_gap", "pa_class", "on_boundary", "neighboring",
    ]);
    for s in schemes {
        for &f in families {
            for &theta in thetas {
                let mech = MechanismSpec::new(f, theta)?;
                for p in aligned_profile(s, &mech, eps)? {
                    let mut row = scheme_cells(s);
                    row.extend([
                        f.name().into(),
                        theta.into(),
                        p.epsilon.into(),
                        p.eps_prime.into(),
                        p.delta.into(),
                        p.delta_prime.into(),
                        p.eps_ratio.into(),
                        p.delta_gap.into(),
                        p.pa_class.name().into(),
                        p.on_boundary.into(),
                        p.neighboring.code().into(),
                    ]);
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}

fn cmd_contour(
    name: &str,
    n: u64,
    b_range: IntRange,
    m_range: IntRange,
    mech: &MechanismSpec,
    eps: f64,
) -> Result<Table, Failure> {
    // Validate every cell before sweeping so errors name the offending pair.
    for b in b_range.0..=b_range.1 {
        for m in m_range.0..=m_range.1 {
            let s = SamplingScheme::from_parts(name, Some(n), Some(b), Some(m), None)?;
            if s.b().is_none() {
                return Err(Failure::usage(format!("--scheme: `{name}` is not a two-stage scheme")));
            }
        }
    }
    let make = |b, m| SamplingScheme::from_parts(name, Some(n), Some(b), Some(m), None).expect("validated above");
    let cells = contour(make, b_range.0..=b_range.1, m_range.0..=m_range.1, mech, eps)?;
    let mut t = Table::new(&["scheme", "n", "b", "m", "family", "theta", "epsilon", "eta", "eps_ratio", "delta_gap"]);
    for c in cells {
        t.push(vec![
            name.into(),
            n.into(),
            c.b.into(),
            c.m.into(),
            mech.family().name().into(),
            mech.theta().into(),
            eps.into(),
            c.eta.into(),
            c.eps_ratio.into(),
            c.delta_gap.into(),
        ]);
    }
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn cmd_account(
    scheme: &SamplingScheme,
    sigma: f64,
    k_list: &[u64],
    eps: &[f64],
    trunc_l: f64,
    r: usize,
    verify: bool,
    dump_pld: Option<&Path>,
) -> Result<(Table, Option<Failure>), Failure> {
    if verify && !k_list.contains(&1) {
        return Err(Failure::usage("--verify needs k = 1 in --k-list"));
    }
    let model = PrivacyLossModel::new(*scheme, sigma)?;
    let pld = model.discretize(trunc_l, r)?;
    if let Some(path) = dump_pld {
        let mut w = BufWriter::new(File::create(path)?);
        pld.write_csv(&mut w)?;
        w.flush()?;
    }
    let d = &pld.diagnostics;
    if d.nonfinite_count > 0 {
        eprintln!(
            "warning: {} non-finite density values (first at grid index {:?})",
            d.nonfinite_count, d.first_nonfinite
        );
    }
    let cells = compose_many(&pld, k_list, eps);
    let mut t = Table::new(&[
        "scheme", "n", "b", "m", "sigma", "k", "epsilon", "delta_lower", "delta_approx", "delta_upper", "grid_r",
        "trunc_L", "mass_defect", "nonfinite_flag",
    ]);
    let mut first_error = None;
    for (row_k, row) in k_list.iter().zip(cells) {
        for (e, cell) in eps.iter().zip(row) {
            match cell {
                Ok(res) => {
                    let mut cells = scheme_cells(scheme);
                    cells.extend([
                        sigma.into(),
                        res.k.into(),
                        res.epsilon.into(),
                        res.delta_lower.into(),
                        res.delta_approx.into(),
                        res.delta_upper.into(),
                        res.diagnostics.grid_r.into(),
                        res.diagnostics.trunc_l.into(),
                        res.diagnostics.mass_defect.into(),
                        res.diagnostics.nonfinite_flag.into(),
                    ]);
                    t.push(cells);
                    if verify && *row_k == 1 {
                        let oracle = model.tight_delta(*e)?;
                        let tol = match scheme {
                            SamplingScheme::Poisson { .. } | SamplingScheme::Wor { .. } => 1e-6,
                            _ => 1e-4,
                        };
                        let diff = (res.delta_approx - oracle).abs();
                        let ok = diff <= tol;
                        eprintln!(
                            "verify k=1 epsilon={}: accountant {} oracle {} |diff| {} tol {} {}",
                            fmt_g(*e),
                            fmt_g(res.delta_approx),
                            fmt_g(oracle),
                            fmt_g(diff),
                            fmt_g(tol),
                            if ok { "PASS" } else { "FAIL" }
                        );
                        if !ok && first_error.is_none() {
                            first_error = Some(Failure::numeric("verification against the tail integral failed"));
                        }
                    }
                }
                Err(err) => {
                    eprintln!("k={row_k} epsilon={}: {err}", fmt_g(*e));
                    if first_error.is_none() {
                        first_error = Some(err.into());
                    }
                }
            }
        }
    }
    // Successful cells are still written before the failure is reported.
    Ok((t, first_error))
}

fn cmd_sample_stats(schemes: &[SamplingScheme], trials: u64, seed: u64) -> Result<Table, Failure> {
    let mut t = Table::new(&[
        "scheme", "n", "b", "m", "trials", "unique_min", "unique_mean", "unique_max", "eta_hat", "eta",
    ]);
    for s in schemes {
        let st = mc_stats(s, trials, seed)?;
        let mut row = scheme_cells(s);
        row.extend([
            st.trials.into(),
            st.unique_min.into(),
            st.unique_mean.into(),
            st.unique_max.into(),
            st.eta_hat.into(),
            eta(s)?.into(),
        ]);
        t.push(row);
    }
    Ok(t)
}

fn cmd_experiment(file: ExperimentFile, repeats: Option<usize>, seed: Option<u64>) -> Result<Table, Failure> {
    match file {
        ExperimentFile::Bootstrap(mut cfg) => {
            cfg.repeats = repeats.unwrap_or(cfg.repeats);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let rows = run_experiment1(&cfg)?;
            let mut t = Table::new(&[
                "repeat", "scheme", "n", "b", "m", "sigma_mean", "sigma_var", "eps_base", "pp_mean", "pp_var",
            ]);
            for r in rows {
                let mut row: Vec<Cell> = vec![r.repeat.into()];
                row.extend(scheme_cells(&r.scheme));
                row.extend([
                    r.run.sigma_mean.into(),
                    r.run.sigma_var.into(),
                    r.run.eps_base.into(),
                    r.run.pp_mean.into(),
                    r.run.pp_var.into(),
                ]);
                t.push(row);
            }
            Ok(t)
        }
        ExperimentFile::Dpsgd(mut cfg) => {
            cfg.repeats = repeats.unwrap_or(cfg.repeats);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let rows = run_experiment2(&cfg)?;
            let mut t = Table::new(&[
                "repeat", "scheme", "n", "b", "m", "sigma", "delta_prime", "final_loss", "rmse", "beta_0", "beta_1",
                "beta_2",
            ]);
            for r in rows {
                let mut row: Vec<Cell> = vec![r.repeat.into()];
                row.extend(scheme_cells(&r.scheme));
                row.extend([r.sigma.into(), r.delta_prime.into(), r.final_loss.into(), r.rmse.into()]);
                row.extend((0..3).map(|i| r.beta_hat.get(i).copied().map_or(Cell::Missing, Cell::Num)));
                t.push(row);
            }
            Ok(t)
        }
    }
}
