//! `bb84` — command-line front end for the key-rate toolkit.
//!
//! Four subcommands: `rate` (one-point key-length report with a
//! per-term breakdown), `optimize` (analytic optimal ratios, optionally
//! cross-checked against the numeric oracle), `figure1` (the
//! rate-vs-blocklength curve family as CSV plus an optional gnuplot
//! script), and `simulate` (the seeded Monte-Carlo protocol ensemble).
//!
//! Conventions shared by every subcommand:
//! * human output uses 6 significant digits; CSV carries full `f64`
//!   precision (17 significant digits) so runs can be diffed byte-wise;
//! * every CSV starts with a `# schema: <name>/<version>` comment line;
//! * default output files land in `BB84_OUT_DIR` (falling back to the
//!   working directory); explicitly given paths are used verbatim;
//! * exit codes: 0 success, 2 invalid usage or parameters, 3 zero-rate
//!   regime (β ≤ h(p), no keys extractable), 4 I/O failure.

use bb84_keyrate::math::{Coefficients, MathError, Prob, SecurityLevel};
use bb84_keyrate::rate::{
    averaged_key_length, finite_key_length, max_key_length, numeric_optimize, optimal_ratios,
    rate_curve, KeyLengthReport, RateError, RateParams, Ratios, SiftedCounts,
};
use bb84_keyrate::sim::{
    format_summary, run_ensemble, write_trials_csv, ChannelModel, ProtocolConfig,
    ReconciliationStrategy, SimError,
};
use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bb84",
    version,
    about = "Second-order finite-length key rates for asymmetric-basis BB84"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute averaged and finite key lengths with a per-term breakdown
    Rate(RateArgs),
    /// Print the analytic optimal basis ratios and the maximum key length
    Optimize(OptimizeArgs),
    /// Write the rate-vs-blocklength curve family as CSV (+ plot script)
    Figure1(Figure1Args),
    /// Run a seeded Monte-Carlo ensemble of the full protocol
    Simulate(SimulateArgs),
}

/// Errors carrying the exit-code contract (0 ok, 2 usage, 3 zero-rate,
/// 4 I/O).
#[derive(Debug)]
enum CliError {
    Usage(String),
    ZeroRate(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::ZeroRate(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::ZeroRate(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<RateError> for CliError {
    fn from(e: RateError) -> Self {
        match e {
            RateError::ZeroRate(a) => CliError::ZeroRate(format!(
                "zero-rate regime: A = beta - h(p) = {a:.6e} is not positive, no keys extractable"
            )),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<MathError> for CliError {
    fn from(e: MathError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate(args) => cmd_rate(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Figure1(args) => cmd_figure1(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// 6-significant-digit human formatting: plain decimal in a readable
/// magnitude window, scientific outside it.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        format!("{x:.5e}")
    } else {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    }
}

/// Output directory for default-named files: `BB84_OUT_DIR` if set,
/// else the working directory. Explicit paths bypass this.
fn resolve_out(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os("BB84_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name)
    })
}

fn build_params(p1: f64, p2: f64, eps: f64, beta: f64, n: u64) -> Result<RateParams, CliError> {
    let p1 = Prob::new(p1)?;
    let p2 = Prob::new(p2)?;
    let eps = SecurityLevel::new(eps)?;
    Ok(RateParams::new(p1, p2, eps, beta, n)?)
}

/// A keyed side must have check bits in the conjugate basis: reject
/// geometries that can never estimate what they must bound. (The
/// library would reject them too, but only after expanding counts; at
/// the flag level the message can name the offending ratio.)
fn check_estimable(r: Ratios) -> Result<(), CliError> {
    let (r0, r1, r2) = (r.r0(), r.r1(), r.r2());
    let bit_keys = r0 < 1.0 && r1 < 1.0;
    let phase_keys = r0 > 0.0 && r2 < 1.0;
    if bit_keys && (r0 == 0.0 || r2 == 0.0) {
        return Err(CliError::Usage(
            "unestimable side: bit-basis keys need phase-basis checks (r0 > 0 and r2 > 0)"
                .to_string(),
        ));
    }
    if phase_keys && (r0 == 1.0 || r1 == 0.0) {
        return Err(CliError::Usage(
            "unestimable side: phase-basis keys need bit-basis checks (r0 < 1 and r1 > 0)"
                .to_string(),
        ));
    }
    Ok(())
}

fn expected_counts(n: u64, r0: f64) -> SiftedCounts {
    let n = n as f64;
    SiftedCounts {
        n1: (n * (1.0 - r0) * (1.0 - r0)).round() as u64,
        n2: (n * r0 * r0).round() as u64,
    }
}

// ---------------------------------------------------------------------
// rate
// ---------------------------------------------------------------------

#[derive(Args)]
struct RateArgs {
    /// Bit-basis error rate
    #[arg(long, default_value_t = 0.05)]
    p1: f64,
    /// Phase-basis error rate
    #[arg(long, default_value_t = 0.05)]
    p2: f64,
    /// Security level epsilon
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Reconciliation code rate beta
    #[arg(long, default_value_t = 0.642243)]
    beta: f64,
    /// Block length (number of transmissions)
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    /// Phase-basis selection probability (default: analytic optimum)
    #[arg(long)]
    r0: Option<f64>,
    /// Bit-basis check fraction (default: analytic optimum)
    #[arg(long)]
    r1: Option<f64>,
    /// Phase-basis check fraction (default: analytic optimum)
    #[arg(long)]
    r2: Option<f64>,
    /// Also write the full-precision report as a one-row CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_rate(args: RateArgs) -> Result<(), CliError> {
    let params = build_params(args.p1, args.p2, args.eps, args.beta, args.n)?;

    let (ratios, ratios_note) = match (args.r0, args.r1, args.r2) {
        (None, None, None) => {
            let opt = optimal_ratios(params)?;
            if opt.clamped {
                eprintln!(
                    "warning: asymptotic regime not reached at n = {}; r0 clamped to {}",
                    args.n,
                    sig6(opt.ratios.r0())
                );
            }
            let note = match (opt.swapped, opt.clamped) {
                (false, false) => "analytic optimum",
                (false, true) => "analytic optimum, clamped",
                (true, false) => "analytic optimum, basis roles swapped",
                (true, true) => "analytic optimum, swapped and clamped",
            };
            (opt.ratios, note)
        }
        (Some(r0), Some(r1), Some(r2)) => (Ratios::new(r0, r1, r2)?, "from flags"),
        _ => {
            return Err(CliError::Usage(
                "provide all of --r0, --r1, --r2 or none (none = analytic optimum)".to_string(),
            ))
        }
    };
    check_estimable(ratios)?;

    let c1 = Coefficients::evaluate(params.p1(), args.beta, params.eps())?;
    let c2 = Coefficients::evaluate(params.p2(), args.beta, params.eps())?;
    let averaged = averaged_key_length(params, ratios)?;
    let counts = expected_counts(args.n, ratios.r0());
    let report = finite_key_length(
        args.n,
        counts,
        ratios,
        Some(args.p1),
        Some(args.p2),
        params.eps(),
        args.beta,
    )?;

    // Averaged-length terms, same pairing as the formula: keys from a
    // basis are bounded by the *other* basis' coefficients.
    let (r0, r1, r2) = (ratios.r0(), ratios.r1(), ratios.r2());
    let g1 = (1.0 - r0) * (1.0 - r0) * (1.0 - r1);
    let e1 = r0 * r0 * r2;
    let g2 = r0 * r0 * (1.0 - r2);
    let e2 = (1.0 - r0) * (1.0 - r0) * r1;
    let nf = args.n as f64;
    let yield_bit = nf * c2.a * g1;
    let yield_phase = nf * c1.a * g2;
    let penalty_bit =
        if g1 == 0.0 { 0.0 } else { nf.sqrt() * c2.b * (g1 * (g1 + e1) / e1).sqrt() };
    let penalty_phase =
        if g2 == 0.0 { 0.0 } else { nf.sqrt() * c1.b * (g2 * (g2 + e2) / e2).sqrt() };

    println!("parameters");
    println!(
        "  n = {}   p1 = {}   p2 = {}   eps = {}   beta = {}",
        args.n,
        sig6(args.p1),
        sig6(args.p2),
        sig6(args.eps),
        sig6(args.beta)
    );
    println!("coefficients");
    println!("  A(p1) = {}   B(p1, eps) = {}", sig6(c1.a), sig6(c1.b));
    println!("  A(p2) = {}   B(p2, eps) = {}", sig6(c2.a), sig6(c2.b));
    println!("ratios ({ratios_note})");
    println!("  r0 = {}   r1 = {}   r2 = {}", sig6(r0), sig6(r1), sig6(r2));
    println!("averaged key length (expectation over sifting)");
    println!("  bit-side yield      n*A(p2)*g1 = {}   [g1 = {}]", sig6(yield_bit), sig6(g1));
    println!("  phase-side yield    n*A(p1)*g2 = {}   [g2 = {}]", sig6(yield_phase), sig6(g2));
    println!(
        "  bit-side penalty    sqrt(n)*B(p2,eps)*sqrt(g1(g1+e1)/e1) = {}   [e1 = {}]",
        sig6(penalty_bit),
        sig6(e1)
    );
    println!(
        "  phase-side penalty  sqrt(n)*B(p1,eps)*sqrt(g2(g2+e2)/e2) = {}   [e2 = {}]",
        sig6(penalty_phase),
        sig6(e2)
    );
    println!("  total = {} bits   (rate {})", sig6(averaged), sig6(averaged / nf));
    println!(
        "finite key length at expected counts (n1 = {}, n2 = {})",
        counts.n1, counts.n2
    );
    let part = &report.partition;
    println!(
        "  partition    checks1 = {}, keep1 = {}, checks2 = {}, keep2 = {}",
        part.checks1, part.keep1, part.checks2, part.keep2
    );
    println!(
        "  sacrificed   m1 = {}, m2 = {}, verification m3 = {}",
        report.sacrificed1, report.sacrificed2, report.verification_bits
    );
    println!(
        "  reconciled   bit side {}, phase side {}",
        report.reconciled1, report.reconciled2
    );
    println!(
        "  key length   bit side {}, phase side {}, total {} bits   (rate {})",
        report.length_bit_side,
        report.length_phase_side,
        report.total,
        sig6(report.total as f64 / nf)
    );

    if let Some(ref path) = args.out {
        write_rate_csv(path, &args, ratios, averaged, &counts, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_rate_csv(
    path: &Path,
    args: &RateArgs,
    ratios: Ratios,
    averaged: f64,
    counts: &SiftedCounts,
    report: &KeyLengthReport,
) -> Result<(), CliError> {
    let mut csv = String::new();
    csv.push_str("# schema: bb84-rate/1\n");
    csv.push_str(
        "n,p1,p2,eps,beta,r0,r1,r2,n1,n2,checks1,keep1,checks2,keep2,\
         m1,m2,m3,reconciled1,reconciled2,length_bit_side,length_phase_side,total,averaged\n",
    );
    let p = &report.partition;
    csv.push_str(&format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.16e}\n",
        args.n,
        args.p1,
        args.p2,
        args.eps,
        args.beta,
        ratios.r0(),
        ratios.r1(),
        ratios.r2(),
        counts.n1,
        counts.n2,
        p.checks1,
        p.keep1,
        p.checks2,
        p.keep2,
        report.sacrificed1,
        report.sacrificed2,
        report.verification_bits,
        report.reconciled1,
        report.reconciled2,
        report.length_bit_side,
        report.length_phase_side,
        report.total,
        averaged,
    ));
    fs::write(path, csv).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------

#[derive(Args)]
struct OptimizeArgs {
    /// Bit-basis error rate
    #[arg(long, default_value_t = 0.05)]
    p1: f64,
    /// Phase-basis error rate
    #[arg(long, default_value_t = 0.05)]
    p2: f64,
    /// Security level epsilon
    #[arg(long, default_value_t = 1e-2)]
    eps: f64,
    /// Reconciliation code rate beta
    #[arg(long, default_value_t = 0.642243)]
    beta: f64,
    /// Block length (number of transmissions)
    #[arg(long, default_value_t = 100_000_000)]
    n: u64,
    /// Also run the grid + coordinate-descent oracle and print the gap
    #[arg(long)]
    oracle: bool,
}

fn cmd_optimize(args: OptimizeArgs) -> Result<(), CliError> {
    let params = build_params(args.p1, args.p2, args.eps, args.beta, args.n)?;
    let opt = optimal_ratios(params)?;
    if opt.clamped {
        eprintln!(
            "warning: asymptotic regime not reached at n = {}; r0 clamped to {}",
            args.n,
            sig6(opt.ratios.r0())
        );
    }

    let analytic_value = averaged_key_length(params, opt.ratios)?;
    let closed_form = max_key_length(params)?;
    let nf = args.n as f64;
    println!("analytic optimum");
    println!(
        "  r0 = {}   r1 = {}   r2 = {}",
        sig6(opt.ratios.r0()),
        sig6(opt.ratios.r1()),
        sig6(opt.ratios.r2())
    );
    println!(
        "  swapped basis roles: {}   clamped: {}",
        if opt.swapped { "yes" } else { "no" },
        if opt.clamped { "yes" } else { "no" }
    );
    println!(
        "  averaged length at optimum = {} bits   (rate {})",
        sig6(analytic_value),
        sig6(analytic_value / nf)
    );
    println!(
        "  closed-form maximum nA - n^(3/4)*2*sqrt(2AB) = {} bits{}",
        sig6(closed_form),
        if opt.clamped { "   (pre-clamp formula)" } else { "" }
    );

    if args.oracle {
        let (oracle_ratios, oracle_value) = numeric_optimize(params);
        let gap = if oracle_value != 0.0 {
            (oracle_value - analytic_value) / oracle_value.abs()
        } else {
            oracle_value - analytic_value
        };
        println!("numeric oracle (grid + coordinate descent)");
        println!(
            "  r0 = {}   r1 = {}   r2 = {}",
            sig6(oracle_ratios.r0()),
            sig6(oracle_ratios.r1()),
            sig6(oracle_ratios.r2())
        );
        println!("  oracle maximum = {} bits", sig6(oracle_value));
        println!("  relative gap (oracle - analytic)/|oracle| = {}", sig6(gap));
    }
    Ok(())
}

// ---------------------------------------------------------------------
// figure1
// ---------------------------------------------------------------------

#[derive(Args)]
struct Figure1Args {
    /// Phase-basis error rate
    #[arg(long, default_value_t = 0.05)]
    p2: f64,
    /// Reconciliation code rate beta
    #[arg(long, default_value_t = 0.642243)]
    beta: f64,
    /// Comma-separated security levels, one curve each
    #[arg(long = "eps-list", value_delimiter = ',', default_value = "1e-2,1e-4,1e-6,1e-8,1e-10")]
    eps_list: Vec<f64>,
    /// log10(n) grid as lo:hi:step (each a multiple of 0.001)
    #[arg(long = "n-range", default_value = "4:12:0.1")]
    n_range: String,
    /// Output CSV path (default: figure1.csv in the output directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script rendering the curve family
    #[arg(long = "plot-script")]
    plot_script: Option<PathBuf>,
}

/// Parses "lo:hi:step" into the log₁₀ grid, generated from scaled
/// integers so the abscissa is reproducible to the last bit.
fn parse_log_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let usage = || {
        CliError::Usage(format!(
            "--n-range '{spec}': expected lo:hi:step with lo <= hi, step > 0, multiples of 0.001"
        ))
    };
    if parts.len() != 3 {
        return Err(usage());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage())?;
    let to_milli = |x: f64| -> Option<i64> {
        let m = (x * 1000.0).round();
        ((m - x * 1000.0).abs() < 1e-6 && m.abs() < 1e9).then_some(m as i64)
    };
    let (lo, hi, step) = match (to_milli(nums[0]), to_milli(nums[1]), to_milli(nums[2])) {
        (Some(lo), Some(hi), Some(step)) if lo <= hi && step > 0 => (lo, hi, step),
        _ => return Err(usage()),
    };
    Ok((lo..=hi).step_by(step as usize).map(|k| k as f64 / 1000.0).collect())
}

fn cmd_figure1(args: Figure1Args) -> Result<(), CliError> {
    let p2 = Prob::new(args.p2)?;
    let eps_levels: Vec<SecurityLevel> = args
        .eps_list
        .iter()
        .map(|&e| SecurityLevel::new(e))
        .collect::<Result<_, _>>()?;
    if eps_levels.is_empty() {
        return Err(CliError::Usage("--eps-list needs at least one level".to_string()));
    }
    let log_grid = parse_log_grid(&args.n_range)?;
    let n_values: Vec<f64> = log_grid.iter().map(|&l| 10f64.powf(l)).collect();
    let curve = rate_curve(p2, &eps_levels, args.beta, &n_values)?;

    let mut csv = String::new();
    csv.push_str("# schema: bb84-figure1/1\n");
    csv.push_str("log10_n,asymptote");
    for eps in &args.eps_list {
        csv.push_str(&format!(",rate_eps_{eps:e}"));
    }
    csv.push('\n');
    for (row, &log_n) in log_grid.iter().enumerate() {
        csv.push_str(&format!("{log_n:.16e},{:.16e}", curve.asymptote));
        for series in &curve.series {
            csv.push_str(&format!(",{:.16e}", series.points[row].1));
        }
        csv.push('\n');
    }
    let csv_path = resolve_out(args.out, "figure1.csv");
    fs::write(&csv_path, csv).map_err(|e| io_err(&csv_path, e))?;
    println!(
        "wrote {} ({} rows, {} series + asymptote)",
        csv_path.display(),
        log_grid.len(),
        curve.series.len()
    );

    if let Some(script_path) = args.plot_script {
        let script = plot_script(&csv_path, &args.eps_list);
        fs::write(&script_path, script).map_err(|e| io_err(&script_path, e))?;
        println!("wrote {}", script_path.display());
    }
    Ok(())
}

/// A gnuplot script for the CSV. Pre-knee rates are negative in the
/// data (zero extractable keys); the y-axis clamp at 0 reproduces the
/// usual presentation without touching the CSV values.
fn plot_script(csv_path: &Path, eps_list: &[f64]) -> String {
    let csv_name = csv_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| csv_path.display().to_string());
    let mut s = String::new();
    s.push_str("# gnuplot script for the key-rate curve family\n");
    s.push_str("# run from the CSV's directory: gnuplot -p this_file\n");
    s.push_str("set datafile separator \",\"\n");
    s.push_str("set datafile commentschars \"#\"\n");
    s.push_str("set xlabel \"log_{10} n\"\n");
    s.push_str("set ylabel \"key rate per transmission\"\n");
    s.push_str("set yrange [0:*]   # negative (pre-knee) rates clamp to the axis\n");
    s.push_str("set key bottom right\n");
    s.push_str(&format!(
        "plot \"{csv_name}\" using 1:2 with lines lw 2 lc rgb \"black\" title \"asymptote A(p_2)\""
    ));
    for (i, eps) in eps_list.iter().enumerate() {
        s.push_str(&format!(
            ", \\\n     \"{csv_name}\" using 1:{} with lines title \"eps = {eps:e}\"",
            i + 3
        ));
    }
    s.push('\n');
    s
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// key = value config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Block length (number of transmissions)
    #[arg(long)]
    n: Option<u64>,
    /// Phase-basis selection probability
    #[arg(long)]
    r0: Option<f64>,
    /// Bit-basis check fraction
    #[arg(long)]
    r1: Option<f64>,
    /// Phase-basis check fraction
    #[arg(long)]
    r2: Option<f64>,
    /// Security level epsilon
    #[arg(long)]
    eps: Option<f64>,
    /// Reconciliation code rate beta
    #[arg(long)]
    beta: Option<f64>,
    /// Bit-basis flip probability
    #[arg(long)]
    q1: Option<f64>,
    /// Phase-basis flip probability
    #[arg(long)]
    q2: Option<f64>,
    /// Safety margin under the idealized decode threshold
    #[arg(long)]
    margin: Option<f64>,
    /// Reconcile by passthrough (no correction) instead of the
    /// idealized decoder
    #[arg(long)]
    passthrough: bool,
    /// Master seed for the per-run RNG streams
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent protocol executions
    #[arg(long)]
    trials: Option<u64>,
    /// Per-trial CSV path (default: sim_trials.csv in the output directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// The config file's entries — all optional, merged under the flags.
#[derive(Default)]
struct FileConfig {
    n: Option<u64>,
    r0: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    eps: Option<f64>,
    beta: Option<f64>,
    q1: Option<f64>,
    q2: Option<f64>,
    margin: Option<f64>,
    passthrough: Option<bool>,
    seed: Option<u64>,
    trials: Option<u64>,
    out: Option<PathBuf>,
}

fn parse_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut cfg = FileConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| CliError::Usage(format!("{}:{}: {msg}", path.display(), idx + 1));
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
        if value.is_empty() {
            return Err(at(format!("empty value for '{key}'")));
        }
        macro_rules! num {
            ($ty:ty) => {
                Some(value.parse::<$ty>().map_err(|e| at(format!("'{key}': {e}")))?)
            };
        }
        match key {
            "n" => cfg.n = num!(u64),
            "r0" => cfg.r0 = num!(f64),
            "r1" => cfg.r1 = num!(f64),
            "r2" => cfg.r2 = num!(f64),
            "eps" => cfg.eps = num!(f64),
            "beta" => cfg.beta = num!(f64),
            "q1" => cfg.q1 = num!(f64),
            "q2" => cfg.q2 = num!(f64),
            "margin" => cfg.margin = num!(f64),
            "seed" => cfg.seed = num!(u64),
            "trials" => cfg.trials = num!(u64),
            "out" => cfg.out = Some(PathBuf::from(value)),
            "reconciliation" => {
                cfg.passthrough = Some(match value {
                    "idealized" => false,
                    "passthrough" => true,
                    other => {
                        return Err(at(format!(
                            "reconciliation must be 'idealized' or 'passthrough', got '{other}'"
                        )))
                    }
                })
            }
            unknown => return Err(at(format!("unknown key '{unknown}'"))),
        }
    }
    Ok(cfg)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => FileConfig::default(),
    };

    let n = args.n.or(file.n).unwrap_or(10_000);
    let r0 = args.r0.or(file.r0).unwrap_or(0.1);
    let r1 = args.r1.or(file.r1).unwrap_or(0.0);
    let r2 = args.r2.or(file.r2).unwrap_or(1.0);
    let eps = args.eps.or(file.eps).unwrap_or(1e-2);
    let beta = args.beta.or(file.beta).unwrap_or(0.642243);
    let q1 = args.q1.or(file.q1).unwrap_or(0.0);
    let q2 = args.q2.or(file.q2).unwrap_or(0.0);
    let passthrough = args.passthrough || file.passthrough.unwrap_or(false);
    let margin = args.margin.or(file.margin);
    let master_seed = args.seed.or(file.seed).unwrap_or(1);
    let trials = args.trials.or(file.trials).unwrap_or(10);
    let out = args.out.or(file.out);

    let reconciliation = if passthrough {
        if margin.is_some() {
            return Err(CliError::Usage(
                "--margin applies to the idealized decoder, not passthrough".to_string(),
            ));
        }
        ReconciliationStrategy::Passthrough
    } else {
        ReconciliationStrategy::Idealized { margin: margin.unwrap_or(0.0) }
    };

    let config = ProtocolConfig {
        n,
        ratios: Ratios::new(r0, r1, r2)?,
        eps: SecurityLevel::new(eps)?,
        beta,
        channel: ChannelModel::new(q1, q2)?,
        master_seed,
        reconciliation,
    };
    config.validate()?;

    let result = run_ensemble(&config, trials)?;

    let csv_path = resolve_out(out, "sim_trials.csv");
    let mut buf = Vec::new();
    write_trials_csv(&result.outcomes, &mut buf)
        .map_err(|e| CliError::Io(format!("serializing trials: {e}")))?;
    fs::write(&csv_path, buf).map_err(|e| io_err(&csv_path, e))?;

    print!("{}", format_summary(&result.summary));
    print_prediction_line(&config, &result.summary.mean_key_len, result.summary.stddev_key_len, trials);
    println!("wrote {}", csv_path.display());
    Ok(())
}

/// The validation line: the formula's key length at expected counts
/// (n1 = n(1−r0)², n2 = n·r0²) with estimates replaced by the true flip
/// rates, against the ensemble's empirical mean.
fn print_prediction_line(config: &ProtocolConfig, mean: &f64, stddev: f64, trials: u64) {
    let counts = expected_counts(config.n, config.ratios.r0());
    let predicted = finite_key_length(
        config.n,
        counts,
        config.ratios,
        Some(config.channel.q1()),
        Some(config.channel.q2()),
        config.eps,
        config.beta,
    );
    match predicted {
        Ok(report) => {
            let se = stddev / (trials as f64).sqrt();
            let z = if se > 0.0 {
                sig6((mean - report.total as f64) / se)
            } else if *mean == report.total as f64 {
                "0".to_string()
            } else {
                "inf".to_string()
            };
            println!(
                "prediction: predicted = {}, empirical mean = {}, z = {z}",
                report.total,
                sig6(*mean)
            );
        }
        Err(e) => println!("prediction: unavailable ({e})"),
    }
}
