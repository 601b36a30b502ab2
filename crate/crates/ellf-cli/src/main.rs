//! `ellf` — command-line surface for the loop-erased self-repelling walk
//! library: renormalization reports, exact-series verification, path
//! samplers, limit-object diagnostics, and SVG rendering.

mod svg;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use ellf::path_space::{LatticePath, TriangleType};
use ellf::renormalization::{
    fixed_point, lambda_tilde, spectral, step_weights, SpectralData, StepWeights,
};
use ellf::series_oracle::{
    compare, dp_weight_series, expand_closed_form, lerw_outcome_series, ClosedForm, CompareReport,
    Family,
};
use ellf::scalar::Scalar;
use ellf::stochastics::{
    displacement_stats, estimate_b, laplace_g, lil_diagnostic, sample_lerw, sample_x, tail_slope,
    Automaton, LerwKind,
};

const SEED_ENV: &str = "ELLF_SEED";

// ---------------------------------------------------------------------------
// Command line definition.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "ellf",
    version,
    about = "Loop-erased self-repelling walks on the Sierpinski gasket"
)]
struct Cli {
    /// Plain key=value defaults file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Cap worker-pool parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Penalty parameter u, as a decimal or an exact "p/q" rational.
    #[arg(long, global = true)]
    u: Option<String>,

    /// Recursion level N (memory guard: at most 24).
    #[arg(long, global = true)]
    level: Option<u32>,

    /// Number of repetitions (at least 1).
    #[arg(long, global = true)]
    reps: Option<u64>,

    /// RNG seed (default: $ELLF_SEED, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (default: stdout).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Output format: json, csv, or svg (each command supports its natural formats).
    #[arg(long, global = true)]
    format: Option<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fixed point, step-weight tables, and spectral data for one u.
    Params,
    /// Compare exact path-enumeration series against the closed forms.
    Verify {
        /// Highest series degree to check.
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        /// Comma-separated subset of phi,xi,v1,p,q (default: all).
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
    },
    /// Draw paths and dump them as JSON lines.
    Sample {
        #[command(subcommand)]
        kind: SampleKind,
    },
    /// Limit-object diagnostics.
    Limit {
        #[command(subcommand)]
        what: LimitCmd,
    },
    /// Render a JSON-lines path dump as an SVG over the gasket wireframe.
    Render {
        /// Path dump to read (default: stdin).
        input: Option<PathBuf>,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum SampleKind {
    /// Self-repelling walks W_N.
    Srw,
    /// Loop-erased walks Γ_N.
    Lerw,
    /// Loop-erased walks with scaled exit times (the process X_N).
    Coupled,
}

#[derive(Subcommand, Clone, Copy)]
enum LimitCmd {
    /// Two-type branching process summary for the time-limit variables B_i.
    Bprocess,
    /// Laplace transforms g_i and the compensated h_i on a log time grid.
    Laplace {
        #[arg(long, default_value_t = 1e-6)]
        t_min: f64,
        #[arg(long, default_value_t = 1e6)]
        t_max: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
    },
    /// Displacement moments E[|X(t)|^p] and the fitted growth exponent.
    Exponent {
        #[arg(long, default_value_t = 1.0)]
        p_moment: f64,
    },
    /// Iterated-logarithm gauge ratios sup|X|/ψ over small times.
    Lil,
}

// ---------------------------------------------------------------------------
// Failure handling: exit 1 for runtime/verification failures, 2 for usage.
// ---------------------------------------------------------------------------

enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration resolution: flags > config file > environment > defaults.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Svg,
}

struct Resolved {
    u: Option<(f64, BigRational)>,
    level: Option<u32>,
    reps: Option<u64>,
    seed: u64,
    out: Option<PathBuf>,
    format: Option<Format>,
    threads: Option<usize>,
}

fn parse_config_file(path: &PathBuf) -> Result<HashMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut kv = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!(
                "{}:{}: expected key=value, got {line:?}",
                path.display(),
                lineno + 1
            ));
        };
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    for k in kv.keys() {
        if !matches!(
            k.as_str(),
            "u" | "level" | "reps" | "seed" | "out" | "format" | "threads"
        ) {
            return usage(format!("unknown config key {k:?} in {}", path.display()));
        }
    }
    Ok(kv)
}

fn parse_u(s: &str) -> Result<(f64, BigRational), String> {
    let rat = if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in u={s:?}"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in u={s:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in u={s:?}"));
        }
        BigRational::new(n, d)
    } else {
        let f: f64 = s.trim().parse().map_err(|_| format!("cannot parse u={s:?}"))?;
        if !f.is_finite() {
            return Err(format!("u={s:?} is not finite"));
        }
        BigRational::from_float(f).ok_or_else(|| format!("cannot parse u={s:?}"))?
    };
    if rat.is_negative() {
        return Err(format!("u must be nonnegative, got {s:?}"));
    }
    let f = rat.to_f64().ok_or_else(|| format!("u={s:?} out of range"))?;
    Ok((f, rat))
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        "svg" => Ok(Format::Svg),
        other => Err(format!("unknown format {other:?} (expected json, csv, or svg)")),
    }
}

fn resolve(cli: &Cli) -> Result<Resolved, Failure> {
    let kv = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let from_kv = |key: &str| kv.get(key).cloned();

    let u_str = cli.u.clone().or_else(|| from_kv("u"));
    let u = match u_str {
        Some(s) => Some(parse_u(&s).map_err(Failure::Usage)?),
        None => None,
    };

    let level = match cli.level {
        Some(l) => Some(l),
        None => match from_kv("level") {
            Some(s) => Some(s.parse::<u32>().map_err(|_| {
                Failure::Usage(format!("cannot parse level={s:?} from config"))
            })?),
            None => None,
        },
    };
    if let Some(l) = level {
        if l > 24 {
            return usage(format!("level {l} exceeds the memory guard (max 24)"));
        }
    }

    let reps = match cli.reps {
        Some(r) => Some(r),
        None => match from_kv("reps") {
            Some(s) => Some(s.parse::<u64>().map_err(|_| {
                Failure::Usage(format!("cannot parse reps={s:?} from config"))
            })?),
            None => None,
        },
    };
    if reps == Some(0) {
        return usage("reps must be at least 1");
    }

    let seed = match cli.seed {
        Some(s) => s,
        None => match from_kv("seed").or_else(|| std::env::var(SEED_ENV).ok()) {
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| Failure::Usage(format!("cannot parse seed={s:?}")))?,
            None => 0,
        },
    };

    let out = cli.out.clone().or_else(|| from_kv("out").map(PathBuf::from));
    let format = match cli.format.clone().or_else(|| from_kv("format")) {
        Some(s) => Some(parse_format(&s).map_err(Failure::Usage)?),
        None => None,
    };
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match from_kv("threads") {
            Some(s) => Some(s.parse::<usize>().map_err(|_| {
                Failure::Usage(format!("cannot parse threads={s:?} from config"))
            })?),
            None => None,
        },
    };

    Ok(Resolved {
        u,
        level,
        reps,
        seed,
        out,
        format,
        threads,
    })
}

fn require_u(r: &Resolved) -> Result<(f64, BigRational), Failure> {
    r.u.clone()
        .ok_or_else(|| Failure::Usage("missing --u (or u= in the config file)".into()))
}

fn check_format(r: &Resolved, natural: Format, cmd: &str) -> Result<Format, Failure> {
    match r.format {
        None => Ok(natural),
        Some(f) if f == natural => Ok(f),
        Some(_) => usage(format!("`{cmd}` only emits its natural format")),
    }
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), Failure> {
    let text = if body.ends_with('\n') {
        body.to_string()
    } else {
        format!("{body}\n")
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Run),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<u8, Failure> {
    let r = resolve(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(r.threads.unwrap_or(0))
        .build_global()
        .context("configuring the worker pool")?;
    match &cli.cmd {
        Cmd::Params => run_params(&r),
        Cmd::Verify { max_len, targets } => run_verify(&r, *max_len, targets),
        Cmd::Sample { kind } => run_sample(&r, *kind),
        Cmd::Limit { what } => run_limit(&r, *what),
        Cmd::Render { input } => run_render(&r, input),
    }
}

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------

fn run_params(r: &Resolved) -> Result<u8, Failure> {
    check_format(r, Format::Json, "params")?;
    let (u, _) = require_u(r)?;
    let fp = fixed_point(u)?;
    let weights: StepWeights = step_weights(u)?;
    let sp: SpectralData = spectral(&weights);
    let report = json!({
        "u": u,
        "x_u": fp.x_u,
        "lambda_tilde": lambda_tilde(u)?,
        "p": weights.p,
        "q": weights.q,
        "spectral": sp,
        "hat_polynomials": ellf::renormalization::hat_polynomials(&weights),
    });
    emit(&r.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

const VERIFY_TARGETS: [&str; 5] = ["phi", "xi", "v1", "p", "q"];

fn report_json(name: &str, rep: &CompareReport) -> serde_json::Value {
    json!({
        "target": name,
        "equal": rep.equal,
        "first_mismatch": rep.first_mismatch,
        "checked_to": rep.checked_to,
    })
}

fn run_verify(r: &Resolved, max_len: usize, targets: &[String]) -> Result<u8, Failure> {
    check_format(r, Format::Json, "verify")?;
    let (_, u) = require_u(r)?;
    let targets: Vec<&str> = if targets.is_empty() {
        VERIFY_TARGETS.to_vec()
    } else {
        targets.iter().map(|s| s.as_str()).collect()
    };
    for t in &targets {
        if !VERIFY_TARGETS.contains(t) {
            return usage(format!(
                "unknown verify target {t:?} (expected one of {})",
                VERIFY_TARGETS.join(", ")
            ));
        }
    }
    if targets.iter().any(|t| matches!(*t, "phi" | "xi" | "v1")) && max_len > 62 {
        return usage("max_len for phi/xi/v1 is capped at 62");
    }
    if targets.iter().any(|t| matches!(*t, "p" | "q")) && max_len > 12 {
        return usage("max_len for p/q is capped at 12 (exhaustive enumeration)");
    }

    let outcome = if targets.iter().any(|t| matches!(*t, "p" | "q")) {
        Some(lerw_outcome_series(max_len, &u)?)
    } else {
        None
    };

    let mut entries = Vec::new();
    let mut all_equal = true;
    for t in &targets {
        let entry = match *t {
            "phi" => {
                let dp = dp_weight_series(Family::W1, max_len, &u)?;
                let cf = expand_closed_form(ClosedForm::Phi, &u, max_len);
                report_json("phi", &compare(&dp, &cf))
            }
            "xi" => {
                let dp = dp_weight_series(Family::U1Half, max_len, &u)?;
                let cf = expand_closed_form(ClosedForm::Xi, &u, max_len);
                report_json("xi", &compare(&dp, &cf))
            }
            "v1" => {
                let dp = dp_weight_series(Family::V1, max_len, &u)?;
                let phi = expand_closed_form(ClosedForm::Phi, &u, max_len);
                report_json("v1", &compare(&dp, &phi.mul(&phi)))
            }
            "p" | "q" => {
                let (p_hat, q_hat) = outcome.as_ref().unwrap();
                let (series, form): (&[_; 10], fn(usize) -> ClosedForm) = if *t == "p" {
                    (p_hat, ClosedForm::P)
                } else {
                    (q_hat, ClosedForm::Q)
                };
                let comps: Vec<serde_json::Value> = (1..=10)
                    .map(|i| {
                        let cf = expand_closed_form(form(i), &u, max_len);
                        report_json(&format!("{t}{i}"), &compare(&series[i - 1], &cf))
                    })
                    .collect();
                let equal = comps.iter().all(|c| c["equal"] == json!(true));
                json!({ "target": t, "equal": equal, "components": comps })
            }
            _ => unreachable!(),
        };
        if entry["equal"] != json!(true) {
            all_equal = false;
        }
        entries.push(entry);
    }

    let report = json!({
        "u": u.to_string(),
        "max_len": max_len,
        "all_equal": all_equal,
        "targets": entries,
    });
    emit(&r.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(if all_equal { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

fn run_sample(r: &Resolved, kind: SampleKind) -> Result<u8, Failure> {
    check_format(r, Format::Json, "sample")?;
    let (u, _) = require_u(r)?;
    let level = r.level.unwrap_or(4);
    let reps = r.reps.unwrap_or(1);
    let seed = r.seed;

    let lines: Result<Vec<String>, anyhow::Error> = match kind {
        SampleKind::Srw => {
            let aut = Automaton::build(u)?;
            (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_stream(seed, i);
                    let path = aut.sample_srw(level, &mut rng)?;
                    Ok(path.to_json())
                })
                .collect()
        }
        SampleKind::Lerw => {
            let weights = step_weights(u)?;
            (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_stream(seed, i);
                    let path = sample_lerw(&weights, level, LerwKind::Hat, &mut rng)?;
                    Ok(path.to_json())
                })
                .collect()
        }
        SampleKind::Coupled => {
            let weights = step_weights(u)?;
            let sp = spectral(&weights);
            (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_stream(seed, i);
                    let proc = sample_x(&weights, &sp, level, &mut rng)?;
                    let mut v: serde_json::Value = serde_json::from_str(&proc.path.to_json())?;
                    v["exit_times"] = json!(proc.exit_times);
                    v["time_scale"] = json!(proc.time_scale);
                    Ok(serde_json::to_string(&v)?)
                })
                .collect()
        }
    };
    emit(&r.out, &lines?.join("\n"))?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// limit
// ---------------------------------------------------------------------------

fn run_limit(r: &Resolved, what: LimitCmd) -> Result<u8, Failure> {
    match what {
        LimitCmd::Bprocess => run_bprocess(r),
        LimitCmd::Laplace {
            t_min,
            t_max,
            points,
        } => run_laplace(r, t_min, t_max, points),
        LimitCmd::Exponent { p_moment } => run_exponent(r, p_moment),
        LimitCmd::Lil => run_lil(r),
    }
}

fn run_bprocess(r: &Resolved) -> Result<u8, Failure> {
    check_format(r, Format::Json, "limit bprocess")?;
    let (u, _) = require_u(r)?;
    let level = r.level.unwrap_or(10);
    let reps = u32::try_from(r.reps.unwrap_or(1000)).map_err(|_| {
        Failure::Usage("reps for limit bprocess must fit in 32 bits".to_string())
    })?;
    let weights = step_weights(u)?;
    let sp = spectral(&weights);
    let stats_for = |start: TriangleType, stream: u64| {
        let mut rng = rng_stream(r.seed, stream);
        let st = estimate_b(&weights, &sp, start, level, reps, &mut rng);
        json!({
            "mean": st.mean,
            "variance": st.variance,
            "min": st.min,
            "max": st.max,
            "tail_slope": tail_slope(&st.samples),
        })
    };
    let report = json!({
        "u": u,
        "lambda": sp.lambda,
        "nu": sp.nu,
        "generations": level,
        "reps": reps,
        "expected_means": { "type1": sp.right_vec[0], "type2": sp.right_vec[1] },
        "type1": stats_for(TriangleType::Type1, 0),
        "type2": stats_for(TriangleType::Type2, 1),
    });
    emit(&r.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

fn log_grid(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if !(t_min > 0.0 && t_max >= t_min) || points < 2 {
        return usage("need 0 < t_min <= t_max and at least 2 points");
    }
    let ratio = t_max / t_min;
    Ok((0..points)
        .map(|i| t_min * ratio.powf(i as f64 / (points - 1) as f64))
        .collect())
}

fn run_laplace(r: &Resolved, t_min: f64, t_max: f64, points: usize) -> Result<u8, Failure> {
    check_format(r, Format::Csv, "limit laplace")?;
    let (u, _) = require_u(r)?;
    let weights = step_weights(u)?;
    let sp = spectral(&weights);
    let grid = log_grid(t_min, t_max, points)?;
    let mut csv = String::from("t,g1,g2,h1,h2\n");
    for row in laplace_g(&weights, &sp, &grid) {
        writeln!(
            csv,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            row.t, row.g1, row.g2, row.h1, row.h2
        )
        .unwrap();
    }
    emit(&r.out, &csv)?;
    Ok(0)
}

fn run_exponent(r: &Resolved, p_moment: f64) -> Result<u8, Failure> {
    check_format(r, Format::Csv, "limit exponent")?;
    let (u, _) = require_u(r)?;
    if !(p_moment > 0.0) {
        return usage("p_moment must be positive");
    }
    let level = r.level.unwrap_or(10);
    let reps = u32::try_from(r.reps.unwrap_or(2000)).map_err(|_| {
        Failure::Usage("reps for limit exponent must fit in 32 bits".to_string())
    })?;
    let weights = step_weights(u)?;
    let sp = spectral(&weights);
    let mut rng = rng_stream(r.seed, 0);
    let fit = displacement_stats(&weights, &sp, level, reps, p_moment, &mut rng)?;
    // Reconstruct the intercept of the log-log fit for the fitted curve.
    let n = fit.rows.len() as f64;
    let mx: f64 = fit.rows.iter().map(|r| r.0.ln()).sum::<f64>() / n;
    let my: f64 = fit.rows.iter().map(|r| r.1.ln()).sum::<f64>() / n;
    let intercept = my - fit.slope * mx;
    let mut csv = String::from("t,moment,fit\n");
    for (t, m) in &fit.rows {
        writeln!(
            csv,
            "{:.12e},{:.12e},{:.12e}",
            t,
            m,
            (intercept + fit.slope * t.ln()).exp()
        )
        .unwrap();
    }
    eprintln!(
        "fitted slope {:.6}, predicted p*nu = {:.6}",
        fit.slope, fit.expected
    );
    emit(&r.out, &csv)?;
    Ok(0)
}

fn run_lil(r: &Resolved) -> Result<u8, Failure> {
    check_format(r, Format::Csv, "limit lil")?;
    let (u, _) = require_u(r)?;
    let level = r.level.unwrap_or(10);
    let reps = r.reps.unwrap_or(200);
    let weights = step_weights(u)?;
    let sp = spectral(&weights);
    let procs: Result<Vec<_>, anyhow::Error> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_stream(r.seed, i);
            Ok(sample_x(&weights, &sp, level, &mut rng)?)
        })
        .collect();
    let grid: Vec<f64> = (3..=level.max(3))
        .map(|k| sp.lambda.powi(-(k as i32)))
        .collect();
    let mut csv = String::from("t,psi,min,median,max\n");
    for row in lil_diagnostic(&sp, &procs?, &grid) {
        writeln!(
            csv,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            row.t, row.psi, row.min, row.median, row.max
        )
        .unwrap();
    }
    emit(&r.out, &csv)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

fn run_render(r: &Resolved, input: &Option<PathBuf>) -> Result<u8, Failure> {
    check_format(r, Format::Svg, "render")?;
    let text = match input {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading dump {}", path.display()))?,
        None => {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
            buf
        }
    };
    let mut paths = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let path = LatticePath::from_json(line)
            .with_context(|| format!("parsing dump line {}", lineno + 1))?;
        paths.push(path);
    }
    emit(&r.out, &svg::render(&paths))?;
    Ok(0)
}
