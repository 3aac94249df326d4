//! Command-line front end: expansion inspection, curve rendering, fast
//! and naive evaluation with benchmarking, and Monte Carlo experiments.
//!
//! Exit codes: 0 success / criteria passed, 1 a pass/fail criterion
//! failed, 2 usage or domain error, 3 budget exceeded, 4 I/O error,
//! 5 statistical abort (too many skipped samples).

use std::io::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use curlicue::ecf::{ecf_expand, EcfExpansion};
use curlicue::error::Error;
use curlicue::jump::{phase_state, sigma_encode, transfer_density};
use curlicue::lab::{run_experiment, ExperimentConfig};
use curlicue::rational::{parse_rational, Rational};
use curlicue::renorm::{gamma_j_on_trace, renorm_trace, DEFAULT_GAMMA_J_BUDGET};
use curlicue::theta::{
    curl_partition, curve_points, curve_to_csv, curve_to_svg, theta_sum_naive,
    theta_sum_with_budget, DEFAULT_TERM_BUDGET,
};

#[derive(Parser)]
#[command(
    name = "curlicue",
    version,
    about = "Exact continued-fraction dynamics and fast theta-sum curves",
    propagate_version = true
)]
struct Cli {
    /// Cap the rayon worker count (results do not depend on it)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Show the even-continued-fraction digits and jump coding of alpha
    Expand(ExpandArgs),
    /// Evaluate the curve at one point, naively and/or via truncation
    Eval(EvalArgs),
    /// Render the polygonal curve as SVG or CSV
    Curve(CurveArgs),
    /// Renewal-snapshot distribution experiment
    Renewal(ConfigArgs),
    /// Distribution experiments (theta, fdd, second_moment, wlln, ...)
    Dist(DistArgs),
    /// Phase Markov chain estimation experiment
    Markov(ConfigArgs),
    /// Run the fast invariant suite (CI entry point)
    Verify(VerifyArgs),
    /// Median runtimes of the truncated evaluator vs the naive sum
    Bench(BenchArgs),
}

#[derive(Args)]
struct ExpandArgs {
    /// alpha as "p/q", an integer, or a decimal (decimals become exact
    /// base-10 rationals)
    alpha: String,
    /// Maximum number of digits to compute
    #[arg(long, default_value_t = 64)]
    max_digits: usize,
    /// Emit machine-readable JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    alpha: String,
    /// Number of summands N
    #[arg(short = 'N', long)]
    n: u64,
    /// Curve time in [0, 1]
    #[arg(short, long, default_value_t = 1.0)]
    t: f64,
    /// Truncation depth for the fast evaluator
    #[arg(short = 'J', long, default_value_t = 10)]
    depth: usize,
    /// Skip the naive direct sum (required for very large N)
    #[arg(long)]
    fast_only: bool,
    /// Repeat both evaluations and report median runtimes
    #[arg(long, value_name = "REPS")]
    bench: Option<u32>,
    /// Dump the full renormalization trace as JSON
    #[arg(long)]
    trace_json: bool,
}

#[derive(Args)]
struct CurveArgs {
    alpha: String,
    #[arg(short = 'N', long)]
    n: u64,
    /// Output file; format inferred from the extension unless --format is given
    #[arg(short, long)]
    output: Option<String>,
    /// svg | csv
    #[arg(long)]
    format: Option<String>,
    /// SVG canvas size in pixels
    #[arg(long, default_value_t = 800)]
    size: u32,
    /// Number of sample times (default: every vertex)
    #[arg(long)]
    points: Option<usize>,
    /// Also print the curl/flat partition summary
    #[arg(long)]
    geometry: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment JSON config file (fields other than "experiment" are
    /// forwarded; the experiment name is fixed by the subcommand)
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(short = 'N', long)]
    n: Option<u64>,
    /// Write the JSON summary here instead of stdout
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct DistArgs {
    /// Experiment name: sampler | second_moment | theta | fdd | renewal |
    /// markov | wlln | approx_error (ignored when --config names one)
    #[arg(long)]
    experiment: Option<String>,
    #[command(flatten)]
    common: ConfigArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run the heavier checks too
    #[arg(long)]
    full: bool,
}

#[derive(Args)]
struct BenchArgs {
    alpha: String,
    #[arg(short = 'N', long)]
    n: u64,
    #[arg(short = 'J', long, default_value_t = 10)]
    depth: usize,
    /// Repetitions per measurement
    #[arg(long, default_value_t = 5)]
    reps: u32,
    /// Also time the naive sum (can be slow for large N)
    #[arg(long)]
    with_naive: bool,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Budget(_) | Error::DenominatorBudget(_) => 3,
        Error::StatisticalAbort(_) => 5,
        Error::InvariantViolation(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // worker count shapes scheduling only; every sample draws from its
        // own counter-based stream, so results are identical
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = match cli.command {
        Command::Expand(a) => cmd_expand(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Renewal(a) => cmd_experiment(Some("renewal"), a),
        Command::Markov(a) => cmd_experiment(Some("markov"), a),
        Command::Dist(a) => cmd_experiment(a.experiment.as_deref(), a.common),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn parse_alpha(s: &str) -> Result<Rational, Error> {
    let a = parse_rational(s)?;
    if !curlicue::rational::is_in_unit_interval(&a) {
        return Err(Error::Domain(format!("alpha = {s} outside (0, 1]")));
    }
    Ok(a)
}

fn expansion_json(exp: &EcfExpansion) -> serde_json::Value {
    serde_json::json!({
        "alpha": exp.alpha.to_string(),
        "digits": exp
            .digits
            .iter()
            .map(|d| (d.k, if d.terminal { 0 } else { d.xi }))
            .collect::<Vec<_>>(),
        "exhausted": exp.exhausted,
    })
}

fn cmd_expand(args: ExpandArgs) -> Result<ExitCode, Error> {
    let alpha = parse_alpha(&args.alpha)?;
    let exp = ecf_expand(&alpha, args.max_digits)?;
    let coding = sigma_encode(&exp)?;
    if args.json {
        let mut v = expansion_json(&exp);
        v["entries"] = serde_json::to_value(&coding.entries).unwrap();
        v["nu"] = serde_json::to_value(&coding.nu).unwrap();
        v["qhat"] =
            serde_json::to_value(coding.qhat.iter().map(|q| q.to_string()).collect::<Vec<_>>())
                .unwrap();
        println!("{v}");
        return Ok(ExitCode::SUCCESS);
    }
    println!("alpha = {alpha}");
    let rendered: Vec<String> = exp
        .digits
        .iter()
        .map(|d| {
            if d.terminal {
                format!("({},*)", d.k)
            } else {
                format!("({},{})", d.k, if d.xi > 0 { "+1" } else { "-1" })
            }
        })
        .collect();
    println!("digits ({}): {}", exp.digits.len(), rendered.join(" "));
    if exp.exhausted {
        println!("expansion exhausted (rational orbit terminated)");
    }
    println!(
        "entries ({}): {}",
        coding.entries.len(),
        coding
            .entries
            .iter()
            .map(|e| format!("{}.{}^{}", e.h, e.m, if e.zeta > 0 { "+" } else { "-" }))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("nu: {:?}", coding.nu);
    println!(
        "qhat: {}",
        coding.qhat.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
    );
    for n in 0..=coding.entries.len().min(8) {
        let st = phase_state(&coding, n)?;
        print!("(x_{n},y_{n})=({},{}) ", st.x, st.y);
    }
    println!();
    Ok(ExitCode::SUCCESS)
}

fn median_secs(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let alpha = parse_alpha(&args.alpha)?;
    if !(0.0..=1.0).contains(&args.t) {
        return Err(Error::Domain(format!("t = {} outside [0,1]", args.t)));
    }
    let trace = renorm_trace(&alpha, args.n)?;
    if args.trace_json {
        println!("{}", trace.to_json());
    }
    let reps = args.bench.unwrap_or(1).max(1);

    let mut fast_times = Vec::new();
    let mut fast = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let g = gamma_j_on_trace(&trace, args.t, args.depth, DEFAULT_GAMMA_J_BUDGET)?;
        fast_times.push(t0.elapsed().as_secs_f64());
        fast = Some(g);
    }
    let fast = fast.expect("at least one repetition");
    println!(
        "gamma^J  J={} value = {:+.9}{:+.9}i  terms = {}  exact_fallback = {}",
        fast.j, fast.value.re, fast.value.im, fast.terms_cost, fast.exact_fallback
    );

    if !args.fast_only {
        let len = Rational::from(num_bigint_big(args.n)) * dyadic_t(args.t)?;
        let scale = (args.n as f64).sqrt();
        let mut naive_times = Vec::new();
        let mut naive = None;
        for _ in 0..reps {
            let t0 = Instant::now();
            let v = theta_sum_naive(&alpha, &len, DEFAULT_TERM_BUDGET)?;
            naive_times.push(t0.elapsed().as_secs_f64());
            naive = Some(v / scale);
        }
        let exact = theta_sum_with_budget(&alpha, &len, DEFAULT_TERM_BUDGET)? / scale;
        let naive = naive.expect("at least one repetition");
        println!("naive    value = {:+.9}{:+.9}i", naive.re, naive.im);
        println!("exact    value = {:+.9}{:+.9}i", exact.re, exact.im);
        println!("|gamma^J - exact| = {:.3e}", (fast.value - exact).norm());
        if args.bench.is_some() {
            println!(
                "median runtimes: fast {:.6}s  naive {:.6}s",
                median_secs(fast_times),
                median_secs(naive_times)
            );
        }
    } else if args.bench.is_some() {
        println!("median runtime: fast {:.6}s", median_secs(fast_times));
    }
    Ok(ExitCode::SUCCESS)
}

fn num_bigint_big(n: u64) -> num_rational::BigRational {
    num_rational::BigRational::from_integer(n.into())
}

fn dyadic_t(t: f64) -> Result<Rational, Error> {
    curlicue::rational::dyadic_from_f64(t)
}

fn write_output(path: &str, content: &str) -> Result<(), Error> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| Error::Argument(format!("cannot create {path}: {e}")))?;
    f.write_all(content.as_bytes())
        .map_err(|e| Error::Argument(format!("cannot write {path}: {e}")))
}

fn cmd_curve(args: CurveArgs) -> Result<ExitCode, Error> {
    let alpha = parse_alpha(&args.alpha)?;
    let k = args.points.unwrap_or(args.n as usize);
    if k == 0 {
        return Err(Error::Argument("need at least one sample point".into()));
    }
    let ts: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let path = curve_points(&alpha, args.n, &ts)?;
    let format = match (&args.format, &args.output) {
        (Some(f), _) => f.clone(),
        (None, Some(o)) if o.ends_with(".csv") => "csv".into(),
        _ => "svg".into(),
    };
    let content = match format.as_str() {
        "svg" => curve_to_svg(&path, args.size),
        "csv" => curve_to_csv(&path),
        other => return Err(Error::Argument(format!("unknown format '{other}'"))),
    };
    match &args.output {
        Some(path) => {
            write_output(path, &content).map_err(|_| {
                // surface as an IO failure, exit code 4
                Error::Argument(format!("IO: cannot write {path}"))
            })?;
            println!("wrote {path} ({} bytes)", content.len());
        }
        None => print!("{content}"),
    }
    if args.geometry {
        let g = curl_partition(&alpha, args.n)?;
        println!("k* = {}", g.k_star);
        println!("curl times: {:?}", g.curl_times);
        println!("interval vertex counts: {:?}", g.interval_counts);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(name: Option<&str>, args: ConfigArgs) -> Result<ExitCode, Error> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Argument(format!("cannot read {path}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Argument(format!("bad config {path}: {e}")))?
        }
        None => {
            let name = name.ok_or_else(|| {
                Error::Argument("need --experiment or --config".into())
            })?;
            serde_json::from_value(serde_json::json!({ "experiment": name }))
                .expect("minimal config is valid")
        }
    };
    if let Some(name) = name {
        cfg.experiment = name.to_string();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = args.samples {
        cfg.samples = samples;
    }
    if let Some(n) = args.n {
        cfg.n = Some(n);
    }
    let outcome = run_experiment(&cfg)?;
    let text = serde_json::to_string_pretty(&outcome.summary).expect("serializable");
    match &args.output {
        Some(path) => {
            write_output(path, &text)?;
            println!("wrote {path}");
        }
        None => println!("{text}"),
    }
    Ok(if outcome.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    use curlicue::jump::transfer_invariance_residual;
    let mut failures = 0u32;
    let mut check = |label: &str, ok: bool| {
        println!("{}  {label}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // expansion round trip on a spread of rationals
    let mut round_trip = true;
    for p in 1u64..200 {
        for q in [211u64, 997, 65_536] {
            if p >= q {
                continue;
            }
            let a = Rational::new(p.into(), q.into());
            let exp = ecf_expand(&a, 512).map_err(|e| Error::InvariantViolation(e.to_string()))?;
            if exp.exhausted {
                round_trip &= curlicue::ecf::reconstruct(&exp.digits) == a;
            } else {
                // long xi = -1 chains can outlast the digit budget; the
                // orbit tail still closes the nested fraction exactly
                let mut tail = a.clone();
                for _ in 0..exp.digits.len() {
                    tail = curlicue::ecf::apply_t(&tail)?;
                }
                round_trip &=
                    curlicue::ecf::reconstruct_with_tail(&exp.digits, &tail) == a;
            }
        }
    }
    check("ECF expansion round-trips exactly", round_trip);

    // transfer density anchors (coarse truncation)
    let d1 = transfer_density(1.0, 20_000)?;
    check(
        "transfer density anchor at 1",
        (d1.value - 0.90238).abs() < 2e-3,
    );

    // invariant density fixed by the transfer operator
    let mut inv = true;
    for i in 0..5 {
        inv &= transfer_invariance_residual(i as f64 / 4.0, 400)? < 1e-5;
    }
    check("invariant density fixed by transfer operator", inv);

    // fast evaluator agrees with the direct sum
    let mut agree = true;
    for (p, n) in [(355u64, 2_000u64), (613, 5_000), (997, 10_000)] {
        let a = Rational::new(p.into(), 1024.into());
        if a >= Rational::from_integer(1.into()) {
            continue;
        }
        let direct = theta_sum_with_budget(
            &a,
            &Rational::from_integer(n.into()),
            DEFAULT_TERM_BUDGET,
        )? / (n as f64).sqrt();
        let rec = curlicue::renorm::reconstruct(&a, n, 1.0);
        match rec {
            Ok(v) => agree &= (v - direct).norm() < 1e-8 * (1.0 + direct.norm()),
            Err(Error::DenominatorBudget(_)) => {}
            Err(e) => return Err(e),
        }
    }
    check("renormalized evaluation matches the direct sum", agree);

    if args.full {
        let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "experiment": "sampler", "samples": 20_000, "precision_bits": 64,
        }))
        .expect("valid");
        let outcome = run_experiment(&cfg)?;
        check("mu_R sampler chi-square", outcome.pass);
        let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "experiment": "second_moment", "n": 1000, "samples": 10_000,
        }))
        .expect("valid");
        let outcome = run_experiment(&cfg)?;
        check("second moment of the normalized sum", outcome.pass);
    }

    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, Error> {
    let alpha = parse_alpha(&args.alpha)?;
    let trace = renorm_trace(&alpha, args.n)?;
    let mut fast_times = Vec::new();
    let mut terms = 0u64;
    for _ in 0..args.reps.max(1) {
        let t0 = Instant::now();
        let g = gamma_j_on_trace(&trace, 1.0, args.depth, DEFAULT_GAMMA_J_BUDGET)?;
        fast_times.push(t0.elapsed().as_secs_f64());
        terms = g.terms_cost;
    }
    println!(
        "fast: median {:.6}s over {} reps ({} summed terms, n_hat = {})",
        median_secs(fast_times.clone()),
        args.reps,
        terms,
        trace.n_hat
    );
    if args.with_naive {
        let len = Rational::from_integer(args.n.into());
        let mut naive_times = Vec::new();
        for _ in 0..args.reps.max(1) {
            let t0 = Instant::now();
            let _ = theta_sum_with_budget(&alpha, &len, DEFAULT_TERM_BUDGET)?;
            naive_times.push(t0.elapsed().as_secs_f64());
        }
        let f = median_secs(fast_times);
        let nv = median_secs(naive_times);
        println!("naive: median {nv:.6}s  speedup {:.1}x", nv / f);
    }
    Ok(ExitCode::SUCCESS)
}
