//! Command-line front end: compute constants, evaluate any object, run named
//! verification suites over parameter matrices, draw samples, and emit
//! plot-ready CSV.
//!
//! Exit codes: 0 all checks passed (or evaluation succeeded), 1 at least one
//! check failed, 2 execution error (unknown suite, invalid spec, oracle
//! non-convergence).

use clap::{Args, Parser, Subcommand};
use expconv_core::aux::{g_n_exact_1d, Recursions};
use expconv_core::config::SuiteConfig;
use expconv_core::density::{DensitySpec, Variant};
use expconv_core::oracle::Oracle;
use expconv_core::poisson::{
    fit_regime_envelopes, nstar_bounds, p_lambda, p_lambda_bounds_regimes, p_lambda_bounds_wright,
    p_lambda_small_x_bounds,
};
use expconv_core::records::{summarize, write_records_csv};
use expconv_core::sampler::sample_compound_poisson;
use expconv_core::suites::{run_suite, Session, SUITE_NAMES};
use expconv_core::wright::wright_phi;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "expconv",
    version,
    about = "n-fold convolutions and compound Poisson densities for exponential radial densities, with a machine-checked inequality suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// dimension d >= 1
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// exponential rate m > 0
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// polynomial exponent gamma >= 0
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// profile: pure | cutoff
    #[arg(long, default_value = "pure")]
    variant: String,
}

impl SpecArgs {
    fn build(&self) -> expconv_core::Result<DensitySpec> {
        let variant: Variant = self.variant.parse()?;
        DensitySpec::new(self.d, self.m, self.gamma, variant)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the explicit constants bundle for a density
    Constants {
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Evaluate one object (f, l1, constants, fnstar, hn, gn, Hn, Gn, gn1d, wright, plambda, bounds)
    Eval {
        /// object name
        object: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        /// emit the full radial table as CSV instead of one value
        #[arg(long)]
        table: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named verification suite over a parameter matrix
    Verify {
        /// suite name or `all`
        #[arg(long, default_value = "all")]
        suite: String,
        /// flat JSON config; CLI flags override file values
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        /// write the full record CSV here
        #[arg(long)]
        out: Option<PathBuf>,
        /// also print failing records to stderr
        #[arg(long)]
        verbose: bool,
    },
    /// Draw compound Poisson samples and emit the batch CSV
    Sample {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 10000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit `x, oracle, lower, upper` columns for a bound-sandwich figure
    PlotData {
        /// sandwich-plambda | nstar
        kind: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 60.0)]
        xmax: f64,
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List available suites
    Suites,
}

fn out_writer(path: &Option<PathBuf>) -> expconv_core::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn print_constants(spec: &DensitySpec) -> expconv_core::Result<()> {
    let b = expconv_core::constants::compute_constants(spec)?;
    println!("spec: {spec}  (in_main_range: {})", spec.in_main_range());
    println!("l1_norm  = {:.12e}", b.l1_norm);
    println!("C1 = C2  = {:.12e}", b.c1);
    println!("C3       = {:.12e}", b.c3);
    println!("M1       = {:.12e}", b.m1);
    println!("M2       = {:.12e}", b.m2);
    println!("M3       = {:.12e}", b.m3);
    println!("M4       = {:.12e}", b.m4);
    println!("r0       = {:.12e}", b.r0);
    println!("C(r0)    = {:.12e}   (ln = {:.6})", b.c_r0, b.ln_c_r0);
    println!("D1       = {:.12e}   (ln = {:.6})", b.d1, b.ln_d1);
    println!("D2       = {:.12e}", b.d2);
    println!("rho1     = {:.12e}", b.rho1);
    println!("rho2     = {:.12e}", b.rho2);
    println!("kappa1   = {:.12e}   (ln = {:.6})", b.kappa1, b.ln_kappa1);
    println!("kappa2   = {:.12e}", b.kappa2);
    Ok(())
}

fn need<T: Copy>(v: Option<T>, what: &str) -> expconv_core::Result<T> {
    v.ok_or_else(|| expconv_core::Error::InvalidArgument(format!("missing --{what}")))
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    object: &str,
    spec_args: &SpecArgs,
    n: Option<u32>,
    x: Option<f64>,
    lambda: Option<f64>,
    rho: Option<f64>,
    beta: Option<f64>,
    t: Option<f64>,
    table: bool,
    out: &Option<PathBuf>,
) -> expconv_core::Result<()> {
    match object {
        "f" => {
            let spec = spec_args.build()?;
            println!("{:.12e}", spec.density_f(need(x, "x")?));
        }
        "l1" => {
            let spec = spec_args.build()?;
            println!("{:.12e}", spec.l1_norm()?);
        }
        "constants" => {
            print_constants(&spec_args.build()?)?;
        }
        "fnstar" => {
            let spec = spec_args.build()?;
            let oracle = Oracle::new(spec)?;
            let n = need(n, "n")?;
            if table {
                let tab = oracle.conv_table(n)?;
                let mut w = out_writer(out)?;
                tab.write_csv(&mut w)?;
            } else {
                let x = need(x, "x")?;
                println!("{:.12e}", oracle.conv_at(n, x)?);
            }
        }
        "hn" | "gn" => {
            let spec = spec_args.build()?;
            let oracle = Oracle::new(spec)?;
            let n = need(n, "n")?;
            if table {
                let tab = if object == "hn" {
                    oracle.h_table(n)?
                } else {
                    oracle.g_table(n)?
                };
                let mut w = out_writer(out)?;
                tab.write_csv(&mut w)?;
            } else {
                let x = need(x, "x")?;
                let v = if object == "hn" {
                    oracle.h_n(n, x)?
                } else {
                    oracle.g_n(n, x)?
                };
                println!("{v:.12e}");
            }
        }
        "Hn" | "Gn" => {
            let spec = spec_args.build()?;
            let rec = Recursions::new(spec)?;
            let n = need(n, "n")?;
            if table {
                let tab = if object == "Hn" { rec.h_table(n)? } else { rec.g_table(n)? };
                let mut w = out_writer(out)?;
                tab.write_csv(&mut w)?;
            } else {
                let x = need(x, "x")?;
                let v = if object == "Hn" { rec.big_h(n, x)? } else { rec.big_g(n, x)? };
                println!("{v:.12e}");
            }
        }
        "gn1d" => {
            println!(
                "{:.12e}",
                g_n_exact_1d(spec_args.gamma, need(n, "n")?, need(x, "x")?)?
            );
        }
        "wright" => {
            let e = wright_phi(need(rho, "rho")?, beta.unwrap_or(0.0), need(t, "t")?)?;
            println!(
                "{:.12e}   regime={:?}  ln={:.12e}  err_estimate={:.3e}",
                e.value, e.regime, e.log_value, e.err_estimate
            );
        }
        "plambda" => {
            let spec = spec_args.build()?;
            let oracle = Oracle::new(spec)?;
            let p = p_lambda(&oracle, need(lambda, "lambda")?, need(x, "x")?, 1e-9)?;
            println!(
                "{:.12e}   ln={:.12e}  n_terms={}  truncation_rel={:.3e} ({:?})",
                p.value, p.log_value, p.n_terms, p.truncation_rel, p.certificate
            );
        }
        "bounds" => {
            let spec = spec_args.build()?;
            let oracle = Oracle::new(spec)?;
            let lambda = need(lambda, "lambda")?;
            let x = need(x, "x")?;
            if let Some(n) = n {
                let sw = nstar_bounds(&oracle.bundle, n, x)?;
                println!(
                    "nstar n={n}: lower={:.6e} upper={:.6e} (ln {:.6} .. {:.6})",
                    sw.lower(),
                    sw.upper(),
                    sw.ln_lower,
                    sw.ln_upper
                );
            }
            if x >= 1.0 {
                let sw = p_lambda_bounds_wright(&oracle.bundle, lambda, x)?;
                println!(
                    "plambda wright: lower={:.6e} upper={:.6e} (ln {:.6} .. {:.6})",
                    sw.lower(),
                    sw.upper(),
                    sw.ln_lower,
                    sw.ln_upper
                );
                let env = fit_regime_envelopes(&oracle.bundle)?;
                let (regime, sw) = p_lambda_bounds_regimes(&oracle.bundle, &env, lambda, x)?;
                println!(
                    "plambda {regime} regime: lower={:.6e} upper={:.6e} (ln {:.6} .. {:.6})",
                    sw.lower(),
                    sw.upper(),
                    sw.ln_lower,
                    sw.ln_upper
                );
            } else {
                let sw = p_lambda_small_x_bounds(&oracle.bundle, lambda, x)?;
                println!(
                    "plambda small-x: lower={:.6e} upper={:.6e} (ln {:.6} .. {:.6})",
                    sw.lower(),
                    sw.upper(),
                    sw.ln_lower,
                    sw.ln_upper
                );
            }
        }
        other => {
            return Err(expconv_core::Error::InvalidArgument(format!(
                "unknown eval object '{other}'"
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_verify(
    suite: &str,
    config: &Option<PathBuf>,
    d: Option<u32>,
    m: Option<f64>,
    gamma: Option<f64>,
    variant: &Option<String>,
    lambda: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
    n: Option<Vec<u32>>,
    out: &Option<PathBuf>,
    verbose: bool,
) -> expconv_core::Result<bool> {
    let mut cfg = match config {
        Some(p) => SuiteConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => SuiteConfig::default(),
    };
    // flags override file values
    if let Some(d) = d {
        cfg.d = Some(vec![d]);
    }
    if let Some(m) = m {
        cfg.m = Some(vec![m]);
    }
    if let Some(g) = gamma {
        cfg.gamma = Some(vec![g]);
    }
    if let Some(v) = variant {
        cfg.variant = Some(v.clone());
    }
    if lambda.is_some() {
        cfg.lambda = lambda;
    }
    if x.is_some() {
        cfg.x = x;
    }
    if n.is_some() {
        cfg.n = n;
    }
    let suite_name = match (&cfg.suite, suite) {
        (Some(from_file), "all") => from_file.clone(),
        _ => suite.to_string(),
    };
    let (matrix, tol) = cfg.resolve()?;
    let session = Session::new(matrix, tol);
    let records = run_suite(&session, &suite_name)?;
    let summary = summarize(&records);
    if let Some(p) = out {
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_records_csv(&mut w, &records)?;
    }
    if verbose {
        for r in records.iter().filter(|r| !r.pass) {
            eprintln!(
                "FAIL {} d={} m={} gamma={} n={:?} lambda={:?} x={:?}: lhs={:.9e} rhs={:.9e}",
                r.check_id, r.d, r.m, r.gamma, r.n, r.lambda, r.x, r.lhs, r.rhs
            );
        }
    }
    println!(
        "suite {suite_name}: total {} / pass {} / fail {}",
        summary.total, summary.passed, summary.failed
    );
    Ok(summary.failed == 0)
}

fn dispatch(cli: Cli) -> expconv_core::Result<bool> {
    match cli.command {
        Command::Constants { spec } => {
            print_constants(&spec.build()?)?;
            Ok(true)
        }
        Command::Eval {
            object,
            spec,
            n,
            x,
            lambda,
            rho,
            beta,
            t,
            table,
            out,
        } => {
            run_eval(&object, &spec, n, x, lambda, rho, beta, t, table, &out)?;
            Ok(true)
        }
        Command::Verify {
            suite,
            config,
            d,
            m,
            gamma,
            variant,
            lambda,
            x,
            n,
            out,
            verbose,
        } => run_verify(&suite, &config, d, m, gamma, &variant, lambda, x, n, &out, verbose),
        Command::Sample {
            spec,
            lambda,
            count,
            seed,
            out,
        } => {
            let spec = spec.build()?;
            let batch = sample_compound_poisson(&spec, lambda, count, seed)?;
            let mut w = out_writer(&out)?;
            batch.write_csv(&mut w)?;
            Ok(true)
        }
        Command::PlotData {
            kind,
            spec,
            lambda,
            n,
            xmax,
            points,
            out,
        } => {
            let spec = spec.build()?;
            let oracle = Oracle::new(spec)?;
            let mut w = out_writer(&out)?;
            writeln!(w, "x,oracle,lower,upper")?;
            if xmax >= 1.0 && points > 0 {
                let step = (xmax - 1.0) / points as f64;
                match kind.as_str() {
                    "sandwich-plambda" => {
                        let lambda = need(lambda, "lambda")?;
                        for i in 0..=points {
                            let x = 1.0 + step * i as f64;
                            let p = p_lambda(&oracle, lambda, x, 1e-9)?;
                            let sw = p_lambda_bounds_wright(&oracle.bundle, lambda, x)?;
                            writeln!(
                                w,
                                "{:.16e},{:.16e},{:.16e},{:.16e}",
                                x,
                                p.value,
                                sw.lower(),
                                sw.upper()
                            )?;
                        }
                    }
                    "nstar" => {
                        let n = need(n, "n")?;
                        for i in 0..=points {
                            let x = 1.0 + step * i as f64;
                            let v = oracle.conv_at(n, x)?;
                            let sw = nstar_bounds(&oracle.bundle, n, x)?;
                            writeln!(
                                w,
                                "{:.16e},{:.16e},{:.16e},{:.16e}",
                                x,
                                v,
                                sw.lower(),
                                sw.upper()
                            )?;
                        }
                    }
                    other => {
                        return Err(expconv_core::Error::InvalidArgument(format!(
                            "unknown plot kind '{other}'"
                        )));
                    }
                }
            }
            Ok(true)
        }
        Command::Suites => {
            for s in SUITE_NAMES {
                println!("{s}");
            }
            println!("all");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // EXPCONV_THREADS caps the worker pool
    if let Ok(v) = std::env::var("EXPCONV_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
