//! Command-line front end: argument parsing, subcommand dispatch, and
//! report emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{parse_csv, ParsedData, RunManifest, TestReport};
use crate::nulldist::{
    exact_null_cdf, limiting_critical_value, mc_null_cdf, NullDistribution, RefinedSpec,
};
use crate::runner::{run_multi_target, run_rdd, CvMethod, QMode, TestConfig};
use crate::simbench::{run_monte_carlo, DesignCase, DesignSpec, SimOptions};
use crate::stats::StatisticKind;
use crate::tuning::{estimate_moments, rule_of_thumb_q};

/// Environment variable consulted for the default seed.
pub const SEED_ENV: &str = "CSDTEST_SEED";

const DEFAULT_MC_DRAWS: u64 = 1_000_000;
/// Exact critical values are the default up to this pooled size.
const EXACT_Q_DEFAULT_LIMIT: usize = 500;

#[derive(Parser)]
#[command(
    name = "csdtest",
    version,
    about = "Conditional stochastic dominance tests at target covariate points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Ks,
    Cvm,
    Ad,
}

impl From<StatArg> for StatisticKind {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Ks => StatisticKind::Ks,
            StatArg::Cvm => StatisticKind::Cvm,
            StatArg::Ad => StatisticKind::Ad,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the result here instead of stdout (a `.manifest.json`
    /// reproducibility record is written alongside).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dominance test on a CSV data file.
    Test {
        /// Data file: `group,w,z` rows, or `w,z` with --cutoff.
        data: PathBuf,
        /// Significance level.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Target covariate point (repeatable). Defaults to the cutoff in
        /// RDD mode.
        #[arg(long = "target")]
        targets: Vec<f64>,
        #[arg(long, value_enum, default_value = "ks")]
        statistic: StatArg,
        /// Effective sample size for the Y side (with --qx overrides the
        /// data-dependent rule at every target).
        #[arg(long, requires = "qx")]
        qy: Option<usize>,
        #[arg(long, requires = "qy")]
        qx: Option<usize>,
        /// Critical value engine. Default: exact up to pooled size 500,
        /// Monte Carlo beyond.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Monte Carlo draws for the critical value.
        #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
        mc_draws: u64,
        /// Root seed for Monte Carlo critical values (default from
        /// CSDTEST_SEED, else 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Use the refined critical value for outcomes with at most R
        /// support points; R from the data when omitted.
        #[arg(long, num_args = 0..=1, default_missing_value = "0")]
        refined: Option<usize>,
        /// Sharp RDD cutoff; requires a pooled `w,z` file.
        #[arg(long)]
        cutoff: Option<f64>,
        /// Clamp bounds for the automatic effective-sample rule.
        #[arg(long, default_value_t = 2)]
        q_min: usize,
        #[arg(long)]
        q_max: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Report the data-dependent effective sample sizes and the moments
    /// behind them.
    Tune {
        data: PathBuf,
        #[arg(long = "target")]
        targets: Vec<f64>,
        /// Sharp RDD cutoff for pooled files.
        #[arg(long)]
        cutoff: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Critical value for one size pair.
    Cv {
        #[arg(long)]
        qy: usize,
        #[arg(long)]
        qx: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
        draws: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Also compute the refined critical value for support size R.
        #[arg(long)]
        refined: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Critical-value table as CSV over size and level grids.
    Nulltable {
        /// Comma-separated list of Y-side sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        qy: Vec<usize>,
        /// Comma-separated list of X-side sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        qx: Vec<usize>,
        /// Comma-separated list of levels.
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        alpha: Vec<f64>,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_MC_DRAWS)]
        draws: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo size/power study on a built-in design.
    Simulate {
        #[arg(long)]
        design: u8,
        #[arg(long = "case", value_parser = DesignCase::parse)]
        case: DesignCase,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "ks")]
        statistic: StatArg,
        /// Use the refined critical value (designs 6 and 7).
        #[arg(long)]
        refined: bool,
        /// Fixed effective sample sizes instead of the automatic rule.
        #[arg(long, requires = "qx")]
        qy: Option<usize>,
        #[arg(long, requires = "qy")]
        qx: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn env_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Parses arguments and runs the chosen subcommand.
/// Exit codes: 0 success, 1 computation error, 2 usage error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn emit(
    content: &str,
    output: &OutputArgs,
    argv: &[String],
    config: serde_json::Value,
    input: Option<&Path>,
) -> Result<()> {
    match &output.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
        Some(path) => {
            let mut data = content.as_bytes().to_vec();
            if !content.ends_with('\n') {
                data.push(b'\n');
            }
            std::fs::write(path, data)?;
            RunManifest::new(argv.to_vec(), config, input, path)?.write_alongside(path)
        }
    }
}

fn resolve_cv_method(
    method: Option<MethodArg>,
    draws: u64,
    seed: u64,
    pooled_hint: usize,
) -> CvMethod {
    match method {
        Some(MethodArg::Exact) => CvMethod::ExactDp,
        Some(MethodArg::Mc) => CvMethod::MonteCarlo { draws, seed },
        None if pooled_hint <= EXACT_Q_DEFAULT_LIMIT => CvMethod::ExactDp,
        None => CvMethod::MonteCarlo { draws, seed },
    }
}

fn run_command(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Test {
            data,
            alpha,
            targets,
            statistic,
            qy,
            qx,
            method,
            mc_draws,
            seed,
            refined,
            cutoff,
            q_min,
            q_max,
            output,
        } => {
            let parsed = parse_csv(&data)?;
            let seed = seed.unwrap_or_else(env_seed);
            let targets = if targets.is_empty() {
                match cutoff {
                    Some(c) => vec![c],
                    None => {
                        return Err(Error::InvalidParameter(
                            "give at least one --target (or --cutoff in RDD mode)".into(),
                        ))
                    }
                }
            } else {
                targets
            };

            let mut config = TestConfig::new(alpha, targets.clone())?;
            config.statistic = statistic.into();
            config.q_min = q_min;
            config.q_max = q_max;
            config.rdd_cutoff = cutoff;
            if let (Some(qy), Some(qx)) = (qy, qx) {
                config.q_mode = QMode::Manual(vec![(qy, qx); targets.len()]);
            }
            let pooled_hint = match (qy, qx) {
                (Some(a), Some(b)) => a + b,
                _ => 0, // unknown until tuning; stay with the exact default
            };
            config.cv_method = resolve_cv_method(method, mc_draws, seed, pooled_hint);

            if let Some(r) = refined {
                let r = if r == 0 {
                    estimate_support_r(&parsed, cutoff)?
                } else {
                    r
                };
                config.refined = Some(RefinedSpec::new(r));
            }

            let outcome = match (&parsed, cutoff) {
                (ParsedData::TwoSample { ysample, xsample }, None) => {
                    run_multi_target(ysample, xsample, &config)?
                }
                (ParsedData::TwoSample { .. }, Some(_)) => {
                    return Err(Error::InvalidParameter(
                        "--cutoff applies to pooled `w,z` files without a group column"
                            .into(),
                    ))
                }
                (ParsedData::Pooled { sample }, Some(c)) => {
                    if targets == vec![c] {
                        run_rdd(sample, &config)?
                    } else {
                        // explicit targets with an RDD split
                        let (ysample, xsample) = crate::induced::rdd_split(sample, c)?;
                        run_multi_target(&ysample, &xsample, &config)?
                    }
                }
                (ParsedData::Pooled { .. }, None) => {
                    return Err(Error::InvalidParameter(
                        "pooled `w,z` files need --cutoff".into(),
                    ))
                }
            };

            let report = TestReport::new(config.clone(), outcome);
            let cfg_json = serde_json::to_value(&config)?;
            emit(&report.to_json()?, &output, argv, cfg_json, Some(&data))
        }

        Command::Tune { data, targets, cutoff, output } => {
            let parsed = parse_csv(&data)?;
            let (ysample, xsample) = match (&parsed, cutoff) {
                (ParsedData::TwoSample { ysample, xsample }, None) => {
                    (ysample.clone(), xsample.clone())
                }
                (ParsedData::Pooled { sample }, Some(c)) => {
                    crate::induced::rdd_split(sample, c)?
                }
                (ParsedData::Pooled { .. }, None) => {
                    return Err(Error::InvalidParameter(
                        "pooled `w,z` files need --cutoff".into(),
                    ))
                }
                (ParsedData::TwoSample { .. }, Some(_)) => {
                    return Err(Error::InvalidParameter(
                        "--cutoff applies to pooled files only".into(),
                    ))
                }
            };
            let targets = if targets.is_empty() {
                match cutoff {
                    Some(c) => vec![c],
                    None => {
                        return Err(Error::InvalidParameter(
                            "give at least one --target".into(),
                        ))
                    }
                }
            } else {
                targets
            };
            let my = estimate_moments(&ysample)?;
            let mx = estimate_moments(&xsample)?;
            let per_target: Vec<serde_json::Value> = targets
                .iter()
                .map(|&z0| -> Result<serde_json::Value> {
                    Ok(json!({
                        "target": z0,
                        "q_y": rule_of_thumb_q(&my, z0)?,
                        "q_x": rule_of_thumb_q(&mx, z0)?,
                    }))
                })
                .collect::<Result<_>>()?;
            let out = json!({
                "y_moments": my,
                "x_moments": mx,
                "per_target": per_target,
            });
            let cfg = json!({"targets": targets, "cutoff": cutoff});
            emit(
                &serde_json::to_string_pretty(&out)?,
                &output,
                argv,
                cfg,
                Some(&data),
            )
        }

        Command::Cv { qy, qx, alpha, method, draws, seed, refined, output } => {
            let seed = seed.unwrap_or_else(env_seed);
            let nd = build_null(qy, qx, method, draws, seed)?;
            let c = nd.critical_value(alpha)?;
            let scaled = ((qy * qx) as f64 / (qy + qx) as f64).sqrt() * c;
            let refined_value = match refined {
                Some(r) => Some(crate::nulldist::refined_critical_value(
                    qy,
                    qx,
                    alpha,
                    &RefinedSpec::new(r),
                )?),
                None => None,
            };
            let out = json!({
                "q_y": qy,
                "q_x": qx,
                "alpha": alpha,
                "method": nd.method.to_string(),
                "critical_value": c,
                "scaled_critical_value": scaled,
                "achieved_level": nd.achieved_level(alpha)?,
                "limiting_critical_value": limiting_critical_value(alpha)?,
                "refined": refined_value,
            });
            let cfg = json!({"q_y": qy, "q_x": qx, "alpha": alpha, "seed": seed});
            emit(&serde_json::to_string_pretty(&out)?, &output, argv, cfg, None)
        }

        Command::Nulltable { qy, qx, alpha, method, draws, seed, output } => {
            let seed = seed.unwrap_or_else(env_seed);
            let mut table = String::from("q_y,q_x,alpha,c,achieved_level,method\n");
            for &a in &alpha {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha must lie in (0, 1), got {a}"
                    )));
                }
            }
            for &y in &qy {
                for &x in &qx {
                    let nd = build_null(y, x, method, draws, seed)?;
                    for &a in &alpha {
                        table.push_str(&format!(
                            "{y},{x},{a},{},{},{}\n",
                            nd.critical_value(a)?,
                            nd.achieved_level(a)?,
                            nd.method
                        ));
                    }
                }
            }
            let cfg = json!({"q_y": qy, "q_x": qx, "alpha": alpha, "seed": seed});
            emit(&table, &output, argv, cfg, None)
        }

        Command::Simulate {
            design,
            case,
            n,
            reps,
            alpha,
            seed,
            statistic,
            refined,
            qy,
            qx,
            output,
        } => {
            let seed = seed.unwrap_or_else(env_seed);
            let spec = DesignSpec::new(design, case, n)?;
            let mut opts = SimOptions::new(alpha, reps, seed);
            opts.statistic = statistic.into();
            opts.refined = refined;
            if let (Some(a), Some(b)) = (qy, qx) {
                opts.q_override = Some((a, b));
            }
            let result = run_monte_carlo(&spec, &opts)?;
            let mut csv = String::from(
                "design,case,n,alpha,reps,rejection_rate,se,mean_qy,mean_qx,seed\n",
            );
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                result.design,
                result.case,
                result.n,
                result.alpha,
                result.reps,
                result.rejection_rate,
                result.se,
                result.mean_q_y,
                result.mean_q_x,
                result.seed
            ));
            let cfg = serde_json::to_value(&opts)?;
            emit(&csv, &output, argv, cfg, None)
        }
    }
}

fn build_null(
    q_y: usize,
    q_x: usize,
    method: MethodArg,
    draws: u64,
    seed: u64,
) -> Result<NullDistribution> {
    match method {
        MethodArg::Exact => exact_null_cdf(q_y, q_x),
        MethodArg::Mc => mc_null_cdf(q_y, q_x, draws, seed),
    }
}

/// Smallest observed distinct-value count across the two sides, used when
/// `--refined` is given without an explicit support size.
fn estimate_support_r(parsed: &ParsedData, cutoff: Option<f64>) -> Result<usize> {
    let (ysample, xsample) = match (parsed, cutoff) {
        (ParsedData::TwoSample { ysample, xsample }, _) => {
            (ysample.clone(), xsample.clone())
        }
        (ParsedData::Pooled { sample }, Some(c)) => crate::induced::rdd_split(sample, c)?,
        (ParsedData::Pooled { .. }, None) => {
            return Err(Error::InvalidParameter(
                "pooled `w,z` files need --cutoff".into(),
            ))
        }
    };
    let distinct = |s: &[crate::induced::ObservationPair]| {
        let mut v: Vec<f64> = s.iter().map(|o| o.w).collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        v.dedup();
        v.len()
    };
    Ok(distinct(&ysample).min(distinct(&xsample)).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_error_exits_2() {
        assert_eq!(dispatch(["csdtest", "bogus-subcommand"]), 2);
        assert_eq!(dispatch(["csdtest", "cv"]), 2); // missing required flags
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(dispatch(["csdtest", "--help"]), 0);
    }

    #[test]
    fn computation_error_exits_1() {
        // q too large for the exact engine
        assert_eq!(
            dispatch(["csdtest", "cv", "--qy", "5000", "--qx", "5000", "--alpha", "0.05"]),
            1
        );
    }
}
