use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use log::info;

use xstrat::baseline::{iterative_split_observed, random_split_seeded};
use xstrat::ingest::{
    parse_assignment_index, read_dataset, read_provided_split, write_assignment_index,
    write_split_files,
};
use xstrat::metrics::format_pct;
use xstrat::sampler::{write_trace_csv, EpochTrace};
use xstrat::{stratified_split, Dataset, Error, ReportOptions, SamplerConfig, SplitAssignment, SplitReport};

use crate::{CompareArgs, EvaluateArgs, Method, SamplerArgs, SplitArgs, EXIT_TIMEOUT};

enum Outcome {
    Done {
        assignment: SplitAssignment,
        trace: Option<Vec<EpochTrace>>,
        elapsed: Duration,
    },
    DidNotFinish {
        elapsed: Duration,
    },
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            target_test_size: self.test_size,
            epochs: self.epochs,
            threshold_proportion: self.threshold_proportion,
            swap_probability: self.swap_probability,
            decay: self.decay,
            seed: self.seed,
        }
    }

    fn timeout(&self) -> Result<Option<Duration>> {
        match self.timeout_mins {
            None => Ok(None),
            Some(m) if m >= 0.0 && m.is_finite() => Ok(Some(Duration::from_secs_f64(m * 60.0))),
            Some(m) => bail!("--timeout-mins must be a non-negative number, got {m}"),
        }
    }
}

fn run_method(dataset: &Dataset, method: Method, args: &SamplerArgs) -> Result<Outcome> {
    let started = Instant::now();
    let (assignment, trace) = match method {
        Method::Stratified => {
            let split = stratified_split(dataset, &args.config())?;
            (split.assignment, Some(split.trace))
        }
        Method::Random => (
            random_split_seeded(dataset.num_points(), args.test_size, args.seed)?,
            None,
        ),
        Method::Iterative => {
            match iterative_split_observed(dataset, args.test_size, args.seed, args.timeout()?, |_| {}) {
                Ok(a) => (a, None),
                Err(Error::Timeout(_)) => {
                    return Ok(Outcome::DidNotFinish {
                        elapsed: started.elapsed(),
                    })
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let elapsed = started.elapsed();
    info!("{} finished in {elapsed:.2?}", method.name());
    Ok(Outcome::Done {
        assignment,
        trace,
        elapsed,
    })
}

fn load(path: &std::path::Path) -> Result<Dataset> {
    read_dataset(path).with_context(|| format!("reading {}", path.display()))
}

pub fn split(args: SplitArgs) -> Result<ExitCode> {
    if args.out_train.is_some() != args.out_test.is_some() {
        bail!("--out-train and --out-test must be given together");
    }
    if args.trace.is_some() && args.method != Method::Stratified {
        bail!("--trace is only available for the stratified method");
    }
    let dataset = load(&args.input)?;
    let (assignment, trace, elapsed) = match run_method(&dataset, args.method, &args.sampler)? {
        Outcome::Done {
            assignment,
            trace,
            elapsed,
        } => (assignment, trace, elapsed),
        Outcome::DidNotFinish { elapsed } => {
            let report = serde_json::json!({
                "schema_version": xstrat::metrics::REPORT_SCHEMA_VERSION,
                "method": args.method.name(),
                "status": "did not finish",
                "timeout_mins": args.sampler.timeout_mins,
                "wall_secs": elapsed.as_secs_f64(),
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(ExitCode::from(EXIT_TIMEOUT));
        }
    };

    if let (Some(train), Some(test)) = (&args.out_train, &args.out_test) {
        write_split_files(&dataset, &assignment, train, test)
            .with_context(|| format!("writing {} / {}", train.display(), test.display()))?;
    }
    if let Some(path) = &args.out_index {
        fs::write(path, write_assignment_index(&assignment))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let (Some(path), Some(trace)) = (&args.trace, &trace) {
        let mut out = BufWriter::new(File::create(path)?);
        write_trace_csv(trace, &mut out)?;
        out.flush()?;
    }

    let mut report = SplitReport::evaluate(&dataset, &assignment, &ReportOptions::default())?
        .with_method(args.method.name());
    report.wall_secs = Some(elapsed.as_secs_f64());
    println!("{}", report.to_json());
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let (dataset, assignment) = match (&args.index, &args.train, &args.test) {
        (Some(index), None, None) => {
            let Some(input) = &args.input else {
                bail!("--index requires --input");
            };
            let dataset = load(input)?;
            let text = fs::read_to_string(index)
                .with_context(|| format!("reading {}", index.display()))?;
            let assignment = parse_assignment_index(&text, dataset.num_points())
                .with_context(|| format!("parsing {}", index.display()))?;
            (dataset, assignment)
        }
        (None, Some(train), Some(test)) => {
            let (dataset, assignment) = read_provided_split(train, test)
                .with_context(|| format!("reading {} / {}", train.display(), test.display()))?;
            if let Some(input) = &args.input {
                let full = load(input)?;
                if full.num_points() != dataset.num_points() || full.num_labels() != dataset.num_labels() {
                    bail!(
                        "inconsistent files: {} holds {} points / {} labels, train + test hold {} / {}",
                        input.display(),
                        full.num_points(),
                        full.num_labels(),
                        dataset.num_points(),
                        dataset.num_labels()
                    );
                }
            }
            (dataset, assignment)
        }
        _ => bail!("give either --input with --index, or --train with --test"),
    };
    let report = SplitReport::evaluate(&dataset, &assignment, &ReportOptions::default())?;
    if let Some(path) = &args.hist_csv {
        let mut out = BufWriter::new(File::create(path)?);
        report.histogram.write_csv(&mut out)?;
        out.flush()?;
    }
    println!("{}", report.to_json());
    Ok(ExitCode::SUCCESS)
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let dataset = load(&args.input)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "method,kl,missing_test_pct,achieved_test_size,wall_mins")?;
    for &method in &args.methods {
        match run_method(&dataset, method, &args.sampler)? {
            Outcome::Done {
                assignment,
                elapsed,
                ..
            } => {
                let report = SplitReport::evaluate(&dataset, &assignment, &ReportOptions::default())?;
                writeln!(
                    out,
                    "{},{:.6},{},{:.6},{:.4}",
                    method.name(),
                    report.kl_divergence,
                    format_pct(report.missing_from_test),
                    report.achieved_test_size,
                    elapsed.as_secs_f64() / 60.0
                )?;
            }
            Outcome::DidNotFinish { .. } => {
                eprintln!("{}: did not finish", method.name());
                writeln!(out, "{},-,-,-,-", method.name())?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
