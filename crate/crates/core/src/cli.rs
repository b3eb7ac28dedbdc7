//! Command-line front end: `evolens -r <language> <repo>`.
//!
//! Exit codes: 0 when at least one repository was analyzed and its reports
//! written, 1 when every repository failed, 2 on usage errors. Progress and
//! warnings go to stderr; stdout only lists the written report paths.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Mutex;

use chrono::{Datelike, NaiveDate, Utc};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use rayon::prelude::*;

use crate::builtin;
use crate::cst::Language;
use crate::engine::{self, AnalysisConfig, EvolutionTable};
use crate::repo::{self, RepoInput};
use crate::report::{self, ChartAsset, ReportFormats};
use crate::sampler::{DateUnit, SamplingWindow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "evolens",
    version,
    about = "Chart how the code of a Git repository evolves over time"
)]
pub struct CliArgs {
    /// Language whose files are analyzed
    #[arg(short = 'r', long = "report", value_enum, value_name = "LANGUAGE")]
    pub report_type: Language,

    /// Git URL, local repository, or a directory containing repositories
    pub repo: String,

    /// Sample the first day of every month instead of every year
    #[arg(long)]
    pub monthly: bool,

    /// First year to analyze (default: four years before --to)
    #[arg(long = "from", value_name = "YEAR")]
    pub from_year: Option<i32>,

    /// Last year to analyze (default: the current year)
    #[arg(long = "to", value_name = "YEAR")]
    pub to_year: Option<i32>,

    /// Directory the reports are written to
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,

    /// Only write CSV reports
    #[arg(long, conflicts_with = "html_only")]
    pub csv_only: bool,

    /// Only write HTML reports
    #[arg(long)]
    pub html_only: bool,

    /// Log skipped files and metric errors
    #[arg(short, long)]
    pub verbose: bool,

    /// Repositories analyzed in parallel (default: number of CPUs)
    #[arg(short, long, value_name = "N")]
    pub jobs: Option<usize>,
}

impl CliArgs {
    pub fn date_unit(&self) -> DateUnit {
        if self.monthly {
            DateUnit::Month
        } else {
            DateUnit::Year
        }
    }

    pub fn formats(&self) -> ReportFormats {
        ReportFormats {
            csv: !self.html_only,
            html: !self.csv_only,
        }
    }

    /// Explicit window from `--from`/`--to`; `None` when neither is given.
    pub fn window(&self, today: NaiveDate) -> Result<Option<SamplingWindow>, String> {
        let (start, end) = match (self.from_year, self.to_year) {
            (None, None) => return Ok(None),
            (Some(from), Some(to)) => (from, to),
            (Some(from), None) => (from, today.year().max(from)),
            (None, Some(to)) => (to - 4, to),
        };
        if start > end {
            return Err(format!("--from {start} is after --to {end}"));
        }
        SamplingWindow::new(start, end)
            .map(Some)
            .map_err(|_| format!("years must have four digits (got {start}..{end})"))
    }
}

/// Parses and validates arguments. Help and version requests also come back
/// as errors, as with clap; `err.exit_code()` tells them apart.
pub fn parse_args<I, T>(argv: I) -> Result<CliArgs, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = CliArgs::try_parse_from(argv)?;
    if let Err(msg) = args.window(Utc::now().date_naive()) {
        return Err(CliArgs::command().error(ErrorKind::ValueValidation, msg));
    }
    Ok(args)
}

fn analyze(
    args: &CliArgs,
    handle: &repo::RepositoryHandle,
    window: Option<SamplingWindow>,
    today: NaiveDate,
) -> Result<EvolutionTable, String> {
    let registry = builtin::builtin_set(args.report_type)
        .into_registry()
        .map_err(|e| e.to_string())?;
    let mut config = AnalysisConfig::new(
        RepoInput::new(args.repo.clone()),
        args.report_type,
        args.date_unit(),
    );
    config.window = window;
    config.output_dir = args.output.clone();
    engine::evaluate_with_progress(&config, &registry, handle, today, &mut |p| {
        eprintln!(
            "[{}] {}/{} {} {}",
            p.repo,
            p.done,
            p.total,
            p.sample.boundary,
            &p.sample.commit.hash[..p.sample.commit.hash.len().min(10)]
        );
    })
    .map_err(|e| e.to_string())
}

/// Runs the whole pipeline for parsed arguments and returns the exit code.
pub fn run(args: &CliArgs) -> i32 {
    let today = Utc::now().date_naive();
    let window = match args.window(today) {
        Ok(w) => w,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };

    let resolved = match repo::resolve_sources(
        &RepoInput::new(args.repo.clone()),
        &repo::default_workspace(),
    ) {
        Ok(resolved) => resolved,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_FAILURE;
        }
    };
    for skipped in &resolved.skipped {
        eprintln!(
            "warning: skipping {}: {}",
            skipped.path.display(),
            skipped.reason
        );
    }
    if resolved.handles.is_empty() {
        eprintln!("error: no repository could be opened");
        return EXIT_FAILURE;
    }

    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_FAILURE;
        }
    };
    let failures = Mutex::new(Vec::new());
    let results: Vec<Option<EvolutionTable>> = pool.install(|| {
        resolved
            .handles
            .par_iter()
            .map(|handle| match analyze(args, handle, window, today) {
                Ok(table) => Some(table),
                Err(err) => {
                    eprintln!("warning: skipping {}: {err}", handle.name);
                    failures
                        .lock()
                        .expect("failure list")
                        .push(handle.name.clone());
                    None
                }
            })
            .collect()
    });
    let generated_at = Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let tables: Vec<EvolutionTable> = results
        .into_iter()
        .flatten()
        .map(|mut t| {
            t.metadata.generated_at = Some(generated_at.clone());
            t
        })
        .collect();
    if tables.is_empty() {
        eprintln!("error: analysis failed for every repository");
        return EXIT_FAILURE;
    }

    match report::write_reports(
        &tables,
        &args.output,
        args.formats(),
        &ChartAsset::bundled(),
    ) {
        Ok(paths) => {
            for path in paths {
                println!("{}", path.display());
            }
            EXIT_OK
        }
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_FAILURE
        }
    }
}

/// Entry point used by the binary: parse, set up logging, run.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match parse_args(argv) {
        Ok(args) => args,
        Err(err) => {
            let code = err.exit_code();
            let _ = err.print();
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let level = if args.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    run(&args)
}
