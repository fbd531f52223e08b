//! `normtorus`: enumerate abelian fields of bounded discriminant, classify
//! weak approximation and the Hasse norm principle on their norm-one tori,
//! run the oracle suites, and evaluate the leading constants.

mod bound;
mod store;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use normtorus::constants::{
    c233_constants, mammo_closed_form, multicyclic_total_constant, multicyclic_wa_constant,
    ConstantReport,
};
use normtorus::group::{alpha, alpha_total, FiniteAbelianGroup};
use normtorus::reduction::{
    all_subspaces, lemma_cases, verify_block_lemma, LemmaReport, LEMMA_BOUND,
};
use normtorus::splitting::{
    noncyclic_inertia_at_2, tally_records, FieldRecord, Tally, Verdict, CSV_HEADER,
    NORMALIZATION_VERSION,
};
use normtorus::tuple::{big_log, ExtensionTuple};
use normtorus::verify::{run_suite, Fault, VerifyConfig};

use store::{cache_root, FieldRecordRow, Progress, ResultStore, Strategy};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error at {0}: {1}")]
    Io(String, String),
    #[error("property failure: {0}")]
    Property(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Property(_) | CliError::Internal(_) => 3,
            CliError::Io(..) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "normtorus",
    version,
    about = "Norm-one tori of abelian number fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the field records of every A-extension with |disc| <= X.
    Enumerate(EnumerateArgs),
    /// Tally fields, WA fields and HNP failures per discriminant decade.
    Classify(ClassifyArgs),
    /// Run the cross-module property suites.
    Verify(VerifyArgs),
    /// Verify the block lemmas exhaustively.
    VerifyLemmas(LemmaArgs),
    /// Evaluate leading constants as JSON reports.
    Constants(ConstantsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Filter {
    All,
    Wa,
    NoWa,
    HnpFail,
}

impl Filter {
    fn keep(self, r: &FieldRecordRow) -> bool {
        match self {
            Filter::All => true,
            Filter::Wa => r.wa,
            Filter::NoWa => !r.wa,
            Filter::HnpFail => !r.hnp,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Invariant factors, e.g. `2.3.3`.
    #[arg(long)]
    group: String,
    /// Discriminant bound: `1000`, `1e15`, `7^12`.
    #[arg(long = "X", alias = "x")]
    x: String,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Strategy::Dfs)]
    strategy: Strategy,
    /// Process at most this many new prime branches, leaving a resumable checkpoint.
    #[arg(long)]
    max_branches: Option<usize>,
    /// Directory for `(log X, count)` series CSVs.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, value_enum, default_value_t = Filter::All)]
    filter: Filter,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Largest group order for the form and automorphism oracles.
    #[arg(long, default_value_t = 200)]
    group_bound: u64,
    /// Lemma cases `l:n,...` (default: all with l^n <= 27).
    #[arg(long)]
    lemmas: Option<String>,
    /// Weighted-size bound for the indicator equivalence.
    #[arg(long, default_value_t = 10_000)]
    indicator_bound: u64,
    /// Small bounds everywhere, for smoke runs.
    #[arg(long)]
    quick: bool,
    /// Test hook: corrupt a production path.
    #[arg(long, value_enum)]
    inject_fault: Option<FaultArg>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    Restriction,
}

#[derive(Args)]
struct LemmaArgs {
    /// Cases `l:n,...` (default: all with l^n <= 27).
    #[arg(long)]
    lemmas: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConstantsArgs {
    /// `l.l...` (elementary), a cyclic `l`, or `2.3.3`.
    #[arg(long, conflicts_with_all = ["ell", "n"])]
    group: Option<String>,
    #[arg(long, requires = "n")]
    ell: Option<u64>,
    #[arg(long, requires = "ell")]
    n: Option<u32>,
    #[arg(long, default_value_t = 10_000_000)]
    prime_bound: u64,
    /// Significant digits in the `formatted` fields.
    #[arg(long, default_value_t = 12)]
    precision: usize,
    /// `log10` of the radical height for the 2.3.3 inner sum.
    #[arg(long, default_value_t = 72.0)]
    height_log10: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn set_workers(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn parse_group(s: &str) -> Result<Arc<FiniteAbelianGroup>, CliError> {
    FiniteAbelianGroup::parse(s)
        .map(Arc::new)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .map_err(|e| CliError::Io(parent.display().to_string(), e.to_string()))?;
            }
            store::write_atomic(p, bytes)
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io("stdout".into(), e.to_string())),
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

struct Loaded {
    group: Arc<FiniteAbelianGroup>,
    x: BigUint,
    records: Vec<FieldRecordRow>,
}

fn load_records(run: &RunArgs) -> Result<Option<Loaded>, CliError> {
    let group = parse_group(&run.group)?;
    let x = bound::parse_bound(&run.x).map_err(CliError::Config)?;
    set_workers(run.workers)?;
    let st = ResultStore::open(&cache_root(), &group, &x, run.strategy)?;
    match st.run(group.clone(), &x, run.strategy, run.max_branches)? {
        Progress::Complete(records) => Ok(Some(Loaded { group, x, records })),
        Progress::Partial { done, total } => {
            eprintln!(
                "checkpoint: {done} of {total} branches stored in {}; rerun to resume",
                st.dir().display()
            );
            Ok(None)
        }
    }
}

fn to_field_records(
    group: &Arc<FiniteAbelianGroup>,
    rows: &[FieldRecordRow],
) -> Result<Vec<FieldRecord>, CliError> {
    rows.iter()
        .map(|r| {
            let t = ExtensionTuple::parse(group.clone(), &r.tuple)
                .map_err(|e| CliError::Internal(format!("stored tuple {}: {e}", r.tuple)))?;
            Ok(FieldRecord {
                disc: r
                    .disc
                    .parse()
                    .map_err(|_| CliError::Internal(format!("bad disc {}", r.disc)))?,
                tuple: r.tuple.clone(),
                verdict: Verdict {
                    sha_order: r.sha_order,
                    at_order: r.at_order,
                    wa: r.wa,
                    hnp: r.hnp,
                },
                noncyclic_inertia_2: noncyclic_inertia_at_2(&t),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct RecordsJson<'a> {
    group: String,
    x: String,
    normalization: &'static str,
    strategy: Strategy,
    filter: String,
    records: Vec<&'a FieldRecordRow>,
}

fn cmd_enumerate(a: &EnumerateArgs) -> Result<(), CliError> {
    let Some(l) = load_records(&a.run)? else {
        return Ok(());
    };
    let kept: Vec<&FieldRecordRow> = l.records.iter().filter(|r| a.filter.keep(r)).collect();
    let bytes = match a.format {
        Format::Csv => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for r in &kept {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Json => json(&RecordsJson {
            group: l.group.descriptor(),
            x: l.x.to_string(),
            normalization: NORMALIZATION_VERSION,
            strategy: a.run.strategy,
            filter: format!("{:?}", a.filter).to_lowercase(),
            records: kept,
        }),
    };
    if let Some(dir) = &a.run.emit_plot_data {
        let tally = tally(&l)?;
        plot_data(dir, &l, &tally)?;
    }
    emit(&a.run.output, &bytes)
}

fn tally(l: &Loaded) -> Result<Tally, CliError> {
    let recs = to_field_records(&l.group, &l.records)?;
    tally_records(&l.group, &recs).map_err(|e| CliError::Internal(e.to_string()))
}

/// Cumulative counts at `X = 10^{k+1}` for each decade `k` up to the bound.
fn plot_data(dir: &Path, l: &Loaded, t: &Tally) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e.to_string()))?;
    let top = l.x.to_string().len() as u32;
    let stem = format!("{}_X{}", l.group.descriptor(), l.x);
    type Pick = fn(&normtorus::splitting::DecadeTally) -> u128;
    let series: [(&str, Pick); 3] = [
        ("fields", |h| h.fields),
        ("wa_fields", |h| h.wa_fields),
        ("hnp_fail_fields", |h| h.hnp_fail_fields),
    ];
    for (name, pick) in series {
        let mut points: Vec<(f64, u128)> = Vec::new();
        let mut acc = 0u128;
        for k in 0..top {
            // decade k holds 10^k <= d < 10^{k+1}
            acc += t.histogram.get(&k).map(pick).unwrap_or(0);
            let log_x = ((k + 1) as f64 * std::f64::consts::LN_10).min(big_log(&l.x));
            match points.last_mut() {
                Some(last) if last.0 == log_x => last.1 = acc,
                _ => points.push((log_x, acc)),
            }
        }
        let mut s = String::from("log_x,count\n");
        for (x, c) in points {
            s.push_str(&format!("{x:.6},{c}\n"));
        }
        let p = dir.join(format!("{stem}_{name}.csv"));
        store::write_atomic(&p, s.as_bytes())?;
    }
    Ok(())
}

fn ratio<T: std::fmt::Display>(r: normtorus::error::Result<T>) -> String {
    r.map(|v| v.to_string())
        .unwrap_or_else(|e| format!("unavailable: {e}"))
}

#[derive(Serialize)]
struct ClassifyJson {
    group: String,
    x: String,
    normalization: &'static str,
    strategy: Strategy,
    alpha: String,
    alpha_total: String,
    tally: Tally,
}

fn cmd_classify(a: &ClassifyArgs) -> Result<(), CliError> {
    let Some(l) = load_records(&a.run)? else {
        return Ok(());
    };
    let t = tally(&l)?;
    let out = ClassifyJson {
        group: l.group.descriptor(),
        x: l.x.to_string(),
        normalization: NORMALIZATION_VERSION,
        strategy: a.run.strategy,
        alpha: ratio(alpha(&l.group)),
        alpha_total: ratio(alpha_total(&l.group)),
        tally: t.clone(),
    };
    if let Some(dir) = &a.run.emit_plot_data {
        plot_data(dir, &l, &t)?;
    }
    emit(&a.run.output, &json(&out))
}

fn parse_lemmas(s: &Option<String>) -> Result<Vec<(u64, usize)>, CliError> {
    let Some(s) = s else {
        return Ok(lemma_cases(LEMMA_BOUND));
    };
    s.split(',')
        .map(|c| {
            let (l, n) = c
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("lemma case `{c}` is not `l:n`")))?;
            let l: u64 = l
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad l in `{c}`")))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad n in `{c}`")))?;
            if !normtorus::arith::is_prime(l) || n == 0 || (l as f64).powi(n as i32) > 1e6 {
                return Err(CliError::Config(format!(
                    "lemma case `{c}` needs a prime l, n >= 1 and l^n <= 10^6"
                )));
            }
            Ok((l, n))
        })
        .collect()
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    set_workers(a.workers)?;
    let lemmas = parse_lemmas(&a.lemmas)?;
    let mut cfg = VerifyConfig {
        seed: a.seed,
        group_bound: a.group_bound,
        fault: match a.inject_fault {
            Some(FaultArg::Restriction) => Fault::Restriction,
            None => Fault::None,
        },
        lemmas,
        indicator_bound: a.indicator_bound,
        ..VerifyConfig::default()
    };
    if a.quick {
        cfg.group_bound = cfg.group_bound.min(32);
        cfg.indicator_bound = cfg.indicator_bound.min(300);
        cfg.dlog_trials = 60;
        cfg.frobenius = vec![
            ("2.2".into(), BigUint::from(10_000u32)),
            ("3.3".into(), BigUint::from(10u32).pow(16)),
        ];
        if a.lemmas.is_none() {
            cfg.lemmas = vec![(2, 2), (3, 2)];
        }
    }
    let rep = run_suite(&cfg);
    emit(&a.output, &json(&rep))?;
    if rep.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = rep
            .properties
            .iter()
            .filter(|p| !p.passed)
            .map(|p| p.name.as_str())
            .collect();
        Err(CliError::Property(failed.join(", ")))
    }
}

fn cmd_verify_lemmas(a: &LemmaArgs) -> Result<(), CliError> {
    set_workers(a.workers)?;
    let mut reports: Vec<LemmaReport> = Vec::new();
    for (ell, n) in parse_lemmas(&a.lemmas)? {
        let g = FiniteAbelianGroup::elementary(ell as u32, n)
            .map_err(|e| CliError::Config(e.to_string()))?;
        for b in all_subspaces(&g) {
            reports.push(
                verify_block_lemma(ell, n, &b).map_err(|e| CliError::Internal(e.to_string()))?,
            );
        }
    }
    emit(&a.output, &json(&reports))?;
    let bad = reports
        .iter()
        .filter(|r| !r.counterexamples.is_empty())
        .count();
    if bad == 0 {
        Ok(())
    } else {
        Err(CliError::Property(format!(
            "{bad} lemma cases have counterexamples"
        )))
    }
}

#[derive(Serialize)]
struct ConstantJson {
    formatted: String,
    #[serde(flatten)]
    report: ConstantReport,
}

fn cmd_constants(a: &ConstantsArgs) -> Result<(), CliError> {
    set_workers(a.workers)?;
    let cfg = |e: normtorus::error::Error| CliError::Config(e.to_string());
    let mut reports = Vec::new();
    let (ell, n) = match (&a.group, a.ell, a.n) {
        (Some(g), _, _) => {
            let grp = parse_group(g)?;
            if grp.descriptor() == "2.3.3" {
                let c = c233_constants(a.height_log10 * std::f64::consts::LN_10, a.prime_bound)
                    .map_err(cfg)?;
                reports.extend([c.wa_leading, c.total_leading, c.proportion]);
                (0, 0)
            } else if grp.is_elementary() {
                (grp.exponent(), grp.rank() as u32)
            } else {
                return Err(CliError::Config(format!(
                    "constants are available for elementary groups and 2.3.3, not {}",
                    grp.descriptor()
                )));
            }
        }
        (None, Some(l), Some(n)) => (l, n),
        _ => {
            return Err(CliError::Config(
                "give --group or both --ell and --n".into(),
            ))
        }
    };
    if ell != 0 {
        reports.push(multicyclic_total_constant(ell, n, a.prime_bound).map_err(cfg)?);
        if n >= 2 {
            reports.push(multicyclic_wa_constant(ell, n, a.prime_bound).map_err(cfg)?);
        }
        if (ell, n) == (3, 2) {
            reports.push(mammo_closed_form(a.prime_bound).map_err(cfg)?);
        }
    }
    let out: Vec<ConstantJson> = reports
        .into_iter()
        .map(|r| ConstantJson {
            formatted: r.formatted(a.precision),
            report: r,
        })
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert(
        "normalization",
        serde_json::Value::from(NORMALIZATION_VERSION),
    );
    meta.insert("reports", serde_json::to_value(&out).expect("serializable"));
    emit(&a.output, &json(&meta))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Verify(a) => cmd_verify(a),
        Command::VerifyLemmas(a) => cmd_verify_lemmas(a),
        Command::Constants(a) => cmd_constants(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("normtorus: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
