//! On-disk result store. Records for one `(group, X, normalization, strategy)`
//! live in their own directory: one spill file per top-level prime branch
//! (written atomically, so its presence is the checkpoint), the merged
//! `records.csv`, and a `manifest.json` with content hashes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use normtorus::group::FiniteAbelianGroup;
use normtorus::splitting::{
    sort_records, CharacterNormalization, FieldRecord, CSV_HEADER, NORMALIZATION_VERSION,
};
use normtorus::tuple::{enumerate_radical_first, EnumOptions, TupleEnumerator};

use crate::CliError;

pub const CACHE_ENV: &str = "NORMTORUS_CACHE_DIR";
const DEFAULT_CACHE: &str = ".normtorus-cache";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Depth-first search over primes, partitioned by smallest odd prime.
    Dfs,
    /// Loop over squarefree radicals and assign their primes.
    RadicalFirst,
}

impl Strategy {
    fn key(self) -> &'static str {
        match self {
            Strategy::Dfs => "dfs",
            Strategy::RadicalFirst => "radical-first",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub group: String,
    pub x: String,
    pub normalization: String,
    pub strategy: Strategy,
    pub branches: usize,
    pub records: u64,
    /// sha256 of `records.csv`.
    pub records_sha256: String,
    /// sha256 of each spill file, keyed by file name.
    pub spills: std::collections::BTreeMap<String, String>,
}

pub struct ResultStore {
    dir: PathBuf,
}

/// A record row with its sort key.
struct Row {
    disc: BigUint,
    tuple: String,
    line: String,
}

pub enum Progress {
    Complete(Vec<FieldRecordRow>),
    Partial { done: usize, total: usize },
}

/// One stored record, as read back from `records.csv`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldRecordRow {
    pub disc: String,
    pub tuple: String,
    pub sha_order: u128,
    pub at_order: u128,
    pub wa: bool,
    pub hnp: bool,
}

impl FieldRecordRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.disc, self.tuple, self.sha_order, self.at_order, self.wa, self.hnp
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return None;
        }
        Some(Self {
            disc: f[0].to_string(),
            tuple: f[1].to_string(),
            sha_order: f[2].parse().ok()?,
            at_order: f[3].parse().ok()?,
            wa: f[4].parse().ok()?,
            hnp: f[5].parse().ok()?,
        })
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.display().to_string(), e.to_string())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(bytes).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))
}

pub fn cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE))
}

impl ResultStore {
    pub fn open(
        root: &Path,
        group: &FiniteAbelianGroup,
        x: &BigUint,
        strategy: Strategy,
    ) -> Result<Self, CliError> {
        let dir = root
            .join(group.descriptor())
            .join(format!("X={x}"))
            .join(NORMALIZATION_VERSION)
            .join(strategy.key());
        fs::create_dir_all(dir.join("branches")).map_err(io(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn spill_path(&self, branch: u64) -> PathBuf {
        self.dir.join("branches").join(format!("{branch:020}.csv"))
    }

    fn records_path(&self) -> PathBuf {
        self.dir.join("records.csv")
    }

    fn manifest_path(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    /// The manifest, if `records.csv` exists and matches its hash.
    pub fn verified_manifest(&self) -> Option<Manifest> {
        let m: Manifest = serde_json::from_slice(&fs::read(self.manifest_path()).ok()?).ok()?;
        let bytes = fs::read(self.records_path()).ok()?;
        (sha256_hex(&bytes) == m.records_sha256).then_some(m)
    }

    /// Enumerates and classifies every branch without a spill file, at most
    /// `max_new` of them, then merges once all branches are present.
    pub fn run(
        &self,
        group: Arc<FiniteAbelianGroup>,
        x: &BigUint,
        strategy: Strategy,
        max_new: Option<usize>,
    ) -> Result<Progress, CliError> {
        if self.verified_manifest().is_some() {
            return self.load().map(Progress::Complete);
        }
        let norm = CharacterNormalization;
        let en = TupleEnumerator::new(group.clone(), x, EnumOptions::surjective());
        let branches = match strategy {
            Strategy::Dfs => en.branches(),
            Strategy::RadicalFirst => vec![0],
        };
        let missing: Vec<u64> = branches
            .iter()
            .copied()
            .filter(|&b| !self.spill_path(b).exists())
            .collect();
        let todo: Vec<u64> = missing
            .iter()
            .copied()
            .take(max_new.unwrap_or(usize::MAX))
            .collect();
        todo.par_iter().try_for_each(|&b| -> Result<(), CliError> {
            let mut recs = Vec::new();
            let mut err = None;
            let mut push = |t: &normtorus::tuple::ExtensionTuple| match FieldRecord::of(t, &norm) {
                Ok(r) => recs.push(r),
                Err(e) => err = Some(e),
            };
            match strategy {
                Strategy::Dfs => en.for_each_in_branch(b, &mut push),
                Strategy::RadicalFirst => {
                    for t in enumerate_radical_first(group.clone(), x, EnumOptions::surjective()) {
                        push(&t);
                    }
                }
            }
            if let Some(e) = err {
                return Err(CliError::Internal(e.to_string()));
            }
            sort_records(&mut recs);
            let mut body = String::new();
            for r in &recs {
                body.push_str(&r.csv_row());
                body.push('\n');
            }
            write_atomic(&self.spill_path(b), body.as_bytes())
        })?;
        let done = branches.len() - missing.len() + todo.len();
        if done < branches.len() {
            return Ok(Progress::Partial {
                done,
                total: branches.len(),
            });
        }
        self.merge(group.as_ref(), x, strategy, &branches)?;
        self.load().map(Progress::Complete)
    }

    /// Sorts all spill rows by `(disc, tuple)` into `records.csv` and writes the manifest.
    fn merge(
        &self,
        group: &FiniteAbelianGroup,
        x: &BigUint,
        strategy: Strategy,
        branches: &[u64],
    ) -> Result<(), CliError> {
        let mut rows = Vec::new();
        let mut spills = std::collections::BTreeMap::new();
        for &b in branches {
            let path = self.spill_path(b);
            let bytes = fs::read(&path).map_err(io(&path))?;
            spills.insert(
                path.file_name()
                    .expect("file")
                    .to_string_lossy()
                    .into_owned(),
                sha256_hex(&bytes),
            );
            for line in String::from_utf8_lossy(&bytes).lines() {
                let mut it = line.splitn(3, ',');
                let (Some(d), Some(t)) = (it.next(), it.next()) else {
                    return Err(CliError::Io(
                        path.display().to_string(),
                        format!("malformed row `{line}`"),
                    ));
                };
                let disc = d.parse().map_err(|_| {
                    CliError::Io(
                        path.display().to_string(),
                        format!("malformed row `{line}`"),
                    )
                })?;
                rows.push(Row {
                    disc,
                    tuple: t.to_string(),
                    line: line.to_string(),
                });
            }
        }
        rows.sort_by(|a, b| a.disc.cmp(&b.disc).then_with(|| a.tuple.cmp(&b.tuple)));
        let mut body = String::with_capacity(rows.len() * 48);
        body.push_str(CSV_HEADER);
        body.push('\n');
        for r in &rows {
            body.push_str(&r.line);
            body.push('\n');
        }
        write_atomic(&self.records_path(), body.as_bytes())?;
        let m = Manifest {
            group: group.descriptor(),
            x: x.to_string(),
            normalization: NORMALIZATION_VERSION.into(),
            strategy,
            branches: branches.len(),
            records: rows.len() as u64,
            records_sha256: sha256_hex(body.as_bytes()),
            spills,
        };
        let json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        write_atomic(&self.manifest_path(), &json)
    }

    pub fn load(&self) -> Result<Vec<FieldRecordRow>, CliError> {
        let path = self.records_path();
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let mut out = Vec::new();
        for line in text.lines().skip(1) {
            out.push(FieldRecordRow::parse(line).ok_or_else(|| {
                CliError::Io(
                    path.display().to_string(),
                    format!("malformed row `{line}`"),
                )
            })?);
        }
        Ok(out)
    }
}
