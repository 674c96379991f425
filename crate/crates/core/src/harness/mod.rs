//! File-based front end: weak-source files, run configs, end-to-end
//! extraction runs with JSON reports, a statistical battery and parameter
//! sweeps.

mod stats;
mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{config_err, Result};
use crate::master::{error_bounds, run_master, ErrorLedger, Gallery, InstanceSummary, MasterSpec, SourceTable};
use crate::seeded_pre::{classical_pass_probability, honest_reject_probability};

pub use stats::{stats_battery, StatsReport, TestResult, STATS_HEADER};
pub use sweep::{experiment_sweep, SweepGrid, SweepRow, DEFAULT_GRID_CAP, WORKERS_ENV};

/// Version of the config and report schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// Lowercase hex SHA-256 of the canonical JSON encoding of `value`.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Parse JSON, reporting the path of the offending field on failure.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        config_err(if field == "." { "<root>".into() } else { field }, e.inner().to_string())
    })
}

/// Metadata stored next to a source file as `<file>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceMeta {
    pub declared_n: usize,
    pub claimed_k: usize,
    #[serde(default)]
    pub provenance: String,
}

/// Raw bytes of a weak source plus its declared length and min-entropy claim.
/// `claimed_k` is bookkeeping only and never enters a security computation.
#[derive(Clone, Debug)]
pub struct SourceFile {
    bytes: Vec<u8>,
    meta: SourceMeta,
}

impl SourceFile {
    pub fn new(bytes: Vec<u8>, meta: SourceMeta) -> Result<Self> {
        if meta.declared_n > 8 * bytes.len() {
            return Err(config_err(
                "declared_n",
                format!("{} bits declared but the file holds only {}", meta.declared_n, 8 * bytes.len()),
            ));
        }
        if meta.claimed_k > meta.declared_n {
            return Err(config_err(
                "claimed_k",
                format!("claimed_k = {} exceeds declared_n = {}", meta.claimed_k, meta.declared_n),
            ));
        }
        Ok(Self { bytes, meta })
    }

    /// Read `path` and its sidecar `path.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| config_err("source", format!("{}: {e}", path.display())))?;
        let sidecar = sidecar_path(path);
        let text = std::fs::read_to_string(&sidecar)
            .map_err(|e| config_err("source", format!("{}: {e}", sidecar.display())))?;
        Self::new(bytes, parse_json(&text)?)
    }

    pub fn meta(&self) -> &SourceMeta {
        &self.meta
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// The first `declared_n` bits, most significant bit of each byte first.
    pub fn bits(&self) -> BitString {
        BitString::from_bytes(&self.bytes, 8 * self.bytes.len())
            .expect("length matches")
            .slice(0, self.meta.declared_n)
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Drives all device randomness.
    pub devices: u64,
    /// Drives simulated source draws in sweeps.
    pub source: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub z_path: PathBuf,
    pub report_path: PathBuf,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    #[serde(default)]
    pub include_timing: bool,
}

/// Everything a run needs. Relative paths resolve against the config's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub master: MasterSpec,
    pub gallery: Gallery,
    pub source: PathBuf,
    pub seeds: Seeds,
    pub trials: usize,
    pub output: OutputPaths,
    #[serde(default)]
    pub report: ReportOptions,
    #[serde(default)]
    pub grid_cap: Option<usize>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = parse_json(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        self.master.validate().map_err(|e| config_err("master", e.to_string()))?;
        if let Gallery::Honest { noise } = self.gallery {
            if !(0.0..=1.0).contains(&noise) {
                return Err(config_err("gallery.noise", format!("{noise} is outside [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_source(&self) -> Result<SourceFile> {
        let src = SourceFile::load(&self.resolve(&self.source))?;
        if src.meta.declared_n != self.master.ext.n() {
            return Err(config_err(
                "source.declared_n",
                format!("{} bits declared, extractor expects n = {}", src.meta.declared_n, self.master.ext.n()),
            ));
        }
        Ok(src)
    }

    /// Ledger for this config: `ε_c` from the gallery's noise (0 for
    /// non-honest galleries) and `ε_s` from the classical pass probability.
    pub fn ledger(&self, noise: f64) -> Result<ErrorLedger> {
        error_bounds(
            self.master.ext.eps(),
            honest_reject_probability(&self.master.seeded, noise),
            classical_pass_probability(&self.master.seeded),
            self.master.eta,
        )
    }
}

fn gallery_noise(g: &Gallery) -> f64 {
    match g {
        Gallery::Honest { noise } => *noise,
        _ => 0.0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SourceSummary {
    pub declared_n: usize,
    pub claimed_k: usize,
    pub provenance: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub elapsed_ms: u128,
}

/// The JSON report written by [`cli_extract`].
#[derive(Debug, Serialize)]
pub struct ExtractReport {
    pub schema: &'static str,
    pub schema_version: u32,
    pub config_hash: String,
    pub gallery: String,
    pub source: SourceSummary,
    pub accepted: bool,
    pub exit_code: i32,
    pub output_len: usize,
    pub output_hex: Option<String>,
    pub instance_count: usize,
    pub rejects: usize,
    pub reject_threshold: usize,
    /// Whether the source's min-entropy claim covers the extractor's `k`.
    pub ledger_applies: bool,
    pub ledger: ErrorLedger,
    pub instances: Vec<InstanceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECT: i32 = 2;

/// Run the master protocol on the config's source file. Writes the report
/// always and `Z` (packed bits) on accept.
pub fn run_extract(cfg: &RunConfig) -> Result<ExtractReport> {
    let start = Instant::now();
    let src = cfg.load_source()?;
    let x = src.bits();
    // Only the replay gallery looks at the table; it gets the observed value.
    let table = SourceTable::flat(x.len(), vec![x.clone()])?;
    let impls = cfg.gallery.implementations(&cfg.master, &x, &table, cfg.seeds.devices)?;
    let out = run_master(&cfg.master, &x, &impls, cfg.seeds.devices)?;
    let report = ExtractReport {
        schema: "physrand.extract-report",
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash(cfg)?,
        gallery: cfg.gallery.name(),
        source: SourceSummary {
            declared_n: src.meta.declared_n,
            claimed_k: src.meta.claimed_k,
            provenance: src.meta.provenance.clone(),
            sha256: src.sha256(),
        },
        accepted: out.accepted,
        exit_code: if out.accepted { EXIT_ACCEPT } else { EXIT_REJECT },
        output_len: out.output.len(),
        output_hex: out.accepted.then(|| out.output.to_hex()),
        instance_count: out.instances.len(),
        rejects: out.rejects,
        reject_threshold: out.reject_threshold,
        ledger_applies: src.meta.claimed_k >= cfg.master.ext.k(),
        ledger: cfg.ledger(gallery_noise(&cfg.gallery))?,
        instances: out.instance_summaries(),
        timing: cfg.report.include_timing.then(|| Timing {
            elapsed_ms: start.elapsed().as_millis(),
        }),
    };
    let report_path = cfg.resolve(&cfg.output.report_path);
    write_file(&report_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    if out.accepted {
        write_file(&cfg.resolve(&cfg.output.z_path), &out.output.to_bytes())?;
    }
    Ok(report)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// `extract --config <path>`: 0 on accept, 2 on protocol reject, 1 on any
/// error (with the diagnostic on stderr).
pub fn cli_extract(config: &Path) -> i32 {
    match RunConfig::load(config).and_then(|cfg| run_extract(&cfg)) {
        Ok(r) => r.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// `sweep --config <path> --grid <path>`: writes the CSV to the config's
/// `csv_path` (or stdout).
pub fn cli_sweep(config: &Path, grid: &Path) -> i32 {
    let run = || -> Result<()> {
        let cfg = RunConfig::load(config)?;
        let text = std::fs::read_to_string(grid).map_err(|e| config_err("<grid>", format!("{}: {e}", grid.display())))?;
        let grid: SweepGrid = parse_json(&text)?;
        let (_, csv) = experiment_sweep(&cfg, &grid)?;
        match &cfg.output.csv_path {
            Some(p) => write_file(&cfg.resolve(p), csv.as_bytes()),
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    };
    match run() {
        Ok(()) => EXIT_ACCEPT,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// `stats --input <path>`: runs the battery over the whole file and prints
/// the JSON report.
pub fn cli_stats(input: &Path) -> i32 {
    let run = || -> Result<StatsReport> {
        let bytes = std::fs::read(input)?;
        stats_battery(&BitString::from_bytes(&bytes, 8 * bytes.len())?)
    };
    match run() {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            EXIT_ACCEPT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
