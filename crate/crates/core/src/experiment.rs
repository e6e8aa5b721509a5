//! File-driven experiments: strict JSON configuration, parameter sweeps, and
//! output files.
//!
//! A run writes into its output directory:
//!
//! | file | contents |
//! |---|---|
//! | `records.csv` | one row per agent and period (`records_<param>_<i>.csv` per sweep point) |
//! | `summary.csv`, `improvements.csv` | summary tables (format `csv`) |
//! | `summary.json` | both tables (format `json`) |
//! | `summary.md` | both tables as markdown (format `md`) |
//! | `resolved_config.json` | the configuration after defaults and overrides |
//! | `metadata.json` | timings and version; the only file with timestamps |

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::market::{check_accounting, run_cycles, run_single_period, ArmChannels, CycleRecord, MarketConfig, Structure};
use crate::metrics::{summarize, ImprovementRow, SummaryRow, SummaryTable};
use crate::records;

/// Environment variable that overrides `market.master_seed`.
pub const SEED_ENV: &str = "ASYM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SinglePeriod,
    #[default]
    Cycles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" => Ok(ReportFormat::Md),
            _ => Err(Error::Parse(format!("unknown report format `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Name of a `market` field.
    pub param: String,
    pub values: Vec<Value>,
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv, ReportFormat::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub market: MarketConfig,
    #[serde(default)]
    pub mode: Mode,
    /// Structures to simulate; defaults to `market.structure` alone.
    #[serde(default)]
    pub structures: Option<Vec<Structure>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            market: MarketConfig::default(),
            mode: Mode::default(),
            structures: None,
            output_dir: None,
            formats: default_formats(),
            sweep: None,
        }
    }
}

/// One fully resolved market configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Sweep value as text; `None` outside sweeps.
    pub label: Option<String>,
    pub market: MarketConfig,
}

impl ExperimentSpec {
    pub fn structures(&self) -> Vec<Structure> {
        self.structures.clone().unwrap_or_else(|| vec![self.market.structure])
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if let Some(s) = &self.structures {
            if s.is_empty() {
                return Err(Error::constraint("structures", "must not be empty"));
            }
            for st in s {
                let mut m = self.market.clone();
                m.structure = *st;
                m.validate().map_err(|_| Error::constraint("structures", format!("invalid structure {st}")))?;
            }
        }
        if self.formats.is_empty() {
            return Err(Error::constraint("formats", "must not be empty"));
        }
        self.sweep_points().map(|_| ())
    }

    /// Configurations to run: one per sweep value, or the base market.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![SweepPoint {
                label: None,
                market: self.market.clone(),
            }]);
        };
        if sweep.values.is_empty() {
            return Err(Error::constraint("sweep.values", "must not be empty"));
        }
        let base = serde_json::to_value(&self.market)?;
        if !base.as_object().is_some_and(|o| o.contains_key(&sweep.param)) {
            return Err(Error::UnknownKey(format!("sweep.param `{}` is not a market field", sweep.param)));
        }
        sweep
            .values
            .iter()
            .map(|v| {
                let mut m = base.clone();
                m[&sweep.param] = v.clone();
                let market: MarketConfig = serde_json::from_value(m)
                    .map_err(|e| Error::constraint(sweep.param.clone(), e.to_string()))?;
                market.validate()?;
                Ok(SweepPoint {
                    label: Some(value_label(v)),
                    market,
                })
            })
            .collect()
    }

    /// Applies seed overrides; an explicit seed beats the environment value.
    pub fn with_seed_override(mut self, explicit: Option<u64>, env_value: Option<&str>) -> Result<Self> {
        if let Some(v) = env_value {
            self.market.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::constraint(SEED_ENV, format!("not an unsigned 64-bit integer: `{v}`")))?;
        }
        if let Some(seed) = explicit {
            self.market.master_seed = seed;
        }
        Ok(self)
    }
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Parses a spec from JSON text. Unknown keys anywhere are rejected.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unknown field") {
            Error::UnknownKey(msg)
        } else {
            Error::Parse(msg)
        }
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    parse_config_str(&text)
}

#[derive(Debug, Serialize)]
struct ResolvedConfig<'a> {
    spec: &'a ExperimentSpec,
    points: Vec<ResolvedPoint<'a>>,
}

#[derive(Debug, Serialize)]
struct ResolvedPoint<'a> {
    label: Option<String>,
    market: &'a MarketConfig,
    channels: ArmChannels,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SummaryFile {
    schema: String,
    rows: Vec<SummaryRow>,
    improvements: Vec<ImprovementRow>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub record_files: Vec<PathBuf>,
    pub summary: SummaryTable,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Records of one market configuration for every requested structure,
/// ordered by structure, then replication, arm, cycle and agent.
pub fn simulate_point(spec: &ExperimentSpec, market: &MarketConfig) -> Result<Vec<CycleRecord>> {
    let mut out = Vec::new();
    for structure in spec.structures() {
        let mut m = market.clone();
        m.structure = structure;
        out.extend(match spec.mode {
            Mode::SinglePeriod => run_single_period(&m)?,
            Mode::Cycles => run_cycles(&m)?,
        });
    }
    check_accounting(&out)?;
    Ok(out)
}

/// Runs the experiment and writes every output file into `out_dir`.
pub fn run(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunReport> {
    let started = SystemTime::now();
    let clock = Instant::now();
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let points = spec.sweep_points()?;
    let resolved = ResolvedConfig {
        spec,
        points: points
            .iter()
            .map(|p| {
                Ok(ResolvedPoint {
                    label: p.label.clone(),
                    market: &p.market,
                    channels: ArmChannels::for_config(&p.market)?,
                })
            })
            .collect::<Result<_>>()?,
    };
    write_json(&out_dir.join("resolved_config.json"), &resolved)?;

    let mut summary = SummaryTable::default();
    let mut record_files = Vec::new();
    for (i, point) in points.iter().enumerate() {
        let recs = simulate_point(spec, &point.market)?;
        let path = match (&spec.sweep, &point.label) {
            (Some(sweep), Some(_)) => out_dir.join(format!("records_{}_{i}.csv", file_safe(&sweep.param))),
            _ => out_dir.join("records.csv"),
        };
        records::write_records_file(&path, &recs)?;
        record_files.push(path);
        let table = summarize(&recs);
        summary.extend(match &point.label {
            Some(l) => table.with_sweep_point(l),
            None => table,
        });
    }

    for format in &spec.formats {
        match format {
            ReportFormat::Csv => {
                records::write_summary_file(&out_dir.join("summary.csv"), &summary.rows)?;
                records::write_improvements_file(&out_dir.join("improvements.csv"), &summary.improvements)?;
            }
            ReportFormat::Json => write_json(
                &out_dir.join("summary.json"),
                &SummaryFile {
                    schema: records::SUMMARY_SCHEMA.to_string(),
                    rows: summary.rows.clone(),
                    improvements: summary.improvements.clone(),
                },
            )?,
            ReportFormat::Md => {
                let path = out_dir.join("summary.md");
                fs::write(&path, render_markdown(&summary)).map_err(|e| Error::io(&path, e))?;
            }
        }
    }

    let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    write_json(
        &out_dir.join("metadata.json"),
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix": secs(started),
            "finished_unix": secs(SystemTime::now()),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        }),
    )?;

    Ok(RunReport {
        output_dir: out_dir.to_path_buf(),
        record_files,
        summary,
    })
}

/// Summary of a finished run: `summary.json` if present, otherwise recomputed
/// from `records.csv`.
pub fn load_summary(dir: &Path) -> Result<SummaryTable> {
    let json = dir.join("summary.json");
    if json.exists() {
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let file: SummaryFile = serde_json::from_str(&text)?;
        return Ok(SummaryTable {
            rows: file.rows,
            improvements: file.improvements,
        });
    }
    let recs = records::read_records_file(&dir.join("records.csv"))?;
    Ok(summarize(&recs))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".to_string())
}

pub fn render_markdown(table: &SummaryTable) -> String {
    let mut s = String::new();
    s.push_str("| point | structure | arm | ability | accepted | share | effort | profit | agent utility | welfare | rent |\n");
    s.push_str("|---|---|---|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in &table.rows {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
            r.sweep_point.as_deref().unwrap_or("-"),
            r.structure,
            r.arm,
            r.ability,
            r.accepted,
            r.selection_share,
            r.effort_mean,
            r.principal_profit_mean,
            r.agent_utility_mean,
            r.welfare_mean,
            r.rent_mean
        ));
    }
    s.push('\n');
    s.push_str("| point | structure | ability | selection | effort | effort % | welfare | p |\n");
    s.push_str("|---|---|---|---:|---:|---:|---:|---:|\n");
    for r in &table.improvements {
        s.push_str(&format!(
            "| {} | {} | {} | {:.4} | {} | {} | {:.4} | {} |\n",
            r.sweep_point.as_deref().unwrap_or("-"),
            r.structure,
            r.ability,
            r.selection_change,
            fmt_opt(r.effort_change),
            fmt_opt(r.effort_change_pct),
            r.welfare_change,
            r.effort_p.map(|p| format!("{p:.3e}")).unwrap_or_else(|| "-".into())
        ));
    }
    s
}

/// Report text in the requested format.
pub fn render_report(table: &SummaryTable, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Md => render_markdown(table),
        ReportFormat::Json => {
            let mut t = serde_json::to_string_pretty(&SummaryFile {
                schema: records::SUMMARY_SCHEMA.to_string(),
                rows: table.rows.clone(),
                improvements: table.improvements.clone(),
            })?;
            t.push('\n');
            t
        }
        ReportFormat::Csv => {
            let a = records::write_table(Vec::new(), records::SUMMARY_SCHEMA, &table.rows)?;
            let b = records::write_table(Vec::new(), records::IMPROVEMENTS_SCHEMA, &table.improvements)?;
            let mut t = String::from_utf8_lossy(&a).into_owned();
            t.push('\n');
            t.push_str(&String::from_utf8_lossy(&b));
            t
        }
    })
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Invariant(_) => 3,
            Error::MissingFile(_) => 4,
            Error::UnknownKey(_) => 5,
            Error::Constraint { .. } => 6,
            Error::Parse(_) | Error::Json(_) | Error::Csv(_) => 7,
            Error::Domain(_) | Error::MissingData(_) => 1,
        }
    }
}
