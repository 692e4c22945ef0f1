//! Run configuration, manifests and the file-producing commands behind the
//! `chain-reduction` binary.
//!
//! Every command is a pure function of its [`RunConfig`]: outputs carry no
//! timestamps, and reals are written in shortest round-trip form so a file
//! re-parses to the exact same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::born::{born_distribution, currents};
use crate::chain::{make_n_atom_chain, ChainSpec};
use crate::ensemble::{
    compare, compare_ensembles, run_with_engine, ComparisonReport, EnsembleResult, Execution,
    GillespieEngine, ReductionEngine, TrialEngine,
};
use crate::error::{invalid, Error, Result};
use crate::stats::{ks_critical_01pct, ChiSquareTest};

/// Exit statuses of the binary.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const STATISTICAL_FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INSUFFICIENT_DATA: u8 = 3;
}

/// Significance level of every check made by [`cmd_verify`].
pub const VERIFY_ALPHA: f64 = 0.001;

/// Either an `n`-atom source or explicit rates; JSON `{"n_atoms", "k"}` or
/// `{"rates"}`, never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChainSource")]
#[serde(untagged)]
pub enum ChainSource {
    Atoms { n_atoms: usize, k: f64 },
    Rates { rates: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChainSource {
    n_atoms: Option<usize>,
    k: Option<f64>,
    rates: Option<Vec<f64>>,
}

impl TryFrom<RawChainSource> for ChainSource {
    type Error = String;

    fn try_from(raw: RawChainSource) -> std::result::Result<Self, String> {
        match raw {
            RawChainSource {
                n_atoms: Some(n_atoms),
                k: Some(k),
                rates: None,
            } => Ok(ChainSource::Atoms { n_atoms, k }),
            RawChainSource {
                n_atoms: None,
                k: None,
                rates: Some(rates),
            } => Ok(ChainSource::Rates { rates }),
            _ => Err("chain_source needs exactly one of {n_atoms, k} or {rates}".into()),
        }
    }
}

impl ChainSource {
    pub fn build(&self) -> Result<ChainSpec> {
        match self {
            ChainSource::Atoms { n_atoms, k } => make_n_atom_chain(*k, *n_atoms),
            ChainSource::Rates { rates } => ChainSpec::from_rates(rates.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub chain_source: ChainSource,
    pub query_time: f64,
    pub trials: u64,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chain_source: ChainSource::Atoms { n_atoms: 2, k: 1.0 },
            query_time: 1.0,
            trials: 100_000,
            master_seed: 42,
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

/// Partial config as accepted by `--config`; missing fields keep defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub chain_source: Option<ChainSource>,
    pub query_time: Option<f64>,
    pub trials: Option<u64>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    pub fn apply(self, base: RunConfig) -> RunConfig {
        RunConfig {
            chain_source: self.chain_source.unwrap_or(base.chain_source),
            query_time: self.query_time.unwrap_or(base.query_time),
            trials: self.trials.unwrap_or(base.trials),
            master_seed: self.master_seed.unwrap_or(base.master_seed),
            output_dir: self.output_dir.unwrap_or(base.output_dir),
            format: self.format.unwrap_or(base.format),
        }
    }
}

impl RunConfig {
    /// Checks everything that does not need the file system.
    pub fn validate(&self) -> Result<ChainSpec> {
        if !(self.query_time.is_finite() && self.query_time >= 0.0) {
            return Err(invalid(format!(
                "query time {} must be finite and nonnegative",
                self.query_time
            )));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        self.chain_source.build()
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<()> {
        let dir = &self.output_dir;
        fs::create_dir_all(dir).map_err(|source| io(dir, source))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(|source| io(&probe, source))?;
        fs::remove_file(&probe).map_err(|source| io(&probe, source))
    }
}

/// Replay record written next to simulation outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub chain: ChainSpec,
    /// Wall-clock creation time; the only field that differs between runs.
    pub created_unix: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| io(path, source))
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| io(&path, source))?;
    Ok(path)
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    for (i, cell) in cells.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&cell);
    }
    out.push('\n');
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x}")
}

/// Validates a time grid: finite, nonnegative, strictly increasing.
pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if let Some(t) = grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(invalid(format!("grid value {t} must be finite and nonnegative")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// `points` evenly spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| t_max * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Writes `analytic.csv` (`t, P_0..P_m, J_0..J_m`) and, for JSON formats,
/// `analytic.json`.
pub fn cmd_analytic(config: &RunConfig, grid: &[f64]) -> Result<Vec<PathBuf>> {
    let chain = config.validate()?;
    check_grid(grid)?;
    config.prepare_output()?;
    let n = chain.num_components();
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let dist = born_distribution(&chain, t)?;
        let current = currents(&chain, &dist)?;
        rows.push((dist, current));
    }
    let mut files = Vec::new();
    // the CSV is the primary artifact and is always written
    let mut csv = String::new();
    push_row(
        &mut csv,
        std::iter::once("t".to_string())
            .chain((0..n).map(|i| format!("P_{i}")))
            .chain((0..n).map(|i| format!("J_{i}"))),
    );
    for (dist, current) in &rows {
        push_row(
            &mut csv,
            std::iter::once(fmt_real(dist.time))
                .chain(dist.probs.iter().map(|p| fmt_real(*p)))
                .chain(current.net.iter().map(|j| fmt_real(*j))),
        );
    }
    files.push(write(config.output_dir.join("analytic.csv"), &csv)?);
    if config.format.json() {
        #[derive(Serialize)]
        struct Row<'a> {
            distribution: &'a crate::chain::ComponentDistribution,
            currents: &'a crate::born::CurrentVector,
        }
        let doc: Vec<Row> = rows
            .iter()
            .map(|(distribution, currents)| Row {
                distribution,
                currents,
            })
            .collect();
        let json = serde_json::to_string_pretty(&doc).expect("rows serialize");
        files.push(write(config.output_dir.join("analytic.json"), &json)?);
    }
    Ok(files)
}

/// `count,occurrences,frequency,expected`
pub fn histogram_csv(result: &EnsembleResult, expected: &[f64]) -> String {
    let mut csv = String::from("count,occurrences,frequency,expected\n");
    for (count, &occ) in result.count_histogram.iter().enumerate() {
        let freq = occ as f64 / result.trials as f64;
        writeln!(
            csv,
            "{count},{occ},{},{}",
            fmt_real(freq),
            fmt_real(expected[count])
        )
        .unwrap();
    }
    csv
}

/// Runs the reduction ensemble; writes `histogram.csv` / `ensemble.json`
/// per the format and always `manifest.json`.
pub fn cmd_simulate(config: &RunConfig, exec: Execution) -> Result<Vec<PathBuf>> {
    let chain = config.validate()?;
    config.prepare_output()?;
    let result = run_with_engine(
        &ReductionEngine,
        &chain,
        config.query_time,
        config.trials,
        config.master_seed,
        exec,
    )?;
    let expected = born_distribution(&chain, config.query_time)?;
    let dir = &config.output_dir;
    let mut files = Vec::new();
    if config.format.csv() {
        files.push(write(dir.join("histogram.csv"), &histogram_csv(&result, &expected.probs))?);
    }
    if config.format.json() {
        files.push(write(dir.join("ensemble.json"), &result.to_json())?);
    }
    let manifest = Manifest {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        chain,
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    files.push(write(dir.join("manifest.json"), &json)?);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub failures: Vec<String>,
    pub alpha: f64,
    /// Reduction ensemble against the unreduced count distribution.
    pub reduction_vs_born: ComparisonReport,
    /// Jump-process oracle against the unreduced count distribution.
    pub oracle_vs_born: ComparisonReport,
    /// Homogeneity of the reduction and oracle histograms.
    pub reduction_vs_oracle: ChiSquareTest,
}

/// Runs the reduction ensemble, the oracle and the unreduced dynamics and
/// writes `report.json`. Insufficient data is returned as an error.
pub fn cmd_verify(config: &RunConfig, exec: Execution) -> Result<VerifyReport> {
    verify_with_engine(&ReductionEngine, config, exec)
}

/// [`cmd_verify`] with a substitute reduction engine.
pub fn verify_with_engine<E: TrialEngine>(
    engine: &E,
    config: &RunConfig,
    exec: Execution,
) -> Result<VerifyReport> {
    let chain = config.validate()?;
    config.prepare_output()?;
    let (t, n, seed) = (config.query_time, config.trials, config.master_seed);
    let reduction = run_with_engine(engine, &chain, t, n, seed, exec)?;
    let oracle = run_with_engine(&GillespieEngine, &chain, t, n, seed, exec)?;
    let born = born_distribution(&chain, t)?;

    let reduction_vs_born = compare(&reduction, &born)?;
    let oracle_vs_born = compare(&oracle, &born)?;
    let reduction_vs_oracle = compare_ensembles(&reduction, &oracle)?;

    let mut failures = Vec::new();
    let mut check_chi = |name: &str, test: &ChiSquareTest| {
        if test.p_value < VERIFY_ALPHA {
            failures.push(format!(
                "{name}: chi-square {:.4} (df {}) p = {:.3e} < {VERIFY_ALPHA}",
                test.statistic, test.df, test.p_value
            ));
        }
    };
    check_chi("reduction_vs_born", &reduction_vs_born.chi_square);
    check_chi("oracle_vs_born", &oracle_vs_born.chi_square);
    check_chi("reduction_vs_oracle", &reduction_vs_oracle);
    for ks in &reduction_vs_born.per_cycle_ks {
        let critical = ks_critical_01pct(ks.samples);
        if ks.statistic >= critical {
            failures.push(format!(
                "cycle_{}_ks: D = {:.5} >= {:.5} (n = {}, rate {})",
                ks.cycle, ks.statistic, critical, ks.samples, ks.rate
            ));
        }
    }
    let report = VerifyReport {
        passed: failures.is_empty(),
        failures,
        alpha: VERIFY_ALPHA,
        reduction_vs_born,
        oracle_vs_born,
        reduction_vs_oracle,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(config.output_dir.join("report.json"), &json)?;
    Ok(report)
}

/// Exit status for a command error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InsufficientData(_) => exit::INSUFFICIENT_DATA,
        Error::InvalidArgument(_) | Error::Io { .. } | Error::Json { .. } => exit::USAGE,
        _ => exit::STATISTICAL_FAILURE,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_source_json() {
        let a: ChainSource = serde_json::from_str(r#"{"n_atoms": 3, "k": 0.5}"#).unwrap();
        assert_eq!(a, ChainSource::Atoms { n_atoms: 3, k: 0.5 });
        let r: ChainSource = serde_json::from_str(r#"{"rates": [2, 1]}"#).unwrap();
        assert_eq!(r, ChainSource::Rates { rates: vec![2.0, 1.0] });
        assert!(serde_json::from_str::<ChainSource>(r#"{"n_atoms": 3, "k": 1, "rates": [1]}"#).is_err());
    }

    #[test]
    fn config_file_overlays_defaults() {
        let file: ConfigFile = serde_json::from_str(r#"{"trials": 7, "format": "csv"}"#).unwrap();
        let cfg = file.apply(RunConfig::default());
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.format, OutputFormat::Csv);
        assert_eq!(cfg.master_seed, 42);
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[0.0, 1.0, 2.0]).is_ok());
        assert!(check_grid(&[0.0, 0.0]).is_err());
        assert!(check_grid(&[-1.0]).is_err());
        assert!(check_grid(&[]).is_err());
        assert_eq!(uniform_grid(2.0, 3), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn zero_trials_is_usage_error() {
        let cfg = RunConfig {
            trials: 0,
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert_eq!(exit_code(&err), exit::USAGE);
    }

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.0, 1.0, -2.0, 0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_real(-2.0), "-2");
    }
}
