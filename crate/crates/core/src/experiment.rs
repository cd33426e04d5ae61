//! Contraction-number sweeps over coefficient sets, levels and smoothing steps.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::CoefficientField;
use crate::error::{MgError, Result};
use crate::mesh::{Domain, LatticeMesh};
use crate::smoother::{SmootherConfig, SmootherKind};
use crate::spectral::{contraction_number, PowerOptions};
use crate::vcycle::Hierarchy;

/// Black-subdomain diffusion values of the standard sweep; everything else is 1.
pub const STANDARD_ALPHA_BLACK: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// CSV header, in output order.
pub const CSV_COLUMNS: [&str; 12] = [
    "domain", "smoother", "alpha_b", "beta_b", "alpha_w", "beta_w", "k", "m", "rho", "iterations", "converged",
    "seconds",
];

pub fn standard_coefficient_sets() -> Vec<CoefficientField> {
    STANDARD_ALPHA_BLACK
        .iter()
        .map(|&a| CoefficientField { alpha_black: a, beta_black: 1.0, alpha_white: 1.0, beta_white: 1.0 })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Markdown,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "json-lines" | "jsonl" => Ok(OutputFormat::JsonLines),
            other => Err(MgError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// The four standard sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
    Table4,
}

impl Preset {
    pub fn domain(self) -> Domain {
        match self {
            Preset::Table1 | Preset::Table2 => Domain::Cube,
            Preset::Table3 | Preset::Table4 => Domain::Fichera,
        }
    }

    pub fn smoother(self) -> SmootherKind {
        match self {
            Preset::Table1 | Preset::Table3 => SmootherKind::Edge,
            Preset::Table2 | Preset::Table4 => SmootherKind::Vertex,
        }
    }
}

impl FromStr for Preset {
    type Err = MgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            "table3" => Ok(Preset::Table3),
            "table4" => Ok(Preset::Table4),
            other => Err(MgError::Config(format!("unknown preset '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub smoother: SmootherKind,
    pub max_level: usize,
    pub steps: Vec<usize>,
    pub coefficient_sets: Vec<CoefficientField>,
    /// Overrides the smoother's default damping.
    pub eta: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Wall-time budget per cell.
    pub cell_budget_secs: f64,
    /// Refuse hierarchies whose finest level would exceed this many unknowns.
    pub max_dofs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let power = PowerOptions::default();
        ExperimentConfig {
            domain: Domain::Cube,
            smoother: SmootherKind::Edge,
            max_level: 4,
            steps: (1..=5).collect(),
            coefficient_sets: standard_coefficient_sets(),
            eta: None,
            tol: power.tol,
            max_iterations: power.max_iterations,
            seed: power.seed,
            output: None,
            format: OutputFormat::Csv,
            jobs: 0,
            cell_budget_secs: 1800.0,
            max_dofs: 2_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        ExperimentConfig { domain: preset.domain(), smoother: preset.smoother(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level < 1 {
            return Err(MgError::Config("max level must be at least 1".into()));
        }
        if self.steps.is_empty() || self.steps.contains(&0) {
            return Err(MgError::Config("smoothing steps must be a non-empty list of positive integers".into()));
        }
        if self.coefficient_sets.is_empty() {
            return Err(MgError::Config("no coefficient sets given".into()));
        }
        for c in &self.coefficient_sets {
            c.validate()?;
        }
        if let Some(eta) = self.eta {
            SmootherConfig::new(self.smoother, eta)?;
        }
        if !(self.tol > 0.0) || self.max_iterations == 0 {
            return Err(MgError::Config("power iteration needs tol > 0 and max iterations > 0".into()));
        }
        if !(self.cell_budget_secs > 0.0) {
            return Err(MgError::Config("cell time budget must be positive".into()));
        }
        let bound = interior_edge_bound(self.max_level);
        if bound > self.max_dofs {
            return Err(MgError::TooLarge { dofs: bound, limit: self.max_dofs });
        }
        Ok(())
    }

    pub fn smoother_config(&self) -> SmootherConfig {
        match self.eta {
            Some(eta) => SmootherConfig { variant: self.smoother, eta },
            None => SmootherConfig::with_default_damping(self.smoother),
        }
    }

    pub fn power_options(&self) -> PowerOptions {
        PowerOptions { tol: self.tol, max_iterations: self.max_iterations, seed: self.seed, ..PowerOptions::default() }
    }

    /// Applies one `key = value` setting; keys are the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| MgError::Config(format!("invalid {what} '{value}'"));
        let num = |what: &str| value.trim().parse::<f64>().map_err(|_| bad(what));
        let int = |what: &str| value.trim().parse::<usize>().map_err(|_| bad(what));
        match key.trim().trim_start_matches("--").replace('_', "-").as_str() {
            "preset" => {
                let p: Preset = value.parse()?;
                self.domain = p.domain();
                self.smoother = p.smoother();
            }
            "domain" => self.domain = value.parse()?,
            "smoother" => self.smoother = value.parse()?,
            "max-level" => self.max_level = int("level")?,
            "steps" => self.steps = parse_steps(value)?,
            "alpha-black" => self.set_coefficient(|c, v| c.alpha_black = v, num("alpha")?),
            "beta-black" => self.set_coefficient(|c, v| c.beta_black = v, num("beta")?),
            "alpha-white" => self.set_coefficient(|c, v| c.alpha_white = v, num("alpha")?),
            "beta-white" => self.set_coefficient(|c, v| c.beta_white = v, num("beta")?),
            "eta" => self.eta = Some(num("damping")?),
            "tol" => self.tol = num("tolerance")?,
            "max-iterations" => self.max_iterations = int("iteration count")?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad("seed"))?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            "format" => self.format = value.parse()?,
            "jobs" => self.jobs = int("job count")?,
            "cell-budget" => self.cell_budget_secs = num("time budget")?,
            "max-dofs" => self.max_dofs = int("unknown count")?,
            other => return Err(MgError::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Applies settings from `key = value` lines; `#` starts a comment.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| MgError::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_key_values(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Setting a single coefficient collapses the sweep to one set based on
    /// the unit coefficients.
    fn set_coefficient(&mut self, f: impl Fn(&mut CoefficientField, f64), v: f64) {
        if self.coefficient_sets.len() != 1 {
            self.coefficient_sets =
                vec![CoefficientField { alpha_black: 1.0, beta_black: 1.0, alpha_white: 1.0, beta_white: 1.0 }];
        }
        f(&mut self.coefficient_sets[0], v);
    }
}

/// Accepts `1,2,3`, `1..5` or `1-5`.
pub fn parse_steps(s: &str) -> Result<Vec<usize>> {
    let bad = || MgError::Config(format!("invalid smoothing steps '{s}'"));
    let s = s.trim();
    let range = s.split_once("..").or_else(|| s.split_once('-'));
    if let Some((a, b)) = range {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let steps: Vec<usize> = s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    if steps.is_empty() || steps.contains(&0) {
        return Err(bad());
    }
    Ok(steps)
}

/// Interior edge count of the full cube at `level`; bounds the Fichera count too.
pub fn interior_edge_bound(level: usize) -> usize {
    let n = 1usize.checked_shl(level as u32 + 1).unwrap_or(usize::MAX);
    n.saturating_mul(3).saturating_mul((n - 1).saturating_mul(n - 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub coefficients: CoefficientField,
    pub k: usize,
    pub m: usize,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub timed_out: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

impl CellResult {
    pub fn ok(&self) -> bool {
        self.converged && !self.timed_out && self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub config: ExperimentConfig,
    pub eta: f64,
    pub version: String,
    pub cells: Vec<CellResult>,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub domain: Domain,
    pub smoother: SmootherKind,
    pub alpha_b: f64,
    pub beta_b: f64,
    pub alpha_w: f64,
    pub beta_w: f64,
    pub k: usize,
    pub m: usize,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

/// Runs every `(coefficient set, k, m)` cell of the sweep.
pub fn run_table(cfg: &ExperimentConfig) -> Result<TableReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| MgError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<TableReport> {
    let smoother = cfg.smoother_config();
    let meshes: Vec<Arc<LatticeMesh>> =
        LatticeMesh::hierarchy(cfg.domain, cfg.max_level).into_iter().map(Arc::new).collect();
    info!(
        "{} / {} smoother, eta = {}, levels 1..={}, {} unknowns on the finest level",
        cfg.domain,
        cfg.smoother,
        smoother.eta,
        cfg.max_level,
        meshes.last().map(|m| m.interior_edges().count()).unwrap_or(0)
    );
    let hierarchies: Vec<Hierarchy<f64>> = cfg
        .coefficient_sets
        .par_iter()
        .map(|c| Hierarchy::from_meshes(&meshes, c, smoother))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for s in 0..cfg.coefficient_sets.len() {
        for k in 1..=cfg.max_level {
            for &m in &cfg.steps {
                jobs.push((s, k, m));
            }
        }
    }
    let budget = Duration::from_secs_f64(cfg.cell_budget_secs);
    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|&(s, k, m)| {
            let start = Instant::now();
            let options = PowerOptions { deadline: Some(start + budget), ..cfg.power_options() };
            let coefficients = cfg.coefficient_sets[s];
            let mut cell = CellResult {
                coefficients,
                k,
                m,
                rho: f64::NAN,
                iterations: 0,
                converged: false,
                timed_out: false,
                seconds: 0.0,
                error: None,
            };
            match contraction_number(&hierarchies[s], k, m, &options) {
                Ok(r) => {
                    cell.rho = r.rho;
                    cell.iterations = r.iterations;
                    cell.converged = r.converged;
                    cell.timed_out = r.timed_out;
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell.seconds = start.elapsed().as_secs_f64();
            if !cell.ok() {
                warn!("{coefficients}, k = {k}, m = {m}: not converged after {} iterations", cell.iterations);
            }
            info!("{coefficients}, k = {k}, m = {m}: rho = {:.6} ({:.1} s)", cell.rho, cell.seconds);
            cell
        })
        .collect();
    Ok(TableReport { config: cfg.clone(), eta: smoother.eta, version: version_string(), cells })
}

pub fn version_string() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl TableReport {
    /// True when every cell converged within its limits.
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(CellResult::ok)
    }

    pub fn cell(&self, coefficients: &CoefficientField, k: usize, m: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| &c.coefficients == coefficients && c.k == k && c.m == m)
    }

    pub fn records(&self) -> Vec<CsvRecord> {
        self.cells
            .iter()
            .map(|c| CsvRecord {
                domain: self.config.domain,
                smoother: self.config.smoother,
                alpha_b: c.coefficients.alpha_black,
                beta_b: c.coefficients.beta_black,
                alpha_w: c.coefficients.alpha_white,
                beta_w: c.coefficients.beta_white,
                k: c.k,
                m: c.m,
                rho: c.rho,
                iterations: c.iterations,
                converged: c.ok(),
                seconds: c.seconds,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in self.records() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One JSON object with the configuration, then one per cell.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        let meta = serde_json::json!({ "config": self.config, "eta": self.eta, "version": self.version });
        writeln!(out, "{meta}")?;
        for r in self.records() {
            writeln!(out, "{}", serde_json::to_string(&r)?)?;
        }
        Ok(())
    }

    /// Tables of `rho` by level and smoothing steps, one per coefficient set.
    pub fn to_markdown(&self) -> String {
        let cfg = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Contraction numbers, {} domain, {} smoother (eta = {}, tol = {:e}, max iterations = {}, seed = {})\n",
            cfg.domain, cfg.smoother, self.eta, cfg.tol, cfg.max_iterations, cfg.seed
        );
        let mut unconverged = false;
        for c in &cfg.coefficient_sets {
            let _ = writeln!(s, "### {c}\n");
            let head: Vec<String> = cfg.steps.iter().map(|m| format!("m={m}")).collect();
            let _ = writeln!(s, "| | {} |", head.join(" | "));
            let _ = writeln!(s, "|---|{}", "---|".repeat(cfg.steps.len()));
            for k in 1..=cfg.max_level {
                let row: Vec<String> = cfg
                    .steps
                    .iter()
                    .map(|&m| match self.cell(c, k, m) {
                        None => "missing".to_string(),
                        Some(cell) if cell.error.is_some() => "failed".to_string(),
                        Some(cell) => {
                            let mut v = if cell.rho > 1.0 { ">1".to_string() } else { format!("{:.3}", cell.rho) };
                            if !cell.ok() {
                                unconverged = true;
                                v.push('*');
                            }
                            v
                        }
                    })
                    .collect();
                let _ = writeln!(s, "| k={k} | {} |", row.join(" | "));
            }
            s.push('\n');
        }
        if unconverged {
            s.push_str("\\* power iteration stopped before meeting its tolerance\n");
        }
        s
    }

    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match format {
            OutputFormat::Csv => self.write_csv(&mut buf)?,
            OutputFormat::JsonLines => self.write_json_lines(&mut buf)?,
            OutputFormat::Markdown => buf.extend_from_slice(self.to_markdown().as_bytes()),
        }
        Ok(buf)
    }

    /// Writes the report to `path`, or stdout when `None`.
    pub fn emit(&self, format: OutputFormat, path: Option<&Path>) -> Result<()> {
        let bytes = self.render(format)?;
        match path {
            Some(p) => fs::write(p, bytes)?,
            None => std::io::stdout().write_all(&bytes)?,
        }
        Ok(())
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(MgError::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(MgError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            max_level: 1,
            steps: vec![1],
            coefficient_sets: vec![CoefficientField::uniform(1.0, 1.0).unwrap()],
            jobs: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_sweep_shape() {
        let cfg = ExperimentConfig::preset(Preset::Table1);
        assert_eq!(cfg.coefficient_sets.len() * cfg.max_level * cfg.steps.len(), 100);
        assert_eq!(cfg.coefficient_sets[0].to_string(), "alpha_b = 0.01, beta_b = 1, alpha_w = 1, beta_w = 1");
        cfg.validate().unwrap();
    }

    #[test]
    fn single_cell() {
        let report = run_table(&tiny()).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert!(report.is_complete());
        assert!((report.cells[0].rho - 0.9065).abs() < 5e-4);
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = TableReport { config: tiny(), eta: 0.1, version: version_string(), cells: vec![] };
        let text = String::from_utf8(report.render(OutputFormat::Csv).unwrap()).unwrap();
        assert_eq!(text, format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn markdown_marks_divergence() {
        let c = CoefficientField::uniform(1.0, 1.0).unwrap();
        let cell = |m, rho| CellResult {
            coefficients: c,
            k: 1,
            m,
            rho,
            iterations: 10,
            converged: true,
            timed_out: false,
            seconds: 0.0,
            error: None,
        };
        let cfg = ExperimentConfig { steps: vec![1, 2], max_level: 1, coefficient_sets: vec![c], ..tiny() };
        let report =
            TableReport { config: cfg, eta: 0.1, version: version_string(), cells: vec![cell(1, 1.0 + 1e-9), cell(2, 0.79012)] };
        let md = report.to_markdown();
        assert!(md.contains("| k=1 | >1 | 0.790 |"), "{md}");
    }

    #[test]
    fn key_value_settings() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_key_values("# sweep\npreset = table4\nsteps = 1..3\nalpha_black = 10  # one set\nseed=7\n").unwrap();
        assert_eq!(cfg.domain, Domain::Fichera);
        assert_eq!(cfg.smoother, SmootherKind::Vertex);
        assert_eq!(cfg.steps, vec![1, 2, 3]);
        assert_eq!(cfg.coefficient_sets, vec![CoefficientField::new(10.0, 1.0, 1.0, 1.0).unwrap()]);
        assert_eq!(cfg.seed, 7);
        assert!(cfg.apply_key_values("colour = blue").is_err());
        assert!(cfg.apply_key_values("steps").is_err());
    }

    #[test]
    fn step_lists() {
        assert_eq!(parse_steps("1,3,5").unwrap(), vec![1, 3, 5]);
        assert_eq!(parse_steps("2-4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_steps("1..=2").unwrap(), vec![1, 2]);
        assert!(parse_steps("0,1").is_err());
        assert!(parse_steps("3..1").is_err());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig { max_level: 0, ..tiny() }.validate().is_err());
        assert!(ExperimentConfig { steps: vec![], ..tiny() }.validate().is_err());
        assert!(ExperimentConfig { eta: Some(-1.0), ..tiny() }.validate().is_err());
        let big = ExperimentConfig { max_level: 6, ..tiny() };
        assert!(matches!(big.validate(), Err(MgError::TooLarge { .. })));
    }

    #[test]
    fn edge_bound_matches_cube() {
        for level in 0..3 {
            let mesh = LatticeMesh::hierarchy(Domain::Cube, level).pop().unwrap();
            assert_eq!(interior_edge_bound(level), mesh.interior_edges().count());
        }
    }
}
