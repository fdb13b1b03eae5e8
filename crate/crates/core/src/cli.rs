//! Command dispatch behind the `misofade` binary.
//!
//! [`run`] evaluates one command against a model file and writes its artifacts
//! into the output directory: always `report.toml`, plus `sweep.csv` (and
//! `sweep.svg` with `emit_plot`) for `sweep`. Artifacts never depend on the
//! worker count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::acceptance;
use crate::bounds::{self, McConfig, OptimizerConfig, Past, UpperMode};
use crate::capacity_sim::{self, format_sig, QuadConfig, SimulationTable};
use crate::error::{Error, Result};
use crate::fading_number::{self, FadingNumberReport};
use crate::linalg::{CVector, ONE, ZERO};
use crate::process_models::{load_model_file, FadingProcess, ModelSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const REPORT_FILE: &str = "report.toml";
pub const CSV_FILE: &str = "sweep.csv";
pub const PLOT_FILE: &str = "sweep.svg";

/// Past depth used by bounds on general (non-Gaussian) models unless given.
pub const DEFAULT_MC_KAPPA: usize = 1;
/// Past depth of the Gaussian upper bound unless given.
pub const DEFAULT_GAUSS_KAPPA: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Dstar,
    ChiGauss,
    ChiIidMemory,
    BoundUpper,
    BoundLower,
    Isotropic,
    Sweep,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Dstar,
        Command::ChiGauss,
        Command::ChiIidMemory,
        Command::BoundUpper,
        Command::BoundLower,
        Command::Isotropic,
        Command::Sweep,
        Command::Selftest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Dstar => "dstar",
            Command::ChiGauss => "chi-gauss",
            Command::ChiIidMemory => "chi-iid-memory",
            Command::BoundUpper => "bound-upper",
            Command::BoundLower => "bound-lower",
            Command::Isotropic => "isotropic",
            Command::Sweep => "sweep",
            Command::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Parses a comma-separated list of SNR values in dB.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("invalid SNR value `{s}`")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model_path: Option<PathBuf>,
    pub seed: u64,
    /// Past depth; `None` selects the command default.
    pub kappa: Option<usize>,
    pub mc_samples: usize,
    pub snr_grid_db: Vec<f64>,
    /// Output directory (created if missing).
    pub output_path: PathBuf,
    pub emit_plot: bool,
    /// Display information values in bits.
    pub bits: bool,
    pub upper_mode: Option<UpperMode>,
    pub noise_var: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: Command, output_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            model_path: None,
            seed: 0,
            kappa: None,
            mc_samples: McConfig::default().samples,
            snr_grid_db: Vec::new(),
            output_path: output_path.into(),
            emit_plot: false,
            bits: false,
            upper_mode: None,
            noise_var: 1.0,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.command != Command::Selftest && self.model_path.is_none() {
            return Err(Error::Config(format!("`{}` needs --model", self.command)));
        }
        if self.command == Command::Sweep && self.snr_grid_db.is_empty() {
            return Err(Error::Config("`sweep` needs --snr-grid".into()));
        }
        if self.mc_samples < 1000 {
            return Err(Error::Config(format!("--mc-samples must be at least 1000, got {}", self.mc_samples)));
        }
        if self.kappa == Some(0) && self.command == Command::BoundUpper {
            return Err(Error::Config("--kappa must be positive for `bound-upper`".into()));
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(Error::Config("the noise variance must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("--threads must be positive".into()));
        }
        Ok(())
    }

    fn mc(&self) -> McConfig {
        let defaults = McConfig::default();
        McConfig {
            samples: self.mc_samples,
            search_samples: defaults.search_samples.min(self.mc_samples),
            seed: self.seed,
            ..defaults
        }
    }

    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            seed: self.seed,
            ..OptimizerConfig::default()
        }
    }
}

/// What a successful run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// 0, or 2 when an optimizer ran out of budget, or 1 when a self-test criterion failed.
    pub exit_code: i32,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct RunEcho {
    command: String,
    model: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<usize>,
    mc_samples: usize,
    snr_grid_db: Vec<f64>,
    noise_var: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper_mode: Option<String>,
    units: String,
    version: String,
}

#[derive(Serialize)]
struct ResultSection {
    kind: String,
    value: f64,
    unit: String,
    direction_re: Vec<f64>,
    direction_im: Vec<f64>,
    warnings: Vec<String>,
    /// Raw diagnostics; information-valued entries are in nats.
    diagnostics: std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EvaluationSection {
    bracket_value: f64,
    stderr: f64,
    kappa: usize,
    past: String,
    method: String,
    sequence_re: Vec<Vec<f64>>,
    sequence_im: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SweepSection {
    input_kind: String,
    reference_chi: f64,
    memory_term: f64,
    noise_var: f64,
    rows: usize,
    csv: String,
}

#[derive(Serialize)]
struct CriterionSection {
    id: u32,
    name: String,
    status: String,
    details: Vec<String>,
}

#[derive(Serialize)]
struct Report {
    run: RunEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<ResultSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<EvaluationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    criteria: Vec<CriterionSection>,
}

struct Display {
    bits: bool,
}

impl Display {
    fn info(&self, nats: f64) -> f64 {
        if self.bits {
            nats / std::f64::consts::LN_2
        } else {
            nats
        }
    }

    fn unit(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }
}

/// Real and imaginary parts, with negative zeros cleared.
fn split(v: &CVector) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|z| z.re + 0.0).collect(), v.iter().map(|z| z.im + 0.0).collect())
}

fn result_section(report: &FadingNumberReport, display: &Display) -> ResultSection {
    let (re, im) = report.direction.as_ref().map(split).unwrap_or_default();
    ResultSection {
        kind: report.kind.as_str().into(),
        value: display.info(report.value),
        unit: display.unit().into(),
        direction_re: re,
        direction_im: im,
        warnings: report.warnings.clone(),
        diagnostics: report.diagnostics.clone(),
    }
}

fn evaluation_section(report: &FadingNumberReport, display: &Display) -> Option<EvaluationSection> {
    report.evaluation.as_ref().map(|e| EvaluationSection {
        bracket_value: display.info(e.bracket_value),
        stderr: display.info(e.stderr),
        kappa: e.kappa,
        past: e.past.to_string(),
        method: e.method.as_str().into(),
        sequence_re: e.direction_sequence.iter().map(|x| split(x).0).collect(),
        sequence_im: e.direction_sequence.iter().map(|x| split(x).1).collect(),
    })
}

fn gaussian_only<'a>(spec: &'a ModelSpec, command: Command) -> Result<&'a crate::process_models::GaussianVectorProcess> {
    spec.process.as_gaussian().ok_or_else(|| {
        Error::Precondition(format!("`{command}` needs a Gaussian model (the model has non-Gaussian innovations)"))
    })
}

fn first_basis(nt: usize) -> CVector {
    CVector::from_fn(nt, |i, _| if i == 0 { ONE } else { ZERO })
}

/// Evaluates `config` and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a thread pool: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let display = Display { bits: config.bits };
    let spec = match &config.model_path {
        Some(p) if config.command != Command::Selftest => Some(load_model_file(p)?),
        _ => None,
    };
    let mut kappa_echo = config.kappa;
    let mut upper_echo = None;
    let mut report = Report {
        run: RunEcho {
            command: config.command.as_str().into(),
            model: config.model_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            seed: config.seed,
            kappa: None,
            mc_samples: config.mc_samples,
            snr_grid_db: config.snr_grid_db.clone(),
            noise_var: config.noise_var,
            upper_mode: None,
            units: display.unit().into(),
            version: VERSION.into(),
        },
        result: None,
        evaluation: None,
        sweep: None,
        criteria: Vec::new(),
    };
    let mut summary = Vec::new();
    let mut exit_code = 0;
    let mut extra_files: Vec<(PathBuf, String)> = Vec::new();

    let record = |fr: FadingNumberReport, summary: &mut Vec<String>, report: &mut Report| -> i32 {
        summary.push(format!("{} = {} {}", fr.kind, format_sig(display.info(fr.value), 10), display.unit()));
        for w in &fr.warnings {
            summary.push(format!("warning: {w}"));
        }
        let not_converged = !fr.converged() || fr.diagnostic("ascent_converged") == Some(0.0);
        report.result = Some(result_section(&fr, &display));
        report.evaluation = evaluation_section(&fr, &display);
        if not_converged {
            summary.push("optimizer did not converge; reporting the best value found".into());
            2
        } else {
            0
        }
    };

    match config.command {
        Command::Dstar => {
            let g = gaussian_only(spec.as_ref().unwrap(), config.command)?;
            let (value, direction) = fading_number::d_star(g.mean(), g.stationary_covariance())?;
            let chi = fading_number::chi_memoryless_gauss(value)?;
            let (re, im) = split(&direction);
            summary.push(format!("d* = {}", format_sig(value, 10)));
            report.result = Some(ResultSection {
                kind: "d_star".into(),
                value,
                unit: "dimensionless".into(),
                direction_re: re,
                direction_im: im,
                warnings: Vec::new(),
                diagnostics: [
                    ("d_star_sq".to_string(), value * value),
                    ("chi_memoryless".to_string(), chi),
                ]
                .into_iter()
                .collect(),
            });
        }
        Command::ChiGauss => {
            let g = gaussian_only(spec.as_ref().unwrap(), config.command)?;
            let memoryless = fading_number::memoryless_gauss_report(g)?;
            let mut fr = fading_number::gauss_upper_report(g)?;
            fr.diagnostics.insert("chi_memoryless".into(), memoryless.value);
            exit_code = record(fr, &mut summary, &mut report);
        }
        Command::ChiIidMemory => {
            let g = gaussian_only(spec.as_ref().unwrap(), config.command)?;
            exit_code = record(fading_number::spatial_iid_report(g)?, &mut summary, &mut report);
        }
        Command::BoundLower | Command::Isotropic => {
            let process = &spec.as_ref().unwrap().process;
            let past = match (config.kappa, process) {
                (Some(k), _) => Past::Finite(k),
                (None, FadingProcess::Gaussian(_)) => Past::Infinite,
                (None, FadingProcess::General(_)) => {
                    kappa_echo = Some(DEFAULT_MC_KAPPA);
                    Past::Finite(DEFAULT_MC_KAPPA)
                }
            };
            let fr = if config.command == Command::BoundLower {
                bounds::lower_bound(process, past, &config.mc(), &config.optimizer())?
            } else {
                bounds::isotropic_fading_number(process, &first_basis(process.nt()), past, &config.mc())?
            };
            exit_code = record(fr, &mut summary, &mut report);
        }
        Command::BoundUpper => {
            let process = &spec.as_ref().unwrap().process;
            let gaussian = process.as_gaussian().is_some();
            let kappa = config
                .kappa
                .unwrap_or(if gaussian { DEFAULT_GAUSS_KAPPA } else { DEFAULT_MC_KAPPA });
            let mode = config.upper_mode.unwrap_or(if gaussian {
                UpperMode::CoordinateAscent
            } else {
                UpperMode::ConstantDirection
            });
            kappa_echo = Some(kappa);
            upper_echo = Some(mode.as_str().to_string());
            let fr = bounds::upper_bound(process, kappa, mode, &config.mc(), &config.optimizer())?;
            exit_code = record(fr, &mut summary, &mut report);
        }
        Command::Sweep => {
            let g = gaussian_only(spec.as_ref().unwrap(), config.command)?;
            let beam = bounds::lower_bound_gaussian(g, Past::Infinite, &config.optimizer())?;
            let direction = beam.direction.clone().expect("lower bound reports a direction");
            let table = capacity_sim::capacity_sweep(
                g,
                &direction,
                &config.snr_grid_db,
                config.noise_var,
                config.seed,
                &QuadConfig::default(),
            )?;
            exit_code = record(beam, &mut summary, &mut report);
            for r in &table.rows {
                summary.push(format!(
                    "{:>8} dB  I = {}  I - log log SNR = {}",
                    format_sig(r.snr_db, 6),
                    format_sig(display.info(r.mi_nats), 8),
                    format_sig(display.info(r.mi_minus_loglog), 8)
                ));
            }
            report.sweep = Some(SweepSection {
                input_kind: table.input_kind.into(),
                reference_chi: display.info(table.reference_chi),
                memory_term: display.info(table.memory_term),
                noise_var: table.noise_var,
                rows: table.rows.len(),
                csv: CSV_FILE.into(),
            });
            extra_files.push((config.output_path.join(CSV_FILE), table.to_csv()));
            if config.emit_plot {
                extra_files.push((config.output_path.join(PLOT_FILE), plot_svg(&table)));
            }
        }
        Command::Selftest => {
            for c in acceptance::run_all(config.seed) {
                summary.push(c.line());
                if !c.accepted() {
                    exit_code = 1;
                }
                report.criteria.push(CriterionSection {
                    id: c.id,
                    name: c.name.into(),
                    status: c.status().into(),
                    details: c.details(),
                });
            }
        }
    }

    report.run.kappa = kappa_echo;
    report.run.upper_mode = upper_echo;
    let text = toml::to_string(&report).map_err(|e| Error::Config(format!("cannot serialize the report: {e}")))?;
    fs::create_dir_all(&config.output_path)?;
    let mut files = vec![config.output_path.join(REPORT_FILE)];
    write_file(&files[0], &text)?;
    for (path, contents) in extra_files {
        write_file(&path, &contents)?;
        files.push(path);
    }
    Ok(RunOutcome {
        exit_code,
        summary,
        files,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(Error::from)
}

/// Line chart of `I - log log SNR` against SNR with the reference fading number.
pub fn plot_svg(table: &SimulationTable) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 60.0;
    let xs: Vec<f64> = table.rows.iter().map(|r| r.snr_db).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.mi_minus_loglog).collect();
    let (x0, x1) = bounds_of(&xs);
    let (mut y0, mut y1) = bounds_of(&ys.iter().copied().chain([table.reference_chi]).collect::<Vec<_>>());
    let pad = 0.05 * (y1 - y0).max(1e-3);
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| M + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let points: Vec<String> = xs.iter().zip(&ys).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{b:.2}\" stroke=\"black\"/>\n",
        b = H - M,
        r = W - M
    ));
    let chi_y = sy(table.reference_chi);
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{chi_y:.2}\" x2=\"{:.2}\" y2=\"{chi_y:.2}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n",
        W - M
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">reference chi = {}</text>\n",
        W - M,
        chi_y - 6.0,
        format_sig(table.reference_chi, 6)
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>\n",
        points.join(" ")
    ));
    for p in &points {
        let (x, y) = p.split_once(',').unwrap();
        svg.push_str(&format!("<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"steelblue\"/>\n"));
    }
    for (v, label) in [(x0, format_sig(x0, 4)), (x1, format_sig(x1, 4))] {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{label}</text>\n",
            sx(v),
            H - M + 18.0
        ));
    }
    for v in [y0, y1] {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            M - 6.0,
            sy(v) + 4.0,
            format_sig(v, 4)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">SNR [dB]</text>\n",
        W / 2.0,
        H - 15.0
    ));
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2})\">I - log log SNR [nats]</text>\n",
        H / 2.0,
        H / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn bounds_of(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), c);
        }
        assert!("chi".parse::<Command>().is_err());
    }

    #[test]
    fn snr_grid_parsing() {
        assert_eq!(parse_snr_grid("40, 60,80").unwrap(), vec![40.0, 60.0, 80.0]);
        assert!(parse_snr_grid("40,x").is_err());
        assert!(parse_snr_grid("nan").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new(Command::Sweep, "/tmp/x");
        assert!(c.validate().is_err());
        c.model_path = Some("m.toml".into());
        assert!(c.validate().is_err());
        c.snr_grid_db = vec![40.0];
        assert!(c.validate().is_ok());
        c.mc_samples = 10;
        assert!(c.validate().is_err());
        assert!(RunConfig::new(Command::Selftest, "/tmp/x").validate().is_ok());
    }
}
