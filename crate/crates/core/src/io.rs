//! Configuration files and plain-text outputs.
//!
//! A config file is TOML with a few top-level keys and one table per
//! section; every key is optional and an empty file gives the defaults:
//!
//! ```toml
//! final_time = 0.1
//! seed = 42
//!
//! [model]
//! law = "singular"      # or "power-law"
//! epsilon = 0.5
//! gamma = 20.0          # power law only
//! g_slope = 10.0
//! p_homeostatic = 10.0
//!
//! [grid]
//! x_min = -4.0
//! x_max = 4.0
//! cells = 1600          # or h = 0.005
//!
//! [initial]
//! profile = "plateau"   # plateau | gaussian | table
//! height = 0.8
//! half_width = 0.5
//! smoothing_width = 0.1
//!
//! [solver]
//! scheme = "explicit"   # or "semi-implicit" (needs dt)
//! cfl_safety = 0.9
//! snapshot_interval = 0.005
//! entropy_stride = 1
//! ```
//!
//! Outputs never contain timestamps; the only identifier is the config hash.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{InitialProfile, Integrator, NewtonSettings, RunConfig, ValidationError};
use crate::diagnostics::DiagnosticsRecord;
use crate::experiments::FIG1_GAMMA;
use crate::model::{Grid1D, GrowthLaw, PressureLaw, SimState};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Validation(#[from] ValidationError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl IoError {
    fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    fn file(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::File {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    final_time: Option<f64>,
    seed: Option<u64>,
    model: Option<ModelSection>,
    grid: Option<GridSection>,
    initial: Option<InitialSection>,
    solver: Option<SolverSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    law: Option<String>,
    epsilon: Option<f64>,
    gamma: Option<f64>,
    g_slope: Option<f64>,
    p_homeostatic: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    x_min: Option<f64>,
    x_max: Option<f64>,
    cells: Option<usize>,
    h: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    profile: Option<String>,
    height: Option<f64>,
    half_width: Option<f64>,
    smoothing_width: Option<f64>,
    amplitude: Option<f64>,
    sigma: Option<f64>,
    x: Option<Vec<f64>>,
    n: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    scheme: Option<String>,
    dt: Option<f64>,
    cfl_safety: Option<f64>,
    snapshot_interval: Option<f64>,
    entropy_stride: Option<usize>,
    newton_max_iterations: Option<usize>,
    newton_tolerance: Option<f64>,
    newton_max_halvings: Option<u32>,
}

/// Values given on the command line; each one beats the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub law: Option<String>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub g_slope: Option<f64>,
    pub p_homeostatic: Option<f64>,
    pub final_time: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub cells: Option<usize>,
    pub h: Option<f64>,
    pub scheme: Option<String>,
    pub dt: Option<f64>,
    pub cfl_safety: Option<f64>,
    pub snapshot_interval: Option<f64>,
    pub entropy_stride: Option<usize>,
    pub seed: Option<u64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a config document, then applies `overrides`.
pub fn parse_config_str(text: &str, overrides: &ConfigOverrides) -> Result<RunConfig, IoError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        IoError::parse(line, e.message().to_string())
    })?;
    let config = build(file, overrides)?;
    config.validate()?;
    Ok(config)
}

/// Reads `path` and hands it to [`parse_config_str`].
pub fn parse_config(path: &Path, overrides: &ConfigOverrides) -> Result<RunConfig, IoError> {
    let text = fs::read_to_string(path).map_err(IoError::file(path))?;
    parse_config_str(&text, overrides)
}

fn build(file: ConfigFile, o: &ConfigOverrides) -> Result<RunConfig, IoError> {
    let defaults = RunConfig::default();
    let model = file.model.unwrap_or_default();
    let grid = file.grid.unwrap_or_default();
    let initial = file.initial.unwrap_or_default();
    let solver = file.solver.unwrap_or_default();

    let law_name = o
        .law
        .clone()
        .or(model.law)
        .unwrap_or_else(|| "singular".into());
    let law = match law_name.as_str() {
        "singular" => PressureLaw::Singular {
            epsilon: o
                .epsilon
                .or(model.epsilon)
                .unwrap_or(crate::config::DEFAULT_EPSILON),
        },
        "power-law" => PressureLaw::PowerLaw {
            gamma: o.gamma.or(model.gamma).unwrap_or(FIG1_GAMMA),
        },
        other => {
            return Err(IoError::parse(
                None,
                format!("unknown law {other:?}; expected \"singular\" or \"power-law\""),
            ))
        }
    };
    let growth = GrowthLaw {
        g_slope: o
            .g_slope
            .or(model.g_slope)
            .unwrap_or(defaults.growth.g_slope),
        p_homeostatic: o
            .p_homeostatic
            .or(model.p_homeostatic)
            .unwrap_or(defaults.growth.p_homeostatic),
    };

    let x_min = o.x_min.or(grid.x_min).unwrap_or(defaults.grid.x_min());
    let x_max = o.x_max.or(grid.x_max).unwrap_or(defaults.grid.x_max());
    // a resolution given on the command line replaces both file keys
    let (cells, h) = if o.cells.is_some() || o.h.is_some() {
        (o.cells, o.h)
    } else {
        (grid.cells, grid.h)
    };
    let grid = match (cells, h) {
        (Some(_), Some(_)) => {
            return Err(IoError::parse(
                None,
                "give either grid.cells or grid.h, not both",
            ))
        }
        (_, Some(h)) => Grid1D::with_spacing(x_min, x_max, h),
        (cells, None) => {
            let cells = cells
                .unwrap_or_else(|| ((x_max - x_min) / defaults.grid.h()).round().max(3.0) as usize);
            Grid1D::new(x_min, x_max, cells)
        }
    }
    .map_err(ValidationError::from)?;

    let initial = build_initial(initial)?;

    let scheme = o
        .scheme
        .clone()
        .or(solver.scheme)
        .unwrap_or_else(|| "explicit".into());
    let dt = o.dt.or(solver.dt);
    let integrator = match scheme.as_str() {
        "explicit" => Integrator::ExplicitUpwind,
        "semi-implicit" => Integrator::SemiImplicit {
            dt: dt
                .ok_or_else(|| IoError::parse(None, "the semi-implicit scheme needs solver.dt"))?,
        },
        other => {
            return Err(IoError::parse(
                None,
                format!("unknown scheme {other:?}; expected \"explicit\" or \"semi-implicit\""),
            ))
        }
    };
    let newton_defaults = NewtonSettings::default();
    Ok(RunConfig {
        grid,
        law,
        growth,
        initial,
        final_time: o
            .final_time
            .or(file.final_time)
            .unwrap_or(defaults.final_time),
        integrator,
        cfl_safety: o
            .cfl_safety
            .or(solver.cfl_safety)
            .unwrap_or(defaults.cfl_safety),
        snapshot_interval: o
            .snapshot_interval
            .or(solver.snapshot_interval)
            .unwrap_or(defaults.snapshot_interval),
        newton: NewtonSettings {
            max_iterations: solver
                .newton_max_iterations
                .unwrap_or(newton_defaults.max_iterations),
            tolerance: solver.newton_tolerance.unwrap_or(newton_defaults.tolerance),
            max_halvings: solver
                .newton_max_halvings
                .unwrap_or(newton_defaults.max_halvings),
        },
        entropy_stride: o
            .entropy_stride
            .or(solver.entropy_stride)
            .unwrap_or(defaults.entropy_stride),
        seed: o.seed.or(file.seed).unwrap_or(defaults.seed),
        out_dir: None,
    })
}

fn build_initial(s: InitialSection) -> Result<InitialProfile, IoError> {
    let InitialProfile::Plateau {
        height,
        half_width,
        smoothing_width,
    } = InitialProfile::default()
    else {
        unreachable!("the default profile is a plateau")
    };
    match s.profile.as_deref().unwrap_or("plateau") {
        "plateau" => Ok(InitialProfile::Plateau {
            height: s.height.unwrap_or(height),
            half_width: s.half_width.unwrap_or(half_width),
            smoothing_width: s.smoothing_width.unwrap_or(smoothing_width),
        }),
        "gaussian" => Ok(InitialProfile::Gaussian {
            amplitude: s.amplitude.unwrap_or(height),
            sigma: s.sigma.unwrap_or(0.1),
        }),
        "table" => match (s.x, s.n) {
            (Some(x), Some(n)) => Ok(InitialProfile::Table { x, n }),
            _ => Err(IoError::parse(
                None,
                "a table profile needs both initial.x and initial.n",
            )),
        },
        other => Err(IoError::parse(
            None,
            format!("unknown profile {other:?}; expected plateau, gaussian or table"),
        )),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(IoError::file(dir))?;
    }
    fs::write(path, contents).map_err(IoError::file(path))
}

/// Whitespace-separated `x n p` rows under a `#` header carrying the config
/// hash.
pub fn format_profile(
    state: &SimState,
    law: &PressureLaw,
    grid: &Grid1D,
    config_hash: &str,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# helecell density profile");
    let _ = writeln!(out, "# config {config_hash}");
    let _ = writeln!(out, "# law {} t {}", law.name(), state.t);
    let _ = writeln!(out, "# x n p");
    for (x, &n) in grid.centers().zip(state.n.values()) {
        let _ = writeln!(out, "{x} {n} {}", law.pressure_unchecked(n));
    }
    out
}

/// Companion file next to a profile: `<stem>_reference.<ext>`.
pub fn reference_path(profile: &Path) -> PathBuf {
    let stem = profile
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("profile");
    let name = match profile.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_reference.{ext}"),
        None => format!("{stem}_reference"),
    };
    profile.with_file_name(name)
}

/// Writes the profile and the constant-1 reference line; returns the path
/// of the reference file.
pub fn emit_profile(
    state: &SimState,
    law: &PressureLaw,
    grid: &Grid1D,
    config_hash: &str,
    path: &Path,
) -> Result<PathBuf, IoError> {
    write_file(path, &format_profile(state, law, grid, config_hash))?;
    let reference = reference_path(path);
    let line = format!(
        "# constant density 1 (full packing)\n# x n\n{} 1\n{} 1\n",
        grid.x_min(),
        grid.x_max()
    );
    write_file(&reference, &line)?;
    Ok(reference)
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with the fixed column order of [`DiagnosticsRecord::COLUMNS`]; absent
/// optional values are empty fields.
pub fn format_series(records: &[DiagnosticsRecord]) -> String {
    let mut out = DiagnosticsRecord::COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mass,
            r.max_n,
            r.max_p,
            r.support_radius,
            r.bv_seminorm,
            r.compl_residual_l1,
            r.state_law_gap,
            r.grad_p_l2_sq,
            optional(r.entropy),
            optional(r.ab_min_ratio)
        );
    }
    out
}

pub fn emit_series(records: &[DiagnosticsRecord], path: &Path) -> Result<(), IoError> {
    write_file(path, &format_series(records))
}

/// Inverse of [`format_series`]. Floats are written in shortest round-trip
/// form, so parsing and re-emitting reproduces the input byte for byte.
pub fn parse_series(text: &str) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    if header != DiagnosticsRecord::COLUMNS.join(",") {
        return Err(IoError::parse(
            Some(1),
            format!("unexpected header {header:?}"),
        ));
    }
    lines
        .map(|(k, line)| {
            let line_no = k + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != DiagnosticsRecord::COLUMNS.len() {
                return Err(IoError::parse(
                    Some(line_no),
                    format!(
                        "expected {} fields, found {}",
                        DiagnosticsRecord::COLUMNS.len(),
                        fields.len()
                    ),
                ));
            }
            let num = |i: usize| -> Result<f64, IoError> {
                fields[i].parse().map_err(|_| {
                    IoError::parse(
                        Some(line_no),
                        format!(
                            "column {}: not a number: {:?}",
                            DiagnosticsRecord::COLUMNS[i],
                            fields[i]
                        ),
                    )
                })
            };
            let opt = |i: usize| -> Result<Option<f64>, IoError> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            Ok(DiagnosticsRecord {
                t: num(0)?,
                mass: num(1)?,
                max_n: num(2)?,
                max_p: num(3)?,
                support_radius: num(4)?,
                bv_seminorm: num(5)?,
                compl_residual_l1: num(6)?,
                state_law_gap: num(7)?,
                grad_p_l2_sq: num(8)?,
                entropy: opt(9)?,
                ab_min_ratio: opt(10)?,
            })
        })
        .collect()
}

/// `<dir>/<experiment>_<hash>.<ext>`
pub fn output_path(dir: &Path, experiment: &str, config_hash: &str, ext: &str) -> PathBuf {
    dir.join(format!("{experiment}_{config_hash}.{ext}"))
}

/// Pretty JSON summary at [`output_path`] with extension `json`.
pub fn write_summary<T: Serialize>(
    dir: &Path,
    experiment: &str,
    config_hash: &str,
    summary: &T,
) -> Result<PathBuf, IoError> {
    let path = output_path(dir, experiment, config_hash, "json");
    let mut json = serde_json::to_string_pretty(summary)
        .map_err(|e| IoError::parse(None, format!("summary does not serialize: {e}")))?;
    json.push('\n');
    write_file(&path, &json)?;
    Ok(path)
}

/// CSV detail file at [`output_path`] with extension `csv`.
pub fn write_table(
    dir: &Path,
    experiment: &str,
    config_hash: &str,
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<PathBuf, IoError> {
    let path = output_path(dir, experiment, config_hash, "csv");
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(&path, &out)?;
    Ok(path)
}

/// Hash over several configs, for experiments that run more than one.
pub fn combined_hash(configs: &[&RunConfig]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for cfg in configs {
        hasher.update(cfg.hash().as_bytes());
    }
    hasher.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config_str("", &ConfigOverrides::default()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "final_time = 0.1\n[model]\nepsilon = \"half\"\n";
        match parse_config_str(text, &ConfigOverrides::default()) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("expected a parse error, got {other:?}"),
        }
        match parse_config_str("[model]\nepsilonn = 0.1\n", &ConfigOverrides::default()) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_epsilon_is_a_validation_error() {
        let err = parse_config_str("[model]\nepsilon = -1\n", &ConfigOverrides::default());
        assert!(matches!(err, Err(IoError::Validation(_))));
    }

    #[test]
    fn overrides_beat_the_file() {
        let o = ConfigOverrides {
            epsilon: Some(0.1),
            ..Default::default()
        };
        let cfg = parse_config_str("[model]\nepsilon = 0.5\n", &o).unwrap();
        assert_eq!(cfg.law, PressureLaw::Singular { epsilon: 0.1 });
    }

    #[test]
    fn reference_path_sits_next_to_profile() {
        assert_eq!(
            reference_path(Path::new("out/fig1_singular.dat")),
            PathBuf::from("out/fig1_singular_reference.dat")
        );
    }
}
