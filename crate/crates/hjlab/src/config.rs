//! Experiment configuration: INI-style sections of `key = value` lines.
//!
//! Sections are `[domain]`, `[grid]`, `[problem]`, `[sweep]`, `[output]`.
//! Unknown sections or keys are rejected; values are scalars or
//! comma-separated lists. A config validates into a [`SweepPlan`] plus output
//! settings.

use crate::catalog::{self, DatumParams};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonian::Hamiltonian;
use crate::rate::{ExperimentKind, SweepPlan};
use crate::solver::ProblemSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

pub const HAMILTONIAN_NAMES: &[&str] = &["quadratic", "power", "zero", "eikonal"];

/// Parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    pub extents: Vec<[f64; 2]>,
    pub sweep_cells: Vec<usize>,
    pub ref_cells: Vec<usize>,
    pub horizon: f64,
    pub hamiltonian: String,
    pub gamma: Option<f64>,
    pub delta: f64,
    pub terminal: String,
    pub terminal_amplitude: Option<f64>,
    pub terminal_center: Option<f64>,
    pub source: String,
    pub source_amplitude: Option<f64>,
    pub kind: ExperimentKind,
    pub epsilons: Vec<f64>,
    /// None = automatic time step.
    pub dt: Option<f64>,
    pub tau: f64,
    pub x0: Vec<f64>,
    pub beta: f64,
    pub alpha: f64,
    /// Divided-difference step for duality checks, as a fraction of epsilon.
    pub eta_factor: f64,
    pub collar: f64,
    pub out_dir: String,
    pub formats: Vec<String>,
}

struct RawConfig {
    // (section, key) -> (value, line)
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(cut) => &raw_line[..cut],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::ConfigParse {
                    line: line_no,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                let known = ["domain", "grid", "problem", "sweep", "output"];
                if !known.contains(&section.as_str()) {
                    return Err(Error::ConfigParse {
                        line: line_no,
                        message: format!("unknown section [{section}]; expected one of {known:?}"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::ConfigParse {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            if section.is_empty() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: "key before any [section] header".into(),
                });
            }
            let key = key.trim().to_string();
            let prev = entries.insert(
                (section.clone(), key.clone()),
                (value.trim().to_string(), line_no),
            );
            if prev.is_some() {
                return Err(Error::ConfigParse {
                    line: line_no,
                    message: format!("duplicate key {key:?} in [{section}]"),
                });
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v)
    }

    fn finish(self) -> Result<()> {
        if let Some(((section, key), (_, line))) = self.entries.into_iter().next() {
            return Err(Error::ConfigParse {
                line,
                message: format!("unknown key {key:?} in [{section}]"),
            });
        }
        Ok(())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| Error::ConfigValidation {
        key: key.into(),
        message: format!("expected a number, got {v:?}"),
    })
}

fn parse_list_f64(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| parse_f64(key, p)).collect()
}

fn parse_list_usize(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|p| {
            p.trim().parse().map_err(|_| Error::ConfigValidation {
                key: key.into(),
                message: format!("expected an integer, got {p:?}"),
            })
        })
        .collect()
}

/// Parse and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut raw = RawConfig::parse(text)?;
    let missing = |key: &str| Error::ConfigValidation {
        key: key.into(),
        message: "required key is missing".into(),
    };

    // [domain]
    let dim: usize = raw
        .take("domain", "dim")
        .map(|v| {
            v.parse::<usize>().map_err(|_| Error::ConfigValidation {
                key: "dim".into(),
                message: format!("expected 1 or 2, got {v:?}"),
            })
        })
        .transpose()?
        .unwrap_or(1);
    if dim != 1 && dim != 2 {
        return Err(Error::ConfigValidation {
            key: "dim".into(),
            message: format!("expected 1 or 2, got {dim}"),
        });
    }
    let mut extents = Vec::new();
    for (axis, name) in ["x", "y"].iter().enumerate().take(dim) {
        let v = raw.take("domain", name).ok_or_else(|| missing(name))?;
        let pair = parse_list_f64(name, &v)?;
        if pair.len() != 2 {
            return Err(Error::ConfigValidation {
                key: (*name).into(),
                message: format!("expected `lo, hi`, got {v:?}"),
            });
        }
        let _ = axis;
        extents.push([pair[0], pair[1]]);
    }

    // [grid]
    let sweep_cells = parse_list_usize(
        "sweep_cells",
        &raw.take("grid", "sweep_cells")
            .ok_or_else(|| missing("sweep_cells"))?,
    )?;
    let ref_cells = match raw.take("grid", "ref_cells") {
        Some(v) => parse_list_usize("ref_cells", &v)?,
        None => sweep_cells.iter().map(|&n| 8 * n).collect(),
    };
    if sweep_cells.len() != dim || ref_cells.len() != dim {
        return Err(Error::ConfigValidation {
            key: "sweep_cells".into(),
            message: format!("cell lists must have {dim} entries"),
        });
    }

    // [problem]
    let horizon = parse_f64(
        "horizon",
        &raw.take("problem", "horizon")
            .ok_or_else(|| missing("horizon"))?,
    )?;
    let hamiltonian = raw
        .take("problem", "hamiltonian")
        .ok_or_else(|| missing("hamiltonian"))?;
    if !HAMILTONIAN_NAMES.contains(&hamiltonian.as_str()) {
        return Err(Error::ConfigValidation {
            key: "hamiltonian".into(),
            message: format!(
                "unknown Hamiltonian {hamiltonian:?}; available: {}",
                HAMILTONIAN_NAMES.join(", ")
            ),
        });
    }
    let gamma = raw
        .take("problem", "gamma")
        .map(|v| parse_f64("gamma", &v))
        .transpose()?;
    let delta = raw
        .take("problem", "delta")
        .map(|v| parse_f64("delta", &v))
        .transpose()?
        .unwrap_or(1e-8);
    let terminal = raw
        .take("problem", "terminal")
        .ok_or_else(|| missing("terminal"))?;
    let terminal_amplitude = raw
        .take("problem", "terminal_amplitude")
        .map(|v| parse_f64("terminal_amplitude", &v))
        .transpose()?;
    let terminal_center = raw
        .take("problem", "terminal_center")
        .map(|v| parse_f64("terminal_center", &v))
        .transpose()?;
    let source = raw
        .take("problem", "source")
        .ok_or_else(|| missing("source"))?;
    let source_amplitude = raw
        .take("problem", "source_amplitude")
        .map(|v| parse_f64("source_amplitude", &v))
        .transpose()?;

    // [sweep]
    let kind = match raw
        .take("sweep", "kind")
        .ok_or_else(|| missing("kind"))?
        .as_str()
    {
        "two_sided" => ExperimentKind::TwoSided,
        "one_sided" => ExperimentKind::OneSided,
        "heat_baseline" => ExperimentKind::HeatBaseline,
        other => {
            return Err(Error::ConfigValidation {
                key: "kind".into(),
                message: format!(
                    "unknown experiment kind {other:?}; expected two_sided, one_sided \
                     or heat_baseline"
                ),
            })
        }
    };
    let epsilons = parse_list_f64(
        "epsilons",
        &raw.take("sweep", "epsilons")
            .ok_or_else(|| missing("epsilons"))?,
    )?;
    if epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::ConfigValidation {
            key: "epsilons".into(),
            message: "epsilons must be strictly decreasing".into(),
        });
    }
    let dt = match raw.take("sweep", "dt") {
        None => None,
        Some(v) if v.trim() == "auto" => None,
        Some(v) => Some(parse_f64("dt", &v)?),
    };
    let tau = raw
        .take("sweep", "tau")
        .map(|v| parse_f64("tau", &v))
        .transpose()?
        .unwrap_or(0.0);
    let x0 = match raw.take("sweep", "x0") {
        Some(v) => parse_list_f64("x0", &v)?,
        None => extents.iter().map(|&[lo, hi]| 0.5 * (lo + hi)).collect(),
    };
    if x0.len() != dim {
        return Err(Error::ConfigValidation {
            key: "x0".into(),
            message: format!("x0 must have {dim} coordinates"),
        });
    }
    let beta = raw
        .take("sweep", "beta")
        .map(|v| parse_f64("beta", &v))
        .transpose()?
        .unwrap_or(0.75);
    let alpha = raw
        .take("sweep", "alpha")
        .map(|v| parse_f64("alpha", &v))
        .transpose()?
        .unwrap_or(1.5);
    let eta_factor = raw
        .take("sweep", "eta_factor")
        .map(|v| parse_f64("eta_factor", &v))
        .transpose()?
        .unwrap_or(0.25);
    if !(eta_factor > 0.0 && eta_factor <= 0.5) {
        return Err(Error::ConfigValidation {
            key: "eta_factor".into(),
            message: format!("eta_factor must lie in (0, 0.5], got {eta_factor}"),
        });
    }
    let collar = raw
        .take("sweep", "collar")
        .map(|v| parse_f64("collar", &v))
        .transpose()?
        .unwrap_or_else(|| (extents[0][1] - extents[0][0]) / 16.0);

    // [output]
    let out_dir = raw.take("output", "dir").unwrap_or_else(|| "out".into());
    let formats = raw
        .take("output", "formats")
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
        .unwrap_or_else(|| vec!["csv".into(), "json".into(), "plot".into()]);
    for f in &formats {
        if !["csv", "json", "plot"].contains(&f.as_str()) {
            return Err(Error::ConfigValidation {
                key: "formats".into(),
                message: format!("unknown format {f:?}; expected csv, json or plot"),
            });
        }
    }

    raw.finish()?;

    let config = RunConfig {
        dim,
        extents,
        sweep_cells,
        ref_cells,
        horizon,
        hamiltonian,
        gamma,
        delta,
        terminal,
        terminal_amplitude,
        terminal_center,
        source,
        source_amplitude,
        kind,
        epsilons,
        dt,
        tau,
        x0,
        beta,
        alpha,
        eta_factor,
        collar,
        out_dir,
        formats,
    };
    // building the plan runs the full cross-validation (catalog metadata,
    // grid invariants, hypothesis flags) before any solve
    config.build_plan()?;
    Ok(config)
}

impl RunConfig {
    pub fn hamiltonian(&self) -> Result<Hamiltonian> {
        match self.hamiltonian.as_str() {
            "quadratic" => Ok(Hamiltonian::quadratic()),
            "zero" => Ok(Hamiltonian::zero()),
            "eikonal" => Ok(Hamiltonian::eikonal()),
            "power" => {
                let gamma = self.gamma.ok_or_else(|| Error::ConfigValidation {
                    key: "gamma".into(),
                    message: "power Hamiltonian needs gamma".into(),
                })?;
                Hamiltonian::power(gamma, self.delta)
            }
            other => Err(Error::UnknownName {
                kind: "Hamiltonian",
                name: other.into(),
                available: HAMILTONIAN_NAMES.join(", "),
            }),
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let grid = Arc::new(Grid::new(&self.extents, &self.sweep_cells)?);
        let t_params = DatumParams {
            center: self.terminal_center,
            amplitude: self.terminal_amplitude,
        };
        let terminal = catalog::terminal(&self.terminal, &t_params, &self.extents)?;
        let s_params = DatumParams {
            center: None,
            amplitude: self.source_amplitude,
        };
        let source = catalog::source(&self.source, &s_params, &self.extents, self.horizon)?;
        ProblemSpec::new(grid, self.horizon, self.hamiltonian()?, terminal, source)
    }

    pub fn build_plan(&self) -> Result<SweepPlan> {
        let problem = self.problem()?;
        let mut plan = SweepPlan::new(problem, self.kind, self.epsilons.clone());
        plan.ref_cells = self.ref_cells.clone();
        plan.dt = self.dt;
        plan.x0 = self.x0.clone();
        plan.tau = self.tau;
        plan.beta = self.beta;
        plan.alpha = self.alpha;
        plan.collar_width = self.collar;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[domain]
x = 0, 1

[grid]
sweep_cells = 64

[problem]
horizon = 1.0
hamiltonian = zero
terminal = kink
source = zero

[sweep]
kind = heat_baseline
epsilons = 1e-2, 1e-3, 1e-4
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.dim, 1);
        assert_eq!(c.ref_cells, vec![512], "default 8x sweep");
        assert_eq!(c.beta, 0.75);
        assert_eq!(c.alpha, 1.5);
        assert!(c.dt.is_none(), "dt defaults to auto");
        assert_eq!(c.x0, vec![0.5]);
        assert_eq!(c.formats, vec!["csv", "json", "plot"]);
    }

    #[test]
    fn increasing_epsilons_rejected() {
        let bad = MINIMAL.replace("epsilons = 1e-2, 1e-3, 1e-4", "epsilons = 1e-4, 1e-3, 1e-2");
        let err = parse_config_str(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("strictly decreasing"), "{msg}");
    }

    #[test]
    fn unknown_hamiltonian_lists_available() {
        let bad = MINIMAL.replace("hamiltonian = zero", "hamiltonian = cubic");
        let msg = parse_config_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("quadratic") && msg.contains("power"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected_with_location() {
        let bad = MINIMAL.replace("horizon = 1.0", "horizon = 1.0\nwibble = 3");
        let msg = parse_config_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("wibble"), "{msg}");
    }

    #[test]
    fn parse_error_carries_line_number() {
        let bad = "[domain]\nx 0 1\n";
        match parse_config_str(bad).unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let bad = MINIMAL.replace("horizon = 1.0", "horizon = 1.0\nhorizon = 2.0");
        assert!(parse_config_str(&bad).is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = MINIMAL.replace("[grid]", "# a comment\n\n[grid]  # trailing");
        assert!(parse_config_str(&text).is_ok());
    }

    #[test]
    fn one_sided_config_checks_hypotheses() {
        let bad = MINIMAL.replace("kind = heat_baseline", "kind = one_sided");
        // kink terminal + zero Hamiltonian: hypothesis machinery must refuse
        assert!(parse_config_str(&bad).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = parse_config_str(MINIMAL).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }
}
