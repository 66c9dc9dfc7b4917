//! Run configuration: flat `key = value` files plus flag overrides.
//!
//! Recognized keys (all optional):
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `family` | comma list of source families, or `all` | `all` |
//! | `alpha2` | mean photon number for `coherent-bb84` in `rate` | optimized |
//! | `nu` | squeeze parameter for `mcs-*` in `rate` | optimized |
//! | `l` | comma list of distances, km | `5` |
//! | `l_max`, `l_step` | distance grid of `figure2`, km | `100`, `1` |
//! | `a` | fiber loss, dB/km | `0.2` |
//! | `receiver_loss` | receiver loss `L`, dB | `1` |
//! | `eta_d` | detector efficiency | `0.18` |
//! | `pd` | dark counts per slot | `2e-4` |
//! | `c` | baseline error fraction | `0.01` |
//! | `f_policy` | `const:F` or `table:PATH` | `const:1.16` |
//! | `paper_literal_sign` | `true`/`false` | `false` |
//! | `out` | output directory | `out` |
//! | `param_min`, `param_max`, `grid_points`, `rel_tol` | optimizer search | `1e-5`, `4`, `200`, `1e-5` |
//! | `fig1_param_max`, `fig1_points` | `figure1` scan | `1`, `401` |
//! | `verify_alpha`, `verify_nu`, `verify_eta` | `verify` grid lists | see `VerificationGrid` |

use std::fs;
use std::path::{Path, PathBuf};

use mcs_qkd::fock_oracle::VerificationGrid;
use mcs_qkd::key_rate::{
    REF_BASELINE_ERROR, REF_DARK_PROB, REF_DETECTOR_EFF, REF_LOSS_DB_PER_KM, REF_RECEIVER_LOSS_DB,
};
use mcs_qkd::{ChannelModel, DetectorModel, FPolicy, SearchSettings, SignConvention};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "family",
    "alpha2",
    "nu",
    "l",
    "l_max",
    "l_step",
    "a",
    "receiver_loss",
    "eta_d",
    "pd",
    "c",
    "f_policy",
    "paper_literal_sign",
    "out",
    "param_min",
    "param_max",
    "grid_points",
    "rel_tol",
    "fig1_param_max",
    "fig1_points",
    "verify_alpha",
    "verify_nu",
    "verify_eta",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Empty means every registered family.
    pub families: Vec<String>,
    pub alpha2: Option<f64>,
    pub nu: Option<f64>,
    pub distances: Vec<f64>,
    pub l_max: f64,
    pub l_step: f64,
    pub loss_coeff: f64,
    pub receiver_loss: f64,
    pub eta_d: f64,
    pub dark_prob: f64,
    pub baseline_error: f64,
    pub f_policy: FPolicy,
    /// Original `f_policy` value, for CSV annotations.
    pub f_policy_spec: String,
    pub sign: SignConvention,
    pub out_dir: PathBuf,
    pub search: SearchSettings,
    pub fig1_param_max: f64,
    pub fig1_points: usize,
    pub verify_grid: VerificationGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            families: Vec::new(),
            alpha2: None,
            nu: None,
            distances: vec![5.0],
            l_max: 100.0,
            l_step: 1.0,
            loss_coeff: REF_LOSS_DB_PER_KM,
            receiver_loss: REF_RECEIVER_LOSS_DB,
            eta_d: REF_DETECTOR_EFF,
            dark_prob: REF_DARK_PROB,
            baseline_error: REF_BASELINE_ERROR,
            f_policy: FPolicy::default(),
            f_policy_spec: format!("const:{}", mcs_qkd::key_rate::DEFAULT_F_EC),
            sign: SignConvention::Corrected,
            out_dir: PathBuf::from("out"),
            search: SearchSettings::default(),
            fig1_param_max: 1.0,
            fig1_points: 401,
            verify_grid: VerificationGrid::default(),
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("key `{key}`: invalid value `{value}` ({why})"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(bad(key, value, "expected a finite number")),
    }
}

fn parse_non_negative(key: &str, value: &str) -> Result<f64, CliError> {
    let v = parse_f64(key, value)?;
    if v < 0.0 {
        return Err(bad(key, value, "must be >= 0"));
    }
    Ok(v)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "family" => {
                self.families = if value == "all" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                };
            }
            "alpha2" => self.alpha2 = Some(parse_non_negative(key, value)?),
            "nu" => self.nu = Some(parse_non_negative(key, value)?),
            "l" => {
                let ls = parse_list(key, value)?;
                if ls.is_empty() || ls.iter().any(|&l| l < 0.0) {
                    return Err(bad(key, value, "need one or more distances >= 0"));
                }
                self.distances = ls;
            }
            "l_max" => {
                let v = parse_f64(key, value)?;
                if v <= 0.0 {
                    return Err(bad(key, value, "must be > 0"));
                }
                self.l_max = v;
            }
            "l_step" => {
                let v = parse_f64(key, value)?;
                if v <= 0.0 {
                    return Err(bad(key, value, "must be > 0"));
                }
                self.l_step = v;
            }
            "a" => self.loss_coeff = parse_non_negative(key, value)?,
            "receiver_loss" => self.receiver_loss = parse_non_negative(key, value)?,
            "eta_d" => {
                let v = parse_f64(key, value)?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(bad(key, value, "must be in (0, 1]"));
                }
                self.eta_d = v;
            }
            "pd" => {
                let v = parse_f64(key, value)?;
                if !(0.0..1.0).contains(&v) {
                    return Err(bad(key, value, "must be in [0, 1)"));
                }
                self.dark_prob = v;
            }
            "c" => {
                let v = parse_f64(key, value)?;
                if !(0.0..=0.02).contains(&v) {
                    return Err(bad(key, value, "must be in [0, 0.02]"));
                }
                self.baseline_error = v;
            }
            "f_policy" => {
                self.f_policy = parse_f_policy(value)?;
                self.f_policy_spec = value.to_string();
            }
            "paper_literal_sign" => {
                self.sign = if parse_bool(key, value)? {
                    SignConvention::PaperLiteral
                } else {
                    SignConvention::Corrected
                };
            }
            "out" => {
                if value.is_empty() {
                    return Err(bad(key, value, "empty path"));
                }
                self.out_dir = PathBuf::from(value);
            }
            "param_min" => self.search.param_min = parse_f64(key, value)?,
            "param_max" => self.search.param_max = parse_f64(key, value)?,
            "grid_points" => {
                self.search.grid_points = value
                    .parse()
                    .map_err(|_| bad(key, value, "expected an integer"))?
            }
            "rel_tol" => self.search.rel_tol = parse_f64(key, value)?,
            "fig1_param_max" => {
                let v = parse_f64(key, value)?;
                if v <= 0.0 {
                    return Err(bad(key, value, "must be > 0"));
                }
                self.fig1_param_max = v;
            }
            "fig1_points" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| bad(key, value, "expected an integer"))?;
                if n < 3 {
                    return Err(bad(key, value, "need at least 3 points"));
                }
                self.fig1_points = n;
            }
            "verify_alpha" => self.verify_grid.alphas = parse_list(key, value)?,
            "verify_nu" => self.verify_grid.nus = parse_list(key, value)?,
            "verify_eta" => self.verify_grid.etas = parse_list(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every setting of a `key = value` document.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                )));
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn channel(&self, distance: f64) -> Result<ChannelModel, CliError> {
        Ok(ChannelModel::new(
            self.loss_coeff,
            distance,
            self.receiver_loss,
            self.eta_d,
        )?)
    }

    pub fn detector(&self) -> Result<DetectorModel, CliError> {
        Ok(DetectorModel::new(self.dark_prob, self.baseline_error)?)
    }

    /// `0, step, 2 step, ...` up to and including `l_max`.
    pub fn distance_grid(&self) -> Vec<f64> {
        let n = (self.l_max / self.l_step + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.l_step).collect()
    }
}

fn parse_f_policy(value: &str) -> Result<FPolicy, CliError> {
    if let Some(v) = value.strip_prefix("const:") {
        let f = parse_f64("f_policy", v)?;
        if f < 0.0 {
            return Err(bad("f_policy", value, "must be >= 0"));
        }
        Ok(FPolicy::Constant(f))
    } else if let Some(path) = value.strip_prefix("table:") {
        let path = Path::new(path);
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        FPolicy::parse_table(&text).map_err(|e| CliError::Config(format!("key `f_policy`: {e}")))
    } else {
        Err(bad("f_policy", value, "expected const:F or table:PATH"))
    }
}
