//! Secure key rate per pulse for a source with known click and multi-photon
//! probabilities, following the photon-number-splitting bound for BB84.
//!
//! ```text
//! R = (P_s/2) [ rho (1 - tau(e/rho)) - f(e) h(e) ]
//! rho = (P_s - P_m) / P_s
//! tau(u) = log2(1 + 4u - 4u^2)
//! ```
//!
//! `P_s` here is the dark-count adjusted click probability.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_non_negative, check_unit_interval, Error, Result};

/// Fiber loss coefficient of the reference setup, dB/km.
pub const REF_LOSS_DB_PER_KM: f64 = 0.2;
/// Receiver-side loss of the reference setup, dB.
pub const REF_RECEIVER_LOSS_DB: f64 = 1.0;
/// Detector quantum efficiency of the reference setup.
pub const REF_DETECTOR_EFF: f64 = 0.18;
/// Dark counts per slot of the reference setup.
pub const REF_DARK_PROB: f64 = 2e-4;
/// Baseline error fraction of the reference setup.
pub const REF_BASELINE_ERROR: f64 = 0.01;
/// Default error-correction inefficiency.
pub const DEFAULT_F_EC: f64 = 1.16;

/// Lossy fiber link followed by Bob's detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Fiber loss in dB/km.
    pub loss_coeff: f64,
    /// Fiber length in km.
    pub distance: f64,
    /// Receiver loss in dB.
    pub receiver_loss: f64,
    /// Detector quantum efficiency.
    pub detector_eff: f64,
}

impl ChannelModel {
    pub fn new(
        loss_coeff: f64,
        distance: f64,
        receiver_loss: f64,
        detector_eff: f64,
    ) -> Result<Self> {
        check_non_negative("loss_coeff", loss_coeff)?;
        check_non_negative("distance", distance)?;
        check_non_negative("receiver_loss", receiver_loss)?;
        if !(detector_eff > 0.0 && detector_eff <= 1.0) {
            return Err(Error::Domain {
                name: "detector_eff",
                value: detector_eff,
                expected: "(0, 1]",
            });
        }
        Ok(ChannelModel {
            loss_coeff,
            distance,
            receiver_loss,
            detector_eff,
        })
    }

    pub fn reference(distance: f64) -> Result<Self> {
        Self::new(
            REF_LOSS_DB_PER_KM,
            distance,
            REF_RECEIVER_LOSS_DB,
            REF_DETECTOR_EFF,
        )
    }

    pub fn at_distance(&self, distance: f64) -> Result<Self> {
        Self::new(
            self.loss_coeff,
            distance,
            self.receiver_loss,
            self.detector_eff,
        )
    }

    pub fn total_eta(&self) -> f64 {
        channel_eta(self)
    }
}

/// Overall detection efficiency `10^{-(a l + L)/10} * eta_d`.
pub fn channel_eta(channel: &ChannelModel) -> f64 {
    let loss_db = channel.loss_coeff * channel.distance + channel.receiver_loss;
    10f64.powf(-loss_db / 10.0) * channel.detector_eff
}

/// Efficiency in dB.
pub fn to_db(eta: f64) -> f64 {
    10.0 * eta.log10()
}

/// Dark counts and baseline misalignment of Bob's detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub dark_prob: f64,
    pub baseline_error: f64,
}

impl DetectorModel {
    pub fn new(dark_prob: f64, baseline_error: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(Error::Domain {
                name: "dark_prob",
                value: dark_prob,
                expected: "[0, 1)",
            });
        }
        if !(0.0..=0.02).contains(&baseline_error) {
            return Err(Error::Domain {
                name: "baseline_error",
                value: baseline_error,
                expected: "[0, 0.02]",
            });
        }
        Ok(DetectorModel {
            dark_prob,
            baseline_error,
        })
    }

    pub fn reference() -> Self {
        DetectorModel {
            dark_prob: REF_DARK_PROB,
            baseline_error: REF_BASELINE_ERROR,
        }
    }
}

/// Click probability including dark counts: `P_s + P_d - P_s P_d`.
pub fn adjusted_signal(p_s: f64, det: &DetectorModel) -> f64 {
    p_s + det.dark_prob - p_s * det.dark_prob
}

/// Quantum bit error rate `(c P_s + P_d/2) / P_s_bar`, clamped to `[0, 1/2]`.
pub fn error_rate(p_s: f64, det: &DetectorModel) -> Result<f64> {
    check_unit_interval("p_s", p_s)?;
    let p_bar = adjusted_signal(p_s, det);
    if p_bar <= 0.0 {
        return Err(Error::DegenerateInput(
            "no clicks: signal and dark-count probabilities are zero",
        ));
    }
    Ok(((det.baseline_error * p_s + 0.5 * det.dark_prob) / p_bar).clamp(0.0, 0.5))
}

/// Binary entropy in bits, `h(0) = h(1) = 0`.
pub fn shannon_h(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
}

/// Privacy-amplification compression `log2(1 + 4u - 4u^2)` with `u = e/rho`,
/// capped at 1 once `u >= 1/2`.
///
/// Callers must handle `rho <= 0` themselves; it is mapped to the cap here.
pub fn tau_compression(e: f64, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    let u = e / rho;
    if u >= 0.5 {
        1.0
    } else {
        (1.0 + 4.0 * u - 4.0 * u * u).log2()
    }
}

/// Error-correction inefficiency relative to the Shannon limit.
#[derive(Debug, Clone, PartialEq)]
pub enum FPolicy {
    Constant(f64),
    /// Knots `(e, f)` with strictly ascending `e`.
    Table(Vec<(f64, f64)>),
}

impl Default for FPolicy {
    fn default() -> Self {
        FPolicy::Constant(DEFAULT_F_EC)
    }
}

impl FPolicy {
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Config("error-correction table is empty".into()));
        }
        if knots.iter().any(|(e, f)| !e.is_finite() || !f.is_finite()) {
            return Err(Error::Config(
                "error-correction table has non-finite entries".into(),
            ));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config(
                "error-correction table must have strictly ascending e".into(),
            ));
        }
        Ok(FPolicy::Table(knots))
    }

    /// Parses a two-column `e,f` table; a non-numeric first line is a header.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut knots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(e), Some(f), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Config(format!(
                    "error-correction table line {}: expected two columns `e,f`",
                    i + 1
                )));
            };
            match (e.parse::<f64>(), f.parse::<f64>()) {
                (Ok(e), Ok(f)) => knots.push((e, f)),
                _ if knots.is_empty() && i == 0 => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "error-correction table line {}: `{line}` is not numeric",
                        i + 1
                    )))
                }
            }
        }
        Self::table(knots)
    }

    pub fn evaluate(&self, e: f64) -> Result<f64> {
        f_ec(e, self)
    }
}

impl fmt::Display for FPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FPolicy::Constant(v) => write!(f, "const:{v}"),
            FPolicy::Table(k) => write!(f, "table({} knots)", k.len()),
        }
    }
}

/// `f(e)` under `policy`; tables interpolate linearly and clamp at the ends.
pub fn f_ec(e: f64, policy: &FPolicy) -> Result<f64> {
    match policy {
        FPolicy::Constant(f0) => Ok(*f0),
        FPolicy::Table(knots) => {
            let (first, last) = match (knots.first(), knots.last()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(Error::Config("error-correction table is empty".into())),
            };
            if e <= first.0 {
                return Ok(first.1);
            }
            if e >= last.0 {
                return Ok(last.1);
            }
            let i = knots.partition_point(|&(x, _)| x <= e);
            let (x0, y0) = knots[i - 1];
            let (x1, y1) = knots[i];
            Ok(y0 + (y1 - y0) * (e - x0) / (x1 - x0))
        }
    }
}

/// Sign of the error-correction term in the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// Error correction costs key: `- f(e) h(e)`.
    #[default]
    Corrected,
    /// `+ f(e) h(e)` as typeset in the source formula. Comparison runs only.
    PaperLiteral,
}

impl fmt::Display for SignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignConvention::Corrected => f.write_str("corrected"),
            SignConvention::PaperLiteral => f.write_str("paper-literal"),
        }
    }
}

impl FromStr for SignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(SignConvention::Corrected),
            "paper-literal" | "literal" => Ok(SignConvention::PaperLiteral),
            other => Err(Error::Config(format!("unknown sign convention `{other}`"))),
        }
    }
}

/// Every intermediate of one rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub p_s: f64,
    pub p_s_bar: f64,
    pub p_m: f64,
    pub e: f64,
    pub rho: f64,
    pub tau: f64,
    pub h: f64,
    pub f: f64,
    /// `max(rate_raw, 0)`.
    pub rate: f64,
    /// Unclamped rate; non-positive means insecure.
    pub rate_raw: f64,
}

impl RateBreakdown {
    pub fn is_secure(&self) -> bool {
        self.rate_raw > 0.0
    }
}

/// Secure key rate per pulse from the source's click and multi-photon
/// probabilities.
pub fn secure_rate(
    p_s: f64,
    p_m: f64,
    det: &DetectorModel,
    policy: &FPolicy,
    sign: SignConvention,
) -> Result<RateBreakdown> {
    check_unit_interval("p_s", p_s)?;
    check_unit_interval("p_m", p_m)?;
    let p_s_bar = adjusted_signal(p_s, det);
    if p_s_bar <= 0.0 {
        // Nothing is ever detected.
        return Ok(RateBreakdown {
            p_s,
            p_s_bar,
            p_m,
            e: 0.5,
            rho: 0.0,
            tau: 1.0,
            h: 1.0,
            f: f_ec(0.5, policy)?,
            rate: 0.0,
            rate_raw: 0.0,
        });
    }
    let e = error_rate(p_s, det)?;
    let rho = (p_s_bar - p_m) / p_s_bar;
    let h = shannon_h(e);
    let f = f_ec(e, policy)?;
    let tau = tau_compression(e, rho);

    let rate_raw = if rho <= 0.0 {
        // no single-photon surplus; keep the magnitude for diagnostics
        0.5 * p_s_bar * rho
    } else {
        let ec = match sign {
            SignConvention::Corrected => -f * h,
            SignConvention::PaperLiteral => f * h,
        };
        0.5 * p_s_bar * (rho * (1.0 - tau) + ec)
    };
    Ok(RateBreakdown {
        p_s,
        p_s_bar,
        p_m,
        e,
        rho,
        tau,
        h,
        f,
        rate: rate_raw.max(0.0),
        rate_raw,
    })
}
