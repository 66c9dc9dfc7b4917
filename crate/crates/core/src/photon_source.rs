//! Photon statistics of squeezed coherent states.
//!
//! A squeezed coherent state is parameterized by a real coherent amplitude
//! `alpha` and a real squeeze magnitude `nu`, with `mu = sqrt(1 + nu^2)`.
//! Both are taken real and non-negative (squeeze phase zero). Choosing
//! `alpha^2 = mu * nu` cancels the two-photon amplitude by interference;
//! `alpha^2 = 3 * mu * nu` cancels the three-photon amplitude. These are the
//! modified coherent states used as QKD sources.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_non_negative, check_unit_interval, Error, Result};

/// Below this squeeze magnitude the exact coherent-state expansion is used.
pub const COHERENT_NU_THRESHOLD: f64 = 1e-12;

/// Default truncation tolerance on individual `C_n^2`.
pub const DEFAULT_FOCK_TOL: f64 = 1e-14;

/// Default hard cap on the Fock expansion order.
pub const DEFAULT_N_CAP: usize = 512;

/// Number of consecutive sub-tolerance terms that end the expansion.
const TAIL_RUN: usize = 5;

/// QKD protocol. Selects which multi-photon events are counted as insecure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Two or more photons leak information.
    Bb84,
    /// Three or more photons are needed for a splitting attack.
    Sarg04,
}

impl Protocol {
    /// Multiplier `k` in the cancellation condition `alpha^2 = k * mu * nu`.
    pub fn cancellation_factor(self) -> f64 {
        match self {
            Protocol::Bb84 => 1.0,
            Protocol::Sarg04 => 3.0,
        }
    }

    /// Smallest photon number an eavesdropper can exploit.
    pub fn insecure_photon_number(self) -> usize {
        match self {
            Protocol::Bb84 => 2,
            Protocol::Sarg04 => 3,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Bb84 => f.write_str("BB84"),
            Protocol::Sarg04 => f.write_str("SARG04"),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(Protocol::Bb84),
            "sarg04" => Ok(Protocol::Sarg04),
            other => Err(Error::Config(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Squeeze operator applied to a coherent state, with real parameters.
///
/// `mu = cosh|zeta|` and `nu = sinh|zeta|` for squeeze parameter `zeta`; only
/// `nu` is stored as input and `mu` is derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedCoherentState {
    alpha: f64,
    nu: f64,
    mu: f64,
}

impl SqueezedCoherentState {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Mean-field intensity `alpha^2` of the seeding coherent state.
    pub fn alpha_sq(&self) -> f64 {
        self.alpha * self.alpha
    }

    pub fn is_coherent(&self) -> bool {
        self.nu < COHERENT_NU_THRESHOLD
    }

    pub fn is_vacuum(&self) -> bool {
        self.alpha == 0.0 && self.nu == 0.0
    }
}

/// Builds a state from its amplitude and squeeze magnitude.
pub fn make_state(alpha: f64, nu: f64) -> Result<SqueezedCoherentState> {
    check_non_negative("alpha", alpha)?;
    check_non_negative("nu", nu)?;
    Ok(SqueezedCoherentState {
        alpha,
        nu,
        mu: nu.hypot(1.0),
    })
}

/// Modified coherent state: the amplitude that cancels the first insecure
/// Fock term for `protocol`.
pub fn mcs_state(nu: f64, protocol: Protocol) -> Result<SqueezedCoherentState> {
    check_non_negative("nu", nu)?;
    let mu = nu.hypot(1.0);
    make_state((protocol.cancellation_factor() * mu * nu).sqrt(), nu)
}

/// Truncated photon-number expansion of a pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    amplitudes: Vec<f64>,
    tail_bound: f64,
}

impl FockDistribution {
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Highest photon number kept.
    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    /// Estimated probability mass above `n_max`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn amplitude(&self, n: usize) -> f64 {
        self.amplitudes.get(n).copied().unwrap_or(0.0)
    }

    pub fn probability(&self, n: usize) -> f64 {
        let c = self.amplitude(n);
        c * c
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|c| c * c)
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities().sum()
    }
}

/// Vacuum amplitude `C_0 = exp(nu alpha^2 / 2mu - alpha^2 / 2) / sqrt(mu)`.
fn vacuum_amplitude(state: &SqueezedCoherentState) -> f64 {
    let a2 = state.alpha_sq();
    (state.nu * a2 / (2.0 * state.mu) - 0.5 * a2).exp() / state.mu.sqrt()
}

/// Iterator over Fock amplitudes `C_0, C_1, ...`.
///
/// Squeezed branch uses the Hermite recurrence with the `(nu/2mu)^{n/2}/sqrt(n!)`
/// prefactor folded in:
/// `C_{n+1} = alpha/(mu sqrt(n+1)) C_n - (nu/mu) sqrt(n/(n+1)) C_{n-1}`.
struct Amplitudes {
    drive: f64,
    squeeze: f64,
    coherent: bool,
    alpha: f64,
    n: usize,
    prev: f64,
    cur: f64,
}

impl Amplitudes {
    fn new(state: &SqueezedCoherentState) -> Self {
        let coherent = state.is_coherent();
        let c0 = if coherent {
            (-0.5 * state.alpha_sq()).exp()
        } else {
            vacuum_amplitude(state)
        };
        Amplitudes {
            drive: state.alpha / state.mu,
            squeeze: state.nu / state.mu,
            coherent,
            alpha: state.alpha,
            n: 0,
            prev: 0.0,
            cur: c0,
        }
    }
}

impl Iterator for Amplitudes {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.cur;
        let n = self.n as f64;
        let next = if self.coherent {
            self.alpha / (n + 1.0).sqrt() * self.cur
        } else {
            self.drive / (n + 1.0).sqrt() * self.cur
                - self.squeeze * (n / (n + 1.0)).sqrt() * self.prev
        };
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        Some(out)
    }
}

/// Exactly `n_max + 1` Fock amplitudes, no truncation logic.
pub fn fock_amplitudes(state: &SqueezedCoherentState, n_max: usize) -> Vec<f64> {
    Amplitudes::new(state).take(n_max + 1).collect()
}

/// Adaptive Fock expansion.
///
/// Stops once [`TAIL_RUN`] consecutive `C_n^2` fall below `tol` and the
/// geometric tail estimate is also below `tol`.
pub fn fock_coefficients(
    state: &SqueezedCoherentState,
    tol: f64,
    n_cap: usize,
) -> Result<FockDistribution> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::Domain {
            name: "tol",
            value: tol,
            expected: "(0, 1e-6]",
        });
    }
    if n_cap < 8 {
        return Err(Error::Domain {
            name: "n_cap",
            value: n_cap as f64,
            expected: ">= 8",
        });
    }

    let squeeze = if state.is_coherent() {
        0.0
    } else {
        state.nu / state.mu
    };
    let drive_sq = state.alpha_sq() / (state.mu * state.mu);

    let mut amplitudes = Vec::with_capacity(64);
    let mut run = 0;
    for (n, c) in Amplitudes::new(state).take(n_cap + 1).enumerate() {
        amplitudes.push(c);
        let p = c * c;
        run = if p < tol { run + 1 } else { 0 };
        if run >= TAIL_RUN {
            // Envelope of the remaining terms decays at least as fast as a
            // geometric series with this ratio.
            let ratio = squeeze + drive_sq / (n as f64 + 1.0);
            if ratio < 1.0 {
                let last = amplitudes[n - 1..]
                    .iter()
                    .map(|c| c * c)
                    .fold(0.0, f64::max);
                let tail_bound = last * ratio / (1.0 - ratio);
                if tail_bound <= tol {
                    return Ok(FockDistribution {
                        amplitudes,
                        tail_bound,
                    });
                }
            }
        }
    }
    Err(Error::Truncation {
        n_cap,
        partial_mass: amplitudes.iter().map(|c| c * c).sum(),
    })
}

/// Explicit closed forms for `C_0 ..= C_4`.
pub fn coeff_closed_form(state: &SqueezedCoherentState, n: usize) -> Result<f64> {
    let c0 = vacuum_amplitude(state);
    let (alpha, mu, nu) = (state.alpha, state.mu, state.nu);
    let r = alpha / mu;
    let s = nu / mu;
    let value = match n {
        0 => c0,
        1 => c0 * r,
        2 => c0 / 2f64.sqrt() * (-s + r * r),
        3 => c0 / 6f64.sqrt() * (-3.0 * nu * alpha / (mu * mu) + r.powi(3)),
        4 => c0 / 24f64.sqrt() * (3.0 * s * s - 6.0 * nu * alpha * alpha / mu.powi(3) + r.powi(4)),
        _ => return Err(Error::UnsupportedOrder(n)),
    };
    Ok(value)
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Probability of an insecure (multi-photon) emission.
///
/// BB84 counts two or more photons, SARG04 three or more.
pub fn p_multi(state: &SqueezedCoherentState, protocol: Protocol) -> f64 {
    let secure: f64 = (0..protocol.insecure_photon_number())
        .map(|n| {
            // orders 0..=2 always have a closed form
            let c = coeff_closed_form(state, n).unwrap_or(0.0);
            c * c
        })
        .sum();
    clamp_probability(1.0 - secure)
}

/// Multi-photon probability of the modified coherent state, in closed form.
pub fn p_multi_min(nu: f64, protocol: Protocol) -> Result<f64> {
    check_non_negative("nu", nu)?;
    let mu = nu.hypot(1.0);
    let s = nu / mu;
    let p = match protocol {
        Protocol::Bb84 => 1.0 - (1.0 + s) / mu * (-(mu - nu) * nu).exp(),
        Protocol::Sarg04 => 1.0 - (1.0 + s) * (1.0 + 2.0 * s) / mu * (-3.0 * (mu - nu) * nu).exp(),
    };
    Ok(clamp_probability(p))
}

/// Probability of no click behind a detector of efficiency `eta`.
pub fn p_vacuum_lossy(state: &SqueezedCoherentState, eta: f64) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let (mu, nu) = (state.mu, state.nu);
    let loss = 1.0 - eta;
    // x = alpha, y = 0 under the real phase convention
    let x2 = state.alpha_sq();
    let exponent = -eta * x2 * (mu - nu) / (mu + nu * loss);
    let norm = (mu * mu - nu * nu * loss * loss).sqrt();
    Ok(clamp_probability(exponent.exp() / norm))
}

/// Click probability `1 - P_0` at detection efficiency `eta`.
pub fn p_signal(state: &SqueezedCoherentState, eta: f64) -> Result<f64> {
    Ok(clamp_probability(1.0 - p_vacuum_lossy(state, eta)?))
}

/// Click probability of the modified coherent state for `protocol`,
/// evaluated from the specialized closed form rather than the general one.
pub fn p_signal_mcs(nu: f64, protocol: Protocol, eta: f64) -> Result<f64> {
    check_non_negative("nu", nu)?;
    check_unit_interval("eta", eta)?;
    let mu = nu.hypot(1.0);
    let loss = 1.0 - eta;
    let k = protocol.cancellation_factor();
    let exponent = -k * eta * mu * nu * (mu - nu) / (mu + nu * loss);
    let norm = (mu * mu - nu * nu * loss * loss).sqrt();
    Ok(clamp_probability(1.0 - exponent.exp() / norm))
}
