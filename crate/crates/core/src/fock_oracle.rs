//! Brute-force cross-checks for the closed-form photon statistics.
//!
//! Two independent routes to the no-click probability `P_0` at efficiency
//! `eta` are provided:
//!
//! * a Fock-space sum `sum_n C_n^2 (1 - eta)^n`, i.e. binomial loss applied
//!   to the photon-number distribution, with `C_n` from the Hermite
//!   recurrence;
//! * a two-dimensional Gauss-Hermite quadrature of the coherent-state
//!   representation `P_0 = (1/pi) int d^2 beta (1/(1-eta)) exp(-eta |beta|^2/(1-eta)) |<beta|U|alpha>|^2`,
//!   where the overlap is evaluated with complex arithmetic.
//!
//! [`verify_closed_forms`] runs both against the closed forms over a grid.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_unit_interval, Error, Result};
use crate::photon_source::{
    fock_amplitudes, make_state, mcs_state, p_multi, p_multi_min, p_signal_mcs, p_vacuum_lossy,
    Protocol, SqueezedCoherentState,
};

/// Default Fock truncation order for the oracle.
pub const DEFAULT_ORACLE_N_MAX: usize = 128;
/// Default quadrature nodes per axis.
pub const DEFAULT_QUADRATURE_NODES: usize = 96;
/// Largest probability mass the Fock oracle may leave above its truncation.
pub const MAX_MISSING_MASS: f64 = 1e-10;
/// Pass threshold for Fock-sum comparisons.
pub const FOCK_SUM_TOLERANCE: f64 = 1e-9;
/// Pass threshold for quadrature comparisons.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

const MIN_QUADRATURE_NODES: usize = 32;

/// `P_0` by summing binomial loss over the first `n_max + 1` Fock terms.
pub fn p0_via_fock(state: &SqueezedCoherentState, eta: f64, n_max: usize) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let amps = checked_amplitudes(state, n_max)?;
    let transmit_none = 1.0 - eta;
    let mut weight = 1.0;
    let mut p0 = 0.0;
    for c in amps {
        p0 += c * c * weight;
        weight *= transmit_none;
    }
    Ok(p0)
}

/// Click probability `sum_n C_n^2 (1 - (1 - eta)^n)` from the Fock expansion.
pub fn p_signal_via_fock(state: &SqueezedCoherentState, eta: f64, n_max: usize) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let amps = checked_amplitudes(state, n_max)?;
    let transmit_none = 1.0 - eta;
    let mut weight = 1.0;
    let mut ps = 0.0;
    for c in amps {
        ps += c * c * (1.0 - weight);
        weight *= transmit_none;
    }
    Ok(ps)
}

/// `1 - sum_{n < k} C_n^2` from the Fock expansion, `k` the first insecure
/// photon number of `protocol`.
pub fn p_multi_via_fock(state: &SqueezedCoherentState, protocol: Protocol) -> f64 {
    let k = protocol.insecure_photon_number();
    let amps = fock_amplitudes(state, k - 1);
    1.0 - amps.iter().map(|c| c * c).sum::<f64>()
}

fn checked_amplitudes(state: &SqueezedCoherentState, n_max: usize) -> Result<Vec<f64>> {
    if n_max < 8 {
        return Err(Error::Domain {
            name: "n_max",
            value: n_max as f64,
            expected: ">= 8",
        });
    }
    let amps = fock_amplitudes(state, n_max);
    let mass: f64 = amps.iter().map(|c| c * c).sum();
    let missing = 1.0 - mass;
    if missing > MAX_MISSING_MASS {
        return Err(Error::InsufficientTruncation {
            n_max,
            missing_mass: missing,
        });
    }
    Ok(amps)
}

/// Gauss-Hermite rule for `int exp(-x^2) f(x) dx` with `n` nodes.
///
/// Newton iteration on the orthonormal Hermite recurrence; nodes ascending.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 100;

    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..MAX_ITER {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `ln <beta| U |alpha>` for real `alpha`, real squeeze `nu`.
fn ln_overlap(state: &SqueezedCoherentState, beta: Complex64) -> Complex64 {
    let (alpha, mu, nu) = (state.alpha(), state.mu(), state.nu());
    let bc = beta.conj();
    let a = Complex64::new(alpha, 0.0);
    -0.5 * mu.ln() - 0.5 * (alpha * alpha + beta.norm_sqr())
        + (nu * a * a - nu * bc * bc + 2.0 * bc * a) / (2.0 * mu)
}

/// `P_0` by quadrature of the coherent-state integral.
///
/// Each axis uses Gauss-Hermite nodes rescaled to the width and centre of the
/// integrand's Gaussian envelope along that axis.
pub fn p0_via_quadrature(state: &SqueezedCoherentState, eta: f64, nodes: usize) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            expected: "(0, 1) for quadrature",
        });
    }
    if nodes < MIN_QUADRATURE_NODES {
        return Err(Error::Domain {
            name: "nodes",
            value: nodes as f64,
            expected: ">= 32",
        });
    }

    let weight_rate = eta / (1.0 - eta);
    let s = state.nu() / state.mu();
    // Quadratic coefficients of the log-integrand along Re(beta), Im(beta).
    let prec_x = 1.0 + weight_rate + s;
    let prec_y = 1.0 + weight_rate - s;
    let centre_x = state.alpha() / (state.mu() * prec_x);
    let (sx, sy) = (prec_x.sqrt().recip(), prec_y.sqrt().recip());

    let (t, w) = gauss_hermite(nodes);
    let ln_pref = -std::f64::consts::PI.ln() - (1.0 - eta).ln();

    let mut total = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        let x = centre_x + sx * ti;
        let mut row = 0.0;
        for (uj, wj) in t.iter().zip(&w) {
            let y = sy * uj;
            let beta = Complex64::new(x, y);
            let ln_integrand =
                ln_pref - weight_rate * beta.norm_sqr() + 2.0 * ln_overlap(state, beta).re;
            row += wj * (ln_integrand + ti * ti + uj * uj).exp();
        }
        total += wi * row;
    }
    Ok(total * sx * sy)
}

/// Which oracle produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    FockSum,
    Quadrature,
}

impl OracleMethod {
    pub fn tolerance(self) -> f64 {
        match self {
            OracleMethod::FockSum => FOCK_SUM_TOLERANCE,
            OracleMethod::Quadrature => QUADRATURE_TOLERANCE,
        }
    }
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleMethod::FockSum => f.write_str("fock-sum"),
            OracleMethod::Quadrature => f.write_str("quadrature"),
        }
    }
}

/// Closed form under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    /// General lossy vacuum probability.
    VacuumLossy,
    /// `1 - sum C_n^2` with the explicit low-order amplitudes.
    MultiPhoton(ProtocolKey),
    /// Multi-photon probability of the modified state.
    MultiPhotonMin(ProtocolKey),
    /// Click probability of the modified state.
    SignalMcs(ProtocolKey),
}

/// `Protocol` with an ordering, for keying reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKey {
    Bb84,
    Sarg04,
}

impl From<Protocol> for ProtocolKey {
    fn from(p: Protocol) -> Self {
        match p {
            Protocol::Bb84 => ProtocolKey::Bb84,
            Protocol::Sarg04 => ProtocolKey::Sarg04,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = |p: &ProtocolKey| match p {
            ProtocolKey::Bb84 => "bb84",
            ProtocolKey::Sarg04 => "sarg04",
        };
        match self {
            Formula::VacuumLossy => f.write_str("p_vacuum_lossy"),
            Formula::MultiPhoton(p) => write!(f, "p_multi_{}", tag(p)),
            Formula::MultiPhotonMin(p) => write!(f, "p_multi_min_{}", tag(p)),
            Formula::SignalMcs(p) => write!(f, "p_signal_mcs_{}", tag(p)),
        }
    }
}

/// Truncation order or node count used by an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    FockOrder(usize),
    NodesPerAxis(usize),
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::FockOrder(n) => write!(f, "n_max={n}"),
            Resolution::NodesPerAxis(n) => write!(f, "nodes={n}x{n}"),
        }
    }
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub formula: Formula,
    pub method: OracleMethod,
    pub alpha: f64,
    pub nu: f64,
    /// `None` for efficiency-independent formulas.
    pub eta: Option<f64>,
    pub closed_form_value: f64,
    pub oracle_value: f64,
    pub abs_diff: f64,
    pub resolution: Resolution,
}

impl OracleReport {
    fn new(
        formula: Formula,
        method: OracleMethod,
        (alpha, nu, eta): (f64, f64, Option<f64>),
        closed_form_value: f64,
        oracle_value: f64,
        resolution: Resolution,
    ) -> Self {
        OracleReport {
            formula,
            method,
            alpha,
            nu,
            eta,
            closed_form_value,
            oracle_value,
            abs_diff: (closed_form_value - oracle_value).abs(),
            resolution,
        }
    }

    pub fn passed(&self) -> bool {
        self.abs_diff < self.method.tolerance()
    }
}

/// Cartesian grid of `(alpha, nu, eta)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationGrid {
    pub alphas: Vec<f64>,
    pub nus: Vec<f64>,
    pub etas: Vec<f64>,
}

impl VerificationGrid {
    pub fn empty() -> Self {
        VerificationGrid {
            alphas: Vec::new(),
            nus: Vec::new(),
            etas: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty() || self.nus.is_empty() || self.etas.is_empty()
    }
}

impl Default for VerificationGrid {
    fn default() -> Self {
        VerificationGrid {
            alphas: vec![0.0, 0.5, 1.0, 2.0],
            nus: vec![0.0, 0.3, 0.8],
            etas: vec![0.05, 0.5, 0.95],
        }
    }
}

/// Knobs for [`verify_closed_forms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub fock_n_max: usize,
    pub quadrature_nodes: usize,
    /// Added to every closed-form value before comparison. Test hook for
    /// checking that a broken formula is detected; zero in normal runs.
    pub closed_form_offset: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            fock_n_max: DEFAULT_ORACLE_N_MAX,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            closed_form_offset: 0.0,
        }
    }
}

/// Runs every oracle against the closed forms over `grid`.
///
/// Reports come back in grid order: for each `(alpha, nu)` the efficiency
/// independent checks, then the per-`eta` checks.
pub fn verify_closed_forms(
    grid: &VerificationGrid,
    opts: &VerifyOptions,
) -> Result<Vec<OracleReport>> {
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    for &eta in &grid.etas {
        check_unit_interval("eta", eta)?;
    }
    let pairs: Vec<(f64, f64)> = grid
        .alphas
        .iter()
        .flat_map(|&a| grid.nus.iter().map(move |&n| (a, n)))
        .collect();

    let chunks: Vec<Vec<OracleReport>> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, &(alpha, nu))| {
            // MCS checks depend only on nu; emit them with the first alpha.
            let with_mcs = idx < grid.nus.len();
            verify_point(alpha, nu, &grid.etas, with_mcs, opts)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn verify_point(
    alpha: f64,
    nu: f64,
    etas: &[f64],
    with_mcs: bool,
    opts: &VerifyOptions,
) -> Result<Vec<OracleReport>> {
    let off = opts.closed_form_offset;
    let fock_res = Resolution::FockOrder(opts.fock_n_max);
    let state = make_state(alpha, nu)?;
    let mut out = Vec::new();

    for protocol in [Protocol::Bb84, Protocol::Sarg04] {
        out.push(OracleReport::new(
            Formula::MultiPhoton(protocol.into()),
            OracleMethod::FockSum,
            (alpha, nu, None),
            p_multi(&state, protocol) + off,
            p_multi_via_fock(&state, protocol),
            Resolution::FockOrder(protocol.insecure_photon_number() - 1),
        ));
    }

    let mcs: Vec<(Protocol, SqueezedCoherentState)> = if with_mcs {
        [Protocol::Bb84, Protocol::Sarg04]
            .into_iter()
            .map(|p| mcs_state(nu, p).map(|s| (p, s)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    for (protocol, s) in &mcs {
        out.push(OracleReport::new(
            Formula::MultiPhotonMin((*protocol).into()),
            OracleMethod::FockSum,
            (s.alpha(), nu, None),
            p_multi_min(nu, *protocol)? + off,
            p_multi_via_fock(s, *protocol),
            Resolution::FockOrder(protocol.insecure_photon_number() - 1),
        ));
    }

    for &eta in etas {
        let closed = p_vacuum_lossy(&state, eta)? + off;
        out.push(OracleReport::new(
            Formula::VacuumLossy,
            OracleMethod::FockSum,
            (alpha, nu, Some(eta)),
            closed,
            p0_via_fock(&state, eta, opts.fock_n_max)?,
            fock_res,
        ));
        if eta > 0.0 && eta < 1.0 {
            out.push(OracleReport::new(
                Formula::VacuumLossy,
                OracleMethod::Quadrature,
                (alpha, nu, Some(eta)),
                closed,
                p0_via_quadrature(&state, eta, opts.quadrature_nodes)?,
                Resolution::NodesPerAxis(opts.quadrature_nodes),
            ));
        }
        for (protocol, s) in &mcs {
            out.push(OracleReport::new(
                Formula::SignalMcs((*protocol).into()),
                OracleMethod::FockSum,
                (s.alpha(), nu, Some(eta)),
                p_signal_mcs(nu, *protocol, eta)? + off,
                p_signal_via_fock(s, eta, opts.fock_n_max)?,
                fock_res,
            ));
        }
    }
    Ok(out)
}

/// Largest deviation per `(formula, method)`, sorted by key.
pub fn max_deviation_by_formula(reports: &[OracleReport]) -> Vec<(Formula, OracleMethod, f64)> {
    let mut acc: Vec<(Formula, OracleMethod, f64)> = Vec::new();
    for r in reports {
        match acc
            .iter_mut()
            .find(|(f, m, _)| *f == r.formula && *m == r.method)
        {
            Some(entry) => entry.2 = entry.2.max(r.abs_diff),
            None => acc.push((r.formula, r.method, r.abs_diff)),
        }
    }
    acc.sort_by_key(|a| (a.0, a.1 as u8));
    acc
}
