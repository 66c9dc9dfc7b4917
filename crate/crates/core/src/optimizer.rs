//! Source-parameter optimization, distance sweeps and cutoff search.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::key_rate::{
    channel_eta, secure_rate, ChannelModel, DetectorModel, FPolicy, RateBreakdown, SignConvention,
};
use crate::source::SourceFamily;

/// Bisection resolution of [`cutoff_distance`], km.
pub const CUTOFF_RESOLUTION_KM: f64 = 0.01;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Coarse-grid and refinement settings for [`optimize_param`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    pub param_min: f64,
    pub param_max: f64,
    /// Points in the logarithmic coarse grid.
    pub grid_points: usize,
    /// Relative width at which golden-section refinement stops.
    pub rel_tol: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            param_min: 1e-5,
            param_max: 4.0,
            grid_points: 200,
            rel_tol: 1e-5,
        }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.param_min > 0.0 && self.param_max > self.param_min && self.param_max.is_finite())
        {
            return Err(Error::Config(format!(
                "search range [{}, {}] must satisfy 0 < min < max",
                self.param_min, self.param_max
            )));
        }
        if self.grid_points < 3 {
            return Err(Error::Config("search grid needs at least 3 points".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "rel_tol {} must be in (0, 1)",
                self.rel_tol
            )));
        }
        Ok(())
    }

    /// Logarithmically spaced coarse grid.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        let (lo, hi) = (self.param_min.ln(), self.param_max.ln());
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.param_max
                } else {
                    (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()
                }
            })
            .collect()
    }
}

/// A source family placed behind a channel and detector.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub family: Arc<dyn SourceFamily>,
    pub channel: ChannelModel,
    pub detector: DetectorModel,
    pub f_policy: FPolicy,
    pub sign: SignConvention,
    pub search: SearchSettings,
}

impl Scenario {
    /// Reference fiber link and detectors at `distance` km, default policies.
    pub fn reference(family: Arc<dyn SourceFamily>, distance: f64) -> Result<Self> {
        Ok(Scenario {
            family,
            channel: ChannelModel::reference(distance)?,
            detector: DetectorModel::reference(),
            f_policy: FPolicy::default(),
            sign: SignConvention::default(),
            search: SearchSettings::default(),
        })
    }

    pub fn at_distance(&self, distance: f64) -> Result<Self> {
        Ok(Scenario {
            channel: self.channel.at_distance(distance)?,
            ..self.clone()
        })
    }

    pub fn eta(&self) -> f64 {
        channel_eta(&self.channel)
    }
}

/// Rate breakdown for one value of the family's free parameter.
pub fn rate_at(scenario: &Scenario, param: f64) -> Result<RateBreakdown> {
    let em = scenario.family.emission(param, scenario.eta())?;
    secure_rate(
        em.p_signal,
        em.p_multi,
        &scenario.detector,
        &scenario.f_policy,
        scenario.sign,
    )
}

/// Best parameter found by [`optimize_param`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumPoint {
    pub param: f64,
    pub breakdown: RateBreakdown,
    /// Final search interval.
    pub bracket: (f64, f64),
}

/// Outcome of a parameter search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimum {
    Secure(OptimumPoint),
    /// No parameter gives a positive rate; carries the least negative point.
    NoSecureOperation(OptimumPoint),
}

impl Optimum {
    pub fn point(&self) -> &OptimumPoint {
        match self {
            Optimum::Secure(p) | Optimum::NoSecureOperation(p) => p,
        }
    }

    pub fn is_secure(&self) -> bool {
        matches!(self, Optimum::Secure(_))
    }

    /// Clamped optimal rate; zero when insecure.
    pub fn rate(&self) -> f64 {
        match self {
            Optimum::Secure(p) => p.breakdown.rate,
            Optimum::NoSecureOperation(_) => 0.0,
        }
    }

    pub fn rate_raw(&self) -> f64 {
        self.point().breakdown.rate_raw
    }
}

/// Maximizes `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(x, f(x), final bracket)`.
pub fn golden_section_max<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<(f64, f64, (f64, f64))>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    // 200 iterations shrink any interval far below f64 resolution.
    for _ in 0..200 {
        if (b - a) <= rel_tol * 0.5 * (a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    Ok((x, fx, (a, b)))
}

/// Finds the parameter maximizing the secure rate.
///
/// Scans a logarithmic grid, then refines by golden section inside the cells
/// adjacent to the best grid point.
pub fn optimize_param(scenario: &Scenario) -> Result<Optimum> {
    let settings = &scenario.search;
    settings.validate()?;
    let grid = settings.grid();

    let mut best_idx = 0;
    let mut best = rate_at(scenario, grid[0])?;
    for (i, &p) in grid.iter().enumerate().skip(1) {
        let r = rate_at(scenario, p)?;
        if r.rate_raw > best.rate_raw {
            best = r;
            best_idx = i;
        }
    }

    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let (x, _, bracket) = golden_section_max(
        |p| rate_at(scenario, p).map(|r| r.rate_raw),
        lo,
        hi,
        settings.rel_tol,
    )?;
    let refined = rate_at(scenario, x)?;

    let point = if refined.rate_raw >= best.rate_raw {
        OptimumPoint {
            param: x,
            breakdown: refined,
            bracket,
        }
    } else {
        OptimumPoint {
            param: grid[best_idx],
            breakdown: best,
            bracket: (lo, hi),
        }
    };
    Ok(if point.breakdown.is_secure() {
        Optimum::Secure(point)
    } else {
        Optimum::NoSecureOperation(point)
    })
}

/// One distance of a [`DistanceSweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub distance: f64,
    pub eta: f64,
    pub optimum: Optimum,
}

/// Optimal rate versus distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSweep {
    pub points: Vec<SweepPoint>,
    /// `None` when every grid distance is secure; `Some(0.0)` when even zero
    /// distance is insecure.
    pub cutoff: Option<f64>,
}

/// Optimizes the source at every distance of `l_grid` (ascending).
pub fn sweep_distance(template: &Scenario, l_grid: &[f64]) -> Result<DistanceSweep> {
    if l_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config(
            "distance grid must be sorted ascending".into(),
        ));
    }
    let points = l_grid
        .par_iter()
        .map(|&l| {
            let sc = template.at_distance(l)?;
            Ok(SweepPoint {
                distance: l,
                eta: sc.eta(),
                optimum: optimize_param(&sc)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cutoff = match points.last() {
        Some(last) if !last.optimum.is_secure() => match cutoff_distance(template, last.distance) {
            Ok(l) => Some(l),
            Err(Error::DegenerateInput(_)) => Some(0.0),
            Err(e) => return Err(e),
        },
        _ => None,
    };
    Ok(DistanceSweep { points, cutoff })
}

fn secure_at(template: &Scenario, distance: f64) -> Result<bool> {
    Ok(optimize_param(&template.at_distance(distance)?)?.is_secure())
}

/// Largest distance (to [`CUTOFF_RESOLUTION_KM`]) at which the optimal raw
/// rate stays positive. Returns `l_max` when secure all the way out.
pub fn cutoff_distance(template: &Scenario, l_max: f64) -> Result<f64> {
    if !secure_at(template, 0.0)? {
        return Err(Error::DegenerateInput(
            "no secure operation at zero distance",
        ));
    }
    if secure_at(template, l_max)? {
        return Ok(l_max);
    }
    let (mut lo, mut hi) = (0.0, l_max);
    while hi - lo > CUTOFF_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if secure_at(template, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
