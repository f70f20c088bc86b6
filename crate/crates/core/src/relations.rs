//! Heisenberg–Arthurs–Kelly, Ozawa, Branciard–Ozawa and tight Branciard–Ozawa
//! expressions, and error–disturbance tradeoff curves.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::edr::{self, EdrError};
use crate::faraday::{MeasurementConfig, MeterSetup};
use crate::psa::{self, PsaError};
use crate::tolerances::BOUND_BAND;

#[derive(Debug, Error)]
pub enum RelationsError {
    #[error("negative input: {name} = {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("specialized bounds need σA = σB = C = 1, got ({sigma_a}, {sigma_b}, {c_ab})")]
    NotUnitSpread { sigma_a: f64, sigma_b: f64, c_ab: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Edr(#[from] EdrError),
    #[error(transparent)]
    Psa(#[from] PsaError),
}

/// Position of an expression relative to its bound of 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Below,
    Boundary,
    Above,
}

impl Verdict {
    pub fn of(value: f64) -> Self {
        if value < 1.0 - BOUND_BAND {
            Verdict::Below
        } else if value > 1.0 + BOUND_BAND {
            Verdict::Above
        } else {
            Verdict::Boundary
        }
    }

    /// True unless strictly below the band.
    pub fn holds(self) -> bool {
        self != Verdict::Below
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Below => "below",
            Verdict::Boundary => "boundary",
            Verdict::Above => "above",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsRecord {
    pub hak: f64,
    pub ozawa_lhs: f64,
    pub bo_lhs: f64,
    pub bot_lhs: f64,
    pub hak_violated: bool,
    pub ozawa_satisfied: bool,
    pub bo_satisfied: bool,
    pub bot_satisfied: bool,
}

impl BoundsRecord {
    pub fn hak_verdict(&self) -> Verdict {
        Verdict::of(self.hak)
    }

    pub fn bot_verdict(&self) -> Verdict {
        Verdict::of(self.bot_lhs)
    }

    /// Flag tokens for CSV output, in fixed order.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        match self.hak_verdict() {
            Verdict::Below => out.push("HAK_VIOLATED"),
            Verdict::Boundary => out.push("HAK_BOUNDARY"),
            Verdict::Above => {}
        }
        if !self.ozawa_satisfied {
            out.push("OZAWA_VIOLATED");
        }
        match Verdict::of(self.bo_lhs) {
            Verdict::Below => out.push("BO_VIOLATED"),
            Verdict::Boundary => out.push("BO_BOUNDARY"),
            Verdict::Above => {}
        }
        match self.bot_verdict() {
            Verdict::Below => out.push("BOT_VIOLATED"),
            Verdict::Boundary => out.push("BOT_BOUNDARY"),
            Verdict::Above => {}
        }
        out
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), RelationsError> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(RelationsError::Negative { name, value })
    }
}

/// Evaluates the four expressions. The product, BO and BOt forms are the
/// specialized ones for σA = σB = C = 1 and reject anything else; Ozawa's
/// three-term form uses the supplied spreads.
pub fn evaluate_bounds(
    eps2: f64,
    eta2: f64,
    sigma_a: f64,
    sigma_b: f64,
    c_ab: f64,
) -> Result<BoundsRecord, RelationsError> {
    non_negative("eps2", eps2)?;
    non_negative("eta2", eta2)?;
    non_negative("sigma_a", sigma_a)?;
    non_negative("sigma_b", sigma_b)?;
    non_negative("c_ab", c_ab)?;
    let unit = |x: f64| (x - 1.0).abs() <= BOUND_BAND;
    if !(unit(sigma_a) && unit(sigma_b) && unit(c_ab)) {
        return Err(RelationsError::NotUnitSpread { sigma_a, sigma_b, c_ab });
    }
    let hak = eps2 * eta2;
    let ozawa_lhs = hak.sqrt() + eps2.sqrt() * sigma_b + eta2.sqrt() * sigma_a;
    let bo_lhs = eps2 + eta2;
    let bot_lhs = eps2 + eta2 * (1.0 - eta2 / 4.0);
    Ok(BoundsRecord {
        hak,
        ozawa_lhs,
        bo_lhs,
        bot_lhs,
        hak_violated: Verdict::of(hak) == Verdict::Below,
        ozawa_satisfied: ozawa_lhs >= c_ab - BOUND_BAND,
        bo_satisfied: Verdict::of(bo_lhs).holds(),
        bot_satisfied: Verdict::of(bot_lhs).holds(),
    })
}

/// Unit-spread shorthand.
pub fn evaluate_unit(eps2: f64, eta2: f64) -> Result<BoundsRecord, RelationsError> {
    evaluate_bounds(eps2, eta2, 1.0, 1.0, 1.0)
}

/// Smallest η² on the branch η² ≤ 2 with ε² + η²(1 − η²/4) = 1.
pub fn bot_frontier(eps2: f64) -> f64 {
    if eps2 > 1.0 {
        0.0
    } else {
        2.0 * (1.0 - eps2.max(0.0).sqrt())
    }
}

/// η² = 1/ε².
pub fn hak_frontier(eps2: f64) -> f64 {
    1.0 / eps2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeoffModel {
    ExactCoherent,
    Psa,
    Wia,
}

/// One sample of a tradeoff curve. `parameter` is g for the exact model and
/// χ otherwise. `bounds` is `None` for singular samples.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffSample {
    pub parameter: f64,
    pub eps2: Option<f64>,
    pub eta2: f64,
    pub bounds: Option<BoundsRecord>,
}

/// A model curve plus the two reference frontiers sampled on its ε² range.
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffCurve {
    pub model: TradeoffModel,
    pub samples: Vec<TradeoffSample>,
    pub hak_reference: Vec<(f64, f64)>,
    pub bot_reference: Vec<(f64, f64)>,
}

/// Inclusive, evenly spaced grid.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    let step = (stop - start) / (steps - 1) as f64;
    (0..steps)
        .map(|i| if i + 1 == steps { stop } else { start + step * i as f64 })
        .collect()
}

fn exact_samples(alpha2: f64, tail_tol: f64, gs: &[f64]) -> Result<Vec<TradeoffSample>, RelationsError> {
    let cfg = MeasurementConfig::new(gs[0], alpha2, 0.0, tail_tol).map_err(EdrError::from)?;
    let setup = MeterSetup::prepare(&cfg).map_err(EdrError::from)?;
    edr::edr_sweep(&setup, gs)
        .into_iter()
        .map(|point| {
            let p = point?;
            let bounds = match p.eps2 {
                Some(e) => Some(evaluate_bounds(e, p.eta2, p.sigma_a, p.sigma_b, p.c_ab)?),
                None => None,
            };
            Ok(TradeoffSample {
                parameter: p.g,
                eps2: p.eps2,
                eta2: p.eta2,
                bounds,
            })
        })
        .collect()
}

/// Closed-form ε², η² for the phase-space or weak-interaction model.
pub fn model_pair(model: TradeoffModel, chi: f64) -> Result<(Option<f64>, f64), RelationsError> {
    let (eps2, eta2) = match model {
        TradeoffModel::Psa => (psa::eps2_psa(chi), psa::eta2_psa(chi)?),
        TradeoffModel::Wia => (psa::eps2_wia(chi), psa::eta2_wia(chi)?),
        TradeoffModel::ExactCoherent => {
            return Err(RelationsError::InvalidSweep("exact model is swept in g".into()))
        }
    };
    match eps2 {
        Ok(e) => Ok((Some(e), eta2)),
        Err(PsaError::Divergent) => Ok((None, eta2)),
        Err(e) => Err(e.into()),
    }
}

fn chi_samples(model: TradeoffModel, chis: &[f64]) -> Result<Vec<TradeoffSample>, RelationsError> {
    chis.par_iter()
        .map(|&chi| {
            let (eps2, eta2) = model_pair(model, chi)?;
            let bounds = match eps2 {
                Some(e) => Some(evaluate_unit(e, eta2)?),
                None => None,
            };
            Ok(TradeoffSample {
                parameter: chi,
                eps2,
                eta2,
                bounds,
            })
        })
        .collect()
}

/// Sampled `(eps2, eta2)` points of a frontier.
pub type Frontier = Vec<(f64, f64)>;

/// The two frontiers sampled log-uniformly with `points` samples over the
/// range spanned by `eps2_values`. Empty if no positive finite value exists.
pub fn reference_curves(
    eps2_values: impl Iterator<Item = f64>,
    points: usize,
) -> (Frontier, Frontier) {
    let (lo, hi) = eps2_values
        .filter(|e| e.is_finite() && *e > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
    if !lo.is_finite() {
        return (Vec::new(), Vec::new());
    }
    let xs: Vec<f64> = linspace(lo.ln(), hi.ln(), points.max(2))
        .into_iter()
        .map(f64::exp)
        .collect();
    (
        xs.iter().map(|&e| (e, hak_frontier(e))).collect(),
        xs.iter().map(|&e| (e, bot_frontier(e))).collect(),
    )
}

/// Parametric tradeoff sweep. For `ExactCoherent` the grid is in g at the
/// given |α|²; otherwise it is in χ and `alpha2`, `tail_tol` are unused.
pub fn tradeoff_curve(
    model: TradeoffModel,
    grid: &[f64],
    alpha2: f64,
    tail_tol: f64,
) -> Result<TradeoffCurve, RelationsError> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(RelationsError::InvalidSweep("grid must be non-empty and finite".into()));
    }
    let samples = match model {
        TradeoffModel::ExactCoherent => exact_samples(alpha2, tail_tol, grid)?,
        _ => chi_samples(model, grid)?,
    };
    let (hak_reference, bot_reference) =
        reference_curves(samples.iter().filter_map(|s| s.eps2), grid.len().max(2));
    Ok(TradeoffCurve {
        model,
        samples,
        hak_reference,
        bot_reference,
    })
}
