//! Square error ε² = ⟨N²⟩ and square disturbance η² = ⟨D²⟩ of the Faraday
//! measurement of σz followed by σx, where
//!
//! * `N = M_T − σz⊗I` is the noise of the calibrated meter readout, and
//! * `D = U†(σx⊗I)U − σx⊗I` is the back-action on σx.
//!
//! The primary numbers come from the Heisenberg-picture operators evaluated
//! on the initial product state. [`square_error_schrodinger`] and
//! [`square_disturbance_schrodinger`] recompute them by evolving the state
//! instead. Closed forms are provided for the coherent meter and for the
//! amplitude-squeezed meter.

use rayon::prelude::*;
use thiserror::Error;

use crate::faraday::{
    calibrated_meter, heisenberg_bx, FaradayError, JointContext, MeasurementConfig,
    MeterSetup,
};
use crate::linalg::{self, pauli, BasisTag, Ket, LinalgError, Operator};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdrError {
    #[error("square error diverges at g = {g} (sin 2g = 0)")]
    CalibrationSingular { g: f64 },
    #[error(transparent)]
    Faraday(FaradayError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<FaradayError> for EdrError {
    fn from(e: FaradayError) -> Self {
        match e {
            FaradayError::CalibrationSingular { g } => EdrError::CalibrationSingular { g },
            other => EdrError::Faraday(other),
        }
    }
}

/// `M_T − σz⊗I`.
pub fn noise_operator(ctx: &JointContext) -> Result<Operator, EdrError> {
    Ok(&calibrated_meter(ctx)? - &ctx.measured_initial())
}

/// `B_T − σx⊗I`.
pub fn disturbance_operator(ctx: &JointContext) -> Result<Operator, EdrError> {
    Ok(&heisenberg_bx(ctx)? - &ctx.disturbed_initial())
}

fn joint_state(psi: &Ket, xi: &Ket) -> Result<Ket, EdrError> {
    if psi.basis() != &BasisTag::Spin {
        return Err(LinalgError::BasisMismatch {
            left: BasisTag::Spin,
            right: psi.basis().clone(),
        }
        .into());
    }
    Ok(psi.tensor(xi))
}

/// ⟨Ψ|X²|Ψ⟩ = ‖XΨ‖² for Hermitian X.
fn second_moment(op: &Operator, state: &Ket) -> Result<f64, EdrError> {
    Ok(op.apply(state)?.norm_sqr())
}

pub fn square_error_numeric(ctx: &JointContext, psi: &Ket, xi: &Ket) -> Result<f64, EdrError> {
    second_moment(&noise_operator(ctx)?, &joint_state(psi, xi)?)
}

pub fn square_disturbance_numeric(ctx: &JointContext, psi: &Ket, xi: &Ket) -> Result<f64, EdrError> {
    second_moment(&disturbance_operator(ctx)?, &joint_state(psi, xi)?)
}

/// ε² with the state evolved: `NΨ = U†(I⊗Sy)(UΨ)/(⟨Sx⟩ sin 2g) − (σz⊗I)Ψ`.
pub fn square_error_schrodinger(ctx: &JointContext, psi: &Ket, xi: &Ket) -> Result<f64, EdrError> {
    let s = (2.0 * ctx.g).sin();
    if s.abs() <= tolerances::CALIBRATION_SINGULAR {
        return Err(EdrError::CalibrationSingular { g: ctx.g });
    }
    let state = joint_state(psi, xi)?;
    let evolved = ctx.u_t.apply(&state)?;
    let sy = linalg::tensor(&pauli::identity(), &ctx.stokes.sy);
    let read = ctx.u_t.adjoint().apply(&sy.apply(&evolved)?)?;
    let read = read.scale((1.0 / (ctx.mean_sx * s)).into());
    let noise = read.checked_sub(&ctx.measured_initial().apply(&state)?)?;
    Ok(noise.norm_sqr())
}

/// η² with the state evolved: `DΨ = U†(σx⊗I)(UΨ) − (σx⊗I)Ψ`.
pub fn square_disturbance_schrodinger(ctx: &JointContext, psi: &Ket, xi: &Ket) -> Result<f64, EdrError> {
    let state = joint_state(psi, xi)?;
    let sx = ctx.disturbed_initial();
    let evolved = ctx.u_t.apply(&state)?;
    let back = ctx.u_t.adjoint().apply(&sx.apply(&evolved)?)?;
    Ok(back.checked_sub(&sx.apply(&state)?)?.norm_sqr())
}

fn check_calibration(g: f64) -> Result<f64, EdrError> {
    let s = (2.0 * g).sin();
    if s.abs() <= tolerances::CALIBRATION_SINGULAR {
        Err(EdrError::CalibrationSingular { g })
    } else {
        Ok(s)
    }
}

/// Coherent meter: `1 / (|α|² sin² 2g)`.
pub fn square_error_analytic(g: f64, alpha2: f64) -> Result<f64, EdrError> {
    let s = check_calibration(g)?;
    Ok(1.0 / (alpha2 * s * s))
}

/// Coherent meter: `2(1 − e^{−2|α|² sin² g})`.
pub fn square_disturbance_analytic(g: f64, alpha2: f64) -> f64 {
    square_disturbance_squeezed_analytic(g, alpha2, 0.0)
}

/// Amplitude-squeezed meter (θ = 0):
/// `(|α|²e^{−2r} + sinh²2r) / (|α|⁴ sin² 2g)`.
///
/// With the σy eigenstate ⟨σz⟩ = 0 kills the cross terms, leaving
/// `(Var Sy cos²2g + Var Sx sin²2g) / (⟨Sx⟩² sin²2g)` with Var Sx = Var Sy.
pub fn square_error_squeezed_analytic(g: f64, alpha2: f64, r: f64) -> Result<f64, EdrError> {
    let s = check_calibration(g)?;
    let variance = alpha2 * (-2.0 * r).exp() + (2.0 * r).sinh().powi(2);
    Ok(variance / (alpha2 * alpha2 * s * s))
}

/// `⟨cos 2g Sz⟩` for the (squeezed) coherent meter: `e^{−2|α|²e^{2r} sin²g}`.
///
/// Sz commutes with the two-mode squeezer, so the average reduces to a
/// displacement overlap of the squeezed vacuum.
pub fn cos_sz_mean(g: f64, alpha2: f64, r: f64) -> f64 {
    (-2.0 * alpha2 * (2.0 * r).exp() * g.sin().powi(2)).exp()
}

/// `2(1 − ⟨cos 2g Sz⟩)`.
pub fn square_disturbance_squeezed_analytic(g: f64, alpha2: f64, r: f64) -> f64 {
    2.0 * (1.0 - cos_sz_mean(g, alpha2, r))
}

/// ⟨D⟩ = c·⟨σx⟩_ψ with `c = ⟨cos 2gSz⟩ − 1`.
pub fn disturbance_bias_coefficient(g: f64, alpha2: f64, r: f64) -> f64 {
    cos_sz_mean(g, alpha2, r) - 1.0
}

pub fn analytic_pair(g: f64, alpha2: f64, r: f64) -> (Result<f64, EdrError>, f64) {
    if r == 0.0 {
        (square_error_analytic(g, alpha2), square_disturbance_analytic(g, alpha2))
    } else {
        (
            square_error_squeezed_analytic(g, alpha2, r),
            square_disturbance_squeezed_analytic(g, alpha2, r),
        )
    }
}

/// One sample of the error/disturbance sweep for the σy-eigenstate spin.
#[derive(Clone, Debug, PartialEq)]
pub struct EdrPoint {
    pub g: f64,
    pub alpha2: f64,
    pub r: f64,
    pub cutoff: usize,
    /// `None` where the calibration is singular (g = nπ/2).
    pub eps2: Option<f64>,
    pub eta2: f64,
    pub eps2_analytic: Option<f64>,
    pub eta2_analytic: f64,
    /// |⟨N⟩| on the prepared spin state.
    pub bias_noise: Option<f64>,
    /// max |⟨D⟩| over the six Pauli eigenstates.
    pub bias_disturbance: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub c_ab: f64,
    pub norm_deficit: f64,
}

impl EdrPoint {
    pub fn is_singular(&self) -> bool {
        self.eps2.is_none()
    }

    pub fn eps2_relative_gap(&self) -> Option<f64> {
        Some((self.eps2? - self.eps2_analytic?).abs() / self.eps2_analytic?.abs())
    }

    pub fn eta2_relative_gap(&self) -> f64 {
        let gap = (self.eta2 - self.eta2_analytic).abs();
        if self.eta2_analytic == 0.0 {
            gap
        } else {
            gap / self.eta2_analytic.abs()
        }
    }
}

/// Spread (standard deviation) of a ±1-valued observable and the commutator
/// term ½|⟨[σz, σx]⟩| = |⟨σy⟩| on `psi`.
pub fn spin_spreads(psi: &Ket) -> Result<(f64, f64, f64), LinalgError> {
    let sd = |op: &Operator| -> Result<f64, LinalgError> {
        let m = linalg::expectation_real(op, psi)?;
        Ok((1.0 - m * m).max(0.0).sqrt())
    };
    let c_ab = linalg::expectation_real(&pauli::sigma_y(), psi)?.abs();
    Ok((sd(&pauli::sigma_z())?, sd(&pauli::sigma_x())?, c_ab))
}

/// Evaluates one g on a prepared meter.
pub fn edr_point_at(setup: &MeterSetup, g: f64) -> Result<EdrPoint, EdrError> {
    let ctx = setup.context(g)?;
    let psi = pauli::sigma_y_plus();
    let xi = &setup.meter_state;
    let state = psi.tensor(xi);
    let (alpha2, r) = (setup.config.alpha2(), setup.config.r());

    let (eps2, bias_noise) = match noise_operator(&ctx) {
        Ok(noise) => (
            Some(second_moment(&noise, &state)?),
            Some(linalg::expectation(&noise, &state)?.norm()),
        ),
        Err(EdrError::CalibrationSingular { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let disturbance = disturbance_operator(&ctx)?;
    let eta2 = second_moment(&disturbance, &state)?;
    let mut bias_disturbance: f64 = 0.0;
    for (_, spin) in pauli::eigenstates() {
        let mean = linalg::expectation(&disturbance, &spin.tensor(xi))?;
        bias_disturbance = bias_disturbance.max(mean.norm());
    }
    let (eps2_analytic, eta2_analytic) = analytic_pair(g, alpha2, r);
    let (sigma_a, sigma_b, c_ab) = spin_spreads(&psi)?;
    Ok(EdrPoint {
        g,
        alpha2,
        r,
        cutoff: setup.config.cutoff,
        eps2,
        eta2,
        eps2_analytic: eps2_analytic.ok(),
        eta2_analytic,
        bias_noise,
        bias_disturbance,
        sigma_a,
        sigma_b,
        c_ab,
        norm_deficit: xi.norm_deficit(),
    })
}

/// Prepares the meter for `cfg` and evaluates `cfg.g`.
pub fn edr_point(cfg: &MeasurementConfig) -> Result<EdrPoint, EdrError> {
    let setup = MeterSetup::prepare(cfg)?;
    edr_point_at(&setup, cfg.g)
}

/// Evaluates many g values on one meter preparation. Results come back in
/// grid order.
pub fn edr_sweep(setup: &MeterSetup, gs: &[f64]) -> Vec<Result<EdrPoint, EdrError>> {
    gs.par_iter().map(|&g| edr_point_at(setup, g)).collect()
}

/// Largest |⟨N⟩| over the six Pauli eigenstates.
pub fn noise_bias_over_test_set(ctx: &JointContext) -> Result<f64, EdrError> {
    let noise = noise_operator(ctx)?;
    let mut worst: f64 = 0.0;
    for (_, psi) in pauli::eigenstates() {
        worst = worst.max(linalg::expectation(&noise, &psi.tensor(&ctx.meter_state))?.norm());
    }
    Ok(worst)
}

/// Largest |⟨D⟩ − c·⟨σx⟩_ψ| over the six Pauli eigenstates, with `c` the
/// closed-form bias coefficient.
pub fn disturbance_bias_error(ctx: &JointContext, coefficient: f64) -> Result<f64, EdrError> {
    let d = disturbance_operator(ctx)?;
    let mut worst: f64 = 0.0;
    for (_, psi) in pauli::eigenstates() {
        let measured = linalg::expectation(&d, &psi.tensor(&ctx.meter_state))?;
        let predicted = coefficient * linalg::expectation_real(&pauli::sigma_x(), &psi)?;
        worst = worst.max((measured - predicted).norm());
    }
    Ok(worst)
}

/// (|0⟩+i|1⟩)/√2 as used for every sweep.
pub fn system_state() -> Ket {
    pauli::sigma_y_plus()
}
