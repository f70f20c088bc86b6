//! Faraday interaction `U = exp(−ig σz⊗Sz)` between the spin and the light
//! meter, and the Heisenberg-picture operators it produces.
//!
//! The evolution is computed spectrally. The default (structured) path uses
//! that σz is diagonal: `U = |0⟩⟨0|⊗e^{−igSz} + |1⟩⟨1|⊗e^{+igSz}`, with one
//! eigendecomposition of Sz reused for every g. [`generic_unitary`]
//! diagonalizes the full joint generator instead and serves as its oracle.
//! The closed commutator-series forms ([`bch_sy`], [`bch_bx`]) are a second,
//! independent route to the evolved operators.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{self, pauli, tensor, BasisTag, Ket, LinalgError, Operator, Spectral, C64};
use crate::meter::{self, MeterBasis, MeterError, SqueezeSpec, StokesSet};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaradayError {
    #[error("calibration is singular at g = {g}: |sin 2g| ≤ 1e-9, no Sy shift reaches the meter")]
    CalibrationSingular { g: f64 },
    #[error("⟨Sx⟩ of the meter state vanishes ({mean_sx:e}); calibration undefined")]
    ZeroMeanSx { mean_sx: f64 },
    #[error("evolution operator not unitary (max |U†U − I| = {deviation:e})")]
    NonUnitary { deviation: f64 },
    #[error("invalid measurement configuration: {0}")]
    InvalidConfig(String),
    #[error("stokes basis cutoff {stokes} does not match configured cutoff {config}")]
    CutoffMismatch { stokes: usize, config: usize },
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One measurement setup. The measured spin observable is always σz and the
/// disturbed one σx; both square to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementConfig {
    /// Integrated interaction strength, radians.
    pub g: f64,
    pub alpha: C64,
    pub squeeze: Option<SqueezeSpec>,
    /// Total-photon-number cutoff of the meter basis.
    pub cutoff: usize,
    pub tail_tol: f64,
}

impl MeasurementConfig {
    /// Real positive α = √alpha2, optional squeezing `r`, cutoff chosen for `tail_tol`.
    pub fn new(g: f64, alpha2: f64, r: f64, tail_tol: f64) -> Result<Self, FaradayError> {
        if !g.is_finite() {
            return Err(FaradayError::InvalidConfig(format!("g = {g}")));
        }
        let cutoff = meter::choose_cutoff(alpha2, r, tail_tol)?;
        Ok(MeasurementConfig {
            g,
            alpha: C64::new(alpha2.sqrt(), 0.0),
            squeeze: (r != 0.0).then(|| SqueezeSpec::new(r)),
            cutoff,
            tail_tol,
        })
    }

    pub fn coherent(g: f64, alpha2: f64) -> Result<Self, FaradayError> {
        Self::new(g, alpha2, 0.0, tolerances::DEFAULT_TAIL_TOL)
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn r(&self) -> f64 {
        self.squeeze.map_or(0.0, |s| s.r)
    }

    pub fn measured_observable() -> Operator {
        pauli::sigma_z()
    }

    pub fn disturbed_observable() -> Operator {
        pauli::sigma_x()
    }

    pub fn prepare_meter_state(&self, basis: &MeterBasis) -> Result<Ket, FaradayError> {
        let state = match self.squeeze {
            Some(z) if z.r != 0.0 => {
                meter::squeezed_coherent_state(self.alpha, z, basis, self.tail_tol)?
            }
            _ => meter::coherent_state(self.alpha, basis, self.tail_tol)?,
        };
        Ok(state)
    }
}

/// Everything about the meter that does not depend on g: basis, Stokes
/// operators, prepared state and the spectral decomposition of Sz. Sweeps
/// build this once and derive a [`JointContext`] per g.
#[derive(Clone)]
pub struct MeterSetup {
    pub config: MeasurementConfig,
    pub stokes: Arc<StokesSet>,
    pub meter_state: Ket,
    pub mean_sx: f64,
    sz_spectral: Arc<Spectral>,
}

impl MeterSetup {
    pub fn prepare(config: &MeasurementConfig) -> Result<Self, FaradayError> {
        let basis = MeterBasis::new(config.cutoff);
        let stokes = Arc::new(meter::build_stokes(&basis));
        Self::with_stokes(config, stokes)
    }

    pub fn with_stokes(config: &MeasurementConfig, stokes: Arc<StokesSet>) -> Result<Self, FaradayError> {
        if stokes.basis.n_max() != config.cutoff {
            return Err(FaradayError::CutoffMismatch {
                stokes: stokes.basis.n_max(),
                config: config.cutoff,
            });
        }
        let meter_state = config.prepare_meter_state(&stokes.basis)?;
        let mean_sx = linalg::expectation_real(&stokes.sx, &meter_state)?;
        let sz_spectral = Arc::new(Spectral::new(&stokes.sz)?);
        Ok(MeterSetup {
            config: config.clone(),
            stokes,
            meter_state,
            mean_sx,
            sz_spectral,
        })
    }

    /// Joint context at interaction strength `g` (overrides `config.g`).
    pub fn context(&self, g: f64) -> Result<JointContext, FaradayError> {
        if !g.is_finite() {
            return Err(FaradayError::InvalidConfig(format!("g = {g}")));
        }
        let minus = self.sz_spectral.evolution(g);
        let plus = self.sz_spectral.evolution(-g);
        let up = Operator::diagonal(BasisTag::Spin, |i| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0));
        let down = Operator::diagonal(BasisTag::Spin, |i| C64::new(if i == 1 { 1.0 } else { 0.0 }, 0.0));
        let u_t = &tensor(&up, &minus) + &tensor(&down, &plus);
        let deviation = u_t.unitarity_deviation();
        if deviation > tolerances::UNITARITY {
            return Err(FaradayError::NonUnitary { deviation });
        }
        Ok(JointContext {
            g,
            basis: u_t.basis().clone(),
            u_t,
            stokes: Arc::clone(&self.stokes),
            sz_spectral: Arc::clone(&self.sz_spectral),
            mean_sx: self.mean_sx,
            meter_state: self.meter_state.clone(),
        })
    }

    pub fn sz_spectral(&self) -> &Spectral {
        &self.sz_spectral
    }
}

/// The evolution operator at one g, with the meter data it was built from.
#[derive(Clone)]
pub struct JointContext {
    pub g: f64,
    pub basis: BasisTag,
    pub u_t: Operator,
    pub stokes: Arc<StokesSet>,
    /// ⟨Sx⟩ of the initial meter state, the calibration constant.
    pub mean_sx: f64,
    pub meter_state: Ket,
    sz_spectral: Arc<Spectral>,
}

impl JointContext {
    pub fn spin_identity(&self) -> Operator {
        pauli::identity()
    }

    pub fn meter_identity(&self) -> Operator {
        Operator::identity(self.stokes.basis.tag())
    }

    /// `σz ⊗ I`.
    pub fn measured_initial(&self) -> Operator {
        tensor(&pauli::sigma_z(), &self.meter_identity())
    }

    /// `σx ⊗ I`.
    pub fn disturbed_initial(&self) -> Operator {
        tensor(&pauli::sigma_x(), &self.meter_identity())
    }

    pub fn sz_spectral(&self) -> &Spectral {
        &self.sz_spectral
    }
}

/// Builds the joint evolution for `cfg` from scratch.
pub fn build_unitary(cfg: &MeasurementConfig, stokes: &StokesSet) -> Result<JointContext, FaradayError> {
    MeterSetup::with_stokes(cfg, Arc::new(stokes.clone()))?.context(cfg.g)
}

/// `exp(−ig σz⊗Sz)` by diagonalizing the joint generator directly.
pub fn generic_unitary(g: f64, stokes: &StokesSet) -> Result<Operator, FaradayError> {
    let generator = tensor(&pauli::sigma_z(), &stokes.sz);
    Ok(Spectral::new(&generator)?.evolution(g))
}

/// `U†(I⊗Sy)U`.
pub fn heisenberg_sy(ctx: &JointContext) -> Result<Operator, FaradayError> {
    let sy = tensor(&ctx.spin_identity(), &ctx.stokes.sy);
    Ok(sy.conjugate_by(&ctx.u_t)?)
}

/// `(I⊗Sy)cos 2g + (σz⊗Sx)sin 2g`.
pub fn bch_sy(g: f64, stokes: &StokesSet) -> Operator {
    let sy = tensor(&pauli::identity(), &stokes.sy);
    let zx = tensor(&pauli::sigma_z(), &stokes.sx);
    &sy.scale_real((2.0 * g).cos()) + &zx.scale_real((2.0 * g).sin())
}

/// `M_T = U†(I⊗Sy)U / (⟨Sx⟩ sin 2g)`.
pub fn calibrated_meter(ctx: &JointContext) -> Result<Operator, FaradayError> {
    let s = (2.0 * ctx.g).sin();
    if s.abs() <= tolerances::CALIBRATION_SINGULAR {
        return Err(FaradayError::CalibrationSingular { g: ctx.g });
    }
    if ctx.mean_sx.abs() <= tolerances::ZERO_MEAN_SX {
        return Err(FaradayError::ZeroMeanSx { mean_sx: ctx.mean_sx });
    }
    Ok(heisenberg_sy(ctx)?.scale_real(1.0 / (ctx.mean_sx * s)))
}

/// `U†(σx⊗I)U`.
pub fn heisenberg_bx(ctx: &JointContext) -> Result<Operator, FaradayError> {
    Ok(ctx.disturbed_initial().conjugate_by(&ctx.u_t)?)
}

/// `σx⊗cos(2g Sz) − σy⊗sin(2g Sz)` from the spectral decomposition of Sz.
pub fn bch_bx(g: f64, sz: &Spectral) -> Operator {
    let cos = sz.map_real(|v| (2.0 * g * v).cos());
    let sin = sz.map_real(|v| (2.0 * g * v).sin());
    &tensor(&pauli::sigma_x(), &cos) - &tensor(&pauli::sigma_y(), &sin)
}

/// Max-entry gaps between the spectrally evolved `(I⊗Sy)_T`, `(σx⊗I)_T` and
/// their closed forms at a fixed cutoff. The evolution comes from
/// diagonalizing the joint generator, independently of the block-diagonal
/// construction used by sweeps.
pub fn bch_residuals(g: f64, cutoff: usize) -> Result<(f64, f64), FaradayError> {
    let stokes = meter::build_stokes(&MeterBasis::new(cutoff));
    let u = generic_unitary(g, &stokes)?;
    let sy = tensor(&pauli::identity(), &stokes.sy).conjugate_by(&u)?;
    let bx = tensor(&pauli::sigma_x(), &Operator::identity(stokes.basis.tag())).conjugate_by(&u)?;
    let sz = Spectral::new(&stokes.sz)?;
    Ok((
        sy.max_abs_diff(&bch_sy(g, &stokes))?,
        bx.max_abs_diff(&bch_bx(g, &sz))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    // `cutoff` is raised to the smallest adequate one if needed
    fn setup(alpha2: f64, cutoff: usize) -> MeterSetup {
        let tail_tol = 1e-12;
        let cfg = MeasurementConfig {
            g: 0.0,
            alpha: C64::new(alpha2.sqrt(), 0.0),
            squeeze: None,
            cutoff: cutoff.max(meter::choose_cutoff(alpha2, 0.0, tail_tol).unwrap()),
            tail_tol,
        };
        MeterSetup::prepare(&cfg).unwrap()
    }

    #[test]
    fn bch_residuals_small() {
        for g in [0.1, FRAC_PI_2, 2.5] {
            let (sy, bx) = bch_residuals(g, 8).unwrap();
            assert!(sy < 1e-10 && bx < 1e-10, "{g}: {sy:e} {bx:e}");
        }
    }

    #[test]
    fn zero_coupling_is_identity() {
        let ctx = setup(2.0, 12).context(0.0).unwrap();
        let id = Operator::identity(ctx.basis.clone());
        assert!(ctx.u_t.max_abs_diff(&id).unwrap() < 1e-14);
    }

    #[test]
    fn unitary_at_generic_g() {
        let s = setup(6.0, 30);
        let ctx = s.context(0.37).unwrap();
        assert!(ctx.u_t.unitarity_deviation() <= 1e-11);
        let psi = pauli::sigma_y_plus().tensor(&s.meter_state);
        let evolved = ctx.u_t.apply(&psi).unwrap();
        assert!((evolved.norm() - psi.norm()).abs() < 1e-12);
    }

    #[test]
    fn evolution_is_additive_in_g() {
        let s = setup(2.0, 10);
        let once = s.context(0.3).unwrap().u_t;
        let twice = s.context(0.6).unwrap().u_t;
        assert!((&once * &once).max_abs_diff(&twice).unwrap() < 1e-12);
    }

    #[test]
    fn structured_matches_generic() {
        let s = setup(2.0, 10);
        for g in [0.1, 0.8, 2.5] {
            let ctx = s.context(g).unwrap();
            let generic = generic_unitary(g, &s.stokes).unwrap();
            assert!(ctx.u_t.max_abs_diff(&generic).unwrap() < 1e-11);
        }
    }

    #[test]
    fn sy_closed_form_special_points() {
        let s = setup(2.0, 8);
        let at_quarter = heisenberg_sy(&s.context(FRAC_PI_4).unwrap()).unwrap();
        let zx = tensor(&pauli::sigma_z(), &s.stokes.sx);
        assert!(at_quarter.max_abs_diff(&zx).unwrap() < 1e-10);
        let at_half = heisenberg_sy(&s.context(FRAC_PI_2).unwrap()).unwrap();
        let sy = tensor(&pauli::identity(), &s.stokes.sy);
        assert!(at_half.max_abs_diff(&-&sy).unwrap() < 1e-10);
    }

    #[test]
    fn sy_mean_vanishes_for_sigma_y_eigenstate() {
        let s = setup(6.0, 30);
        let state = pauli::sigma_y_plus().tensor(&s.meter_state);
        for g in [0.2, 0.9, 1.7] {
            let op = heisenberg_sy(&s.context(g).unwrap()).unwrap();
            assert!(linalg::expectation(&op, &state).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn calibration_guards() {
        let s = setup(6.0, 30);
        let err = calibrated_meter(&s.context(FRAC_PI_2).unwrap());
        assert!(matches!(err, Err(FaradayError::CalibrationSingular { .. })));
        let vacuum = setup(0.0, 4);
        let err = calibrated_meter(&vacuum.context(0.5).unwrap());
        assert!(matches!(err, Err(FaradayError::ZeroMeanSx { .. })));
    }

    #[test]
    fn calibrated_meter_at_quarter_turn() {
        let s = setup(6.0, 30);
        let m = calibrated_meter(&s.context(FRAC_PI_4).unwrap()).unwrap();
        let expected = tensor(&pauli::sigma_z(), &s.stokes.sx).scale_real(1.0 / s.mean_sx);
        assert!(m.max_abs_diff(&expected).unwrap() < 1e-10);
        assert!((s.mean_sx - 6.0).abs() < 1e-9);
    }

    #[test]
    fn calibrated_meter_is_unbiased() {
        let s = setup(6.0, 30);
        let ctx = s.context(0.6).unwrap();
        let m = calibrated_meter(&ctx).unwrap();
        let noise = &m - &ctx.measured_initial();
        for (name, psi) in pauli::eigenstates() {
            let state = psi.tensor(&s.meter_state);
            let bias = linalg::expectation(&noise, &state).unwrap().norm();
            assert!(bias <= 1e-10, "{name}: {bias}");
        }
    }

    #[test]
    fn bx_revival_and_identity() {
        let s = setup(2.0, 10);
        let bx0 = heisenberg_bx(&s.context(0.0).unwrap()).unwrap();
        let sx = s.context(0.0).unwrap().disturbed_initial();
        assert!(bx0.max_abs_diff(&sx).unwrap() < 1e-14);
        let revived = heisenberg_bx(&s.context(PI).unwrap()).unwrap();
        assert!(revived.max_abs_diff(&sx).unwrap() < 1e-10);
    }

    #[test]
    fn bx_flips_on_odd_sz_at_half_turn() {
        // project onto Sz eigenspaces; odd eigenvalues rotate σx by π
        let s = setup(2.0, 6);
        let bx = heisenberg_bx(&s.context(FRAC_PI_2).unwrap()).unwrap();
        let odd = s.sz_spectral().map_real(|v| if (v.round() as i64).rem_euclid(2) == 1 { 1.0 } else { 0.0 });
        let even = s.sz_spectral().map_real(|v| if (v.round() as i64).rem_euclid(2) == 0 { 1.0 } else { 0.0 });
        let sigma_x = pauli::sigma_x();
        let p_odd = tensor(&pauli::identity(), &odd);
        let p_even = tensor(&pauli::identity(), &even);
        let on_odd = &(&p_odd * &bx) * &p_odd;
        let on_even = &(&p_even * &bx) * &p_even;
        assert!(on_odd.max_abs_diff(&-&tensor(&sigma_x, &odd)).unwrap() < 1e-10);
        assert!(on_even.max_abs_diff(&tensor(&sigma_x, &even)).unwrap() < 1e-10);
    }

    #[test]
    fn bx_is_periodic_in_pi() {
        let s = setup(2.0, 8);
        for g in [0.3, 1.1] {
            let a = heisenberg_bx(&s.context(g).unwrap()).unwrap();
            let b = heisenberg_bx(&s.context(g + PI).unwrap()).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cutoff_mismatch_rejected() {
        let cfg = MeasurementConfig::coherent(0.3, 2.0).unwrap();
        let stokes = meter::build_stokes(&MeterBasis::new(cfg.cutoff + 1));
        assert!(matches!(
            build_unitary(&cfg, &stokes),
            Err(FaradayError::CutoffMismatch { .. })
        ));
    }
}
