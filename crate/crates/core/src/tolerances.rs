//! Numerical tolerances shared by the library, the CLI verification suites
//! and the tests. Every threshold lives here so there is one place to cite.

/// Maximum entrywise |M − M†| for an operator to count as Hermitian.
pub const HERMITICITY: f64 = 1e-12;

/// Maximum entrywise |U†U − I| for an operator to count as unitary.
pub const UNITARITY: f64 = 1e-11;

/// Relative tolerance for oracle comparisons that are exact up to rounding.
pub const ORACLE_RELATIVE: f64 = 1e-9;

/// Maximum entrywise difference between spectral Heisenberg evolution and the
/// closed commutator-series forms.
pub const BCH_MAX_ENTRY: f64 = 1e-10;

/// Largest imaginary part tolerated in the expectation of a Hermitian operator.
pub const EXPECTATION_IMAG: f64 = 1e-12;

/// Calibration guard: `|sin 2g|` must exceed this for the meter to be invertible.
pub const CALIBRATION_SINGULAR: f64 = 1e-9;

/// `⟨Sx⟩` below this is treated as a vanishing calibration constant.
pub const ZERO_MEAN_SX: f64 = 1e-12;

/// Half-width of the band around 1 inside which a bound is reported as
/// "boundary" rather than satisfied or violated.
pub const BOUND_BAND: f64 = 1e-9;

/// Unbiasedness of the noise operator, `|⟨N⟩|`.
pub const NOISE_BIAS: f64 = 1e-10;

/// Agreement of the disturbance bias with its closed form.
pub const DISTURBANCE_BIAS: f64 = 1e-8;

/// Heisenberg versus Schrödinger picture agreement of ε² and η².
pub const PICTURE_AGREEMENT: f64 = 1e-10;

/// Default truncation tail tolerance for prepared meter states.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Largest tail tolerance accepted by the cutoff search.
pub const MAX_TAIL_TOL: f64 = 1e-6;

/// Hard ceiling on the total-photon-number cutoff.
pub const CUTOFF_CEILING: usize = 200;

/// Absolute convergence target of the Gauss–Hermite node-doubling check.
pub const QUADRATURE_ABSOLUTE: f64 = 1e-12;

/// Above this measurement strength the weak-interaction forms are flagged.
pub const WIA_VALIDITY_CHI: f64 = 0.3;
