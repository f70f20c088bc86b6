//! The polarized light meter: a two-mode (H, V) Fock space truncated by total
//! photon number, the Stokes operators on it, and the coherent and
//! polarization-squeezed meter states.
//!
//! Every Stokes operator commutes with the total photon number, so truncating
//! by `n_H + n_V ≤ n_max` keeps their algebra closed. Squeezing and
//! displacement do not conserve photon number; they are applied per mode in a
//! padded single-mode space and the product state is then projected onto the
//! analysis basis. The lost probability is reported as the norm deficit and
//! the state is deliberately left unnormalized.

use thiserror::Error;

use crate::linalg::{expectation_real, BasisTag, Ket, LinalgError, Operator, Spectral, C64};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeterError {
    #[error("norm deficit {deficit:e} exceeds tail tolerance {tail_tol:e} at cutoff {n_max}")]
    NormDeficit {
        deficit: f64,
        tail_tol: f64,
        n_max: usize,
    },
    #[error("photon-number cutoff would exceed the ceiling {ceiling}")]
    CutoffCeiling { ceiling: usize },
    #[error("invalid meter parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Two-mode Fock states with `n_H + n_V ≤ n_max`, ordered by total photon
/// number and then by `n_H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeterBasis {
    n_max: usize,
    states: Vec<(usize, usize)>,
}

impl MeterBasis {
    pub fn new(n_max: usize) -> Self {
        let states = (0..=n_max)
            .flat_map(|total| (0..=total).map(move |nh| (nh, total - nh)))
            .collect();
        MeterBasis { n_max, states }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `(n_H, n_V)` pairs in basis order.
    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    pub fn index(&self, n_h: usize, n_v: usize) -> Option<usize> {
        let total = n_h + n_v;
        (total <= self.n_max).then(|| total * (total + 1) / 2 + n_h)
    }

    pub fn tag(&self) -> BasisTag {
        BasisTag::Meter { n_max: self.n_max }
    }
}

/// The four Stokes operators on one meter basis.
#[derive(Clone, Debug)]
pub struct StokesSet {
    pub basis: MeterBasis,
    pub s0: Operator,
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
}

impl StokesSet {
    pub fn as_array(&self) -> [&Operator; 4] {
        [&self.s0, &self.sx, &self.sy, &self.sz]
    }
}

/// S₀ = n_H + n_V, Sx = n_H − n_V, Sy = a_H†a_V + a_H a_V†,
/// Sz = −i(a_H†a_V − a_H a_V†).
pub fn build_stokes(basis: &MeterBasis) -> StokesSet {
    let tag = basis.tag();
    let states = basis.states();
    let s0 = Operator::diagonal(tag.clone(), |i| {
        let (h, v) = states[i];
        C64::new((h + v) as f64, 0.0)
    });
    let sx = Operator::diagonal(tag.clone(), |i| {
        let (h, v) = states[i];
        C64::new(h as f64 - v as f64, 0.0)
    });
    let mut sy = Operator::zeros(tag.clone());
    let mut sz = Operator::zeros(tag);
    for (i, &(h, v)) in states.iter().enumerate() {
        if v == 0 {
            continue;
        }
        // a_H† a_V |h, v⟩ = √((h+1)v) |h+1, v−1⟩, same total number
        let j = basis.index(h + 1, v - 1).expect("photon number conserved");
        let amp = (((h + 1) * v) as f64).sqrt();
        sy.set(j, i, C64::new(amp, 0.0));
        sy.set(i, j, C64::new(amp, 0.0));
        sz.set(j, i, C64::new(0.0, -amp));
        sz.set(i, j, C64::new(0.0, amp));
    }
    StokesSet {
        basis: basis.clone(),
        s0,
        sx,
        sy,
        sz,
    }
}

/// Squeezing `z = r·e^{iθ}`. Preparation enforces the amplitude-squeezing
/// convention `arg(α) − θ/2 = 0`, so `r > 0` squeezes Sy and anti-squeezes Sz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeSpec {
    pub r: f64,
    pub theta: f64,
}

impl SqueezeSpec {
    pub fn new(r: f64) -> Self {
        SqueezeSpec { r, theta: 0.0 }
    }

    /// Same magnitude with θ = 2·arg(α).
    pub fn aligned_to(self, alpha: C64) -> Self {
        if alpha.norm() == 0.0 {
            self
        } else {
            SqueezeSpec {
                r: self.r,
                theta: 2.0 * alpha.arg(),
            }
        }
    }

    /// σ = e^{−r}, the q-quadrature width in the canonical picture.
    pub fn sigma(&self) -> f64 {
        (-self.r).exp()
    }
}

fn validate_tail_tol(tail_tol: f64) -> Result<(), MeterError> {
    if tail_tol > 0.0 && tail_tol <= tolerances::MAX_TAIL_TOL {
        Ok(())
    } else {
        Err(MeterError::InvalidParameter(format!(
            "tail tolerance {tail_tol} outside (0, {}]",
            tolerances::MAX_TAIL_TOL
        )))
    }
}

fn check_deficit(ket: Ket, tail_tol: f64, n_max: usize) -> Result<Ket, MeterError> {
    let deficit = ket.norm_deficit();
    if deficit > tail_tol {
        Err(MeterError::NormDeficit {
            deficit,
            tail_tol,
            n_max,
        })
    } else {
        Ok(ket)
    }
}

fn coherent_amplitudes(alpha: C64, n_max: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut current = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(current);
    for n in 1..=n_max {
        current = current * alpha / (n as f64).sqrt();
        amps.push(current);
    }
    amps
}

fn product_ket(basis: &MeterBasis, mode_h: &[C64], mode_v: &[C64]) -> Ket {
    let amps = basis
        .states()
        .iter()
        .map(|&(h, v)| mode_h[h] * mode_v[v])
        .collect();
    Ket::new(basis.tag(), amps).expect("amplitudes match basis")
}

/// |α⟩_H|0⟩_V truncated to `basis`, not renormalized.
pub fn coherent_state(alpha: C64, basis: &MeterBasis, tail_tol: f64) -> Result<Ket, MeterError> {
    validate_tail_tol(tail_tol)?;
    let mode_h = coherent_amplitudes(alpha, basis.n_max());
    let mut mode_v = vec![C64::new(0.0, 0.0); basis.n_max() + 1];
    mode_v[0] = C64::new(1.0, 0.0);
    check_deficit(product_ket(basis, &mode_h, &mode_v), tail_tol, basis.n_max())
}

/// Single-mode annihilation operator on `Fock { n_max }`.
pub fn annihilation(n_max: usize) -> Operator {
    let mut a = Operator::zeros(BasisTag::Fock { n_max });
    for n in 1..=n_max {
        a.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    a
}

/// Padded single-mode cutoff used while exponentiating generators that do
/// not conserve photon number.
pub fn working_cutoff(n_max: usize) -> usize {
    let pad = ((0.4 * n_max as f64).ceil() as usize).max(10);
    n_max + pad
}

/// `exp(G)|0⟩` for an anti-Hermitian generator `G`, applied to `ket`.
fn exp_anti_hermitian(generator: &Operator, ket: &Ket) -> Result<Ket, MeterError> {
    // G = −iK with K = iG Hermitian
    let k = generator.scale(C64::new(0.0, 1.0));
    Ok(Spectral::new(&k)?.evolution(1.0).apply(ket)?)
}

/// Single-mode squeeze generator ½z*a² − ½z(a†)².
fn squeeze_generator(a: &Operator, z: C64) -> Operator {
    let a2 = a * a;
    let ad2 = a2.adjoint();
    &a2.scale(z.conj() * 0.5) - &ad2.scale(z * 0.5)
}

/// Mode states (H, V) of D(α)S(z)|0⟩|0⟩ in a `Fock { work }` space.
fn squeezed_mode_states(
    alpha: C64,
    z: SqueezeSpec,
    work: usize,
) -> Result<(Vec<C64>, Vec<C64>), MeterError> {
    let tag = BasisTag::Fock { n_max: work };
    let vacuum = Ket::basis_state(tag, 0);
    let a = annihilation(work);
    let zc = C64::from_polar(z.r, z.theta);
    let squeezed = if z.r == 0.0 {
        vacuum
    } else {
        exp_anti_hermitian(&squeeze_generator(&a, zc), &vacuum)?
    };
    let displaced = if alpha.norm() == 0.0 {
        squeezed.clone()
    } else {
        let gen = &a.adjoint().scale(alpha) - &a.scale(alpha.conj());
        exp_anti_hermitian(&gen, &squeezed)?
    };
    Ok((displaced.amplitudes().to_vec(), squeezed.amplitudes().to_vec()))
}

/// D(α)S(z)|0⟩_H|0⟩_V with S(z) = S_H(z)S_V(z), projected onto `basis` and
/// not renormalized. θ is realigned to 2·arg(α).
pub fn squeezed_coherent_state(
    alpha: C64,
    z: SqueezeSpec,
    basis: &MeterBasis,
    tail_tol: f64,
) -> Result<Ket, MeterError> {
    validate_tail_tol(tail_tol)?;
    if !z.r.is_finite() {
        return Err(MeterError::InvalidParameter(format!("squeezing r = {}", z.r)));
    }
    let z = z.aligned_to(alpha);
    let work = working_cutoff(basis.n_max());
    let (mode_h, mode_v) = squeezed_mode_states(alpha, z, work)?;
    check_deficit(product_ket(basis, &mode_h, &mode_v), tail_tol, basis.n_max())
}

/// Prepares the meter state for `(alpha, r)`: coherent when `r == 0`.
pub fn meter_state(alpha: C64, r: f64, basis: &MeterBasis, tail_tol: f64) -> Result<Ket, MeterError> {
    if r == 0.0 {
        coherent_state(alpha, basis, tail_tol)
    } else {
        squeezed_coherent_state(alpha, SqueezeSpec::new(r), basis, tail_tol)
    }
}

/// Smallest total-photon cutoff whose prepared state loses at most
/// `tail_tol` probability, searched from `⌈|α|² + 8√(|α|²+1)⌉`.
pub fn choose_cutoff(alpha2: f64, r: f64, tail_tol: f64) -> Result<usize, MeterError> {
    choose_cutoff_with_ceiling(alpha2, r, tail_tol, tolerances::CUTOFF_CEILING)
}

pub fn choose_cutoff_with_ceiling(
    alpha2: f64,
    r: f64,
    tail_tol: f64,
    ceiling: usize,
) -> Result<usize, MeterError> {
    if !(alpha2 >= 0.0 && alpha2.is_finite()) {
        return Err(MeterError::InvalidParameter(format!("|α|² = {alpha2}")));
    }
    if !r.is_finite() {
        return Err(MeterError::InvalidParameter(format!("squeezing r = {r}")));
    }
    validate_tail_tol(tail_tol)?;
    let alpha = C64::new(alpha2.sqrt(), 0.0);
    let adequate = |n: usize| -> Result<bool, MeterError> {
        match meter_state(alpha, r, &MeterBasis::new(n), tail_tol) {
            Ok(_) => Ok(true),
            Err(MeterError::NormDeficit { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let guess = (alpha2 + 8.0 * (alpha2 + 1.0).sqrt()).ceil() as usize;
    let mut n = guess.min(ceiling);
    if adequate(n)? {
        while n > 0 && adequate(n - 1)? {
            n -= 1;
        }
        Ok(n)
    } else {
        loop {
            n += 1;
            if n > ceiling {
                return Err(MeterError::CutoffCeiling { ceiling });
            }
            if adequate(n)? {
                return Ok(n);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moment {
    pub mean: f64,
    pub variance: f64,
}

/// Means and variances of the four Stokes operators in one meter state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesMoments {
    pub s0: Moment,
    pub sx: Moment,
    pub sy: Moment,
    pub sz: Moment,
    pub norm_deficit: f64,
}

pub fn stokes_moments(state: &Ket, stokes: &StokesSet) -> Result<StokesMoments, MeterError> {
    let moment = |op: &Operator| -> Result<Moment, MeterError> {
        let mean = expectation_real(op, state)?;
        // ⟨S²⟩ = ‖Sψ‖² for Hermitian S
        let second = op.apply(state)?.norm_sqr();
        Ok(Moment {
            mean,
            variance: second - mean * mean,
        })
    };
    Ok(StokesMoments {
        s0: moment(&stokes.s0)?,
        sx: moment(&stokes.sx)?,
        sy: moment(&stokes.sy)?,
        sz: moment(&stokes.sz)?,
        norm_deficit: state.norm_deficit(),
    })
}

/// Closed-form moments of D(α)S(z)|0⟩|0⟩ with real α and θ = 0.
///
/// The two modes stay uncorrelated, so Var(S₀) = Var(Sx) = Var(n_H) + Var(n_V)
/// = |α|²e^{−2r} + sinh²2r, and Sy carries the same variance while Sz gets
/// |α|²e^{2r}.
pub fn predicted_moments(alpha2: f64, r: f64) -> StokesMoments {
    let sh = r.sinh();
    let common = alpha2 * (-2.0 * r).exp() + (2.0 * r).sinh().powi(2);
    StokesMoments {
        s0: Moment {
            mean: alpha2 + 2.0 * sh * sh,
            variance: common,
        },
        sx: Moment {
            mean: alpha2,
            variance: common,
        },
        sy: Moment {
            mean: 0.0,
            variance: common,
        },
        sz: Moment {
            mean: 0.0,
            variance: alpha2 * (2.0 * r).exp(),
        },
        norm_deficit: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expectation;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn basis_order_and_size() {
        let b = MeterBasis::new(3);
        assert_eq!(b.len(), 10);
        assert_eq!(&b.states()[..4], &[(0, 0), (0, 1), (1, 0), (0, 2)]);
        for (i, &(h, v)) in b.states().iter().enumerate() {
            assert_eq!(b.index(h, v), Some(i));
        }
        assert_eq!(b.index(2, 2), None);
    }

    #[test]
    fn sx_on_single_photons() {
        let b = MeterBasis::new(2);
        let s = build_stokes(&b);
        let h = Ket::basis_state(b.tag(), b.index(1, 0).unwrap());
        let v = Ket::basis_state(b.tag(), b.index(0, 1).unwrap());
        assert_eq!(expectation(&s.sx, &h).unwrap().re, 1.0);
        assert_eq!(expectation(&s.sx, &v).unwrap().re, -1.0);
    }

    #[test]
    fn stokes_are_hermitian_and_commute_with_s0() {
        let s = build_stokes(&MeterBasis::new(6));
        for op in s.as_array() {
            assert!(op.is_hermitian());
            assert_eq!(op.commutator(&s.s0).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn sx_sy_commutator_is_exact() {
        for n in [1, 4, 9, 20] {
            let s = build_stokes(&MeterBasis::new(n));
            let c = s.sx.commutator(&s.sy).unwrap();
            let target = s.sz.scale(C64::new(0.0, 2.0));
            // entries are (k+2)√m − k√m; only the two products round
            let ulp = f64::EPSILON * s.sx.max_abs() * s.sy.max_abs();
            assert!(c.max_abs_diff(&target).unwrap() <= 2.0 * ulp);
        }
    }

    #[test]
    fn cyclic_commutators_close() {
        let s = build_stokes(&MeterBasis::new(12));
        let two_i = C64::new(0.0, 2.0);
        let yz = s.sy.commutator(&s.sz).unwrap();
        let zx = s.sz.commutator(&s.sx).unwrap();
        // products of square roots round, so these are exact only to ulps
        assert!(yz.max_abs_diff(&s.sx.scale(two_i)).unwrap() < 1e-12);
        assert!(zx.max_abs_diff(&s.sy.scale(two_i)).unwrap() < 1e-12);
    }

    #[test]
    fn sz_spectrum_is_integer() {
        let n_max = 10;
        let s = build_stokes(&MeterBasis::new(n_max));
        let values = Spectral::new(&s.sz).unwrap().eigenvalues();
        let mut expected: Vec<f64> = (0..=n_max)
            .flat_map(|total| (0..=total).map(move |k| 2.0 * k as f64 - total as f64))
            .collect();
        expected.sort_by(f64::total_cmp);
        for (v, e) in values.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-10, "{v} vs {e}");
        }
    }

    #[test]
    fn vacuum_cutoff_is_zero() {
        assert_eq!(choose_cutoff(0.0, 0.0, 1e-12).unwrap(), 0);
        let vac = coherent_state(C64::new(0.0, 0.0), &MeterBasis::new(0), 1e-12).unwrap();
        assert_eq!(vac.amplitudes(), &[C64::new(1.0, 0.0)]);
    }

    /// Poisson upper tail P(n > k) for mean `m`, summed in log space.
    fn poisson_tail(m: f64, k: usize) -> f64 {
        let mut log_term = -m;
        let mut head = 0.0;
        for n in 0..=k {
            if n > 0 {
                log_term += m.ln() - (n as f64).ln();
            }
            head += log_term.exp();
        }
        1.0 - head
    }

    #[test]
    fn coherent_cutoff_matches_poisson_tail() {
        // oracle: smallest k with P(n > k) ≤ 1e−12
        let oracle = (0..200).find(|&k| poisson_tail(6.0, k) <= 1e-12).unwrap();
        assert_eq!(oracle, 30);
        assert_eq!(choose_cutoff(6.0, 0.0, 1e-12).unwrap(), oracle);
    }

    #[test]
    fn squeezed_cutoff_is_minimal() {
        let alpha = C64::new(3.0, 0.0);
        let plain = choose_cutoff(9.0, 0.0, 1e-12).unwrap();
        for r in [0.3, -0.3] {
            let n = choose_cutoff(9.0, r, 1e-12).unwrap();
            assert!(meter_state(alpha, r, &MeterBasis::new(n), 1e-12).is_ok());
            assert!(matches!(
                meter_state(alpha, r, &MeterBasis::new(n - 1), 1e-12),
                Err(MeterError::NormDeficit { .. })
            ));
        }
        // amplitude squeezing narrows the photon-number distribution, phase
        // squeezing widens it
        assert!(choose_cutoff(9.0, 0.3, 1e-12).unwrap() < plain);
        assert!(choose_cutoff(9.0, -0.3, 1e-12).unwrap() > plain);
    }

    #[test]
    fn ceiling_is_enforced() {
        assert_eq!(
            choose_cutoff_with_ceiling(100.0, 0.0, 1e-12, 50),
            Err(MeterError::CutoffCeiling { ceiling: 50 })
        );
    }

    #[test]
    fn coherent_moments() {
        let alpha2: f64 = 6.0;
        let n = choose_cutoff(alpha2, 0.0, 1e-12).unwrap();
        let basis = MeterBasis::new(n);
        let s = build_stokes(&basis);
        let xi = coherent_state(C64::new(alpha2.sqrt(), 0.0), &basis, 1e-12).unwrap();
        let m = stokes_moments(&xi, &s).unwrap();
        assert!(m.sy.mean.abs() < 1e-12 && m.sz.mean.abs() < 1e-12);
        assert!(rel(m.sx.mean, 6.0) < 1e-9);
        assert!(rel(m.s0.variance, 6.0) < 1e-9);
        assert!(rel(m.sy.variance, 6.0) < 1e-9);
        assert!(rel(m.sz.variance, 6.0) < 1e-9);
        let sx2 = m.sx.variance + m.sx.mean * m.sx.mean;
        assert!(rel(sx2, 42.0) < 1e-9);
    }

    #[test]
    fn truncated_coherent_state_fails_check() {
        let err = coherent_state(C64::new(6f64.sqrt(), 0.0), &MeterBasis::new(4), 1e-12);
        assert!(matches!(err, Err(MeterError::NormDeficit { .. })));
    }

    #[test]
    fn zero_squeezing_is_coherent() {
        let basis = MeterBasis::new(30);
        let alpha = C64::new(6f64.sqrt(), 0.0);
        let a = coherent_state(alpha, &basis, 1e-12).unwrap();
        let b = squeezed_coherent_state(alpha, SqueezeSpec::new(0.0), &basis, 1e-12).unwrap();
        let worst = a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn squeezed_vacuum_photon_number() {
        let r: f64 = 0.3;
        let n = choose_cutoff(9.0, r, 1e-12).unwrap();
        let basis = MeterBasis::new(n);
        let xi = squeezed_coherent_state(C64::new(3.0, 0.0), SqueezeSpec::new(r), &basis, 1e-12)
            .unwrap();
        let n_v = Operator::diagonal(basis.tag(), |i| C64::new(basis.states()[i].1 as f64, 0.0));
        let mean = expectation(&n_v, &xi).unwrap().re;
        assert!(rel(mean, r.sinh().powi(2)) < 1e-6, "{mean}");
        assert!((r.sinh().powi(2) - 0.0927326).abs() < 1e-6);
    }

    #[test]
    fn squeezed_moments_match_closed_forms() {
        let (alpha2, r) = (9.0f64, 0.3);
        let n = choose_cutoff(alpha2, r, 1e-12).unwrap();
        let basis = MeterBasis::new(n);
        let s = build_stokes(&basis);
        let xi = squeezed_coherent_state(C64::new(3.0, 0.0), SqueezeSpec::new(r), &basis, 1e-12)
            .unwrap();
        let m = stokes_moments(&xi, &s).unwrap();
        let p = predicted_moments(alpha2, r);
        assert!(rel(m.sx.mean, 9.0) < 1e-8);
        assert!(m.sy.mean.abs() < 1e-10 && m.sz.mean.abs() < 1e-10);
        assert!(rel(m.sz.variance, 16.399069) < 1e-6);
        assert!(rel(m.sz.variance, p.sz.variance) < 1e-9);
        assert!(rel(m.sy.variance, 5.344632) < 1e-6);
        assert!(rel(m.sy.variance, p.sy.variance) < 1e-9);
        assert!(rel(m.sx.variance, p.sx.variance) < 1e-9);
        assert!(rel(m.s0.variance, p.s0.variance) < 1e-9);
        assert!(rel(m.s0.mean, p.s0.mean) < 1e-9);
    }

    #[test]
    fn per_mode_variances_match() {
        // Var(n_H) = |α|²e^{−2r} + ½sinh²2r, Var(n_V) = ½sinh²2r
        let (alpha2, r) = (9.0f64, 0.3);
        let n = choose_cutoff(alpha2, r, 1e-12).unwrap();
        let basis = MeterBasis::new(n);
        let xi = squeezed_coherent_state(C64::new(3.0, 0.0), SqueezeSpec::new(r), &basis, 1e-12)
            .unwrap();
        let var = |f: &dyn Fn(usize, usize) -> f64| {
            let op = Operator::diagonal(basis.tag(), |i| {
                let (h, v) = basis.states()[i];
                C64::new(f(h, v), 0.0)
            });
            let mean = expectation(&op, &xi).unwrap().re;
            op.apply(&xi).unwrap().norm_sqr() - mean * mean
        };
        let half = 0.5 * (2.0 * r).sinh().powi(2);
        assert!(rel(var(&|h, _| h as f64), alpha2 * (-2.0 * r).exp() + half) < 1e-9);
        assert!(rel(var(&|_, v| v as f64), half) < 1e-9);
    }

    #[test]
    fn negative_squeezing_swaps_quadratures() {
        let alpha2 = 9.0f64;
        let n = choose_cutoff(alpha2, -0.3, 1e-12).unwrap();
        let basis = MeterBasis::new(n);
        let s = build_stokes(&basis);
        let amp = squeezed_coherent_state(C64::new(3.0, 0.0), SqueezeSpec::new(0.3), &basis, 1e-12)
            .unwrap();
        let phase =
            squeezed_coherent_state(C64::new(3.0, 0.0), SqueezeSpec::new(-0.3), &basis, 1e-12)
                .unwrap();
        let ma = stokes_moments(&amp, &s).unwrap();
        let mp = stokes_moments(&phase, &s).unwrap();
        assert!(ma.sy.variance < alpha2 && ma.sz.variance > alpha2);
        assert!(mp.sy.variance > alpha2 && mp.sz.variance < alpha2);
        assert!(rel(ma.sz.variance, alpha2 * 0.6f64.exp()) < 1e-9);
        assert!(rel(mp.sz.variance, alpha2 * (-0.6f64).exp()) < 1e-9);
        assert!(rel(mp.sy.variance, predicted_moments(alpha2, -0.3).sy.variance) < 1e-9);
    }

    #[test]
    fn circular_two_mode_squeezer_equals_product() {
        // S(z) = exp[z* a_L a_R − z a_L† a_R†], a_{L,R} = (a_H ± i a_V)/√2,
        // exponentiated directly on a padded two-mode basis
        let (n_max, padded) = (8, 40);
        let big = MeterBasis::new(padded);
        let tag = big.tag();
        let mut a_h = Operator::zeros(tag.clone());
        let mut a_v = Operator::zeros(tag.clone());
        for (i, &(h, v)) in big.states().iter().enumerate() {
            if h > 0 {
                a_h.set(big.index(h - 1, v).unwrap(), i, C64::new((h as f64).sqrt(), 0.0));
            }
            if v > 0 {
                a_v.set(big.index(h, v - 1).unwrap(), i, C64::new((v as f64).sqrt(), 0.0));
            }
        }
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let iv = a_v.scale(C64::new(0.0, 1.0));
        let a_l = (&a_h + &iv).scale_real(s2);
        let a_r = (&a_h - &iv).scale_real(s2);
        let z = C64::new(0.25, 0.0);
        let pair = &a_l * &a_r;
        let gen = &pair.scale(z.conj()) - &pair.adjoint().scale(z);
        let vacuum = Ket::basis_state(tag, 0);
        let direct = exp_anti_hermitian(&gen, &vacuum).unwrap();
        let small = MeterBasis::new(n_max);
        let product = squeezed_coherent_state(
            C64::new(0.0, 0.0),
            SqueezeSpec::new(0.25),
            &small,
            1e-6,
        )
        .unwrap();
        for (i, &(h, v)) in small.states().iter().enumerate() {
            let d = direct.amplitudes()[big.index(h, v).unwrap()];
            assert!((d - product.amplitudes()[i]).norm() < 1e-10, "{h},{v}");
        }
    }
}
