//! Pure single-mode states in a truncated number basis.
//!
//! Conventions: `[a, a†] = 1`, `x = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so
//! `[x, p] = i`. A complex displacement amplitude `alpha` relates to quadrature
//! means by `alpha = (x0 + i p0)/√2`.
//!
//! Every state handed out by a constructor is normalized, has its lowest
//! populated amplitude real and positive, and passes the truncation guard:
//! the weight on the two highest retained indices stays below
//! [`TAIL_TOLERANCE`]. Squeezing and displacement are evaluated in a basis
//! [`WORKING_MARGIN`] levels larger than the nominal cutoff and truncated back.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::{expm_action, BandedGenerator};
use crate::matching::max_squeeze_r;

pub const TAIL_TOLERANCE: f64 = 1e-8;
pub const WORKING_MARGIN: usize = 16;
/// Odd cats are undefined at `alpha = 0`; smaller amplitudes are rejected.
pub const MIN_ODD_CAT_ALPHA: f64 = 1e-6;
/// Pre-normalization norm below which photon subtraction is treated as annihilating the state.
pub const MIN_RESIDUAL_NORM: f64 = 1e-12;

const PHASE_REFERENCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Vec<C64>,
}

impl FockVector {
    /// Normalizes the given amplitudes. Index `n` holds the amplitude of `|n⟩`.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::invalid("a Fock vector needs cutoff >= 1"));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("non-finite amplitude"));
        }
        let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < MIN_RESIDUAL_NORM {
            return Err(Error::ZeroVector("amplitudes have zero norm"));
        }
        Ok(Self {
            amps: amps.into_iter().map(|c| c / norm).collect(),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Weight on the two highest retained number states.
    pub fn tail_mass(&self) -> f64 {
        let c = self.cutoff();
        self.amps[c].norm_sqr() + self.amps[c - 1].norm_sqr()
    }

    pub fn check_tail(self) -> Result<Self> {
        let tail = self.tail_mass();
        if tail < TAIL_TOLERANCE {
            Ok(self)
        } else {
            Err(Error::TailGuard {
                cutoff: self.cutoff(),
                tail_mass: tail,
                tolerance: TAIL_TOLERANCE,
            })
        }
    }

    /// Removes the global phase so the lowest populated amplitude is real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        let max = self.amps.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if let Some(lead) = self
            .amps
            .iter()
            .find(|c| c.norm() > PHASE_REFERENCE_FLOOR * max)
            .copied()
        {
            let phase = lead.conj() / lead.norm();
            self.amps.iter_mut().for_each(|c| *c *= phase);
        }
        self
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        if self.cutoff() != other.cutoff() {
            return Err(Error::CutoffMismatch {
                left: self.cutoff(),
                right: other.cutoff(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Amplitudes zero-padded to `dim` entries.
    pub fn embedded(&self, dim: usize) -> Vec<C64> {
        let mut v = self.amps.clone();
        v.resize(dim.max(v.len()), C64::new(0.0, 0.0));
        v
    }

    /// Index of the highest amplitude with non-negligible weight.
    pub fn support_end(&self) -> usize {
        self.amps.iter().rposition(|c| c.norm_sqr() > 1e-34).unwrap_or(0)
    }
}

/// Truncates a working-basis vector back to `cutoff`, failing if more than
/// the tolerated weight sits at or above index `cutoff - 1`.
pub(crate) fn truncate_guarded(work: Vec<C64>, cutoff: usize) -> Result<FockVector> {
    let total: f64 = work.iter().map(|c| c.norm_sqr()).sum();
    let tail: f64 = work[cutoff - 1..].iter().map(|c| c.norm_sqr()).sum::<f64>() / total;
    if tail >= TAIL_TOLERANCE {
        return Err(Error::TailGuard {
            cutoff,
            tail_mass: tail,
            tolerance: TAIL_TOLERANCE,
        });
    }
    let mut kept = work;
    kept.truncate(cutoff + 1);
    FockVector::from_amplitudes(kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    r: f64,
    theta: f64,
}

impl SqueezeParams {
    /// `theta` is wrapped into `[0, 2π)`. `r` must lie in `[0, r_max]`, the
    /// 12.5 dB squeezing cap.
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !r.is_finite() || !theta.is_finite() {
            return Err(Error::invalid("squeeze parameters must be finite"));
        }
        if r < 0.0 {
            return Err(Error::invalid(format!("squeeze magnitude {r} is negative")));
        }
        if r > max_squeeze_r() * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "squeeze magnitude {r} exceeds the 12.5 dB cap ({})",
                max_squeeze_r()
            )));
        }
        Ok(Self {
            r,
            theta: theta.rem_euclid(2.0 * PI),
        })
    }

    pub fn real(r: f64) -> Result<Self> {
        Self::new(r, 0.0)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Parameters of `S(r, theta)†`.
    pub fn inverse(&self) -> Self {
        Self {
            r: self.r,
            theta: (self.theta + PI).rem_euclid(2.0 * PI),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatParity {
    Even,
    Odd,
}

pub fn make_fock(n: usize, cutoff: usize) -> Result<FockVector> {
    if cutoff < 2 || n + 2 > cutoff {
        return Err(Error::TailGuard {
            cutoff,
            tail_mass: 1.0,
            tolerance: TAIL_TOLERANCE,
        });
    }
    let mut amps = vec![C64::new(0.0, 0.0); cutoff + 1];
    amps[n] = C64::new(1.0, 0.0);
    FockVector::from_amplitudes(amps)
}

/// Unnormalized coherent amplitudes `e^{-|α|²/2} α^n / √n!` for `n = 0..len`.
fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(len);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        amps.push(c);
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    amps
}

pub fn make_coherent(alpha: C64, cutoff: usize) -> Result<FockVector> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::invalid("coherent amplitude must be finite"));
    }
    let amps = coherent_amplitudes(alpha, cutoff + 1 + WORKING_MARGIN);
    Ok(truncate_guarded(amps, cutoff)?.with_canonical_phase())
}

/// `N_±(|α⟩ ± |−α⟩)`; even parity keeps even indices, odd parity odd ones.
pub fn make_cat(alpha: C64, parity: CatParity, cutoff: usize) -> Result<FockVector> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::invalid("cat amplitude must be finite"));
    }
    if parity == CatParity::Odd && alpha.norm() <= MIN_ODD_CAT_ALPHA {
        return Err(Error::ZeroVector("odd cat with vanishing amplitude"));
    }
    let keep = match parity {
        CatParity::Even => 0,
        CatParity::Odd => 1,
    };
    let amps: Vec<C64> = coherent_amplitudes(alpha, cutoff + 1 + WORKING_MARGIN)
        .into_iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == keep { c } else { C64::new(0.0, 0.0) })
        .collect();
    Ok(truncate_guarded(amps, cutoff)?.with_canonical_phase())
}

/// Applies `S(r, theta) = exp[(ξ* a² − ξ a†²)/2]`, `ξ = r e^{iθ}`.
pub fn apply_squeeze(state: &FockVector, params: SqueezeParams) -> Result<FockVector> {
    let dim = state.cutoff() + 1 + WORKING_MARGIN;
    let gen = BandedGenerator::squeeze(dim, params.r, params.theta);
    let work = expm_action(&gen, &state.embedded(dim));
    truncate_guarded(work, state.cutoff())
}

/// Applies `D(alpha) = exp(alpha a† − alpha* a)`.
pub fn apply_displacement(state: &FockVector, alpha: C64) -> Result<FockVector> {
    let dim = state.cutoff() + 1 + WORKING_MARGIN;
    let gen = BandedGenerator::displacement(dim, alpha);
    let work = expm_action(&gen, &state.embedded(dim));
    truncate_guarded(work, state.cutoff())
}

/// `S(r, theta)|n⟩`
pub fn make_squeezed_fock(r: f64, theta: f64, n: usize, cutoff: usize) -> Result<FockVector> {
    let params = SqueezeParams::new(r, theta)?;
    let base = make_fock(n, cutoff)?;
    Ok(apply_squeeze(&base, params)?.with_canonical_phase())
}

/// Applies the lowering operator and renormalizes. The second value is the
/// norm of `a|ψ⟩` before normalization.
pub fn annihilate(state: &FockVector) -> Result<(FockVector, f64)> {
    let amps = state.amplitudes();
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    for n in 0..amps.len() - 1 {
        out[n] = amps[n + 1] * ((n + 1) as f64).sqrt();
    }
    let residual = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if residual < MIN_RESIDUAL_NORM {
        return Err(Error::ZeroVector("photon subtraction annihilates the state"));
    }
    Ok((FockVector::from_amplitudes(out)?, residual))
}

/// Normalized `a^k|ψ⟩` for `k` in `{1, 2}`.
pub fn subtract_photons(state: &FockVector, k: usize) -> Result<FockVector> {
    if !(1..=2).contains(&k) {
        return Err(Error::invalid(format!("photon subtraction order {k} not in {{1, 2}}")));
    }
    let mut current = state.clone();
    for _ in 0..k {
        current = annihilate(&current)?.0;
    }
    Ok(current.with_canonical_phase())
}

/// `⟨a†a⟩`
pub fn mean_photon(state: &FockVector) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, c)| n as f64 * c.norm_sqr())
        .sum()
}

/// `⟨(−1)^{a†a}⟩`
pub fn parity_expectation(state: &FockVector) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
        .sum()
}

/// `⟨a^k⟩` for `k` in `{1, 2}`.
fn lowering_moment(state: &FockVector, k: usize) -> C64 {
    let amps = state.amplitudes();
    (0..amps.len().saturating_sub(k))
        .map(|n| {
            let weight: f64 = (1..=k).map(|j| ((n + j) as f64).sqrt()).product();
            amps[n].conj() * amps[n + k] * weight
        })
        .sum()
}

/// Variance of `x_φ = x cos φ + p sin φ = (a e^{−iφ} + a† e^{iφ})/√2`.
pub fn quadrature_variance(state: &FockVector, phi: f64) -> f64 {
    let rot = C64::from_polar(1.0, -phi);
    let a1 = lowering_moment(state, 1);
    let a2 = lowering_moment(state, 2);
    let n = mean_photon(state);
    let mean = 2f64.sqrt() * (rot * a1).re;
    let second = (rot * rot * a2).re + n + 0.5;
    (second - mean * mean).max(0.0)
}

/// `|⟨a|b⟩|²`
pub fn state_fidelity(a: &FockVector, b: &FockVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const R6: f64 = 0.690_775_527_898_213_7;

    #[test]
    fn fock_states_and_guard() {
        let vac = make_fock(0, 80).unwrap();
        assert_eq!(mean_photon(&vac), 0.0);
        assert_eq!(mean_photon(&make_fock(2, 80).unwrap()), 2.0);
        assert!(matches!(make_fock(79, 80), Err(Error::TailGuard { .. })));
        assert!(make_fock(78, 80).is_ok());
    }

    #[test]
    fn coherent_amplitudes_and_energy() {
        let vac = make_coherent(C64::new(0.0, 0.0), 80).unwrap();
        assert_eq!(vac, make_fock(0, 80).unwrap());
        let coh = make_coherent(C64::new(1.6, 0.0), 80).unwrap();
        assert_abs_diff_eq!(mean_photon(&coh), 2.56, epsilon = 1e-12);
        assert_abs_diff_eq!(coh.amplitude(0).re, (-1.28f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(coh.norm_sqr(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            make_coherent(C64::new(8.0, 0.0), 40),
            Err(Error::TailGuard { .. })
        ));
    }

    #[test]
    fn cat_parity_and_energy() {
        let even = make_cat(C64::new(1.6, 0.0), CatParity::Even, 80).unwrap();
        let odd = make_cat(C64::new(1.6, 0.0), CatParity::Odd, 80).unwrap();
        let u: f64 = 2.56;
        assert_abs_diff_eq!(mean_photon(&even), u * u.tanh(), epsilon = 1e-10);
        assert_abs_diff_eq!(mean_photon(&odd), u / u.tanh(), epsilon = 1e-10);
        assert!(even
            .amplitudes()
            .iter()
            .skip(1)
            .step_by(2)
            .all(|c| *c == C64::new(0.0, 0.0)));
        assert!(odd.amplitudes().iter().step_by(2).all(|c| *c == C64::new(0.0, 0.0)));
        assert_abs_diff_eq!(parity_expectation(&odd), -1.0, epsilon = 1e-14);
        assert!(matches!(
            make_cat(C64::new(0.0, 0.0), CatParity::Odd, 80),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn canonical_phase_for_complex_cat() {
        let odd = make_cat(C64::new(0.3, 1.2), CatParity::Odd, 60).unwrap();
        assert!(odd.amplitude(1).im.abs() < 1e-15 && odd.amplitude(1).re > 0.0);
    }

    #[test]
    fn squeezed_vacuum_matches_closed_form() {
        let sv = make_squeezed_fock(R6, 0.0, 0, 80).unwrap();
        let t = R6.tanh();
        let mut c = 1.0 / R6.cosh().sqrt();
        for m in 0..30 {
            assert_abs_diff_eq!(sv.amplitude(2 * m).re, c, epsilon = 1e-12);
            assert_abs_diff_eq!(sv.amplitude(2 * m).im, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sv.amplitude(2 * m + 1).norm(), 0.0, epsilon = 1e-14);
            // c_{2m+2}/c_{2m} = -tanh r * sqrt((2m+1)(2m+2)) / (2(m+1))
            c *= -t * (((2 * m + 1) * (2 * m + 2)) as f64).sqrt() / (2.0 * (m + 1) as f64);
        }
        assert_abs_diff_eq!(mean_photon(&sv), R6.sinh().powi(2), epsilon = 1e-10);
    }

    #[test]
    fn squeeze_identity_and_squeezed_fock_energy() {
        let one = make_fock(1, 80).unwrap();
        assert_eq!(make_squeezed_fock(0.0, 0.0, 1, 80).unwrap(), one);
        let s1 = make_squeezed_fock(R6, 0.0, 1, 80).unwrap();
        assert_abs_diff_eq!(mean_photon(&s1), 1.0 + 3.0 * R6.sinh().powi(2), epsilon = 1e-8);
        assert_abs_diff_eq!(parity_expectation(&s1), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeeze_parameters_enforce_cap() {
        assert!(SqueezeParams::new(-0.1, 0.0).is_err());
        assert!(SqueezeParams::new(1.5, 0.0).is_err());
        let p = SqueezeParams::new(1.0, -0.5).unwrap();
        assert!(p.theta() >= 0.0 && p.theta() < 2.0 * PI);
        assert_abs_diff_eq!(p.inverse().theta(), (-0.5f64 + PI).rem_euclid(2.0 * PI));
    }

    #[test]
    fn squeeze_that_leaks_past_cutoff_is_rejected() {
        let err = make_squeezed_fock(1.4, 0.0, 0, 40).unwrap_err();
        assert!(matches!(err, Error::TailGuard { .. }));
    }

    #[test]
    fn annihilation_rules() {
        let (out, residual) = annihilate(&make_fock(1, 80).unwrap()).unwrap();
        assert_eq!(out, make_fock(0, 80).unwrap());
        assert_eq!(residual, 1.0);
        assert!(matches!(
            annihilate(&make_fock(0, 80).unwrap()),
            Err(Error::ZeroVector(_))
        ));
        for n in 0..60 {
            let (out, residual) = annihilate(&make_fock(n + 1, 80).unwrap()).unwrap();
            assert_eq!(out, make_fock(n, 80).unwrap());
            assert_abs_diff_eq!(residual * residual, (n + 1) as f64, epsilon = 1e-12);
        }
        assert!(subtract_photons(&make_fock(3, 20).unwrap(), 3).is_err());
    }

    #[test]
    fn single_subtraction_gives_squeezed_single_photon() {
        let sv = make_squeezed_fock(R6, 0.0, 0, 80).unwrap();
        let sub = subtract_photons(&sv, 1).unwrap();
        let s1 = make_squeezed_fock(R6, 0.0, 1, 80).unwrap();
        assert!(state_fidelity(&sub, &s1).unwrap() > 1.0 - 1e-10);
        for (a, b) in sub.amplitudes().iter().zip(s1.amplitudes()) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn double_subtraction_frame_state() {
        for theta in [0.0, 0.9] {
            let sv = make_squeezed_fock(R6, theta, 0, 80).unwrap();
            let two = subtract_photons(&sv, 2).unwrap();
            assert!(two.amplitudes().iter().skip(1).step_by(2).all(|c| c.norm() < 1e-12));
            let params = SqueezeParams::new(R6, theta).unwrap();
            let frame = apply_squeeze(&two, params.inverse()).unwrap();
            let (c0, c2) = (frame.amplitude(0), frame.amplitude(2));
            let expected = -2f64.sqrt() * C64::from_polar(R6.tanh(), theta);
            assert_abs_diff_eq!((c2 / c0 - expected).norm(), 0.0, epsilon = 1e-8);
            let rest: f64 = frame
                .amplitudes()
                .iter()
                .enumerate()
                .filter(|(n, _)| *n != 0 && *n != 2)
                .map(|(_, c)| c.norm_sqr())
                .sum();
            assert!(rest < 1e-14, "{rest:e}");
        }
    }

    #[test]
    fn variances_follow_bogoliubov_scaling() {
        let vac = make_fock(0, 80).unwrap();
        for phi in [0.0, 0.4, 1.3, PI / 2.0] {
            assert_abs_diff_eq!(quadrature_variance(&vac, phi), 0.5, epsilon = 1e-14);
        }
        let sv = make_squeezed_fock(R6, 0.0, 0, 80).unwrap();
        assert_abs_diff_eq!(quadrature_variance(&sv, 0.0), (-2.0 * R6).exp() / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            quadrature_variance(&sv, PI / 2.0),
            (2.0 * R6).exp() / 2.0,
            epsilon = 1e-10
        );
        let s1 = make_squeezed_fock(R6, 0.0, 1, 80).unwrap();
        assert_abs_diff_eq!(
            quadrature_variance(&s1, PI / 2.0),
            1.5 * (2.0 * R6).exp(),
            epsilon = 1e-9
        );
        // coherent shift does not change variance
        let coh = make_coherent(C64::new(1.0, -0.5), 80).unwrap();
        assert_abs_diff_eq!(quadrature_variance(&coh, 0.7), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn displacement_identities() {
        let vac = make_fock(0, 80).unwrap();
        let alpha = C64::new(0.8, -0.6);
        let displaced = apply_displacement(&vac, alpha).unwrap();
        let coh = make_coherent(alpha, 80).unwrap();
        assert!(state_fidelity(&displaced, &coh).unwrap() > 1.0 - 1e-12);
        let s1 = make_squeezed_fock(0.4, 0.3, 1, 80).unwrap();
        assert_eq!(apply_displacement(&s1, C64::new(0.0, 0.0)).unwrap(), s1);
        let one = make_fock(1, 80).unwrap();
        let shifted = apply_displacement(&one, C64::new(0.3, 0.0)).unwrap();
        let overlap = one.inner(&shifted).unwrap().norm_sqr();
        assert_abs_diff_eq!(overlap, (-0.09f64).exp() * 0.91 * 0.91, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_basics() {
        let a = make_fock(0, 20).unwrap();
        let b = make_fock(1, 20).unwrap();
        assert_eq!(state_fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(state_fidelity(&a, &b).unwrap(), 0.0);
        assert!(matches!(
            state_fidelity(&a, &make_fock(0, 30).unwrap()),
            Err(Error::CutoffMismatch { .. })
        ));
    }
}
