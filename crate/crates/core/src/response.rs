//! Directional displacement response.
//!
//! `F(α) = |⟨ψ|D(α)|ψ⟩|²`, scanned along rays `α = ε e^{iφ}` with `φ`
//! measured from the `+x` axis and `ε` the complex displacement amplitude
//! (a quadrature shift of `√2 ε`). The threshold radius is the first downward
//! crossing of the fidelity threshold, linearly interpolated; scans that never
//! cross report their last `ε` as a lower bound.
//!
//! Under this convention `1 − F(ε e^{iφ}) = 2 Var(x_{φ+π/2}) ε² + O(ε⁴)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::expm::{expm_action, BandedGenerator};
use crate::fmt17;
use crate::fock::{apply_displacement, truncate_guarded, FockVector, WORKING_MARGIN};

pub const DEFAULT_THRESHOLD: f64 = 0.90;
pub const DEFAULT_EPS_MAX: f64 = 2.0;
pub const DEFAULT_EPS_STEPS: usize = 201;
pub const DEFAULT_ANGLES: usize = 72;
pub const MIN_SCAN_STEPS: usize = 32;
pub const MIN_ANGLES: usize = 8;

const CONVENTION: &str =
    "F = |<psi|D(alpha)|psi>|^2, alpha = eps*exp(i*phi), phi from +x, first downward crossing, linear interpolation";

/// Small-displacement fit: `SLOPE_POINTS` amplitudes evenly spaced up to `SLOPE_EPS_MAX`.
pub const SLOPE_EPS_MAX: f64 = 0.02;
pub const SLOPE_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub eps_max: f64,
    pub steps: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            eps_max: DEFAULT_EPS_MAX,
            steps: DEFAULT_EPS_STEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityScan {
    pub phi: f64,
    pub epsilons: Vec<f64>,
    pub fidelities: Vec<f64>,
}

impl FidelityScan {
    pub fn json_envelope(&self) -> serde_json::Value {
        json!({
            "convention": CONVENTION,
            "phi": self.phi,
            "epsilon": self.epsilons,
            "fidelity": self.fidelities,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusResult {
    pub radius: f64,
    pub is_lower_bound: bool,
    pub threshold: f64,
}

pub fn displacement_fidelity(state: &FockVector, alpha: C64) -> Result<f64> {
    let shifted = apply_displacement(state, alpha)?;
    Ok(state.inner(&shifted)?.norm_sqr())
}

/// `F(ε e^{iφ})` on `steps` evenly spaced amplitudes in `[0, eps_max]`.
///
/// Successive points are reached by repeated application of the single-step
/// displacement.
pub fn fidelity_scan(state: &FockVector, phi: f64, eps_max: f64, steps: usize) -> Result<FidelityScan> {
    if steps < MIN_SCAN_STEPS {
        return Err(Error::invalid(format!("scan needs at least {MIN_SCAN_STEPS} steps")));
    }
    if !(eps_max.is_finite() && eps_max > 0.0) || !phi.is_finite() {
        return Err(Error::invalid("scan range must be finite and positive"));
    }
    let cutoff = state.cutoff();
    let dim = cutoff + 1 + WORKING_MARGIN;
    let d_eps = eps_max / (steps - 1) as f64;
    let gen = BandedGenerator::displacement(dim, C64::from_polar(d_eps, phi));

    let reference = state.embedded(dim);
    let mut current = reference.clone();
    let mut epsilons = Vec::with_capacity(steps);
    let mut fidelities = Vec::with_capacity(steps);
    epsilons.push(0.0);
    fidelities.push(state.norm_sqr().powi(2));
    for i in 1..steps {
        current = expm_action(&gen, &current);
        // guard only; the fidelity uses the working vector directly
        truncate_guarded(current.clone(), cutoff)?;
        let overlap: C64 = reference.iter().zip(&current).map(|(a, b)| a.conj() * b).sum();
        epsilons.push(i as f64 * d_eps);
        fidelities.push(overlap.norm_sqr());
    }
    Ok(FidelityScan {
        phi,
        epsilons,
        fidelities,
    })
}

/// First downward crossing of `threshold`, interpolated linearly between the
/// bracketing samples. Later revivals are ignored.
pub fn threshold_radius(scan: &FidelityScan, threshold: f64) -> Result<RadiusResult> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} not in (0, 1)")));
    }
    let (eps, fid) = (&scan.epsilons, &scan.fidelities);
    if eps.len() != fid.len() || eps.len() < 2 {
        return Err(Error::invalid("malformed fidelity scan"));
    }
    for i in 1..eps.len() {
        if fid[i] < threshold {
            let (f0, f1) = (fid[i - 1], fid[i]);
            let frac = if f0 > f1 { (f0 - threshold) / (f0 - f1) } else { 0.0 };
            return Ok(RadiusResult {
                radius: eps[i - 1] + frac.clamp(0.0, 1.0) * (eps[i] - eps[i - 1]),
                is_lower_bound: false,
                threshold,
            });
        }
    }
    Ok(RadiusResult {
        radius: *eps.last().unwrap(),
        is_lower_bound: true,
        threshold,
    })
}

pub fn radius_along(state: &FockVector, phi: f64, threshold: f64, scan: &ScanSettings) -> Result<RadiusResult> {
    let s = fidelity_scan(state, phi, scan.eps_max, scan.steps)?;
    threshold_radius(&s, threshold)
}

/// `(R_x, R_p) = (R_F(0), R_F(π/2))`
pub fn axis_radii(state: &FockVector, threshold: f64, scan: &ScanSettings) -> Result<(RadiusResult, RadiusResult)> {
    Ok((
        radius_along(state, 0.0, threshold, scan)?,
        radius_along(state, PI / 2.0, threshold, scan)?,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarContour {
    pub angles: Vec<f64>,
    pub radii: Vec<RadiusResult>,
}

impl PolarContour {
    /// `R_max / R_min`, undefined when any direction is only a lower bound.
    pub fn anisotropy(&self) -> Option<f64> {
        if self.radii.iter().any(|r| r.is_lower_bound) {
            return None;
        }
        let (lo, hi) = self.radius_range();
        (lo > 0.0).then(|| hi / lo)
    }

    pub fn radius_range(&self) -> (f64, f64) {
        self.radii.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            (lo.min(r.radius), hi.max(r.radius))
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            angles: self.angles.clone(),
            radii: self
                .radii
                .iter()
                .map(|r| RadiusResult {
                    radius: r.radius * factor,
                    ..*r
                })
                .collect(),
        }
    }

    pub fn bin_width(&self) -> f64 {
        TAU / self.angles.len() as f64
    }

    pub fn json_envelope(&self) -> serde_json::Value {
        json!({
            "convention": CONVENTION,
            "anisotropy": self.anisotropy(),
            "phi": self.angles,
            "radius": self.radii.iter().map(|r| r.radius).collect::<Vec<_>>(),
            "is_lower_bound": self.radii.iter().map(|r| r.is_lower_bound).collect::<Vec<_>>(),
            "threshold": self.radii.first().map(|r| r.threshold),
        })
    }

    /// CSV `phi,radius,is_lower_bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["phi", "radius", "is_lower_bound"])?;
        for (phi, r) in self.angles.iter().zip(&self.radii) {
            wtr.write_record([fmt17(*phi), fmt17(r.radius), r.is_lower_bound.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `R_F(φ)` on `n_angles` uniform directions `2πk/n_angles`.
pub fn polar_contour(state: &FockVector, n_angles: usize, threshold: f64, scan: &ScanSettings) -> Result<PolarContour> {
    if n_angles < MIN_ANGLES {
        return Err(Error::invalid(format!("need at least {MIN_ANGLES} angles")));
    }
    let angles: Vec<f64> = (0..n_angles).map(|k| TAU * k as f64 / n_angles as f64).collect();
    let radii = angles
        .par_iter()
        .map(|&phi| radius_along(state, phi, threshold, scan))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolarContour { angles, radii })
}

/// `Γ(φ)`: least-squares slope through the origin of `1 − F` against `ε²`.
pub fn small_displacement_slope(state: &FockVector, phi: f64) -> Result<f64> {
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 1..=SLOPE_POINTS {
        let eps = SLOPE_EPS_MAX * i as f64 / SLOPE_POINTS as f64;
        let f = displacement_fidelity(state, C64::from_polar(eps, phi))?;
        let x = eps * eps;
        sxy += x * (1.0 - f);
        sxx += x * x;
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectorPredicate {
    /// `R_test > R_ref`
    Advantage,
    /// `R_test >= eta * R_ref`
    Tolerance { eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorResult {
    /// Angular measure in radians, in `[0, 2π]`.
    pub measure: f64,
    /// One angular bin.
    pub uncertainty: f64,
    pub predicate: SectorPredicate,
}

fn sector(test: &PolarContour, reference: &PolarContour, predicate: SectorPredicate) -> Result<SectorResult> {
    if test.angles != reference.angles {
        return Err(Error::AngleMismatch);
    }
    let hits = test
        .radii
        .iter()
        .zip(&reference.radii)
        .filter(|(t, r)| match predicate {
            SectorPredicate::Advantage => t.radius > r.radius,
            SectorPredicate::Tolerance { eta } => t.radius >= eta * r.radius,
        })
        .count();
    let bin = test.bin_width();
    Ok(SectorResult {
        measure: hits as f64 * bin,
        uncertainty: bin,
        predicate,
    })
}

pub fn advantage_sector(test: &PolarContour, reference: &PolarContour) -> Result<SectorResult> {
    sector(test, reference, SectorPredicate::Advantage)
}

pub fn tolerance_sector(test: &PolarContour, reference: &PolarContour, eta: f64) -> Result<SectorResult> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta {eta} not in (0, 1]")));
    }
    sector(test, reference, SectorPredicate::Tolerance { eta })
}

/// CSV `phi,epsilon,fidelity` for a set of scans.
pub fn write_scans_csv<W: Write>(scans: &[FidelityScan], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["phi", "epsilon", "fidelity"])?;
    for scan in scans {
        for (e, f) in scan.epsilons.iter().zip(&scan.fidelities) {
            wtr.write_record([fmt17(scan.phi), fmt17(*e), fmt17(*f)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
