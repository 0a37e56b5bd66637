//! Phase-space engine: Wigner function sampling, normalization and integrated
//! negativity.
//!
//! The primary evaluation uses the displaced-parity form
//! `W(α) = (1/π) ⟨ψ|D(α) Π D(α)†|ψ⟩ = (1/π) ⟨ψ|D(2α) Π|ψ⟩`, with
//! `α = (x + ip)/√2`. Matrix elements of `D(2α)` between retained number
//! states are generated exactly from normalized associated-Laguerre
//! recurrences, so no intermediate basis truncation enters. The second route
//! (see [`wavefunction`]) integrates the position wavefunction and is kept as
//! an independent check.

use std::f64::consts::{FRAC_1_PI, PI};
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fmt17;
use crate::fock::{mean_photon, parity_expectation, FockVector};
use crate::spec::StateSpec;

/// Accepted range of the grid integral of `W` before the result is flagged
/// as limited by the phase-space window.
pub const NORMALIZATION_BAND: (f64, f64) = (0.995, 1.005);

pub const DEFAULT_HALF_WIDTH: f64 = 7.0;
pub const DEFAULT_POINTS: usize = 201;

/// Uniform rectangular grid, symmetric about the origin with odd sample counts
/// so that `(0, 0)` is a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_x: usize,
    pub n_p: usize,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self::square(DEFAULT_HALF_WIDTH, DEFAULT_POINTS).expect("default grid is valid")
    }
}

impl PhaseGrid {
    pub fn square(half_width: f64, points: usize) -> Result<Self> {
        let grid = Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            n_x: points,
            n_p: points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= 0.0 || self.p_max <= 0.0 {
            return Err(Error::invalid("grid window must be finite with positive extent"));
        }
        if self.x_min != -self.x_max || self.p_min != -self.p_max {
            return Err(Error::invalid("grid window must be symmetric about the origin"));
        }
        if self.n_x < 3 || self.n_p < 3 || self.n_x.is_multiple_of(2) || self.n_p.is_multiple_of(2) {
            return Err(Error::invalid("grid sample counts must be odd and at least 3"));
        }
        Ok(())
    }

    fn axis(half: f64, n: usize) -> Vec<f64> {
        let c = (n / 2) as f64;
        (0..n).map(|i| half * (i as f64 - c) / c).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_max, self.n_x)
    }

    pub fn ps(&self) -> Vec<f64> {
        Self::axis(self.p_max, self.n_p)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    /// Row and column of the origin sample.
    pub fn origin_index(&self) -> (usize, usize) {
        (self.n_x / 2, self.n_p / 2)
    }
}

/// Samples of `W(x, p)`; row `i` is `x_i`, column `j` is `p_j`.
#[derive(Clone, Debug)]
pub struct WignerField {
    pub grid: PhaseGrid,
    pub values: DMatrix<f64>,
}

impl WignerField {
    fn trapezoid(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (nx, np) = (self.grid.n_x, self.grid.n_p);
        let mut total = 0.0;
        for i in 0..nx {
            let wi = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for j in 0..np {
                let wj = if j == 0 || j == np - 1 { 0.5 } else { 1.0 };
                row += wj * f(self.values[(i, j)]);
            }
            total += wi * row;
        }
        total * self.grid.dx() * self.grid.dp()
    }

    pub fn value_at_origin(&self) -> f64 {
        self.values[self.grid.origin_index()]
    }

    pub fn window_limited(&self) -> bool {
        let n = normalization_integral(self);
        !(NORMALIZATION_BAND.0..=NORMALIZATION_BAND.1).contains(&n)
    }

    /// CSV `x,p,w`, rows ordered by `x` then `p`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["x", "p", "w"])?;
        let (xs, ps) = (self.grid.xs(), self.grid.ps());
        for (i, x) in xs.iter().enumerate() {
            for (j, p) in ps.iter().enumerate() {
                wtr.write_record([fmt17(*x), fmt17(*p), fmt17(self.values[(i, j)])])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Grid metadata plus the row-major sample list.
    pub fn json_envelope(&self) -> serde_json::Value {
        let values: Vec<f64> = (0..self.grid.n_x)
            .flat_map(|i| (0..self.grid.n_p).map(move |j| (i, j)))
            .map(|ij| self.values[ij])
            .collect();
        json!({
            "grid": self.grid,
            "convention": "[x,p]=i, x=(a+a^dagger)/sqrt(2), alpha=(x+ip)/sqrt(2), integral of W = 1",
            "order": "row-major: x outer, p inner",
            "normalization": normalization_integral(self),
            "window_limited": self.window_limited(),
            "w": values,
        })
    }
}

/// Per-state data reused across grid points.
struct ParityKernel {
    /// `diagonals[k][n] = (−1)^n c*_{n+k} c_n`; `None` when the diagonal vanishes.
    diagonals: Vec<Option<Vec<C64>>>,
    parity: f64,
}

impl ParityKernel {
    fn new(state: &FockVector) -> Self {
        let c = &state.amplitudes()[..=state.support_end()];
        let len = c.len();
        let scale: f64 = c.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
        let diagonals = (0..len)
            .map(|k| {
                let d: Vec<C64> = (0..len - k)
                    .map(|n| {
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        c[n + k].conj() * c[n] * sign
                    })
                    .collect();
                d.iter().any(|g| g.norm() > 1e-30 * scale).then_some(d)
            })
            .collect();
        Self {
            diagonals,
            parity: parity_expectation(state),
        }
    }

    /// `π W(x, p)`
    fn evaluate(&self, x: f64, p: f64) -> f64 {
        let beta = C64::new(x, p) * 2f64.sqrt();
        let t = beta.norm_sqr();
        if t == 0.0 {
            return self.parity;
        }
        let ln_b = 0.5 * t.ln();
        let arg = beta.arg();
        let mut total = 0.0;
        let mut ln_fact = 0.0; // ln k!
        for (k, diag) in self.diagonals.iter().enumerate() {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            let Some(g) = diag else { continue };
            let magnitude = (k as f64 * ln_b - 0.5 * t - 0.5 * ln_fact).exp();
            if magnitude == 0.0 {
                continue;
            }
            // h_n = sqrt(k! n!/(n+k)!) L_n^{(k)}(t)
            let kf = k as f64;
            let mut h_prev = 0.0;
            let mut h = 1.0;
            let mut acc = C64::new(0.0, 0.0);
            for (n, gn) in g.iter().enumerate() {
                acc += gn * h;
                let nf = n as f64;
                let h_next = ((2.0 * nf + 1.0 + kf - t) * h - (nf * (nf + kf)).sqrt() * h_prev)
                    / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
                h_prev = h;
                h = h_next;
            }
            let term = C64::from_polar(magnitude, kf * arg) * acc;
            total += if k == 0 { term.re } else { 2.0 * term.re };
        }
        total
    }
}

/// `W(x, p)` at a single phase-space point.
pub fn wigner_point(state: &FockVector, x: f64, p: f64) -> f64 {
    ParityKernel::new(state).evaluate(x, p) * FRAC_1_PI
}

pub fn wigner_field(state: &FockVector, grid: &PhaseGrid) -> Result<WignerField> {
    grid.validate()?;
    let state = state.clone().check_tail()?;
    let kernel = ParityKernel::new(&state);
    let (xs, ps) = (grid.xs(), grid.ps());
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ps.iter().map(|&p| kernel.evaluate(x, p) * FRAC_1_PI).collect())
        .collect();
    let values = DMatrix::from_fn(grid.n_x, grid.n_p, |i, j| rows[i][j]);
    Ok(WignerField { grid: *grid, values })
}

/// `W(0, 0) = ⟨Π⟩/π`, no grid involved.
pub fn wigner_at_origin(state: &FockVector) -> f64 {
    parity_expectation(state) / PI
}

/// Trapezoidal integral of `W` over the grid window.
pub fn normalization_integral(field: &WignerField) -> f64 {
    field.trapezoid(|w| w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Negativity {
    /// Integrated negativity `δ`, clamped at zero.
    pub delta: f64,
    /// Grid integral of `|W|`.
    pub abs_integral: f64,
    pub normalization: f64,
    pub window_limited: bool,
}

/// `δ = (∫|W| − 1)/2`, evaluated on the grid as `(∫|W| − ∫W)/2`, i.e. the
/// integral of the negative part. The two agree when the window holds the
/// whole state; the second form does not count positive weight that falls
/// outside the window as missing negativity.
pub fn integrated_negativity(field: &WignerField) -> Negativity {
    let normalization = normalization_integral(field);
    let abs_integral = field.trapezoid(f64::abs);
    Negativity {
        delta: (0.5 * (abs_integral - normalization)).max(0.0),
        abs_integral,
        normalization,
        window_limited: !(NORMALIZATION_BAND.0..=NORMALIZATION_BAND.1).contains(&normalization),
    }
}

/// Numerical setting for one side of a convergence probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetting {
    pub cutoff: usize,
    pub grid: PhaseGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub cutoff: usize,
    pub grid_points: usize,
    pub half_width: f64,
    pub delta: f64,
    pub mean_photon: f64,
    pub delta_per_n: Option<f64>,
    pub window_limited: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub base: ProbeOutcome,
    pub refined: ProbeOutcome,
    pub delta_change: f64,
    pub delta_per_n_change: f64,
}

fn probe_outcome(spec: &StateSpec, setting: &ProbeSetting) -> Result<ProbeOutcome> {
    let state = spec.with_cutoff(setting.cutoff).build()?;
    let field = wigner_field(&state, &setting.grid)?;
    let neg = integrated_negativity(&field);
    let n = mean_photon(&state);
    Ok(ProbeOutcome {
        cutoff: setting.cutoff,
        grid_points: setting.grid.n_x,
        half_width: setting.grid.x_max,
        delta: neg.delta,
        mean_photon: n,
        delta_per_n: (n > 0.0).then(|| neg.delta / n),
        window_limited: neg.window_limited,
    })
}

/// Recomputes `δ` and `δ/⟨n⟩` at a refined setting and reports the changes.
/// The refined setting must not be coarser in any respect and must differ in
/// at least one (cutoff, sample count, or window).
pub fn convergence_probe(spec: &StateSpec, base: &ProbeSetting, refined: &ProbeSetting) -> Result<ConvergenceReport> {
    let (b, r) = (&base.grid, &refined.grid);
    let not_coarser = refined.cutoff >= base.cutoff
        && r.x_max >= b.x_max
        && r.p_max >= b.p_max
        && r.dx() <= b.dx() * (1.0 + 1e-12)
        && r.dp() <= b.dp() * (1.0 + 1e-12);
    if !not_coarser || refined == base {
        return Err(Error::invalid(
            "refined probe setting must be at least as fine and large as the base, and differ from it",
        ));
    }
    let base_out = probe_outcome(spec, base)?;
    let refined_out = probe_outcome(spec, refined)?;
    let delta_per_n_change = match (base_out.delta_per_n, refined_out.delta_per_n) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => 0.0,
    };
    Ok(ConvergenceReport {
        base: base_out,
        refined: refined_out,
        delta_change: (base_out.delta - refined_out.delta).abs(),
        delta_per_n_change,
    })
}

/// Independent route through the position-space wavefunction.
pub mod wavefunction {
    use super::*;

    /// Normalized oscillator eigenfunctions `φ_0..=φ_{n_max}` at `x`, by upward
    /// recurrence.
    pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
        let mut phi = Vec::with_capacity(n_max + 1);
        phi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
        if n_max >= 1 {
            phi.push(2f64.sqrt() * x * phi[0]);
        }
        for n in 1..n_max {
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * x * phi[n] - (nf / (nf + 1.0)).sqrt() * phi[n - 1];
            phi.push(next);
        }
        phi
    }

    /// `ψ(x) = Σ_n c_n φ_n(x)`
    pub fn position_wavefunction(state: &FockVector, x: f64) -> C64 {
        let end = state.support_end();
        hermite_functions(x, end)
            .iter()
            .zip(state.amplitudes())
            .map(|(phi, c)| c * phi)
            .sum()
    }

    /// Quadrature step and half-range for the `y` integral.
    fn quadrature_nodes(state: &FockVector, grid: &PhaseGrid) -> (f64, usize) {
        let spread = (2.0 * state.support_end() as f64 + 1.0).sqrt();
        let omega = 2.0 * spread + 2.0 * grid.p_max;
        let step = PI / (omega + 8.0);
        let half_range = spread + grid.x_max + 8.0;
        (step, (half_range / step).ceil() as usize)
    }

    /// `W(x, p) = (1/π) ∫ ψ*(x+y) ψ(x−y) e^{2ipy} dy`, trapezoidal in `y`.
    pub fn wigner_field_wavefunction(state: &FockVector, grid: &PhaseGrid) -> Result<WignerField> {
        grid.validate()?;
        let (step, nodes) = quadrature_nodes(state, grid);
        let (xs, ps) = (grid.xs(), grid.ps());
        let rows: Vec<Vec<f64>> = xs
            .par_iter()
            .map(|&x| {
                // products ψ*(x+y_j) ψ(x−y_j) for j = 0..=nodes
                let products: Vec<C64> = (0..=nodes)
                    .map(|j| {
                        let y = j as f64 * step;
                        position_wavefunction(state, x + y).conj() * position_wavefunction(state, x - y)
                    })
                    .collect();
                ps.iter()
                    .map(|&p| {
                        let mut sum = products[0].re;
                        for (j, prod) in products.iter().enumerate().skip(1) {
                            let phase = C64::from_polar(1.0, 2.0 * p * j as f64 * step);
                            sum += 2.0 * (prod * phase).re;
                        }
                        sum * step * FRAC_1_PI
                    })
                    .collect()
            })
            .collect();
        let values = DMatrix::from_fn(grid.n_x, grid.n_p, |i, j| rows[i][j]);
        Ok(WignerField { grid: *grid, values })
    }
}

#[cfg(test)]
mod tests {
    use super::wavefunction::*;
    use super::*;
    use crate::fock::{make_cat, make_coherent, make_fock, make_squeezed_fock, subtract_photons, CatParity};
    use approx::assert_abs_diff_eq;

    const R6: f64 = 0.690_775_527_898_213_7;

    #[test]
    fn default_grid_contains_origin() {
        let g = PhaseGrid::default();
        assert_eq!((g.n_x, g.n_p), (201, 201));
        let (i, j) = g.origin_index();
        assert_eq!(g.xs()[i], 0.0);
        assert_eq!(g.ps()[j], 0.0);
        assert_abs_diff_eq!(g.dx(), 0.07, epsilon = 1e-15);
        assert!(PhaseGrid::square(7.0, 200).is_err());
        let mut skew = g;
        skew.x_min = -6.0;
        assert!(skew.validate().is_err());
    }

    #[test]
    fn vacuum_is_gaussian() {
        let vac = make_fock(0, 80).unwrap();
        for (x, p) in [(0.0f64, 0.0f64), (0.5, -0.3), (2.0, 1.0), (-4.0, 5.0)] {
            let expected = FRAC_1_PI * (-(x * x + p * p)).exp();
            assert_abs_diff_eq!(wigner_point(&vac, x, p), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn fock_one_closed_form() {
        let one = make_fock(1, 80).unwrap();
        for (x, p) in [(0.0, 0.0), (0.3, 0.4), (1.5, -2.0), (6.9, 6.9)] {
            let s = x * x + p * p;
            let expected = FRAC_1_PI * (2.0 * s - 1.0) * (-s).exp();
            assert_abs_diff_eq!(wigner_point(&one, x, p), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn coherent_state_peaks_at_its_mean() {
        let alpha = C64::new(1.0, -0.5);
        let coh = make_coherent(alpha, 80).unwrap();
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        assert_abs_diff_eq!(wigner_point(&coh, x0, p0), FRAC_1_PI, epsilon = 1e-12);
        let (x, p) = (x0 + 0.4, p0 - 0.7);
        let expected = FRAC_1_PI * (-0.65f64).exp();
        assert_abs_diff_eq!(wigner_point(&coh, x, p), expected, epsilon = 1e-12);
    }

    #[test]
    fn parity_at_origin_matches_field_sample() {
        let grid = PhaseGrid::square(3.0, 11).unwrap();
        let sv = make_squeezed_fock(R6, 0.0, 0, 80).unwrap();
        let states = [
            make_fock(0, 80).unwrap(),
            make_fock(1, 80).unwrap(),
            make_fock(2, 80).unwrap(),
            subtract_photons(&sv, 1).unwrap(),
            subtract_photons(&sv, 2).unwrap(),
            make_cat(C64::new(1.6, 0.0), CatParity::Odd, 80).unwrap(),
        ];
        for s in &states {
            let field = wigner_field(s, &grid).unwrap();
            assert_abs_diff_eq!(field.value_at_origin(), wigner_at_origin(s), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(wigner_at_origin(&states[2]), FRAC_1_PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wigner_at_origin(&states[1]), -FRAC_1_PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wigner_at_origin(&states[4]), FRAC_1_PI, epsilon = 1e-12);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        // trapezoid on [-15, 15] is spectrally accurate for these
        let h = 0.01;
        let nodes: Vec<f64> = (-1500..=1500).map(|i| i as f64 * h).collect();
        let tables: Vec<Vec<f64>> = nodes.iter().map(|&x| hermite_functions(x, 40)).collect();
        for (m, n) in [(0, 0), (3, 3), (40, 40), (2, 5), (10, 38)] {
            let integral: f64 = tables.iter().map(|t| t[m] * t[n]).sum::<f64>() * h;
            let expected = if m == n { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(integral, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_methods_agree() {
        let grid = PhaseGrid::square(4.0, 9).unwrap();
        let sv = make_squeezed_fock(R6, 0.4, 0, 60).unwrap();
        let states = [
            make_fock(2, 60).unwrap(),
            make_coherent(C64::new(0.7, 1.1), 60).unwrap(),
            subtract_photons(&sv, 2).unwrap(),
            make_cat(C64::new(1.6, 0.3), CatParity::Even, 60).unwrap(),
        ];
        for s in &states {
            let a = wigner_field(s, &grid).unwrap();
            let b = wigner_field_wavefunction(s, &grid).unwrap();
            let diff = (&a.values - &b.values).abs().max();
            assert!(diff < 1e-8, "methods differ by {diff}");
        }
    }

    #[test]
    fn field_respects_pure_state_bound() {
        let sv = make_squeezed_fock(R6, 0.0, 0, 80).unwrap();
        let two = subtract_photons(&sv, 2).unwrap();
        let field = wigner_field(&two, &PhaseGrid::square(7.0, 41).unwrap()).unwrap();
        assert!(field.values.iter().all(|w| w.abs() <= FRAC_1_PI + 1e-9));
    }

    #[test]
    fn tail_guard_is_enforced() {
        let mut amps = vec![C64::new(0.0, 0.0); 11];
        amps[10] = C64::new(1.0, 0.0);
        let edge = FockVector::from_amplitudes(amps).unwrap();
        assert!(matches!(
            wigner_field(&edge, &PhaseGrid::default()),
            Err(Error::TailGuard { .. })
        ));
    }

    #[test]
    fn csv_export_has_header_and_full_precision() {
        let field = wigner_field(&make_fock(0, 20).unwrap(), &PhaseGrid::square(1.0, 3).unwrap()).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,p,w");
        assert_eq!(lines.len(), 10);
        let center: Vec<f64> = lines[5].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(center, vec![0.0, 0.0, FRAC_1_PI]);
        let env = field.json_envelope();
        assert_eq!(env["w"].as_array().unwrap().len(), 9);
        assert_eq!(env["grid"]["n_x"], 3);
    }

    #[test]
    fn probe_rejects_coarser_refinement() {
        let spec: StateSpec = "fock{n=1,cutoff=40}".parse().unwrap();
        let base = ProbeSetting {
            cutoff: 40,
            grid: PhaseGrid::square(5.0, 51).unwrap(),
        };
        let coarse = ProbeSetting {
            cutoff: 40,
            grid: PhaseGrid::square(5.0, 41).unwrap(),
        };
        assert!(convergence_probe(&spec, &base, &coarse).is_err());
        assert!(convergence_probe(&spec, &base, &base).is_err());
    }
}
