//! Exponentials of banded generators in a truncated number basis.
//!
//! Squeezing and displacement generators only couple number states that are
//! one or two indices apart, so they are stored as a handful of diagonals.
//! Two routes are provided: a dense Padé exponential that
//! returns the full operator, and the action of the exponential on a single
//! vector computed by sub-stepped Taylor series. The state-level operations
//! use the vector action; the dense operator backs identity checks.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Sparse square matrix stored as a set of diagonals.
///
/// Entry `(offset, values)` places `values[j]` at row `j + offset`, column `j`
/// for non-negative offsets, and at row `j`, column `j - offset` otherwise.
#[derive(Clone, Debug)]
pub struct BandedGenerator {
    dim: usize,
    diagonals: Vec<(isize, Vec<C64>)>,
}

impl BandedGenerator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            diagonals: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn push_diagonal(&mut self, offset: isize, values: Vec<C64>) {
        debug_assert_eq!(values.len(), self.dim - offset.unsigned_abs());
        self.diagonals.push((offset, values));
    }

    /// Generator of `S(r, theta)`: `(xi* a^2 - xi a†^2) / 2` with `xi = r e^{i theta}`.
    pub fn squeeze(dim: usize, r: f64, theta: f64) -> Self {
        let xi = C64::from_polar(r, theta);
        let mut gen = Self::new(dim);
        if dim < 3 {
            return gen;
        }
        // (a^2)_{n, n+2} = sqrt((n+1)(n+2))
        let band: Vec<f64> = (0..dim - 2).map(|n| (((n + 1) * (n + 2)) as f64).sqrt()).collect();
        gen.push_diagonal(-2, band.iter().map(|&b| 0.5 * xi.conj() * b).collect());
        gen.push_diagonal(2, band.iter().map(|&b| -0.5 * xi * b).collect());
        gen
    }

    /// Generator of `D(alpha)`: `alpha a† - alpha* a`.
    pub fn displacement(dim: usize, alpha: C64) -> Self {
        let mut gen = Self::new(dim);
        if dim < 2 {
            return gen;
        }
        let band: Vec<f64> = (1..dim).map(|n| (n as f64).sqrt()).collect();
        gen.push_diagonal(1, band.iter().map(|&b| alpha * b).collect());
        gen.push_diagonal(-1, band.iter().map(|&b| -alpha.conj() * b).collect());
        gen
    }

    /// `out = G v`
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (offset, values) in &self.diagonals {
            if *offset >= 0 {
                let off = *offset as usize;
                for (j, g) in values.iter().enumerate() {
                    out[j + off] += g * v[j];
                }
            } else {
                let off = offset.unsigned_abs();
                for (j, g) in values.iter().enumerate() {
                    out[j] += g * v[j + off];
                }
            }
        }
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.dim];
        for (offset, values) in &self.diagonals {
            let col_start = if *offset >= 0 { 0 } else { offset.unsigned_abs() };
            for (j, g) in values.iter().enumerate() {
                cols[j + col_start] += g.norm();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (offset, values) in &self.diagonals {
            for (j, g) in values.iter().enumerate() {
                let (row, col) = if *offset >= 0 {
                    (j + *offset as usize, j)
                } else {
                    (j, j + offset.unsigned_abs())
                };
                m[(row, col)] += *g;
            }
        }
        m
    }
}

/// Largest 1-norm of a single Taylor sub-step.
const STEP_NORM: f64 = 2.0;
const MAX_TAYLOR_TERMS: usize = 80;

/// `exp(G) v` by splitting into sub-steps of bounded norm and summing each
/// step's Taylor series until the terms drop below double precision.
pub fn expm_action(gen: &BandedGenerator, v: &[C64]) -> Vec<C64> {
    assert_eq!(gen.dim(), v.len(), "generator/vector dimension mismatch");
    let norm = gen.norm1();
    let steps = ((norm / STEP_NORM).ceil() as usize).max(1);
    let scale = 1.0 / steps as f64;

    let mut acc = v.to_vec();
    let mut term = vec![C64::new(0.0, 0.0); v.len()];
    let mut next = vec![C64::new(0.0, 0.0); v.len()];
    for _ in 0..steps {
        term.copy_from_slice(&acc);
        let acc_norm = l2(&acc);
        for k in 1..=MAX_TAYLOR_TERMS {
            gen.apply(&term, &mut next);
            let f = scale / k as f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * f;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if l2(&term) <= 1e-18 * acc_norm.max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    acc
}

/// Dense `exp(G)` (Padé scaling and squaring).
pub fn expm_dense(gen: &BandedGenerator) -> DMatrix<C64> {
    gen.to_dense().exp()
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_vector(dim: usize, seed: u64) -> Vec<C64> {
        // small LCG, enough for a fixed test vector
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut v: Vec<C64> = (0..dim).map(|_| C64::new(next(), next())).collect();
        let n = l2(&v);
        v.iter_mut().for_each(|c| *c /= n);
        v
    }

    #[test]
    fn action_matches_dense_exponential() {
        let dim = 40;
        let v = random_vector(dim, 7);
        for gen in [
            BandedGenerator::squeeze(dim, 0.8, 0.4),
            BandedGenerator::displacement(dim, C64::new(0.7, -1.1)),
        ] {
            let dense = expm_dense(&gen);
            let via_dense = &dense * nalgebra::DVector::from_vec(v.clone());
            let via_action = expm_action(&gen, &v);
            for (a, b) in via_dense.iter().zip(&via_action) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn anti_hermitian_exponential_is_unitary() {
        let gen = BandedGenerator::displacement(30, C64::new(1.3, 0.2));
        let u = expm_dense(&gen);
        let should_be_identity = u.adjoint() * &u;
        let id = DMatrix::<C64>::identity(30, 30);
        assert!((should_be_identity - id).norm() < 1e-12);
    }

    #[test]
    fn zero_generator_is_identity() {
        let gen = BandedGenerator::squeeze(10, 0.0, 0.0);
        let v = random_vector(10, 3);
        assert_eq!(expm_action(&gen, &v), v);
    }

    #[test]
    fn dense_layout_places_bands() {
        let gen = BandedGenerator::displacement(4, C64::new(1.0, 0.0));
        let m = gen.to_dense();
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(-1.0, 0.0));
        assert!((m[(3, 2)].re - 3f64.sqrt()).abs() < 1e-15);
        assert!((gen.norm1() - (3f64.sqrt() + 2f64.sqrt())).abs() < 1e-15);
    }
}
