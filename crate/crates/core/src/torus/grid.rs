use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::TorusError;

/// Uniform grid on the unit torus `R^{4n} / Z^{4n}` restricted to a set of
/// active real coordinates; fields are constant along the others.
/// Samples are stored row-major over the active axes in increasing order.
#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    active: Vec<usize>,
    points: usize,
    plans: Arc<Plans>,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("active", &self.active)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.active == other.active && self.points == other.points
    }
}

/// Upper bound on the number of stored samples.
pub const MAX_SAMPLES: usize = 1 << 22;

impl SpectralGrid {
    /// `active` holds 0-based real coordinate indices in `0..4n`.
    pub fn new(n: usize, active: &[usize], points: usize) -> Result<Self, TorusError> {
        if n == 0 {
            return Err(TorusError::InvalidGrid(
                "quaternionic dimension must be positive".into(),
            ));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(TorusError::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {points}"
            )));
        }
        let mut sorted = active.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() != active.len() {
            return Err(TorusError::InvalidGrid(
                "active coordinates must be nonempty and distinct".into(),
            ));
        }
        if let Some(&bad) = sorted.iter().find(|&&k| k >= 4 * n) {
            return Err(TorusError::InvalidGrid(format!(
                "active coordinate {bad} outside 0..{}",
                4 * n
            )));
        }
        let total = (points as u128).pow(sorted.len() as u32);
        if total > MAX_SAMPLES as u128 {
            return Err(TorusError::InvalidGrid(format!(
                "{total} samples exceed the limit {MAX_SAMPLES}"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        };
        Ok(Self {
            n,
            active: sorted,
            points,
            plans: Arc::new(plans),
        })
    }

    /// Every real coordinate active.
    pub fn full(n: usize, points: usize) -> Result<Self, TorusError> {
        let all: Vec<usize> = (0..4 * n).collect();
        Self::new(n, &all, points)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dims(&self) -> usize {
        self.active.len()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of a real coordinate among the active axes.
    pub fn axis_of(&self, coord: usize) -> Option<usize> {
        self.active.iter().position(|&k| k == coord)
    }

    /// Per-axis sample indices of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let m = self.dims();
        let mut out = vec![0; m];
        for a in (0..m).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
        out
    }

    /// Real coordinates in `[0,1)^{4n}` of a sample; inactive ones are 0.
    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; 4 * self.n];
        for (a, i) in self.multi_index(flat).into_iter().enumerate() {
            x[self.active[a]] = i as f64 / self.points as f64;
        }
        x
    }

    /// The grid with the same active set and twice as many points per axis.
    pub fn refined(&self) -> Result<Self, TorusError> {
        Self::new(self.n, &self.active, 2 * self.points)
    }

    /// Total volume of the torus for the integration measure.
    pub fn volume(&self) -> f64 {
        crate::exterior::volume_form_factor(self.n)
    }

    /// Signed integer frequency of sample index `j` along an axis, with the
    /// Nyquist index mapped to 0 (its odd-derivative symbol is dropped).
    pub fn frequency(&self, j: usize) -> f64 {
        let n = self.points;
        if j < n / 2 {
            j as f64
        } else if j == n / 2 {
            0.0
        } else {
            j as f64 - n as f64
        }
    }

    /// Symbol of `d/dx` along an axis at index `j`: `2 pi i k`.
    pub fn derivative_symbol(&self, j: usize) -> Complex64 {
        Complex64::new(0.0, 2.0 * PI * self.frequency(j))
    }

    /// Unnormalized forward transform over all active axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len());
        let n = self.points;
        let m = self.dims();
        let plan = if inverse {
            &self.plans.inverse
        } else {
            &self.plans.forward
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..m {
            let stride = n.pow((m - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Multiplies a spectrum by `prod_a symbol_a(index along axis a)`.
    pub fn apply_symbol(
        &self,
        spectrum: &[Complex64],
        symbol: impl Fn(&[usize]) -> Complex64,
    ) -> Vec<Complex64> {
        let mut idx = vec![0usize; self.dims()];
        let mut out = Vec::with_capacity(spectrum.len());
        for v in spectrum {
            out.push(*v * symbol(&idx));
            for a in (0..idx.len()).rev() {
                idx[a] += 1;
                if idx[a] < self.points {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }

    /// `sum_a (2 pi k_a)^2`, the negated symbol of the flat Laplacian built
    /// from two first derivatives.
    pub fn laplacian_weight(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .map(|&j| (2.0 * PI * self.frequency(j)).powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(SpectralGrid::new(1, &[0], 5).is_err());
        assert!(SpectralGrid::new(1, &[0], 2).is_err());
        assert!(SpectralGrid::new(1, &[], 8).is_err());
        assert!(SpectralGrid::new(1, &[4], 8).is_err());
        assert!(SpectralGrid::new(1, &[0, 0], 8).is_err());
        assert!(SpectralGrid::new(0, &[0], 8).is_err());
        assert!(SpectralGrid::full(2, 16).is_err());
        assert!(SpectralGrid::full(2, 6).is_ok());
    }

    #[test]
    fn coordinates_and_indexing() {
        let g = SpectralGrid::new(2, &[4, 0], 8).unwrap();
        assert_eq!(g.active(), &[0, 4]);
        assert_eq!(g.len(), 64);
        let x = g.coordinates(8 * 3 + 5);
        assert_eq!(x[0], 3.0 / 8.0);
        assert_eq!(x[4], 5.0 / 8.0);
        assert_eq!(x[1], 0.0);
        assert_eq!(g.axis_of(4), Some(1));
        assert_eq!(g.axis_of(1), None);
    }

    #[test]
    fn round_trip_transform() {
        let g = SpectralGrid::new(1, &[0, 2, 3], 6).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos()))
            .collect();
        let mut d = orig.clone();
        g.forward(&mut d);
        g.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn frequencies() {
        let g = SpectralGrid::new(1, &[0], 8).unwrap();
        let f: Vec<f64> = (0..8).map(|j| g.frequency(j)).collect();
        assert_eq!(f, vec![0.0, 1.0, 2.0, 3.0, 0.0, -3.0, -2.0, -1.0]);
    }
}
