use num_complex::Complex64;

use super::grid::SpectralGrid;
use super::TorusError;

/// Real samples of a function on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpectralGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self, TorusError> {
        if values.len() != grid.len() {
            return Err(TorusError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TorusError::NonFinite { index: i });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid's real coordinates in `[0,1)^{4n}`.
    pub fn from_fn(grid: &SpectralGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &SpectralGrid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn from_parts(grid: SpectralGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid average, summed in index order.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Integral against the volume element: mean times total volume.
    pub fn integrate(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    /// `(integral |f|^p)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "need p >= 1");
        self.map(|v| v.abs().powf(p)).integrate().powf(1.0 / p)
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut d = self.to_complex();
        self.grid.forward(&mut d);
        d
    }

    /// Mixed partial derivative along the given real coordinates; zero if
    /// any of them is inactive.
    pub fn derivative(&self, coords: &[usize]) -> Self {
        let d = spectral_derivative(&self.grid, &self.spectrum(), coords);
        Self {
            grid: self.grid.clone(),
            values: d.into_iter().map(|c| c.re).collect(),
        }
    }

    /// `sum_k d^2/dx_k^2` built from products of first-derivative symbols.
    pub fn laplacian(&self) -> Self {
        let spec = self.spectrum();
        let mut out = self.grid.apply_symbol(&spec, |idx| {
            Complex64::new(-self.grid.laplacian_weight(idx), 0.0)
        });
        self.grid.inverse(&mut out);
        Self {
            grid: self.grid.clone(),
            values: out.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Mean-zero `u` with `laplacian(u) = rhs` on the range of the discrete
    /// Laplacian; components in its kernel are dropped.
    pub fn solve_laplacian(rhs: &Self) -> Self {
        let grid = rhs.grid.clone();
        let spec = rhs.spectrum();
        let mut out = grid.apply_symbol(&spec, |idx| {
            let w = grid.laplacian_weight(idx);
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / w, 0.0)
            }
        });
        grid.inverse(&mut out);
        Self {
            grid,
            values: out.into_iter().map(|c| c.re).collect(),
        }
    }
}

impl ScalarField {
    /// Removes the modes in the kernel of the discrete Laplacian (the mean
    /// and the modes that are Nyquist or zero along every axis).
    pub fn project_to_laplacian_range(&self) -> Self {
        let grid = self.grid.clone();
        let spec = self.spectrum();
        let mut out = grid.apply_symbol(&spec, |idx| {
            Complex64::new(
                if grid.laplacian_weight(idx) == 0.0 {
                    0.0
                } else {
                    1.0
                },
                0.0,
            )
        });
        grid.inverse(&mut out);
        Self {
            grid,
            values: out.into_iter().map(|c| c.re).collect(),
        }
    }
}

impl ScalarField {
    /// Trigonometric interpolation onto a grid with the same active set and at
    /// least as many points; Nyquist content is split evenly between `+-N/2`.
    pub fn resample(&self, target: &SpectralGrid) -> Result<Self, TorusError> {
        let src = &self.grid;
        if target.n() != src.n()
            || target.active() != src.active()
            || target.points() < src.points()
        {
            return Err(TorusError::InvalidGrid(
                "resampling needs the same active set and a finer grid".into(),
            ));
        }
        let (n_src, n_tgt) = (src.points(), target.points());
        let spec = self.spectrum();
        let gain = (n_tgt as f64 / n_src as f64).powi(src.dims() as i32);
        let images = |j: usize| -> Vec<(usize, f64)> {
            if 2 * j < n_src {
                vec![(j, 1.0)]
            } else if 2 * j > n_src {
                vec![(n_tgt + j - n_src, 1.0)]
            } else {
                vec![(j, 0.5), (n_tgt - j, 0.5)]
            }
        };
        let mut out = vec![Complex64::new(0.0, 0.0); target.len()];
        for (flat, c) in spec.iter().enumerate() {
            let mut targets = vec![(0usize, gain)];
            for j in src.multi_index(flat) {
                targets = targets
                    .iter()
                    .flat_map(|&(t, w)| {
                        images(j)
                            .into_iter()
                            .map(move |(i, v)| (t * n_tgt + i, w * v))
                    })
                    .collect();
            }
            for (t, w) in targets {
                out[t] += c * w;
            }
        }
        target.inverse(&mut out);
        Ok(Self {
            grid: target.clone(),
            values: out.into_iter().map(|c| c.re).collect(),
        })
    }
}

/// Inverse transform of `spectrum * prod_k (2 pi i freq_k)` over `coords`.
pub fn spectral_derivative(
    grid: &SpectralGrid,
    spectrum: &[Complex64],
    coords: &[usize],
) -> Vec<Complex64> {
    let axes: Option<Vec<usize>> = coords.iter().map(|&c| grid.axis_of(c)).collect();
    let Some(axes) = axes else {
        return vec![Complex64::new(0.0, 0.0); grid.len()];
    };
    let mut out = grid.apply_symbol(spectrum, |idx| {
        axes.iter().fold(Complex64::new(1.0, 0.0), |acc, &a| {
            acc * grid.derivative_symbol(idx[a])
        })
    });
    grid.inverse(&mut out);
    out
}

/// Spectral derivative of complex samples.
pub fn complex_derivative(
    grid: &SpectralGrid,
    values: &[Complex64],
    coords: &[usize],
) -> Vec<Complex64> {
    let mut spec = values.to_vec();
    grid.forward(&mut spec);
    spectral_derivative(grid, &spec, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrals_and_norms() {
        let g = SpectralGrid::new(1, &[0, 1], 16).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((one.integrate() - 4.0).abs() < 1e-15);
        let s = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        assert!(s.integrate().abs() < 1e-14);
        assert!((s.lp_norm(2.0).powi(2) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn derivatives_of_harmonics() {
        let g = SpectralGrid::new(2, &[0, 5], 16).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (2.0 * PI * 3.0 * x[0]).sin() * (2.0 * PI * x[5]).cos()
        });
        let fx = f.derivative(&[0]);
        let exact = ScalarField::from_fn(&g, |x| {
            6.0 * PI * (2.0 * PI * 3.0 * x[0]).cos() * (2.0 * PI * x[5]).cos()
        });
        assert!(fx.sub(&exact).sup_norm() < 1e-12);
        let fxy = f.derivative(&[0, 5]);
        let exact = ScalarField::from_fn(&g, |x| {
            -12.0 * PI * PI * (2.0 * PI * 3.0 * x[0]).cos() * (2.0 * PI * x[5]).sin()
        });
        assert!(fxy.sub(&exact).sup_norm() < 1e-11);
        assert_eq!(f.derivative(&[1]).sup_norm(), 0.0);
        assert!(ScalarField::constant(&g, 3.0).derivative(&[0]).sup_norm() < 1e-14);
    }

    #[test]
    fn resampling_is_exact_for_resolved_data() {
        let g = SpectralGrid::new(1, &[0, 3], 8).unwrap();
        let f = |x: &[f64]| {
            (2.0 * PI * (x[0] + 2.0 * x[3])).sin()
                + 0.5 * (2.0 * PI * 3.0 * x[3]).cos()
                + 0.2 * (8.0 * PI * x[0]).cos()
        };
        let coarse = ScalarField::from_fn(&g, f);
        let fine_grid = g.refined().unwrap();
        let fine = coarse.resample(&fine_grid).unwrap();
        // the Nyquist cosine becomes cos(8 pi x) sampled at the finer points
        assert!(fine.sub(&ScalarField::from_fn(&fine_grid, f)).sup_norm() < 1e-13);
        assert!(coarse.resample(&g).unwrap().sub(&coarse).sup_norm() < 1e-14);
        assert!(fine.resample(&g).is_err());
    }

    #[test]
    fn laplacian_inverse() {
        let g = SpectralGrid::new(1, &[0, 2], 16).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (2.0 * PI * x[0]).cos() + 0.3 * (2.0 * PI * (2.0 * x[0] - x[2])).sin()
        });
        let lap = f.laplacian();
        let back = ScalarField::solve_laplacian(&lap);
        assert!(back.sub(&f.shift(-f.mean())).sup_norm() < 1e-13);
    }
}
