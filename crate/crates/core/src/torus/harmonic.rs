use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use super::{ScalarField, SpectralGrid, TorusError};

/// `amplitude * cos(2 pi frequency x_coord + phase)`. `coord` is 0-based;
/// it serializes 1-based like every coordinate in written artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Harmonic {
    #[serde(serialize_with = "one_based")]
    pub coord: usize,
    pub frequency: i32,
    pub amplitude: f64,
    pub phase: f64,
}

fn one_based<S: serde::Serializer>(coord: &usize, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(*coord as u64 + 1)
}

/// A finite sum of single-coordinate harmonics, sampled on any grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct HarmonicSum {
    pub terms: Vec<Harmonic>,
}

impl HarmonicSum {
    pub fn new(terms: Vec<Harmonic>) -> Self {
        Self { terms }
    }

    /// `amplitude * sum_k cos(2 pi x_k)` over `coords`.
    pub fn cosines(coords: &[usize], amplitude: f64) -> Self {
        Self::new(
            coords
                .iter()
                .map(|&coord| Harmonic {
                    coord,
                    frequency: 1,
                    amplitude,
                    phase: 0.0,
                })
                .collect(),
        )
    }

    /// Random shape: `terms` harmonics on active coordinates with frequencies
    /// in `1..=kmax`, amplitudes in `[-1, 1]` and uniform phases.
    pub fn random(active: &[usize], rng: &mut impl Rng, terms: usize, kmax: i32) -> Self {
        let terms = (0..terms)
            .map(|_| Harmonic {
                coord: active[rng.random_range(0..active.len())],
                frequency: rng.random_range(1..=kmax),
                amplitude: rng.random_range(-1.0..=1.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        Self { terms }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|h| Harmonic {
                    amplitude: s * h.amplitude,
                    ..*h
                })
                .collect(),
        )
    }

    /// Every term must sit on an active coordinate and be resolved by the grid.
    pub fn check(&self, grid: &SpectralGrid) -> Result<(), TorusError> {
        for h in &self.terms {
            if grid.axis_of(h.coord).is_none() {
                return Err(TorusError::InvalidGrid(format!(
                    "harmonic on inactive coordinate {}",
                    h.coord
                )));
            }
            if 2 * h.frequency.unsigned_abs() as usize >= grid.points() {
                return Err(TorusError::InvalidGrid(format!(
                    "frequency {} not resolved by {} points",
                    h.frequency,
                    grid.points()
                )));
            }
            if !h.amplitude.is_finite() || !h.phase.is_finite() {
                return Err(TorusError::InvalidGrid("non-finite harmonic".into()));
            }
        }
        Ok(())
    }

    pub fn sample(&self, grid: &SpectralGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            self.terms
                .iter()
                .map(|h| h.amplitude * (2.0 * PI * h.frequency as f64 * x[h.coord] + h.phase).cos())
                .sum()
        })
    }
}

/// Random real trigonometric polynomial: `terms` plane waves with integer
/// wave vectors in `[-kmax, kmax]` on the active axes, amplitudes in
/// `(-amp, amp)` and uniform phases.
pub fn band_limited(
    grid: &SpectralGrid,
    rng: &mut impl Rng,
    terms: usize,
    kmax: i32,
    amp: f64,
) -> ScalarField {
    let m = grid.dims();
    let modes: Vec<(Vec<i32>, f64, f64)> = (0..terms)
        .map(|_| {
            let k: Vec<i32> = (0..m).map(|_| rng.random_range(-kmax..=kmax)).collect();
            (
                k,
                rng.random_range(-amp..amp),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let active = grid.active().to_vec();
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| {
                let arg: f64 = k
                    .iter()
                    .zip(&active)
                    .map(|(&ki, &c)| ki as f64 * x[c])
                    .sum();
                a * (2.0 * PI * arg + ph).cos()
            })
            .sum()
    })
}
