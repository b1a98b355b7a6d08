//! Discretised one-dimensional pointer wavefunctions.
//!
//! A [`Grid`] of `n` cells covers `[x_min, x_max)`; point `j` sits at
//! `x_min + j dx`. The conjugate momentum grid has spacing
//! `dp = 2 pi / (n dx)` and points `p_k = (k - n/2) dp`, stored in ascending
//! order. Units are hbar = 1.
//!
//! The Fourier pairing is the discretised unitary transform
//! `phi(p) = (2 pi)^{-1/2} sum_j psi(x_j) exp(-i p x_j) dx`, so a momentum
//! translation by `delta` is multiplication by `exp(i delta x)` in position
//! space.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Gaussian tails must fit inside both grids out to this many standard deviations.
pub const FIT_SIGMAS: f64 = 6.0;

pub const DEFAULT_POINTS: usize = 4096;

/// Half-width of the default position window in units of `1 / sigma_p`.
pub const DEFAULT_HALF_WIDTH: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if !n.is_power_of_two() || !(128..=65536).contains(&n) {
            return Err(Error::rejected(format!(
                "grid size {n} must be a power of two in [128, 65536]"
            )));
        }
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::rejected("grid needs finite x_max > x_min"));
        }
        Ok(Self { n, x_min, x_max })
    }

    /// The default window scaled to a pointer with momentum spread `sigma_p`.
    pub fn for_sigma_p(sigma_p: f64) -> Result<Self> {
        if !(sigma_p > 0.0) || !sigma_p.is_finite() {
            return Err(Error::rejected("sigma_p must be positive and finite"));
        }
        let half = DEFAULT_HALF_WIDTH / sigma_p;
        Self::new(DEFAULT_POINTS, -half, half)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn dp(&self) -> f64 {
        std::f64::consts::TAU / (self.x_max - self.x_min)
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn p(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dp()
    }

    pub fn p_min(&self) -> f64 {
        self.p(0)
    }

    pub fn p_max(&self) -> f64 {
        self.p(self.n - 1)
    }

    /// Largest position reachable on the grid.
    pub fn x_last(&self) -> f64 {
        self.x(self.n - 1)
    }

    fn momentum_phase(&self, k: usize) -> Complex64 {
        // exp(-i p_k x_min), with the angle reduced exactly when x_min / L is dyadic.
        let frac = self.x_min / (self.x_max - self.x_min);
        let turns = ((k as f64 - (self.n / 2) as f64) * frac).rem_euclid(1.0);
        Complex64::from_polar(1.0, -std::f64::consts::TAU * turns)
    }
}

fn fft_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// Pointer wavefunction in position representation.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerWave {
    grid: Grid,
    amps: Vec<Complex64>,
}

/// Pointer wavefunction in momentum representation, indexed like [`Grid::p`].
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumWave {
    grid: Grid,
    amps: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_p: f64,
    pub var_p: f64,
}

impl PointerWave {
    pub fn from_amplitudes(grid: Grid, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != grid.n() {
            return Err(Error::rejected(format!(
                "expected {} amplitudes, got {}",
                grid.n(),
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::rejected("pointer amplitudes must be finite"));
        }
        Ok(Self { grid, amps })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            amps: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `sum |psi|^2 dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::rejected("cannot normalize a zero pointer wave"));
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            grid: self.grid,
            amps: self.amps.iter().map(|a| a * s).collect(),
        })
    }

    /// `self += coeff * other`.
    pub fn add_scaled(&mut self, coeff: Complex64, other: &PointerWave) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::rejected("pointer waves live on different grids"));
        }
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += coeff * b;
        }
        Ok(())
    }

    pub fn scaled(&self, coeff: Complex64) -> Self {
        Self {
            grid: self.grid,
            amps: self.amps.iter().map(|a| a * coeff).collect(),
        }
    }

    /// `sum conj(self) other dx`.
    pub fn overlap(&self, other: &PointerWave) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::rejected("pointer waves live on different grids"));
        }
        let s: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.dx())
    }

    pub fn max_abs_diff(&self, other: &PointerWave) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Probability carried by the outermost two points at each end.
    pub fn edge_probability(&self) -> f64 {
        edge_probability(&self.amps) * self.grid.dx()
    }

    pub fn to_momentum(&self) -> MomentumWave {
        let n = self.grid.n();
        let (forward, _) = fft_pair(n);
        let mut buf: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, a)| if j % 2 == 0 { *a } else { -*a })
            .collect();
        forward.process(&mut buf);
        let scale = self.grid.dx() / std::f64::consts::TAU.sqrt();
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= self.grid.momentum_phase(k) * scale;
        }
        MomentumWave {
            grid: self.grid,
            amps: buf,
        }
    }

    /// Rigid momentum shift: multiply by `exp(i delta_p x)`.
    pub fn translate_momentum(&self, delta_p: f64) -> Result<Self> {
        if !delta_p.is_finite() {
            return Err(Error::rejected("momentum shift must be finite"));
        }
        if delta_p == 0.0 {
            return Ok(self.clone());
        }
        let m = self.moments();
        let reach_hi = m.mean_p + delta_p + FIT_SIGMAS * m.var_p.sqrt();
        let reach_lo = m.mean_p + delta_p - FIT_SIGMAS * m.var_p.sqrt();
        if reach_hi > self.grid.p_max() || reach_lo < self.grid.p_min() {
            return Err(Error::rejected(format!(
                "momentum shift {delta_p} pushes support [{reach_lo}, {reach_hi}] off the momentum grid [{}, {}]",
                self.grid.p_min(),
                self.grid.p_max()
            )));
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, a)| a * Complex64::from_polar(1.0, delta_p * self.grid.x(j)))
            .collect();
        Ok(Self {
            grid: self.grid,
            amps,
        })
    }

    pub fn moments(&self) -> Moments {
        let (mean_x, var_x) = density_moments(&self.amps, |j| self.grid.x(j));
        let momentum = self.to_momentum();
        let (mean_p, var_p) = density_moments(&momentum.amps, |k| self.grid.p(k));
        Moments {
            mean_x,
            var_x,
            mean_p,
            var_p,
        }
    }

    pub fn position_sampler(&self) -> DensitySampler {
        let dx = self.grid.dx();
        DensitySampler::new(
            (0..self.grid.n()).map(|j| self.grid.x(j)).collect(),
            dx,
            self.amps.iter().map(|a| a.norm_sqr()).collect(),
        )
    }
}

impl MomentumWave {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// `sum |phi|^2 dp`.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dp()
    }

    pub fn mean_var(&self) -> (f64, f64) {
        density_moments(&self.amps, |k| self.grid.p(k))
    }

    pub fn edge_probability(&self) -> f64 {
        edge_probability(&self.amps) * self.grid.dp()
    }

    pub fn to_position(&self) -> PointerWave {
        let n = self.grid.n();
        let (_, inverse) = fft_pair(n);
        let mut buf: Vec<Complex64> = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| a * self.grid.momentum_phase(k).conj())
            .collect();
        inverse.process(&mut buf);
        let scale = self.grid.dp() / std::f64::consts::TAU.sqrt();
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= if j % 2 == 0 { scale } else { -scale };
        }
        PointerWave {
            grid: self.grid,
            amps: buf,
        }
    }

    pub fn sampler(&self) -> DensitySampler {
        DensitySampler::new(
            (0..self.grid.n()).map(|k| self.grid.p(k)).collect(),
            self.grid.dp(),
            self.amps.iter().map(|a| a.norm_sqr()).collect(),
        )
    }
}

fn edge_probability(amps: &[Complex64]) -> f64 {
    let n = amps.len();
    [0, 1, n - 2, n - 1]
        .iter()
        .map(|&i| amps[i].norm_sqr())
        .sum()
}

/// Mean and variance of the point density `|amps|^2` with coordinates `coord`.
fn density_moments(amps: &[Complex64], coord: impl Fn(usize) -> f64) -> (f64, f64) {
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let mean = amps
        .iter()
        .enumerate()
        .map(|(i, a)| coord(i) * a.norm_sqr())
        .sum::<f64>()
        / total;
    let var = amps
        .iter()
        .enumerate()
        .map(|(i, a)| (coord(i) - mean).powi(2) * a.norm_sqr())
        .sum::<f64>()
        / total;
    (mean, var.max(0.0))
}

/// Minimum-uncertainty Gaussian with mean position `x0`, mean momentum `p0`
/// and momentum spread `sigma_p` (position spread `1 / (2 sigma_p)`).
pub fn gaussian(grid: &Grid, x0: f64, p0: f64, sigma_p: f64) -> Result<PointerWave> {
    if !(sigma_p > 0.0) || !sigma_p.is_finite() || !x0.is_finite() || !p0.is_finite() {
        return Err(Error::rejected(
            "gaussian needs finite x0, p0 and sigma_p > 0",
        ));
    }
    let sigma_x = 1.0 / (2.0 * sigma_p);
    let (lo, hi) = (x0 - FIT_SIGMAS * sigma_x, x0 + FIT_SIGMAS * sigma_x);
    if lo < grid.x_min() || hi > grid.x_last() {
        return Err(Error::rejected(format!(
            "gaussian does not fit the position extent: needs [{lo}, {hi}], grid covers [{}, {}]",
            grid.x_min(),
            grid.x_last()
        )));
    }
    let (plo, phi) = (p0 - FIT_SIGMAS * sigma_p, p0 + FIT_SIGMAS * sigma_p);
    if plo < grid.p_min() || phi > grid.p_max() {
        return Err(Error::rejected(format!(
            "gaussian does not fit the momentum extent: needs [{plo}, {phi}], grid covers [{}, {}]",
            grid.p_min(),
            grid.p_max()
        )));
    }
    let amps = (0..grid.n())
        .map(|j| {
            let x = grid.x(j);
            let envelope = (-(x - x0).powi(2) / (4.0 * sigma_x * sigma_x)).exp();
            Complex64::from_polar(envelope, p0 * x)
        })
        .collect();
    PointerWave::from_amplitudes(*grid, amps)?.normalized()
}

/// Inverse-CDF sampler over grid cells with uniform jitter inside each cell.
///
/// Cell `i` is centred on `centers[i]` with width `width`.
#[derive(Clone, Debug)]
pub struct DensitySampler {
    centers: Vec<f64>,
    width: f64,
    cumulative: Vec<f64>,
}

impl DensitySampler {
    pub fn new(centers: Vec<f64>, width: f64, weights: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self {
            centers,
            width,
            cumulative,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let target = rng.uniform() * total;
        let cell = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.centers.len() - 1);
        self.centers[cell] + (rng.uniform() - 0.5) * self.width
    }
}

/// One detection drawn from the position density of `wave`.
pub fn sample_position(wave: &PointerWave, rng: &mut RngStream) -> f64 {
    wave.position_sampler().sample(rng)
}
