//! Weak-momentum flow lines behind a scalar two-slit source.
//!
//! Each slit is a paraxial Gaussian beam with waist `w` at `z = 0`,
//! `u(x, z) = (q0 / q)^(1/2) exp(i k (x - c)^2 / (2 q))`, `q = z - i z_R`,
//! `z_R = k w^2 / 2`. The common carrier `exp(i k z)` is dropped because it
//! carries no transverse gradient. Flow lines solve `dx/dz = v(x, z)` with
//! `v = Im(psi_x / psi) / k`, the real part of the weak value of transverse
//! momentum for postselection at `x`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative cancellation below which a point counts as a node.
pub const DEFAULT_NODE_FLOOR: f64 = 1e-12;

/// Step halvings allowed while trying to get past a node.
pub const MAX_HALVINGS: u32 = 40;

const QUAD_MAX_DEPTH: u32 = 48;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSystem {
    slit_separation: f64,
    waist: f64,
    wavenumber: f64,
    relative_phase: f64,
    amplitudes: [Complex64; 2],
}

impl BeamSystem {
    /// Slit 0 sits at `-d/2` and slit 1 at `+d/2`; `relative_phase` is applied to slit 1.
    pub fn new(
        slit_separation: f64,
        waist: f64,
        wavenumber: f64,
        relative_phase: f64,
        amplitudes: [Complex64; 2],
    ) -> Result<Self> {
        for (name, v) in [
            ("slit_separation", slit_separation),
            ("waist", waist),
            ("wavenumber", wavenumber),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::rejected(format!("{name} must be positive")));
            }
        }
        if !relative_phase.is_finite() {
            return Err(Error::rejected("relative_phase must be finite"));
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::rejected("amplitudes must be finite"));
        }
        if amplitudes.iter().all(|a| a.norm() == 0.0) {
            return Err(Error::rejected("amplitudes are both zero"));
        }
        Ok(Self {
            slit_separation,
            waist,
            wavenumber,
            relative_phase,
            amplitudes,
        })
    }

    /// Equal in-phase slits.
    pub fn symmetric(slit_separation: f64, waist: f64, wavenumber: f64) -> Result<Self> {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(slit_separation, waist, wavenumber, 0.0, [a, a])
    }

    /// Unit waist, `d = 4 w`, `k w = 20`.
    pub fn default_geometry() -> Self {
        Self::symmetric(4.0, 1.0, 20.0).expect("default geometry is valid")
    }

    /// `z` range of the default geometry, `[0, 50 w]`.
    pub fn default_z_range(&self) -> (f64, f64) {
        (0.0, 50.0 * self.waist)
    }

    pub fn slit_separation(&self) -> f64 {
        self.slit_separation
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn relative_phase(&self) -> f64 {
        self.relative_phase
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amplitudes
    }

    pub fn rayleigh_range(&self) -> f64 {
        0.5 * self.wavenumber * self.waist * self.waist
    }

    /// 1/e amplitude half-width of a single beam at `z`.
    pub fn beam_width(&self, z: f64) -> f64 {
        self.waist * (1.0 + (z / self.rayleigh_range()).powi(2)).sqrt()
    }

    fn centers(&self) -> [f64; 2] {
        let h = 0.5 * self.slit_separation;
        [-h, h]
    }

    fn weights(&self) -> [Complex64; 2] {
        [
            self.amplitudes[0],
            self.amplitudes[1] * Complex64::from_polar(1.0, self.relative_phase),
        ]
    }

    /// Per-beam terms scaled by a common positive factor: `(c_j u_j / s, s > 0)`
    /// together with `q`. Scaling keeps far-tail ratios representable.
    fn terms(&self, x: f64, z: f64) -> ([Complex64; 2], [f64; 2], Complex64) {
        let zr = self.rayleigh_range();
        let q = Complex64::new(z, -zr);
        let weights = self.weights();
        let centers = self.centers();
        let arg = |c: f64| Complex64::i() * self.wavenumber * (x - c) * (x - c) / (2.0 * q);
        let exps = [arg(centers[0]), arg(centers[1])];
        let live: Vec<f64> = (0..2)
            .filter(|&j| weights[j].norm() > 0.0)
            .map(|j| exps[j].re)
            .collect();
        let top = live.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gouy = (Complex64::new(0.0, -zr) / q).sqrt();
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for j in 0..2 {
            if weights[j].norm() > 0.0 {
                out[j] = weights[j] * gouy * (exps[j] - top).exp();
            }
        }
        (out, centers, q)
    }

    /// Closed-form complex field.
    pub fn field_at(&self, x: f64, z: f64) -> Complex64 {
        let zr = self.rayleigh_range();
        let q = Complex64::new(z, -zr);
        let gouy = (Complex64::new(0.0, -zr) / q).sqrt();
        self.weights()
            .iter()
            .zip(self.centers())
            .map(|(&c, x0)| {
                c * gouy
                    * (Complex64::i() * self.wavenumber * (x - x0) * (x - x0) / (2.0 * q)).exp()
            })
            .sum()
    }

    /// Analytic `d psi / dx`.
    pub fn field_derivative(&self, x: f64, z: f64) -> Complex64 {
        let zr = self.rayleigh_range();
        let q = Complex64::new(z, -zr);
        let gouy = (Complex64::new(0.0, -zr) / q).sqrt();
        let ik = Complex64::i() * self.wavenumber;
        self.weights()
            .iter()
            .zip(self.centers())
            .map(|(&c, x0)| {
                let u = c * gouy * (ik * (x - x0) * (x - x0) / (2.0 * q)).exp();
                u * ik * (x - x0) / q
            })
            .sum()
    }

    pub fn intensity(&self, x: f64, z: f64) -> f64 {
        self.field_at(x, z).norm_sqr()
    }

    pub fn weak_momentum(&self, x: f64, z: f64) -> Result<f64> {
        self.weak_momentum_with(x, z, DEFAULT_NODE_FLOOR)
    }

    /// Fails with a node error when `|psi|` falls below `node_floor` times
    /// the incoherent envelope `sum |c_j u_j|` at the same point.
    pub fn weak_momentum_with(&self, x: f64, z: f64, node_floor: f64) -> Result<f64> {
        if !x.is_finite() || !z.is_finite() {
            return Err(Error::rejected("flow point must be finite"));
        }
        let (terms, centers, q) = self.terms(x, z);
        let psi: Complex64 = terms.iter().sum();
        let envelope: f64 = terms.iter().map(|t| t.norm()).sum();
        if !(psi.norm() > node_floor * envelope) {
            return Err(Error::Node { x, z });
        }
        let ik = Complex64::i() * self.wavenumber;
        let dpsi: Complex64 = terms
            .iter()
            .zip(centers)
            .map(|(&t, c)| t * ik * (x - c) / q)
            .sum();
        Ok((dpsi / psi).im / self.wavenumber)
    }

    /// `int_a^b |psi(x, z)|^2 dx`.
    pub fn probability_between(&self, a: f64, b: f64, z: f64) -> f64 {
        integrate(|x| self.intensity(x, z), a, b, 1e-12)
    }

    /// Integral of `|psi|^2` over all x, truncated where every beam is below e^-288.
    pub fn total_probability(&self, z: f64) -> f64 {
        let reach = 0.5 * self.slit_separation + 12.0 * self.beam_width(z);
        self.probability_between(-reach, 0.0, z) + self.probability_between(0.0, reach, z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowLine {
    pub start_x: f64,
    /// `(x, z)` pairs with strictly increasing `z`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    /// Local error allowed per unit `z`.
    pub tolerance: f64,
    /// Number of common output stations, including both ends.
    pub stations: usize,
    pub node_floor: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            stations: 101,
            node_floor: DEFAULT_NODE_FLOOR,
        }
    }
}

/// Outcome of one line; failures do not affect the other lines.
pub type LineResult = Result<FlowLine>;

pub fn integrate_flowlines(
    system: &BeamSystem,
    start_xs: &[f64],
    z0: f64,
    z1: f64,
    tolerance: f64,
) -> Result<Vec<LineResult>> {
    let options = FlowOptions {
        tolerance,
        ..FlowOptions::default()
    };
    integrate_flowlines_with(system, start_xs, z0, z1, &options)
}

/// Lines come back sorted by `start_x`, all sampled at the same stations.
pub fn integrate_flowlines_with(
    system: &BeamSystem,
    start_xs: &[f64],
    z0: f64,
    z1: f64,
    options: &FlowOptions,
) -> Result<Vec<LineResult>> {
    if !(z0 >= 0.0) || !z0.is_finite() || !z1.is_finite() || !(z1 > z0) {
        return Err(Error::rejected("need 0 <= z0 < z1"));
    }
    if !(options.tolerance > 0.0) {
        return Err(Error::rejected("tolerance must be positive"));
    }
    if options.stations < 2 {
        return Err(Error::rejected("need at least two stations"));
    }
    if start_xs.is_empty() {
        return Err(Error::rejected("no start positions"));
    }
    if start_xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::rejected("start positions must be finite"));
    }
    let mut starts = start_xs.to_vec();
    starts.sort_by(f64::total_cmp);
    if starts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::rejected("start positions must be distinct"));
    }
    let stations: Vec<f64> = (0..options.stations)
        .map(|i| {
            if i + 1 == options.stations {
                z1
            } else {
                z0 + (z1 - z0) * i as f64 / (options.stations - 1) as f64
            }
        })
        .collect();
    Ok(starts
        .par_iter()
        .map(|&x| integrate_line(system, x, &stations, options))
        .collect())
}

/// One RK4 step of `dx/dz = v`.
fn rk4(system: &BeamSystem, x: f64, z: f64, h: f64, floor: f64) -> Result<f64> {
    let v = |x, z| system.weak_momentum_with(x, z, floor);
    let k1 = v(x, z)?;
    let k2 = v(x + 0.5 * h * k1, z + 0.5 * h)?;
    let k3 = v(x + 0.5 * h * k2, z + 0.5 * h)?;
    let k4 = v(x + h * k3, z + h)?;
    Ok(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Step doubling: returns the extrapolated end point and the error estimate.
fn doubled_step(system: &BeamSystem, x: f64, z: f64, h: f64, floor: f64) -> Result<(f64, f64)> {
    let full = rk4(system, x, z, h, floor)?;
    let mid = rk4(system, x, z, 0.5 * h, floor)?;
    let halves = rk4(system, mid, z + 0.5 * h, 0.5 * h, floor)?;
    let diff = (halves - full) / 15.0;
    Ok((halves + diff, diff.abs()))
}

fn integrate_line(
    system: &BeamSystem,
    start_x: f64,
    stations: &[f64],
    options: &FlowOptions,
) -> LineResult {
    let fail = |reason: String| Error::IntegrationFailed { start_x, reason };
    let span = stations[stations.len() - 1] - stations[0];
    let min_step = span * 1e-15;
    let tol = options.tolerance;
    let mut x = start_x;
    let mut z = stations[0];
    let mut h = stations[1] - stations[0];
    let mut points = Vec::with_capacity(stations.len());
    points.push((x, z));
    for &target in &stations[1..] {
        while z < target {
            let remaining = target - z;
            let mut step = h.min(remaining);
            let mut halvings = 0;
            loop {
                match doubled_step(system, x, z, step, options.node_floor) {
                    Err(Error::Node { x: nx, z: nz }) => {
                        halvings += 1;
                        if halvings > MAX_HALVINGS {
                            return Err(fail(format!("node near x={nx}, z={nz}")));
                        }
                        step *= 0.5;
                    }
                    Err(e) => return Err(fail(e.to_string())),
                    Ok((x_new, err)) if err <= tol * step => {
                        z = if step == remaining { target } else { z + step };
                        x = x_new;
                        let grow = if err > 0.0 {
                            (0.9 * (tol * step / err).powf(0.25)).min(4.0)
                        } else {
                            4.0
                        };
                        // A step clamped to a station says nothing about the natural size.
                        h = if step == remaining {
                            h.max(step * grow)
                        } else {
                            step * grow
                        };
                        break;
                    }
                    Ok((_, err)) => {
                        step *= (0.9 * (tol * step / err).powf(0.25)).clamp(0.1, 0.5);
                    }
                }
                if step < min_step {
                    return Err(fail(format!("step size underflow at z={z}")));
                }
            }
            if !x.is_finite() {
                return Err(fail(format!("non-finite position at z={z}")));
            }
        }
        points.push((x, target));
    }
    Ok(FlowLine { start_x, points })
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson with relative tolerance against the running whole-interval estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Seed with a coarse composite rule so narrow features are not missed.
    let pieces = 64;
    let width = (b - a) / pieces as f64;
    let nodes: Vec<f64> = (0..=2 * pieces)
        .map(|i| f(a + 0.5 * width * i as f64))
        .collect();
    let coarse: f64 = (0..pieces)
        .map(|i| simpson(nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2], 0.0, width))
        .sum();
    let scale = coarse.abs();
    (0..pieces)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == pieces { b } else { lo + width };
            let whole = simpson(nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2], lo, hi);
            refine(
                &f,
                lo,
                hi,
                nodes[2 * i],
                nodes[2 * i + 1],
                nodes[2 * i + 2],
                whole,
                rel_tol * scale / pieces as f64,
                QUAD_MAX_DEPTH,
            )
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// The 21 default starts spanning `±3 d`.
pub fn default_starts(system: &BeamSystem) -> Vec<f64> {
    let reach = 3.0 * system.slit_separation();
    let mut xs = linspace(-reach, reach, 21);
    xs[10] = 0.0;
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(center_side: usize) -> BeamSystem {
        let mut amps = [Complex64::new(0.0, 0.0); 2];
        amps[center_side] = Complex64::new(1.0, 0.0);
        BeamSystem::new(4.0, 1.0, 20.0, 0.0, amps).unwrap()
    }

    #[test]
    fn rejects_bad_systems() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        assert!(BeamSystem::new(0.0, 1.0, 20.0, 0.0, [one, one]).is_err());
        assert!(BeamSystem::new(4.0, -1.0, 20.0, 0.0, [one, one]).is_err());
        assert!(BeamSystem::new(4.0, 1.0, 0.0, 0.0, [one, one]).is_err());
        assert!(BeamSystem::new(4.0, 1.0, 20.0, 0.0, [zero, zero]).is_err());
    }

    #[test]
    fn single_beam_peaks_on_its_axis() {
        let s = single(1);
        for z in [0.0, 5.0, 30.0] {
            let peak = s.field_at(2.0, z).norm();
            for i in 1..200 {
                let dx = i as f64 * 0.05;
                assert!(s.field_at(2.0 + dx, z).norm() < peak);
                assert!(s.field_at(2.0 - dx, z).norm() < peak);
            }
            assert!(s.weak_momentum(2.0, z).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn gaussian_norm_is_conserved() {
        let s = single(0);
        let n0 = s.total_probability(0.0);
        let oracle = (std::f64::consts::PI / 2.0).sqrt();
        assert!((n0 - oracle).abs() < 1e-10 * oracle);
        assert!((s.total_probability(40.0) - n0).abs() < 1e-10 * n0);
    }

    #[test]
    fn symmetric_field_is_flat_on_axis() {
        let s = BeamSystem::default_geometry();
        let h = 1e-5;
        for z in [0.0, 1.0, 10.0, 50.0] {
            let slope = (s.intensity(h, z) - s.intensity(-h, z)) / (2.0 * h);
            assert!(slope.abs() <= 1e-8);
            assert_eq!(s.weak_momentum(0.0, z).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_matches_field_difference() {
        let s = BeamSystem::new(
            4.0,
            1.0,
            20.0,
            0.7,
            [Complex64::new(0.6, 0.1), Complex64::new(0.8, 0.0)],
        )
        .unwrap();
        let h = 1e-4;
        for &(x, z) in &[(0.3, 2.0), (-1.7, 15.0), (3.9, 40.0)] {
            let numeric = (8.0 * (s.field_at(x + h, z) - s.field_at(x - h, z))
                - (s.field_at(x + 2.0 * h, z) - s.field_at(x - 2.0 * h, z)))
                / (12.0 * h);
            let analytic = s.field_derivative(x, z);
            assert!((numeric - analytic).norm() <= 1e-8 * analytic.norm().max(1e-3));
        }
    }

    #[test]
    fn far_field_fringe_spacing() {
        // Fringes per envelope width scale like d / w, so wide slits keep the
        // envelope from dragging the maxima.
        let s = BeamSystem::symmetric(20.0, 1.0, 20.0).unwrap();
        let z = 100.0 * s.rayleigh_range();
        let oracle = 2.0 * std::f64::consts::PI * z / (s.wavenumber() * s.slit_separation());
        let maxima = intensity_maxima(&s, z, -1.6 * oracle, 1.6 * oracle);
        assert!(maxima.len() >= 3, "{maxima:?}");
        let centre = maxima
            .iter()
            .position(|m| m.abs() < 0.25 * oracle)
            .expect("central maximum");
        let spacing = maxima[centre + 1] - maxima[centre];
        assert!(
            (spacing - oracle).abs() <= 0.01 * oracle,
            "{spacing} vs {oracle}"
        );
    }

    fn intensity_maxima(s: &BeamSystem, z: f64, lo: f64, hi: f64) -> Vec<f64> {
        let xs = linspace(lo, hi, 4001);
        let ys: Vec<f64> = xs.iter().map(|&x| s.intensity(x, z)).collect();
        let mut out = Vec::new();
        for i in 1..xs.len() - 1 {
            if ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] {
                // Golden-section refinement on the bracket.
                let (mut a, mut b) = (xs[i - 1], xs[i + 1]);
                let r = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let c = b - r * (b - a);
                    let d = a + r * (b - a);
                    if s.intensity(c, z) > s.intensity(d, z) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        out
    }

    #[test]
    fn single_beam_far_field_velocity() {
        let s = single(1);
        let z = 200.0 * s.rayleigh_range();
        for offset in [3.0, -10.0, 40.0] {
            let x = 2.0 + offset;
            let v = s.weak_momentum(x, z).unwrap();
            let oracle = offset / z;
            assert!((v - oracle).abs() <= 0.01 * oracle.abs());
        }
    }

    #[test]
    fn antiphase_slits_have_an_axial_node() {
        let one = Complex64::new(1.0, 0.0);
        let s = BeamSystem::new(4.0, 1.0, 20.0, std::f64::consts::PI, [one, one]).unwrap();
        assert!(matches!(s.weak_momentum(0.0, 3.0), Err(Error::Node { .. })));
        let lines = integrate_flowlines(&s, &[-1.0, 0.0, 1.0], 0.0, 5.0, 1e-9).unwrap();
        assert!(
            matches!(lines[1], Err(Error::IntegrationFailed { start_x, .. }) if start_x == 0.0)
        );
        assert!(lines[0].is_ok() && lines[2].is_ok());
    }

    #[test]
    fn integration_validates_inputs() {
        let s = BeamSystem::default_geometry();
        assert!(integrate_flowlines(&s, &[], 0.0, 1.0, 1e-9).is_err());
        assert!(integrate_flowlines(&s, &[0.0, 0.0], 0.0, 1.0, 1e-9).is_err());
        assert!(integrate_flowlines(&s, &[0.0], 1.0, 1.0, 1e-9).is_err());
        assert!(integrate_flowlines(&s, &[0.0], -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn single_beam_lines_follow_the_hyperbola() {
        // Exact flow lines of one beam: x(z) = c + (x0 - c) sqrt(1 + (z / z_R)^2).
        let s = single(0);
        let zr = s.rayleigh_range();
        let lines = integrate_flowlines(&s, &[-3.5, -2.0, 0.5], 0.0, 50.0, 1e-11).unwrap();
        for line in lines {
            let line = line.unwrap();
            for &(x, z) in &line.points {
                let oracle = -2.0 + (line.start_x + 2.0) * (1.0 + (z / zr).powi(2)).sqrt();
                assert!((x - oracle).abs() < 1e-8, "{x} vs {oracle}");
            }
        }
    }

    #[test]
    fn lines_are_sorted_and_share_stations() {
        let s = BeamSystem::default_geometry();
        let lines = integrate_flowlines(&s, &[1.0, -1.0, 0.5], 0.0, 10.0, 1e-9).unwrap();
        let starts: Vec<f64> = lines.iter().map(|l| l.as_ref().unwrap().start_x).collect();
        assert_eq!(starts, vec![-1.0, 0.5, 1.0]);
        let zs: Vec<f64> = lines[0]
            .as_ref()
            .unwrap()
            .points
            .iter()
            .map(|p| p.1)
            .collect();
        for l in &lines {
            let l = l.as_ref().unwrap();
            assert_eq!(l.points.iter().map(|p| p.1).collect::<Vec<_>>(), zs);
        }
        assert!(zs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*zs.last().unwrap(), 10.0);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn velocity_is_odd_for_symmetric_slits(x in -12.0f64..12.0, z in 0.0f64..50.0) {
                let s = BeamSystem::default_geometry();
                if let (Ok(a), Ok(b)) = (s.weak_momentum(x, z), s.weak_momentum(-x, z)) {
                    prop_assert_eq!(a, -b);
                }
            }

            #[test]
            fn velocity_matches_analytic_derivative(x in -10.0f64..10.0, z in 0.0f64..50.0, phase in 0.0f64..6.0) {
                let one = Complex64::new(1.0, 0.0);
                let s = BeamSystem::new(4.0, 1.0, 20.0, phase, [one, Complex64::new(0.5, 0.2)]).unwrap();
                let psi = s.field_at(x, z);
                prop_assume!(psi.norm() > 1e-200);
                let direct = (s.field_derivative(x, z) / psi).im / s.wavenumber();
                if let Ok(v) = s.weak_momentum(x, z) {
                    prop_assert!((v - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
                }
            }
        }
    }
}
