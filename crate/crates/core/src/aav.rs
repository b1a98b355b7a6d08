//! The spin-1/2 Stern-Gerlach amplification scenario.
//!
//! A spin is preselected along `(cos a, 0, sin a)`, weakly coupled through
//! `sigma_z` to the momentum of a Gaussian pointer and postselected along a
//! chosen axis (by default +x). The screen reads the pointer momentum scaled
//! by a lever arm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{pauli, spin_state, Axis, HermitianOperator, StateVector};
use crate::pointer::{gaussian, Grid, Moments, PointerWave};
use crate::protocol::{self, couple_weak, postselect_with, Floors, WeakValue};
use crate::rng::StreamFactory;

/// Above this coupling-to-spread ratio the scenario is flagged as outside the weak regime.
pub const WEAK_RATIO_LIMIT: f64 = 0.1;

/// Trials per reduction block in [`run_ensemble`]; fixed so results do not
/// depend on how blocks are scheduled.
const ENSEMBLE_BLOCK: u64 = 1 << 14;

fn default_post_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn default_lever_arm() -> f64 {
    1.0
}

fn default_trials() -> u64 {
    100_000
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub alpha_deg: f64,
    #[serde(default = "default_post_axis")]
    pub post_axis: [f64; 3],
    pub g: f64,
    pub sigma_p: f64,
    /// Defaults to [`Grid::for_sigma_p`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_lever_arm")]
    pub lever_arm: f64,
    #[serde(default = "default_trials")]
    pub n_trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(alpha_deg: f64, g: f64, sigma_p: f64) -> Self {
        Self {
            alpha_deg,
            post_axis: default_post_axis(),
            g,
            sigma_p,
            grid: None,
            lever_arm: default_lever_arm(),
            n_trials: default_trials(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha_deg.is_finite() {
            return Err(Error::rejected("alpha_deg must be finite"));
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::rejected("g must be positive"));
        }
        if !(self.sigma_p > 0.0) || !self.sigma_p.is_finite() {
            return Err(Error::rejected("sigma_p must be positive"));
        }
        if self.n_trials < 1 {
            return Err(Error::rejected("n_trials must be at least 1"));
        }
        if !(self.lever_arm > 0.0) || !self.lever_arm.is_finite() {
            return Err(Error::rejected("lever_arm must be positive"));
        }
        Ok(())
    }

    pub fn weak_ratio(&self) -> f64 {
        self.g / self.sigma_p
    }

    pub fn outside_weak_regime(&self) -> bool {
        self.weak_ratio() > WEAK_RATIO_LIMIT
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.grid {
            Some(GridConfig { n, x_min, x_max }) => Grid::new(n, x_min, x_max),
            None => Grid::for_sigma_p(self.sigma_p),
        }
    }
}

/// Everything needed to execute the scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub pre: StateVector,
    pub post: StateVector,
    pub observable: HermitianOperator,
    pub pointer: PointerWave,
    pub weak_ratio: f64,
    pub weak_warning: bool,
}

pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let pre = spin_state(config.alpha_deg)?;
    let post = pauli(Axis::Vector(config.post_axis))?.eigenvector(0)?;
    let observable = pauli(Axis::Z)?;
    let grid = config.grid()?;
    let pointer = gaussian(&grid, 0.0, 0.0, config.sigma_p)?;
    let reach = config.g * observable.spectral_radius();
    pointer.translate_momentum(reach)?;
    pointer.translate_momentum(-reach)?;
    Ok(Scenario {
        config: config.clone(),
        pre,
        post,
        observable,
        pointer,
        weak_ratio: config.weak_ratio(),
        weak_warning: config.outside_weak_regime(),
    })
}

impl Scenario {
    /// `<post|sigma_z|pre> / <post|pre>`.
    pub fn analytic_weak_value(&self) -> Result<WeakValue> {
        protocol::weak_value(&self.pre, &self.post, &self.observable)
    }

    pub fn overlap_abs(&self) -> f64 {
        self.post.inner(&self.pre).map(|z| z.norm()).unwrap_or(0.0)
    }

    /// `|<post|pre>|^2`, the postselection probability as `g -> 0`.
    pub fn analytic_post_prob(&self) -> f64 {
        self.overlap_abs().powi(2)
    }
}

/// Deterministic couple, postselect and readout.
#[derive(Clone, Debug)]
pub struct ExactRun {
    pub initial: Moments,
    pub conditional: Moments,
    pub estimate: WeakValue,
    pub post_prob: f64,
    pub conditional_wave: PointerWave,
}

impl ExactRun {
    pub fn shift_p(&self) -> f64 {
        self.conditional.mean_p - self.initial.mean_p
    }
}

pub fn run_exact(scenario: &Scenario) -> Result<ExactRun> {
    let g = scenario.config.g;
    let joint = couple_weak(&scenario.pre, &scenario.observable, &scenario.pointer, g)?;
    let selected = postselect_with(&joint, &scenario.post, Floors::default().probability)?;
    let initial = scenario.pointer.moments();
    let conditional = selected.conditional.moments();
    let kappa = protocol::IMAG_QUADRATURE_GAIN / initial.var_x;
    Ok(ExactRun {
        initial,
        conditional,
        estimate: WeakValue {
            re: (conditional.mean_p - initial.mean_p) / g,
            im: kappa * (conditional.mean_x - initial.mean_x) / g,
        },
        post_prob: selected.probability,
        conditional_wave: selected.conditional,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n_attempted: u64,
    pub n_postselected: u64,
    pub post_rate: f64,
    /// Exact postselection probability used for the Bernoulli draws.
    pub post_prob_exact: f64,
    /// Mean screen coordinate (momentum times lever arm); `None` when nothing was postselected.
    pub screen_mean: Option<f64>,
    pub screen_stderr: Option<f64>,
    /// Mean of the position quadrature read on the same postselected trials.
    pub position_mean: Option<f64>,
    pub position_stderr: Option<f64>,
    pub wv_estimate: Option<WeakValue>,
    pub wv_stderr: Option<WeakValue>,
    pub exact_conditional_mean_p: Option<f64>,
}

impl EnsembleStats {
    fn empty(n_attempted: u64, post_prob_exact: f64) -> Self {
        Self {
            n_attempted,
            n_postselected: 0,
            post_rate: 0.0,
            post_prob_exact,
            screen_mean: None,
            screen_stderr: None,
            position_mean: None,
            position_stderr: None,
            wv_estimate: None,
            wv_stderr: None,
            exact_conditional_mean_p: None,
        }
    }
}

/// Shifted first and second sums for one block of trials.
#[derive(Clone, Copy, Debug, Default)]
struct Partial {
    count: u64,
    screen: f64,
    screen_sq: f64,
    position: f64,
    position_sq: f64,
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        Partial {
            count: self.count + other.count,
            screen: self.screen + other.screen,
            screen_sq: self.screen_sq + other.screen_sq,
            position: self.position + other.position,
            position_sq: self.position_sq + other.position_sq,
        }
    }
}

fn pairwise_sum(parts: &[Partial]) -> Partial {
    match parts.len() {
        0 => Partial::default(),
        1 => parts[0],
        n => {
            let (left, right) = parts.split_at(n / 2);
            pairwise_sum(left).merge(pairwise_sum(right))
        }
    }
}

fn mean_and_stderr(count: u64, shift: f64, sum: f64, sum_sq: f64) -> (f64, Option<f64>) {
    let n = count as f64;
    let mean = shift + sum / n;
    if count < 2 {
        return (mean, None);
    }
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    (mean, Some((var / n).sqrt()))
}

/// Monte Carlo screen ensemble. Trial `i` draws from stream `i` of the seed:
/// a Bernoulli postselection with the exact probability, then on success one
/// screen reading from the conditional momentum density and one position
/// reading from the conditional position density.
pub fn run_ensemble(scenario: &Scenario) -> Result<EnsembleStats> {
    let cfg = &scenario.config;
    let exact = match run_exact(scenario) {
        Ok(run) => run,
        Err(Error::PostselectionFailed { probability }) => {
            return Ok(EnsembleStats::empty(cfg.n_trials, probability));
        }
        Err(e) => return Err(e),
    };
    let p_post = exact.post_prob;
    let momentum_sampler = exact.conditional_wave.to_momentum().sampler();
    let position_sampler = exact.conditional_wave.position_sampler();
    let screen_shift = exact.conditional.mean_p * cfg.lever_arm;
    let position_shift = exact.conditional.mean_x;
    let factory = StreamFactory::new(cfg.seed);

    let n_blocks = cfg.n_trials.div_ceil(ENSEMBLE_BLOCK);
    let partials: Vec<Partial> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * ENSEMBLE_BLOCK;
            let end = (start + ENSEMBLE_BLOCK).min(cfg.n_trials);
            let mut acc = Partial::default();
            for i in start..end {
                let mut rng = factory.stream(i);
                if rng.uniform() >= p_post {
                    continue;
                }
                let s = momentum_sampler.sample(&mut rng) * cfg.lever_arm - screen_shift;
                let x = position_sampler.sample(&mut rng) - position_shift;
                acc.count += 1;
                acc.screen += s;
                acc.screen_sq += s * s;
                acc.position += x;
                acc.position_sq += x * x;
            }
            acc
        })
        .collect();
    let total = pairwise_sum(&partials);

    if total.count == 0 {
        let mut stats = EnsembleStats::empty(cfg.n_trials, p_post);
        stats.exact_conditional_mean_p = Some(exact.conditional.mean_p);
        return Ok(stats);
    }
    let (screen_mean, screen_stderr) =
        mean_and_stderr(total.count, screen_shift, total.screen, total.screen_sq);
    let (position_mean, position_stderr) = mean_and_stderr(
        total.count,
        position_shift,
        total.position,
        total.position_sq,
    );
    let g = cfg.g;
    let kappa = protocol::IMAG_QUADRATURE_GAIN / exact.initial.var_x;
    let wv_estimate = WeakValue {
        re: screen_mean / (cfg.lever_arm * g),
        im: kappa * (position_mean - exact.initial.mean_x) / g,
    };
    let wv_stderr = screen_stderr.zip(position_stderr).map(|(s, x)| WeakValue {
        re: s / (cfg.lever_arm * g),
        im: (kappa * x / g).abs(),
    });
    Ok(EnsembleStats {
        n_attempted: cfg.n_trials,
        n_postselected: total.count,
        post_rate: total.count as f64 / cfg.n_trials as f64,
        post_prob_exact: p_post,
        screen_mean: Some(screen_mean),
        screen_stderr,
        position_mean: Some(position_mean),
        position_stderr,
        wv_estimate: Some(wv_estimate),
        wv_stderr,
        exact_conditional_mean_p: Some(exact.conditional.mean_p),
    })
}

/// Split of the exact conditional momentum shift.
///
/// `branch_term` is the mean of the eigenvalue kicks `g a_i` weighted by the
/// preselected branch populations `|P_i pre|^2`; it can never leave the
/// spectrum. `interference_term` is the remainder, produced by postselection
/// reweighting the initial pointer distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftDecomposition {
    pub total_shift: f64,
    pub branch_term: f64,
    pub interference_term: f64,
    /// `g * max |a_i|`.
    pub bound: f64,
    pub bound_check: bool,
}

pub fn decompose_shift(scenario: &Scenario) -> Result<ShiftDecomposition> {
    let exact = run_exact(scenario)?;
    let g = scenario.config.g;
    let total_shift = exact.shift_p();
    let branch_term = scenario
        .observable
        .eigenvalues()
        .iter()
        .zip(scenario.observable.projectors())
        .map(|(a, p)| Ok(p.apply(&scenario.pre)?.norm_sqr() * g * a))
        .sum::<Result<f64>>()?;
    let bound = g * scenario.observable.spectral_radius();
    Ok(ShiftDecomposition {
        total_shift,
        branch_term,
        interference_term: total_shift - branch_term,
        bound,
        bound_check: branch_term.abs() <= bound * (1.0 + 1e-12),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha_deg: f64,
    pub overlap_abs: f64,
    /// `None` when pre and post are orthogonal.
    pub aw_analytic: Option<WeakValue>,
    pub shift_over_g: Option<f64>,
    pub post_prob: Option<f64>,
    /// True when `g * max(|A_w|, 1) / sigma_p <= 0.1`.
    pub weak_flag: bool,
    /// Error text for rows whose pipeline failed.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Monotonicity {
    /// Open interval of angles examined, in degrees.
    pub window: (f64, f64),
    pub rows_checked: usize,
    pub shift_strictly_increasing: bool,
    pub post_prob_strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub monotonicity: Monotonicity,
}

fn sweep_row(base: &ScenarioConfig, alpha_deg: f64) -> SweepRow {
    let mut config = base.clone();
    config.alpha_deg = alpha_deg;
    let scenario = match build_scenario(&config) {
        Ok(s) => s,
        Err(e) => {
            return SweepRow {
                alpha_deg,
                overlap_abs: f64::NAN,
                aw_analytic: None,
                shift_over_g: None,
                post_prob: None,
                weak_flag: false,
                failure: Some(e.to_string()),
            }
        }
    };
    let aw = scenario.analytic_weak_value();
    let exact = run_exact(&scenario);
    let amplitude = aw
        .as_ref()
        .map(|w| w.to_complex().norm())
        .unwrap_or(f64::INFINITY);
    let weak_flag = config.g * amplitude.max(scenario.observable.spectral_radius())
        / config.sigma_p
        <= WEAK_RATIO_LIMIT;
    let failure = match (&aw, &exact) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    SweepRow {
        alpha_deg,
        overlap_abs: scenario.overlap_abs(),
        aw_analytic: aw.ok(),
        shift_over_g: exact.as_ref().ok().map(|r| r.shift_p() / config.g),
        post_prob: exact.as_ref().ok().map(|r| r.post_prob),
        weak_flag,
        failure,
    }
}

/// One row per angle, in input order. Monotonicity is judged on the distinct
/// angles inside `(90°, 180°)` whose pipeline succeeded.
pub fn sweep_overlap(base: &ScenarioConfig, alphas: &[f64]) -> SweepTable {
    let rows: Vec<SweepRow> = alphas.par_iter().map(|&a| sweep_row(base, a)).collect();
    let window = (90.0, 180.0);
    let mut inside: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.alpha_deg > window.0 && r.alpha_deg < window.1)
        .filter(|r| r.shift_over_g.is_some() && r.post_prob.is_some())
        .collect();
    inside.sort_by(|a, b| a.alpha_deg.total_cmp(&b.alpha_deg));
    inside.dedup_by(|a, b| a.alpha_deg == b.alpha_deg);
    let shift_strictly_increasing = inside
        .windows(2)
        .all(|w| w[1].shift_over_g.unwrap() > w[0].shift_over_g.unwrap());
    let post_prob_strictly_decreasing = inside
        .windows(2)
        .all(|w| w[1].post_prob.unwrap() < w[0].post_prob.unwrap());
    SweepTable {
        monotonicity: Monotonicity {
            window,
            rows_checked: inside.len(),
            shift_strictly_increasing,
            post_prob_strictly_decreasing,
        },
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AMPLIFIED: f64 = 178.854;

    fn scenario(alpha: f64, ratio: f64) -> Scenario {
        build_scenario(&ScenarioConfig::new(alpha, ratio, 1.0)).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::new(120.0, 0.01, 1.0);
        assert!(c.validate().is_ok());
        assert!(!c.outside_weak_regime());
        c.g = 0.2;
        assert!(c.outside_weak_regime());
        c.g = 0.0;
        assert!(build_scenario(&c).is_err());
        let mut c = ScenarioConfig::new(f64::NAN, 0.01, 1.0);
        assert!(c.validate().is_err());
        c.alpha_deg = 10.0;
        c.n_trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn build_scenario_examples() {
        let s = scenario(90.0, 0.01);
        assert!(s.pre.max_abs_diff(&StateVector::z_plus()) < 1e-15);

        let s = scenario(AMPLIFIED, 0.001);
        assert!((s.analytic_weak_value().unwrap().re - 100.0).abs() < 0.1);
        assert!((s.analytic_post_prob() - 1.0e-4).abs() < 2e-6);

        let alpha: f64 = 130.0;
        let mut c = ScenarioConfig::new(alpha, 0.01, 1.0);
        c.post_axis = [alpha.to_radians().cos(), 0.0, alpha.to_radians().sin()];
        let s = build_scenario(&c).unwrap();
        let expectation = s.observable.expectation(&s.pre).unwrap();
        assert!((expectation - alpha.to_radians().sin()).abs() < 1e-12);
        assert!((s.analytic_weak_value().unwrap().re - expectation).abs() < 1e-12);
    }

    #[test]
    fn build_scenario_rejects_grid_misfit() {
        let mut c = ScenarioConfig::new(120.0, 0.01, 1.0);
        c.grid = Some(GridConfig {
            n: 128,
            x_min: -2.0,
            x_max: 2.0,
        });
        assert!(matches!(build_scenario(&c), Err(Error::RejectedInput(_))));
        let c = ScenarioConfig::new(120.0, 96.0, 1.0);
        assert!(matches!(build_scenario(&c), Err(Error::RejectedInput(_))));
    }

    #[test]
    fn run_exact_examples() {
        let s = scenario(90.0, 0.01);
        let r = run_exact(&s).unwrap();
        assert!((r.conditional.mean_p - 0.01).abs() < 1e-9);

        let r = run_exact(&scenario(120.0, 0.005)).unwrap();
        assert!((r.conditional.mean_p / 0.005 - 1.732).abs() < 0.02);

        for alpha in [20.0, 100.0, 135.0, 160.0] {
            let a: f64 = alpha;
            let mut c = ScenarioConfig::new(a, 0.01, 1.0);
            c.post_axis = [a.to_radians().cos(), 0.0, a.to_radians().sin()];
            let r = run_exact(&build_scenario(&c).unwrap()).unwrap();
            let err = (r.conditional.mean_p / 0.01 - a.to_radians().sin()).abs();
            assert!(err < 1e-5, "alpha {a}: {err}");
        }
    }

    #[test]
    fn exact_shift_tracks_tan_half_in_weak_limit() {
        let mut alpha: f64 = 0.5;
        while alpha <= 179.5 {
            let oracle = (alpha.to_radians() / 2.0).tan();
            // Keep g |A_w| / sigma_p inside the weak regime at every angle.
            let r = run_exact(&scenario(alpha, 0.01 / oracle.max(1.0))).unwrap();
            let rel = (r.estimate.re - oracle).abs() / oracle;
            assert!(rel < 0.01, "alpha {alpha}: rel {rel}");
            alpha += 0.5;
        }
    }

    #[test]
    fn weak_value_times_overlap_is_matrix_element() {
        for k in 1..180 {
            let s = scenario(k as f64, 0.01);
            let aw = s.analytic_weak_value().unwrap().to_complex();
            let overlap = s.post.inner(&s.pre).unwrap();
            let element = s.post.inner(&s.observable.apply(&s.pre).unwrap()).unwrap();
            assert!((aw * overlap - element).norm() <= 1e-12);
        }
    }

    #[test]
    fn decompose_examples() {
        let alpha: f64 = 120.0;
        let g = 1e-4;
        let mut c = ScenarioConfig::new(alpha, g, 1.0);
        c.post_axis = [alpha.to_radians().cos(), 0.0, alpha.to_radians().sin()];
        let d = decompose_shift(&build_scenario(&c).unwrap()).unwrap();
        assert!(
            d.interference_term.abs() <= 1e-9 * g,
            "{}",
            d.interference_term / g
        );
        assert!((d.branch_term - g * alpha.to_radians().sin()).abs() < 1e-15);

        let d = decompose_shift(&scenario(90.0, 0.01)).unwrap();
        assert!(d.interference_term.abs() < 1e-9 * 0.01);
        assert!((d.branch_term - 0.01).abs() < 1e-15);

        let g = 0.001;
        let d = decompose_shift(&scenario(AMPLIFIED, g)).unwrap();
        assert!(
            (d.total_shift / g - 100.0).abs() < 1.0,
            "{}",
            d.total_shift / g
        );
        assert!(d.branch_term.abs() <= g && d.bound_check);
        let ratio = d.interference_term / g;
        assert!((98.0..=101.0).contains(&ratio), "{ratio}");
        assert!((d.total_shift - d.branch_term - d.interference_term).abs() < 1e-12);
    }

    #[test]
    fn branch_bound_holds_on_degree_grid() {
        for k in 0..360 {
            let s = scenario(k as f64, 0.001);
            if let Ok(d) = decompose_shift(&s) {
                assert!(d.bound_check && d.branch_term.abs() <= 0.001 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sweep_examples() {
        let base = ScenarioConfig::new(90.0, 0.001, 1.0);
        let alphas = [90.0, 120.0, 150.0, 170.0, AMPLIFIED];
        let table = sweep_overlap(&base, &alphas);
        let aw_oracle: Vec<f64> = alphas
            .iter()
            .map(|a: &f64| (a.to_radians() / 2.0).tan())
            .collect();
        let prob_oracle: Vec<f64> = alphas
            .iter()
            .map(|a: &f64| (a.to_radians() / 2.0).cos().powi(2))
            .collect();
        let stated_aw = [1.0, 1.732, 3.732, 11.43, 100.0];
        let stated_prob = [0.5, 0.25, 0.0670, 7.60e-3, 1.0e-4];
        for (i, row) in table.rows.iter().enumerate() {
            let aw = row.aw_analytic.unwrap().re;
            assert!((aw - aw_oracle[i]).abs() <= 1e-9 * aw_oracle[i]);
            assert!((aw - stated_aw[i]).abs() <= 0.005 * stated_aw[i]);
            let p = row.post_prob.unwrap();
            assert!((p - prob_oracle[i]).abs() <= 0.01 * prob_oracle[i], "{p}");
            assert!((p - stated_prob[i]).abs() <= 0.01 * stated_prob[i], "{p}");
            assert!(row.failure.is_none());
        }
        assert!(table.monotonicity.shift_strictly_increasing);
        assert!(table.monotonicity.post_prob_strictly_decreasing);
        assert_eq!(table.monotonicity.rows_checked, 4);
    }

    #[test]
    fn sweep_duplicates_and_failures() {
        let base = ScenarioConfig::new(90.0, 0.001, 1.0);
        let table = sweep_overlap(&base, &[150.0, 150.0, 180.0]);
        assert_eq!(table.rows[0], table.rows[1]);
        let last = &table.rows[2];
        assert!(last.aw_analytic.is_none() && last.failure.is_some());
        // With finite g the kick itself still lets a few particles through.
        assert!(last.post_prob.unwrap() > 0.0);
    }

    #[test]
    fn ensemble_eigenstate() {
        let mut c = ScenarioConfig::new(90.0, 0.05, 1.0);
        c.n_trials = 100_000;
        c.seed = 3;
        let stats = run_ensemble(&build_scenario(&c).unwrap()).unwrap();
        let wv = stats.wv_estimate.unwrap();
        let se = stats.wv_stderr.unwrap();
        assert!((wv.re - 1.0).abs() <= 3.0 * se.re, "{} +- {}", wv.re, se.re);
        assert!((stats.post_rate - 0.5).abs() < 0.005);
        assert!(stats.screen_stderr.unwrap() > 0.0);
        assert_eq!(
            stats.post_rate,
            stats.n_postselected as f64 / stats.n_attempted as f64
        );
    }

    #[test]
    fn ensemble_is_deterministic_across_thread_counts() {
        let mut c = ScenarioConfig::new(150.0, 0.01, 1.0);
        c.n_trials = 50_000;
        c.seed = 42;
        let s = build_scenario(&c).unwrap();
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&s).unwrap())
        };
        let one = run_with(1);
        assert_eq!(one, run_with(4));
        assert_eq!(one, run_with(3));
    }

    #[test]
    fn ensemble_with_no_successes_is_explicit() {
        let mut c = ScenarioConfig::new(AMPLIFIED, 0.001, 1.0);
        c.n_trials = 1;
        c.seed = 0;
        let s = build_scenario(&c).unwrap();
        // Trial 0 of this seed fails postselection with probability ~1 - 1e-4.
        let stats = run_ensemble(&s).unwrap();
        if stats.n_postselected == 0 {
            assert!(stats.screen_mean.is_none() && stats.wv_estimate.is_none());
            assert_eq!(stats.post_rate, 0.0);
        }
    }

    #[test]
    fn ensemble_stderr_shrinks_like_root_n() {
        let mut c = ScenarioConfig::new(120.0, 0.05, 1.0);
        c.seed = 11;
        let mut errs = Vec::new();
        for n in [10_000u64, 100_000, 1_000_000] {
            c.n_trials = n;
            let s = build_scenario(&c).unwrap();
            let exact = run_exact(&s).unwrap().estimate.re;
            let stats = run_ensemble(&s).unwrap();
            let se = stats.wv_stderr.unwrap().re;
            assert!((stats.wv_estimate.unwrap().re - exact).abs() <= 4.0 * se);
            assert!(
                (stats.post_rate - stats.post_prob_exact).abs()
                    <= 3.0
                        * (stats.post_prob_exact * (1.0 - stats.post_prob_exact) / n as f64).sqrt()
            );
            errs.push(se);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 10f64.sqrt()).abs() < 0.2, "{ratio}");
        }
    }
}
