//! Measurement theory for pre- and post-selected ensembles: weak coupling,
//! postselection, ABL probabilities, weak values and projective measurement.
//!
//! All system states are normalized internally, so callers may pass
//! unnormalized kets or kets with arbitrary global phase.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{inner, HermitianOperator, Matrix, StateVector};
use crate::pointer::{gaussian, Grid, Moments, PointerWave};
use crate::rng::{RngStream, StreamFactory};

pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-12;
pub const DEFAULT_PROB_FLOOR: f64 = 1e-14;

/// Gain of the position quadrature: `Im A_w = GAIN / var_x * (shift_x / g)`.
///
/// Frozen from the `pre = x+`, `post = y+`, `A = sigma_z` run (`A_w = i`
/// exactly), where `shift_x / g -> -2 var_x` as `g -> 0` on the default
/// grid; see `imag_quadrature_gain_matches_oracle` in the tests.
pub const IMAG_QUADRATURE_GAIN: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Floors {
    pub overlap: f64,
    pub probability: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self {
            overlap: DEFAULT_OVERLAP_FLOOR,
            probability: DEFAULT_PROB_FLOOR,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeakValue {
    pub re: f64,
    pub im: f64,
}

impl WeakValue {
    fn from_complex(z: Complex64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::rejected("weak value is not finite"));
        }
        Ok(Self { re: z.re, im: z.im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Joint system-pointer state: `branches[i]` is the pointer wave attached to
/// computational basis ket `i`.
#[derive(Clone, Debug)]
pub struct CompositeState {
    branches: Vec<PointerWave>,
    labels: Vec<String>,
}

impl CompositeState {
    pub fn new(branches: Vec<PointerWave>, labels: Vec<String>) -> Result<Self> {
        if branches.is_empty() || branches.len() != labels.len() {
            return Err(Error::rejected("need one label per branch"));
        }
        let grid = *branches[0].grid();
        if branches.iter().any(|b| *b.grid() != grid) {
            return Err(Error::rejected("all branches must share one grid"));
        }
        Ok(Self { branches, labels })
    }

    /// `|system> (x) pointer`.
    pub fn product(system: &StateVector, pointer: &PointerWave) -> Result<Self> {
        let system = system.normalize()?;
        let branches = system
            .amplitudes()
            .iter()
            .map(|a| pointer.scaled(*a))
            .collect();
        Self::new(branches, basis_labels(system.dim()))
    }

    pub fn system_dim(&self) -> usize {
        self.branches.len()
    }

    pub fn branches(&self) -> &[PointerWave] {
        &self.branches
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn grid(&self) -> &Grid {
        self.branches[0].grid()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.branches.iter().map(PointerWave::norm_sqr).sum()
    }

    /// Reduced system density matrix `rho_ij = <branch_j|branch_i>`.
    pub fn reduced_system(&self) -> Result<Matrix> {
        let n = self.system_dim();
        let mut rows = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                rows[i][j] = self.branches[j].overlap(&self.branches[i])?;
            }
        }
        Matrix::from_rows(&rows)
    }

    /// Mean pointer momentum of the reduced pointer state.
    pub fn reduced_pointer_mean_p(&self) -> f64 {
        let total = self.norm_sqr();
        self.branches
            .iter()
            .map(|b| {
                let w = b.norm_sqr();
                if w == 0.0 {
                    0.0
                } else {
                    w * b.moments().mean_p
                }
            })
            .sum::<f64>()
            / total
    }
}

fn basis_labels(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("|{i}>")).collect()
}

fn check_dims(states: &[&StateVector], op: Option<&HermitianOperator>) -> Result<usize> {
    let dim = states[0].dim();
    if states.iter().any(|s| s.dim() != dim) || op.is_some_and(|o| o.dim() != dim) {
        return Err(Error::rejected(
            "dimension mismatch between states and observable",
        ));
    }
    Ok(dim)
}

/// `<post|A|pre> / <post|pre>`.
pub fn weak_value(
    pre: &StateVector,
    post: &StateVector,
    a: &HermitianOperator,
) -> Result<WeakValue> {
    weak_value_with(pre, post, a, DEFAULT_OVERLAP_FLOOR)
}

pub fn weak_value_with(
    pre: &StateVector,
    post: &StateVector,
    a: &HermitianOperator,
    overlap_floor: f64,
) -> Result<WeakValue> {
    check_dims(&[pre, post], Some(a))?;
    let pre = pre.normalize()?;
    let post = post.normalize()?;
    let overlap = inner(&post, &pre)?;
    if !(overlap.norm() > overlap_floor) {
        return Err(Error::OrthogonalPostselection {
            overlap: overlap.norm(),
        });
    }
    let numerator = inner(&post, &a.apply(&pre)?)?;
    WeakValue::from_complex(numerator / overlap)
}

/// Intermediate-measurement probabilities over the eigenvalues of an
/// observable, in the same order as [`HermitianOperator::eigenvalues`].
#[derive(Clone, Debug, PartialEq)]
pub struct AblDistribution {
    pub eigenvalues: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// ABL rule. For degenerate spectra each eigenspace projector `P_j` is one
/// channel with weight `|<post|P_j|pre>|^2`, which reduces to
/// `|<pre|c_j>|^2 |<c_j|post>|^2` when `P_j` has rank one.
pub fn abl_probability(
    pre: &StateVector,
    post: &StateVector,
    c: &HermitianOperator,
) -> Result<AblDistribution> {
    abl_probability_with(pre, post, c, DEFAULT_PROB_FLOOR)
}

pub fn abl_probability_with(
    pre: &StateVector,
    post: &StateVector,
    c: &HermitianOperator,
    denominator_floor: f64,
) -> Result<AblDistribution> {
    check_dims(&[pre, post], Some(c))?;
    let pre = pre.normalize()?;
    let post = post.normalize()?;
    let weights = c
        .projectors()
        .iter()
        .map(|p| Ok(inner(&post, &p.apply(&pre)?)?.norm_sqr()))
        .collect::<Result<Vec<f64>>>()?;
    let denominator: f64 = weights.iter().sum();
    if !(denominator > denominator_floor) {
        return Err(Error::ImpossibleSequence { denominator });
    }
    Ok(AblDistribution {
        eigenvalues: c.eigenvalues().to_vec(),
        probabilities: weights.iter().map(|w| w / denominator).collect(),
    })
}

/// Rank-one observable `1 * |psi><psi| + 0 * (1 - |psi><psi|)`.
fn rank_one_observable(psi: &StateVector) -> Result<HermitianOperator> {
    let psi = psi.normalize()?;
    let p = Matrix::outer(&psi, &psi);
    let complement = Matrix::identity(psi.dim()).add(&p.scale(Complex64::new(-1.0, 0.0)));
    HermitianOperator::from_spectrum(vec![1.0, 0.0], vec![p, complement])
}

/// Probabilities that an intermediate measurement of the preselection
/// observable yields `a`, and of the postselection observable yields `b`.
pub fn verify_certainty(pre: &StateVector, post: &StateVector) -> Result<(f64, f64)> {
    check_dims(&[pre, post], None)?;
    let outcome_one = |obs: &HermitianOperator| -> Result<f64> {
        let dist = abl_probability(pre, post, obs)?;
        Ok(dist
            .eigenvalues
            .iter()
            .zip(&dist.probabilities)
            .find(|(v, _)| **v == 1.0)
            .map_or(0.0, |(_, p)| *p))
    };
    let p_a = outcome_one(&rank_one_observable(pre)?)?;
    let p_b = outcome_one(&rank_one_observable(post)?)?;
    Ok((p_a, p_b))
}

/// Impulsive coupling `exp(-i g A (x) q)`: the eigenbranch with eigenvalue
/// `a_i` receives the momentum kick `+g a_i`.
pub fn couple_weak(
    pre: &StateVector,
    a: &HermitianOperator,
    pointer: &PointerWave,
    g: f64,
) -> Result<CompositeState> {
    check_dims(&[pre], Some(a))?;
    if !g.is_finite() {
        return Err(Error::rejected("coupling must be finite"));
    }
    let pre = pre.normalize()?;
    if g == 0.0 {
        return CompositeState::product(&pre, pointer);
    }
    let dim = pre.dim();
    let mut branches = vec![PointerWave::zeros(*pointer.grid()); dim];
    for (value, projector) in a.eigenvalues().iter().zip(a.projectors()) {
        let component = projector.apply(&pre)?;
        if component.norm_sqr() == 0.0 {
            continue;
        }
        let kicked = pointer.translate_momentum(g * value)?;
        for (branch, amp) in branches.iter_mut().zip(component.amplitudes()) {
            branch.add_scaled(*amp, &kicked)?;
        }
    }
    CompositeState::new(branches, basis_labels(dim))
}

#[derive(Clone, Debug)]
pub struct Postselected {
    pub conditional: PointerWave,
    pub probability: f64,
}

pub fn postselect(state: &CompositeState, post: &StateVector) -> Result<Postselected> {
    postselect_with(state, post, DEFAULT_PROB_FLOOR)
}

pub fn postselect_with(
    state: &CompositeState,
    post: &StateVector,
    prob_floor: f64,
) -> Result<Postselected> {
    if post.dim() != state.system_dim() {
        return Err(Error::rejected("postselection state dimension mismatch"));
    }
    let post = post.normalize()?;
    let mut projected = PointerWave::zeros(*state.grid());
    for (branch, amp) in state.branches().iter().zip(post.amplitudes()) {
        projected.add_scaled(amp.conj(), branch)?;
    }
    let probability = projected.norm_sqr();
    if !(probability >= prob_floor) {
        return Err(Error::PostselectionFailed { probability });
    }
    Ok(Postselected {
        conditional: projected.normalized()?,
        probability,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct EstimateDiagnostics {
    pub post_probability: f64,
    /// Conditional minus initial mean momentum.
    pub shift_p: f64,
    /// Conditional minus initial mean position.
    pub shift_x: f64,
    pub initial: Moments,
    pub conditional: Moments,
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub estimate: WeakValue,
    pub diagnostics: EstimateDiagnostics,
}

/// Pointer-based weak-value estimate with a centred Gaussian pointer of
/// momentum spread `sigma_p` on the default grid for that spread.
pub fn estimate_weak_value(
    pre: &StateVector,
    post: &StateVector,
    a: &HermitianOperator,
    sigma_p: f64,
    g: f64,
) -> Result<Estimate> {
    let grid = Grid::for_sigma_p(sigma_p)?;
    let pointer = gaussian(&grid, 0.0, 0.0, sigma_p)?;
    estimate_weak_value_on(pre, post, a, &pointer, g, Floors::default())
}

pub fn estimate_weak_value_on(
    pre: &StateVector,
    post: &StateVector,
    a: &HermitianOperator,
    pointer: &PointerWave,
    g: f64,
    floors: Floors,
) -> Result<Estimate> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::rejected("estimate needs a coupling g > 0"));
    }
    let joint = couple_weak(pre, a, pointer, g)?;
    let selected = postselect_with(&joint, post, floors.probability)?;
    let initial = pointer.moments();
    let conditional = selected.conditional.moments();
    let shift_p = conditional.mean_p - initial.mean_p;
    let shift_x = conditional.mean_x - initial.mean_x;
    let kappa = IMAG_QUADRATURE_GAIN / initial.var_x;
    Ok(Estimate {
        estimate: WeakValue {
            re: shift_p / g,
            im: kappa * shift_x / g,
        },
        diagnostics: EstimateDiagnostics {
            post_probability: selected.probability,
            shift_p,
            shift_x,
            initial,
            conditional,
        },
    })
}

/// Projective measurement of `a`: returns the eigenvalue obtained and the
/// normalized collapsed state `P_i|psi> / |P_i psi|`.
pub fn strong_measure(
    state: &StateVector,
    a: &HermitianOperator,
    rng: &mut RngStream,
) -> Result<(f64, StateVector)> {
    check_dims(&[state], Some(a))?;
    let psi = state.normalize()?;
    let components = a
        .projectors()
        .iter()
        .map(|p| p.apply(&psi))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = components.iter().map(StateVector::norm_sqr).collect();
    let total: f64 = weights.iter().sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    let mut chosen = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            chosen = i;
            break;
        }
    }
    // Zero-weight outcomes are never chosen once the cumulative sum passes them.
    while weights[chosen] == 0.0 && chosen > 0 {
        chosen -= 1;
    }
    Ok((a.eigenvalues()[chosen], components[chosen].normalize()?))
}

/// Counts from repeated `pre -> measure C -> postselect on post` sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceCounts {
    pub eigenvalues: Vec<f64>,
    /// Postselected trials per intermediate outcome.
    pub counts: Vec<u64>,
    pub n_trials: u64,
    pub n_postselected: u64,
}

impl SequenceCounts {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n_postselected.max(1) as f64)
            .collect()
    }
}

/// Monte Carlo of the sequential strong-measurement protocol. Trial `i` uses
/// stream `i` of `seed`, so counts do not depend on the thread count.
pub fn simulate_sequence(
    pre: &StateVector,
    post: &StateVector,
    c: &HermitianOperator,
    n_trials: u64,
    seed: u64,
) -> Result<SequenceCounts> {
    check_dims(&[pre, post], Some(c))?;
    let post_obs = rank_one_observable(post)?;
    let factory = StreamFactory::new(seed);
    let n_outcomes = c.eigenvalues().len();
    let counts = (0..n_trials)
        .into_par_iter()
        .map(|i| -> Result<Option<usize>> {
            let mut rng = factory.stream(i);
            let (value, collapsed) = strong_measure(pre, c, &mut rng)?;
            let (b, _) = strong_measure(&collapsed, &post_obs, &mut rng)?;
            if b == 1.0 {
                Ok(c.eigenvalues().iter().position(|v| *v == value))
            } else {
                Ok(None)
            }
        })
        .try_fold(
            || vec![0u64; n_outcomes],
            |mut acc, outcome| -> Result<Vec<u64>> {
                if let Some(j) = outcome? {
                    acc[j] += 1;
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n_outcomes],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
        )?;
    let n_postselected = counts.iter().sum();
    Ok(SequenceCounts {
        eigenvalues: c.eigenvalues().to_vec(),
        counts,
        n_trials,
        n_postselected,
    })
}
