//! Extended single-group dynamics where the decision also shapes the next
//! round's feature distribution.
//!
//! Features are generated by G[y][d](x), conditioned on the current
//! qualification state `y` and the previous decision `d`, so the state of
//! the population is the joint distribution ζ[y][d] = P(previous decision
//! d, qualified y) rather than the scalar qualification rate α = ζ[1][1] +
//! ζ[1][0]. One step multiplies ζ by a column-stochastic matrix built from
//! the transitions and the per-class acceptance probabilities the current
//! threshold induces.
//!
//! Only the unconstrained policy and a single group are modeled here.

use crate::dist::{verify_mlr, FeatureDistribution};
use crate::equilibrium::h_func;
use crate::error::{Error, Result};
use crate::model::{GroupModel, TransitionClass, TransitionMatrix};
use crate::policy::unconstrained_threshold;
use crate::root;
use serde::{Deserialize, Serialize};

/// Feature model with decision-dependent generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenModelSpec", into = "GenModelSpec")]
pub struct GenModel {
    g00: FeatureDistribution,
    g01: FeatureDistribution,
    g10: FeatureDistribution,
    g11: FeatureDistribution,
    transitions: TransitionMatrix,
    u_plus: f64,
    u_minus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenModelSpec {
    g00: FeatureDistribution,
    g01: FeatureDistribution,
    g10: FeatureDistribution,
    g11: FeatureDistribution,
    transitions: TransitionMatrix,
    u_plus: f64,
    u_minus: f64,
}

impl TryFrom<GenModelSpec> for GenModel {
    type Error = Error;
    fn try_from(s: GenModelSpec) -> Result<Self> {
        GenModel::new(
            s.g00,
            s.g01,
            s.g10,
            s.g11,
            s.transitions,
            s.u_plus,
            s.u_minus,
        )
    }
}

impl From<GenModel> for GenModelSpec {
    fn from(m: GenModel) -> Self {
        GenModelSpec {
            g00: m.g00,
            g01: m.g01,
            g10: m.g10,
            g11: m.g11,
            transitions: m.transitions,
            u_plus: m.u_plus,
            u_minus: m.u_minus,
        }
    }
}

impl GenModel {
    /// Validates that every unqualified-over-qualified density ratio
    /// G[0d]/G[1d'] is strictly decreasing (so the qualification profile
    /// rises in the feature for any state).
    pub fn new(
        g00: FeatureDistribution,
        g01: FeatureDistribution,
        g10: FeatureDistribution,
        g11: FeatureDistribution,
        transitions: TransitionMatrix,
        u_plus: f64,
        u_minus: f64,
    ) -> Result<Self> {
        if !(u_plus > 0.0) || !(u_minus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "utilities must be positive, got u_plus={u_plus}, u_minus={u_minus}"
            )));
        }
        for (lo, hi) in [(&g00, &g10), (&g00, &g11), (&g01, &g10), (&g01, &g11)] {
            let check = verify_mlr(lo, hi, 2048)?;
            if !check.holds {
                return Err(Error::MlrViolation {
                    at: check.first_violation.unwrap_or(f64::NAN),
                });
            }
        }
        Ok(GenModel {
            g00,
            g01,
            g10,
            g11,
            transitions,
            u_plus,
            u_minus,
        })
    }

    pub fn dist(&self, y: u8, d: u8) -> &FeatureDistribution {
        match (y, d) {
            (0, 0) => &self.g00,
            (0, 1) => &self.g01,
            (1, 0) => &self.g10,
            (1, 1) => &self.g11,
            _ => panic!("y and d must be 0 or 1"),
        }
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }
    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }
    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    pub fn break_even(&self) -> f64 {
        self.u_minus / (self.u_plus + self.u_minus)
    }

    /// Union of the four class supports.
    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in [&self.g00, &self.g01, &self.g10, &self.g11] {
            let (l, h) = d.support();
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

/// Joint state ζ[y][d] = P(previous decision d, qualified y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenState {
    pub zeta11: f64,
    pub zeta10: f64,
    pub zeta01: f64,
    pub zeta00: f64,
}

impl GenState {
    pub fn new(zeta11: f64, zeta10: f64, zeta01: f64, zeta00: f64) -> Result<Self> {
        let entries = [zeta11, zeta10, zeta01, zeta00];
        if entries.iter().any(|z| *z < 0.0) {
            return Err(Error::InvalidParameter(
                "joint-state entries must be non-negative".into(),
            ));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "joint-state entries must sum to 1, got {sum}"
            )));
        }
        Ok(GenState {
            zeta11,
            zeta10,
            zeta01,
            zeta00,
        })
    }

    /// Product-form state for a given qualification rate with an
    /// uninformative 50/50 previous decision (the warm start used when no
    /// joint state is known).
    pub fn product(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(GenState {
            zeta11: 0.5 * alpha,
            zeta10: 0.5 * alpha,
            zeta01: 0.5 * (1.0 - alpha),
            zeta00: 0.5 * (1.0 - alpha),
        })
    }

    /// Qualification rate α = ζ[1][1] + ζ[1][0].
    pub fn alpha(&self) -> f64 {
        self.zeta11 + self.zeta10
    }

    pub fn dist(&self, other: &GenState) -> f64 {
        (self.zeta11 - other.zeta11)
            .abs()
            .max((self.zeta10 - other.zeta10).abs())
            .max((self.zeta01 - other.zeta01).abs())
            .max((self.zeta00 - other.zeta00).abs())
    }
}

/// Posterior probability of being qualified at feature `x` under the joint
/// state:
///
/// γ(x) = (G₁₀ζ₁₀ + G₁₁ζ₁₁) / (G₁₀ζ₁₀ + G₁₁ζ₁₁ + G₀₀ζ₀₀ + G₀₁ζ₀₁).
pub fn gen_profile(model: &GenModel, state: &GenState, x: f64) -> Result<f64> {
    let num = model.g10.pdf(x) * state.zeta10 + model.g11.pdf(x) * state.zeta11;
    let den = model.g00.pdf(x) * state.zeta00 + model.g01.pdf(x) * state.zeta01;
    if num <= 0.0 && den <= 0.0 {
        return Err(Error::OutsideSupport(x));
    }
    Ok(num / (num + den))
}

/// One step of the joint-state evolution under threshold `theta`.
///
/// With E[yd] the acceptance probability of the (y, d) class, the next
/// state is the column-stochastic blend: accepted individuals transition
/// with T[y][1] and land in the d = 1 slots, rejected ones with T[y][0]
/// into the d = 0 slots.
pub fn gen_step(model: &GenModel, state: &GenState, theta: f64) -> GenState {
    let t = &model.transitions;
    let accept = |y: u8, d: u8| 1.0 - model.dist(y, d).cdf(theta);
    let e11 = accept(1, 1);
    let e10 = accept(1, 0);
    let e01 = accept(0, 1);
    let e00 = accept(0, 0);
    let z = state;
    let zeta11 = t.t11() * (e11 * z.zeta11 + e10 * z.zeta10)
        + t.t01() * (e01 * z.zeta01 + e00 * z.zeta00);
    let zeta10 = t.t10() * ((1.0 - e11) * z.zeta11 + (1.0 - e10) * z.zeta10)
        + t.t00() * ((1.0 - e01) * z.zeta01 + (1.0 - e00) * z.zeta00);
    let zeta01 = (1.0 - t.t11()) * (e11 * z.zeta11 + e10 * z.zeta10)
        + (1.0 - t.t01()) * (e01 * z.zeta01 + e00 * z.zeta00);
    let zeta00 = (1.0 - t.t10()) * ((1.0 - e11) * z.zeta11 + (1.0 - e10) * z.zeta10)
        + (1.0 - t.t00()) * ((1.0 - e01) * z.zeta01 + (1.0 - e00) * z.zeta00);
    let sum = zeta11 + zeta10 + zeta01 + zeta00;
    GenState {
        zeta11: zeta11 / sum,
        zeta10: zeta10 / sum,
        zeta01: zeta01 / sum,
        zeta00: zeta00 / sum,
    }
}

/// Smallest threshold at which the profile reaches the break-even level
/// u₋/(u₊+u₋); ±∞ when the profile stays on one side.
pub fn gen_threshold(model: &GenModel, state: &GenState) -> Result<f64> {
    let target = model.break_even();
    if state.alpha() == 0.0 {
        return Ok(f64::INFINITY);
    }
    if state.alpha() == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (lo, hi) = model.support();
    const SCAN: usize = 129;
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for i in 0..SCAN {
        let x = lo + step * i as f64;
        let g = match gen_profile(model, state, x) {
            Ok(g) => g,
            Err(Error::OutsideSupport(_)) => continue,
            Err(e) => return Err(e),
        };
        if let Some((px, pg)) = prev {
            if g < pg - 1e-9 {
                return Err(Error::MlrViolation { at: x });
            }
            if bracket.is_none() && g >= target && pg < target {
                bracket = Some((px, x));
            }
        }
        if first.is_nan() {
            first = g;
        }
        prev = Some((x, g.max(prev.map_or(g, |(_, pg)| pg))));
        last = g;
    }
    if first.is_nan() {
        return Err(Error::OutsideSupport(lo));
    }
    if first > target {
        return Ok(f64::NEG_INFINITY);
    }
    if first == target {
        return Ok(lo);
    }
    if last < target {
        return Ok(f64::INFINITY);
    }
    let (blo, bhi) = bracket.expect("crossing bracketed by the scan");
    let gamma = |x: f64| gen_profile(model, state, x).unwrap_or(0.0);
    Ok(
        root::first_true(|x| gamma(x) >= target, blo, bhi, 1e-12 * (1.0 + bhi.abs()))
            .unwrap_or(bhi),
    )
}

/// A simulated joint-state path.
#[derive(Debug, Clone)]
pub struct GenTrajectory {
    pub states: Vec<GenState>,
    pub thetas: Vec<f64>,
    pub termination: crate::dynamics::Termination,
}

impl GenTrajectory {
    pub fn last_state(&self) -> GenState {
        *self.states.last().expect("at least the initial state")
    }
}

/// Iterates the joint-state dynamics under the myopic threshold policy.
pub fn gen_simulate(
    model: &GenModel,
    initial: GenState,
    max_steps: usize,
    tol: f64,
) -> Result<GenTrajectory> {
    assert!(max_steps >= 1 && tol > 0.0);
    let mut states = vec![initial];
    let mut thetas = Vec::new();
    let mut termination = crate::dynamics::Termination::MaxSteps;
    for _ in 0..max_steps {
        let state = *states.last().unwrap();
        let theta = gen_threshold(model, &state)?;
        let next = gen_step(model, &state, theta);
        thetas.push(theta);
        states.push(next);
        let residual = next.dist(&state);
        if residual <= tol {
            termination = crate::dynamics::Termination::Converged(residual);
            break;
        }
    }
    Ok(GenTrajectory {
        states,
        thetas,
        termination,
    })
}

/// Which single decision-dependent class the model varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenVariant {
    /// G[0][1] differs from G[0][0]; the qualified class is
    /// decision-independent.
    UnqualifiedSide,
    /// G[1][1] differs from G[1][0]; the unqualified class is
    /// decision-independent.
    QualifiedSide,
}

/// Direction of the decision's effect on the varied class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenShape {
    /// Acceptance shifts the class's features up (its CDF sits below the
    /// rejected one everywhere).
    AcceptedHigher,
    /// Acceptance shifts the class's features down.
    AcceptedLower,
}

/// One fixed point of the joint-state dynamics.
#[derive(Debug, Clone, Copy)]
pub struct GenEquilibrium {
    pub state: GenState,
    pub alpha: f64,
    pub theta: f64,
    /// Sup-norm defect of the stationarity conditions at the point.
    pub residual: f64,
}

/// Fixed points of the extended dynamics plus the comparison against the
/// matching decision-independent baseline.
#[derive(Debug, Clone)]
pub struct GenEquilibriumReport {
    pub variant: GenVariant,
    pub equilibria: Vec<GenEquilibrium>,
    /// Equilibrium rate of the baseline model (the varied class pinned to
    /// its accepted version for the unqualified side, to its rejected
    /// version for the qualified side).
    pub baseline_alpha: f64,
    pub shape: GenShape,
    /// Crossing point of the two densities of the varied class.
    pub crossing: f64,
    /// Whether the utility-ratio precondition for the predicted ordering
    /// holds.
    pub precondition_holds: bool,
    /// Predicted sign of (α̂ − baseline α̂) when the precondition holds.
    pub predicted_above_baseline: bool,
    /// Whether every located equilibrium respects the prediction.
    pub ordering_holds: bool,
    /// α̂ + ζ̂₀₀ <= 1 (and the analogous qualified-side bound) at every
    /// equilibrium.
    pub feasibility_ok: bool,
}

/// Enumerates fixed points of the extended dynamics by a one-dimensional
/// scan in the threshold: each candidate θ induces a stationary joint
/// state of the (column-stochastic) evolution matrix, and a fixed point is
/// a θ that is itself optimal for its stationary state.
pub fn gen_equilibrium(model: &GenModel, variant: GenVariant) -> Result<GenEquilibriumReport> {
    match variant {
        GenVariant::UnqualifiedSide => {
            if model.g11 != model.g10 || model.g01 == model.g00 {
                return Err(Error::InvalidParameter(
                    "unqualified-side variant requires G11 = G10 and G01 != G00".into(),
                ));
            }
        }
        GenVariant::QualifiedSide => {
            if model.g01 != model.g00 || model.g11 == model.g10 {
                return Err(Error::InvalidParameter(
                    "qualified-side variant requires G01 = G00 and G11 != G10".into(),
                ));
            }
        }
    }

    let (lo, hi) = model.support();
    let f = |theta: f64| -> Result<f64> {
        let state = stationary_state(model, theta);
        let opt = gen_threshold(model, &state)?;
        // Clamp the optimal threshold so the defect stays finite at the
        // scan edges (accept-all / reject-all optima).
        let span = hi - lo;
        Ok(opt.clamp(lo - span, hi + span) - theta)
    };
    let errs = crate::equilibrium::ErrCell::new();
    let fwrap = |theta: f64| errs.wrap(f(theta));
    let brackets = root::scan_sign_changes(fwrap, lo, hi, 1024);
    errs.check()?;
    let mut equilibria = Vec::new();
    for (blo, bhi) in brackets {
        let errs = crate::equilibrium::ErrCell::new();
        let theta = root::brent(|t| errs.wrap(f(t)), blo, bhi, 1e-11 * (1.0 + hi.abs()));
        errs.check()?;
        let state = stationary_state(model, theta);
        let next = gen_step(model, &state, theta);
        let opt = gen_threshold(model, &state)?;
        let residual = next.dist(&state).max((opt - theta).abs());
        if residual > 1e-6 {
            continue;
        }
        if equilibria
            .iter()
            .any(|e: &GenEquilibrium| e.state.dist(&state) < 1e-8)
        {
            continue;
        }
        equilibria.push(GenEquilibrium {
            state,
            alpha: state.alpha(),
            theta,
            residual,
        });
    }
    if equilibria.is_empty() {
        return Err(Error::NoEquilibrium);
    }

    // Baseline: the varied class pinned to one decision-independent
    // density, reducing to the scalar dynamics.
    let (varied_lo, varied_hi, base_g0, base_g1) = match variant {
        GenVariant::UnqualifiedSide => (&model.g00, &model.g01, model.g01.clone(), model.g10.clone()),
        GenVariant::QualifiedSide => (&model.g10, &model.g11, model.g00.clone(), model.g10.clone()),
    };
    let baseline = GroupModel::new(base_g0, base_g1, model.transitions, 0.5)?;
    let baseline_alpha = single_group_equilibrium(&baseline, model.break_even())?;

    // Shape of the decision effect on the varied class: CDF dominance plus
    // a unique density crossing.
    let (shape, crossing) = classify_shape(varied_lo, varied_hi)?;

    // Utility-ratio precondition and the predicted side of the baseline.
    let t = &model.transitions;
    let class = t.classify();
    if !matches!(class, TransitionClass::A | TransitionClass::B) {
        return Err(Error::InvalidParameter(
            "ordering prediction requires condition class A or B transitions".into(),
        ));
    }
    let ratio = model.u_plus / model.u_minus;
    let h_edge_max = ((1.0 - t.t10()) / t.t00()).max((1.0 - t.t11()) / t.t01());
    let h_edge_min = ((1.0 - t.t10()) / t.t00()).min((1.0 - t.t11()) / t.t01());
    let (precondition_holds, predicted_above_baseline) = match variant {
        GenVariant::UnqualifiedSide => {
            let bound = model.g01.pdf(crossing) / model.g11.pdf(crossing) * h_edge_max;
            let pre = ratio > bound;
            let above = match (shape, class) {
                (GenShape::AcceptedHigher, TransitionClass::A) => true,
                (GenShape::AcceptedHigher, _) => false,
                (GenShape::AcceptedLower, TransitionClass::A) => false,
                (GenShape::AcceptedLower, _) => true,
            };
            (pre, above)
        }
        GenVariant::QualifiedSide => {
            let bound = model.g00.pdf(crossing) / model.g10.pdf(crossing) * h_edge_min;
            let pre = ratio < bound;
            let above = match (shape, class) {
                (GenShape::AcceptedHigher, TransitionClass::A) => false,
                (GenShape::AcceptedHigher, _) => true,
                (GenShape::AcceptedLower, TransitionClass::A) => true,
                (GenShape::AcceptedLower, _) => false,
            };
            (pre, above)
        }
    };
    let ordering_holds = equilibria.iter().all(|e| {
        if predicted_above_baseline {
            e.alpha > baseline_alpha
        } else {
            e.alpha < baseline_alpha
        }
    });
    let feasibility_ok = equilibria.iter().all(|e| {
        let unq = e.alpha + e.state.zeta00 <= 1.0 + 1e-10;
        let qual = (1.0 - e.alpha) + e.state.zeta11 <= 1.0 + 1e-10;
        unq && qual
    });

    Ok(GenEquilibriumReport {
        variant,
        equilibria,
        baseline_alpha,
        shape,
        crossing,
        precondition_holds,
        predicted_above_baseline,
        ordering_holds,
        feasibility_ok,
    })
}

/// Stationary joint state of the evolution matrix at a frozen threshold
/// (solved directly from the 4×4 linear system).
pub fn stationary_state(model: &GenModel, theta: f64) -> GenState {
    let t = &model.transitions;
    let accept = |y: u8, d: u8| 1.0 - model.dist(y, d).cdf(theta);
    let e = [accept(1, 1), accept(1, 0), accept(0, 1), accept(0, 0)];
    // Column-stochastic evolution matrix in state order (ζ11, ζ10, ζ01, ζ00).
    let m = [
        [
            t.t11() * e[0],
            t.t11() * e[1],
            t.t01() * e[2],
            t.t01() * e[3],
        ],
        [
            t.t10() * (1.0 - e[0]),
            t.t10() * (1.0 - e[1]),
            t.t00() * (1.0 - e[2]),
            t.t00() * (1.0 - e[3]),
        ],
        [
            (1.0 - t.t11()) * e[0],
            (1.0 - t.t11()) * e[1],
            (1.0 - t.t01()) * e[2],
            (1.0 - t.t01()) * e[3],
        ],
        [
            (1.0 - t.t10()) * (1.0 - e[0]),
            (1.0 - t.t10()) * (1.0 - e[1]),
            (1.0 - t.t00()) * (1.0 - e[2]),
            (1.0 - t.t00()) * (1.0 - e[3]),
        ],
    ];
    // Solve (M − I)ζ = 0 with Σζ = 1 (replace the last equation).
    let mut a = [[0.0f64; 5]; 4];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = m[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..4 {
        a[3][j] = 1.0;
    }
    a[3][4] = 1.0;
    // Gaussian elimination with partial pivoting.
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        for k in col..5 {
            a[col][k] /= p;
        }
        for row in 0..4 {
            if row == col {
                continue;
            }
            let f = a[row][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let z: Vec<f64> = (0..4).map(|i| a[i][4].max(0.0)).collect();
    let sum: f64 = z.iter().sum();
    GenState {
        zeta11: z[0] / sum,
        zeta10: z[1] / sum,
        zeta01: z[2] / sum,
        zeta00: z[3] / sum,
    }
}

/// Single-group unconstrained equilibrium rate of a scalar model.
fn single_group_equilibrium(group: &GroupModel, break_even: f64) -> Result<f64> {
    let errs = crate::equilibrium::ErrCell::new();
    let f = |alpha: f64| {
        let theta = errs.wrap(unconstrained_threshold(group, alpha, break_even));
        h_func(group, theta) - (1.0 / alpha.max(1e-300) - 1.0)
    };
    let root = root::brent(&f, 1e-9, 1.0 - 1e-12, 1e-13);
    errs.check()?;
    Ok(root)
}

/// CDF-dominance direction of the varied class pair plus the unique
/// density crossing; several crossings are an error.
fn classify_shape(
    rejected: &FeatureDistribution,
    accepted: &FeatureDistribution,
) -> Result<(GenShape, f64)> {
    let (lo_r, hi_r) = rejected.support();
    let (lo_a, hi_a) = accepted.support();
    let (lo, hi) = (lo_r.max(lo_a), hi_r.min(hi_a));
    let diff = |x: f64| accepted.pdf(x) - rejected.pdf(x);
    let mut brackets = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut dominance: i32 = 0; // sign of (accepted CDF − rejected CDF)
    for i in 0..=2048 {
        let x = lo + (hi - lo) * i as f64 / 2048.0;
        if accepted.pdf(x) > 1e-12 && rejected.pdf(x) > 1e-12 {
            let d = diff(x);
            if let Some((px, pd)) = prev {
                if pd.signum() != d.signum() {
                    brackets.push((px, x));
                }
            }
            prev = Some((x, d));
        }
        let c = accepted.cdf(x) - rejected.cdf(x);
        if c > 1e-9 {
            if dominance < 0 {
                return Err(Error::Infeasible(
                    "accepted/rejected CDFs cross; no dominance direction".into(),
                ));
            }
            dominance = 1;
        } else if c < -1e-9 {
            if dominance > 0 {
                return Err(Error::Infeasible(
                    "accepted/rejected CDFs cross; no dominance direction".into(),
                ));
            }
            dominance = -1;
        }
    }
    if brackets.len() != 1 {
        return Err(Error::Infeasible(format!(
            "expected exactly one density crossing, found {}",
            brackets.len()
        )));
    }
    let crossing = root::brent(diff, brackets[0].0, brackets[0].1, 1e-12);
    let shape = if dominance <= 0 {
        GenShape::AcceptedHigher
    } else {
        GenShape::AcceptedLower
    };
    Ok((shape, crossing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FeatureDistribution as FD;

    fn gaussian(m: f64, sd: f64) -> FD {
        FD::gaussian(m, sd).unwrap()
    }

    /// Decision shifts unqualified features up (accepted higher), shared
    /// qualified class; the shape of the worked example with G00 at -8,
    /// G01 at -1, qualified at 5, all stddev 3.
    fn unqualified_side_model(t: (f64, f64, f64, f64), u_plus: f64) -> GenModel {
        GenModel::new(
            gaussian(-8.0, 3.0),
            gaussian(-1.0, 3.0),
            gaussian(5.0, 3.0),
            gaussian(5.0, 3.0),
            TransitionMatrix::new(t.0, t.1, t.2, t.3).unwrap(),
            u_plus,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn profile_is_alpha_when_all_densities_equal() {
        let g = gaussian(0.0, 2.0);
        let m = GenModel::new(
            g.clone(),
            g.clone(),
            g.clone(),
            g.clone(),
            TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
            1.0,
            1.0,
        );
        // All four equal: likelihood carries no information, γ = α, but the
        // ratio checks reject it (constant, not strictly decreasing).
        assert!(m.is_err());
        // With distinct classes the midpoint gives γ = weights ratio.
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        let state = GenState::new(0.0, 0.4, 0.0, 0.6).unwrap();
        // ζ01 = ζ11 = 0: only the d=0 slots matter.
        let gamma = gen_profile(&m, &state, -1.5).unwrap();
        let expect = {
            let num = m.dist(1, 0).pdf(-1.5) * 0.4;
            let den = m.dist(0, 0).pdf(-1.5) * 0.6;
            num / (num + den)
        };
        assert!((gamma - expect).abs() < 1e-12);
    }

    #[test]
    fn profile_one_when_no_unqualified_mass() {
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        let state = GenState::new(0.5, 0.5, 0.0, 0.0).unwrap();
        assert!((gen_profile(&m, &state, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_preserved_by_step() {
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        let mut state = GenState::product(0.37).unwrap();
        for _ in 0..100 {
            state = gen_step(&m, &state, 0.7);
            let sum = state.zeta11 + state.zeta10 + state.zeta01 + state.zeta00;
            assert!((sum - 1.0).abs() < 1e-10);
            assert!(state.zeta11 >= 0.0 && state.zeta00 >= 0.0);
        }
    }

    #[test]
    fn reject_all_uses_only_rejected_transitions() {
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        let state = GenState::product(0.4).unwrap();
        let next = gen_step(&m, &state, f64::INFINITY);
        // Acceptance mass is zero: the accepted slots empty out.
        assert_eq!(next.zeta11, 0.0);
        assert_eq!(next.zeta01, 0.0);
        assert!((next.alpha() - (0.5 * 0.4 + 0.4 * 0.6)).abs() < 1e-12); // T10·α + T00·(1−α)
    }

    #[test]
    fn decision_independent_generation_reduces_to_base_dynamics() {
        // G independent of d: the α-marginal must track the scalar
        // dynamics step for step.
        let g0 = gaussian(-5.0, 5.0);
        let g1 = gaussian(5.0, 5.0);
        let t = TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap();
        let m = GenModel::new(
            g0.clone(),
            g0.clone(),
            g1.clone(),
            g1.clone(),
            t,
            1.0,
            1.0,
        )
        .unwrap();
        use crate::policy::Policy;
        let group = GroupModel::new(g0, g1, t, 0.5).unwrap();
        let scenario = crate::model::Scenario::new(group.clone(), group, 1.0, 1.0).unwrap();
        let policy =
            crate::policy::threshold_map(&scenario, crate::model::FairnessConstraint::Unconstrained)
                .unwrap();

        let mut gen_state = GenState::product(0.3).unwrap();
        let mut alpha = 0.3;
        for step_idx in 0..100 {
            let theta = gen_threshold(&m, &gen_state).unwrap();
            let pair = policy
                .thresholds(&crate::model::QualState::new(alpha, alpha).unwrap())
                .unwrap();
            assert!(
                (theta - pair.theta_a).abs() < 1e-6,
                "step {step_idx}: thresholds diverged {theta} vs {}",
                pair.theta_a
            );
            gen_state = gen_step(&m, &gen_state, theta);
            let next = crate::dynamics::step(
                &scenario,
                &crate::model::QualState::new(alpha, alpha).unwrap(),
                &pair,
            );
            alpha = next.alpha_a;
            assert!(
                (gen_state.alpha() - alpha).abs() < 1e-12,
                "step {step_idx}: marginal drifted {} vs {alpha}",
                gen_state.alpha()
            );
        }
    }

    #[test]
    fn stationary_state_is_fixed_by_step() {
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        for theta in [-3.0, 0.0, 2.0] {
            let s = stationary_state(&m, theta);
            let next = gen_step(&m, &s, theta);
            assert!(s.dist(&next) < 1e-12, "theta={theta}");
        }
    }

    #[test]
    fn unqualified_side_equilibrium_ordering_class_b() {
        // Accepted-higher shape and encouraging transitions: the extended
        // dynamics settles below the baseline.
        let m = unqualified_side_model((0.3, 0.5, 0.4, 0.8), 2.5);
        let report = gen_equilibrium(&m, GenVariant::UnqualifiedSide).unwrap();
        assert_eq!(report.shape, GenShape::AcceptedHigher);
        assert!(report.feasibility_ok);
        if report.precondition_holds {
            assert!(!report.predicted_above_baseline);
            assert!(report.ordering_holds, "report: {report:?}");
        }
    }

    #[test]
    fn variant_preconditions_enforced() {
        let m = unqualified_side_model((0.4, 0.5, 0.5, 0.9), 1.0);
        assert!(matches!(
            gen_equilibrium(&m, GenVariant::QualifiedSide),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn gen_simulate_converges_somewhere_stable() {
        let m = unqualified_side_model((0.3, 0.5, 0.4, 0.8), 2.5);
        let traj = gen_simulate(&m, GenState::product(0.5).unwrap(), 5000, 1e-10).unwrap();
        if let crate::dynamics::Termination::Converged(_) = traj.termination {
            let end = traj.last_state();
            let report = gen_equilibrium(&m, GenVariant::UnqualifiedSide).unwrap();
            let close = report
                .equilibria
                .iter()
                .any(|e| e.state.dist(&end) < 1e-6);
            assert!(close, "simulation end {end:?} not among equilibria");
        }
    }
}
