//! Equilibrium enumeration and diagnostics for the qualification dynamics.
//!
//! A state is an equilibrium exactly when both balanced equations hold:
//!
//! 1/α_s − 1 = h_s(θ_s(α_a, α_b)),  h_s(θ) = (1 − g1_s(θ)) / g0_s(θ).
//!
//! The left side falls strictly from +∞ to 0, while h_s stays inside a
//! positive band determined by the transition probabilities, so each group
//! has at least one balanced rate for any fixed rate of the other group.
//! [`balanced_functions`] solves those one-group equations into the curves
//! ψ_a(α_b) and ψ_b(α_a); [`find_equilibria`] intersects the curves,
//! refines every crossing, and attaches uniqueness and stability
//! diagnostics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    FairnessConstraint, GroupId, GroupModel, QualState, Scenario, TransitionClass,
};
use crate::policy::{threshold_map, Policy};
use crate::root;

/// Ratio (1 − g1(θ)) / g0(θ): the equilibrium odds of being unqualified
/// that a frozen threshold would sustain.
pub fn h_func(group: &GroupModel, theta: f64) -> f64 {
    let g1 = crate::dynamics::g_ys(group, 1, theta);
    let g0 = crate::dynamics::g_ys(group, 0, theta);
    (1.0 - g1) / g0
}

fn compose_state(side: GroupId, own: f64, other: f64) -> QualState {
    match side {
        GroupId::A => QualState {
            alpha_a: own,
            alpha_b: other,
        },
        GroupId::B => QualState {
            alpha_a: other,
            alpha_b: own,
        },
    }
}

fn theta_of(side: GroupId, pair: (f64, f64)) -> f64 {
    match side {
        GroupId::A => pair.0,
        GroupId::B => pair.1,
    }
}

/// Balanced-equation residual h(θ_s) − (1/ᾱ − 1) for group `side` at own
/// rate `own`, the other group's rate held at `other`.
fn balance_residual(
    scenario: &Scenario,
    policy: &dyn Policy,
    side: GroupId,
    own: f64,
    other: f64,
    coarse: bool,
) -> Result<f64> {
    let state = compose_state(side, own, other);
    let thetas = if coarse {
        policy.thresholds_coarse(&state)?
    } else {
        policy.thresholds(&state)?.thetas()
    };
    let group = scenario.group(side);
    let own = own.max(1e-300);
    Ok(h_func(group, theta_of(side, thetas)) - (1.0 / own - 1.0))
}

/// Captures the first error raised inside an infallible-looking closure.
pub(crate) struct ErrCell(std::cell::RefCell<Option<Error>>);

impl ErrCell {
    pub(crate) fn new() -> Self {
        ErrCell(std::cell::RefCell::new(None))
    }
    pub(crate) fn wrap(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }
    pub(crate) fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

const PSI_LO: f64 = 1e-12;

/// The band that must contain every balanced rate of a group: h stays
/// between its transition-probability bounds, so the crossing with
/// 1/α − 1 is confined to the matching α interval.
fn psi_band(group: &GroupModel) -> (f64, f64) {
    let t = group.transitions();
    let h_lo = (1.0 - t.t10().max(t.t11())) / t.t00().max(t.t01());
    let h_hi = (1.0 - t.t10().min(t.t11())) / t.t00().min(t.t01());
    let lo = (1.0 / (1.0 + h_hi) - 1e-9).max(PSI_LO);
    let hi = (1.0 / (1.0 + h_lo) + 1e-9).min(1.0);
    (lo, hi)
}

/// Solves the one-group balanced equation for the smallest balanced rate.
///
/// Under condition classes A and B the crossing is unique and a direct
/// bracketed solve is used; otherwise the residual is scanned first and the
/// leftmost sign change is refined.
fn psi_solve(
    scenario: &Scenario,
    policy: &dyn Policy,
    side: GroupId,
    other: f64,
    coarse: bool,
) -> Result<f64> {
    let errs = ErrCell::new();
    let f = |own: f64| errs.wrap(balance_residual(scenario, policy, side, own, other, coarse));
    let class = scenario.group(side).transitions().classify();
    let xtol = if coarse { 1e-7 } else { 1e-13 };
    let (lo, hi) = psi_band(scenario.group(side));
    let root = if matches!(class, TransitionClass::A | TransitionClass::B) {
        root::brent(&f, lo, hi, xtol)
    } else {
        let brackets = root::scan_sign_changes(&f, lo, hi, 96);
        match brackets.first() {
            Some(&(blo, bhi)) => root::brent(&f, blo, bhi, xtol),
            None => root::brent(&f, lo, hi, xtol),
        }
    };
    errs.check()?;
    Ok(root)
}

/// All balanced rates for one group on a dense scan (several can exist
/// under condition classes C and D).
fn psi_all(
    scenario: &Scenario,
    policy: &dyn Policy,
    side: GroupId,
    other: f64,
    scan: usize,
) -> Result<Vec<f64>> {
    let errs = ErrCell::new();
    let f = |own: f64| errs.wrap(balance_residual(scenario, policy, side, own, other, false));
    let (lo, hi) = psi_band(scenario.group(side));
    let brackets = root::scan_sign_changes(&f, lo, hi, scan);
    let mut out = Vec::new();
    for (lo, hi) in brackets {
        out.push(root::brent(&f, lo, hi, 1e-13));
    }
    errs.check()?;
    Ok(out)
}

/// The pair of balanced functions ψ_a(α_b), ψ_b(α_a) with sampled curves
/// for plotting and scanning.
pub struct BalancedFunctions<'a> {
    scenario: &'a Scenario,
    policy: crate::policy::PolicyMap<'a>,
    grid: usize,
    curve_a: Vec<f64>,
    curve_b: Vec<f64>,
    /// True when some sample of the respective curve had several balanced
    /// rates (condition classes C/D); the smallest is recorded.
    pub multivalued: (bool, bool),
}

/// Builds the balanced functions for a scenario under a constraint.
/// `grid` is the sampled-curve resolution (at least 16).
pub fn balanced_functions(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    grid: usize,
) -> Result<BalancedFunctions<'_>> {
    if grid < 16 {
        return Err(Error::InvalidParameter(format!(
            "balanced-curve grid must be >= 16, got {grid}"
        )));
    }
    let policy = threshold_map(scenario, constraint)?;
    let (ca, cb) = scenario.classes();
    let smooth = |c: TransitionClass| matches!(c, TransitionClass::A | TransitionClass::B);
    let sample = |side: GroupId| -> Result<(Vec<f64>, bool)> {
        let mut vals = Vec::with_capacity(grid);
        let mut multi = false;
        for j in 0..grid {
            let other = j as f64 / (grid - 1) as f64;
            if !smooth(match side {
                GroupId::A => ca,
                GroupId::B => cb,
            }) {
                let all = psi_all(scenario, &policy, side, other, 512)?;
                multi |= all.len() > 1;
                vals.push(all.first().copied().unwrap_or(f64::NAN));
            } else {
                vals.push(psi_solve(scenario, &policy, side, other, true)?);
            }
        }
        Ok((vals, multi))
    };
    let (curve_a, multi_a) = sample(GroupId::A)?;
    let (curve_b, multi_b) = sample(GroupId::B)?;
    Ok(BalancedFunctions {
        scenario,
        policy,
        grid,
        curve_a,
        curve_b,
        multivalued: (multi_a, multi_b),
    })
}

impl BalancedFunctions<'_> {
    /// Balanced rate of group a given the other group's rate (exact solve).
    pub fn psi_a(&self, alpha_b: f64) -> Result<f64> {
        psi_solve(self.scenario, &self.policy, GroupId::A, alpha_b, false)
    }

    /// Balanced rate of group b given the other group's rate (exact solve).
    pub fn psi_b(&self, alpha_a: f64) -> Result<f64> {
        psi_solve(self.scenario, &self.policy, GroupId::B, alpha_a, false)
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Sampled curve (α_b, ψ_a(α_b)) on the uniform grid.
    pub fn curve_a(&self) -> Vec<(f64, f64)> {
        self.curve_a
            .iter()
            .enumerate()
            .map(|(j, &v)| (j as f64 / (self.grid - 1) as f64, v))
            .collect()
    }

    /// Sampled curve (α_a, ψ_b(α_a)) on the uniform grid.
    pub fn curve_b(&self) -> Vec<(f64, f64)> {
        self.curve_b
            .iter()
            .enumerate()
            .map(|(j, &v)| (j as f64 / (self.grid - 1) as f64, v))
            .collect()
    }
}

/// One verified fixed point of the dynamics.
#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    pub state: QualState,
    /// Residuals of the two balanced equations at the point.
    pub residual_a: f64,
    pub residual_b: f64,
}

/// Outcome of the sufficient-condition uniqueness check.
#[derive(Debug, Clone, Copy)]
pub struct UniquenessCheck {
    pub unique: bool,
    /// Condition class the check ran under (A or B for both groups).
    pub condition: TransitionClass,
    /// Largest |∂h_s/∂α_{-s}| seen on the grid.
    pub max_cross_partial: f64,
    /// Largest |∂h_s/∂α_s| seen on the grid (only binding under class B).
    pub max_own_partial: f64,
}

/// Equilibria plus uniqueness/stability diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub equilibria: Vec<Equilibrium>,
    pub condition_class: (TransitionClass, TransitionClass),
    /// Sufficient-condition uniqueness result; `None` when the check was
    /// skipped or inapplicable (mixed/C/D classes): uniqueness unknown.
    pub unique_by_theorem2: Option<UniquenessCheck>,
    /// Grid estimate of the one-step map's Lipschitz constant (sup norm);
    /// `None` when diagnostics were not requested.
    pub lipschitz_estimate: Option<f64>,
    /// Per-equilibrium stability flags (spectral radius of the one-step
    /// Jacobian below 1).
    pub stable: Vec<bool>,
}

impl EquilibriumReport {
    /// The unique equilibrium, if exactly one was found.
    pub fn single(&self) -> Option<&Equilibrium> {
        if self.equilibria.len() == 1 {
            Some(&self.equilibria[0])
        } else {
            None
        }
    }
}

/// Tuning knobs for [`find_equilibria_with`].
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    /// Resolution of the sign-change scan of the curve composition.
    pub scan: usize,
    /// Sampled-curve resolution used to make the scan cheap.
    pub curve_samples: usize,
    /// Whether to compute the uniqueness check and Lipschitz estimate.
    pub diagnostics: bool,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            scan: 4096,
            curve_samples: 257,
            diagnostics: true,
        }
    }
}

/// Enumerates equilibria under the optimal policy for `constraint` with
/// full diagnostics.
pub fn find_equilibria(
    scenario: &Scenario,
    constraint: FairnessConstraint,
) -> Result<EquilibriumReport> {
    let policy = threshold_map(scenario, constraint)?;
    find_equilibria_with(scenario, &policy, EquilibriumOptions::default())
}

/// Enumerates equilibria under an arbitrary policy.
pub fn find_equilibria_with(
    scenario: &Scenario,
    policy: &dyn Policy,
    opts: EquilibriumOptions,
) -> Result<EquilibriumReport> {
    let classes = scenario.classes();
    let smooth = |c: TransitionClass| matches!(c, TransitionClass::A | TransitionClass::B);
    let states = if smooth(classes.0) && smooth(classes.1) {
        curve_intersections(scenario, policy, &opts)?
    } else {
        cell_scan_intersections(scenario, policy)?
    };

    // Verify every candidate against both balanced equations and dedupe.
    let mut equilibria: Vec<Equilibrium> = Vec::new();
    for state in states {
        let ra = balance_residual(scenario, policy, GroupId::A, state.alpha_a, state.alpha_b, false)?;
        let rb = balance_residual(scenario, policy, GroupId::B, state.alpha_b, state.alpha_a, false)?;
        if ra.abs() > 1e-7 || rb.abs() > 1e-7 {
            continue;
        }
        if equilibria.iter().any(|e| e.state.dist(&state) < 1e-6) {
            continue;
        }
        equilibria.push(Equilibrium {
            state,
            residual_a: ra,
            residual_b: rb,
        });
    }
    if equilibria.is_empty() {
        return Err(Error::NoEquilibrium);
    }
    equilibria.sort_by(|x, y| x.state.alpha_a.total_cmp(&y.state.alpha_a));

    let stable = stability_of(scenario, policy, &equilibria)?;
    let (unique, lipschitz) = if opts.diagnostics {
        let unique = match uniqueness_of(scenario, policy, classes) {
            Ok(u) => Some(u),
            Err(Error::UniquenessInapplicable(..)) => None,
            Err(e) => return Err(e),
        };
        let lip = lipschitz_of(scenario, policy, 17)?;
        (unique, Some(lip))
    } else {
        (None, None)
    };

    Ok(EquilibriumReport {
        equilibria,
        condition_class: classes,
        unique_by_theorem2: unique,
        lipschitz_estimate: lipschitz,
        stable,
    })
}

/// Intersects the balanced curves by a dense sign-change scan of
/// F(α_b) = ψ_b(ψ_a(α_b)) − α_b, each crossing refined by bisection.
fn curve_intersections(
    scenario: &Scenario,
    policy: &dyn Policy,
    opts: &EquilibriumOptions,
) -> Result<Vec<QualState>> {
    let m = opts.curve_samples.max(17);
    let sample = |side: GroupId| -> Result<Vec<f64>> {
        (0..m)
            .into_par_iter()
            .map(|j| {
                let other = j as f64 / (m - 1) as f64;
                psi_solve(scenario, policy, side, other, true)
            })
            .collect()
    };
    let curve_a = sample(GroupId::A)?;
    let curve_b = sample(GroupId::B)?;
    let interp = |curve: &[f64], x: f64| -> f64 {
        let fx = x.clamp(0.0, 1.0) * (m - 1) as f64;
        let i = (fx.floor() as usize).min(m - 2);
        let t = fx - i as f64;
        curve[i] + t * (curve[i + 1] - curve[i])
    };
    let approx_f = |ab: f64| interp(&curve_b, interp(&curve_a, ab)) - ab;

    // Candidate brackets: sign changes of the interpolated composition,
    // plus near-zero dips that the interpolation error could hide.
    let mut brackets = root::scan_sign_changes(&approx_f, 0.0, 1.0, opts.scan);
    let step = 1.0 / (opts.scan - 1) as f64;
    let mut prev2 = approx_f(0.0);
    let mut prev = approx_f(step);
    for i in 2..opts.scan {
        let x = i as f64 * step;
        let cur = approx_f(x);
        if prev.abs() < 2e-3 && prev.abs() <= prev2.abs() && prev.abs() <= cur.abs() {
            let lo = (x - 2.0 * step).max(0.0);
            let hi = x.min(1.0);
            if !brackets.iter().any(|&(a, b)| a <= lo && hi <= b) {
                brackets.push((lo, hi));
            }
        }
        prev2 = prev;
        prev = cur;
    }

    // The scanned composition carries a small bias against the exact one
    // (coarse thresholds, interpolated curves), so each candidate bracket
    // is widened by a few scan steps and the exact sign change re-located
    // inside before bisection.
    brackets = {
        let pad = 8.0 * step;
        let mut expanded: Vec<(f64, f64)> = brackets
            .iter()
            .map(|&(lo, hi)| ((lo - pad).max(0.0), (hi + pad).min(1.0)))
            .collect();
        expanded.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in expanded {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    };

    let errs = ErrCell::new();
    let exact_f = |ab: f64| -> f64 {
        let aa = errs.wrap(psi_solve(scenario, policy, GroupId::A, ab, false));
        if aa.is_nan() {
            return f64::NAN;
        }
        errs.wrap(psi_solve(scenario, policy, GroupId::B, aa, false)) - ab
    };
    let mut roots = Vec::new();
    for (lo, hi) in brackets {
        const PROBE: usize = 17;
        let mut prev_x = lo;
        let mut prev_f = exact_f(lo);
        for k in 1..=PROBE {
            let x = lo + (hi - lo) * k as f64 / PROBE as f64;
            let fx = exact_f(x);
            if prev_f.is_nan() || fx.is_nan() {
                prev_x = x;
                prev_f = fx;
                continue;
            }
            if prev_f == 0.0 || prev_f.signum() != fx.signum() {
                let ab = if prev_f == 0.0 {
                    prev_x
                } else {
                    root::bisect(&exact_f, prev_x, x, 1e-10)
                };
                let aa = errs.wrap(psi_solve(scenario, policy, GroupId::A, ab, false));
                roots.push(QualState {
                    alpha_a: aa,
                    alpha_b: ab,
                });
            }
            prev_x = x;
            prev_f = fx;
        }
    }
    errs.check()?;
    Ok(roots)
}

/// Fallback enumeration for condition classes C/D, where the balanced
/// curves may be multivalued: scan the 2-D residual field for cells whose
/// corners change sign in both components, then polish each candidate with
/// a damped finite-difference Newton iteration.
fn cell_scan_intersections(scenario: &Scenario, policy: &dyn Policy) -> Result<Vec<QualState>> {
    const GRID: usize = 129;
    let residuals: Vec<Result<(f64, f64)>> = (0..GRID * GRID)
        .into_par_iter()
        .map(|idx| {
            let i = idx / GRID;
            let j = idx % GRID;
            let aa = (i as f64 / (GRID - 1) as f64).max(PSI_LO);
            let ab = (j as f64 / (GRID - 1) as f64).max(PSI_LO);
            let ra = balance_residual(scenario, policy, GroupId::A, aa, ab, true)?;
            let rb = balance_residual(scenario, policy, GroupId::B, ab, aa, true)?;
            Ok((ra, rb))
        })
        .collect();
    let mut field = Vec::with_capacity(GRID * GRID);
    for r in residuals {
        field.push(r?);
    }
    let at = |i: usize, j: usize| field[i * GRID + j];
    let mut candidates = Vec::new();
    for i in 0..GRID - 1 {
        for j in 0..GRID - 1 {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let sign_change = |pick: fn(&(f64, f64)) -> f64| {
                let mut pos = false;
                let mut neg = false;
                for c in &corners {
                    let v = pick(c);
                    pos |= v >= 0.0;
                    neg |= v <= 0.0;
                }
                pos && neg
            };
            if sign_change(|c| c.0) && sign_change(|c| c.1) {
                candidates.push(QualState {
                    alpha_a: (i as f64 + 0.5) / (GRID - 1) as f64,
                    alpha_b: (j as f64 + 0.5) / (GRID - 1) as f64,
                });
            }
        }
    }
    let mut roots = Vec::new();
    for start in candidates {
        if let Some(state) = newton_polish(scenario, policy, start)? {
            roots.push(state);
        }
    }
    Ok(roots)
}

fn newton_polish(
    scenario: &Scenario,
    policy: &dyn Policy,
    mut state: QualState,
) -> Result<Option<QualState>> {
    let res = |s: &QualState| -> Result<(f64, f64)> {
        Ok((
            balance_residual(scenario, policy, GroupId::A, s.alpha_a, s.alpha_b, false)?,
            balance_residual(scenario, policy, GroupId::B, s.alpha_b, s.alpha_a, false)?,
        ))
    };
    let norm = |r: (f64, f64)| r.0.abs().max(r.1.abs());
    let mut r = res(&state)?;
    for _ in 0..40 {
        if norm(r) <= 1e-9 {
            return Ok(Some(state));
        }
        let h = 1e-6;
        let clamp = |v: f64| v.clamp(PSI_LO, 1.0);
        let ra = res(&QualState {
            alpha_a: clamp(state.alpha_a + h),
            alpha_b: state.alpha_b,
        })?;
        let rb = res(&QualState {
            alpha_a: state.alpha_a,
            alpha_b: clamp(state.alpha_b + h),
        })?;
        let j = [
            [(ra.0 - r.0) / h, (rb.0 - r.0) / h],
            [(ra.1 - r.1) / h, (rb.1 - r.1) / h],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return Ok(None);
        }
        let da = (-r.0 * j[1][1] + r.1 * j[0][1]) / det;
        let db = (-r.1 * j[0][0] + r.0 * j[1][0]) / det;
        let mut lambda = 1.0;
        loop {
            let trial = QualState {
                alpha_a: clamp(state.alpha_a + lambda * da),
                alpha_b: clamp(state.alpha_b + lambda * db),
            };
            let rt = res(&trial)?;
            if norm(rt) < norm(r) || lambda < 1e-4 {
                state = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok(if norm(r) <= 1e-8 { Some(state) } else { None })
}

/// Sufficient-condition uniqueness check on a 33×33 state grid with
/// central finite differences (step 1e-4).
///
/// Under condition class A for both groups only the cross partials
/// |∂h_s/∂α_{-s}| must stay below 1; under class B all four partials must.
/// Mixed or C/D classes are an error: the check does not apply.
///
/// The grid spans [0.01, 0.99] per coordinate: at the degenerate corners
/// (a group entirely qualified or unqualified) the fair optimum can jump
/// discontinuously, so derivative estimates there carry no information
/// about the interior dynamics.
pub fn check_uniqueness(
    scenario: &Scenario,
    constraint: FairnessConstraint,
) -> Result<UniquenessCheck> {
    let policy = threshold_map(scenario, constraint)?;
    uniqueness_of(scenario, &policy, scenario.classes())
}

fn uniqueness_of(
    scenario: &Scenario,
    policy: &dyn Policy,
    classes: (TransitionClass, TransitionClass),
) -> Result<UniquenessCheck> {
    let condition = match classes {
        (TransitionClass::A, TransitionClass::A) => TransitionClass::A,
        (TransitionClass::B, TransitionClass::B) => TransitionClass::B,
        (ca, cb) => return Err(Error::UniquenessInapplicable(ca, cb)),
    };
    const N: usize = 33;
    const H: f64 = 1e-4;
    let h_pair = |state: &QualState| -> Result<(f64, f64)> {
        let t = policy.thresholds(state)?.thetas();
        Ok((
            h_func(scenario.group_a(), t.0),
            h_func(scenario.group_b(), t.1),
        ))
    };
    let partials: Vec<Result<[f64; 4]>> = (0..N * N)
        .into_par_iter()
        .map(|idx| {
            let i = idx / N;
            let j = idx % N;
            let span = 1.0 - 2.0 * H;
            let aa = H + span * i as f64 / (N - 1) as f64;
            let ab = H + span * j as f64 / (N - 1) as f64;
            let up_a = h_pair(&QualState {
                alpha_a: aa + H,
                alpha_b: ab,
            })?;
            let dn_a = h_pair(&QualState {
                alpha_a: aa - H,
                alpha_b: ab,
            })?;
            let up_b = h_pair(&QualState {
                alpha_a: aa,
                alpha_b: ab + H,
            })?;
            let dn_b = h_pair(&QualState {
                alpha_a: aa,
                alpha_b: ab - H,
            })?;
            // [∂h_a/∂α_a, ∂h_a/∂α_b, ∂h_b/∂α_a, ∂h_b/∂α_b]
            Ok([
                (up_a.0 - dn_a.0) / (2.0 * H),
                (up_b.0 - dn_b.0) / (2.0 * H),
                (up_a.1 - dn_a.1) / (2.0 * H),
                (up_b.1 - dn_b.1) / (2.0 * H),
            ])
        })
        .collect();
    let mut max_own: f64 = 0.0;
    let mut max_cross: f64 = 0.0;
    for p in partials {
        let [daa, dab, dba, dbb] = p?;
        max_own = max_own.max(daa.abs()).max(dbb.abs());
        max_cross = max_cross.max(dab.abs()).max(dba.abs());
    }
    let unique = match condition {
        TransitionClass::A => max_cross < 1.0 - 1e-6,
        _ => max_cross < 1.0 - 1e-6 && max_own < 1.0 - 1e-6,
    };
    Ok(UniquenessCheck {
        unique,
        condition,
        max_cross_partial: max_cross,
        max_own_partial: max_own,
    })
}

/// One-step map Φ of the dynamics under `policy`.
fn phi(scenario: &Scenario, policy: &dyn Policy, state: &QualState) -> Result<QualState> {
    let pair = policy.thresholds(state)?;
    Ok(crate::dynamics::step(scenario, state, &pair))
}

/// Finite-difference Jacobian of Φ at `state` (central differences).
fn phi_jacobian(
    scenario: &Scenario,
    policy: &dyn Policy,
    state: &QualState,
    h: f64,
) -> Result<[[f64; 2]; 2]> {
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let pa_hi = phi(
        scenario,
        policy,
        &QualState {
            alpha_a: clamp(state.alpha_a + h),
            alpha_b: state.alpha_b,
        },
    )?;
    let pa_lo = phi(
        scenario,
        policy,
        &QualState {
            alpha_a: clamp(state.alpha_a - h),
            alpha_b: state.alpha_b,
        },
    )?;
    let pb_hi = phi(
        scenario,
        policy,
        &QualState {
            alpha_a: state.alpha_a,
            alpha_b: clamp(state.alpha_b + h),
        },
    )?;
    let pb_lo = phi(
        scenario,
        policy,
        &QualState {
            alpha_a: state.alpha_a,
            alpha_b: clamp(state.alpha_b - h),
        },
    )?;
    let da = clamp(state.alpha_a + h) - clamp(state.alpha_a - h);
    let db = clamp(state.alpha_b + h) - clamp(state.alpha_b - h);
    Ok([
        [
            (pa_hi.alpha_a - pa_lo.alpha_a) / da,
            (pb_hi.alpha_a - pb_lo.alpha_a) / db,
        ],
        [
            (pa_hi.alpha_b - pa_lo.alpha_b) / da,
            (pb_hi.alpha_b - pb_lo.alpha_b) / db,
        ],
    ])
}

/// Grid estimate of the Lipschitz constant of the one-step map in the sup
/// norm. Below 1, the map is a contraction: the equilibrium is unique and
/// reached from every initial state.
pub fn lipschitz_estimate(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    grid: usize,
) -> Result<f64> {
    let policy = threshold_map(scenario, constraint)?;
    lipschitz_of(scenario, &policy, grid)
}

fn lipschitz_of(scenario: &Scenario, policy: &dyn Policy, grid: usize) -> Result<f64> {
    let n = grid.max(3);
    const H: f64 = 1e-4;
    let norms: Vec<Result<f64>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let i = idx / n;
            let j = idx % n;
            let span = 1.0 - 2.0 * H;
            let state = QualState {
                alpha_a: H + span * i as f64 / (n - 1) as f64,
                alpha_b: H + span * j as f64 / (n - 1) as f64,
            };
            let j = phi_jacobian(scenario, policy, &state, H)?;
            let r0 = j[0][0].abs() + j[0][1].abs();
            let r1 = j[1][0].abs() + j[1][1].abs();
            Ok(r0.max(r1))
        })
        .collect();
    let mut max = 0.0f64;
    for v in norms {
        max = max.max(v?);
    }
    Ok(max)
}

/// Stability flag per equilibrium: spectral radius of the one-step
/// Jacobian strictly below 1.
pub fn stability_flags(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    equilibria: &[Equilibrium],
) -> Result<Vec<bool>> {
    let policy = threshold_map(scenario, constraint)?;
    stability_of(scenario, &policy, equilibria)
}

fn stability_of(
    scenario: &Scenario,
    policy: &dyn Policy,
    equilibria: &[Equilibrium],
) -> Result<Vec<bool>> {
    equilibria
        .iter()
        .map(|eq| {
            let j = phi_jacobian(scenario, policy, &eq.state, 1e-4)?;
            Ok(spectral_radius(j) < 1.0 - 1e-6)
        })
        .collect()
}

fn spectral_radius(j: [[f64; 2]; 2]) -> f64 {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (0.5 * (tr + s)).abs().max((0.5 * (tr - s)).abs())
    } else {
        det.abs().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FeatureDistribution as FD;
    use crate::model::TransitionMatrix;

    fn group(t: (f64, f64, f64, f64)) -> GroupModel {
        GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(t.0, t.1, t.2, t.3).unwrap(),
            0.5,
        )
        .unwrap()
    }

    fn fig2_scenario() -> Scenario {
        Scenario::new(
            group((0.4, 0.5, 0.5, 0.9)),
            group((0.1, 0.5, 0.5, 0.7)),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn h_func_limits() {
        let g = group((0.4, 0.5, 0.5, 0.9));
        // reject-all: (1 - T10)/T00; accept-all: (1 - T11)/T01
        assert!((h_func(&g, f64::INFINITY) - 0.5 / 0.4).abs() < 1e-12);
        assert!((h_func(&g, f64::NEG_INFINITY) - 0.1 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn h_constant_for_policy_independent_transitions() {
        let g = group((0.2, 0.2, 0.8, 0.8));
        for theta in [-4.0, 0.0, 3.0] {
            assert!((h_func(&g, theta) - 0.2 / 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_independent_transitions_have_closed_form_equilibrium() {
        // T0 = 0.2, T1 = 0.8 for both groups → α̂ = T0/(1 - T1 + T0) = 0.5.
        let s = Scenario::new(
            group((0.2, 0.2, 0.8, 0.8)),
            group((0.2, 0.2, 0.8, 0.8)),
            1.0,
            1.0,
        )
        .unwrap();
        let report = find_equilibria(&s, FairnessConstraint::Unconstrained).unwrap();
        assert_eq!(report.equilibria.len(), 1);
        let eq = report.equilibria[0].state;
        assert!((eq.alpha_a - 0.5).abs() < 1e-8);
        assert!((eq.alpha_b - 0.5).abs() < 1e-8);
        // Linear map: Lipschitz constant |T1 - T0| = 0.6, stable.
        assert!((report.lipschitz_estimate.unwrap() - 0.6).abs() < 1e-3);
        assert!(report.stable[0]);
        // Balanced functions are constant in the other rate.
        let bf = balanced_functions(&s, FairnessConstraint::Unconstrained, 16).unwrap();
        assert!((bf.psi_a(0.1).unwrap() - 0.5).abs() < 1e-9);
        assert!((bf.psi_a(0.9).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn identical_symmetric_groups_equilibrium_on_diagonal() {
        let s = Scenario::new(
            group((0.4, 0.5, 0.5, 0.9)),
            group((0.4, 0.5, 0.5, 0.9)),
            1.0,
            1.0,
        )
        .unwrap();
        for c in FairnessConstraint::ALL {
            let report = find_equilibria(&s, c).unwrap();
            assert_eq!(report.equilibria.len(), 1, "{c}");
            let eq = report.equilibria[0].state;
            assert!((eq.alpha_a - eq.alpha_b).abs() < 1e-7, "{c}: {eq:?}");
        }
    }

    #[test]
    fn fig2_equilibrium_matches_simulation() {
        let s = fig2_scenario();
        for c in FairnessConstraint::ALL {
            let report = find_equilibria(&s, c).unwrap();
            assert_eq!(report.equilibria.len(), 1, "{c}");
            let eq = report.equilibria[0];
            assert!(eq.residual_a.abs() <= 1e-7 && eq.residual_b.abs() <= 1e-7);
            let traj = crate::dynamics::simulate(
                &s,
                c,
                QualState::new(0.9, 0.1).unwrap(),
                10_000,
                1e-10,
            )
            .unwrap();
            assert!(
                traj.last_state().dist(&eq.state) < 1e-6,
                "{c}: sim {:?} vs eq {:?}",
                traj.last_state(),
                eq.state
            );
            assert!(report.stable[0], "{c}");
        }
    }

    #[test]
    fn unconstrained_condition_a_uniqueness_always_holds() {
        let s = Scenario::new(
            group((0.6, 0.4, 0.8, 0.5)),
            group((0.7, 0.3, 0.9, 0.6)),
            1.0,
            1.0,
        )
        .unwrap();
        let check = check_uniqueness(&s, FairnessConstraint::Unconstrained).unwrap();
        assert!(check.unique);
        assert_eq!(check.condition, TransitionClass::A);
        assert!(check.max_cross_partial < 1e-9);
    }

    #[test]
    fn uniqueness_check_rejects_mixed_classes() {
        let s = Scenario::new(
            group((0.3, 0.5, 0.9, 0.4)), // class C
            group((0.4, 0.5, 0.5, 0.9)), // class B
            1.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            check_uniqueness(&s, FairnessConstraint::Unconstrained),
            Err(Error::UniquenessInapplicable(..))
        ));
    }

    #[test]
    fn equilibrium_is_fixed_point_of_step() {
        let s = fig2_scenario();
        for c in FairnessConstraint::ALL {
            let report = find_equilibria(&s, c).unwrap();
            let eq = report.equilibria[0].state;
            let policy = threshold_map(&s, c).unwrap();
            let pair = policy.thresholds(&eq).unwrap();
            let next = crate::dynamics::step(&s, &eq, &pair);
            assert!(next.dist(&eq) < 1e-7, "{c}");
        }
    }
}
