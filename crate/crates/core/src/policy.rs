//! Optimal threshold policies for a given qualification state.
//!
//! The unconstrained policy accepts exactly when the qualification profile
//! γ(x) reaches the break-even level u₋/(u₊+u₋); under the monotone
//! likelihood ratio assumption that is a per-group threshold on the
//! feature.
//!
//! A fair policy must give both groups the same tail mass under their
//! constraint distributions, so the pair of thresholds is parametrized by
//! a single shared acceptance mass q ∈ [0, 1]:
//!
//! θ_s(q) = smallest x with 𝒫_C^s(X ≤ x) ≥ 1 − q.
//!
//! The fairness constraint is then the identity in q, q ∈ [0, 1] is
//! compact, and the fair solve becomes a one-dimensional maximization of
//! the expected utility over q. The maximizer is located by a 512-point
//! coarse scan (robust against non-concave objectives from exotic
//! tabulated densities) and refined locally to 1e-9 in q.

use crate::dist::FeatureDistribution;
use crate::error::{Error, Result};
use crate::model::{
    constraint_cdf, constraint_density, expected_utility, qualification_profile,
    FairnessConstraint, GroupModel, QualState, Scenario,
};
use crate::root;

/// Resolution of the coarse q-scan in the fair solver.
const Q_SCAN: usize = 512;
/// Resolution of the precomputed CDF tables backing the coarse scan.
const TABLE_N: usize = 2048;
/// Width of the refined q bracket at which refinement stops.
const Q_TOL: f64 = 1e-9;
/// q values closer than this to 0 or 1 are reported as boundary optima.
const Q_BOUNDARY: f64 = 1e-9;

/// A pair of group thresholds (extended reals: ±∞ admitted) produced by a
/// policy solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub theta_a: f64,
    pub theta_b: f64,
    pub constraint: FairnessConstraint,
    /// |tail mass gap| between the two groups' constraint distributions;
    /// zero for the unconstrained policy.
    pub fairness_residual: f64,
    /// True when the optimum sits at q ∈ {0, 1} (reject-all / accept-all).
    pub boundary: bool,
    /// True when a threshold fell on a flat stretch of the constraint CDF
    /// (set-valued inverse; the smallest threshold was chosen).
    pub flat_cdf: bool,
    /// Number of local maxima seen in the coarse scan of the fair
    /// objective (1 for a well-behaved unimodal solve).
    pub local_optima: usize,
}

impl ThresholdPair {
    pub fn thetas(&self) -> (f64, f64) {
        (self.theta_a, self.theta_b)
    }
}

/// A threshold rule as a function of the qualification state.
pub trait Policy: Sync {
    fn thresholds(&self, state: &QualState) -> Result<ThresholdPair>;

    /// Cheaper, lower-accuracy variant used by equilibrium curve scans;
    /// defaults to the exact solve.
    fn thresholds_coarse(&self, state: &QualState) -> Result<(f64, f64)> {
        self.thresholds(state).map(|p| (p.theta_a, p.theta_b))
    }
}

/// Smallest threshold θ with γ(θ) equal to the break-even level, found by
/// bracketed bisection on the (non-decreasing) qualification profile.
///
/// Returns `+∞` when the profile never reaches the level (reject all) and
/// `-∞` when it exceeds the level over the whole support (accept all).
/// A non-monotone profile sample — a monotone likelihood ratio violation —
/// is an error.
pub fn unconstrained_threshold(group: &GroupModel, alpha: f64, break_even: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(break_even > 0.0 && break_even < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "break-even level must lie in (0, 1), got {break_even}"
        )));
    }
    if alpha == 0.0 {
        return Ok(f64::INFINITY);
    }
    if alpha == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (lo, hi) = group.support();
    const SCAN: usize = 129;
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut prev: Option<(f64, f64)> = None; // last defined (x, γ)
    let mut bracket: Option<(f64, f64)> = None;
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for i in 0..SCAN {
        let x = lo + step * i as f64;
        // Points where both class densities vanish (support edges of
        // bounded kinds) carry no information; skip them.
        let g = match qualification_profile(group, alpha, x) {
            Ok(g) => g,
            Err(Error::OutsideSupport(_)) => continue,
            Err(e) => return Err(e),
        };
        if let Some((px, pg)) = prev {
            if g < pg - 1e-9 {
                return Err(Error::MlrViolation { at: x });
            }
            if bracket.is_none() && g >= break_even && pg < break_even {
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
    if first > break_even {
        return Ok(f64::NEG_INFINITY);
    }
    if first == break_even {
        return Ok(lo);
    }
    if last < break_even {
        return Ok(f64::INFINITY);
    }
    let (blo, bhi) = bracket.expect("crossing bracketed by the scan");
    let gamma = |x: f64| qualification_profile(group, alpha, x).unwrap_or(0.0);
    Ok(
        root::first_true(|x| gamma(x) >= break_even, blo, bhi, 1e-12 * (1.0 + bhi.abs()))
            .unwrap_or(bhi),
    )
}

/// Precomputed per-group class CDF tables on a shared grid; the coarse fair
/// solve runs entirely on these (no special-function calls).
#[derive(Debug, Clone)]
struct Tables {
    xs: Vec<f64>,
    a0: Vec<f64>,
    a1: Vec<f64>,
    b0: Vec<f64>,
    b1: Vec<f64>,
}

impl Tables {
    fn build(scenario: &Scenario) -> Tables {
        let (la, ha) = scenario.group_a().support();
        let (lb, hb) = scenario.group_b().support();
        let lo = la.min(lb);
        let hi = ha.max(hb);
        let mut xs = Vec::with_capacity(TABLE_N);
        let step = (hi - lo) / (TABLE_N - 1) as f64;
        for i in 0..TABLE_N {
            xs.push(lo + step * i as f64);
        }
        let eval = |d: &FeatureDistribution| xs.iter().map(|&x| d.cdf(x)).collect::<Vec<_>>();
        Tables {
            a0: eval(scenario.group_a().g0()),
            a1: eval(scenario.group_a().g1()),
            b0: eval(scenario.group_b().g0()),
            b1: eval(scenario.group_b().g1()),
            xs,
        }
    }
}

/// Index pair selecting one group's tables.
#[derive(Clone, Copy)]
enum Side {
    A,
    B,
}

/// Deterministic, memoizable map from qualification state to the optimal
/// (fair) threshold pair for one scenario and constraint.
pub struct PolicyMap<'a> {
    scenario: &'a Scenario,
    constraint: FairnessConstraint,
    tables: Option<Tables>,
}

/// Builds the threshold map for a scenario under a constraint.
pub fn threshold_map(
    scenario: &Scenario,
    constraint: FairnessConstraint,
) -> Result<PolicyMap<'_>> {
    PolicyMap::new(scenario, constraint)
}

impl<'a> PolicyMap<'a> {
    pub fn new(scenario: &'a Scenario, constraint: FairnessConstraint) -> Result<Self> {
        let tables = match constraint {
            FairnessConstraint::Unconstrained => None,
            _ => Some(Tables::build(scenario)),
        };
        Ok(PolicyMap {
            scenario,
            constraint,
            tables,
        })
    }

    pub fn constraint(&self) -> FairnessConstraint {
        self.constraint
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    fn group(&self, side: Side) -> &GroupModel {
        match side {
            Side::A => self.scenario.group_a(),
            Side::B => self.scenario.group_b(),
        }
    }

    fn alpha(&self, side: Side, state: &QualState) -> f64 {
        match side {
            Side::A => state.alpha_a,
            Side::B => state.alpha_b,
        }
    }

    /// Constraint-distribution CDF value at table index `i`.
    fn table_ccdf(&self, side: Side, state: &QualState, i: usize) -> f64 {
        let t = self.tables.as_ref().expect("fair constraint has tables");
        let (c0, c1) = match side {
            Side::A => (&t.a0, &t.a1),
            Side::B => (&t.b0, &t.b1),
        };
        match self.constraint {
            FairnessConstraint::EqualOpportunity => c1[i],
            FairnessConstraint::DemographicParity => {
                let alpha = self.alpha(side, state);
                (1.0 - alpha) * c0[i] + alpha * c1[i]
            }
            FairnessConstraint::Unconstrained => unreachable!(),
        }
    }

    /// Fractional table index of the smallest grid position where the
    /// constraint CDF reaches `p`.
    fn table_quantile_index(&self, side: Side, state: &QualState, p: f64) -> f64 {
        let n = TABLE_N;
        if self.table_ccdf(side, state, 0) >= p {
            return 0.0;
        }
        if self.table_ccdf(side, state, n - 1) < p {
            return (n - 1) as f64;
        }
        let mut lo = 0usize; // ccdf(lo) < p
        let mut hi = n - 1; // ccdf(hi) >= p
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.table_ccdf(side, state, mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let clo = self.table_ccdf(side, state, lo);
        let chi = self.table_ccdf(side, state, hi);
        let t = if chi > clo { (p - clo) / (chi - clo) } else { 0.0 };
        lo as f64 + t
    }

    fn table_x(&self, f: f64) -> f64 {
        let t = self.tables.as_ref().unwrap();
        let i = (f.floor() as usize).min(TABLE_N - 2);
        let frac = (f - i as f64).clamp(0.0, 1.0);
        t.xs[i] + frac * (t.xs[i + 1] - t.xs[i])
    }

    fn table_interp(arr: &[f64], f: f64) -> f64 {
        let i = (f.floor() as usize).min(arr.len() - 2);
        let frac = (f - i as f64).clamp(0.0, 1.0);
        arr[i] + frac * (arr[i + 1] - arr[i])
    }

    /// Constraint-distribution CDF arrays for both groups at `state`.
    fn state_arrays(&self, state: &QualState) -> (Vec<f64>, Vec<f64>) {
        let t = self.tables.as_ref().expect("fair constraint has tables");
        match self.constraint {
            FairnessConstraint::EqualOpportunity => (t.a1.clone(), t.b1.clone()),
            FairnessConstraint::DemographicParity => {
                let mix = |c0: &[f64], c1: &[f64], alpha: f64| {
                    c0.iter()
                        .zip(c1)
                        .map(|(&x0, &x1)| (1.0 - alpha) * x0 + alpha * x1)
                        .collect::<Vec<f64>>()
                };
                (
                    mix(&t.a0, &t.a1, state.alpha_a),
                    mix(&t.b0, &t.b1, state.alpha_b),
                )
            }
            FairnessConstraint::Unconstrained => unreachable!(),
        }
    }

    /// Table-accurate utilities over the whole q-scan in one monotone sweep
    /// (the quantile pointer only ever moves left as q grows).
    fn coarse_scan(&self, state: &QualState) -> Vec<f64> {
        let t = self.tables.as_ref().expect("fair constraint has tables");
        let (ca, cb) = self.state_arrays(state);
        let s = self.scenario;
        let mut us = Vec::with_capacity(Q_SCAN + 1);
        let mut ia = TABLE_N - 1;
        let mut ib = TABLE_N - 1;
        for k in 0..=Q_SCAN {
            let p = 1.0 - k as f64 / Q_SCAN as f64;
            while ia > 1 && ca[ia - 1] >= p {
                ia -= 1;
            }
            while ib > 1 && cb[ib - 1] >= p {
                ib -= 1;
            }
            let frac = |c: &[f64], i: usize| -> f64 {
                let (clo, chi) = (c[i - 1], c[i]);
                let t = if chi > clo {
                    ((p - clo) / (chi - clo)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (i - 1) as f64 + t
            };
            let fa = if ca[0] >= p { 0.0 } else { frac(&ca, ia) };
            let fb = if cb[0] >= p { 0.0 } else { frac(&cb, ib) };
            let ua = state.alpha_a * s.u_plus() * (1.0 - Self::table_interp(&t.a1, fa))
                - (1.0 - state.alpha_a) * s.u_minus() * (1.0 - Self::table_interp(&t.a0, fa));
            let ub = state.alpha_b * s.u_plus() * (1.0 - Self::table_interp(&t.b1, fb))
                - (1.0 - state.alpha_b) * s.u_minus() * (1.0 - Self::table_interp(&t.b0, fb));
            us.push(s.group_a().share() * ua + s.group_b().share() * ub);
        }
        us
    }

    /// Exact constraint quantile (smallest threshold), warm-started from
    /// the tables.
    fn exact_threshold(&self, side: Side, state: &QualState, q: f64) -> Result<f64> {
        let p = 1.0 - q;
        let group = self.group(side);
        let alpha = self.alpha(side, state);
        let c = self.constraint;
        let cdf = |x: f64| constraint_cdf(group, alpha, c, x).expect("fair constraint");
        let pdf = |x: f64| constraint_density(group, alpha, c, x).expect("fair constraint");
        let t = self.tables.as_ref().unwrap();
        let f = self.table_quantile_index(side, state, p);
        let mut ilo = (f.floor() as usize).saturating_sub(1);
        let mut ihi = ((f.ceil() as usize) + 1).min(TABLE_N - 1);
        // Widen until the true CDF brackets p (the table is approximate).
        while ilo > 0 && cdf(t.xs[ilo]) >= p {
            ilo = ilo.saturating_sub(4);
        }
        while ihi < TABLE_N - 1 && cdf(t.xs[ihi]) < p {
            ihi = (ihi + 4).min(TABLE_N - 1);
        }
        let (lo, hi) = (t.xs[ilo], t.xs[ihi]);
        Ok(root::invert_cdf(cdf, Some(pdf), lo, hi, p, 1e-13))
    }

    fn exact_pair_at_q(&self, state: &QualState, q: f64) -> Result<(f64, f64)> {
        Ok((
            self.exact_threshold(Side::A, state, q)?,
            self.exact_threshold(Side::B, state, q)?,
        ))
    }

    /// First-order-condition residual at shared mass `q` (the derivative of
    /// the utility with respect to q, up to the positive factor u₊+u₋).
    fn foc(&self, state: &QualState, q: f64) -> Result<f64> {
        let (ta, tb) = self.exact_pair_at_q(state, q)?;
        Ok(self.foc_at(state, ta, tb))
    }

    fn foc_at(&self, state: &QualState, theta_a: f64, theta_b: f64) -> f64 {
        let be = self.scenario.break_even();
        let term = |side: Side, theta: f64| -> f64 {
            let group = self.group(side);
            let alpha = self.alpha(side, state);
            let dc = constraint_density(group, alpha, self.constraint, theta)
                .expect("fair constraint");
            if !theta.is_finite() || dc < 1e-300 {
                return 0.0;
            }
            let num = alpha * (1.0 - be) * group.g1().pdf(theta)
                - (1.0 - alpha) * be * group.g0().pdf(theta);
            num / dc
        };
        self.scenario.group_a().share() * term(Side::A, theta_a)
            + self.scenario.group_b().share() * term(Side::B, theta_b)
    }

    /// Full fair solve at `state`: 512-point coarse scan on the tables,
    /// golden-section refinement of the exact objective, first-order-
    /// condition polish.
    fn solve_fair(&self, state: &QualState) -> Result<ThresholdPair> {
        let m = Q_SCAN;
        let us = self.coarse_scan(state);
        let mut best = 0usize;
        for (k, u) in us.iter().enumerate() {
            if *u > us[best] {
                best = k;
            }
        }
        let mut local_optima = 0usize;
        for k in 0..=m {
            let left_ok = k == 0 || us[k] > us[k - 1];
            let right_ok = k == m || us[k] >= us[k + 1];
            if left_ok && right_ok {
                local_optima += 1;
            }
        }
        let qlo = (best.saturating_sub(1)) as f64 / m as f64;
        let qhi = ((best + 1).min(m)) as f64 / m as f64;
        let exact_u = |q: f64| -> f64 {
            match self.exact_pair_at_q(state, q) {
                Ok(p) => expected_utility(self.scenario, state, p),
                Err(_) => f64::NEG_INFINITY,
            }
        };
        // The utility is maximal where its q-derivative (the first-order
        // condition) crosses zero; root-finding that crossing resolves q far
        // beyond what comparing near-equal utilities can. Golden section is
        // the fallback for brackets without a clean sign change.
        let flo = self.foc(state, qlo).unwrap_or(f64::NAN);
        let fhi = self.foc(state, qhi).unwrap_or(f64::NAN);
        let mut q = if flo.is_finite() && fhi.is_finite() && flo > 0.0 && fhi < 0.0 {
            root::brent(|qq| self.foc(state, qq).unwrap_or(0.0), qlo, qhi, 1e-13)
        } else {
            root::golden_max(exact_u, qlo, qhi, Q_TOL)
        };
        if self.foc(state, q).map(|f| f.abs() > 1e-8).unwrap_or(false) {
            // Last-resort polish around the golden-section result.
            let w = 64.0 * Q_TOL;
            let (plo, phi) = ((q - w).max(0.0), (q + w).min(1.0));
            if let (Ok(flo), Ok(fhi)) = (self.foc(state, plo), self.foc(state, phi)) {
                if flo.is_finite() && fhi.is_finite() && flo > 0.0 && fhi < 0.0 {
                    q = root::brent(|qq| self.foc(state, qq).unwrap_or(0.0), plo, phi, 1e-13);
                }
            }
        }

        if q <= Q_BOUNDARY && exact_u(0.0) >= exact_u(q) {
            return Ok(self.boundary_pair(f64::INFINITY, local_optima));
        }
        if q >= 1.0 - Q_BOUNDARY && exact_u(1.0) >= exact_u(q) {
            return Ok(self.boundary_pair(f64::NEG_INFINITY, local_optima));
        }

        let (ta, tb) = self.exact_pair_at_q(state, q)?;
        let gap = self.fairness_gap(state, ta, tb)?;
        let flat = constraint_density(self.group(Side::A), state.alpha_a, self.constraint, ta)?
            < 1e-12
            || constraint_density(self.group(Side::B), state.alpha_b, self.constraint, tb)?
                < 1e-12;
        Ok(ThresholdPair {
            theta_a: ta,
            theta_b: tb,
            constraint: self.constraint,
            fairness_residual: gap,
            boundary: false,
            flat_cdf: flat,
            local_optima,
        })
    }

    fn boundary_pair(&self, theta: f64, local_optima: usize) -> ThresholdPair {
        ThresholdPair {
            theta_a: theta,
            theta_b: theta,
            constraint: self.constraint,
            fairness_residual: 0.0,
            boundary: true,
            flat_cdf: false,
            local_optima,
        }
    }

    fn fairness_gap(&self, state: &QualState, ta: f64, tb: f64) -> Result<f64> {
        let pa = constraint_cdf(self.scenario.group_a(), state.alpha_a, self.constraint, ta)?;
        let pb = constraint_cdf(self.scenario.group_b(), state.alpha_b, self.constraint, tb)?;
        Ok((pa - pb).abs())
    }
}

impl PolicyMap<'_> {
    /// Shared acceptance mass realized by a fair threshold pair.
    pub fn acceptance_mass(&self, state: &QualState, pair: &ThresholdPair) -> Result<f64> {
        let cdf = constraint_cdf(
            self.scenario.group_a(),
            state.alpha_a,
            self.constraint,
            pair.theta_a,
        )?;
        Ok(1.0 - cdf)
    }

    /// Threshold pair with the shared acceptance mass forced to `q`
    /// (fairness-preserving by construction).
    pub fn pair_at_mass(&self, state: &QualState, q: f64) -> Result<ThresholdPair> {
        if self.constraint == FairnessConstraint::Unconstrained {
            return Err(Error::NoConstraintDistribution);
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "acceptance mass must lie in [0, 1], got {q}"
            )));
        }
        let (ta, tb) = self.exact_pair_at_q(state, q)?;
        let gap = self.fairness_gap(state, ta, tb)?;
        Ok(ThresholdPair {
            theta_a: ta,
            theta_b: tb,
            constraint: self.constraint,
            fairness_residual: gap,
            boundary: false,
            flat_cdf: false,
            local_optima: 0,
        })
    }
}

impl Policy for PolicyMap<'_> {
    fn thresholds(&self, state: &QualState) -> Result<ThresholdPair> {
        match self.constraint {
            FairnessConstraint::Unconstrained => {
                let be = self.scenario.break_even();
                let ta = unconstrained_threshold(self.scenario.group_a(), state.alpha_a, be)?;
                let tb = unconstrained_threshold(self.scenario.group_b(), state.alpha_b, be)?;
                Ok(ThresholdPair {
                    theta_a: ta,
                    theta_b: tb,
                    constraint: FairnessConstraint::Unconstrained,
                    fairness_residual: 0.0,
                    boundary: !ta.is_finite() || !tb.is_finite(),
                    flat_cdf: false,
                    local_optima: 1,
                })
            }
            _ => self.solve_fair(state),
        }
    }

    fn thresholds_coarse(&self, state: &QualState) -> Result<(f64, f64)> {
        match self.constraint {
            FairnessConstraint::Unconstrained => {
                self.thresholds(state).map(|p| (p.theta_a, p.theta_b))
            }
            _ => {
                let m = Q_SCAN;
                let us = self.coarse_scan(state);
                let mut best = 0usize;
                for (k, u) in us.iter().enumerate() {
                    if *u > us[best] {
                        best = k;
                    }
                }
                // Parabolic touch-up of the scan maximum.
                let mut q = best as f64 / m as f64;
                if best > 0 && best < m {
                    let (f0, f1, f2) = (us[best - 1], us[best], us[best + 1]);
                    let denom = f0 - 2.0 * f1 + f2;
                    if denom < 0.0 {
                        let shift = 0.5 * (f0 - f2) / denom;
                        q += shift.clamp(-0.5, 0.5) / m as f64;
                    }
                }
                let fa = self.table_quantile_index(Side::A, state, 1.0 - q);
                let fb = self.table_quantile_index(Side::B, state, 1.0 - q);
                Ok((self.table_x(fa), self.table_x(fb)))
            }
        }
    }
}

/// A sub-optimal policy that shifts the optimal one by a fixed amount:
/// positive offsets make the policy stricter (higher thresholds).
///
/// Under a fairness constraint the shift is applied in the shared
/// acceptance-mass coordinate, so the constraint keeps holding exactly;
/// under the unconstrained policy it is applied to the thresholds
/// themselves.
pub struct OffsetPolicy<'a> {
    base: PolicyMap<'a>,
    offset: f64,
}

impl<'a> OffsetPolicy<'a> {
    pub fn new(
        scenario: &'a Scenario,
        constraint: FairnessConstraint,
        offset: f64,
    ) -> Result<Self> {
        Ok(OffsetPolicy {
            base: PolicyMap::new(scenario, constraint)?,
            offset,
        })
    }

    /// Errors when applying the offset at `state` pushes the shared
    /// acceptance mass outside (0, 1).
    pub fn check_mass(&self, state: &QualState) -> Result<()> {
        if self.base.constraint() == FairnessConstraint::Unconstrained {
            return Ok(());
        }
        let pair = self.base.thresholds(state)?;
        let q = self.base.acceptance_mass(state, &pair)?;
        let q_alt = q - self.offset;
        if !(q_alt > 0.0 && q_alt < 1.0) {
            return Err(Error::InvalidIntervention(format!(
                "offset pushes the acceptance mass to {q_alt}, outside (0, 1)"
            )));
        }
        Ok(())
    }
}

impl Policy for OffsetPolicy<'_> {
    fn thresholds(&self, state: &QualState) -> Result<ThresholdPair> {
        let pair = self.base.thresholds(state)?;
        match self.base.constraint() {
            FairnessConstraint::Unconstrained => Ok(ThresholdPair {
                theta_a: pair.theta_a + self.offset,
                theta_b: pair.theta_b + self.offset,
                ..pair
            }),
            _ => {
                let q = if pair.boundary {
                    if pair.theta_a == f64::INFINITY {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    self.base.acceptance_mass(state, &pair)?
                };
                // Clamped at extreme states so equilibrium curve scans can
                // probe the whole unit square; interventions re-check the
                // mass at the states that matter (the equilibria).
                let q_alt = (q - self.offset).clamp(0.0, 1.0);
                self.base.pair_at_mass(state, q_alt)
            }
        }
    }
}

/// A state-independent threshold pair (the simplest non-increasing
/// threshold rule).
#[derive(Debug, Clone, Copy)]
pub struct FixedPolicy {
    pub theta_a: f64,
    pub theta_b: f64,
}

impl Policy for FixedPolicy {
    fn thresholds(&self, _state: &QualState) -> Result<ThresholdPair> {
        Ok(ThresholdPair {
            theta_a: self.theta_a,
            theta_b: self.theta_b,
            constraint: FairnessConstraint::Unconstrained,
            fairness_residual: 0.0,
            boundary: false,
            flat_cdf: false,
            local_optima: 1,
        })
    }
}

/// Convenience one-shot fair solve; builds the threshold map internally.
pub fn fair_thresholds(
    scenario: &Scenario,
    state: &QualState,
    constraint: FairnessConstraint,
) -> Result<ThresholdPair> {
    if constraint == FairnessConstraint::Unconstrained {
        return Err(Error::InvalidParameter(
            "fair_thresholds requires a fairness constraint; use threshold_map for the \
             unconstrained policy"
                .into(),
        ));
    }
    PolicyMap::new(scenario, constraint)?.thresholds(state)
}

/// Diagnostic residual pair for a solved threshold pair: the first-order
/// condition residual and the fairness tail-mass gap.
pub fn fair_policy_residual(
    scenario: &Scenario,
    state: &QualState,
    pair: &ThresholdPair,
) -> Result<(f64, f64)> {
    if pair.constraint == FairnessConstraint::Unconstrained {
        return Err(Error::NoConstraintDistribution);
    }
    let map = PolicyMap::new(scenario, pair.constraint)?;
    if pair.boundary {
        return Ok((0.0, map.fairness_gap(state, pair.theta_a, pair.theta_b)?));
    }
    let foc = map.foc_at(state, pair.theta_a, pair.theta_b);
    let gap = map.fairness_gap(state, pair.theta_a, pair.theta_b)?;
    Ok((foc, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FeatureDistribution as FD;
    use crate::model::TransitionMatrix;

    fn fig2_scenario() -> Scenario {
        let a = GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
            0.5,
        )
        .unwrap();
        let b = GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(0.1, 0.5, 0.5, 0.7).unwrap(),
            0.5,
        )
        .unwrap();
        Scenario::new(a, b, 1.0, 1.0).unwrap()
    }

    #[test]
    fn symmetric_unconstrained_threshold_is_zero() {
        let s = fig2_scenario();
        let t = unconstrained_threshold(s.group_a(), 0.5, s.break_even()).unwrap();
        assert!(t.abs() < 1e-9, "got {t}");
        let t = unconstrained_threshold(s.group_b(), 0.5, s.break_even()).unwrap();
        assert!(t.abs() < 1e-9, "got {t}");
    }

    #[test]
    fn degenerate_alphas_give_infinite_thresholds() {
        let s = fig2_scenario();
        assert_eq!(
            unconstrained_threshold(s.group_a(), 0.0, 0.5).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            unconstrained_threshold(s.group_a(), 1.0, 0.5).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn identical_groups_fair_equals_unconstrained() {
        let g = GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
            0.5,
        )
        .unwrap();
        let s = Scenario::new(g.clone(), g, 1.0, 1.0).unwrap();
        let state = QualState::new(0.37, 0.37).unwrap();
        let un = unconstrained_threshold(s.group_a(), 0.37, s.break_even()).unwrap();
        for c in [
            FairnessConstraint::DemographicParity,
            FairnessConstraint::EqualOpportunity,
        ] {
            let pair = fair_thresholds(&s, &state, c).unwrap();
            assert!(
                (pair.theta_a - un).abs() < 1e-7 && (pair.theta_b - un).abs() < 1e-7,
                "{c}: {:?} vs UN {un}",
                pair.thetas()
            );
            assert!(pair.fairness_residual <= 1e-7);
            let (foc, gap) = fair_policy_residual(&s, &state, &pair).unwrap();
            assert!(foc.abs() <= 1e-7, "foc {foc}");
            assert!(gap <= 1e-7, "gap {gap}");
        }
    }

    #[test]
    fn fair_residuals_within_contract() {
        let s = fig2_scenario();
        let state = QualState::new(0.3, 0.6).unwrap();
        for c in [
            FairnessConstraint::DemographicParity,
            FairnessConstraint::EqualOpportunity,
        ] {
            let pair = fair_thresholds(&s, &state, c).unwrap();
            assert!(!pair.boundary);
            let (foc, gap) = fair_policy_residual(&s, &state, &pair).unwrap();
            assert!(foc.abs() <= 1e-7, "{c}: foc residual {foc}");
            assert!(gap <= 1e-7, "{c}: fairness gap {gap}");
        }
    }

    #[test]
    fn perturbed_threshold_breaks_fairness() {
        let s = fig2_scenario();
        let state = QualState::new(0.5, 0.5).unwrap();
        let pair = fair_thresholds(&s, &state, FairnessConstraint::DemographicParity).unwrap();
        let bent = ThresholdPair {
            theta_b: pair.theta_b + 0.1,
            ..pair
        };
        let (_, gap) = fair_policy_residual(&s, &state, &bent).unwrap();
        assert!(gap > 1e-4, "gap {gap}");
    }

    #[test]
    fn reject_all_boundary_when_no_one_qualified() {
        let s = fig2_scenario();
        let state = QualState::new(0.0, 0.0).unwrap();
        for c in [
            FairnessConstraint::DemographicParity,
            FairnessConstraint::EqualOpportunity,
        ] {
            let pair = fair_thresholds(&s, &state, c).unwrap();
            assert!(pair.boundary, "{c}: expected boundary, got {pair:?}");
            assert_eq!(pair.theta_a, f64::INFINITY);
        }
    }

    #[test]
    fn threshold_map_is_continuous_in_state() {
        let s = fig2_scenario();
        for c in FairnessConstraint::ALL {
            let map = threshold_map(&s, c).unwrap();
            let p1 = map
                .thresholds(&QualState::new(0.4, 0.55).unwrap())
                .unwrap();
            let p2 = map
                .thresholds(&QualState::new(0.4 + 1e-9, 0.55 + 1e-9).unwrap())
                .unwrap();
            assert!((p1.theta_a - p2.theta_a).abs() < 1e-4, "{c}");
            assert!((p1.theta_b - p2.theta_b).abs() < 1e-4, "{c}");
        }
    }

    #[test]
    fn unconstrained_thresholds_decouple() {
        let s = fig2_scenario();
        let map = threshold_map(&s, FairnessConstraint::Unconstrained).unwrap();
        let p1 = map.thresholds(&QualState::new(0.4, 0.2).unwrap()).unwrap();
        let p2 = map.thresholds(&QualState::new(0.4, 0.9).unwrap()).unwrap();
        assert_eq!(p1.theta_a, p2.theta_a);
        assert_ne!(p1.theta_b, p2.theta_b);
    }

    #[test]
    fn coarse_thresholds_track_exact() {
        let s = fig2_scenario();
        for c in [
            FairnessConstraint::DemographicParity,
            FairnessConstraint::EqualOpportunity,
        ] {
            let map = threshold_map(&s, c).unwrap();
            let state = QualState::new(0.45, 0.62).unwrap();
            let exact = map.thresholds(&state).unwrap();
            let (ca, cb) = map.thresholds_coarse(&state).unwrap();
            assert!((exact.theta_a - ca).abs() < 0.05, "{c}");
            assert!((exact.theta_b - cb).abs() < 0.05, "{c}");
        }
    }
}
