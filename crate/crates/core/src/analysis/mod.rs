//! Long-run impact of fairness constraints and interventions.
//!
//! Everything here works on equilibria: how the gap α̂_a − α̂_b compares
//! across the unconstrained, demographic-parity and equal-opportunity
//! policies, how to construct transition probabilities that equalize the
//! unconstrained equilibrium ("natural equality"), and what deliberately
//! sub-optimal policies, per-group constant thresholds or transition
//! boosts do to the long-run rates.
//!
//! The seeded property suites that exercise these comparisons over random
//! scenario families live in [`suites`].

pub mod suites;

use crate::dist::verify_mlr;
use crate::equilibrium::{find_equilibria_with, EquilibriumOptions};
use crate::error::{Error, Result};
use crate::model::{
    FairnessConstraint, GroupId, QualState, Scenario, TransitionClass, TransitionMatrix,
};
use crate::policy::{
    threshold_map, unconstrained_threshold, FixedPolicy, OffsetPolicy, Policy,
};
use crate::root;

/// Equilibrium options used throughout this module: full scan resolution,
/// no uniqueness/Lipschitz diagnostics (preconditions are enforced through
/// single-result enumeration instead).
const LEAN: EquilibriumOptions = EquilibriumOptions {
    scan: 4096,
    curve_samples: 129,
    diagnostics: false,
};

fn unique_equilibrium(scenario: &Scenario, policy: &dyn Policy) -> Result<QualState> {
    let report = find_equilibria_with(scenario, policy, LEAN)?;
    match report.single() {
        Some(eq) => Ok(eq.state),
        None => Err(Error::MultipleEquilibria(
            report
                .equilibria
                .iter()
                .map(|e| (e.state.alpha_a, e.state.alpha_b))
                .collect(),
        )),
    }
}

fn unique_equilibrium_for(
    scenario: &Scenario,
    constraint: FairnessConstraint,
) -> Result<QualState> {
    let policy = threshold_map(scenario, constraint)?;
    unique_equilibrium(scenario, &policy)
}

/// How a constraint's equilibrium disparity relates to the unconstrained
/// one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactRelation {
    /// Same sign, strictly smaller magnitude.
    Mitigates,
    /// Same sign, strictly larger magnitude.
    Exacerbates,
    /// The disadvantaged group changed.
    Flips,
    /// Within tolerance of the unconstrained disparity.
    Unchanged,
}

fn relate(d_un: f64, d_c: f64) -> ImpactRelation {
    const TOL: f64 = 1e-9;
    if d_un * d_c < 0.0 && d_c.abs() > TOL {
        ImpactRelation::Flips
    } else if d_c.abs() < d_un.abs() - TOL {
        ImpactRelation::Mitigates
    } else if d_c.abs() > d_un.abs() + TOL {
        ImpactRelation::Exacerbates
    } else {
        ImpactRelation::Unchanged
    }
}

/// Equilibria and disparities under all three policies for one scenario.
#[derive(Debug, Clone)]
pub struct ImpactComparison {
    /// Equilibrium per constraint, in [`FairnessConstraint::ALL`] order
    /// (UN, DP, EqOpt).
    pub equilibria: [QualState; 3],
    /// Disparity α̂_a − α̂_b per constraint, same order.
    pub disparities: [f64; 3],
    pub classes: (TransitionClass, TransitionClass),
    pub dp_vs_un: ImpactRelation,
    pub eqopt_vs_un: ImpactRelation,
}

impl ImpactComparison {
    pub fn equilibrium(&self, c: FairnessConstraint) -> QualState {
        let i = FairnessConstraint::ALL.iter().position(|x| *x == c).unwrap();
        self.equilibria[i]
    }

    pub fn disparity(&self, c: FairnessConstraint) -> f64 {
        let i = FairnessConstraint::ALL.iter().position(|x| *x == c).unwrap();
        self.disparities[i]
    }
}

/// Computes the unique equilibrium under each policy and the induced
/// disparity ordering. Errors when any policy admits several equilibria.
pub fn compare_impact(scenario: &Scenario) -> Result<ImpactComparison> {
    let mut equilibria = [QualState {
        alpha_a: 0.0,
        alpha_b: 0.0,
    }; 3];
    let mut disparities = [0.0; 3];
    for (i, c) in FairnessConstraint::ALL.iter().enumerate() {
        let eq = unique_equilibrium_for(scenario, *c)?;
        equilibria[i] = eq;
        disparities[i] = eq.alpha_a - eq.alpha_b;
    }
    Ok(ImpactComparison {
        equilibria,
        disparities,
        classes: scenario.classes(),
        dp_vs_un: relate(disparities[0], disparities[1]),
        eqopt_vs_un: relate(disparities[0], disparities[2]),
    })
}

/// Constructs per-group transitions of the requested condition class under
/// which the unconstrained equilibrium of both groups equals
/// `alpha_target` exactly.
///
/// At the target rate each group's next-state blend must return the rate
/// itself, which pins each transition pair to a margin `δ` around the
/// target weighted by the class-CDF masses at the group's own
/// unconstrained threshold. The margin starts at 0.1 and shrinks
/// geometrically until all entries fit inside (0, 1); below 1e-3 the
/// construction is reported infeasible.
pub fn natural_equality_transitions(
    scenario: &Scenario,
    alpha_target: f64,
    condition: TransitionClass,
) -> Result<(TransitionMatrix, TransitionMatrix)> {
    if !(alpha_target > 0.0 && alpha_target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha_target must lie in (0, 1), got {alpha_target}"
        )));
    }
    if !matches!(condition, TransitionClass::A | TransitionClass::B) {
        return Err(Error::InvalidParameter(
            "natural-equality construction requires condition class A or B".into(),
        ));
    }
    let be = scenario.break_even();
    let build = |id: GroupId| -> Result<TransitionMatrix> {
        let group = scenario.group(id);
        let theta = unconstrained_threshold(group, alpha_target, be)?;
        if !theta.is_finite() {
            return Err(Error::Infeasible(format!(
                "unconstrained threshold for group {id} is not interior at alpha = {alpha_target}"
            )));
        }
        let w0 = group.g0().cdf(theta);
        let w1 = group.g1().cdf(theta);
        let mut delta = 0.1;
        while delta >= 1e-3 {
            let sign = if condition == TransitionClass::B {
                1.0
            } else {
                -1.0
            };
            let t01 = alpha_target + sign * delta * w0;
            let t00 = alpha_target - sign * delta * (1.0 - w0);
            let t11 = alpha_target + sign * delta * w1;
            let t10 = alpha_target - sign * delta * (1.0 - w1);
            let margin = 1e-6;
            if [t00, t01, t10, t11]
                .iter()
                .all(|v| *v > margin && *v < 1.0 - margin)
            {
                return TransitionMatrix::new(t00, t01, t10, t11);
            }
            delta *= 0.5;
        }
        Err(Error::Infeasible(format!(
            "no feasible margin for group {id} at alpha_target = {alpha_target}"
        )))
    };
    Ok((build(GroupId::A)?, build(GroupId::B)?))
}

/// Which of the two predicted outcomes the demographic-parity equilibrium
/// realized in [`verify_eqopt_mitigation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpBranch {
    /// 0 <= disparity(DP) < disparity(UN).
    Mitigates,
    /// Disadvantaged group flipped: disparity(DP) <= 0.
    Flips,
    /// Anything else (not predicted).
    Other,
}

/// Report of the shared-qualified-distribution analysis: group b's
/// unqualified features sit below group a's, transitions are shared and
/// encouraging (class B).
#[derive(Debug, Clone)]
pub struct EqoptMitigationReport {
    /// Crossing point of the two unqualified-class densities.
    pub crossing: f64,
    /// Density-ratio bound (G0(x̂)/G1(x̂))·(1−T10)/T00 that u₊/u₋ is
    /// checked against.
    pub ratio_bound: f64,
    pub precondition_holds: bool,
    pub impact: ImpactComparison,
    /// α̂_a > α̂_b under the unconstrained policy.
    pub un_favors_a: bool,
    /// 0 <= disparity(EqOpt) < disparity(UN).
    pub eqopt_mitigates: bool,
    pub dp_branch: DpBranch,
}

/// Verifies that equal opportunity narrows the equilibrium gap (without
/// flipping the disadvantaged group) in scenarios where the two groups
/// share the qualified-class feature distribution and transitions, while
/// group b's unqualified features are stochastically lower.
pub fn verify_eqopt_mitigation(scenario: &Scenario) -> Result<EqoptMitigationReport> {
    let ga = scenario.group_a();
    let gb = scenario.group_b();

    // Shared qualified-class density, checked pointwise on a grid.
    let (lo1, hi1) = ga.g1().support();
    for i in 0..=512 {
        let x = lo1 + (hi1 - lo1) * i as f64 / 512.0;
        if (ga.g1().pdf(x) - gb.g1().pdf(x)).abs() > 1e-12 {
            return Err(Error::Infeasible(format!(
                "qualified-class densities differ at x = {x}"
            )));
        }
    }
    // Group a's unqualified density must dominate group b's in likelihood
    // ratio (b's unqualified features sit lower).
    let mlr = verify_mlr(gb.g0(), ga.g0(), 2048)?;
    if !mlr.holds {
        return Err(Error::MlrViolation {
            at: mlr.first_violation.unwrap_or(f64::NAN),
        });
    }
    // Shared class-B transitions.
    let (ta, tb) = (ga.transitions(), gb.transitions());
    let same = (ta.t00() - tb.t00()).abs() <= 1e-12
        && (ta.t01() - tb.t01()).abs() <= 1e-12
        && (ta.t10() - tb.t10()).abs() <= 1e-12
        && (ta.t11() - tb.t11()).abs() <= 1e-12;
    if !same {
        return Err(Error::Infeasible(
            "transitions must be shared across groups".into(),
        ));
    }
    if ta.classify() != TransitionClass::B {
        return Err(Error::Infeasible(
            "transitions must fall in condition class B".into(),
        ));
    }

    // Unique crossing of the unqualified-class densities.
    let (loa, hia) = ga.g0().support();
    let (lob, hib) = gb.g0().support();
    let (lo, hi) = (loa.max(lob), hia.min(hib));
    let diff = |x: f64| ga.g0().pdf(x) - gb.g0().pdf(x);
    let effective = |x: f64| ga.g0().pdf(x) > 1e-12 && gb.g0().pdf(x) > 1e-12;
    let mut brackets = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=2048 {
        let x = lo + (hi - lo) * i as f64 / 2048.0;
        if !effective(x) {
            continue;
        }
        let d = diff(x);
        if let Some((px, pd)) = prev {
            if pd.signum() != d.signum() {
                brackets.push((px, x));
            }
        }
        prev = Some((x, d));
    }
    if brackets.len() != 1 {
        return Err(Error::Infeasible(format!(
            "expected exactly one crossing of the unqualified densities, found {}",
            brackets.len()
        )));
    }
    let crossing = root::brent(diff, brackets[0].0, brackets[0].1, 1e-12);

    let ratio_bound =
        ga.g0().pdf(crossing) / ga.g1().pdf(crossing) * (1.0 - ta.t10()) / ta.t00();
    let precondition_holds = scenario.u_plus() / scenario.u_minus() >= ratio_bound;

    let impact = compare_impact(scenario)?;
    let d_un = impact.disparity(FairnessConstraint::Unconstrained);
    let d_eqopt = impact.disparity(FairnessConstraint::EqualOpportunity);
    let d_dp = impact.disparity(FairnessConstraint::DemographicParity);
    let un_favors_a = d_un > 0.0;
    let eqopt_mitigates = d_eqopt >= -1e-9 && d_eqopt < d_un;
    let dp_branch = if d_dp >= -1e-9 && d_dp < d_un {
        DpBranch::Mitigates
    } else if d_dp <= 1e-9 {
        DpBranch::Flips
    } else {
        DpBranch::Other
    };
    Ok(EqoptMitigationReport {
        crossing,
        ratio_bound,
        precondition_holds,
        impact,
        un_favors_a,
        eqopt_mitigates,
        dp_branch,
    })
}

/// Outcome of replacing the optimal policy by a shifted one.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInterventionReport {
    pub base: QualState,
    pub alternative: QualState,
    /// Long-run average utility of each policy (its instantaneous utility
    /// at its own equilibrium).
    pub base_utility: f64,
    pub alternative_utility: f64,
}

/// Compares the optimal policy's equilibrium against a fairness-preserving
/// shifted policy (see [`OffsetPolicy`]). Positive offsets are for
/// condition class A (stricter thresholds raise long-run rates there),
/// negative offsets for class B.
pub fn policy_intervention(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    offset: f64,
) -> Result<PolicyInterventionReport> {
    if offset == 0.0 {
        return Err(Error::InvalidIntervention("offset must be nonzero".into()));
    }
    let classes = scenario.classes();
    let ok = match classes {
        (TransitionClass::A, TransitionClass::A) => offset > 0.0,
        (TransitionClass::B, TransitionClass::B) => offset < 0.0,
        _ => false,
    };
    if !ok {
        return Err(Error::InvalidIntervention(format!(
            "offset {offset} does not match condition classes {:?}",
            classes
        )));
    }
    let base_policy = threshold_map(scenario, constraint)?;
    let base = unique_equilibrium(scenario, &base_policy)?;
    let alt_policy = OffsetPolicy::new(scenario, constraint, offset)?;
    let alternative = unique_equilibrium(scenario, &alt_policy)?;
    alt_policy.check_mass(&base)?;
    alt_policy.check_mass(&alternative)?;
    let base_utility = crate::model::expected_utility(
        scenario,
        &base,
        base_policy.thresholds(&base)?.thetas(),
    );
    let alternative_utility = crate::model::expected_utility(
        scenario,
        &alternative,
        alt_policy.thresholds(&alternative)?.thetas(),
    );
    Ok(PolicyInterventionReport {
        base,
        alternative,
        base_utility,
        alternative_utility,
    })
}

/// A constant-threshold recipe that parks both groups at the same rate.
#[derive(Debug, Clone, Copy)]
pub struct EquitableRecipe {
    /// Achievable common-rate interval (intersection of the two groups'
    /// reachable bands).
    pub interval: (f64, f64),
    /// The chosen common target rate (interval midpoint).
    pub target: f64,
    pub theta_a: f64,
    pub theta_b: f64,
}

impl EquitableRecipe {
    pub fn policy(&self) -> FixedPolicy {
        FixedPolicy {
            theta_a: self.theta_a,
            theta_b: self.theta_b,
        }
    }
}

fn reachable_odds_interval(t: &TransitionMatrix) -> (f64, f64) {
    let lo = (1.0 - t.t11().max(t.t10())) / t.t01().max(t.t00());
    let hi = (1.0 - t.t11().min(t.t10())) / t.t01().min(t.t00());
    (lo, hi)
}

/// Whether a pair of transition matrices admits per-group constant
/// thresholds converging both groups to one common rate; returns the
/// recipe when the reachable intervals intersect, `None` when they are
/// disjoint.
pub fn equitable_policy(
    group_a: &crate::model::GroupModel,
    group_b: &crate::model::GroupModel,
) -> Result<Option<EquitableRecipe>> {
    let (ca, cb) = (
        group_a.transitions().classify(),
        group_b.transitions().classify(),
    );
    let smooth = |c: TransitionClass| matches!(c, TransitionClass::A | TransitionClass::B);
    if !(smooth(ca) && smooth(cb)) {
        return Err(Error::InvalidIntervention(
            "equitable-policy recipe requires both groups in condition class A or B".into(),
        ));
    }
    let (lo_a, hi_a) = reachable_odds_interval(group_a.transitions());
    let (lo_b, hi_b) = reachable_odds_interval(group_b.transitions());
    let lo = lo_a.max(lo_b);
    let hi = hi_a.min(hi_b);
    if !(lo < hi) {
        return Ok(None);
    }
    // Map the odds interval l = 1/α − 1 back to rates (order reverses).
    let alpha_lo = 1.0 / (1.0 + hi);
    let alpha_hi = 1.0 / (1.0 + lo);
    let target = 0.5 * (alpha_lo + alpha_hi);
    let l_target = 1.0 / target - 1.0;
    let solve_theta = |group: &crate::model::GroupModel| -> f64 {
        let (slo, shi) = group.support();
        root::brent(
            |theta| crate::equilibrium::h_func(group, theta) - l_target,
            slo,
            shi,
            1e-12,
        )
    };
    Ok(Some(EquitableRecipe {
        interval: (alpha_lo, alpha_hi),
        target,
        theta_a: solve_theta(group_a),
        theta_b: solve_theta(group_b),
    }))
}

/// Effect of raising one transition probability on the equilibrium.
#[derive(Debug, Clone, Copy)]
pub struct TransitionInterventionReport {
    pub before: QualState,
    pub after: QualState,
}

/// Raises `T[y][d]` of one group by `delta` and reports both equilibria.
/// Errors when the perturbed entry leaves (0, 1) or either side of the
/// comparison has several equilibria.
pub fn transition_intervention(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    which: (GroupId, u8, u8),
    delta: f64,
) -> Result<TransitionInterventionReport> {
    let (id, y, d) = which;
    let entry = scenario.group(id).transitions().prob(y, d);
    let bumped = entry + delta;
    if !(bumped > 0.0 && bumped < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbed transition {bumped} leaves (0, 1)"
        )));
    }
    let before = unique_equilibrium_for(scenario, constraint)?;
    let perturbed =
        scenario.with_transitions(id, scenario.group(id).transitions().with_entry(y, d, bumped)?);
    let after = unique_equilibrium_for(&perturbed, constraint)?;
    Ok(TransitionInterventionReport { before, after })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FeatureDistribution as FD;
    use crate::model::GroupModel;

    fn gaussian_group(
        means: (f64, f64),
        sd: f64,
        t: (f64, f64, f64, f64),
        share: f64,
    ) -> GroupModel {
        GroupModel::new(
            FD::gaussian(means.0, sd).unwrap(),
            FD::gaussian(means.1, sd).unwrap(),
            TransitionMatrix::new(t.0, t.1, t.2, t.3).unwrap(),
            share,
        )
        .unwrap()
    }

    fn fig2_scenario() -> Scenario {
        Scenario::new(
            gaussian_group((-5.0, 5.0), 5.0, (0.4, 0.5, 0.5, 0.9), 0.5),
            gaussian_group((-5.0, 5.0), 5.0, (0.1, 0.5, 0.5, 0.7), 0.5),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn identical_groups_have_zero_disparity() {
        let s = Scenario::new(
            gaussian_group((-5.0, 5.0), 5.0, (0.4, 0.5, 0.5, 0.9), 0.5),
            gaussian_group((-5.0, 5.0), 5.0, (0.4, 0.5, 0.5, 0.9), 0.5),
            1.0,
            1.0,
        )
        .unwrap();
        let impact = compare_impact(&s).unwrap();
        for d in impact.disparities {
            assert!(d.abs() < 1e-7, "{d}");
        }
    }

    #[test]
    fn impact_disparities_consistent_with_equilibria() {
        let impact = compare_impact(&fig2_scenario()).unwrap();
        for (eq, d) in impact.equilibria.iter().zip(impact.disparities) {
            assert!((eq.alpha_a - eq.alpha_b - d).abs() < 1e-10);
        }
    }

    #[test]
    fn natural_equality_hits_target_rate() {
        let s = fig2_scenario();
        for condition in [TransitionClass::A, TransitionClass::B] {
            let (ta, tb) = natural_equality_transitions(&s, 0.6, condition).unwrap();
            assert_eq!(ta.classify(), condition);
            assert_eq!(tb.classify(), condition);
            let s2 = s
                .with_transitions(GroupId::A, ta)
                .with_transitions(GroupId::B, tb);
            let eq = unique_equilibrium_for(&s2, FairnessConstraint::Unconstrained).unwrap();
            assert!((eq.alpha_a - 0.6).abs() < 1e-6, "{condition:?}: {eq:?}");
            assert!((eq.alpha_b - 0.6).abs() < 1e-6, "{condition:?}: {eq:?}");
        }
    }

    #[test]
    fn transition_boost_raises_equilibrium() {
        // Raising T01 of group b in a class-B scenario lifts its rate.
        let s = fig2_scenario();
        let report = transition_intervention(
            &s,
            FairnessConstraint::Unconstrained,
            (GroupId::B, 0, 1),
            0.05,
        )
        .unwrap();
        assert!(report.after.alpha_b > report.before.alpha_b + 1e-8);
        assert!(report.after.alpha_a >= report.before.alpha_a - 1e-12);
    }

    #[test]
    fn zero_delta_changes_nothing() {
        let s = fig2_scenario();
        let report = transition_intervention(
            &s,
            FairnessConstraint::DemographicParity,
            (GroupId::A, 1, 1),
            0.0,
        )
        .unwrap();
        assert!(report.before.dist(&report.after) < 1e-9);
    }

    #[test]
    fn disjoint_reachable_intervals_give_no_recipe() {
        let a = gaussian_group((-5.0, 5.0), 5.0, (0.05, 0.1, 0.05, 0.1), 0.5);
        let b = gaussian_group((-5.0, 5.0), 5.0, (0.8, 0.9, 0.8, 0.9), 0.5);
        assert!(equitable_policy(&a, &b).unwrap().is_none());
    }

    #[test]
    fn identical_transitions_recipe_converges_both_groups() {
        let s = fig2_scenario();
        let a = s.group_a();
        let b = s.group_a(); // same transitions on both sides
        let recipe = equitable_policy(a, b).unwrap().expect("nonempty interval");
        let s2 = Scenario::new(a.clone(), b.clone(), 1.0, 1.0).unwrap();
        let traj = crate::dynamics::simulate_policy(
            &s2,
            &recipe.policy(),
            QualState::new(0.2, 0.9).unwrap(),
            10_000,
            1e-10,
        )
        .unwrap();
        let end = traj.last_state();
        assert!((end.alpha_a - recipe.target).abs() < 1e-6, "{end:?}");
        assert!((end.alpha_b - recipe.target).abs() < 1e-6, "{end:?}");
    }

    #[test]
    fn offset_must_match_condition_class() {
        let s = fig2_scenario(); // class B
        assert!(matches!(
            policy_intervention(&s, FairnessConstraint::DemographicParity, 0.02),
            Err(Error::InvalidIntervention(_))
        ));
        let report =
            policy_intervention(&s, FairnessConstraint::DemographicParity, -0.02).unwrap();
        assert!(report.alternative.alpha_a > report.base.alpha_a + 1e-9);
        assert!(report.alternative.alpha_b > report.base.alpha_b + 1e-9);
    }
}
