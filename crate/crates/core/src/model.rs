//! Core domain records: transitions, groups, scenarios, the qualification
//! profile and the institute's expected utility.

use serde::{Deserialize, Serialize};

use crate::dist::{verify_mlr, FeatureDistribution};
use crate::error::{Error, Result};

/// Default grid resolution for monotone-likelihood-ratio verification.
pub const MLR_GRID: usize = 2048;

/// Transition probabilities T[y][d] = P(qualified next | currently `y`,
/// decision `d`). All entries strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransitionSpec", into = "TransitionSpec")]
pub struct TransitionMatrix {
    t00: f64,
    t01: f64,
    t10: f64,
    t11: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionSpec {
    t00: f64,
    t01: f64,
    t10: f64,
    t11: f64,
}

impl TryFrom<TransitionSpec> for TransitionMatrix {
    type Error = Error;
    fn try_from(s: TransitionSpec) -> Result<Self> {
        TransitionMatrix::new(s.t00, s.t01, s.t10, s.t11)
    }
}

impl From<TransitionMatrix> for TransitionSpec {
    fn from(t: TransitionMatrix) -> Self {
        TransitionSpec {
            t00: t.t00,
            t01: t.t01,
            t10: t.t10,
            t11: t.t11,
        }
    }
}

/// Which of the four transition regimes a matrix falls into.
///
/// `A`: acceptance discourages future qualification for both the qualified
/// and the unqualified; `B`: acceptance encourages both; `C`/`D`: mixed.
/// Ties report the weakest applicable label in the order B > A > C > D,
/// since equalities satisfy both A and B and the B-side results are the
/// ones stated with `>=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionClass {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for TransitionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TransitionClass::A => "A",
            TransitionClass::B => "B",
            TransitionClass::C => "C",
            TransitionClass::D => "D",
        };
        f.write_str(s)
    }
}

impl TransitionMatrix {
    pub fn new(t00: f64, t01: f64, t10: f64, t11: f64) -> Result<Self> {
        for (name, v) in [("t00", t00), ("t01", t01), ("t10", t10), ("t11", t11)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "transition {name} must lie strictly in (0, 1), got {v}"
                )));
            }
        }
        Ok(TransitionMatrix { t00, t01, t10, t11 })
    }

    pub fn t00(&self) -> f64 {
        self.t00
    }
    pub fn t01(&self) -> f64 {
        self.t01
    }
    pub fn t10(&self) -> f64 {
        self.t10
    }
    pub fn t11(&self) -> f64 {
        self.t11
    }

    /// Entry T[y][d].
    pub fn prob(&self, y: u8, d: u8) -> f64 {
        match (y, d) {
            (0, 0) => self.t00,
            (0, 1) => self.t01,
            (1, 0) => self.t10,
            (1, 1) => self.t11,
            _ => panic!("y and d must be 0 or 1"),
        }
    }

    /// Returns a copy with entry T[y][d] replaced.
    pub fn with_entry(&self, y: u8, d: u8, value: f64) -> Result<Self> {
        let mut t = *self;
        match (y, d) {
            (0, 0) => t.t00 = value,
            (0, 1) => t.t01 = value,
            (1, 0) => t.t10 = value,
            (1, 1) => t.t11 = value,
            _ => panic!("y and d must be 0 or 1"),
        }
        TransitionMatrix::new(t.t00, t.t01, t.t10, t.t11)
    }

    pub fn classify(&self) -> TransitionClass {
        classify_transitions(self)
    }
}

/// Classify a transition matrix into regimes A–D (tie order B > A > C > D).
pub fn classify_transitions(t: &TransitionMatrix) -> TransitionClass {
    if t.t01 >= t.t00 && t.t11 >= t.t10 {
        TransitionClass::B
    } else if t.t01 <= t.t00 && t.t11 <= t.t10 {
        TransitionClass::A
    } else if t.t01 >= t.t00 && t.t11 <= t.t10 {
        TransitionClass::C
    } else {
        TransitionClass::D
    }
}

/// One demographic group: class-conditional feature densities, transition
/// probabilities and population share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupSpec", into = "GroupSpec")]
pub struct GroupModel {
    g0: FeatureDistribution,
    g1: FeatureDistribution,
    transitions: TransitionMatrix,
    share: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSpec {
    g0: FeatureDistribution,
    g1: FeatureDistribution,
    transitions: TransitionMatrix,
    share: f64,
}

impl TryFrom<GroupSpec> for GroupModel {
    type Error = Error;
    fn try_from(s: GroupSpec) -> Result<Self> {
        GroupModel::new(s.g0, s.g1, s.transitions, s.share)
    }
}

impl From<GroupModel> for GroupSpec {
    fn from(g: GroupModel) -> Self {
        GroupSpec {
            g0: g.g0,
            g1: g.g1,
            transitions: g.transitions,
            share: g.share,
        }
    }
}

impl GroupModel {
    /// Validates the share and the strict monotone likelihood ratio of
    /// `g1` against `g0` (on the default verification grid).
    pub fn new(
        g0: FeatureDistribution,
        g1: FeatureDistribution,
        transitions: TransitionMatrix,
        share: f64,
    ) -> Result<Self> {
        if !(share > 0.0 && share < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "group share must lie in (0, 1), got {share}"
            )));
        }
        let check = verify_mlr(&g0, &g1, MLR_GRID)?;
        if !check.holds {
            return Err(Error::MlrViolation {
                at: check.first_violation.unwrap_or(f64::NAN),
            });
        }
        Ok(GroupModel {
            g0,
            g1,
            transitions,
            share,
        })
    }

    pub fn g0(&self) -> &FeatureDistribution {
        &self.g0
    }
    pub fn g1(&self) -> &FeatureDistribution {
        &self.g1
    }
    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }
    pub fn share(&self) -> f64 {
        self.share
    }

    /// Returns a copy with different transitions (distributions unchanged,
    /// so no re-verification is needed).
    pub fn with_transitions(&self, transitions: TransitionMatrix) -> Self {
        GroupModel {
            g0: self.g0.clone(),
            g1: self.g1.clone(),
            transitions,
            share: self.share,
        }
    }

    /// Union of the two class supports.
    pub fn support(&self) -> (f64, f64) {
        let (l0, h0) = self.g0.support();
        let (l1, h1) = self.g1.support();
        (l0.min(l1), h0.max(h1))
    }

    /// Composite feature density at qualification rate `alpha`.
    pub fn composite_pdf(&self, alpha: f64, x: f64) -> f64 {
        (1.0 - alpha) * self.g0.pdf(x) + alpha * self.g1.pdf(x)
    }

    /// Composite feature CDF at qualification rate `alpha`.
    pub fn composite_cdf(&self, alpha: f64, x: f64) -> f64 {
        (1.0 - alpha) * self.g0.cdf(x) + alpha * self.g1.cdf(x)
    }
}

/// Identifies one of the two groups in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupId {
    A,
    B,
}

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GroupId::A => "a",
            GroupId::B => "b",
        })
    }
}

/// Two groups plus the institute's utility parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioSpec", into = "ScenarioSpec")]
pub struct Scenario {
    group_a: GroupModel,
    group_b: GroupModel,
    u_plus: f64,
    u_minus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    group_a: GroupModel,
    group_b: GroupModel,
    u_plus: f64,
    u_minus: f64,
}

impl TryFrom<ScenarioSpec> for Scenario {
    type Error = Error;
    fn try_from(s: ScenarioSpec) -> Result<Self> {
        Scenario::new(s.group_a, s.group_b, s.u_plus, s.u_minus)
    }
}

impl From<Scenario> for ScenarioSpec {
    fn from(s: Scenario) -> Self {
        ScenarioSpec {
            group_a: s.group_a,
            group_b: s.group_b,
            u_plus: s.u_plus,
            u_minus: s.u_minus,
        }
    }
}

impl Scenario {
    pub fn new(group_a: GroupModel, group_b: GroupModel, u_plus: f64, u_minus: f64) -> Result<Self> {
        if !(u_plus > 0.0) || !(u_minus > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "utilities must be positive, got u_plus={u_plus}, u_minus={u_minus}"
            )));
        }
        if (group_a.share + group_b.share - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "group shares must sum to 1, got {} + {}",
                group_a.share, group_b.share
            )));
        }
        Ok(Scenario {
            group_a,
            group_b,
            u_plus,
            u_minus,
        })
    }

    pub fn group_a(&self) -> &GroupModel {
        &self.group_a
    }
    pub fn group_b(&self) -> &GroupModel {
        &self.group_b
    }
    pub fn group(&self, id: GroupId) -> &GroupModel {
        match id {
            GroupId::A => &self.group_a,
            GroupId::B => &self.group_b,
        }
    }
    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }
    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    /// The profile level u₋/(u₊+u₋) at which accepting breaks even.
    pub fn break_even(&self) -> f64 {
        self.u_minus / (self.u_plus + self.u_minus)
    }

    /// Replaces one group's transition matrix.
    pub fn with_transitions(&self, id: GroupId, t: TransitionMatrix) -> Self {
        let mut s = self.clone();
        match id {
            GroupId::A => s.group_a = s.group_a.with_transitions(t),
            GroupId::B => s.group_b = s.group_b.with_transitions(t),
        }
        s
    }

    /// Condition classes of the two groups' transitions.
    pub fn classes(&self) -> (TransitionClass, TransitionClass) {
        (
            self.group_a.transitions.classify(),
            self.group_b.transitions.classify(),
        )
    }
}

/// The dynamical state: the pair of group qualification rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualState {
    pub alpha_a: f64,
    pub alpha_b: f64,
}

impl QualState {
    pub fn new(alpha_a: f64, alpha_b: f64) -> Result<Self> {
        for (name, v) in [("alpha_a", alpha_a), ("alpha_b", alpha_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(QualState { alpha_a, alpha_b })
    }

    pub fn alpha(&self, id: GroupId) -> f64 {
        match id {
            GroupId::A => self.alpha_a,
            GroupId::B => self.alpha_b,
        }
    }

    /// Sup-norm distance to another state.
    pub fn dist(&self, other: &QualState) -> f64 {
        (self.alpha_a - other.alpha_a)
            .abs()
            .max((self.alpha_b - other.alpha_b).abs())
    }
}

/// Static fairness constraint applied to the myopic policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessConstraint {
    /// No constraint; each group's threshold is solved independently.
    #[serde(alias = "un")]
    Unconstrained,
    /// Demographic parity: equal acceptance rates.
    #[serde(rename = "dp")]
    DemographicParity,
    /// Equal opportunity: equal true-positive rates.
    #[serde(rename = "eqopt")]
    EqualOpportunity,
}

impl FairnessConstraint {
    pub const ALL: [FairnessConstraint; 3] = [
        FairnessConstraint::Unconstrained,
        FairnessConstraint::DemographicParity,
        FairnessConstraint::EqualOpportunity,
    ];
}

impl std::fmt::Display for FairnessConstraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FairnessConstraint::Unconstrained => "UN",
            FairnessConstraint::DemographicParity => "DP",
            FairnessConstraint::EqualOpportunity => "EqOpt",
        })
    }
}

/// Posterior probability that an individual with feature `x` is qualified,
/// given the group's qualification rate `alpha`:
///
/// γ(x) = 1 / ( (G₀(x)/G₁(x)) · (1/α − 1) + 1 ).
///
/// Where one class density vanishes the limit value is used (0 when only
/// the unqualified density is positive, 1 in the symmetric case); both
/// densities zero is an error.
pub fn qualification_profile(group: &GroupModel, alpha: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let d0 = group.g0.pdf(x);
    let d1 = group.g1.pdf(x);
    if d0 <= 0.0 && d1 <= 0.0 {
        return Err(Error::OutsideSupport(x));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return Ok(1.0);
    }
    if d1 <= 0.0 {
        return Ok(0.0);
    }
    if d0 <= 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 / ((d0 / d1) * (1.0 / alpha - 1.0) + 1.0))
}

/// Density of the constraint distribution at `x`: the distribution whose
/// tail masses the fair policy equalizes across groups. Equal opportunity
/// uses G₁; demographic parity uses the composite (1−α)G₀ + αG₁.
pub fn constraint_density(
    group: &GroupModel,
    alpha: f64,
    c: FairnessConstraint,
    x: f64,
) -> Result<f64> {
    match c {
        FairnessConstraint::Unconstrained => Err(Error::NoConstraintDistribution),
        FairnessConstraint::EqualOpportunity => Ok(group.g1.pdf(x)),
        FairnessConstraint::DemographicParity => Ok(group.composite_pdf(alpha, x)),
    }
}

/// CDF companion to [`constraint_density`].
pub fn constraint_cdf(
    group: &GroupModel,
    alpha: f64,
    c: FairnessConstraint,
    x: f64,
) -> Result<f64> {
    match c {
        FairnessConstraint::Unconstrained => Err(Error::NoConstraintDistribution),
        FairnessConstraint::EqualOpportunity => Ok(group.g1.cdf(x)),
        FairnessConstraint::DemographicParity => Ok(group.composite_cdf(alpha, x)),
    }
}

/// Expected instantaneous utility of the institute under threshold pair
/// `(theta_a, theta_b)`, in closed tail-mass form:
///
/// Σ_s p_s · [ α_s·u₊·(1−𝔾₁(θ_s)) − (1−α_s)·u₋·(1−𝔾₀(θ_s)) ].
pub fn expected_utility(scenario: &Scenario, state: &QualState, thresholds: (f64, f64)) -> f64 {
    let one = group_utility(
        &scenario.group_a,
        state.alpha_a,
        thresholds.0,
        scenario.u_plus,
        scenario.u_minus,
    );
    let two = group_utility(
        &scenario.group_b,
        state.alpha_b,
        thresholds.1,
        scenario.u_plus,
        scenario.u_minus,
    );
    scenario.group_a.share * one + scenario.group_b.share * two
}

fn group_utility(group: &GroupModel, alpha: f64, theta: f64, u_plus: f64, u_minus: f64) -> f64 {
    let tail1 = 1.0 - group.g1.cdf(theta);
    let tail0 = 1.0 - group.g0.cdf(theta);
    alpha * u_plus * tail1 - (1.0 - alpha) * u_minus * tail0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::FeatureDistribution as FD;

    pub(crate) fn fig_gaussian_group(t: (f64, f64, f64, f64), share: f64) -> GroupModel {
        GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(t.0, t.1, t.2, t.3).unwrap(),
            share,
        )
        .unwrap()
    }

    #[test]
    fn profile_is_alpha_when_densities_match() {
        // Equal class densities at the midpoint → likelihood ratio 1 → γ = α.
        let g = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.5);
        let gamma = qualification_profile(&g, 0.3, 0.0).unwrap();
        assert!((gamma - 0.3).abs() < 1e-12);
        let gamma = qualification_profile(&g, 0.5, 0.0).unwrap();
        assert!((gamma - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_zero_when_no_one_qualified() {
        let g = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.5);
        assert_eq!(qualification_profile(&g, 0.0, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn profile_errors_outside_support() {
        let g = GroupModel::new(
            FD::beta(2.0, 5.0).unwrap(),
            FD::beta(5.0, 2.0).unwrap(),
            TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
            0.5,
        )
        .unwrap();
        assert!(matches!(
            qualification_profile(&g, 0.5, 7.0),
            Err(Error::OutsideSupport(_))
        ));
    }

    #[test]
    fn constraint_density_variants() {
        let g = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.5);
        let x = 1.7;
        let eqopt =
            constraint_density(&g, 0.3, FairnessConstraint::EqualOpportunity, x).unwrap();
        assert_eq!(eqopt, g.g1().pdf(x));
        let dp1 = constraint_density(&g, 1.0, FairnessConstraint::DemographicParity, x).unwrap();
        assert!((dp1 - g.g1().pdf(x)).abs() < 1e-15);
        assert!(matches!(
            constraint_density(&g, 0.3, FairnessConstraint::Unconstrained, x),
            Err(Error::NoConstraintDistribution)
        ));
    }

    #[test]
    fn dp_density_is_pointwise_mixture() {
        let g = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.5);
        let x = -2.0;
        let dp = constraint_density(&g, 0.5, FairnessConstraint::DemographicParity, x).unwrap();
        assert!((dp - 0.5 * (g.g0().pdf(x) + g.g1().pdf(x))).abs() < 1e-15);
    }

    #[test]
    fn utility_reject_all_is_zero_accept_all_qualified_is_u_plus() {
        let a = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.5);
        let b = fig_gaussian_group((0.1, 0.5, 0.5, 0.7), 0.5);
        let s = Scenario::new(a, b, 1.0, 1.0).unwrap();
        let state = QualState::new(0.4, 0.6).unwrap();
        assert_eq!(
            expected_utility(&s, &state, (f64::INFINITY, f64::INFINITY)),
            0.0
        );
        let all_qualified = QualState::new(1.0, 1.0).unwrap();
        let u = expected_utility(
            &s,
            &all_qualified,
            (f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        assert!((u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let t = TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap();
        assert_eq!(t.classify(), TransitionClass::B);
        let t = TransitionMatrix::new(0.5, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(t.classify(), TransitionClass::B);
        let t = TransitionMatrix::new(0.3, 0.5, 0.9, 0.4).unwrap();
        assert_eq!(t.classify(), TransitionClass::C);
        let t = TransitionMatrix::new(0.5, 0.3, 0.2, 0.4).unwrap();
        assert_eq!(t.classify(), TransitionClass::D);
        let t = TransitionMatrix::new(0.5, 0.3, 0.2, 0.1).unwrap();
        assert_eq!(t.classify(), TransitionClass::A);
    }

    #[test]
    fn scenario_share_validation() {
        let a = fig_gaussian_group((0.4, 0.5, 0.5, 0.9), 0.6);
        let b = fig_gaussian_group((0.1, 0.5, 0.5, 0.7), 0.5);
        assert!(Scenario::new(a, b, 1.0, 1.0).is_err());
    }

    #[test]
    fn group_rejects_mlr_violation() {
        let r = GroupModel::new(
            FD::gaussian(0.0, 1.0).unwrap(),
            FD::gaussian(0.0, 2.0).unwrap(),
            TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
            0.5,
        );
        assert!(matches!(r, Err(Error::MlrViolation { .. })));
    }
}
