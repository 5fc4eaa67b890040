//! Forward iteration of the qualification-rate dynamics.
//!
//! One step of the dynamics is
//!
//! α'_s = g0_s·(1 − α_s) + g1_s·α_s,
//!
//! where g_ys = T[y][0]·𝔾_y(θ_s) + T[y][1]·(1 − 𝔾_y(θ_s)) blends the two
//! transition probabilities by the accept/reject split the threshold
//! induces on class `y`. Each next rate is a convex combination of
//! transition probabilities, so the state stays inside the unit square for
//! any policy.

use crate::error::Result;
use crate::model::{FairnessConstraint, GroupModel, QualState, Scenario};
use crate::policy::{threshold_map, Policy, ThresholdPair};

/// Convex blend of transition probabilities for qualification class `y`
/// under threshold `theta` (±∞ admitted: reject-all gives T[y][0],
/// accept-all gives T[y][1]).
pub fn g_ys(group: &GroupModel, y: u8, theta: f64) -> f64 {
    let below = match y {
        0 => group.g0().cdf(theta),
        1 => group.g1().cdf(theta),
        _ => panic!("y must be 0 or 1"),
    };
    group.transitions().prob(y, 0) * below + group.transitions().prob(y, 1) * (1.0 - below)
}

/// One step of the dynamics under a fixed threshold pair.
pub fn step(scenario: &Scenario, state: &QualState, pair: &ThresholdPair) -> QualState {
    let next = |group: &GroupModel, alpha: f64, theta: f64| {
        let g0 = g_ys(group, 0, theta);
        let g1 = g_ys(group, 1, theta);
        (g0 * (1.0 - alpha) + g1 * alpha).clamp(0.0, 1.0)
    };
    QualState {
        alpha_a: next(scenario.group_a(), state.alpha_a, pair.theta_a),
        alpha_b: next(scenario.group_b(), state.alpha_b, pair.theta_b),
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Consecutive states within the tolerance; carries the final residual.
    Converged(f64),
    /// A short cycle was detected; carries the period.
    Oscillating(usize),
    /// Step budget exhausted without convergence or a detected cycle.
    MaxSteps,
}

/// A simulated path of the dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Visited states, starting with the initial one.
    pub states: Vec<QualState>,
    /// Threshold pair used at each step (`states.len() - 1` entries).
    pub thresholds: Vec<ThresholdPair>,
    /// Expected utility realized at each step.
    pub utilities: Vec<f64>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last_state(&self) -> QualState {
        *self.states.last().expect("at least the initial state")
    }
}

/// Trailing-window length used for cycle detection while simulating.
const OSC_WINDOW: usize = 64;

/// Smallest period `p >= 2` such that the trailing `window` states repeat
/// with lag `p` within `tol`, provided they have not simply converged
/// (period 1) and the swing is not decaying toward a fixed point. `None`
/// when no such period up to `window / 2` exists.
pub fn detect_oscillation(states: &[QualState], window: usize, tol: f64) -> Option<usize> {
    if states.len() < window || window < 4 {
        return None;
    }
    let tail = &states[states.len() - window..];
    let converged = tail
        .windows(2)
        .all(|w| w[0].dist(&w[1]) <= tol);
    if converged {
        return None;
    }
    // An alternating approach to a fixed point also repeats with lag 2
    // while the amplitude shrinks; a cycle keeps its swing.
    let amps: Vec<f64> = tail.windows(2).map(|w| w[0].dist(&w[1])).collect();
    let half = amps.len() / 2;
    let max = |s: &[f64]| s.iter().fold(0.0f64, |m, &v| m.max(v));
    if max(&amps[half..]) < 0.5 * max(&amps[..half]) {
        return None;
    }
    'periods: for p in 2..=window / 2 {
        for t in p..window {
            if tail[t].dist(&tail[t - p]) > tol {
                continue 'periods;
            }
        }
        return Some(p);
    }
    None
}

/// Iterates the dynamics from `initial` under the optimal policy for
/// `constraint`, stopping on convergence (sup-norm step below `tol`), on a
/// detected period-2 cycle, or after `max_steps`.
pub fn simulate(
    scenario: &Scenario,
    constraint: FairnessConstraint,
    initial: QualState,
    max_steps: usize,
    tol: f64,
) -> Result<Trajectory> {
    let policy = threshold_map(scenario, constraint)?;
    simulate_policy(scenario, &policy, initial, max_steps, tol)
}

/// Same as [`simulate`] but under an arbitrary policy.
pub fn simulate_policy(
    scenario: &Scenario,
    policy: &dyn Policy,
    initial: QualState,
    max_steps: usize,
    tol: f64,
) -> Result<Trajectory> {
    assert!(max_steps >= 1, "max_steps must be >= 1");
    assert!(tol > 0.0, "tol must be positive");
    let mut states = vec![initial];
    let mut thresholds = Vec::new();
    let mut utilities = Vec::new();
    let mut termination = Termination::MaxSteps;
    for _ in 0..max_steps {
        let state = *states.last().unwrap();
        let pair = policy.thresholds(&state)?;
        let util = crate::model::expected_utility(scenario, &state, pair.thetas());
        let next = step(scenario, &state, &pair);
        thresholds.push(pair);
        utilities.push(util);
        states.push(next);
        let residual = next.dist(&state);
        if residual <= tol {
            termination = Termination::Converged(residual);
            break;
        }
        if states.len() >= OSC_WINDOW {
            if let Some(p) = detect_oscillation(&states, OSC_WINDOW, tol.max(1e-9) * 10.0) {
                if p == 2 {
                    termination = Termination::Oscillating(2);
                    break;
                }
                // Longer cycles fall through to MaxSteps; the caller can
                // re-run the detector on the stored states.
            }
        }
    }
    Ok(Trajectory {
        states,
        thresholds,
        utilities,
        termination,
    })
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
    fn g_ys_constant_when_transitions_equal() {
        let g = GroupModel::new(
            FD::gaussian(-5.0, 5.0).unwrap(),
            FD::gaussian(5.0, 5.0).unwrap(),
            TransitionMatrix::new(0.3, 0.3, 0.3, 0.3).unwrap(),
            0.5,
        )
        .unwrap();
        for theta in [-3.0, 0.0, 7.0, f64::INFINITY, f64::NEG_INFINITY] {
            assert!((g_ys(&g, 0, theta) - 0.3).abs() < 1e-15);
            assert!((g_ys(&g, 1, theta) - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn g_ys_limits() {
        let s = fig2_scenario();
        let a = s.group_a();
        assert!((g_ys(a, 0, f64::INFINITY) - 0.4).abs() < 1e-15); // T00
        assert!((g_ys(a, 0, f64::NEG_INFINITY) - 0.5).abs() < 1e-15); // T01
        // At θ=0: 𝔾₁(0) = Φ(-1)
        let phi_m1 = FD::gaussian(0.0, 1.0).unwrap().cdf(-1.0);
        let expect = 0.5 * phi_m1 + 0.9 * (1.0 - phi_m1);
        assert!((g_ys(a, 1, 0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn step_from_zero_alpha_is_g0() {
        let s = fig2_scenario();
        let pair = ThresholdPair {
            theta_a: 1.3,
            theta_b: 1.3,
            constraint: FairnessConstraint::Unconstrained,
            fairness_residual: 0.0,
            boundary: false,
            flat_cdf: false,
            local_optima: 1,
        };
        let next = step(&s, &QualState::new(0.0, 0.0).unwrap(), &pair);
        assert!((next.alpha_a - g_ys(s.group_a(), 0, 1.3)).abs() < 1e-15);
        assert!((next.alpha_b - g_ys(s.group_b(), 0, 1.3)).abs() < 1e-15);
    }

    #[test]
    fn state_bounded_by_transition_extremes() {
        let s = fig2_scenario();
        let a = s.group_a().transitions();
        let lo = a.t00().min(a.t01()).min(a.t10().min(a.t11()));
        let hi = a.t00().max(a.t01()).max(a.t10().max(a.t11()));
        for theta in [-8.0, -1.0, 0.0, 2.0, 9.0] {
            for alpha in [0.0, 0.25, 0.5, 0.9, 1.0] {
                let g0 = g_ys(s.group_a(), 0, theta);
                let g1 = g_ys(s.group_a(), 1, theta);
                let next = g0 * (1.0 - alpha) + g1 * alpha;
                assert!(next >= lo - 1e-15 && next <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn detect_oscillation_period2() {
        let lo = QualState::new(0.2, 0.2).unwrap();
        let hi = QualState::new(0.6, 0.6).unwrap();
        let states: Vec<QualState> = (0..64)
            .map(|i| if i % 2 == 0 { lo } else { hi })
            .collect();
        assert_eq!(detect_oscillation(&states, 64, 1e-9), Some(2));
    }

    #[test]
    fn detect_oscillation_none_when_constant() {
        let s = QualState::new(0.4, 0.4).unwrap();
        let states = vec![s; 64];
        assert_eq!(detect_oscillation(&states, 64, 1e-9), None);
    }

    #[test]
    fn converges_quickly_from_equilibrium_neighborhood() {
        let s = fig2_scenario();
        let traj = simulate(
            &s,
            FairnessConstraint::Unconstrained,
            QualState::new(0.5, 0.5).unwrap(),
            10_000,
            1e-8,
        )
        .unwrap();
        assert!(matches!(traj.termination, Termination::Converged(_)));
        // Re-simulating from the converged point stops almost immediately.
        let eq = traj.last_state();
        let again = simulate(&s, FairnessConstraint::Unconstrained, eq, 10_000, 1e-8).unwrap();
        assert!(again.states.len() <= 3);
    }

    #[test]
    fn unconstrained_coordinates_evolve_independently() {
        let s = fig2_scenario();
        let t1 = simulate(
            &s,
            FairnessConstraint::Unconstrained,
            QualState::new(0.3, 0.2).unwrap(),
            50,
            1e-12,
        )
        .unwrap();
        let t2 = simulate(
            &s,
            FairnessConstraint::Unconstrained,
            QualState::new(0.3, 0.9).unwrap(),
            50,
            1e-12,
        )
        .unwrap();
        for (s1, s2) in t1.states.iter().zip(t2.states.iter()).take(40) {
            assert!((s1.alpha_a - s2.alpha_a).abs() < 1e-12);
        }
    }
}
