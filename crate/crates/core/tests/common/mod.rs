//! Shared test oracles: quadrature, grid search, and an agent-level
//! Monte-Carlo simulator. Everything here is independent of the library's
//! solution paths - integration against closed forms and brute force.

use qualdyn::{
    FairnessConstraint, FeatureDistribution, GroupModel, QualState, Scenario, TransitionMatrix,
};
use rand::Rng;

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (lo + hi);
    recurse(f, lo, hi, simpson(f, lo, m, hi), tol, 40)
}

pub fn fig2_scenario() -> Scenario {
    let gauss = |m: f64| FeatureDistribution::gaussian(m, 5.0).unwrap();
    let a = GroupModel::new(
        gauss(-5.0),
        gauss(5.0),
        TransitionMatrix::new(0.4, 0.5, 0.5, 0.9).unwrap(),
        0.5,
    )
    .unwrap();
    let b = GroupModel::new(
        gauss(-5.0),
        gauss(5.0),
        TransitionMatrix::new(0.1, 0.5, 0.5, 0.7).unwrap(),
        0.5,
    )
    .unwrap();
    Scenario::new(a, b, 1.0, 1.0).unwrap()
}

/// Brute-force maximum of the expected utility over a dense grid of
/// fairness-feasible threshold pairs, parametrized by the shared
/// acceptance mass under the constraint distributions.
pub fn fair_grid_max(
    scenario: &Scenario,
    state: &QualState,
    constraint: FairnessConstraint,
    grid: usize,
) -> f64 {
    let quantile = |group: &GroupModel, alpha: f64, p: f64| -> f64 {
        let (lo, hi) = group.support();
        let cdf = |x: f64| qualdyn::model::constraint_cdf(group, alpha, constraint, x).unwrap();
        if cdf(lo) >= p {
            return lo;
        }
        if cdf(hi) < p {
            return hi;
        }
        let mut a = lo;
        let mut b = hi;
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if cdf(m) >= p {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    };
    let mut best = f64::NEG_INFINITY;
    for k in 0..=grid {
        let q = k as f64 / grid as f64;
        let ta = quantile(scenario.group_a(), state.alpha_a, 1.0 - q);
        let tb = quantile(scenario.group_b(), state.alpha_b, 1.0 - q);
        let u = qualdyn::expected_utility(scenario, state, (ta, tb));
        best = best.max(u);
    }
    // Boundary policies (reject/accept all) are always feasible.
    best = best.max(0.0);
    best = best.max(qualdyn::expected_utility(
        scenario,
        state,
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
    ));
    best
}

/// Brute-force per-group maximum over threshold grids (unconstrained
/// policies decouple across groups).
pub fn unconstrained_grid_max(scenario: &Scenario, state: &QualState, grid: usize) -> f64 {
    let group_max = |group: &GroupModel, alpha: f64| -> f64 {
        let (lo, hi) = group.support();
        let mut best = f64::NEG_INFINITY;
        for k in 0..=grid {
            let theta = lo + (hi - lo) * k as f64 / grid as f64;
            let tail1 = 1.0 - group.g1().cdf(theta);
            let tail0 = 1.0 - group.g0().cdf(theta);
            let u = alpha * scenario.u_plus() * tail1
                - (1.0 - alpha) * scenario.u_minus() * tail0;
            best = best.max(u);
        }
        best.max(0.0)
            .max(alpha * scenario.u_plus() - (1.0 - alpha) * scenario.u_minus())
    };
    scenario.group_a().share() * group_max(scenario.group_a(), state.alpha_a)
        + scenario.group_b().share() * group_max(scenario.group_b(), state.alpha_b)
}

/// Agent-level Monte-Carlo estimate of one dynamics step: sample each
/// agent's qualification, feature and transition explicitly.
///
/// Returns (mean next rate, standard error) per group.
pub fn mc_step<R: Rng>(
    scenario: &Scenario,
    state: &QualState,
    thresholds: (f64, f64),
    agents: usize,
    rng: &mut R,
) -> [(f64, f64); 2] {
    let mut out = [(0.0, 0.0); 2];
    for (slot, (group, alpha, theta)) in [
        (scenario.group_a(), state.alpha_a, thresholds.0),
        (scenario.group_b(), state.alpha_b, thresholds.1),
    ]
    .into_iter()
    .enumerate()
    {
        let mut qualified_next = 0u64;
        for _ in 0..agents {
            let qualified = rng.random::<f64>() < alpha;
            let x = if qualified {
                group.g1().sample(rng)
            } else {
                group.g0().sample(rng)
            };
            let accepted = x >= theta;
            let p = group
                .transitions()
                .prob(u8::from(qualified), u8::from(accepted));
            if rng.random::<f64>() < p {
                qualified_next += 1;
            }
        }
        let mean = qualified_next as f64 / agents as f64;
        let se = (mean * (1.0 - mean) / agents as f64).sqrt();
        out[slot] = (mean, se);
    }
    out
}
