use qualdyn::*;
use qualdyn::policy::Policy;

fn main() {
    let g = |t: (f64,f64,f64,f64)| GroupModel::new(
        FeatureDistribution::gaussian(-5.0, 5.0).unwrap(),
        FeatureDistribution::gaussian(5.0, 5.0).unwrap(),
        TransitionMatrix::new(t.0, t.1, t.2, t.3).unwrap(), 0.5).unwrap();
    let s = Scenario::new(g((0.4,0.5,0.5,0.9)), g((0.1,0.5,0.5,0.7)), 1.0, 1.0).unwrap();
    // brute-force: dense q grid, report argmax theta_b
    let brute = |aa: f64, ab: f64| -> (f64, f64, f64) {
        let st = QualState::new(aa, ab).unwrap();
        let q = |group: &GroupModel, alpha: f64, p: f64| {
            let (lo, hi) = group.support();
            let cdf = |x: f64| model::constraint_cdf(group, alpha, FairnessConstraint::DemographicParity, x).unwrap();
            let mut a = lo; let mut b = hi;
            for _ in 0..60 { let m = 0.5*(a+b); if cdf(m) >= p { b = m } else { a = m } }
            0.5*(a+b)
        };
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for k in 1..20000 {
            let mass = k as f64 / 20000.0;
            let ta = q(s.group_a(), aa, 1.0 - mass);
            let tb = q(s.group_b(), ab, 1.0 - mass);
            let u = expected_utility(&s, &st, (ta, tb));
            if u > best.0 { best = (u, ta, tb); }
        }
        best
    };
    for ab in [0.39, 0.64, 0.89] {
        let (u, ta, tb) = brute(0.7554040556306001, ab);
        println!("brute ab={ab}: u={u:.9} theta=({ta:+.5},{tb:+.5})");
    }

    // near-policy-independent scenario from the failing test
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);
    let b1: f64 = 0.3 + 0.2 * rng.random::<f64>();
    let b2: f64 = 0.5 + 0.2 * rng.random::<f64>();
    let gg = GroupModel::new(
        FeatureDistribution::gaussian(-4.0, 4.0).unwrap(),
        FeatureDistribution::gaussian(4.0, 4.0).unwrap(),
        TransitionMatrix::new(b1, (b1+0.02f64).min(0.95), b2, (b2+0.02f64).min(0.95)).unwrap(),
        0.5,
    ).unwrap();
    let s2 = Scenario::new(gg.clone(), gg, 1.0, 1.0).unwrap();
    let map = threshold_map(&s2, FairnessConstraint::DemographicParity).unwrap();
    // scan the 33x33 grid region for the worst h-partial
    let h = 1e-4;
    let mut worst = (0.0, 0.0, 0.0);
    for i in 0..33 {
        for j in 0..33 {
            let aa = h + (1.0 - 2.0*h) * i as f64 / 32.0;
            let ab = h + (1.0 - 2.0*h) * j as f64 / 32.0;
            let hp = |aa: f64, ab: f64| {
                let p = map.thresholds(&QualState::new(aa, ab).unwrap()).unwrap();
                (equilibrium::h_func(s2.group_a(), p.theta_a), equilibrium::h_func(s2.group_b(), p.theta_b))
            };
            let up = hp(aa, (ab + h).min(1.0));
            let dn = hp(aa, (ab - h).max(0.0));
            let d = ((up.0 - dn.0) / (2.0*h)).abs().max(((up.1 - dn.1) / (2.0*h)).abs());
            if d > worst.2 { worst = (aa, ab, d); }
        }
    }
    println!("worst cross partial at ({:.4},{:.4}): {:.2}", worst.0, worst.1, worst.2);
    let (aa, ab) = (worst.0, worst.1);
    for dab in [-2.0*h, -h, 0.0, h, 2.0*h] {
        let st = QualState::new(aa, (ab+dab).clamp(0.0,1.0)).unwrap();
        let p = map.thresholds(&st).unwrap();
        let q = map.acceptance_mass(&st, &p).unwrap();
        println!("  ab={:.6}: theta=({:+.8},{:+.8}) q={q:.8} bnd={} opts={}", st.alpha_b, p.theta_a, p.theta_b, p.boundary, p.local_optima);
    }
}
