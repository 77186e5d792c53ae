use nalgebra::{Matrix2, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use staris_core::geometry::{Vec2, Vec3};
use staris_core::gmphd::{
    extract, filter_step, predict, prune_merge, update, Detection, GaussianComponent, GmIntensity, PhdParams,
    SpawnTable, SpawnTerm,
};

const P_B: [f64; 3] = [0.0, 0.0, 12.0];

fn base_params() -> PhdParams {
    PhdParams {
        p_survival: 1.0,
        p_detect: 1.0,
        birth: Vec::new(),
        spawn: SpawnTable::default(),
        transition: Matrix2::identity(),
        process_cov: Matrix2::identity() * 1.5,
        measurement_cov: Matrix2::identity() * (1e-3f64).powi(2),
        clutter: None,
        p_b: Vec3::from(P_B),
        prune_threshold: 1e-5,
        merge_threshold: 4.0,
        extract_threshold: 0.5,
        max_components: 100,
    }
}

// Stand-alone EKF on the ground-target bearing model, written from scratch
// with atan2 forms of the two angles.
mod oracle {
    use nalgebra::{Matrix2, Vector2};

    pub fn h(c: &Vector2<f64>, b: [f64; 3]) -> Vector2<f64> {
        let (dx, dy, dz) = (c[0] - b[0], c[1] - b[1], -b[2]);
        let r = (dx * dx + dz * dz).sqrt();
        Vector2::new(dz.abs().atan2(dx), dy.atan2(r))
    }

    pub fn jac(c: &Vector2<f64>, b: [f64; 3]) -> Matrix2<f64> {
        let (dx, dy, dz) = (c[0] - b[0], c[1] - b[1], -b[2]);
        let r2 = dx * dx + dz * dz;
        let r = r2.sqrt();
        let rho2 = r2 + dy * dy;
        Matrix2::new(-dz.abs() / r2, 0.0, -dx * dy / (r * rho2), r / rho2)
    }

    pub fn step(
        m: &Vector2<f64>,
        p: &Matrix2<f64>,
        q: &Matrix2<f64>,
        r: &Matrix2<f64>,
        z: &Vector2<f64>,
        b: [f64; 3],
    ) -> (Vector2<f64>, Matrix2<f64>) {
        let p_pred = p + q;
        let g = jac(m, b);
        let s = g * p_pred * g.transpose() + r;
        let k = p_pred * g.transpose() * s.try_inverse().unwrap();
        let m_new = m + k * (z - h(m, b));
        let p_new = (Matrix2::identity() - k * g) * p_pred;
        (m_new, p_new)
    }
}

#[test]
fn single_target_reduces_to_ekf() {
    let params = base_params();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut truth = Vec2::new(20.0, -5.0);
    let vel = Vec2::new(1.0, 0.6);
    let m0 = Vec2::new(19.0, -4.0);
    let p0 = Matrix2::identity() * 4.0;
    let mut v = GmIntensity::new(vec![GaussianComponent::new(1.0, m0, p0)]);
    let (mut m, mut p) = (m0, p0);
    for k in 0..50 {
        truth += vel * 0.5;
        let noise = Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 1e-3;
        let z = oracle::h(&truth, P_B) + noise;
        let out = filter_step(&v, &[Detection::new(z)], &params);
        (m, p) = oracle::step(&m, &p, &params.process_cov, &params.measurement_cov, &z, P_B);
        assert_eq!(out.posterior.len(), 1, "period {k}");
        let c = &out.posterior.components[0];
        assert!((c.weight - 1.0).abs() < 1e-12);
        assert!((c.mean - m).norm() < 1e-9, "period {k}: {:?} vs {:?}", c.mean, m);
        assert!((c.cov - p).norm() < 1e-9);
        v = out.posterior;
    }
}

#[test]
fn nonzero_innovation_update_matches_ekf() {
    let params = base_params();
    let m = Vec2::new(30.0, 8.0);
    let p = Matrix2::new(2.0, 0.3, 0.3, 1.0);
    let pred = GmIntensity::new(vec![GaussianComponent::new(0.7, m, p)]);
    let z = oracle::h(&Vec2::new(30.4, 7.7), P_B);
    let (post, _) = update(&pred, &[Detection::new(z)], &params);
    let (m_ref, p_ref) = oracle::step(&m, &p, &Matrix2::zeros(), &params.measurement_cov, &z, P_B);
    let c = &post.components[1];
    assert!((c.mean - m_ref).norm() < 1e-9);
    assert!((c.cov - p_ref).norm() < 1e-9);
}

fn spd(c: &GaussianComponent) -> bool {
    let sym = (c.cov - c.cov.transpose()).norm() <= 1e-12 * c.cov.norm().max(1.0);
    sym && SymmetricEigen::new(c.cov).eigenvalues.iter().all(|&e| e > 0.0)
}

fn arb_component() -> impl Strategy<Value = GaussianComponent> {
    (1e-6..2.0f64, 5.0..55.0f64, -25.0..25.0f64, 0.05..6.0f64, 0.05..6.0f64, -0.9..0.9f64).prop_map(
        |(w, x, y, sx, sy, rho)| {
            let off = rho * sx.sqrt() * sy.sqrt();
            GaussianComponent::new(w, Vec2::new(x, y), Matrix2::new(sx, off, off, sy))
        },
    )
}

fn arb_intensity(max: usize) -> impl Strategy<Value = GmIntensity> {
    prop::collection::vec(arb_component(), 0..max).prop_map(GmIntensity::new)
}

fn arb_detections(max: usize) -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec((0.6..1.4f64, -0.6..0.6f64), 0..max)
        .prop_map(|v| v.into_iter().map(|(a, b)| Detection::new(Vec2::new(a, b))).collect())
}

fn params_with(n_spawn: usize, n_birth: usize) -> PhdParams {
    let mut p = base_params();
    p.p_survival = 0.99;
    p.p_detect = 0.9;
    p.spawn = SpawnTable::uniform(
        (0..n_spawn).map(|i| SpawnTerm { weight: 0.05, offset: Vec2::new(i as f64, 0.0), class: None }).collect(),
    );
    p.birth = (0..n_birth)
        .map(|i| GaussianComponent::new(0.03, Vec2::new(10.0 + 10.0 * i as f64, 0.0), Matrix2::identity() * 25.0))
        .collect();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn component_counts(prior in arb_intensity(12), z in arb_detections(6), n_spawn in 0usize..3, n_birth in 0usize..5) {
        let params = params_with(n_spawn, n_birth);
        let pred = predict(&prior, &params);
        prop_assert_eq!(pred.len(), prior.len() * (1 + n_spawn) + n_birth);
        let (post, stats) = update(&pred, &z, &params);
        prop_assert_eq!(stats.skipped_components, 0);
        prop_assert_eq!(post.len(), pred.len() * (1 + z.len()));
    }

    #[test]
    fn merge_conserves_weight(v in arb_intensity(40), merge in 0.1..50.0f64) {
        let zeta = 1e-5;
        let kept: f64 = v.iter().filter(|c| c.weight > zeta).map(|c| c.weight).sum();
        let out = prune_merge(&v, zeta, merge, usize::MAX);
        prop_assert!((out.total_weight() - kept).abs() <= 1e-12 * kept.max(1.0));
        prop_assert!(out.iter().all(spd));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn detection_weights_normalise_without_clutter(prior in arb_intensity(8), z in arb_detections(4)) {
        prop_assume!(!prior.is_empty());
        let params = base_params();
        let (post, _) = update(&prior, &z, &params);
        let n = prior.len();
        for (l, _) in z.iter().enumerate() {
            let s: f64 = post.components[n * (l + 1)..n * (l + 2)].iter().map(|c| c.weight).sum();
            // all-underflow likelihoods leave the set empty instead of normalised
            prop_assert!((s - 1.0).abs() < 1e-12 || s == 0.0, "sum {}", s);
        }
    }

    #[test]
    fn covariances_stay_positive_definite(prior in arb_intensity(8), z in arb_detections(4)) {
        let params = params_with(1, 2);
        let out = filter_step(&prior, &z, &params);
        let pred = predict(&prior, &params);
        prop_assert!(pred.iter().all(spd));
        let (upd, _) = update(&pred, &z, &params);
        prop_assert!(upd.iter().all(spd));
        prop_assert!(out.posterior.iter().all(spd));
    }

    #[test]
    fn extraction_ignores_order(v in arb_intensity(10), seed in 0u64..1000) {
        let mut shuffled = v.components.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let key = |s: &Vec<Vec2>| {
            let mut s: Vec<(f64, f64)> = s.iter().map(|c| (c[0], c[1])).collect();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s
        };
        let a = extract(&v, 0.5);
        let b = extract(&GmIntensity::new(shuffled), 0.5);
        prop_assert_eq!(a.count(), b.count());
        prop_assert_eq!(key(&a.states), key(&b.states));
    }
}

#[test]
fn predicted_mass_formula() {
    let params = params_with(2, 3);
    let prior = GmIntensity::new(vec![
        GaussianComponent::new(0.8, Vec2::new(20.0, 0.0), Matrix2::identity()),
        GaussianComponent::new(0.4, Vec2::new(30.0, 5.0), Matrix2::identity()),
    ]);
    let w = prior.total_weight();
    let want = params.p_survival * w + w * 0.1 + 0.09;
    assert!((predict(&prior, &params).total_weight() - want).abs() < 1e-12);
}
