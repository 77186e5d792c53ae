use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use staris_core::beam::{analog_precoder, subbeam_bs, subbeam_ris};
use staris_core::channel::{
    path_amplitude, received_ris_preamble, received_snr_ut, received_ut_data, IndoorChannel, Link, PathParams,
    ScattererId,
};
use staris_core::geometry::{steering_vector, AnglePair, UpaGeometry, Vec3};

fn link() -> Link {
    let wavelength = 0.01;
    Link {
        p_b: Vec3::new(0.0, 0.0, 12.0),
        p_s: Vec3::new(60.0, 0.0, 6.0),
        wavelength,
        bs: UpaGeometry::new(16, 16, wavelength).unwrap(),
        ris: UpaGeometry::new(16, 16, wavelength).unwrap(),
        sample_period: 1e-8,
    }
}

fn path(gain: Complex64, delay: f64, doppler: f64) -> PathParams {
    PathParams {
        scatterer: ScattererId::Target(0),
        position: Vec3::new(20.0, 3.0, 0.0),
        gain,
        delay,
        doppler,
        aod_bs: AnglePair::new(0.9, 0.2),
        aoa_ris: AnglePair::new(2.3, -0.1),
        dynamic: doppler != 0.0,
    }
}

fn training(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect()
}

fn matched_precoder(l: &Link, a: AnglePair) -> DMatrix<Complex64> {
    let f = subbeam_bs(a, &l.bs);
    let n = f.norm();
    analog_precoder(&(f / Complex64::new(n, 0.0)), 1)
}

#[test]
fn amplitude_worked_example() {
    let a = path_amplitude(1.0, 0.01, 2e-7);
    let ct = staris_core::SPEED_OF_LIGHT * 2e-7;
    assert!((a - 1e-4 / (ct * ct)).abs() < 1e-20);
    // c rounded to 3e8 gives 1e-4 / 3600
    assert!((a - 1e-4 / 3600.0).abs() < 2e-3 * a);
    assert!((a - 2.78e-8).abs() < 1e-10);
}

#[test]
fn single_path_preamble_closed_form() {
    let l = link();
    let h = Complex64::new(0.3, -0.4);
    let p = path(h, 0.0, 0.0);
    let t = training(32, 1);
    let y = received_ris_preamble(&[p.clone()], &l, &[matched_precoder(&l, p.aod_bs)], &t, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    for (n, v) in y[0].iter().enumerate() {
        let want = h * 16.0 * t[n];
        assert!((v - want).norm() < 1e-9, "sample {n}");
    }
}

#[test]
fn delay_is_a_circular_shift() {
    let l = link();
    let t = training(32, 2);
    let f = [matched_precoder(&l, path(Complex64::new(1.0, 0.0), 0.0, 0.0).aod_bs)];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y0 = received_ris_preamble(&[path(Complex64::new(1.0, 0.0), 0.0, 0.0)], &l, &f, &t, 0.0, &mut rng).unwrap();
    let y3 = received_ris_preamble(&[path(Complex64::new(1.0, 0.0), 3e-8, 0.0)], &l, &f, &t, 0.0, &mut rng).unwrap();
    for n in 0..32 {
        assert!((y3[0][n] - y0[0][(n + 32 - 3) % 32]).norm() < 1e-9);
    }
}

#[test]
fn preamble_without_paths_is_noise() {
    let l = link();
    let t = training(4096, 3);
    let f = [matched_precoder(&l, AnglePair::new(1.0, 0.0))];
    let y = received_ris_preamble(&[], &l, &f, &t, 2.5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let var = y[0].iter().map(|v| v.norm_sqr()).sum::<f64>() / 4096.0;
    assert!((var - 2.5).abs() < 0.15, "{var}");
}

#[test]
fn preamble_energy_per_sample() {
    let l = link();
    let p = path(Complex64::new(1.0, 0.0), 0.0, 0.0);
    let f = matched_precoder(&l, AnglePair::new(0.95, 0.25));
    let a_b = steering_vector(&l.bs, p.aod_bs);
    let bs_gain = a_b.dot(&f.column_sum()).norm_sqr();
    let t = training(64, 5);
    let sigma2 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 400;
    let mean: f64 = (0..trials)
        .map(|_| {
            let y = received_ris_preamble(&[p.clone()], &l, &[f.clone()], &t, sigma2, &mut rng).unwrap();
            y[0].norm_squared() / 64.0
        })
        .sum::<f64>()
        / trials as f64;
    let want = bs_gain + sigma2;
    assert!((mean - want).abs() < 0.03 * want, "{mean} vs {want}");
}

#[test]
fn signals_are_linear_in_path_gains() {
    let l = link();
    let t = training(16, 7);
    let f = [matched_precoder(&l, AnglePair::new(0.9, 0.2))];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = path(Complex64::new(0.2, 0.1), 2e-8, 40.0);
    let mut b = path(Complex64::new(-0.5, 0.3), 5e-8, -15.0);
    b.aod_bs = AnglePair::new(1.2, -0.3);
    let ya = received_ris_preamble(&[a.clone()], &l, &f, &t, 0.0, &mut rng).unwrap();
    let yb = received_ris_preamble(&[b.clone()], &l, &f, &t, 0.0, &mut rng).unwrap();
    let yab = received_ris_preamble(&[a.clone(), b.clone()], &l, &f, &t, 0.0, &mut rng).unwrap();
    assert!((&yab[0] - &ya[0] - &yb[0]).norm() < 1e-9);

    let mut a2 = a.clone();
    a2.gain *= Complex64::new(0.0, 3.0);
    let y2 = received_ris_preamble(&[a2], &l, &f, &t, 0.0, &mut rng).unwrap();
    assert!((&y2[0] - &ya[0] * Complex64::new(0.0, 3.0)).norm() < 1e-9);
}

#[test]
fn static_paths_give_time_invariant_sequences() {
    let l = link();
    let t = training(16, 8);
    let f = matched_precoder(&l, AnglePair::new(0.9, 0.2));
    let p = path(Complex64::new(1.0, 0.5), 4e-8, 0.0);
    let y = received_ris_preamble(&[p], &l, &[f.clone(), f], &t, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!((&y[0] - &y[1]).norm() < 1e-12);
}

fn indoor() -> IndoorChannel {
    IndoorChannel { gain: Complex64::new(0.8, 0.6), delay: 0.0, aod_ris: AnglePair::new(1.3, 0.4) }
}

fn random_unit_modulus(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    DVector::from_iterator(n, (0..n).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)))
}

#[test]
fn closed_form_beams_beat_random_alternatives() {
    let l = link();
    let p = path(Complex64::new(1e-3, 0.0), 0.0, 0.0);
    let omega = subbeam_ris(indoor().aod_ris, p.aoa_ris, &l.ris);
    let f = matched_precoder(&l, p.aod_bs);
    let data = vec![Complex64::new(1.0, 0.0); 8];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let energy = |w: &DVector<Complex64>, f: &DMatrix<Complex64>, rng: &mut ChaCha8Rng| {
        received_ut_data(&[p.clone()], &indoor(), w, f, &data, 0.0, &l, rng).unwrap().norm_squared()
    };
    let best = energy(&omega, &f, &mut rng);
    for _ in 0..100 {
        let w = random_unit_modulus(256, &mut rng);
        let v = random_unit_modulus(256, &mut rng) / Complex64::new(16.0, 0.0);
        let alt = energy(&w, &analog_precoder(&v, 1), &mut rng);
        assert!(alt < best);
    }
}

#[test]
fn silent_indoor_link_is_noise_only() {
    let l = link();
    let p = path(Complex64::new(1.0, 0.0), 0.0, 0.0);
    let silent = IndoorChannel { gain: Complex64::new(0.0, 0.0), ..indoor() };
    let omega = subbeam_ris(silent.aod_ris, p.aoa_ris, &l.ris);
    let f = matched_precoder(&l, p.aod_bs);
    let data = vec![Complex64::new(1.0, 0.0); 20_000];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let floor = |var: f64, rng: &mut ChaCha8Rng| {
        received_ut_data(&[p.clone()], &silent, &omega, &f, &data, var, &l, rng).unwrap().norm_squared() / 20_000.0
    };
    let one = floor(1.0, &mut rng);
    let two = floor(2.0, &mut rng);
    assert!((one - 1.0).abs() < 0.05);
    assert!((two / one - 2.0).abs() < 0.1);
}

#[test]
fn snr_falls_with_noise() {
    let l = link();
    let p = path(Complex64::new(1e-3, 0.0), 0.0, 0.0);
    let omega = subbeam_ris(indoor().aod_ris, p.aoa_ris, &l.ris);
    let f = matched_precoder(&l, p.aod_bs);
    let mut last = f64::INFINITY;
    for var in [1e-6, 1e-3, 1.0, 1e3, 1e9] {
        let s = received_snr_ut(&[p.clone()], &indoor(), &omega, &f, var, 16, &l).unwrap();
        assert!(s < last);
        last = s;
    }
}

#[test]
fn bs_array_gain_gap() {
    // matched beam vs a single active element, both unit norm
    let l = link();
    let p = path(Complex64::new(1e-3, 0.0), 0.0, 0.0);
    let omega = subbeam_ris(indoor().aod_ris, p.aoa_ris, &l.ris);
    let matched = matched_precoder(&l, p.aod_bs);
    let mut single = DVector::from_element(256, Complex64::new(0.0, 0.0));
    single[0] = Complex64::new(1.0, 0.0);
    let single = analog_precoder(&single, 1);
    let a = received_snr_ut(&[p.clone()], &indoor(), &omega, &matched, 1.0, 8, &l).unwrap();
    let b = received_snr_ut(&[p], &indoor(), &omega, &single, 1.0, 8, &l).unwrap();
    assert!((a - b - 10.0 * 256f64.log10()).abs() < 1e-9);
}
