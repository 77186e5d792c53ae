//! Geometric path synthesis and received-signal models.
//!
//! The outdoor BS→surface channel is a sum of point-scatterer paths, each
//! with a radar-equation amplitude, a bistatic Doppler shift and an integer
//! sample delay. The indoor surface→UT link is a single line-of-sight path.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geometry::{measure_angles, steering_vector, AnglePair, UpaGeometry, Vec3};
use crate::scene::{StaticScatterer, TargetTruth};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Modulus tolerance for passive phase vectors.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScattererId {
    Target(u32),
    Static(u32),
}

/// One BS→surface scattering path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub scatterer: ScattererId,
    pub position: Vec3,
    /// Complex gain `α·e^{jβ}`.
    pub gain: Complex64,
    /// Delay in seconds, snapped to the sample grid.
    pub delay: f64,
    pub doppler: f64,
    pub aod_bs: AnglePair,
    pub aoa_ris: AnglePair,
    pub dynamic: bool,
}

impl PathParams {
    /// Equivalent gain `h̄ = h·e^{j2πντ}`.
    pub fn equivalent_gain(&self) -> Complex64 {
        self.gain * Complex64::from_polar(1.0, 2.0 * PI * self.doppler * self.delay)
    }

    /// Integer delay tap `τ / T_s`.
    pub fn tap(&self, sample_period: f64) -> usize {
        (self.delay / sample_period).round() as usize
    }

    #[cfg(test)]
    pub(crate) fn placeholder() -> Self {
        Self {
            scatterer: ScattererId::Static(0),
            position: Vec3::new(20.0, 0.0, 0.0),
            gain: Complex64::new(1.0, 0.0),
            delay: 0.0,
            doppler: 0.0,
            aod_bs: AnglePair::new(0.5, 0.0),
            aoa_ris: AnglePair::new(2.5, 0.0),
            dynamic: false,
        }
    }
}

/// Line-of-sight surface→UT channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndoorChannel {
    pub gain: Complex64,
    pub delay: f64,
    pub aod_ris: AnglePair,
}

impl IndoorChannel {
    /// Indoor link towards `p_u` with gain drawn from `CN(0, variance)`.
    pub fn draw<R: Rng + ?Sized>(
        link: &Link,
        p_u: &Vec3,
        variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let aod_ris = measure_angles(p_u, &link.p_s)?;
        let delay = snap_delay((p_u - link.p_s).norm() / SPEED_OF_LIGHT, link.sample_period);
        Ok(Self { gain: complex_normal(variance, rng), delay, aod_ris })
    }
}

/// Static placement of the BS and the surface, and their arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub p_b: Vec3,
    pub p_s: Vec3,
    pub wavelength: f64,
    pub bs: UpaGeometry,
    pub ris: UpaGeometry,
    pub sample_period: f64,
}

/// Preamble/data frame layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub training_len: usize,
    /// BS training sequences, `N_B / N_B^RF`.
    pub bs_sequences: usize,
    /// UT training sequences, `⌈(N_R^x + N_R^y − 1)/(N_S^RF − 1)⌉`.
    pub ut_sequences: usize,
    pub data_len: usize,
    pub sample_period: f64,
}

impl FramePlan {
    pub fn new(
        bs: &UpaGeometry,
        bs_rf: usize,
        ris: &UpaGeometry,
        ris_rf: usize,
        training_len: usize,
        data_len: usize,
        sample_period: f64,
        max_delay: f64,
    ) -> Result<Self> {
        if (training_len as f64) < max_delay / sample_period {
            return Err(Error::Contract(format!(
                "training length {training_len} shorter than the maximum delay spread ({:.1} samples)",
                max_delay / sample_period
            )));
        }
        Ok(Self {
            training_len,
            bs_sequences: bs_sequence_count(bs, bs_rf)?,
            ut_sequences: ut_sequence_count(ris, ris_rf)?,
            data_len,
            sample_period,
        })
    }
}

pub fn bs_sequence_count(bs: &UpaGeometry, bs_rf: usize) -> Result<usize> {
    if bs_rf == 0 || bs.len() % bs_rf != 0 {
        return Err(Error::Contract(format!(
            "{} BS elements cannot be split over {bs_rf} RF chains",
            bs.len()
        )));
    }
    Ok(bs.len() / bs_rf)
}

pub fn ut_sequence_count(ris: &UpaGeometry, ris_rf: usize) -> Result<usize> {
    if ris_rf < 2 {
        return Err(Error::Contract("surface needs at least two RF chains".into()));
    }
    Ok((ris.n_x + ris.n_y - 1).div_ceil(ris_rf - 1))
}

pub fn snap_delay(delay: f64, sample_period: f64) -> f64 {
    (delay / sample_period).round() * sample_period
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Radar-equation amplitude `α = σ·λ²/(c·τ)²`.
pub fn path_amplitude(rcs: f64, wavelength: f64, delay: f64) -> f64 {
    let ct = SPEED_OF_LIGHT * delay;
    rcs * wavelength * wavelength / (ct * ct)
}

/// Bistatic Doppler `(1/λ)·vᵀ(u_b + u_s)` where `u_b`, `u_s` point from the
/// scatterer towards the BS and the surface.
pub fn bistatic_doppler(position: &Vec3, velocity: &Vec3, link: &Link) -> f64 {
    let u_b = (link.p_b - position).normalize();
    let u_s = (link.p_s - position).normalize();
    velocity.dot(&(u_b + u_s)) / link.wavelength
}

/// Amplitude shaping applied on top of the radar equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    /// `τ_max` of an exponential power-delay profile, when enabled.
    pub pdp_max_delay: Option<f64>,
    /// Common amplitude scale `σ_c`.
    pub scale: f64,
}

impl Default for GainProfile {
    fn default() -> Self {
        Self { pdp_max_delay: None, scale: 1.0 }
    }
}

impl GainProfile {
    pub fn amplitude(&self, rcs: f64, wavelength: f64, delay: f64) -> f64 {
        let pdp = self.pdp_max_delay.map_or(1.0, |t| (-delay / t).exp().sqrt());
        self.scale * pdp * path_amplitude(rcs, wavelength, delay)
    }
}

/// Path phases `β_p`, drawn on first sight of a scatterer and then held.
#[derive(Debug, Clone, Default)]
pub struct PhaseBook {
    phases: HashMap<ScattererId, f64>,
}

impl PhaseBook {
    pub fn phase<R: Rng + ?Sized>(&mut self, id: ScattererId, rng: &mut R) -> f64 {
        *self.phases.entry(id).or_insert_with(|| rng.random::<f64>() * 2.0 * PI)
    }
}

/// Synthesize one path per target and static scatterer.
pub fn build_outdoor_paths<R: Rng + ?Sized>(
    targets: &[TargetTruth],
    statics: &[StaticScatterer],
    link: &Link,
    profile: &GainProfile,
    phases: &mut PhaseBook,
    rng: &mut R,
) -> Result<Vec<PathParams>> {
    let mut paths = Vec::with_capacity(targets.len() + statics.len());
    let mut push = |id: ScattererId, position: Vec3, velocity: Vec3, rcs: f64, dynamic: bool| -> Result<()> {
        let length = (position - link.p_b).norm() + (link.p_s - position).norm();
        let exact_delay = length / SPEED_OF_LIGHT;
        let alpha = profile.amplitude(rcs, link.wavelength, exact_delay);
        let beta = phases.phase(id, rng);
        paths.push(PathParams {
            scatterer: id,
            position,
            gain: Complex64::from_polar(alpha, beta),
            delay: snap_delay(exact_delay, link.sample_period),
            doppler: if dynamic { bistatic_doppler(&position, &velocity, link) } else { 0.0 },
            aod_bs: measure_angles(&position, &link.p_b)?,
            aoa_ris: measure_angles(&position, &link.p_s)?,
            dynamic,
        });
        Ok(())
    };
    for t in targets {
        let pos = Vec3::new(t.state[0], t.state[1], 0.0);
        let vel = Vec3::new(t.velocity[0], t.velocity[1], 0.0);
        push(ScattererId::Target(t.id), pos, vel, t.rcs, true)?;
    }
    for s in statics {
        push(ScattererId::Static(s.id), s.position, Vec3::zeros(), s.rcs, false)?;
    }
    Ok(paths)
}

/// Orthogonal DFT scanning codebook: `N_B / N_B^RF` precoders, each holding
/// `N_B^RF` unit-norm beams. Beam `b = k_x·N_y + k_y` sits in precoder
/// `b / N_B^RF`.
pub fn scan_codebook(bs: &UpaGeometry, bs_rf: usize) -> Result<Vec<DMatrix<Complex64>>> {
    let groups = bs_sequence_count(bs, bs_rf)?;
    let n = bs.len();
    let norm = 1.0 / (n as f64).sqrt();
    Ok((0..groups)
        .map(|g| {
            DMatrix::from_fn(n, bs_rf, |row, col| {
                let b = g * bs_rf + col;
                let (kx, ky) = (b / bs.n_y, b % bs.n_y);
                let (ix, iy) = (row / bs.n_y, row % bs.n_y);
                let phase = 2.0
                    * PI
                    * (ix as f64 * kx as f64 / bs.n_x as f64 + iy as f64 * ky as f64 / bs.n_y as f64);
                Complex64::from_polar(norm, phase)
            })
        })
        .collect())
}

/// Spatial frequencies `(u_x, u_y) ∈ [−1, 1)²` at which `|a_Bᵀ f_b|` peaks
/// for DFT beam `b`.
pub fn codebook_beam_frequencies(bs: &UpaGeometry, b: usize) -> (f64, f64) {
    let (kx, ky) = (b / bs.n_y, b % bs.n_y);
    let peak = |k: usize, n: usize| wrap_frequency(-2.0 * k as f64 / n as f64);
    (peak(kx, bs.n_x), peak(ky, bs.n_y))
}

/// Map a spatial frequency onto `[−1, 1)`.
pub fn wrap_frequency(u: f64) -> f64 {
    (u + 1.0).rem_euclid(2.0) - 1.0
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Contract(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// `a_Bᵀ·F_B·1`: BS array gain of an analog precoder towards `aod`.
fn bs_gain(link: &Link, aod: AnglePair, precoder: &DMatrix<Complex64>) -> Result<Complex64> {
    check_len("precoder rows", precoder.nrows(), link.bs.len())?;
    let a_b = steering_vector(&link.bs, aod);
    let summed = precoder.column_sum();
    Ok(a_b.dot(&summed))
}

/// Received preamble at the surface's sensing element, one vector of
/// length `N_T` per BS training sequence.
pub fn received_ris_preamble<R: Rng + ?Sized>(
    paths: &[PathParams],
    link: &Link,
    precoders: &[DMatrix<Complex64>],
    training: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<DVector<Complex64>>> {
    let n_t = training.len();
    if n_t == 0 {
        return Err(Error::Contract("empty training sequence".into()));
    }
    let ts = link.sample_period;
    let mut out = Vec::with_capacity(precoders.len());
    for (l, f_b) in precoders.iter().enumerate() {
        let mut y = DVector::from_element(n_t, Complex64::new(0.0, 0.0));
        for p in paths {
            // [a_O]_1 is the always-on sensing element: unit response.
            let a_o_first = steering_vector(&link.ris, p.aoa_ris)[0];
            let coef = p.equivalent_gain() * a_o_first * bs_gain(link, p.aod_bs, f_b)?;
            let tap = p.tap(ts);
            let f_l = (l * n_t) as f64;
            for n in 0..n_t {
                let doppler = Complex64::from_polar(1.0, 2.0 * PI * p.doppler * (f_l + n as f64) * ts);
                let t = training[(n + n_t - tap % n_t) % n_t];
                y[n] += coef * doppler * t;
            }
        }
        if noise_var > 0.0 {
            for v in y.iter_mut() {
                *v += complex_normal(noise_var, rng);
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn check_passive(omega: &DVector<Complex64>, link: &Link) -> Result<()> {
    check_len("phase vector", omega.len(), link.ris.len())?;
    if let Some((n, w)) = omega.iter().enumerate().find(|(_, w)| (w.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
        return Err(Error::Contract(format!("phase entry {n} has modulus {}", w.norm())));
    }
    Ok(())
}

/// Per-path cascade coefficient `h̄_p·(a_Rᵀ diag(ω) a_O)·(a_Bᵀ F_B 1)`.
fn cascade_coefficients(
    paths: &[PathParams],
    indoor: &IndoorChannel,
    omega: &DVector<Complex64>,
    precoder: &DMatrix<Complex64>,
    link: &Link,
) -> Result<Vec<Complex64>> {
    check_passive(omega, link)?;
    let a_r = steering_vector(&link.ris, indoor.aod_ris);
    let a_r_omega = a_r.component_mul(omega);
    paths
        .iter()
        .map(|p| {
            let a_o = steering_vector(&link.ris, p.aoa_ris);
            Ok(p.equivalent_gain() * a_r_omega.dot(&a_o) * bs_gain(link, p.aod_bs, precoder)?)
        })
        .collect()
}

/// Received data block at the indoor UT.
pub fn received_ut_data<R: Rng + ?Sized>(
    paths: &[PathParams],
    indoor: &IndoorChannel,
    omega: &DVector<Complex64>,
    precoder: &DMatrix<Complex64>,
    data: &[Complex64],
    noise_var: f64,
    link: &Link,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    let coefs = cascade_coefficients(paths, indoor, omega, precoder, link)?;
    let n_d = data.len();
    let ts = link.sample_period;
    let tap_i = (indoor.delay / ts).round() as usize;
    let mut y = DVector::from_element(n_d, Complex64::new(0.0, 0.0));
    if n_d == 0 {
        return Ok(y);
    }
    for (p, c) in paths.iter().zip(&coefs) {
        let tap = (p.tap(ts) + tap_i) % n_d;
        let c = indoor.gain * c;
        for n in 0..n_d {
            let doppler = Complex64::from_polar(1.0, 2.0 * PI * p.doppler * n as f64 * ts);
            y[n] += c * doppler * data[(n + n_d - tap) % n_d];
        }
    }
    if noise_var > 0.0 {
        for v in y.iter_mut() {
            *v += complex_normal(noise_var, rng);
        }
    }
    Ok(y)
}

/// Mean noiseless received power over a block of `block_len` constant unit
/// pilot symbols.
pub fn received_signal_power(
    paths: &[PathParams],
    indoor: &IndoorChannel,
    omega: &DVector<Complex64>,
    precoder: &DMatrix<Complex64>,
    block_len: usize,
    link: &Link,
) -> Result<f64> {
    let coefs = cascade_coefficients(paths, indoor, omega, precoder, link)?;
    let ts = link.sample_period;
    let n_d = block_len.max(1);
    let mut power = 0.0;
    for n in 0..n_d {
        let s: Complex64 = paths
            .iter()
            .zip(&coefs)
            .map(|(p, c)| c * Complex64::from_polar(1.0, 2.0 * PI * p.doppler * n as f64 * ts))
            .sum();
        power += (indoor.gain * s).norm_sqr();
    }
    Ok(power / n_d as f64)
}

/// Received SNR at the UT in dB.
pub fn received_snr_ut(
    paths: &[PathParams],
    indoor: &IndoorChannel,
    omega: &DVector<Complex64>,
    precoder: &DMatrix<Complex64>,
    noise_var: f64,
    block_len: usize,
    link: &Link,
) -> Result<f64> {
    let p = received_signal_power(paths, indoor, omega, precoder, block_len, link)?;
    Ok(10.0 * (p / noise_var).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn link() -> Link {
        let wavelength = SPEED_OF_LIGHT / 30e9;
        Link {
            p_b: Vec3::new(0.0, 0.0, 12.0),
            p_s: Vec3::new(60.0, 0.0, 6.0),
            wavelength,
            bs: UpaGeometry::new(16, 16, wavelength).unwrap(),
            ris: UpaGeometry::new(16, 16, wavelength).unwrap(),
            sample_period: 1e-8,
        }
    }

    #[test]
    fn amplitude_arithmetic() {
        let a = path_amplitude(1.0, 0.01, 2e-7);
        // 1e-4 / (3e8 * 2e-7)^2 with c rounded to 3e8
        assert_relative_eq!(a, 1e-4 / 3600.0, max_relative = 2e-3);
    }

    #[test]
    fn static_and_perpendicular_paths_have_no_doppler() {
        let l = link();
        let statics = [StaticScatterer { id: 0, position: Vec3::new(30.0, 10.0, 4.0), rcs: 5.0 }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let paths =
            build_outdoor_paths(&[], &statics, &l, &GainProfile::default(), &mut PhaseBook::default(), &mut rng)
                .unwrap();
        assert_eq!(paths[0].doppler, 0.0);
        assert!(!paths[0].dynamic);

        // On the BS–surface mid-plane and moving along Y: both unit vectors
        // have zero Y component.
        let pos = Vec3::new(30.0, 0.0, 0.0);
        assert_eq!(bistatic_doppler(&pos, &Vec3::new(0.0, 2.0, 0.0), &l), 0.0);
        assert!(bistatic_doppler(&pos, &Vec3::new(2.0, 0.0, 0.0), &l).abs() > 1.0);
    }

    #[test]
    fn phases_persist_per_scatterer() {
        let mut book = PhaseBook::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = book.phase(ScattererId::Target(3), &mut rng);
        let b = book.phase(ScattererId::Target(4), &mut rng);
        assert_eq!(book.phase(ScattererId::Target(3), &mut rng), a);
        assert_ne!(a, b);
    }

    #[test]
    fn sequence_counts() {
        let l = link();
        assert_eq!(bs_sequence_count(&l.bs, 32).unwrap(), 8);
        assert_eq!(ut_sequence_count(&l.ris, 5).unwrap(), 8);
        assert!(bs_sequence_count(&l.bs, 7).is_err());
        assert!(ut_sequence_count(&l.ris, 1).is_err());
    }

    #[test]
    fn codebook_is_orthonormal() {
        let g = UpaGeometry::new(4, 4, 0.01).unwrap();
        let book = scan_codebook(&g, 4).unwrap();
        assert_eq!(book.len(), 4);
        let all = DMatrix::from_fn(16, 16, |r, c| book[c / 4][(r, c % 4)]);
        let gram = all.adjoint() * &all;
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn beam_frequencies_locate_the_peak() {
        let l = link();
        let book = scan_codebook(&l.bs, 32).unwrap();
        for b in [0usize, 17, 100, 255] {
            let (ux, uy) = codebook_beam_frequencies(&l.bs, b);
            let s = (ux * ux + uy * uy).sqrt();
            if s >= 1.0 {
                continue;
            }
            let a = AnglePair::new(s.asin(), ux.atan2(uy));
            let f = book[b / 32].column(b % 32).into_owned();
            assert!((steering_vector(&l.bs, a).dot(&f).norm() - 16.0).abs() < 1e-9, "beam {b}");
        }
        assert_eq!(wrap_frequency(1.0), -1.0);
        assert_eq!(wrap_frequency(-0.25), -0.25);
    }

    #[test]
    fn non_passive_phase_vector_rejected() {
        let l = link();
        let indoor = IndoorChannel { gain: Complex64::new(1.0, 0.0), delay: 0.0, aod_ris: AnglePair::new(0.3, 0.1) };
        let mut omega = DVector::from_element(256, Complex64::new(1.0, 0.0));
        omega[7] = Complex64::new(0.5, 0.0);
        let f = DMatrix::from_element(256, 1, Complex64::new(1.0 / 16.0, 0.0));
        let r = received_snr_ut(&[PathParams::placeholder()], &indoor, &omega, &f, 1.0, 16, &l);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn silent_indoor_link_gives_noise_only() {
        let l = link();
        let indoor = IndoorChannel { gain: Complex64::new(0.0, 0.0), delay: 0.0, aod_ris: AnglePair::new(0.3, 0.1) };
        let omega = DVector::from_element(256, Complex64::new(1.0, 0.0));
        let f = DMatrix::from_element(256, 1, Complex64::new(1.0 / 16.0, 0.0));
        let data = vec![Complex64::new(1.0, 0.0); 32];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = received_ut_data(&[PathParams::placeholder()], &indoor, &omega, &f, &data, 0.0, &l, &mut rng)
            .unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
    }
}
