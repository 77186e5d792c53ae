//! Ground-truth scatterer timeline and the sensing front-end.
//!
//! Truth targets carry a constant velocity on top of the random-walk drift
//! the tracker assumes, so the filter always runs slightly mismatched.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::channel::PathParams;
use crate::geometry::{ground_point, jacobian_measure, measure_angles, AnglePair, Vec2, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetClass {
    Tiny,
    Middle,
    Big,
}

impl TargetClass {
    pub const ALL: [TargetClass; 3] = [TargetClass::Tiny, TargetClass::Middle, TargetClass::Big];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Typical RCS range (m²) used when drawing truth targets of this class.
    pub fn rcs_range(self) -> (f64, f64) {
        match self {
            TargetClass::Tiny => (0.3, 0.9),
            TargetClass::Middle => (2.0, 10.0),
            TargetClass::Big => (25.0, 60.0),
        }
    }
}

/// Fallback RCS class boundaries in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcsThresholds {
    /// Values strictly below this are `Tiny`.
    pub middle_from: f64,
    /// Values at or above this are `Big`.
    pub big_from: f64,
}

impl Default for RcsThresholds {
    fn default() -> Self {
        Self { middle_from: 1.0, big_from: 20.0 }
    }
}

impl RcsThresholds {
    pub fn classify(&self, rcs: f64) -> TargetClass {
        if rcs < self.middle_from {
            TargetClass::Tiny
        } else if rcs < self.big_from {
            TargetClass::Middle
        } else {
            TargetClass::Big
        }
    }
}

/// Minimum separation, in decades of RCS, between two clusters.
pub const DEFAULT_CLUSTER_GAP_DECADES: f64 = 0.5;

/// Three-way RCS labelling with the default thresholds and gap.
pub fn classify_by_rcs(values: &[f64]) -> Vec<TargetClass> {
    classify_by_rcs_with(values, &RcsThresholds::default(), DEFAULT_CLUSTER_GAP_DECADES)
}

/// 1-D clustering of `log10(rcs)`: split at the (at most two) largest gaps
/// wider than `min_gap_decades`. Three clusters map to Tiny/Middle/Big in
/// order; with fewer clusters each cluster is labelled by thresholding its
/// geometric mean.
pub fn classify_by_rcs_with(
    values: &[f64],
    thresholds: &RcsThresholds,
    min_gap_decades: f64,
) -> Vec<TargetClass> {
    if values.is_empty() {
        return Vec::new();
    }
    let logs: Vec<f64> = values.iter().map(|v| v.max(f64::MIN_POSITIVE).log10()).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| logs[a].total_cmp(&logs[b]));

    let mut gaps: Vec<(f64, usize)> = order
        .windows(2)
        .enumerate()
        .map(|(i, w)| (logs[w[1]] - logs[w[0]], i + 1))
        .filter(|(g, _)| *g > min_gap_decades)
        .collect();
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cuts: Vec<usize> = gaps.iter().take(2).map(|g| g.1).collect();
    cuts.sort_unstable();

    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied());
    bounds.push(order.len());
    let clusters: Vec<&[usize]> = bounds.windows(2).map(|b| &order[b[0]..b[1]]).collect();

    let mut labels = vec![TargetClass::Tiny; values.len()];
    for (ci, members) in clusters.iter().enumerate() {
        let label = if clusters.len() == 3 {
            TargetClass::ALL[ci]
        } else {
            let mean_log = members.iter().map(|&i| logs[i]).sum::<f64>() / members.len() as f64;
            thresholds.classify(10f64.powf(mean_log))
        };
        for &i in members.iter() {
            labels[i] = label;
        }
    }
    labels
}

/// Ground-truth state of one dynamic scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: u32,
    pub state: Vec2,
    pub velocity: Vec2,
    pub rcs: f64,
    pub class: TargetClass,
}

/// A scatterer that never moves (tree, building corner, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticScatterer {
    pub id: u32,
    pub position: Vec3,
    pub rcs: f64,
}

/// Rectangular ground region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Area {
    pub fn contains(&self, c: &Vec2) -> bool {
        c[0] >= self.x_min && c[0] <= self.x_max && c[1] >= self.y_min && c[1] <= self.y_max
    }

    /// True when `c` is at least `margin` inside every edge.
    pub fn contains_with_margin(&self, c: &Vec2, margin: f64) -> bool {
        c[0] >= self.x_min + margin
            && c[0] <= self.x_max - margin
            && c[1] >= self.y_min + margin
            && c[1] <= self.y_max - margin
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        Vec2::new(
            self.x_min + rng.random::<f64>() * self.width(),
            self.y_min + rng.random::<f64>() * self.depth(),
        )
    }
}

/// Random-walk motion model. `sigma_v = 0` gives a noiseless walk, which
/// the truth generator allows; the tracker needs `sigma_v > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// ISAC period Δ in seconds.
    pub period: f64,
    pub sigma_v: f64,
}

impl MotionParams {
    pub fn new(period: f64, sigma_v: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Contract(format!("period must be positive, got {period}")));
        }
        if !(sigma_v >= 0.0 && sigma_v.is_finite()) {
            return Err(Error::Contract(format!("sigma_v must be non-negative, got {sigma_v}")));
        }
        Ok(Self { period, sigma_v })
    }

    /// `Q = σ_v·Δ·I₂`.
    pub fn process_cov(&self) -> Matrix2<f64> {
        Matrix2::identity() * (self.sigma_v * self.period)
    }

    pub fn transition(&self) -> Matrix2<f64> {
        Matrix2::identity()
    }
}

/// Exact one-period displacement under constant acceleration, compared with
/// the constant-velocity approximation. Returns `(true, linear, deviation)`.
pub fn constant_velocity_deviation(speed: f64, accel: f64, period: f64) -> (f64, f64, f64) {
    let linear = speed * period;
    let exact = linear + 0.5 * accel * period * period;
    (exact, linear, exact - linear)
}

fn standard_normal2<R: Rng + ?Sized>(rng: &mut R) -> Vec2 {
    Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `A·c + q`, `q ~ N(0, Q)`.
pub fn step_state<R: Rng + ?Sized>(c: &Vec2, mp: &MotionParams, rng: &mut R) -> Vec2 {
    let std = (mp.sigma_v * mp.period).sqrt();
    mp.transition() * c + standard_normal2(rng) * std
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Birth { position: Vec2, velocity: Vec2, class: TargetClass, rcs: f64 },
    Spawn { parent: u32, offset: Vec2, velocity: Vec2, class: TargetClass, rcs: f64 },
    Exit { id: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvent {
    pub period: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Per-period cardinality bookkeeping from [`evolve_scene`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvolveStats {
    pub births: usize,
    pub spawns: usize,
    pub exits: usize,
    pub boundary_removals: usize,
}

/// Owns the id counter so spawned and born targets get fresh ids.
#[derive(Debug, Clone)]
pub struct Scene {
    pub area: Area,
    pub motion: MotionParams,
    pub targets: Vec<TargetTruth>,
    next_id: u32,
}

impl Scene {
    pub fn new(area: Area, motion: MotionParams, targets: Vec<TargetTruth>) -> Self {
        let next_id = targets.iter().map(|t| t.id + 1).max().unwrap_or(0);
        Self { area, motion, targets, next_id }
    }

    pub fn next_id(&self) -> u32 {
        self.next_id
    }

    /// Advance to period `k`, applying the events scheduled for `k`.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        events: &[SceneEvent],
        rng: &mut R,
    ) -> Result<EvolveStats> {
        let (next, stats) =
            evolve_scene(&self.targets, k, events, &self.area, &self.motion, &mut self.next_id, rng)?;
        self.targets = next;
        Ok(stats)
    }
}

/// Move every target by `v·Δ + q`, drop those that left the area, then apply
/// the events of period `k` (exits, spawns, births, in that order).
pub fn evolve_scene<R: Rng + ?Sized>(
    prev: &[TargetTruth],
    k: usize,
    events: &[SceneEvent],
    area: &Area,
    mp: &MotionParams,
    next_id: &mut u32,
    rng: &mut R,
) -> Result<(Vec<TargetTruth>, EvolveStats)> {
    let mut stats = EvolveStats::default();
    let mut next = Vec::with_capacity(prev.len() + 1);
    for t in prev {
        let drifted = step_state(&t.state, mp, rng) + t.velocity * mp.period;
        if area.contains(&drifted) {
            next.push(TargetTruth { state: drifted, ..t.clone() });
        } else {
            stats.boundary_removals += 1;
        }
    }

    let current: Vec<&SceneEvent> = events.iter().filter(|e| e.period == k).collect();
    for ev in &current {
        if let EventKind::Exit { id } = ev.kind {
            if let Some(pos) = next.iter().position(|t| t.id == id) {
                next.remove(pos);
                stats.exits += 1;
            }
        }
    }
    for ev in &current {
        match &ev.kind {
            EventKind::Spawn { parent, offset, velocity, class, rcs } => {
                let p = prev.iter().find(|t| t.id == *parent).ok_or_else(|| Error::SceneEvent {
                    period: k,
                    reason: format!("spawn parent {parent} is not alive at period {}", k.saturating_sub(1)),
                })?;
                next.push(TargetTruth {
                    id: fresh_id(next_id),
                    state: p.state + p.velocity * mp.period + offset,
                    velocity: *velocity,
                    rcs: *rcs,
                    class: *class,
                });
                stats.spawns += 1;
            }
            EventKind::Birth { position, velocity, class, rcs } => {
                next.push(TargetTruth {
                    id: fresh_id(next_id),
                    state: *position,
                    velocity: *velocity,
                    rcs: *rcs,
                    class: *class,
                });
                stats.births += 1;
            }
            EventKind::Exit { .. } => {}
        }
    }
    Ok((next, stats))
}

fn fresh_id(next_id: &mut u32) -> u32 {
    let id = *next_id;
    *next_id += 1;
    id
}

/// Draw a target of `class` inside `area` with speed in `speed_range`.
///
/// When `horizon` is given, positions and velocities are redrawn (up to a
/// fixed budget) until the straight-line track stays `margin` inside the
/// area for that many seconds.
pub fn random_target<R: Rng + ?Sized>(
    id: u32,
    class: TargetClass,
    area: &Area,
    speed_range: (f64, f64),
    horizon: Option<(f64, f64)>,
    rng: &mut R,
) -> TargetTruth {
    const ATTEMPTS: usize = 2000;
    let (lo, hi) = class.rcs_range();
    let rcs = lo + rng.random::<f64>() * (hi - lo);
    let draw = |rng: &mut R| {
        let pos = area.sample(rng);
        let speed = speed_range.0 + rng.random::<f64>() * (speed_range.1 - speed_range.0);
        let heading = rng.random::<f64>() * 2.0 * PI;
        (pos, Vec2::new(heading.cos(), heading.sin()) * speed)
    };
    let (mut state, mut velocity) = draw(rng);
    if let Some((seconds, margin)) = horizon {
        for _ in 0..ATTEMPTS {
            let end = state + velocity * seconds;
            if area.contains_with_margin(&state, margin) && area.contains_with_margin(&end, margin) {
                break;
            }
            (state, velocity) = draw(rng);
        }
    }
    TargetTruth { id, state, velocity, rcs, class }
}

/// Split paths into (dynamic, static) by `|ν| > ν_thresh`.
pub fn identify_dynamic(paths: &[PathParams], nu_thresh: f64) -> (Vec<&PathParams>, Vec<&PathParams>) {
    paths.iter().partition(|p| p.doppler.abs() > nu_thresh)
}

/// Where a measurement came from. Truth-side only; the filter never sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementOrigin {
    Target(u32),
    Static(u32),
    Clutter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// AoD at the BS.
    pub z: AnglePair,
    pub doppler: f64,
    pub rcs_hat: f64,
    /// Estimated path gain, used for beam weighting.
    pub gain: Complex64,
    pub origin: MeasurementOrigin,
}

impl Measurement {
    pub fn is_clutter(&self) -> bool {
        self.origin == MeasurementOrigin::Clutter
    }
}

/// One scattering path that the sensing front-end can report.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSource {
    pub origin: MeasurementOrigin,
    /// Scatterer position (z = 0 for ground targets).
    pub position: Vec3,
    pub doppler: f64,
    pub rcs: f64,
    pub gain: Complex64,
}

/// Detection and noise model of the parameter-estimation front-end.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub p_detect: f64,
    /// Angle-noise covariance `R` (rad²), symmetric positive definite.
    pub angle_cov: Matrix2<f64>,
    /// Standard deviation of `ln(rcs_hat / rcs)`.
    pub rcs_log_std: f64,
}

impl SensorModel {
    fn angle_noise_factor(&self) -> Result<Matrix2<f64>> {
        nalgebra::Cholesky::new(self.angle_cov)
            .map(|c| c.l())
            .ok_or_else(|| Error::Contract("measurement covariance is not positive definite".into()))
    }
}

/// Angular region where ground points of `area` appear from `origin`,
/// with its Lebesgue measure `V_s` (rad²).
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterRegion {
    pub origin: Vec3,
    pub area: Area,
    pub elevation: (f64, f64),
    pub azimuth: (f64, f64),
    pub volume: f64,
}

impl ClutterRegion {
    /// Quadrature points per axis for the `V_s` integral.
    const QUADRATURE: usize = 400;

    pub fn new(area: Area, origin: Vec3) -> Result<Self> {
        if origin[2] <= 0.0 {
            return Err(Error::Contract("clutter region needs a reference above ground".into()));
        }
        // ψ = atan(dy / r) and φ = atan2(h, dx) are monotone in the corners
        let mut el = (f64::INFINITY, f64::NEG_INFINITY);
        let mut az = (f64::INFINITY, f64::NEG_INFINITY);
        let n = 64;
        for i in 0..=n {
            for j in 0..=n {
                let c = Vec2::new(
                    area.x_min + area.width() * i as f64 / n as f64,
                    area.y_min + area.depth() * j as f64 / n as f64,
                );
                let a = measure_angles(&Vec3::new(c[0], c[1], 0.0), &origin)?;
                el = (el.0.min(a.elevation), el.1.max(a.elevation));
                az = (az.0.min(a.azimuth), az.1.max(a.azimuth));
            }
        }
        el = (el.0.max(0.0), el.1.min(PI));
        az = (az.0.max(-FRAC_PI_2), az.1.min(FRAC_PI_2));

        // V_s = ∫_area |det ∂g/∂c| dc, midpoint rule
        let m = Self::QUADRATURE;
        let (hx, hy) = (area.width() / m as f64, area.depth() / m as f64);
        let mut volume = 0.0;
        for i in 0..m {
            for j in 0..m {
                let c = Vec2::new(area.x_min + (i as f64 + 0.5) * hx, area.y_min + (j as f64 + 0.5) * hy);
                volume += jacobian_measure(&c, &origin)?.determinant().abs();
            }
        }
        volume *= hx * hy;
        Ok(Self { origin, area, elevation: el, azimuth: az, volume })
    }

    pub fn contains(&self, z: &AnglePair) -> bool {
        ground_point(*z, &self.origin).is_some_and(|c| self.area.contains(&c))
    }

    pub fn box_volume(&self) -> f64 {
        (self.elevation.1 - self.elevation.0) * (self.azimuth.1 - self.azimuth.0)
    }

    /// Uniform density `U(z)` over the region.
    pub fn density(&self, z: &AnglePair) -> f64 {
        if self.contains(z) {
            1.0 / self.volume
        } else {
            0.0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AnglePair {
        loop {
            let z = AnglePair::new(
                self.elevation.0 + rng.random::<f64>() * (self.elevation.1 - self.elevation.0),
                self.azimuth.0 + rng.random::<f64>() * (self.azimuth.1 - self.azimuth.0),
            );
            if self.contains(&z) {
                return z;
            }
        }
    }
}

/// Poisson clutter, uniform over a [`ClutterRegion`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterModel {
    /// Expected clutter points per period, `λ_clutter·V_s`.
    pub mean_count: f64,
    pub region: ClutterRegion,
}

impl ClutterModel {
    /// Clutter intensity `C(z) = λ_clutter·V_s·U(z)`.
    pub fn intensity(&self, z: &AnglePair) -> f64 {
        self.mean_count * self.region.density(z)
    }

    /// Clutter rate per rad², `λ_clutter`.
    pub fn rate(&self) -> f64 {
        self.mean_count / self.region.volume
    }
}

/// Draw the measurement set of one period.
///
/// Each source is detected with probability `p_detect` and reported at its
/// true AoD plus `N(0, R)` noise; a Poisson number of clutter points is
/// appended. The noise draws for a source happen whether or not it is
/// detected, so runs that differ only in `R` share their random numbers.
pub fn gen_measurements<R: Rng + ?Sized>(
    sources: &[MeasurementSource],
    p_b: &Vec3,
    sensor: &SensorModel,
    clutter: Option<&ClutterModel>,
    rng: &mut R,
) -> Result<Vec<Measurement>> {
    if !(0.0..=1.0).contains(&sensor.p_detect) {
        return Err(Error::Contract(format!("p_detect {} outside [0, 1]", sensor.p_detect)));
    }
    let l = sensor.angle_noise_factor()?;
    let mut out = Vec::with_capacity(sources.len() + 2);
    for s in sources {
        let detected = rng.random::<f64>() < sensor.p_detect;
        let noise = l * standard_normal2(rng);
        let rcs_noise: f64 = rng.sample(StandardNormal);
        if !detected {
            continue;
        }
        let truth = measure_angles(&s.position, p_b)?;
        out.push(Measurement {
            z: AnglePair::from_vector(&(truth.to_vector() + noise)),
            doppler: s.doppler,
            rcs_hat: s.rcs * (sensor.rcs_log_std * rcs_noise).exp(),
            gain: s.gain,
            origin: s.origin,
        });
    }

    if let Some(model) = clutter {
        let count = if model.mean_count > 0.0 {
            let poisson = Poisson::new(model.mean_count)
                .map_err(|e| Error::Contract(format!("clutter rate: {e}")))?;
            poisson.sample(rng) as usize
        } else {
            0
        };
        let gain_scale = if sources.is_empty() {
            0.0
        } else {
            (sources.iter().map(|s| s.gain.norm_sqr()).sum::<f64>() / sources.len() as f64).sqrt()
        };
        for _ in 0..count {
            let z = model.region.sample(rng);
            let phase = rng.random::<f64>() * 2.0 * PI;
            let mag = gain_scale * rng.random::<f64>();
            out.push(Measurement {
                z,
                doppler: (rng.random::<f64>() - 0.5) * 1000.0,
                rcs_hat: 10f64.powf(-1.0 + 3.0 * rng.random::<f64>()),
                gain: Complex64::from_polar(mag, phase),
                origin: MeasurementOrigin::Clutter,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn area() -> Area {
        Area { x_min: 5.0, x_max: 55.0, y_min: -25.0, y_max: 25.0 }
    }

    #[test]
    fn zero_noise_step_is_identity() {
        let mp = MotionParams::new(0.5, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(step_state(&Vec2::zeros(), &mp, &mut rng), Vec2::zeros());
        let c = Vec2::new(3.0, -4.0);
        assert_eq!(step_state(&c, &mp, &mut rng), c);
    }

    #[test]
    fn linear_motion_deviation() {
        let (exact, linear, dev) = constant_velocity_deviation(10.0, 0.5, 0.5);
        assert_eq!(linear, 5.0);
        assert_eq!(exact, 5.0625);
        assert_eq!(dev, 0.0625);
    }

    #[test]
    fn classify_separated_values() {
        use TargetClass::*;
        assert_eq!(classify_by_rcs(&[0.5, 5.0, 50.0]), vec![Tiny, Middle, Big]);
        assert_eq!(classify_by_rcs(&[50.0, 0.5, 5.0]), vec![Big, Tiny, Middle]);
        assert_eq!(classify_by_rcs(&[0.4, 0.6]), vec![Tiny, Tiny]);
        assert_eq!(classify_by_rcs(&[7.0; 4]), vec![Middle; 4]);
        assert_eq!(classify_by_rcs(&[0.5, 0.6, 40.0]), vec![Tiny, Tiny, Big]);
    }

    #[test]
    fn identify_partition() {
        use crate::channel::PathParams;
        let mk = |nu: f64| PathParams { doppler: nu, ..PathParams::placeholder() };
        let paths = vec![mk(0.0), mk(200.0), mk(-3.0), mk(11.0)];
        let (dy, st) = identify_dynamic(&paths, 10.0);
        assert_eq!(dy.len(), 2);
        assert_eq!(st.len(), 2);
        assert_eq!(st[0].doppler, 0.0);
        assert_eq!(dy[0].doppler, 200.0);
    }

    #[test]
    fn outward_target_removed_at_boundary() {
        let mp = MotionParams::new(0.5, 0.0).unwrap();
        let t = TargetTruth {
            id: 0,
            state: Vec2::new(54.9, 0.0),
            velocity: Vec2::new(2.0, 0.0),
            rcs: 1.0,
            class: TargetClass::Middle,
        };
        let mut next = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, stats) = evolve_scene(&[t], 1, &[], &area(), &mp, &mut next, &mut rng).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.boundary_removals, 1);
    }

    #[test]
    fn spawn_from_dead_parent_is_rejected() {
        let mp = MotionParams::new(0.5, 0.0).unwrap();
        let ev = SceneEvent {
            period: 2,
            kind: EventKind::Spawn {
                parent: 9,
                offset: Vec2::zeros(),
                velocity: Vec2::zeros(),
                class: TargetClass::Tiny,
                rcs: 0.5,
            },
        };
        let mut next = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let err = evolve_scene(&[], 2, &[ev], &area(), &mp, &mut next, &mut rng);
        assert!(matches!(err, Err(Error::SceneEvent { period: 2, .. })));
    }

    #[test]
    fn noiseless_measurements_equal_truth() {
        let p_b = Vec3::new(0.0, 0.0, 12.0);
        let sources: Vec<MeasurementSource> = [(10.0, 3.0), (30.0, -12.0), (48.0, 20.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| MeasurementSource {
                origin: MeasurementOrigin::Target(i as u32),
                position: Vec3::new(x, y, 0.0),
                doppler: 50.0,
                rcs: 1.0,
                gain: Complex64::new(1.0, 0.0),
            })
            .collect();
        let sensor = SensorModel { p_detect: 1.0, angle_cov: Matrix2::identity() * 1e-300, rcs_log_std: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = gen_measurements(&sources, &p_b, &sensor, None, &mut rng).unwrap();
        assert_eq!(z.len(), 3);
        for (m, s) in z.iter().zip(&sources) {
            let g = measure_angles(&s.position, &p_b).unwrap();
            assert!((m.z.elevation - g.elevation).abs() < 1e-12);
            assert!((m.z.azimuth - g.azimuth).abs() < 1e-12);
        }

        let silent = SensorModel { p_detect: 0.0, ..sensor };
        let region = ClutterRegion::new(area(), p_b).unwrap();
        let clutter = ClutterModel { mean_count: 0.0, region };
        assert!(gen_measurements(&sources, &p_b, &silent, Some(&clutter), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn clutter_points_fall_in_region() {
        let p_b = Vec3::new(0.0, 0.0, 12.0);
        let region = ClutterRegion::new(area(), p_b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let z = region.sample(&mut rng);
            let c = ground_point(z, &p_b).unwrap();
            assert!(area().contains(&c));
        }
        assert!(region.volume > 0.0 && region.volume < region.box_volume());
    }
}
