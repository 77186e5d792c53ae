use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::config::{ReinitPrior, ScenarioConfig, ScenarioKind};
use super::metrics::{assign, rmse_over, PeriodMetrics, DEFAULT_GATE};
use crate::beam::{
    collision_predict, combine_or_strongest, predict_path_angles, unblocked_masks, BeamDesign,
    MismatchMonitor, PathPrediction, SubBeam,
};
use crate::channel::{
    bs_sequence_count, build_outdoor_paths, codebook_beam_frequencies, received_snr_ut,
    received_ut_data, ut_sequence_count, wrap_frequency, GainProfile, IndoorChannel, Link, PathParams,
    PhaseBook, ScattererId,
};
use crate::geometry::{ground_point, measure_angles, AnglePair, UpaGeometry, Vec2, Vec3};
use crate::gmphd::{filter_step, Detection, GaussianComponent, GmIntensity, PhdParams};
use crate::scene::{
    classify_by_rcs, random_target, ClutterModel, ClutterRegion, EventKind, MeasurementOrigin,
    MeasurementSource, MotionParams, Scene, SceneEvent, SensorModel, StaticScatterer, TargetClass,
    TargetTruth,
};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Angular gate (rad) for carrying a measurement's gain over to a track.
const GAIN_GATE: f64 = 0.05;

/// Independent random streams of one trial.
const STREAM_TRUTH: u64 = 0;
const STREAM_SENSE: u64 = 1;
const STREAM_MISC: u64 = 2;

/// Seed of trial `i` under base seed `base`.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-configuration state shared by all trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub link: Link,
    pub params: PhdParams,
    pub sensor: SensorModel,
    pub clutter: Option<ClutterModel>,
    /// Angles whose ground point lies in the area; detections outside are dropped.
    pub surveillance: ClutterRegion,
    pub statics: Vec<StaticScatterer>,
    pub truth_motion: MotionParams,
    pub collision_eps: f64,
}

impl Prepared {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let link = Link {
            p_b: config.p_b(),
            p_s: config.p_s(),
            wavelength: config.wavelength(),
            bs: config.bs_geometry()?,
            ris: config.ris_geometry()?,
            sample_period: config.geometry.sample_period_s,
        };
        let region = ClutterRegion::new(config.geometry.area, config.p_b())?;
        let clutter = (config.sensing.clutter_mean > 0.0)
            .then(|| ClutterModel { mean_count: config.sensing.clutter_mean, region: region.clone() });
        let mut params = config.phd_params();
        params.clutter = clutter.clone();
        params.validate()?;
        let sensor = SensorModel {
            p_detect: config.sensing.p_detect,
            angle_cov: nalgebra::Matrix2::identity() * config.angle_std_rad().powi(2),
            rcs_log_std: config.sensing.rcs_log_std,
        };
        Ok(Self {
            config: config.clone(),
            link,
            params,
            sensor,
            clutter,
            surveillance: region,
            statics: config.statics(),
            truth_motion: MotionParams::new(config.scenario.period_s, config.scenario.truth_sigma_v)?,
            collision_eps: config.beam.collision_eps_deg.to_radians(),
        })
    }
}

/// Output of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub trial: usize,
    pub seed: u64,
    pub periods: Vec<PeriodMetrics>,
    /// Posterior intensity per period, when requested.
    pub intensities: Vec<GmIntensity>,
    /// Tracked beam design per period, when requested.
    pub designs: Vec<BeamDesign>,
    /// Per period, the true targets and the extracted states, when requested.
    pub tracks: Vec<TrackSnapshot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSnapshot {
    pub truth: Vec<(u32, Vec2)>,
    pub estimates: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub keep_intensities: bool,
    pub keep_designs: bool,
    pub keep_tracks: bool,
    /// Skip filter updates after this period (forced divergence).
    pub freeze_filter_after: Option<usize>,
}

/// Training sequences of one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overhead {
    pub l_b: usize,
    pub l_u: usize,
    /// Codebook groups scanned.
    pub groups: Vec<usize>,
}

impl Overhead {
    pub fn total(&self) -> usize {
        self.l_b + self.l_u
    }
}

/// Training sequences needed to scan the whole space, or, given predicted
/// directions, only the codebook groups holding a beam within
/// `beam.scan_window` of one of them on both frequency axes.
pub fn overhead_account(config: &ScenarioConfig, predicted: Option<&[AnglePair]>) -> Result<Overhead> {
    let bs = config.bs_geometry()?;
    let ris = config.ris_geometry()?;
    let l_b_full = bs_sequence_count(&bs, config.geometry.bs_rf)?;
    let l_u = ut_sequence_count(&ris, config.geometry.ris_rf)?;
    let groups = match predicted {
        None => (0..l_b_full).collect(),
        Some(angles) => scanned_groups(&bs, config.geometry.bs_rf, angles, config.beam.scan_window),
    };
    Ok(Overhead { l_b: groups.len(), l_u, groups })
}

fn scanned_groups(bs: &UpaGeometry, bs_rf: usize, angles: &[AnglePair], window: f64) -> Vec<usize> {
    let near = |a: f64, b: f64| wrap_frequency(a - b).abs() <= window + 1e-12;
    let targets: Vec<(f64, f64)> = angles.iter().map(|a| UpaGeometry::spatial_frequencies(*a)).collect();
    let mut groups: Vec<usize> = (0..bs.len())
        .filter(|&b| {
            let (bx, by) = codebook_beam_frequencies(bs, b);
            targets.iter().any(|&(ux, uy)| near(bx, ux) && near(by, uy))
        })
        .map(|b| b / bs_rf)
        .collect();
    groups.dedup();
    groups
}

/// Ground truth at k = 0 and the event script of the configured scenario.
fn initial_truth<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> (Vec<TargetTruth>, Vec<SceneEvent>) {
    let sc = &cfg.scenario;
    let area = &cfg.geometry.area;
    let speeds = (sc.min_speed_fraction * sc.v_max, sc.v_max);
    let horizon = Some((sc.periods as f64 * sc.period_s, sc.track_margin));
    let mut events = sc.events.clone();
    let targets = match sc.kind {
        ScenarioKind::Steady => (0..sc.initial_targets)
            .map(|i| {
                let class = TargetClass::ALL[rng.random_range(0..3)];
                random_target(i as u32, class, area, speeds, horizon, rng)
            })
            .collect(),
        ScenarioKind::VariableCardinality => {
            let parent = random_target(0, TargetClass::Big, area, speeds, horizon, rng);
            let other_class = TargetClass::ALL[rng.random_range(1..3)];
            let other = random_target(1, other_class, area, speeds, horizon, rng);
            let c = area.center();
            events.push(SceneEvent {
                period: 5,
                kind: EventKind::Spawn {
                    parent: 0,
                    offset: Vec2::new(1.0, 1.0),
                    velocity: parent.velocity * 0.5,
                    class: TargetClass::Tiny,
                    rcs: 0.6,
                },
            });
            events.push(SceneEvent { period: 12, kind: EventKind::Exit { id: 1 } });
            events.push(SceneEvent {
                period: 17,
                kind: EventKind::Birth {
                    position: Vec2::new(area.x_min + cfg.filter.birth_inset + 0.5, c[1] + 1.0),
                    velocity: Vec2::new(0.5 * (speeds.0 + speeds.1), 0.2),
                    class: TargetClass::Middle,
                    rcs: 5.0,
                },
            });
            vec![parent, other]
        }
    };
    (targets, events)
}

/// `σ_c` making the k = 1 path powers sum to one.
fn normalizing_scale(targets: &[TargetTruth], statics: &[StaticScatterer], link: &Link, pdp: Option<f64>) -> f64 {
    let unit = GainProfile { pdp_max_delay: pdp, scale: 1.0 };
    let power: f64 = targets
        .iter()
        .map(|t| (Vec3::new(t.state[0], t.state[1], 0.0), t.rcs))
        .chain(statics.iter().map(|s| (s.position, s.rcs)))
        .map(|(p, rcs)| {
            let delay = ((p - link.p_b).norm() + (link.p_s - p).norm()) / SPEED_OF_LIGHT;
            unit.amplitude(rcs, link.wavelength, delay).powi(2)
        })
        .sum();
    if power > 0.0 { power.sqrt().recip() } else { 1.0 }
}

fn prediction_of(p: &PathParams) -> PathPrediction {
    PathPrediction { position: p.position, aod_bs: p.aod_bs, aoa_ris: p.aoa_ris, gain: p.equivalent_gain() }
}

fn design(
    dynamic: &[PathPrediction],
    statics: &[PathPrediction],
    indoor: &IndoorChannel,
    prep: &Prepared,
) -> Result<BeamDesign> {
    let l = &prep.link;
    let beams = |ps: &[PathPrediction]| -> Vec<SubBeam> {
        ps.iter().map(|p| SubBeam::for_path(p, indoor.aod_ris, &l.bs, &l.ris)).collect()
    };
    match combine_or_strongest(&beams(dynamic), &beams(statics), prep.config.geometry.bs_rf, prep.config.beam.ris_weighting)
    {
        Err(Error::NoSubBeams) => {
            // nothing to point at: broadside beam, transparent surface
            let n = l.bs.len() as f64;
            let f = DVector::from_element(l.bs.len(), Complex64::new(n.sqrt().recip(), 0.0));
            let w = DVector::from_element(l.ris.len(), Complex64::new(1.0, 0.0));
            Ok(BeamDesign::new(f, w, prep.config.geometry.bs_rf))
        }
        other => other,
    }
}

fn keep<T: Clone>(items: &[T], mask: &[bool]) -> Vec<T> {
    items.iter().zip(mask).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// One trial of the closed sensing/communication loop.
pub fn run_trial(prep: &Prepared, trial: usize, seed: u64, opts: RunOptions) -> Result<RunReport> {
    let cfg = &prep.config;
    let link = &prep.link;
    let mut truth_rng = stream(seed, STREAM_TRUTH);
    let mut sense_rng = stream(seed, STREAM_SENSE);
    let mut misc_rng = stream(seed, STREAM_MISC);

    let (targets, events) = initial_truth(cfg, &mut truth_rng);
    let mut scene = Scene::new(cfg.geometry.area, prep.truth_motion, targets);
    let indoor = IndoorChannel::draw(link, &cfg.p_u(), 1.0, &mut misc_rng)?;
    let mut phases = PhaseBook::default();
    let pdp = cfg.geometry.pdp.then_some(cfg.beam.training_len as f64 * link.sample_period);
    let mut profile = GainProfile { pdp_max_delay: pdp, scale: 1.0 };

    let nu_thresh = cfg.sensing.doppler_sigmas * cfg.sensing.doppler_std_hz;
    let pilots = vec![Complex64::new(1.0, 0.0); cfg.beam.data_len];
    let noise_var = cfg.beam.noise_var;
    let full = overhead_account(cfg, None)?;

    let mut monitor = MismatchMonitor::new(cfg.beam.mismatch_factor, cfg.beam.mismatch_warmup);
    let mut posterior = GmIntensity::default();
    let mut reinit = true;
    let mut fixed: Option<BeamDesign> = None;
    let mut report = RunReport { trial, seed, periods: Vec::new(), intensities: Vec::new(), designs: Vec::new(), tracks: Vec::new() };

    for k in 1..=cfg.scenario.periods {
        scene.advance(k, &events, &mut truth_rng)?;
        if k == 1 {
            profile.scale = normalizing_scale(&scene.targets, &prep.statics, link, pdp);
        }
        let paths = build_outdoor_paths(&scene.targets, &prep.statics, link, &profile, &mut phases, &mut misc_rng)?;
        let (dyn_paths, static_paths): (Vec<PathParams>, Vec<PathParams>) =
            paths.iter().cloned().partition(|p| matches!(p.scatterer, ScattererId::Target(_)));

        // physical blocking between moving and static scatterers
        let truth_dyn: Vec<PathPrediction> = dyn_paths.iter().map(prediction_of).collect();
        let truth_static: Vec<PathPrediction> = static_paths.iter().map(prediction_of).collect();
        let hits = collision_predict(&truth_dyn, &truth_static, &link.p_b, &link.p_s, prep.collision_eps);
        let (dyn_mask, st_mask) = unblocked_masks(&hits, truth_dyn.len(), truth_static.len());
        let live_dyn = keep(&dyn_paths, &dyn_mask);
        let live_static = keep(&static_paths, &st_mask);
        let channel: Vec<PathParams> = live_dyn.iter().chain(&live_static).cloned().collect();

        // sensing
        let mut sources = Vec::new();
        for p in &channel {
            let nu_hat = p.doppler + cfg.sensing.doppler_std_hz * sense_rng.sample::<f64, _>(StandardNormal);
            if nu_hat.abs() <= nu_thresh {
                continue;
            }
            let (origin, rcs) = match p.scatterer {
                ScattererId::Target(id) => {
                    (MeasurementOrigin::Target(id), scene.targets.iter().find(|t| t.id == id).map_or(1.0, |t| t.rcs))
                }
                ScattererId::Static(id) => (MeasurementOrigin::Static(id), prep.statics[id as usize].rcs),
            };
            sources.push(MeasurementSource { origin, position: p.position, doppler: nu_hat, rcs, gain: p.equivalent_gain() });
        }
        let measurements =
            crate::scene::gen_measurements(&sources, &link.p_b, &prep.sensor, prep.clutter.as_ref(), &mut sense_rng)?;
        let classes = classify_by_rcs(&measurements.iter().map(|m| m.rcs_hat).collect::<Vec<_>>());
        // returns whose ground point falls outside the surveillance area are gated out
        let detections: Vec<Detection> = measurements
            .iter()
            .zip(&classes)
            .filter(|(m, _)| prep.surveillance.contains(&m.z))
            .map(|(m, c)| Detection { z: m.z.to_vector(), class: Some(*c) })
            .collect();

        // tracking
        let reinit_now = reinit;
        if reinit {
            posterior = reinit_prior(cfg, &detections, &link.p_b);
            monitor.reset();
            reinit = false;
        }
        let frozen = opts.freeze_filter_after.is_some_and(|f| k > f);
        let states = if frozen {
            crate::gmphd::extract(&posterior, prep.params.extract_threshold).states
        } else {
            let step = filter_step(&posterior, &detections, &prep.params);
            posterior = step.posterior;
            step.extraction.states
        };

        // localisation metrics
        let truth_xy: Vec<Vec2> = scene.targets.iter().map(|t| t.state).collect();
        let pairs = assign(&states, &truth_xy, DEFAULT_GATE);
        let angle_err: Vec<(usize, usize, f64)> = pairs
            .iter()
            .map(|&(e, t, _)| {
                let za = measure_angles(&Vec3::new(states[e][0], states[e][1], 0.0), &link.p_b)?;
                let zt = measure_angles(&Vec3::new(truth_xy[t][0], truth_xy[t][1], 0.0), &link.p_b)?;
                Ok((e, t, (za.to_vector() - zt.to_vector()).norm()))
            })
            .collect::<Result<_>>()?;

        // beams
        let mut tracked = predict_path_angles(&states, &link.p_b, &link.p_s)?;
        let gains: Vec<f64> = measurements.iter().map(|m| m.gain.norm()).collect();
        let fallback = median(gains).or_else(|| median(truth_static.iter().map(|p| p.gain.norm()).collect())).unwrap_or(1.0);
        for p in tracked.iter_mut() {
            let nearest = measurements
                .iter()
                .map(|m| (m, m.z.separation(p.aod_bs)))
                .filter(|(_, d)| *d < GAIN_GATE)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            p.gain = match nearest {
                Some((m, _)) => m.gain,
                None => Complex64::from_polar(fallback, misc_rng.random::<f64>() * 2.0 * PI),
            };
        }
        let hits = collision_predict(&tracked, &truth_static, &link.p_b, &link.p_s, prep.collision_eps);
        let (tm, sm) = unblocked_masks(&hits, tracked.len(), truth_static.len());
        let tracked_design = design(&keep(&tracked, &tm), &keep(&truth_static, &sm), &indoor, prep)?;
        let oracle_design = design(&keep(&truth_dyn, &dyn_mask), &keep(&truth_static, &st_mask), &indoor, prep)?;
        let fixed_design = fixed.get_or_insert_with(|| oracle_design.clone()).clone();

        let snr = |d: &BeamDesign| {
            received_snr_ut(&channel, &indoor, &d.omega, &d.precoder, noise_var, cfg.beam.data_len, link)
        };
        let (snr_fixed, snr_tracked, snr_oracle) = (snr(&fixed_design)?, snr(&tracked_design)?, snr(&oracle_design)?);

        // mismatch check on the tracked data block
        let y = received_ut_data(
            &channel,
            &indoor,
            &tracked_design.omega,
            &tracked_design.precoder,
            &pilots,
            noise_var,
            link,
            &mut misc_rng,
        )?;
        let eta = y.norm_squared() / cfg.beam.data_len as f64;
        if monitor.observe(eta) && cfg.beam.mismatch_enabled {
            reinit = true;
        }

        let overhead = if reinit_now {
            full.total()
        } else {
            let angles: Vec<AnglePair> = tracked.iter().chain(&truth_static).map(|p| p.aod_bs).collect();
            overhead_account(cfg, Some(&angles))?.total()
        };

        report.periods.push(PeriodMetrics {
            trial,
            k,
            true_count: scene.targets.len(),
            est_count: states.len(),
            rmse_m: rmse_over(&pairs),
            angle_rmse_rad: rmse_over(&angle_err),
            snr_fixed_db: snr_fixed,
            snr_tracked_db: snr_tracked,
            snr_oracle_db: snr_oracle,
            overhead,
            reinit: reinit_now,
            measurements: measurements.len(),
        });
        if opts.keep_intensities {
            report.intensities.push(posterior.clone());
        }
        if opts.keep_designs {
            report.designs.push(tracked_design);
        }
        if opts.keep_tracks {
            let truth = scene.targets.iter().map(|t| (t.id, t.state)).collect();
            report.tracks.push(TrackSnapshot { truth, estimates: states });
        }
    }
    Ok(report)
}

fn reinit_prior(cfg: &ScenarioConfig, detections: &[Detection], p_b: &Vec3) -> GmIntensity {
    let a = &cfg.geometry.area;
    match cfg.filter.reinit_prior {
        ReinitPrior::Measurements => {
            let cov = nalgebra::Matrix2::identity() * cfg.filter.birth_var;
            let components = detections
                .iter()
                .filter_map(|d| ground_point(AnglePair::from_vector(&d.z), p_b))
                .map(|c| GaussianComponent::new(1.0, c, cov))
                .collect();
            GmIntensity { components }
        }
        ReinitPrior::Grid => {
            let g = cfg.filter.init_grid;
            GmIntensity::uniform_grid((a.x_min, a.x_max), (a.y_min, a.y_max), g[0], g[1], detections.len().max(1) as f64)
        }
    }
}

/// Single trial with the configured seed.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let prep = Prepared::new(config)?;
    run_trial(&prep, 0, config.scenario.seed, RunOptions::default())
}
