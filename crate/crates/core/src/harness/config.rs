use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::beam::RisWeighting;
use crate::geometry::{UpaGeometry, Vec2, Vec3};
use crate::gmphd::{GaussianComponent, PhdParams, SpawnTable, SpawnTerm};
use crate::scene::{Area, SceneEvent, StaticScatterer, TargetClass};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Which truth timeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `initial_targets` random targets plus any configured events.
    Steady,
    /// Two targets; a tiny one spawns at k = 5, one leaves at k = 12 and a
    /// new one enters from the near edge at k = 17.
    VariableCardinality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    pub periods: usize,
    /// ISAC period Δ, seconds.
    pub period_s: f64,
    pub seed: u64,
    pub initial_targets: usize,
    /// Top truth speed, m/s. Speeds are uniform in `[min_speed_fraction·v_max, v_max]`.
    pub v_max: f64,
    pub min_speed_fraction: f64,
    /// Random-walk jitter of the truth on top of its constant velocity.
    pub truth_sigma_v: f64,
    /// Keep initial tracks this far inside the area for the whole run.
    pub track_margin: f64,
    pub events: Vec<SceneEvent>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Steady,
            periods: 25,
            period_s: 0.5,
            seed: 1,
            initial_targets: 3,
            v_max: 3.0,
            min_speed_fraction: 0.5,
            truth_sigma_v: 0.01,
            track_margin: 3.0,
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticSpec {
    pub position: [f64; 3],
    pub rcs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub area: Area,
    pub bs: [f64; 3],
    pub ris: [f64; 3],
    pub ut: [f64; 3],
    pub carrier_hz: f64,
    pub sample_period_s: f64,
    pub bs_array: [usize; 2],
    pub ris_array: [usize; 2],
    pub bs_rf: usize,
    pub ris_rf: usize,
    /// Exponential power-delay profile on top of the radar equation.
    pub pdp: bool,
    pub statics: Vec<StaticSpec>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            area: Area { x_min: 5.0, x_max: 55.0, y_min: -25.0, y_max: 25.0 },
            bs: [0.0, 0.0, 12.0],
            ris: [60.0, 0.0, 6.0],
            ut: [68.0, 4.0, 1.5],
            carrier_hz: 30e9,
            sample_period_s: 1e-8,
            bs_array: [16, 16],
            ris_array: [16, 16],
            bs_rf: 32,
            ris_rf: 5,
            pdp: true,
            statics: vec![
                StaticSpec { position: [25.0, 30.0, 6.0], rcs: 15.0 },
                StaticSpec { position: [45.0, -30.0, 8.0], rcs: 25.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    /// Angle-noise standard deviation per axis, degrees.
    pub angle_std_deg: f64,
    pub p_detect: f64,
    /// Expected clutter points per period.
    pub clutter_mean: f64,
    pub doppler_std_hz: f64,
    /// Dynamic-path threshold in units of `doppler_std_hz`.
    pub doppler_sigmas: f64,
    pub rcs_log_std: f64,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            angle_std_deg: 0.001,
            p_detect: 0.98,
            clutter_mean: 0.5,
            doppler_std_hz: 0.1,
            doppler_sigmas: 3.0,
            rcs_log_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub p_survival: f64,
    pub p_detect: f64,
    /// Random-walk intensity σ_v; `Q = σ_v·Δ·I`.
    pub sigma_v: f64,
    pub birth_weight: f64,
    pub birth_var: f64,
    /// Birth means sit this far inside each edge midpoint.
    pub birth_inset: f64,
    /// Weight of the tiny child spawned by big and middle tracks.
    pub spawn_weight: f64,
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub extract_threshold: f64,
    pub max_components: usize,
    pub reinit_prior: ReinitPrior,
    /// Grid of the [`ReinitPrior::Grid`] prior.
    pub init_grid: [usize; 2],
    /// Added in quadrature to the sensing angle noise in the filter's `R`,
    /// degrees. Covers the EKF linearisation error.
    pub angle_std_floor_deg: f64,
}

/// Prior used when the filter restarts after a full scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReinitPrior {
    /// One unit-weight component under the ground point of each detection,
    /// covariance `birth_var`.
    #[default]
    Measurements,
    /// `|Z|` total weight spread over `init_grid` cells of the area.
    Grid,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            p_survival: 0.99,
            p_detect: 0.98,
            sigma_v: 3.0,
            birth_weight: 0.03,
            birth_var: 25.0,
            birth_inset: 2.0,
            spawn_weight: 0.05,
            prune_threshold: 1e-5,
            merge_threshold: 4.0,
            extract_threshold: 0.5,
            max_components: 100,
            reinit_prior: ReinitPrior::Measurements,
            init_grid: [10, 10],
            angle_std_floor_deg: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    pub collision_eps_deg: f64,
    /// χ as a fraction of the running median of η.
    pub mismatch_factor: f64,
    pub mismatch_warmup: usize,
    /// Disable to never re-scan after k = 1.
    pub mismatch_enabled: bool,
    pub noise_var: f64,
    pub data_len: usize,
    pub training_len: usize,
    /// Half-width in spatial frequency of the reduced scan around each
    /// predicted direction.
    pub scan_window: f64,
    pub ris_weighting: RisWeighting,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            collision_eps_deg: 1.0,
            mismatch_factor: 0.5,
            mismatch_warmup: 3,
            mismatch_enabled: true,
            noise_var: 1e6,
            data_len: 64,
            training_len: 64,
            scan_window: 0.125,
            ris_weighting: RisWeighting::Magnitude,
        }
    }
}

/// Everything one run needs. Serialised as TOML with one table per section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub geometry: GeometrySection,
    pub sensing: SensingSection,
    pub filter: FilterSection,
    pub beam: BeamSection,
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Collects every violation, each prefixed by its field path.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut positive = |path: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{path}: must be positive, got {v}"));
            }
        };
        let (sc, g, se, f, b) = (&self.scenario, &self.geometry, &self.sensing, &self.filter, &self.beam);
        positive("scenario.period_s", sc.period_s);
        positive("geometry.carrier_hz", g.carrier_hz);
        positive("geometry.sample_period_s", g.sample_period_s);
        positive("geometry.bs[2]", g.bs[2]);
        positive("geometry.ris[2]", g.ris[2]);
        positive("sensing.angle_std_deg", se.angle_std_deg);
        positive("filter.sigma_v", f.sigma_v);
        positive("filter.birth_var", f.birth_var);
        positive("filter.prune_threshold", f.prune_threshold);
        positive("filter.merge_threshold", f.merge_threshold);
        positive("filter.extract_threshold", f.extract_threshold);
        positive("beam.collision_eps_deg", b.collision_eps_deg);
        positive("beam.noise_var", b.noise_var);
        positive("beam.scan_window", b.scan_window);

        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        check(sc.periods >= 1, "scenario.periods: must be at least 1".into());
        check(sc.v_max >= 0.0, format!("scenario.v_max: must be non-negative, got {}", sc.v_max));
        check(
            (0.0..=1.0).contains(&sc.min_speed_fraction),
            format!("scenario.min_speed_fraction: {} outside [0, 1]", sc.min_speed_fraction),
        );
        check(sc.truth_sigma_v >= 0.0, format!("scenario.truth_sigma_v: must be non-negative, got {}", sc.truth_sigma_v));
        check(g.area.x_min < g.area.x_max, "geometry.area: x_min must be below x_max".into());
        check(g.area.y_min < g.area.y_max, "geometry.area: y_min must be below y_max".into());
        check(g.bs_array.iter().all(|&n| n > 0), "geometry.bs_array: sizes must be positive".into());
        check(g.ris_array.iter().all(|&n| n > 0), "geometry.ris_array: sizes must be positive".into());
        check(
            g.bs_rf > 0 && (g.bs_array[0] * g.bs_array[1]) % g.bs_rf == 0,
            format!("geometry.bs_rf: {} does not divide the BS element count", g.bs_rf),
        );
        check(g.ris_rf >= 2, "geometry.ris_rf: must be at least 2".into());
        for (i, s) in g.statics.iter().enumerate() {
            check(s.rcs > 0.0, format!("geometry.statics[{i}].rcs: must be positive"));
        }
        for (name, p) in [("sensing.p_detect", se.p_detect), ("filter.p_survival", f.p_survival), ("filter.p_detect", f.p_detect)] {
            check((0.0..=1.0).contains(&p), format!("{name}: {p} outside [0, 1]"));
        }
        check(se.clutter_mean >= 0.0, format!("sensing.clutter_mean: must be non-negative, got {}", se.clutter_mean));
        check(se.doppler_std_hz >= 0.0, "sensing.doppler_std_hz: must be non-negative".into());
        check(f.birth_weight >= 0.0, "filter.birth_weight: must be non-negative".into());
        check(f.spawn_weight >= 0.0, "filter.spawn_weight: must be non-negative".into());
        check(f.max_components >= 1, "filter.max_components: must be at least 1".into());
        check(f.init_grid.iter().all(|&n| n > 0), "filter.init_grid: sizes must be positive".into());
        check(f.angle_std_floor_deg >= 0.0, "filter.angle_std_floor_deg: must be non-negative".into());
        check(b.data_len >= 1, "beam.data_len: must be at least 1".into());
        check(b.mismatch_factor >= 0.0, "beam.mismatch_factor: must be non-negative".into());
        for (i, ev) in sc.events.iter().enumerate() {
            check(ev.period >= 1, format!("scenario.events[{i}].period: must be at least 1"));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn p_b(&self) -> Vec3 {
        vec3(self.geometry.bs)
    }

    pub fn p_s(&self) -> Vec3 {
        vec3(self.geometry.ris)
    }

    pub fn p_u(&self) -> Vec3 {
        vec3(self.geometry.ut)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.geometry.carrier_hz
    }

    pub fn bs_geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::new(self.geometry.bs_array[0], self.geometry.bs_array[1], self.wavelength())
    }

    pub fn ris_geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::new(self.geometry.ris_array[0], self.geometry.ris_array[1], self.wavelength())
    }

    pub fn angle_std_rad(&self) -> f64 {
        self.sensing.angle_std_deg.to_radians()
    }

    /// Per-axis angle standard deviation assumed by the filter, radians.
    pub fn filter_angle_std_rad(&self) -> f64 {
        self.sensing.angle_std_deg.hypot(self.filter.angle_std_floor_deg).to_radians()
    }

    pub fn statics(&self) -> Vec<StaticScatterer> {
        self.geometry
            .statics
            .iter()
            .enumerate()
            .map(|(i, s)| StaticScatterer { id: i as u32, position: vec3(s.position), rcs: s.rcs })
            .collect()
    }

    /// Four birth terms just inside the edge midpoints.
    pub fn birth_components(&self) -> Vec<GaussianComponent> {
        let a = &self.geometry.area;
        let f = &self.filter;
        let c = a.center();
        let cov = Matrix2::identity() * f.birth_var;
        [
            Vec2::new(a.x_min + f.birth_inset, c[1]),
            Vec2::new(a.x_max - f.birth_inset, c[1]),
            Vec2::new(c[0], a.y_min + f.birth_inset),
            Vec2::new(c[0], a.y_max - f.birth_inset),
        ]
        .into_iter()
        .map(|m| GaussianComponent::new(f.birth_weight, m, cov))
        .collect()
    }

    /// Big and middle tracks may shed a tiny child at their own position.
    pub fn spawn_table(&self) -> SpawnTable {
        let child = SpawnTerm { weight: self.filter.spawn_weight, offset: Vec2::zeros(), class: Some(TargetClass::Tiny) };
        let terms = if self.filter.spawn_weight > 0.0 { vec![child] } else { Vec::new() };
        SpawnTable { tiny: Vec::new(), middle: terms.clone(), big: terms, unknown: Vec::new() }
    }

    /// Filter parameters without the clutter model (attached by the runner).
    pub fn phd_params(&self) -> PhdParams {
        let f = &self.filter;
        let s = self.filter_angle_std_rad();
        PhdParams {
            p_survival: f.p_survival,
            p_detect: f.p_detect,
            birth: self.birth_components(),
            spawn: self.spawn_table(),
            transition: Matrix2::identity(),
            process_cov: Matrix2::identity() * (f.sigma_v * self.scenario.period_s),
            measurement_cov: Matrix2::identity() * (s * s),
            clutter: None,
            p_b: self.p_b(),
            prune_threshold: f.prune_threshold,
            merge_threshold: f.merge_threshold,
            extract_threshold: f.extract_threshold,
            max_components: f.max_components,
        }
    }
}
