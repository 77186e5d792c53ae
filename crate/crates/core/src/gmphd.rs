//! Gaussian-mixture PHD filter over ground positions with angle-only
//! measurements, linearised per component (EKF style).
//!
//! One period runs [`predict`] → [`update`] → [`prune_merge`] → [`extract`];
//! [`filter_step`] chains them.

use nalgebra::{Cholesky, Matrix2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{jacobian_measure, measure_angles_from_bs, Vec2, Vec3};
use crate::scene::{ClutterModel, TargetClass};
use crate::{Error, Result};

/// One weighted Gaussian term of the intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec2,
    pub cov: Matrix2<f64>,
    /// Class of the measurement that last updated this term, if any.
    #[serde(default)]
    pub class: Option<TargetClass>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec2, cov: Matrix2<f64>) -> Self {
        Self { weight, mean, cov, class: None }
    }

    pub fn with_class(mut self, class: Option<TargetClass>) -> Self {
        self.class = class;
        self
    }

    /// Symmetric to 1e-12 with strictly positive eigenvalues.
    pub fn is_valid(&self) -> bool {
        let p = &self.cov;
        let asym = (p[(0, 1)] - p[(1, 0)]).abs();
        let scale = p.abs().max().max(1.0);
        self.weight >= 0.0
            && self.weight.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && asym <= 1e-12 * scale
            && min_eigenvalue(p) > 0.0
    }
}

pub(crate) fn min_eigenvalue(p: &Matrix2<f64>) -> f64 {
    let tr = p[(0, 0)] + p[(1, 1)];
    let det = p[(0, 0)] * p[(1, 1)] - 0.5 * (p[(0, 1)] + p[(1, 0)]) * 0.5 * (p[(0, 1)] + p[(1, 0)]);
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 - disc
}

fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    (p + p.transpose()) * 0.5
}

/// Gaussian-mixture PHD intensity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GmIntensity {
    pub components: Vec<GaussianComponent>,
}

impl GmIntensity {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Expected number of targets.
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GaussianComponent> {
        self.components.iter()
    }

    /// `total_weight` spread over an `nx × ny` grid of equal components
    /// covering a rectangle, each with an isotropic covariance matched to
    /// the grid pitch.
    pub fn uniform_grid(
        x: (f64, f64),
        y: (f64, f64),
        nx: usize,
        ny: usize,
        total_weight: f64,
    ) -> Self {
        let (hx, hy) = ((x.1 - x.0) / nx as f64, (y.1 - y.0) / ny as f64);
        let cov = Matrix2::new(hx * hx, 0.0, 0.0, hy * hy);
        let w = total_weight / (nx * ny) as f64;
        let components = (0..nx)
            .flat_map(|i| {
                (0..ny).map(move |j| {
                    GaussianComponent::new(
                        w,
                        Vec2::new(x.0 + (i as f64 + 0.5) * hx, y.0 + (j as f64 + 0.5) * hy),
                        cov,
                    )
                })
            })
            .collect();
        Self { components }
    }

    /// Debug/golden snapshot as pretty JSON (weights, means, covariances).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One spawn hypothesis: a child at `A·m + offset` weighted by `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnTerm {
    pub weight: f64,
    pub offset: Vec2,
    /// Class assigned to the child term.
    #[serde(default)]
    pub class: Option<TargetClass>,
}

/// Spawn terms keyed by the parent component's class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpawnTable {
    #[serde(default)]
    pub tiny: Vec<SpawnTerm>,
    #[serde(default)]
    pub middle: Vec<SpawnTerm>,
    #[serde(default)]
    pub big: Vec<SpawnTerm>,
    /// Used for components without a class.
    #[serde(default)]
    pub unknown: Vec<SpawnTerm>,
}

impl SpawnTable {
    /// Same terms for every parent class.
    pub fn uniform(terms: Vec<SpawnTerm>) -> Self {
        Self { tiny: terms.clone(), middle: terms.clone(), big: terms.clone(), unknown: terms }
    }

    pub fn terms(&self, class: Option<TargetClass>) -> &[SpawnTerm] {
        match class {
            Some(TargetClass::Tiny) => &self.tiny,
            Some(TargetClass::Middle) => &self.middle,
            Some(TargetClass::Big) => &self.big,
            None => &self.unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhdParams {
    pub p_survival: f64,
    pub p_detect: f64,
    pub birth: Vec<GaussianComponent>,
    pub spawn: SpawnTable,
    /// Transition matrix `A`.
    pub transition: Matrix2<f64>,
    /// Process covariance `Q`.
    pub process_cov: Matrix2<f64>,
    /// Angle measurement covariance `R`.
    pub measurement_cov: Matrix2<f64>,
    pub clutter: Option<ClutterModel>,
    /// BS position, reference of the measurement map.
    pub p_b: Vec3,
    /// Truncation threshold ζ.
    pub prune_threshold: f64,
    /// Mahalanobis merge threshold ξ.
    pub merge_threshold: f64,
    /// Extraction threshold ρ.
    pub extract_threshold: f64,
    pub max_components: usize,
}

impl PhdParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.p_survival) {
            errs.push(format!("filter.p_survival: {} outside [0, 1]", self.p_survival));
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            errs.push(format!("filter.p_detect: {} outside [0, 1]", self.p_detect));
        }
        for (name, v) in [
            ("filter.prune_threshold", self.prune_threshold),
            ("filter.merge_threshold", self.merge_threshold),
            ("filter.extract_threshold", self.extract_threshold),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{name}: must be positive, got {v}"));
            }
        }
        if self.max_components < 1 {
            errs.push("filter.max_components: must be at least 1".into());
        }
        if Cholesky::new(self.measurement_cov).is_none() {
            errs.push("filter.measurement_cov: not positive definite".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Clutter intensity `C(z)`; zero without a clutter model.
    pub fn clutter_intensity(&self, z: &Vec2) -> f64 {
        self.clutter
            .as_ref()
            .map_or(0.0, |c| c.intensity(&crate::geometry::AnglePair::from_vector(z)))
    }
}

/// A measurement as the filter sees it: angles plus an optional RCS class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// (elevation, azimuth) AoD at the BS.
    pub z: Vec2,
    pub class: Option<TargetClass>,
}

impl Detection {
    pub fn new(z: Vec2) -> Self {
        Self { z, class: None }
    }
}

/// Numerical issues met during an update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateStats {
    /// Components whose innovation covariance was not positive definite, or
    /// whose mean sits on degenerate geometry; they get no detection terms.
    pub skipped_components: usize,
}

/// Predicted intensity: survivors, then spawns, then births.
pub fn predict(prev: &GmIntensity, params: &PhdParams) -> GmIntensity {
    let a = params.transition;
    let q = params.process_cov;
    let n_spawn: usize = prev.iter().map(|c| params.spawn.terms(c.class).len()).sum();
    let mut out = Vec::with_capacity(prev.len() + n_spawn + params.birth.len());

    let propagated: Vec<(Vec2, Matrix2<f64>)> =
        prev.iter().map(|c| (a * c.mean, symmetrize(q + a * c.cov * a.transpose()))).collect();

    for (c, (m, p)) in prev.iter().zip(&propagated) {
        out.push(GaussianComponent { weight: params.p_survival * c.weight, mean: *m, cov: *p, class: c.class });
    }
    for (c, (m, p)) in prev.iter().zip(&propagated) {
        for term in params.spawn.terms(c.class) {
            out.push(GaussianComponent {
                weight: c.weight * term.weight,
                mean: m + term.offset,
                cov: *p,
                class: term.class,
            });
        }
    }
    out.extend(params.birth.iter().cloned());
    GmIntensity::new(out)
}

/// Linearised measurement quantities of one predicted component.
struct Linearized {
    z_pred: Vec2,
    s_chol: Cholesky<f64, nalgebra::U2>,
    log_norm: f64,
    gain: nalgebra::Matrix2<f64>,
    cov_post: Matrix2<f64>,
}

fn linearize(c: &GaussianComponent, params: &PhdParams) -> Option<Linearized> {
    let z_pred = measure_angles_from_bs(&c.mean, &params.p_b).ok()?.to_vector();
    let g = jacobian_measure(&c.mean, &params.p_b).ok()?;
    let s = symmetrize(g * c.cov * g.transpose() + params.measurement_cov);
    let s_chol = Cholesky::new(s)?;
    let l = s_chol.l();
    let log_det = 2.0 * (l[(0, 0)].ln() + l[(1, 1)].ln());
    if !log_det.is_finite() {
        return None;
    }
    // K = P Gᵀ S⁻¹
    let gain = s_chol.solve(&(g * c.cov)).transpose();
    let cov_post = symmetrize((Matrix2::identity() - gain * g) * c.cov);
    Some(Linearized { z_pred, s_chol, log_norm: -(2.0 * PI).ln() - 0.5 * log_det, gain, cov_post })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Measurement update. Output order: every predicted component scaled by
/// `1 − p_D`, then `|pred|` detection terms per measurement in input order.
pub fn update(pred: &GmIntensity, detections: &[Detection], params: &PhdParams) -> (GmIntensity, UpdateStats) {
    let mut stats = UpdateStats::default();
    if params.p_detect == 0.0 {
        return (pred.clone(), stats);
    }
    let lin: Vec<Option<Linearized>> = pred.iter().map(|c| linearize(c, params)).collect();
    stats.skipped_components = lin.iter().filter(|l| l.is_none()).count();

    let mut out = Vec::with_capacity(pred.len() * (1 + detections.len()));
    out.extend(pred.iter().map(|c| GaussianComponent { weight: (1.0 - params.p_detect) * c.weight, ..c.clone() }));

    let log_pd = params.p_detect.ln();
    let mut log_w = vec![f64::NEG_INFINITY; pred.len()];
    for det in detections {
        for (j, (c, l)) in pred.iter().zip(&lin).enumerate() {
            log_w[j] = match l {
                Some(l) if c.weight > 0.0 => {
                    let nu = det.z - l.z_pred;
                    let maha = nu.dot(&l.s_chol.solve(&nu));
                    log_pd + c.weight.ln() + l.log_norm - 0.5 * maha
                }
                _ => f64::NEG_INFINITY,
            };
        }
        let clutter = params.clutter_intensity(&det.z);
        let log_c = if clutter > 0.0 { clutter.ln() } else { f64::NEG_INFINITY };
        let log_den = log_sum_exp(log_w.iter().copied().chain(std::iter::once(log_c)));

        for (j, (c, l)) in pred.iter().zip(&lin).enumerate() {
            let Some(l) = l else { continue };
            let weight = if log_den == f64::NEG_INFINITY { 0.0 } else { (log_w[j] - log_den).exp() };
            out.push(GaussianComponent {
                weight,
                mean: c.mean + l.gain * (det.z - l.z_pred),
                cov: l.cov_post,
                class: det.class.or(c.class),
            });
        }
    }
    (GmIntensity::new(out), stats)
}

/// Drop weak terms, merge close ones around the strongest, keep the
/// `max_components` heaviest.
pub fn prune_merge(v: &GmIntensity, prune: f64, merge: f64, max_components: usize) -> GmIntensity {
    let comps = &v.components;
    let mut pool: Vec<usize> = (0..comps.len()).filter(|&j| comps[j].weight > prune).collect();
    let inverses: Vec<Option<Matrix2<f64>>> = comps.iter().map(|c| c.cov.try_inverse()).collect();
    let mut merged = Vec::new();

    while !pool.is_empty() {
        // first index wins ties
        let lead = pool
            .iter()
            .copied()
            .reduce(|best, j| if comps[j].weight > comps[best].weight { j } else { best })
            .expect("non-empty");
        let m_i = comps[lead].mean;
        let (group, rest): (Vec<usize>, Vec<usize>) = pool.iter().partition(|&&j| {
            if j == lead {
                return true;
            }
            match &inverses[j] {
                Some(inv) => {
                    let d = comps[j].mean - m_i;
                    d.dot(&(inv * d)) <= merge
                }
                None => false,
            }
        });
        pool = rest;

        let w: f64 = group.iter().map(|&j| comps[j].weight).sum();
        let mean = group.iter().map(|&j| comps[j].mean * comps[j].weight).sum::<Vec2>() / w;
        let cov = group
            .iter()
            .map(|&j| {
                let d = mean - comps[j].mean;
                (comps[j].cov + d * d.transpose()) * comps[j].weight
            })
            .sum::<Matrix2<f64>>()
            / w;
        merged.push(GaussianComponent { weight: w, mean, cov: symmetrize(cov), class: comps[lead].class });
    }

    if merged.len() > max_components {
        merged.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        merged.truncate(max_components);
    }
    GmIntensity::new(merged)
}

/// Extracted target set `C_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub states: Vec<Vec2>,
    /// Weight of the component behind each state.
    pub weights: Vec<f64>,
}

impl Extraction {
    /// Estimated cardinality `P̂(k)`.
    pub fn count(&self) -> usize {
        self.states.len()
    }
}

/// Means of components heavier than `rho`.
pub fn extract(v: &GmIntensity, rho: f64) -> Extraction {
    let (states, weights) = v.iter().filter(|c| c.weight > rho).map(|c| (c.mean, c.weight)).unzip();
    Extraction { states, weights }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub posterior: GmIntensity,
    pub extraction: Extraction,
    pub stats: UpdateStats,
}

/// One full period of the filter.
pub fn filter_step(prev: &GmIntensity, detections: &[Detection], params: &PhdParams) -> StepOutput {
    let predicted = predict(prev, params);
    let (updated, stats) = update(&predicted, detections, params);
    let posterior =
        prune_merge(&updated, params.prune_threshold, params.merge_threshold, params.max_components);
    let extraction = extract(&posterior, params.extract_threshold);
    StepOutput { posterior, extraction, stats }
}
