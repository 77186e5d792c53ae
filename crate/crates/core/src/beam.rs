//! Beam design from predicted scatterer positions.
//!
//! Every path gets a BS sub-beam (conjugate steering vector) and a surface
//! sub-beam (phase-aligned indoor/outdoor product). Sub-beams are summed with
//! conjugate gain weights, then normalised; the surface vector is projected
//! back to unit modulus so it stays passive.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{measure_angles, steering_vector, AnglePair, UpaGeometry, Vec2, Vec3};
use crate::{Error, Result};

/// Default collision threshold ε per side, radians (1°).
pub const DEFAULT_COLLISION_EPS: f64 = std::f64::consts::PI / 180.0;

/// Predicted path of one tracked (or static) scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPrediction {
    pub position: Vec3,
    pub aod_bs: AnglePair,
    pub aoa_ris: AnglePair,
    /// Gain carried over from the last period's sensing.
    pub gain: Complex64,
}

/// Angles at predicted ground positions. Gains start at one; callers attach
/// the carried-over estimates.
pub fn predict_path_angles(states: &[Vec2], p_b: &Vec3, p_s: &Vec3) -> Result<Vec<PathPrediction>> {
    states
        .iter()
        .map(|c| {
            let position = Vec3::new(c[0], c[1], 0.0);
            Ok(PathPrediction {
                position,
                aod_bs: measure_angles(&position, p_b)?,
                aoa_ris: measure_angles(&position, p_s)?,
                gain: Complex64::new(1.0, 0.0),
            })
        })
        .collect()
}

/// `a_B*(a)`: maximises `|a_Bᵀ f|` over unit-modulus `f`.
pub fn subbeam_bs(a: AnglePair, geom: &UpaGeometry) -> DVector<Complex64> {
    steering_vector(geom, a).map(|v| v.conj())
}

/// Entrywise `conj(a_R)·conj(a_O)` scaled to unit modulus.
pub fn subbeam_ris(indoor: AnglePair, outdoor: AnglePair, geom: &UpaGeometry) -> DVector<Complex64> {
    let a_r = steering_vector(geom, indoor);
    let a_o = steering_vector(geom, outdoor);
    a_r.zip_map(&a_o, |r, o| {
        let v = r.conj() * o.conj();
        v / v.norm()
    })
}

/// The pair of sub-beams serving one path, with its gain estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBeam {
    pub bs: DVector<Complex64>,
    pub ris: DVector<Complex64>,
    pub gain: Complex64,
}

impl SubBeam {
    pub fn for_path(
        p: &PathPrediction,
        indoor_aod: AnglePair,
        bs: &UpaGeometry,
        ris: &UpaGeometry,
    ) -> Self {
        Self { bs: subbeam_bs(p.aod_bs, bs), ris: subbeam_ris(indoor_aod, p.aoa_ris, ris), gain: p.gain }
    }
}

/// BS beam, surface phases and the analog precoder built from them.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamDesign {
    /// Unit-norm BS beam `f_B`.
    pub f_b: DVector<Complex64>,
    /// Unit-modulus surface phase vector `ω`.
    pub omega: DVector<Complex64>,
    /// `F_B = f_B·1ᵀ/√N_B^RF`.
    pub precoder: DMatrix<Complex64>,
}

/// JSON layout of a [`BeamDesign`]: complex entries as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BeamRecord {
    rf_chains: usize,
    f_b: Vec<[f64; 2]>,
    omega: Vec<[f64; 2]>,
}

fn to_pairs(v: &DVector<Complex64>) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(v: &[[f64; 2]]) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|p| Complex64::new(p[0], p[1])))
}

impl BeamDesign {
    pub fn new(f_b: DVector<Complex64>, omega: DVector<Complex64>, rf_chains: usize) -> Self {
        let precoder = analog_precoder(&f_b, rf_chains);
        Self { f_b, omega, precoder }
    }

    pub fn rf_chains(&self) -> usize {
        self.precoder.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = BeamRecord { rf_chains: self.rf_chains(), f_b: to_pairs(&self.f_b), omega: to_pairs(&self.omega) };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: BeamRecord = serde_json::from_str(s)?;
        Ok(Self::new(from_pairs(&rec.f_b), from_pairs(&rec.omega), rec.rf_chains))
    }
}

/// `f·1ᵀ/√n_rf`.
pub fn analog_precoder(f_b: &DVector<Complex64>, rf_chains: usize) -> DMatrix<Complex64> {
    let s = Complex64::new(1.0 / (rf_chains as f64).sqrt(), 0.0);
    DMatrix::from_fn(f_b.len(), rf_chains, |r, _| f_b[r] * s)
}

fn unit_modulus(v: &DVector<Complex64>) -> DVector<Complex64> {
    v.map(|c| {
        let m = c.norm();
        if m > 0.0 { c / m } else { Complex64::new(1.0, 0.0) }
    })
}

/// How surface sub-beams are weighted before the phase projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisWeighting {
    /// `ĥ*`, the same weight as the BS side. The gain phase is then undone
    /// twice along the cascade.
    Conjugate,
    /// `|ĥ|`; the BS side alone removes the gain phase, so paths add in phase
    /// at the UT.
    #[default]
    Magnitude,
}

/// Conjugate-gain-weighted sum of all sub-beams, dynamic and static alike.
pub fn combine(dynamic: &[SubBeam], statics: &[SubBeam], rf_chains: usize) -> Result<BeamDesign> {
    combine_with(dynamic, statics, rf_chains, RisWeighting::Conjugate)
}

/// [`combine`] with a choice of surface weighting.
pub fn combine_with(
    dynamic: &[SubBeam],
    statics: &[SubBeam],
    rf_chains: usize,
    weighting: RisWeighting,
) -> Result<BeamDesign> {
    let ris_weight = |g: Complex64| match weighting {
        RisWeighting::Conjugate => g.conj(),
        RisWeighting::Magnitude => Complex64::new(g.norm(), 0.0),
    };
    let mut all = dynamic.iter().chain(statics);
    let first = all.next().ok_or(Error::NoSubBeams)?;
    let mut f = first.bs.map(|v| v * first.gain.conj());
    let mut w = first.ris.map(|v| v * ris_weight(first.gain));
    let one = Complex64::new(1.0, 0.0);
    for s in all {
        f.axpy(s.gain.conj(), &s.bs, one);
        w.axpy(ris_weight(s.gain), &s.ris, one);
    }
    let (nf, nw) = (f.norm(), w.norm());
    let scale = f.iter().chain(w.iter()).map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if nf <= 1e-12 * scale || nw <= 1e-12 * scale {
        return Err(Error::CancellingBeams);
    }
    f.unscale_mut(nf);
    Ok(BeamDesign::new(f, unit_modulus(&w), rf_chains))
}

/// [`combine`], falling back to the strongest single sub-beam when the
/// weighted sum cancels.
pub fn combine_or_strongest(
    dynamic: &[SubBeam],
    statics: &[SubBeam],
    rf_chains: usize,
    weighting: RisWeighting,
) -> Result<BeamDesign> {
    match combine_with(dynamic, statics, rf_chains, weighting) {
        Err(Error::CancellingBeams) => {
            let best = dynamic
                .iter()
                .chain(statics)
                .max_by(|a, b| a.gain.norm().total_cmp(&b.gain.norm()))
                .ok_or(Error::NoSubBeams)?;
            let gain = if best.gain.norm() > 0.0 { best.gain } else { Complex64::new(1.0, 0.0) };
            let lone = SubBeam { gain, ..best.clone() };
            combine_with(std::slice::from_ref(&lone), &[], rf_chains, weighting)
        }
        other => other,
    }
}

/// `η < χ`.
pub fn mismatch_detect(eta: f64, chi: f64) -> bool {
    eta < chi
}

/// Received-strength monitor with `χ = factor × running median` of the
/// strengths seen since the last reset.
#[derive(Debug, Clone)]
pub struct MismatchMonitor {
    pub factor: f64,
    /// Samples needed before the monitor may trigger.
    pub warmup: usize,
    history: Vec<f64>,
}

impl MismatchMonitor {
    pub fn new(factor: f64, warmup: usize) -> Self {
        Self { factor, warmup, history: Vec::new() }
    }

    /// Current threshold, `None` while warming up.
    pub fn threshold(&self) -> Option<f64> {
        if self.history.len() < self.warmup.max(1) {
            return None;
        }
        let mut h = self.history.clone();
        h.sort_by(f64::total_cmp);
        let n = h.len();
        let median = if n % 2 == 1 { h[n / 2] } else { 0.5 * (h[n / 2 - 1] + h[n / 2]) };
        Some(self.factor * median)
    }

    /// Test `eta` against the current threshold, then record it. A trigger
    /// clears the history.
    pub fn observe(&mut self, eta: f64) -> bool {
        let fired = self.threshold().is_some_and(|chi| mismatch_detect(eta, chi));
        if fired {
            self.history.clear();
        } else {
            self.history.push(eta);
        }
        fired
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }
}

/// Which side of a collision loses its path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Blocked {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collision {
    /// Index into the dynamic predictions.
    pub dynamic: usize,
    /// Index into the static paths.
    pub static_path: usize,
    pub blocked: Blocked,
}

/// Flag dynamic/static pairs whose angles nearly coincide at the BS or at the
/// surface. On a BS-side match the scatterer nearer the BS blocks the other;
/// on a surface-side match the one nearer the surface does.
pub fn collision_predict(
    dynamic: &[PathPrediction],
    statics: &[PathPrediction],
    p_b: &Vec3,
    p_s: &Vec3,
    eps: f64,
) -> Vec<Collision> {
    let mut out = Vec::new();
    for (i, d) in dynamic.iter().enumerate() {
        for (j, s) in statics.iter().enumerate() {
            let reference = if d.aod_bs.separation(s.aod_bs) < eps {
                p_b
            } else if d.aoa_ris.separation(s.aoa_ris) < eps {
                p_s
            } else {
                continue;
            };
            let dynamic_nearer = (d.position - reference).norm() < (s.position - reference).norm();
            out.push(Collision {
                dynamic: i,
                static_path: j,
                blocked: if dynamic_nearer { Blocked::Static } else { Blocked::Dynamic },
            });
        }
    }
    out
}

/// Keep-masks `(dynamic, static)` after removing blocked paths.
pub fn unblocked_masks(collisions: &[Collision], n_dynamic: usize, n_static: usize) -> (Vec<bool>, Vec<bool>) {
    let mut dyn_keep = vec![true; n_dynamic];
    let mut st_keep = vec![true; n_static];
    for c in collisions {
        match c.blocked {
            Blocked::Static => st_keep[c.static_path] = false,
            Blocked::Dynamic => dyn_keep[c.dynamic] = false,
        }
    }
    (dyn_keep, st_keep)
}
