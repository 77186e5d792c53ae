//! Global coordinates, planar-array responses and the position-to-angle map.
//!
//! The frame is centred under the BS antenna plane: Z points up, and the BS
//! array lies in a plane parallel to YOZ, so a ground target in front of the
//! BS has positive X. All angles are radians.

use nalgebra::{DVector, Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

pub const E_X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
pub const E_Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
pub const E_Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Norm below which the Y-deflated offset counts as zero.
const DEGENERATE_NORM: f64 = 1e-12;

/// Elevation/azimuth pair seen from an array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    /// Angle between the Y-deflated offset and the X axis, in `[0, π]`.
    pub elevation: f64,
    /// `π/2` minus the angle to the Y axis, in `[-π/2, π/2]`.
    pub azimuth: f64,
}

impl AnglePair {
    pub const fn new(elevation: f64, azimuth: f64) -> Self {
        Self { elevation, azimuth }
    }

    pub fn from_degrees(elevation: f64, azimuth: f64) -> Self {
        Self::new(elevation.to_radians(), azimuth.to_radians())
    }

    pub fn to_vector(self) -> Vec2 {
        Vec2::new(self.elevation, self.azimuth)
    }

    pub fn from_vector(v: &Vec2) -> Self {
        Self::new(v[0], v[1])
    }

    /// Unit direction from the array towards a point *below* it that
    /// produces these angles.
    pub fn direction(self) -> Vec3 {
        let (sp, cp) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(ca * cp, sa, -ca * sp)
    }

    /// Great-circle separation between the two downward directions.
    pub fn separation(self, other: AnglePair) -> f64 {
        self.direction().dot(&other.direction()).clamp(-1.0, 1.0).acos()
    }
}

/// Uniform planar array with half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub n_x: usize,
    pub n_y: usize,
    pub wavelength: f64,
}

impl UpaGeometry {
    pub fn new(n_x: usize, n_y: usize, wavelength: f64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::Contract(format!(
                "array dimensions must be positive, got {n_x}x{n_y}"
            )));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Contract(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self { n_x, n_y, wavelength })
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    /// Spatial frequencies `(sinφ·sinψ, sinφ·cosψ)` along the two array axes.
    pub fn spatial_frequencies(a: AnglePair) -> (f64, f64) {
        let s = a.elevation.sin();
        (s * a.azimuth.sin(), s * a.azimuth.cos())
    }
}

fn linear_response(n: usize, phase_step: f64) -> DVector<Complex64> {
    DVector::from_iterator(n, (0..n).map(|i| Complex64::from_polar(1.0, phase_step * i as f64)))
}

/// The two linear-array factors `(a_x, a_y)` whose Kronecker product is the
/// planar steering vector.
pub fn steering_factors(geom: &UpaGeometry, a: AnglePair) -> (DVector<Complex64>, DVector<Complex64>) {
    let k = 2.0 * PI * geom.spacing() / geom.wavelength;
    let (ux, uy) = UpaGeometry::spatial_frequencies(a);
    (linear_response(geom.n_x, k * ux), linear_response(geom.n_y, k * uy))
}

/// Planar steering vector `a_x ⊗ a_y`; the X index varies slowest.
pub fn steering_vector(geom: &UpaGeometry, a: AnglePair) -> DVector<Complex64> {
    let k = 2.0 * PI * geom.spacing() / geom.wavelength;
    let (ux, uy) = UpaGeometry::spatial_frequencies(a);
    DVector::from_iterator(
        geom.len(),
        (0..geom.n_x).flat_map(move |ix| {
            (0..geom.n_y).map(move |iy| {
                Complex64::from_polar(1.0, k * (ix as f64 * ux + iy as f64 * uy))
            })
        }),
    )
}

/// Angles of `p` seen from an array located at `origin`.
pub fn measure_angles(p: &Vec3, origin: &Vec3) -> Result<AnglePair> {
    let d = p - origin;
    let deflated = d - d.dot(&E_Y) * E_Y;
    let r = deflated.norm();
    if r < DEGENERATE_NORM {
        return Err(Error::DegenerateGeometry("offset is parallel to the Y axis"));
    }
    let elevation = (deflated.dot(&E_X) / r).clamp(-1.0, 1.0).acos();
    let azimuth = FRAC_PI_2 - (d.dot(&E_Y) / d.norm()).clamp(-1.0, 1.0).acos();
    Ok(AnglePair { elevation, azimuth })
}

fn ground(c: &Vec2) -> Vec3 {
    Vec3::new(c[0], c[1], 0.0)
}

/// AoD at the BS of a ground target with state `c`.
pub fn measure_angles_from_bs(c: &Vec2, p_b: &Vec3) -> Result<AnglePair> {
    measure_angles(&ground(c), p_b)
}

/// AoA at the surface of a scatterer at `p`.
pub fn measure_angles_from_ris(p: &Vec3, p_s: &Vec3) -> Result<AnglePair> {
    measure_angles(p, p_s)
}

/// `∂g/∂c` for a ground target, rows (elevation, azimuth), columns (x, y).
pub fn jacobian_measure(c: &Vec2, p_b: &Vec3) -> Result<Matrix2<f64>> {
    let d = ground(c) - p_b;
    let (dx, dy, dz) = (d[0], d[1], d[2]);
    let r2 = dx * dx + dz * dz;
    let r = r2.sqrt();
    if r < DEGENERATE_NORM {
        return Err(Error::DegenerateGeometry("offset is parallel to the Y axis"));
    }
    let rho2 = r2 + dy * dy;
    // elevation = acos(dx / r) with dz fixed by the target height
    let d_el_dx = -dz.abs() / r2;
    // azimuth = atan2(dy, r)
    let d_az_dx = -dx * dy / (rho2 * r);
    let d_az_dy = r / rho2;
    Ok(Matrix2::new(d_el_dx, 0.0, d_az_dx, d_az_dy))
}

/// Ground point (z = 0) seen from `origin` under angles `a`, if the ray
/// actually reaches the ground.
pub fn ground_point(a: AnglePair, origin: &Vec3) -> Option<Vec2> {
    let height = origin[2];
    let s = a.elevation.sin();
    if height <= 0.0 || s <= 0.0 || a.azimuth.abs() >= FRAC_PI_2 {
        return None;
    }
    let r = height / s;
    let dx = r * a.elevation.cos();
    let dy = r * a.azimuth.tan();
    Some(Vec2::new(origin[0] + dx, origin[1] + dy))
}
