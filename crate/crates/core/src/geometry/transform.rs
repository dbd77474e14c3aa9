use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const ORTHO_TOL: f64 = 1e-10;

/// Half-width (Å) of the cube translations are drawn from.
pub const TRANSLATION_RANGE: f64 = 10.0;

/// Element `(U, t)` of E(3) acting as `x ↦ Ux + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclideanTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl EuclideanTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > ORTHO_TOL) {
            return Err(Error::InvalidTransform(format!(
                "UᵀU deviates from identity by {:e}",
                gram.amax()
            )));
        }
        let det = rotation.determinant();
        if (det.abs() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!("det(U) = {det}")));
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips validation; callers guarantee orthogonality.
    pub(crate) fn new_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new_unchecked(Matrix3::identity(), Vector3::zeros())
    }

    pub fn translation_only(t: Vector3<f64>) -> Self {
        Self::new_unchecked(Matrix3::identity(), t)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new_unchecked(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new_unchecked(rt, -(rt * self.translation))
    }
}

/// Groups transforms can be sampled from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Rotations, reflections and translations.
    E3,
    /// Rotations and translations.
    SE3,
    /// Rotations only.
    SO3,
    /// Translations only.
    T3,
    /// Rotations about the z axis, plus translations.
    #[serde(rename = "Z_AXIS_2D")]
    ZAxis2D,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::E3 => "E3",
            Group::SE3 => "SE3",
            Group::SO3 => "SO3",
            Group::T3 => "T3",
            Group::ZAxis2D => "Z_AXIS_2D",
        })
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E3" | "E(3)" => Ok(Group::E3),
            "SE3" | "SE(3)" => Ok(Group::SE3),
            "SO3" | "SO(3)" => Ok(Group::SO3),
            "T3" | "T(3)" => Ok(Group::T3),
            "Z_AXIS_2D" | "Z2D" | "2D" => Ok(Group::ZAxis2D),
            other => Err(Error::InvalidConfig(format!("unknown group '{other}'"))),
        }
    }
}

/// Haar-distributed element of O(3): Gram-Schmidt on a Gaussian matrix.
fn haar_orthogonal(rng: &mut dyn RngCore) -> Matrix3<f64> {
    loop {
        let g = Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let r = qr.r();
        if (0..3).any(|i| r[(i, i)].abs() < 1e-6) {
            continue;
        }
        let mut q = qr.q();
        for i in 0..3 {
            if r[(i, i)] < 0.0 {
                q.column_mut(i).neg_mut();
            }
        }
        return q;
    }
}

fn haar_rotation(rng: &mut dyn RngCore) -> Matrix3<f64> {
    let mut q = haar_orthogonal(rng);
    if q.determinant() < 0.0 {
        q.column_mut(2).neg_mut();
    }
    q
}

fn random_translation(rng: &mut dyn RngCore) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-TRANSLATION_RANGE..=TRANSLATION_RANGE))
}

/// Sample a transform from `group`.
///
/// Rotations are Haar-uniform; E3 adds a reflection with probability ½.
/// Translations are uniform in `[-10, 10]³` Å and zero for SO3.
pub fn random_transform(group: Group, rng: &mut dyn RngCore) -> EuclideanTransform {
    let (rotation, translation) = match group {
        Group::E3 => {
            let mut r = haar_rotation(rng);
            if rng.random_bool(0.5) {
                r = -r;
            }
            (r, random_translation(rng))
        }
        Group::SE3 => (haar_rotation(rng), random_translation(rng)),
        Group::SO3 => (haar_rotation(rng), Vector3::zeros()),
        Group::T3 => (Matrix3::identity(), random_translation(rng)),
        Group::ZAxis2D => {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            let r = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
            (r, random_translation(rng))
        }
    };
    EuclideanTransform::new_unchecked(rotation, translation)
}

/// Haar-uniform improper rotation (det = −1), no translation.
pub fn random_reflection(rng: &mut dyn RngCore) -> EuclideanTransform {
    EuclideanTransform::new_unchecked(-haar_rotation(rng), Vector3::zeros())
}
