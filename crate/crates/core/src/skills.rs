//! Latent skill prior: sampling, enumeration, interpolation.
//!
//! Skills are either exact one-hot vectors (discrete prior, uniform over the
//! `D` basis vectors) or points of the open box `(-1, 1)^D` (continuous
//! prior, uniform per coordinate). A skill is sampled once per episode and
//! held fixed unless the within-episode resampling mode is enabled.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkillKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSpace {
    pub kind: SkillKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skill<S: Scalar> {
    values: Array1<S>,
    kind: SkillKind,
}

impl SkillSpace {
    pub fn discrete(dim: usize) -> Self {
        assert!(dim > 0, "skill dimension must be positive");
        SkillSpace {
            kind: SkillKind::Discrete,
            dim,
        }
    }

    pub fn continuous(dim: usize) -> Self {
        assert!(dim > 0, "skill dimension must be positive");
        SkillSpace {
            kind: SkillKind::Continuous,
            dim,
        }
    }

    /// Draw one skill from the prior.
    pub fn sample<S: Scalar>(&self, rng: &mut RngStream) -> Skill<S> {
        match self.kind {
            SkillKind::Discrete => {
                let idx = rng.index(self.dim);
                Skill::one_hot(self.dim, idx)
            }
            SkillKind::Continuous => {
                let values =
                    Array1::from_iter((0..self.dim).map(|_| S::from_f64(rng.uniform_in(-1.0, 1.0))));
                Skill {
                    values,
                    kind: SkillKind::Continuous,
                }
            }
        }
    }

    /// All `D` one-hot skills in index order. Discrete spaces only.
    pub fn enumerate<S: Scalar>(&self) -> Result<Vec<Skill<S>>> {
        match self.kind {
            SkillKind::Discrete => Ok((0..self.dim).map(|i| Skill::one_hot(self.dim, i)).collect()),
            SkillKind::Continuous => Err(Error::Unsupported(
                "enumerate is only defined for discrete skill spaces".into(),
            )),
        }
    }

    /// Log-density of the prior: `-ln D` per discrete skill, constant
    /// `-D ln 2` over the continuous box.
    pub fn prior_log_density(&self) -> f64 {
        match self.kind {
            SkillKind::Discrete => -(self.dim as f64).ln(),
            SkillKind::Continuous => -(self.dim as f64) * std::f64::consts::LN_2,
        }
    }
}

impl<S: Scalar> Skill<S> {
    pub fn one_hot(dim: usize, index: usize) -> Self {
        assert!(index < dim, "one-hot index out of range");
        let mut values = Array1::zeros(dim);
        values[index] = S::one();
        Skill {
            values,
            kind: SkillKind::Discrete,
        }
    }

    pub fn continuous(values: Array1<S>) -> Self {
        Skill {
            values,
            kind: SkillKind::Continuous,
        }
    }

    pub fn values(&self) -> &Array1<S> {
        &self.values
    }

    pub fn kind(&self) -> SkillKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Componentwise `(1 - t) * z1 + t * z2`. Continuous skills only; the result
/// stays inside the closed box for `t` in `[0, 1]`.
pub fn interpolate<S: Scalar>(z1: &Skill<S>, z2: &Skill<S>, t: f64) -> Result<Skill<S>> {
    if z1.kind != SkillKind::Continuous || z2.kind != SkillKind::Continuous {
        return Err(Error::Unsupported(
            "interpolation is only defined for continuous skills".into(),
        ));
    }
    if z1.dim() != z2.dim() {
        return Err(Error::shape("interpolate", z1.dim(), z2.dim()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "interpolation parameter must lie in [0, 1], got {t}"
        )));
    }
    let t = S::from_f64(t);
    let one_minus = S::one() - t;
    let values = Array1::from_iter(
        z1.values
            .iter()
            .zip(z2.values.iter())
            .map(|(&a, &b)| one_minus * a + t * b),
    );
    Ok(Skill::continuous(values))
}
