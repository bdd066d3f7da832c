//! Rigid transforms (SE(3)) stored as 4×4 row-major matrices.
//!
//! Poses map sensor-frame coordinates into the world frame. Rigidity
//! (orthonormal rotation block, determinant +1, bottom row 0 0 0 1) is
//! validated at construction; composition and inversion preserve it.

use thiserror::Error;

use crate::scalar::{real, Real};

/// Maximum deviation tolerated when validating rigidity.
pub const RIGID_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("pose bottom row must be (0, 0, 0, 1)")]
    BadBottomRow,
    #[error("rotation block is not orthonormal (max |R·Rᵀ − I| = {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rotation block has determinant {0:.6}, expected +1")]
    BadDeterminant(f64),
}

/// Rigid transform as a 4×4 row-major matrix with rotation block R and
/// translation t; maps a point p to R·p + t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<S> {
    m: [[S; 4]; 4],
}

impl<S: Real> Pose<S> {
    pub fn identity() -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = S::one();
        }
        Self { m }
    }

    /// Validates rigidity before accepting the matrix.
    pub fn from_matrix(m: [[S; 4]; 4]) -> Result<Self, PoseError> {
        let bottom_ok = m[3][0] == S::zero()
            && m[3][1] == S::zero()
            && m[3][2] == S::zero()
            && m[3][3] == S::one();
        if !bottom_ok {
            return Err(PoseError::BadBottomRow);
        }
        let ortho = orthonormality_error(&m);
        if ortho > RIGID_TOL {
            return Err(PoseError::NotOrthonormal(ortho));
        }
        let det = rotation_determinant(&m);
        if (det - 1.0).abs() > RIGID_TOL {
            return Err(PoseError::BadDeterminant(det));
        }
        Ok(Self { m })
    }

    /// Builds from 12 row-major values of the upper 3×4 block.
    pub fn from_rows_3x4(vals: &[S]) -> Result<Self, PoseError> {
        assert_eq!(vals.len(), 12, "expected 12 values for a 3x4 block");
        let mut m = [[S::zero(); 4]; 4];
        for r in 0..3 {
            for c in 0..4 {
                m[r][c] = vals[r * 4 + c];
            }
        }
        m[3][3] = S::one();
        Self::from_matrix(m)
    }

    pub fn from_parts(rotation: [[S; 3]; 3], translation: [S; 3]) -> Result<Self, PoseError> {
        let mut m = [[S::zero(); 4]; 4];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = rotation[r][c];
            }
            m[r][3] = translation[r];
        }
        m[3][3] = S::one();
        Self::from_matrix(m)
    }

    pub fn translation_of(t: [S; 3]) -> Self {
        let mut p = Self::identity();
        p.m[0][3] = t[0];
        p.m[1][3] = t[1];
        p.m[2][3] = t[2];
        p
    }

    /// Rotation about the +z axis by `yaw` radians.
    pub fn rotation_z(yaw: S) -> Self {
        let (s, c) = (yaw.sin(), yaw.cos());
        let mut p = Self::identity();
        p.m[0][0] = c;
        p.m[0][1] = -s;
        p.m[1][0] = s;
        p.m[1][1] = c;
        p
    }

    pub fn matrix(&self) -> &[[S; 4]; 4] {
        &self.m
    }

    pub fn rotation(&self) -> [[S; 3]; 3] {
        let mut r = [[S::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.m[i][j];
            }
        }
        r
    }

    pub fn translation(&self) -> [S; 3] {
        [self.m[0][3], self.m[1][3], self.m[2][3]]
    }

    /// Rigid inverse: (Rᵀ, −Rᵀ·t).
    pub fn inverse(&self) -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = self.m[j][i];
            }
        }
        let t = self.translation();
        for i in 0..3 {
            let mut v = S::zero();
            for j in 0..3 {
                v += m[i][j] * t[j];
            }
            m[i][3] = -v;
        }
        m[3][3] = S::one();
        Self { m }
    }

    /// Matrix product self · rhs (rhs applied first).
    pub fn compose(&self, rhs: &Self) -> Self {
        let mut m = [[S::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut v = S::zero();
                for (k, rhs_row) in rhs.m.iter().enumerate() {
                    v += self.m[i][k] * rhs_row[j];
                }
                m[i][j] = v;
            }
        }
        Self { m }
    }

    pub fn transform_point(&self, p: [S; 3]) -> [S; 3] {
        let mut out = [S::zero(); 3];
        for i in 0..3 {
            out[i] = self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.m[i][2] * p[2] + self.m[i][3];
        }
        out
    }

    /// Max deviation of R·Rᵀ from the identity plus |det − 1|.
    pub fn rigidity_error(&self) -> f64 {
        let ortho = orthonormality_error(&self.m);
        let det = rotation_determinant(&self.m);
        ortho.max((det - 1.0).abs())
    }
}

/// Transform mapping coordinates expressed in `src`'s frame into `dst`'s
/// frame: dst⁻¹ · src. For identical poses this is the identity.
pub fn relative_pose<S: Real>(src: &Pose<S>, dst: &Pose<S>) -> Pose<S> {
    dst.inverse().compose(src)
}

fn orthonormality_error<S: Real>(m: &[[S; 4]; 4]) -> f64 {
    let mut max = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mut dot = 0.0f64;
            for k in 0..3 {
                dot += m[i][k].to_f64().unwrap() * m[j][k].to_f64().unwrap();
            }
            let target = if i == j { 1.0 } else { 0.0 };
            max = max.max((dot - target).abs());
        }
    }
    max
}

fn rotation_determinant<S: Real>(m: &[[S; 4]; 4]) -> f64 {
    let g = |i: usize, j: usize| m[i][j].to_f64().unwrap();
    g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
        - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
}

/// Random rigid pose, for tests and self-checks.
pub fn random_pose<S: Real>(rng: &mut impl rand::Rng) -> Pose<S> {
    // Random axis-angle via three Euler rotations keeps this dependency-light.
    let yaw: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let pitch: f64 = rng.random_range(-1.5..1.5);
    let roll: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (sy, cy) = (yaw.sin(), yaw.cos());
    let (sp, cp) = (pitch.sin(), pitch.cos());
    let (sr, cr) = (roll.sin(), roll.cos());
    let r = [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ];
    let t: [f64; 3] = [
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
    ];
    let rot = r.map(|row| row.map(real::<S>));
    Pose::from_parts(rot, t.map(real::<S>)).expect("constructed rotation is rigid")
}
