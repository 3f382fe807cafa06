//! Joint angles from tracked skeleton joints.
//!
//! Bones are vectors between joints; the angle at a joint is the angle between
//! the two bones meeting there. The shoulder has only one tracked bone on the
//! arm side, so it is measured against a fixed reference direction.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Joint, Result};

pub type Point3 = Vector3<f64>;

/// Minimum bone length in meters.
pub const MIN_BONE_LENGTH: f64 = 1e-9;

/// Torso-down direction in camera coordinates.
pub const DEFAULT_SHOULDER_REFERENCE: [f64; 3] = [0.0, -1.0, 0.0];

/// Right-arm joints from one depth-camera frame. Coordinates in meters with
/// the camera at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub t: f64,
    pub tip: [f64; 3],
    pub wrist: [f64; 3],
    pub elbow: [f64; 3],
    pub shoulder: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleFrame {
    pub t: f64,
    pub shoulder_deg: f64,
    pub elbow_deg: f64,
    pub wrist_deg: f64,
}

impl AngleFrame {
    pub fn angles(&self) -> [f64; 3] {
        [self.shoulder_deg, self.elbow_deg, self.wrist_deg]
    }
}

/// Angle in degrees at `center` between the bones to `a` and to `b`.
pub fn joint_angle(center: &Point3, a: &Point3, b: &Point3) -> Result<f64> {
    joint_angle_at(Joint::Elbow, center, a, b)
}

fn joint_angle_at(joint: Joint, center: &Point3, a: &Point3, b: &Point3) -> Result<f64> {
    let p = a - center;
    let q = b - center;
    let (np, nq) = (p.norm(), q.norm());
    if !(np > MIN_BONE_LENGTH && nq > MIN_BONE_LENGTH) {
        return Err(Error::DegenerateGeometry {
            joint,
            reason: format!("bone lengths {np:.3e} and {nq:.3e} m"),
        });
    }
    let cos = (p.dot(&q) / (np * nq)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Shoulder, elbow and wrist angles of one frame.
///
/// - elbow: between elbow→shoulder and elbow→wrist
/// - wrist: between wrist→elbow and wrist→tip
/// - shoulder: between shoulder→elbow and `shoulder_reference`
pub fn angles_from_skeleton(f: &SkeletonFrame, shoulder_reference: &Point3) -> Result<AngleFrame> {
    let [t, w, e, s] = [f.tip, f.wrist, f.elbow, f.shoulder].map(Point3::from);
    if ![t, w, e, s].iter().all(|p| p.iter().all(|c| c.is_finite())) {
        return Err(Error::input(format!(
            "non-finite joint coordinate at t = {}",
            f.t
        )));
    }
    let reference = s + shoulder_reference;
    Ok(AngleFrame {
        t: f.t,
        shoulder_deg: joint_angle_at(Joint::Shoulder, &s, &e, &reference)?,
        elbow_deg: joint_angle_at(Joint::Elbow, &e, &s, &w)?,
        wrist_deg: joint_angle_at(Joint::Wrist, &w, &e, &t)?,
    })
}

/// Converts a frame sequence, enforcing strictly increasing timestamps.
pub fn angles_from_sequence(
    frames: &[SkeletonFrame],
    shoulder_reference: &Point3,
) -> Result<Vec<AngleFrame>> {
    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        if i > 0 && f.t <= frames[i - 1].t {
            return Err(Error::Data {
                row: i,
                message: format!("timestamp {} not after {}", f.t, frames[i - 1].t),
            });
        }
        out.push(angles_from_skeleton(f, shoulder_reference)?);
    }
    Ok(out)
}
