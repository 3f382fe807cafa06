//! Angle datagram payload: one ASCII line `ts,shoulder,elbow,wrist\n`.

use crate::error::{Error, Result};
use crate::kinematics::AngleFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPacket {
    pub frame: AngleFrame,
    /// At least one angle was outside [0, 180] and has been clamped.
    pub clamped: bool,
}

/// Counters kept by a datagram listener.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PacketStats {
    pub received: u64,
    pub dropped: u64,
    pub clamped: u64,
}

impl PacketStats {
    /// Decodes one payload, updating the counters. Malformed packets are
    /// counted and returned as `None`.
    pub fn accept(&mut self, payload: &[u8]) -> Option<AngleFrame> {
        self.received += 1;
        match decode_angle_packet(payload) {
            Ok(p) => {
                if p.clamped {
                    self.clamped += 1;
                }
                Some(p.frame)
            }
            Err(_) => {
                self.dropped += 1;
                None
            }
        }
    }
}

pub fn decode_angle_packet(bytes: &[u8]) -> Result<DecodedPacket> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::PacketFormat("payload is not ASCII".into()))?;
    let line = text
        .strip_suffix('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .unwrap_or(text);
    if line.contains('\n') {
        return Err(Error::PacketFormat(
            "payload holds more than one line".into(),
        ));
    }
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(Error::PacketFormat(format!(
            "expected 4 fields, got {}",
            fields.len()
        )));
    }
    let mut values = [0.0; 4];
    for (v, f) in values.iter_mut().zip(&fields) {
        *v = f
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::PacketFormat(format!("not a number: {f:?}")))?;
    }
    let mut clamped = false;
    let mut clamp = |v: f64| {
        let c = v.clamp(0.0, 180.0);
        clamped |= c != v;
        c
    };
    let frame = AngleFrame {
        t: values[0],
        shoulder_deg: clamp(values[1]),
        elbow_deg: clamp(values[2]),
        wrist_deg: clamp(values[3]),
    };
    Ok(DecodedPacket { frame, clamped })
}

/// Inverse of [`decode_angle_packet`] for in-range frames.
pub fn encode_angle_packet(frame: &AngleFrame) -> String {
    format!(
        "{},{},{},{}\n",
        frame.t, frame.shoulder_deg, frame.elbow_deg, frame.wrist_deg
    )
}
