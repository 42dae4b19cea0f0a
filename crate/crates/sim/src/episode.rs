//! Time-sampled interaction episodes and their line-delimited file format.
//!
//! A file holds one JSON header record carrying the object parameters,
//! followed by one JSON record per sample. Floating point goes through
//! serde_json's shortest round-trip encoding, which preserves every bit of
//! the value.

use crate::object::ObjectParams;
use crate::SimError;
use pushnav_se2::SE2Accel;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One sample: the full state at `t`, the command, and the wrench applied
/// over `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Robot pose [x, y, yaw].
    pub q_r: [f64; 3],
    /// Robot twist [vx, vy, omega].
    pub qdot_r: [f64; 3],
    /// Body lean [phi_x, phi_y].
    pub lean: [f64; 2],
    /// Object pose [x, y, yaw].
    pub q_o: [f64; 3],
    /// Object twist [vx, vy, omega].
    pub qdot_o: [f64; 3],
    /// Command [phi_x, phi_y, gamma].
    pub u: [f64; 3],
    /// Mean world-frame wrench over the sample window [fx, fy, tau],
    /// torque about `contact_pt`.
    pub gamma_w: [f64; 3],
    /// Application point (world frame).
    pub contact_pt: [f64; 2],
    /// True when any substep of the window had contact.
    pub contact_flag: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeHeader {
    format: String,
    dt: f64,
    condition_id: u32,
    object: ObjectParams,
}

/// A time-ordered episode at fixed sample spacing.
#[derive(Debug, Clone)]
pub struct Episode {
    /// Sample spacing (s).
    pub dt: f64,
    pub object: ObjectParams,
    pub samples: Vec<Sample>,
    /// Mean object acceleration over each sample window (world frame),
    /// recorded by the simulator. Not part of the file format; labels are
    /// recomputed from the twist stream on load.
    pub accel_labels: Vec<SE2Accel>,
}

impl Episode {
    /// Serialize to the line-delimited episode format.
    pub fn write_to(&self, w: &mut dyn Write) -> Result<(), SimError> {
        let header = EpisodeHeader {
            format: "episode-v1".to_string(),
            dt: self.dt,
            condition_id: self.object.condition_id,
            object: self.object.clone(),
        };
        let io_err = |e: std::io::Error| SimError::EpisodeFile(e.to_string());
        let json_err = |e: serde_json::Error| SimError::EpisodeFile(e.to_string());
        let mut line = serde_json::to_vec(&header).map_err(json_err)?;
        line.push(b'\n');
        w.write_all(&line).map_err(io_err)?;
        for s in &self.samples {
            let mut line = serde_json::to_vec(s).map_err(json_err)?;
            line.push(b'\n');
            w.write_all(&line).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| SimError::EpisodeFile(format!("{}: {e}", path.display())))?;
        self.write_to(&mut f)
    }

    /// Parse an episode file. Window-mean acceleration labels are
    /// reconstructed from forward differences of the twist stream.
    pub fn load(path: &Path) -> Result<Episode, SimError> {
        let f = std::fs::File::open(path)
            .map_err(|e| SimError::EpisodeFile(format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(f).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| SimError::EpisodeFile("empty file".into()))?
            .map_err(|e| SimError::EpisodeFile(e.to_string()))?;
        let header: EpisodeHeader = serde_json::from_str(&header_line)
            .map_err(|e| SimError::EpisodeFile(format!("bad header: {e}")))?;
        if header.format != "episode-v1" {
            return Err(SimError::EpisodeFile(format!(
                "unknown format {}",
                header.format
            )));
        }
        let mut samples = Vec::new();
        for line in lines {
            let line = line.map_err(|e| SimError::EpisodeFile(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line)
                .map_err(|e| SimError::EpisodeFile(format!("bad sample: {e}")))?;
            samples.push(s);
        }
        let mut ep = Episode {
            dt: header.dt,
            object: header.object,
            samples,
            accel_labels: Vec::new(),
        };
        ep.accel_labels = ep.forward_difference_labels();
        Ok(ep)
    }

    /// Window-mean accelerations from forward differences of the twist
    /// stream: exact for the window-mean convention the simulator records.
    pub fn forward_difference_labels(&self) -> Vec<SE2Accel> {
        let n = self.samples.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let j = (i + 1).min(n.saturating_sub(1));
            if j == i {
                out.push(*out.last().unwrap_or(&SE2Accel::default()));
                continue;
            }
            let a = &self.samples[i];
            let b = &self.samples[j];
            out.push(SE2Accel::new(
                (b.qdot_o[0] - a.qdot_o[0]) / self.dt,
                (b.qdot_o[1] - a.qdot_o[1]) / self.dt,
                (b.qdot_o[2] - a.qdot_o[2]) / self.dt,
            ));
        }
        out
    }

    /// Check the fixed-dt invariant.
    pub fn validate_uniform_dt(&self) -> Result<(), SimError> {
        for (i, pair) in self.samples.windows(2).enumerate() {
            let found = pair[1].t - pair[0].t;
            if (found - self.dt).abs() > 1e-9 {
                return Err(SimError::NonUniformDt {
                    expected: self.dt,
                    found,
                    index: i + 1,
                });
            }
        }
        Ok(())
    }
}

/// Central differences of the object twist; one-sided at the endpoints.
pub fn finite_difference_accel(episode: &Episode) -> Result<Vec<SE2Accel>, SimError> {
    let n = episode.samples.len();
    if n < 3 {
        return Err(SimError::TooFewSamples { needed: 3, got: n });
    }
    episode.validate_uniform_dt()?;
    let dt = episode.dt;
    let v = |i: usize| episode.samples[i].qdot_o;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = if i == 0 {
            let (a, b) = (v(0), v(1));
            [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt]
        } else if i == n - 1 {
            let (a, b) = (v(n - 2), v(n - 1));
            [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt]
        } else {
            let (a, b) = (v(i - 1), v(i + 1));
            [
                (b[0] - a[0]) / (2.0 * dt),
                (b[1] - a[1]) / (2.0 * dt),
                (b[2] - a[2]) / (2.0 * dt),
            ]
        };
        out.push(SE2Accel::new(a[0], a[1], a[2]));
    }
    Ok(out)
}
