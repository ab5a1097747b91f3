//! Sampler settings and their flat text form.

use serde::{Deserialize, Serialize};

use crate::blend::DEFAULT_ALPHA;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::warp::SampleMode;

/// Repeating single steps inside a window of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeTravel {
    pub start_frac: f32,
    pub end_frac: f32,
    /// Passes per step inside the window; 1 disables.
    pub repeats: usize,
    /// Repeat from the same noisy latent instead of re-noising.
    pub bypass_renoise: bool,
}

impl Default for TimeTravel {
    fn default() -> Self {
        Self {
            start_frac: 0.2,
            end_frac: 0.8,
            repeats: 2,
            bypass_renoise: false,
        }
    }
}

impl TimeTravel {
    /// Whether step `k` of `steps` is repeated.
    pub fn covers(&self, k: usize, steps: usize) -> bool {
        let pos = k as f32;
        self.repeats > 1 && pos >= self.start_frac * steps as f32 && pos < self.end_frac * steps as f32
    }

    /// Extra passes over a whole run of `steps`.
    pub fn extra_passes(&self, steps: usize) -> usize {
        (0..steps).filter(|&k| self.covers(k, steps)).count() * (self.repeats.max(1) - 1)
    }
}

/// Finishing the run on a single view.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Priority {
    pub view: Option<usize>,
    /// Share of the final steps given to `view` alone.
    pub last_frac: f32,
}

pub const DEFAULT_PRIORITY_FRAC: f32 = 0.2;

impl Priority {
    pub fn steps(&self, steps: usize) -> usize {
        match self.view {
            Some(_) => ((self.last_frac * steps as f32).round() as usize).min(steps),
            None => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncConfig {
    pub steps: usize,
    pub cfg_scale: f32,
    pub alpha: f32,
    pub feather: bool,
    pub time_travel: TimeTravel,
    pub priority: Priority,
    pub seed: u64,
    /// Pyramid depth; `None` picks one from the canonical size.
    pub depth: Option<usize>,
    pub sample_mode: SampleMode,
    /// Explicit increasing timesteps from 0 to 1, overriding `steps`.
    pub schedule: Option<Vec<f32>>,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            steps: 30,
            cfg_scale: 0.0,
            alpha: DEFAULT_ALPHA,
            feather: true,
            time_travel: TimeTravel::default(),
            priority: Priority {
                view: None,
                last_frac: DEFAULT_PRIORITY_FRAC,
            },
            seed: 0,
            depth: None,
            sample_mode: SampleMode::Nearest,
            schedule: None,
        }
    }
}

const KEYS: &[&str] = &[
    "steps",
    "cfg_scale",
    "alpha",
    "feather",
    "travel_start",
    "travel_end",
    "travel_repeats",
    "travel_bypass",
    "priority_view",
    "priority_frac",
    "seed",
    "depth",
    "sample_mode",
    "schedule",
];

fn invalid(message: String) -> Error {
    Error::Parse { line: 0, message }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        let tt = &self.time_travel;
        if !(0.0 <= tt.start_frac && tt.start_frac < tt.end_frac && tt.end_frac <= 1.0) {
            return Err(invalid(format!(
                "time travel window [{}, {}) must satisfy 0 <= start < end <= 1",
                tt.start_frac, tt.end_frac
            )));
        }
        if tt.repeats == 0 {
            return Err(invalid("travel_repeats must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.priority.last_frac) {
            return Err(invalid(format!(
                "priority_frac {} outside [0, 1)",
                self.priority.last_frac
            )));
        }
        if !(self.cfg_scale >= 0.0) {
            return Err(invalid(format!("cfg_scale {} must be >= 0", self.cfg_scale)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        match &self.schedule {
            Some(s) => {
                let ordered = s.windows(2).all(|w| w[0] < w[1]);
                if s.len() < 2 || s[0] != 0.0 || *s.last().unwrap() != 1.0 || !ordered {
                    return Err(invalid(
                        "schedule must increase strictly from 0 to 1".into(),
                    ));
                }
            }
            None if self.steps == 0 => return Err(invalid("steps must be positive".into())),
            None => {}
        }
        Ok(())
    }

    /// `t_0 = 0 < ... < t_T = 1`.
    pub fn timesteps(&self) -> Vec<f32> {
        match &self.schedule {
            Some(s) => s.clone(),
            None => (0..=self.steps)
                .map(|k| k as f32 / self.steps as f32)
                .collect(),
        }
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(KEYS)?;
        let d = Self::default();
        let priority_view = match kv.get_str("priority_view") {
            None | Some("none") | Some("") => None,
            Some(_) => Some(kv.require("priority_view")?),
        };
        let schedule = match kv.get_str("schedule") {
            None | Some("") => None,
            Some(s) => Some(
                s.split(',')
                    .map(|v| v.trim().parse::<f32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| invalid(format!("bad schedule `{s}`: {e}")))?,
            ),
        };
        let depth = match kv.get_str("depth") {
            None | Some("auto") => None,
            Some(_) => Some(kv.require("depth")?),
        };
        let cfg = Self {
            steps: kv.get_or("steps", d.steps)?,
            cfg_scale: kv.get_or("cfg_scale", d.cfg_scale)?,
            alpha: kv.get_or("alpha", d.alpha)?,
            feather: kv.get_or("feather", d.feather)?,
            time_travel: TimeTravel {
                start_frac: kv.get_or("travel_start", d.time_travel.start_frac)?,
                end_frac: kv.get_or("travel_end", d.time_travel.end_frac)?,
                repeats: kv.get_or("travel_repeats", d.time_travel.repeats)?,
                bypass_renoise: kv.get_or("travel_bypass", d.time_travel.bypass_renoise)?,
            },
            priority: Priority {
                view: priority_view,
                last_frac: kv.get_or("priority_frac", d.priority.last_frac)?,
            },
            seed: kv.get_or("seed", d.seed)?,
            depth,
            sample_mode: kv.get_or("sample_mode", d.sample_mode)?,
            schedule,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text)?)
    }

    /// Every setting, in the form [`Self::parse`] reads.
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("steps", self.steps);
        kv.insert("cfg_scale", self.cfg_scale);
        kv.insert("alpha", self.alpha);
        kv.insert("feather", self.feather);
        kv.insert("travel_start", self.time_travel.start_frac);
        kv.insert("travel_end", self.time_travel.end_frac);
        kv.insert("travel_repeats", self.time_travel.repeats);
        kv.insert("travel_bypass", self.time_travel.bypass_renoise);
        kv.insert(
            "priority_view",
            self.priority.view.map_or("none".to_string(), |v| v.to_string()),
        );
        kv.insert("priority_frac", self.priority.last_frac);
        kv.insert("seed", self.seed);
        kv.insert(
            "depth",
            self.depth.map_or("auto".to_string(), |d| d.to_string()),
        );
        kv.insert("sample_mode", self.sample_mode.name());
        if let Some(s) = &self.schedule {
            let joined: Vec<String> = s.iter().map(f32::to_string).collect();
            kv.insert("schedule", joined.join(","));
        }
        kv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_window() {
        let cfg = SyncConfig::default();
        assert_eq!(cfg.timesteps().len(), 31);
        assert!(!cfg.time_travel.covers(5, 30));
        assert!(cfg.time_travel.covers(6, 30));
        assert!(cfg.time_travel.covers(23, 30));
        assert!(!cfg.time_travel.covers(24, 30));
        assert_eq!(cfg.time_travel.extra_passes(30), 18);
        let p = Priority {
            view: Some(1),
            last_frac: 0.2,
        };
        assert_eq!(p.steps(30), 6);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = SyncConfig {
            steps: 12,
            cfg_scale: 1.5,
            seed: 99,
            depth: Some(3),
            schedule: Some(vec![0.0, 0.25, 1.0]),
            ..SyncConfig::default()
        };
        cfg.priority.view = Some(1);
        cfg.time_travel.bypass_renoise = true;
        let back = SyncConfig::parse(&cfg.to_kv().to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SyncConfig::parse("travel_start = 0.9\ntravel_end = 0.5").is_err());
        assert!(SyncConfig::parse("priority_frac = 1.0").is_err());
        assert!(SyncConfig::parse("schedule = 0, 0.5, 0.4, 1").is_err());
        assert!(SyncConfig::parse("bogus = 1").is_err());
        assert!(SyncConfig::parse("steps = 0").is_err());
        assert!(SyncConfig::parse("seed = 7\nsample_mode = trilinear").is_ok());
    }
}
