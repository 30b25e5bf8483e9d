//! Command-line settings. A config file uses the same keys as the long flags;
//! flags given on the command line win.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use topoprep::experiment::{ExperimentConfig, Family, ModelName, ProbeKind, Sign, TimeList};
use topoprep_service::api::{SweffRequest, TomographyRequest};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_ANGLES: usize = 24;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub model: Option<String>,
    pub family: Option<String>,
    #[serde(rename = "T")]
    pub total_time: Option<TimeList>,
    pub dt: Option<f64>,
    /// disc: points per axis; theta: number of angles; majorana: longest chain
    pub grid: Option<usize>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub server: Option<String>,
    /// perturbation direction for `sweff`
    pub field: Option<[f64; 3]>,
    /// `simulate` point: `[theta]` or `[a, b]`
    pub point: Option<Vec<f64>>,
    pub sign: Option<String>,
    pub figures: Option<Vec<String>>,
    pub threads: Option<usize>,
    pub samples: Option<usize>,
    pub probes: Option<Vec<ProbeKind>>,
}

impl Settings {
    pub fn from_toml(src: &str) -> Result<Self> {
        Ok(toml::from_str(src)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&src).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }

    /// Fields set in `self` override those in `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            model: self.model.or(base.model),
            family: self.family.or(base.family),
            total_time: self.total_time.or(base.total_time),
            dt: self.dt.or(base.dt),
            grid: self.grid.or(base.grid),
            eps: self.eps.or(base.eps),
            out: self.out.or(base.out),
            server: self.server.or(base.server),
            field: self.field.or(base.field),
            point: self.point.or(base.point),
            sign: self.sign.or(base.sign),
            figures: self.figures.or(base.figures),
            threads: self.threads.or(base.threads),
            samples: self.samples.or(base.samples),
            probes: self.probes.or(base.probes),
        }
    }

    pub fn model(&self) -> Result<ModelName> {
        match &self.model {
            Some(m) => Ok(ModelName::parse(m)?),
            None => bail!("no model given (--model or `model` in the config file)"),
        }
    }

    fn family(&self) -> Result<Family> {
        Ok(Family::parse(self.family.as_deref().unwrap_or("disc_pm"))?)
    }

    fn sign(&self) -> Result<Sign> {
        match self.sign.as_deref().unwrap_or("minus") {
            "minus" | "-" => Ok(Sign::Minus),
            "plus" | "+" => Ok(Sign::Plus),
            other => bail!("unknown sign {other:?}"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("topoprep-out"))
    }

    fn base_config(&self) -> Result<ExperimentConfig> {
        let model = self.model()?;
        let family = self.family()?;
        let t = self.total_time.clone().unwrap_or(TimeList::One(model.reference_time()));
        let mut cfg = ExperimentConfig::new(model, family, 1.0, self.dt.unwrap_or(DEFAULT_DT));
        cfg.total_time = t;
        cfg.out = self.out.clone();
        cfg.threads = self.threads;
        if let Some(s) = self.samples {
            cfg.samples = s;
        }
        cfg.probes = match &self.probes {
            Some(p) => p.clone(),
            None => default_probes(model),
        };
        Ok(cfg)
    }

    /// Config for a grid scan.
    pub fn scan_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.base_config()?;
        if cfg.model == ModelName::Majorana {
            if let Some(g) = self.grid {
                cfg.chain_lengths = (2..=g).step_by(2).collect();
            }
        } else if cfg.family == Family::Theta {
            let n = self.grid.unwrap_or(DEFAULT_ANGLES).max(1);
            cfg.angles = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
        } else {
            if let Some(g) = self.grid {
                cfg.disc_resolution = g;
            }
            if let Some(s) = &self.sign {
                cfg.signs = match s.as_str() {
                    "both" => vec![Sign::Plus, Sign::Minus],
                    _ => vec![self.sign()?],
                };
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for a single trajectory.
    pub fn simulate_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.base_config()?;
        let point = self.point.clone().unwrap_or_default();
        if cfg.model == ModelName::Majorana {
            cfg.chain_lengths = vec![self.grid.unwrap_or(6)];
        } else if cfg.family == Family::Theta {
            match point.as_slice() {
                [] => cfg.angles = vec![0.0],
                [theta] => cfg.angles = vec![*theta],
                _ => bail!("theta family takes one coordinate in --point"),
            }
        } else {
            match point.as_slice() {
                [] => cfg.disc_points = vec![[0.0, 0.0]],
                [a, b] => cfg.disc_points = vec![[*a, *b]],
                _ => bail!("disc families take two coordinates in --point"),
            }
            cfg.signs = vec![self.sign()?];
        }
        if cfg.model != ModelName::Majorana && !cfg.probes.contains(&ProbeKind::Instant) {
            cfg.probes.push(ProbeKind::Instant);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweff_request(&self) -> Result<SweffRequest> {
        let model = self.model()?;
        Ok(SweffRequest {
            model,
            field: self.field.unwrap_or([0.0, 0.0, -1.0]),
            eps: self.eps.unwrap_or(1e-3),
            l_max: 6,
            chain_lengths: match self.grid {
                Some(g) => (2..=g).step_by(2).collect(),
                None => vec![4, 6, 8],
            },
            g: 0.0,
        })
    }

    pub fn tomography_request(&self) -> Result<TomographyRequest> {
        let total_time = match &self.total_time {
            None => None,
            Some(t) => match t.values().as_slice() {
                [t] => Some(*t),
                _ => bail!("tomography takes a single total time"),
            },
        };
        Ok(TomographyRequest { model: self.model()?, total_time, dt: self.dt.unwrap_or(DEFAULT_DT) })
    }
}

fn default_probes(model: ModelName) -> Vec<ProbeKind> {
    match model {
        ModelName::Majorana => vec![ProbeKind::EpsAdia],
        ModelName::Toric => vec![ProbeKind::EpsAdia, ProbeKind::OverlapRef, ProbeKind::Logical],
        _ => vec![ProbeKind::EpsAdia, ProbeKind::OverlapRef],
    }
}

/// `"40"` or `"40,80,120"`.
pub fn parse_times(s: &str) -> Result<TimeList, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    Ok(match v.as_slice() {
        [t] => TimeList::One(*t),
        _ => TimeList::Many(v),
    })
}

pub fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml("model = \"toric\"\nT = [10, 20]\ndt = 0.05\ngrid = 5\n").unwrap();
        let flags = Settings { dt: Some(0.2), ..Default::default() };
        let s = flags.over(file);
        assert_eq!(s.model.as_deref(), Some("toric"));
        assert_eq!(s.dt, Some(0.2));
        assert_eq!(s.total_time, Some(TimeList::Many(vec![10.0, 20.0])));
        let cfg = s.scan_config().unwrap();
        assert_eq!(cfg.disc_resolution, 5);
        assert_eq!(cfg.total_time.values(), vec![10.0, 20.0]);
    }

    #[test]
    fn settings_round_trip() {
        let s = Settings {
            model: Some("doubled_fibonacci".into()),
            total_time: Some(TimeList::One(320.0)),
            field: Some([0.0, 0.0, 1.0]),
            figures: Some(vec!["fib_instant".into()]),
            ..Default::default()
        };
        assert_eq!(Settings::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Settings::from_toml("modle = \"toric\"").is_err());
    }

    #[test]
    fn simulate_uses_one_point() {
        let s = Settings { model: Some("doubled_semion".into()), point: Some(vec![0.1, 0.2]), sign: Some("plus".into()), ..Default::default() };
        let cfg = s.simulate_config().unwrap();
        assert_eq!(cfg.grid().len(), 1);
        assert_eq!(cfg.total_time.values(), vec![120.0]);
        assert!(cfg.probes.contains(&ProbeKind::Instant));
    }

    #[test]
    fn theta_grid_spans_the_circle() {
        let s = Settings { model: Some("toric".into()), family: Some("theta".into()), grid: Some(8), ..Default::default() };
        let cfg = s.scan_config().unwrap();
        assert_eq!(cfg.angles.len(), 8);
        assert!((cfg.angles[4] - PI).abs() < 1e-15);
    }

    #[test]
    fn list_parsers() {
        assert_eq!(parse_times("40").unwrap(), TimeList::One(40.0));
        assert_eq!(parse_times("1, 2").unwrap(), TimeList::Many(vec![1.0, 2.0]));
        assert_eq!(parse_floats::<3>("1,0,0").unwrap(), [1.0, 0.0, 0.0]);
        assert!(parse_floats::<3>("1,0").is_err());
    }
}
