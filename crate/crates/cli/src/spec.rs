//! Experiment specifications: partial layers from presets, JSON files and
//! flags, merged with later layers winning and then resolved into a
//! checked [`ExperimentSpec`].
//!
//! Config files are JSON objects with any of the keys
//!
//! ```text
//! L, Q, G, K, lambda, gamma, snr_db, beta, tc, wc, zeta, precoder,
//! q_prime, trials, seed, out, measure, sweep {axis, start, stop, step}
//! ```
//!
//! `gamma` is a number or a fraction string such as `"1/3"`; `precoder` is
//! `mf`, `zf`, `rzf` or `all`; `axis` is `snr_db`, `Q`, `L` or `G`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ccdl::scheme::binomial;
use ccdl::{CsiCostModel, Gamma, Precoder};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Rate,
    Simulate,
    Optimize,
    Gain,
    Sweep,
}

/// What a single sweep point computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Rate,
    Simulate,
    Optimize,
    Gain,
}

impl FromStr for Measure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "rate" => Ok(Measure::Rate),
            "simulate" => Ok(Measure::Simulate),
            "optimize" => Ok(Measure::Optimize),
            "gain" => Ok(Measure::Gain),
            _ => Err(CliError::InvalidConfig(format!(
                "unknown measure '{s}' (expected rate, simulate, optimize or gain)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "snr_db")]
    SnrDb,
    Q,
    L,
    G,
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "snr_db" => Ok(Axis::SnrDb),
            "Q" => Ok(Axis::Q),
            "L" => Ok(Axis::L),
            "G" => Ok(Axis::G),
            _ => Err(CliError::InvalidConfig(format!(
                "unknown sweep axis '{s}' (expected snr_db, Q, L or G)"
            ))),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::SnrDb => "snr_db",
            Axis::Q => "Q",
            Axis::L => "L",
            Axis::G => "G",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PrecoderChoice {
    One(Precoder),
    All,
}

impl PrecoderChoice {
    pub fn precoders(self) -> Vec<Precoder> {
        match self {
            PrecoderChoice::One(p) => vec![p],
            PrecoderChoice::All => Precoder::ALL.to_vec(),
        }
    }
}

impl FromStr for PrecoderChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(PrecoderChoice::All);
        }
        s.parse::<Precoder>()
            .map(PrecoderChoice::One)
            .map_err(|_| CliError::InvalidConfig(format!("unknown precoder '{s}' (expected mf, zf, rzf or all)")))
    }
}

impl TryFrom<String> for PrecoderChoice {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<PrecoderChoice> for String {
    fn from(p: PrecoderChoice) -> String {
        match p {
            PrecoderChoice::One(p) => p.to_string(),
            PrecoderChoice::All => "all".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepLayer {
    pub axis: Option<Axis>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

/// Partially specified experiment; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecLayer {
    #[serde(rename = "L")]
    pub antennas: Option<usize>,
    #[serde(rename = "Q")]
    pub streams: Option<usize>,
    #[serde(rename = "G")]
    pub groups: Option<usize>,
    #[serde(rename = "K")]
    pub users: Option<usize>,
    pub lambda: Option<usize>,
    pub gamma: Option<GammaValue>,
    pub snr_db: Option<f64>,
    pub beta: Option<f64>,
    pub tc: Option<f64>,
    pub wc: Option<f64>,
    pub zeta: Option<f64>,
    pub precoder: Option<PrecoderChoice>,
    pub q_prime: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub measure: Option<Measure>,
    pub sweep: Option<SweepLayer>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl SpecLayer {
    /// `self` with every field that `top` sets replaced by `top`'s value.
    pub fn overlay(mut self, top: SpecLayer) -> SpecLayer {
        overlay_fields!(self, top; antennas, streams, groups, users, lambda, gamma, snr_db, beta, tc, wc,
            zeta, precoder, q_prime, trials, seed, out, measure);
        if let Some(s) = top.sweep {
            let mut base = self.sweep.unwrap_or_default();
            overlay_fields!(base, s; axis, start, stop, step);
            self.sweep = Some(base);
        }
        self
    }

    pub fn from_json(text: &str) -> Result<SpecLayer, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::InvalidConfig(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<SpecLayer, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

pub const PRESETS: [&str; 4] = ["fig1", "fig2-L32", "fig2-L64", "fig3-L64"];

fn snr_sweep() -> SweepLayer {
    SweepLayer {
        axis: Some(Axis::SnrDb),
        start: Some(0.0),
        stop: Some(25.0),
        step: Some(1.0),
    }
}

/// Pilot cost of the reference system: `β_tot = 10`, `T_c = 40 ms`,
/// `W_c = 300 kHz`.
fn reference_csi(layer: SpecLayer) -> SpecLayer {
    let m = CsiCostModel::reference();
    SpecLayer {
        beta: Some(m.beta_tot),
        tc: Some(m.coherence_time),
        wc: Some(m.coherence_bandwidth),
        ..layer
    }
}

/// * `fig1`: rate against `Q` at 10 dB, `G = 5`, `L = 64`, all precoders.
/// * `fig2-L32`, `fig2-L64`: optimized gain against SNR at `G = 6`; ZF by
///   default, single points at 20 dB.
/// * `fig3-L64`: gain against SNR with `Q = Q' = 8`, `G = 6`, `L = 64`, all
///   precoders; single points at 15 dB.
pub fn preset(name: &str) -> Result<SpecLayer, CliError> {
    let layer = match name {
        "fig1" => SpecLayer {
            antennas: Some(64),
            groups: Some(5),
            snr_db: Some(10.0),
            precoder: Some(PrecoderChoice::All),
            measure: Some(Measure::Rate),
            sweep: Some(SweepLayer {
                axis: Some(Axis::Q),
                start: Some(1.0),
                stop: Some(63.0),
                step: Some(1.0),
            }),
            ..SpecLayer::default()
        },
        "fig2-L32" | "fig2-L64" => SpecLayer {
            antennas: Some(if name == "fig2-L32" { 32 } else { 64 }),
            groups: Some(6),
            snr_db: Some(20.0),
            precoder: Some(PrecoderChoice::One(Precoder::Zf)),
            measure: Some(Measure::Optimize),
            sweep: Some(snr_sweep()),
            ..SpecLayer::default()
        },
        "fig3-L64" => SpecLayer {
            antennas: Some(64),
            groups: Some(6),
            streams: Some(8),
            q_prime: Some(8),
            snr_db: Some(15.0),
            precoder: Some(PrecoderChoice::All),
            measure: Some(Measure::Gain),
            sweep: Some(snr_sweep()),
            ..SpecLayer::default()
        },
        other => return Err(CliError::UnknownPreset(other.to_string())),
    };
    Ok(reference_csi(layer))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    /// `start + i·step` for every `i` that stays within `stop`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// The cache configuration `(Λ, γ)` and, when known, the user count `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheSpec {
    pub cache_states: usize,
    pub gamma: Gamma,
    pub users: Option<usize>,
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    /// What each point computes; equals the command unless sweeping.
    pub measure: Measure,
    pub precoders: Vec<Precoder>,
    pub antennas: Option<usize>,
    pub streams: Option<usize>,
    pub streams_cacheless: Option<usize>,
    pub groups: Option<usize>,
    pub cache: Option<CacheSpec>,
    pub snr_db: Option<f64>,
    pub csi: CsiCostModel,
    /// Overrides `ζ = β·G·L/(T_c·W_c)` for the cache-aided system.
    pub zeta: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub sweep: Option<Sweep>,
}

/// One operating point of an experiment, before the precoder is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub antennas: usize,
    pub streams: Option<usize>,
    pub groups: usize,
    pub snr_db: f64,
}

pub const DEFAULT_TRIALS: usize = 1000;

impl ExperimentSpec {
    pub fn resolve(command: Command, layer: SpecLayer) -> Result<ExperimentSpec, CliError> {
        let measure = match command {
            Command::Rate => Measure::Rate,
            Command::Simulate => Measure::Simulate,
            Command::Optimize => Measure::Optimize,
            Command::Gain => Measure::Gain,
            Command::Sweep => layer.measure.unwrap_or(Measure::Rate),
        };
        let reference = CsiCostModel::reference();
        let csi = CsiCostModel::new(
            layer.beta.unwrap_or(reference.beta_tot),
            layer.tc.unwrap_or(reference.coherence_time),
            layer.wc.unwrap_or(reference.coherence_bandwidth),
        )?;
        if let Some(z) = layer.zeta {
            if !(z.is_finite() && z >= 0.0) {
                return Err(CliError::InvalidConfig(format!("zeta = {z} must be nonnegative")));
            }
        }

        let cache = match (layer.lambda, &layer.gamma) {
            (Some(lambda), Some(gamma)) => {
                if lambda == 0 {
                    return Err(CliError::InvalidConfig("lambda must be positive".into()));
                }
                let gamma = match gamma {
                    GammaValue::Number(v) => Gamma::from_f64(*v, lambda)?,
                    GammaValue::Text(t) => Gamma::parse(t, lambda)?,
                };
                let cached = gamma.scaled_by(lambda).ok_or_else(|| ccdl::Error::NonIntegerLambdaGamma {
                    lambda,
                    gamma: gamma.to_string(),
                })?;
                binomial(lambda, cached)
                    .ok_or_else(|| CliError::InvalidConfig(format!("C({lambda}, {cached}) overflows")))?;
                if let Some(k) = layer.users {
                    if k == 0 || k % lambda != 0 {
                        return Err(ccdl::Error::KNotMultipleOfLambda { users: k, lambda }.into());
                    }
                }
                Some(CacheSpec {
                    cache_states: lambda,
                    gamma,
                    users: layer.users,
                })
            }
            (Some(_), None) => return Err(CliError::MissingParameter("gamma")),
            (None, Some(_)) => return Err(CliError::MissingParameter("lambda")),
            (None, None) => {
                if layer.users.is_some() {
                    return Err(CliError::MissingParameter("lambda"));
                }
                None
            }
        };
        let groups = match (cache, layer.groups) {
            (Some(c), g) => {
                let derived = c.gamma.scaled_by(c.cache_states).expect("checked above") + 1;
                if g.is_some_and(|g| g != derived) {
                    return Err(CliError::InvalidConfig(format!(
                        "G = {} conflicts with lambda * gamma + 1 = {derived}",
                        g.unwrap_or_default()
                    )));
                }
                Some(derived)
            }
            (None, g) => g,
        };

        let sweep = if command == Command::Sweep {
            let s = layer.sweep.clone().unwrap_or_default();
            let sweep = Sweep {
                axis: s.axis.ok_or(CliError::MissingParameter("axis"))?,
                start: s.start.ok_or(CliError::MissingParameter("start"))?,
                stop: s.stop.ok_or(CliError::MissingParameter("stop"))?,
                step: s.step.ok_or(CliError::MissingParameter("step"))?,
            };
            if !(sweep.step.is_finite() && sweep.step > 0.0) {
                return Err(CliError::InvalidConfig(format!("sweep step {} must be positive", sweep.step)));
            }
            if !(sweep.start.is_finite() && sweep.stop.is_finite() && sweep.stop >= sweep.start) {
                return Err(CliError::InvalidConfig(format!(
                    "sweep range [{}, {}] is empty",
                    sweep.start, sweep.stop
                )));
            }
            if sweep.axis == Axis::G && cache.is_some() {
                return Err(CliError::InvalidConfig("a sweep over G cannot be combined with lambda/gamma".into()));
            }
            Some(sweep)
        } else {
            None
        };

        Ok(ExperimentSpec {
            command,
            measure,
            precoders: layer.precoder.unwrap_or(PrecoderChoice::All).precoders(),
            antennas: layer.antennas,
            streams: layer.streams,
            streams_cacheless: layer.q_prime,
            groups,
            cache,
            snr_db: layer.snr_db,
            csi,
            zeta: layer.zeta,
            trials: layer.trials.unwrap_or(DEFAULT_TRIALS),
            seed: layer.seed.unwrap_or(0),
            out: layer.out,
            sweep,
        })
    }

    /// `B = K/Λ`, when both are known.
    pub fn users_per_group(&self) -> Option<usize> {
        self.cache.and_then(|c| c.users.map(|k| k / c.cache_states))
    }

    /// Operating points in sweep order, or the single configured point.
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        let base = |snr_db: Option<f64>, antennas: Option<usize>, groups: Option<usize>, streams| {
            Ok(Point {
                antennas: antennas.ok_or(CliError::MissingParameter("L"))?,
                groups: groups.ok_or(CliError::MissingParameter("G"))?,
                snr_db: snr_db.ok_or(CliError::MissingParameter("snr_db"))?,
                streams,
            })
        };
        let Some(sweep) = self.sweep else {
            return Ok(vec![base(self.snr_db, self.antennas, self.groups, self.streams)?]);
        };
        sweep
            .values()
            .into_iter()
            .map(|v| {
                let count = || {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(CliError::InvalidConfig(format!("{} = {v} is not a positive integer", sweep.axis)))
                    }
                };
                match sweep.axis {
                    Axis::SnrDb => base(Some(v), self.antennas, self.groups, self.streams),
                    Axis::Q => base(self.snr_db, self.antennas, self.groups, Some(count()?)),
                    Axis::L => base(self.snr_db, Some(count()?), self.groups, self.streams),
                    Axis::G => base(self.snr_db, self.antennas, Some(count()?), self.streams),
                }
            })
            .collect()
    }
}
