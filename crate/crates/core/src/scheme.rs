//! System configuration and the placement/delivery combinatorics of vector
//! coded caching.
//!
//! Users are split into `Λ` groups of `B = K/Λ` users. Group `g` (0-based)
//! holds the users `{b·Λ + g : 0 ≤ b < B}` and every user of a group caches
//! the same content. Each file is split into `C(Λ, Λγ)` subfiles labelled by
//! the `Λγ`-subsets of `[Λ]`; group `g` caches every subfile whose label
//! contains `g`.
//!
//! A delivery round walks over all `G = Λγ + 1` subsets `Ψ` of the groups.
//! In the stage for `Ψ`, each `ψ ∈ Ψ` receives the subfile labelled
//! `Ψ \ {ψ}`, which every other group of the stage already holds.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precoding::Precoder;

const SNAP_TOLERANCE: f64 = 1e-9;

/// Normalized cache size `γ = M/N`, held as an exact rational in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gamma(Ratio<u64>);

impl Gamma {
    pub const ZERO: Gamma = Gamma(Ratio::new_raw(0, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidParameter("gamma denominator is zero".into()));
        }
        let ratio = Ratio::new(numer, denom);
        if ratio >= Ratio::from_integer(1) {
            return Err(Error::GammaOutOfRange {
                gamma: format!("{numer}/{denom}"),
            });
        }
        Ok(Gamma(ratio))
    }

    /// Snaps a floating-point cache size onto the nearest rational with a
    /// denominator no larger than `max_denom` (normally `Λ`).
    ///
    /// Values farther than `1e-9` from every such rational cannot make `Λγ`
    /// an integer and are rejected.
    pub fn from_f64(value: f64, max_denom: usize) -> Result<Self> {
        if !value.is_finite() || !(0.0..1.0).contains(&value) {
            return Err(Error::GammaOutOfRange {
                gamma: value.to_string(),
            });
        }
        for denom in 1..=max_denom.max(1) as u64 {
            let numer = (value * denom as f64).round();
            if (value - numer / denom as f64).abs() <= SNAP_TOLERANCE {
                return Gamma::new(numer as u64, denom);
            }
        }
        Err(Error::NonIntegerLambdaGamma {
            lambda: max_denom,
            gamma: value.to_string(),
        })
    }

    /// Parses either an exact fraction (`"1/3"`) or a decimal (`"0.25"`).
    pub fn parse(text: &str, max_denom: usize) -> Result<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::InvalidParameter(format!("bad gamma fraction {text:?}")))
            };
            return Gamma::new(parse(n)?, parse(d)?);
        }
        let value = f64::from_str(text)
            .map_err(|_| Error::InvalidParameter(format!("bad gamma {text:?}")))?;
        Gamma::from_f64(value, max_denom)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `Λγ`, if it is an integer.
    pub fn scaled_by(&self, lambda: usize) -> Option<usize> {
        let product = self.0 * Ratio::from_integer(lambda as u64);
        product.is_integer().then(|| product.to_integer() as usize)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.numer() == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

/// Raw system parameters as supplied by the user.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    /// `L`, transmit antennas.
    pub antennas: usize,
    /// Total transmit SNR in dB (unit noise variance).
    pub snr_db: f64,
    /// `Λ`, number of distinct cache states.
    pub cache_states: usize,
    pub gamma: Gamma,
    /// `K`, total number of users.
    pub users: usize,
    /// `Q`, streams (users) served per group.
    pub streams: usize,
    pub precoder: Precoder,
}

/// A configuration that passed [`validate`], with its derived quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedScheme {
    config: SchemeConfig,
    groups_per_stage: usize,
    users_per_group: usize,
    stream_ratio: f64,
    power: f64,
    subpacketization: u128,
}

impl ValidatedScheme {
    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    /// `G = Λγ + 1`.
    pub fn groups_per_stage(&self) -> usize {
        self.groups_per_stage
    }

    /// `B = K / Λ`.
    pub fn users_per_group(&self) -> usize {
        self.users_per_group
    }

    /// `c = Q / L`.
    pub fn stream_ratio(&self) -> f64 {
        self.stream_ratio
    }

    /// Linear transmit power `P_t = 10^(snr_db / 10)`.
    pub fn power(&self) -> f64 {
        self.power
    }

    /// `C(Λ, Λγ)`.
    pub fn subpacketization(&self) -> u128 {
        self.subpacketization
    }

    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint {
            groups: self.groups_per_stage,
            streams: self.config.streams,
            antennas: self.config.antennas,
            power: self.power,
        }
    }
}

/// The `(G, Q)` operating point of one transmission stage, which is all the
/// physical layer needs to know about a scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub groups: usize,
    pub streams: usize,
    pub antennas: usize,
    /// Linear total transmit power.
    pub power: f64,
}

impl OperatingPoint {
    pub fn stream_ratio(&self) -> f64 {
        self.streams as f64 / self.antennas as f64
    }
}

impl From<&ValidatedScheme> for OperatingPoint {
    fn from(scheme: &ValidatedScheme) -> Self {
        scheme.operating_point()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Checks a configuration and derives `G`, `B`, `c`, `P_t` and the
/// subpacketization.
pub fn validate(config: &SchemeConfig) -> Result<ValidatedScheme> {
    let SchemeConfig {
        antennas,
        snr_db,
        cache_states,
        gamma,
        users,
        streams,
        precoder,
    } = *config;
    for (name, value) in [
        ("L", antennas),
        ("lambda", cache_states),
        ("K", users),
        ("Q", streams),
    ] {
        if value == 0 {
            return Err(Error::InvalidParameter(format!("{name} must be positive")));
        }
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db = {snr_db}")));
    }
    let cached = gamma
        .scaled_by(cache_states)
        .ok_or_else(|| Error::NonIntegerLambdaGamma {
            lambda: cache_states,
            gamma: gamma.to_string(),
        })?;
    if users % cache_states != 0 {
        return Err(Error::KNotMultipleOfLambda {
            users,
            lambda: cache_states,
        });
    }
    let users_per_group = users / cache_states;
    if streams > users_per_group {
        return Err(Error::QExceedsGroupSize {
            streams,
            group_size: users_per_group,
        });
    }
    if matches!(precoder, Precoder::Zf | Precoder::Rzf) && streams > antennas {
        return Err(Error::QExceedsAntennas { streams, antennas });
    }
    let subpacketization = binomial(cache_states, cached).ok_or_else(|| {
        Error::InvalidParameter(format!("C({cache_states}, {cached}) overflows"))
    })?;
    Ok(ValidatedScheme {
        config: config.clone(),
        groups_per_stage: cached + 1,
        users_per_group,
        stream_ratio: streams as f64 / antennas as f64,
        power: db_to_linear(snr_db),
        subpacketization,
    })
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All `k`-subsets of `{0, .., n-1}` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // rightmost position that can still be advanced
        let Some(pos) = (0..k).rev().find(|&i| current[i] < n - k + i) else {
            return out;
        };
        current[pos] += 1;
        for i in pos + 1..k {
            current[i] = current[i - 1] + 1;
        }
    }
}

/// What group `group` receives within a stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub group: usize,
    /// Label `T = Ψ \ {ψ}` of the delivered subfile (sorted, 0-based groups).
    pub label: Vec<usize>,
    /// Users of the group served in this stage.
    pub users: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    /// `Ψ`, the simultaneously served groups.
    pub groups: Vec<usize>,
    pub deliveries: Vec<Delivery>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub index: usize,
    pub stages: Vec<Stage>,
}

/// Stage schedule of a scheme: `ceil(B/Q)` rounds of `C(Λ, G)` stages each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeliveryPlan {
    pub cache_states: usize,
    pub groups_per_stage: usize,
    pub rounds: Vec<Round>,
}

impl DeliveryPlan {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    pub fn stages_per_round(&self) -> usize {
        self.rounds.first().map_or(0, |r| r.stages.len())
    }
}

/// Users of group `group` under the canonical assignment `{b·Λ + g}`.
pub fn group_members(group: usize, cache_states: usize, users_per_group: usize) -> Vec<usize> {
    (0..users_per_group)
        .map(|b| b * cache_states + group)
        .collect()
}

/// Builds the deterministic stage schedule; stages are in lexicographic
/// order of `Ψ`. When `Q` does not divide `B`, the last round serves the
/// remaining users with the same stage structure.
pub fn build_delivery_plan(scheme: &ValidatedScheme) -> DeliveryPlan {
    let lambda = scheme.config.cache_states;
    let g = scheme.groups_per_stage;
    let q = scheme.config.streams;
    let b = scheme.users_per_group;
    let subsets = k_subsets(lambda, g);
    let round_count = b.div_ceil(q);

    let rounds = (0..round_count)
        .map(|r| {
            let batch = r * q..((r + 1) * q).min(b);
            let stages = subsets
                .iter()
                .map(|psi| Stage {
                    groups: psi.clone(),
                    deliveries: psi
                        .iter()
                        .map(|&served| Delivery {
                            group: served,
                            label: psi.iter().copied().filter(|&x| x != served).collect(),
                            users: batch.clone().map(|bi| bi * lambda + served).collect(),
                        })
                        .collect(),
                })
                .collect();
            Round { index: r, stages }
        })
        .collect();

    DeliveryPlan {
        cache_states: lambda,
        groups_per_stage: g,
        rounds,
    }
}

/// Largest coded caching gain `G = Λγ + 1` whose subpacketization
/// `C(Λ, Λγ)` fits in `budget`, together with the smallest `Λ` reaching it.
pub fn max_gain(gamma: Gamma, budget: u128) -> Result<(usize, usize)> {
    if gamma.numer() == 0 {
        return Err(Error::GammaOutOfRange {
            gamma: gamma.to_string(),
        });
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let step = gamma.denom() as usize;
    let mut best = None;
    // C(kd, kn) grows strictly with k, so stop at the first overshoot.
    for k in 1.. {
        let lambda = k * step;
        let cached = k * gamma.numer() as usize;
        match binomial(lambda, cached) {
            Some(c) if c <= budget => best = Some((lambda, cached + 1)),
            _ => break,
        }
    }
    best.ok_or(Error::NoFeasibleLambda { budget })
}
