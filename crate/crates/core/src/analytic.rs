//! Closed-form average and effective sum-rates.
//!
//! All rates are sums over the `G·Q` users served in one stage, in nats per
//! channel use. MF and RZF rates are large-`L` deterministic equivalents at a
//! fixed stream ratio `c = Q/L`; the ZF rate is exact for any `Q < L`.
//!
//! RZF analysis rests on the Stieltjes transform of the Marchenko–Pastur law
//! with ratio `c`,
//!
//! ```text
//! S_c(z) = ½ ( √((1−c)²/z² + 2(1+c)/z + 1) + (1−c)/z − 1 ),
//! ```
//!
//! the almost-sure limit of `(1/L) Tr{(z I + (1/L) Hᴴ H)⁻¹}`. With the
//! regularization `α = L/P_t` every RZF constant is read off `S_c` and its
//! derivative at `z = 1/P_t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::precoding::Precoder;
use crate::scheme::OperatingPoint;

/// Negative square-root arguments closer to zero than this are rounding
/// noise and are clamped.
const SQRT_GUARD: f64 = 1e-12;

fn guarded_sqrt(x: f64) -> f64 {
    if x < 0.0 && x > -SQRT_GUARD {
        0.0
    } else {
        x.sqrt()
    }
}

/// Operating point of a closed-form evaluation. `Ω = P_t/(P_t + G)` is
/// always derived here, never supplied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateInputs {
    groups: usize,
    antennas: usize,
    streams: f64,
    ratio: f64,
    power: f64,
    omega: f64,
}

impl RateInputs {
    /// Integer operating point `(G, Q)` with `L` antennas.
    pub fn new(groups: usize, streams: usize, antennas: usize, power: f64) -> Result<Self> {
        if streams == 0 {
            return Err(Error::InvalidParameter("Q must be positive".into()));
        }
        let mut inputs = Self::with_ratio(groups, streams as f64 / antennas.max(1) as f64, antennas, power)?;
        inputs.streams = streams as f64;
        Ok(inputs)
    }

    /// Continuous stream ratio `c`, as used by the optimizers.
    pub fn with_ratio(groups: usize, ratio: f64, antennas: usize, power: f64) -> Result<Self> {
        if groups == 0 || antennas == 0 {
            return Err(Error::InvalidParameter("G and L must be positive".into()));
        }
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::InvalidParameter(format!("stream ratio c = {ratio}")));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::InvalidParameter(format!("power P_t = {power}")));
        }
        Ok(RateInputs {
            groups,
            antennas,
            streams: ratio * antennas as f64,
            ratio,
            power,
            omega: power / (power + groups as f64),
        })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// `Q`; fractional when built from a continuous ratio.
    pub fn streams(&self) -> f64 {
        self.streams
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

impl TryFrom<&OperatingPoint> for RateInputs {
    type Error = Error;

    fn try_from(p: &OperatingPoint) -> Result<Self> {
        RateInputs::new(p.groups, p.streams, p.antennas, p.power)
    }
}

/// MF average sum-rate `c·G·L·ln(1 + Ω/c)`. Any `c > 0` is allowed.
pub fn mf_rate(inputs: &RateInputs) -> f64 {
    let c = inputs.ratio;
    c * inputs.groups as f64 * inputs.antennas as f64 * (inputs.omega / c).ln_1p()
}

/// Cacheless MF sum-rate with `c'L` streams; identical to [`mf_rate`] at
/// `G = 1`.
pub fn mf_cacheless(c_prime: f64, antennas: usize, power: f64) -> f64 {
    let omega = power / (power + 1.0);
    c_prime * antennas as f64 * (omega / c_prime).ln_1p()
}

/// ZF average sum-rate `Q·G·ln(1 + (P_t/G)(1/c − 1))`, exact for `c < 1`.
pub fn zf_rate(inputs: &RateInputs) -> Result<f64> {
    let c = inputs.ratio;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::COutOfRange(c));
    }
    let g = inputs.groups as f64;
    Ok(inputs.streams * g * (inputs.power / g * (1.0 / c - 1.0)).ln_1p())
}

/// Stieltjes transform `S_c(z)` of the Marchenko–Pastur law.
///
/// Evaluated as `(√D − (z + c − 1))/(2z)` with `D = (z + c − 1)² + 4z`, or
/// its rationalized form `2/(√D + z + c − 1)` when `z + c > 1`, so that
/// neither branch subtracts nearly equal terms.
pub fn stieltjes(c: f64, z: f64) -> f64 {
    let t = z + c - 1.0;
    let root = guarded_sqrt(t * t + 4.0 * z);
    if t > 0.0 {
        2.0 / (root + t)
    } else {
        (root - t) / (2.0 * z)
    }
}

/// `∂S_c/∂z`.
pub fn stieltjes_deriv(c: f64, z: f64) -> f64 {
    let disc = c * c + 2.0 * c * (z - 1.0) + (z + 1.0).powi(2);
    let num = -c * c - c * (z - 2.0) - z - 1.0;
    0.5 * (num / (z * z * guarded_sqrt(disc)) - (1.0 - c) / (z * z))
}

/// `z·S² + (z + c − 1)·S − 1`, which vanishes at `S = S_c(z)`.
pub fn stieltjes_fixed_point_residual(c: f64, z: f64, s: f64) -> f64 {
    z * s * s + (z + c - 1.0) * s - 1.0
}

/// Deterministic equivalents of the RZF SINR ingredients at `α = L/P_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RzfDeterministics {
    pub ratio: f64,
    /// Limit of `A = h_kᵀ(αI + H₋ₖᴴH₋ₖ)⁻¹h_k*`; equals `S_c(1/P_t)`.
    pub a: f64,
    /// `S_c(1/P_t)`.
    pub s: f64,
    /// `∂S_c/∂z` at `1/P_t`.
    pub ds: f64,
    /// Limit of `B = h_kᵀ(αI + H₋ₖᴴH₋ₖ)⁻¹H₋ₖᴴH₋ₖ(αI + H₋ₖᴴH₋ₖ)⁻¹h_k*`.
    pub b: f64,
    /// Limit of the squared power factor `ρ²`.
    pub p_sq: f64,
}

impl RzfDeterministics {
    /// `c > 1` lies outside the regime the asymptotics were derived for.
    pub fn is_overloaded(&self) -> bool {
        self.ratio > 1.0
    }

    /// Deterministic per-user SINR with `groups` groups per stage.
    pub fn sinr(&self, groups: usize, power: f64) -> f64 {
        let g = groups as f64;
        self.a * self.a * self.p_sq / g / ((1.0 + self.a).powi(2) + power / g)
    }
}

pub fn rzf_deterministics(c: f64, power: f64) -> Result<RzfDeterministics> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!("stream ratio c = {c}")));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidParameter(format!("power P_t = {power}")));
    }
    let z = 1.0 / power;
    let s = stieltjes(c, z);
    let ds = stieltjes_deriv(c, z);
    // b = S + z·S', rewritten through the fixed-point equation as
    // 2zcS / (√D (√D + z − c + 1)); the sum form cancels to nothing at low
    // power, where b ≈ c·P_t².
    let t = z + c - 1.0;
    let root = guarded_sqrt(t * t + 4.0 * z);
    let b = 2.0 * z * c * s / (root * (root + z - c + 1.0));
    if !(b > 0.0) {
        return Err(Error::NonPositiveB(b));
    }
    Ok(RzfDeterministics {
        ratio: c,
        a: s,
        s,
        ds,
        b,
        p_sq: power / b,
    })
}

/// `a` written directly in `P_t`: `½[√((1−c)²P² + 2(1+c)P + 1) + (1−c)P − 1]`.
pub fn rzf_a_direct(c: f64, power: f64) -> f64 {
    let p = power;
    0.5 * (guarded_sqrt((1.0 - c).powi(2) * p * p + 2.0 * (1.0 + c) * p + 1.0) + (1.0 - c) * p - 1.0)
}

/// `p²` written directly in `P_t`, independent of the `b` route.
pub fn rzf_power_direct(c: f64, power: f64) -> f64 {
    let p = power;
    let root = guarded_sqrt(p * p * (c - 1.0).powi(2) + 2.0 * (c + 1.0) * p + 1.0);
    let correction = p / 2.0 * ((p * (c - 1.0).powi(2) + c + 1.0) / root + 1.0 - c);
    p / (rzf_a_direct(c, p) - correction)
}

/// RZF average sum-rate `c·G·L·ln(1 + (a²p²/G)/((1+a)² + P_t/G))`.
pub fn rzf_rate(inputs: &RateInputs) -> Result<f64> {
    if inputs.power == 0.0 {
        return Ok(0.0);
    }
    let det = rzf_deterministics(inputs.ratio, inputs.power)?;
    let sinr = det.sinr(inputs.groups, inputs.power);
    Ok(inputs.ratio * inputs.groups as f64 * inputs.antennas as f64 * sinr.ln_1p())
}

/// Average sum-rate of `precoder`, before CSI costs.
pub fn raw_rate(precoder: Precoder, inputs: &RateInputs) -> Result<f64> {
    match precoder {
        Precoder::Mf => Ok(mf_rate(inputs)),
        Precoder::Zf => zf_rate(inputs),
        Precoder::Rzf => rzf_rate(inputs),
    }
}

/// TDD pilot overhead: `β_tot` pilot resources per user and coherence block
/// of `T_c · W_c` resources.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CsiCostModel {
    pub beta_tot: f64,
    /// Seconds.
    pub coherence_time: f64,
    /// Hertz.
    pub coherence_bandwidth: f64,
}

impl CsiCostModel {
    pub fn new(beta_tot: f64, coherence_time: f64, coherence_bandwidth: f64) -> Result<Self> {
        if !(beta_tot.is_finite() && beta_tot >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta_tot = {beta_tot}")));
        }
        let block = coherence_time * coherence_bandwidth;
        if !(block.is_finite() && block > 0.0 && coherence_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coherence block T_c * W_c = {block} must be positive"
            )));
        }
        Ok(CsiCostModel {
            beta_tot,
            coherence_time,
            coherence_bandwidth,
        })
    }

    /// `β_tot = 10`, `T_c = 40 ms`, `W_c = 300 kHz`.
    pub fn reference() -> Self {
        CsiCostModel {
            beta_tot: 10.0,
            coherence_time: 0.04,
            coherence_bandwidth: 300e3,
        }
    }

    /// No pilot cost.
    pub fn free() -> Self {
        CsiCostModel {
            beta_tot: 0.0,
            coherence_time: 1.0,
            coherence_bandwidth: 1.0,
        }
    }

    /// `ζ = β_tot·G·L/(T_c·W_c)`. The overhead fraction of a stage with
    /// `Q = cL` streams is `c·ζ`; `ζ` itself does not depend on `Q`.
    pub fn zeta(&self, groups: usize, antennas: usize) -> f64 {
        self.beta_tot * groups as f64 * antennas as f64 / (self.coherence_time * self.coherence_bandwidth)
    }
}

pub fn csi_zeta(model: &CsiCostModel, groups: usize, antennas: usize) -> f64 {
    model.zeta(groups, antennas)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    ClosedForm,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub precoder: Precoder,
    pub groups: usize,
    pub streams: f64,
    pub antennas: usize,
    pub snr_db: f64,
    pub avg_sum_rate_nats: f64,
    pub zeta: f64,
    pub effective_rate_nats: f64,
    pub source: RateSource,
}

/// `(1 − c·ζ)`, rejecting overheads that exceed the block.
pub fn overhead_factor(ratio: f64, zeta: f64) -> Result<f64> {
    let load = ratio * zeta;
    if load > 1.0 {
        return Err(Error::CsiOverheadExceedsBlock(load));
    }
    Ok(1.0 - load)
}

/// Effective rate `(1 − c·ζ)·R̄` with an explicit `ζ`.
pub fn effective_rate_with_zeta(precoder: Precoder, inputs: &RateInputs, zeta: f64) -> Result<RateReport> {
    let factor = overhead_factor(inputs.ratio, zeta)?;
    let raw = raw_rate(precoder, inputs)?;
    Ok(RateReport {
        precoder,
        groups: inputs.groups,
        streams: inputs.streams,
        antennas: inputs.antennas,
        snr_db: 10.0 * inputs.power.log10(),
        avg_sum_rate_nats: raw,
        zeta,
        effective_rate_nats: factor * raw,
        source: RateSource::ClosedForm,
    })
}

pub fn effective_rate(precoder: Precoder, inputs: &RateInputs, model: &CsiCostModel) -> Result<RateReport> {
    effective_rate_with_zeta(precoder, inputs, model.zeta(inputs.groups, inputs.antennas))
}

/// Effective gain `ℛ̄(G, Q) / ℛ̄(1, Q')` of cache-aided over cacheless
/// transmission with the same antennas and power.
pub fn effective_gain(
    precoder: Precoder,
    groups: usize,
    streams: usize,
    streams_cacheless: usize,
    antennas: usize,
    power: f64,
    model: &CsiCostModel,
) -> Result<f64> {
    let cached = effective_rate(precoder, &RateInputs::new(groups, streams, antennas, power)?, model)?;
    let cacheless = effective_rate(
        precoder,
        &RateInputs::new(1, streams_cacheless, antennas, power)?,
        model,
    )?;
    if cacheless.effective_rate_nats == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(cached.effective_rate_nats / cacheless.effective_rate_nats)
}
