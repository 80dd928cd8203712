//! Stream-ratio optimization of the effective sum-rate.
//!
//! `ζ = β_tot·G·L/(T_c·W_c)` does not depend on `Q`, so the effective rate
//! `(1 − cζ)·R̄(c)` is optimized over the continuous ratio `c` with `ζ`
//! fixed, and the optimum is then rounded to an integer `Q`.
//!
//! MF and ZF optima are roots of the derivative conditions
//!
//! ```text
//! MF: (1 − 2ζc)·ln(1 + Ω/c) − Ω(1 − ζc)/(Ω + c) = 0,                  Ω = P_t/(P_t + G)
//! ZF: (1 − 2ζc)·ln(1 + r(1/c − 1)) − (1 − ζc)·r/((1 − r)c + r) = 0,   r = P_t/G
//! ```
//!
//! Both left-hand sides are `+∞` at `c → 0⁺` and negative at `c = 1/(2ζ)`
//! (and, for ZF, at `c = 1`); the objectives are concave there, so the
//! first sign change on a log grid brackets the unique root. RZF has no
//! tractable derivative and is searched directly.

use serde::Serialize;

use crate::analytic::{effective_rate_with_zeta, rzf_rate, CsiCostModel, RateInputs};
use crate::error::{Error, Result};
use crate::precoding::Precoder;

const LAMBERT_MAX_ITER: usize = 50;
const BRACKET_POINTS: usize = 400;
const BRACKET_FLOOR: f64 = 1e-9;
const GRID_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-6;

/// Principal branch `W₀(x)` of the Lambert W function, `x ≥ −1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -(-1f64).exp();
    if x.is_nan() || x < branch - 1e-15 {
        return Err(Error::DomainError(x));
    }
    if x <= branch {
        return Ok(-1.0);
    }
    if x == 0.0 || x.is_infinite() {
        return Ok(x);
    }
    let mut w = if x < -0.25 {
        // Series about the branch point in p = √(2(ex + 1)).
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    };
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            return Ok(w);
        }
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        if !step.is_finite() {
            return Ok(w);
        }
        let next = w - step;
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            return Ok(next);
        }
        w = next;
    }
    Err(Error::NoConvergence(format!("Lambert W at x = {x}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    RootBisection,
    GridSearch,
    LambertClosedForm,
}

/// Optimal continuous stream ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioOptimum {
    pub c_star: f64,
    pub method: OptMethod,
    /// `|derivative condition at c_star|`.
    pub residual: f64,
}

/// Left-hand side of the MF optimality condition.
pub fn mf_condition(groups: usize, power: f64, zeta: f64, c: f64) -> f64 {
    let omega = power / (power + groups as f64);
    (1.0 - 2.0 * zeta * c) * (omega / c).ln_1p() - omega * (1.0 - zeta * c) / (omega + c)
}

/// Left-hand side of the ZF optimality condition.
pub fn zf_condition(groups: usize, power: f64, zeta: f64, c: f64) -> f64 {
    let r = power / groups as f64;
    (1.0 - 2.0 * zeta * c) * (r * (1.0 / c - 1.0)).ln_1p() - (1.0 - zeta * c) * r / ((1.0 - r) * c + r)
}

/// First sign change of `f` from positive to nonpositive on a log grid over
/// `(BRACKET_FLOOR, hi]`, refined by bisection.
fn bracket_and_bisect(f: impl Fn(f64) -> f64, hi: f64) -> Result<RatioOptimum> {
    let ratio = (hi / BRACKET_FLOOR).powf(1.0 / BRACKET_POINTS as f64);
    let mut lo = BRACKET_FLOOR;
    if !(f(lo) > 0.0) {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let mut upper = None;
    for i in 1..=BRACKET_POINTS {
        let c = if i == BRACKET_POINTS { hi } else { BRACKET_FLOOR * ratio.powi(i as i32) };
        if f(c) <= 0.0 {
            upper = Some(c);
            break;
        }
        lo = c;
    }
    let mut hi = upper.ok_or(Error::NoRootInBracket { lo: BRACKET_FLOOR, hi })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    let (c_star, residual) = if flo <= fhi { (lo, flo) } else { (hi, fhi) };
    Ok(RatioOptimum {
        c_star,
        method: OptMethod::RootBisection,
        residual,
    })
}

fn check_inputs(groups: usize, power: f64, zeta: f64) -> Result<()> {
    if groups == 0 {
        return Err(Error::InvalidParameter("G must be positive".into()));
    }
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::InvalidParameter(format!("power P_t = {power}")));
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(Error::InvalidParameter(format!("zeta = {zeta}")));
    }
    Ok(())
}

/// MF optimum. Without CSI cost the MF effective rate increases in `c`
/// indefinitely, so `ζ = 0` is [`Error::UnboundedObjective`].
pub fn mf_opt_c(groups: usize, power: f64, zeta: f64) -> Result<RatioOptimum> {
    check_inputs(groups, power, zeta)?;
    if zeta == 0.0 {
        return Err(Error::UnboundedObjective);
    }
    bracket_and_bisect(|c| mf_condition(groups, power, zeta, c), 0.5 / zeta)
}

/// ZF optimum in `(0, 1)`; an interior optimum exists even at `ζ = 0`.
pub fn zf_opt_c(groups: usize, power: f64, zeta: f64) -> Result<RatioOptimum> {
    check_inputs(groups, power, zeta)?;
    let hi = if zeta > 0.5 { 0.5 / zeta } else { 1.0 };
    bracket_and_bisect(|c| zf_condition(groups, power, zeta, c), hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HighSnrOptimum {
    pub c_star: f64,
    /// `P_t < 10·G`, where the approximation is poor.
    pub low_snr: bool,
}

/// High-SNR ZF optimum without CSI cost: `c* = (1 + 1/W₀(P_t/(e·G)))⁻¹`.
pub fn zf_opt_c_high_snr(groups: usize, power: f64) -> Result<HighSnrOptimum> {
    check_inputs(groups, power, 0.0)?;
    let g = groups as f64;
    let w = lambert_w0(power / (std::f64::consts::E * g))?;
    Ok(HighSnrOptimum {
        c_star: 1.0 / (1.0 + 1.0 / w),
        low_snr: power < 10.0 * g,
    })
}

/// `(1 − cζ)·R̄_RZF` normalized by `G·L`, so it does not depend on `L`.
fn rzf_objective(groups: usize, power: f64, zeta: f64, c: f64) -> f64 {
    let inputs = match RateInputs::with_ratio(groups, c, 1, power) {
        Ok(i) => i,
        Err(_) => return f64::NEG_INFINITY,
    };
    match rzf_rate(&inputs) {
        Ok(r) => (1.0 - c * zeta) * r / groups as f64,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// RZF optimum over `c ∈ (0, 1)` and `cζ < 1`: grid search with step
/// `10⁻³`, refined by golden-section search to `10⁻⁶`.
pub fn rzf_opt_c(groups: usize, power: f64, zeta: f64) -> Result<RatioOptimum> {
    check_inputs(groups, power, zeta)?;
    let upper = if zeta > 1.0 { 1.0 / zeta } else { 1.0 };
    let objective = |c: f64| rzf_objective(groups, power, zeta, c);
    let (c_grid, _) = grid_argmax(objective, upper, GRID_STEP).ok_or(Error::EmptyFeasibleSet)?;
    let lo = (c_grid - GRID_STEP).max(GRID_STEP * 1e-3);
    let hi = (c_grid + GRID_STEP).min(upper);
    let c_star = golden_section_max(objective, lo, hi, GOLDEN_TOL);
    let h = 1e-6 * c_star;
    let residual = ((objective(c_star + h) - objective(c_star - h)) / (2.0 * h)).abs();
    Ok(RatioOptimum {
        c_star,
        method: OptMethod::GridSearch,
        residual,
    })
}

/// Argmax of `f` over `{step, 2·step, …} ∩ (0, upper)`; the smallest `c`
/// wins ties.
pub fn grid_argmax(f: impl Fn(f64) -> f64, upper: f64, step: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut k = 1usize;
    loop {
        let c = k as f64 * step;
        if c >= upper {
            break;
        }
        let v = f(c);
        if v.is_finite() && best.map_or(true, |(_, b)| v > b) {
            best = Some((c, v));
        }
        k += 1;
    }
    best
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Best integer `Q` among `⌊c*L⌋` and `⌊c*L⌋ + 1`, each clamped to
/// `max_streams`; zero is never a candidate and ties go to the smaller `Q`.
pub fn integer_q(
    c_star: f64,
    antennas: usize,
    max_streams: usize,
    rate: impl Fn(usize) -> Result<f64>,
) -> Result<(usize, f64)> {
    if !(c_star.is_finite() && c_star > 0.0) {
        return Err(Error::InvalidParameter(format!("c* = {c_star}")));
    }
    let base = (c_star * antennas as f64).floor() as usize;
    let mut candidates: Vec<usize> = [base, base + 1]
        .into_iter()
        .map(|q| q.min(max_streams))
        .filter(|&q| q > 0)
        .collect();
    candidates.dedup();
    let mut best: Option<(usize, f64)> = None;
    for q in candidates {
        let r = rate(q)?;
        if best.map_or(true, |(_, b)| r > b) {
            best = Some((q, r));
        }
    }
    best.ok_or(Error::EmptyFeasibleSet)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub precoder: Precoder,
    pub groups: usize,
    pub antennas: usize,
    pub zeta: f64,
    pub c_star: f64,
    pub q_star: usize,
    pub effective_rate_at_q_star: f64,
    pub method: OptMethod,
    pub residual: f64,
    /// No user-count limit `Q ≤ B` was applied.
    pub b_unconstrained: bool,
}

/// Largest `Q` the precoder and the CSI budget allow: `cζ ≤ 1` for MF,
/// `Q < L` for ZF and `Q ≤ L` for RZF.
pub fn max_feasible_streams(precoder: Precoder, antennas: usize, zeta: f64) -> usize {
    let budget = if zeta > 0.0 {
        (antennas as f64 / zeta).floor().min(usize::MAX as f64) as usize
    } else {
        usize::MAX
    };
    match precoder {
        Precoder::Mf => budget,
        Precoder::Zf => budget.min(antennas.saturating_sub(1)),
        Precoder::Rzf => budget.min(antennas),
    }
}

/// Optimal ratio and integer stream count for `G` groups and `L` antennas.
/// `max_streams` is the user limit `B = K/Λ`, when known.
pub fn optimize_streams(
    precoder: Precoder,
    groups: usize,
    antennas: usize,
    power: f64,
    zeta: f64,
    max_streams: Option<usize>,
) -> Result<OptimizationResult> {
    if antennas == 0 {
        return Err(Error::InvalidParameter("L must be positive".into()));
    }
    let optimum = match precoder {
        Precoder::Mf => mf_opt_c(groups, power, zeta)?,
        Precoder::Zf => zf_opt_c(groups, power, zeta)?,
        Precoder::Rzf => rzf_opt_c(groups, power, zeta)?,
    };
    let feasible = max_feasible_streams(precoder, antennas, zeta).min(max_streams.unwrap_or(usize::MAX));
    let (q_star, rate) = integer_q(optimum.c_star, antennas, feasible, |q| {
        let inputs = RateInputs::new(groups, q, antennas, power)?;
        Ok(effective_rate_with_zeta(precoder, &inputs, zeta)?.effective_rate_nats)
    })?;
    Ok(OptimizationResult {
        precoder,
        groups,
        antennas,
        zeta,
        c_star: optimum.c_star,
        q_star,
        effective_rate_at_q_star: rate,
        method: optimum.method,
        residual: optimum.residual,
        b_unconstrained: max_streams.is_none(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GainReport {
    pub precoder: Precoder,
    pub cached: OptimizationResult,
    pub cacheless: OptimizationResult,
    /// `max_Q ℛ̄(G, Q) / max_Q' ℛ̄(1, Q')`.
    pub gain: f64,
}

/// Optimized gain with explicit CSI costs for the cache-aided (`G` groups)
/// and cacheless (one group) systems.
pub fn optimized_gain_with_zeta(
    precoder: Precoder,
    groups: usize,
    antennas: usize,
    power: f64,
    zeta_cached: f64,
    zeta_cacheless: f64,
    max_streams: Option<usize>,
) -> Result<GainReport> {
    let cached = optimize_streams(precoder, groups, antennas, power, zeta_cached, max_streams)?;
    let cacheless = optimize_streams(precoder, 1, antennas, power, zeta_cacheless, max_streams)?;
    if cacheless.effective_rate_at_q_star == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(GainReport {
        precoder,
        gain: cached.effective_rate_at_q_star / cacheless.effective_rate_at_q_star,
        cached,
        cacheless,
    })
}

pub fn optimized_gain(
    precoder: Precoder,
    groups: usize,
    antennas: usize,
    power: f64,
    model: &CsiCostModel,
) -> Result<GainReport> {
    optimized_gain_with_zeta(
        precoder,
        groups,
        antennas,
        power,
        model.zeta(groups, antennas),
        model.zeta(1, antennas),
        None,
    )
}
