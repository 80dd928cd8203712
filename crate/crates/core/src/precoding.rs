//! Linear precoders, average-power normalization and per-user SINRs.
//!
//! For a group channel `H` (`Q × L`) the precoder `V` (`L × Q`) enters the
//! SINR only through the effective matrix `E = H V` and the power trace
//! `Tr{Vᴴ V}`. With `W = H Hᴴ` and `M = W + αI` both are functions of `W`:
//!
//! | precoder | `V`             | `E`      | `Tr{VᴴV}`        |
//! |----------|-----------------|----------|------------------|
//! | MF       | `Hᴴ`            | `W`      | `Tr{W}`          |
//! | ZF       | `Hᴴ W⁻¹`        | `I`      | `Tr{W⁻¹}`        |
//! | RZF      | `Hᴴ M⁻¹`        | `W M⁻¹`  | `Tr{E M⁻¹}`      |
//!
//! so the simulation kernels work on `Q × Q` matrices and never form `V`.
//! [`build_precoder`] still returns the explicit matrix.
//!
//! Inter-group interference is removed by cache-aided cancellation, so a
//! stage SINR only involves the user's own group:
//!
//! ```text
//! SINR_k = (ρ²/G)|E_kk|² / (1 + (ρ²/G) Σ_{j≠k} |E_kj|²)
//! ```

use std::fmt;
use std::str::FromStr;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Side};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::rzf_deterministics;
use crate::channel::{check_singular_fraction, complex_normal, sample_channel, ChannelMatrix, CMat, RngSeed};
use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precoder {
    Mf,
    Zf,
    Rzf,
}

impl Precoder {
    pub const ALL: [Precoder; 3] = [Precoder::Mf, Precoder::Zf, Precoder::Rzf];

    pub fn name(self) -> &'static str {
        match self {
            Precoder::Mf => "mf",
            Precoder::Zf => "zf",
            Precoder::Rzf => "rzf",
        }
    }
}

impl fmt::Display for Precoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Precoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(Precoder::Mf),
            "zf" => Ok(Precoder::Zf),
            "rzf" => Ok(Precoder::Rzf),
            other => Err(Error::InvalidParameter(format!(
                "unknown precoder '{other}' (expected mf, zf or rzf)"
            ))),
        }
    }
}

/// A precoder family together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrecoderKind {
    Mf,
    Zf,
    /// `alpha > 0`.
    Rzf { alpha: f64 },
}

impl PrecoderKind {
    /// RZF uses `α = L / P_t`.
    pub fn new(precoder: Precoder, antennas: usize, power: f64) -> Result<Self> {
        match precoder {
            Precoder::Mf => Ok(PrecoderKind::Mf),
            Precoder::Zf => Ok(PrecoderKind::Zf),
            Precoder::Rzf => PrecoderKind::rzf(antennas as f64 / power),
        }
    }

    pub fn rzf(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("RZF regularization alpha = {alpha}")));
        }
        Ok(PrecoderKind::Rzf { alpha })
    }

    pub fn precoder(&self) -> Precoder {
        match self {
            PrecoderKind::Mf => Precoder::Mf,
            PrecoderKind::Zf => Precoder::Zf,
            PrecoderKind::Rzf { .. } => Precoder::Rzf,
        }
    }
}

fn checked_alpha(alpha: f64) -> Result<f64> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidParameter(format!("RZF regularization alpha = {alpha}")))
    }
}

fn regularized_gram(h: &ChannelMatrix, alpha: f64) -> CMat {
    let mut m = h.gram();
    for i in 0..m.nrows() {
        m[(i, i)] += c64::new(alpha, 0.0);
    }
    m
}

/// Explicit precoding matrix `V` (`L × Q`).
pub fn build_precoder(h: &ChannelMatrix, kind: PrecoderKind) -> Result<CMat> {
    let gram = match kind {
        PrecoderKind::Mf => return Ok(h.as_mat().adjoint().to_owned()),
        PrecoderKind::Zf => h.gram(),
        PrecoderKind::Rzf { alpha } => regularized_gram(h, checked_alpha(alpha)?),
    };
    let llt = gram.llt(Side::Lower).map_err(|_| Error::RankDeficient)?;
    // Hᴴ G⁻¹ = (G⁻¹ H)ᴴ for Hermitian G.
    Ok(llt.solve(h.as_mat()).adjoint().to_owned())
}

/// `E = H V` and `Tr{Vᴴ V}` for one group.
pub fn effective_matrix(h: &ChannelMatrix, kind: PrecoderKind) -> Result<(CMat, f64)> {
    let q = h.users();
    match kind {
        PrecoderKind::Mf => {
            let w = h.gram();
            let trace = (0..q).map(|i| w[(i, i)].re).sum();
            Ok((w, trace))
        }
        PrecoderKind::Zf => {
            let inv = h.gram().llt(Side::Lower).map_err(|_| Error::RankDeficient)?.inverse();
            let trace = (0..q).map(|i| inv[(i, i)].re).sum();
            Ok((Mat::identity(q, q), trace))
        }
        PrecoderKind::Rzf { alpha } => {
            let w = h.gram();
            let m = regularized_gram(h, checked_alpha(alpha)?);
            let inv = m.llt(Side::Lower).map_err(|_| Error::RankDeficient)?.inverse();
            let e = &w * &inv;
            // Tr{M⁻¹ W M⁻¹} = Σ_ij E_ij (M⁻¹)_ji, a sum of nonnegative-trace terms.
            let mut trace = 0.0;
            for i in 0..q {
                for j in 0..q {
                    trace += (e[(i, j)] * inv[(j, i)]).re;
                }
            }
            Ok((e, trace))
        }
    }
}

/// Per-user gains of one stage, independent of the power factor.
#[derive(Clone, Debug, PartialEq)]
pub struct StageGains {
    /// `|E_kk|²`, group-major.
    pub signal: Vec<f64>,
    /// `Σ_{j≠k} |E_kj|²`, group-major.
    pub interference: Vec<f64>,
    /// `Tr{V_ψᴴ V_ψ}` per group.
    pub power_traces: Vec<f64>,
}

impl StageGains {
    pub fn groups(&self) -> usize {
        self.power_traces.len()
    }

    pub fn sinrs(&self, rho: f64) -> Vec<f64> {
        let scale = rho * rho / self.groups() as f64;
        self.signal
            .iter()
            .zip(&self.interference)
            .map(|(&d, &i)| scale * d / (1.0 + scale * i))
            .collect()
    }

    /// `Σ_k ln(1 + SINR_k)`, accumulated in user order.
    pub fn sum_rate(&self, rho: f64) -> f64 {
        self.sinrs(rho).into_iter().map(f64::ln_1p).collect::<CompensatedSum>().total()
    }
}

pub fn stage_gains(channels: &[ChannelMatrix], kind: PrecoderKind) -> Result<StageGains> {
    let mut gains = StageGains {
        signal: Vec::new(),
        interference: Vec::new(),
        power_traces: Vec::with_capacity(channels.len()),
    };
    for h in channels {
        let (e, trace) = effective_matrix(h, kind)?;
        for k in 0..e.nrows() {
            let mut interference = 0.0;
            for j in 0..e.ncols() {
                if j != k {
                    interference += e[(k, j)].norm_sqr();
                }
            }
            gains.signal.push(e[(k, k)].norm_sqr());
            gains.interference.push(interference);
        }
        gains.power_traces.push(trace);
    }
    Ok(gains)
}

/// SINRs of all `G·Q` users of a stage, one channel per group, with a common
/// power factor `rho`.
pub fn stage_sinrs(channels: &[ChannelMatrix], kind: PrecoderKind, rho: f64) -> Result<Vec<f64>> {
    if channels.is_empty() {
        return Err(Error::InvalidParameter("a stage needs at least one group".into()));
    }
    Ok(stage_gains(channels, kind)?.sinrs(rho))
}

/// RZF SINRs of one group through the leave-one-out quantities
/// `A_k = h_kᵀ R_k h_k*` and `B_k = h_kᵀ R_k H₋ₖᴴH₋ₖ R_k h_k*` with
/// `R_k = (αI + H₋ₖᴴH₋ₖ)⁻¹`:
///
/// `SINR_k = A_k² ρ²/G / ((1 + A_k)² + ρ² B_k / G)`.
pub fn rzf_sinrs_via_rank_one(h: &ChannelMatrix, alpha: f64, rho: f64, groups: usize) -> Result<Vec<f64>> {
    let alpha = checked_alpha(alpha)?;
    let l = h.antennas();
    let scale = rho * rho / groups as f64;
    (0..h.users())
        .map(|k| {
            let rest = h.without_user(k);
            let mut m = rest.as_mat().adjoint() * rest.as_mat();
            for i in 0..l {
                m[(i, i)] += c64::new(alpha, 0.0);
            }
            let u = Mat::from_fn(l, 1, |i, _| h.as_mat()[(k, i)].conj());
            let ru = m.llt(Side::Lower).map_err(|_| Error::RankDeficient)?.solve(&u);
            let a = (u.adjoint() * &ru)[(0, 0)].re;
            let b = (rest.as_mat() * &ru).squared_norm_l2();
            Ok(a * a * scale / ((1.0 + a).powi(2) + scale * b))
        })
        .collect()
}

/// Cache-aided cancellation check for one stage.
///
/// Every group transmits unit-variance Gaussian symbols; each user receives
/// the superposition of all groups plus noise, subtracts the other groups'
/// contributions rebuilt from the composite coefficients
/// `h_{ψ,k}ᵀ v_{φ,k'} ρ/√G` and its cached symbols, and is compared with the
/// signal it would receive if only its own group transmitted. Returns the
/// largest deviation relative to the largest received amplitude.
pub fn cancellation_residual(channels: &[ChannelMatrix], kind: PrecoderKind, rho: f64, seed: RngSeed) -> Result<f64> {
    let g = channels.len();
    if g == 0 {
        return Err(Error::InvalidParameter("a stage needs at least one group".into()));
    }
    let amplitude = c64::new(rho / (g as f64).sqrt(), 0.0);
    let mut rng = seed.rng();
    let precoders = channels
        .iter()
        .map(|h| build_precoder(h, kind))
        .collect::<Result<Vec<_>>>()?;
    let symbols: Vec<CMat> = channels
        .iter()
        .map(|h| Mat::from_fn(h.users(), 1, |_, _| complex_normal(&mut rng)))
        .collect();
    let per_group: Vec<CMat> = precoders
        .iter()
        .zip(&symbols)
        .map(|(v, s)| (v * s) * faer::Scale(amplitude))
        .collect();
    let mut x = per_group[0].clone();
    for xg in &per_group[1..] {
        x += xg;
    }

    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for (psi, h) in channels.iter().enumerate() {
        let noise = Mat::from_fn(h.users(), 1, |_, _| complex_normal(&mut rng));
        let received = h.as_mat() * &x + &noise;
        let intra_only = h.as_mat() * &per_group[psi] + &noise;
        let mut rebuilt = Mat::<c64>::zeros(h.users(), 1);
        for (phi, v) in precoders.iter().enumerate() {
            if phi != psi {
                let composite = h.as_mat() * v;
                rebuilt += (&composite * &symbols[phi]) * faer::Scale(amplitude);
            }
        }
        for k in 0..h.users() {
            let deviation = received[(k, 0)] - rebuilt[(k, 0)] - intra_only[(k, 0)];
            worst = worst.max(deviation.norm());
            peak = peak.max(received[(k, 0)].norm());
        }
    }
    Ok(if peak > 0.0 { worst / peak } else { worst })
}

/// How the power factor `ρ = √(P_t / E{Tr{VᴴV}})` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerMode {
    /// Finite-`L` expectation: `Q·L` for MF, `Q/(L−Q)` for ZF.
    Exact,
    /// Large-`L` limit; equals [`PowerMode::Exact`] for MF and ZF.
    Asymptotic,
    /// Sample mean of `Tr{VᴴV}` over `trials` draws; trial `t` uses stream `t`.
    MonteCarlo { trials: usize, seed: u64 },
}

pub fn power_factor(kind: PrecoderKind, streams: usize, antennas: usize, power: f64, mode: PowerMode) -> Result<f64> {
    if streams == 0 || antennas == 0 {
        return Err(Error::InvalidParameter("Q and L must be positive".into()));
    }
    if !(power.is_finite() && power >= 0.0) {
        return Err(Error::InvalidParameter(format!("power P_t = {power}")));
    }
    let (q, l) = (streams as f64, antennas as f64);
    let expected_trace = match (mode, kind) {
        (PowerMode::MonteCarlo { trials, seed }, _) => mean_power_trace(kind, streams, antennas, trials, seed)?,
        (_, PrecoderKind::Mf) => q * l,
        (_, PrecoderKind::Zf) => {
            if antennas <= streams {
                return Err(Error::PreconditionViolated(format!(
                    "ZF power normalization needs L > Q (Q = {streams}, L = {antennas})"
                )));
            }
            q / (l - q)
        }
        (PowerMode::Exact, PrecoderKind::Rzf { .. }) => return Err(Error::ExactUnavailable),
        (PowerMode::Asymptotic, PrecoderKind::Rzf { .. }) => {
            if power == 0.0 {
                return Ok(0.0);
            }
            return Ok(rzf_deterministics(q / l, power)?.p_sq.sqrt());
        }
    };
    Ok((power / expected_trace).sqrt())
}

/// Sample mean of `Tr{VᴴV}` over independent single-group draws. Singular
/// draws are redrawn from the same trial stream.
pub fn mean_power_trace(kind: PrecoderKind, streams: usize, antennas: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngSeed::new(seed, t).rng();
            draw_until_regular(&mut rng, streams, antennas, kind)
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let singular: usize = samples.iter().map(|s| s.1).sum();
    check_singular_fraction(singular, trials + singular)?;
    let total: CompensatedSum = samples.iter().map(|s| s.0).collect();
    Ok(total.total() / trials as f64)
}

fn draw_until_regular<R: Rng + ?Sized>(rng: &mut R, streams: usize, antennas: usize, kind: PrecoderKind) -> Result<(f64, usize)> {
    let mut singular = 0;
    loop {
        let h = sample_channel(streams, antennas, rng);
        match effective_matrix(&h, kind) {
            Ok((_, trace)) => return Ok((trace, singular)),
            Err(Error::RankDeficient) if singular < 1000 => singular += 1,
            Err(e) => return Err(e),
        }
    }
}
