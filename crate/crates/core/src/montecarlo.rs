//! Seeded Monte Carlo estimation of stage sum-rates.
//!
//! Trial `t` draws the `G` group channels of one stage, in group order, from
//! stream `t` of the configured seed. Per-trial results are collected in
//! trial order and reduced with compensated sums, so an estimate is a pure
//! function of its [`McConfig`] whatever the worker count.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{raw_rate, rzf_deterministics, RateInputs};
use crate::channel::{check_singular_fraction, sample_channel, ChannelMatrix, RngSeed};
use crate::error::{Error, Result};
use crate::precoding::{power_factor, stage_gains, PowerMode, Precoder, PrecoderKind, StageGains};
use crate::scheme::OperatingPoint;
use crate::summation::{mean_and_std_error, CompensatedSum};

/// Trial count below which an estimate is not considered reliable.
pub const MIN_RELIABLE_TRIALS: usize = 100;

/// Redraws allowed per group before a singular channel is treated as a bug.
const MAX_REDRAWS: usize = 1000;

/// Source of the power factor `ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `ρ² = P_t / E{Tr{VᴴV}}` with the exact finite-`L` expectation.
    Expected,
    /// `ρ² = P_t / mean Tr{VᴴV}` over every group of every trial of the run.
    SampleMean,
}

impl Normalization {
    /// Expected power where it is known in closed form, sample mean for RZF.
    pub fn default_for(precoder: Precoder) -> Self {
        match precoder {
            Precoder::Mf | Precoder::Zf => Normalization::Expected,
            Precoder::Rzf => Normalization::SampleMean,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub point: OperatingPoint,
    pub precoder: Precoder,
    pub normalization: Normalization,
}

impl McConfig {
    pub fn new(point: OperatingPoint, precoder: Precoder, trials: usize, seed: u64) -> Self {
        McConfig {
            trials,
            seed,
            point,
            precoder,
            normalization: Normalization::default_for(precoder),
        }
    }

    pub fn is_reliable(&self) -> bool {
        self.trials >= MIN_RELIABLE_TRIALS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: usize,
}

/// One stage of trial `trial`, with the number of singular redraws.
fn draw_stage(point: &OperatingPoint, kind: PrecoderKind, seed: u64, trial: u64) -> Result<(StageGains, usize)> {
    let mut rng = RngSeed::new(seed, trial).rng();
    let users = point.groups * point.streams;
    let mut stage = StageGains {
        signal: Vec::with_capacity(users),
        interference: Vec::with_capacity(users),
        power_traces: Vec::with_capacity(point.groups),
    };
    let mut singular = 0;
    for _ in 0..point.groups {
        let mut redraws = 0;
        let group = loop {
            let h = sample_channel(point.streams, point.antennas, &mut rng);
            match stage_gains(std::slice::from_ref(&h), kind) {
                Ok(g) => break g,
                Err(Error::RankDeficient) if redraws < MAX_REDRAWS => redraws += 1,
                Err(e) => return Err(e),
            }
        };
        stage.signal.extend(group.signal);
        stage.interference.extend(group.interference);
        stage.power_traces.extend(group.power_traces);
        singular += redraws;
    }
    Ok((stage, singular))
}

fn check_point(point: &OperatingPoint, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    if point.groups == 0 || point.streams == 0 || point.antennas == 0 {
        return Err(Error::InvalidParameter("G, Q and L must be positive".into()));
    }
    if !(point.power.is_finite() && point.power >= 0.0) {
        return Err(Error::InvalidParameter(format!("power P_t = {}", point.power)));
    }
    Ok(())
}

/// Mean over trials of `Σ_k ln(1 + SINR_k)` over the `G·Q` users of a stage.
pub fn estimate_sum_rate(mc: &McConfig) -> Result<McEstimate> {
    let point = mc.point;
    check_point(&point, mc.trials)?;
    let kind = PrecoderKind::new(mc.precoder, point.antennas, point.power)?;
    let stages = (0..mc.trials as u64)
        .into_par_iter()
        .map(|t| draw_stage(&point, kind, mc.seed, t))
        .collect::<Result<Vec<_>>>()?;
    let singular: usize = stages.iter().map(|s| s.1).sum();
    check_singular_fraction(singular, mc.trials * point.groups + singular)?;

    let rho = match mc.normalization {
        Normalization::Expected => power_factor(kind, point.streams, point.antennas, point.power, PowerMode::Exact)?,
        Normalization::SampleMean => {
            let traces: CompensatedSum = stages.iter().flat_map(|s| s.0.power_traces.iter().copied()).collect();
            let mean_trace = traces.total() / (mc.trials * point.groups) as f64;
            (point.power / mean_trace).sqrt()
        }
    };
    let rates: Vec<f64> = stages.par_iter().map(|s| s.0.sum_rate(rho)).collect();
    let (mean, std_error) = mean_and_std_error(&rates);
    Ok(McEstimate {
        mean,
        std_error,
        trials: mc.trials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub antennas: usize,
    pub streams: usize,
    pub empirical: f64,
    pub std_error: f64,
    pub analytic: f64,
    /// `|empirical − analytic| / analytic`.
    pub rel_gap: f64,
}

/// Monte Carlo against closed form at a fixed stream ratio over a grid of
/// antenna counts. Every `ratio·L` must be an integer.
pub fn convergence_report(
    precoder: Precoder,
    groups: usize,
    ratio: f64,
    power: f64,
    antenna_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    antenna_grid
        .iter()
        .map(|&l| {
            let exact = ratio * l as f64;
            let q = exact.round();
            if q < 1.0 || (q - exact).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("c·L = {exact} is not a positive integer at L = {l}")));
            }
            let q = q as usize;
            let point = OperatingPoint {
                groups,
                streams: q,
                antennas: l,
                power,
            };
            let est = estimate_sum_rate(&McConfig::new(point, precoder, trials, seed))?;
            let analytic = raw_rate(precoder, &RateInputs::new(groups, q, l, power)?)?;
            Ok(ConvergenceRow {
                antennas: l,
                streams: q,
                empirical: est.mean,
                std_error: est.std_error,
                analytic,
                rel_gap: ((est.mean - analytic) / analytic).abs(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeterministicCheck {
    pub a_emp: f64,
    pub a_theory: f64,
    /// `|a_emp − a_theory| / a_theory`.
    pub gap: f64,
}

/// Empirical mean of `h_kᵀ(αI + H₋ₖᴴH₋ₖ)⁻¹h_k*` for `α = L/P_t` against
/// its deterministic equivalent. Uses `Q = round(c·L)`, at least one user.
pub fn deterministic_equivalent_check(c: f64, power: f64, antennas: usize, trials: usize, seed: u64) -> Result<DeterministicCheck> {
    if trials == 0 || antennas == 0 {
        return Err(Error::InvalidParameter("trials and L must be positive".into()));
    }
    let a_theory = rzf_deterministics(c, power)?.a;
    let streams = ((c * antennas as f64).round() as usize).max(1);
    let alpha = antennas as f64 / power;
    let samples = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let h = sample_channel(streams, antennas, &mut RngSeed::new(seed, t).rng());
            leave_one_out_quadratic(&h, 0, alpha)
        })
        .collect::<Result<Vec<f64>>>()?;
    let a_emp = samples.into_iter().collect::<CompensatedSum>().total() / trials as f64;
    Ok(DeterministicCheck {
        a_emp,
        a_theory,
        gap: ((a_emp - a_theory) / a_theory).abs(),
    })
}

fn leave_one_out_quadratic(h: &ChannelMatrix, user: usize, alpha: f64) -> Result<f64> {
    let l = h.antennas();
    let rest = h.without_user(user);
    let mut m = rest.as_mat().adjoint() * rest.as_mat();
    for i in 0..l {
        m[(i, i)] += c64::new(alpha, 0.0);
    }
    let u = Mat::from_fn(l, 1, |i, _| h.as_mat()[(user, i)].conj());
    let ru = m.llt(Side::Lower).map_err(|_| Error::RankDeficient)?.solve(&u);
    Ok((u.adjoint() * &ru)[(0, 0)].re)
}
