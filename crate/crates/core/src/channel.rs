//! Rayleigh channel generation and random-matrix estimators.
//!
//! Every random quantity is a pure function of an [`RngSeed`]: the seed picks
//! a ChaCha20 key and the stream id picks one of its 2^64 independent
//! streams. Monte Carlo trial `t` always uses stream `t`, so results do not
//! depend on how trials are scheduled across threads.
//!
//! Complex Gaussians are built from two standard normals (ziggurat transform
//! of uniform words) scaled by `1/√2`, giving `CN(0, 1)` entries with
//! variance `1/2` per component. Only the distribution is part of the
//! contract, not the bit pattern.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::summation::CompensatedSum;

/// Dense complex matrix.
pub type CMat = Mat<c64>;

/// Highest tolerated fraction of numerically singular draws.
pub const MAX_SINGULAR_FRACTION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        RngSeed { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// One group's channel `H` (`Q × L`): row `k` is `h_kᵀ`, the channel from
/// the `L` transmit antennas to user `k`.
#[derive(Clone, Debug)]
pub struct ChannelMatrix(CMat);

impl ChannelMatrix {
    pub fn from_mat(entries: CMat) -> Self {
        ChannelMatrix(entries)
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.0.as_ref()
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }

    /// `H Hᴴ` (`Q × Q`).
    pub fn gram(&self) -> CMat {
        &self.0 * self.0.adjoint()
    }

    /// `H` with row `user` removed, i.e. `H₋ₖ`.
    pub fn without_user(&self, user: usize) -> ChannelMatrix {
        let rows: Vec<usize> = (0..self.users()).filter(|&i| i != user).collect();
        ChannelMatrix(Mat::from_fn(rows.len(), self.antennas(), |i, j| {
            self.0[(rows[i], j)]
        }))
    }

    /// Eigenvalues of `(1/L) Hᴴ H`.
    pub fn spectrum(&self) -> ScaledGramSpectrum {
        let l = self.antennas();
        let q = self.users();
        // HᴴH and HHᴴ share their nonzero eigenvalues; decompose the smaller.
        let small = if q < l {
            self.gram()
        } else {
            self.0.adjoint() * &self.0
        };
        let mut eigenvalues: Vec<f64> = if small.nrows() == 0 {
            Vec::new()
        } else {
            small
                .self_adjoint_eigenvalues(Side::Lower)
                .expect("self-adjoint eigensolver converges")
                .into_iter()
                .map(|v| (v / l as f64).max(0.0))
                .collect()
        };
        eigenvalues.resize(l, 0.0);
        ScaledGramSpectrum { eigenvalues }
    }
}

/// Spectrum of the normalized Gram matrix `(1/L) Hᴴ H`.
#[derive(Clone, Debug)]
pub struct ScaledGramSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl ScaledGramSpectrum {
    /// `(1/L) Tr{(z I + (1/L) Hᴴ H)⁻¹}`.
    pub fn resolvent_trace(&self, z: f64) -> f64 {
        assert!(z > 0.0, "resolvent requires z > 0, got {z}");
        let s: CompensatedSum = self.eigenvalues.iter().map(|&x| 1.0 / (z + x)).collect();
        s.total() / self.eigenvalues.len() as f64
    }

    /// `(1/L) Tr{(z I + (1/L) Hᴴ H)⁻²}`.
    pub fn resolvent_sq_trace(&self, z: f64) -> f64 {
        assert!(z > 0.0, "resolvent requires z > 0, got {z}");
        let s: CompensatedSum = self
            .eigenvalues
            .iter()
            .map(|&x| 1.0 / ((z + x) * (z + x)))
            .collect();
        s.total() / self.eigenvalues.len() as f64
    }
}

/// Draws a `Q × L` matrix of i.i.d. `CN(0, 1)` entries, user by user.
pub fn sample_channel<R: Rng + ?Sized>(users: usize, antennas: usize, rng: &mut R) -> ChannelMatrix {
    let mut m = Mat::zeros(users, antennas);
    for i in 0..users {
        for j in 0..antennas {
            m[(i, j)] = complex_normal(rng);
        }
    }
    ChannelMatrix(m)
}

pub fn draw_channel(users: usize, antennas: usize, seed: RngSeed) -> ChannelMatrix {
    sample_channel(users, antennas, &mut seed.rng())
}

/// `(1/L) Tr{(z I + (1/L) Hᴴ H)⁻¹}` via the eigenvalues of `(1/L) Hᴴ H`.
pub fn resolvent_trace(channel: &ChannelMatrix, z: f64) -> f64 {
    channel.spectrum().resolvent_trace(z)
}

/// Monte Carlo estimate of `E{Tr{(H Hᴴ)⁻¹}}` for a `Q × L` Rayleigh channel.
///
/// Draws whose Gram matrix fails to factor are redrawn from the same trial
/// stream; more than [`MAX_SINGULAR_FRACTION`] of them is an error.
pub fn wishart_inv_trace_mc(users: usize, antennas: usize, trials: usize, seed: u64) -> Result<f64> {
    if users == 0 || antennas <= users {
        return Err(Error::PreconditionViolated(format!(
            "inverse Wishart trace needs L > Q >= 1 (Q = {users}, L = {antennas})"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let samples: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = RngSeed::new(seed, t).rng();
            let mut singular = 0;
            loop {
                let h = sample_channel(users, antennas, &mut rng);
                match h.gram().llt(Side::Lower) {
                    Ok(llt) => {
                        let inv = llt.inverse();
                        let tr: f64 = (0..users).map(|i| inv[(i, i)].re).sum();
                        return (tr, singular);
                    }
                    Err(_) => singular += 1,
                }
            }
        })
        .collect();
    let singular: usize = samples.iter().map(|s| s.1).sum();
    check_singular_fraction(singular, trials + singular)?;
    let total: CompensatedSum = samples.iter().map(|s| s.0).collect();
    Ok(total.total() / trials as f64)
}

pub(crate) fn check_singular_fraction(singular: usize, draws: usize) -> Result<()> {
    if singular as f64 > MAX_SINGULAR_FRACTION * draws as f64 {
        return Err(Error::SingularDraws { singular, draws });
    }
    Ok(())
}
