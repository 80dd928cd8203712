use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::spec::{Axis, Command, Measure, PrecoderChoice, SpecLayer, SweepLayer};

#[derive(Debug, Parser)]
#[command(name = "ccdl", version, about = "Rates, simulations and stream optimization for cache-aided MISO downlinks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Closed-form average and effective sum-rate.
    Rate(Flags),
    /// Monte Carlo sum-rate with signal-level precoding.
    Simulate(Flags),
    /// Optimal stream ratio, stream count and optimized gain.
    Optimize(Flags),
    /// Cache-aided over cacheless effective-rate gain.
    Gain(Flags),
    /// Any of the above over a range of one parameter.
    Sweep(Flags),
}

impl Sub {
    pub fn split(self) -> (Command, Flags) {
        match self {
            Sub::Rate(f) => (Command::Rate, f),
            Sub::Simulate(f) => (Command::Simulate, f),
            Sub::Optimize(f) => (Command::Optimize, f),
            Sub::Gain(f) => (Command::Gain, f),
            Sub::Sweep(f) => (Command::Sweep, f),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// fig1, fig2-L32, fig2-L64 or fig3-L64.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON file with experiment parameters; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mf, zf, rzf or all.
    #[arg(long)]
    pub precoder: Option<PrecoderChoice>,
    /// Transmit antennas.
    #[arg(long = "L")]
    pub antennas: Option<usize>,
    /// Streams (users) per group.
    #[arg(long = "Q")]
    pub streams: Option<usize>,
    /// Streams of the cacheless reference (defaults to Q).
    #[arg(long = "q-prime")]
    pub q_prime: Option<usize>,
    /// Groups served per stage.
    #[arg(long = "G")]
    pub groups: Option<usize>,
    /// Total users.
    #[arg(long = "K")]
    pub users: Option<usize>,
    /// Distinct cache states.
    #[arg(long)]
    pub lambda: Option<usize>,
    /// Normalized cache size, decimal or fraction.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
    /// Pilot resources per user.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Coherence time in seconds.
    #[arg(long)]
    pub tc: Option<f64>,
    /// Coherence bandwidth in Hz.
    #[arg(long)]
    pub wc: Option<f64>,
    /// Explicit CSI cost, replacing beta * G * L / (tc * wc).
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweep variable: snr_db, Q, L or G.
    #[arg(long)]
    pub axis: Option<Axis>,
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Quantity computed at each sweep point: rate, simulate, optimize or gain.
    #[arg(long)]
    pub measure: Option<Measure>,
}

impl Flags {
    pub fn layer(&self) -> SpecLayer {
        let sweep = SweepLayer {
            axis: self.axis,
            start: self.start,
            stop: self.stop,
            step: self.step,
        };
        SpecLayer {
            antennas: self.antennas,
            streams: self.streams,
            groups: self.groups,
            users: self.users,
            lambda: self.lambda,
            gamma: self.gamma.clone().map(crate::spec::GammaValue::Text),
            snr_db: self.snr_db,
            beta: self.beta,
            tc: self.tc,
            wc: self.wc,
            zeta: self.zeta,
            precoder: self.precoder,
            q_prime: self.q_prime,
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
            measure: self.measure,
            sweep: (sweep != SweepLayer::default()).then_some(sweep),
        }
    }
}
