use std::io::Write;

use ccdl::analytic::{effective_rate_with_zeta, overhead_factor};
use ccdl::montecarlo::estimate_sum_rate;
use ccdl::optimizer::optimized_gain_with_zeta;
use ccdl::scheme::{db_to_linear, validate, SchemeConfig};
use ccdl::{McConfig, OperatingPoint, Precoder, RateInputs};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::spec::{ExperimentSpec, Measure, Point};

/// Header of every CSV the runner writes.
pub const COLUMNS: [&str; 16] = [
    "precoder",
    "L",
    "Q",
    "G",
    "snr_db",
    "zeta",
    "c",
    "rate_nats",
    "rate_bits",
    "effective_rate_nats",
    "source",
    "trials",
    "seed",
    "c_star",
    "q_star",
    "gain",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub precoder: Precoder,
    #[serde(rename = "L")]
    pub antennas: usize,
    #[serde(rename = "Q")]
    pub streams: usize,
    #[serde(rename = "G")]
    pub groups: usize,
    pub snr_db: f64,
    pub zeta: f64,
    pub c: f64,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub effective_rate_nats: f64,
    pub source: &'static str,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub c_star: Option<f64>,
    pub q_star: Option<usize>,
    pub gain: Option<f64>,
}

impl Row {
    fn new(precoder: Precoder, point: &Point, streams: usize, zeta: f64, rate_nats: f64, effective: f64) -> Row {
        Row {
            precoder,
            antennas: point.antennas,
            streams,
            groups: point.groups,
            snr_db: point.snr_db,
            zeta,
            c: streams as f64 / point.antennas as f64,
            rate_nats,
            rate_bits: rate_nats / std::f64::consts::LN_2,
            effective_rate_nats: effective,
            source: "closed_form",
            trials: None,
            seed: None,
            c_star: None,
            q_star: None,
            gain: None,
        }
    }
}

/// Evaluates every point of `spec` for every selected precoder. Rows come
/// back in sweep order, precoders in `mf, zf, rzf` order within a point; the
/// first failing job in that order decides the error.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<Row>, CliError> {
    let points = spec.points()?;
    let jobs: Vec<(Point, Precoder)> = points
        .iter()
        .flat_map(|p| spec.precoders.iter().map(move |&pre| (*p, pre)))
        .collect();
    let results: Vec<Result<Row, CliError>> = jobs
        .par_iter()
        .map(|(point, precoder)| evaluate(spec, point, *precoder))
        .collect();
    results.into_iter().collect()
}

fn need_streams(point: &Point) -> Result<usize, CliError> {
    point.streams.ok_or(CliError::MissingParameter("Q"))
}

/// Full scheme validation when the cache configuration and `K` are known.
fn check_scheme(spec: &ExperimentSpec, point: &Point, streams: usize, precoder: Precoder) -> Result<(), CliError> {
    if let Some(cache) = spec.cache {
        if let Some(users) = cache.users {
            validate(&SchemeConfig {
                antennas: point.antennas,
                snr_db: point.snr_db,
                cache_states: cache.cache_states,
                gamma: cache.gamma,
                users,
                streams,
                precoder,
            })?;
        }
    }
    Ok(())
}

fn evaluate(spec: &ExperimentSpec, point: &Point, precoder: Precoder) -> Result<Row, CliError> {
    if !point.snr_db.is_finite() {
        return Err(CliError::InvalidConfig(format!("snr_db = {}", point.snr_db)));
    }
    let power = db_to_linear(point.snr_db);
    let (l, g) = (point.antennas, point.groups);
    let zeta = spec.zeta.unwrap_or_else(|| spec.csi.zeta(g, l));
    // ζ grows linearly in G, so an explicit ζ maps to ζ/G without caching.
    let zeta_cacheless = spec.zeta.map_or_else(|| spec.csi.zeta(1, l), |z| z / g as f64);
    match spec.measure {
        Measure::Rate => {
            let q = need_streams(point)?;
            check_scheme(spec, point, q, precoder)?;
            let report = effective_rate_with_zeta(precoder, &RateInputs::new(g, q, l, power)?, zeta)?;
            Ok(Row::new(precoder, point, q, zeta, report.avg_sum_rate_nats, report.effective_rate_nats))
        }
        Measure::Simulate => {
            let q = need_streams(point)?;
            check_scheme(spec, point, q, precoder)?;
            let op = OperatingPoint {
                groups: g,
                streams: q,
                antennas: l,
                power,
            };
            let factor = overhead_factor(op.stream_ratio(), zeta)?;
            let est = estimate_sum_rate(&McConfig::new(op, precoder, spec.trials, spec.seed))?;
            Ok(Row {
                source: "monte_carlo",
                trials: Some(spec.trials),
                seed: Some(spec.seed),
                ..Row::new(precoder, point, q, zeta, est.mean, factor * est.mean)
            })
        }
        Measure::Gain if point.streams.is_some() => {
            let q = need_streams(point)?;
            let q_prime = spec.streams_cacheless.unwrap_or(q);
            check_scheme(spec, point, q, precoder)?;
            let cached = effective_rate_with_zeta(precoder, &RateInputs::new(g, q, l, power)?, zeta)?;
            let cacheless = effective_rate_with_zeta(precoder, &RateInputs::new(1, q_prime, l, power)?, zeta_cacheless)?;
            if cacheless.effective_rate_nats == 0.0 {
                return Err(ccdl::Error::ZeroDenominator.into());
            }
            Ok(Row {
                gain: Some(cached.effective_rate_nats / cacheless.effective_rate_nats),
                ..Row::new(precoder, point, q, zeta, cached.avg_sum_rate_nats, cached.effective_rate_nats)
            })
        }
        Measure::Optimize | Measure::Gain => {
            let report =
                optimized_gain_with_zeta(precoder, g, l, power, zeta, zeta_cacheless, spec.users_per_group())?;
            let q = report.cached.q_star;
            let raw = effective_rate_with_zeta(precoder, &RateInputs::new(g, q, l, power)?, zeta)?;
            Ok(Row {
                c_star: Some(report.cached.c_star),
                q_star: Some(q),
                gain: Some(report.gain),
                ..Row::new(precoder, point, q, zeta, raw.avg_sum_rate_nats, report.cached.effective_rate_at_q_star)
            })
        }
    }
}

/// Writes the header and `rows` as CSV.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), CliError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
