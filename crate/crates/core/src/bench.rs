//! Micro-benchmarks for graph construction cost and model inference
//! latency. Construction timing fits a power law (log-log least squares)
//! over frame sizes, so the measured slope can be checked against the
//! expected asymptotic order of each constructor.

use crate::graph::{build_frame, GraphConfig, GraphSequence};
use crate::model::{DdgnnModel, ModelError};
use crate::pointcloud::{Point3, PointFrame};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::hint::black_box;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error("only {kept} of {measured} sizes exceed the timer floor; need at least 2 to fit")]
    NotEnoughSizes { kept: usize, measured: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Uniform random frame in a box shaped like the radar detection area.
pub fn random_frame<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PointFrame {
    let points = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.5..5.0),
                rng.random_range(-1.2..6.5),
                rng.random_range(-1.0..2.5),
            )
        })
        .collect();
    PointFrame::new(points, 0)
}

/// Edge count of one randomly generated frame under `config`.
pub fn count_edges(config: &GraphConfig, n: usize, seed: u64) -> Result<usize, BenchError> {
    config.validate().map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(build_frame(&random_frame(n, &mut rng), config).edge_count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub std_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: GraphConfig,
    pub reps: usize,
    pub seed: u64,
    pub timer_floor_ns: f64,
    pub points: Vec<ScalingPoint>,
    /// Sizes whose median fell under the timer floor, excluded from the fit.
    pub dropped: Vec<usize>,
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval on the slope.
    pub ci_half_width: f64,
    pub slope_low: f64,
    pub slope_high: f64,
}

impl ScalingReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("n,median_ns,mean_ns,std_ns\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.n, p.median_ns, p.mean_ns, p.std_ns));
        }
        out
    }
}

/// Times `build_frame` at each size, takes the median over `reps` runs, and
/// fits log(median) against log(n). Sizes whose median lands within 10x the
/// observed timer granularity are dropped rather than polluting the fit.
pub fn time_construction(
    config: &GraphConfig,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ScalingReport, BenchError> {
    config.validate().map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(BenchError::InvalidSpec("sizes must be non-empty and positive".into()));
    }
    if reps == 0 {
        return Err(BenchError::InvalidSpec("reps must be >= 1".into()));
    }

    let timer_floor_ns = 10.0 * timer_resolution_ns();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let frame = random_frame(n, &mut rng);
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let g = build_frame(black_box(&frame), config);
            let elapsed = start.elapsed();
            black_box(g.edge_count());
            samples.push(elapsed.as_nanos() as f64);
        }
        let (mean_ns, std_ns) = mean_std(&samples);
        points.push(ScalingPoint { n, median_ns: median(&mut samples), mean_ns, std_ns });
    }

    let dropped: Vec<usize> =
        points.iter().filter(|p| p.median_ns < timer_floor_ns).map(|p| p.n).collect();
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.median_ns >= timer_floor_ns)
        .map(|p| (p.n as f64, p.median_ns))
        .collect();
    if kept.len() < 2 {
        return Err(BenchError::NotEnoughSizes { kept: kept.len(), measured: points.len() });
    }
    let fit = fit_power_law(&kept);
    Ok(ScalingReport {
        config: *config,
        reps,
        seed,
        timer_floor_ns,
        points,
        dropped,
        slope: fit.slope,
        intercept: fit.intercept,
        ci_half_width: fit.ci_half_width,
        slope_low: fit.slope - fit.ci_half_width,
        slope_high: fit.slope + fit.ci_half_width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_half_width: f64,
}

/// Least squares on (ln n, ln y); CI uses the t quantile at k-2 dof.
pub fn fit_power_law(points: &[(f64, f64)]) -> PowerLawFit {
    assert!(points.len() >= 2, "need at least two points");
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let dof = points.len().saturating_sub(2);
    let ci_half_width = if dof == 0 {
        f64::INFINITY
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let se = (ss_res / dof as f64 / sxx).sqrt();
        t_975(dof) * se
    };
    PowerLawFit { slope, intercept, ci_half_width }
}

/// Two-sided 95% Student t quantile; beyond 20 dof the normal quantile is
/// close enough for error bars.
pub fn t_975(dof: usize) -> f64 {
    const TABLE: [f64; 20] = [
        12.70620, 4.30265, 3.18245, 2.77645, 2.57058, 2.44691, 2.36462, 2.30600, 2.26216,
        2.22814, 2.20099, 2.17881, 2.16037, 2.14479, 2.13145, 2.11991, 2.10982, 2.10092,
        2.09302, 2.08596,
    ];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= TABLE.len() {
        TABLE[dof - 1]
    } else {
        1.96
    }
}

/// Smallest nonzero interval the monotonic clock can report, in ns.
fn timer_resolution_ns() -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..256 {
        let start = Instant::now();
        let mut d = start.elapsed();
        while d.is_zero() {
            d = start.elapsed();
        }
        best = best.min(d.as_nanos() as f64);
    }
    best.max(1.0)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    }
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub reps: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

/// Latency of full-sequence inference, cycling through `set`. Warmup runs
/// are executed but not recorded.
pub fn time_inference(
    model: &DdgnnModel,
    set: &[GraphSequence],
    warmup: usize,
    reps: usize,
) -> Result<InferenceReport, BenchError> {
    if set.is_empty() {
        return Err(BenchError::InvalidSpec("inference set is empty".into()));
    }
    if reps == 0 {
        return Err(BenchError::InvalidSpec("reps must be >= 1".into()));
    }
    for i in 0..warmup {
        black_box(model.infer_logits(&set[i % set.len()])?);
    }
    let mut samples = Vec::with_capacity(reps);
    for i in 0..reps {
        let gs = &set[i % set.len()];
        let start = Instant::now();
        let logits = model.infer_logits(gs)?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        black_box(logits);
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean_ms = samples.iter().sum::<f64>() / reps as f64;
    Ok(InferenceReport { reps, warmup, mean_ms, p95_ms: percentile(&samples, 0.95) })
}
