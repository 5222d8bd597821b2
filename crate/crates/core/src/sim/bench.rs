use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::RelativeState;
use crate::error::{Result, RtaError};
use crate::filters::FilterKind;

use super::config::ScenarioConfig;
use super::scenario::run_with;

/// Half-width of the per-run position jitter (m).
pub const JITTER: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub filter: FilterKind,
    /// Mean over runs of the per-step filter latency (s).
    pub mean_latency_s: f64,
    /// Sample standard deviation of the per-run means; zero for one run.
    pub std_latency_s: f64,
    /// `mean_latency_s` divided by the smallest mean in the report.
    pub multiple: f64,
    pub run_means_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub runs: usize,
    pub steps_per_run: u64,
    pub horizon: f64,
    pub entries: Vec<BenchmarkEntry>,
}

impl BenchmarkReport {
    pub fn entry(&self, kind: FilterKind) -> Option<&BenchmarkEntry> {
        self.entries.iter().find(|e| e.filter == kind)
    }

    pub fn mean(&self, kind: FilterKind) -> Option<f64> {
        self.entry(kind).map(|e| e.mean_latency_s)
    }
}

/// Times the four safety filters over `runs` repetitions of `config`.
pub fn run_benchmark(config: &ScenarioConfig, runs: usize) -> Result<BenchmarkReport> {
    run_benchmark_filters(config, runs, &FilterKind::RTA)
}

/// Runs every filter in `kinds` for `runs` full scenarios with no early exit.
///
/// Repetition `k` starts from the configured initial position shifted by a
/// uniform jitter of at most [`JITTER`] per axis drawn from `seed + k`, and
/// all filters see the same start within a repetition. Filters are
/// interleaved within each repetition so slow drift in machine load affects
/// them alike.
pub fn run_benchmark_filters(config: &ScenarioConfig, runs: usize, kinds: &[FilterKind]) -> Result<BenchmarkReport> {
    if runs == 0 || kinds.is_empty() {
        return Err(RtaError::InvalidConfig(
            "benchmark needs at least one run and one filter".into(),
        ));
    }
    let mut cfg = config.clone();
    cfg.stop_on_dock = false;
    cfg.latch = None;
    let setup = cfg.setup()?;
    let mut filters: Vec<_> = kinds.iter().map(|&k| setup.filter(k, None)).collect();
    let mut means = vec![Vec::with_capacity(runs); kinds.len()];

    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(run as u64));
        let base = config.initial_state;
        let p = base.position();
        let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-JITTER..=JITTER);
        let start = RelativeState::new(
            [
                p[0] + jitter(&mut rng),
                p[1] + jitter(&mut rng),
                p[2] + jitter(&mut rng),
            ],
            base.velocity().into(),
        );
        let mut run_cfg = cfg.clone();
        run_cfg.initial_state = start;
        for (f, m) in filters.iter_mut().zip(means.iter_mut()) {
            let summary = run_with(&run_cfg, &setup, f.as_mut(), |_| {})?;
            m.push(summary.mean_latency_s);
        }
        log::info!("benchmark run {}/{runs} done", run + 1);
    }

    let stats: Vec<(f64, f64)> = means.iter().map(|m| mean_std(m)).collect();
    let smallest = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let entries = kinds
        .iter()
        .zip(stats)
        .zip(means)
        .map(|((&filter, (mean, std)), run_means_s)| BenchmarkEntry {
            filter,
            mean_latency_s: mean,
            std_latency_s: std,
            multiple: mean / smallest,
            run_means_s,
        })
        .collect();
    Ok(BenchmarkReport {
        runs,
        steps_per_run: cfg.duration,
        horizon: cfg.horizon,
        entries,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::default_config;

    #[test]
    fn single_run_report_is_well_formed() {
        let mut c = default_config();
        c.duration = 40;
        let r = run_benchmark(&c, 1).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert!(r
            .entries
            .iter()
            .all(|e| e.std_latency_s == 0.0 && e.multiple >= 1.0 && e.multiple.is_finite()));
        assert_eq!(r.entries.iter().filter(|e| e.multiple == 1.0).count().min(1), 1);
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(run_benchmark(&default_config(), 0).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
