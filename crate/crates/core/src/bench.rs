//! Strategy comparison over generated instances.

use crate::generator::{generate, GenError, GenParams};
use crate::search::{ActivityStrategy, HeuristicWeights, SolverState, StopReason};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::atomic::AtomicBool;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("generator failed for fill {fill} seed {seed}: {source}")]
    Generate {
        fill: f64,
        seed: u64,
        #[source]
        source: GenError,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Activity-selection strategy under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    Random,
    /// Sampled pool with the given inclusion probability.
    Sampled(f64),
    Full,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::Random => "random".into(),
            StrategySpec::Sampled(p) => format!("sampled({p})"),
            StrategySpec::Full => "full".into(),
        }
    }

    pub fn apply(&self, weights: &HeuristicWeights) -> HeuristicWeights {
        let mut w = weights.clone();
        match self {
            StrategySpec::Random => w.strategy = ActivityStrategy::Random,
            StrategySpec::Sampled(p) => {
                w.strategy = ActivityStrategy::Sampled;
                w.sample_probability = *p;
            }
            StrategySpec::Full => w.strategy = ActivityStrategy::Full,
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub strategies: Vec<StrategySpec>,
    pub fills: Vec<f64>,
    /// Instances per fill level.
    pub seeds: u64,
    pub seed_base: u64,
    pub max_iterations: u64,
    pub weights: HeuristicWeights,
    /// Base generator settings; fill and seed are overridden per cell.
    pub generator: GenParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            strategies: vec![
                StrategySpec::Random,
                StrategySpec::Sampled(0.2),
                StrategySpec::Full,
            ],
            fills: vec![50.0, 70.0, 85.0],
            seeds: 10,
            seed_base: 0,
            max_iterations: 20000,
            weights: HeuristicWeights::default(),
            generator: GenParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub strategy: String,
    pub fill: f64,
    pub seed: u64,
    pub activities: usize,
    pub iterations: u64,
    pub wall_ms: f64,
    pub scheduled_pct: f64,
    pub cap_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub strategy: String,
    pub fill: f64,
    pub runs: usize,
    pub completed: usize,
    pub mean_iterations: f64,
    pub sd_iterations: f64,
    pub mean_wall_ms: f64,
    pub sd_wall_ms: f64,
    pub mean_scheduled_pct: f64,
    pub sd_scheduled_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResults {
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every (strategy, fill, seed) cell. Instances are shared across
/// strategies. Row order is deterministic regardless of thread count.
pub fn run(config: &BenchConfig) -> Result<BenchResults, BenchError> {
    if config.strategies.is_empty() || config.fills.is_empty() || config.seeds == 0 {
        return Err(BenchError::Config(
            "strategies, fills and seeds must be non-empty".into(),
        ));
    }
    for s in &config.strategies {
        s.apply(&config.weights)
            .validate()
            .map_err(|e| BenchError::Config(e.to_string()))?;
    }

    let mut instances = Vec::new();
    for (fi, &fill) in config.fills.iter().enumerate() {
        for k in 0..config.seeds {
            let seed = config.seed_base + k;
            let params = config.generator.clone().with_fill(fill).with_seed(seed);
            let inst =
                generate(&params).map_err(|source| BenchError::Generate { fill, seed, source })?;
            instances.push((fi, fill, seed, inst.problem));
        }
    }

    let cells: Vec<(usize, usize)> = (0..config.strategies.len())
        .flat_map(|s| (0..instances.len()).map(move |i| (s, i)))
        .collect();
    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|&(s, i)| {
            let spec = config.strategies[s];
            let (_, fill, seed, problem) = &instances[i];
            let weights = spec
                .apply(&config.weights)
                .with_max_iterations(config.max_iterations);
            let mut state = SolverState::new(problem.clone(), weights, *seed)
                .expect("validated weights on a generated problem");
            let stop = AtomicBool::new(false);
            let t0 = Instant::now();
            let outcome = state.solve(&stop);
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            BenchRow {
                strategy: spec.label(),
                fill: *fill,
                seed: *seed,
                activities: problem.activity_count(),
                iterations: outcome.iterations,
                wall_ms,
                scheduled_pct: state.best_scheduled_percent(),
                cap_hit: outcome.reason == StopReason::IterationCap,
            }
        })
        .collect();

    let mut aggregates = Vec::new();
    for spec in &config.strategies {
        let label = spec.label();
        for &fill in &config.fills {
            let cell: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.strategy == label && r.fill == fill)
                .collect();
            let (mean_iterations, sd_iterations) =
                mean_sd(cell.iter().map(|r| r.iterations as f64));
            let (mean_wall_ms, sd_wall_ms) = mean_sd(cell.iter().map(|r| r.wall_ms));
            let (mean_scheduled_pct, sd_scheduled_pct) =
                mean_sd(cell.iter().map(|r| r.scheduled_pct));
            aggregates.push(Aggregate {
                strategy: label.clone(),
                fill,
                runs: cell.len(),
                completed: cell.iter().filter(|r| !r.cap_hit).count(),
                mean_iterations,
                sd_iterations,
                mean_wall_ms,
                sd_wall_ms,
                mean_scheduled_pct,
                sd_scheduled_pct,
            });
        }
    }
    Ok(BenchResults { rows, aggregates })
}

/// One CSV with run rows (`kind = run`) followed by cell means (`kind = mean`).
pub fn write_csv<W: std::io::Write>(results: &BenchResults, out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "kind",
        "strategy",
        "fill",
        "seed",
        "runs",
        "activities",
        "iterations",
        "iterations_sd",
        "wall_ms",
        "wall_ms_sd",
        "scheduled_pct",
        "scheduled_pct_sd",
        "completed",
    ])?;
    for r in &results.rows {
        w.write_record([
            "run".to_string(),
            r.strategy.clone(),
            r.fill.to_string(),
            r.seed.to_string(),
            "1".into(),
            r.activities.to_string(),
            r.iterations.to_string(),
            String::new(),
            format!("{:.3}", r.wall_ms),
            String::new(),
            format!("{:.3}", r.scheduled_pct),
            String::new(),
            u8::from(!r.cap_hit).to_string(),
        ])?;
    }
    for a in &results.aggregates {
        w.write_record([
            "mean".to_string(),
            a.strategy.clone(),
            a.fill.to_string(),
            String::new(),
            a.runs.to_string(),
            String::new(),
            format!("{:.3}", a.mean_iterations),
            format!("{:.3}", a.sd_iterations),
            format!("{:.3}", a.mean_wall_ms),
            format!("{:.3}", a.sd_wall_ms),
            format!("{:.3}", a.mean_scheduled_pct),
            format!("{:.3}", a.sd_scheduled_pct),
            a.completed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

const COLORS: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

type Panel = (&'static str, fn(&Aggregate) -> f64);

/// Two-panel line chart: mean iterations and mean scheduled percentage
/// against fill, one line per strategy.
pub fn render_svg(aggregates: &[Aggregate]) -> String {
    let (pw, ph, pad) = (360.0, 240.0, 48.0);
    let width = 2.0 * (pw + 2.0 * pad);
    let height = ph + 2.0 * pad + 30.0;
    let mut strategies: Vec<&str> = Vec::new();
    for a in aggregates {
        if !strategies.contains(&a.strategy.as_str()) {
            strategies.push(&a.strategy);
        }
    }
    let fmin = aggregates
        .iter()
        .map(|a| a.fill)
        .fold(f64::INFINITY, f64::min);
    let fmax = aggregates
        .iter()
        .map(|a| a.fill)
        .fold(f64::NEG_INFINITY, f64::max);
    let fspan = if fmax > fmin { fmax - fmin } else { 1.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let panels: [Panel; 2] = [
        ("mean iterations", |a| a.mean_iterations),
        ("mean scheduled %", |a| a.mean_scheduled_pct),
    ];
    for (p, (title, value)) in panels.iter().enumerate() {
        let ox = p as f64 * (pw + 2.0 * pad) + pad;
        let oy = pad;
        let vmax = aggregates.iter().map(value).fold(0.0, f64::max).max(1e-9);
        let x = |f: f64| ox + (f - fmin) / fspan * pw;
        let y = |v: f64| oy + ph - v / vmax * ph;
        let _ = writeln!(
            svg,
            r##"<rect x="{ox}" y="{oy}" width="{pw}" height="{ph}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#,
            ox + pw / 2.0,
            oy - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{vmax:.1}</text><text x="{}" y="{}" text-anchor="end">0</text>"#,
            ox - 4.0,
            oy + 4.0,
            ox - 4.0,
            oy + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">fill %</text>"#,
            ox + pw / 2.0,
            oy + ph + 30.0
        );
        let mut fills: Vec<f64> = aggregates.iter().map(|a| a.fill).collect();
        fills.sort_by(f64::total_cmp);
        fills.dedup();
        for f in fills {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{f}</text>"#,
                x(f),
                oy + ph + 14.0
            );
        }
        for (s, name) in strategies.iter().enumerate() {
            let color = COLORS[s % COLORS.len()];
            let mut pts: Vec<(f64, f64)> = aggregates
                .iter()
                .filter(|a| a.strategy == *name)
                .map(|a| (x(a.fill), y(value(a))))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = pts
                .iter()
                .map(|(px, py)| format!("{px:.1},{py:.1}"))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                path.join(" ")
            );
            for (px, py) in pts {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="{color}"/>"#
                );
            }
        }
    }
    for (s, name) in strategies.iter().enumerate() {
        let lx = pad + s as f64 * 140.0;
        let ly = height - 10.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{}"/><text x="{}" y="{ly}">{name}</text>"#,
            ly - 10.0,
            COLORS[s % COLORS.len()],
            lx + 16.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
