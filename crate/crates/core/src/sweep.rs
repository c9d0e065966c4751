//! Parameter sweeps: every (value, protocol, seed) combination of one base
//! configuration, run in parallel and reduced to an aggregate CSV plus one
//! plot-data file per metric.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forwarding::Protocol;
use crate::metrics::{sig6, MetricsLedger};
use crate::sim::{run, SimConfig};
use crate::types::PacketClass;

/// Sweep description as written in a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Base configuration, relative to the spec file. Built-in defaults when absent.
    #[serde(default)]
    pub base_config: Option<PathBuf>,
    /// Dotted config path, e.g. `traffic.critical_rate`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Seeds per point; seeds run from `first_seed`.
    pub seeds: u32,
    #[serde(default)]
    pub first_seed: u64,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<Protocol>,
    /// Output directory used when none is given on the command line.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_protocols() -> Vec<Protocol> {
    vec![Protocol::Tdthr]
}

/// A spec with its base configuration loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub base: SimConfig,
    pub parameter: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub protocols: Vec<Protocol>,
    pub out: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_path(path: &Path) -> Result<SweepSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the base configuration (relative paths resolve against `dir`)
    /// and checks the spec.
    pub fn resolve(&self, dir: &Path) -> Result<Sweep> {
        let base = match &self.base_config {
            Some(p) => SimConfig::from_path(&dir.join(p))?,
            None => SimConfig::default(),
        };
        let sweep = Sweep {
            base,
            parameter: self.parameter.clone(),
            values: self.values.clone(),
            seeds: (0..self.seeds as u64).map(|i| self.first_seed + i).collect(),
            protocols: self.protocols.clone(),
            out: self.out.as_ref().map(|o| dir.join(o)),
        };
        sweep.validate()?;
        Ok(sweep)
    }
}

impl Sweep {
    pub fn new(base: SimConfig, parameter: &str, values: Vec<f64>, seeds: Vec<u64>, protocols: Vec<Protocol>) -> Self {
        Sweep {
            base,
            parameter: parameter.to_string(),
            values,
            seeds,
            protocols,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.values.is_empty() {
            v.push("values: the value list is empty".to_string());
        }
        if self.seeds.is_empty() {
            v.push("seeds = 0 must be >= 1".to_string());
        }
        if self.protocols.is_empty() {
            v.push("protocols: at least one protocol is required".to_string());
        }
        if let Some(x) = self.values.first() {
            if let Err(Error::Config(m)) = self.base.with_parameter(&self.parameter, *x) {
                v.push(m);
            }
        }
        v.extend(self.base.violations().into_iter().map(|m| format!("base config: {m}")));
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn run_count(&self) -> usize {
        self.values.len() * self.seeds.len() * self.protocols.len()
    }

    /// Every run's configuration, in canonical order (value, protocol, seed).
    pub fn jobs(&self) -> Vec<(RunKey, Result<SimConfig>)> {
        let mut out = Vec::with_capacity(self.run_count());
        for (vi, &value) in self.values.iter().enumerate() {
            for &protocol in &self.protocols {
                for &seed in &self.seeds {
                    let key = RunKey {
                        value_index: vi,
                        value,
                        protocol,
                        seed,
                    };
                    let cfg = self.base.with_parameter(&self.parameter, value).map(|mut c| {
                        c.rng_seed = seed;
                        c.routing.protocol = protocol;
                        c
                    });
                    out.push((key, cfg));
                }
            }
        }
        out
    }

    /// Runs everything on the current rayon pool. The result order does not
    /// depend on completion order.
    pub fn run(&self) -> Vec<RunRecord> {
        let mut records: Vec<RunRecord> = self
            .jobs()
            .into_par_iter()
            .map(|(key, cfg)| RunRecord {
                key,
                outcome: cfg.and_then(|c| run(&c)).map_err(|e| e.to_string()),
            })
            .collect();
        records.sort_by(|a, b| a.key.cmp(&b.key));
        records
    }

    /// Runs on a dedicated pool of `jobs` threads.
    pub fn run_with_jobs(&self, jobs: usize) -> Result<Vec<RunRecord>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| self.run()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub value_index: usize,
    pub value: f64,
    pub protocol: Protocol,
    pub seed: u64,
}

impl RunKey {
    fn cmp(&self, other: &RunKey) -> std::cmp::Ordering {
        let p = |k: &RunKey| Protocol::ALL.iter().position(|x| *x == k.protocol);
        (self.value_index, p(self), self.seed).cmp(&(other.value_index, p(other), other.seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub outcome: std::result::Result<MetricsLedger, String>,
}

/// Scalar metrics available for plot data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Prr(PacketClass),
    MeanDelay(PacketClass),
    Ecpp,
    Lifetime,
    DeadlineMissRatio,
}

impl Metric {
    pub fn all() -> Vec<Metric> {
        let mut m: Vec<Metric> = PacketClass::ALL.iter().map(|c| Metric::Prr(*c)).collect();
        m.extend(PacketClass::ALL.iter().map(|c| Metric::MeanDelay(*c)));
        m.extend([Metric::Ecpp, Metric::Lifetime, Metric::DeadlineMissRatio]);
        m
    }

    pub fn name(self) -> String {
        match self {
            Metric::Prr(c) => format!("prr_{}", c.short_name()),
            Metric::MeanDelay(c) => format!("delay_mean_{}", c.short_name()),
            Metric::Ecpp => "ecpp".into(),
            Metric::Lifetime => "lifetime".into(),
            Metric::DeadlineMissRatio => "deadline_miss_ratio".into(),
        }
    }

    pub fn of(self, l: &MetricsLedger) -> Option<f64> {
        match self {
            Metric::Prr(c) => l.prr(c),
            Metric::MeanDelay(c) => l.mean_delay(c).map(|d| d.mean),
            Metric::Ecpp => l.ecpp(),
            Metric::Lifetime => Some(l.lifetime()),
            Metric::DeadlineMissRatio => l.deadline_miss_ratio(),
        }
    }
}

/// Mean, min and max of one metric over the seeds of one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub protocol: Protocol,
    pub x: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Runs that produced a value.
    pub n: usize,
}

/// One point per (value, protocol) with at least one defined sample.
pub fn plot_points(records: &[RunRecord], metric: Metric) -> Vec<PlotPoint> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let mut out: Vec<PlotPoint> = Vec::new();
    let mut samples: Vec<f64> = Vec::new();
    let mut flush = |key: &RunKey, samples: &mut Vec<f64>| {
        if !samples.is_empty() {
            // Sum in seed order so the mean is independent of completion order.
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            out.push(PlotPoint {
                protocol: key.protocol,
                x: key.value,
                mean,
                min: samples.iter().copied().fold(f64::INFINITY, f64::min),
                max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n: samples.len(),
            });
        }
        samples.clear();
    };
    for (i, r) in sorted.iter().enumerate() {
        if let Ok(l) = &r.outcome {
            if let Some(v) = metric.of(l) {
                samples.push(v);
            }
        }
        let last = sorted
            .get(i + 1)
            .is_none_or(|n| (n.key.value_index, n.key.protocol) != (r.key.value_index, r.key.protocol));
        if last {
            flush(&r.key, &mut samples);
        }
    }
    out
}

/// One row per run; failed runs keep their key and carry the failure cause.
pub fn aggregate_csv(parameter: &str, records: &[RunRecord]) -> String {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.key.cmp(&b.key));
    let header = MetricsLedger::csv_header();
    let width = header.split(',').count();
    let mut s = format!("parameter,value,{header},status,error\n");
    for r in sorted {
        let row = match &r.outcome {
            Ok(l) => format!("{},ok,", l.csv_row()),
            Err(e) => {
                let mut cols = vec![String::new(); width];
                cols[1] = r.key.seed.to_string();
                cols[2] = r.key.protocol.name().to_string();
                format!("{},failed,{}", cols.join(","), e.replace([',', '\n'], ";"))
            }
        };
        s.push_str(&format!("{parameter},{},{row}\n", sig6(r.key.value)));
    }
    s
}

/// `x` plus mean/min/max/n columns per protocol.
pub fn plot_csv(records: &[RunRecord], metric: Metric, protocols: &[Protocol]) -> String {
    let points = plot_points(records, metric);
    let mut xs: Vec<(usize, f64)> = records.iter().map(|r| (r.key.value_index, r.key.value)).collect();
    xs.sort_by_key(|x| x.0);
    xs.dedup_by_key(|x| x.0);
    let mut s = String::from("x");
    for p in protocols {
        let n = p.name();
        s.push_str(&format!(",{n}_mean,{n}_min,{n}_max,{n}_n"));
    }
    s.push('\n');
    for (_, x) in xs {
        s.push_str(&sig6(x));
        for p in protocols {
            match points.iter().find(|q| q.protocol == *p && q.x == x) {
                Some(q) => s.push_str(&format!(",{},{},{},{}", sig6(q.mean), sig6(q.min), sig6(q.max), q.n)),
                None => s.push_str(",,,,0"),
            }
        }
        s.push('\n');
    }
    s
}

/// Writes `runs.csv` and `plot_<metric>.csv` into `dir`.
pub fn write_outputs(dir: &Path, sweep: &Sweep, records: &[RunRecord]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let runs = dir.join("runs.csv");
    fs::write(&runs, aggregate_csv(&sweep.parameter, records))?;
    written.push(runs);
    for m in Metric::all() {
        let p = dir.join(format!("plot_{}.csv", m.name()));
        fs::write(&p, plot_csv(records, m, &sweep.protocols))?;
        written.push(p);
    }
    Ok(written)
}
