use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_constrained_select, mi_rank, oracle_search, Evaluator, LinearProbe, DEFAULT_BINS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::topology::{HardSelection, ENUMERATION_MAX_NODES, ENUMERATION_MAX_VERTICES};
use crate::topology::CommTopology;
use crate::train::{train, LayerSetup, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Conditional,
    GreedyMi,
    Oracle,
    Vanilla,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Conditional, Self::GreedyMi, Self::Oracle, Self::Vanilla];

    pub fn name(self) -> &'static str {
        match self {
            Self::Conditional => "conditional",
            Self::GreedyMi => "greedy-mi",
            Self::Oracle => "oracle",
            Self::Vanilla => "vanilla",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Infeasible,
    Intractable,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Infeasible => "infeasible",
            Self::Intractable => "intractable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub bins: usize,
    pub record_wall_time: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.3, 0.5, 0.75, 1.0],
            methods: Method::ALL.to_vec(),
            seeds: (0..10).collect(),
            train: TrainConfig::default(),
            bins: DEFAULT_BINS,
            record_wall_time: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::Parameter("sweep needs thresholds, methods and seeds".into()));
        }
        if let Some(t) = self.thresholds.iter().find(|t| t.is_nan() || **t < 0.0) {
            return Err(Error::Parameter(format!("threshold must be nonnegative, got {t}")));
        }
        if self.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parameter("thresholds must be sorted ascending".into()));
        }
        if self.bins < 2 {
            return Err(Error::Parameter("bins must be at least 2".into()));
        }
        self.train.validate()
    }
}

/// Train, validation and test portions of the task being swept.
#[derive(Debug, Clone, Copy)]
pub struct SweepData<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub test: &'a Dataset,
}

/// One `(T, method, seed)` cell. `test_accuracy` is the linear-probe score of
/// the selection (fit on train, scored on test); `model_accuracy` is the
/// jointly trained classifier's test accuracy for the learned layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub method: Method,
    pub seed: u64,
    pub status: CellStatus,
    pub test_accuracy: Option<f64>,
    pub selection: Option<HardSelection>,
    pub epochs_ran: Option<usize>,
    pub model_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub threshold: f64,
    pub method: Method,
    /// Rows with status `ok`.
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; zero for a single row.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

fn opt<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn opt_f(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

impl SweepReport {
    pub fn rows_for(&self, method: Method, threshold: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.threshold == threshold)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for &t in &self.config.thresholds {
            for &method in &self.config.methods {
                let acc: Vec<f64> = self
                    .rows_for(method, t)
                    .filter(|r| r.status == CellStatus::Ok)
                    .filter_map(|r| r.test_accuracy)
                    .collect();
                let stats = mean_std(&acc);
                out.push(SummaryRow {
                    threshold: t,
                    method,
                    n: acc.len(),
                    mean: stats.map(|s| s.0),
                    std: stats.map(|s| s.1),
                });
            }
        }
        out
    }

    pub fn summary_for(&self, method: Method, threshold: f64) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .find(|s| s.method == method && s.threshold == threshold)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,method,seed,test_accuracy,selection,epochs_ran,status,model_accuracy");
        if self.config.record_wall_time {
            out.push_str(",wall_time");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{},{},{},{},{},{},{}",
                r.threshold,
                r.method,
                r.seed,
                opt_f(r.test_accuracy),
                opt(&r.selection),
                opt(&r.epochs_ran),
                r.status.name(),
                opt_f(r.model_accuracy),
            ));
            if self.config.record_wall_time {
                out.push_str(&format!(",{}", opt_f(r.wall_time)));
            }
            out.push('\n');
        }
        out
    }

    /// Plot-ready long format: one line per `(T, method)`.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from("T,method,mean,std,n\n");
        for s in self.summary() {
            out.push_str(&format!(
                "{:?},{},{},{},{}\n",
                s.threshold,
                s.method,
                opt_f(s.mean),
                opt_f(s.std),
                s.n
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn tractable(topology: &CommTopology) -> bool {
    topology.n_nodes() <= ENUMERATION_MAX_NODES && topology.n_vertices() <= ENUMERATION_MAX_VERTICES
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Learned { method: Method, t: Option<f64>, seed: u64 },
    Greedy { t: f64 },
    Oracle { t: f64 },
}

struct Outcome {
    status: CellStatus,
    test_accuracy: Option<f64>,
    selection: Option<HardSelection>,
    epochs_ran: Option<usize>,
    model_accuracy: Option<f64>,
    wall_time: f64,
}

impl Outcome {
    fn status(status: CellStatus, wall_time: f64) -> Self {
        Self {
            status,
            test_accuracy: None,
            selection: None,
            epochs_ran: None,
            model_accuracy: None,
            wall_time,
        }
    }
}

fn run_job(job: Job, data: SweepData<'_>, topology: &CommTopology, config: &SweepConfig) -> Result<Outcome> {
    let start = Instant::now();
    let probe = LinearProbe::new(data.train, data.test);
    let scored = |sel: HardSelection, epochs: Option<usize>, model: Option<f64>| -> Result<Outcome> {
        Ok(Outcome {
            status: CellStatus::Ok,
            test_accuracy: Some(probe.score(&sel)?),
            selection: Some(sel),
            epochs_ran: epochs,
            model_accuracy: model,
            wall_time: start.elapsed().as_secs_f64(),
        })
    };
    match job {
        Job::Learned { method, t, seed } => {
            let cfg = TrainConfig { seed, ..config.train.clone() };
            let at_t = t.map(|t| topology.at_threshold(t));
            let setup = match &at_t {
                Some(topo) => {
                    if let Err(Error::InfeasibleConstraints { .. }) = topo.masks() {
                        return Ok(Outcome::status(CellStatus::Infeasible, start.elapsed().as_secs_f64()));
                    }
                    LayerSetup::Conditional(topo)
                }
                None => LayerSetup::Independent { m: topology.n_vertices() },
            };
            debug_assert_eq!(method == Method::Vanilla, t.is_none());
            let model = train(data.train, data.val, setup, &cfg)?;
            let (_, acc) = model.evaluate(data.test)?;
            scored(model.selection.clone(), Some(model.epochs_ran), Some(acc))
        }
        Job::Greedy { t } => {
            let ranking = mi_rank(data.train, config.bins)?;
            let topo = topology.at_threshold(t);
            match greedy_constrained_select(&ranking, topo.distances(), topo.graph(), topo.thresholds())? {
                Some(sel) => scored(sel, None, None),
                None => Ok(Outcome::status(CellStatus::Infeasible, start.elapsed().as_secs_f64())),
            }
        }
        Job::Oracle { t } => {
            if !tractable(topology) {
                return Ok(Outcome::status(CellStatus::Intractable, start.elapsed().as_secs_f64()));
            }
            let topo = topology.at_threshold(t);
            match oracle_search(topo.distances(), topo.graph(), topo.thresholds(), &probe) {
                Ok(r) => scored(r.selection, None, None),
                Err(Error::InfeasibleConstraints { .. }) => {
                    Ok(Outcome::status(CellStatus::Infeasible, start.elapsed().as_secs_f64()))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs every method at every threshold and seed. Cells execute on the
/// current rayon pool and are assembled in `(T, method, seed)` order, so the
/// report does not depend on the number of threads. Deterministic methods
/// run once per threshold and vanilla once per seed; their rows repeat.
pub fn sweep_threshold(data: SweepData<'_>, topology: &CommTopology, config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    if data.train.n_nodes() != topology.n_nodes() {
        return Err(Error::Parameter(format!(
            "topology has {} nodes, data has {}",
            topology.n_nodes(),
            data.train.n_nodes()
        )));
    }
    let mut jobs = Vec::new();
    let has = |m: Method| config.methods.contains(&m);
    if has(Method::Vanilla) {
        for &seed in &config.seeds {
            jobs.push(Job::Learned { method: Method::Vanilla, t: None, seed });
        }
    }
    for &t in &config.thresholds {
        if has(Method::Conditional) {
            for &seed in &config.seeds {
                jobs.push(Job::Learned { method: Method::Conditional, t: Some(t), seed });
            }
        }
        if has(Method::GreedyMi) {
            jobs.push(Job::Greedy { t });
        }
        if has(Method::Oracle) {
            jobs.push(Job::Oracle { t });
        }
    }
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&job| run_job(job, data, topology, config))
        .collect::<Result<_>>()?;
    let find = |pred: &dyn Fn(&Job) -> bool| -> &Outcome {
        let i = jobs.iter().position(pred).expect("every cell has a job");
        &outcomes[i]
    };

    let mut rows = Vec::new();
    for &t in &config.thresholds {
        for &method in &config.methods {
            for &seed in &config.seeds {
                let o = match method {
                    Method::Vanilla => find(&|j| matches!(j, Job::Learned { t: None, seed: s, .. } if *s == seed)),
                    Method::Conditional => find(&|j| {
                        matches!(j, Job::Learned { t: Some(jt), seed: s, .. } if *jt == t && *s == seed)
                    }),
                    Method::GreedyMi => find(&|j| matches!(j, Job::Greedy { t: jt } if *jt == t)),
                    Method::Oracle => find(&|j| matches!(j, Job::Oracle { t: jt } if *jt == t)),
                };
                rows.push(SweepRow {
                    threshold: t,
                    method,
                    seed,
                    status: o.status,
                    test_accuracy: o.test_accuracy,
                    selection: o.selection.clone(),
                    epochs_ran: o.epochs_ran,
                    model_accuracy: o.model_accuracy,
                    wall_time: config.record_wall_time.then_some(o.wall_time),
                });
            }
        }
    }
    Ok(SweepReport {
        config: config.clone(),
        rows,
    })
}
