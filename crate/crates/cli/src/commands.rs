use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use cgs_core::baselines::{greedy_constrained_select, mi_rank, oracle_search, Evaluator, LinearProbe};
use cgs_core::data::{load_tabular, load_task, make_planted_task, preset, save_task, PlantedSpec, Splits, TabularSchema};
use cgs_core::selection::SelectionLayer;
use cgs_core::topology::{CommTopology, HardSelection, NodeLayout, TopologyKind, TopologySpec};
use cgs_core::train::{
    arch_calc as calc, sweep_threshold, train as fit, ArchInputs, ArchSpec, LayerSetup, MlpProbe, SweepConfig,
    SweepData,
};
use cgs_core::Error;
use serde::Serialize;

use crate::config::{EvaluatorKind, ExperimentConfig};
use crate::{ArchArgs, Common, Failure, GenerateArgs, LayerArg, ScoreArgs, SelectArgs, SweepArgs, TrainArgs};

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn pool(jobs: usize) -> std::result::Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))
}

pub fn generate(a: GenerateArgs) -> Outcome {
    let (spec, default_stem) = match (&a.preset, &a.spec) {
        (Some(name), _) => (preset(name, a.seed.unwrap_or(0))?, name.clone()),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            let mut spec: PlantedSpec = match path.extension().and_then(|e| e.to_str()) {
                Some("toml") => toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?,
                _ => serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?,
            };
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            (spec, "task".to_string())
        }
        (None, None) => return Err(usage("pass --preset or --spec")),
    };
    let task = make_planted_task(&spec)?;
    let (csv, json) = save_task(&task, &a.out, a.stem.as_deref().unwrap_or(&default_stem))?;
    println!("{}", csv.display());
    println!("{}", json.display());
    println!("self-check accuracy: {:.4}", task.self_check);
    Ok(())
}

fn resolve(c: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Usage)?,
        None => ExperimentConfig::default(),
    };
    if c.task.is_some() || c.preset.is_some() || c.csv.is_some() {
        cfg.task = c.task.clone();
        cfg.preset = c.preset.clone();
        cfg.csv = c.csv.clone();
    }
    macro_rules! set {
        ($field:ident, $value:expr) => {
            if let Some(v) = $value {
                cfg.$field = Some(v);
            }
        };
    }
    set!(feature_dim, c.feature_dim);
    set!(n_classes, c.classes);
    set!(topology, c.topology.clone());
    set!(vertices, c.m);
    set!(root, c.root);
    set!(out, c.out.clone());
    if let Some(s) = c.data_seed {
        cfg.data_seed = s;
    }
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if let Some(e) = c.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

struct Problem {
    layout: Option<NodeLayout>,
    topology: TopologySpec,
    splits: Splits,
}

impl Problem {
    fn load(cfg: &ExperimentConfig) -> std::result::Result<Self, Failure> {
        let (layout, data, default_m) = if let Some(path) = &cfg.task {
            let task = load_task(path).with_context(|| format!("loading task {}", path.display()))?;
            (Some(task.layout), Some(task.data), Some(task.spec.m))
        } else if let Some(name) = &cfg.preset {
            let task = make_planted_task(&preset(name, cfg.data_seed)?)?;
            (Some(task.layout), Some(task.data), Some(task.spec.m))
        } else if cfg.csv.is_none() {
            return Err(usage("no data: pass --task, --preset or --csv"));
        } else {
            (None, None, None)
        };
        let m = cfg.vertices.or(default_m).unwrap_or(3);
        let topology = match cfg.topology.as_deref().unwrap_or("line") {
            kind @ ("line" | "star") => TopologySpec {
                root: cfg.root,
                ..TopologySpec::new(kind.parse::<TopologyKind>()?, m)
            },
            path => {
                let spec = TopologySpec::load(Path::new(path)).with_context(|| format!("loading topology {path}"))?;
                if cfg.vertices.is_some_and(|v| v != spec.vertices) {
                    return Err(usage(format!(
                        "--M {} disagrees with the {} vertices in {path}",
                        m, spec.vertices
                    )));
                }
                spec
            }
        };
        let data = match data {
            Some(d) => d,
            None => {
                let csv = cfg.csv.as_ref().expect("checked above");
                let geometry = topology
                    .layout()?
                    .ok_or_else(|| usage("CSV input needs a topology file with `coords` or `distances`"))?;
                let schema = TabularSchema::new(
                    geometry.len(),
                    cfg.feature_dim.expect("validated"),
                    cfg.n_classes.expect("validated"),
                );
                load_tabular(csv, &schema).with_context(|| format!("loading {}", csv.display()))?
            }
        };
        let splits = data.split(cfg.test_fraction, cfg.val_fraction, cfg.data_seed)?;
        Ok(Self {
            layout,
            topology,
            splits,
        })
    }

    fn build(&self, threshold: Option<f64>) -> cgs_core::Result<CommTopology> {
        self.topology.build(self.layout.as_ref(), threshold)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Serialize)]
struct TrainSummary {
    layer: &'static str,
    threshold: Option<f64>,
    selection: Vec<usize>,
    verdict: &'static str,
    val_accuracy: f64,
    test_accuracy: f64,
    epochs_ran: usize,
    best_epoch: usize,
}

fn verdict(layer: &SelectionLayer, sel: &HardSelection) -> &'static str {
    match layer {
        SelectionLayer::Independent(_) => "unconstrained",
        SelectionLayer::Conditional(c) if c.topology().check_edges(sel) => "feasible",
        SelectionLayer::Conditional(_) => "infeasible",
    }
}

pub fn train(a: TrainArgs) -> Outcome {
    let cfg = resolve(&a.common)?;
    let problem = Problem::load(&cfg)?;
    let threshold = a.threshold.or(cfg.threshold);
    let topology = match a.layer {
        LayerArg::Conditional => Some(problem.build(threshold)?),
        LayerArg::Vanilla => None,
    };
    let setup = match &topology {
        Some(t) => LayerSetup::Conditional(t),
        None => LayerSetup::Independent {
            m: cfg.vertices.unwrap_or(problem.topology.vertices),
        },
    };
    let s = &problem.splits;
    let model = pool(a.common.jobs)?.install(|| fit(&s.train, &s.val, setup, &cfg.train))?;
    let summary = TrainSummary {
        layer: match a.layer {
            LayerArg::Conditional => "conditional",
            LayerArg::Vanilla => "vanilla",
        },
        threshold: topology.as_ref().map(CommTopology::threshold),
        selection: model.selection.assignment.clone(),
        verdict: verdict(&model.layer, &model.selection),
        val_accuracy: model.evaluate(&s.val)?.1,
        test_accuracy: model.evaluate(&s.test)?.1,
        epochs_ran: model.epochs_ran,
        best_epoch: model.best_epoch,
    };
    let out = out_dir(&cfg);
    let text = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n";
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    model.save(&out.join("model.json"))?;
    write(&out, "curves.csv", &model.curves_csv())?;
    write(&out, "train.json", &text)?;
    print!("{text}");
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let cfg = resolve(&a.common)?;
    let problem = Problem::load(&cfg)?;
    let seeds = match a.repeats {
        Some(0) => return Err(usage("--repeats must be at least 1")),
        Some(r) => {
            let base = a.common.seed.unwrap_or(0);
            (base..base + r).collect()
        }
        None => cfg.seeds.clone(),
    };
    let config = SweepConfig {
        thresholds: a.thresholds.unwrap_or_else(|| cfg.thresholds.clone()),
        methods: a.methods.unwrap_or_else(|| cfg.methods.clone()),
        seeds,
        train: cfg.train.clone(),
        bins: cfg.bins,
        record_wall_time: a.wall_time || cfg.record_wall_time,
    };
    config.validate().map_err(usage)?;
    let topology = problem.build(Some(config.thresholds[0]))?;
    let feasible_somewhere = config
        .thresholds
        .iter()
        .any(|&t| !matches!(topology.at_threshold(t).masks(), Err(Error::InfeasibleConstraints { .. })));
    if !feasible_somewhere {
        return Err(Failure::Runtime(anyhow!("the constraints are infeasible at every threshold")));
    }
    let s = &problem.splits;
    let data = SweepData {
        train: &s.train,
        val: &s.val,
        test: &s.test,
    };
    let report = pool(a.common.jobs)?.install(|| sweep_threshold(data, &topology, &config))?;
    let out = out_dir(&cfg);
    write(&out, "sweep.csv", &report.to_csv())?;
    write(&out, "sweep.json", &report.to_json()?)?;
    let long = report.to_long_csv();
    write(&out, "sweep_long.csv", &long)?;
    print!("{long}");
    Ok(())
}

#[derive(Serialize)]
struct SelectSummary {
    layer: &'static str,
    selection: Vec<usize>,
    distinct: bool,
    verdict: &'static str,
}

pub fn select(a: SelectArgs) -> Outcome {
    let model = cgs_core::train::TrainedModel::load(&a.model)
        .with_context(|| format!("loading model {}", a.model.display()))?;
    let selection = model.layer.infer()?;
    let summary = SelectSummary {
        layer: match model.layer {
            SelectionLayer::Independent(_) => "vanilla",
            SelectionLayer::Conditional(_) => "conditional",
        },
        distinct: selection.is_distinct(),
        verdict: verdict(&model.layer, &selection),
        selection: selection.assignment,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n";
    if let Some(out) = &a.out {
        write(out, "selection.json", &text)?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Oracle,
    Greedy,
}

pub fn score(a: ScoreArgs, scorer: Scorer) -> Outcome {
    let cfg = resolve(&a.common)?;
    let problem = Problem::load(&cfg)?;
    let thresholds = match (a.threshold, cfg.threshold, problem.topology.threshold) {
        (Some(ts), _, _) => ts,
        (None, Some(t), _) | (None, None, Some(t)) => vec![t],
        (None, None, None) => return Err(usage("pass --threshold")),
    };
    let s = &problem.splits;
    let kind = a.evaluator.unwrap_or(cfg.evaluator);
    let mlp = MlpProbe {
        hidden: cfg.train.hidden,
        ..MlpProbe::new(&s.train, &s.val, cfg.train.seed)
    };
    let probe = LinearProbe::new(&s.train, &s.val);
    let evaluator: &dyn Evaluator = match kind {
        EvaluatorKind::Mlp => &mlp,
        EvaluatorKind::Probe => &probe,
    };
    let bins = a.bins.unwrap_or(cfg.bins);
    let wall = a.wall_time || cfg.record_wall_time;
    let pool = pool(a.common.jobs)?;
    let (method, file) = match scorer {
        Scorer::Oracle => ("oracle", "oracle.csv"),
        Scorer::Greedy => ("greedy-mi", "baseline.csv"),
    };
    let ranking = match scorer {
        Scorer::Greedy => Some(mi_rank(&s.train, bins)?),
        Scorer::Oracle => None,
    };
    let mut csv = String::from("threshold,method,selection,score,status,wall_time\n");
    for t in thresholds {
        let start = Instant::now();
        let topo = problem.build(Some(t))?;
        let found = match &ranking {
            Some(r) => greedy_constrained_select(r, topo.distances(), topo.graph(), topo.thresholds())?
                .map(|sel| evaluator.score(&sel).map(|score| (sel, score)))
                .transpose()?,
            None => match pool.install(|| oracle_search(topo.distances(), topo.graph(), topo.thresholds(), evaluator)) {
                Ok(r) => Some((r.selection, r.score)),
                Err(Error::InfeasibleConstraints { .. }) => None,
                Err(e) => return Err(e.into()),
            },
        };
        let elapsed = if wall {
            format!("{:?}", start.elapsed().as_secs_f64())
        } else {
            String::new()
        };
        match found {
            Some((sel, score)) => csv.push_str(&format!("{t:?},{method},{sel},{score:?},ok,{elapsed}\n")),
            None => csv.push_str(&format!("{t:?},{method},,,infeasible,{elapsed}\n")),
        }
    }
    write(&out_dir(&cfg), file, &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn arch_calc(a: ArchArgs) -> Outcome {
    let inputs = ArchInputs {
        c: a.c,
        t: a.t,
        f_t: a.f_t,
        f_s: a.f_s,
        n_c: a.n_c,
    };
    let report = calc(&ArchSpec::msfbcnn(), inputs).map_err(usage)?;
    let table = report.to_table();
    let json = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n";
    if let Some(out) = &a.out {
        write(out, "arch.txt", &table)?;
        write(out, "arch.json", &json)?;
    }
    print!("{}", if a.json { &json } else { &table });
    Ok(())
}
