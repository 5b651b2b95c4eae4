use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{lda_accuracy, DEFAULT_RIDGE};
use crate::concrete::seeded_rng;
use crate::data::{load_tabular, save_csv, Dataset, TabularSchema};
use crate::error::{Error, Result};
use crate::topology::NodeLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayoutSpec {
    Grid { rows: usize, cols: usize },
    Ring { n: usize },
}

impl LayoutSpec {
    pub fn n_nodes(&self) -> usize {
        match *self {
            Self::Grid { rows, cols } => rows * cols,
            Self::Ring { n } => n,
        }
    }

    pub fn build(&self) -> NodeLayout {
        match *self {
            Self::Grid { rows, cols } => NodeLayout::grid(rows, cols),
            Self::Ring { n } => NodeLayout::ring(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// A compact cluster of `m` nodes.
    Near,
    /// `m` mutually distant nodes.
    Far,
    /// `m` redundant nodes on one side, a complementary node on the other.
    Split,
}

impl std::str::FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near" => Ok(Self::Near),
            "far" => Ok(Self::Far),
            "split" => Ok(Self::Split),
            other => Err(Error::Parameter(format!("unknown placement `{other}`"))),
        }
    }
}

/// Shape of the class-conditional mean shift on an informative node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// `(+1, -1, +1, ...)`: raises the within-trial variance.
    Alternating,
    /// `(1, 1, ..., 1)`: a pure offset, variance unchanged.
    Offset,
}

impl Pattern {
    fn value(self, l: usize) -> f64 {
        match self {
            Self::Alternating if l % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedNode {
    pub node: usize,
    /// Bit of the class index this node encodes.
    pub bit: usize,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSpec {
    pub layout: LayoutSpec,
    pub m: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub placement: Placement,
    pub snr: f64,
    pub seed: u64,
}

fn default_feature_dim() -> usize {
    8
}

pub const PRESETS: &[&str] = &["split-grid-8", "split-grid-8x8", "near-grid-8", "far-grid-8", "near-ring-8"];

pub fn preset(name: &str, seed: u64) -> Result<PlantedSpec> {
    let (layout, placement) = match name {
        "split-grid-8" => (LayoutSpec::Grid { rows: 1, cols: 8 }, Placement::Split),
        "split-grid-8x8" => (LayoutSpec::Grid { rows: 8, cols: 8 }, Placement::Split),
        "near-grid-8" => (LayoutSpec::Grid { rows: 2, cols: 4 }, Placement::Near),
        "far-grid-8" => (LayoutSpec::Grid { rows: 2, cols: 4 }, Placement::Far),
        "near-ring-8" => (LayoutSpec::Ring { n: 8 }, Placement::Near),
        other => {
            return Err(Error::Parameter(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(PlantedSpec {
        layout,
        m: 3,
        feature_dim: default_feature_dim(),
        n_samples: 600,
        n_classes: 4,
        placement,
        snr: 3.0,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub spec: PlantedSpec,
    pub layout: NodeLayout,
    pub data: Dataset,
    pub planted: Vec<PlantedNode>,
    /// Minimal node sets from which every class bit can be read.
    pub informative_sets: Vec<Vec<usize>>,
    /// Linear-probe accuracy of all planted nodes on a held-out half.
    pub self_check: f64,
}

impl SyntheticTask {
    pub fn informative_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.planted.iter().map(|p| p.node).collect();
        nodes.sort_unstable();
        nodes
    }

    pub fn metadata(&self, data_file: &str) -> TaskMetadata {
        TaskMetadata {
            spec: self.spec.clone(),
            layout: self.layout.clone(),
            planted: self.planted.clone(),
            informative_sets: self.informative_sets.clone(),
            self_check: self.self_check,
            data_file: data_file.to_string(),
        }
    }
}

/// Everything about a task except its samples, stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskMetadata {
    pub spec: PlantedSpec,
    pub layout: NodeLayout,
    pub planted: Vec<PlantedNode>,
    pub informative_sets: Vec<Vec<usize>>,
    pub self_check: f64,
    /// CSV file name, relative to the metadata file.
    pub data_file: String,
}

fn class_bits(n_classes: usize) -> usize {
    (usize::BITS - (n_classes - 1).leading_zeros()) as usize
}

fn validate(spec: &PlantedSpec) -> Result<()> {
    let n = spec.layout.n_nodes();
    if n == 0 {
        return Err(Error::Parameter("layout has no nodes".into()));
    }
    if spec.m == 0 || spec.m > n {
        return Err(Error::Parameter(format!("need 1 <= M <= N, got M = {}, N = {n}", spec.m)));
    }
    if spec.n_classes < 2 {
        return Err(Error::Parameter("need at least 2 classes".into()));
    }
    if spec.feature_dim == 0 {
        return Err(Error::Parameter("feature dimension must be >= 1".into()));
    }
    if spec.n_samples < 2 * spec.n_classes {
        return Err(Error::Parameter(format!(
            "{} samples are too few for {} classes",
            spec.n_samples, spec.n_classes
        )));
    }
    if !(spec.snr >= 0.0 && spec.snr.is_finite()) {
        return Err(Error::Parameter(format!("snr must be finite and >= 0, got {}", spec.snr)));
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nodes ordered by a key, ties by index.
fn ordered_by(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
    idx
}

fn place(spec: &PlantedSpec, coords: &[Vec<f64>]) -> Result<(Vec<PlantedNode>, Vec<Vec<usize>>)> {
    let n = coords.len();
    let bits = class_bits(spec.n_classes);
    let m = spec.m;
    let round_robin = |nodes: Vec<usize>| -> Result<(Vec<PlantedNode>, Vec<Vec<usize>>)> {
        if m < bits {
            return Err(Error::Parameter(format!(
                "{m} planted nodes cannot carry {bits} class bits"
            )));
        }
        let planted: Vec<PlantedNode> = nodes
            .iter()
            .enumerate()
            .map(|(k, &node)| PlantedNode {
                node,
                bit: k % bits,
                pattern: Pattern::Alternating,
            })
            .collect();
        let mut set = nodes;
        set.sort_unstable();
        Ok((planted, vec![set]))
    };
    match spec.placement {
        Placement::Near => {
            let dim = coords[0].len();
            let centroid: Vec<f64> = (0..dim)
                .map(|k| coords.iter().map(|c| c[k]).sum::<f64>() / n as f64)
                .collect();
            let seed = ordered_by(n, |i| dist(&coords[i], &centroid))[0];
            let cluster = ordered_by(n, |i| dist(&coords[i], &coords[seed]));
            round_robin(cluster[..m].to_vec())
        }
        Placement::Far => {
            let mut chosen = vec![0];
            while chosen.len() < m {
                let next = (0..n)
                    .filter(|i| !chosen.contains(i))
                    .map(|i| {
                        let d = chosen.iter().map(|&c| dist(&coords[i], &coords[c])).fold(f64::INFINITY, f64::min);
                        (i, d)
                    })
                    .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                        Some((_, bd)) if bd >= d => best,
                        _ => Some((i, d)),
                    })
                    .expect("m <= n")
                    .0;
                chosen.push(next);
            }
            round_robin(chosen)
        }
        Placement::Split => {
            if bits != 2 {
                return Err(Error::Parameter(format!(
                    "split placement encodes exactly 2 class bits (3 or 4 classes), got {} classes",
                    spec.n_classes
                )));
            }
            if m + 1 > n {
                return Err(Error::Parameter(format!("split placement needs M + 1 <= N nodes, got N = {n}")));
            }
            let side_a: Vec<usize> = ordered_by(n, |i| coords[i][0])[..m].to_vec();
            let dim = coords[0].len();
            let centroid: Vec<f64> = (0..dim)
                .map(|k| side_a.iter().map(|&a| coords[a][k]).sum::<f64>() / m as f64)
                .collect();
            let side_b = *ordered_by(n, |i| -dist(&coords[i], &centroid))
                .iter()
                .find(|i| !side_a.contains(i))
                .expect("a node outside side A exists");
            let mut planted: Vec<PlantedNode> = side_a
                .iter()
                .map(|&node| PlantedNode {
                    node,
                    bit: 0,
                    pattern: Pattern::Alternating,
                })
                .collect();
            planted.push(PlantedNode {
                node: side_b,
                bit: 1,
                pattern: Pattern::Offset,
            });
            let sets = side_a
                .iter()
                .map(|&a| {
                    let mut s = vec![a, side_b];
                    s.sort_unstable();
                    s
                })
                .collect();
            Ok((planted, sets))
        }
    }
}

/// Planted classification task on a node layout.
///
/// Labels are balanced and shuffled. Each planted node adds
/// `bit * snr * pattern` to standard normal noise, where `bit` is one bit of
/// the class index; all other nodes are pure noise.
pub fn make_planted_task(spec: &PlantedSpec) -> Result<SyntheticTask> {
    validate(spec)?;
    let layout = spec.layout.build();
    let coords = layout.coords().expect("generated layouts have coordinates").to_vec();
    let (planted, informative_sets) = place(spec, &coords)?;

    let (n, l, c) = (coords.len(), spec.feature_dim, spec.n_classes);
    let mut rng = seeded_rng(spec.seed);
    let mut labels: Vec<usize> = (0..spec.n_samples).map(|i| i % c).collect();
    labels.shuffle(&mut rng);

    let mut shift = vec![vec![0.0; l]; n * c];
    for p in &planted {
        for class in 0..c {
            if (class >> p.bit) & 1 == 1 {
                for (k, s) in shift[class * n + p.node].iter_mut().enumerate() {
                    *s += spec.snr * p.pattern.value(k);
                }
            }
        }
    }
    let mut features = Vec::with_capacity(spec.n_samples * n * l);
    for &y in &labels {
        for node in 0..n {
            for s in &shift[y * n + node][..l] {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(noise + s);
            }
        }
    }
    let data = Dataset::new(n, l, c, features, labels)?;

    let half = data.len() / 2;
    let (fit, held): (Vec<usize>, Vec<usize>) = ((0..half).collect(), (half..data.len()).collect());
    let mut nodes: Vec<usize> = planted.iter().map(|p| p.node).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let self_check = lda_accuracy(&data.subset(&fit), &data.subset(&held), &nodes, DEFAULT_RIDGE)?;

    Ok(SyntheticTask {
        spec: spec.clone(),
        layout,
        data,
        planted,
        informative_sets,
        self_check,
    })
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`; returns both paths.
pub fn save_task(task: &SyntheticTask, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{stem}.csv");
    let csv_path = dir.join(&csv_name);
    let json_path = dir.join(format!("{stem}.json"));
    save_csv(&task.data, &csv_path)?;
    let json = serde_json::to_string_pretty(&task.metadata(&csv_name))?;
    std::fs::write(&json_path, json + "\n")?;
    Ok((csv_path, json_path))
}

/// Reads a task from its metadata file and the CSV it names.
pub fn load_task(metadata_path: &Path) -> Result<SyntheticTask> {
    let meta: TaskMetadata = serde_json::from_str(&std::fs::read_to_string(metadata_path)?)?;
    let dir = metadata_path.parent().unwrap_or(Path::new("."));
    let schema = TabularSchema::new(meta.layout.len(), meta.spec.feature_dim, meta.spec.n_classes);
    let data = load_tabular(&dir.join(&meta.data_file), &schema)?;
    Ok(SyntheticTask {
        spec: meta.spec,
        layout: meta.layout,
        data,
        planted: meta.planted,
        informative_sets: meta.informative_sets,
        self_check: meta.self_check,
    })
}
