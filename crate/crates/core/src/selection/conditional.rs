use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{categorical, check_finite, entropy, gumbel_values, masked_logits, uniform_init};
use crate::autodiff::{Tape, Tensor, Var};
use crate::concrete::{argmax, concrete_rows, gumbel_max, GumbelNoise, Temperature, MASKED_LOGIT};
use crate::error::{Error, Result};
use crate::topology::{CommTopology, FeasibilityMask, HardSelection};

/// Selection distribution factorized along the transposed communication
/// tree: a root vector over `N` nodes and, for every other vertex, an
/// `N x N` matrix whose row `i` is that vertex's distribution given its
/// parent picked node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConditionalRecord", into = "ConditionalRecord")]
pub struct ConditionalSelection {
    topology: CommTopology,
    mask: FeasibilityMask,
    unrestricted: bool,
    distinct: bool,
    root_logits: Tensor,
    cond_logits: Vec<Option<Tensor>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionalRecord {
    topology: CommTopology,
    #[serde(default)]
    unrestricted: bool,
    #[serde(default)]
    distinct: bool,
    root_logits: Vec<f64>,
    cond_logits: Vec<Option<Vec<f64>>>,
}

impl From<ConditionalSelection> for ConditionalRecord {
    fn from(s: ConditionalSelection) -> Self {
        Self {
            root_logits: s.root_logits.values().to_vec(),
            cond_logits: s
                .cond_logits
                .iter()
                .map(|t| t.as_ref().map(|t| t.values().to_vec()))
                .collect(),
            topology: s.topology,
            unrestricted: s.unrestricted,
            distinct: s.distinct,
        }
    }
}

impl TryFrom<ConditionalRecord> for ConditionalSelection {
    type Error = Error;

    fn try_from(r: ConditionalRecord) -> Result<Self> {
        let mut s = if r.unrestricted {
            Self::from_parts_unrestricted(r.topology, r.root_logits, r.cond_logits)?
        } else {
            Self::from_parts(r.topology, r.root_logits, r.cond_logits)?
        };
        s.distinct = r.distinct;
        Ok(s)
    }
}

impl ConditionalSelection {
    /// Fresh layer with logits uniform in `[-INIT_SCALE, INIT_SCALE]`.
    pub fn new<R: Rng + ?Sized>(topology: CommTopology, rng: &mut R) -> Result<Self> {
        let mask = topology.masks()?;
        Self::init(topology, mask, false, rng)
    }

    /// Like [`Self::new`] but without any masking, not even `i == j`.
    pub fn unrestricted<R: Rng + ?Sized>(topology: CommTopology, rng: &mut R) -> Result<Self> {
        let mask = FeasibilityMask::unrestricted(topology.n_nodes(), topology.net());
        Self::init(topology, mask, true, rng)
    }

    fn init<R: Rng + ?Sized>(
        topology: CommTopology,
        mask: FeasibilityMask,
        unrestricted: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let n = topology.n_nodes();
        let root = uniform_init(n, rng);
        let cond = (0..topology.n_vertices())
            .map(|v| topology.net().parent(v).map(|_| uniform_init(n * n, rng)))
            .collect();
        Self::assemble(topology, mask, unrestricted, root, cond)
    }

    /// Layer from explicit logits; `cond[v]` is row-major `N x N` for every
    /// non-root vertex and `None` for the root.
    pub fn from_parts(topology: CommTopology, root: Vec<f64>, cond: Vec<Option<Vec<f64>>>) -> Result<Self> {
        let mask = topology.masks()?;
        Self::assemble(topology, mask, false, root, cond)
    }

    pub fn from_parts_unrestricted(
        topology: CommTopology,
        root: Vec<f64>,
        cond: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        let mask = FeasibilityMask::unrestricted(topology.n_nodes(), topology.net());
        Self::assemble(topology, mask, true, root, cond)
    }

    fn assemble(
        topology: CommTopology,
        mask: FeasibilityMask,
        unrestricted: bool,
        mut root: Vec<f64>,
        cond: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        let (n, m) = (topology.n_nodes(), topology.n_vertices());
        if root.len() != n || cond.len() != m {
            return Err(Error::Dimension {
                op: "conditional logits",
                shapes: vec![vec![root.len()], vec![cond.len()], vec![n, m]],
            });
        }
        // masked entries are stored as the surrogate so saved models show them
        let root_mask = mask.effective_root();
        pin(&mut root, &root_mask);
        check_finite(&root, "root logits")?;
        let mut cond_logits = Vec::with_capacity(m);
        for (v, c) in cond.into_iter().enumerate() {
            match (topology.net().parent(v), c) {
                (None, None) => cond_logits.push(None),
                (Some(_), Some(mut values)) => {
                    if values.len() != n * n {
                        return Err(Error::Dimension {
                            op: "conditional logits",
                            shapes: vec![vec![values.len()], vec![n, n]],
                        });
                    }
                    pin(&mut values, &mask.effective_cond(v).expect("non-root vertex"));
                    check_finite(&values, "conditional logits")?;
                    let t = Tensor::new(vec![n, n], values)?.param().named(format!("cond{v}"));
                    cond_logits.push(Some(t));
                }
                _ => {
                    return Err(Error::Parameter(format!(
                        "vertex {v}: conditional logits must be given exactly for non-root vertices"
                    )));
                }
            }
        }
        Ok(Self {
            topology,
            mask,
            unrestricted,
            distinct: false,
            root_logits: Tensor::new(vec![n], root)?.param().named("root"),
            cond_logits,
        })
    }

    /// Skip already-selected nodes during [`Self::infer`].
    pub fn with_distinct_inference(mut self, on: bool) -> Self {
        self.distinct = on;
        self
    }

    pub fn topology(&self) -> &CommTopology {
        &self.topology
    }

    pub fn mask(&self) -> &FeasibilityMask {
        &self.mask
    }

    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }

    pub fn n_vertices(&self) -> usize {
        self.topology.n_vertices()
    }

    pub fn root_logits(&self) -> &Tensor {
        &self.root_logits
    }

    pub fn cond_logits(&self, v: usize) -> Option<&Tensor> {
        self.cond_logits[v].as_ref()
    }

    /// Root first, then conditional matrices in vertex order.
    pub fn params(&self) -> Vec<&Tensor> {
        std::iter::once(&self.root_logits)
            .chain(self.cond_logits.iter().flatten())
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.root_logits)
            .chain(self.cond_logits.iter_mut().flatten())
            .collect()
    }

    /// Root logits with masked entries at the surrogate.
    pub fn masked_root(&self) -> Vec<f64> {
        masked_copy(self.root_logits.values(), &self.mask.effective_root())
    }

    /// Row `i` of vertex `v`'s masked conditional logits.
    pub fn masked_row(&self, v: usize, i: usize) -> Result<Vec<f64>> {
        let n = self.n_nodes();
        let t = self.cond_logits[v]
            .as_ref()
            .ok_or_else(|| Error::Parameter(format!("vertex {v} is the root")))?;
        let mask = self.mask.effective_cond(v).expect("non-root vertex");
        Ok(masked_copy(&t.values()[i * n..(i + 1) * n], &mask[i * n..(i + 1) * n]))
    }

    /// Greedy argmax in topological order: the root takes its best node,
    /// every child the best node of the row its parent selected.
    pub fn infer(&self) -> Result<HardSelection> {
        self.infer_with(self.distinct)
    }

    pub fn infer_with(&self, distinct: bool) -> Result<HardSelection> {
        let n = self.n_nodes();
        let net = self.topology.net();
        let mut assignment = vec![usize::MAX; self.n_vertices()];
        let mut taken = vec![false; n];
        for &v in net.order() {
            let (mut logits, parent_node) = match net.parent(v) {
                None => (self.masked_root(), None),
                Some(p) => (self.masked_row(v, assignment[p])?, Some(assignment[p])),
            };
            if distinct {
                logits
                    .iter_mut()
                    .zip(&taken)
                    .filter(|(_, &t)| t)
                    .for_each(|(l, _)| *l = MASKED_LOGIT);
            }
            if logits.iter().all(|&l| l <= MASKED_LOGIT) {
                return Err(match parent_node {
                    Some(node) => Error::InfeasibleSelection { vertex: v, node },
                    None => Error::InfeasibleConstraints { vertex: v },
                });
            }
            let pick = argmax(&logits);
            assignment[v] = pick;
            taken[pick] = true;
        }
        Ok(HardSelection::new(assignment))
    }

    /// Exact ancestral draw: Gumbel-Max on the root, then on each child's
    /// row selected by its parent.
    pub fn hard_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardSelection> {
        let n = self.n_nodes();
        let net = self.topology.net();
        let mut assignment = vec![usize::MAX; self.n_vertices()];
        for &v in net.order() {
            let logits = match net.parent(v) {
                None => self.masked_root(),
                Some(p) => self.masked_row(v, assignment[p])?,
            };
            assignment[v] = gumbel_max(&logits, &GumbelNoise::sample(n, rng)).map_err(|_| {
                match net.parent(v) {
                    Some(p) => Error::InfeasibleSelection {
                        vertex: v,
                        node: assignment[p],
                    },
                    None => Error::InfeasibleConstraints { vertex: v },
                }
            })?;
        }
        Ok(HardSelection::new(assignment))
    }

    /// Probability of `sel` under the factorized distribution: product of
    /// the normalized root and conditional factors.
    pub fn probability(&self, sel: &HardSelection) -> Result<f64> {
        let net = self.topology.net();
        if sel.len() != self.n_vertices() || sel.assignment.iter().any(|&x| x >= self.n_nodes()) {
            return Err(Error::Parameter(format!("selection {sel} does not fit the layer")));
        }
        let mut p = categorical(&self.masked_root())[sel.node(net.root())];
        for &v in &net.order()[1..] {
            let parent = net.parent(v).expect("non-root vertex");
            p *= categorical(&self.masked_row(v, sel.node(parent))?)[sel.node(v)];
        }
        Ok(p)
    }

    /// Marginal distribution of every vertex, by exact propagation.
    pub fn marginals(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n_nodes();
        let net = self.topology.net();
        let mut out = vec![Vec::new(); self.n_vertices()];
        out[net.root()] = categorical(&self.masked_root());
        for &v in &net.order()[1..] {
            let parent = net.parent(v).expect("non-root vertex");
            let mut marginal = vec![0.0; n];
            for (i, &w) in out[parent].clone().iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (acc, q) in marginal.iter_mut().zip(categorical(&self.masked_row(v, i)?)) {
                    *acc += w * q;
                }
            }
            out[v] = marginal;
        }
        Ok(out)
    }

    pub fn entropies(&self) -> Result<Vec<f64>> {
        let sel = self.infer()?;
        let net = self.topology.net();
        (0..self.n_vertices())
            .map(|v| {
                let logits = match net.parent(v) {
                    None => self.masked_root(),
                    Some(p) => self.masked_row(v, sel.node(p))?,
                };
                Ok(entropy(&categorical(&logits)))
            })
            .collect()
    }

    pub(super) fn weights<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        batch: usize,
        tau: Temperature,
        n_rounds: usize,
        rng: &mut R,
    ) -> Result<Var> {
        let (n, m) = (self.n_nodes(), self.n_vertices());
        let net = self.topology.net();
        if vars.len() != m {
            return Err(Error::Parameter(format!(
                "expected {m} bound parameters, got {}",
                vars.len()
            )));
        }
        // vars follow params(): root, then non-root vertices ascending
        let mut var_of = vec![vars[0]; m];
        let mut next = 1;
        for (v, slot) in var_of.iter_mut().enumerate() {
            if net.parent(v).is_some() {
                *slot = vars[next];
                next += 1;
            }
        }

        let root = masked_logits(tape, var_of[net.root()], &self.mask.effective_root())?;
        let root = tape.broadcast_rows(root, batch)?;
        let mut tiled = vec![None; m];
        for &v in &net.order()[1..] {
            let masked = masked_logits(tape, var_of[v], &self.mask.effective_cond(v).expect("non-root"))?;
            tiled[v] = Some(tape.broadcast_rows(masked, batch)?);
        }

        let mut acc: Vec<Option<Var>> = vec![None; m];
        for _ in 0..n_rounds {
            let mut z: Vec<Option<Var>> = vec![None; m];
            let noise = gumbel_values(batch * n, rng);
            z[net.root()] = Some(concrete_rows(tape, root, tau, &noise)?);
            for &v in &net.order()[1..] {
                let parent = net.parent(v).expect("non-root vertex");
                let noise = gumbel_values(batch * n * n, rng);
                let rows = concrete_rows(tape, tiled[v].expect("tiled"), tau, &noise)?;
                let rows = tape.reshape(rows, vec![batch, n * n])?;
                let zp = z[parent].expect("parent precedes child");
                z[v] = Some(tape.batched_matmul(zp, rows, 1, n, n)?);
            }
            for v in 0..m {
                let zv = z[v].expect("every vertex visited");
                acc[v] = Some(match acc[v] {
                    None => zv,
                    Some(a) => tape.add(a, zv)?,
                });
            }
        }
        let mut parts = Vec::with_capacity(m);
        for a in acc {
            let a = a.expect("n_rounds >= 1");
            parts.push(if n_rounds > 1 {
                tape.scale(a, 1.0 / n_rounds as f64)
            } else {
                a
            });
        }
        tape.concat_cols(&parts)
    }
}

fn pin(values: &mut [f64], mask: &[bool]) {
    values
        .iter_mut()
        .zip(mask)
        .filter(|(_, &keep)| !keep)
        .for_each(|(v, _)| *v = MASKED_LOGIT);
}

fn masked_copy(values: &[f64], mask: &[bool]) -> Vec<f64> {
    values
        .iter()
        .zip(mask)
        .map(|(&v, &keep)| if keep { v } else { MASKED_LOGIT })
        .collect()
}
