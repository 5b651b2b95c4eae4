use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooling stride of the average-pool layer; the time axis shrinks by it.
pub const POOL_STRIDE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symbol {
    /// Channels.
    C,
    /// Time samples.
    T,
    /// Time samples after pooling, `T / 15`.
    TPooled,
    FT,
    FS,
    NC,
}

impl Symbol {
    fn label(self) -> &'static str {
        match self {
            Self::C => "C",
            Self::T => "T",
            Self::TPooled => "(T/15)",
            Self::FT => "F_T",
            Self::FS => "F_S",
            Self::NC => "N_C",
        }
    }
}

/// `coeff * prod(symbols)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: u64,
    pub symbols: Vec<Symbol>,
}

impl Monomial {
    pub fn new(coeff: u64, symbols: &[Symbol]) -> Self {
        Self {
            coeff,
            symbols: symbols.to_vec(),
        }
    }

    pub fn constant(coeff: u64) -> Self {
        Self::new(coeff, &[])
    }

    pub fn eval(&self, inputs: &ArchInputs) -> u64 {
        self.symbols.iter().fold(self.coeff, |acc, &s| acc * inputs.value(s))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeff != 1 || self.symbols.is_empty() {
            write!(f, "{}", self.coeff)?;
        }
        for s in &self.symbols {
            write!(f, "{}", s.label())?;
        }
        Ok(())
    }
}

fn tuple(parts: &[Monomial]) -> String {
    let inner: Vec<String> = parts
        .iter()
        .map(|m| match (m.coeff, m.symbols.as_slice()) {
            (1, [Symbol::TPooled]) => "T/15".to_string(),
            _ => m.to_string(),
        })
        .collect();
    if inner.len() == 1 {
        inner[0].clone()
    } else {
        format!("({})", inner.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub filters: Option<Monomial>,
    pub kernel: Option<Vec<Monomial>>,
    pub stride: Option<Vec<Monomial>>,
    pub params: Option<Monomial>,
    pub output: Vec<Monomial>,
    pub activation: Option<String>,
    pub padding: Option<String>,
}

/// Symbolic layer table of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// Multiscale parallel filter-bank CNN for `C x T` EEG input.
    pub fn msfbcnn() -> Self {
        use Symbol::*;
        let m = Monomial::new;
        let k = Monomial::constant;
        let layer = |name: &str,
                     filters: Option<Monomial>,
                     kernel: Option<Vec<Monomial>>,
                     stride: Option<Vec<Monomial>>,
                     params: Option<Monomial>,
                     output: Vec<Monomial>,
                     activation: Option<&str>,
                     padding: Option<&str>| LayerSpec {
            name: name.to_string(),
            filters,
            kernel,
            stride,
            params,
            output,
            activation: activation.map(str::to_string),
            padding: padding.map(str::to_string),
        };
        let unit = || Some(vec![k(1), k(1)]);
        let time_conv = |i: usize, width: u64| {
            layer(
                &format!("Timeconv{i}"),
                Some(m(1, &[FT])),
                Some(vec![k(width), k(1)]),
                unit(),
                Some(m(width, &[FT])),
                vec![m(1, &[FT]), m(1, &[T]), m(1, &[C])],
                Some("Linear"),
                Some("Same"),
            )
        };
        let pooled = || vec![m(1, &[FS]), m(1, &[TPooled]), k(1)];
        Self {
            name: "MSFBCNN".into(),
            layers: vec![
                layer("Input", None, None, None, None, vec![m(1, &[C]), m(1, &[T])], None, None),
                layer("Reshape", None, None, None, None, vec![k(1), m(1, &[T]), m(1, &[C])], None, None),
                time_conv(1, 64),
                time_conv(2, 40),
                time_conv(3, 26),
                time_conv(4, 16),
                layer("Concatenate", None, None, None, None, vec![m(4, &[FT]), m(1, &[T]), m(1, &[C])], None, None),
                layer(
                    "BatchNorm",
                    None,
                    None,
                    None,
                    Some(m(2, &[FT])),
                    vec![m(4, &[FT]), m(1, &[T]), m(1, &[C])],
                    None,
                    None,
                ),
                layer(
                    "Spatialconv",
                    Some(m(1, &[FS])),
                    Some(vec![k(1), m(1, &[C])]),
                    unit(),
                    Some(m(4, &[C, FT, FS])),
                    vec![m(1, &[FS]), m(1, &[T]), k(1)],
                    Some("Linear"),
                    Some("Valid"),
                ),
                layer("BatchNorm", None, None, None, Some(m(2, &[FS])), vec![m(1, &[FS]), m(1, &[T]), k(1)], None, None),
                layer("Non-linear", None, None, None, None, vec![m(1, &[FS]), m(1, &[T]), k(1)], Some("Square"), None),
                layer(
                    "AveragePool",
                    None,
                    Some(vec![k(75), k(1)]),
                    Some(vec![k(POOL_STRIDE as u64), k(1)]),
                    None,
                    pooled(),
                    None,
                    Some("Valid"),
                ),
                layer("Non-linear", None, None, None, None, pooled(), Some("Log"), None),
                layer("Dropout", None, None, None, None, pooled(), None, None),
                layer(
                    "Dense",
                    Some(m(1, &[NC])),
                    Some(vec![m(1, &[TPooled]), k(1)]),
                    unit(),
                    Some(m(1, &[FS, TPooled, NC])),
                    vec![m(1, &[NC])],
                    Some("Linear"),
                    Some("Valid"),
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchInputs {
    pub c: u64,
    pub t: u64,
    pub f_t: u64,
    pub f_s: u64,
    pub n_c: u64,
}

impl ArchInputs {
    fn value(&self, s: Symbol) -> u64 {
        match s {
            Symbol::C => self.c,
            Symbol::T => self.t,
            Symbol::TPooled => self.t / POOL_STRIDE as u64,
            Symbol::FT => self.f_t,
            Symbol::FS => self.f_s,
            Symbol::NC => self.n_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub name: String,
    pub params_formula: Option<String>,
    pub params: u64,
    pub output_formula: String,
    pub output: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchReport {
    pub inputs: ArchInputs,
    pub layers: Vec<LayerCount>,
    pub total_params: u64,
    /// `T` was not a multiple of the pooling stride and `T/15` was floored.
    pub t_rounded: bool,
}

impl ArchReport {
    /// Fixed-width text table with a total line.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<12} {:>14} {:>10}  {}\n", "layer", "params", "count", "output");
        for l in &self.layers {
            let shape: Vec<String> = l.output.iter().map(u64::to_string).collect();
            out.push_str(&format!(
                "{:<12} {:>14} {:>10}  {} = ({})\n",
                l.name,
                l.params_formula.as_deref().unwrap_or("-"),
                l.params,
                l.output_formula,
                shape.join(",")
            ));
        }
        out.push_str(&format!("{:<12} {:>14} {:>10}\n", "total", "", self.total_params));
        if self.t_rounded {
            out.push_str(&format!(
                "note: T = {} is not a multiple of {POOL_STRIDE}; T/15 rounded down to {}\n",
                self.inputs.t,
                self.inputs.t / POOL_STRIDE as u64
            ));
        }
        out
    }
}

/// Per-layer parameter counts and output shapes of `spec` at `inputs`.
pub fn arch_calc(spec: &ArchSpec, inputs: ArchInputs) -> Result<ArchReport> {
    let named = [
        ("C", inputs.c),
        ("T", inputs.t),
        ("F_T", inputs.f_t),
        ("F_S", inputs.f_s),
        ("N_C", inputs.n_c),
    ];
    if let Some((name, _)) = named.iter().find(|(_, v)| *v == 0) {
        return Err(Error::Parameter(format!("{name} must be positive")));
    }
    if inputs.t < POOL_STRIDE as u64 {
        return Err(Error::Parameter(format!(
            "T = {} leaves no samples after pooling by {POOL_STRIDE}",
            inputs.t
        )));
    }
    let layers: Vec<LayerCount> = spec
        .layers
        .iter()
        .map(|l| LayerCount {
            name: l.name.clone(),
            params_formula: l.params.as_ref().map(Monomial::to_string),
            params: l.params.as_ref().map_or(0, |p| p.eval(&inputs)),
            output_formula: tuple(&l.output),
            output: l.output.iter().map(|d| d.eval(&inputs)).collect(),
        })
        .collect();
    Ok(ArchReport {
        inputs,
        total_params: layers.iter().map(|l| l.params).sum(),
        layers,
        t_rounded: !inputs.t.is_multiple_of(POOL_STRIDE as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> ArchInputs {
        ArchInputs {
            c: 44,
            t: 1125,
            f_t: 10,
            f_s: 10,
            n_c: 4,
        }
    }

    #[test]
    fn formulas_print_like_the_table() {
        let spec = ArchSpec::msfbcnn();
        let formulas: Vec<String> = spec
            .layers
            .iter()
            .filter_map(|l| l.params.as_ref().map(Monomial::to_string))
            .collect();
        assert_eq!(
            formulas,
            ["64F_T", "40F_T", "26F_T", "16F_T", "2F_T", "4CF_TF_S", "2F_S", "F_S(T/15)N_C"]
        );
        let dense = spec.layers.last().unwrap();
        assert_eq!(tuple(&dense.output), "N_C");
        assert_eq!(tuple(&spec.layers[12].output), "(F_S,T/15,1)");
    }

    #[test]
    fn spot_checks() {
        let r = arch_calc(&ArchSpec::msfbcnn(), inputs()).unwrap();
        let by_name = |n: &str| r.layers.iter().find(|l| l.name == n).unwrap();
        assert_eq!(by_name("Timeconv1").params, 640);
        assert_eq!(by_name("Spatialconv").params, 17600);
        assert_eq!(by_name("Dense").output, vec![4]);
        assert_eq!(r.total_params, 22100);
        assert!(!r.t_rounded);
    }

    #[test]
    fn rounding_and_errors() {
        let r = arch_calc(&ArchSpec::msfbcnn(), ArchInputs { t: 1000, ..inputs() }).unwrap();
        assert!(r.t_rounded);
        assert_eq!(r.layers.last().unwrap().params, 10 * 66 * 4);
        assert!(r.to_table().contains("rounded down to 66"));
        assert!(arch_calc(&ArchSpec::msfbcnn(), ArchInputs { c: 0, ..inputs() }).is_err());
        assert!(arch_calc(&ArchSpec::msfbcnn(), ArchInputs { t: 10, ..inputs() }).is_err());
    }
}
