//! Named parameter tensors: the per-config inventory, the ordered store, and
//! seeded initialization.
//!
//! The inventory is the only place tensor names and shapes are declared; the
//! forward passes bind against it, the initializer fills it and the
//! complexity analyzer counts it.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{AttentionKind, ModelConfig};
use crate::error::{Error, Result};
use crate::nn::{Affine, AttentionParams, ComplexKernel, FftBlockParams, WnLayer, WnStackParams};
use crate::numerics::{derive_seed, rng_fill, Distribution, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    #[serde(rename = "text2ppg")]
    Text2Ppg,
    SpeakerTable,
    PriorEncoder,
    Flow,
    Decoder,
    PosteriorEncoder,
    PpgPredictor,
    Msd,
    Mcd,
}

impl Module {
    pub const ALL: [Module; 9] = [
        Module::Text2Ppg,
        Module::SpeakerTable,
        Module::PriorEncoder,
        Module::Flow,
        Module::Decoder,
        Module::PosteriorEncoder,
        Module::PpgPredictor,
        Module::Msd,
        Module::Mcd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Module::Text2Ppg => "text2ppg",
            Module::SpeakerTable => "speaker_table",
            Module::PriorEncoder => "prior_encoder",
            Module::Flow => "flow",
            Module::Decoder => "decoder",
            Module::PosteriorEncoder => "posterior_encoder",
            Module::PpgPredictor => "ppg_predictor",
            Module::Msd => "msd",
            Module::Mcd => "mcd",
        }
    }

    /// Part of the synthesis path (as opposed to training-only).
    pub fn is_inference(self) -> bool {
        matches!(
            self,
            Module::Text2Ppg | Module::SpeakerTable | Module::PriorEncoder | Module::Flow | Module::Decoder
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on `±sqrt(1 / fan_in)`.
    Uniform {
        fan_in: usize,
    },
    Constant(f64),
}

impl Init {
    pub fn distribution(self) -> Distribution {
        match self {
            Init::Uniform { fan_in } => {
                let a = (1.0 / fan_in as f64).sqrt();
                Distribution::Uniform { lo: -a, hi: a }
            }
            Init::Constant(v) => Distribution::Uniform { lo: v, hi: v },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub module: Module,
    pub init: Init,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Declares tensors on behalf of one module.
pub struct Registrar<'a> {
    specs: &'a mut Vec<TensorSpec>,
    module: Module,
}

impl Registrar<'_> {
    pub fn tensor(&mut self, name: String, shape: Vec<usize>, init: Init) {
        self.specs.push(TensorSpec {
            name,
            shape,
            module: self.module,
            init,
        });
    }

    pub fn conv1d(&mut self, prefix: &str, c_in: usize, c_out: usize, kernel: usize, groups: usize) {
        let fan_in = c_in / groups * kernel;
        self.tensor(
            format!("{prefix}.weight"),
            vec![c_out, c_in / groups, kernel],
            Init::Uniform { fan_in },
        );
        self.tensor(format!("{prefix}.bias"), vec![c_out], Init::Uniform { fan_in });
    }

    /// Transposed 1-D convolution, weight layout `[C_in, C_out, K]`.
    pub fn conv_transpose1d(&mut self, prefix: &str, c_in: usize, c_out: usize, kernel: usize) {
        let fan_in = c_out * kernel;
        self.tensor(
            format!("{prefix}.weight"),
            vec![c_in, c_out, kernel],
            Init::Uniform { fan_in },
        );
        self.tensor(format!("{prefix}.bias"), vec![c_out], Init::Uniform { fan_in });
    }

    pub fn linear(&mut self, prefix: &str, d_in: usize, d_out: usize, bias: bool) {
        let init = Init::Uniform { fan_in: d_in };
        self.tensor(format!("{prefix}.weight"), vec![d_out, d_in], init);
        if bias {
            self.tensor(format!("{prefix}.bias"), vec![d_out], init);
        }
    }

    pub fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.tensor(format!("{prefix}.weight"), vec![d], Init::Constant(1.0));
        self.tensor(format!("{prefix}.bias"), vec![d], Init::Constant(0.0));
    }

    pub fn table(&mut self, name: &str, rows: usize, cols: usize) {
        self.tensor(name.to_string(), vec![rows, cols], Init::Uniform { fan_in: cols });
    }

    pub fn conv2d(&mut self, prefix: &str, c_in: usize, c_out: usize, kernel: usize) {
        let fan_in = c_in * kernel * kernel;
        self.tensor(
            format!("{prefix}.weight"),
            vec![c_out, c_in, kernel, kernel],
            Init::Uniform { fan_in },
        );
        self.tensor(format!("{prefix}.bias"), vec![c_out], Init::Uniform { fan_in });
    }

    pub fn complex_conv2d(&mut self, prefix: &str, c_in: usize, c_out: usize, kernel: usize) {
        let init = Init::Uniform {
            fan_in: c_in * kernel * kernel,
        };
        for part in ["re", "im"] {
            self.tensor(
                format!("{prefix}.weight_{part}"),
                vec![c_out, c_in, kernel, kernel],
                init,
            );
        }
        for part in ["re", "im"] {
            self.tensor(format!("{prefix}.bias_{part}"), vec![c_out], init);
        }
    }

    pub fn fft_block(&mut self, prefix: &str, d: usize, filter: usize, k1: usize, k2: usize) {
        for proj in ["q", "k", "v", "o"] {
            self.linear(&format!("{prefix}.attn.{proj}"), d, d, false);
        }
        self.layer_norm(&format!("{prefix}.norm1"), d);
        self.layer_norm(&format!("{prefix}.norm2"), d);
        self.conv1d(&format!("{prefix}.ff1"), d, filter, k1, 1);
        self.conv1d(&format!("{prefix}.ff2"), filter, d, k2, 1);
    }

    pub fn wn_stack(&mut self, prefix: &str, hidden: usize, kernel: usize, layers: usize, cond_dim: Option<usize>) {
        for i in 0..layers {
            self.conv1d(&format!("{prefix}.{i}.in"), hidden, 2 * hidden, kernel, 1);
            let out = if i + 1 < layers { 2 * hidden } else { hidden };
            self.conv1d(&format!("{prefix}.{i}.res_skip"), hidden, out, 1, 1);
        }
        if let Some(g) = cond_dim {
            self.linear(&format!("{prefix}.cond"), g, 2 * hidden * layers, true);
        }
    }
}

/// Every parameter tensor of the model described by `cfg`, in a fixed order.
pub fn inventory(cfg: &ModelConfig) -> Result<Vec<TensorSpec>> {
    cfg.validate()?;
    let mut specs = Vec::new();
    let mut reg = |module: Module, f: &dyn Fn(&mut Registrar, &ModelConfig)| {
        f(
            &mut Registrar {
                specs: &mut specs,
                module,
            },
            cfg,
        );
    };
    reg(Module::Text2Ppg, &crate::text2ppg::register);
    reg(Module::SpeakerTable, &|r, c| {
        r.table(SPEAKER_TABLE, c.n_speakers, c.speaker_dim)
    });
    reg(Module::PriorEncoder, &crate::ppg2wav::prior::register);
    reg(Module::Flow, &crate::ppg2wav::flow::register);
    reg(Module::Decoder, &crate::ppg2wav::decoder::register);
    reg(Module::PosteriorEncoder, &crate::ppg2wav::posterior::register);
    reg(Module::PpgPredictor, &crate::ppg2wav::ppg_predictor::register);
    reg(Module::Msd, &crate::discriminators::register_msd);
    reg(Module::Mcd, &crate::discriminators::register_mcd);
    Ok(specs)
}

pub const SPEAKER_TABLE: &str = "speaker.embedding";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Seed(u64),
    File(PathBuf),
    Derived,
}

/// Insertion-ordered map from tensor name to tensor.
#[derive(Debug, Clone)]
pub struct WeightStore<S = f32> {
    entries: Vec<(String, Tensor<S>)>,
    index: HashMap<String, usize>,
    pub provenance: Provenance,
}

impl<S: Scalar> Default for WeightStore<S> {
    fn default() -> Self {
        Self::new(Provenance::Derived)
    }
}

impl<S: Scalar> PartialEq for WeightStore<S> {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl<S: Scalar> WeightStore<S> {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
            provenance,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<S>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, t));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.entries[i].1),
            None => Err(Error::MissingTensor(name.to_string())),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<S>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Element-wise conversion of every tensor, order preserved.
    pub fn map<T: Scalar>(&self, mut f: impl FnMut(&str, &Tensor<S>) -> Tensor<T>) -> WeightStore<T> {
        let mut out = WeightStore::new(Provenance::Derived);
        for (n, t) in &self.entries {
            out.insert(n.clone(), f(n, t)).expect("names already unique");
        }
        out
    }

    pub fn cast<T: Scalar>(&self) -> WeightStore<T> {
        self.map(|_, t| t.cast())
    }

    /// Checks that every tensor `cfg` needs is present with the right shape
    /// and that nothing else is.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let specs = inventory(cfg)?;
        for spec in &specs {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::Shape(format!(
                    "tensor {:?} has shape {:?}, config needs {:?}",
                    spec.name,
                    t.shape(),
                    spec.shape
                )));
            }
        }
        if self.len() != specs.len() {
            let known: std::collections::HashSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra = self.iter().map(|(n, _)| n).find(|n| !known.contains(n)).unwrap_or("?");
            return Err(Error::Malformed(format!("tensor {extra:?} is not part of this config")));
        }
        Ok(())
    }

    pub(crate) fn affine(&self, prefix: &str) -> Result<Affine<'_, S>> {
        Ok(Affine {
            weight: self.get(&format!("{prefix}.weight"))?,
            bias: self.get(&format!("{prefix}.bias"))?,
        })
    }

    pub(crate) fn fft_block(&self, prefix: &str, n_heads: usize, kind: AttentionKind) -> Result<FftBlockParams<'_, S>> {
        let w = |p: &str| self.get(&format!("{prefix}.attn.{p}.weight"));
        Ok(FftBlockParams {
            attn: AttentionParams {
                w_q: w("q")?,
                w_k: w("k")?,
                w_v: w("v")?,
                w_o: w("o")?,
                n_heads,
                kind,
            },
            norm1: self.affine(&format!("{prefix}.norm1"))?,
            norm2: self.affine(&format!("{prefix}.norm2"))?,
            ff1: self.affine(&format!("{prefix}.ff1"))?,
            ff2: self.affine(&format!("{prefix}.ff2"))?,
        })
    }

    pub(crate) fn wn_stack(
        &self,
        prefix: &str,
        hidden: usize,
        layers: usize,
        conditioned: bool,
    ) -> Result<WnStackParams<'_, S>> {
        let layers = (0..layers)
            .map(|i| {
                Ok(WnLayer {
                    in_conv: self.affine(&format!("{prefix}.{i}.in"))?,
                    res_skip: self.affine(&format!("{prefix}.{i}.res_skip"))?,
                })
            })
            .collect::<Result<_>>()?;
        let cond = if conditioned {
            Some(self.affine(&format!("{prefix}.cond"))?)
        } else {
            None
        };
        Ok(WnStackParams {
            hidden,
            dilation_rate: 1,
            layers,
            cond,
        })
    }

    pub(crate) fn complex_kernel(&self, prefix: &str) -> Result<ComplexKernel<'_, S>> {
        Ok(ComplexKernel {
            w_re: self.get(&format!("{prefix}.weight_re"))?,
            w_im: self.get(&format!("{prefix}.weight_im"))?,
            b_re: self.get(&format!("{prefix}.bias_re"))?,
            b_im: self.get(&format!("{prefix}.bias_im"))?,
        })
    }
}

/// Seeded initialization of every inventory tensor.
///
/// Tensor `name` is drawn by [`rng_fill`] from a stream seeded with
/// `derive_seed(seed, name)`, uniform on `±sqrt(1 / fan_in)`; layer-norm
/// scales are 1 and shifts 0.
pub fn init_weights(cfg: &ModelConfig, seed: u64) -> Result<WeightStore> {
    let mut store = WeightStore::new(Provenance::Seed(seed));
    for spec in inventory(cfg)? {
        let t = rng_fill(&spec.shape, derive_seed(seed, &spec.name), spec.init.distribution())?;
        store.insert(spec.name, t)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let cfg = ModelConfig::micro();
        let a = init_weights(&cfg, 1).unwrap();
        assert_eq!(a, init_weights(&cfg, 1).unwrap());
        assert_ne!(a, init_weights(&cfg, 2).unwrap());
        assert_eq!(a.len(), inventory(&cfg).unwrap().len());
        a.validate(&cfg).unwrap();
    }

    #[test]
    fn init_respects_bounds() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 3).unwrap();
        for spec in inventory(&cfg).unwrap() {
            let t = store.get(&spec.name).unwrap();
            match spec.init {
                Init::Uniform { fan_in } => {
                    let a = (1.0 / fan_in as f64).sqrt() as f32;
                    assert!(t.data().iter().all(|v| v.abs() <= a), "{}", spec.name);
                }
                Init::Constant(c) => assert!(t.data().iter().all(|&v| v == c as f32)),
            }
        }
    }

    #[test]
    fn names_are_unique() {
        for cfg in [ModelConfig::default(), ModelConfig::micro()] {
            let specs = inventory(&cfg).unwrap();
            let names: std::collections::HashSet<_> = specs.iter().map(|s| &s.name).collect();
            assert_eq!(names.len(), specs.len());
        }
    }

    #[test]
    fn validation_catches_missing_wrong_and_extra() {
        let cfg = ModelConfig::micro();
        let store = init_weights(&cfg, 0).unwrap();

        let mut missing = WeightStore::<f32>::default();
        for (n, t) in store.iter().skip(1) {
            missing.insert(n, t.clone()).unwrap();
        }
        assert!(matches!(missing.validate(&cfg), Err(Error::MissingTensor(_))));

        let mut wrong = store.clone();
        *wrong.get_mut(SPEAKER_TABLE).unwrap() = Tensor::zeros(&[1, 1]);
        assert!(matches!(wrong.validate(&cfg), Err(Error::Shape(_))));

        let mut extra = store.clone();
        extra.insert("stray", Tensor::zeros(&[1])).unwrap();
        assert!(matches!(extra.validate(&cfg), Err(Error::Malformed(_))));
        assert!(matches!(
            extra.insert("stray", Tensor::zeros(&[1])),
            Err(Error::DuplicateName(_))
        ));
    }
}
