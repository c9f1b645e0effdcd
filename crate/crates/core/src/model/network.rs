use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{BlockDesign, GatePlacement, NetworkConfig};
use crate::error::{Error, Result};
use crate::ops::{Eager, Graph, ParamId, ParamStore, Tape, Var};
use crate::tensor::{Element, Tensor};

/// Largest kernel extent in the network; inputs must be at least this big.
pub const MIN_INPUT_EXTENT: usize = 5;

/// Name, shape and initialisation class of one learnable tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Vec<usize>,
    /// `Some(fan_in)` for weights, `None` for biases.
    pub fan_in: Option<usize>,
}

fn conv_spec(out: &mut Vec<ParamSpec>, prefix: &str, cout: usize, cin: usize, kh: usize, kw: usize) {
    out.push(ParamSpec {
        name: format!("{prefix}.weight"),
        dims: vec![cout, cin, kh, kw],
        fan_in: Some(cin * kh * kw),
    });
    out.push(ParamSpec {
        name: format!("{prefix}.bias"),
        dims: vec![cout],
        fan_in: None,
    });
}

fn fc_spec(out: &mut Vec<ParamSpec>, prefix: &str, dout: usize, din: usize) {
    out.push(ParamSpec {
        name: format!("{prefix}.weight"),
        dims: vec![dout, din],
        fan_in: Some(din),
    });
    out.push(ParamSpec {
        name: format!("{prefix}.bias"),
        dims: vec![dout],
        fan_in: None,
    });
}

fn gate_spec(out: &mut Vec<ParamSpec>, prefix: &str, width: usize, reduction: usize) {
    let hidden = width / reduction;
    fc_spec(out, &format!("{prefix}.fc1"), hidden, width);
    fc_spec(out, &format!("{prefix}.fc2"), width, hidden);
}

/// Branch convolutions `(name, kh, kw)` of a concatenating block, in concat order.
fn branch_kernels(design: BlockDesign) -> &'static [(&'static str, usize, usize)] {
    match design {
        BlockDesign::Standard => &[],
        BlockDesign::TripleSquare => &[("conv_d0", 3, 3), ("conv_d1", 3, 3), ("conv_d2", 3, 3)],
        // horizontal features from 5x1, vertical from 1x5, diagonal from 3x3
        BlockDesign::Orientation => &[("conv_h", 5, 1), ("conv_v", 1, 5), ("conv_d", 3, 3)],
    }
}

/// Every learnable tensor of `cfg`, in canonical (checkpoint) order.
pub fn param_specs(cfg: &NetworkConfig) -> Vec<ParamSpec> {
    let c = cfg.width;
    let mut out = Vec::new();
    conv_spec(&mut out, "entry", c, 1, 3, 3);
    for i in 0..cfg.oam_count {
        let p = format!("oam.{i}");
        match cfg.block_design {
            BlockDesign::Standard => {
                conv_spec(&mut out, &format!("{p}.conv1"), c, c, 3, 3);
                conv_spec(&mut out, &format!("{p}.conv2"), c, c, 3, 3);
            }
            design => {
                for (name, kh, kw) in branch_kernels(design) {
                    conv_spec(&mut out, &format!("{p}.{name}"), c, c, *kh, *kw);
                }
                if cfg.has_local_gate() {
                    gate_spec(&mut out, &format!("{p}.lca"), cfg.local_gate_width(), cfg.ca_reduction);
                }
                conv_spec(&mut out, &format!("{p}.fuse"), c, 3 * c, 3, 3);
            }
        }
    }
    if cfg.has_global_gate() {
        gate_spec(&mut out, "gca", cfg.global_gate_width(), cfg.ca_reduction);
    }
    conv_spec(&mut out, "compress", c, cfg.oam_count * c, 1, 1);
    conv_spec(&mut out, "head.conv1", c, c, 3, 3);
    conv_spec(&mut out, "head.conv2", cfg.scale * cfg.scale, c, 3, 3);
    out
}

/// Closed-form count of learnable scalars for `cfg`.
pub fn param_count(cfg: &NetworkConfig) -> usize {
    let c = cfg.width;
    let conv = |cout: usize, cin: usize, k: usize| cout * cin * k + cout;
    let gate = |g: usize| {
        let h = g / cfg.ca_reduction;
        (h * g + h) + (g * h + g)
    };
    let block = match cfg.block_design {
        BlockDesign::Standard => 2 * conv(c, c, 9),
        design => {
            let taps: usize = branch_kernels(design).iter().map(|(_, kh, kw)| kh * kw).sum();
            let local = if cfg.has_local_gate() {
                gate(cfg.local_gate_width())
            } else {
                0
            };
            taps * c * c + 3 * c + local + conv(c, 3 * c, 9)
        }
    };
    let global = if cfg.has_global_gate() {
        gate(cfg.global_gate_width())
    } else {
        0
    };
    conv(c, 1, 9)
        + cfg.oam_count * block
        + global
        + conv(c, cfg.oam_count * c, 1)
        + conv(c, c, 9)
        + conv(cfg.scale * cfg.scale, c, 9)
}

/// Weight count of the three branch convolutions of one block (biases excluded).
pub fn branch_weight_count(design: BlockDesign, width: usize) -> usize {
    branch_kernels(design)
        .iter()
        .map(|(_, kh, kw)| kh * kw * width * width)
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct Affine {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Gate {
    fc1: Affine,
    fc2: Affine,
}

#[derive(Clone, Debug)]
enum Block {
    Standard { conv1: Affine, conv2: Affine },
    Branched { branches: Vec<Affine>, gate: Option<Gate>, fuse: Affine },
}

#[derive(Clone, Debug)]
struct Layout {
    entry: Affine,
    blocks: Vec<Block>,
    global_gate: Option<Gate>,
    compress: Affine,
    head1: Affine,
    head2: Affine,
}

impl Layout {
    fn resolve<T: Element>(cfg: &NetworkConfig, store: &ParamStore<T>) -> Result<Self> {
        let affine = |prefix: &str| -> Result<Affine> {
            let get = |suffix: &str| {
                let name = format!("{prefix}.{suffix}");
                store
                    .id_of(&name)
                    .ok_or_else(|| Error::Params(format!("missing parameter {name}")))
            };
            Ok(Affine {
                weight: get("weight")?,
                bias: get("bias")?,
            })
        };
        let gate = |prefix: &str| -> Result<Gate> {
            Ok(Gate {
                fc1: affine(&format!("{prefix}.fc1"))?,
                fc2: affine(&format!("{prefix}.fc2"))?,
            })
        };
        let mut blocks = Vec::with_capacity(cfg.oam_count);
        for i in 0..cfg.oam_count {
            let p = format!("oam.{i}");
            blocks.push(match cfg.block_design {
                BlockDesign::Standard => Block::Standard {
                    conv1: affine(&format!("{p}.conv1"))?,
                    conv2: affine(&format!("{p}.conv2"))?,
                },
                design => Block::Branched {
                    branches: branch_kernels(design)
                        .iter()
                        .map(|(name, _, _)| affine(&format!("{p}.{name}")))
                        .collect::<Result<_>>()?,
                    gate: cfg.has_local_gate().then(|| gate(&format!("{p}.lca"))).transpose()?,
                    fuse: affine(&format!("{p}.fuse"))?,
                },
            });
        }
        Ok(Self {
            entry: affine("entry")?,
            blocks,
            global_gate: cfg.has_global_gate().then(|| gate("gca")).transpose()?,
            compress: affine("compress")?,
            head1: affine("head.conv1")?,
            head2: affine("head.conv2")?,
        })
    }
}

/// Channel attention `sigmoid(fc2(relu(fc1(avg_pool(x)))))`: one weight in (0, 1)
/// per sample and channel of `x`.
pub fn ca_gate<T: Element, G: Graph<T>>(
    g: &mut G,
    x: &G::Value,
    fc1: [&G::Value; 2],
    fc2: [&G::Value; 2],
) -> Result<G::Value> {
    let z = g.global_avg_pool(x)?;
    let h = g.fully_connected(&z, fc1[0], fc1[1])?;
    let h = g.relu(&h)?;
    let a = g.fully_connected(&h, fc2[0], fc2[1])?;
    g.sigmoid(&a)
}

/// The super-resolution network: parameters plus the wiring that uses them.
#[derive(Clone, Debug)]
pub struct Network<T: Element = f32> {
    config: NetworkConfig,
    pub params: ParamStore<T>,
    layout: Layout,
}

/// He-initialised parameters (std `sqrt(2 / fan_in)`, zero biases), deterministic in `seed`.
pub fn init_weights<T: Element>(cfg: &NetworkConfig, seed: u64) -> Result<Network<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for spec in param_specs(cfg) {
        let t = match spec.fan_in {
            Some(fan_in) => {
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let n: usize = spec.dims.iter().product();
                let data = (0..n).map(|_| T::from_f64_lossy(normal.sample(&mut rng))).collect();
                Tensor::from_vec(&spec.dims, data)?
            }
            None => Tensor::zeros(&spec.dims)?,
        };
        tensors.push((spec.name, t));
    }
    Network::from_tensors(cfg.clone(), tensors)
}

/// Transfer a trained x2 body to another scale; only `head.conv2` is re-initialised.
pub fn load_from_scale2<T: Element>(source: &Network<T>, target: &NetworkConfig) -> Result<Network<T>> {
    if !source.config.same_body(target) {
        return Err(Error::Config(format!(
            "cannot transfer weights: body differs (source N={} C={}, target N={} C={})",
            source.config.oam_count, source.config.width, target.oam_count, target.width
        )));
    }
    let fresh = init_weights::<T>(target, target.seed)?;
    let tensors = fresh.params.iter().map(|p| {
        let t = match source.params.by_name(&p.name) {
            Some(src) if src.value.dims() == p.value.dims() => src.value.clone(),
            _ => p.value.clone(),
        };
        (p.name.clone(), t)
    });
    Network::from_tensors(target.clone(), tensors.collect::<Vec<_>>())
}

impl<T: Element> Network<T> {
    /// Build from named tensors; every spec'd parameter must appear exactly once.
    pub fn from_tensors(config: NetworkConfig, tensors: impl IntoIterator<Item = (String, Tensor<T>)>) -> Result<Self> {
        config.validate()?;
        let mut by_name: HashMap<String, Tensor<T>> = HashMap::new();
        for (name, t) in tensors {
            if by_name.insert(name.clone(), t).is_some() {
                return Err(Error::Params(format!("parameter {name} given twice")));
            }
        }
        let mut store = ParamStore::new();
        for spec in param_specs(&config) {
            let t = by_name
                .remove(&spec.name)
                .ok_or_else(|| Error::Params(format!("missing parameter {}", spec.name)))?;
            if t.dims() != spec.dims.as_slice() {
                return Err(Error::Params(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    spec.name,
                    t.dims(),
                    spec.dims
                )));
            }
            store.add(spec.name, t)?;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Params(format!("unexpected parameter {extra}")));
        }
        let layout = Layout::resolve(&config, &store)?;
        Ok(Self {
            config,
            params: store,
            layout,
        })
    }

    /// Every parameter zero.
    pub fn zeros(config: &NetworkConfig) -> Result<Self> {
        let tensors = param_specs(config)
            .into_iter()
            .map(|s| Ok((s.name, Tensor::zeros(&s.dims)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_tensors(config.clone(), tensors)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Same network in another precision.
    pub fn cast<U: Element>(&self) -> Network<U> {
        let tensors: Vec<_> = self.params.iter().map(|p| (p.name.clone(), p.value.cast::<U>())).collect();
        Network::from_tensors(self.config.clone(), tensors).expect("same config and shapes")
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = x.dims4("network input")?;
        if c != 1 {
            return Err(Error::ShapeMismatch {
                op: "network input channels",
                lhs: vec![1],
                rhs: vec![c],
            });
        }
        if h < MIN_INPUT_EXTENT || w < MIN_INPUT_EXTENT {
            return Err(Error::InputTooSmall {
                height: h,
                width: w,
                min: MIN_INPUT_EXTENT,
            });
        }
        Ok(())
    }

    fn conv<G: Graph<T>>(&self, g: &mut G, x: &G::Value, a: Affine) -> Result<G::Value> {
        let w = g.param(&self.params, a.weight);
        let b = g.param(&self.params, a.bias);
        g.conv2d(x, &w, &b)
    }

    fn gate<G: Graph<T>>(&self, g: &mut G, x: &G::Value, gate: Gate) -> Result<G::Value> {
        let w1 = g.param(&self.params, gate.fc1.weight);
        let b1 = g.param(&self.params, gate.fc1.bias);
        let w2 = g.param(&self.params, gate.fc2.weight);
        let b2 = g.param(&self.params, gate.fc2.bias);
        ca_gate(g, x, [&w1, &b1], [&w2, &b2])
    }

    /// Gate (if any) + ReLU + squeeze convolution, with the gate placed per config.
    fn fuse<G: Graph<T>>(&self, g: &mut G, x: &G::Value, gate: Option<Gate>, squeeze: Affine) -> Result<G::Value> {
        let Some(gate) = gate else {
            let r = g.relu(x)?;
            return self.conv(g, &r, squeeze);
        };
        match self.config.ca_placement {
            GatePlacement::BeforeReluConv => {
                let alpha = self.gate(g, x, gate)?;
                let scaled = g.channel_scale(x, &alpha)?;
                let r = g.relu(&scaled)?;
                self.conv(g, &r, squeeze)
            }
            GatePlacement::Between => {
                let r = g.relu(x)?;
                let alpha = self.gate(g, &r, gate)?;
                let scaled = g.channel_scale(&r, &alpha)?;
                self.conv(g, &scaled, squeeze)
            }
            GatePlacement::AfterReluConv => {
                let r = g.relu(x)?;
                let y = self.conv(g, &r, squeeze)?;
                let alpha = self.gate(g, &y, gate)?;
                g.channel_scale(&y, &alpha)
            }
        }
    }

    /// Run module `i` on a `(N, C, H, W)` feature map.
    pub fn oam_forward<G: Graph<T>>(&self, g: &mut G, i: usize, x: &G::Value) -> Result<G::Value> {
        let block = self.layout.blocks.get(i).ok_or_else(|| {
            Error::Config(format!("module {i} out of range for {} modules", self.layout.blocks.len()))
        })?;
        let c = g.value(x).dims4("module input")?.1;
        if c != self.config.width {
            return Err(Error::ShapeMismatch {
                op: "module input channels",
                lhs: vec![self.config.width],
                rhs: vec![c],
            });
        }
        self.block(g, x, block)
    }

    fn block<G: Graph<T>>(&self, g: &mut G, x: &G::Value, block: &Block) -> Result<G::Value> {
        let branch = match block {
            Block::Standard { conv1, conv2 } => {
                let y = self.conv(g, x, *conv1)?;
                let y = g.relu(&y)?;
                self.conv(g, &y, *conv2)?
            }
            Block::Branched { branches, gate, fuse } => {
                let feats = branches
                    .iter()
                    .map(|a| self.conv(g, x, *a))
                    .collect::<Result<Vec<_>>>()?;
                let cat = g.concat_channels(&feats)?;
                self.fuse(g, &cat, *gate, *fuse)?
            }
        };
        g.add(x, &branch)
    }

    /// Run the network on `(N, 1, H, W)` Y-channel input, giving `(N, 1, R*H, R*W)`.
    pub fn forward<G: Graph<T>>(&self, g: &mut G, input: G::Value) -> Result<G::Value> {
        self.check_input(g.value(&input))?;
        let f0 = self.conv(g, &input, self.layout.entry)?;
        let mut stages = Vec::with_capacity(self.layout.blocks.len());
        let mut cur = f0.clone();
        for block in &self.layout.blocks {
            cur = self.block(g, &cur, block)?;
            stages.push(cur.clone());
        }
        drop(cur);
        let hier = g.concat_channels(&stages)?;
        drop(stages);
        let fused = self.fuse(g, &hier, self.layout.global_gate, self.layout.compress)?;
        let out = g.add(&f0, &fused)?;
        let h = self.conv(g, &out, self.layout.head1)?;
        let h = self.conv(g, &h, self.layout.head2)?;
        g.pixel_shuffle(&h, self.config.scale)
    }

    /// Forward pass recorded on `tape`.
    pub fn forward_tape(&self, tape: &mut Tape<T>, input: Tensor<T>) -> Result<Var> {
        let x = tape.input(input);
        self.forward(tape, x)
    }

    /// Forward pass without recording.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Eager;
        let x = <Eager as Graph<T>>::input(&mut g, input.clone());
        let out = self.forward(&mut g, x)?;
        Ok(std::rc::Rc::try_unwrap(out).unwrap_or_else(|rc| (*rc).clone()))
    }
}
