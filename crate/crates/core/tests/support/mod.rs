//! Independent reference implementations and numeric helpers for tests.
//!
//! Everything here is written as plain loops over flat buffers so it shares
//! no code path with the optimized library routines it checks.
#![allow(dead_code)]

use oasr_core::model::{BlockDesign, FusionMode, GatePlacement};
use oasr_core::ops::{Graph, ParamStore, Tape, Var};
use oasr_core::{Network, NetworkConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(dims: &[usize], rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Uniform in `±[gap, hi]`, keeping values away from a kink at zero.
pub fn away_from_zero(dims: &[usize], rng: &mut ChaCha8Rng, gap: f64, hi: f64) -> Tensor<f64> {
    let n: usize = dims.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.random_range(gap..hi);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(dims, data).unwrap()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct-loop zero-padded "same" convolution over a batch.
pub fn naive_conv2d(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
    let d = x.dims();
    let (n, cin, h, wd) = (d[0], d[1], d[2], d[3]);
    let k = w.dims();
    let (cout, kh, kw) = (k[0], k[2], k[3]);
    let (ph, pw) = (kh as i64 / 2, kw as i64 / 2);
    let mut out = vec![0.0; n * cout * h * wd];
    for s in 0..n {
        for o in 0..cout {
            for y in 0..h {
                for xx in 0..wd {
                    let mut acc = b.data()[o];
                    for c in 0..cin {
                        for i in 0..kh {
                            for j in 0..kw {
                                let sy = y as i64 + i as i64 - ph;
                                let sx = xx as i64 + j as i64 - pw;
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= wd as i64 {
                                    continue;
                                }
                                acc += x.data()[((s * cin + c) * h + sy as usize) * wd + sx as usize]
                                    * w.data()[((o * cin + c) * kh + i) * kw + j];
                            }
                        }
                    }
                    out[((s * cout + o) * h + y) * wd + xx] = acc;
                }
            }
        }
    }
    Tensor::from_vec(&[n, cout, h, wd], out).unwrap()
}

/// A single-sample feature map `(C, H, W)`.
#[derive(Clone, Debug)]
pub struct Fm {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub d: Vec<f64>,
}

impl Fm {
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.d[(c * self.h + y) * self.w + x]
    }

    pub fn from_tensor(t: &Tensor<f64>) -> Self {
        let d = t.dims();
        assert_eq!(d[0], 1);
        Self {
            c: d[1],
            h: d[2],
            w: d[3],
            d: t.data().to_vec(),
        }
    }
}

fn conv(x: &Fm, w: &[f64], b: &[f64], cout: usize, kh: usize, kw: usize) -> Fm {
    let (ph, pw) = (kh as i64 / 2, kw as i64 / 2);
    let mut d = vec![0.0; cout * x.h * x.w];
    for o in 0..cout {
        for y in 0..x.h {
            for xx in 0..x.w {
                let mut acc = b[o];
                for c in 0..x.c {
                    for i in 0..kh {
                        for j in 0..kw {
                            let sy = y as i64 + i as i64 - ph;
                            let sx = xx as i64 + j as i64 - pw;
                            if sy >= 0 && sx >= 0 && (sy as usize) < x.h && (sx as usize) < x.w {
                                acc += x.at(c, sy as usize, sx as usize) * w[((o * x.c + c) * kh + i) * kw + j];
                            }
                        }
                    }
                }
                d[(o * x.h + y) * x.w + xx] = acc;
            }
        }
    }
    Fm { c: cout, h: x.h, w: x.w, d }
}

fn relu(x: &Fm) -> Fm {
    Fm {
        d: x.d.iter().map(|v| v.max(0.0)).collect(),
        ..x.clone()
    }
}

fn add(a: &Fm, b: &Fm) -> Fm {
    Fm {
        d: a.d.iter().zip(&b.d).map(|(x, y)| x + y).collect(),
        ..a.clone()
    }
}

fn concat(parts: &[&Fm]) -> Fm {
    let mut d = Vec::new();
    for p in parts {
        d.extend_from_slice(&p.d);
    }
    Fm {
        c: parts.iter().map(|p| p.c).sum(),
        h: parts[0].h,
        w: parts[0].w,
        d,
    }
}

pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn fc(v: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let din = v.len();
    (0..b.len())
        .map(|o| b[o] + (0..din).map(|i| w[o * din + i] * v[i]).sum::<f64>())
        .collect()
}

/// `sigmoid(fc2(relu(fc1(mean over space))))` on one sample.
pub fn gate_on_vector(z: &[f64], w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> Vec<f64> {
    let hidden: Vec<f64> = fc(z, w1, b1).into_iter().map(|v| v.max(0.0)).collect();
    fc(&hidden, w2, b2).into_iter().map(sigmoid).collect()
}

fn pool(x: &Fm) -> Vec<f64> {
    let plane = (x.h * x.w) as f64;
    (0..x.c)
        .map(|c| x.d[c * x.h * x.w..(c + 1) * x.h * x.w].iter().sum::<f64>() / plane)
        .collect()
}

fn scale(x: &Fm, alpha: &[f64]) -> Fm {
    let plane = x.h * x.w;
    Fm {
        d: x.d.iter().enumerate().map(|(i, v)| v * alpha[i / plane]).collect(),
        ..x.clone()
    }
}

fn shuffle(x: &Fm, r: usize) -> Fm {
    let c = x.c / (r * r);
    let (h, w) = (x.h * r, x.w * r);
    let mut d = vec![0.0; c * h * w];
    for k in 0..c {
        for y in 0..h {
            for xx in 0..w {
                d[(k * h + y) * w + xx] = x.at(k * r * r + (y % r) * r + xx % r, y / r, xx / r);
            }
        }
    }
    Fm { c, h, w, d }
}

fn p<'a>(net: &'a Network<f64>, name: &str) -> &'a [f64] {
    net.params.by_name(name).unwrap_or_else(|| panic!("no {name}")).value.data()
}

fn gate(net: &Network<f64>, prefix: &str, x: &Fm) -> Vec<f64> {
    gate_on_vector(
        &pool(x),
        p(net, &format!("{prefix}.fc1.weight")),
        p(net, &format!("{prefix}.fc1.bias")),
        p(net, &format!("{prefix}.fc2.weight")),
        p(net, &format!("{prefix}.fc2.bias")),
    )
}

fn named_conv(net: &Network<f64>, prefix: &str, x: &Fm) -> Fm {
    let w = net.params.by_name(&format!("{prefix}.weight")).unwrap();
    let d = w.value.dims();
    conv(x, w.value.data(), p(net, &format!("{prefix}.bias")), d[0], d[2], d[3])
}

fn assert_reference_config(cfg: &NetworkConfig) {
    assert_eq!(cfg.block_design, BlockDesign::Orientation);
    assert_eq!(cfg.fusion_mode, FusionMode::LocalGlobal);
    assert_eq!(cfg.ca_placement, GatePlacement::BeforeReluConv);
}

/// One orientation-aware module, transcribed equation by equation.
pub fn oracle_oam(net: &Network<f64>, i: usize, x: &Fm) -> Fm {
    assert_reference_config(net.config());
    let pre = format!("oam.{i}");
    let f_h = named_conv(net, &format!("{pre}.conv_h"), x);
    let f_v = named_conv(net, &format!("{pre}.conv_v"), x);
    let f_d = named_conv(net, &format!("{pre}.conv_d"), x);
    let f_co = concat(&[&f_h, &f_v, &f_d]);
    let alpha = gate(net, &format!("{pre}.lca"), &f_co);
    let f_co_lca = scale(&f_co, &alpha);
    let f_lca = named_conv(net, &format!("{pre}.fuse"), &relu(&f_co_lca));
    add(x, &f_lca)
}

/// The whole network on one sample.
pub fn oracle_network(net: &Network<f64>, x: &Fm) -> Fm {
    let cfg = net.config();
    assert_reference_config(cfg);
    let f0 = named_conv(net, "entry", x);
    let mut feats = Vec::new();
    let mut cur = f0.clone();
    for i in 0..cfg.oam_count {
        cur = oracle_oam(net, i, &cur);
        feats.push(cur.clone());
    }
    let f_ch = concat(&feats.iter().collect::<Vec<_>>());
    let alpha = gate(net, "gca", &f_ch);
    let f_gca = named_conv(net, "compress", &relu(&scale(&f_ch, &alpha)));
    let f_out = add(&f0, &f_gca);
    let h1 = named_conv(net, "head.conv1", &f_out);
    let h2 = named_conv(net, "head.conv2", &h1);
    shuffle(&h2, cfg.scale)
}

/// Scalar Adam transcribed from its update rule; returns the trajectory.
pub fn adam_oracle(theta0: f64, grad: impl Fn(f64) -> f64, steps: usize, lr: f64) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps {
        let g = grad(theta);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        theta -= lr * m_hat / (v_hat.sqrt() + eps);
        out.push(theta);
    }
    out
}

/// Mean SSIM from explicit 11x11 windows; plain 2-D Gaussian weights.
pub fn ssim_direct(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let k = 11usize;
    let sigma = 1.5f64;
    let mut win = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * k + j] = (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = ((0.01 * 255.0f64).powi(2), (0.03 * 255.0f64).powi(2));
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in 0..=h - k {
        for x in 0..=w - k {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let wt = win[i * k + j];
                    mx += wt * a[(y + i) * w + x + j];
                    my += wt * b[(y + i) * w + x + j];
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let wt = win[i * k + j];
                    let (u, v) = (a[(y + i) * w + x + j] - mx, b[(y + i) * w + x + j] - my);
                    vx += wt * u * u;
                    vy += wt * v * v;
                    cxy += wt * u * v;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}


/// Central-difference check of a taped computation against its backward pass.
///
/// The scalar under test is `<build(inputs), probe>` for a random probe.
/// Returns the worst norm-relative error over all inputs.
pub fn grad_check(
    seed: u64,
    inputs: &[Tensor<f64>],
    h: f64,
    build: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> f64 {
    let forward = |xs: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.input(x.clone())).collect();
        let out = build(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = forward(inputs);
    let probe = uniform(tape.get(out).dims(), &mut rng(seed ^ 0x9e37), -1.0, 1.0);
    let grads = tape.backward(out, probe.clone(), &mut ParamStore::new()).unwrap();
    let loss = |xs: &[Tensor<f64>]| {
        let (t, _, o) = forward(xs);
        dot(t.get(o).data(), probe.data())
    };
    let mut worst = 0.0f64;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[k].numel()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..inputs[k].numel() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += h;
            let up = loss(&xs);
            xs[k].data_mut()[i] -= 2.0 * h;
            let down = loss(&xs);
            numeric.push((up - down) / (2.0 * h));
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// End-to-end check of every parameter tensor (up to `per_tensor` sampled
/// entries each) and the input, for a network with randomized weights and biases.
pub fn network_grad_check(cfg: &NetworkConfig, seed: u64, size: usize, per_tensor: usize, h: f64) -> f64 {
    let mut r = rng(seed);
    let mut net = oasr_core::model::init_weights::<f64>(cfg, seed).unwrap();
    for p in net.params.iter_mut() {
        if p.name.ends_with(".bias") {
            p.value = uniform(p.value.dims(), &mut r, -0.1, 0.1);
        }
    }
    let x = uniform(&[1, 1, size, size], &mut r, 0.0, 1.0);
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let out = net.forward(&mut tape, xv).unwrap();
    let probe = uniform(tape.get(out).dims(), &mut r, -1.0, 1.0);
    net.params.zero_grad();
    let grads = tape.backward(out, probe.clone(), &mut net.params).unwrap();
    let input_grad = grads.get(xv).unwrap().clone();
    drop(tape);

    let loss = |n: &Network<f64>, x: &Tensor<f64>| dot(n.infer(x).unwrap().data(), probe.data());
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let names: Vec<String> = net.params.iter().map(|p| p.name.clone()).collect();
    for name in names {
        let numel = net.params.by_name(&name).unwrap().value.numel();
        let picks: Vec<usize> = if numel <= per_tensor {
            (0..numel).collect()
        } else {
            (0..per_tensor).map(|_| r.random_range(0..numel)).collect()
        };
        for i in picks {
            analytic.push(net.params.by_name(&name).unwrap().grad.data()[i]);
            let orig = net.params.by_name(&name).unwrap().value.data()[i];
            net.params.by_name_mut(&name).unwrap().value.data_mut()[i] = orig + h;
            let up = loss(&net, &x);
            net.params.by_name_mut(&name).unwrap().value.data_mut()[i] = orig - h;
            let down = loss(&net, &x);
            net.params.by_name_mut(&name).unwrap().value.data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    for i in 0..per_tensor.min(x.numel()) {
        let k = (i * 7919) % x.numel();
        analytic.push(input_grad.data()[k]);
        let mut xp = x.clone();
        xp.data_mut()[k] += h;
        let up = loss(&net, &xp);
        xp.data_mut()[k] -= 2.0 * h;
        let down = loss(&net, &xp);
        numeric.push((up - down) / (2.0 * h));
    }
    rel_err(&analytic, &numeric)
}
