//! Embedding CNN. The embedded sample is a one-channel `max_len x embed_dim`
//! map; each layer is a 2D convolution with ReLU and non-overlapping max
//! pooling. The last pooled maps are flattened into a ReLU dense layer with
//! dropout and a single sigmoid output.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::nn::{self, AdamParams, Objective, Schedule};
use crate::balance::ClassWeights;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{self, Rng};
use crate::vectorize::IndexSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding keeping the spatial size; the odd extra row/column goes
    /// after (bottom/right).
    Same,
    /// No padding.
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnParams {
    pub max_len: usize,
    pub embed_dim: usize,
    /// Embedding table init range `U(-r, r)`.
    pub embed_init: f64,
    pub feature_maps: usize,
    pub kernel: [usize; 2],
    pub pool: [usize; 2],
    pub padding: Padding,
    pub dense_units: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
}

impl Default for CnnParams {
    fn default() -> Self {
        CnnParams {
            max_len: 128,
            embed_dim: 64,
            embed_init: 0.05,
            feature_maps: 128,
            kernel: [4, 4],
            pool: [2, 2],
            padding: Padding::Same,
            dense_units: 64,
            dropout: 0.5,
            epochs: 10,
            batch_size: 32,
            adam: AdamParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    c_in: usize,
    /// Padded input size.
    hp: usize,
    wp: usize,
    pad_top: usize,
    pad_left: usize,
    c_out: usize,
    /// Convolution output size.
    ho: usize,
    wo: usize,
    /// Pooled output size.
    hq: usize,
    wq: usize,
}

impl ConvGeom {
    fn in_len(&self) -> usize {
        self.c_in * self.hp * self.wp
    }

    fn out_len(&self) -> usize {
        self.c_out * self.ho * self.wo
    }

    fn pooled_len(&self) -> usize {
        self.c_out * self.hq * self.wq
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Geometry {
    layers: Vec<ConvGeom>,
    flat: usize,
}

impl CnnParams {
    pub(crate) fn geometry(&self, n_layers: usize) -> Result<Geometry> {
        let [kh, kw] = self.kernel;
        let [ph, pw] = self.pool;
        if self.max_len == 0 || self.embed_dim == 0 || self.feature_maps == 0 || self.dense_units == 0 {
            return Err(Error::Config("CNN sizes must be >= 1".into()));
        }
        if kh == 0 || kw == 0 || ph == 0 || pw == 0 || self.batch_size == 0 {
            return Err(Error::Config("CNN kernel, pool and batch sizes must be >= 1".into()));
        }
        let (mut c, mut h, mut w) = (1, self.max_len, self.embed_dim);
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (pad_top, pad_left, hp, wp) = match self.padding {
                Padding::Same => ((kh - 1) / 2, (kw - 1) / 2, h + kh - 1, w + kw - 1),
                Padding::Valid => (0, 0, h, w),
            };
            if hp < kh || wp < kw {
                return Err(Error::Config(format!("CNN layer {}: {h}x{w} input is smaller than the {kh}x{kw} kernel", l + 1)));
            }
            let (ho, wo) = (hp - kh + 1, wp - kw + 1);
            let (hq, wq) = (ho / ph, wo / pw);
            if hq == 0 || wq == 0 {
                return Err(Error::Config(format!("CNN layer {}: {ho}x{wo} map is smaller than the {ph}x{pw} pool", l + 1)));
            }
            layers.push(ConvGeom {
                c_in: c,
                hp,
                wp,
                pad_top,
                pad_left,
                c_out: self.feature_maps,
                ho,
                wo,
                hq,
                wq,
            });
            (c, h, w) = (self.feature_maps, hq, wq);
        }
        Ok(Geometry { layers, flat: c * h * w })
    }
}

/// Parameter offsets: embedding table, per-layer kernels and biases, dense
/// weights (`flat x units`) and bias, output weights and bias.
#[derive(Debug, Clone)]
struct Layout {
    embed: usize,
    kernels: Vec<(usize, usize)>,
    dense_w: usize,
    dense_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Arch {
    cfg: CnnParams,
    n_ids: usize,
    geom: Geometry,
    layout: Layout,
}

impl Arch {
    pub(crate) fn new(cfg: &CnnParams, n_layers: usize, n_ids: usize) -> Result<Self> {
        if n_ids < 2 {
            return Err(Error::InvalidArgument("CNN id space must include padding and unknown ids".into()));
        }
        let geom = cfg.geometry(n_layers)?;
        let [kh, kw] = cfg.kernel;
        let mut off = n_ids * cfg.embed_dim;
        let mut kernels = Vec::with_capacity(n_layers);
        for g in &geom.layers {
            let k = off;
            off += g.c_out * g.c_in * kh * kw;
            kernels.push((k, off));
            off += g.c_out;
        }
        let dense_w = off;
        let dense_b = dense_w + geom.flat * cfg.dense_units;
        let out_w = dense_b + cfg.dense_units;
        let out_b = out_w + cfg.dense_units;
        let layout = Layout {
            embed: 0,
            kernels,
            dense_w,
            dense_b,
            out_w,
            out_b,
            total: out_b + 1,
        };
        Ok(Arch {
            cfg: cfg.clone(),
            n_ids,
            geom,
            layout,
        })
    }

    fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed, "cnn-init");
        let lay = &self.layout;
        let mut p = vec![0.0; lay.total];
        let r = self.cfg.embed_init;
        for x in &mut p[lay.embed..lay.embed + self.n_ids * self.cfg.embed_dim] {
            *x = if r > 0.0 { rng.random_range(-r..r) } else { 0.0 };
        }
        let [kh, kw] = self.cfg.kernel;
        for (g, &(k, b)) in self.geom.layers.iter().zip(&lay.kernels) {
            nn::glorot(&mut rng, g.c_in * kh * kw, g.c_out * kh * kw, &mut p[k..b]);
        }
        nn::glorot(&mut rng, self.geom.flat, self.cfg.dense_units, &mut p[lay.dense_w..lay.dense_b]);
        nn::glorot(&mut rng, self.cfg.dense_units, 1, &mut p[lay.out_w..lay.out_b]);
        p
    }

    fn check(&self, seq: &IndexSequence) -> Result<()> {
        if seq.0.len() != self.cfg.max_len {
            return Err(Error::DimensionMismatch(format!(
                "CNN expects sequences of length {}, got {}",
                self.cfg.max_len,
                seq.0.len()
            )));
        }
        if let Some(&id) = seq.0.iter().find(|&&id| id as usize >= self.n_ids) {
            return Err(Error::DimensionMismatch(format!("id {id} outside the CNN's {} ids", self.n_ids)));
        }
        Ok(())
    }
}

struct Trace {
    /// Padded input map of each conv layer.
    inputs: Vec<Vec<f64>>,
    /// Conv pre-activations.
    pre: Vec<Vec<f64>>,
    /// For each pooled cell, the flat index of its maximum in the conv output.
    argmax: Vec<Vec<usize>>,
    flat: Vec<f64>,
    dense_pre: Vec<f64>,
    dense_act: Vec<f64>,
    mask: Option<Vec<f64>>,
    logit: f64,
}

fn conv_forward(g: &ConvGeom, [kh, kw]: [usize; 2], input: &[f64], k: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.out_len()];
    for o in 0..g.c_out {
        let plane = &mut out[o * g.ho * g.wo..(o + 1) * g.ho * g.wo];
        plane.fill(bias[o]);
        for c in 0..g.c_in {
            for a in 0..kh {
                for b in 0..kw {
                    let kv = k[((o * g.c_in + c) * kh + a) * kw + b];
                    if kv == 0.0 {
                        continue;
                    }
                    for i in 0..g.ho {
                        let src = &input[(c * g.hp + i + a) * g.wp + b..][..g.wo];
                        let dst = &mut plane[i * g.wo..(i + 1) * g.wo];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += kv * s);
                    }
                }
            }
        }
    }
    out
}

/// Accumulates kernel and bias gradients; returns the input-map gradient
/// when `want_input`.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    g: &ConvGeom,
    [kh, kw]: [usize; 2],
    input: &[f64],
    k: &[f64],
    dz: &[f64],
    gk: &mut [f64],
    gb: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let mut din = if want_input { vec![0.0; g.in_len()] } else { Vec::new() };
    for o in 0..g.c_out {
        let plane = &dz[o * g.ho * g.wo..(o + 1) * g.ho * g.wo];
        if plane.iter().all(|&d| d == 0.0) {
            continue;
        }
        gb[o] += plane.iter().sum::<f64>();
        for c in 0..g.c_in {
            for a in 0..kh {
                for b in 0..kw {
                    let ki = ((o * g.c_in + c) * kh + a) * kw + b;
                    let mut acc = 0.0;
                    for i in 0..g.ho {
                        let src = &input[(c * g.hp + i + a) * g.wp + b..][..g.wo];
                        let d = &plane[i * g.wo..(i + 1) * g.wo];
                        acc += src.iter().zip(d).map(|(s, d)| s * d).sum::<f64>();
                    }
                    gk[ki] += acc;
                    if want_input {
                        let kv = k[ki];
                        for i in 0..g.ho {
                            let d = &plane[i * g.wo..(i + 1) * g.wo];
                            let dst = &mut din[(c * g.hp + i + a) * g.wp + b..][..g.wo];
                            dst.iter_mut().zip(d).for_each(|(x, d)| *x += kv * d);
                        }
                    }
                }
            }
        }
    }
    din
}

/// ReLU then max pooling; ties go to the first cell in row-major order.
fn relu_pool(g: &ConvGeom, [ph, pw]: [usize; 2], pre: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = vec![0.0; g.pooled_len()];
    let mut argmax = vec![0; g.pooled_len()];
    for o in 0..g.c_out {
        for qi in 0..g.hq {
            for qj in 0..g.wq {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                for a in 0..ph {
                    for b in 0..pw {
                        let at = (o * g.ho + qi * ph + a) * g.wo + qj * pw + b;
                        let v = pre[at].max(0.0);
                        if v > best {
                            best = v;
                            best_at = at;
                        }
                    }
                }
                let q = (o * g.hq + qi) * g.wq + qj;
                pooled[q] = best;
                argmax[q] = best_at;
            }
        }
    }
    (pooled, argmax)
}

/// Places `maps` (`c x h x w`) into a zero-padded `c x hp x wp` buffer.
fn pad(g: &ConvGeom, maps: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; g.in_len()];
    for c in 0..g.c_in {
        for i in 0..h {
            let dst = (c * g.hp + i + g.pad_top) * g.wp + g.pad_left;
            out[dst..dst + w].copy_from_slice(&maps[(c * h + i) * w..(c * h + i + 1) * w]);
        }
    }
    out
}

fn unpad(g: &ConvGeom, padded: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; g.c_in * h * w];
    for c in 0..g.c_in {
        for i in 0..h {
            let src = (c * g.hp + i + g.pad_top) * g.wp + g.pad_left;
            out[(c * h + i) * w..(c * h + i + 1) * w].copy_from_slice(&padded[src..src + w]);
        }
    }
    out
}

fn forward(arch: &Arch, p: &[f64], ids: &[u32], dropout: Option<(&mut Rng, f64)>) -> Trace {
    let cfg = &arch.cfg;
    let lay = &arch.layout;
    let d = cfg.embed_dim;
    let mut maps = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        let e = lay.embed + id as usize * d;
        maps.extend_from_slice(&p[e..e + d]);
    }
    let (mut h, mut w) = (cfg.max_len, d);
    let n = arch.geom.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut argmax = Vec::with_capacity(n);
    for (g, &(k, b)) in arch.geom.layers.iter().zip(&lay.kernels) {
        let input = pad(g, &maps, h, w);
        let z = conv_forward(g, cfg.kernel, &input, &p[k..b], &p[b..b + g.c_out]);
        let (pooled, am) = relu_pool(g, cfg.pool, &z);
        inputs.push(input);
        pre.push(z);
        argmax.push(am);
        maps = pooled;
        (h, w) = (g.hq, g.wq);
    }
    let units = cfg.dense_units;
    let mut dense_pre = p[lay.dense_b..lay.dense_b + units].to_vec();
    for (f, &x) in maps.iter().enumerate() {
        if x != 0.0 {
            let row = &p[lay.dense_w + f * units..lay.dense_w + (f + 1) * units];
            dense_pre.iter_mut().zip(row).for_each(|(z, &wf)| *z += x * wf);
        }
    }
    let mut dense_act: Vec<f64> = dense_pre.iter().map(|&z| z.max(0.0)).collect();
    let mask = match dropout {
        Some((rng, rate)) if rate > 0.0 => {
            let m = nn::dropout_mask(rng, rate, units);
            dense_act.iter_mut().zip(&m).for_each(|(a, m)| *a *= m);
            Some(m)
        }
        _ => None,
    };
    let logit = p[lay.out_b] + dense_act.iter().zip(&p[lay.out_w..lay.out_b]).map(|(a, w)| a * w).sum::<f64>();
    Trace {
        inputs,
        pre,
        argmax,
        flat: maps,
        dense_pre,
        dense_act,
        mask,
        logit,
    }
}

fn backward(arch: &Arch, p: &[f64], ids: &[u32], t: &Trace, dlogit: f64, grad: &mut [f64]) {
    let cfg = &arch.cfg;
    let lay = &arch.layout;
    let units = cfg.dense_units;
    for (u, &a) in t.dense_act.iter().enumerate() {
        grad[lay.out_w + u] += dlogit * a;
    }
    grad[lay.out_b] += dlogit;
    let mut dz: Vec<f64> = p[lay.out_w..lay.out_b].iter().map(|w| dlogit * w).collect();
    if let Some(m) = &t.mask {
        dz.iter_mut().zip(m).for_each(|(d, m)| *d *= m);
    }
    dz.iter_mut().zip(&t.dense_pre).for_each(|(d, &z)| {
        if z <= 0.0 {
            *d = 0.0
        }
    });
    if dz.iter().all(|&d| d == 0.0) {
        return;
    }
    grad[lay.dense_b..lay.dense_b + units].iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
    let mut dmaps = vec![0.0; t.flat.len()];
    for (f, &x) in t.flat.iter().enumerate() {
        let off = lay.dense_w + f * units;
        dmaps[f] = p[off..off + units].iter().zip(&dz).map(|(w, d)| w * d).sum();
        if x != 0.0 {
            grad[off..off + units].iter_mut().zip(&dz).for_each(|(g, d)| *g += x * d);
        }
    }
    let n = arch.geom.layers.len();
    for l in (0..n).rev() {
        let g = &arch.geom.layers[l];
        let (k, b) = lay.kernels[l];
        let mut dpre = vec![0.0; g.out_len()];
        for (q, &at) in t.argmax[l].iter().enumerate() {
            if t.pre[l][at] > 0.0 {
                dpre[at] += dmaps[q];
            }
        }
        let (gk, rest) = grad[k..].split_at_mut(b - k);
        let din = conv_backward(g, cfg.kernel, &t.inputs[l], &p[k..b], &dpre, gk, &mut rest[..g.c_out], true);
        let (h, w) = if l == 0 {
            (cfg.max_len, cfg.embed_dim)
        } else {
            let prev = &arch.geom.layers[l - 1];
            (prev.hq, prev.wq)
        };
        dmaps = unpad(g, &din, h, w);
    }
    let d = cfg.embed_dim;
    for (i, &id) in ids.iter().enumerate() {
        let e = lay.embed + id as usize * d;
        grad[e..e + d].iter_mut().zip(&dmaps[i * d..(i + 1) * d]).for_each(|(g, x)| *g += x);
    }
}

pub(crate) struct CnnObjective<'a> {
    arch: Arch,
    seqs: &'a [IndexSequence],
    labels: &'a [u8],
    weights: Vec<f64>,
}

impl<'a> CnnObjective<'a> {
    pub(crate) fn new(
        cfg: &CnnParams,
        n_layers: usize,
        seqs: &'a [IndexSequence],
        n_ids: usize,
        labels: &'a [u8],
        weights: ClassWeights,
    ) -> Result<Self> {
        let arch = Arch::new(cfg, n_layers, n_ids)?;
        for s in seqs {
            arch.check(s)?;
        }
        Ok(CnnObjective {
            arch,
            seqs,
            labels,
            weights: weights.sample_weights(labels),
        })
    }

    pub(crate) fn init(&self, seed: u64) -> Vec<f64> {
        self.arch.init(seed)
    }
}

impl Objective for CnnObjective<'_> {
    fn n_params(&self) -> usize {
        self.arch.layout.total
    }

    fn n_samples(&self) -> usize {
        self.labels.len()
    }

    fn loss(&self, params: &[f64], rows: &[usize], mut dropout: Option<&mut Rng>, mut grad: Option<&mut [f64]>) -> f64 {
        let scale = 1.0 / rows.len() as f64;
        let rate = self.arch.cfg.dropout;
        let mut total = 0.0;
        for &i in rows {
            let ids = &self.seqs[i].0;
            let t = forward(&self.arch, params, ids, dropout.as_deref_mut().map(|r| (r, rate)));
            let (l, dl) = nn::logistic_loss(t.logit, self.labels[i]);
            total += self.weights[i] * l;
            if let Some(g) = grad.as_deref_mut() {
                backward(&self.arch, params, ids, &t, scale * self.weights[i] * dl, g);
            }
        }
        total * scale
    }

    fn pattern(&self, params: &[f64], rows: &[usize]) -> Vec<u32> {
        let mut out = Vec::new();
        for &i in rows {
            let t = forward(&self.arch, params, &self.seqs[i].0, None);
            for (pre, argmax) in t.pre.iter().zip(&t.argmax) {
                out.extend(argmax.iter().map(|&at| (at as u32) << 1 | u32::from(pre[at] > 0.0)));
            }
            out.extend(t.dense_pre.iter().map(|&z| u32::from(z > 0.0)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    config: CnnParams,
    layers: usize,
    n_ids: usize,
    #[serde(with = "crate::blob::f64s")]
    params: Vec<f64>,
}

impl Cnn {
    pub fn config(&self) -> &CnnParams {
        &self.config
    }

    pub fn n_ids(&self) -> usize {
        self.n_ids
    }

    pub fn scores(&self, seqs: &[IndexSequence], n_ids: usize, exec: Execution) -> Result<Vec<f64>> {
        if n_ids != self.n_ids {
            return Err(Error::DimensionMismatch(format!("CNN trained on {} ids, got {n_ids}", self.n_ids)));
        }
        let arch = Arch::new(&self.config, self.layers, self.n_ids)?;
        if arch.layout.total != self.params.len() {
            return Err(Error::Serde("CNN parameter count does not match its configuration".into()));
        }
        for s in seqs {
            arch.check(s)?;
        }
        Ok(exec.map(seqs, |s| nn::sigmoid(forward(&arch, &self.params, &s.0, None).logit)))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn fit(
    cfg: &CnnParams,
    n_layers: usize,
    seqs: &[IndexSequence],
    n_ids: usize,
    labels: &[u8],
    weights: ClassWeights,
    seed: u64,
    track: bool,
) -> Result<(Cnn, Vec<f64>)> {
    let obj = CnnObjective::new(cfg, n_layers, seqs, n_ids, labels, weights)?;
    let mut params = obj.init(seed);
    let sched = Schedule {
        adam: cfg.adam,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
    };
    let history = nn::fit_adam(&obj, &mut params, &sched, seed, track);
    Ok((
        Cnn {
            config: cfg.clone(),
            layers: n_layers,
            n_ids,
            params,
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let g = CnnParams::default().geometry(2).unwrap();
        assert_eq!((g.layers[0].ho, g.layers[0].wo, g.layers[0].hq, g.layers[0].wq), (128, 64, 64, 32));
        assert_eq!((g.layers[1].c_in, g.layers[1].hq, g.layers[1].wq), (128, 32, 16));
        assert_eq!(g.flat, 128 * 32 * 16);
    }

    #[test]
    fn valid_padding_shrinks_and_can_be_infeasible() {
        let cfg = CnnParams {
            max_len: 12,
            embed_dim: 8,
            padding: Padding::Valid,
            ..Default::default()
        };
        let g = cfg.geometry(1).unwrap();
        assert_eq!((g.layers[0].ho, g.layers[0].wo, g.layers[0].hq, g.layers[0].wq), (9, 5, 4, 2));
        assert!(cfg.geometry(2).is_err());
    }

    #[test]
    fn conv_matches_direct_sum() {
        let g = ConvGeom {
            c_in: 2,
            hp: 4,
            wp: 5,
            pad_top: 0,
            pad_left: 0,
            c_out: 1,
            ho: 3,
            wo: 3,
            hq: 1,
            wq: 1,
        };
        let input: Vec<f64> = (0..40).map(|v| (v as f64 * 0.37).sin()).collect();
        let k: Vec<f64> = (0..2 * 2 * 3).map(|v| (v as f64 * 0.91).cos()).collect();
        let out = conv_forward(&g, [2, 3], &input, &k, &[0.25]);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.25;
                for c in 0..2 {
                    for a in 0..2 {
                        for b in 0..3 {
                            s += k[(c * 2 + a) * 3 + b] * input[(c * 4 + i + a) * 5 + j + b];
                        }
                    }
                }
                assert!((out[i * 3 + j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_wrong_length_or_ids() {
        let cfg = CnnParams {
            max_len: 4,
            embed_dim: 4,
            feature_maps: 2,
            dense_units: 2,
            ..Default::default()
        };
        let arch = Arch::new(&cfg, 1, 5).unwrap();
        assert!(arch.check(&IndexSequence(vec![2, 3, 0])).is_err());
        assert!(arch.check(&IndexSequence(vec![2, 3, 0, 5])).is_err());
        arch.check(&IndexSequence(vec![2, 3, 0, 4])).unwrap();
    }
}
