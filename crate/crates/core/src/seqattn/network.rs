//! Feed-forward network over prunable layers with manual reverse-mode
//! gradients.
//!
//! The architecture is fixed: a stack of dense layers with ReLU between them
//! and either a softmax cross-entropy or a squared-error head. Each layer's
//! effective kernel is the raw kernel times a per-block multiplier assembled
//! from the attention weights, the binary mask and (for powerpropagation)
//! the block Frobenius norm.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::seqattn::layer::PruneLayer;

/// Which pruning algorithm shapes the forward pass and mask selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneAlgo {
    /// Attention-guided phase-scheduled pruning.
    #[serde(rename = "seqattnpp")]
    SeqAttnPP,
    /// Alternating dense/sparse phases with magnitude top-k.
    Acdc,
    /// Dense training, one-shot magnitude pruning, finetune.
    Magnitude,
    /// Block powerpropagation reparameterization, one-shot pruning, finetune.
    PowerProp,
}

impl PruneAlgo {
    pub fn uses_attention(&self) -> bool {
        matches!(self, PruneAlgo::SeqAttnPP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SoftmaxCrossEntropy,
    SquaredError,
}

/// Network layout: layer widths from input to output, the pruning block
/// size, and the smallest block count a layer must have to be pruned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    pub block_size: usize,
    pub loss: LossKind,
    #[serde(default = "default_min_groups")]
    pub min_groups_to_prune: usize,
}

fn default_min_groups() -> usize {
    100
}

#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<PruneLayer>,
    pub algo: PruneAlgo,
    pub loss: LossKind,
}

/// Per-layer gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub logits: Vec<Option<Vec<f64>>>,
}

/// Forward-pass intermediates kept for the backward pass.
pub struct ForwardCache {
    /// Layer inputs: activations[0] is the batch, activations[l] feeds layer l.
    activations: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre_activations: Vec<Array2<f64>>,
    /// Per-layer entry multipliers (attention * mask * reparameterization).
    multipliers: Vec<Array2<f64>>,
    /// Network output (last pre-activation, no ReLU on the head).
    pub output: Array2<f64>,
}

impl Network {
    pub fn init(spec: &NetworkSpec, algo: PruneAlgo, seed: u64) -> Result<Self> {
        if spec.widths.len() < 2 {
            return Err(Error::InvalidArgument(
                "network needs at least input and output widths".into(),
            ));
        }
        let mut layers = Vec::with_capacity(spec.widths.len() - 1);
        for (li, pair) in spec.widths.windows(2).enumerate() {
            let mut r = rng::split(seed, 0x4e7 + li as u64);
            let (n_in, n_out) = (pair[0], pair[1]);
            let groups =
                crate::groups::GroupPartition::blocks(n_in, n_out, spec.block_size)?.num_groups();
            let prunable = groups >= spec.min_groups_to_prune;
            let mut layer = PruneLayer::new(
                n_in,
                n_out,
                spec.block_size,
                prunable,
                algo.uses_attention(),
                &mut r,
            )?;
            if algo == PruneAlgo::PowerProp && prunable {
                // rescale each block by the inverse square root of its norm:
                // the effective kernel |W_b| W_b then matches the plain init
                let norms = layer.block_norms();
                let flat = layer.weight.as_slice_mut().expect("contiguous");
                for (g, group) in layer.partition.groups().iter().enumerate() {
                    if norms[g] > 0.0 {
                        let c = 1.0 / norms[g].sqrt();
                        for &i in group {
                            flat[i] *= c;
                        }
                    }
                }
            }
            layers.push(layer);
        }
        Ok(Self {
            layers,
            algo,
            loss: spec.loss,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").n_out()
    }

    /// The per-entry multiplier of a layer under the current algorithm and
    /// mask state.
    fn multiplier(&self, layer: &PruneLayer) -> Array2<f64> {
        let (n_in, n_out) = (layer.n_in(), layer.n_out());
        let mut m = Array2::<f64>::ones((n_in, n_out));
        if !layer.prunable {
            return m;
        }
        let attention = if self.algo.uses_attention() {
            layer.attention()
        } else {
            None
        };
        let block_norms = if self.algo == PruneAlgo::PowerProp {
            Some(layer.block_norms())
        } else {
            None
        };
        for r in 0..n_in {
            for c in 0..n_out {
                let g = layer.group_of_entry(r * n_out + c);
                let mut v = if layer.active[g] { 1.0 } else { 0.0 };
                if let Some(a) = &attention {
                    v *= a[g];
                }
                if let Some(b) = &block_norms {
                    v *= b[g];
                }
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Run the batch through the network, keeping intermediates.
    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let num_layers = self.layers.len();
        let mut activations = Vec::with_capacity(num_layers);
        let mut pre_activations = Vec::with_capacity(num_layers);
        let mut multipliers = Vec::with_capacity(num_layers);
        let mut h = x.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let m = self.multiplier(layer);
            let w_eff = &layer.weight * &m;
            let z = h.dot(&w_eff);
            activations.push(h);
            multipliers.push(m);
            h = if li + 1 < num_layers {
                z.mapv(|v| v.max(0.0))
            } else {
                z.clone()
            };
            pre_activations.push(z);
        }
        let output = pre_activations.last().expect("nonempty").clone();
        Ok(ForwardCache {
            activations,
            pre_activations,
            multipliers,
            output,
        })
    }

    /// Mean loss of a forward pass against integer labels (cross-entropy) or
    /// real targets (squared error).
    pub fn loss_value(&self, output: &Array2<f64>, targets: &Targets) -> Result<f64> {
        let b = output.nrows() as f64;
        match (self.loss, targets) {
            (LossKind::SoftmaxCrossEntropy, Targets::Labels(labels)) => {
                if labels.len() != output.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: output.nrows(),
                        got: labels.len(),
                    });
                }
                let mut total = 0.0;
                for (i, row) in output.rows().into_iter().enumerate() {
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
                    total += lse - row[labels[i]];
                }
                Ok(total / b)
            }
            (LossKind::SquaredError, Targets::Values(y)) => {
                if y.dim() != output.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: output.len(),
                        got: y.len(),
                    });
                }
                let diff = output - *y;
                Ok(0.5 * diff.iter().map(|d| d * d).sum::<f64>() / b)
            }
            _ => Err(Error::InvalidArgument(
                "loss kind does not match target kind".into(),
            )),
        }
    }

    /// Loss gradient with respect to the network output.
    fn output_delta(&self, output: &Array2<f64>, targets: &Targets) -> Result<Array2<f64>> {
        let b = output.nrows() as f64;
        match (self.loss, targets) {
            (LossKind::SoftmaxCrossEntropy, Targets::Labels(labels)) => {
                let mut p = output.clone();
                for mut row in p.rows_mut() {
                    let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - mx).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
                for (i, &label) in labels.iter().enumerate() {
                    p[(i, label)] -= 1.0;
                }
                Ok(p / b)
            }
            (LossKind::SquaredError, Targets::Values(y)) => Ok((output - *y) / b),
            _ => Err(Error::InvalidArgument(
                "loss kind does not match target kind".into(),
            )),
        }
    }

    /// Full manual backward pass: gradients for every kernel and every logit
    /// vector. Masked blocks receive zero kernel gradient; attention
    /// gradients flow only through active blocks.
    pub fn backward(&self, cache: &ForwardCache, targets: &Targets) -> Result<Gradients> {
        let num_layers = self.layers.len();
        let mut d_weights: Vec<Array2<f64>> = Vec::with_capacity(num_layers);
        let mut d_logits: Vec<Option<Vec<f64>>> = vec![None; num_layers];
        for layer in &self.layers {
            d_weights.push(Array2::zeros((layer.n_in(), layer.n_out())));
        }
        let mut delta = self.output_delta(&cache.output, targets)?;
        for li in (0..num_layers).rev() {
            let layer = &self.layers[li];
            let h_in = &cache.activations[li];
            let mult = &cache.multipliers[li];
            // gradient through the effective kernel
            let d_eff = h_in.t().dot(&delta);
            // raw kernel gradient
            let (n_in, n_out) = (layer.n_in(), layer.n_out());
            let mut dw = &d_eff * mult;
            if self.algo == PruneAlgo::PowerProp && layer.prunable {
                // effective block = |W_b| W_b: d W_b = m_b (r_b dE_b +
                // (<dE_b, W_b> / r_b) W_b)
                let norms = layer.block_norms();
                let t = layer.num_groups();
                let mut inner = vec![0.0; t];
                for r in 0..n_in {
                    for c in 0..n_out {
                        let g = layer.group_of_entry(r * n_out + c);
                        inner[g] += d_eff[(r, c)] * layer.weight[(r, c)];
                    }
                }
                for r in 0..n_in {
                    for c in 0..n_out {
                        let g = layer.group_of_entry(r * n_out + c);
                        let active = if layer.active[g] { 1.0 } else { 0.0 };
                        dw[(r, c)] = if norms[g] > 0.0 {
                            active
                                * (norms[g] * d_eff[(r, c)]
                                    + inner[g] / norms[g] * layer.weight[(r, c)])
                        } else {
                            0.0
                        };
                    }
                }
            }
            if self.algo.uses_attention() && layer.prunable {
                if let Some(attention) = layer.attention() {
                    let t = layer.num_groups();
                    // dw currently holds dE * A * mask; the raw kernel sees it
                    // directly, and the attention path needs dA
                    let mut d_att = vec![0.0; t];
                    for r in 0..n_in {
                        for c in 0..n_out {
                            let g = layer.group_of_entry(r * n_out + c);
                            if layer.active[g] {
                                d_att[g] += d_eff[(r, c)] * layer.weight[(r, c)];
                            }
                        }
                    }
                    // A = G softmax(l): dl_h = A_h (dA_h - sum_g dA_g A_g / G)
                    let g_count = t as f64;
                    let weighted: f64 = d_att
                        .iter()
                        .zip(&attention)
                        .map(|(d, a)| d * a / g_count)
                        .sum();
                    let dl: Vec<f64> = d_att
                        .iter()
                        .zip(&attention)
                        .map(|(d, a)| a * (d - weighted))
                        .collect();
                    d_logits[li] = Some(dl);
                }
            }
            d_weights[li] = dw;
            if li > 0 {
                let w_eff = &layer.weight * mult;
                let dh = delta.dot(&w_eff.t());
                let z_prev = &cache.pre_activations[li - 1];
                delta = Array2::from_shape_fn(dh.dim(), |(i, j)| {
                    if z_prev[(i, j)] > 0.0 {
                        dh[(i, j)]
                    } else {
                        0.0
                    }
                });
            }
        }
        Ok(Gradients {
            weights: d_weights,
            logits: d_logits,
        })
    }

    /// Mean loss and classification accuracy on a labelled set.
    pub fn evaluate(&self, x: &Array2<f64>, targets: &Targets) -> Result<(f64, f64)> {
        let cache = self.forward(x)?;
        let loss = self.loss_value(&cache.output, targets)?;
        let acc = match targets {
            Targets::Labels(labels) => {
                let mut correct = 0usize;
                for (i, row) in cache.output.rows().into_iter().enumerate() {
                    let mut best = (0usize, f64::NEG_INFINITY);
                    for (c, &v) in row.iter().enumerate() {
                        if v > best.1 {
                            best = (c, v);
                        }
                    }
                    if best.0 == labels[i] {
                        correct += 1;
                    }
                }
                correct as f64 / labels.len() as f64
            }
            Targets::Values(_) => f64::NAN,
        };
        Ok((loss, acc))
    }
}

/// Supervision for a batch.
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Values(&'a Array2<f64>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::gradient_rel_error;

    fn spec(widths: Vec<usize>, loss: LossKind) -> NetworkSpec {
        NetworkSpec {
            widths,
            block_size: 2,
            loss,
            min_groups_to_prune: 1,
        }
    }

    fn flatten_params(net: &Network) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &net.layers {
            out.extend(l.weight.iter());
            if let Some(lg) = &l.logits {
                out.extend(lg.iter());
            }
        }
        out
    }

    fn set_params(net: &mut Network, params: &[f64]) {
        let mut i = 0;
        for l in &mut net.layers {
            for w in l.weight.iter_mut() {
                *w = params[i];
                i += 1;
            }
            if let Some(lg) = &mut l.logits {
                for v in lg.iter_mut() {
                    *v = params[i];
                    i += 1;
                }
            }
        }
        assert_eq!(i, params.len());
    }

    fn flatten_grads(net: &Network, g: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for (li, l) in net.layers.iter().enumerate() {
            out.extend(g.weights[li].iter());
            if l.logits.is_some() {
                out.extend(g.logits[li].as_ref().unwrap().iter());
            }
        }
        out
    }

    fn batch(seed: u64, rows: usize, cols: usize) -> Array2<f64> {
        let mut r = rng::seeded(seed);
        Array2::from_shape_fn((rows, cols), |_| rng::normal(&mut r))
    }

    fn check_gradients(algo: PruneAlgo, loss: LossKind, mask_some: bool, seed: u64) {
        let s = spec(vec![4, 6, 3], loss);
        let mut net = Network::init(&s, algo, seed).unwrap();
        if mask_some {
            // prune one block per layer to exercise the masked path
            for l in &mut net.layers {
                l.active[0] = false;
            }
        }
        let x = batch(seed + 1, 7, 4);
        let labels: Vec<usize> = (0..7).map(|i| i % 3).collect();
        let yvals = batch(seed + 2, 7, 3);
        let targets = match loss {
            LossKind::SoftmaxCrossEntropy => Targets::Labels(&labels),
            LossKind::SquaredError => Targets::Values(&yvals),
        };
        let cache = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &targets).unwrap();
        let analytic = flatten_grads(&net, &grads);

        let p0 = flatten_params(&net);
        let h = 1e-6;
        let mut fd = vec![0.0; p0.len()];
        let mut p = p0.clone();
        for i in 0..p0.len() {
            p[i] = p0[i] + h;
            set_params(&mut net, &p);
            let fp = net
                .loss_value(&net.forward(&x).unwrap().output, &targets)
                .unwrap();
            p[i] = p0[i] - h;
            set_params(&mut net, &p);
            let fm = net
                .loss_value(&net.forward(&x).unwrap().output, &targets)
                .unwrap();
            p[i] = p0[i];
            fd[i] = (fp - fm) / (2.0 * h);
        }
        set_params(&mut net, &p0);
        let err = gradient_rel_error(&analytic, &fd);
        assert!(err <= 1e-4, "{algo:?} {loss:?} masked={mask_some}: {err}");
    }

    #[test]
    fn backward_matches_finite_differences_all_algos() {
        check_gradients(
            PruneAlgo::SeqAttnPP,
            LossKind::SoftmaxCrossEntropy,
            false,
            3,
        );
        check_gradients(PruneAlgo::SeqAttnPP, LossKind::SoftmaxCrossEntropy, true, 4);
        check_gradients(PruneAlgo::Acdc, LossKind::SoftmaxCrossEntropy, true, 5);
        check_gradients(
            PruneAlgo::PowerProp,
            LossKind::SoftmaxCrossEntropy,
            false,
            6,
        );
        check_gradients(PruneAlgo::PowerProp, LossKind::SoftmaxCrossEntropy, true, 7);
        check_gradients(PruneAlgo::SeqAttnPP, LossKind::SquaredError, false, 8);
        check_gradients(PruneAlgo::Magnitude, LossKind::SquaredError, true, 9);
    }

    #[test]
    fn zero_weights_give_zero_logit_gradients() {
        let s = spec(vec![4, 4, 2], LossKind::SoftmaxCrossEntropy);
        let mut net = Network::init(&s, PruneAlgo::SeqAttnPP, 11).unwrap();
        for l in &mut net.layers {
            l.weight.fill(0.0);
        }
        let x = batch(12, 6, 4);
        let labels = vec![0, 1, 0, 1, 0, 1];
        let cache = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &Targets::Labels(&labels)).unwrap();
        for dl in grads.logits.iter().flatten() {
            assert!(dl.iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn single_linear_layer_squared_loss_matches_closed_form() {
        // one layer, no ReLU on the head: dW = X' (XW_eff - Y) / B on active
        // blocks (mask multiplier applied)
        let s = spec(vec![4, 2], LossKind::SquaredError);
        let mut net = Network::init(&s, PruneAlgo::Magnitude, 13).unwrap();
        net.layers[0].active[0] = false;
        let x = batch(14, 9, 4);
        let y = batch(15, 9, 2);
        let cache = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &Targets::Values(&y)).unwrap();
        let resid = &cache.output - &y;
        let expect = x.t().dot(&resid) / 9.0;
        let layer = &net.layers[0];
        for r in 0..4 {
            for c in 0..2 {
                let g = layer.group_of_entry(r * 2 + c);
                let want = if layer.active[g] { expect[(r, c)] } else { 0.0 };
                assert!((grads.weights[0][(r, c)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn masked_blocks_cut_forward_dependence_and_gradient() {
        let s = spec(vec![4, 4], LossKind::SquaredError);
        let mut net = Network::init(&s, PruneAlgo::Acdc, 17).unwrap();
        net.layers[0].active = vec![false, true, false, false];
        let x = batch(18, 5, 4);
        let out1 = net.forward(&x).unwrap().output;
        // change weights inside masked blocks: output must not move
        let layer = &mut net.layers[0];
        for r in 0..4 {
            for c in 0..4 {
                let g = layer.group_of_entry(r * 4 + c);
                if !layer.active[g] {
                    layer.weight[(r, c)] += 100.0;
                }
            }
        }
        let out2 = net.forward(&x).unwrap().output;
        for (a, b) in out1.iter().zip(out2.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn attention_shift_invariance_of_forward() {
        let s = spec(vec![4, 6, 2], LossKind::SoftmaxCrossEntropy);
        let mut net = Network::init(&s, PruneAlgo::SeqAttnPP, 19).unwrap();
        let mut r = rng::seeded(20);
        for l in &mut net.layers {
            if let Some(lg) = &mut l.logits {
                for v in lg.iter_mut() {
                    *v = rng::normal(&mut r);
                }
            }
        }
        let x = batch(21, 5, 4);
        let out1 = net.forward(&x).unwrap().output;
        for l in &mut net.layers {
            if let Some(lg) = &mut l.logits {
                for v in lg.iter_mut() {
                    *v += 55.5;
                }
            }
        }
        let out2 = net.forward(&x).unwrap().output;
        for (a, b) in out1.iter().zip(out2.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_group_layer_is_mask_noop() {
        // block size covering the whole kernel: one group, any top-k keeps it
        let s = NetworkSpec {
            widths: vec![3, 3],
            block_size: 3,
            loss: LossKind::SquaredError,
            min_groups_to_prune: 1,
        };
        let net = Network::init(&s, PruneAlgo::Magnitude, 23).unwrap();
        assert_eq!(net.layers[0].num_groups(), 1);
    }
}
