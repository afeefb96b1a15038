//! Stacked LSTM with exact backpropagation through time.
//!
//! Standard gated recurrence per layer and step:
//!
//! ```text
//! a      = W_ih x + b_ih + W_hh h_prev + b_hh        (a packs [i f g o])
//! i,f,o  = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o)
//! g      = tanh(a_g)
//! c      = f * c_prev + i * g
//! h      = o * tanh(c)
//! ```
//!
//! Layer `l+1` consumes layer `l`'s hidden state. Initial `(h, c)` are zero.
//! The forward pass records per-step caches; `backward_seq` walks them in
//! reverse, accumulating parameter gradients and returning input gradients.

use super::ops::xavier;
use super::store::{ParamRef, ParamStore};
use super::tensor::Tensor;
use crate::rng::DetRng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug)]
pub struct LstmLayer {
    pub w_ih: ParamRef, // [4H, in]
    pub w_hh: ParamRef, // [4H, H]
    pub b_ih: ParamRef, // [4H]
    pub b_hh: ParamRef, // [4H]
    pub in_dim: usize,
    pub hidden: usize,
}

/// Running `(h, c)` per layer.
#[derive(Clone, Debug)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn top_h(&self) -> &[f64] {
        self.h.last().expect("empty LSTM state")
    }
}

/// Per-layer forward cache for one step.
#[derive(Clone, Debug)]
struct LayerCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward trace over a sequence, consumed by [`LstmStack::backward_seq`].
#[derive(Clone, Debug, Default)]
pub struct LstmTrace {
    steps: Vec<Vec<LayerCache>>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmStack {
    pub fn init(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden: usize,
        n_layers: usize,
        rng: &mut DetRng,
    ) -> Self {
        assert!(n_layers >= 1);
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let in_dim = if l == 0 { input_dim } else { hidden };
            let w_ih = store.add(&format!("{name}.l{l}.w_ih"), xavier(4 * hidden, in_dim, rng));
            let w_hh = store.add(&format!("{name}.l{l}.w_hh"), xavier(4 * hidden, hidden, rng));
            let b_ih = store.add(&format!("{name}.l{l}.b_ih"), Tensor::zeros(&[4 * hidden]));
            let b_hh = store.add(&format!("{name}.l{l}.b_hh"), Tensor::zeros(&[4 * hidden]));
            layers.push(LstmLayer { w_ih, w_hh, b_ih, b_hh, in_dim, hidden });
        }
        LstmStack { layers, input_dim, hidden }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState {
            h: self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
            c: self.layers.iter().map(|l| vec![0.0; l.hidden]).collect(),
        }
    }

    /// One step for all layers; updates `state` in place and returns the top
    /// hidden state. Pass a trace to record caches for BPTT.
    pub fn step(
        &self,
        store: &ParamStore,
        x: &[f64],
        state: &mut LstmState,
        mut trace: Option<&mut LstmTrace>,
    ) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "lstm: input dim mismatch");
        let mut input = x.to_vec();
        let mut step_caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let h = layer.hidden;
            let w_ih = store.value(layer.w_ih);
            let w_hh = store.value(layer.w_hh);
            let b_ih = store.value(layer.b_ih).data();
            let b_hh = store.value(layer.b_hh).data();
            let h_prev = std::mem::take(&mut state.h[l]);
            let c_prev = std::mem::take(&mut state.c[l]);

            let mut a = vec![0.0; 4 * h];
            for r in 0..4 * h {
                a[r] = b_ih[r]
                    + b_hh[r]
                    + super::ops::dot_fast(w_ih.row(r), &input)
                    + super::ops::dot_fast(w_hh.row(r), &h_prev);
            }
            let mut gi = vec![0.0; h];
            let mut gf = vec![0.0; h];
            let mut gg = vec![0.0; h];
            let mut go = vec![0.0; h];
            let mut c_new = vec![0.0; h];
            let mut tanh_c = vec![0.0; h];
            let mut h_new = vec![0.0; h];
            for k in 0..h {
                gi[k] = sigmoid(a[k]);
                gf[k] = sigmoid(a[h + k]);
                gg[k] = a[2 * h + k].tanh();
                go[k] = sigmoid(a[3 * h + k]);
                c_new[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
                tanh_c[k] = c_new[k].tanh();
                h_new[k] = go[k] * tanh_c[k];
            }
            if trace.is_some() {
                step_caches.push(LayerCache {
                    x: input.clone(),
                    h_prev: h_prev.clone(),
                    c_prev,
                    i: gi,
                    f: gf,
                    g: gg,
                    o: go,
                    tanh_c: tanh_c.clone(),
                });
            }
            state.h[l] = h_new.clone();
            state.c[l] = c_new;
            input = h_new;
            let _ = h_prev;
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.steps.push(step_caches);
        }
        input
    }

    /// Run a whole sequence from the zero state; returns per-step top hidden
    /// states and the trace.
    pub fn forward_seq(&self, store: &ParamStore, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, LstmTrace) {
        let mut state = self.zero_state();
        let mut trace = LstmTrace::default();
        let mut tops = Vec::with_capacity(xs.len());
        for x in xs {
            tops.push(self.step(store, x, &mut state, Some(&mut trace)));
        }
        (tops, trace)
    }

    /// Full BPTT. `d_top[t]` is dL/d(top hidden state at step t); parameter
    /// gradients accumulate into the store and dL/d(input at each step) is
    /// returned.
    pub fn backward_seq(&self, store: &mut ParamStore, trace: &LstmTrace, d_top: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n_steps = trace.steps.len();
        assert_eq!(d_top.len(), n_steps, "lstm backward: d_top length mismatch");
        let n_layers = self.layers.len();
        let mut dh_next: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        let mut dc_next: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        let mut d_inputs = vec![Vec::new(); n_steps];

        let (values, grads) = store.split_mut();
        for t in (0..n_steps).rev() {
            let mut dh_above = d_top[t].clone();
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let h = layer.hidden;
                let cache = &trace.steps[t][l];

                let mut dh = dh_above;
                for k in 0..h {
                    dh[k] += dh_next[l][k];
                }

                // back through h = o * tanh(c), c = f*c_prev + i*g
                let mut da = vec![0.0; 4 * h];
                let mut dc_prev = vec![0.0; h];
                for k in 0..h {
                    let tc = cache.tanh_c[k];
                    let do_ = dh[k] * tc;
                    let dc = dc_next[l][k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
                    let di = dc * cache.g[k];
                    let df = dc * cache.c_prev[k];
                    let dg = dc * cache.i[k];
                    dc_prev[k] = dc * cache.f[k];
                    da[k] = di * cache.i[k] * (1.0 - cache.i[k]);
                    da[h + k] = df * cache.f[k] * (1.0 - cache.f[k]);
                    da[2 * h + k] = dg * (1.0 - cache.g[k] * cache.g[k]);
                    da[3 * h + k] = do_ * cache.o[k] * (1.0 - cache.o[k]);
                }

                // bias gradients
                {
                    let db_ih = grads[layer.b_ih.0].data_mut();
                    for r in 0..4 * h {
                        db_ih[r] += da[r];
                    }
                }
                {
                    let db_hh = grads[layer.b_hh.0].data_mut();
                    for r in 0..4 * h {
                        db_hh[r] += da[r];
                    }
                }
                // weight gradients
                {
                    let dw_ih = &mut grads[layer.w_ih.0];
                    for r in 0..4 * h {
                        super::ops::axpy(dw_ih.row_mut(r), da[r], &cache.x);
                    }
                }
                {
                    let dw_hh = &mut grads[layer.w_hh.0];
                    for r in 0..4 * h {
                        super::ops::axpy(dw_hh.row_mut(r), da[r], &cache.h_prev);
                    }
                }
                // input and recurrent gradients
                let mut dx = vec![0.0; layer.in_dim];
                {
                    let w_ih = &values[layer.w_ih.0];
                    for r in 0..4 * h {
                        super::ops::axpy(&mut dx, da[r], w_ih.row(r));
                    }
                }
                let mut dh_prev = vec![0.0; h];
                {
                    let w_hh = &values[layer.w_hh.0];
                    for r in 0..4 * h {
                        super::ops::axpy(&mut dh_prev, da[r], w_hh.row(r));
                    }
                }
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                dh_above = dx;
            }
            d_inputs[t] = dh_above;
        }
        d_inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_hidden_states() {
        let mut store = ParamStore::new();
        let mut rng = DetRng::new(0);
        let stack = LstmStack::init(&mut store, "lstm", 3, 4, 2, &mut rng);
        for i in 0..store.len() {
            store.values[i].fill(0.0);
        }
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64; 3]).collect();
        let (tops, _) = stack.forward_seq(&store, &xs);
        for h in tops {
            assert!(h.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn seq_of_one_matches_single_step() {
        let mut store = ParamStore::new();
        let mut rng = DetRng::new(42);
        let stack = LstmStack::init(&mut store, "lstm", 3, 4, 2, &mut rng);
        let x = vec![0.3, -0.7, 1.1];
        let (tops, _) = stack.forward_seq(&store, &[x.clone()]);
        let mut state = stack.zero_state();
        let top = stack.step(&store, &x, &mut state, None);
        assert_eq!(tops[0], top);
        assert_eq!(state.top_h(), &top[..]);
    }

    #[test]
    fn step_is_deterministic() {
        let mut store = ParamStore::new();
        let mut rng = DetRng::new(7);
        let stack = LstmStack::init(&mut store, "lstm", 2, 3, 1, &mut rng);
        let x = vec![0.5, -0.25];
        let mut s1 = stack.zero_state();
        let mut s2 = stack.zero_state();
        let h1 = stack.step(&store, &x, &mut s1, None);
        let h2 = stack.step(&store, &x, &mut s2, None);
        assert_eq!(h1, h2);
    }
}
