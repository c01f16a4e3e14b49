//! Network layers with explicit forward caches and backward passes.

use rand_chacha::ChaCha8Rng;

use crate::act::{Act, PAD};
use crate::params::{init_fan_in, init_orthogonal, ParameterSet};
use crate::scalar::{gemm, sigmoid, Scalar, View};
use crate::{Error, Result};

/// Stride-1 frequency convolution with "same" zero padding and a kernel of
/// width 1 along time.
///
/// The transposed form stores its kernel as `[cin][cout][k]` and applies the
/// adjoint of the plain convolution with that kernel, which for stride 1 is
/// again a same-size frequency convolution with the taps reversed.
#[derive(Debug, Clone)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub transpose: bool,
    weight: usize,
    bias: Option<usize>,
}

impl Conv {
    pub fn new<T: Scalar>(
        params: &mut ParameterSet<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        transpose: bool,
        bias: bool,
    ) -> Result<Self> {
        if kernel % 2 == 0 || kernel > 2 * PAD + 1 {
            return Err(Error::InvalidConfig(format!(
                "kernel width {kernel} must be odd and at most {}",
                2 * PAD + 1
            )));
        }
        let shape = if transpose { [cin, cout, kernel] } else { [cout, cin, kernel] };
        let weight = params.add(format!("{name}.weight"), &shape);
        let bias = bias.then(|| params.add(format!("{name}.bias"), &[cout]));
        Ok(Self {
            cin,
            cout,
            kernel,
            transpose,
            weight,
            bias,
        })
    }

    pub fn param_count(&self) -> usize {
        self.cin * self.cout * self.kernel + if self.bias.is_some() { self.cout } else { 0 }
    }

    pub fn init<T: Scalar>(&self, params: &mut ParameterSet<T>, rng: &mut ChaCha8Rng) {
        init_fan_in(params.get_mut(self.weight), self.cin * self.kernel, rng);
    }

    /// Kernel tap `k` as a `cout × cin` matrix view.
    fn tap(&self, k: usize) -> View {
        let kk = self.kernel;
        if self.transpose {
            View::new(k, kk, self.cout * kk)
        } else {
            View::new(k, self.cin * kk, kk)
        }
    }

    /// Input offset (in bins) read by tap `k`.
    fn shift(&self, k: usize) -> isize {
        let half = (self.kernel / 2) as isize;
        if self.transpose {
            half - k as isize
        } else {
            k as isize - half
        }
    }

    fn check(&self, x: &Act<impl Scalar>) -> Result<()> {
        if x.channels != self.cin {
            return Err(Error::Shape(format!(
                "convolution expects {} input channels, got {}",
                self.cin, x.channels
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, params: &ParameterSet<T>, x: &Act<T>) -> Result<Act<T>> {
        self.check(x)?;
        let mut out = Act::zeros(self.cout, x.batch, x.frames, x.bins);
        let plane = x.plane();
        if plane == 0 {
            return Ok(out);
        }
        let n = plane - 2 * PAD;
        let w = params.get(self.weight);
        for k in 0..self.kernel {
            let src = (PAD as isize + self.shift(k)) as usize;
            let beta = if k == 0 { T::zero() } else { T::one() };
            gemm(
                self.cout,
                self.cin,
                n,
                w,
                self.tap(k),
                &x.data,
                View::new(src, plane, 1),
                beta,
                &mut out.data,
                View::new(PAD, plane, 1),
            );
        }
        if let Some(b) = self.bias {
            let bias = params.get(b);
            for c in 0..self.cout {
                out.channel_rows_mut(c).for_each(|r| r.iter_mut().for_each(|v| *v = *v + bias[c]));
            }
        }
        out.zero_pads();
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        grads: &mut ParameterSet<T>,
        x: &Act<T>,
        dout: &mut Act<T>,
    ) -> Act<T> {
        dout.zero_pads();
        let mut dx = Act::zeros(self.cin, x.batch, x.frames, x.bins);
        let plane = x.plane();
        if plane == 0 {
            return dx;
        }
        let n = plane - 2 * PAD;
        let w = params.get(self.weight);
        for k in 0..self.kernel {
            let src = (PAD as isize + self.shift(k)) as usize;
            gemm(
                self.cin,
                self.cout,
                n,
                w,
                self.tap(k).t(),
                &dout.data,
                View::new(PAD, plane, 1),
                T::one(),
                &mut dx.data,
                View::new(src, plane, 1),
            );
            gemm(
                self.cout,
                n,
                self.cin,
                &dout.data,
                View::new(PAD, plane, 1),
                &x.data,
                View::new(src, 1, plane),
                T::one(),
                grads.get_mut(self.weight),
                self.tap(k),
            );
        }
        if let Some(b) = self.bias {
            let g = grads.get_mut(b);
            for (c, gc) in g.iter_mut().enumerate() {
                *gc = *gc + dout.channel_rows(c).flat_map(|r| r.iter().copied()).sum::<T>();
            }
        }
        dx.zero_pads();
        dx
    }
}

pub const BN_EPS: f64 = 1e-5;

/// Per-channel batch normalization over all valid (row, bin) positions.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    gamma: usize,
    beta: usize,
    running_mean: usize,
    running_var: usize,
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    xhat: Act<T>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new<T: Scalar>(
        params: &mut ParameterSet<T>,
        buffers: &mut ParameterSet<T>,
        name: &str,
        channels: usize,
    ) -> Self {
        let gamma = params.add(format!("{name}.gamma"), &[channels]);
        let beta = params.add(format!("{name}.beta"), &[channels]);
        let running_mean = buffers.add(format!("{name}.running_mean"), &[channels]);
        let running_var = buffers.add(format!("{name}.running_var"), &[channels]);
        Self {
            channels,
            gamma,
            beta,
            running_mean,
            running_var,
        }
    }

    pub fn init<T: Scalar>(&self, params: &mut ParameterSet<T>, buffers: &mut ParameterSet<T>) {
        params.get_mut(self.gamma).fill(T::one());
        buffers.get_mut(self.running_var).fill(T::one());
    }

    pub fn forward_train<T: Scalar>(&self, params: &ParameterSet<T>, x: &Act<T>) -> (Act<T>, BnCache<T>) {
        let count = (x.rows() * x.bins) as f64;
        let mut xhat = x.clone();
        let mut inv_std = Vec::with_capacity(self.channels);
        let mut batch_mean = Vec::with_capacity(self.channels);
        let mut batch_var = Vec::with_capacity(self.channels);
        for c in 0..self.channels {
            let mean = x.channel_rows(c).flat_map(|r| r.iter()).map(|v| v.as_f64()).sum::<f64>() / count;
            let var = x
                .channel_rows(c)
                .flat_map(|r| r.iter())
                .map(|v| (v.as_f64() - mean).powi(2))
                .sum::<f64>()
                / count;
            let is = 1.0 / (var + BN_EPS).sqrt();
            let (m, s) = (T::from_f64(mean), T::from_f64(is));
            xhat.channel_rows_mut(c).for_each(|r| r.iter_mut().for_each(|v| *v = (*v - m) * s));
            inv_std.push(is);
            batch_mean.push(mean);
            // running variance tracks the unbiased estimate
            batch_var.push(if count > 1.0 { var * count / (count - 1.0) } else { var });
        }
        let y = self.affine(params, &xhat);
        (
            y,
            BnCache {
                xhat,
                inv_std,
                batch_mean,
                batch_var,
            },
        )
    }

    pub fn forward_eval<T: Scalar>(&self, params: &ParameterSet<T>, buffers: &ParameterSet<T>, x: &Act<T>) -> Act<T> {
        let mut xhat = x.clone();
        let (rm, rv) = (buffers.get(self.running_mean), buffers.get(self.running_var));
        for c in 0..self.channels {
            let s = T::from_f64(1.0 / (rv[c].as_f64() + BN_EPS).sqrt());
            let m = rm[c];
            xhat.channel_rows_mut(c).for_each(|r| r.iter_mut().for_each(|v| *v = (*v - m) * s));
        }
        self.affine(params, &xhat)
    }

    fn affine<T: Scalar>(&self, params: &ParameterSet<T>, xhat: &Act<T>) -> Act<T> {
        let (g, b) = (params.get(self.gamma), params.get(self.beta));
        let mut y = xhat.clone();
        for c in 0..self.channels {
            y.channel_rows_mut(c).for_each(|r| r.iter_mut().for_each(|v| *v = *v * g[c] + b[c]));
        }
        y
    }

    /// Pre-activation values `γ x̂ + β` recomputed from the cache.
    pub fn output<T: Scalar>(&self, params: &ParameterSet<T>, cache: &BnCache<T>) -> Act<T> {
        self.affine(params, &cache.xhat)
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        grads: &mut ParameterSet<T>,
        cache: &BnCache<T>,
        dy: &Act<T>,
    ) -> Act<T> {
        let count = (dy.rows() * dy.bins) as f64;
        let gamma = params.get(self.gamma).to_vec();
        let mut dx = Act::zeros(self.channels, dy.batch, dy.frames, dy.bins);
        for c in 0..self.channels {
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for (dr, xr) in dy.channel_rows(c).zip(cache.xhat.channel_rows(c)) {
                for (d, x) in dr.iter().zip(xr) {
                    sum_dy += d.as_f64();
                    sum_dy_xhat += d.as_f64() * x.as_f64();
                }
            }
            let gb = grads.get_mut(self.beta);
            gb[c] = gb[c] + T::from_f64(sum_dy);
            let gg = grads.get_mut(self.gamma);
            gg[c] = gg[c] + T::from_f64(sum_dy_xhat);
            // dx = γ/σ · (dy - mean(dy) - x̂ · mean(dy·x̂))
            let scale = T::from_f64(gamma[c].as_f64() * cache.inv_std[c]);
            let m1 = T::from_f64(sum_dy / count);
            let m2 = T::from_f64(sum_dy_xhat / count);
            let rows: Vec<(Vec<T>, Vec<T>)> = dy
                .channel_rows(c)
                .zip(cache.xhat.channel_rows(c))
                .map(|(d, x)| (d.to_vec(), x.to_vec()))
                .collect();
            for (out, (d, x)) in dx.channel_rows_mut(c).zip(rows) {
                for ((o, dv), xv) in out.iter_mut().zip(d).zip(x) {
                    *o = scale * (dv - m1 - xv * m2);
                }
            }
        }
        dx
    }

    /// `running ← momentum · running + (1 − momentum) · batch`.
    pub fn update_running<T: Scalar>(&self, buffers: &mut ParameterSet<T>, cache: &BnCache<T>, momentum: f64) {
        for (slot, stats) in [(self.running_mean, &cache.batch_mean), (self.running_var, &cache.batch_var)] {
            for (r, &s) in buffers.get_mut(slot).iter_mut().zip(stats.iter()) {
                *r = T::from_f64(momentum * r.as_f64() + (1.0 - momentum) * s);
            }
        }
    }
}

fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp() - T::one()
    }
}

/// `ELU(BN(conv_a(x) ⊙ σ(conv_g(x))))` with plain or transposed convolutions.
#[derive(Debug, Clone)]
pub struct GluBlock {
    pub conv_a: Conv,
    pub conv_g: Conv,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone)]
pub struct GluCache<T> {
    x: Act<T>,
    a: Act<T>,
    s: Act<T>,
    bn: Option<BnCache<T>>,
}

impl<T> GluCache<T> {
    pub fn bn(&self) -> Option<&BnCache<T>> {
        self.bn.as_ref()
    }
}

impl GluBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        params: &mut ParameterSet<T>,
        buffers: &mut ParameterSet<T>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        transpose: bool,
    ) -> Result<Self> {
        Ok(Self {
            conv_a: Conv::new(params, &format!("{name}.conv_a"), cin, cout, kernel, transpose, true)?,
            conv_g: Conv::new(params, &format!("{name}.conv_g"), cin, cout, kernel, transpose, true)?,
            bn: BatchNorm::new(params, buffers, &format!("{name}.bn"), cout),
        })
    }

    pub fn init<T: Scalar>(&self, params: &mut ParameterSet<T>, buffers: &mut ParameterSet<T>, rng: &mut ChaCha8Rng) {
        self.conv_a.init(params, rng);
        self.conv_g.init(params, rng);
        self.bn.init(params, buffers);
    }

    pub fn cout(&self) -> usize {
        self.conv_a.cout
    }

    /// Runs the block; with `train` the batch statistics are used and kept
    /// in the cache, otherwise the running statistics.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        buffers: &ParameterSet<T>,
        x: &Act<T>,
        train: bool,
    ) -> Result<(Act<T>, GluCache<T>)> {
        let a = self.conv_a.forward(params, x)?;
        let mut s = self.conv_g.forward(params, x)?;
        s.data.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut p = a.clone();
        p.data.iter_mut().zip(&s.data).for_each(|(pv, &sv)| *pv = *pv * sv);
        let (mut y, bn) = if train {
            let (y, c) = self.bn.forward_train(params, &p);
            (y, Some(c))
        } else {
            (self.bn.forward_eval(params, buffers, &p), None)
        };
        y.valid_rows_mut().for_each(|r| r.iter_mut().for_each(|v| *v = elu(*v)));
        y.zero_pads();
        Ok((
            y,
            GluCache {
                x: x.clone(),
                a,
                s,
                bn,
            },
        ))
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        grads: &mut ParameterSet<T>,
        cache: &GluCache<T>,
        dy: &Act<T>,
    ) -> Result<Act<T>> {
        let bn = cache
            .bn
            .as_ref()
            .ok_or_else(|| Error::Shape("backward needs a training-mode forward cache".into()))?;
        // ELU'(b) = 1 for b > 0, exp(b) otherwise
        let pre = self.bn.output(params, bn);
        let mut db = dy.clone();
        db.data.iter_mut().zip(&pre.data).for_each(|(d, &b)| {
            if b <= T::zero() {
                *d = *d * b.exp();
            }
        });
        db.zero_pads();
        let dp = self.bn.backward(params, grads, bn, &db);
        let mut da = dp.clone();
        da.data.iter_mut().zip(&cache.s.data).for_each(|(d, &s)| *d = *d * s);
        let mut dg = dp;
        dg.data
            .iter_mut()
            .zip(cache.a.data.iter().zip(&cache.s.data))
            .for_each(|(d, (&a, &s))| *d = *d * a * s * (T::one() - s));
        let mut dx = self.conv_a.backward(params, grads, &cache.x, &mut da);
        dx.add_assign(&self.conv_g.backward(params, grads, &cache.x, &mut dg));
        Ok(dx)
    }
}

/// One direction of the channel-wise LSTM: a recurrence over frames, run
/// independently for every (utterance, bin) with weights shared across bins.
/// Gate order is input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmDir {
    pub input: usize,
    pub hidden: usize,
    pub reverse: bool,
    wx: usize,
    wh: usize,
    bias: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    /// `[step][4H][N]` post-nonlinearity gate values.
    gates: Vec<T>,
    /// `[step][H][N]` cell states.
    cells: Vec<T>,
    /// `[step][H][N]` hidden states.
    hidden: Vec<T>,
}

impl LstmDir {
    pub fn new<T: Scalar>(params: &mut ParameterSet<T>, name: &str, input: usize, hidden: usize, reverse: bool) -> Self {
        Self {
            input,
            hidden,
            reverse,
            wx: params.add(format!("{name}.w_ih"), &[4 * hidden, input]),
            wh: params.add(format!("{name}.w_hh"), &[4 * hidden, hidden]),
            bias: params.add(format!("{name}.bias"), &[4 * hidden]),
        }
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    pub fn init<T: Scalar>(&self, params: &mut ParameterSet<T>, rng: &mut ChaCha8Rng) {
        init_fan_in(params.get_mut(self.wx), self.input, rng);
        let h = self.hidden;
        let wh = params.get_mut(self.wh);
        for gate in 0..4 {
            init_orthogonal(&mut wh[gate * h * h..(gate + 1) * h * h], h, h, rng);
        }
    }

    fn frame_at(&self, step: usize, frames: usize) -> usize {
        if self.reverse {
            frames - 1 - step
        } else {
            step
        }
    }

    pub fn forward<T: Scalar>(&self, params: &ParameterSet<T>, x: &Act<T>) -> Result<(Act<T>, LstmCache<T>)> {
        if x.channels != self.input {
            return Err(Error::Shape(format!(
                "LSTM expects {} input channels, got {}",
                self.input, x.channels
            )));
        }
        let (h, frames, bins) = (self.hidden, x.frames, x.bins);
        let n = x.batch * bins;
        let plane = x.plane();
        let g4 = 4 * h;
        // input projection for every position at once
        let mut zx = vec![T::zero(); g4 * plane];
        gemm(
            g4,
            self.input,
            plane,
            params.get(self.wx),
            View::new(0, self.input, 1),
            &x.data,
            View::new(0, plane, 1),
            T::zero(),
            &mut zx,
            View::new(0, plane, 1),
        );
        let bias = params.get(self.bias);
        let wh = params.get(self.wh);
        let mut gates = vec![T::zero(); frames * g4 * n];
        let mut cells = vec![T::zero(); frames * h * n];
        let mut hidden = vec![T::zero(); frames * h * n];
        let mut out = Act::zeros(h, x.batch, frames, bins);
        let rl = x.row_len();
        for step in 0..frames {
            let t = self.frame_at(step, frames);
            let z = &mut gates[step * g4 * n..(step + 1) * g4 * n];
            for (g, zrow) in z.chunks_exact_mut(n).enumerate() {
                for b in 0..x.batch {
                    let src = g * plane + (b * frames + t) * rl + PAD;
                    for f in 0..bins {
                        zrow[b * bins + f] = zx[src + f] + bias[g];
                    }
                }
            }
            if step > 0 {
                let (prev, _) = hidden.split_at(step * h * n);
                let hp = &prev[(step - 1) * h * n..];
                gemm(g4, h, n, wh, View::new(0, h, 1), hp, View::new(0, n, 1), T::one(), z, View::new(0, n, 1));
            }
            let (zi, rest) = z.split_at_mut(h * n);
            let (zf, rest) = rest.split_at_mut(h * n);
            let (zg, zo) = rest.split_at_mut(h * n);
            let (cprev, cnow) = cells.split_at_mut(step * h * n);
            let cnow = &mut cnow[..h * n];
            let hnow = &mut hidden[step * h * n..(step + 1) * h * n];
            for j in 0..h * n {
                let i = sigmoid(zi[j]);
                let fg = sigmoid(zf[j]);
                let g = zg[j].tanh();
                let o = sigmoid(zo[j]);
                let cp = if step > 0 { cprev[(step - 1) * h * n + j] } else { T::zero() };
                let c = fg * cp + i * g;
                zi[j] = i;
                zf[j] = fg;
                zg[j] = g;
                zo[j] = o;
                cnow[j] = c;
                hnow[j] = o * c.tanh();
            }
            for (k, hrow) in hnow.chunks_exact(n).enumerate() {
                for b in 0..x.batch {
                    let dst = out.index(k, b * frames + t, 0);
                    out.data[dst..dst + bins].copy_from_slice(&hrow[b * bins..(b + 1) * bins]);
                }
            }
        }
        Ok((out, LstmCache { gates, cells, hidden }))
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        grads: &mut ParameterSet<T>,
        x: &Act<T>,
        cache: &LstmCache<T>,
        dout: &Act<T>,
    ) -> Act<T> {
        let (h, frames, bins) = (self.hidden, x.frames, x.bins);
        let n = x.batch * bins;
        let plane = x.plane();
        let g4 = 4 * h;
        let rl = x.row_len();
        let wh = params.get(self.wh).to_vec();
        let mut dz_all = vec![T::zero(); g4 * plane];
        let mut dh_next = vec![T::zero(); h * n];
        let mut dc_next = vec![T::zero(); h * n];
        let mut dz = vec![T::zero(); g4 * n];
        let mut dwh = vec![T::zero(); g4 * h];
        let mut dbias = vec![T::zero(); g4];
        for step in (0..frames).rev() {
            let t = self.frame_at(step, frames);
            let gates = &cache.gates[step * g4 * n..(step + 1) * g4 * n];
            let c = &cache.cells[step * h * n..(step + 1) * h * n];
            for k in 0..h {
                for b in 0..x.batch {
                    let src = dout.index(k, b * frames + t, 0);
                    for f in 0..bins {
                        let j = k * n + b * bins + f;
                        let dh = dout.data[src + f] + dh_next[j];
                        let (i, fg, g, o) = (gates[j], gates[h * n + j], gates[2 * h * n + j], gates[3 * h * n + j]);
                        let tc = c[j].tanh();
                        let cp = if step > 0 { cache.cells[(step - 1) * h * n + j] } else { T::zero() };
                        let dc = dh * o * (T::one() - tc * tc) + dc_next[j];
                        dz[j] = dc * g * i * (T::one() - i);
                        dz[h * n + j] = dc * cp * fg * (T::one() - fg);
                        dz[2 * h * n + j] = dc * i * (T::one() - g * g);
                        dz[3 * h * n + j] = dh * tc * o * (T::one() - o);
                        dc_next[j] = dc * fg;
                    }
                }
            }
            for (gi, zrow) in dz.chunks_exact(n).enumerate() {
                dbias[gi] = dbias[gi] + zrow.iter().copied().sum::<T>();
                for b in 0..x.batch {
                    let dst = gi * plane + (b * frames + t) * rl + PAD;
                    dz_all[dst..dst + bins].copy_from_slice(&zrow[b * bins..(b + 1) * bins]);
                }
            }
            if step > 0 {
                let hp = &cache.hidden[(step - 1) * h * n..step * h * n];
                gemm(g4, n, h, &dz, View::new(0, n, 1), hp, View::new(0, 1, n), T::one(), &mut dwh, View::new(0, h, 1));
                gemm(h, g4, n, &wh, View::new(0, h, 1).t(), &dz, View::new(0, n, 1), T::zero(), &mut dh_next, View::new(0, n, 1));
            }
        }
        accumulate(grads.get_mut(self.wh), &dwh);
        accumulate(grads.get_mut(self.bias), &dbias);
        gemm(
            g4,
            plane,
            self.input,
            &dz_all,
            View::new(0, plane, 1),
            &x.data,
            View::new(0, 1, plane),
            T::one(),
            grads.get_mut(self.wx),
            View::new(0, self.input, 1),
        );
        let mut dx = Act::zeros(self.input, x.batch, frames, bins);
        gemm(
            self.input,
            g4,
            plane,
            params.get(self.wx),
            View::new(0, self.input, 1).t(),
            &dz_all,
            View::new(0, plane, 1),
            T::zero(),
            &mut dx.data,
            View::new(0, plane, 1),
        );
        dx.zero_pads();
        dx
    }
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
}

/// Channel-wise LSTM, optionally bidirectional (outputs concatenated).
#[derive(Debug, Clone)]
pub struct ChannelLstm {
    pub forward_dir: LstmDir,
    pub backward_dir: Option<LstmDir>,
}

#[derive(Debug, Clone)]
pub struct ChannelLstmCache<T> {
    x: Act<T>,
    fwd: LstmCache<T>,
    bwd: Option<LstmCache<T>>,
}

impl ChannelLstm {
    pub fn new<T: Scalar>(params: &mut ParameterSet<T>, name: &str, input: usize, hidden: usize, bidirectional: bool) -> Self {
        Self {
            forward_dir: LstmDir::new(params, &format!("{name}.fwd"), input, hidden, false),
            backward_dir: bidirectional.then(|| LstmDir::new(params, &format!("{name}.bwd"), input, hidden, true)),
        }
    }

    pub fn output_channels(&self) -> usize {
        self.forward_dir.hidden * if self.backward_dir.is_some() { 2 } else { 1 }
    }

    pub fn init<T: Scalar>(&self, params: &mut ParameterSet<T>, rng: &mut ChaCha8Rng) {
        self.forward_dir.init(params, rng);
        if let Some(b) = &self.backward_dir {
            b.init(params, rng);
        }
    }

    pub fn forward<T: Scalar>(&self, params: &ParameterSet<T>, x: &Act<T>) -> Result<(Act<T>, ChannelLstmCache<T>)> {
        let (hf, fwd) = self.forward_dir.forward(params, x)?;
        let (out, bwd) = match &self.backward_dir {
            Some(dir) => {
                let (hb, cb) = dir.forward(params, x)?;
                (Act::concat(&[&hf, &hb])?, Some(cb))
            }
            None => (hf, None),
        };
        Ok((out, ChannelLstmCache { x: x.clone(), fwd, bwd }))
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParameterSet<T>,
        grads: &mut ParameterSet<T>,
        cache: &ChannelLstmCache<T>,
        dout: &Act<T>,
    ) -> Act<T> {
        let h = self.forward_dir.hidden;
        match (&self.backward_dir, &cache.bwd) {
            (Some(dir), Some(cb)) => {
                let parts = dout.split(&[h, h]);
                let mut dx = self.forward_dir.backward(params, grads, &cache.x, &cache.fwd, &parts[0]);
                dx.add_assign(&dir.backward(params, grads, &cache.x, cb, &parts[1]));
                dx
            }
            _ => self.forward_dir.backward(params, grads, &cache.x, &cache.fwd, dout),
        }
    }
}
