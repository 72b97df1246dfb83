//! Fourier-neural-operator smoother with hand-written forward and
//! reverse-mode passes.
//!
//! A network is: pointwise affine lift 1 -> c channels, then `layers`
//! Fourier layers sigma(IDFT(R . DFT(Z)) + W*Z + B), then pointwise linear
//! projection c -> 1. The spectral weight R mixes channels on the first
//! `modes` frequency bins per axis and zeroes the rest; the real part is
//! taken after the inverse transform. W is a channelwise circular
//! convolution.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fft::{dft1, dft2, idft1, idft2, CField};
use crate::field::{Field, Shape};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    /// Smooth Gaussian-error nonlinearity (tanh form); value 0 at 0.
    Gelu,
    /// Test hook: layers become linear maps.
    Identity,
}

impl Activation {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let u = (2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3));
                0.5 * x * (1.0 + u.tanh())
            }
            Activation::Identity => x,
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                let u = c * (x + 0.044715 * x.powi(3));
                let t = u.tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnoConfig {
    pub channels: usize,
    pub layers: usize,
    /// Retained low-frequency bins per axis.
    pub modes: usize,
    /// Circular conv kernel width; must be odd.
    pub kernel_size: usize,
    pub activation: Activation,
    /// Level grid the smoother operates on; rank follows from this.
    pub shape: Shape,
}

impl FnoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.layers == 0 || self.modes == 0 || self.kernel_size == 0 {
            return Err(Error::InvalidArgument(
                "channels, layers, modes, kernel_size must be positive".into(),
            ));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::InvalidArgument("kernel size must be odd".into()));
        }
        let min_dim = match self.shape {
            Shape::D1(n) => n,
            Shape::D2(n, m) => n.min(m),
        };
        if self.modes > min_dim / 2 {
            return Err(Error::InvalidArgument(format!(
                "modes {} exceeds half the smallest grid dimension {}",
                self.modes, min_dim
            )));
        }
        if self.kernel_size > min_dim {
            return Err(Error::InvalidArgument("kernel wider than grid".into()));
        }
        Ok(())
    }

    /// Small configuration sized for laptop-scale runs.
    pub fn desk_scale(shape: Shape) -> FnoConfig {
        let min_dim = match shape {
            Shape::D1(n) => n,
            Shape::D2(n, m) => n.min(m),
        };
        FnoConfig {
            channels: 16,
            layers: 3,
            modes: (min_dim / 4).max(1),
            kernel_size: 3,
            activation: Activation::Gelu,
            shape,
        }
    }

    /// Published configuration for a grid of the given size (1D rows:
    /// c=64 throughout; depth/modes/kernel grow with resolution).
    pub fn full_scale(shape: Shape) -> FnoConfig {
        let min_dim = match shape {
            Shape::D1(n) => n,
            Shape::D2(n, m) => n.min(m),
        };
        let two_d = matches!(shape, Shape::D2(..));
        let (layers, modes, kernel) = match (two_d, min_dim) {
            (false, 0..=64) => (4, 16, 5),
            (false, 128) => (4, 32, 5),
            (false, 256) => (5, 64, 7),
            (false, _) => (6, 128.min(min_dim / 2), 7),
            (true, 0..=64) => (4, 16, 3),
            (true, 128) => (4, 32, 3),
            (true, 256) => (5, 32, 5),
            (true, _) => (6, 64, 7),
        };
        FnoConfig {
            channels: 64,
            layers,
            modes: modes.min(min_dim / 2).max(1),
            kernel_size: kernel,
            activation: Activation::Gelu,
            shape,
        }
    }

    fn rank(&self) -> usize {
        match self.shape {
            Shape::D1(_) => 1,
            Shape::D2(..) => 2,
        }
    }

    /// Flat count of retained spectral bins (k in 1D, k*k in 2D).
    pub fn modes_total(&self) -> usize {
        match self.rank() {
            1 => self.modes,
            _ => self.modes * self.modes,
        }
    }

    pub fn kernel_total(&self) -> usize {
        match self.rank() {
            1 => self.kernel_size,
            _ => self.kernel_size * self.kernel_size,
        }
    }

    /// Natural-order flat spectrum indices of the retained modes, in a
    /// fixed order matching the R tensor layout.
    fn retained_bins(&self) -> Vec<usize> {
        match self.shape {
            Shape::D1(_) => (0..self.modes).collect(),
            Shape::D2(n, _) => {
                let mut out = Vec::with_capacity(self.modes * self.modes);
                for mj in 0..self.modes {
                    for mi in 0..self.modes {
                        out.push(mj * n + mi);
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerParams {
    /// Channel-mixing spectral weights, c*c*modes_total, complex.
    pub r: Vec<Complex64>,
    /// Conv kernel, c*c*kernel_total.
    pub w: Vec<f64>,
    /// Per-channel bias.
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FnoParams {
    pub lift_w: Vec<f64>,
    pub lift_b: Vec<f64>,
    pub layers: Vec<LayerParams>,
    pub proj_w: Vec<f64>,
    pub proj_b: f64,
}

impl FnoParams {
    pub fn zeros(config: &FnoConfig) -> FnoParams {
        let c = config.channels;
        FnoParams {
            lift_w: vec![0.0; c],
            lift_b: vec![0.0; c],
            layers: (0..config.layers)
                .map(|_| LayerParams {
                    r: vec![Complex64::new(0.0, 0.0); c * c * config.modes_total()],
                    w: vec![0.0; c * c * config.kernel_total()],
                    bias: vec![0.0; c],
                })
                .collect(),
            proj_w: vec![0.0; c],
            proj_b: 0.0,
        }
    }

    /// Seeded initialization: uniform fan-in scaling for the real weights,
    /// complex spectral entries with magnitude around 1/(c*k). Biases zero.
    pub fn init(config: &FnoConfig, seed: u64) -> FnoParams {
        let c = config.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = FnoParams::zeros(config);
        for v in &mut p.lift_w {
            *v = rng.gen_range(-1.0..1.0);
        }
        let w_scale = (1.0 / (c * config.kernel_total()) as f64).sqrt();
        let r_scale = 1.0 / (c * config.modes_total()) as f64;
        for layer in &mut p.layers {
            for v in &mut layer.w {
                *v = rng.gen_range(-w_scale..w_scale);
            }
            for v in &mut layer.r {
                *v = Complex64::new(
                    rng.gen_range(-r_scale..r_scale),
                    rng.gen_range(-r_scale..r_scale),
                );
            }
        }
        let p_scale = (1.0 / c as f64).sqrt();
        for v in &mut p.proj_w {
            *v = rng.gen_range(-p_scale..p_scale);
        }
        p
    }

    /// Number of real scalars when flattened (complex counts as two).
    pub fn flat_len(&self) -> usize {
        let per_layer: usize = self
            .layers
            .iter()
            .map(|l| 2 * l.r.len() + l.w.len() + l.bias.len())
            .sum();
        self.lift_w.len() + self.lift_b.len() + per_layer + self.proj_w.len() + 1
    }

    /// Flatten to real scalars in a fixed order; inverse of
    /// [`Self::assign_from_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend_from_slice(&self.lift_w);
        out.extend_from_slice(&self.lift_b);
        for l in &self.layers {
            for z in &l.r {
                out.push(z.re);
                out.push(z.im);
            }
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.bias);
        }
        out.extend_from_slice(&self.proj_w);
        out.push(self.proj_b);
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::DimensionMismatch {
                expected: self.flat_len(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for v in &mut self.lift_w {
            *v = it.next().unwrap();
        }
        for v in &mut self.lift_b {
            *v = it.next().unwrap();
        }
        for l in &mut self.layers {
            for z in &mut l.r {
                let re = it.next().unwrap();
                let im = it.next().unwrap();
                *z = Complex64::new(re, im);
            }
            for v in &mut l.w {
                *v = it.next().unwrap();
            }
            for v in &mut l.bias {
                *v = it.next().unwrap();
            }
        }
        for v in &mut self.proj_w {
            *v = it.next().unwrap();
        }
        self.proj_b = it.next().unwrap();
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    /// self += s * other, matching tensor layouts.
    pub fn axpy(&mut self, s: f64, other: &FnoParams) {
        let mut flat = self.flatten();
        let of = other.flatten();
        for (a, b) in flat.iter_mut().zip(&of) {
            *a += s * b;
        }
        self.assign_from_flat(&flat).expect("same layout");
    }
}

/// Everything backward needs: the layer inputs, their spectra, and the
/// pre-activations. Shapes are rechecked against the config at backward
/// time so a cache from a different network is rejected.
pub struct FnoCache {
    input: Field,
    /// z entering each layer; index 0 is the lifted input, index `layers`
    /// is the final activated output (pre-projection).
    layer_inputs: Vec<Vec<f64>>,
    /// DFT per channel of each layer input.
    layer_spectra: Vec<Vec<Complex64>>,
    /// Pre-activation of each layer.
    preacts: Vec<Vec<f64>>,
    channels: usize,
}

fn dft_channels(z: &[f64], c: usize, shape: Shape) -> Result<Vec<Complex64>> {
    let len = shape.len();
    let mut out = Vec::with_capacity(c * len);
    for ch in 0..c {
        let slice = &z[ch * len..(ch + 1) * len];
        let spec = match shape {
            Shape::D1(_) => dft1(&CField::from_real(slice))?,
            Shape::D2(..) => dft2(&CField::from_real_shaped(slice, shape)?)?,
        };
        out.extend_from_slice(&spec.data);
    }
    Ok(out)
}

fn idft_real(spec: Vec<Complex64>, shape: Shape) -> Result<Vec<f64>> {
    let c = CField::new(spec, shape)?;
    let back = match shape {
        Shape::D1(_) => idft1(&c)?,
        Shape::D2(..) => idft2(&c)?,
    };
    Ok(back.re())
}

/// Circular convolution of c-channel data by the layer kernel.
/// out[o, x] = sum_i sum_t w[o,i,t] z[i, x + t - center] (periodic).
fn conv_forward(w: &[f64], z: &[f64], config: &FnoConfig) -> Vec<f64> {
    let c = config.channels;
    let len = config.shape.len();
    let ks = config.kernel_size;
    let ctr = ks / 2;
    let kt = config.kernel_total();
    let mut out = vec![0.0; c * len];
    match config.shape {
        Shape::D1(n) => {
            for o in 0..c {
                for i in 0..c {
                    let wk = &w[(o * c + i) * kt..(o * c + i + 1) * kt];
                    let zi = &z[i * len..(i + 1) * len];
                    let oo = &mut out[o * len..(o + 1) * len];
                    for (t, &wv) in wk.iter().enumerate() {
                        if wv == 0.0 {
                            continue;
                        }
                        for x in 0..n {
                            oo[x] += wv * zi[(x + n + t - ctr) % n];
                        }
                    }
                }
            }
        }
        Shape::D2(n, m) => {
            for o in 0..c {
                for i in 0..c {
                    let wk = &w[(o * c + i) * kt..(o * c + i + 1) * kt];
                    let zi = &z[i * len..(i + 1) * len];
                    let oo = &mut out[o * len..(o + 1) * len];
                    for s in 0..ks {
                        for t in 0..ks {
                            let wv = wk[s * ks + t];
                            if wv == 0.0 {
                                continue;
                            }
                            for y in 0..m {
                                let ys = (y + m + t - ctr) % m;
                                for x in 0..n {
                                    let xs = (x + n + s - ctr) % n;
                                    oo[y * n + x] += wv * zi[ys * n + xs];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint pair of [`conv_forward`]: gradients into the kernel and into z.
fn conv_backward(
    w: &[f64],
    z: &[f64],
    g: &[f64],
    config: &FnoConfig,
) -> (Vec<f64>, Vec<f64>) {
    let c = config.channels;
    let len = config.shape.len();
    let ks = config.kernel_size;
    let ctr = ks / 2;
    let kt = config.kernel_total();
    let mut gw = vec![0.0; c * c * kt];
    let mut gz = vec![0.0; c * len];
    match config.shape {
        Shape::D1(n) => {
            for o in 0..c {
                let go = &g[o * len..(o + 1) * len];
                for i in 0..c {
                    let zi = &z[i * len..(i + 1) * len];
                    let wk = &w[(o * c + i) * kt..(o * c + i + 1) * kt];
                    let gwk = &mut gw[(o * c + i) * kt..(o * c + i + 1) * kt];
                    for t in 0..ks {
                        let mut acc = 0.0;
                        for x in 0..n {
                            acc += go[x] * zi[(x + n + t - ctr) % n];
                        }
                        gwk[t] = acc;
                    }
                    let gzi = &mut gz[i * len..(i + 1) * len];
                    for (t, &wv) in wk.iter().enumerate() {
                        if wv == 0.0 {
                            continue;
                        }
                        for u in 0..n {
                            gzi[u] += wv * go[(u + n + ctr - t) % n];
                        }
                    }
                }
            }
        }
        Shape::D2(n, m) => {
            for o in 0..c {
                let go = &g[o * len..(o + 1) * len];
                for i in 0..c {
                    let zi = &z[i * len..(i + 1) * len];
                    let wk = &w[(o * c + i) * kt..(o * c + i + 1) * kt];
                    let gwk = &mut gw[(o * c + i) * kt..(o * c + i + 1) * kt];
                    for s in 0..ks {
                        for t in 0..ks {
                            let mut acc = 0.0;
                            for y in 0..m {
                                let ys = (y + m + t - ctr) % m;
                                for x in 0..n {
                                    let xs = (x + n + s - ctr) % n;
                                    acc += go[y * n + x] * zi[ys * n + xs];
                                }
                            }
                            gwk[s * ks + t] = acc;
                        }
                    }
                    let gzi = &mut gz[i * len..(i + 1) * len];
                    for s in 0..ks {
                        for t in 0..ks {
                            let wv = wk[s * ks + t];
                            if wv == 0.0 {
                                continue;
                            }
                            for y in 0..m {
                                let yu = (y + m + ctr - t) % m;
                                for x in 0..n {
                                    let xu = (x + n + ctr - s) % n;
                                    gzi[y * n + x] += wv * go[yu * n + xu];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (gw, gz)
}

/// Spectral branch forward: mix channels by R on the retained bins, zero
/// the rest, inverse-transform, keep the real part.
fn spectral_forward(
    r: &[Complex64],
    z_hat: &[Complex64],
    config: &FnoConfig,
) -> Result<Vec<f64>> {
    let c = config.channels;
    let len = config.shape.len();
    let bins = config.retained_bins();
    let mt = config.modes_total();
    let mut out = vec![0.0; c * len];
    for o in 0..c {
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        for i in 0..c {
            let ri = &r[(o * c + i) * mt..(o * c + i + 1) * mt];
            let zi = &z_hat[i * len..(i + 1) * len];
            for (km, &bin) in bins.iter().enumerate() {
                spec[bin] += ri[km] * zi[bin];
            }
        }
        let real = idft_real(spec, config.shape)?;
        out[o * len..(o + 1) * len].copy_from_slice(&real);
    }
    Ok(out)
}

/// Gradients of the spectral branch: into R and into the real layer input.
fn spectral_backward(
    r: &[Complex64],
    z_hat: &[Complex64],
    g: &[f64],
    config: &FnoConfig,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let c = config.channels;
    let len = config.shape.len();
    let bins = config.retained_bins();
    let mt = config.modes_total();
    // Upstream grad wrt the truncated spectrum: (1/len) DFT(g) per channel.
    let g_hat_full = dft_channels(g, c, config.shape)?;
    let scale = 1.0 / len as f64;
    let mut gr = vec![Complex64::new(0.0, 0.0); c * c * mt];
    let mut gz_hat = vec![Complex64::new(0.0, 0.0); c * len];
    for o in 0..c {
        let gho = &g_hat_full[o * len..(o + 1) * len];
        for i in 0..c {
            let ri = &r[(o * c + i) * mt..(o * c + i + 1) * mt];
            let gri = &mut gr[(o * c + i) * mt..(o * c + i + 1) * mt];
            let zi = &z_hat[i * len..(i + 1) * len];
            let gzi = &mut gz_hat[i * len..(i + 1) * len];
            for (km, &bin) in bins.iter().enumerate() {
                let gy = gho[bin] * scale;
                gri[km] = gy * zi[bin].conj();
                gzi[bin] += ri[km].conj() * gy;
            }
        }
    }
    // z real, z_hat = DFT(z): grad_z = Re(len * IDFT(gz_hat)).
    let mut gz = vec![0.0; c * len];
    for i in 0..c {
        let spec: Vec<Complex64> = gz_hat[i * len..(i + 1) * len].to_vec();
        let back = idft_real(spec, config.shape)?;
        for (x, v) in back.iter().enumerate() {
            gz[i * len + x] = len as f64 * v;
        }
    }
    Ok((gr, gz))
}

fn check_finite(v: &[f64], context: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: context.to_string(),
        });
    }
    Ok(())
}

pub fn fno_forward(
    params: &FnoParams,
    config: &FnoConfig,
    input: &Field,
) -> Result<(Field, FnoCache)> {
    config.validate()?;
    if input.shape() != config.shape {
        return Err(Error::ShapeMismatch(format!(
            "fno input {:?}, config {:?}",
            input.shape(),
            config.shape
        )));
    }
    if !input.all_finite() {
        return Err(Error::NonFinite {
            context: "fno input".into(),
        });
    }
    let c = config.channels;
    let len = config.shape.len();
    if params.lift_w.len() != c || params.layers.len() != config.layers {
        return Err(Error::ShapeMismatch("params do not match config".into()));
    }

    let mut lifted = vec![0.0; c * len];
    for ch in 0..c {
        for x in 0..len {
            lifted[ch * len + x] = params.lift_w[ch] * input.data()[x] + params.lift_b[ch];
        }
    }

    let mut layer_inputs = vec![lifted];
    let mut layer_spectra = Vec::with_capacity(config.layers);
    let mut preacts = Vec::with_capacity(config.layers);
    for (l, lp) in params.layers.iter().enumerate() {
        let z = layer_inputs.last().unwrap();
        let z_hat = dft_channels(z, c, config.shape)?;
        let spec_out = spectral_forward(&lp.r, &z_hat, config)?;
        let conv_out = conv_forward(&lp.w, z, config);
        let mut s = spec_out;
        for ch in 0..c {
            for x in 0..len {
                s[ch * len + x] += conv_out[ch * len + x] + lp.bias[ch];
            }
        }
        check_finite(&s, &format!("fourier layer {l} pre-activation"))?;
        let activated: Vec<f64> = s.iter().map(|&v| config.activation.value(v)).collect();
        layer_spectra.push(z_hat);
        preacts.push(s);
        layer_inputs.push(activated);
    }

    let z_last = layer_inputs.last().unwrap();
    let mut out = vec![params.proj_b; len];
    for ch in 0..c {
        for x in 0..len {
            out[x] += params.proj_w[ch] * z_last[ch * len + x];
        }
    }
    check_finite(&out, "fno projection")?;
    let output = Field::new(out, config.shape)?;
    Ok((
        output,
        FnoCache {
            input: input.clone(),
            layer_inputs,
            layer_spectra,
            preacts,
            channels: c,
        },
    ))
}

/// Exact reverse-mode gradients for [`fno_forward`]. Complex weights are
/// differentiated with real and imaginary parts as independent scalars.
pub fn fno_backward(
    params: &FnoParams,
    config: &FnoConfig,
    cache: &FnoCache,
    grad_out: &Field,
) -> Result<(FnoParams, Field)> {
    let c = config.channels;
    let len = config.shape.len();
    if cache.channels != c
        || cache.layer_inputs.len() != config.layers + 1
        || cache.input.shape() != config.shape
        || cache.layer_inputs[0].len() != c * len
    {
        return Err(Error::InvalidArgument(
            "cache does not match this network".into(),
        ));
    }
    if grad_out.shape() != config.shape {
        return Err(Error::ShapeMismatch("grad_out shape".into()));
    }
    let mut grads = FnoParams::zeros(config);

    // Projection.
    let z_last = &cache.layer_inputs[config.layers];
    let mut gz = vec![0.0; c * len];
    for ch in 0..c {
        let mut acc = 0.0;
        for x in 0..len {
            let g = grad_out.data()[x];
            acc += g * z_last[ch * len + x];
            gz[ch * len + x] = params.proj_w[ch] * g;
        }
        grads.proj_w[ch] = acc;
    }
    grads.proj_b = grad_out.data().iter().sum();

    // Fourier layers in reverse.
    for l in (0..config.layers).rev() {
        let lp = &params.layers[l];
        let s = &cache.preacts[l];
        let z = &cache.layer_inputs[l];
        let z_hat = &cache.layer_spectra[l];
        // Through the activation.
        let gs: Vec<f64> = gz
            .iter()
            .zip(s)
            .map(|(&g, &v)| g * config.activation.deriv(v))
            .collect();
        for ch in 0..c {
            grads.layers[l].bias[ch] = gs[ch * len..(ch + 1) * len].iter().sum();
        }
        let (gw, gz_conv) = conv_backward(&lp.w, z, &gs, config);
        let (gr, gz_spec) = spectral_backward(&lp.r, z_hat, &gs, config)?;
        grads.layers[l].w = gw;
        grads.layers[l].r = gr;
        gz = gz_conv
            .iter()
            .zip(&gz_spec)
            .map(|(a, b)| a + b)
            .collect();
    }

    // Lift.
    let mut grad_in = vec![0.0; len];
    for ch in 0..c {
        let mut gw = 0.0;
        let mut gb = 0.0;
        for x in 0..len {
            let g = gz[ch * len + x];
            gw += g * cache.input.data()[x];
            gb += g;
            grad_in[x] += params.lift_w[ch] * g;
        }
        grads.lift_w[ch] = gw;
        grads.lift_b[ch] = gb;
    }
    Ok((grads, Field::new(grad_in, config.shape)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_config(shape: Shape) -> FnoConfig {
        FnoConfig {
            channels: 4,
            layers: 2,
            modes: 4,
            kernel_size: 3,
            activation: Activation::Gelu,
            shape,
        }
    }

    fn rand_field(shape: Shape, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(
            (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            shape,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config(Shape::D1(16));
        assert!(cfg.validate().is_ok());
        cfg.kernel_size = 4;
        assert!(cfg.validate().is_err());
        cfg.kernel_size = 3;
        cfg.modes = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_input_zero_biases_gives_zero_output() {
        let cfg = tiny_config(Shape::D1(16));
        let params = FnoParams::init(&cfg, 1); // init leaves biases at zero
        let (out, _) = fno_forward(&params, &cfg, &Field::zeros(cfg.shape)).unwrap();
        assert_eq!(out.norm2(), 0.0);
    }

    #[test]
    fn output_shape_matches_input_shape() {
        for shape in [Shape::D1(32), Shape::D2(16, 16)] {
            let cfg = FnoConfig::desk_scale(shape);
            let params = FnoParams::init(&cfg, 2);
            let (out, _) = fno_forward(&params, &cfg, &rand_field(shape, 3)).unwrap();
            assert_eq!(out.shape(), shape);
        }
    }

    #[test]
    fn identity_wiring_reduces_to_pointwise_activation() {
        // R=0, W = channel-identity stencil, B=0, lift/project route
        // through channel 0: the single layer is just the activation.
        let cfg = FnoConfig {
            channels: 3,
            layers: 1,
            modes: 2,
            kernel_size: 3,
            activation: Activation::Gelu,
            shape: Shape::D1(16),
        };
        let mut params = FnoParams::zeros(&cfg);
        params.lift_w[0] = 1.0;
        params.proj_w[0] = 1.0;
        let c = cfg.channels;
        let kt = cfg.kernel_total();
        for ch in 0..c {
            params.layers[0].w[(ch * c + ch) * kt + kt / 2] = 1.0;
        }
        let x = rand_field(cfg.shape, 4);
        let (out, _) = fno_forward(&params, &cfg, &x).unwrap();
        for i in 0..x.len() {
            assert!((out.data()[i] - cfg.activation.value(x.data()[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_modes_do_not_reach_spectral_branch() {
        // With W=0 the output depends on the input only through its first
        // `modes` frequency bins; adding a pure high mode changes nothing.
        let mut cfg = tiny_config(Shape::D1(16));
        cfg.activation = Activation::Identity;
        let mut params = FnoParams::init(&cfg, 5);
        for l in &mut params.layers {
            for v in &mut l.w {
                *v = 0.0;
            }
        }
        let x = rand_field(cfg.shape, 6);
        let hi = Field::from_vec(
            (0..16)
                .map(|j| (2.0 * std::f64::consts::PI * 6.0 * j as f64 / 16.0).cos())
                .collect(),
        );
        let mut x2 = x.clone();
        x2.axpy(1.0, &hi);
        let (a, _) = fno_forward(&params, &cfg, &x).unwrap();
        let (b, _) = fno_forward(&params, &cfg, &x2).unwrap();
        assert!(a.sub(&b).norm2() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_config(Shape::D1(16));
        let params = FnoParams::init(&cfg, 7);
        let x = rand_field(cfg.shape, 8);
        let (a, _) = fno_forward(&params, &cfg, &x).unwrap();
        let (b, _) = fno_forward(&params, &cfg, &x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn linear_network_gradient_matches_probed_transpose() {
        // Identity activation makes the whole network affine: out = Mx + k.
        // Probe M column by column with forward calls, then check grad_in
        // of L = |out|^2/2 against M^T out.
        let mut cfg = tiny_config(Shape::D1(12));
        cfg.modes = 3;
        cfg.activation = Activation::Identity;
        let params = FnoParams::init(&cfg, 9);
        let n = 12;
        let (k_vec, _) = fno_forward(&params, &cfg, &Field::zeros(cfg.shape)).unwrap();
        let mut m_cols = Vec::new();
        for j in 0..n {
            let mut e = Field::zeros(cfg.shape);
            e.data_mut()[j] = 1.0;
            let (col, _) = fno_forward(&params, &cfg, &e).unwrap();
            m_cols.push(col.sub(&k_vec));
        }
        let x = rand_field(cfg.shape, 10);
        let (out, cache) = fno_forward(&params, &cfg, &x).unwrap();
        let (_, grad_in) = fno_backward(&params, &cfg, &cache, &out).unwrap();
        for j in 0..n {
            let expected = m_cols[j].dot(&out);
            assert!(
                (grad_in.data()[j] - expected).abs() < 1e-10,
                "{j}: {} vs {expected}",
                grad_in.data()[j]
            );
        }
    }

    fn finite_difference_check(cfg: &FnoConfig, seed: u64) {
        let params = FnoParams::init(cfg, seed);
        let x = rand_field(cfg.shape, seed + 1);
        let v = rand_field(cfg.shape, seed + 2); // fixed linear functional
        let loss = |p: &FnoParams| {
            let (out, _) = fno_forward(p, cfg, &x).unwrap();
            out.dot(&v)
        };
        let (_, cache) = fno_forward(&params, cfg, &x).unwrap();
        let (grads, grad_in) = fno_backward(&params, cfg, &cache, &v).unwrap();
        let analytic = grads.flatten();
        let base_flat = params.flatten();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
        // Spot-check a random subset plus every tensor's first entry.
        let mut idxs: Vec<usize> = (0..40).map(|_| rng.gen_range(0..base_flat.len())).collect();
        idxs.push(0);
        idxs.push(base_flat.len() - 1);
        for idx in idxs {
            let mut p = params.clone();
            let mut f = base_flat.clone();
            f[idx] += h;
            p.assign_from_flat(&f).unwrap();
            let lp = loss(&p);
            f[idx] -= 2.0 * h;
            p.assign_from_flat(&f).unwrap();
            let lm = loss(&p);
            let fd = (lp - lm) / (2.0 * h);
            let a = analytic[idx];
            let denom = fd.abs().max(a.abs()).max(1e-8);
            assert!(
                (fd - a).abs() / denom < 1e-4,
                "param {idx}: fd={fd} analytic={a}"
            );
        }
        // grad_in against the same oracle.
        for j in 0..x.len().min(10) {
            let mut xp = x.clone();
            xp.data_mut()[j] += h;
            let (op, _) = fno_forward(&params, cfg, &xp).unwrap();
            xp.data_mut()[j] -= 2.0 * h;
            let (om, _) = fno_forward(&params, cfg, &xp).unwrap();
            let fd = (op.dot(&v) - om.dot(&v)) / (2.0 * h);
            let a = grad_in.data()[j];
            let denom = fd.abs().max(a.abs()).max(1e-8);
            assert!((fd - a).abs() / denom < 1e-4, "input {j}: fd={fd} vs {a}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_1d() {
        finite_difference_check(&tiny_config(Shape::D1(16)), 11);
    }

    #[test]
    fn gradients_match_finite_differences_2d() {
        let cfg = FnoConfig {
            channels: 2,
            layers: 1,
            modes: 2,
            kernel_size: 3,
            activation: Activation::Gelu,
            shape: Shape::D2(8, 8),
        };
        finite_difference_check(&cfg, 12);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let cfg = tiny_config(Shape::D1(16));
        let params = FnoParams::init(&cfg, 13);
        let x = rand_field(cfg.shape, 14);
        let (_, cache) = fno_forward(&params, &cfg, &x).unwrap();
        let (grads, grad_in) =
            fno_backward(&params, &cfg, &cache, &Field::zeros(cfg.shape)).unwrap();
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
        assert_eq!(grad_in.norm2(), 0.0);
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let cfg16 = tiny_config(Shape::D1(16));
        let cfg32 = tiny_config(Shape::D1(32));
        let p16 = FnoParams::init(&cfg16, 15);
        let p32 = FnoParams::init(&cfg32, 15);
        let (_, cache) = fno_forward(&p16, &cfg16, &rand_field(Shape::D1(16), 16)).unwrap();
        assert!(fno_backward(&p32, &cfg32, &cache, &Field::zeros(Shape::D1(32))).is_err());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let cfg = tiny_config(Shape::D1(16));
        let params = FnoParams::init(&cfg, 17);
        let mut x = Field::zeros(cfg.shape);
        x.data_mut()[0] = f64::NAN;
        assert!(matches!(
            fno_forward(&params, &cfg, &x),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn flatten_roundtrip_is_exact() {
        let cfg = tiny_config(Shape::D1(16));
        let params = FnoParams::init(&cfg, 18);
        let flat = params.flatten();
        let mut other = FnoParams::zeros(&cfg);
        other.assign_from_flat(&flat).unwrap();
        assert_eq!(other.flatten(), flat);
    }

    #[test]
    fn gelu_value_and_slope_at_origin() {
        let a = Activation::Gelu;
        assert_eq!(a.value(0.0), 0.0);
        assert!((a.deriv(0.0) - 0.5).abs() < 1e-14);
        // Derivative consistency by central differences.
        for &x in &[-2.0, -0.3, 0.7, 1.9] {
            let h = 1e-6;
            let fd = (a.value(x + h) - a.value(x - h)) / (2.0 * h);
            assert!((fd - a.deriv(x)).abs() < 1e-8);
        }
    }
}
