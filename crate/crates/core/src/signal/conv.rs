use rand::Rng;

use crate::error::{config_err, input_err, Result};

use super::kernels::{axpy, correlate_into, dot, dot4, sum_f64};
use super::{Activation, FeatureMap, Real};

/// Samples of the output handled per pass in the stride-1 loops; keeps the
/// accumulator row resident in L1.
const BLOCK: usize = 1024;

/// One convolutional layer: cross-correlation over all input channels, bias,
/// then an activation. Kernels are laid out `out × in × kernel_size`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T = f32> {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    stride: usize,
    padding: usize,
    kernels: Vec<T>,
    biases: Vec<T>,
    activation: Activation,
}

/// Gradients of `Σ grad_out ⊙ output` with respect to the layer's arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T = f32> {
    /// `None` when the caller did not ask for the input gradient.
    pub input: Option<FeatureMap<T>>,
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> ConvLayer<T> {
    /// Zero-initialized layer.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
    ) -> Result<Self> {
        let kernels = vec![T::zero(); out_channels * in_channels * kernel_size];
        let biases = vec![T::zero(); out_channels];
        Self::with_parameters(
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
            activation,
            kernels,
            biases,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_parameters(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
        kernels: Vec<T>,
        biases: Vec<T>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 || stride == 0 {
            return Err(config_err!(
                "layer dimensions must be positive (in {in_channels}, out {out_channels}, \
                 kernel {kernel_size}, stride {stride})"
            ));
        }
        if kernels.len() != out_channels * in_channels * kernel_size {
            return Err(config_err!(
                "kernel tensor has {} values, expected {out_channels}×{in_channels}×{kernel_size}",
                kernels.len()
            ));
        }
        if biases.len() != out_channels {
            return Err(config_err!(
                "bias vector has {} values, expected {out_channels}",
                biases.len()
            ));
        }
        if let Activation::LeakyRelu { slope } = activation {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(config_err!("leaky-ReLU slope {slope} outside (0, 1)"));
            }
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
            kernels,
            biases,
            activation,
        })
    }

    /// Fan-in scaled uniform init on `[-a, a]`, `a = sqrt(1 / (in · kernel))`;
    /// biases are reset to zero.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let a = (1.0 / (self.in_channels * self.kernel_size) as f64).sqrt();
        for w in &mut self.kernels {
            *w = T::of(rng.random_range(-a..=a));
        }
        self.biases.fill(T::zero());
    }

    /// Copy with every kernel tap multiplied by `kernel_scale(out, in)` and
    /// every bias by `bias_scale(out)`.
    pub fn scaled(&self, kernel_scale: impl Fn(usize, usize) -> f64, bias_scale: impl Fn(usize) -> f64) -> Self {
        let per_out = self.in_channels * self.kernel_size;
        let mut out = self.clone();
        for (i, w) in out.kernels.iter_mut().enumerate() {
            let s = kernel_scale(i / per_out, (i % per_out) / self.kernel_size);
            *w = T::of(w.to_f64().unwrap_or(0.0) * s);
        }
        for (c, b) in out.biases.iter_mut().enumerate() {
            *b = T::of(b.to_f64().unwrap_or(0.0) * bias_scale(c));
        }
        out
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }
    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }
    pub fn stride(&self) -> usize {
        self.stride
    }
    pub fn padding(&self) -> usize {
        self.padding
    }
    pub fn activation(&self) -> Activation {
        self.activation
    }
    pub fn kernels(&self) -> &[T] {
        &self.kernels
    }
    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    /// Kernel taps connecting input channel `i` to output channel `o`.
    pub fn kernel(&self, o: usize, i: usize) -> &[T] {
        let k = self.kernel_size;
        &self.kernels[(o * self.in_channels + i) * k..][..k]
    }

    /// Mutable views of the kernel and bias tensors, in that order.
    pub fn params_mut(&mut self) -> [&mut [T]; 2] {
        [&mut self.kernels, &mut self.biases]
    }

    pub fn param_count(&self) -> usize {
        self.kernels.len() + self.biases.len()
    }

    /// `floor((len + 2·padding − kernel) / stride) + 1`, or an input error
    /// when the padded input is shorter than one kernel.
    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        let padded = input_len + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(input_err!(
                "input of {input_len} samples (padding {}) is shorter than kernel {}",
                self.padding,
                self.kernel_size
            ));
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    fn padded_input(&self, input: &FeatureMap<T>) -> Vec<T> {
        let (len, p) = (input.len(), self.padding);
        let lp = len + 2 * p;
        let mut out = vec![T::zero(); self.in_channels * lp];
        for i in 0..self.in_channels {
            out[i * lp + p..i * lp + p + len].copy_from_slice(input.channel(i));
        }
        out
    }

    fn check_input(&self, input: &FeatureMap<T>) -> Result<usize> {
        if input.channels() != self.in_channels {
            return Err(config_err!(
                "layer expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            ));
        }
        self.output_len(input.len())
    }

    pub fn forward(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let n = self.check_input(input)?;
        let lp = input.len() + 2 * self.padding;
        let padded = self.padded_input(input);
        let k = self.kernel_size;
        let mut out = vec![T::zero(); self.out_channels * n];

        for (o, row) in out.chunks_exact_mut(n).enumerate() {
            row.fill(self.biases[o]);
            if self.stride == 1 {
                for start in (0..n).step_by(BLOCK) {
                    let end = (start + BLOCK).min(n);
                    let acc = &mut row[start..end];
                    for i in 0..self.in_channels {
                        let src = &padded[i * lp + start..i * lp + end + k - 1];
                        correlate_into(self.kernel(o, i), src, acc);
                    }
                }
            } else {
                for (t, y) in row.iter_mut().enumerate() {
                    let at = t * self.stride;
                    let mut s = *y;
                    for i in 0..self.in_channels {
                        let src = &padded[i * lp + at..i * lp + at + k];
                        s = s + dot(self.kernel(o, i), src);
                    }
                    *y = s;
                }
            }
        }
        self.activation.apply_in_place(&mut out);
        FeatureMap::from_vec(self.out_channels, n, out)
    }

    /// Backward pass given the cached forward `output`.
    ///
    /// The activation derivative is folded into `grad_out` first, then the
    /// kernel, bias and (optionally) input gradients are formed from it.
    pub fn backward(
        &self,
        input: &FeatureMap<T>,
        output: &FeatureMap<T>,
        grad_out: &FeatureMap<T>,
        want_input_grad: bool,
    ) -> Result<ConvGrads<T>> {
        let n = self.check_input(input)?;
        for (what, m) in [("output", output), ("output gradient", grad_out)] {
            if m.channels() != self.out_channels || m.len() != n {
                return Err(config_err!(
                    "{what} has shape {}×{}, expected {}×{n}",
                    m.channels(),
                    m.len(),
                    self.out_channels
                ));
            }
        }
        let (len, p, k, s) = (input.len(), self.padding, self.kernel_size, self.stride);
        let lp = len + 2 * p;
        let padded = self.padded_input(input);

        let gpre: Vec<T> = grad_out
            .as_slice()
            .iter()
            .zip(output.as_slice())
            .map(|(&g, &y)| g * self.activation.derivative_from_output(y))
            .collect();

        let biases = gpre.chunks_exact(n).map(|g| T::of(sum_f64(g))).collect();

        let mut kernels = vec![T::zero(); self.kernels.len()];
        for o in 0..self.out_channels {
            let g = &gpre[o * n..(o + 1) * n];
            for i in 0..self.in_channels {
                let src = &padded[i * lp..(i + 1) * lp];
                let dk = &mut kernels[(o * self.in_channels + i) * k..][..k];
                if s == 1 {
                    let mut kk = 0;
                    while kk + 4 <= k {
                        dk[kk..kk + 4].copy_from_slice(&dot4(g, &src[kk..kk + n + 3]));
                        kk += 4;
                    }
                    for kk in kk..k {
                        dk[kk] = dot(g, &src[kk..kk + n]);
                    }
                } else {
                    for (t, &gt) in g.iter().enumerate() {
                        axpy(gt, &src[t * s..t * s + k], dk);
                    }
                }
            }
        }

        let input_grad = if want_input_grad {
            let mut gpad = vec![T::zero(); self.in_channels * lp];
            for o in 0..self.out_channels {
                let g = &gpre[o * n..(o + 1) * n];
                // The adjoint of a stride-1 correlation is a correlation of the
                // zero-extended gradient with the reversed kernel.
                let extended = if s == 1 {
                    let mut e = vec![T::zero(); n + 2 * (k - 1)];
                    e[k - 1..k - 1 + n].copy_from_slice(g);
                    e
                } else {
                    Vec::new()
                };
                for i in 0..self.in_channels {
                    let dst = &mut gpad[i * lp..(i + 1) * lp];
                    let w = self.kernel(o, i);
                    if s == 1 {
                        let reversed: Vec<T> = w.iter().rev().copied().collect();
                        // stride 1 means lp == n + k - 1
                        for start in (0..lp).step_by(BLOCK) {
                            let end = (start + BLOCK).min(lp);
                            correlate_into(
                                &reversed,
                                &extended[start..end + k - 1],
                                &mut dst[start..end],
                            );
                        }
                    } else {
                        for (t, &gt) in g.iter().enumerate() {
                            axpy(gt, w, &mut dst[t * s..t * s + k]);
                        }
                    }
                }
            }
            let mut gin = Vec::with_capacity(self.in_channels * len);
            for i in 0..self.in_channels {
                gin.extend_from_slice(&gpad[i * lp + p..i * lp + p + len]);
            }
            Some(FeatureMap::from_vec(self.in_channels, len, gin)?)
        } else {
            None
        };

        Ok(ConvGrads {
            input: input_grad,
            kernels,
            biases,
        })
    }

    /// Same layer with parameters converted to another precision.
    pub fn cast<U: Real>(&self) -> ConvLayer<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::of(x.as_f64())).collect();
        ConvLayer {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernel_size: self.kernel_size,
            stride: self.stride,
            padding: self.padding,
            kernels: conv(&self.kernels),
            biases: conv(&self.biases),
            activation: self.activation,
        }
    }
}

pub fn conv1d_forward<T: Real>(input: &FeatureMap<T>, layer: &ConvLayer<T>) -> Result<FeatureMap<T>> {
    layer.forward(input)
}

/// Recomputes the forward pass and returns all three gradients.
pub fn conv1d_backward<T: Real>(
    input: &FeatureMap<T>,
    layer: &ConvLayer<T>,
    grad_out: &FeatureMap<T>,
) -> Result<ConvGrads<T>> {
    let output = layer.forward(input)?;
    layer.backward(input, &output, grad_out, true)
}
