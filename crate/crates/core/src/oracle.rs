//! Test-only reference evaluations, written directly from the defining sums
//! and independent of the optimized kernels.

use crate::signal::{ConvLayer, Real};

/// `act(b[o] + Σ_i Σ_k K[o][i][k] · x_i[t·stride + k − pad])` with zeros
/// outside the signal, evaluated in `f64`.
pub(crate) fn direct_conv<T: Real>(x: &[Vec<f64>], layer: &ConvLayer<T>) -> Vec<Vec<f64>> {
    let len = x[0].len();
    let p = layer.padding() as isize;
    let k = layer.kernel_size();
    let n = (len + 2 * layer.padding() - k) / layer.stride() + 1;
    (0..layer.out_channels())
        .map(|o| {
            (0..n)
                .map(|t| {
                    let mut acc = layer.biases()[o].as_f64();
                    for (i, xi) in x.iter().enumerate() {
                        let w = layer.kernel(o, i);
                        for (kk, wk) in w.iter().enumerate() {
                            let idx = (t * layer.stride() + kk) as isize - p;
                            if idx >= 0 && (idx as usize) < len {
                                acc += wk.as_f64() * xi[idx as usize];
                            }
                        }
                    }
                    layer.activation().apply(acc)
                })
                .collect()
        })
        .collect()
}

/// Runs `direct_conv` through a stack of layers.
pub(crate) fn direct_stack<T: Real>(x: &[Vec<f64>], layers: &[ConvLayer<T>]) -> Vec<Vec<f64>> {
    layers
        .iter()
        .fold(x.to_vec(), |h, layer| direct_conv(&h, layer))
}
