//! Central finite differences for verifying analytic gradients.

use super::{Activation, ConvLayer, FeatureMap};
use crate::error::Result;

/// `|a - n| / max(1e-8, |a| + |n|)`
#[inline]
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_differences<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error between `analytic` and the central-difference
/// gradient of `f` at `x`.
pub fn finite_difference_check<F>(f: F, x: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len());
    central_differences(f, x, h)
        .iter()
        .zip(analytic)
        .map(|(&n, &a)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Checks a layer's backward pass (evaluated in `f64`) against central
/// differences of the scalar `Σ weights ⊙ forward(input)`. Covers the input,
/// kernel and bias gradients; returns the worst relative error.
pub fn check_conv_layer(
    layer: &ConvLayer<f64>,
    input: &FeatureMap<f64>,
    weights: &FeatureMap<f64>,
    h: f64,
) -> Result<f64> {
    let output = layer.forward(input)?;
    let grads = layer.backward(input, &output, weights, true)?;
    let objective = |l: &ConvLayer<f64>, x: &FeatureMap<f64>| -> f64 {
        let y = l.forward(x).expect("shapes fixed above");
        y.as_slice().iter().zip(weights.as_slice()).map(|(a, b)| a * b).sum()
    };

    let rebuild = |kernels: &[f64], biases: &[f64]| {
        ConvLayer::with_parameters(
            layer.in_channels(),
            layer.out_channels(),
            layer.kernel_size(),
            layer.stride(),
            layer.padding(),
            layer.activation(),
            kernels.to_vec(),
            biases.to_vec(),
        )
        .expect("same shapes")
    };

    let input_grad = grads.input.expect("requested");
    let e_input = finite_difference_check(
        |x| {
            let m = FeatureMap::from_vec(input.channels(), input.len(), x.to_vec()).unwrap();
            objective(layer, &m)
        },
        input.as_slice(),
        input_grad.as_slice(),
        h,
    );
    let e_kernels = finite_difference_check(
        |k| objective(&rebuild(k, layer.biases()), input),
        layer.kernels(),
        &grads.kernels,
        h,
    );
    let e_biases = finite_difference_check(
        |b| objective(&rebuild(layer.kernels(), b), input),
        layer.biases(),
        &grads.biases,
        h,
    );
    Ok(e_input.max(e_kernels).max(e_biases))
}

/// Smallest distance of any pre-activation from the leaky-ReLU kink; used to
/// steer random gradient checks away from the non-differentiable point.
pub fn min_kink_distance(layer: &ConvLayer<f64>, input: &FeatureMap<f64>) -> Result<f64> {
    let linear = ConvLayer::with_parameters(
        layer.in_channels(),
        layer.out_channels(),
        layer.kernel_size(),
        layer.stride(),
        layer.padding(),
        Activation::Identity,
        layer.kernels().to_vec(),
        layer.biases().to_vec(),
    )?;
    let z = linear.forward(input)?;
    Ok(z.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
}
