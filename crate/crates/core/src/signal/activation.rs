use serde::{Deserialize, Serialize};

use super::Real;

/// Nonlinearity applied after a convolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    LeakyRelu { slope: f32 },
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::LeakyRelu { slope } => leaky_relu(x, T::of(slope as f64)),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's *output* `y`.
    ///
    /// Both nonlinearities are invertible enough for this: leaky-ReLU keeps the
    /// sign of its input and the sigmoid derivative is `y(1 - y)`.
    #[inline]
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::LeakyRelu { slope } => leaky_relu_derivative(y, T::of(slope as f64)),
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn apply_in_place<T: Real>(self, values: &mut [T]) {
        match self {
            Activation::Identity => {}
            _ => values.iter_mut().for_each(|v| *v = self.apply(*v)),
        }
    }
}

#[inline]
pub fn leaky_relu<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

/// 1 for `x >= 0` (including the kink), `slope` otherwise.
#[inline]
pub fn leaky_relu_derivative<T: Real>(x: T, slope: T) -> T {
    if x >= T::zero() {
        T::one()
    } else {
        slope
    }
}

/// Logistic function, evaluated so that neither tail overflows.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn sigmoid_derivative<T: Real>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(2.0f32, 0.01), 2.0);
        assert!((leaky_relu(-2.0f32, 0.01) + 0.02).abs() < 1e-7);
        assert_eq!(leaky_relu(0.0f32, 0.01), 0.0);
        assert_eq!(leaky_relu_derivative(0.0f32, 0.01), 1.0);
        assert_eq!(leaky_relu_derivative(-3.0f32, 0.01), 0.01);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(40.0f64) - 1.0).abs() < 1e-12);
        assert_eq!(sigmoid(40.0f32), 1.0);
        for x in [-1000.0f32, -100.0, 100.0, 1000.0] {
            assert!(sigmoid(x).is_finite());
        }
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert!((sigmoid_derivative(0.0f64) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -30.0f64..30.0) {
            prop_assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-12);
        }

        #[test]
        fn sigmoid_is_monotone(a in -20.0f64..20.0, d in 1e-6f64..5.0) {
            prop_assert!(sigmoid(a + d) > sigmoid(a));
            let s = sigmoid(a);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn derivative_from_output_matches(x in -8.0f64..8.0) {
            let y = Activation::Sigmoid.apply(x);
            let d = Activation::Sigmoid.derivative_from_output(y);
            prop_assert!((d - sigmoid_derivative(x)).abs() < 1e-12);
            let leaky = Activation::LeakyRelu { slope: 0.01 };
            let y = leaky.apply(x);
            let expected = leaky_relu_derivative(x, 0.01f32 as f64);
            prop_assert_eq!(leaky.derivative_from_output(y), expected);
        }
    }
}
