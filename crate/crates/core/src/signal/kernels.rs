//! Inner loops shared by the convolution passes. Written so LLVM vectorizes them.

use super::Real;

const LANES: usize = 16;

/// `y += a * x`
#[inline]
pub(crate) fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// `y += Σ_j w[j] * x[j..j + y.len()]`, i.e. a short correlation accumulated
/// into `y`. Taps are consumed four at a time to cut traffic on `y`.
#[inline]
pub(crate) fn correlate_into<T: Real>(w: &[T], x: &[T], y: &mut [T]) {
    let n = y.len();
    debug_assert!(x.len() + 1 >= n + w.len());
    let mut taps = w.chunks_exact(4);
    let mut base = 0;
    for c in &mut taps {
        let (w0, w1, w2, w3) = (c[0], c[1], c[2], c[3]);
        let x0 = &x[base..base + n];
        let x1 = &x[base + 1..base + 1 + n];
        let x2 = &x[base + 2..base + 2 + n];
        let x3 = &x[base + 3..base + 3 + n];
        for t in 0..n {
            y[t] = y[t] + (w0 * x0[t] + w1 * x1[t]) + (w2 * x2[t] + w3 * x3[t]);
        }
        base += 4;
    }
    for &wk in taps.remainder() {
        axpy(wk, &x[base..base + n], y);
        base += 1;
    }
}

/// Dot product with a fixed lane split, so the summation order (and therefore
/// the result) does not depend on the target's vector width.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for j in 0..LANES {
            acc[j] = acc[j] + xa[j] * xb[j];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    let mut s = T::zero();
    for v in acc {
        s = s + v;
    }
    s + tail
}

/// Four dot products `a · b[j..j + a.len()]` for `j = 0..4`, sharing the
/// loads of `a`.
#[inline]
pub(crate) fn dot4<T: Real>(a: &[T], b: &[T]) -> [T; 4] {
    const L: usize = 8;
    let n = a.len();
    debug_assert!(b.len() >= n + 3);
    let mut acc = [[T::zero(); L]; 4];
    let full = n / L * L;
    for (t, xa) in a[..full].chunks_exact(L).enumerate() {
        let base = t * L;
        let w: &[T; L + 3] = b[base..base + L + 3].try_into().unwrap();
        for j in 0..L {
            let x = xa[j];
            acc[0][j] = acc[0][j] + x * w[j];
            acc[1][j] = acc[1][j] + x * w[j + 1];
            acc[2][j] = acc[2][j] + x * w[j + 2];
            acc[3][j] = acc[3][j] + x * w[j + 3];
        }
    }
    let mut out = [T::zero(); 4];
    for (r, lanes) in out.iter_mut().zip(&acc) {
        for &v in lanes {
            *r = *r + v;
        }
    }
    for t in full..n {
        let x = a[t];
        for (j, r) in out.iter_mut().enumerate() {
            *r = *r + x * b[t + j];
        }
    }
    out
}

/// Sum accumulated in `f64`.
#[inline]
pub(crate) fn sum_f64<T: Real>(x: &[T]) -> f64 {
    x.iter().map(|v| v.as_f64()).sum()
}
