//! Convolution, pooling, and activation primitives.
//!
//! Minimal dense implementations specialized to the small network in this
//! crate: channels-last layout, zero padding, fixed deterministic summation
//! order so training runs reproduce bit for bit regardless of thread count.

use ndarray::{Array1, Array3, Array4};

use crate::scalar::Real;

/// 2-D convolution of a `(h, w, cin)` input with a `(kh, kw, cin, cout)`
/// kernel under zero padding `(ph, pw)` and a common stride.
pub(crate) fn conv2d<T: Real>(
    input: &Array3<T>,
    kernel: &Array4<T>,
    pad: (usize, usize),
    stride: usize,
) -> Array3<T> {
    let (h, w, cin) = input.dim();
    let (kh, kw, kcin, cout) = kernel.dim();
    assert_eq!(cin, kcin, "input/kernel channel mismatch");
    assert!(stride >= 1, "stride must be positive");
    let (ph, pw) = pad;
    assert!(
        h + 2 * ph >= kh && w + 2 * pw >= kw,
        "kernel larger than padded input"
    );
    let ho = (h + 2 * ph - kh) / stride + 1;
    let wo = (w + 2 * pw - kw) / stride + 1;

    let xs = input.as_slice().expect("standard layout");
    let ks = kernel.as_slice().expect("standard layout");
    let mut out = Array3::<T>::zeros((ho, wo, cout));
    let os = out.as_slice_mut().expect("standard layout");
    for yo in 0..ho {
        let yb = (yo * stride) as isize - ph as isize;
        for xo in 0..wo {
            let xb = (xo * stride) as isize - pw as isize;
            let obase = (yo * wo + xo) * cout;
            for ky in 0..kh {
                let yi = yb + ky as isize;
                if yi < 0 || yi >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let xi = xb + kx as isize;
                    if xi < 0 || xi >= w as isize {
                        continue;
                    }
                    let ibase = (yi as usize * w + xi as usize) * cin;
                    let kbase = (ky * kw + kx) * cin;
                    for ci in 0..cin {
                        let v = xs[ibase + ci];
                        let kb = (kbase + ci) * cout;
                        for co in 0..cout {
                            os[obase + co] += v * ks[kb + co];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient of [`conv2d`] with respect to the kernel.
pub(crate) fn conv2d_grad_kernel<T: Real>(
    input: &Array3<T>,
    grad_out: &Array3<T>,
    pad: (usize, usize),
    stride: usize,
    kshape: (usize, usize),
) -> Array4<T> {
    let (h, w, cin) = input.dim();
    let (ho, wo, cout) = grad_out.dim();
    let (kh, kw) = kshape;
    let (ph, pw) = pad;
    let xs = input.as_slice().expect("standard layout");
    let gs = grad_out.as_slice().expect("standard layout");
    let mut dk = Array4::<T>::zeros((kh, kw, cin, cout));
    let ds = dk.as_slice_mut().expect("standard layout");
    for yo in 0..ho {
        let yb = (yo * stride) as isize - ph as isize;
        for xo in 0..wo {
            let xb = (xo * stride) as isize - pw as isize;
            let gbase = (yo * wo + xo) * cout;
            for ky in 0..kh {
                let yi = yb + ky as isize;
                if yi < 0 || yi >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let xi = xb + kx as isize;
                    if xi < 0 || xi >= w as isize {
                        continue;
                    }
                    let ibase = (yi as usize * w + xi as usize) * cin;
                    let kbase = (ky * kw + kx) * cin;
                    for ci in 0..cin {
                        let v = xs[ibase + ci];
                        let db = (kbase + ci) * cout;
                        for co in 0..cout {
                            ds[db + co] += v * gs[gbase + co];
                        }
                    }
                }
            }
        }
    }
    dk
}

/// Gradient of [`conv2d`] with respect to the input.
pub(crate) fn conv2d_grad_input<T: Real>(
    grad_out: &Array3<T>,
    kernel: &Array4<T>,
    pad: (usize, usize),
    stride: usize,
    in_shape: (usize, usize, usize),
) -> Array3<T> {
    let (h, w, cin) = in_shape;
    let (kh, kw, kcin, cout) = kernel.dim();
    assert_eq!(cin, kcin);
    let (ho, wo, gcout) = grad_out.dim();
    assert_eq!(cout, gcout);
    let (ph, pw) = pad;
    let gs = grad_out.as_slice().expect("standard layout");
    let ks = kernel.as_slice().expect("standard layout");
    let mut dx = Array3::<T>::zeros((h, w, cin));
    let ds = dx.as_slice_mut().expect("standard layout");
    for yo in 0..ho {
        let yb = (yo * stride) as isize - ph as isize;
        for xo in 0..wo {
            let xb = (xo * stride) as isize - pw as isize;
            let gbase = (yo * wo + xo) * cout;
            for ky in 0..kh {
                let yi = yb + ky as isize;
                if yi < 0 || yi >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let xi = xb + kx as isize;
                    if xi < 0 || xi >= w as isize {
                        continue;
                    }
                    let ibase = (yi as usize * w + xi as usize) * cin;
                    let kbase = (ky * kw + kx) * cin;
                    for ci in 0..cin {
                        let kb = (kbase + ci) * cout;
                        let mut acc = T::zero();
                        for co in 0..cout {
                            acc += gs[gbase + co] * ks[kb + co];
                        }
                        ds[ibase + ci] += acc;
                    }
                }
            }
        }
    }
    dx
}

/// Adds a per-channel bias in place.
pub(crate) fn add_bias<T: Real>(x: &mut Array3<T>, bias: &Array1<T>) {
    let (_, _, c) = x.dim();
    assert_eq!(c, bias.len());
    let bs = bias.as_slice().expect("standard layout");
    for v in x
        .as_slice_mut()
        .expect("standard layout")
        .chunks_exact_mut(c)
    {
        for (o, b) in v.iter_mut().zip(bs) {
            *o += *b;
        }
    }
}

/// 2x2 mean pooling; odd trailing rows/columns are dropped.
pub(crate) fn mean_pool2<T: Real>(x: &Array3<T>) -> Array3<T> {
    let (h, w, c) = x.dim();
    let ho = h / 2;
    let wo = w / 2;
    let quarter = T::c(0.25);
    Array3::from_shape_fn((ho, wo, c), |(y, xx, ch)| {
        (x[(2 * y, 2 * xx, ch)]
            + x[(2 * y, 2 * xx + 1, ch)]
            + x[(2 * y + 1, 2 * xx, ch)]
            + x[(2 * y + 1, 2 * xx + 1, ch)])
            * quarter
    })
}

/// Gradient of [`mean_pool2`]: spreads each output gradient evenly over its
/// 2x2 source block.
pub(crate) fn mean_pool2_grad<T: Real>(
    grad_out: &Array3<T>,
    in_shape: (usize, usize, usize),
) -> Array3<T> {
    let (h, w, c) = in_shape;
    let (ho, wo, _) = grad_out.dim();
    let quarter = T::c(0.25);
    let mut dx = Array3::<T>::zeros((h, w, c));
    for y in 0..ho {
        for x in 0..wo {
            for ch in 0..c {
                let g = grad_out[(y, x, ch)] * quarter;
                dx[(2 * y, 2 * x, ch)] = g;
                dx[(2 * y, 2 * x + 1, ch)] = g;
                dx[(2 * y + 1, 2 * x, ch)] = g;
                dx[(2 * y + 1, 2 * x + 1, ch)] = g;
            }
        }
    }
    dx
}

/// Elementwise max(0, x).
pub(crate) fn relu<T: Real>(x: &Array3<T>) -> Array3<T> {
    x.mapv(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks a gradient by the ReLU derivative of the pre-activation.
pub(crate) fn relu_grad<T: Real>(grad: &Array3<T>, pre: &Array3<T>) -> Array3<T> {
    let mut out = grad.clone();
    out.zip_mut_with(pre, |g, p| {
        if *p <= T::zero() {
            *g = T::zero();
        }
    });
    out
}

/// Mirror image along the horizontal axis (left-right).
pub fn flip_horizontal<T: Real>(x: &Array3<T>) -> Array3<T> {
    let (h, w, c) = x.dim();
    Array3::from_shape_fn((h, w, c), |(y, xx, ch)| x[(y, w - 1 - xx, ch)])
}

/// Mirror image along the vertical axis (top-bottom).
pub fn flip_vertical<T: Real>(x: &Array3<T>) -> Array3<T> {
    let (h, w, c) = x.dim();
    Array3::from_shape_fn((h, w, c), |(y, xx, ch)| x[(h - 1 - y, xx, ch)])
}
