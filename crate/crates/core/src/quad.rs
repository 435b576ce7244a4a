//! Globally adaptive 15-point Gauss–Kronrod quadrature for complex-valued
//! integrands on finite intervals.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    /// Uniform panels before any refinement. Oscillatory integrands want
    /// roughly one panel per period.
    pub initial_panels: usize,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { initial_panels: 16, abs_tol: 1e-12, max_panels: 1 << 20 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: Complex64,
    /// Sum over panels of |Kronrod − Gauss|.
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[i];
        if i % 2 == 1 {
            g += s * WG[i / 2];
        }
    }
    let value = k * h;
    let error = ((k - g) * h).norm();
    Panel { a, b, value, error }
}

/// ∫ₐᵇ f(x) dx, refined until the summed error estimate is below `abs_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Quadrature>
where
    F: Fn(f64) -> Complex64,
{
    if a == b {
        return Ok(Quadrature { value: Complex64::new(0.0, 0.0), error: 0.0, panels: 0 });
    }
    let n0 = opts.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    let mut total_err = 0.0;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { a + width * (i + 1) as f64 };
        let p = kronrod(&f, lo, hi);
        total_err += p.error;
        heap.push(p);
    }
    while total_err > opts.abs_tol && heap.len() < opts.max_panels {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // recompute from scratch; the running total accumulates cancellation
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let panels = heap.len();
    for p in heap.into_vec() {
        value += p.value;
        error += p.error;
    }
    if error > opts.abs_tol {
        return Err(Error::Quadrature { estimated_error: error, tolerance: opts.abs_tol });
    }
    Ok(Quadrature { value, error, panels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x| Complex64::new(x * x, -x), 0.0, 3.0, QuadOptions::default()).unwrap();
        assert!((q.value.re - 9.0).abs() < 1e-13);
        assert!((q.value.im + 4.5).abs() < 1e-13);
    }

    #[test]
    fn gaussian_and_oscillation() {
        // ∫ e^{-x²/2} e^{ikx} dx over R = √(2π) e^{-k²/2}
        let k = 7.0;
        let opts = QuadOptions { initial_panels: 64, abs_tol: 1e-13, ..Default::default() };
        let q = integrate(|x| Complex64::new(0.0, k * x).exp() * (-0.5 * x * x).exp(), -14.0, 14.0, opts).unwrap();
        let exact = (2.0 * core::f64::consts::PI).sqrt() * (-0.5 * k * k).exp();
        assert!((q.value.re - exact).abs() < 1e-12);
        assert!(q.value.im.abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions { initial_panels: 1, abs_tol: 1e-14, max_panels: 4 };
        let err = integrate(|x| Complex64::new((50.0 * x).sin(), 0.0), 0.0, 10.0, opts);
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }
}
