//! Thin helpers over rustfft for 1D lattices and N-dimensional
//! configuration grids (row-major, last axis fastest).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Angular wavenumbers in FFT order for `n` samples spaced by `h`.
/// The Nyquist bin (even `n`) carries `-pi/h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|j| {
            let m = if j < n.div_ceil(2) { j as i64 } else { j as i64 - n as i64 };
            m as f64 * dk
        })
        .collect()
}

/// Forward/inverse transform of a 1D buffer in place. The inverse is normalized.
pub(crate) fn fft_1d(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    plan(n, inverse).process(data);
    if inverse {
        let s = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Cached plans for a fixed N-dimensional shape.
pub(crate) struct NdFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| plan(n, false)).collect(),
            inverse: shape.iter().map(|&n| plan(n, true)).collect(),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.shape.len() {
            self.along_axis(data, axis, false);
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.shape.len() {
            self.along_axis(data, axis, true);
        }
        let total: usize = self.shape.iter().product();
        let s = 1.0 / total as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn along_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let fft = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
        let scratch_len = fft.get_inplace_scratch_len();
        for_each_line(
            &self.shape,
            data,
            axis,
            || vec![Complex64::default(); scratch_len],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
    }
}

/// Applies `f` to every 1D line of a row-major array along `axis`.
///
/// Strided lines are gathered into contiguous buffers, processed in parallel
/// and scattered back; lines are independent, so the result does not depend
/// on scheduling.
pub(crate) fn for_each_line<S, I, F>(shape: &[usize], data: &mut [Complex64], axis: usize, init: I, f: F)
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &mut [Complex64]) + Sync + Send,
{
    let n = shape[axis];
    if n <= 1 {
        return;
    }
    let stride: usize = shape[axis + 1..].iter().product();
    if stride == 1 {
        data.par_chunks_mut(n).for_each_init(&init, |s, line| f(s, line));
        return;
    }
    let block = n * stride;
    let data_ro: &[Complex64] = data;
    let mut lines: Vec<Complex64> = (0..data_ro.len())
        .into_par_iter()
        .map(|idx| {
            let line = idx / n;
            let k = idx % n;
            let (b, inner) = (line / stride, line % stride);
            data_ro[b * block + inner + k * stride]
        })
        .collect();
    lines.par_chunks_mut(n).for_each_init(&init, |s, line| f(s, line));
    data.par_chunks_mut(block).enumerate().for_each(|(b, chunk)| {
        for inner in 0..stride {
            let start = (b * stride + inner) * n;
            for (k, v) in lines[start..start + n].iter().enumerate() {
                chunk[inner + k * stride] = *v;
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_follow_fft_ordering() {
        let k = wavenumbers(4, 0.5);
        let dk = 2.0 * PI / 2.0;
        assert_eq!(k, vec![0.0, dk, -2.0 * dk, -dk]);
        let k = wavenumbers(5, 1.0);
        assert_eq!(k.len(), 5);
        assert!(k[2] > 0.0 && k[3] < 0.0);
    }

    #[test]
    fn nd_round_trip() {
        let shape = [4, 6, 2];
        let total: usize = shape.iter().product();
        let orig: Vec<Complex64> = (0..total)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut data = orig.clone();
        let nd = NdFft::new(&shape);
        nd.forward(&mut data);
        nd.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
