use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Unnormalized 1-D transform of `data` in place.
pub fn fft_inplace(data: &mut [Complex64], dir: Direction) {
    let fft = plan(data.len(), dir);
    fft.process(data);
}

/// Unnormalized 2-D transform of an `n × n` array in the crate layout.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, dir: Direction) {
    let fft = plan(n, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // contiguous axis
    fft.process_with_scratch(data, &mut scratch);
    // strided axis, through a transpose
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(data, &mut t, n);
    fft.process_with_scratch(&mut t, &mut scratch);
    transpose(&t, data, n);
}

/// Unnormalized transform along the strided (first) axis only.
pub(crate) fn fft_axis0(data: &mut [Complex64], n: usize, dir: Direction) {
    let fft = plan(n, dir);
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(data, &mut t, n);
    fft.process(&mut t);
    transpose(&t, data, n);
}

pub(crate) fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for a0 in (0..n).step_by(B) {
        for b0 in (0..n).step_by(B) {
            for a in a0..(a0 + B).min(n) {
                for b in b0..(b0 + B).min(n) {
                    dst[b * n + a] = src[a * n + b];
                }
            }
        }
    }
}

/// `e^{2πik/n}` for `k = 0..n`.
pub(crate) fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}
