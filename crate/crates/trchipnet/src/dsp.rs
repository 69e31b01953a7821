//! Small complex-valued DSP kernels shared by the channel, precoding and
//! link-simulation layers: linear convolution (direct or FFT, picked by
//! size), signal energy, peak search, sliding window sums, and decibel
//! conversions.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    // Plan cache. rustfft plans are deterministic for a given length, so the
    // per-thread cache only affects speed, never values.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Linear convolution `out[n] = Σ_k a[k]·b[n−k]`.
///
/// Output length is `a.len() + b.len() − 1`; convolving with an empty
/// sequence yields an empty sequence. Uses the direct sum for short kernels
/// and an FFT overlap-free full-length product otherwise.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let cost = a.len().saturating_mul(b.len());
    if cost <= 8192 || a.len().min(b.len()) <= 24 {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

fn convolve_direct(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    // Iterate with the shorter sequence as the kernel for cache friendliness.
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (k, &s) in short.iter().enumerate() {
        if s == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (n, &l) in long.iter().enumerate() {
            out[k + n] += s * l;
        }
    }
    out
}

fn convolve_fft(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa = vec![Complex64::new(0.0, 0.0); size];
    let mut fb = vec![Complex64::new(0.0, 0.0); size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        fwd.process(&mut fa);
        fwd.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(fb.iter()) {
            *x *= y;
        }
        inv.process(&mut fa);
    });
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    for x in &mut fa {
        *x *= scale;
    }
    fa
}

/// In-place unnormalised DFT (`inverse = false`) or inverse DFT
/// (`inverse = true`), rustfft conventions: round-tripping multiplies by
/// `x.len()`, so callers apply their own scaling.
pub fn fft_in_place(x: &mut [Complex64], inverse: bool) {
    if x.len() <= 1 {
        return;
    }
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(x.len())
        } else {
            planner.plan_fft_forward(x.len())
        };
        plan.process(x);
    });
}

/// Sum of `|x[n]|²` over the whole sequence.
pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|s| s.norm_sqr()).sum()
}

/// Index of the sample with the largest magnitude (first index on ties).
/// Returns `None` for an empty sequence.
pub fn peak_index(x: &[Complex64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in x.iter().enumerate() {
        let m = s.norm_sqr();
        match best {
            Some((_, bm)) if m <= bm => {}
            _ => best = Some((i, m)),
        }
    }
    best.map(|(i, _)| i)
}

/// Sliding sum of `width` consecutive samples:
/// `out[u] = Σ_{v=0}^{width−1} x[u−v]` for `u` in `0 .. x.len()+width−1`
/// (out-of-range terms are zero). Equivalent to convolving with a length-
/// `width` all-ones kernel.
pub fn sliding_sum(x: &[Complex64], width: usize) -> Vec<Complex64> {
    assert!(width >= 1, "sliding_sum width must be >= 1");
    if x.is_empty() {
        return Vec::new();
    }
    let out_len = x.len() + width - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    // Direct windowed sums: numerically safer than a running cumulative sum
    // (no long-range cancellation) and still cheap for the widths used here.
    for u in 0..out_len {
        let lo = (u + 1).saturating_sub(width);
        let hi = (u + 1).min(x.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for &v in &x[lo..hi] {
            acc += v;
        }
        out[u] = acc;
    }
    out
}

/// `10^(db/10)` — decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10·log10(linear)` — linear power ratio to decibels.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Transmit/receive power: dBm to milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// Transmit/receive power: milliwatts to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}
