//! Dense kernels over row-major `f64` slices. Reductions use a fixed
//! four-lane accumulation order so results are reproducible bit for bit.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = W x + b` with `W` of shape `out.len() x x.len()`.
#[inline]
pub fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (r, o) in out.iter_mut().enumerate() {
        *o = b[r] + dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `out += W x` with `W` of shape `out.len() x x.len()`.
#[inline]
pub fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out += W^T v` with `W` of shape `v.len() x out.len()`.
#[inline]
pub fn matvec_t_acc(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &vr) in v.iter().enumerate() {
        if vr != 0.0 {
            axpy(vr, &w[r * cols..(r + 1) * cols], out);
        }
    }
}

/// `g += v x^T` with `g` of shape `v.len() x x.len()`.
#[inline]
pub fn outer_acc(g: &mut [f64], v: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &vr) in v.iter().enumerate() {
        if vr != 0.0 {
            axpy(vr, x, &mut g[r * cols..(r + 1) * cols]);
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn l2_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_match_naive_loops() {
        let w: Vec<f64> = (0..15).map(|i| i as f64 * 0.5 - 3.0).collect();
        let x = [1.0, -2.0, 0.5, 3.0, 0.25];
        let b = [0.1, 0.2, 0.3];
        let mut out = [0.0; 3];
        affine(&w, &b, &x, &mut out);
        for r in 0..3 {
            let naive: f64 = b[r] + (0..5).map(|c| w[r * 5 + c] * x[c]).sum::<f64>();
            assert!((out[r] - naive).abs() < 1e-12);
        }
        let v = [1.0, -1.0, 2.0];
        let mut t = [0.0; 5];
        matvec_t_acc(&w, &v, &mut t);
        for c in 0..5 {
            let naive: f64 = (0..3).map(|r| w[r * 5 + c] * v[r]).sum();
            assert!((t[c] - naive).abs() < 1e-12);
        }
        let mut g = vec![0.0; 15];
        outer_acc(&mut g, &v, &x);
        assert_eq!(g[2 * 5 + 3], 2.0 * 3.0);
    }
}
