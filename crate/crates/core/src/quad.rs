//! Small quadrature helpers shared by the solvers.

/// Composite Simpson rule on `[a, b]` with `n` (even) sub-intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "simpson needs an even number of intervals"
    );
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Trapezoid rule for samples on a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])) * h,
    }
}

/// Linear interpolation of nodal values `v` at `x_i = i * h`, zero outside `[0, (n-1) h]`.
#[inline]
pub fn interp_uniform(v: &[f64], h: f64, x: f64) -> f64 {
    if x < 0.0 || v.is_empty() {
        return 0.0;
    }
    let t = x / h;
    let i = t.floor() as usize;
    if i + 1 >= v.len() {
        return if i + 1 == v.len() && (t - i as f64) < 1e-12 {
            v[i]
        } else {
            0.0
        };
    }
    let w = t - i as f64;
    v[i] * (1.0 - w) + v[i + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_hits_nodes_and_vanishes_outside() {
        let v = [0.0, 1.0, 4.0];
        assert_eq!(interp_uniform(&v, 0.5, 0.5), 1.0);
        assert_eq!(interp_uniform(&v, 0.5, 0.75), 2.5);
        assert_eq!(interp_uniform(&v, 0.5, 1.0), 4.0);
        assert_eq!(interp_uniform(&v, 0.5, 1.01), 0.0);
        assert_eq!(interp_uniform(&v, 0.5, -0.1), 0.0);
    }
}
