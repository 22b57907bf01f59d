//! Composite Simpson quadrature on (possibly non-uniform) node sets.

/// Simpson's rule over consecutive interval pairs; an odd trailing interval is
/// integrated with the quadratic through the last three nodes.
pub fn simpson(s: &[f64], y: &[f64]) -> f64 {
    assert_eq!(s.len(), y.len());
    let n = s.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (s[1] - s[0]) * (y[0] + y[1]),
        _ => {}
    }
    let intervals = n - 1;
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += simpson_pair(s[i], s[i + 1], s[i + 2], y[i], y[i + 1], y[i + 2]);
        i += 2;
    }
    if intervals % 2 == 1 {
        let k = n - 3;
        total += last_interval(&s[k..], &y[k..]);
    }
    total
}

fn simpson_pair(s0: f64, s1: f64, s2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let h0 = s1 - s0;
    let h1 = s2 - s1;
    let hs = h0 + h1;
    hs / 6.0
        * (y0 * (2.0 - h1 / h0) + y1 * hs * hs / (h0 * h1) + y2 * (2.0 - h0 / h1))
}

// ∫_{s1}^{s2} of the parabola through three nodes.
fn last_interval(s: &[f64], y: &[f64]) -> f64 {
    let h0 = s[1] - s[0];
    let h1 = s[2] - s[1];
    let a = h1 * (3.0 * h0 + 2.0 * h1) / (6.0 * (h0 + h1));
    let b = h1 * (3.0 * h0 + h1) / (6.0 * h0);
    let c = -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    a * y[2] + b * y[1] + c * y[0]
}

/// Node index ranges `[a, b]` separated at nodes that coincide with a
/// breakpoint (within `1e-9`). Breakpoints that are not nodes are ignored.
pub fn segments(s: &[f64], breakpoints: &[f64]) -> Vec<(usize, usize)> {
    let mut cuts = vec![0];
    for (i, &si) in s.iter().enumerate().skip(1).take(s.len().saturating_sub(2)) {
        if breakpoints.iter().any(|b| (si - b).abs() <= 1e-9) {
            cuts.push(i);
        }
    }
    cuts.push(s.len() - 1);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Segment-wise integral of `value(i, seg_mid)` plus a Richardson error
/// estimate against every other node. `seg_mid` lets the integrand pick
/// one-sided values at a breakpoint node.
pub fn integrate_segments(
    s: &[f64],
    segs: &[(usize, usize)],
    mut value: impl FnMut(usize, f64) -> f64,
) -> (f64, f64) {
    let mut fine = 0.0;
    let mut coarse = 0.0;
    let mut halvable = true;
    for &(a, b) in segs {
        let mid = 0.5 * (s[a] + s[b]);
        let ys: Vec<f64> = (a..=b).map(|i| value(i, mid)).collect();
        let ss = &s[a..=b];
        fine += simpson(ss, &ys);
        if (b - a) % 2 == 0 {
            let hs: Vec<f64> = ss.iter().step_by(2).copied().collect();
            let hy: Vec<f64> = ys.iter().step_by(2).copied().collect();
            coarse += simpson(&hs, &hy);
        } else {
            halvable = false;
        }
    }
    let err = if halvable { (fine - coarse).abs() / 15.0 } else { f64::INFINITY };
    (fine, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_cubics_on_uniform_grid() {
        let s: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = s.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = 2f64.powi(4) / 4.0 - 4.0 + 2.0;
        assert!((simpson(&s, &y) - exact).abs() < 1e-13);
    }

    #[test]
    fn exact_for_quadratics_on_nonuniform_odd_grid() {
        let s = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let y: Vec<f64> = s.iter().map(|x| 3.0 * x * x + x).collect();
        assert!((simpson(&s, &y) - 1.5).abs() < 1e-13);
    }

    #[test]
    fn segments_split_at_nodes() {
        let s: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        assert_eq!(segments(&s, &[1.0, 3.0]), vec![(0, 2), (2, 6), (6, 8)]);
        assert_eq!(segments(&s, &[1.2]), vec![(0, 8)]);
    }

    #[test]
    fn richardson_estimate_tracks_error() {
        let s: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0 * std::f64::consts::PI).collect();
        let (v, err) = integrate_segments(&s, &[(0, 16)], |i, _| s[i].sin());
        assert!((v - 2.0).abs() < 2.0 * err + 1e-15);
        assert!(err < 1e-4);
    }
}
