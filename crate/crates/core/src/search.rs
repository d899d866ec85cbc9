//! One-dimensional golden-section search with a coarse grid pre-scan.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Argument tolerance used by every 1-D search in the crate.
pub const ARG_TOL: f64 = 1e-10;

/// Maximizes `f` on `[lo, hi]`.
///
/// The interval is first sampled at `grid + 1` evenly spaced points; the
/// golden-section refinement then runs on the two cells around the best
/// sample. Returns `(argmax, max)`. For unimodal `f` the result is the global
/// maximum to within `tol` in the argument; the grid keeps flat stretches from
/// trapping the bracket.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    assert!(lo <= hi, "empty interval [{lo}, {hi}]");
    if hi - lo <= tol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let grid = grid.max(2);
    let h = (hi - lo) / grid as f64;
    let mut best = (lo, f(lo));
    let mut best_k = 0;
    for k in 1..=grid {
        let x = if k == grid { hi } else { lo + h * k as f64 };
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
            best_k = k;
        }
    }
    let mut a = if best_k == 0 { lo } else { lo + h * (best_k - 1) as f64 };
    let mut b = if best_k == grid { hi } else { lo + h * (best_k + 1) as f64 };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimizes `f` on `[lo, hi]`; see [`golden_max`].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), lo, hi, grid, tol);
    (x, -v)
}
