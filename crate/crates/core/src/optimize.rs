//! One-dimensional maximization: coarse grid scan followed by golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `x_tol`. Returns the best point seen and its value.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    // 200 steps shrink any bracket below f64 resolution.
    for _ in 0..200 {
        if (hi - lo).abs() <= x_tol {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximize `f` over the sorted abscissae `grid`, then refine by golden section
/// inside the bracket formed by the best grid point's neighbours. The result is
/// never worse than the best grid value.
pub fn grid_then_golden<F>(f: F, grid: &[f64], x_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    assert!(!grid.is_empty(), "empty grid");
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    refine_from_values(f, grid, &values, x_tol)
}

/// Same as [`grid_then_golden`] with the grid values already evaluated.
pub fn refine_from_values<F>(f: F, grid: &[f64], values: &[f64], x_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    debug_assert_eq!(grid.len(), values.len());
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    if hi <= lo {
        return (grid[best], best_val);
    }
    let (x, fx) = golden_section_max(&f, lo, hi, x_tol);
    if fx >= best_val {
        (x, fx)
    } else {
        (grid[best], best_val)
    }
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(fx.abs() < 1e-12);
    }

    #[test]
    fn grid_stage_escapes_local_maximum() {
        // Two bumps; the taller one sits near 0.8.
        let f = |x: f64| (-(x - 0.2f64).powi(2) * 400.0).exp() + 2.0 * (-(x - 0.8f64).powi(2) * 400.0).exp();
        let grid = linspace(0.0, 1.0, 101);
        let (x, fx) = grid_then_golden(f, &grid, 1e-12);
        assert!((x - 0.8).abs() < 1e-5);
        assert!((fx - 2.0).abs() < 1e-9);
    }

    #[test]
    fn handles_kinked_maximum() {
        let (x, _) = grid_then_golden(|x| -(x - 0.123_456).abs(), &linspace(0.0, 1.0, 17), 1e-12);
        assert!((x - 0.123_456).abs() < 1e-10);
    }

    #[test]
    fn linspace_endpoints_exact() {
        let g = linspace(1e-12, 1.0 - 1e-12, 1024);
        assert_eq!(g[0], 1e-12);
        assert_eq!(g[1023], 1.0 - 1e-12);
    }
}
