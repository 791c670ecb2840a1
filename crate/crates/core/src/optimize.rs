//! Derivative-free scalar maximization.

/// (√5 − 1)/2
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_iter` shrink steps.
pub(crate) fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> GoldenResult
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tol && iterations < max_iter {
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
        iterations += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    GoldenResult {
        x,
        value,
        iterations,
        converged: (b - a) <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let r = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-10, 200);
        assert!(r.converged);
        assert!((r.x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn respects_iteration_cap() {
        let r = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-12, 5);
        assert_eq!(r.iterations, 5);
        assert!(!r.converged);
    }

    #[test]
    fn peak_at_bracket_edge() {
        let r = golden_section_max(|x| x, 0.0, 1.0, 1e-9, 200);
        assert!((r.x - 1.0).abs() < 1e-8);
    }
}
