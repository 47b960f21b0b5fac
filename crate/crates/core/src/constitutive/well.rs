use std::sync::Arc;

/// A double-well potential together with an exact secant slope.
///
/// `divided_difference(a, b)` must satisfy `H(a, b) (a - b) = W(a) - W(b)` to
/// round-off for every pair, and `H(a, a) = W'(a)`. The discrete energy telescope
/// of the time step relies on that identity, so implementations should not fall
/// back to the naive quotient near the diagonal.
pub trait DoubleWell: Send + Sync {
    fn value(&self, phi: f64) -> f64;
    fn derivative(&self, phi: f64) -> f64;
    fn divided_difference(&self, a: f64, b: f64) -> f64;
    /// `∂H/∂a`, used by the Newton linearization.
    fn divided_difference_da(&self, a: f64, b: f64) -> f64;
}

/// `W(φ) = (1 - φ²)² / 4` on `|φ| ≤ 2`, continued C¹ by straight lines of slope `±6`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuarticLinearWell;

const BREAK: f64 = 2.0;
const W_AT_BREAK: f64 = 2.25;
const SLOPE_AT_BREAK: f64 = 6.0;

/// -1: left linear tail, 0: quartic core, 1: right linear tail.
fn piece(phi: f64) -> i8 {
    if phi < -BREAK {
        -1
    } else if phi > BREAK {
        1
    } else {
        0
    }
}

fn quartic_h(a: f64, b: f64) -> f64 {
    (a + b) * (a * a + b * b - 2.0) * 0.25
}

/// Slope of `W` restricted to a single piece between `a` and `b`.
fn piece_h(p: i8, a: f64, b: f64) -> f64 {
    match p {
        0 => quartic_h(a, b),
        s => f64::from(s) * SLOPE_AT_BREAK,
    }
}

impl DoubleWell for QuarticLinearWell {
    fn value(&self, phi: f64) -> f64 {
        match piece(phi) {
            0 => {
                let s = 1.0 - phi * phi;
                0.25 * s * s
            }
            _ => W_AT_BREAK + SLOPE_AT_BREAK * (phi.abs() - BREAK),
        }
    }

    fn derivative(&self, phi: f64) -> f64 {
        match piece(phi) {
            0 => (phi * phi - 1.0) * phi,
            s => f64::from(s) * SLOPE_AT_BREAK,
        }
    }

    fn divided_difference(&self, a: f64, b: f64) -> f64 {
        let (pa, pb) = (piece(a), piece(b));
        if pa == pb {
            return piece_h(pa, a, b);
        }
        // Split [lo, hi] at the breakpoints it crosses and average the per-piece
        // slopes weighted by sub-interval length; each slope is exact on its piece.
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut knots = vec![lo];
        for x in [-BREAK, BREAK] {
            if lo < x && x < hi {
                knots.push(x);
            }
        }
        knots.push(hi);
        let mut rise = 0.0;
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            rise += piece_h(piece(mid), w[0], w[1]) * (w[1] - w[0]);
        }
        rise / (hi - lo)
    }

    fn divided_difference_da(&self, a: f64, b: f64) -> f64 {
        let (pa, pb) = (piece(a), piece(b));
        if pa == pb {
            return match pa {
                0 => (3.0 * a * a + 2.0 * a * b + b * b - 2.0) * 0.25,
                _ => 0.0,
            };
        }
        (self.derivative(a) - self.divided_difference(a, b)) / (a - b)
    }
}

/// A well given by plain closures, with the secant slope computed as the naive
/// quotient. Useful for experiments; it does not preserve the secant identity near
/// the diagonal.
#[derive(Clone)]
pub struct NaiveWell {
    pub w: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub wp: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl NaiveWell {
    pub fn new(
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        wp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        NaiveWell {
            w: Arc::new(w),
            wp: Arc::new(wp),
        }
    }
}

impl DoubleWell for NaiveWell {
    fn value(&self, phi: f64) -> f64 {
        (self.w)(phi)
    }

    fn derivative(&self, phi: f64) -> f64 {
        (self.wp)(phi)
    }

    fn divided_difference(&self, a: f64, b: f64) -> f64 {
        if a == b {
            (self.wp)(a)
        } else {
            ((self.w)(a) - (self.w)(b)) / (a - b)
        }
    }

    fn divided_difference_da(&self, a: f64, b: f64) -> f64 {
        if a == b {
            let s = 1e-6 * (1.0 + a.abs());
            ((self.wp)(a + s) - (self.wp)(a - s)) / (4.0 * s)
        } else {
            ((self.wp)(a) - self.divided_difference(a, b)) / (a - b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const W: QuarticLinearWell = QuarticLinearWell;

    fn identity_gap(a: f64, b: f64) -> f64 {
        let lhs = W.divided_difference(a, b) * (a - b);
        let rhs = W.value(a) - W.value(b);
        (lhs - rhs).abs() / (1.0 + W.value(a).abs() + W.value(b).abs())
    }

    #[test]
    fn diagonal_and_symmetric_examples() {
        assert_eq!(W.divided_difference(0.5, 0.5), -0.375);
        assert_eq!(W.divided_difference(1.0, -1.0), 0.0);
    }

    #[test]
    fn secant_at_unequal_points() {
        // W(1.2) - W(0.3) in exact decimal: ((1-1.44)^2 - (1-0.09)^2)/4
        let exact = (0.1936 - 0.8281) / 4.0;
        let x = W.divided_difference(1.2, 0.3);
        assert!((x * 0.9 - exact).abs() <= 1e-14 * (1.0 + exact.abs()));
        assert!(identity_gap(1.2, 0.3) <= 1e-14);
    }

    #[test]
    fn continuity_at_breakpoints() {
        for x in [-2.0, 2.0] {
            let e: f64 = 1e-12;
            assert!((W.value(x + e) - W.value(x - e)).abs() < 1e-10);
            assert!((W.derivative(x + e) - W.derivative(x - e)).abs() < 1e-10);
        }
        assert_eq!(W.value(2.0), 2.25);
        assert_eq!(W.derivative(-2.0), -6.0);
    }

    #[test]
    fn mixed_piece_pairs_are_exact() {
        for &(a, b) in &[(-3.0, 3.0), (2.5, 0.1), (-2.5, -1.9), (1.0, 4.0), (-7.0, 2.0)] {
            assert!(identity_gap(a, b) <= 1e-14, "({a}, {b})");
            assert!(identity_gap(b, a) <= 1e-14, "({b}, {a})");
        }
    }

    #[test]
    fn naive_quotient_loses_the_identity_near_the_diagonal() {
        let naive = NaiveWell::new(|x| W.value(x), |x| W.derivative(x));
        let a = 0.7;
        let b = a + 1e-14;
        let exact = W.divided_difference(a, b);
        let rough = naive.divided_difference(a, b);
        assert!((exact - W.derivative(a)).abs() < 1e-11);
        assert!((rough - exact).abs() > 1e-6);
    }

    #[test]
    fn da_matches_finite_difference() {
        for &(a, b) in &[(0.3, -0.8), (1.9, 2.4), (-2.6, 0.0), (0.2, 0.2)] {
            let s = 1e-6;
            let fd = (W.divided_difference(a + s, b) - W.divided_difference(a - s, b)) / (2.0 * s);
            assert!((fd - W.divided_difference_da(a, b)).abs() < 1e-6, "({a}, {b})");
        }
    }

    proptest! {
        #[test]
        fn secant_identity_holds(a in -4.0f64..4.0, b in -4.0f64..4.0) {
            prop_assert!(identity_gap(a, b) <= 1e-14);
        }

        #[test]
        fn secant_identity_holds_near_diagonal(a in -3.0f64..3.0, e in -1e-12f64..1e-12) {
            prop_assert!(identity_gap(a, a + e) <= 1e-14);
        }
    }
}
