//! Gauss rules on the unit segment and collapsed (Duffy) Gauss rules on the reference
//! triangle `(0,0), (1,0), (0,1)`.

use crate::scalar::{Real, Vec2};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed in `f64` by Newton iteration.
fn gauss_legendre_f64(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Debug)]
pub struct SegmentRule<T> {
    /// Parameters in `[0, 1]`.
    pub points: Vec<T>,
    /// Weights summing to 1.
    pub weights: Vec<T>,
    /// Polynomial degree integrated exactly.
    pub order: usize,
}

impl<T: Real> SegmentRule<T> {
    /// `n`-point Gauss–Legendre rule on `[0, 1]`.
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre_f64(n);
        Self {
            points: x.iter().map(|&xi| T::lit(0.5 * (xi + 1.0))).collect(),
            weights: w.iter().map(|&wi| T::lit(0.5 * wi)).collect(),
            order: 2 * n - 1,
        }
    }

    /// Cheapest Gauss rule exact for polynomials of degree `order`.
    pub fn with_order(order: usize) -> Self {
        Self::gauss((order + 2) / 2)
    }

    /// Rule mapped onto the sub-interval `[a, b]` of `[0, 1]`. Weights scale with `b - a`.
    pub fn on_interval(&self, a: T, b: T) -> Self {
        let len = b - a;
        Self {
            points: self.points.iter().map(|&s| a + s * len).collect(),
            weights: self.weights.iter().map(|&w| w * len).collect(),
            order: self.order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct TriangleRule<T> {
    /// Reference coordinates.
    pub points: Vec<Vec2<T>>,
    /// Weights summing to 1/2, the reference area.
    pub weights: Vec<T>,
    pub order: usize,
}

impl<T: Real> TriangleRule<T> {
    /// Collapsed tensor Gauss rule exact for total degree `order`.
    ///
    /// The map `(a, b) -> (a, b (1 - a))` carries the unit square onto the triangle with
    /// Jacobian `1 - a`, so the `a` direction needs one extra degree.
    pub fn with_order(order: usize) -> Self {
        let na = (order + 3) / 2;
        let nb = (order + 2) / 2;
        Self::collapsed(na, nb, order)
    }

    /// Collapsed rule with `n x n` points (exact to degree `2n - 2`).
    pub fn collapsed_square(n: usize) -> Self {
        Self::collapsed(n, n, 2 * n - 2)
    }

    fn collapsed(na: usize, nb: usize, order: usize) -> Self {
        let (xa, wa) = gauss_legendre_f64(na);
        let (xb, wb) = gauss_legendre_f64(nb);
        let mut points = Vec::with_capacity(na * nb);
        let mut weights = Vec::with_capacity(na * nb);
        for (i, &ai) in xa.iter().enumerate() {
            let a = 0.5 * (ai + 1.0);
            for (j, &bj) in xb.iter().enumerate() {
                let b = 0.5 * (bj + 1.0);
                points.push([T::lit(a), T::lit(b * (1.0 - a))]);
                weights.push(T::lit(0.25 * wa[i] * wb[j] * (1.0 - a)));
            }
        }
        Self {
            points,
            weights,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates of point `i`.
    pub fn barycentric(&self, i: usize) -> [T; 3] {
        let [x, y] = self.points[i];
        [T::one() - x - y, x, y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn triangle_monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn segment_rules_exact() {
        for order in 0..=15 {
            let rule = SegmentRule::<f64>::with_order(order);
            assert!(rule.order >= order);
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            for p in 0..=order as i32 {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(p))
                    .sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "order {order} p {p}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact() {
        for order in 0..=14 {
            let rule = TriangleRule::<f64>::with_order(order);
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 0.5).abs() < 1e-14);
            for a in 0..=order as u32 {
                for b in 0..=(order as u32 - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((q - triangle_monomial(a, b)).abs() < 1e-13, "order {order} x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn square_rule_point_counts() {
        assert_eq!(TriangleRule::<f64>::collapsed_square(4).len(), 16);
        assert_eq!(TriangleRule::<f64>::collapsed_square(5).len(), 25);
        let r = TriangleRule::<f64>::collapsed_square(3);
        let bary = r.barycentric(2);
        assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
