//! Reference Raviart–Thomas and broken `P_k` elements on the triangle `(0,0), (1,0), (0,1)`.
//!
//! The RT_k basis is obtained by inverting the generalized Vandermonde matrix of the degrees
//! of freedom applied to a monomial spanning set of `[P_k]^2 + x (homogeneous P_k)`:
//!
//! * edge moments `∫_e (v·n) L_j(s) ds`, `j = 0..=k`, with `L_j` the orthonormal shifted
//!   Legendre polynomials on `[0, 1]` and `s` running along the counterclockwise traversal;
//! * interior moments `∫_K v_c x^a y^b dx` for `a + b <= k - 1`, `c ∈ {x, y}`.
//!
//! Local ordering: edge 0 moments, edge 1 moments, edge 2 moments, then interior moments.

use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};
use crate::fe_space::quadrature::{SegmentRule, TriangleRule};
use crate::mesh::reference_vertex;
use crate::scalar::{Mat2, Real, Vec2};

pub const SUPPORTED_DEGREES: [usize; 2] = [1, 2];

pub(crate) fn check_degree(k: usize) -> Result<()> {
    if SUPPORTED_DEGREES.contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedDegree(k))
    }
}

/// Exponent pairs `(a, b)` of all monomials `x^a y^b` with `a + b <= degree`, grouped by
/// total degree.
pub(crate) fn monomials(degree: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for d in 0..=degree as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn ipow<T: Real>(x: T, e: u32) -> T {
    let mut r = T::one();
    for _ in 0..e {
        r *= x;
    }
    r
}

/// Orthonormal shifted Legendre polynomial `sqrt(2j+1) P_j(2s - 1)` on `[0, 1]`.
pub fn legendre<T: Real>(j: usize, s: T) -> T {
    let x = T::lit(2.0) * s - T::one();
    let (mut p0, mut p1) = (T::one(), x);
    let p = match j {
        0 => p0,
        1 => p1,
        _ => {
            for n in 2..=j {
                let nf = T::from_usize_lossy(n);
                let p2 = ((T::lit(2.0) * nf - T::one()) * x * p1 - (nf - T::one()) * p0) / nf;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    p * T::from_usize_lossy(2 * j + 1).sqrt()
}

/// Values, Jacobian (`jac[i][j] = ∂v_i/∂x_j`) and divergence of one vector basis function.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VectorEval<T> {
    pub value: Vec2<T>,
    pub grad: Mat2<T>,
    pub div: T,
}

impl<T: Real> VectorEval<T> {
    pub fn zero() -> Self {
        Self {
            value: [T::zero(); 2],
            grad: [[T::zero(); 2]; 2],
            div: T::zero(),
        }
    }

    pub fn scaled(self, s: T) -> Self {
        Self {
            value: self.value.map(|x| x * s),
            grad: self.grad.map(|r| r.map(|x| x * s)),
            div: self.div * s,
        }
    }
}

/// Monomial values and first derivatives at one point.
struct MonomialTable<T> {
    v: Vec<T>,
    dx: Vec<T>,
    dy: Vec<T>,
}

impl<T: Real> MonomialTable<T> {
    /// Monomials in coordinates centred at the reference centroid, which keeps the nodal
    /// basis coefficients small and its evaluation well conditioned.
    fn new(exps: &[(u32, u32)], p: Vec2<T>) -> Self {
        let third = T::one() / T::lit(3.0);
        let p = [p[0] - third, p[1] - third];
        let n = exps.len();
        let mut v = Vec::with_capacity(n);
        let mut dx = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for &(a, b) in exps {
            let xa = ipow(p[0], a);
            let yb = ipow(p[1], b);
            v.push(xa * yb);
            dx.push(if a > 0 {
                T::from_usize_lossy(a as usize) * ipow(p[0], a - 1) * yb
            } else {
                T::zero()
            });
            dy.push(if b > 0 {
                T::from_usize_lossy(b as usize) * xa * ipow(p[1], b - 1)
            } else {
                T::zero()
            });
        }
        Self { v, dx, dy }
    }
}

/// Vector polynomial stored by its monomial coefficients per component.
#[derive(Clone, Debug)]
struct VecPoly<T> {
    cx: Vec<T>,
    cy: Vec<T>,
}

impl<T: Real> VecPoly<T> {
    fn eval(&self, t: &MonomialTable<T>) -> VectorEval<T> {
        let mut e = VectorEval::zero();
        for m in 0..self.cx.len() {
            let (cx, cy) = (self.cx[m], self.cy[m]);
            e.value[0] += cx * t.v[m];
            e.value[1] += cy * t.v[m];
            e.grad[0][0] += cx * t.dx[m];
            e.grad[0][1] += cx * t.dy[m];
            e.grad[1][0] += cy * t.dx[m];
            e.grad[1][1] += cy * t.dy[m];
        }
        e.div = e.grad[0][0] + e.grad[1][1];
        e
    }
}

/// Reference edge `i` (opposite vertex `i`): start point, end point, unit outward normal, length.
pub(crate) fn reference_edge<T: Real>(i: usize) -> (Vec2<T>, Vec2<T>, Vec2<T>, T) {
    let a = reference_vertex::<T>((i + 1) % 3);
    let b = reference_vertex::<T>((i + 2) % 3);
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    // counterclockwise traversal: outward normal is the tangent rotated clockwise
    (a, b, [t[1] / len, -t[0] / len], len)
}

/// Reference RT_k element with its nodal (DOF-dual) basis.
#[derive(Clone, Debug)]
pub struct RtReference<T> {
    degree: usize,
    exps: Vec<(u32, u32)>,
    basis: Vec<VecPoly<T>>,
}

impl<T: Real> RtReference<T> {
    pub fn new(degree: usize) -> Result<Self> {
        check_degree(degree)?;
        let k = degree;
        let exps = monomials(k + 1);
        let nm = exps.len();
        let index_of = |a: u32, b: u32| exps.iter().position(|&e| e == (a, b)).unwrap();

        // spanning set: [P_k]^2 plus x * (homogeneous P_k), in centred coordinates
        let mut prime = Vec::new();
        for &(a, b) in exps.iter().filter(|(a, b)| (a + b) as usize <= k) {
            let m = index_of(a, b);
            let mut px = VecPoly {
                cx: vec![T::zero(); nm],
                cy: vec![T::zero(); nm],
            };
            px.cx[m] = T::one();
            prime.push(px);
            let mut py = VecPoly {
                cx: vec![T::zero(); nm],
                cy: vec![T::zero(); nm],
            };
            py.cy[m] = T::one();
            prime.push(py);
        }
        for &(a, b) in exps.iter().filter(|(a, b)| (a + b) as usize == k) {
            let mut p = VecPoly {
                cx: vec![T::zero(); nm],
                cy: vec![T::zero(); nm],
            };
            p.cx[index_of(a + 1, b)] = T::one();
            p.cy[index_of(a, b + 1)] = T::one();
            prime.push(p);
        }
        let ndof = (k + 1) * (k + 3);
        debug_assert_eq!(prime.len(), ndof);

        let this = Self {
            degree,
            exps: exps.clone(),
            basis: prime,
        };
        // vandermonde[i][j] = dof_i(prime_j)
        let columns: Vec<Vec<T>> = (0..ndof)
            .map(|j| this.apply_dofs(|p| this.basis[j].eval(&MonomialTable::new(&exps, p)).value, 2 * k + 2))
            .collect();
        let vandermonde = Mat::<T>::from_fn(ndof, ndof, |i, j| columns[j][i]);
        let identity = Mat::<T>::identity(ndof, ndof);
        let lu = vandermonde.partial_piv_lu();
        let mut inv = lu.solve(&identity);
        // one step of iterative refinement
        let residual = &identity - &vandermonde * &inv;
        inv += lu.solve(&residual);

        let basis = (0..ndof)
            .map(|j| {
                let mut p = VecPoly {
                    cx: vec![T::zero(); nm],
                    cy: vec![T::zero(); nm],
                };
                for m in 0..ndof {
                    let c = inv[(m, j)];
                    for q in 0..nm {
                        p.cx[q] += c * this.basis[m].cx[q];
                        p.cy[q] += c * this.basis[m].cy[q];
                    }
                }
                p
            })
            .collect();
        Ok(Self {
            degree,
            exps,
            basis,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(k+1)(k+3)`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n_edge_dofs(&self) -> usize {
        self.degree + 1
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.degree * (self.degree + 1)
    }

    /// Evaluates every basis function at a reference point.
    pub fn eval(&self, p: Vec2<T>) -> Vec<VectorEval<T>> {
        let t = MonomialTable::new(&self.exps, p);
        self.basis.iter().map(|b| b.eval(&t)).collect()
    }

    /// Applies all local degrees of freedom to a vector field on the reference cell, using
    /// quadrature exact to degree `order`.
    pub fn apply_dofs(&self, field: impl Fn(Vec2<T>) -> Vec2<T>, order: usize) -> Vec<T> {
        let k = self.degree;
        let mut out = Vec::with_capacity((k + 1) * (k + 3));
        let seg = SegmentRule::<T>::with_order(order);
        for e in 0..3 {
            let (a, b, n, len) = reference_edge::<T>(e);
            for j in 0..=k {
                let mut acc = T::zero();
                for (&s, &w) in seg.points.iter().zip(&seg.weights) {
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    let v = field(p);
                    acc += w * len * (v[0] * n[0] + v[1] * n[1]) * legendre(j, s);
                }
                out.push(acc);
            }
        }
        out.extend(self.apply_interior_dofs(&field, order));
        out
    }

    /// Interior moments only, against `x^a y^b e_c` with `a + b <= k - 1`.
    pub fn apply_interior_dofs(&self, field: impl Fn(Vec2<T>) -> Vec2<T>, order: usize) -> Vec<T> {
        let k = self.degree;
        let tri = TriangleRule::<T>::with_order(order);
        let values: Vec<Vec2<T>> = tri.points.iter().map(|&p| field(p)).collect();
        let mut out = Vec::with_capacity(k * (k + 1));
        for (a, b) in monomials(k - 1) {
            for c in 0..2 {
                let mut acc = T::zero();
                for (q, &p) in tri.points.iter().enumerate() {
                    acc += tri.weights[q] * values[q][c] * ipow(p[0], a) * ipow(p[1], b);
                }
                out.push(acc);
            }
        }
        out
    }
}

/// Reference broken `P_k` element with monomial basis `x^a y^b`, `a + b <= k`.
#[derive(Clone, Debug)]
pub struct ScalarReference {
    degree: usize,
    exps: Vec<(u32, u32)>,
}

impl ScalarReference {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            exps: monomials(degree),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(k+1)(k+2)/2`.
    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn eval<T: Real>(&self, p: Vec2<T>) -> Vec<T> {
        self.exps
            .iter()
            .map(|&(a, b)| ipow(p[0], a) * ipow(p[1], b))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(RtReference::<f64>::new(1).unwrap().dim(), 8);
        assert_eq!(RtReference::<f64>::new(2).unwrap().dim(), 15);
        assert!(matches!(RtReference::<f64>::new(3), Err(Error::UnsupportedDegree(3))));
        assert!(RtReference::<f64>::new(0).is_err());
        assert_eq!(ScalarReference::new(2).dim(), 6);
    }

    #[test]
    fn legendre_orthonormal() {
        let rule = SegmentRule::<f64>::with_order(8);
        for i in 0..3 {
            for j in 0..3 {
                let ip: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| w * legendre(i, s) * legendre(j, s))
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-14);
            }
        }
        // reversal symmetry L_j(1 - s) = (-1)^j L_j(s)
        for j in 0..3 {
            let s = 0.3_f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert!((legendre(j, 1.0 - s) - sign * legendre(j, s)).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_edges_outward() {
        for e in 0..3 {
            let (a, b, n, _) = reference_edge::<f64>(e);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let c = [1.0 / 3.0, 1.0 / 3.0];
            assert!((mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1] > 0.0);
        }
    }
}
