//! Raviart–Thomas interpolation and the elementwise L² projection onto broken `P_k`.

use faer::prelude::*;
use faer::Mat;

use crate::fe_space::quadrature::{SegmentRule, TriangleRule};
use crate::fe_space::reference::legendre;
use crate::fe_space::space::{CoefVec, DgSpace, RtSpace};
use crate::scalar::{mat_vec, Real, Vec2};

/// `Π_RT u`: edge moments of `u·n_F` against `P_k(F)` and interior moments against
/// `[P_{k-1}]^2`, both with quadrature of degree `2k + 14` (the moments of a non-polynomial
/// field must be near-exact for the commuting property to hold at roundoff level).
///
/// Boundary edge dofs are taken from `u` when `enforce_boundary` is set and zeroed otherwise.
pub fn rt_interpolate<T: Real>(
    u: impl Fn(Vec2<T>) -> Vec2<T>,
    space: &RtSpace<T>,
    enforce_boundary: bool,
) -> CoefVec<T> {
    let k = space.degree();
    let order = 2 * k + 14;
    let mesh = space.mesh();
    let mut out = space.zeros();
    let seg = SegmentRule::<T>::with_order(order);
    let vals = out.values_mut();

    for (f, facet) in mesh.facets().iter().enumerate() {
        if facet.is_boundary() && !enforce_boundary {
            continue;
        }
        let a = mesh.vertices()[facet.vertices[0]];
        let b = mesh.vertices()[facet.vertices[1]];
        for (j, d) in space.facet_dofs(f).enumerate() {
            let mut acc = T::zero();
            for (&s, &w) in seg.points.iter().zip(&seg.weights) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let ux = u(x);
                acc += w * facet.length * (ux[0] * facet.normal[0] + ux[1] * facet.normal[1]) * legendre(j, s);
            }
            vals[d] = acc;
        }
    }

    let reference = space.reference();
    let n_edge = 3 * reference.n_edge_dofs();
    for c in 0..mesh.n_cells() {
        let g = mesh.geometry(c);
        // contravariant pullback û = det J · J⁻¹ u∘F
        let pulled = |xi: Vec2<T>| mat_vec(&g.inverse, u(g.map(xi))).map(|x| x * g.det);
        let moments = reference.apply_interior_dofs(pulled, order);
        for (j, m) in moments.into_iter().enumerate() {
            vals[space.cell_dofs(c)[n_edge + j]] = m;
        }
    }
    out
}

/// `π_h^k g`: elementwise L² projection onto the broken polynomial space.
pub fn l2_project_scalar<T: Real>(g: impl Fn(Vec2<T>) -> T, space: &DgSpace<T>, order: usize) -> CoefVec<T> {
    let rule = TriangleRule::<T>::with_order(order.max(2 * space.degree()));
    let reference = space.reference();
    let n = reference.dim();
    let basis: Vec<Vec<T>> = rule.points.iter().map(|&p| reference.eval(p)).collect();
    // the scalar basis is a pure pullback, so the cell mass matrix is det J times this one
    let ref_mass = Mat::<T>::from_fn(n, n, |i, j| {
        rule.weights
            .iter()
            .zip(&basis)
            .map(|(&w, b)| w * b[i] * b[j])
            .sum()
    });
    let lu = ref_mass.partial_piv_lu();

    let mesh = space.mesh();
    let mut out = CoefVec::zeros(space.tag());
    for c in 0..mesh.n_cells() {
        let geom = mesh.geometry(c);
        let vals: Vec<T> = rule.points.iter().map(|&p| g(geom.map(p))).collect();
        let rhs = Mat::<T>::from_fn(n, 1, |i, _| {
            rule.weights
                .iter()
                .zip(&basis)
                .zip(&vals)
                .map(|((&w, b), &v)| w * b[i] * v)
                .sum()
        });
        let x = lu.solve(rhs);
        for (i, d) in space.cell_dofs(c).enumerate() {
            out.values_mut()[d] = x[(i, 0)];
        }
    }
    out
}
