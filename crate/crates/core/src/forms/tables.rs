//! Basis functions tabulated once per assembler at cell and facet quadrature points.

use crate::fe_space::{RtSpace, SegmentRule, TriangleRule, VectorEval};
use crate::scalar::Real;

/// Signed physical basis values on every cell at the points of one triangle rule.
#[derive(Clone, Debug)]
pub(crate) struct CellTable<T> {
    pub rule: TriangleRule<T>,
    pub nq: usize,
    pub ld: usize,
    /// quadrature weight times `det J`, indexed `c * nq + q`
    pub weights: Vec<T>,
    basis: Vec<VectorEval<T>>,
}

impl<T: Real> CellTable<T> {
    pub fn new(space: &RtSpace<T>, order: usize) -> Self {
        let rule = TriangleRule::<T>::with_order(order);
        let mesh = space.mesh();
        let nq = rule.len();
        let ld = space.local_dim();
        let reference: Vec<Vec<VectorEval<T>>> = rule.points.iter().map(|&p| space.reference().eval(p)).collect();
        let nc = mesh.n_cells();
        let mut weights = Vec::with_capacity(nc * nq);
        let mut basis = Vec::with_capacity(nc * nq * ld);
        for c in 0..nc {
            let g = mesh.geometry(c);
            let signs = space.cell_signs(c);
            for q in 0..nq {
                weights.push(rule.weights[q] * g.det);
                for (e, &s) in reference[q].iter().zip(signs) {
                    basis.push(crate::fe_space::piola::piola_unchecked(g, e).scaled(s));
                }
            }
        }
        Self {
            rule,
            nq,
            ld,
            weights,
            basis,
        }
    }

    #[inline]
    pub fn basis(&self, c: usize, q: usize) -> &[VectorEval<T>] {
        let start = (c * self.nq + q) * self.ld;
        &self.basis[start..start + self.ld]
    }
}

/// Signed physical basis traces of both neighbours at the points of a fixed Gauss rule on
/// every facet. Boundary facets carry zero minus-side traces.
#[derive(Clone, Debug)]
pub(crate) struct FacetTable<T> {
    pub rule: SegmentRule<T>,
    pub nq: usize,
    pub ld: usize,
    plus: Vec<VectorEval<T>>,
    minus: Vec<VectorEval<T>>,
}

impl<T: Real> FacetTable<T> {
    pub fn new(space: &RtSpace<T>, n_points: usize) -> Self {
        let rule = SegmentRule::<T>::gauss(n_points);
        let mesh = space.mesh();
        let nq = rule.len();
        let ld = space.local_dim();
        let nf = mesh.n_facets();
        let mut plus = Vec::with_capacity(nf * nq * ld);
        let mut minus = Vec::with_capacity(nf * nq * ld);
        for (f, facet) in mesh.facets().iter().enumerate() {
            for &s in &rule.points {
                plus.extend(side_basis(space, f, facet.plus_cell, s));
                match facet.minus_cell {
                    Some(c) => minus.extend(side_basis(space, f, c, s)),
                    None => minus.extend(std::iter::repeat_n(VectorEval::zero(), ld)),
                }
            }
        }
        Self {
            rule,
            nq,
            ld,
            plus,
            minus,
        }
    }

    #[inline]
    pub fn plus(&self, f: usize) -> &[VectorEval<T>] {
        let start = f * self.nq * self.ld;
        &self.plus[start..start + self.nq * self.ld]
    }

    #[inline]
    pub fn minus(&self, f: usize) -> &[VectorEval<T>] {
        let start = f * self.nq * self.ld;
        &self.minus[start..start + self.nq * self.ld]
    }
}

/// Basis of `cell` at the point with parameter `s` on `facet`.
pub(crate) fn side_basis<T: Real>(space: &RtSpace<T>, facet: usize, cell: usize, s: T) -> Vec<VectorEval<T>> {
    space.eval_cell_basis(cell, space.mesh().facet_reference_point(facet, cell, s))
}
