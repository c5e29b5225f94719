//! Global Raviart–Thomas and broken scalar spaces on a mesh, and coefficient vectors.
//!
//! RT global numbering: facet `f` owns dofs `f (k+1) .. (f+1)(k+1)`, the Legendre moments of
//! `u·n_F` with `s` running from the facet's lower to higher vertex id. Interior dofs follow,
//! `k (k+1)` per cell. On a cell, the global basis function equals `sign · Piola(φ̂_local)`
//! where the sign accounts for normal direction and traversal direction.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_space::piola::piola_unchecked;
use crate::fe_space::reference::{RtReference, ScalarReference, VectorEval};
use crate::mesh::Mesh;
use crate::scalar::{Mat2, Real, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    RaviartThomas,
    BrokenScalar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceTag {
    pub kind: SpaceKind,
    pub degree: usize,
    pub mesh_id: usize,
    pub n_dofs: usize,
}

/// Coefficient vector of a discrete field in a given space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefVec<T> {
    tag: SpaceTag,
    values: Vec<T>,
}

impl<T: Real> CoefVec<T> {
    pub fn zeros(tag: SpaceTag) -> Self {
        Self {
            tag,
            values: vec![T::zero(); tag.n_dofs],
        }
    }

    pub fn from_values(tag: SpaceTag, values: Vec<T>) -> Result<Self> {
        if values.len() != tag.n_dofs {
            return Err(Error::SpaceMismatch {
                expected: tag.n_dofs,
                got: values.len(),
            });
        }
        Ok(Self { tag, values })
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when any entry is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.values.iter().any(|v| !v.is_finite())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Self {
        debug_assert_eq!(self.tag, other.tag);
        Self {
            tag: self.tag,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            tag: self.tag,
            values: self.values.iter().map(|&a| a * alpha).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RtSpace<T> {
    mesh: Arc<Mesh<T>>,
    reference: RtReference<T>,
    local_dim: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<T>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
    n_dofs: usize,
}

impl<T: Real> RtSpace<T> {
    pub fn new(mesh: Arc<Mesh<T>>, degree: usize) -> Result<Self> {
        let reference = RtReference::new(degree)?;
        let ne = reference.n_edge_dofs();
        let ni = reference.n_interior_dofs();
        let local_dim = reference.dim();
        let n_edge_total = mesh.n_facets() * ne;
        let n_dofs = n_edge_total + mesh.n_cells() * ni;

        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * local_dim);
        let mut cell_signs = Vec::with_capacity(mesh.n_cells() * local_dim);
        for c in 0..mesh.n_cells() {
            let cell = mesh.cells()[c];
            for (i, cf) in mesh.cell_facets(c).iter().enumerate() {
                let facet = &mesh.facets()[cf.facet];
                let same_direction = cell[(i + 1) % 3] == facet.vertices[0];
                for j in 0..ne {
                    let mut sign = if cf.orientation > 0 { T::one() } else { -T::one() };
                    if !same_direction && j % 2 == 1 {
                        sign = -sign;
                    }
                    cell_dofs.push(cf.facet * ne + j);
                    cell_signs.push(sign);
                }
            }
            for j in 0..ni {
                cell_dofs.push(n_edge_total + c * ni + j);
                cell_signs.push(T::one());
            }
        }

        let mut is_boundary = vec![false; n_dofs];
        let mut boundary_dofs = Vec::new();
        for (f, facet) in mesh.facets().iter().enumerate() {
            if facet.is_boundary() {
                for j in 0..ne {
                    is_boundary[f * ne + j] = true;
                    boundary_dofs.push(f * ne + j);
                }
            }
        }

        Ok(Self {
            mesh,
            reference,
            local_dim,
            cell_dofs,
            cell_signs,
            boundary_dofs,
            is_boundary,
            n_dofs,
        })
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag {
            kind: SpaceKind::RaviartThomas,
            degree: self.degree(),
            mesh_id: self.mesh.id(),
            n_dofs: self.n_dofs,
        }
    }

    pub fn check(&self, c: &CoefVec<T>) -> Result<()> {
        if c.tag() != self.tag() {
            return Err(Error::SpaceMismatch {
                expected: self.n_dofs,
                got: c.len(),
            });
        }
        Ok(())
    }

    pub fn zeros(&self) -> CoefVec<T> {
        CoefVec::zeros(self.tag())
    }

    pub fn coefs(&self, values: Vec<T>) -> Result<CoefVec<T>> {
        CoefVec::from_values(self.tag(), values)
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }
    pub fn degree(&self) -> usize {
        self.reference.degree()
    }
    pub fn reference(&self) -> &RtReference<T> {
        &self.reference
    }
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }
    pub fn local_dim(&self) -> usize {
        self.local_dim
    }
    pub fn n_edge_dofs(&self) -> usize {
        self.reference.n_edge_dofs()
    }
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.local_dim..(cell + 1) * self.local_dim]
    }
    pub fn cell_signs(&self, cell: usize) -> &[T] {
        &self.cell_signs[cell * self.local_dim..(cell + 1) * self.local_dim]
    }
    pub fn facet_dofs(&self, facet: usize) -> Range<usize> {
        let ne = self.n_edge_dofs();
        facet * ne..(facet + 1) * ne
    }
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }
    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    /// Signed physical basis functions of `cell` at a reference point.
    pub fn eval_cell_basis(&self, cell: usize, xi: Vec2<T>) -> Vec<VectorEval<T>> {
        let g = self.mesh.geometry(cell);
        self.reference
            .eval(xi)
            .iter()
            .zip(self.cell_signs(cell))
            .map(|(e, &s)| piola_unchecked(g, e).scaled(s))
            .collect()
    }

    /// Value and broken gradient of a field at a reference point of `cell`.
    pub fn evaluate_field(&self, coeffs: &CoefVec<T>, cell: usize, xi: Vec2<T>) -> Result<(Vec2<T>, Mat2<T>)> {
        self.check(coeffs)?;
        let e = self.evaluate_unchecked(coeffs.values(), cell, xi);
        Ok((e.value, e.grad))
    }

    pub(crate) fn evaluate_unchecked(&self, coeffs: &[T], cell: usize, xi: Vec2<T>) -> VectorEval<T> {
        let mut out = VectorEval::zero();
        for (e, &d) in self.eval_cell_basis(cell, xi).iter().zip(self.cell_dofs(cell)) {
            let c = coeffs[d];
            out.value[0] += c * e.value[0];
            out.value[1] += c * e.value[1];
            for i in 0..2 {
                for j in 0..2 {
                    out.grad[i][j] += c * e.grad[i][j];
                }
            }
            out.div += c * e.div;
        }
        out
    }

    /// Copy of `c` with every boundary dof set to zero.
    pub fn zero_boundary(&self, c: &CoefVec<T>) -> CoefVec<T> {
        let mut out = c.clone();
        for &d in &self.boundary_dofs {
            out.values_mut()[d] = T::zero();
        }
        out
    }
}

/// Broken `P_k` space: one independent block of `(k+1)(k+2)/2` dofs per cell.
#[derive(Clone, Debug)]
pub struct DgSpace<T> {
    mesh: Arc<Mesh<T>>,
    reference: ScalarReference,
}

impl<T: Real> DgSpace<T> {
    pub fn new(mesh: Arc<Mesh<T>>, degree: usize) -> Self {
        Self {
            mesh,
            reference: ScalarReference::new(degree),
        }
    }

    pub fn tag(&self) -> SpaceTag {
        SpaceTag {
            kind: SpaceKind::BrokenScalar,
            degree: self.degree(),
            mesh_id: self.mesh.id(),
            n_dofs: self.n_dofs(),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }
    pub fn degree(&self) -> usize {
        self.reference.degree()
    }
    pub fn reference(&self) -> &ScalarReference {
        &self.reference
    }
    pub fn local_dim(&self) -> usize {
        self.reference.dim()
    }
    pub fn n_dofs(&self) -> usize {
        self.mesh.n_cells() * self.local_dim()
    }
    pub fn cell_dofs(&self, cell: usize) -> Range<usize> {
        let n = self.local_dim();
        cell * n..(cell + 1) * n
    }

    pub fn evaluate(&self, coeffs: &CoefVec<T>, cell: usize, xi: Vec2<T>) -> Result<T> {
        if coeffs.tag() != self.tag() {
            return Err(Error::SpaceMismatch {
                expected: self.n_dofs(),
                got: coeffs.len(),
            });
        }
        let vals = self.reference.eval(xi);
        Ok(self.cell_dofs(cell).zip(vals).map(|(d, v)| coeffs.values()[d] * v).sum())
    }
}
