//! Discrete forms on the RT_k space: mass, divergence constraint, upwind convection, the
//! symmetric interior penalty viscous form, load vectors and the upwind jump seminorm.
//!
//! Jumps and averages across a facet are taken with respect to its fixed normal `n_F`, which
//! points from the plus to the minus cell: `[[v]] = v⁺ − v⁻`, `{v} = (v⁺ + v⁻)/2`. On boundary
//! facets `[[v]] = {v} = v⁺`.

mod sparse;
mod tables;

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe_space::{legendre, CoefVec, DgSpace, RtSpace, SegmentRule, TriangleRule, VectorEval};
use crate::scalar::{dot, frob, mat_vec, Real, Vec2};
use tables::{side_basis, CellTable, FacetTable};

pub use sparse::{SparseMat, TripletBuilder};

/// Penalty, viscosity and quadrature settings shared by the assembled forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormParams<T> {
    /// SIP penalty, scaled by `1/h_F` with `h_F` the facet length.
    pub sigma: T,
    pub nu: T,
    /// Total degree of the cell rule.
    pub cell_order: usize,
    /// Number of Gauss points per facet (or per facet piece when a facet is split).
    pub facet_points: usize,
    /// Total degree of the rule used for load vectors of non-polynomial data.
    pub load_order: usize,
}

impl<T: Real> FormParams<T> {
    /// Rules exact for every form at degree `k`: the convection volume integrand has degree
    /// `3k + 2`, the facet integrands at most `3k + 2`.
    pub fn for_degree(k: usize) -> Self {
        Self {
            sigma: T::from_usize_lossy(10 * k * k),
            nu: T::zero(),
            cell_order: 3 * k + 2,
            facet_points: (3 * k + 4) / 2,
            load_order: 2 * k + 10,
        }
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_sigma(mut self, sigma: T) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= T::zero()) {
            return Err(Error::InvalidArgument(format!("viscosity must be >= 0, got {}", self.nu)));
        }
        if self.nu > T::zero() && !(self.sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "penalty sigma must be > 0 when nu > 0, got {}",
                self.sigma
            )));
        }
        if self.cell_order == 0 || self.facet_points == 0 || self.load_order == 0 {
            return Err(Error::InvalidArgument("quadrature orders must be positive".into()));
        }
        Ok(())
    }
}

/// Quadrature points on one facet with both neighbours' basis traces.
struct FacetQuad<'a, T: Clone> {
    params: Cow<'a, [T]>,
    /// reference weights times facet length
    weights: Vec<T>,
    plus: Cow<'a, [VectorEval<T>]>,
    minus: Cow<'a, [VectorEval<T>]>,
}

/// Assembles forms on one RT space with basis values cached at every quadrature point.
#[derive(Clone, Debug)]
pub struct Assembler<T> {
    space: Arc<RtSpace<T>>,
    params: FormParams<T>,
    cells: CellTable<T>,
    facets: FacetTable<T>,
    load_rule: TriangleRule<T>,
    load_basis: Vec<Vec<Vec2<T>>>,
    parallel: bool,
}

impl<T: Real> Assembler<T> {
    pub fn new(space: Arc<RtSpace<T>>) -> Self {
        let params = FormParams::for_degree(space.degree());
        Self::with_params(space, params).expect("default parameters are valid")
    }

    pub fn with_params(space: Arc<RtSpace<T>>, params: FormParams<T>) -> Result<Self> {
        params.validate()?;
        let cells = CellTable::new(&space, params.cell_order);
        let facets = FacetTable::new(&space, params.facet_points);
        let load_rule = TriangleRule::<T>::with_order(params.load_order);
        let load_basis = load_rule
            .points
            .iter()
            .map(|&p| space.reference().eval(p).into_iter().map(|e| e.value).collect())
            .collect();
        Ok(Self {
            space,
            params,
            cells,
            facets,
            load_rule,
            load_basis,
            parallel: false,
        })
    }

    /// Computes per-cell and per-facet contributions on the rayon pool. Contributions are
    /// still summed in a fixed order, so results are bitwise identical to serial mode.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn space(&self) -> &Arc<RtSpace<T>> {
        &self.space
    }

    pub fn params(&self) -> &FormParams<T> {
        &self.params
    }

    fn map_range<L: Send>(&self, n: usize, f: impl Fn(usize) -> L + Sync + Send) -> Vec<L> {
        if self.parallel {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }

    fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    fn interior_facets(&self) -> Vec<usize> {
        let mesh = self.space.mesh();
        (0..mesh.n_facets()).filter(|&f| !mesh.facets()[f].is_boundary()).collect()
    }

    // ---- mass and divergence ----------------------------------------------------------

    /// `M_ij = ∫ φ_j·φ_i`.
    pub fn assemble_mass(&self) -> SparseMat<T> {
        let ld = self.cells.ld;
        let nc = self.space.mesh().n_cells();
        let locals = self.map_range(nc, |c| {
            let mut m = vec![T::zero(); ld * ld];
            for q in 0..self.cells.nq {
                let w = self.cells.weights[c * self.cells.nq + q];
                let b = self.cells.basis(c, q);
                for i in 0..ld {
                    for j in 0..ld {
                        m[i * ld + j] += w * dot(b[i].value, b[j].value);
                    }
                }
            }
            m
        });
        let mut tb = TripletBuilder::with_capacity(self.n_dofs(), self.n_dofs(), nc * ld * ld);
        for (c, m) in locals.into_iter().enumerate() {
            scatter_square(&mut tb, self.space.cell_dofs(c), self.space.cell_dofs(c), &m);
        }
        tb.finalize()
    }

    /// `B_ij = ∫ (div φ_j) ψ_i` with rows over the broken `P_k` space.
    pub fn assemble_div(&self, q_space: &DgSpace<T>) -> Result<SparseMat<T>> {
        self.check_multiplier_space(q_space)?;
        let ld = self.cells.ld;
        let nl = q_space.local_dim();
        let psi: Vec<Vec<T>> = self.cells.rule.points.iter().map(|&p| q_space.reference().eval(p)).collect();
        let nc = self.space.mesh().n_cells();
        let mut tb = TripletBuilder::with_capacity(q_space.n_dofs(), self.n_dofs(), nc * ld * nl);
        for c in 0..nc {
            let dofs = self.space.cell_dofs(c);
            let mut local = vec![T::zero(); nl * ld];
            for q in 0..self.cells.nq {
                let w = self.cells.weights[c * self.cells.nq + q];
                let b = self.cells.basis(c, q);
                for i in 0..nl {
                    for j in 0..ld {
                        local[i * ld + j] += w * psi[q][i] * b[j].div;
                    }
                }
            }
            for (i, row) in q_space.cell_dofs(c).enumerate() {
                for j in 0..ld {
                    tb.push(row, dofs[j], local[i * ld + j]);
                }
            }
        }
        Ok(tb.finalize())
    }

    /// `m_i = ∫ ψ_i` over the broken `P_k` space.
    pub fn multiplier_means(&self, q_space: &DgSpace<T>) -> Result<Vec<T>> {
        self.check_multiplier_space(q_space)?;
        let psi: Vec<Vec<T>> = self.cells.rule.points.iter().map(|&p| q_space.reference().eval(p)).collect();
        let mut out = vec![T::zero(); q_space.n_dofs()];
        for c in 0..self.space.mesh().n_cells() {
            for q in 0..self.cells.nq {
                let w = self.cells.weights[c * self.cells.nq + q];
                for (i, d) in q_space.cell_dofs(c).enumerate() {
                    out[d] += w * psi[q][i];
                }
            }
        }
        Ok(out)
    }

    fn check_multiplier_space(&self, q_space: &DgSpace<T>) -> Result<()> {
        if q_space.degree() != self.space.degree() {
            return Err(Error::DegreeMismatch {
                velocity: self.space.degree(),
                multiplier: q_space.degree(),
            });
        }
        if q_space.mesh().id() != self.space.mesh().id() {
            return Err(Error::InvalidArgument("multiplier space lives on a different mesh".into()));
        }
        Ok(())
    }

    // ---- convection -------------------------------------------------------------------

    /// `r_i = c_h(a, w, φ_i)`.
    pub fn apply_convection(&self, a: &CoefVec<T>, w: &CoefVec<T>) -> Result<Vec<T>> {
        self.space.check(a)?;
        self.space.check(w)?;
        Ok(self.apply_convection_raw(a.values(), w.values()))
    }

    pub(crate) fn apply_convection_raw(&self, a: &[T], w: &[T]) -> Vec<T> {
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let mut r = vec![T::zero(); self.n_dofs()];

        let cell_parts = self.map_range(mesh.n_cells(), |c| {
            let dofs = self.space.cell_dofs(c);
            let mut out = vec![T::zero(); ld];
            for q in 0..self.cells.nq {
                let b = self.cells.basis(c, q);
                let mut av = [T::zero(); 2];
                let mut g = [[T::zero(); 2]; 2];
                for (e, &d) in b.iter().zip(dofs) {
                    av[0] += a[d] * e.value[0];
                    av[1] += a[d] * e.value[1];
                    for (gr, er) in g.iter_mut().zip(&e.grad) {
                        gr[0] += w[d] * er[0];
                        gr[1] += w[d] * er[1];
                    }
                }
                let conv = mat_vec(&g, av);
                let wt = self.cells.weights[c * self.cells.nq + q];
                for (o, e) in out.iter_mut().zip(b) {
                    *o += wt * dot(conv, e.value);
                }
            }
            out
        });
        for (c, out) in cell_parts.into_iter().enumerate() {
            for (&d, v) in self.space.cell_dofs(c).iter().zip(out) {
                r[d] += v;
            }
        }

        let interior = self.interior_facets();
        let facet_parts = self.map_range(interior.len(), |i| {
            let f = interior[i];
            let facet = &mesh.facets()[f];
            let (pc, mc) = (facet.plus_cell, facet.minus_cell.unwrap());
            let (pd, md) = (self.space.cell_dofs(pc), self.space.cell_dofs(mc));
            let quad = self.facet_quad(f, Some(a));
            let mut out = vec![T::zero(); 2 * ld];
            for (q, &s) in quad.params.iter().enumerate() {
                let an = self.normal_flux(a, f, s);
                let bp = &quad.plus[q * ld..(q + 1) * ld];
                let bm = &quad.minus[q * ld..(q + 1) * ld];
                let jump = sub(combine(w, pd, bp), combine(w, md, bm));
                let half = T::lit(0.5);
                let cp = quad.weights[q] * (-half * an + half * an.abs());
                let cm = quad.weights[q] * (-half * an - half * an.abs());
                for i in 0..ld {
                    out[i] += cp * dot(jump, bp[i].value);
                    out[ld + i] += cm * dot(jump, bm[i].value);
                }
            }
            out
        });
        for (i, out) in facet_parts.into_iter().enumerate() {
            let facet = &mesh.facets()[interior[i]];
            let pd = self.space.cell_dofs(facet.plus_cell);
            let md = self.space.cell_dofs(facet.minus_cell.unwrap());
            for (&d, &v) in pd.iter().chain(md).zip(&out) {
                r[d] += v;
            }
        }
        r
    }

    /// `C_ij = c_h(a, φ_j, φ_i)`.
    pub fn convection_matrix(&self, a: &CoefVec<T>) -> Result<SparseMat<T>> {
        self.space.check(a)?;
        Ok(self.convection_matrix_raw(a.values()))
    }

    pub(crate) fn convection_matrix_raw(&self, a: &[T]) -> SparseMat<T> {
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let interior = self.interior_facets();
        let mut tb = TripletBuilder::with_capacity(
            self.n_dofs(),
            self.n_dofs(),
            mesh.n_cells() * ld * ld + interior.len() * 4 * ld * ld,
        );

        let cell_parts = self.map_range(mesh.n_cells(), |c| {
            let dofs = self.space.cell_dofs(c);
            let mut m = vec![T::zero(); ld * ld];
            for q in 0..self.cells.nq {
                let b = self.cells.basis(c, q);
                let av = combine(a, dofs, b);
                let wt = self.cells.weights[c * self.cells.nq + q];
                for j in 0..ld {
                    let conv = mat_vec(&b[j].grad, av);
                    for i in 0..ld {
                        m[i * ld + j] += wt * dot(conv, b[i].value);
                    }
                }
            }
            m
        });
        for (c, m) in cell_parts.into_iter().enumerate() {
            scatter_square(&mut tb, self.space.cell_dofs(c), self.space.cell_dofs(c), &m);
        }

        let facet_parts = self.map_range(interior.len(), |i| {
            let f = interior[i];
            let quad = self.facet_quad(f, Some(a));
            let n2 = 2 * ld;
            let mut m = vec![T::zero(); n2 * n2];
            for (q, &s) in quad.params.iter().enumerate() {
                let an = self.normal_flux(a, f, s);
                let half = T::lit(0.5);
                let side_coef = [
                    quad.weights[q] * (-half * an + half * an.abs()),
                    quad.weights[q] * (-half * an - half * an.abs()),
                ];
                let b = [&quad.plus[q * ld..(q + 1) * ld], &quad.minus[q * ld..(q + 1) * ld]];
                let jump_sign = [T::one(), -T::one()];
                for ti in 0..2 {
                    for i in 0..ld {
                        for tj in 0..2 {
                            for j in 0..ld {
                                m[(ti * ld + i) * n2 + tj * ld + j] +=
                                    side_coef[ti] * jump_sign[tj] * dot(b[tj][j].value, b[ti][i].value);
                            }
                        }
                    }
                }
            }
            m
        });
        for (i, m) in facet_parts.into_iter().enumerate() {
            let facet = &mesh.facets()[interior[i]];
            let dofs: Vec<usize> = self
                .space
                .cell_dofs(facet.plus_cell)
                .iter()
                .chain(self.space.cell_dofs(facet.minus_cell.unwrap()))
                .copied()
                .collect();
            scatter_square(&mut tb, &dofs, &dofs, &m);
        }
        tb.finalize()
    }

    /// `Σ_F interior ∫_F ½|a·n_F| |[[v]]|²`.
    pub fn jump_seminorm(&self, a: &CoefVec<T>, v: &CoefVec<T>) -> Result<T> {
        self.space.check(a)?;
        self.space.check(v)?;
        Ok(self.jump_seminorm_raw(a.values(), v.values()))
    }

    pub(crate) fn jump_seminorm_raw(&self, a: &[T], v: &[T]) -> T {
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let interior = self.interior_facets();
        let parts = self.map_range(interior.len(), |i| {
            let f = interior[i];
            let facet = &mesh.facets()[f];
            let pd = self.space.cell_dofs(facet.plus_cell);
            let md = self.space.cell_dofs(facet.minus_cell.unwrap());
            let quad = self.facet_quad(f, Some(a));
            let mut acc = T::zero();
            for (q, &s) in quad.params.iter().enumerate() {
                let an = self.normal_flux(a, f, s);
                let jump = sub(
                    combine(v, pd, &quad.plus[q * ld..(q + 1) * ld]),
                    combine(v, md, &quad.minus[q * ld..(q + 1) * ld]),
                );
                acc += quad.weights[q] * T::lit(0.5) * an.abs() * dot(jump, jump);
            }
            acc
        });
        parts.into_iter().fold(T::zero(), |s, x| s + x)
    }

    /// `a·n_F` at parameter `s` of facet `f`, read from the shared edge dofs.
    #[inline]
    fn normal_flux(&self, a: &[T], f: usize, s: T) -> T {
        let len = self.space.mesh().facets()[f].length;
        let mut acc = T::zero();
        for (j, d) in self.space.facet_dofs(f).enumerate() {
            acc += a[d] * legendre(j, s);
        }
        acc / len
    }

    /// Interior parameters where `a·n_F` changes sign on facet `f`.
    fn flux_roots(&self, a: &[T], f: usize) -> Vec<T> {
        // a·n_F is a polynomial of degree <= 2 in s; recover its monomial coefficients
        let half = T::lit(0.5);
        let (f0, fh, f1) = (
            self.normal_flux(a, f, T::zero()),
            self.normal_flux(a, f, half),
            self.normal_flux(a, f, T::one()),
        );
        let two = T::lit(2.0);
        let p2 = two * f1 - T::lit(4.0) * fh + two * f0;
        let p1 = f1 - f0 - p2;
        let p0 = f0;
        let scale = p0.abs().max(p1.abs()).max(p2.abs());
        if scale == T::zero() || !scale.is_finite() {
            return Vec::new();
        }
        let tiny = T::epsilon() * T::lit(64.0) * scale;
        let mut roots = Vec::with_capacity(2);
        if p2.abs() <= tiny {
            if p1.abs() > tiny {
                roots.push(-p0 / p1);
            }
        } else {
            let disc = p1 * p1 - T::lit(4.0) * p2 * p0;
            if disc > T::zero() {
                let sq = disc.sqrt();
                let qq = -half * (p1 + if p1 >= T::zero() { sq } else { -sq });
                if qq != T::zero() {
                    roots.push(qq / p2);
                    roots.push(p0 / qq);
                }
            }
        }
        let margin = T::epsilon() * T::lit(1e3);
        let mut roots: Vec<T> = roots.into_iter().filter(|&r| r > margin && r < T::one() - margin).collect();
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        roots.dedup_by(|x, y| (*x - *y).abs() <= margin);
        roots
    }

    /// Facet quadrature, split at the sign changes of `a·n_F` when `split_by` is given so the
    /// `|a·n_F|` factor is integrated exactly.
    fn facet_quad(&self, f: usize, split_by: Option<&[T]>) -> FacetQuad<'_, T> {
        let len = self.space.mesh().facets()[f].length;
        let rule = &self.facets.rule;
        let roots = split_by.map(|a| self.flux_roots(a, f)).unwrap_or_default();
        if roots.is_empty() {
            return FacetQuad {
                params: Cow::Borrowed(&rule.points),
                weights: rule.weights.iter().map(|&w| w * len).collect(),
                plus: Cow::Borrowed(self.facets.plus(f)),
                minus: Cow::Borrowed(self.facets.minus(f)),
            };
        }
        let facet = &self.space.mesh().facets()[f];
        let mut params = Vec::new();
        let mut weights = Vec::new();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut breaks = vec![T::zero()];
        breaks.extend(roots);
        breaks.push(T::one());
        for piece in breaks.windows(2) {
            let sub_rule: SegmentRule<T> = rule.on_interval(piece[0], piece[1]);
            for (&s, &w) in sub_rule.points.iter().zip(&sub_rule.weights) {
                params.push(s);
                weights.push(w * len);
                plus.extend(side_basis(&self.space, f, facet.plus_cell, s));
                match facet.minus_cell {
                    Some(c) => minus.extend(side_basis(&self.space, f, c, s)),
                    None => minus.extend(std::iter::repeat_n(VectorEval::zero(), self.facets.ld)),
                }
            }
        }
        FacetQuad {
            params: Cow::Owned(params),
            weights,
            plus: Cow::Owned(plus),
            minus: Cow::Owned(minus),
        }
    }

    // ---- viscous form -----------------------------------------------------------------

    /// Symmetric interior penalty form
    /// `∫∇u:∇v − Σ_F ∫ ({∇u}n_F)·[[v]] + ({∇v}n_F)·[[u]] − (σ/h_F) [[u]]·[[v]]`, summed over all
    /// facets so that no-slip is imposed weakly.
    pub fn assemble_sip(&self) -> Result<SparseMat<T>> {
        let sigma = self.params.sigma;
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!("penalty sigma must be > 0, got {sigma}")));
        }
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let nf = mesh.n_facets();
        let mut tb = TripletBuilder::with_capacity(
            self.n_dofs(),
            self.n_dofs(),
            mesh.n_cells() * ld * ld + nf * 4 * ld * ld,
        );

        let cell_parts = self.map_range(mesh.n_cells(), |c| {
            let mut m = vec![T::zero(); ld * ld];
            for q in 0..self.cells.nq {
                let b = self.cells.basis(c, q);
                let wt = self.cells.weights[c * self.cells.nq + q];
                for i in 0..ld {
                    for j in 0..ld {
                        m[i * ld + j] += wt * frob(&b[j].grad, &b[i].grad);
                    }
                }
            }
            m
        });
        for (c, m) in cell_parts.into_iter().enumerate() {
            scatter_square(&mut tb, self.space.cell_dofs(c), self.space.cell_dofs(c), &m);
        }

        let facet_parts = self.map_range(nf, |f| {
            let facet = &mesh.facets()[f];
            let interior = !facet.is_boundary();
            let ns = if interior { 2 } else { 1 };
            let n2 = ns * ld;
            let quad = self.facet_quad(f, None);
            let penalty = sigma / facet.length;
            let avg = if interior { T::lit(0.5) } else { T::one() };
            let jump_sign = [T::one(), -T::one()];
            let mut m = vec![T::zero(); n2 * n2];
            for q in 0..quad.params.len() {
                let b = [&quad.plus[q * ld..(q + 1) * ld], &quad.minus[q * ld..(q + 1) * ld]];
                let wq = quad.weights[q];
                for ti in 0..ns {
                    for i in 0..ld {
                        let vi = b[ti][i].value;
                        let gi = mat_vec(&b[ti][i].grad, facet.normal);
                        for tj in 0..ns {
                            for j in 0..ld {
                                let vj = b[tj][j].value;
                                let gj = mat_vec(&b[tj][j].grad, facet.normal);
                                let consistency = avg * jump_sign[ti] * dot(gj, vi) + avg * jump_sign[tj] * dot(gi, vj);
                                let pen = penalty * jump_sign[ti] * jump_sign[tj] * dot(vi, vj);
                                m[(ti * ld + i) * n2 + tj * ld + j] += wq * (pen - consistency);
                            }
                        }
                    }
                }
            }
            m
        });
        for (f, m) in facet_parts.into_iter().enumerate() {
            let facet = &mesh.facets()[f];
            let mut dofs: Vec<usize> = self.space.cell_dofs(facet.plus_cell).to_vec();
            if let Some(c) = facet.minus_cell {
                dofs.extend_from_slice(self.space.cell_dofs(c));
            }
            scatter_square(&mut tb, &dofs, &dofs, &m);
        }
        Ok(tb.finalize())
    }

    /// Boundary data of the SIP form: with `g` imposed weakly on `∂Ω`,
    /// `b_i = Σ_{F ⊂ ∂Ω} ∫_F σ/h_F g·φ_i − (∇φ_i n_F)·g`, so that `a_h(u, v) = b(v)` is
    /// consistent for a smooth `u` with trace `g`.
    pub fn assemble_sip_boundary(&self, g: impl Fn(Vec2<T>, T) -> Vec2<T> + Sync, t: T) -> Result<Vec<T>> {
        let sigma = self.params.sigma;
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!("penalty sigma must be > 0, got {sigma}")));
        }
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let boundary: Vec<usize> = (0..mesh.n_facets()).filter(|&f| mesh.facets()[f].is_boundary()).collect();
        let parts = self.map_range(boundary.len(), |i| {
            let facet = &mesh.facets()[boundary[i]];
            let quad = self.facet_quad(boundary[i], None);
            let [a, b] = facet.vertices.map(|v| mesh.vertices()[v]);
            let penalty = sigma / facet.length;
            let mut out = vec![T::zero(); ld];
            for (q, &s) in quad.params.iter().enumerate() {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let gx = g(x, t);
                for (o, e) in out.iter_mut().zip(&quad.plus[q * ld..(q + 1) * ld]) {
                    let gn = mat_vec(&e.grad, facet.normal);
                    *o += quad.weights[q] * (penalty * dot(gx, e.value) - dot(gn, gx));
                }
            }
            out
        });
        let mut r = vec![T::zero(); self.n_dofs()];
        for (i, out) in parts.into_iter().enumerate() {
            let cell = mesh.facets()[boundary[i]].plus_cell;
            for (&d, v) in self.space.cell_dofs(cell).iter().zip(out) {
                r[d] += v;
            }
        }
        Ok(r)
    }

    // ---- load and cell diagnostics ----------------------------------------------------

    /// `l_i = ∫ f(x, t)·φ_i`, with the dedicated high-order load rule so that gradient data is
    /// orthogonal to divergence-free fields up to roundoff.
    pub fn assemble_load(&self, f: impl Fn(Vec2<T>, T) -> Vec2<T> + Sync, t: T) -> Vec<T> {
        let ld = self.cells.ld;
        let mesh = self.space.mesh();
        let parts = self.map_range(mesh.n_cells(), |c| {
            let g = mesh.geometry(c);
            let mut out = vec![T::zero(); ld];
            for (q, &xi) in self.load_rule.points.iter().enumerate() {
                // contravariant Piola: φ·f = (J φ̂ / det J)·f = φ̂·(Jᵀ f) / det J
                let fx = f(g.map(xi), t);
                let jt = [
                    g.jacobian[0][0] * fx[0] + g.jacobian[1][0] * fx[1],
                    g.jacobian[0][1] * fx[0] + g.jacobian[1][1] * fx[1],
                ];
                // the weight carries det J, which cancels the Piola factor
                let wt = self.load_rule.weights[q];
                for (o, e) in out.iter_mut().zip(&self.load_basis[q]) {
                    *o += wt * dot(jt, *e);
                }
            }
            for (o, &s) in out.iter_mut().zip(self.space.cell_signs(c)) {
                *o *= s;
            }
            out
        });
        let mut r = vec![T::zero(); self.n_dofs()];
        for (c, out) in parts.into_iter().enumerate() {
            for (&d, v) in self.space.cell_dofs(c).iter().zip(out) {
                r[d] += v;
            }
        }
        r
    }

    /// `‖div_h u‖_{L²}` with the cell rule (exact for RT_k fields).
    pub fn div_norm(&self, u: &CoefVec<T>) -> Result<T> {
        self.space.check(u)?;
        Ok(self.div_norm_raw(u.values()))
    }

    pub(crate) fn div_norm_raw(&self, u: &[T]) -> T {
        let nq = self.cells.nq;
        let mut acc = T::zero();
        for c in 0..self.space.mesh().n_cells() {
            let dofs = self.space.cell_dofs(c);
            for q in 0..nq {
                let d: T = self.cells.basis(c, q).iter().zip(dofs).map(|(e, &i)| u[i] * e.div).sum();
                acc += self.cells.weights[c * nq + q] * d * d;
            }
        }
        acc.sqrt()
    }
}

#[inline]
fn combine<T: Real>(coeffs: &[T], dofs: &[usize], basis: &[VectorEval<T>]) -> Vec2<T> {
    let mut v = [T::zero(); 2];
    for (e, &d) in basis.iter().zip(dofs) {
        v[0] += coeffs[d] * e.value[0];
        v[1] += coeffs[d] * e.value[1];
    }
    v
}

#[inline]
fn sub<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

fn scatter_square<T: Real>(tb: &mut TripletBuilder<T>, rows: &[usize], cols: &[usize], m: &[T]) {
    let nc = cols.len();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            tb.push(r, c, m[i * nc + j]);
        }
    }
}
