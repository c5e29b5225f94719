//! Sparse direct solves on the divergence-free subspace.
//!
//! Both systems share the block structure
//!
//! ```text
//! [ A_ff  B_fᵀ ] [u]   [r_f]
//! [ B_f   0    ] [p] = [0  ]
//! ```
//!
//! where `f` are the interior (free) velocity dofs and `B` the divergence constraint against
//! the broken `P_k` multiplier. With zero boundary flux the constant rows of `B` sum to zero,
//! so the row of one cell constant is dropped to make `B_f` full rank. With `A = M` this is
//! the L² projection onto the exactly divergence-free subspace; the Crank–Nicolson comparator
//! uses `A = M/τ + ½νA_sip + ½C(a)`.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};
use crate::fe_space::{CoefVec, DgSpace, RtSpace};
use crate::forms::{Assembler, SparseMat, TripletBuilder};
use crate::scalar::Real;

/// Factorized constrained system; `op` is the velocity block on the full dof set.
struct Constrained<T: Real> {
    kkt: SparseMat<T>,
    lu: faer::sparse::linalg::solvers::Lu<usize, T>,
    n_free: usize,
    /// Largest constraint entry.
    constraint_scale: T,
}

const MAX_REFINEMENTS: usize = 3;

/// Free dof bookkeeping shared by every system built on one space.
#[derive(Clone, Debug)]
struct DofMap {
    free: Vec<usize>,
    /// position in `free`, or `usize::MAX` for boundary dofs
    index: Vec<usize>,
}

impl DofMap {
    fn new<T: Real>(space: &RtSpace<T>) -> Self {
        let mut index = vec![usize::MAX; space.n_dofs()];
        let mut free = Vec::with_capacity(space.n_dofs());
        for (d, slot) in index.iter_mut().enumerate() {
            if !space.is_boundary_dof(d) {
                *slot = free.len();
                free.push(d);
            }
        }
        Self { free, index }
    }
}

impl<T: Real> Constrained<T> {
    /// `dropped` is the redundant multiplier row.
    fn build(op: &SparseMat<T>, div: &SparseMat<T>, dropped: usize, map: &DofMap) -> Result<Self> {
        let nf = map.free.len();
        let nq = div.n_rows();
        let n = nf + nq - 1;
        let mut tb = TripletBuilder::with_capacity(n, n, op.nnz() + 2 * div.nnz());
        for (r, c, v) in op.iter() {
            let (fr, fc) = (map.index[r], map.index[c]);
            if fr != usize::MAX && fc != usize::MAX {
                tb.push(fr, fc, v);
            }
        }
        for (r, c, v) in div.iter() {
            let fc = map.index[c];
            if fc != usize::MAX && r != dropped {
                let row = nf + r - usize::from(r > dropped);
                tb.push(row, fc, v);
                tb.push(fc, row, v);
            }
        }
        let kkt = tb.finalize();

        let triplets: Vec<Triplet<usize, usize, T>> = kkt.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let csc = SparseColMat::<usize, T>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::InvalidArgument(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = csc.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Factorization { pivot: index },
            LuError::Generic(_) => Error::Factorization { pivot: usize::MAX },
        })?;
        let constraint_scale = div.max_abs();
        let this = Self {
            kkt,
            lu,
            n_free: nf,
            constraint_scale,
        };

        // numerically singular pivots surface as a non-finite or inaccurate trial solve
        let probe: Vec<T> = (0..n).map(|i| T::one() + T::from_usize_lossy(i % 7) / T::lit(7.0)).collect();
        let z = this.solve_full(&probe);
        let res = this.residual(&z, &probe);
        let worst = (0..n).max_by(|&a, &b| res[a].abs().partial_cmp(&res[b].abs()).unwrap_or(std::cmp::Ordering::Greater));
        let bad = z.iter().any(|x| !x.is_finite()) || res.iter().any(|r| !(r.abs() <= T::lit(1e-6)));
        if bad {
            return Err(Error::Factorization {
                pivot: worst.unwrap_or(0),
            });
        }
        Ok(this)
    }

    fn residual(&self, z: &[T], rhs: &[T]) -> Vec<T> {
        self.kkt.mul_vec(z).iter().zip(rhs).map(|(a, b)| *b - *a).collect()
    }

    fn raw_solve(&self, rhs: &[T]) -> Vec<T> {
        let mut m = Mat::<T>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(&mut m);
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Direct solve followed by iterative refinement while either block of the residual is
    /// above roundoff level. The constraint rows are judged against `|B|·|u|` rather than
    /// the rhs, so a velocity block scaled by `1/τ` cannot hide constraint errors.
    fn solve_full(&self, rhs: &[T]) -> Vec<T> {
        let nf = self.n_free;
        let tol = T::epsilon() * T::lit(64.0);
        let max_abs = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut z = self.raw_solve(rhs);
        for _ in 0..MAX_REFINEMENTS {
            let res = self.residual(&z, rhs);
            let velocity_ok = max_abs(&res[..nf]) <= tol * max_abs(&rhs[..nf]).max(max_abs(&rhs[nf..]));
            let constraint_ok = max_abs(&res[nf..]) <= tol * self.constraint_scale * max_abs(&z[..nf]);
            if velocity_ok && constraint_ok {
                break;
            }
            for (zi, d) in z.iter_mut().zip(self.raw_solve(&res)) {
                *zi += d;
            }
        }
        z
    }

    /// Solves with velocity rhs given on the full dof set; returns full velocity coefficients
    /// with zero boundary dofs.
    fn solve_velocity(&self, rhs: &[T], map: &DofMap) -> Result<Vec<T>> {
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = self.kkt.n_rows();
        let mut full = vec![T::zero(); n];
        for (i, &d) in map.free.iter().enumerate() {
            full[i] = rhs[d];
        }
        let z = self.solve_full(&full);
        let mut out = vec![T::zero(); rhs.len()];
        for (i, &d) in map.free.iter().enumerate() {
            out[d] = z[i];
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(out)
    }
}

/// Factorized L² projection onto the divergence-free subspace with zero boundary flux.
pub struct SaddleSystem<T: Real> {
    space: Arc<RtSpace<T>>,
    q_space: DgSpace<T>,
    mass: SparseMat<T>,
    div: SparseMat<T>,
    dropped: usize,
    map: DofMap,
    solver: Constrained<T>,
}

impl<T: Real> std::fmt::Debug for SaddleSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSystem")
            .field("n_free", &self.solver.n_free)
            .field("n_multipliers", &self.q_space.n_dofs())
            .finish()
    }
}

impl<T: Real> SaddleSystem<T> {
    /// Assembles and factorizes the projection on `assembler`'s space with a broken `P_k`
    /// multiplier of the same degree.
    pub fn build(assembler: &Assembler<T>, q_space: &DgSpace<T>) -> Result<Self> {
        let space = assembler.space().clone();
        let mass = assembler.assemble_mass();
        let div = assembler.assemble_div(q_space)?;
        // the constant of cell 0 (first monomial of the multiplier basis)
        let dropped = q_space.cell_dofs(0).start;
        let map = DofMap::new(&space);
        let solver = Constrained::build(&mass, &div, dropped, &map)?;
        Ok(Self {
            space,
            q_space: q_space.clone(),
            mass,
            div,
            dropped,
            map,
            solver,
        })
    }

    pub fn space(&self) -> &Arc<RtSpace<T>> {
        &self.space
    }
    pub fn mass(&self) -> &SparseMat<T> {
        &self.mass
    }
    pub fn div(&self) -> &SparseMat<T> {
        &self.div
    }
    /// Size of the factorized system: free velocity dofs and the independent multiplier dofs.
    pub fn size(&self) -> usize {
        self.solver.kkt.n_rows()
    }
    pub fn n_free(&self) -> usize {
        self.solver.n_free
    }

    /// The divergence-free `u` with `(u, v) = rhs(v)` for every divergence-free `v`;
    /// `rhs` is indexed over all velocity dofs and its boundary entries are ignored.
    pub fn project_div_free(&self, rhs: &[T]) -> Result<CoefVec<T>> {
        if rhs.len() != self.space.n_dofs() {
            return Err(Error::SpaceMismatch {
                expected: self.space.n_dofs(),
                got: rhs.len(),
            });
        }
        let u = self.solver.solve_velocity(rhs, &self.map)?;
        self.space.coefs(u)
    }

    /// L² projection of a discrete field: `project_div_free(M u)`.
    pub fn project_field(&self, u: &CoefVec<T>) -> Result<CoefVec<T>> {
        self.space.check(u)?;
        self.project_div_free(&self.mass.mul_vec(u.values()))
    }

    /// Builds and factorizes a constrained system with velocity block `op` on the same
    /// constraint set (used for the implicit comparator).
    pub fn constrained_system(&self, op: &SparseMat<T>) -> Result<CnSystem<T>> {
        if op.n_rows() != self.space.n_dofs() || op.n_cols() != self.space.n_dofs() {
            return Err(Error::SpaceMismatch {
                expected: self.space.n_dofs(),
                got: op.n_rows(),
            });
        }
        Ok(CnSystem {
            space: self.space.clone(),
            map: self.map.clone(),
            solver: Constrained::build(op, &self.div, self.dropped, &self.map)?,
        })
    }

    /// The full constrained matrix (free velocity, multiplier) for inspection.
    pub fn kkt(&self) -> &SparseMat<T> {
        &self.solver.kkt
    }
}

/// Factorized `M/τ + ½νA + ½C(a)` constrained to the divergence-free subspace; rebuilt every
/// step because the advecting field changes.
pub struct CnSystem<T: Real> {
    space: Arc<RtSpace<T>>,
    map: DofMap,
    solver: Constrained<T>,
}

impl<T: Real> CnSystem<T> {
    /// Builds `(1/τ)M + ½νA + ½C(a)` from assembled pieces. `viscous` is ignored when
    /// `nu == 0`.
    pub fn new(
        saddle: &SaddleSystem<T>,
        tau: T,
        nu: T,
        viscous: Option<&SparseMat<T>>,
        convection: &SparseMat<T>,
    ) -> Result<Self> {
        if !(tau > T::zero()) {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {tau}")));
        }
        let half = T::lit(0.5);
        let mut op = saddle.mass().add_scaled(T::one() / tau, convection, half);
        if nu > T::zero() {
            let a = viscous.ok_or_else(|| Error::InvalidArgument("viscous operator required when nu > 0".into()))?;
            op = op.add_scaled(T::one(), a, half * nu);
        }
        saddle.constrained_system(&op)
    }

    pub fn kkt(&self) -> &SparseMat<T> {
        &self.solver.kkt
    }

    /// Divergence-free velocity solving the constrained linear system with velocity rhs
    /// `rhs` (full dof indexing, boundary entries ignored).
    pub fn solve(&self, rhs: &[T]) -> Result<CoefVec<T>> {
        if rhs.len() != self.space.n_dofs() {
            return Err(Error::SpaceMismatch {
                expected: self.space.n_dofs(),
                got: rhs.len(),
            });
        }
        let u = self.solver.solve_velocity(rhs, &self.map)?;
        self.space.coefs(u)
    }
}

/// Convenience: builds the projection on a fresh default assembler.
pub fn build_saddle<T: Real>(space: Arc<RtSpace<T>>, q_space: &DgSpace<T>) -> Result<(Assembler<T>, SaddleSystem<T>)> {
    let assembler = Assembler::new(space);
    let saddle = SaddleSystem::build(&assembler, q_space)?;
    Ok((assembler, saddle))
}
