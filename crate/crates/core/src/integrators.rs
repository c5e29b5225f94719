//! Time stepping: the explicit two-stage Runge–Kutta scheme with exactly divergence-free
//! stages, and a semi-implicit Crank–Nicolson comparator.

use std::borrow::Cow;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::diagnostics::energy_residual;
use crate::error::{Error, Result};
use crate::fe_space::{CoefVec, DgSpace, RtSpace};
use crate::forms::{Assembler, FormParams, SparseMat};
use crate::linsolve::{CnSystem, SaddleSystem};
use crate::manufactured::{error_norms, error_order, initial_condition, ErrorNorms, ExactProblem};
use crate::mesh::Mesh;
use crate::scalar::{Real, Vec2};

/// How the second-stage forcing `f_w` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ForcingMode {
    /// `f_w = f(t^{n+1})`
    Next,
    /// `f_w = f(t^n) + τ ∂_t f(t^n)`
    #[default]
    Taylor,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IntegratorKind {
    #[default]
    ExplicitRk2,
    SemiImplicitCn,
}

/// Parameters of one run. `tau` is always `final_time / n_steps` exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig<T> {
    pub degree: usize,
    pub tau: T,
    pub final_time: T,
    pub n_steps: usize,
    pub nu: T,
    pub sigma: T,
    pub forcing_mode: ForcingMode,
    pub integrator: IntegratorKind,
    /// Blow-up gate: `‖u‖ > blowup_factor · max(‖u⁰‖, 1)`.
    pub blowup_factor: T,
    /// Drop the forcing and record the discrete energy identity every step.
    pub zero_forcing: bool,
    /// Evaluate the L² error after every step and keep its maximum.
    pub track_max_error: bool,
}

impl<T: Real> SchemeConfig<T> {
    /// Snaps `tau` to `final_time / round(final_time / tau)`.
    pub fn new(degree: usize, tau: T, final_time: T) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be > 0, got {tau}")));
        }
        if !(final_time > T::zero()) || !final_time.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be > 0, got {final_time}")));
        }
        let n = (final_time / tau).round().to_usize().unwrap_or(0).max(1);
        Ok(Self {
            degree,
            tau: final_time / T::from_usize_lossy(n),
            final_time,
            n_steps: n,
            nu: T::zero(),
            sigma: T::from_usize_lossy(10 * degree * degree),
            forcing_mode: ForcingMode::default(),
            integrator: IntegratorKind::default(),
            blowup_factor: T::lit(10.0),
            zero_forcing: false,
            track_max_error: false,
        })
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }
    pub fn with_sigma(mut self, sigma: T) -> Self {
        self.sigma = sigma;
        self
    }
    pub fn with_forcing_mode(mut self, mode: ForcingMode) -> Self {
        self.forcing_mode = mode;
        self
    }
    pub fn with_integrator(mut self, integrator: IntegratorKind) -> Self {
        self.integrator = integrator;
        self
    }
    pub fn with_zero_forcing(mut self, zero: bool) -> Self {
        self.zero_forcing = zero;
        self
    }
    pub fn with_blowup_factor(mut self, factor: T) -> Self {
        self.blowup_factor = factor;
        self
    }
    pub fn with_max_error_tracking(mut self, on: bool) -> Self {
        self.track_max_error = on;
        self
    }

    /// `t^n = n τ`, never accumulated.
    pub fn time(&self, n: usize) -> T {
        if n == self.n_steps {
            self.final_time
        } else {
            T::from_usize_lossy(n) * self.tau
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::fe_space::reference::check_degree(self.degree)?;
        if !(self.nu >= T::zero()) {
            return Err(Error::InvalidArgument(format!("viscosity must be >= 0, got {}", self.nu)));
        }
        if self.nu > T::zero() && !(self.sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!("penalty sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.blowup_factor > T::one()) {
            return Err(Error::InvalidArgument("blow-up factor must exceed 1".into()));
        }
        Ok(())
    }
}

/// Everything that depends only on the mesh and the degree: the space, tabulated forms and
/// the factorized projection. Shared by all runs on one mesh.
pub struct Discretization<T: Real> {
    space: Arc<RtSpace<T>>,
    assembler: Assembler<T>,
    saddle: SaddleSystem<T>,
}

impl<T: Real> Discretization<T> {
    pub fn new(mesh: Arc<Mesh<T>>, degree: usize) -> Result<Self> {
        Self::with_params(mesh, degree, FormParams::for_degree(degree))
    }

    pub fn with_params(mesh: Arc<Mesh<T>>, degree: usize, params: FormParams<T>) -> Result<Self> {
        let space = Arc::new(RtSpace::new(mesh.clone(), degree)?);
        let assembler = Assembler::with_params(space.clone(), params)?;
        let q_space = DgSpace::new(mesh, degree);
        let saddle = SaddleSystem::build(&assembler, &q_space)?;
        Ok(Self {
            space,
            assembler,
            saddle,
        })
    }

    pub fn space(&self) -> &Arc<RtSpace<T>> {
        &self.space
    }
    pub fn assembler(&self) -> &Assembler<T> {
        &self.assembler
    }
    pub fn saddle(&self) -> &SaddleSystem<T> {
        &self.saddle
    }
    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        self.space.mesh()
    }

    /// `‖u‖²_{L²}` through the mass matrix.
    pub fn norm_sq(&self, u: &[T]) -> T {
        self.saddle.mass().bilinear(u, u)
    }

    /// The shared assembler when its penalty is `sigma`, else a fresh one.
    fn sip_assembler(&self, sigma: T) -> Result<Cow<'_, Assembler<T>>> {
        let params = FormParams {
            sigma,
            ..*self.assembler.params()
        };
        if params == *self.assembler.params() {
            return Ok(Cow::Borrowed(&self.assembler));
        }
        Ok(Cow::Owned(Assembler::with_params(self.space.clone(), params)?))
    }
}

/// State after `n` accepted steps.
#[derive(Clone, Debug, PartialEq)]
pub struct StepState<T> {
    pub n: usize,
    pub t: T,
    pub u: CoefVec<T>,
    /// Previous velocity, kept for the extrapolated advecting field of the comparator.
    pub u_prev: Option<CoefVec<T>>,
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub t: T,
    pub l2_norm: T,
    pub div_norm: T,
    /// Residual of the discrete energy identity (explicit scheme without forcing only).
    pub energy_residual: Option<T>,
    /// `|u^n|²_{u^n,up}` and `|w^n|²_{w^n,up}` (explicit scheme without forcing only).
    pub jump_u: Option<T>,
    pub jump_w: Option<T>,
    pub l2_error: Option<T>,
}

/// Result of one step: either the new state or a detected blow-up.
#[derive(Clone, Debug)]
pub enum StepOutcome<T> {
    Accepted(StepState<T>, StepRecord<T>),
    BlowUp,
}

#[derive(Clone, Debug)]
pub struct RunReport<T> {
    pub config: SchemeConfig<T>,
    pub h: T,
    pub n_dofs: usize,
    pub initial_norm: T,
    pub records: Vec<StepRecord<T>>,
    /// Index of the step whose result failed the blow-up gate.
    pub blow_up: Option<usize>,
    /// Errors against the exact solution at the final time; absent after a blow-up.
    pub final_errors: Option<ErrorNorms<T>>,
    pub final_norm: Option<T>,
    pub final_velocity: Option<CoefVec<T>>,
    pub max_div: T,
    pub max_l2_error: Option<T>,
    pub wall_time: Duration,
}

impl<T: Real> RunReport<T> {
    pub fn completed(&self) -> bool {
        self.blow_up.is_none()
    }

    pub fn max_energy_residual(&self) -> Option<T> {
        self.records
            .iter()
            .filter_map(|r| r.energy_residual.map(|e| e.abs()))
            .reduce(|a, b| a.max(b))
    }
}

/// Drives one run on a shared discretization.
pub struct Stepper<'a, T: Real> {
    disc: &'a Discretization<T>,
    problem: &'a dyn ExactProblem<T>,
    config: SchemeConfig<T>,
    viscous: Option<SparseMat<T>>,
    /// Assembler carrying the run's penalty, for the SIP boundary data.
    sip_assembler: Option<Cow<'a, Assembler<T>>>,
    /// Load vectors of the separable forcing modes, when the problem provides them.
    mode_loads: Vec<Vec<T>>,
    gate: T,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(disc: &'a Discretization<T>, problem: &'a dyn ExactProblem<T>, config: SchemeConfig<T>) -> Result<Self> {
        config.validate()?;
        if config.degree != disc.space.degree() {
            return Err(Error::InvalidArgument(format!(
                "scheme degree {} does not match space degree {}",
                config.degree,
                disc.space.degree()
            )));
        }
        let sip_assembler = if config.nu > T::zero() {
            Some(disc.sip_assembler(config.sigma)?)
        } else {
            None
        };
        let viscous = sip_assembler.as_ref().map(|a| a.assemble_sip()).transpose()?;
        let mode_loads = if config.zero_forcing {
            Vec::new()
        } else {
            (0..problem.forcing_modes())
                .map(|i| disc.assembler.assemble_load(|x, _| problem.forcing_mode(i, x), T::zero()))
                .collect()
        };
        Ok(Self {
            disc,
            problem,
            config,
            viscous,
            sip_assembler,
            mode_loads,
            gate: T::zero(),
        })
    }

    pub fn config(&self) -> &SchemeConfig<T> {
        &self.config
    }

    /// `u⁰ = Π_RT u(·, 0)`.
    pub fn initial_state(&mut self) -> StepState<T> {
        let u = initial_condition(&self.disc.space, self.problem);
        let n0 = self.disc.norm_sq(u.values()).sqrt();
        self.gate = self.config.blowup_factor * n0.max(T::one());
        StepState {
            n: 0,
            t: T::zero(),
            u,
            u_prev: None,
        }
    }

    /// Overrides the blow-up gate computed from the initial state.
    pub fn set_gate_from(&mut self, initial_norm: T) {
        self.gate = self.config.blowup_factor * initial_norm.max(T::one());
    }

    fn load(&self, t: T, taylor: bool) -> Option<Vec<T>> {
        if self.config.zero_forcing {
            return None;
        }
        let p = self.problem;
        let tau = self.config.tau;
        if !self.mode_loads.is_empty() {
            let mut out = vec![T::zero(); self.disc.space.n_dofs()];
            for ((a, da), l) in p.forcing_coefficients(t).into_iter().zip(&self.mode_loads) {
                let coef = if taylor { a + tau * da } else { a };
                Self::axpy(&mut out, coef, l);
            }
            return Some(out);
        }
        Some(if taylor {
            self.disc.assembler.assemble_load(
                |x: Vec2<T>, t: T| {
                    let f = p.forcing(x, t);
                    let d = p.forcing_dt(x, t);
                    [f[0] + tau * d[0], f[1] + tau * d[1]]
                },
                t,
            )
        } else {
            self.disc.assembler.assemble_load(|x, t| p.forcing(x, t), t)
        })
    }

    /// SIP boundary data from the exact velocity; the weak no-slip condition becomes the
    /// exact trace for manufactured solutions with nonzero tangential boundary velocity.
    fn boundary(&self, t: T) -> Result<Option<Vec<T>>> {
        let Some(asm) = self.sip_assembler.as_ref().filter(|_| !self.config.zero_forcing) else {
            return Ok(None);
        };
        let p = self.problem;
        asm.assemble_sip_boundary(|x, t| p.velocity(x, t), t).map(Some)
    }

    /// `rhs += alpha · v`.
    fn axpy(rhs: &mut [T], alpha: T, v: &[T]) {
        for (r, x) in rhs.iter_mut().zip(v) {
            *r += alpha * *x;
        }
    }

    fn check_gate(&self, u: &[T]) -> Option<T> {
        if u.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let norm = self.disc.norm_sq(u).sqrt();
        if !norm.is_finite() || norm > self.gate {
            None
        } else {
            Some(norm)
        }
    }

    fn project(&self, rhs: &[T]) -> Result<Option<CoefVec<T>>> {
        match self.disc.saddle.project_div_free(rhs) {
            Ok(u) => Ok(Some(u)),
            Err(Error::NonFinite) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// One step of the explicit scheme:
    /// `w = P(Mu − τνAu − τ c(u,u,·) + τ f^n)`,
    /// `u' = P(½Mu + ½Mw − ½τνAw − ½τ c(w,w,·) + ½τ f_w)`.
    pub fn rk2_step(&self, state: &StepState<T>) -> Result<StepOutcome<T>> {
        let cfg = &self.config;
        let asm = &self.disc.assembler;
        let mass = self.disc.saddle.mass();
        let tau = cfg.tau;
        let half = T::lit(0.5);
        let u = state.u.values();

        let mut rhs = mass.mul_vec(u);
        Self::axpy(&mut rhs, -tau, &asm.apply_convection_raw(u, u));
        if let Some(a) = &self.viscous {
            Self::axpy(&mut rhs, -tau * cfg.nu, &a.mul_vec(u));
        }
        if let Some(b) = self.boundary(state.t)? {
            Self::axpy(&mut rhs, tau * cfg.nu, &b);
        }
        if let Some(l) = self.load(state.t, false) {
            Self::axpy(&mut rhs, tau, &l);
        }
        let Some(w) = self.project(&rhs)? else {
            return Ok(StepOutcome::BlowUp);
        };
        if self.check_gate(w.values()).is_none() {
            return Ok(StepOutcome::BlowUp);
        }
        let wv = w.values();

        let mut rhs = mass.mul_vec(u);
        Self::axpy(&mut rhs, T::one(), &mass.mul_vec(wv));
        rhs.iter_mut().for_each(|x| *x *= half);
        Self::axpy(&mut rhs, -half * tau, &asm.apply_convection_raw(wv, wv));
        if let Some(a) = &self.viscous {
            Self::axpy(&mut rhs, -half * tau * cfg.nu, &a.mul_vec(wv));
        }
        let next_t = cfg.time(state.n + 1);
        if let Some(b) = self.boundary(next_t)? {
            Self::axpy(&mut rhs, half * tau * cfg.nu, &b);
        }
        let f_w = match cfg.forcing_mode {
            ForcingMode::Next => self.load(next_t, false),
            ForcingMode::Taylor => self.load(state.t, true),
        };
        if let Some(l) = f_w {
            Self::axpy(&mut rhs, half * tau, &l);
        }
        let Some(next) = self.project(&rhs)? else {
            return Ok(StepOutcome::BlowUp);
        };
        let Some(norm) = self.check_gate(next.values()) else {
            return Ok(StepOutcome::BlowUp);
        };

        let (energy_residual, jump_u, jump_w) = if cfg.zero_forcing {
            let ju = asm.jump_seminorm_raw(u, u);
            let jw = asm.jump_seminorm_raw(wv, wv);
            let (mut du, mut dw) = (ju, jw);
            if let Some(a) = &self.viscous {
                du += cfg.nu * a.bilinear(u, u);
                dw += cfg.nu * a.bilinear(wv, wv);
            }
            let r = energy_residual(mass, u, wv, next.values(), du, dw, tau);
            (Some(r), Some(ju), Some(jw))
        } else {
            (None, None, None)
        };

        let record = StepRecord {
            step: state.n + 1,
            t: next_t,
            l2_norm: norm,
            div_norm: asm.div_norm_raw(next.values()),
            energy_residual,
            jump_u,
            jump_w,
            l2_error: self.step_error(&next, next_t)?,
        };
        Ok(StepOutcome::Accepted(
            StepState {
                n: state.n + 1,
                t: next_t,
                u: next,
                u_prev: Some(state.u.clone()),
            },
            record,
        ))
    }

    fn step_error(&self, u: &CoefVec<T>, t: T) -> Result<Option<T>> {
        if !self.config.track_max_error {
            return Ok(None);
        }
        let order = error_order(self.config.degree);
        Ok(Some(error_norms(&self.disc.space, u, self.problem, t, order)?.l2))
    }

    /// One step of the semi-implicit comparator. The first step is semi-implicit Euler with
    /// `c_h(u⁰, u¹, v)`; later steps use Crank–Nicolson with the advecting field
    /// `3/2 uⁿ − 1/2 uⁿ⁻¹` and the forcing at the midpoint `t^{n+1/2}`.
    pub fn cn_step(&self, state: &StepState<T>) -> Result<StepOutcome<T>> {
        let cfg = &self.config;
        let asm = &self.disc.assembler;
        let saddle = &self.disc.saddle;
        let mass = saddle.mass();
        let tau = cfg.tau;
        let half = T::lit(0.5);
        let u = state.u.values();
        let next_t = cfg.time(state.n + 1);
        let inv_tau = T::one() / tau;

        let mut rhs: Vec<T> = mass.mul_vec(u).into_iter().map(|x| x * inv_tau).collect();
        let system = match &state.u_prev {
            None => {
                let c = asm.convection_matrix_raw(u);
                let mut op = mass.add_scaled(inv_tau, &c, T::one());
                if let Some(a) = &self.viscous {
                    op = op.add_scaled(T::one(), a, cfg.nu);
                }
                if let Some(l) = self.load(next_t, false) {
                    Self::axpy(&mut rhs, T::one(), &l);
                }
                if let Some(b) = self.boundary(next_t)? {
                    Self::axpy(&mut rhs, cfg.nu, &b);
                }
                saddle.constrained_system(&op)?
            }
            Some(prev) => {
                let a: Vec<T> = u
                    .iter()
                    .zip(prev.values())
                    .map(|(x, y)| T::lit(1.5) * *x - half * *y)
                    .collect();
                let c = asm.convection_matrix_raw(&a);
                Self::axpy(&mut rhs, -half, &c.mul_vec(u));
                if let Some(v) = &self.viscous {
                    Self::axpy(&mut rhs, -half * cfg.nu, &v.mul_vec(u));
                }
                for t in [state.t, next_t] {
                    if let Some(b) = self.boundary(t)? {
                        Self::axpy(&mut rhs, half * cfg.nu, &b);
                    }
                }
                let mid = half * (state.t + next_t);
                if let Some(l) = self.load(mid, false) {
                    Self::axpy(&mut rhs, T::one(), &l);
                }
                CnSystem::new(saddle, tau, cfg.nu, self.viscous.as_ref(), &c)?
            }
        };
        let next = match system.solve(&rhs) {
            Ok(v) => v,
            Err(Error::NonFinite) => return Ok(StepOutcome::BlowUp),
            Err(e) => return Err(e),
        };
        let Some(norm) = self.check_gate(next.values()) else {
            return Ok(StepOutcome::BlowUp);
        };
        let record = StepRecord {
            step: state.n + 1,
            t: next_t,
            l2_norm: norm,
            div_norm: asm.div_norm_raw(next.values()),
            energy_residual: None,
            jump_u: None,
            jump_w: None,
            l2_error: self.step_error(&next, next_t)?,
        };
        Ok(StepOutcome::Accepted(
            StepState {
                n: state.n + 1,
                t: next_t,
                u: next,
                u_prev: Some(state.u.clone()),
            },
            record,
        ))
    }

    pub fn step(&self, state: &StepState<T>) -> Result<StepOutcome<T>> {
        match self.config.integrator {
            IntegratorKind::ExplicitRk2 => self.rk2_step(state),
            IntegratorKind::SemiImplicitCn => self.cn_step(state),
        }
    }
}

/// Runs from `u⁰ = Π_RT u(·, 0)` to the final time, stopping at the first blow-up.
pub fn run<T: Real>(disc: &Discretization<T>, problem: &dyn ExactProblem<T>, config: SchemeConfig<T>) -> Result<RunReport<T>> {
    let start = Instant::now();
    let mut stepper = Stepper::new(disc, problem, config)?;
    let mut state = stepper.initial_state();
    let initial_norm = disc.norm_sq(state.u.values()).sqrt();
    let mut records = Vec::with_capacity(config.n_steps);
    let mut blow_up = None;
    let mut max_div = disc.assembler.div_norm_raw(state.u.values());
    for _ in 0..config.n_steps {
        match stepper.step(&state)? {
            StepOutcome::Accepted(next, record) => {
                max_div = max_div.max(record.div_norm);
                records.push(record);
                state = next;
            }
            StepOutcome::BlowUp => {
                blow_up = Some(state.n + 1);
                break;
            }
        }
    }
    let max_l2_error = records
        .iter()
        .filter_map(|r| r.l2_error)
        .reduce(|a, b| a.max(b));
    let (final_errors, final_norm, final_velocity) = if blow_up.is_none() {
        let e = error_norms(&disc.space, &state.u, problem, config.final_time, error_order(config.degree))?;
        let norm = disc.norm_sq(state.u.values()).sqrt();
        (Some(e), Some(norm), Some(state.u))
    } else {
        (None, None, None)
    };
    Ok(RunReport {
        config,
        h: T::one() / T::from_usize_lossy(nominal_cells_per_side(disc.mesh())),
        n_dofs: disc.space.n_dofs(),
        initial_norm,
        records,
        blow_up,
        final_errors,
        final_norm,
        final_velocity,
        max_div,
        max_l2_error,
        wall_time: start.elapsed(),
    })
}

/// Cells per side of a structured `n x n` mesh (`2n²` triangles); the nominal mesh size is
/// `1/n`.
pub fn nominal_cells_per_side<T: Real>(mesh: &Mesh<T>) -> usize {
    ((mesh.n_cells() as f64 / 2.0).sqrt().round() as usize).max(1)
}
