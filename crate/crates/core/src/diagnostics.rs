//! Cross-run analysis: the discrete energy identity, CFL sweeps with `τ_max` search and
//! convergence studies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::SparseMat;
use crate::integrators::{run, Discretization, ForcingMode, IntegratorKind, SchemeConfig};
use crate::manufactured::{rate_table, ErrorNorms, ExactProblem};
use crate::mesh::Mesh;
use crate::scalar::Real;

pub use crate::integrators::{RunReport, StepRecord};

/// `‖u'‖² − ‖u‖² + τ D(u) + τ D(w) − ‖u' − w‖²` from the three norms and the two
/// dissipations `D(v) = |v|²_{v,up} (+ ν a_h(v, v))`.
pub fn energy_identity_residual<T: Real>(
    norm_u_sq: T,
    norm_next_sq: T,
    norm_diff_sq: T,
    dissip_u: T,
    dissip_w: T,
    tau: T,
) -> T {
    norm_next_sq - norm_u_sq + tau * dissip_u + tau * dissip_w - norm_diff_sq
}

/// Residual of the discrete energy identity for one unforced explicit step `u → w → u'`,
/// with all norms in the inner product of `mass`.
pub fn energy_residual<T: Real>(mass: &SparseMat<T>, u: &[T], w: &[T], next: &[T], dissip_u: T, dissip_w: T, tau: T) -> T {
    let diff: Vec<T> = next.iter().zip(w).map(|(a, b)| *a - *b).collect();
    energy_identity_residual(
        mass.bilinear(u, u),
        mass.bilinear(next, next),
        mass.bilinear(&diff, &diff),
        dissip_u,
        dissip_w,
        tau,
    )
}

/// Time-step schedule of a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CflForm {
    /// `τ = Co·h`
    Standard,
    /// `τ = Co·h^{4/3}`
    FourThirds,
    /// `τ = 1/m` for increasing `m` until the first stable run.
    Search,
}

impl CflForm {
    /// Step size of the fixed schedules; `None` for the search.
    pub fn tau<T: Real>(self, co: T, h: T) -> Option<T> {
        match self {
            CflForm::Standard => Some(co * h),
            CflForm::FourThirds => Some(co * h.powf(T::lit(4.0 / 3.0))),
            CflForm::Search => None,
        }
    }
}

/// Parameters shared by every run of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig<T> {
    pub degree: usize,
    /// Cells per side; the nominal mesh size is `1/n`.
    pub n_list: Vec<usize>,
    pub cfl: CflForm,
    pub co: T,
    pub final_time: T,
    pub nu: T,
    pub sigma: Option<T>,
    pub perturb: f64,
    pub seed: u64,
    pub forcing_mode: ForcingMode,
    pub integrator: IntegratorKind,
    /// Smallest step the search tries.
    pub tau_floor: T,
    /// Upper bound on concurrently executed runs; `None` reads `DIVFREE_THREADS`.
    pub threads: Option<usize>,
}

impl<T: Real> StudyConfig<T> {
    pub fn new(degree: usize, n_list: Vec<usize>, cfl: CflForm, co: T) -> Self {
        Self {
            degree,
            n_list,
            cfl,
            co,
            final_time: T::lit(2.0),
            nu: T::zero(),
            sigma: None,
            perturb: DEFAULT_PERTURB,
            seed: DEFAULT_SEED,
            forcing_mode: ForcingMode::default(),
            integrator: IntegratorKind::default(),
            tau_floor: T::lit(1e-5),
            threads: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("empty mesh list".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("mesh list must be strictly increasing in n".into()));
        }
        if self.cfl != CflForm::Search && !(self.co > T::zero()) {
            return Err(Error::InvalidArgument(format!("CFL constant must be > 0, got {}", self.co)));
        }
        Ok(())
    }

    /// Scheme parameters of one run with step `tau`.
    pub fn scheme(&self, tau: T) -> Result<SchemeConfig<T>> {
        let mut s = SchemeConfig::new(self.degree, tau, self.final_time)?
            .with_nu(self.nu)
            .with_forcing_mode(self.forcing_mode)
            .with_integrator(self.integrator);
        if let Some(sigma) = self.sigma {
            s = s.with_sigma(sigma);
        }
        s.validate()?;
        Ok(s)
    }

    fn discretization(&self, n: usize) -> Result<Discretization<T>> {
        let mesh = Arc::new(Mesh::build_structured(n, self.perturb, self.seed)?);
        Discretization::new(mesh, self.degree)
    }
}

/// Interior vertex perturbation of the built-in meshes, as a fraction of `1/n`.
pub const DEFAULT_PERTURB: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 1;

/// Sweep width from `DIVFREE_THREADS`, falling back to the available parallelism.
pub fn thread_budget(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("DIVFREE_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Drops the final velocity, keeping the report small.
fn summarize<T: Real>(mut r: RunReport<T>) -> RunReport<T> {
    r.final_velocity = None;
    r
}

/// One mesh level of a convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRow<T> {
    pub n: usize,
    pub h: T,
    pub report: RunReport<T>,
    /// Rates against the previous row; `None` on the first row or next to a blow-up.
    pub l2_rate: Option<f64>,
    pub h1_rate: Option<f64>,
}

impl<T: Real> ConvergenceRow<T> {
    pub fn errors(&self) -> Option<ErrorNorms<T>> {
        self.report.final_errors
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable<T> {
    pub config: StudyConfig<T>,
    pub rows: Vec<ConvergenceRow<T>>,
}

/// Runs the manufactured problem on every mesh with the fixed schedule of `config` and
/// tabulates errors and observed rates. Blow-ups are recorded as rows without errors.
pub fn convergence_study<T: Real>(config: &StudyConfig<T>, problem: &dyn ExactProblem<T>) -> Result<ConvergenceTable<T>> {
    config.validate()?;
    if config.cfl == CflForm::Search {
        return Err(Error::InvalidArgument("convergence studies need a fixed CFL schedule".into()));
    }
    let threads = thread_budget(config.threads).min(config.n_list.len());
    let reports: Vec<Result<RunReport<T>>> = with_pool(threads, || {
        config
            .n_list
            .par_iter()
            .map(|&n| {
                let disc = config.discretization(n)?;
                let h = T::one() / T::from_usize_lossy(n);
                let tau = config.cfl.tau(config.co, h).expect("fixed schedule");
                Ok(summarize(run(&disc, problem, config.scheme(tau)?)?))
            })
            .collect()
    })?;
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = config.n_list.iter().map(|&n| 1.0 / n as f64).collect();
    let pick = |f: fn(&ErrorNorms<T>) -> T| -> Vec<f64> {
        reports
            .iter()
            .map(|r| r.final_errors.as_ref().map_or(f64::NAN, |e| f(e).as_f64()))
            .collect()
    };
    let l2 = rate_table(&h, &pick(|e| e.l2))?;
    let h1 = rate_table(&h, &pick(|e| e.h1))?;
    let rows = reports
        .into_iter()
        .enumerate()
        .map(|(i, report)| ConvergenceRow {
            n: config.n_list[i],
            h: T::one() / T::from_usize_lossy(config.n_list[i]),
            report,
            l2_rate: if i == 0 { None } else { l2[i - 1] },
            h1_rate: if i == 0 { None } else { h1[i - 1] },
        })
        .collect();
    Ok(ConvergenceTable {
        config: config.clone(),
        rows,
    })
}

/// One trial run of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepTrial<T> {
    pub n: usize,
    pub tau: T,
    /// `m` with `τ = 1/m` in search mode.
    pub denominator: Option<usize>,
    pub stable: bool,
    pub blow_up: Option<usize>,
}

/// Stability limit on one mesh.
#[derive(Clone, Debug)]
pub struct SweepRow<T> {
    pub n: usize,
    pub h: T,
    /// Largest stable step found; `None` when no tested step was stable.
    pub tau_max: Option<T>,
    pub denominator: Option<usize>,
    /// `log(τ_max(h_prev)/τ_max(h)) / log(h_prev/h)` against the previous row.
    pub alpha: Option<f64>,
    /// Report of the stable run at `tau_max`.
    pub report: Option<RunReport<T>>,
}

#[derive(Clone, Debug)]
pub struct SweepResult<T> {
    pub config: StudyConfig<T>,
    pub rows: Vec<SweepRow<T>>,
    pub trace: Vec<SweepTrial<T>>,
}

/// Two-point exponent `α` with `τ = ρ h^α` through both points.
pub fn alpha_exponent(h_prev: f64, tau_prev: f64, h: f64, tau: f64) -> f64 {
    (tau_prev / tau).ln() / (h_prev / h).ln()
}

fn is_stable<T: Real>(r: &RunReport<T>) -> bool {
    r.completed() && r.final_errors.is_some_and(|e| e.l2.is_finite())
}

/// Stability limits per mesh. Fixed schedules run once per mesh; the search scans
/// `τ = 1/m` from `m = ceil(2/h)` in steps of 2 until the first stable run or `τ` falls
/// below the floor.
pub fn cfl_sweep<T: Real>(config: &StudyConfig<T>, problem: &dyn ExactProblem<T>) -> Result<SweepResult<T>> {
    config.validate()?;
    let threads = thread_budget(config.threads).min(config.n_list.len());
    let per_mesh: Vec<Result<(Option<(T, Option<usize>, RunReport<T>)>, Vec<SweepTrial<T>>)>> = with_pool(threads, || {
        config
            .n_list
            .par_iter()
            .map(|&n| sweep_mesh(config, problem, n))
            .collect()
    })?;
    let mut rows: Vec<SweepRow<T>> = Vec::with_capacity(config.n_list.len());
    let mut trace = Vec::new();
    for (i, res) in per_mesh.into_iter().enumerate() {
        let (found, trials) = res?;
        trace.extend(trials);
        let n = config.n_list[i];
        let h = T::one() / T::from_usize_lossy(n);
        let (tau_max, denominator, report) = match found {
            Some((tau, m, r)) => (Some(tau), m, Some(r)),
            None => (None, None, None),
        };
        let alpha = match (rows.last().and_then(|p| p.tau_max.map(|t| (p.h, t))), tau_max) {
            (Some((hp, tp)), Some(t)) => Some(alpha_exponent(hp.as_f64(), tp.as_f64(), h.as_f64(), t.as_f64())),
            _ => None,
        };
        rows.push(SweepRow {
            n,
            h,
            tau_max,
            denominator,
            alpha,
            report,
        });
    }
    Ok(SweepResult {
        config: config.clone(),
        rows,
        trace,
    })
}

type MeshOutcome<T> = (Option<(T, Option<usize>, RunReport<T>)>, Vec<SweepTrial<T>>);

fn sweep_mesh<T: Real>(config: &StudyConfig<T>, problem: &dyn ExactProblem<T>, n: usize) -> Result<MeshOutcome<T>> {
    let disc = config.discretization(n)?;
    let h = T::one() / T::from_usize_lossy(n);
    let mut trials = Vec::new();
    if let Some(tau) = config.cfl.tau(config.co, h) {
        let scheme = config.scheme(tau)?;
        let r = summarize(run(&disc, problem, scheme)?);
        let stable = is_stable(&r);
        trials.push(SweepTrial {
            n,
            tau: scheme.tau,
            denominator: None,
            stable,
            blow_up: r.blow_up,
        });
        return Ok((stable.then_some((scheme.tau, None, r)), trials));
    }
    let mut m = (2 * n).max(1);
    loop {
        let tau = T::one() / T::from_usize_lossy(m);
        if tau < config.tau_floor {
            return Ok((None, trials));
        }
        let scheme = config.scheme(tau)?;
        let r = summarize(run(&disc, problem, scheme)?);
        let stable = is_stable(&r);
        trials.push(SweepTrial {
            n,
            tau: scheme.tau,
            denominator: Some(m),
            stable,
            blow_up: r.blow_up,
        });
        if stable {
            return Ok((Some((scheme.tau, Some(m), r)), trials));
        }
        m += 2;
    }
}
