//! Exact solutions with analytic forcing, and error norms of discrete fields against them.

use crate::error::{Error, Result};
use crate::fe_space::{rt_interpolate, CoefVec, RtSpace, TriangleRule};
use crate::scalar::{Mat2, Real, Vec2};

/// A smooth solution of the incompressible Navier–Stokes equations on the unit square together
/// with the forcing that produces it.
pub trait ExactProblem<T: Real>: Send + Sync {
    fn velocity(&self, x: Vec2<T>, t: T) -> Vec2<T>;
    /// `grad[i][j] = ∂u_i/∂x_j`.
    fn velocity_grad(&self, x: Vec2<T>, t: T) -> Mat2<T>;
    fn velocity_dt(&self, x: Vec2<T>, t: T) -> Vec2<T>;
    fn pressure(&self, x: Vec2<T>, t: T) -> T;
    fn forcing(&self, x: Vec2<T>, t: T) -> Vec2<T>;
    fn forcing_dt(&self, x: Vec2<T>, t: T) -> Vec2<T>;
    fn nu(&self) -> T;

    /// Number of spatial modes `F_i` in an optional split `f(x, t) = Σ_i a_i(t) F_i(x)`.
    /// A nonzero count lets load vectors be assembled once per mode and then combined.
    fn forcing_modes(&self) -> usize {
        0
    }
    /// `F_i(x)`.
    fn forcing_mode(&self, _i: usize, _x: Vec2<T>) -> Vec2<T> {
        [T::zero(), T::zero()]
    }
    /// `(a_i(t), a_i'(t))` for every mode.
    fn forcing_coefficients(&self, _t: T) -> Vec<(T, T)> {
        Vec::new()
    }
}

/// `u = cos(2πt) (sin 2πx cos 2πy, −cos 2πx sin 2πy)`, `p = cos(2πt)(cos 4πx + cos 4πy)`.
///
/// With `U` the spatial velocity profile and `S = (sin 4πx, sin 4πy)`:
/// `(U·∇)U = πS`, `ΔU = −8π²U`, `∇(cos 4πx + cos 4πy) = −4πS`, hence
/// `f = −2π sin(2πt) U + 8π²ν cos(2πt) U + π cos²(2πt) S − 4π cos(2πt) S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorGreen<T> {
    nu: T,
}

pub fn taylor_green<T: Real>(nu: T) -> Result<TaylorGreen<T>> {
    if !(nu >= T::zero()) {
        return Err(Error::InvalidArgument(format!("viscosity must be >= 0, got {nu}")));
    }
    Ok(TaylorGreen { nu })
}

impl<T: Real> TaylorGreen<T> {
    fn profile(x: Vec2<T>) -> Vec2<T> {
        let tp = T::TAU();
        let (sx, cx) = (tp * x[0]).sin_cos();
        let (sy, cy) = (tp * x[1]).sin_cos();
        [sx * cy, -cx * sy]
    }

    fn s_field(x: Vec2<T>) -> Vec2<T> {
        let fp = T::lit(2.0) * T::TAU();
        [(fp * x[0]).sin(), (fp * x[1]).sin()]
    }
}

impl<T: Real> ExactProblem<T> for TaylorGreen<T> {
    fn velocity(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let c = (T::TAU() * t).cos();
        Self::profile(x).map(|v| c * v)
    }

    fn velocity_grad(&self, x: Vec2<T>, t: T) -> Mat2<T> {
        let tp = T::TAU();
        let c = (tp * t).cos() * tp;
        let (sx, cx) = (tp * x[0]).sin_cos();
        let (sy, cy) = (tp * x[1]).sin_cos();
        [[c * cx * cy, -c * sx * sy], [c * sx * sy, -c * cx * cy]]
    }

    fn velocity_dt(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let tp = T::TAU();
        let d = -tp * (tp * t).sin();
        Self::profile(x).map(|v| d * v)
    }

    fn pressure(&self, x: Vec2<T>, t: T) -> T {
        let fp = T::lit(2.0) * T::TAU();
        (T::TAU() * t).cos() * ((fp * x[0]).cos() + (fp * x[1]).cos())
    }

    fn forcing(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let pi = T::PI();
        let (s, c) = (T::TAU() * t).sin_cos();
        let a = -T::lit(2.0) * pi * s + T::lit(8.0) * pi * pi * self.nu * c;
        let b = pi * c * c - T::lit(4.0) * pi * c;
        let (u, sf) = (Self::profile(x), Self::s_field(x));
        [a * u[0] + b * sf[0], a * u[1] + b * sf[1]]
    }

    fn forcing_dt(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let pi = T::PI();
        let (s, c) = (T::TAU() * t).sin_cos();
        let s2 = (T::lit(2.0) * T::TAU() * t).sin();
        let a = -T::lit(4.0) * pi * pi * c - T::lit(16.0) * pi * pi * pi * self.nu * s;
        let b = -T::lit(2.0) * pi * pi * s2 + T::lit(8.0) * pi * pi * s;
        let (u, sf) = (Self::profile(x), Self::s_field(x));
        [a * u[0] + b * sf[0], a * u[1] + b * sf[1]]
    }

    fn nu(&self) -> T {
        self.nu
    }

    fn forcing_modes(&self) -> usize {
        2
    }

    fn forcing_mode(&self, i: usize, x: Vec2<T>) -> Vec2<T> {
        if i == 0 {
            Self::profile(x)
        } else {
            Self::s_field(x)
        }
    }

    fn forcing_coefficients(&self, t: T) -> Vec<(T, T)> {
        let pi = T::PI();
        let (s, c) = (T::TAU() * t).sin_cos();
        let s2 = (T::lit(2.0) * T::TAU() * t).sin();
        let nu = self.nu;
        vec![
            (
                -T::lit(2.0) * pi * s + T::lit(8.0) * pi * pi * nu * c,
                -T::lit(4.0) * pi * pi * c - T::lit(16.0) * pi * pi * pi * nu * s,
            ),
            (
                pi * c * c - T::lit(4.0) * pi * c,
                -T::lit(2.0) * pi * pi * s2 + T::lit(8.0) * pi * pi * s,
            ),
        ]
    }
}

type ScalarFn<T> = Box<dyn Fn(Vec2<T>) -> T + Send + Sync>;
type VectorFn<T> = Box<dyn Fn(Vec2<T>) -> Vec2<T> + Send + Sync>;

/// `base` with a time-independent pressure `φ` added, so the forcing gains `∇φ` and the
/// velocity is unchanged.
pub struct PressureShifted<P, T> {
    base: P,
    phi: ScalarFn<T>,
    grad_phi: VectorFn<T>,
}

impl<P, T: Real> PressureShifted<P, T> {
    pub fn new(
        base: P,
        phi: impl Fn(Vec2<T>) -> T + Send + Sync + 'static,
        grad_phi: impl Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            base,
            phi: Box::new(phi),
            grad_phi: Box::new(grad_phi),
        }
    }
}

impl<P: ExactProblem<T>, T: Real> ExactProblem<T> for PressureShifted<P, T> {
    fn velocity(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        self.base.velocity(x, t)
    }
    fn velocity_grad(&self, x: Vec2<T>, t: T) -> Mat2<T> {
        self.base.velocity_grad(x, t)
    }
    fn velocity_dt(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        self.base.velocity_dt(x, t)
    }
    fn pressure(&self, x: Vec2<T>, t: T) -> T {
        self.base.pressure(x, t) + (self.phi)(x)
    }
    fn forcing(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        let f = self.base.forcing(x, t);
        let g = (self.grad_phi)(x);
        [f[0] + g[0], f[1] + g[1]]
    }
    fn forcing_dt(&self, x: Vec2<T>, t: T) -> Vec2<T> {
        self.base.forcing_dt(x, t)
    }
    fn nu(&self) -> T {
        self.base.nu()
    }
    /// The base modes followed by `∇φ` with constant coefficient 1; no split when the base
    /// has none.
    fn forcing_modes(&self) -> usize {
        match self.base.forcing_modes() {
            0 => 0,
            m => m + 1,
        }
    }
    fn forcing_mode(&self, i: usize, x: Vec2<T>) -> Vec2<T> {
        if i < self.base.forcing_modes() {
            self.base.forcing_mode(i, x)
        } else {
            (self.grad_phi)(x)
        }
    }
    fn forcing_coefficients(&self, t: T) -> Vec<(T, T)> {
        let mut out = self.base.forcing_coefficients(t);
        out.push((T::one(), T::zero()));
        out
    }
}

/// `u_h⁰ = Π_RT u(·, 0)`, boundary dofs taken from the exact normal trace.
pub fn initial_condition<T: Real>(space: &RtSpace<T>, problem: &dyn ExactProblem<T>) -> CoefVec<T> {
    rt_interpolate(|x| problem.velocity(x, T::zero()), space, true)
}

/// L² velocity error, broken H¹ seminorm error and L² divergence of a discrete field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms<T> {
    pub l2: T,
    pub h1: T,
    pub div: T,
}

/// Default error quadrature order `2k + 5`.
pub fn error_order(k: usize) -> usize {
    2 * k + 5
}

/// All three norms in one pass with a rule of total degree `order`.
pub fn error_norms<T: Real>(
    space: &RtSpace<T>,
    coeffs: &CoefVec<T>,
    problem: &dyn ExactProblem<T>,
    t: T,
    order: usize,
) -> Result<ErrorNorms<T>> {
    space.check(coeffs)?;
    let rule = TriangleRule::<T>::with_order(order);
    let mesh = space.mesh();
    let (mut l2, mut h1, mut div) = (T::zero(), T::zero(), T::zero());
    for c in 0..mesh.n_cells() {
        let g = mesh.geometry(c);
        for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
            let x = g.map(xi);
            let e = space.evaluate_unchecked(coeffs.values(), c, xi);
            let u = problem.velocity(x, t);
            let gu = problem.velocity_grad(x, t);
            let wt = w * g.det;
            l2 += wt * ((u[0] - e.value[0]).powi(2) + (u[1] - e.value[1]).powi(2));
            let mut gd = T::zero();
            for i in 0..2 {
                for j in 0..2 {
                    gd += (gu[i][j] - e.grad[i][j]).powi(2);
                }
            }
            h1 += wt * gd;
            div += wt * e.div * e.div;
        }
    }
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1: h1.sqrt(),
        div: div.sqrt(),
    })
}

pub fn l2_error<T: Real>(space: &RtSpace<T>, coeffs: &CoefVec<T>, problem: &dyn ExactProblem<T>, t: T) -> Result<T> {
    Ok(error_norms(space, coeffs, problem, t, error_order(space.degree()))?.l2)
}

pub fn h1_broken_error<T: Real>(
    space: &RtSpace<T>,
    coeffs: &CoefVec<T>,
    problem: &dyn ExactProblem<T>,
    t: T,
) -> Result<T> {
    Ok(error_norms(space, coeffs, problem, t, error_order(space.degree()))?.h1)
}

/// `‖div_h u_h‖_{L²}`.
pub fn div_norm<T: Real>(space: &RtSpace<T>, coeffs: &CoefVec<T>) -> Result<T> {
    space.check(coeffs)?;
    let rule = TriangleRule::<T>::with_order(error_order(space.degree()));
    let mesh = space.mesh();
    let mut acc = T::zero();
    for c in 0..mesh.n_cells() {
        let g = mesh.geometry(c);
        for (&xi, &w) in rule.points.iter().zip(&rule.weights) {
            let d = space.evaluate_unchecked(coeffs.values(), c, xi).div;
            acc += w * g.det * d * d;
        }
    }
    Ok(acc.sqrt())
}

/// Observed rates `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`; `None` where an error is not a
/// positive finite number.
pub fn rate_table(h: &[f64], e: &[f64]) -> Result<Vec<Option<f64>>> {
    if h.len() != e.len() {
        return Err(Error::InvalidArgument(format!(
            "{} mesh sizes but {} errors",
            h.len(),
            e.len()
        )));
    }
    if h.windows(2).any(|w| !(w[1] < w[0])) || h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and strictly decreasing".into()));
    }
    let ok = |x: f64| x.is_finite() && x > 0.0;
    Ok(h.windows(2)
        .zip(e.windows(2))
        .map(|(hw, ew)| {
            if ok(ew[0]) && ok(ew[1]) {
                Some((ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
            } else {
                None
            }
        })
        .collect())
}
