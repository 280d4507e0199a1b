//! Fixed-step integrators.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A first-order system `dx/dt = f(t, x)`.
pub trait OdeSystem {
    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

impl<F> OdeSystem for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self(t, x, dx)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Trapezoidal,
    Euler,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rk4 => "rk4",
            Self::Trapezoidal => "trapezoidal",
            Self::Euler => "euler",
        }
    }

    pub fn is_explicit(self) -> bool {
        !matches!(self, Self::Trapezoidal)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "trapezoidal" => Ok(Self::Trapezoidal),
            "euler" => Ok(Self::Euler),
            _ => Err(Error::Parse(format!("unknown integration method `{s}`"))),
        }
    }
}

const NEWTON_MAX_ITER: usize = 20;
const NEWTON_TOL: f64 = 1e-12;

/// Reusable stepper holding the scratch buffers of one method.
#[derive(Clone, Debug)]
pub struct Stepper {
    method: Method,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(method: Method, dim: usize) -> Self {
        Self {
            method,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Advances `x` in place from `t` to `t + dt`.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, x: &mut [f64], dt: f64) {
        match self.method {
            Method::Euler => self.euler(sys, t, x, dt),
            Method::Rk4 => self.rk4(sys, t, x, dt),
            Method::Trapezoidal => self.trapezoidal(sys, t, x, dt),
        }
    }

    fn euler<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, x: &mut [f64], dt: f64) {
        let k = &mut self.k[0];
        sys.derivatives(t, x, k);
        for (xi, ki) in x.iter_mut().zip(k.iter()) {
            *xi += dt * ki;
        }
    }

    fn rk4<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, x: &mut [f64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let h2 = 0.5 * dt;

        sys.derivatives(t, x, k1);
        for i in 0..x.len() {
            tmp[i] = x[i] + h2 * k1[i];
        }
        sys.derivatives(t + h2, tmp, k2);
        for i in 0..x.len() {
            tmp[i] = x[i] + h2 * k2[i];
        }
        sys.derivatives(t + h2, tmp, k3);
        for i in 0..x.len() {
            tmp[i] = x[i] + dt * k3[i];
        }
        sys.derivatives(t + dt, tmp, k4);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Implicit trapezoidal rule solved by a modified Newton iteration with a
    /// finite-difference Jacobian formed once per step.
    fn trapezoidal<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, x: &mut [f64], dt: f64) {
        let n = x.len();
        let t1 = t + dt;
        let [f0, f1, fp, _] = &mut self.k;
        sys.derivatives(t, x, f0);

        // Euler predictor.
        let mut y: Vec<f64> = x.iter().zip(f0.iter()).map(|(a, b)| a + dt * b).collect();

        let mut jac = DMatrix::<f64>::identity(n, n);
        sys.derivatives(t1, &y, f1);
        let mut probe = y.clone();
        for j in 0..n {
            let h = 1e-7 * y[j].abs().max(1e-3);
            probe[j] = y[j] + h;
            sys.derivatives(t1, &probe, fp);
            probe[j] = y[j];
            for i in 0..n {
                jac[(i, j)] -= 0.5 * dt * (fp[i] - f1[i]) / h;
            }
        }
        let lu = jac.lu();

        for _ in 0..NEWTON_MAX_ITER {
            sys.derivatives(t1, &y, f1);
            let residual = DVector::from_iterator(
                n,
                (0..n).map(|i| -(y[i] - x[i] - 0.5 * dt * (f0[i] + f1[i]))),
            );
            let Some(delta) = lu.solve(&residual) else {
                break;
            };
            let mut norm = 0.0_f64;
            for i in 0..n {
                y[i] += delta[i];
                norm = norm.max(delta[i].abs() / y[i].abs().max(1.0));
            }
            if norm < NEWTON_TOL {
                break;
            }
        }
        x.copy_from_slice(&y);
    }
}

/// Integrates over `dt` with RK4 sub-steps no longer than `max_substep`.
pub(crate) fn rk4_substepped<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    x: &mut [f64],
    dt: f64,
    max_substep: f64,
) {
    let n = (dt / max_substep).ceil().max(1.0) as usize;
    let h = dt / n as f64;
    let mut stepper = Stepper::new(Method::Rk4, x.len());
    for k in 0..n {
        stepper.step(sys, t + k as f64 * h, x, h);
    }
}
