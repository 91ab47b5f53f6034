//! Pathwise solvers for multi-noise diffusions
//! `dy = u(t, y) dt + sum_k theta_k sigma_k(y) dB^k`
//! driven by a path sampled on a fine dyadic grid.
//!
//! [`solve_heun3`] applies Heun's third-order Runge–Kutta tableau
//! (c = 0, 1/3, 2/3; b = 1/4, 0, 3/4) to the one-step right-hand side in
//! which each driver increment enters as a constant rate `dB/h` across the
//! step — i.e. the driver is interpolated piecewise linearly.
//! [`solve_2d_linear_exact`] evaluates the closed-form solution
//! `y_t = exp(theta_1 A_1 B^1_t + theta_2 A_2 B^2_t) y_0` available when the
//! scaled matrices commute.

use crate::{Error, Result, SampledPath};

/// Time-dependent drift callback: `(t, state, out)`.
pub type DriftFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Autonomous vector-field callback: `(state, out)`. Also used for gradients.
pub type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
/// Scalar observable callback.
pub type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A drift plus `K` parameterized noise vector fields with nonnegative
/// coefficients; the diffusion reads
/// `dy = u(t, y) dt + sum_k theta_k sigma_k(y) dB^k`.
pub struct VectorFieldSet {
    dim: usize,
    drift: Box<DriftFn>,
    fields: Vec<Box<FieldFn>>,
    theta: Vec<f64>,
}

impl VectorFieldSet {
    pub fn new(
        dim: usize,
        drift: Box<DriftFn>,
        fields: Vec<Box<FieldFn>>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch("state dimension must be positive".into()));
        }
        if fields.is_empty() {
            return Err(Error::DimensionMismatch("need at least one noise field".into()));
        }
        if theta.len() != fields.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} fields",
                theta.len(),
                fields.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "coefficients must be finite and nonnegative, got {theta:?}"
            )));
        }
        Ok(Self { dim, drift, fields, theta })
    }

    /// Fields with zero drift.
    pub fn without_drift(dim: usize, fields: Vec<Box<FieldFn>>, theta: Vec<f64>) -> Result<Self> {
        Self::new(dim, Box::new(|_, _, out: &mut [f64]| out.fill(0.0)), fields, theta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn field(&self, k: usize) -> &FieldFn {
        &*self.fields[k]
    }

    pub fn eval_drift(&self, t: f64, state: &[f64], out: &mut [f64]) {
        (self.drift)(t, state, out);
    }

    pub fn eval_field(&self, k: usize, state: &[f64], out: &mut [f64]) {
        (self.fields[k])(state, out);
    }
}

/// A diffusion together with its driving path and initial state.
pub struct RdeProblem<'a> {
    pub fields: &'a VectorFieldSet,
    pub driver: &'a SampledPath,
    pub y0: Vec<f64>,
}

impl<'a> RdeProblem<'a> {
    pub fn new(fields: &'a VectorFieldSet, driver: &'a SampledPath, y0: Vec<f64>) -> Result<Self> {
        if driver.dim() != fields.num_fields() {
            return Err(Error::DimensionMismatch(format!(
                "driver has {} components for {} noise fields",
                driver.dim(),
                fields.num_fields()
            )));
        }
        if y0.len() != fields.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial state has dimension {} but fields expect {}",
                y0.len(),
                fields.dim()
            )));
        }
        Ok(Self { fields, driver, y0 })
    }
}

/// Action of a vector field on a scalar function:
/// `sigma[f](x) = sigma(x) · grad f(x)`.
pub fn field_action(sigma: &FieldFn, grad_f: &FieldFn, state: &[f64]) -> f64 {
    let d = state.len();
    let mut field = vec![0.0; d];
    let mut grad = vec![0.0; d];
    sigma(state, &mut field);
    grad_f(state, &mut grad);
    field.iter().zip(&grad).map(|(a, b)| a * b).sum()
}

/// Solves the diffusion with Heun's third-order method on the driver's grid,
/// returning the state at every fine-grid point. Fails with the step index
/// if the state leaves the finite range.
pub fn solve_heun3(problem: &RdeProblem) -> Result<SampledPath> {
    let fields = problem.fields;
    let driver = problem.driver;
    let dim = fields.dim();
    let num_fields = fields.num_fields();
    let steps = driver.num_intervals();
    let h = driver.mesh();
    let theta = fields.theta();

    let mut values = vec![0.0; (steps + 1) * dim];
    values[..dim].copy_from_slice(&problem.y0);

    let mut state = problem.y0.clone();
    let mut rates = vec![0.0; num_fields];
    let mut stage = vec![0.0; dim];
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut field_buf = vec![0.0; dim];

    let rhs = |t: f64, y: &[f64], rates: &[f64], out: &mut [f64], buf: &mut [f64]| {
        fields.eval_drift(t, y, out);
        for k in 0..num_fields {
            fields.eval_field(k, y, buf);
            let weight = theta[k] * rates[k];
            for j in 0..dim {
                out[j] += weight * buf[j];
            }
        }
    };

    for step in 0..steps {
        let t = driver.time(step);
        for (k, rate) in rates.iter_mut().enumerate() {
            *rate = (driver.value(step + 1, k) - driver.value(step, k)) / h;
        }
        rhs(t, &state, &rates, &mut k1, &mut field_buf);
        for j in 0..dim {
            stage[j] = state[j] + h / 3.0 * k1[j];
        }
        rhs(t + h / 3.0, &stage, &rates, &mut k2, &mut field_buf);
        for j in 0..dim {
            stage[j] = state[j] + 2.0 * h / 3.0 * k2[j];
        }
        rhs(t + 2.0 * h / 3.0, &stage, &rates, &mut k3, &mut field_buf);
        for j in 0..dim {
            state[j] += h / 4.0 * (k1[j] + 3.0 * k3[j]);
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        values[(step + 1) * dim..(step + 2) * dim].copy_from_slice(&state);
    }

    SampledPath::new(dim, driver.level(), driver.horizon(), values)
}

type Mat2 = [[f64; 2]; 2];

fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_scale(a: Mat2, s: f64) -> Mat2 {
    [[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]]
}

fn mat_frobenius(a: Mat2) -> f64 {
    (a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt()
}

/// Exact exponential of a 2x2 matrix.
///
/// Splitting off the trace leaves a traceless part `A` with `A^2 = q I`
/// (Cayley–Hamilton), so `exp(M) = e^{tr/2} (cosh(sqrt q) I + sinhc(sqrt q) A)`,
/// with the trigonometric branch for `q < 0` and a series near `q = 0`. The
/// formula is uniformly valid, including defective matrices.
fn mat_exp(m: Mat2) -> Mat2 {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let a = [[m[0][0] - mean, m[0][1]], [m[1][0], m[1][1] - mean]];
    let q = a[0][0] * a[0][0] + a[0][1] * a[1][0];
    let (cosh_part, sinhc_part) = if q.abs() < 1e-12 {
        (1.0 + q / 2.0 + q * q / 24.0, 1.0 + q / 6.0 + q * q / 120.0)
    } else if q > 0.0 {
        let s = q.sqrt();
        (s.cosh(), s.sinh() / s)
    } else {
        let w = (-q).sqrt();
        (w.cos(), w.sin() / w)
    };
    let e = mean.exp();
    [
        [e * (cosh_part + sinhc_part * a[0][0]), e * sinhc_part * a[0][1]],
        [e * sinhc_part * a[1][0], e * (cosh_part + sinhc_part * a[1][1])],
    ]
}

const COMMUTATOR_TOLERANCE: f64 = 1e-12;

/// Exact solution of `dy = theta_1 A_1 y dB^1 + theta_2 A_2 y dB^2` when
/// `theta_1 A_1` and `theta_2 A_2` commute:
/// `y_t = exp(theta_1 A_1 B^1_t + theta_2 A_2 B^2_t) y_0` at every grid point.
pub fn solve_2d_linear_exact(
    a1: Mat2,
    a2: Mat2,
    theta: [f64; 2],
    driver: &SampledPath,
    y0: [f64; 2],
) -> Result<SampledPath> {
    if driver.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "driver has {} components, expected 2",
            driver.dim()
        )));
    }
    let b1 = mat_scale(a1, theta[0]);
    let b2 = mat_scale(a2, theta[1]);
    let commutator = {
        let left = mat_mul(b1, b2);
        let right = mat_mul(b2, b1);
        [
            [left[0][0] - right[0][0], left[0][1] - right[0][1]],
            [left[1][0] - right[1][0], left[1][1] - right[1][1]],
        ]
    };
    let norm = mat_frobenius(commutator);
    let tolerance = COMMUTATOR_TOLERANCE * mat_frobenius(b1) * mat_frobenius(b2);
    if norm > tolerance {
        return Err(Error::NonCommuting { norm, tolerance });
    }

    let points = driver.num_points();
    let mut values = Vec::with_capacity(points * 2);
    for i in 0..points {
        let w1 = driver.value(i, 0);
        let w2 = driver.value(i, 1);
        let m = [
            [b1[0][0] * w1 + b2[0][0] * w2, b1[0][1] * w1 + b2[0][1] * w2],
            [b1[1][0] * w1 + b2[1][0] * w2, b1[1][1] * w1 + b2[1][1] * w2],
        ];
        let e = mat_exp(m);
        values.push(e[0][0] * y0[0] + e[0][1] * y0[1]);
        values.push(e[1][0] * y0[0] + e[1][1] * y0[1]);
    }
    SampledPath::new(2, driver.level(), driver.horizon(), values)
}
