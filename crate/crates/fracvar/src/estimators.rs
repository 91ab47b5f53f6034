//! Estimation of the scaling exponent / Hurst index and least-squares
//! recovery of noise coefficients from a single observed trajectory.
//!
//! The scaling exponent of a path is estimated from the ratio of its plain
//! quadratic variations at two observation levels. For dyadic grids the
//! natural pairing is levels `(n, n+1)` with mesh ratio 1/2, which gives the
//! Hurst estimator. Noise coefficients come from the linear system
//! `Y = X beta` with `beta_k = theta_k^2`, where `Y` collects scaled
//! quadratic variations of test observables along the trajectory and `X`
//! collects time quadratures of squared field actions. The least-squares
//! problem is solved through a Householder QR factorization rather than the
//! normal equations, so accuracy degrades with `kappa(X)` instead of
//! `kappa(X)^2`.

use serde::{Deserialize, Serialize};

use crate::rde::{field_action, FieldFn, ScalarFn, VectorFieldSet};
use crate::variation::{subsample, total_scaled_qv, total_scaled_qv_component};
use crate::{Error, Result, SampledPath};

/// Scaling-exponent estimate from quadratic-variation ratios at two levels.
#[derive(Clone, Copy, Debug)]
pub struct ScalingEstimate {
    /// Estimated exponent.
    pub gamma: f64,
    /// Ratio of plain quadratic variations, subsampled over base level.
    pub qv_ratio: f64,
    /// Ratio of the two meshes.
    pub mesh_ratio: f64,
    /// Base observation level.
    pub level: u32,
    /// Second observation level.
    pub sub_level: u32,
}

/// Hurst-index estimate at an observation level.
#[derive(Clone, Copy, Debug)]
pub struct HurstEstimate {
    pub value: f64,
    pub level: u32,
}

impl HurstEstimate {
    /// Whether the estimate lies in the index range (0, 1). Early levels can
    /// produce values outside it; they are reported verbatim so the caller
    /// can decide how to treat them.
    pub fn in_standard_range(&self) -> bool {
        self.value > 0.0 && self.value < 1.0
    }
}

/// A scalar observable together with its analytic gradient.
pub struct TestFunction {
    function: Box<ScalarFn>,
    gradient: Box<FieldFn>,
}

impl TestFunction {
    pub fn new(
        function: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { function: Box::new(function), gradient: Box::new(gradient) }
    }

    pub fn eval(&self, state: &[f64]) -> f64 {
        (self.function)(state)
    }

    pub fn gradient(&self) -> &FieldFn {
        &*self.gradient
    }
}

/// The family of observables entering the least-squares system. Full column
/// rank of the design requires at least as many functions as noise fields.
pub struct TestFunctionSet {
    functions: Vec<TestFunction>,
}

impl TestFunctionSet {
    pub fn new(functions: Vec<TestFunction>) -> Self {
        Self { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestFunction> {
        self.functions.iter()
    }
}

/// Observation vector, design matrix, and condition number of the
/// least-squares system for noise-coefficient recovery.
#[derive(Clone, Debug)]
pub struct DesignSystem {
    observation: Vec<f64>,
    design: Vec<f64>,
    num_functions: usize,
    num_fields: usize,
    kappa: f64,
}

impl DesignSystem {
    pub fn from_parts(observation: Vec<f64>, design: Vec<f64>, num_fields: usize) -> Result<Self> {
        let num_functions = observation.len();
        if design.len() != num_functions * num_fields {
            return Err(Error::DimensionMismatch(format!(
                "design has {} entries for a {}x{} system",
                design.len(),
                num_functions,
                num_fields
            )));
        }
        let kappa = condition_number(&design, num_functions, num_fields);
        Ok(Self { observation, design, num_functions, num_fields, kappa })
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn entry(&self, function: usize, field: usize) -> f64 {
        self.design[function * self.num_fields + field]
    }

    pub fn num_functions(&self) -> usize {
        self.num_functions
    }

    pub fn num_fields(&self) -> usize {
        self.num_fields
    }

    /// Frobenius-based condition number `|X| |(X^T X)^{-1} X^T|`, infinite
    /// when the columns are linearly dependent.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Noise-coefficient estimate: `theta_k = sqrt(max(beta_k, 0))`.
#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    /// Observation level, when the estimate came from a sampled trajectory.
    pub level: Option<u32>,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    /// Euclidean norm of `Y - X beta`.
    pub residual: f64,
    pub kappa: f64,
    /// Hurst index used for the variation exponent.
    pub used_hurst: Option<f64>,
    pub hurst_was_estimated: bool,
}

/// JSON record for a coefficient estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    pub n: Option<u32>,
    pub h_hat: Option<f64>,
    pub theta_hat: Vec<f64>,
    pub beta: Vec<f64>,
    pub kappa: f64,
    pub residual: f64,
    pub hurst_was_estimated: bool,
}

impl From<&ThetaEstimate> for EstimateRecord {
    fn from(estimate: &ThetaEstimate) -> Self {
        EstimateRecord {
            hurst: estimate.used_hurst,
            n: estimate.level,
            h_hat: if estimate.hurst_was_estimated { estimate.used_hurst } else { None },
            theta_hat: estimate.theta.clone(),
            beta: estimate.beta.clone(),
            kappa: estimate.kappa,
            residual: estimate.residual,
            hurst_was_estimated: estimate.hurst_was_estimated,
        }
    }
}

/// Estimates the scaling exponent from plain quadratic variations of the
/// same path observed at two levels with mesh ratio `mesh_ratio != 1`.
pub fn estimate_scaling_exponent(
    base: &SampledPath,
    other: &SampledPath,
    mesh_ratio: f64,
) -> Result<ScalingEstimate> {
    if !mesh_ratio.is_finite() || mesh_ratio <= 0.0 || mesh_ratio == 1.0 {
        return Err(Error::InvalidMeshRatio(mesh_ratio));
    }
    let base_qv = total_scaled_qv(base, 0.0);
    let other_qv = total_scaled_qv(other, 0.0);
    if !base_qv.is_finite() || base_qv <= 0.0 {
        return Err(Error::DegeneratePath(base_qv));
    }
    if !other_qv.is_finite() || other_qv <= 0.0 {
        return Err(Error::DegeneratePath(other_qv));
    }
    let qv_ratio = other_qv / base_qv;
    Ok(ScalingEstimate {
        gamma: -qv_ratio.ln() / mesh_ratio.ln(),
        qv_ratio,
        mesh_ratio,
        level: base.level(),
        sub_level: other.level(),
    })
}

/// Hurst estimate from observations at consecutive dyadic levels `n, n + 1`.
pub fn estimate_hurst_from_levels(
    coarse: &SampledPath,
    fine: &SampledPath,
) -> Result<HurstEstimate> {
    if fine.level() != coarse.level() + 1 || fine.horizon() != coarse.horizon() {
        return Err(Error::GridMismatch(format!(
            "expected consecutive levels over one horizon, got {} and {}",
            coarse.level(),
            fine.level()
        )));
    }
    let scaling = estimate_scaling_exponent(coarse, fine, 0.5)?;
    Ok(HurstEstimate { value: 0.5 * (1.0 - scaling.gamma), level: coarse.level() })
}

/// Subsamples the trajectory to levels `n` and `n + 1` and estimates the
/// Hurst index from the quadratic-variation ratio.
pub fn estimate_hurst(path: &SampledPath, level: u32) -> Result<HurstEstimate> {
    if level + 1 > path.level() {
        return Err(Error::LevelTooFine { target: level + 1, level: path.level() });
    }
    let coarse = subsample(path, level)?;
    let fine = subsample(path, level + 1)?;
    estimate_hurst_from_levels(&coarse, &fine)
}

/// Builds the least-squares system on the observation grid of `path`:
/// `Y_m` is the scaled quadratic variation of `f_m` along the trajectory at
/// the given exponent, `X_{mk}` the left-endpoint quadrature of
/// `sigma_k[f_m]^2`. The coefficients `theta` are excluded from the field
/// actions — they are what the solve recovers. `X` does not depend on the
/// exponent.
pub fn build_design(
    path: &SampledPath,
    fields: &VectorFieldSet,
    test_functions: &TestFunctionSet,
    exponent: f64,
) -> DesignSystem {
    assert_eq!(
        path.dim(),
        fields.dim(),
        "trajectory and vector fields disagree on the state dimension"
    );
    let num_functions = test_functions.len();
    let num_fields = fields.num_fields();
    let mesh = path.mesh();

    let mut observation = Vec::with_capacity(num_functions);
    let mut design = vec![0.0; num_functions * num_fields];
    for (m, function) in test_functions.iter().enumerate() {
        let observable = path.map_scalar(|state| function.eval(state));
        observation.push(total_scaled_qv_component(&observable, 0, exponent));
        for k in 0..num_fields {
            let mut sum = 0.0;
            for i in 0..path.num_intervals() {
                let action = field_action(fields.field(k), function.gradient(), path.row(i));
                sum += action * action;
            }
            design[m * num_fields + k] = sum * mesh;
        }
    }

    let kappa = condition_number(&design, num_functions, num_fields);
    DesignSystem { observation, design, num_functions, num_fields, kappa }
}

/// Solves `min |Y - X beta|` by Householder QR and maps to coefficients via
/// `theta = sqrt(clamp(beta, 0))`. Rank-deficient designs are rejected with
/// the condition number attached.
pub fn solve_theta(design: &DesignSystem) -> Result<ThetaEstimate> {
    let m = design.num_functions();
    let k = design.num_fields();
    let mut work = design.design().to_vec();
    let mut rhs = design.observation().to_vec();
    if !design.kappa().is_finite() || !qr_in_place(&mut work, m, k, Some(&mut rhs)) {
        return Err(Error::SingularDesign { kappa: design.kappa() });
    }
    let beta = back_substitute(&work, k, &rhs);
    let theta: Vec<f64> = beta.iter().map(|b| b.max(0.0).sqrt()).collect();

    let mut residual_sq = 0.0;
    for i in 0..m {
        let mut r = design.observation()[i];
        for (j, b) in beta.iter().enumerate() {
            r -= design.entry(i, j) * b;
        }
        residual_sq += r * r;
    }

    Ok(ThetaEstimate {
        level: None,
        beta,
        theta,
        residual: residual_sq.sqrt(),
        kappa: design.kappa(),
        used_hurst: None,
        hurst_was_estimated: false,
    })
}

/// Coefficient estimation with the Hurst index known: builds the design at
/// exponent `1 - 2H` on the trajectory's own grid and solves.
pub fn estimate_theta_known_hurst(
    path: &SampledPath,
    fields: &VectorFieldSet,
    test_functions: &TestFunctionSet,
    hurst: f64,
) -> Result<ThetaEstimate> {
    if !hurst.is_finite() || hurst <= 0.0 || hurst >= 1.0 {
        return Err(Error::InvalidHurst(hurst));
    }
    let design = build_design(path, fields, test_functions, 1.0 - 2.0 * hurst);
    let mut estimate = solve_theta(&design)?;
    estimate.level = Some(path.level());
    estimate.used_hurst = Some(hurst);
    estimate.hurst_was_estimated = false;
    Ok(estimate)
}

/// Coefficient estimation with the Hurst index estimated from the data: the
/// trajectory is observed at `level` (and `level + 1` for the Hurst ratio),
/// and the design uses exponent `1 - 2 H_n`. The design matrix is identical
/// to the known-index case; only the observation vector changes.
pub fn estimate_theta_unknown_hurst(
    path: &SampledPath,
    fields: &VectorFieldSet,
    test_functions: &TestFunctionSet,
    level: u32,
) -> Result<ThetaEstimate> {
    let hurst = estimate_hurst(path, level)?;
    let observed = subsample(path, level)?;
    let design = build_design(&observed, fields, test_functions, 1.0 - 2.0 * hurst.value);
    let mut estimate = solve_theta(&design)?;
    estimate.level = Some(level);
    estimate.used_hurst = Some(hurst.value);
    estimate.hurst_was_estimated = true;
    Ok(estimate)
}

/// Almost-sure convergence-rate scale for dyadic fBm quadratic variation
/// over `[0, 1]`: `2^{-n/2} sqrt(n)` for `H <= 1/2`, `2^{-n(1-H)} sqrt(n)`
/// above. Valid for Hurst indices in (0, 1) and levels `n >= 1`.
pub fn convergence_rate(hurst: f64, level: u32) -> f64 {
    let n = level as f64;
    if hurst <= 0.5 {
        2f64.powf(-n / 2.0) * n.sqrt()
    } else {
        2f64.powf(-n * (1.0 - hurst)) * n.sqrt()
    }
}

fn frobenius(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Householder QR of a row-major `m x k` matrix (in place), transforming an
/// optional right-hand side alongside. Returns false when a column norm
/// falls below the rank tolerance.
fn qr_in_place(a: &mut [f64], m: usize, k: usize, mut rhs: Option<&mut [f64]>) -> bool {
    if m < k || k == 0 {
        return false;
    }
    let scale = frobenius(a);
    if scale == 0.0 {
        return false;
    }
    let tolerance = f64::EPSILON * scale * m.max(k) as f64;
    let mut v = vec![0.0; m];
    for col in 0..k {
        let mut norm_sq = 0.0;
        for i in col..m {
            norm_sq += a[i * k + col] * a[i * k + col];
        }
        let norm = norm_sq.sqrt();
        if norm <= tolerance {
            return false;
        }
        // Reflection direction chosen to avoid cancellation.
        let alpha = if a[col * k + col] >= 0.0 { -norm } else { norm };
        let mut v_norm_sq = 0.0;
        for i in col..m {
            let vi = if i == col { a[i * k + col] - alpha } else { a[i * k + col] };
            v[i] = vi;
            v_norm_sq += vi * vi;
        }
        if v_norm_sq > 0.0 {
            for j in col + 1..k {
                let mut dot = 0.0;
                for i in col..m {
                    dot += v[i] * a[i * k + j];
                }
                let factor = 2.0 * dot / v_norm_sq;
                for i in col..m {
                    a[i * k + j] -= factor * v[i];
                }
            }
            if let Some(r) = rhs.as_deref_mut() {
                let mut dot = 0.0;
                for i in col..m {
                    dot += v[i] * r[i];
                }
                let factor = 2.0 * dot / v_norm_sq;
                for i in col..m {
                    r[i] -= factor * v[i];
                }
            }
        }
        a[col * k + col] = alpha;
        for i in col + 1..m {
            a[i * k + col] = 0.0;
        }
    }
    true
}

fn back_substitute(r: &[f64], k: usize, rhs: &[f64]) -> Vec<f64> {
    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = rhs[j];
        for l in j + 1..k {
            s -= r[j * k + l] * beta[l];
        }
        beta[j] = s / r[j * k + j];
    }
    beta
}

/// Frobenius norm of the inverse of the upper-triangular factor, which
/// equals the Frobenius norm of the pseudo-inverse of the full matrix.
fn r_inverse_frobenius(r: &[f64], k: usize) -> f64 {
    let mut total = 0.0;
    let mut z = vec![0.0; k];
    for col in 0..k {
        for j in (0..=col).rev() {
            let mut s = if j == col { 1.0 } else { 0.0 };
            for l in j + 1..=col {
                s -= r[j * k + l] * z[l];
            }
            z[j] = s / r[j * k + j];
        }
        for zj in z.iter().take(col + 1) {
            total += zj * zj;
        }
    }
    total.sqrt()
}

fn condition_number(design: &[f64], m: usize, k: usize) -> f64 {
    let mut work = design.to_vec();
    if !qr_in_place(&mut work, m, k, None) {
        return f64::INFINITY;
    }
    frobenius(design) * r_inverse_frobenius(&work, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{sample_fbm, FbmSampleRequest, HurstIndex};
    use crate::rde::FieldFn;

    fn linear_path(level: u32) -> SampledPath {
        SampledPath::from_scalar_fn(level, 1.0, |t| t)
    }

    /// Scalar path at one level with exactly scale-invariant increments:
    /// magnitude chosen so the exponent-`gamma` scaled variation is constant
    /// across levels, signs alternating.
    fn scale_invariant_path(level: u32, gamma: f64) -> SampledPath {
        let h = 2f64.powi(-(level as i32));
        let magnitude = h.powf(0.5 * (1.0 - gamma));
        let points = (1usize << level) + 1;
        let mut values = Vec::with_capacity(points);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..points - 1 {
            acc += if i % 2 == 0 { magnitude } else { -magnitude };
            values.push(acc);
        }
        SampledPath::new(1, level, 1.0, values).unwrap()
    }

    #[test]
    fn scaling_exponent_of_linear_path() {
        let base = linear_path(6);
        let finer = linear_path(7);
        let estimate = estimate_scaling_exponent(&base, &finer, 0.5).unwrap();
        assert_eq!(estimate.qv_ratio, 0.5);
        assert_eq!(estimate.gamma, -1.0);
    }

    #[test]
    fn scaling_exponent_recovers_synthetic_invariance() {
        for gamma in [-0.5, 0.0, 0.4] {
            let base = scale_invariant_path(8, gamma);
            let finer = scale_invariant_path(9, gamma);
            let estimate = estimate_scaling_exponent(&base, &finer, 0.5).unwrap();
            assert!(
                (estimate.gamma - gamma).abs() <= 1e-12,
                "gamma {gamma}: estimated {}",
                estimate.gamma
            );
        }
    }

    #[test]
    fn scaling_exponent_of_brownian_path_is_near_zero() {
        // H = 1/2 has the non-trivial exponent 1 - 2H = 0.
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.5).unwrap(),
            num_components: 1,
            fine_level: 15,
            horizon: 1.0,
            seed: 6,
        })
        .unwrap();
        let coarse = subsample(&path, 14).unwrap();
        let estimate = estimate_scaling_exponent(&coarse, &path, 0.5).unwrap();
        assert!(estimate.gamma.abs() < 0.1, "gamma {} not near 0", estimate.gamma);
    }

    #[test]
    fn scaling_exponent_rejects_degenerate_and_bad_ratio() {
        let flat = SampledPath::from_scalar_fn(5, 1.0, |_| 1.0);
        let base = linear_path(5);
        assert!(matches!(
            estimate_scaling_exponent(&flat, &base, 0.5),
            Err(Error::DegeneratePath(_))
        ));
        assert!(matches!(
            estimate_scaling_exponent(&base, &flat, 0.5),
            Err(Error::DegeneratePath(_))
        ));
        assert!(matches!(
            estimate_scaling_exponent(&base, &base, 1.0),
            Err(Error::InvalidMeshRatio(_))
        ));
    }

    #[test]
    fn hurst_of_linear_path_is_one() {
        let path = linear_path(10);
        let estimate = estimate_hurst(&path, 6).unwrap();
        assert_eq!(estimate.value, 1.0);
        // Boundary value 1 is excluded from the standard range.
        assert!(!estimate.in_standard_range());
    }

    #[test]
    fn hurst_matches_scaling_exponent_mapping_exactly() {
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.6).unwrap(),
            num_components: 1,
            fine_level: 12,
            horizon: 1.0,
            seed: 9,
        })
        .unwrap();
        let level = 9;
        let coarse = subsample(&path, level).unwrap();
        let fine = subsample(&path, level + 1).unwrap();
        let gamma = estimate_scaling_exponent(&coarse, &fine, 0.5).unwrap().gamma;
        let hurst = estimate_hurst(&path, level).unwrap();
        assert_eq!(hurst.value, 0.5 * (1.0 - gamma));
    }

    #[test]
    fn hurst_out_of_range_is_reported_verbatim() {
        // Synthetic per-level data with quadratic-variation ratio 1/4 maps to
        // an estimate of 3/2, outside (0, 1); it must come back unclamped.
        let coarse = scale_invariant_path(7, -2.0);
        let fine = scale_invariant_path(8, -2.0);
        let estimate = estimate_hurst_from_levels(&coarse, &fine).unwrap();
        assert!((estimate.value - 1.5).abs() <= 1e-12);
        assert!(!estimate.in_standard_range());
    }

    #[test]
    fn hurst_requires_one_spare_level() {
        let path = linear_path(6);
        assert!(matches!(estimate_hurst(&path, 6), Err(Error::LevelTooFine { .. })));
        assert!(estimate_hurst(&path, 5).is_ok());
    }

    fn constant_field() -> Box<FieldFn> {
        Box::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0)
    }

    fn identity_function() -> TestFunction {
        TestFunction::new(|y| y[0], |_, g| g[0] = 1.0)
    }

    #[test]
    fn design_time_quadrature_of_unit_action_is_horizon() {
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![1.0]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.5).unwrap(),
            num_components: 1,
            fine_level: 8,
            horizon: 1.0,
            seed: 21,
        })
        .unwrap();
        let design = build_design(&path, &fields, &test_functions, 0.0);
        assert_eq!(design.entry(0, 0), 1.0);
    }

    #[test]
    fn duplicate_fields_make_the_design_singular() {
        // Two identical unit fields in one dimension: the design columns
        // coincide, the condition number is infinite, and the solve fails.
        let fields = VectorFieldSet::without_drift(
            1,
            vec![constant_field(), constant_field()],
            vec![0.3, 0.7],
        )
        .unwrap();
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.5).unwrap(),
            num_components: 1,
            fine_level: 8,
            horizon: 1.0,
            seed: 4,
        })
        .unwrap();
        for test_functions in [
            TestFunctionSet::new(vec![identity_function(), TestFunction::new(|y| y[0] * y[0], |y, g| g[0] = 2.0 * y[0])]),
            TestFunctionSet::new(vec![
                TestFunction::new(|y| y[0].sin(), |y, g| g[0] = y[0].cos()),
                TestFunction::new(|y| y[0].cos(), |y, g| g[0] = -y[0].sin()),
            ]),
        ] {
            let design = build_design(&path, &fields, &test_functions, 0.0);
            assert!(design.kappa().is_infinite());
            assert!(matches!(solve_theta(&design), Err(Error::SingularDesign { .. })));
        }
    }

    #[test]
    fn constant_trajectory_gives_zero_observation() {
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![1.0]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let path = SampledPath::from_scalar_fn(6, 1.0, |_| 2.0);
        let design = build_design(&path, &fields, &test_functions, -0.2);
        assert_eq!(design.observation()[0], 0.0);
        assert_eq!(design.entry(0, 0), 1.0);
    }

    #[test]
    fn design_matrix_is_exponent_independent() {
        let fields = VectorFieldSet::without_drift(
            1,
            vec![Box::new(|y: &[f64], out: &mut [f64]| out[0] = y[0].sin()) as Box<FieldFn>],
            vec![1.0],
        )
        .unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let path = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.4).unwrap(),
            num_components: 1,
            fine_level: 7,
            horizon: 1.0,
            seed: 13,
        })
        .unwrap();
        let a = build_design(&path, &fields, &test_functions, 0.3);
        let b = build_design(&path, &fields, &test_functions, -0.4);
        assert_eq!(a.design(), b.design());
    }

    fn design_from_matrix(rows: &[&[f64]], observation: &[f64]) -> DesignSystem {
        let k = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DesignSystem::from_parts(observation.to_vec(), flat, k).unwrap()
    }

    #[test]
    fn identity_design_recovers_observations() {
        let design = design_from_matrix(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.25, 0.64]);
        let estimate = solve_theta(&design).unwrap();
        assert!((estimate.beta[0] - 0.25).abs() <= 1e-15);
        assert!((estimate.beta[1] - 0.64).abs() <= 1e-15);
        assert!((estimate.theta[0] - 0.5).abs() <= 1e-15);
        assert!((estimate.theta[1] - 0.8).abs() <= 1e-15);
        assert!(estimate.residual <= 1e-15);
    }

    #[test]
    fn zero_observation_gives_zero_coefficients() {
        let design = design_from_matrix(&[&[2.0, 1.0], &[1.0, 3.0], &[0.5, 0.5]], &[0.0, 0.0, 0.0]);
        let estimate = solve_theta(&design).unwrap();
        assert_eq!(estimate.beta, vec![0.0, 0.0]);
        assert_eq!(estimate.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn consistent_overdetermined_system_is_recovered_exactly() {
        // Y built from beta* = (1, 2); the solve must reproduce it.
        let rows: [&[f64]; 3] = [&[2.0, 0.0], &[0.0, 4.0], &[1.0, 1.0]];
        let beta_star = [1.0, 2.0];
        let observation: Vec<f64> = rows
            .iter()
            .map(|r| r[0] * beta_star[0] + r[1] * beta_star[1])
            .collect();
        let design = design_from_matrix(&rows, &observation);
        let estimate = solve_theta(&design).unwrap();
        assert!((estimate.beta[0] - 1.0).abs() <= 1e-12);
        assert!((estimate.beta[1] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn negative_components_clamp_to_zero() {
        let design = design_from_matrix(&[&[1.0, 0.0], &[0.0, 1.0]], &[-0.5, 0.36]);
        let estimate = solve_theta(&design).unwrap();
        assert_eq!(estimate.theta[0], 0.0);
        assert!((estimate.theta[1] - 0.6).abs() <= 1e-15);
        assert!(estimate.theta.iter().all(|t| t.is_finite()));
    }

    #[test]
    fn fully_analytic_unknown_hurst_chain() {
        // y_t = t, sigma = 1, f = id: H_n = 1, exponent -1, Y = X = 1.
        let path = linear_path(10);
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![1.0]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let estimate = estimate_theta_unknown_hurst(&path, &fields, &test_functions, 6).unwrap();
        assert_eq!(estimate.used_hurst, Some(1.0));
        assert!(estimate.hurst_was_estimated);
        assert!((estimate.beta[0] - 1.0).abs() <= 1e-12);
        assert!((estimate.theta[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn known_and_unknown_hurst_agree_when_estimate_matches() {
        // On y_t = t the Hurst estimate is exactly 1; feeding 1 - eps as the
        // known index changes only the observation scale, so check instead
        // that supplying the estimated index reproduces the unknown-H result.
        let path = linear_path(9);
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![1.0]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let unknown = estimate_theta_unknown_hurst(&path, &fields, &test_functions, 5).unwrap();
        let observed = subsample(&path, 5).unwrap();
        let h = unknown.used_hurst.unwrap();
        // h = 1 is outside the known-H validation range; build directly.
        let design = build_design(&observed, &fields, &test_functions, 1.0 - 2.0 * h);
        let known = solve_theta(&design).unwrap();
        assert_eq!(known.beta, unknown.beta);
        assert_eq!(known.theta, unknown.theta);
    }

    #[test]
    fn zero_noise_trajectory_estimates_vanishing_coefficients() {
        // Pure drift: dy = y dt via Heun on a zero driver, theta = 0.
        let driver = SampledPath::new(1, 12, 1.0, vec![0.0; (1 << 12) + 1]).unwrap();
        let fields = VectorFieldSet::new(
            1,
            Box::new(|_, y: &[f64], out: &mut [f64]| out[0] = y[0]),
            vec![Box::new(|y: &[f64], out: &mut [f64]| out[0] = y[0].sin()) as Box<FieldFn>],
            vec![0.0],
        )
        .unwrap();
        let problem = crate::rde::RdeProblem::new(&fields, &driver, vec![1.0]).unwrap();
        let trajectory = crate::rde::solve_heun3(&problem).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let estimate =
            estimate_theta_known_hurst(&trajectory, &fields, &test_functions, 0.5).unwrap();
        assert!(estimate.theta[0] <= 0.05, "theta {} should be near zero", estimate.theta[0]);
    }

    #[test]
    fn scalar_additive_noise_closed_form() {
        // d = 1, sigma = 1, y = theta* B: the design is X = T, so
        // beta = scaled QV of y over T, and theta ~ theta*.
        let theta_star = 0.6;
        let hurst = 0.5;
        let fbm = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(hurst).unwrap(),
            num_components: 1,
            fine_level: 14,
            horizon: 1.0,
            seed: 77,
        })
        .unwrap();
        let observed = subsample(&fbm, 12).unwrap().map_scalar(|b| theta_star * b[0]);
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![theta_star]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let estimate =
            estimate_theta_known_hurst(&observed, &fields, &test_functions, hurst).unwrap();
        let direct_beta = total_scaled_qv(&observed, 1.0 - 2.0 * hurst) / 1.0;
        assert!((estimate.beta[0] - direct_beta).abs() <= 1e-12 * direct_beta.abs());
        assert!((estimate.theta[0] - theta_star).abs() <= 0.05);
    }

    #[test]
    fn pipeline_scale_equivariance() {
        // Scaling the observed path by c scales Y by c^2 and theta by c when
        // the observables are linear and the fields constant.
        let fbm = sample_fbm(&FbmSampleRequest {
            hurst: HurstIndex::new(0.5).unwrap(),
            num_components: 1,
            fine_level: 10,
            horizon: 1.0,
            seed: 31,
        })
        .unwrap();
        let path = subsample(&fbm, 8).unwrap();
        let scaled = path.map_scalar(|y| 3.0 * y[0]);
        let fields =
            VectorFieldSet::without_drift(1, vec![constant_field()], vec![1.0]).unwrap();
        let test_functions = TestFunctionSet::new(vec![identity_function()]);
        let base = estimate_theta_known_hurst(&path, &fields, &test_functions, 0.5).unwrap();
        let rescaled = estimate_theta_known_hurst(&scaled, &fields, &test_functions, 0.5).unwrap();
        assert!((rescaled.theta[0] - 3.0 * base.theta[0]).abs() <= 1e-12 * rescaled.theta[0]);
    }

    #[test]
    fn convergence_rate_formula() {
        assert_eq!(convergence_rate(0.5, 4), 0.5);
        let expected = 2f64.powf(-2.7) * 3.0;
        assert!((convergence_rate(0.7, 9) - expected).abs() <= 1e-12 * expected);
        let expected = 2f64.powf(-0.5);
        assert!((convergence_rate(0.35, 1) - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn estimate_record_serializes_pinned_fields() {
        let estimate = ThetaEstimate {
            level: Some(8),
            beta: vec![0.25],
            theta: vec![0.5],
            residual: 0.0,
            kappa: 1.0,
            used_hurst: Some(0.5),
            hurst_was_estimated: false,
        };
        let record = EstimateRecord::from(&estimate);
        let json = serde_json::to_value(&record).unwrap();
        for key in ["H", "n", "h_hat", "theta_hat", "beta", "kappa", "residual", "hurst_was_estimated"] {
            assert!(json.get(key).is_some(), "missing field {key}");
        }
        assert_eq!(json["h_hat"], serde_json::Value::Null);
    }
}
