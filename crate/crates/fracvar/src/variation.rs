//! Scaled quadratic variation and covariation along uniform dyadic partitions.
//!
//! For a scalar path `x` observed on the level-`n` dyadic grid with spacing
//! `h`, the running scaled quadratic variation with exponent `gamma` is
//! `sum h^gamma (x_{t_{i+1}} - x_{t_i})^2` over the intervals contained in
//! `[0, t]`. Only uniform dyadic grids are supported, so the common factor
//! `h^gamma` is pulled out of the sum; prefix sums accumulate left to right
//! in plain f64, which keeps the running curve exactly nondecreasing.

use crate::{Error, Result, SampledPath};

/// A uniform dyadic partition of `[0, horizon]` identified by its level:
/// `2^level` intervals of mesh `horizon · 2^{-level}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionSpec {
    level: u32,
    horizon: f64,
}

impl PartitionSpec {
    pub fn new(level: u32, horizon: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidPath(format!("horizon must be positive, got {horizon}")));
        }
        if level > SampledPath::MAX_LEVEL {
            return Err(Error::InvalidPath(format!(
                "level {} exceeds maximum {}",
                level,
                SampledPath::MAX_LEVEL
            )));
        }
        Ok(Self { level, horizon })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn num_intervals(&self) -> usize {
        1usize << self.level
    }

    pub fn mesh(&self) -> f64 {
        self.horizon / self.num_intervals() as f64
    }
}

/// Running scaled variation sums at the points of a dyadic partition.
///
/// `values[i]` is the sum over the first `i` intervals; `values[0] = 0` and
/// the last entry is the full-horizon value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledVariationCurve {
    exponent: f64,
    level: u32,
    horizon: f64,
    values: Vec<f64>,
}

impl ScaledVariationCurve {
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of partition point `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / (1u64 << self.level) as f64
    }

    /// Value over the whole horizon.
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("curve has at least one point")
    }
}

/// Restricts a path to the coarser dyadic grid of `target_level`, keeping
/// every `2^{level - target_level}`-th point. Horizon and dimension are
/// unchanged.
pub fn subsample(path: &SampledPath, target_level: u32) -> Result<SampledPath> {
    if target_level > path.level() {
        return Err(Error::LevelTooFine { target: target_level, level: path.level() });
    }
    let stride = 1usize << (path.level() - target_level);
    let points = (1usize << target_level) + 1;
    let mut values = Vec::with_capacity(points * path.dim());
    for i in 0..points {
        values.extend_from_slice(path.row(i * stride));
    }
    SampledPath::new(path.dim(), target_level, path.horizon(), values)
}

fn running_scaled_products(
    x: &SampledPath,
    x_component: usize,
    z: &SampledPath,
    z_component: usize,
    exponent: f64,
) -> ScaledVariationCurve {
    let weight = x.mesh().powf(exponent);
    let mut values = Vec::with_capacity(x.num_points());
    values.push(0.0);
    let mut sum = 0.0;
    for i in 0..x.num_intervals() {
        let dx = x.value(i + 1, x_component) - x.value(i, x_component);
        let dz = z.value(i + 1, z_component) - z.value(i, z_component);
        sum += dx * dz;
        values.push(weight * sum);
    }
    ScaledVariationCurve { exponent, level: x.level(), horizon: x.horizon(), values }
}

fn component_final(path: &SampledPath, component: usize, exponent: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..path.num_intervals() {
        let d = path.value(i + 1, component) - path.value(i, component);
        sum += d * d;
    }
    path.mesh().powf(exponent) * sum
}

/// Running scaled quadratic variation of a scalar path.
pub fn scaled_qv(x: &SampledPath, exponent: f64) -> Result<ScaledVariationCurve> {
    if x.dim() != 1 {
        return Err(Error::NotScalar(x.dim()));
    }
    Ok(running_scaled_products(x, 0, x, 0, exponent))
}

/// Running scaled covariation of two scalar paths on the same grid.
pub fn scaled_cov(x: &SampledPath, z: &SampledPath, exponent: f64) -> Result<ScaledVariationCurve> {
    if x.dim() != 1 {
        return Err(Error::NotScalar(x.dim()));
    }
    if z.dim() != 1 {
        return Err(Error::NotScalar(z.dim()));
    }
    if x.level() != z.level() || x.horizon() != z.horizon() {
        return Err(Error::GridMismatch(format!(
            "levels {} vs {}, horizons {} vs {}",
            x.level(),
            z.level(),
            x.horizon(),
            z.horizon()
        )));
    }
    Ok(running_scaled_products(x, 0, z, 0, exponent))
}

/// Full-horizon scaled quadratic variation summed over all components.
pub fn total_scaled_qv(path: &SampledPath, exponent: f64) -> f64 {
    (0..path.dim()).map(|c| component_final(path, c, exponent)).sum()
}

pub(crate) fn total_scaled_qv_component(path: &SampledPath, component: usize, exponent: f64) -> f64 {
    component_final(path, component, exponent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_path(level: u32) -> SampledPath {
        SampledPath::from_scalar_fn(level, 1.0, |t| t)
    }

    #[test]
    fn subsample_level_three_to_one() {
        let path = SampledPath::from_scalar_fn(3, 1.0, |t| t * t);
        let sub = subsample(&path, 1).unwrap();
        assert_eq!(sub.num_points(), 3);
        assert_eq!(sub.value(0, 0), path.value(0, 0));
        assert_eq!(sub.value(1, 0), path.value(4, 0));
        assert_eq!(sub.value(2, 0), path.value(8, 0));
    }

    #[test]
    fn subsample_to_own_level_is_identity() {
        let path = SampledPath::from_scalar_fn(5, 2.0, |t| t.sin());
        assert_eq!(subsample(&path, 5).unwrap(), path);
    }

    #[test]
    fn subsample_linear_path() {
        let sub = subsample(&linear_path(10), 4).unwrap();
        for i in 0..=16 {
            assert_eq!(sub.value(i, 0), i as f64 / 16.0);
        }
    }

    #[test]
    fn subsample_rejects_finer_target() {
        let err = subsample(&linear_path(4), 6).unwrap_err();
        assert!(matches!(err, Error::LevelTooFine { target: 6, level: 4 }));
    }

    #[test]
    fn constant_path_has_zero_curve() {
        let path = SampledPath::from_scalar_fn(7, 1.0, |_| 3.25);
        for exponent in [-1.0, 0.0, 0.5] {
            let curve = scaled_qv(&path, exponent).unwrap();
            assert!(curve.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_path_inverse_mesh_exponent() {
        // Each term is h^{-1} h^2 = h, summed 2^n times: exactly 1 on [0, 1].
        for level in [3, 8, 12] {
            let curve = scaled_qv(&linear_path(level), -1.0).unwrap();
            assert_eq!(curve.final_value(), 1.0);
        }
    }

    #[test]
    fn linear_path_flat_exponent() {
        let curve = scaled_qv(&linear_path(9), 0.0).unwrap();
        assert_eq!(curve.final_value(), 2f64.powi(-9));
    }

    #[test]
    fn covariation_of_path_with_itself_is_qv() {
        let path = SampledPath::from_scalar_fn(6, 1.0, |t| (5.0 * t).sin());
        let qv = scaled_qv(&path, 0.3).unwrap();
        let cov = scaled_cov(&path, &path, 0.3).unwrap();
        assert_eq!(qv.values(), cov.values());
    }

    #[test]
    fn polarization_identity() {
        let x = SampledPath::from_scalar_fn(8, 1.0, |t| (3.0 * t).sin());
        let z = SampledPath::from_scalar_fn(8, 1.0, |t| t * t - 0.5 * t);
        let sum = SampledPath::from_scalar_fn(8, 1.0, |t| (3.0 * t).sin() + t * t - 0.5 * t);
        let diff = SampledPath::from_scalar_fn(8, 1.0, |t| (3.0 * t).sin() - (t * t - 0.5 * t));
        let gamma = -0.3;
        let cov = scaled_cov(&x, &z, gamma).unwrap();
        let qv_sum = scaled_qv(&sum, gamma).unwrap();
        let qv_diff = scaled_qv(&diff, gamma).unwrap();
        let scale = cov
            .values()
            .iter()
            .map(|v| v.abs())
            .fold(1e-300, f64::max);
        for i in 0..cov.len() {
            let rhs = 0.25 * (qv_sum.values()[i] - qv_diff.values()[i]);
            assert!(
                (cov.values()[i] - rhs).abs() <= 1e-12 * scale,
                "entry {i}: {} vs {}",
                cov.values()[i],
                rhs
            );
        }
    }

    #[test]
    fn covariation_of_scaled_linear_paths() {
        let x = linear_path(7);
        let z = SampledPath::from_scalar_fn(7, 1.0, |t| 2.0 * t);
        let cov = scaled_cov(&x, &z, -1.0).unwrap();
        assert_eq!(cov.final_value(), 2.0);
    }

    #[test]
    fn covariation_rejects_mismatched_grids() {
        let x = linear_path(5);
        let z = linear_path(6);
        assert!(matches!(scaled_cov(&x, &z, 0.0), Err(Error::GridMismatch(_))));
        let w = SampledPath::from_scalar_fn(5, 2.0, |t| t);
        assert!(matches!(scaled_cov(&x, &w, 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn total_qv_sums_components() {
        // y = (t, t) on [0, 1] with exponent -1: each component contributes 1.
        let points = (1usize << 6) + 1;
        let mut values = Vec::with_capacity(points * 2);
        for i in 0..points {
            let t = i as f64 / 64.0;
            values.push(t);
            values.push(t);
        }
        let path = SampledPath::new(2, 6, 1.0, values).unwrap();
        assert_eq!(total_scaled_qv(&path, -1.0), 2.0);
    }

    #[test]
    fn total_qv_of_constant_path_is_zero() {
        let path = SampledPath::new(2, 4, 1.0, vec![7.0; 17 * 2]).unwrap();
        assert_eq!(total_scaled_qv(&path, -1.0), 0.0);
    }

    #[test]
    fn curves_are_nondecreasing() {
        let path = SampledPath::from_scalar_fn(10, 1.0, |t| (17.0 * t).sin() + t);
        let curve = scaled_qv(&path, -0.4).unwrap();
        for w in curve.values().windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn exponent_rescaling_identity() {
        // At finite n the exponent only enters through the common factor:
        // value_beta = 2^{-n(beta - gamma)} value_gamma on [0, 1].
        let path = SampledPath::from_scalar_fn(9, 1.0, |t| (7.0 * t).cos());
        let gamma = -0.8;
        let beta = 0.4;
        let a = scaled_qv(&path, beta).unwrap().final_value();
        let b = scaled_qv(&path, gamma).unwrap().final_value();
        let predicted = 2f64.powf(-9.0 * (beta - gamma)) * b;
        assert!((a - predicted).abs() <= 1e-12 * a.abs().max(predicted.abs()));
    }

    #[test]
    fn partition_spec_mesh() {
        let spec = PartitionSpec::new(4, 2.0).unwrap();
        assert_eq!(spec.num_intervals(), 16);
        assert_eq!(spec.mesh(), 0.125);
        assert!(PartitionSpec::new(3, -1.0).is_err());
    }
}
