//! Bounded calibration domain and space-filling initial designs.
//!
//! All internal math runs in unit-cube coordinates; original units only
//! appear at the simulator boundary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::error::{CalibError, Result};

/// A named, bounded calibration parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Ordered set of bounded calibration parameters; the feasible box.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        if params.is_empty() {
            return Err(CalibError::InvalidSpace("at least one parameter required".into()));
        }
        let mut names = HashSet::new();
        for p in &params {
            if !(p.lower < p.upper) {
                return Err(CalibError::InvalidSpace(format!(
                    "parameter {}: lower {} must be < upper {}",
                    p.name, p.lower, p.upper
                )));
            }
            if !names.insert(p.name.clone()) {
                return Err(CalibError::InvalidSpace(format!("duplicate parameter name {}", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// Convenience constructor from (name, lower, upper) triples.
    pub fn from_bounds(bounds: &[(&str, f64, f64)]) -> Result<Self> {
        Self::new(
            bounds
                .iter()
                .map(|(n, l, u)| Parameter { name: n.to_string(), lower: *l, upper: *u })
                .collect(),
        )
    }

    /// The unit cube in `d` dimensions with generated names.
    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| Parameter { name: format!("x{i}"), lower: 0.0, upper: 1.0 })
                .collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dimension()
            && self
                .params
                .iter()
                .zip(values)
                .all(|(p, &v)| v >= p.lower && v <= p.upper)
    }
}

/// A point of the calibration domain in original units.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    values: Vec<f64>,
}

impl DesignPoint {
    /// Bounds are enforced on construction.
    pub fn new(values: Vec<f64>, space: &ParameterSpace) -> Result<Self> {
        if values.len() != space.dimension() {
            return Err(CalibError::DimensionMismatch {
                expected: space.dimension(),
                got: values.len(),
            });
        }
        if !space.contains(&values) {
            return Err(CalibError::OutOfBounds(format!("{values:?} outside parameter bounds")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A generated design together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub points: Vec<DesignPoint>,
    pub seed: u64,
}

/// Affine map from original units to the unit cube.
pub fn scale_to_unit(p: &DesignPoint, s: &ParameterSpace) -> Result<Vec<f64>> {
    if p.values().len() != s.dimension() {
        return Err(CalibError::DimensionMismatch { expected: s.dimension(), got: p.values().len() });
    }
    Ok(p.values()
        .iter()
        .zip(s.params())
        .map(|(&v, prm)| (v - prm.lower) / (prm.upper - prm.lower))
        .collect())
}

/// Affine map from the unit cube back to original units.
pub fn unscale(u: &[f64], s: &ParameterSpace) -> Result<DesignPoint> {
    if u.len() != s.dimension() {
        return Err(CalibError::DimensionMismatch { expected: s.dimension(), got: u.len() });
    }
    if u.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(CalibError::OutOfBounds(format!("{u:?} not in [0,1]^d")));
    }
    let values = u
        .iter()
        .zip(s.params())
        .map(|(&x, prm)| prm.lower + x * (prm.upper - prm.lower))
        .collect();
    DesignPoint::new(values, s)
}

/// Latin hypercube sample of `n` points: every coordinate occupies each of
/// the `n` equal-width bins exactly once, with a uniform random offset
/// inside each bin. Deterministic for a fixed seed.
pub fn latin_hypercube(n: usize, s: &ParameterSpace, seed: u64) -> Result<SampleSet> {
    let unit = latin_hypercube_unit(n, s.dimension(), seed)?;
    let points = unit
        .into_iter()
        .map(|u| unscale(&u, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet { points, seed })
}

/// Latin hypercube in the unit cube, as raw coordinate vectors.
pub fn latin_hypercube_unit(n: usize, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(CalibError::InvalidArgument("latin hypercube needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![vec![0.0; n]; d];
    for col in coords.iter_mut() {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for (i, &bin) in perm.iter().enumerate() {
            let offset: f64 = rng.gen();
            col[i] = (bin as f64 + offset) / n as f64;
        }
    }
    Ok((0..n).map(|i| (0..d).map(|j| coords[j][i]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1_space() -> ParameterSpace {
        ParameterSpace::from_bounds(&[
            ("HBO_B_male_taxi", 0.298, 2.298),
            ("NHB_B_dens_bike", 6.601, 8.601),
            ("HBO_ASC_TAXI", 2.34, 4.34),
            ("THETAR_WORK", -8.553, -6.553),
            ("GAMMA_SERVICE", 7.038, 9.038),
        ])
        .unwrap()
    }

    #[test]
    fn space_rejects_bad_bounds() {
        assert!(ParameterSpace::from_bounds(&[("a", 1.0, 1.0)]).is_err());
        assert!(ParameterSpace::from_bounds(&[("a", 0.0, 1.0), ("a", 0.0, 1.0)]).is_err());
        assert!(ParameterSpace::new(vec![]).is_err());
    }

    #[test]
    fn scale_lower_bound_is_zero() {
        let s = table1_space();
        let lo: Vec<f64> = s.params().iter().map(|p| p.lower).collect();
        let p = DesignPoint::new(lo, &s).unwrap();
        let u = scale_to_unit(&p, &s).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scale_midpoint_taxi_param() {
        let s = ParameterSpace::from_bounds(&[("HBO_B_male_taxi", 0.298, 2.298)]).unwrap();
        let p = DesignPoint::new(vec![1.298], &s).unwrap();
        let u = scale_to_unit(&p, &s).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unscale_ones_is_upper_bound() {
        let s = table1_space();
        let p = unscale(&vec![1.0; 5], &s).unwrap();
        for (v, prm) in p.values().iter().zip(s.params()) {
            assert_eq!(*v, prm.upper);
        }
    }

    #[test]
    fn unscale_midpoint_gamma_service() {
        let s = ParameterSpace::from_bounds(&[("GAMMA_SERVICE", 7.038, 9.038)]).unwrap();
        let p = unscale(&[0.5], &s).unwrap();
        assert!((p.values()[0] - 8.038).abs() < 1e-12);
    }

    #[test]
    fn unscale_rejects_out_of_range() {
        let s = table1_space();
        assert!(unscale(&[0.5, 0.5, 0.5, 0.5, 1.5], &s).is_err());
    }

    #[test]
    fn round_trip_random_points() {
        let s = table1_space();
        let set = latin_hypercube(100, &s, 7).unwrap();
        for p in &set.points {
            let u = scale_to_unit(p, &s).unwrap();
            let back = unscale(&u, &s).unwrap();
            for (a, b) in p.values().iter().zip(back.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn bin_histogram(points: &[Vec<f64>], dim: usize, n: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n];
        for p in points {
            let bin = ((p[dim] * n as f64) as usize).min(n - 1);
            counts[bin] += 1;
        }
        counts
    }

    #[test]
    fn lhs_16_by_5_fills_every_bin() {
        let pts = latin_hypercube_unit(16, 5, 3).unwrap();
        assert_eq!(pts.len(), 16);
        for d in 0..5 {
            assert!(bin_histogram(&pts, d, 16).iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn lhs_single_point_strictly_inside() {
        let s = table1_space();
        let set = latin_hypercube(1, &s, 11).unwrap();
        assert_eq!(set.points.len(), 1);
        for (v, prm) in set.points[0].values().iter().zip(s.params()) {
            assert!(*v >= prm.lower && *v <= prm.upper);
        }
    }

    #[test]
    fn lhs_bin_indices_are_permutation() {
        // Direct bin-count oracle: n=4, d=2 must hit bins {0,1,2,3} once per axis.
        let pts = latin_hypercube_unit(4, 2, 42).unwrap();
        for d in 0..2 {
            let mut bins: Vec<usize> = pts.iter().map(|p| ((p[d] * 4.0) as usize).min(3)).collect();
            bins.sort_unstable();
            assert_eq!(bins, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn lhs_rejects_zero_points() {
        assert!(latin_hypercube_unit(0, 3, 1).is_err());
    }

    #[test]
    fn lhs_deterministic_for_seed() {
        let a = latin_hypercube_unit(16, 5, 99).unwrap();
        let b = latin_hypercube_unit(16, 5, 99).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn lhs_one_point_per_bin(n in 1usize..64, d in 1usize..10, seed in 0u64..1000) {
            let pts = latin_hypercube_unit(n, d, seed).unwrap();
            for dim in 0..d {
                prop_assert!(bin_histogram(&pts, dim, n).iter().all(|&c| c == 1));
            }
        }
    }
}
