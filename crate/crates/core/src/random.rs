//! Seeded generators for random problem instances, used by fuzz campaigns.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::{DiscreteDistribution, Label, LabeledPoint};
use crate::vector::norm2;

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of random instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceShape {
    pub max_dim: usize,
    pub max_atoms: usize,
    /// Features are drawn uniformly from the ball of this radius.
    pub feature_radius: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        Self { max_dim: 5, max_atoms: 10, feature_radius: 1.0 }
    }
}

/// Uniform point in the Euclidean ball of radius `radius` in `R^d`.
pub fn point_in_ball<R: Rng>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm2(&x);
        if n <= 1.0 && n > 1e-6 {
            return x.into_iter().map(|c| c * radius).collect();
        }
    }
}

pub fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let x = point_in_ball(rng, d, 1.0);
    let n = norm2(&x);
    x.into_iter().map(|c| c / n).collect()
}

fn label<R: Rng>(rng: &mut R) -> Label {
    if rng.gen_bool(0.5) {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Labelled sample of `n` points in dimension `d`.
pub fn sample<R: Rng>(rng: &mut R, n: usize, d: usize, radius: f64) -> Vec<LabeledPoint> {
    (0..n).map(|_| LabeledPoint::new(point_in_ball(rng, d, radius), label(rng)).expect("finite point")).collect()
}

/// Random distribution with dimension in `1..=max_dim` and between one and
/// `max_atoms` atoms with random labels and masses.
pub fn distribution<R: Rng>(rng: &mut R, shape: &InstanceShape) -> DiscreteDistribution {
    let d = rng.gen_range(1..=shape.max_dim);
    let n = rng.gen_range(1..=shape.max_atoms);
    distribution_with(rng, d, n, shape.feature_radius)
}

pub fn distribution_with<R: Rng>(rng: &mut R, d: usize, n: usize, radius: f64) -> DiscreteDistribution {
    let atoms: Vec<_> = sample(rng, n, d, radius).into_iter().map(|p| (p, rng.gen_range(0.05..1.0))).collect();
    DiscreteDistribution::from_masses(atoms).expect("positive masses")
}
