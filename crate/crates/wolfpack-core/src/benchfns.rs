//! Standard benchmark objectives for exercising the optimizer.

use crate::gwo::{GwoError, SearchSpace, WolfPosition};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

/// Sum of squares. Global minimum 0 at the origin.
pub fn sphere(x: &WolfPosition) -> f64 {
    x.coords().iter().map(|v| v * v).sum()
}

/// Highly multimodal. Global minimum 0 at the origin.
pub fn rastrigin(x: &WolfPosition) -> f64 {
    let d = x.coords().len() as f64;
    10.0 * d
        + x.coords()
            .iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

/// Curved valley. Global minimum 0 at the all-ones point.
pub fn rosenbrock(x: &WolfPosition) -> f64 {
    x.coords()
        .windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl BenchFunction {
    pub fn eval(&self, x: &WolfPosition) -> f64 {
        match self {
            Self::Sphere => sphere(x),
            Self::Rastrigin => rastrigin(x),
            Self::Rosenbrock => rosenbrock(x),
        }
    }

    /// Conventional search box for the function.
    pub fn default_space(&self, dimension: usize) -> Result<SearchSpace, GwoError> {
        match self {
            Self::Sphere => SearchSpace::cube(dimension, -5.0, 5.0),
            Self::Rastrigin => SearchSpace::cube(dimension, -5.12, 5.12),
            Self::Rosenbrock => SearchSpace::cube(dimension, -5.0, 10.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Rastrigin => "rastrigin",
            Self::Rosenbrock => "rosenbrock",
        }
    }
}

impl FromStr for BenchFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(Self::Sphere),
            "rastrigin" => Ok(Self::Rastrigin),
            "rosenbrock" => Ok(Self::Rosenbrock),
            other => Err(format!("unknown benchmark function: {other}")),
        }
    }
}
