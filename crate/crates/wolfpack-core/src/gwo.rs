//! Standard continuous grey wolf optimizer over bounded real vectors.
//!
//! A population of candidate solutions is ranked each iteration; the top
//! three (alpha, beta, delta) guide the rest through randomized encircling
//! moves annealed by a linearly decreasing coefficient. Minimization is
//! canonical; negate the objective to maximize.

use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GwoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid schedule: t={t}, t_max={t_max}")]
    InvalidSchedule { t: u64, t_max: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("population size {0} too small: at least 3 wolves required")]
    PopulationTooSmall(usize),
    #[error("leader fitness out of order: {0} > {1}")]
    LeaderOrder(f64, f64),
    #[error("objective returned non-finite value {value} at {position:?}")]
    NonFiniteObjective { value: f64, position: Vec<f64> },
}

/// Bounded box in `D` dimensions. Lower bound is strictly below the upper
/// bound in every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GwoError> {
        if lower.is_empty() {
            return Err(GwoError::InvalidSpace("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(GwoError::Shape {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(GwoError::InvalidSpace(format!(
                    "bounds at dimension {k}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Box `[lower, upper]^dimension`.
    pub fn cube(dimension: usize, lower: f64, upper: f64) -> Result<Self, GwoError> {
        Self::new(vec![lower; dimension], vec![upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, position: &WolfPosition) -> bool {
        position.coords().len() == self.dimension()
            && position
                .coords()
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((x, lo), hi)| lo <= x && x <= hi)
    }

    /// Clamp every coordinate into the box ("project to feasible bounds").
    pub fn project(&self, position: &mut WolfPosition) {
        for ((x, lo), hi) in position.coords.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.max(*lo).min(*hi);
        }
    }

    /// Uniform draw inside the box.
    pub fn sample(&self, rng: &mut impl Rng) -> WolfPosition {
        let coords = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
            .collect();
        WolfPosition::new(coords)
    }
}

/// Position of one wolf: a candidate solution vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WolfPosition {
    coords: Vec<f64>,
}

impl WolfPosition {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for WolfPosition {
    fn from(coords: Vec<f64>) -> Self {
        Self::new(coords)
    }
}

/// Iteration schedule for the annealing coefficient `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GwoSchedule {
    max_iterations: u64,
    current: u64,
}

impl GwoSchedule {
    /// Fresh schedule at `t = 0`.
    pub fn new(max_iterations: u64) -> Result<Self, GwoError> {
        Self::at(max_iterations, 0)
    }

    pub fn at(max_iterations: u64, current: u64) -> Result<Self, GwoError> {
        if max_iterations == 0 || current > max_iterations {
            return Err(GwoError::InvalidSchedule {
                t: current,
                t_max: max_iterations,
            });
        }
        Ok(Self {
            max_iterations,
            current,
        })
    }

    pub fn max_iterations(&self) -> u64 {
        self.max_iterations
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    /// Coefficient at the schedule's current step; always in `[0, 2]`.
    pub fn coefficient(&self) -> f64 {
        schedule_coefficient(self.current, self.max_iterations)
            .expect("schedule invariants hold by construction")
    }
}

/// Linear annealing coefficient `a(t) = 2 - 2 t / t_max`.
pub fn schedule_coefficient(t: u64, t_max: u64) -> Result<f64, GwoError> {
    if t_max == 0 || t > t_max {
        return Err(GwoError::InvalidSchedule { t, t_max });
    }
    Ok(2.0 - 2.0 * t as f64 / t_max as f64)
}

/// A leader position paired with its fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWolf {
    pub position: WolfPosition,
    pub fitness: f64,
}

/// The three leaders, ordered best-first for minimization (ties allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSet {
    alpha: RankedWolf,
    beta: RankedWolf,
    delta: RankedWolf,
}

impl LeaderSet {
    pub fn new(alpha: RankedWolf, beta: RankedWolf, delta: RankedWolf) -> Result<Self, GwoError> {
        if alpha.fitness > beta.fitness {
            return Err(GwoError::LeaderOrder(alpha.fitness, beta.fitness));
        }
        if beta.fitness > delta.fitness {
            return Err(GwoError::LeaderOrder(beta.fitness, delta.fitness));
        }
        Ok(Self { alpha, beta, delta })
    }

    pub fn alpha(&self) -> &RankedWolf {
        &self.alpha
    }

    pub fn beta(&self) -> &RankedWolf {
        &self.beta
    }

    pub fn delta(&self) -> &RankedWolf {
        &self.delta
    }

    pub fn positions(&self) -> [&WolfPosition; 3] {
        [&self.alpha.position, &self.beta.position, &self.delta.position]
    }
}

/// One encircling move toward a leader:
/// `C = 2 r1`, `A = 2 a r2 - a`, `dist = |C * leader - wolf|`,
/// result `leader - A * dist`. Unprojected; the caller clamps.
pub fn encircle(
    leader: &WolfPosition,
    wolf: &WolfPosition,
    a: f64,
    r1: &[f64],
    r2: &[f64],
) -> Result<WolfPosition, GwoError> {
    let dim = leader.dimension();
    for got in [wolf.dimension(), r1.len(), r2.len()] {
        if got != dim {
            return Err(GwoError::Shape { expected: dim, got });
        }
    }
    let coords = (0..dim)
        .map(|k| {
            let c = 2.0 * r1[k];
            let coeff = 2.0 * a * r2[k] - a;
            let dist = (c * leader.coords[k] - wolf.coords[k]).abs();
            leader.coords[k] - coeff * dist
        })
        .collect();
    Ok(WolfPosition::new(coords))
}

/// Mean of the three leader-guided candidates, clamped into the box.
pub(crate) fn average_and_project(
    candidates: [&WolfPosition; 3],
    space: &SearchSpace,
) -> WolfPosition {
    let dim = space.dimension();
    let coords = (0..dim)
        .map(|k| {
            candidates
                .iter()
                .map(|c| c.coords[k])
                .sum::<f64>()
                / 3.0
        })
        .collect();
    let mut mean = WolfPosition::new(coords);
    space.project(&mut mean);
    mean
}

/// Full wolf update: one encircling candidate per leader with fresh `r1`,
/// `r2` vectors, averaged and projected into the search space.
pub fn leader_average_update(
    wolf: &WolfPosition,
    leaders: &LeaderSet,
    a: f64,
    space: &SearchSpace,
    rng: &mut impl Rng,
) -> Result<WolfPosition, GwoError> {
    let dim = space.dimension();
    let mut candidates = Vec::with_capacity(3);
    for leader in leaders.positions() {
        let r1: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let r2: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        candidates.push(encircle(leader, wolf, a, &r1, &r2)?);
    }
    Ok(average_and_project(
        [&candidates[0], &candidates[1], &candidates[2]],
        space,
    ))
}

/// Stable ranking of population indices by ascending fitness, index as the
/// tie-break.
pub fn rank_by_fitness(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&i, &j| fitness[i].total_cmp(&fitness[j]).then(i.cmp(&j)));
    order
}

#[derive(Debug, Clone)]
pub struct GwoOptions {
    /// Keep the current leaders out of the update step. The literal
    /// pseudocode updates every wolf; exempting leaders preserves the top
    /// three solutions so the best-so-far record cannot regress.
    pub elitism: bool,
}

impl Default for GwoOptions {
    fn default() -> Self {
        Self { elitism: true }
    }
}

#[derive(Debug, Clone)]
pub struct GwoOutcome {
    pub best: WolfPosition,
    pub value: f64,
    /// Best objective value in the initial population, before any update.
    pub initial_best: f64,
    /// Best-so-far value after each iteration; nonincreasing.
    pub trace: Vec<f64>,
}

/// Minimize `objective` over `space` with `population_size` wolves.
///
/// The run is fully determined by `seed`: every wolf draws from its own
/// stream split from the master seed, so evaluation order cannot change
/// the result.
pub fn gwo_minimize<F>(
    objective: F,
    space: &SearchSpace,
    population_size: usize,
    schedule: GwoSchedule,
    seed: u64,
    options: &GwoOptions,
) -> Result<GwoOutcome, GwoError>
where
    F: Fn(&WolfPosition) -> f64,
{
    if population_size < 3 {
        return Err(GwoError::PopulationTooSmall(population_size));
    }

    let check = |position: &WolfPosition| -> Result<f64, GwoError> {
        let value = objective(position);
        if !value.is_finite() {
            return Err(GwoError::NonFiniteObjective {
                value,
                position: position.coords().to_vec(),
            });
        }
        Ok(value)
    };

    let mut positions: Vec<WolfPosition> = (0..population_size)
        .map(|i| space.sample(&mut rng::stream(seed, "gwo.init", &[i as u64])))
        .collect();
    let mut fitness = positions
        .iter()
        .map(&check)
        .collect::<Result<Vec<f64>, _>>()?;

    let first = rank_by_fitness(&fitness)[0];
    let mut best = positions[first].clone();
    let mut best_value = fitness[first];
    let initial_best = best_value;

    let t_max = schedule.max_iterations();
    let mut trace = Vec::with_capacity((t_max - schedule.current()) as usize);

    for t in (schedule.current() + 1)..=t_max {
        let order = rank_by_fitness(&fitness);
        let leader_ix = [order[0], order[1], order[2]];
        let leaders = LeaderSet::new(
            RankedWolf {
                position: positions[leader_ix[0]].clone(),
                fitness: fitness[leader_ix[0]],
            },
            RankedWolf {
                position: positions[leader_ix[1]].clone(),
                fitness: fitness[leader_ix[1]],
            },
            RankedWolf {
                position: positions[leader_ix[2]].clone(),
                fitness: fitness[leader_ix[2]],
            },
        )?;
        let a = schedule_coefficient(t, t_max)?;

        for i in 0..population_size {
            if options.elitism && leader_ix.contains(&i) {
                continue;
            }
            let mut wolf_rng = rng::stream(seed, "gwo.update", &[t, i as u64]);
            positions[i] = leader_average_update(&positions[i], &leaders, a, space, &mut wolf_rng)?;
            fitness[i] = check(&positions[i])?;
            if fitness[i] < best_value {
                best_value = fitness[i];
                best = positions[i].clone();
            }
        }
        trace.push(best_value);
    }

    Ok(GwoOutcome {
        best,
        value: best_value,
        initial_best,
        trace,
    })
}
