//! Grid-coverage minimality runs and recurrence statistics.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{forward_orbit, Ifs};
use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::space::{Factor, StateSpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalityReport {
    pub per_seed_coverage: Vec<f64>,
    pub min_coverage: f64,
    pub total_cells: usize,
    pub visits: Vec<usize>,
    pub exhausted: Vec<bool>,
}

impl MinimalityReport {
    pub fn any_exhausted(&self) -> bool {
        self.exhausted.iter().any(|e| *e)
    }
}

fn coarse_counts(space: &StateSpace, eps: f64) -> Result<Vec<usize>> {
    space
        .factors()
        .iter()
        .map(|f| {
            let len = f.length();
            if !len.is_finite() {
                return Err(Error::Precondition("coverage needs a compact space".into()));
            }
            Ok((len / eps).round().max(1.0) as usize)
        })
        .collect()
}

/// Cell of `x` on the coverage grid, measured from each factor's lower end.
pub fn coverage_cell(space: &StateSpace, counts: &[usize], x: &[f64]) -> Vec<usize> {
    space
        .factors()
        .iter()
        .zip(x)
        .zip(counts)
        .map(|((f, v), n)| {
            let (lo, len) = match *f {
                Factor::Interval { lo, hi } => (lo, hi - lo),
                Factor::Circle { period } => (0.0, period),
            };
            let t = ((f.reduce(*v) - lo) / len * *n as f64).floor();
            (t.max(0.0) as usize).min(n - 1)
        })
        .collect()
}

/// For each seed, explores the orbit at resolution `eps / refine` until the
/// frontier closes or `budget` visits are spent, then reports the fraction of
/// `eps`-cells of the space that were reached.
pub fn minimality_experiment(
    ifs: &Ifs,
    seeds: &[Vec<f64>],
    eps: f64,
    budget: usize,
    refine: usize,
) -> Result<MinimalityReport> {
    let space = ifs.space();
    let counts = coarse_counts(space, eps)?;
    let total: usize = counts.iter().product();
    let fine = eps / refine.max(1) as f64;
    let runs: Vec<(f64, usize, bool)> = seeds
        .par_iter()
        .map(|s| {
            let rs = forward_orbit(ifs, s, usize::MAX, fine, budget)?;
            let cells: BTreeSet<Vec<usize>> = rs.points().map(|p| coverage_cell(space, &counts, p)).collect();
            Ok((cells.len() as f64 / total as f64, rs.visited, rs.exhausted))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_seed_coverage: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let min_coverage = per_seed_coverage.iter().copied().fold(1.0, f64::min);
    Ok(MinimalityReport {
        min_coverage,
        per_seed_coverage,
        total_cells: total,
        visits: runs.iter().map(|r| r.1).collect(),
        exhausted: runs.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceReport {
    pub recurrent_fraction: f64,
    pub forward_fraction: f64,
    pub backward_fraction: f64,
    /// First return times (forward, backward) per sample, if any within the horizon.
    pub returns: Vec<(Option<usize>, Option<usize>)>,
}

fn first_return<F: Fn(&[f64]) -> Option<Vec<f64>>>(space: &StateSpace, x: &[f64], eps: f64, horizon: usize, step: F) -> Option<usize> {
    let mut y = x.to_vec();
    for n in 1..=horizon {
        y = step(&y)?;
        if space.distance(&y, x) < eps {
            return Some(n);
        }
    }
    None
}

/// Fraction of samples returning within `eps` both forward and backward inside `horizon` iterates.
pub fn recurrence_experiment(map: &SmoothMap, samples: &[Vec<f64>], eps: f64, horizon: usize) -> RecurrenceReport {
    let space = map.domain();
    let inv = map.inverse();
    let returns: Vec<(Option<usize>, Option<usize>)> = samples
        .par_iter()
        .map(|x| {
            let fwd = first_return(space, x, eps, horizon, |y| Some(map.apply(y)));
            let bwd = first_return(space, x, eps, horizon, |y| match &inv {
                Some(g) => Some(g.apply(y)),
                None => map.preimage(y, y, 1e-13, 50).ok(),
            });
            (fwd, bwd)
        })
        .collect();
    let n = samples.len().max(1) as f64;
    let count = |f: &dyn Fn(&(Option<usize>, Option<usize>)) -> bool| returns.iter().filter(|r| f(r)).count() as f64 / n;
    RecurrenceReport {
        recurrent_fraction: count(&|r| r.0.is_some() && r.1.is_some()),
        forward_fraction: count(&|r| r.0.is_some()),
        backward_fraction: count(&|r| r.1.is_some()),
        returns,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Region;

    fn rotation(alpha: f64) -> SmoothMap {
        let r = SmoothMap::endo("rot", StateSpace::torus(1), move |x| vec![x[0] + alpha]);
        let back = SmoothMap::endo("rot⁻¹", StateSpace::torus(1), move |x| vec![x[0] - alpha]);
        r.with_bounds(1.0, 1.0).with_inverse(back)
    }

    #[test]
    fn irrational_rotation_covers_circle() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let ifs = Ifs::new(vec![rotation(golden)], Region::interval(0.0, 1.0)).unwrap();
        let seeds = vec![vec![0.1], vec![0.77]];
        let rep = minimality_experiment(&ifs, &seeds, 1.0 / 64.0, 100_000, 4).unwrap();
        assert!(rep.min_coverage > 0.99, "{rep:?}");
    }

    #[test]
    fn rational_rotation_finite_orbit() {
        let ifs = Ifs::new(vec![rotation(0.2)], Region::interval(0.0, 1.0)).unwrap();
        let rep = minimality_experiment(&ifs, &[vec![0.013]], 1.0 / 64.0, 10_000, 4).unwrap();
        assert!((rep.min_coverage - 5.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_is_recurrent() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let samples: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 / 20.0]).collect();
        let rep = recurrence_experiment(&rotation(golden), &samples, 0.01, 200);
        assert_eq!(rep.recurrent_fraction, 1.0);
    }

    #[test]
    fn translation_on_line_never_returns() {
        let t = SmoothMap::endo("shift", StateSpace::line(), |x| vec![x[0] + 1.0]);
        let samples: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64]).collect();
        let rep = recurrence_experiment(&t, &samples, 0.5, 100);
        assert_eq!(rep.recurrent_fraction, 0.0);
    }
}
