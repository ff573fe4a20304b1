//! Bounded derivative-free minimization: Nelder-Mead simplex search run in
//! transformed coordinates so that box bounds hold by construction.
//!
//! Each coordinate is mapped to an unbounded variable:
//!
//! | bounds        | transform                     |
//! |---------------|-------------------------------|
//! | `[lo, hi]`    | `z = ln((x - lo) / (hi - x))` |
//! | `[lo, +inf)`  | `z = ln(x - lo)`              |
//! | `(-inf, hi]`  | `z = ln(hi - x)`              |
//! | unbounded     | `z = x`                       |

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("objective was not finite at any start")]
    AllStartsFailed,
    #[error("no starting points supplied")]
    NoStarts,
    #[error("start {index} has {found} coordinates, bounds have {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("start {index} lies outside the bounds in coordinate {coordinate}")]
    StartOutOfBounds { index: usize, coordinate: usize },
    #[error("invalid bounds in coordinate {0}")]
    InvalidBounds(usize),
}

/// Per-coordinate box constraints; infinite entries mean unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimizeError> {
        if lower.len() != upper.len() {
            return Err(OptimizeError::DimensionMismatch {
                index: 0,
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(OptimizeError::InvalidBounds(i));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn to_unbounded(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => {
                        let w = hi - lo;
                        let x = x.clamp(lo + 1e-12 * w, hi - 1e-12 * w);
                        ((x - lo) / (hi - x)).ln()
                    }
                    (true, false) => (x - lo).max(1e-12 * lo.abs().max(1.0)).ln(),
                    (false, true) => (hi - x).max(1e-12 * hi.abs().max(1.0)).ln(),
                    (false, false) => x,
                }
            })
            .collect()
    }

    fn to_bounded(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &z)| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => {
                        let s = if z >= 0.0 {
                            1.0 / (1.0 + (-z).exp())
                        } else {
                            let e = z.exp();
                            e / (1.0 + e)
                        };
                        (lo + (hi - lo) * s).clamp(lo, hi)
                    }
                    (true, false) => lo + z.exp(),
                    (false, true) => hi - z.exp(),
                    (false, false) => z,
                }
            })
            .collect()
    }

    fn is_transformed(&self, i: usize) -> bool {
        self.lower[i].is_finite() || self.upper[i].is_finite()
    }
}

/// Stopping rules for each start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// A start stops once the simplex's mean objective improves by less than
    /// this fraction over a full cycle of `dim + 1` iterations.
    pub rel_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub params: Vec<f64>,
    pub value: f64,
    /// Iterations spent by the start that produced `params`.
    pub iterations: usize,
}

/// Minimizes `objective` from each start and returns the best result.
///
/// Ties between starts go to the earliest start.
pub fn minimize<F>(
    objective: F,
    bounds: &Bounds,
    starts: &[Vec<f64>],
    options: MinimizeOptions,
) -> Result<Minimum, OptimizeError>
where
    F: Fn(&[f64]) -> f64,
{
    if starts.is_empty() {
        return Err(OptimizeError::NoStarts);
    }
    let dim = bounds.dim();
    for (index, start) in starts.iter().enumerate() {
        if start.len() != dim {
            return Err(OptimizeError::DimensionMismatch {
                index,
                expected: dim,
                found: start.len(),
            });
        }
        for (coordinate, &x) in start.iter().enumerate() {
            if !(x >= bounds.lower[coordinate] && x <= bounds.upper[coordinate]) {
                return Err(OptimizeError::StartOutOfBounds { index, coordinate });
            }
        }
    }

    let mut best: Option<Minimum> = None;
    for start in starts {
        let Some(found) = nelder_mead(&objective, bounds, start, options) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| found.value < b.value) {
            best = Some(found);
        }
    }
    best.ok_or(OptimizeError::AllStartsFailed)
}

fn eval<F: Fn(&[f64]) -> f64>(objective: &F, bounds: &Bounds, z: &[f64]) -> f64 {
    let v = objective(&bounds.to_bounded(z));
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn initial_simplex(bounds: &Bounds, z0: &[f64]) -> Vec<Vec<f64>> {
    let mut simplex = vec![z0.to_vec()];
    for i in 0..z0.len() {
        let mut v = z0.to_vec();
        let step = if bounds.is_transformed(i) {
            0.25
        } else {
            0.1 * z0[i].abs().max(1.0)
        };
        v[i] += step;
        simplex.push(v);
    }
    simplex
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    objective: &F,
    bounds: &Bounds,
    start: &[f64],
    options: MinimizeOptions,
) -> Option<Minimum> {
    let dim = start.len();
    let z0 = bounds.to_unbounded(start);
    if !eval(objective, bounds, &z0).is_finite() {
        return None;
    }
    let mut center = z0;
    let mut iterations = 0;
    let mut best_value = f64::INFINITY;

    // Converged runs are restarted from their best vertex with a fresh
    // simplex; a restart that gains nothing ends the search.
    loop {
        let mut simplex = initial_simplex(bounds, &center);
        let mut values: Vec<f64> = simplex.iter().map(|z| eval(objective, bounds, z)).collect();
        let mut cycle_start_mean = mean(&values);
        let mut since_check = 0;
        let restart_from = best_value;

        while iterations < options.max_iterations {
            iterations += 1;
            step(objective, bounds, &mut simplex, &mut values);
            since_check += 1;
            if since_check == dim + 1 {
                since_check = 0;
                let m = mean(&values);
                if cycle_start_mean.is_finite()
                    && cycle_start_mean - m <= options.rel_tolerance * cycle_start_mean.abs()
                {
                    break;
                }
                cycle_start_mean = m;
            }
        }

        let (bi, &bv) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("simplex is nonempty");
        let improved = !restart_from.is_finite()
            || restart_from - bv > options.rel_tolerance * restart_from.abs();
        if bv < best_value {
            best_value = bv;
            center = simplex[bi].clone();
        }
        if iterations >= options.max_iterations || !improved {
            break;
        }
    }

    Some(Minimum {
        params: bounds.to_bounded(&center),
        value: best_value,
        iterations,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn step<F: Fn(&[f64]) -> f64>(
    objective: &F,
    bounds: &Bounds,
    simplex: &mut [Vec<f64>],
    values: &mut [f64],
) {
    let n = simplex.len();
    let dim = n - 1;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let (best, worst, second_worst) = (order[0], order[n - 1], order[n - 2]);

    let mut centroid = vec![0.0; dim];
    for &i in &order[..n - 1] {
        for (c, z) in centroid.iter_mut().zip(&simplex[i]) {
            *c += z / dim as f64;
        }
    }
    let along = |coef: f64| -> Vec<f64> {
        centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(c, w)| c + coef * (c - w))
            .collect()
    };

    let reflected = along(REFLECT);
    let fr = eval(objective, bounds, &reflected);
    if fr < values[best] {
        let expanded = along(EXPAND);
        let fe = eval(objective, bounds, &expanded);
        if fe < fr {
            simplex[worst] = expanded;
            values[worst] = fe;
        } else {
            simplex[worst] = reflected;
            values[worst] = fr;
        }
        return;
    }
    if fr < values[second_worst] {
        simplex[worst] = reflected;
        values[worst] = fr;
        return;
    }
    let (contracted, fc) = if fr < values[worst] {
        let c = along(CONTRACT * REFLECT);
        let f = eval(objective, bounds, &c);
        (c, f)
    } else {
        let c = along(-CONTRACT);
        let f = eval(objective, bounds, &c);
        (c, f)
    };
    if fc < values[worst].min(fr) {
        simplex[worst] = contracted;
        values[worst] = fc;
        return;
    }
    let anchor = simplex[best].clone();
    for &i in &order[1..] {
        for (z, a) in simplex[i].iter_mut().zip(&anchor) {
            *z = a + SHRINK * (*z - a);
        }
        values[i] = eval(objective, bounds, &simplex[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = minimize(
            |x| (x[0] - 3.0).powi(2),
            &Bounds::unbounded(1),
            &[vec![1.0]],
            MinimizeOptions::default(),
        )
        .unwrap();
        assert!((m.params[0] - 3.0).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn picks_lower_basin() {
        let f = |x: &[f64]| ((x[0] - 1.0).powi(2)).min((x[0] - 5.0).powi(2) + 0.5);
        let bounds = Bounds::unbounded(1);
        for starts in [vec![vec![0.0], vec![6.0]], vec![vec![6.0], vec![0.0]]] {
            let m = minimize(f, &bounds, &starts, MinimizeOptions::default()).unwrap();
            assert!((m.params[0] - 1.0).abs() < 1e-4, "{m:?}");
            assert!(m.value < 1e-8);
        }
        // a single start in the upper basin stays there
        let m = minimize(f, &bounds, &[vec![6.0]], MinimizeOptions::default()).unwrap();
        assert!((m.params[0] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn active_bound() {
        let bounds = Bounds::new(vec![2.0], vec![10.0]).unwrap();
        let m = minimize(|x| x[0], &bounds, &[vec![6.0]], MinimizeOptions::default()).unwrap();
        assert!((m.params[0] - 2.0).abs() < 1e-4, "{m:?}");
        assert!(m.params[0] >= 2.0);
    }

    #[test]
    fn half_bounded_coordinates() {
        let bounds = Bounds::new(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, 1.0]).unwrap();
        let m = minimize(
            |x| (x[0] - 0.25).powi(2) + (x[1] + 4.0).powi(2),
            &bounds,
            &[vec![1.0, 0.0]],
            MinimizeOptions::default(),
        )
        .unwrap();
        assert!((m.params[0] - 0.25).abs() < 1e-4);
        assert!((m.params[1] + 4.0).abs() < 1e-4);
    }

    #[test]
    fn rosenbrock_in_box() {
        let bounds = Bounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = minimize(f, &bounds, &[vec![-1.2, 1.0]], MinimizeOptions::default()).unwrap();
        assert!((m.params[0] - 1.0).abs() < 1e-3 && (m.params[1] - 1.0).abs() < 1e-3, "{m:?}");
        assert!(m.iterations <= 500);
    }

    #[test]
    fn failures() {
        let bounds = Bounds::unbounded(1);
        assert_eq!(
            minimize(|_| f64::NAN, &bounds, &[vec![0.0]], MinimizeOptions::default()),
            Err(OptimizeError::AllStartsFailed)
        );
        assert_eq!(
            minimize(|x| x[0], &bounds, &[], MinimizeOptions::default()),
            Err(OptimizeError::NoStarts)
        );
        let boxed = Bounds::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            minimize(|x| x[0], &boxed, &[vec![2.0]], MinimizeOptions::default()),
            Err(OptimizeError::StartOutOfBounds { .. })
        ));
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) * (1.0 + x[1].powi(2)) + (x[1] - 2.0).powi(4);
        let bounds = Bounds::new(vec![0.0, 0.0], vec![1.0, f64::INFINITY]).unwrap();
        let starts = vec![vec![0.9, 0.1], vec![0.1, 9.0]];
        let a = minimize(f, &bounds, &starts, MinimizeOptions::default()).unwrap();
        let b = minimize(f, &bounds, &starts, MinimizeOptions::default()).unwrap();
        assert_eq!(a.params[0].to_bits(), b.params[0].to_bits());
        assert_eq!(a.params[1].to_bits(), b.params[1].to_bits());
    }
}
