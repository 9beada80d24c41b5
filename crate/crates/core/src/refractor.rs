//! The refractor `R(b)`: the pointwise minimum of N semi-ellipsoids over a
//! discretized source domain, its tracing map and the discrete refractor
//! measure.
//!
//! Every grid point carries a quadrature weight and is assigned to the
//! ellipsoid closest to the origin along its ray. Ties go to the smallest
//! index, so [`update_component`] reproduces [`trace_all`] bit for bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sphere::{ellipsoid_radius, RefractionConstant, UnitDirection};

/// Grid points per parallel work item. Fixed so reductions do not depend on
/// the number of workers.
const CHUNK: usize = 4096;

/// Minimum angular separation between two target directions.
const MIN_SEPARATION: f64 = 1e-9;

/// Target directions `m_i` with prescribed intensities `f_i`, normalized to
/// unit total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec {
    directions: Vec<UnitDirection>,
    intensities: Vec<f64>,
}

impl TargetSpec {
    /// Validates distinctness and positivity, then rescales the intensities to
    /// sum to one (the mass of every [`SourceGrid`]).
    pub fn new(directions: Vec<UnitDirection>, intensities: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidInput(
                "at least one target direction is required".into(),
            ));
        }
        if directions.len() != intensities.len() {
            return Err(Error::DimensionMismatch {
                expected: directions.len(),
                got: intensities.len(),
            });
        }
        if let Some(f) = intensities.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "intensities must be positive, got {f}"
            )));
        }
        for i in 0..directions.len() {
            for j in 0..i {
                if directions[i].geodesic_distance(&directions[j]) <= MIN_SEPARATION {
                    return Err(Error::InvalidInput(format!(
                        "target directions {} and {} coincide",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let total: f64 = intensities.iter().sum();
        let intensities = intensities.iter().map(|f| f / total).collect();
        Ok(Self {
            directions,
            intensities,
        })
    }

    /// Equal intensity `1/N` in every direction.
    pub fn uniform(directions: Vec<UnitDirection>) -> Result<Self> {
        let n = directions.len();
        Self::new(directions, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[UnitDirection] {
        &self.directions
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn min_intensity(&self) -> f64 {
        self.intensities
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Coefficients `b = (b_1, ..., b_N)` of the supporting semi-ellipsoids.
///
/// The solvers keep `b_1 = 1`; the measure is invariant under dilations so
/// general positive vectors are accepted here.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    coeffs: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("empty coefficient vector".into()));
        }
        if let Some(b) = coeffs.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "coefficients must be positive, got {b}"
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.coeffs[i]
    }

    /// Copy with coordinate `i` replaced.
    pub fn with_component(&self, i: usize, value: f64) -> Result<Self> {
        let mut coeffs = self.coeffs.clone();
        coeffs[i] = value;
        Self::new(coeffs)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.coeffs.iter().map(|b| c * b).collect())
    }

    /// Dilation with `b_1 = 1`.
    pub fn normalized(&self) -> Self {
        let b1 = self.coeffs[0];
        let mut coeffs: Vec<f64> = self.coeffs.iter().map(|b| b / b1).collect();
        coeffs[0] = 1.0;
        Self { coeffs }
    }

    pub fn is_normalized(&self) -> bool {
        self.coeffs[0] == 1.0
    }

    fn same_bits(&self, other: &[f64]) -> bool {
        self.coeffs.len() == other.len()
            && self
                .coeffs
                .iter()
                .zip(other)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Discretization of the source domain: directions with quadrature weights
/// summing to one.
#[derive(Clone, Debug)]
pub struct SourceGrid {
    points: Vec<UnitDirection>,
    weights: Vec<f64>,
    uniform: bool,
}

impl SourceGrid {
    /// Uniform weights `1/K`.
    pub fn uniform(points: Vec<UnitDirection>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty source grid".into()));
        }
        let k = points.len();
        Ok(Self {
            points,
            weights: vec![1.0 / k as f64; k],
            uniform: true,
        })
    }

    /// Weights proportional to a bounded, nonnegative density `g`.
    pub fn with_density(
        points: Vec<UnitDirection>,
        g: impl Fn(&UnitDirection) -> f64,
    ) -> Result<Self> {
        let raw: Vec<f64> = points.iter().map(&g).collect();
        Self::with_weights(points, raw)
    }

    pub fn with_weights(points: Vec<UnitDirection>, raw: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("empty source grid".into()));
        }
        if raw.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: raw.len(),
            });
        }
        if let Some(w) = raw.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "density must be nonnegative, got {w}"
            )));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("density vanishes on the grid".into()));
        }
        let uniform = raw.iter().all(|w| *w == raw[0]);
        let weights = if uniform {
            vec![1.0 / raw.len() as f64; raw.len()]
        } else {
            raw.iter().map(|w| w / total).collect()
        };
        Ok(Self {
            points,
            weights,
            uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[UnitDirection] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    /// Density bound used by the iteration and Lipschitz estimates:
    /// `max weight * K`, equal to one for uniform weights.
    pub fn sup_density(&self) -> f64 {
        self.max_weight() * self.len() as f64
    }
}

/// Values `G_1(b), ..., G_N(b)` of the discrete refractor measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureVector {
    pub values: Vec<f64>,
}

impl MeasureVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max |G_i - f_i|` over `indices`.
    pub fn max_deviation(
        &self,
        targets: &TargetSpec,
        indices: impl IntoIterator<Item = usize>,
    ) -> f64 {
        indices
            .into_iter()
            .map(|i| (self.values[i] - targets.intensities()[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Cached tracing map: the winning ellipsoid for every grid point, the mass
/// captured by every target and the coefficients it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    winner: Vec<u32>,
    counts: Vec<f64>,
    snapshot: Vec<f64>,
}

impl Assignment {
    pub fn winners(&self) -> &[u32] {
        &self.winner
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn snapshot(&self) -> &[f64] {
        &self.snapshot
    }

    pub fn measure(&self) -> MeasureVector {
        MeasureVector {
            values: self.counts.clone(),
        }
    }

    fn from_winners(
        winner: Vec<u32>,
        n_targets: usize,
        grid: &SourceGrid,
        snapshot: Vec<f64>,
    ) -> Self {
        let counts = masses(&winner, n_targets, grid);
        Self {
            winner,
            counts,
            snapshot,
        }
    }
}

pub(crate) fn masses(winner: &[u32], n_targets: usize, grid: &SourceGrid) -> Vec<f64> {
    if grid.uniform {
        let tallies = winner
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut t = vec![0u64; n_targets];
                for &w in chunk {
                    t[w as usize] += 1;
                }
                t
            })
            .reduce(
                || vec![0u64; n_targets],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let k = winner.len() as f64;
        tallies.into_iter().map(|t| t as f64 / k).collect()
    } else {
        let partial: Vec<Vec<f64>> = winner
            .par_chunks(CHUNK)
            .zip(grid.weights.par_chunks(CHUNK))
            .map(|(ws, gs)| {
                let mut t = vec![0.0; n_targets];
                for (&w, &g) in ws.iter().zip(gs) {
                    t[w as usize] += g;
                }
                t
            })
            .collect();
        let mut out = vec![0.0; n_targets];
        for p in partial {
            out.iter_mut().zip(p).for_each(|(x, y)| *x += y);
        }
        out
    }
}

fn check_dims(b: &CoefficientVector, targets: &TargetSpec) -> Result<()> {
    if b.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Index of the lowest ellipsoid along `x` (smallest index on ties) and its
/// radius, without the domain check.
#[inline]
fn lowest(b: &[f64], dirs: &[UnitDirection], x: &UnitDirection, kappa: f64) -> (f64, usize) {
    let mut best = ellipsoid_radius(b[0], kappa, dirs[0].dot(x));
    let mut idx = 0;
    for i in 1..b.len() {
        let r = ellipsoid_radius(b[i], kappa, dirs[i].dot(x));
        if r < best {
            best = r;
            idx = i;
        }
    }
    (best, idx)
}

fn check_domain(dirs: &[UnitDirection], x: &UnitDirection, kappa: f64) -> Result<()> {
    for m in dirs {
        let dot = m.dot(x);
        if dot < kappa {
            return Err(Error::DomainViolation { dot, kappa });
        }
    }
    Ok(())
}

/// Polar radius `min_i b_i / (1 - κ m_i·x)` of `R(b)` along `x`, with the
/// (0-based) index of the ellipsoid attaining it.
pub fn refractor_radius(
    b: &CoefficientVector,
    targets: &TargetSpec,
    x: &UnitDirection,
    kappa: RefractionConstant,
) -> Result<(f64, usize)> {
    check_dims(b, targets)?;
    check_domain(targets.directions(), x, kappa.value())?;
    Ok(lowest(b.as_slice(), targets.directions(), x, kappa.value()))
}

/// Tracing map over the whole grid.
pub fn trace_all(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
) -> Result<Assignment> {
    check_dims(b, targets)?;
    let k = kappa.value();
    let dirs = targets.directions();
    let coeffs = b.as_slice();
    let winner = grid
        .points
        .par_iter()
        .map(|x| {
            check_domain(dirs, x, k)?;
            Ok(lowest(coeffs, dirs, x, k).1 as u32)
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(Assignment::from_winners(
        winner,
        targets.len(),
        grid,
        coeffs.to_vec(),
    ))
}

/// Discrete refractor measure `G_i(b)`: the weight of the grid points refracted
/// into `m_i`.
pub fn measure(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
) -> Result<MeasureVector> {
    Ok(trace_all(b, targets, grid, kappa)?.measure())
}

/// Recomputes the tracing map after changing the single coefficient `j0`.
///
/// Each grid point compares only its incumbent ellipsoid against the modified
/// one; when `b_{j0}` grows, the points it used to win are retraced in full.
pub fn update_component(
    a: &Assignment,
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    j0: usize,
    new_b_j0: f64,
) -> Result<(Assignment, MeasureVector)> {
    check_dims(b, targets)?;
    if !b.same_bits(&a.snapshot) || a.winner.len() != grid.len() {
        return Err(Error::StaleCache);
    }
    if j0 >= b.len() {
        return Err(Error::InvalidInput(format!("component {j0} out of range")));
    }
    let updated = b.with_component(j0, new_b_j0)?;
    if new_b_j0.to_bits() == b.get(j0).to_bits() {
        return Ok((a.clone(), a.measure()));
    }
    let k = kappa.value();
    let dirs = targets.directions();
    let coeffs = updated.as_slice();
    let m_j0 = dirs[j0];
    let grew = new_b_j0 > b.get(j0);
    let winner: Vec<u32> = grid
        .points
        .par_iter()
        .zip(a.winner.par_iter())
        .map(|(x, &w)| {
            let w = w as usize;
            if w == j0 {
                if grew {
                    lowest(coeffs, dirs, x, k).1 as u32
                } else {
                    w as u32
                }
            } else {
                let r_w = ellipsoid_radius(coeffs[w], k, dirs[w].dot(x));
                let r_j = ellipsoid_radius(new_b_j0, k, m_j0.dot(x));
                if r_j < r_w || (r_j == r_w && j0 < w) {
                    j0 as u32
                } else {
                    w as u32
                }
            }
        })
        .collect();
    let next = Assignment::from_winners(winner, targets.len(), grid, updated.as_slice().to_vec());
    let m = next.measure();
    Ok((next, m))
}

/// Precomputed state for evaluating `G_{j0}` repeatedly while only `b_{j0}`
/// decreases from its cached value. Gives the same values as
/// [`update_component`] without building new assignments.
#[derive(Clone, Debug)]
pub struct DecreaseProbe {
    j0: usize,
    base_value: f64,
    /// Mass already held by `j0`.
    held: f64,
    /// `(1 - κ m_{j0}·x, incumbent radius, j0 wins ties, weight)` for points not held.
    others: Vec<(f64, f64, bool, f64)>,
    uniform_k: Option<f64>,
}

impl DecreaseProbe {
    pub fn new(
        a: &Assignment,
        b: &CoefficientVector,
        targets: &TargetSpec,
        grid: &SourceGrid,
        kappa: RefractionConstant,
        j0: usize,
    ) -> Result<Self> {
        check_dims(b, targets)?;
        if !b.same_bits(&a.snapshot) || a.winner.len() != grid.len() {
            return Err(Error::StaleCache);
        }
        let k = kappa.value();
        let dirs = targets.directions();
        let coeffs = b.as_slice();
        let m_j0 = dirs[j0];
        let others: Vec<(f64, f64, bool, f64)> = grid
            .points
            .par_iter()
            .zip(a.winner.par_iter())
            .zip(grid.weights.par_iter())
            .filter(|((_, &w), _)| w as usize != j0)
            .map(|((x, &w), &g)| {
                let w = w as usize;
                (
                    1.0 - k * m_j0.dot(x),
                    ellipsoid_radius(coeffs[w], k, dirs[w].dot(x)),
                    j0 < w,
                    g,
                )
            })
            .collect();
        Ok(Self {
            j0,
            base_value: coeffs[j0],
            held: a.counts[j0],
            others,
            uniform_k: grid.uniform.then_some(grid.len() as f64),
        })
    }

    pub fn component(&self) -> usize {
        self.j0
    }

    pub fn base_value(&self) -> f64 {
        self.base_value
    }

    /// `G_{j0}` with `b_{j0}` replaced by `value <= base_value`.
    pub fn mass_at(&self, value: f64) -> f64 {
        debug_assert!(value <= self.base_value);
        let captured = |&(denom, r_w, tie, _): &(f64, f64, bool, f64)| {
            // same float operations as `ellipsoid_radius`
            let r = value / denom;
            r < r_w || (r == r_w && tie)
        };
        match self.uniform_k {
            Some(k) => {
                let extra: u64 = self
                    .others
                    .par_chunks(CHUNK)
                    .map(|c| c.iter().filter(|p| captured(p)).count() as u64)
                    .sum();
                let held = (self.held * k).round();
                (held + extra as f64) / k
            }
            None => {
                let partial: Vec<f64> = self
                    .others
                    .par_chunks(CHUNK)
                    .map(|c| c.iter().filter(|p| captured(p)).map(|p| p.3).sum::<f64>())
                    .collect();
                self.held + partial.iter().sum::<f64>()
            }
        }
    }
}

/// Whether `b` lies in the region where `G_i` is locally constant: `b_i` is
/// so large that `E(m_i, b_i)` is everywhere above some other ellipsoid, or so
/// small that it is below all of them.
pub fn degenerate_region_membership(
    b: &CoefficientVector,
    kappa: RefractionConstant,
    i: usize,
) -> bool {
    let k = kappa.value();
    let bi = b.get(i);
    let others = || {
        b.as_slice()
            .iter()
            .enumerate()
            .filter(move |(j, _)| *j != i)
            .map(|(_, v)| *v)
    };
    if b.len() < 2 {
        return true;
    }
    others().any(|bj| bi >= (1.0 + k) * bj) || others().all(|bj| bi <= bj / (1.0 + k))
}
