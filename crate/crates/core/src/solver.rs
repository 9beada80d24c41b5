//! Coordinate descent over the admissible set: starting from `(1, 2, ..., 2)`,
//! each sweep lowers the coefficients `b_2, ..., b_N` one at a time until its
//! measure enters the window `[f_j, f_j + δ]`. Every coordinate only
//! decreases, so the run terminates after finitely many adjustments.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::refractor::{
    trace_all, update_component, Assignment, CoefficientVector, DecreaseProbe, MeasureVector,
    SourceGrid, TargetSpec,
};
use crate::sphere::RefractionConstant;

/// Tolerances of a coordinate-descent run.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Width of the per-direction window.
    pub delta: f64,
    /// Tolerance certified at the end.
    pub epsilon: f64,
    /// Certify only `j >= 2`; `G_1` absorbs the remaining mass.
    pub skip_first: bool,
    pub max_sweeps: usize,
    /// Bisection stops once the coefficient bracket is this narrow (relative).
    pub bisection_tol: f64,
}

impl SolverConfig {
    /// Full-index certificate: `δ = ε/N`, so `|G_1 - f_1| <= (N-1)δ < ε`.
    pub fn full(epsilon: f64, n_targets: usize) -> Self {
        Self {
            delta: epsilon / n_targets as f64,
            epsilon,
            skip_first: false,
            max_sweeps: 1_000_000,
            bisection_tol: 1e-15,
        }
    }

    /// Certificate for `j >= 2` only, with `δ = ε`.
    pub fn skip_first(epsilon: f64) -> Self {
        Self {
            delta: epsilon,
            epsilon,
            skip_first: true,
            max_sweeps: 1_000_000,
            bisection_tol: 1e-15,
        }
    }

    pub fn validate(&self, targets: &TargetSpec) -> Result<()> {
        let n = targets.len();
        if n < 2 {
            return Err(Error::InvalidConfig(
                "the solver needs at least two target directions".into(),
            ));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("bisection_tol", self.bisection_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be positive".into()));
        }
        if self.skip_first {
            if self.delta > self.epsilon {
                return Err(Error::InvalidConfig(format!(
                    "delta = {} exceeds epsilon = {} with skip_first",
                    self.delta, self.epsilon
                )));
            }
        } else {
            let cap = targets.min_intensity() / n as f64;
            if self.delta >= cap {
                return Err(Error::InvalidConfig(format!(
                    "delta = {} must be below min f / N = {cap}",
                    self.delta
                )));
            }
            if (n - 1) as f64 * self.delta > self.epsilon {
                return Err(Error::InvalidConfig(format!(
                    "(N-1) * delta = {} exceeds epsilon = {}; the first direction cannot be certified",
                    (n - 1) as f64 * self.delta,
                    self.epsilon
                )));
            }
        }
        Ok(())
    }

    /// Indices whose deviation is certified.
    pub fn checked_indices(&self, n: usize) -> std::ops::Range<usize> {
        if self.skip_first {
            1..n
        } else {
            0..n
        }
    }
}

/// One non-identity coordinate move.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjustment {
    pub sweep: usize,
    /// 0-based index.
    pub index: usize,
    pub before: f64,
    pub after: f64,
    pub g_before: f64,
    pub g_after: f64,
    /// Landed in `[f_j - δ, f_j)`; the step need not gain more than `δ`.
    pub below_target: bool,
}

/// One iteration of a refinement run.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRecord {
    pub iteration: usize,
    pub max_residual: f64,
    pub evaluations: usize,
}

/// Outcome of a solve or refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub final_b: CoefficientVector,
    pub final_measure: MeasureVector,
    /// Max `|G_i - f_i|` over the certified indices, from a fresh trace.
    pub err: f64,
    pub converged: bool,
    pub skip_first: bool,
    pub sweeps: usize,
    pub component_adjustments: usize,
    /// Worst-case number of adjustments; infinite for refinement runs.
    pub bound_n0: f64,
    /// Density bound used in `bound_n0` (max weight times K).
    pub sup_g: f64,
    pub history: Vec<Adjustment>,
    /// Measure evaluations, each an O(K) pass over the grid.
    pub evaluations: usize,
    pub residual_history: Vec<ResidualRecord>,
}

impl SolveReport {
    /// Trace log: `sweep,j,b_before,b_after,g_achieved`, with 1-based `j`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("sweep,j,b_before,b_after,g_achieved\n");
        for a in &self.history {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                a.sweep,
                a.index + 1,
                a.before,
                a.after,
                a.g_after
            );
        }
        s
    }

    /// `iteration,max_residual,evaluations`.
    pub fn residual_csv(&self) -> String {
        let mut s = String::from("iteration,max_residual,evaluations\n");
        for r in &self.residual_history {
            let _ = writeln!(s, "{},{},{}", r.iteration, r.max_residual, r.evaluations);
        }
        s
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.trace_csv()).map_err(|e| Error::io(path, e))
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "converged: {}", self.converged);
        let _ = writeln!(s, "err: {}", self.err);
        let _ = writeln!(s, "skip_first: {}", self.skip_first);
        let _ = writeln!(s, "N: {}", self.final_b.len());
        let _ = writeln!(s, "sweeps: {}", self.sweeps);
        let _ = writeln!(s, "component_adjustments: {}", self.component_adjustments);
        let _ = writeln!(s, "bound_n0: {}", self.bound_n0);
        let _ = writeln!(s, "sup_g: {}", self.sup_g);
        let _ = writeln!(s, "evaluations: {}", self.evaluations);
        s
    }
}

/// The start vector `(1, 2, ..., 2)`. Since `2 > 1 + κ`, every `G_j` with
/// `j >= 2` vanishes there.
pub fn initial_admissible(targets: &TargetSpec, _kappa: RefractionConstant) -> CoefficientVector {
    let mut b = vec![2.0; targets.len()];
    b[0] = 1.0;
    CoefficientVector::new(b).expect("positive start vector")
}

/// `2π(1+κ) / (κ sqrt(δ(2-δ)))` with `δ = 1 - m_i·m_r`: the pairwise constant
/// of the Lipschitz estimate.
pub fn pair_constant(kappa: f64, dot: f64) -> f64 {
    let d = 1.0 - dot.clamp(-1.0, 1.0);
    2.0 * PI * (1.0 + kappa) / (kappa * (d * (2.0 - d)).sqrt())
}

/// Largest pairwise constant over distinct targets.
pub fn lipschitz_constant(targets: &TargetSpec, kappa: RefractionConstant) -> f64 {
    let dirs = targets.directions();
    let mut c: f64 = 0.0;
    for i in 0..dirs.len() {
        for r in 0..dirs.len() {
            if i != r {
                c = c.max(pair_constant(kappa.value(), dirs[i].dot(&dirs[r])));
            }
        }
    }
    c
}

/// Worst-case number of coordinate adjustments,
/// `N (1+κ) C_κ sup_g (N-1)/δ · max_j (b_j⁰ - 1/(1+κ))`.
pub fn iteration_bound(
    targets: &TargetSpec,
    kappa: RefractionConstant,
    sup_g: f64,
    delta: f64,
    b0: &CoefficientVector,
) -> f64 {
    let k = kappa.value();
    let n = targets.len() as f64;
    let room = b0.as_slice()[1..]
        .iter()
        .map(|b| b - 1.0 / (1.0 + k))
        .fold(0.0, f64::max);
    if room == 0.0 {
        return 0.0;
    }
    n * (1.0 + k) * lipschitz_constant(targets, kappa) * sup_g * (n - 1.0) / delta * room
}

/// Solver state shared by the sweep functions: the current vector, its
/// cached assignment and evaluation counters.
pub(crate) struct Descent<'a> {
    pub targets: &'a TargetSpec,
    pub grid: &'a SourceGrid,
    pub kappa: RefractionConstant,
    pub b: CoefficientVector,
    pub cache: Assignment,
    pub evaluations: usize,
}

impl<'a> Descent<'a> {
    pub fn new(
        b: CoefficientVector,
        targets: &'a TargetSpec,
        grid: &'a SourceGrid,
        kappa: RefractionConstant,
    ) -> Result<Self> {
        let cache = trace_all(&b, targets, grid, kappa)?;
        Ok(Self {
            targets,
            grid,
            kappa,
            b,
            cache,
            evaluations: 1,
        })
    }

    /// Lowers `b_j` until `G_j` lands in `[f_j, f_j + δ]`, or in
    /// `[f_j - δ, f_j)` when the step function jumps over the upper window.
    /// Returns `None` when `G_j >= f_j - δ` already.
    pub fn adjust(&mut self, j: usize, delta: f64, tol: f64) -> Result<Option<Landing>> {
        let f = self.targets.intensities()[j];
        let g0 = self.cache.counts()[j];
        if g0 >= f - delta {
            return Ok(None);
        }
        let probe =
            DecreaseProbe::new(&self.cache, &self.b, self.targets, self.grid, self.kappa, j)?;
        let landing = bisect_window(&probe, g0, f, delta, self.kappa, tol, &mut self.evaluations)
            .ok_or_else(|| Error::NoFeasibleStep {
            index: j + 1,
            lower: f - delta,
            upper: f + delta,
            recommended_k: (1.0 / delta).ceil() as usize,
        })?;
        self.set(j, landing.value)?;
        debug_assert_eq!(self.cache.counts()[j], landing.g);
        Ok(Some(landing))
    }

    pub fn set(&mut self, j: usize, value: f64) -> Result<()> {
        let (cache, _) = update_component(
            &self.cache,
            &self.b,
            self.targets,
            self.grid,
            self.kappa,
            j,
            value,
        )?;
        self.b = self.b.with_component(j, value)?;
        self.cache = cache;
        self.evaluations += 1;
        Ok(())
    }
}

/// Result of one coordinate decrease.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landing {
    pub value: f64,
    pub g: f64,
    /// `G_j` ended in `[f_j - δ, f_j)` because a block of tied grid points
    /// jumps over `[f_j, f_j + δ]`.
    pub below_target: bool,
}

/// Bisection for `value < base` with `G(value) ∈ [f, f + δ]`, using that `G`
/// is non-increasing in the coefficient and `G(base) = g_base < f - δ`. When
/// the bracket collapses on a jump, falls back to the largest value below `f`
/// if it is at least `f - δ`.
fn bisect_window(
    probe: &DecreaseProbe,
    g_base: f64,
    f: f64,
    delta: f64,
    kappa: RefractionConstant,
    tol: f64,
    evaluations: &mut usize,
) -> Option<Landing> {
    let f_high = f + delta;
    let (mut hi, mut g_hi) = (probe.base_value(), g_base);
    // below every other coefficient over (1+κ), so it captures everything
    let mut lo = 0.5 / (1.0 + kappa.value());
    let g_lo = probe.mass_at(lo);
    *evaluations += 1;
    let hit = |value, g| Landing {
        value,
        g,
        below_target: false,
    };
    if g_lo <= f_high && g_lo >= f {
        return Some(hit(lo, g_lo));
    }
    if g_lo < f {
        return None;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) || hi - lo <= tol * hi {
            return (g_hi >= f - delta).then_some(Landing {
                value: hi,
                g: g_hi,
                below_target: true,
            });
        }
        let g = probe.mass_at(mid);
        *evaluations += 1;
        if g > f_high {
            lo = mid;
        } else if g < f {
            hi = mid;
            g_hi = g;
        } else {
            return Some(hit(mid, g));
        }
    }
}

/// Single-coordinate step on an explicit cache. Returns the updated vector
/// and assignment; identity when `G_j` is already in the window.
#[allow(clippy::too_many_arguments)]
pub fn adjust_component(
    b: &CoefficientVector,
    j: usize,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    delta: f64,
    cache: &Assignment,
    bisection_tol: f64,
) -> Result<(CoefficientVector, Assignment)> {
    if j == 0 || j >= targets.len() {
        return Err(Error::InvalidInput(format!(
            "component {} cannot be adjusted",
            j + 1
        )));
    }
    if cache.snapshot() != b.as_slice() {
        return Err(Error::StaleCache);
    }
    let mut d = Descent {
        targets,
        grid,
        kappa,
        b: b.clone(),
        cache: cache.clone(),
        evaluations: 0,
    };
    d.adjust(j, delta, bisection_tol)?;
    Ok((d.b, d.cache))
}

/// One pass over `j = 2, ..., N`. Returns whether any coordinate moved.
pub fn sweep(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    delta: f64,
    cache: &Assignment,
    bisection_tol: f64,
) -> Result<(CoefficientVector, Assignment, bool)> {
    if cache.snapshot() != b.as_slice() {
        return Err(Error::StaleCache);
    }
    let mut d = Descent {
        targets,
        grid,
        kappa,
        b: b.clone(),
        cache: cache.clone(),
        evaluations: 0,
    };
    let mut changed = false;
    for j in 1..targets.len() {
        changed |= d.adjust(j, delta, bisection_tol)?.is_some();
    }
    Ok((d.b, d.cache, changed))
}

/// Runs sweeps from `(1, 2, ..., 2)` until one changes nothing, then
/// certifies the result with a fresh trace.
pub fn solve(
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate(targets)?;
    let b0 = initial_admissible(targets, kappa);
    solve_from(b0, targets, grid, kappa, config)
}

/// [`solve`] from a caller-supplied admissible vector with `b_1 = 1`.
pub fn solve_from(
    b0: CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate(targets)?;
    if b0.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: b0.len(),
        });
    }
    if !b0.is_normalized() {
        return Err(Error::InvalidInput("start vector must have b_1 = 1".into()));
    }
    let sup_g = grid.sup_density();
    let bound_n0 = iteration_bound(targets, kappa, sup_g, config.delta, &b0);
    let mut d = Descent::new(b0, targets, grid, kappa)?;
    let f = targets.intensities();
    if let Some(j) = (1..targets.len()).find(|&j| d.cache.counts()[j] > f[j] + config.delta) {
        return Err(Error::InvalidInput(format!(
            "start vector is not admissible: G_{} = {} exceeds f + delta",
            j + 1,
            d.cache.counts()[j]
        )));
    }
    let mut history = Vec::new();
    let mut sweeps = 0;
    loop {
        if sweeps == config.max_sweeps {
            return Err(Error::SweepCapExceeded { sweeps });
        }
        sweeps += 1;
        let mut changed = false;
        for j in 1..targets.len() {
            let before = d.b.get(j);
            let g_before = d.cache.counts()[j];
            if let Some(landing) = d.adjust(j, config.delta, config.bisection_tol)? {
                changed = true;
                history.push(Adjustment {
                    sweep: sweeps,
                    index: j,
                    before,
                    after: landing.value,
                    g_before,
                    g_after: landing.g,
                    below_target: landing.below_target,
                });
            }
        }
        if !changed {
            break;
        }
    }
    let fresh = trace_all(&d.b, targets, grid, kappa)?;
    d.evaluations += 1;
    let final_measure = fresh.measure();
    let err = final_measure.max_deviation(targets, config.checked_indices(targets.len()));
    Ok(SolveReport {
        final_b: d.b,
        final_measure,
        err,
        converged: err <= config.epsilon,
        skip_first: config.skip_first,
        sweeps,
        component_adjustments: history.len(),
        bound_n0,
        sup_g,
        history,
        evaluations: d.evaluations,
        residual_history: Vec::new(),
    })
}

/// Measured change of `G_i` under `b_i ↦ b_i + t` (`t < 0`) next to its
/// Lipschitz bound `sup_g Σ_{r≠i} C(κ, m_i·m_r)/b_r · (-t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzProbe {
    pub observed: f64,
    pub bound: f64,
}

pub fn lipschitz_probe(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    i: usize,
    t: f64,
) -> Result<LipschitzProbe> {
    if !(t < 0.0 && t > -b.get(i)) {
        return Err(Error::InvalidInput(format!(
            "increment {t} must lie in (-b_i, 0)"
        )));
    }
    let a = trace_all(b, targets, grid, kappa)?;
    let (_, m) = update_component(&a, b, targets, grid, kappa, i, b.get(i) + t)?;
    let dirs = targets.directions();
    let k = kappa.value();
    let sum: f64 = (0..targets.len())
        .filter(|&r| r != i)
        .map(|r| pair_constant(k, dirs[i].dot(&dirs[r])) / b.get(r))
        .sum();
    Ok(LipschitzProbe {
        observed: m.values[i] - a.counts()[i],
        bound: grid.sup_density() * sum * (-t),
    })
}

/// Change of `G_i` under `b_r ↦ b_r + t` (`t > 0`, `r ≠ i`) next to
/// `sup_g C(κ, m_i·m_r) / max(b_i, b_r) · t`.
pub fn lipschitz_probe_other(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    i: usize,
    r: usize,
    t: f64,
) -> Result<LipschitzProbe> {
    if i == r || t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidInput("need r != i and t > 0".into()));
    }
    let a = trace_all(b, targets, grid, kappa)?;
    let (_, m) = update_component(&a, b, targets, grid, kappa, r, b.get(r) + t)?;
    let c = pair_constant(
        kappa.value(),
        targets.directions()[i].dot(&targets.directions()[r]),
    );
    Ok(LipschitzProbe {
        observed: m.values[i] - a.counts()[i],
        bound: grid.sup_density() * c / b.get(i).max(b.get(r)) * t,
    })
}
