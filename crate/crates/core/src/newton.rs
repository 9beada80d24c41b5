//! Quasi-Newton refinement of `(b_2, ..., b_N) ↦ (G_2 - f_2, ..., G_N - f_N)`
//! with a dogleg trust region and rank-one secant updates, plus coefficient
//! interpolation between target lattices for the coarse-to-fine schedule.
//!
//! `G` is piecewise constant on coefficient space, so the Jacobian is taken by
//! finite differences with a step well above the grid quantization, and flat
//! columns are repaired by a one-coordinate bisection instead.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::ImageTargets;
use crate::lattice::{SourceLattice, TargetLattice};
use crate::refractor::{
    degenerate_region_membership, measure, trace_all, update_component, Assignment,
    CoefficientVector, SourceGrid, TargetSpec,
};
use crate::solver::{solve, Adjustment, ResidualRecord, SolveReport, SolverConfig};
use crate::sphere::RefractionConstant;

/// Secant equation tolerance checked after every rank-one update.
const SECANT_TOL: f64 = 1e-10;

/// Residual map with `b_1` pinned to one.
pub struct ResidualSystem<'a> {
    pub targets: &'a TargetSpec,
    pub grid: &'a SourceGrid,
    pub kappa: RefractionConstant,
    /// Finite-difference step on the coefficients.
    pub fd_step: f64,
    evaluations: usize,
}

impl<'a> ResidualSystem<'a> {
    pub fn new(
        targets: &'a TargetSpec,
        grid: &'a SourceGrid,
        kappa: RefractionConstant,
        fd_step: f64,
    ) -> Self {
        Self {
            targets,
            grid,
            kappa,
            fd_step,
            evaluations: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.targets.len() - 1
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<CoefficientVector> {
        let mut b = Vec::with_capacity(x.len() + 1);
        b.push(1.0);
        b.extend_from_slice(x);
        CoefficientVector::new(b)
    }

    /// `(G_2 - f_2, ..., G_N - f_N)`; their sum is `f_1 - G_1`.
    pub fn residual_of(&self, a: &Assignment) -> DVector<f64> {
        let f = self.targets.intensities();
        DVector::from_iterator(self.dimension(), (1..f.len()).map(|i| a.counts()[i] - f[i]))
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<(Assignment, DVector<f64>)> {
        let b = self.coefficients(x)?;
        let a = trace_all(&b, self.targets, self.grid, self.kappa)?;
        self.evaluations += 1;
        let r = self.residual_of(&a);
        Ok((a, r))
    }

    /// Backward differences `(F(x - h e_j) - F(x)) / (-h)`, one incremental
    /// update per column.
    pub fn jacobian(
        &mut self,
        x: &[f64],
        a: &Assignment,
        fx: &DVector<f64>,
    ) -> Result<DMatrix<f64>> {
        let b = self.coefficients(x)?;
        let h = self.fd_step;
        let d = self.dimension();
        let columns = (0..d)
            .into_par_iter()
            .map(|j| {
                let v = (b.get(j + 1) - h).max(0.5 * b.get(j + 1));
                let (next, _) =
                    update_component(a, &b, self.targets, self.grid, self.kappa, j + 1, v)?;
                let step = v - b.get(j + 1);
                Ok((self.residual_of(&next) - fx) / step)
            })
            .collect::<Result<Vec<DVector<f64>>>>()?;
        self.evaluations += d;
        Ok(DMatrix::from_columns(&columns))
    }
}

/// Settings of [`quasi_newton_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    /// Target bound on `max_i |G_i - f_i|` over all `i`.
    pub tolerance: f64,
    /// Budget of O(K) measure evaluations.
    pub max_evaluations: usize,
    pub trust_radius: f64,
    /// Finite-difference step; `None` means `10 / K`.
    pub fd_step: Option<f64>,
}

impl RefineConfig {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            max_evaluations: 20_000,
            trust_radius: 0.05,
            fd_step: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let fd_ok = self.fd_step.is_none_or(|h| h > 0.0 && h.is_finite());
        if !(self.tolerance > 0.0 && self.trust_radius > 0.0 && self.max_evaluations > 0 && fd_ok) {
            return Err(Error::InvalidConfig(format!(
                "refinement settings must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

fn full_error(r: &DVector<f64>) -> f64 {
    r.amax().max(r.sum().abs())
}

/// Dogleg step for `J p ≈ -F` within radius `delta`.
fn dogleg(j: &DMatrix<f64>, f: &DVector<f64>, delta: f64) -> DVector<f64> {
    let rhs = -f;
    let gn = j
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .or_else(|| j.clone().svd(true, true).solve(&rhs, 1e-12).ok())
        .unwrap_or_else(|| DVector::zeros(f.len()));
    if gn.norm() <= delta {
        return gn;
    }
    let g = j.transpose() * f;
    let jg = j * &g;
    if g.norm() == 0.0 || jg.norm() == 0.0 {
        let scale = delta / gn.norm();
        return gn * scale;
    }
    let sd = &g * (-g.norm_squared() / jg.norm_squared());
    if sd.norm() >= delta {
        return &g * (-delta / g.norm());
    }
    // largest tau in [0, 1] with |sd + tau (gn - sd)| = delta
    let d = &gn - &sd;
    let (a, b, c) = (
        d.norm_squared(),
        2.0 * sd.dot(&d),
        sd.norm_squared() - delta * delta,
    );
    let tau = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    sd + d * tau
}

/// Rank-one update making `J p = ΔF` hold exactly.
pub fn broyden_update(j: &mut DMatrix<f64>, p: &DVector<f64>, df: &DVector<f64>) {
    let pp = p.norm_squared();
    if pp == 0.0 {
        return;
    }
    let u = (df - &*j * p) / pp;
    *j += u * p.transpose();
}

struct Refiner<'a> {
    sys: ResidualSystem<'a>,
    config: &'a RefineConfig,
    lo: f64,
    hi: f64,
    x: Vec<f64>,
    a: Assignment,
    f: DVector<f64>,
    history: Vec<Adjustment>,
    residuals: Vec<ResidualRecord>,
}

impl Refiner<'_> {
    fn err(&self) -> f64 {
        full_error(&self.f)
    }

    fn record(&mut self, iteration: usize) {
        self.residuals.push(ResidualRecord {
            iteration,
            max_residual: self.err(),
            evaluations: self.sys.evaluations(),
        });
    }

    /// Moves `b_j` (0-based full index) by monotone bisection to bring `G_j`
    /// as close to `f_j` as the grid allows.
    fn rebalance(&mut self, j: usize, iteration: usize) -> Result<()> {
        let b = self.sys.coefficients(&self.x)?;
        let target = self.sys.targets.intensities()[j];
        let start = b.get(j);
        let g_start = self.a.counts()[j];
        let eval = |sys: &mut ResidualSystem, v: f64| -> Result<f64> {
            let (_, m) = update_component(&self.a, &b, sys.targets, sys.grid, sys.kappa, j, v)?;
            sys.evaluations += 1;
            Ok(m.values[j])
        };
        // G_j is non-increasing in b_j: keep G(lo) >= target > G(hi)
        let (mut lo, mut hi, mut g_lo, mut g_hi) = if g_start >= target {
            (start, self.hi, g_start, eval(&mut self.sys, self.hi)?)
        } else {
            (self.lo, start, eval(&mut self.sys, self.lo)?, g_start)
        };
        if g_lo >= target && g_hi < target {
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if !(mid > lo && mid < hi) {
                    break;
                }
                let g = eval(&mut self.sys, mid)?;
                if g >= target {
                    lo = mid;
                    g_lo = g;
                } else {
                    hi = mid;
                    g_hi = g;
                }
                if (g_lo - target).abs() <= 0.1 * self.config.tolerance {
                    break;
                }
            }
        }
        let value = if (g_lo - target).abs() <= (g_hi - target).abs() {
            lo
        } else {
            hi
        };
        let (a, _) = update_component(
            &self.a,
            &b,
            self.sys.targets,
            self.sys.grid,
            self.sys.kappa,
            j,
            value,
        )?;
        self.sys.evaluations += 1;
        self.history.push(Adjustment {
            sweep: iteration,
            index: j,
            before: start,
            after: value,
            g_before: g_start,
            g_after: a.counts()[j],
            below_target: false,
        });
        self.x[j - 1] = value;
        self.f = self.sys.residual_of(&a);
        self.a = a;
        Ok(())
    }

    /// Fresh Jacobian after repairing flat columns.
    fn fresh_jacobian(&mut self, iteration: usize) -> Result<DMatrix<f64>> {
        loop {
            let j = self.sys.jacobian(&self.x, &self.a, &self.f)?;
            let flat: Vec<usize> = (0..j.ncols())
                .filter(|&c| j.column(c).iter().all(|v| *v == 0.0))
                .collect();
            if flat.is_empty() || self.sys.evaluations() >= self.config.max_evaluations {
                return Ok(j);
            }
            for c in flat {
                self.rebalance(c + 1, iteration)?;
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut radius = self.config.trust_radius;
        let min_radius = self.sys.fd_step;
        let mut iteration = 0;
        self.record(iteration);
        if self.err() <= self.config.tolerance {
            return Ok(());
        }
        let mut jac = self.fresh_jacobian(iteration)?;
        let mut failures = 0;
        while self.err() > self.config.tolerance
            && self.sys.evaluations() < self.config.max_evaluations
        {
            iteration += 1;
            let step = dogleg(&jac, &self.f, radius);
            let trial: Vec<f64> = self
                .x
                .iter()
                .zip(step.iter())
                .map(|(x, p)| (x + p).clamp(self.lo, self.hi))
                .collect();
            let p =
                DVector::from_iterator(trial.len(), trial.iter().zip(&self.x).map(|(t, x)| t - x));
            if p.norm() == 0.0 {
                jac = self.fresh_jacobian(iteration)?;
                radius = self.config.trust_radius;
                continue;
            }
            let (a, f_new) = self.sys.evaluate(&trial)?;
            let predicted = self.f.norm_squared() - (&self.f + &jac * &p).norm_squared();
            let actual = self.f.norm_squared() - f_new.norm_squared();
            let ratio = if predicted > 0.0 {
                actual / predicted
            } else {
                -1.0
            };
            broyden_update(&mut jac, &p, &(&f_new - &self.f));
            debug_assert!(
                (&jac * &p - (&f_new - &self.f)).amax() <= SECANT_TOL * (1.0 + f_new.amax())
            );
            if ratio < 0.25 {
                radius = 0.25 * p.norm();
            } else if ratio > 0.75 && p.norm() >= 0.99 * radius {
                radius *= 2.0;
            }
            if actual > 0.0 {
                self.x = trial;
                self.a = a;
                self.f = f_new;
                failures = 0;
            } else {
                failures += 1;
            }
            self.record(iteration);
            if failures >= 2 || radius < min_radius {
                jac = self.fresh_jacobian(iteration)?;
                radius = radius.max(10.0 * min_radius).min(self.config.trust_radius);
                failures = 0;
            }
        }
        Ok(())
    }
}

/// Refines `start` until every `|G_i - f_i|`, including `i = 1`, is within
/// the tolerance, certified by a fresh full trace.
pub fn quasi_newton_solve(
    start: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceGrid,
    kappa: RefractionConstant,
    config: &RefineConfig,
) -> Result<SolveReport> {
    config.validate()?;
    if targets.len() < 2 {
        return Err(Error::InvalidConfig(
            "refinement needs at least two target directions".into(),
        ));
    }
    if start.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: start.len(),
        });
    }
    let start = start.normalized();
    if let Some(i) = (0..start.len()).find(|&i| degenerate_region_membership(&start, kappa, i)) {
        return Err(Error::DegenerateStart { index: i + 1 });
    }
    let k = kappa.value();
    let fd_step = config.fd_step.unwrap_or(10.0 / grid.len() as f64);
    let mut sys = ResidualSystem::new(targets, grid, kappa, fd_step);
    let x: Vec<f64> = start.as_slice()[1..].to_vec();
    let (a, f) = sys.evaluate(&x)?;
    let mut r = Refiner {
        sys,
        config,
        lo: 1.0 / (1.0 + k),
        hi: 1.0 + k,
        x,
        a,
        f,
        history: Vec::new(),
        residuals: Vec::new(),
    };
    r.run()?;
    let b = r.sys.coefficients(&r.x)?;
    let fresh = trace_all(&b, targets, grid, kappa)?;
    let final_measure = fresh.measure();
    let err = final_measure.max_deviation(targets, 0..targets.len());
    let report = SolveReport {
        final_b: b,
        final_measure,
        err,
        converged: err <= config.tolerance,
        skip_first: false,
        sweeps: r.residuals.last().map_or(0, |x| x.iteration),
        component_adjustments: r.history.len(),
        bound_n0: f64::INFINITY,
        sup_g: grid.sup_density(),
        history: r.history,
        evaluations: r.sys.evaluations() + 1,
        residual_history: r.residuals,
    };
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NotConverged {
            report: Box::new(report),
        })
    }
}

/// 1-D interpolation weights at fractional node position `s ∈ [0, last]`:
/// cubic Lagrange on interior cells, linear on edge cells.
fn axis_weights(num: usize, den: usize, last: usize) -> Vec<(usize, f64)> {
    // s = num / den
    let cell = (num / den).min(last.saturating_sub(1));
    let t = (num as f64 - (cell * den) as f64) / den as f64;
    if last == 0 {
        return vec![(0, 1.0)];
    }
    if last >= 3 && cell >= 1 && cell + 2 <= last {
        let nodes = [-1.0, 0.0, 1.0, 2.0];
        (0..4)
            .map(|a| {
                let w = (0..4)
                    .filter(|&c| c != a)
                    .map(|c| (t - nodes[c]) / (nodes[a] - nodes[c]))
                    .product::<f64>();
                (cell + a - 1, w)
            })
            .collect()
    } else {
        vec![(cell, 1.0 - t), (cell + 1, t)]
    }
}

/// Maps coefficients on the `coarse_n` target lattice to the `fine_n`
/// lattice by treating them as a function of `(r/5n, r'/5n)`. The result is
/// clamped to `>= 1/(1+κ)` and rescaled so its first entry is one.
pub fn interpolate_coefficients(
    coarse_n: usize,
    b_coarse: &CoefficientVector,
    fine_n: usize,
    kappa: RefractionConstant,
) -> Result<CoefficientVector> {
    let side = coarse_n + 1;
    if b_coarse.len() != side * side {
        return Err(Error::DimensionMismatch {
            expected: side * side,
            got: b_coarse.len(),
        });
    }
    if coarse_n == 0 || fine_n < coarse_n {
        return Err(Error::InvalidConfig(format!(
            "cannot interpolate from n = {coarse_n} to n = {fine_n}"
        )));
    }
    let coarse = TargetLattice::new(coarse_n)?;
    let fine = TargetLattice::new(fine_n)?;
    let floor = 1.0 / (1.0 + kappa.value());
    let values: Vec<f64> = (0..fine.len())
        .map(|i| {
            let (fr, frp) = (i / (fine_n + 1), i % (fine_n + 1));
            // fine node fr sits at coarse position fr * coarse_n / fine_n
            let wr = axis_weights(fr * coarse_n, fine_n, coarse_n);
            let wc = axis_weights(frp * coarse_n, fine_n, coarse_n);
            let mut v = 0.0;
            for &(a, x) in &wr {
                for &(c, y) in &wc {
                    v += x * y * b_coarse.get(coarse.index(a, c));
                }
            }
            v.max(floor)
        })
        .collect();
    Ok(CoefficientVector::new(values)?.normalized())
}

/// Stage tolerance policy of [`multires_schedule`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StageTolerance {
    Absolute(f64),
    /// This fraction of the smallest intensity on the certification mask.
    FractionOfMinMasked(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiresConfig {
    pub tolerance: StageTolerance,
    /// Window of the first-stage coordinate descent; `None` means
    /// `min f / (2N)`.
    pub pivot_delta: Option<f64>,
    /// Template for the refinement settings; its tolerance is replaced per stage.
    pub refine: RefineConfig,
}

impl Default for MultiresConfig {
    fn default() -> Self {
        Self {
            tolerance: StageTolerance::FractionOfMinMasked(0.1),
            pivot_delta: None,
            refine: RefineConfig::new(1.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub n: usize,
    pub tolerance: f64,
    /// Max residual of the interpolated (or pivot) start.
    pub start_err: f64,
    pub report: SolveReport,
}

#[derive(Clone, Debug)]
pub struct MultiresReport {
    pub stages: Vec<StageReport>,
    pub targets: ImageTargets,
}

impl MultiresReport {
    pub fn last(&self) -> &SolveReport {
        &self.stages.last().expect("nonempty schedule").report
    }
}

/// Doublings of the pivot window tried after a skipped window.
const PIVOT_WIDENINGS: usize = 8;

/// Skip-first descent used only as a starting point for refinement. Mirror
/// targets make `G_j` jump by a whole grid line when `b_j` crosses its
/// partner's value, so a skipped window widens `δ` instead of failing.
fn pivot(
    targets: &TargetSpec,
    grid: &SourceLattice,
    kappa: RefractionConstant,
    delta: f64,
) -> Result<CoefficientVector> {
    let mut delta = delta;
    for _ in 0..PIVOT_WIDENINGS {
        match solve(
            targets,
            grid.grid(),
            kappa,
            &SolverConfig::skip_first(delta),
        ) {
            Err(Error::NoFeasibleStep { .. }) => delta *= 2.0,
            other => return other.map(|r| r.final_b),
        }
    }
    solve(
        targets,
        grid.grid(),
        kappa,
        &SolverConfig::skip_first(delta),
    )
    .map(|r| r.final_b)
}

/// Coarse-to-fine solve: coordinate descent plus refinement at the first `n`,
/// then interpolation and refinement at every later `n`.
pub fn multires_schedule(
    provider: &dyn Fn(&TargetLattice) -> Result<ImageTargets>,
    schedule: &[usize],
    kappa: RefractionConstant,
    grid: &SourceLattice,
    config: &MultiresConfig,
) -> Result<MultiresReport> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "schedule {schedule:?} must be nonempty and increasing"
        )));
    }
    let mut stages: Vec<StageReport> = Vec::new();
    let mut last_targets = None;
    for (stage, &n) in schedule.iter().enumerate() {
        let wrap = |e: Error| Error::Stage {
            stage: stage + 1,
            n,
            source: Box::new(e),
        };
        let lattice = TargetLattice::new(n).map_err(wrap)?;
        let image_targets = provider(&lattice).map_err(wrap)?;
        let targets = &image_targets.targets;
        let tolerance = match config.tolerance {
            StageTolerance::Absolute(t) => t,
            StageTolerance::FractionOfMinMasked(c) => c * image_targets.min_masked_intensity(),
        };
        let start = match stages.last() {
            None => {
                let delta = config
                    .pivot_delta
                    .unwrap_or(targets.min_intensity() / (2.0 * targets.len() as f64));
                pivot(targets, grid, kappa, delta).map_err(wrap)?
            }
            Some(prev) => {
                interpolate_coefficients(prev.n, &prev.report.final_b, n, kappa).map_err(wrap)?
            }
        };
        let start_err = measure(&start, targets, grid.grid(), kappa)
            .map_err(wrap)?
            .max_deviation(targets, 0..targets.len());
        let refine = RefineConfig {
            tolerance,
            ..config.refine.clone()
        };
        let report =
            quasi_newton_solve(&start, targets, grid.grid(), kappa, &refine).map_err(wrap)?;
        stages.push(StageReport {
            n,
            tolerance,
            start_err,
            report,
        });
        last_targets = Some(image_targets);
    }
    Ok(MultiresReport {
        stages,
        targets: last_targets.expect("nonempty schedule"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::UnitDirection;

    fn half() -> RefractionConstant {
        RefractionConstant::new(0.5).unwrap()
    }

    fn dir(x: f64, y: f64, z: f64) -> UnitDirection {
        UnitDirection::new(x, y, z).unwrap()
    }

    fn triad() -> TargetSpec {
        TargetSpec::uniform(vec![
            dir(0.0, 0.0, 1.0),
            dir(0.0, 1.0, 5.0),
            dir(1.0, 0.0, 5.0),
        ])
        .unwrap()
    }

    #[test]
    fn broyden_secant() {
        let mut j = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = DVector::from_vec(vec![0.3, -0.2]);
        let df = DVector::from_vec(vec![0.1, 0.5]);
        broyden_update(&mut j, &p, &df);
        assert!((&j * &p - &df).amax() < SECANT_TOL);
    }

    #[test]
    fn dogleg_respects_radius() {
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let f = DVector::from_vec(vec![1.0, 1.0]);
        let full = dogleg(&j, &f, 10.0);
        assert!((full - DVector::from_vec(vec![-0.5, -1.0])).amax() < 1e-15);
        let short = dogleg(&j, &f, 0.3);
        assert!((short.norm() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn solved_start_returns_immediately() {
        let t = triad();
        let g = SourceLattice::new(30).unwrap();
        let r = solve(&t, g.grid(), half(), &SolverConfig::full(1.0 / 30.0, 3)).unwrap();
        let q = quasi_newton_solve(
            &r.final_b,
            &t,
            g.grid(),
            half(),
            &RefineConfig::new(1.0 / 30.0),
        )
        .unwrap();
        assert_eq!(q.final_b, r.final_b);
        assert_eq!(q.residual_history.len(), 1);
        assert_eq!(q.sweeps, 0);
    }

    #[test]
    fn triad_refines_from_pivot() {
        let t = triad();
        let g = SourceLattice::new(40).unwrap();
        let pivot = solve(&t, g.grid(), half(), &SolverConfig::skip_first(0.05)).unwrap();
        let q = quasi_newton_solve(
            &pivot.final_b,
            &t,
            g.grid(),
            half(),
            &RefineConfig::new(1.0 / 60.0),
        )
        .unwrap();
        assert!(q.err <= 1.0 / 60.0);
        let m = measure(&q.final_b, &t, g.grid(), half()).unwrap();
        assert_eq!(m, q.final_measure);
    }

    #[test]
    fn degenerate_start_is_rejected() {
        let t = triad();
        let g = SourceLattice::new(5).unwrap();
        let b = CoefficientVector::new(vec![1.0, 2.0, 2.0]).unwrap();
        assert!(matches!(
            quasi_newton_solve(&b, &t, g.grid(), half(), &RefineConfig::new(0.01)),
            Err(Error::DegenerateStart { index: 1 })
        ));
    }

    #[test]
    fn interpolation_reproduces_constants_and_identity() {
        let k = half();
        let c = CoefficientVector::new(vec![1.2; 16]).unwrap();
        let fine = interpolate_coefficients(3, &c, 7, k).unwrap();
        assert_eq!(fine.len(), 64);
        assert!(fine.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let vals: Vec<f64> = (0..16).map(|i| 1.0 + 0.01 * ((i * 7) % 5) as f64).collect();
        let b = CoefficientVector::new(vals).unwrap();
        assert_eq!(interpolate_coefficients(3, &b, 3, k).unwrap(), b);
    }

    #[test]
    fn interpolation_reproduces_ramps() {
        let k = half();
        for (nc, nf) in [(1, 3), (2, 4), (3, 6), (4, 9), (5, 10)] {
            let coarse = TargetLattice::new(nc).unwrap();
            let fine = TargetLattice::new(nf).unwrap();
            let ramp = |u: f64, v: f64| 1.0 + 0.7 * u - 0.4 * v;
            let b = CoefficientVector::new(
                (0..coarse.len())
                    .map(|i| {
                        let (u, v) = coarse.plane_point(i);
                        ramp(u, v)
                    })
                    .collect(),
            )
            .unwrap();
            let out = interpolate_coefficients(nc, &b, nf, k).unwrap();
            let scale = ramp(-0.2, -0.2);
            for i in 0..fine.len() {
                let (u, v) = fine.plane_point(i);
                assert!(
                    (out.get(i) * scale - ramp(u, v)).abs() < 1e-10,
                    "{nc}->{nf} at {i}"
                );
            }
        }
    }

    #[test]
    fn interpolation_reproduces_cubics_inside() {
        let k = half();
        let coarse = TargetLattice::new(6).unwrap();
        let fine = TargetLattice::new(12).unwrap();
        let cubic = |u: f64, v: f64| 1.0 + 3.0 * u * u * u - 2.0 * u * v * v + v * v;
        let b = CoefficientVector::new(
            (0..coarse.len())
                .map(|i| {
                    let (u, v) = coarse.plane_point(i);
                    cubic(u, v)
                })
                .collect(),
        )
        .unwrap();
        let out = interpolate_coefficients(6, &b, 12, k).unwrap();
        let scale = cubic(-0.2, -0.2);
        for i in 0..fine.len() {
            let (u, v) = fine.plane_point(i);
            // interior cells of the coarse lattice in both axes
            let inside =
                |w: f64| (-0.2 + 2.0 / 30.0 - 1e-12..=0.2 - 2.0 / 30.0 + 1e-12).contains(&w);
            if inside(u) && inside(v) {
                assert!((out.get(i) * scale - cubic(u, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolation_dimension_check() {
        let b = CoefficientVector::new(vec![1.0; 5]).unwrap();
        assert!(matches!(
            interpolate_coefficients(1, &b, 2, half()),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 5
            })
        ));
    }
}
