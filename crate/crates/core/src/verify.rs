//! Randomized property suites over the geometry and the discrete measure,
//! driven by one seeded generator so every run is reproducible.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::SourceLattice;
use crate::refractor::{trace_all, update_component, CoefficientVector, TargetSpec};
use crate::solver::lipschitz_probe;
use crate::sphere::{classify_dominance_disk, DiskRegion, RefractionConstant, UnitDirection};

/// Half-width of the band around a cap boundary excluded from comparisons.
pub const BOUNDARY_BAND: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// `G_i` vanishes or takes all mass beyond the `(1+κ)` thresholds.
    Thresholds,
    /// Lowering `b_l` never lowers `G_l` and never raises another `G_i`.
    Monotone,
    /// Cap classification agrees with the raw radius comparison.
    Caps,
    /// Incremental updates equal full retraces.
    Cache,
    /// Measure increments stay under the Lipschitz bound.
    Lipschitz,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Thresholds,
        Suite::Monotone,
        Suite::Caps,
        Suite::Cache,
        Suite::Lipschitz,
    ];

    /// Name accepted by `verify --suite`.
    pub fn name(self) -> &'static str {
        match self {
            Suite::Thresholds => "lemma31",
            Suite::Monotone => "lemma33",
            Suite::Caps => "lemma36",
            Suite::Cache => "cache",
            Suite::Lipschitz => "prop51",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

/// Settings shared by the suites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Source lattice parameter; the Lipschitz suite uses at least 200.
    pub m: usize,
    /// Sphere samples per pair in the cap suite.
    pub points_per_pair: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 7,
            m: 40,
            points_per_pair: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub trials: usize,
    /// Individual checks performed (several per trial for some suites).
    pub checks: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    checks: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: 0,
            failures: 0,
            first: None,
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }
}

/// Random configuration inside the target cone `[±1 : ±1 : 5]`.
struct Config {
    targets: TargetSpec,
    b: CoefficientVector,
    kappa: RefractionConstant,
}

fn random_direction_in_target_cone(rng: &mut ChaCha8Rng) -> UnitDirection {
    UnitDirection::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), 5.0).expect("nonzero")
}

fn random_config(rng: &mut ChaCha8Rng) -> Config {
    // κ <= 0.6 keeps every lattice ray transmitted
    let kappa = RefractionConstant::new(rng.gen_range(0.1..0.6)).expect("valid kappa");
    let n = rng.gen_range(2..=8);
    let targets = loop {
        let dirs: Vec<UnitDirection> = (0..n)
            .map(|_| random_direction_in_target_cone(rng))
            .collect();
        if let Ok(t) = TargetSpec::uniform(dirs) {
            break t;
        }
    };
    let b = CoefficientVector::new((0..n).map(|_| rng.gen_range(0.9..1.1)).collect())
        .expect("positive");
    Config { targets, b, kappa }
}

fn random_sphere_point(rng: &mut ChaCha8Rng) -> UnitDirection {
    loop {
        let v = [0; 3].map(|_| rng.gen_range(-1.0..=1.0));
        let r2: f64 = v.iter().map(|c| c * c).sum();
        if r2 > 1e-6 && r2 <= 1.0 {
            return UnitDirection::new(v[0], v[1], v[2]).expect("nonzero");
        }
    }
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut t = Tally::new();
    match suite {
        Suite::Thresholds => {
            let grid = SourceLattice::new(config.m)?;
            for trial in 0..config.trials {
                let c = random_config(&mut rng);
                let k = c.kappa.value();
                let i = rng.gen_range(0..c.targets.len());
                let min_other = (0..c.b.len())
                    .filter(|&j| j != i)
                    .map(|j| c.b.get(j))
                    .fold(f64::INFINITY, f64::min);
                let above = c
                    .b
                    .with_component(i, (1.0 + k) * min_other * (1.0 + rng.gen_range(1e-9..0.5)))?;
                let g = trace_all(&above, &c.targets, grid.grid(), c.kappa)?.counts()[i];
                t.check(g == 0.0, || {
                    format!("trial {trial}: G_{} = {g} above the upper threshold", i + 1)
                });
                let below = c
                    .b
                    .with_component(i, min_other / (1.0 + k) * (1.0 - rng.gen_range(1e-9..0.5)))?;
                let g = trace_all(&below, &c.targets, grid.grid(), c.kappa)?.counts()[i];
                t.check(g == 1.0, || {
                    format!("trial {trial}: G_{} = {g} below the lower threshold", i + 1)
                });
            }
        }
        Suite::Monotone => {
            let grid = SourceLattice::new(config.m)?;
            for trial in 0..config.trials {
                let c = random_config(&mut rng);
                let l = rng.gen_range(0..c.targets.len());
                let a = trace_all(&c.b, &c.targets, grid.grid(), c.kappa)?;
                let lowered = c.b.get(l) * rng.gen_range(0.8..1.0);
                let after = trace_all(
                    &c.b.with_component(l, lowered)?,
                    &c.targets,
                    grid.grid(),
                    c.kappa,
                )?;
                let ok = (0..c.targets.len()).all(|i| {
                    if i == l {
                        after.counts()[i] >= a.counts()[i]
                    } else {
                        after.counts()[i] <= a.counts()[i]
                    }
                });
                t.check(ok, || {
                    format!("trial {trial}: lowering b_{} broke monotonicity", l + 1)
                });
            }
        }
        Suite::Caps => {
            for trial in 0..config.trials {
                let kappa = RefractionConstant::new(rng.gen_range(0.05..0.95))?;
                let m_i = random_sphere_point(&mut rng);
                let m_j = random_sphere_point(&mut rng);
                let b_i = rng.gen_range(0.2..2.0);
                let b_j = rng.gen_range(0.2..2.0);
                let region = match classify_dominance_disk(b_i, &m_i, b_j, &m_j, kappa) {
                    Ok(r) => r,
                    Err(Error::DegenerateAxes { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let k = kappa.value();
                let mut mismatches = 0;
                for _ in 0..config.points_per_pair {
                    let x = random_sphere_point(&mut rng);
                    if region
                        .boundary_offset(&x)
                        .is_some_and(|o| o.abs() <= BOUNDARY_BAND)
                    {
                        continue;
                    }
                    let raw = b_i / (1.0 - k * m_i.dot(&x)) <= b_j / (1.0 - k * m_j.dot(&x));
                    if raw != region.contains(&x) {
                        mismatches += 1;
                    }
                }
                t.check(mismatches == 0, || {
                    format!(
                        "trial {trial}: {mismatches} disagreements for {}",
                        describe(&region)
                    )
                });
            }
        }
        Suite::Cache => {
            let grid = SourceLattice::new(config.m)?;
            for trial in 0..config.trials {
                let c = random_config(&mut rng);
                let j = rng.gen_range(0..c.targets.len());
                let a = trace_all(&c.b, &c.targets, grid.grid(), c.kappa)?;
                let v = c.b.get(j) * rng.gen_range(0.8..1.2);
                let (u, m) = update_component(&a, &c.b, &c.targets, grid.grid(), c.kappa, j, v)?;
                let fresh =
                    trace_all(&c.b.with_component(j, v)?, &c.targets, grid.grid(), c.kappa)?;
                let ok = u.winners() == fresh.winners()
                    && m.values
                        .iter()
                        .zip(fresh.counts())
                        .all(|(x, y)| x.to_bits() == y.to_bits());
                t.check(ok, || {
                    format!(
                        "trial {trial}: update of b_{} differs from a full retrace",
                        j + 1
                    )
                });
            }
        }
        Suite::Lipschitz => {
            let grid = SourceLattice::new(config.m.max(200))?;
            let slack = 5.0 / (grid.len() as f64).sqrt();
            for trial in 0..config.trials {
                let c = random_config(&mut rng);
                let i = rng.gen_range(0..c.targets.len());
                let p = lipschitz_probe(
                    &c.b,
                    &c.targets,
                    grid.grid(),
                    c.kappa,
                    i,
                    -0.05 * c.b.get(i),
                )?;
                t.check(p.observed >= 0.0 && p.observed <= p.bound + slack, || {
                    format!(
                        "trial {trial}: increase {} against bound {}",
                        p.observed, p.bound
                    )
                });
            }
        }
    }
    Ok(SuiteOutcome {
        suite,
        trials: config.trials,
        checks: t.checks,
        failures: t.failures,
        first_failure: t.first,
    })
}

fn describe(r: &DiskRegion) -> String {
    match r {
        DiskRegion::Empty => "an empty region".into(),
        DiskRegion::FullSphere => "the full sphere".into(),
        DiskRegion::Cap { angular_radius, .. } => format!("a cap of radius {angular_radius}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> SuiteConfig {
        SuiteConfig {
            trials,
            seed: 3,
            m: 12,
            points_per_pair: 500,
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("lemma99".parse::<Suite>().is_err());
    }

    #[test]
    fn fast_suites_pass() {
        for s in [
            Suite::Thresholds,
            Suite::Monotone,
            Suite::Caps,
            Suite::Cache,
        ] {
            let o = run_suite(s, &small(10)).unwrap();
            assert!(o.passed(), "{s}: {:?}", o.first_failure);
            assert!(o.checks >= 9);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = run_suite(Suite::Caps, &small(5)).unwrap();
        let b = run_suite(Suite::Caps, &small(5)).unwrap();
        assert_eq!(a, b);
    }
}
