//! Lattices of source and target directions: the source cone sampled at
//! `[r : r' : 2M]` and the target cone at `[r : r' : 5n]`.

use crate::error::{Error, Result};
use crate::refractor::{SourceGrid, TargetSpec};
use crate::sphere::{check_no_total_reflection, RefractionConstant, UnitDirection};

/// `(n+1)²` target directions `[r : r' : 5n]`, `r, r' ∈ {-n, -n+2, ..., n}`,
/// enumerated with `r` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetLattice {
    n: usize,
    directions: Vec<UnitDirection>,
}

impl TargetLattice {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("target lattice needs n >= 1".into()));
        }
        let steps = Self::steps(n);
        let z = 5.0 * n as f64;
        let mut directions = Vec::with_capacity((n + 1) * (n + 1));
        for &r in &steps {
            for &rp in &steps {
                directions.push(UnitDirection::new(r as f64, rp as f64, z)?);
            }
        }
        Ok(Self { n, directions })
    }

    fn steps(n: usize) -> Vec<i64> {
        (0..=n).map(|k| 2 * k as i64 - n as i64).collect()
    }

    pub fn n(&self) -> usize {
        self.n
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

    /// Integer coordinates `(r, r')` of lattice index `i`.
    pub fn coords(&self, i: usize) -> (i64, i64) {
        let side = self.n + 1;
        let n = self.n as i64;
        (2 * (i / side) as i64 - n, 2 * (i % side) as i64 - n)
    }

    /// Lattice index of `(i_r, i_r')`, each in `0..=n`.
    pub fn index(&self, i_r: usize, i_rp: usize) -> usize {
        i_r * (self.n + 1) + i_rp
    }

    /// Position `(r/5n, r'/5n)` in the plane `z = 1`.
    pub fn plane_point(&self, i: usize) -> (f64, f64) {
        let (r, rp) = self.coords(i);
        let z = 5.0 * self.n as f64;
        (r as f64 / z, rp as f64 / z)
    }

    pub fn uniform_targets(&self) -> Result<TargetSpec> {
        TargetSpec::uniform(self.directions.clone())
    }
}

/// `(2M+1)²` source directions `[r : r' : 2M]`, `-M <= r, r' <= M`, with
/// uniform weights.
#[derive(Clone, Debug)]
pub struct SourceLattice {
    m: usize,
    grid: SourceGrid,
}

impl SourceLattice {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("source lattice needs M >= 1".into()));
        }
        let mi = m as i64;
        let z = 2.0 * m as f64;
        let mut pts = Vec::with_capacity((2 * m + 1) * (2 * m + 1));
        for r in -mi..=mi {
            for rp in -mi..=mi {
                pts.push(UnitDirection::new(r as f64, rp as f64, z)?);
            }
        }
        Ok(Self {
            m,
            grid: SourceGrid::uniform(pts)?,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Points per side, `2M + 1`.
    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    pub fn grid(&self) -> &SourceGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Both lattices, after checking that no lattice ray is totally reflected.
pub fn build_lattices(
    n: usize,
    m: usize,
    kappa: RefractionConstant,
) -> Result<(TargetLattice, SourceLattice)> {
    let targets = TargetLattice::new(n)?;
    let source = SourceLattice::new(m)?;
    let check = check_no_total_reflection(source.grid().points(), targets.directions(), kappa);
    if !check.ok {
        return Err(Error::TotalReflectionRisk {
            min_dot: check.min_dot,
            kappa: kappa.value(),
        });
    }
    Ok((targets, source))
}
