//! Forward verification and export of solved refractors: ray tracing through
//! the lens surface to render the achieved intensities, and triangle meshes
//! of the surface.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::IntensityImage;
use crate::lattice::{SourceLattice, TargetLattice};
use crate::refractor::{masses, refractor_radius, CoefficientVector, MeasureVector, TargetSpec};
use crate::solver::{solve, SolveReport, SolverConfig};
use crate::sphere::{check_no_total_reflection, refract, RefractionConstant};

/// Achieved intensities next to the prescribed ones.
#[derive(Clone, Debug)]
pub struct Render {
    /// `G_i` max-normalized to `[0, 1]`, one pixel per target.
    pub image: IntensityImage,
    /// `G_i` before normalization.
    pub measure: MeasureVector,
    pub errors: ErrorTable,
}

/// Relative errors `|G_i - f_i| / f_i` with summary quantiles.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub relative: Vec<f64>,
    pub absolute: Vec<f64>,
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl ErrorTable {
    pub fn new(g: &[f64], f: &[f64]) -> Self {
        let absolute: Vec<f64> = g.iter().zip(f).map(|(g, f)| (g - f).abs()).collect();
        let relative: Vec<f64> = absolute.iter().zip(f).map(|(a, f)| a / f).collect();
        let mut sorted = relative.clone();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)]
        };
        Self {
            min: sorted[0],
            median: q(0.5),
            p90: q(0.9),
            max: sorted[sorted.len() - 1],
            relative,
            absolute,
        }
    }

    /// `index,f,g,abs_error,rel_error` with 1-based indices.
    pub fn to_csv(&self, f: &[f64], g: &[f64]) -> String {
        let mut s = String::from("index,f,g,abs_error,rel_error\n");
        for i in 0..f.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                i + 1,
                f[i],
                g[i],
                self.absolute[i],
                self.relative[i]
            );
        }
        s
    }
}

/// Traces every source ray: picks the supporting ellipsoid hit first,
/// refracts through its normal and credits the nearest target direction.
/// With a lattice the image is `(n+1) x (n+1)` with the top row at the
/// largest `r'`; otherwise it is a single row in target order.
pub fn forward_render(
    b: &CoefficientVector,
    targets: &TargetSpec,
    lattice: Option<&TargetLattice>,
    grid: &SourceLattice,
    kappa: RefractionConstant,
) -> Result<Render> {
    let dirs = targets.directions();
    let k = kappa.value();
    let hits = grid
        .grid()
        .points()
        .par_iter()
        .map(|x| {
            let (_, i) = refractor_radius(b, targets, x, kappa)?;
            let normal = (x.as_vector() - k * dirs[i].as_vector()).normalize()?;
            let out = refract(x, &normal, kappa)?.refracted;
            let nearest = (0..dirs.len())
                .max_by(|&p, &q| {
                    dirs[p]
                        .dot(&out)
                        .total_cmp(&dirs[q].dot(&out))
                        .then(q.cmp(&p))
                })
                .expect("nonempty targets");
            Ok(nearest as u32)
        })
        .collect::<Result<Vec<u32>>>()?;
    let g = masses(&hits, dirs.len(), grid.grid());
    let peak = g.iter().cloned().fold(0.0, f64::max);
    let normalized: Vec<f64> = g
        .iter()
        .map(|v| if peak > 0.0 { v / peak } else { 0.0 })
        .collect();
    let image = match lattice {
        Some(l) => {
            if l.len() != dirs.len() {
                return Err(Error::DimensionMismatch {
                    expected: l.len(),
                    got: dirs.len(),
                });
            }
            let n = l.n();
            let side = n + 1;
            let mut px = vec![0.0; side * side];
            for y in 0..side {
                for x in 0..side {
                    px[y * side + x] = normalized[l.index(x, n - y)];
                }
            }
            IntensityImage::new(side, side, px)?
        }
        None => IntensityImage::new(dirs.len(), 1, normalized)?,
    };
    let errors = ErrorTable::new(&g, targets.intensities());
    Ok(Render {
        image,
        measure: MeasureVector { values: g },
        errors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlAscii,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" | "stl-ascii" => Ok(MeshFormat::StlAscii),
            other => Err(Error::UnsupportedFormat(format!(
                "mesh format {other:?}; expected obj or stl"
            ))),
        }
    }
}

/// Lens surface sampled at the source lattice.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// 0-based vertex indices, counter-clockwise seen from `+z`.
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    /// Vertices `ρ(γ) γ`; cell `(a, c)` splits into
    /// `(v00, v10, v11)` and `(v00, v11, v01)`.
    pub fn build(
        b: &CoefficientVector,
        targets: &TargetSpec,
        grid: &SourceLattice,
        kappa: RefractionConstant,
    ) -> Result<Self> {
        let vertices = grid
            .grid()
            .points()
            .par_iter()
            .map(|x| {
                let (rho, _) = refractor_radius(b, targets, x, kappa)?;
                Ok([rho * x.x(), rho * x.y(), rho * x.z()])
            })
            .collect::<Result<Vec<_>>>()?;
        let side = grid.side();
        let v = |a: usize, c: usize| a * side + c;
        let mut triangles = Vec::with_capacity(2 * (side - 1) * (side - 1));
        for a in 0..side - 1 {
            for c in 0..side - 1 {
                triangles.push([v(a, c), v(a + 1, c), v(a + 1, c + 1)]);
                triangles.push([v(a, c), v(a + 1, c + 1), v(a, c + 1)]);
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for p in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", p[0], p[1], p[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn to_stl(&self) -> String {
        let mut s = String::from("solid refractor\n");
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [
                u[1] * w[2] - u[2] * w[1],
                u[2] * w[0] - u[0] * w[2],
                u[0] * w[1] - u[1] * w[0],
            ];
            let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            let n = if len > 0.0 {
                n.map(|v| v / len)
            } else {
                [0.0, 0.0, 0.0]
            };
            let _ = writeln!(s, "  facet normal {} {} {}", n[0], n[1], n[2]);
            s.push_str("    outer loop\n");
            for p in [a, b, c] {
                let _ = writeln!(s, "      vertex {} {} {}", p[0], p[1], p[2]);
            }
            s.push_str("    endloop\n  endfacet\n");
        }
        s.push_str("endsolid refractor\n");
        s
    }

    pub fn render(&self, format: MeshFormat) -> String {
        match format {
            MeshFormat::Obj => self.to_obj(),
            MeshFormat::StlAscii => self.to_stl(),
        }
    }
}

/// Writes the lens surface in `format` to `path`.
pub fn export_mesh(
    b: &CoefficientVector,
    targets: &TargetSpec,
    grid: &SourceLattice,
    kappa: RefractionConstant,
    format: MeshFormat,
    path: &Path,
) -> Result<Mesh> {
    let mesh = Mesh::build(b, targets, grid, kappa)?;
    std::fs::write(path, mesh.render(format)).map_err(|e| Error::io(path, e))?;
    Ok(mesh)
}

/// Runs [`solve`] on the `[r : r' : 2M]` source lattice, doubling `M` after
/// every [`Error::NoFeasibleStep`] until `max_m`. Returns the report and the
/// lattice it was certified on.
pub fn solve_refining_grid(
    targets: &TargetSpec,
    m_start: usize,
    max_m: usize,
    kappa: RefractionConstant,
    config: &SolverConfig,
) -> Result<(SolveReport, SourceLattice)> {
    let mut m = m_start;
    loop {
        let grid = SourceLattice::new(m)?;
        let check = check_no_total_reflection(grid.grid().points(), targets.directions(), kappa);
        if !check.ok {
            return Err(Error::TotalReflectionRisk {
                min_dot: check.min_dot,
                kappa: kappa.value(),
            });
        }
        match solve(targets, grid.grid(), kappa, config) {
            Err(Error::NoFeasibleStep { .. }) if 2 * m <= max_m => m *= 2,
            other => return other.map(|r| (r, grid)),
        }
    }
}

/// Coefficient table:`index,r,r_prime,b` on a lattice, otherwise
/// `index,mx,my,mz,b`. Indices are 1-based.
pub fn coefficients_csv(
    b: &CoefficientVector,
    targets: &TargetSpec,
    lattice: Option<&TargetLattice>,
) -> String {
    let mut s = String::new();
    match lattice {
        Some(l) => {
            s.push_str("index,r,r_prime,b\n");
            for (i, v) in b.as_slice().iter().enumerate() {
                let (r, rp) = l.coords(i);
                let _ = writeln!(s, "{},{},{},{}", i + 1, r, rp, v);
            }
        }
        None => {
            s.push_str("index,mx,my,mz,b\n");
            for (i, (v, m)) in b.as_slice().iter().zip(targets.directions()).enumerate() {
                let _ = writeln!(s, "{},{},{},{},{}", i + 1, m.x(), m.y(), m.z(), v);
            }
        }
    }
    s
}

/// Reads the `b` column of a coefficient table written by [`coefficients_csv`].
pub fn parse_coefficients_csv(text: &str) -> Result<CoefficientVector> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty coefficient file".into()))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == "b")
        .ok_or_else(|| Error::InvalidInput("coefficient file has no `b` column".into()))?;
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad coefficient row {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    CoefficientVector::new(values)
}

/// One run of a scaling study.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub targets: usize,
    pub adjustments: usize,
    pub seconds: f64,
    pub bound: f64,
    /// Source lattice parameter the run was certified on.
    pub m: usize,
}

/// Solves the uniform lattice problem for every `n` in `ns`, with the window
/// rule chosen by `config_for(N)`.
pub fn scaling_study(
    ns: impl IntoIterator<Item = usize>,
    m: usize,
    max_m: usize,
    kappa: RefractionConstant,
    config_for: impl Fn(usize) -> SolverConfig,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for n in ns {
        let targets = TargetLattice::new(n)?.uniform_targets()?;
        let config = config_for(targets.len());
        let start = std::time::Instant::now();
        let (report, grid) = solve_refining_grid(&targets, m, max_m, kappa, &config)?;
        rows.push(ScalingRow {
            n,
            targets: targets.len(),
            adjustments: report.component_adjustments,
            seconds: start.elapsed().as_secs_f64(),
            bound: report.bound_n0,
            m: grid.m(),
        });
    }
    Ok(rows)
}

/// `N,nu,tau_seconds`.
pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from("N,nu,tau_seconds\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.targets, r.adjustments, r.seconds);
    }
    s
}

/// Least-squares slope of `log y` against `log x` over pairs with both
/// positive; `None` with fewer than two such pairs or a single abscissa.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
