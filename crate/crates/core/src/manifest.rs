//! Run description written next to every output, so a run can be repeated
//! exactly from its artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{image_to_targets, ImageTargets, IntensityImage, TargetOptions};
use crate::lattice::TargetLattice;
use crate::refractor::TargetSpec;
use crate::solver::SolverConfig;
use crate::sphere::{RefractionConstant, UnitDirection};

/// File name used for the manifest inside an output directory.
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Where the target directions and intensities come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// `(n+1)²` lattice directions with equal intensities.
    Uniform,
    /// Three directions `[0:0:1]`, `[0:1:5]`, `[1:0:5]` with equal intensities.
    Triad,
    /// Lattice directions weighted by a grayscale image.
    Image,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub problem: Problem,
    pub kappa: f64,
    /// Target lattice parameter; unused by [`Problem::Triad`].
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// The source lattice is doubled up to this `M` when a window is skipped.
    pub max_m: usize,
    /// Overrides the window width derived from `epsilon`.
    pub delta: Option<f64>,
    pub epsilon: f64,
    pub skip_first: bool,
    pub schedule: Vec<usize>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub image: Option<PathBuf>,
    pub coefficients: Option<PathBuf>,
    pub out: PathBuf,
}

/// Targets resolved from a manifest.
#[derive(Clone, Debug)]
pub struct ResolvedTargets {
    pub targets: TargetSpec,
    pub lattice: Option<TargetLattice>,
    /// Present for image problems; carries the certification mask.
    pub image: Option<ImageTargets>,
}

impl RunManifest {
    pub fn new(command: &str, problem: Problem) -> Self {
        Self {
            command: command.into(),
            problem,
            kappa: 0.5,
            n: 1,
            m: 100,
            max_m: 800,
            delta: None,
            epsilon: 0.025,
            skip_first: false,
            schedule: Vec::new(),
            seed: 7,
            workers: None,
            image: None,
            coefficients: None,
            out: PathBuf::from("out"),
        }
    }

    pub fn kappa(&self) -> Result<RefractionConstant> {
        RefractionConstant::new(self.kappa).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Checks everything that does not depend on the targets.
    pub fn validate(&self) -> Result<()> {
        self.kappa()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "delta must be positive, got {d}"
                )));
            }
        }
        if self.m == 0 || self.max_m < self.m {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= M <= max_m, got M = {}, max_m = {}",
                self.m, self.max_m
            )));
        }
        if self.problem != Problem::Triad && self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) || self.schedule.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "schedule {:?} must be positive and increasing",
                self.schedule
            )));
        }
        if self.problem == Problem::Image && self.image.is_none() {
            return Err(Error::InvalidConfig(
                "an image problem needs an image path".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be positive".into()));
        }
        Ok(())
    }

    /// Solver settings for `targets`, validated against them.
    pub fn solver_config(&self, targets: &TargetSpec) -> Result<SolverConfig> {
        let mut c = if self.skip_first {
            SolverConfig::skip_first(self.epsilon)
        } else {
            SolverConfig::full(self.epsilon, targets.len())
        };
        if let Some(d) = self.delta {
            c.delta = d;
        }
        c.validate(targets)?;
        Ok(c)
    }

    /// Targets on lattice parameter `n` (ignored for [`Problem::Triad`]).
    pub fn resolve_targets(&self, n: usize) -> Result<ResolvedTargets> {
        match self.problem {
            Problem::Triad => {
                let d = |x, y, z| UnitDirection::new(x, y, z).expect("nonzero");
                Ok(ResolvedTargets {
                    targets: TargetSpec::uniform(vec![
                        d(0.0, 0.0, 1.0),
                        d(0.0, 1.0, 5.0),
                        d(1.0, 0.0, 5.0),
                    ])?,
                    lattice: None,
                    image: None,
                })
            }
            Problem::Uniform => {
                let lattice = TargetLattice::new(n)?;
                Ok(ResolvedTargets {
                    targets: lattice.uniform_targets()?,
                    lattice: Some(lattice),
                    image: None,
                })
            }
            Problem::Image => {
                let img = self.read_image()?;
                let lattice = TargetLattice::new(n)?;
                let it = image_to_targets(&img, &lattice, TargetOptions::default())?;
                Ok(ResolvedTargets {
                    targets: it.targets.clone(),
                    lattice: Some(lattice),
                    image: Some(it),
                })
            }
        }
    }

    pub fn read_image(&self) -> Result<IntensityImage> {
        let path = self
            .image
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no image path given".into()))?;
        IntensityImage::read_pgm(path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest fields serialize")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(format!("bad manifest: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Writes [`MANIFEST_FILE`] into `dir`.
    pub fn write_into(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml_string()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
