//! Nonnegative measures on the group: finite atom lists and densities
//! carried on a lattice cloud (Haar = Lebesgue in exponential coordinates).

use crate::group::{GPoint, GroupError, GroupSpec};
use crate::spatial::PointCloud;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("negative or non-finite mass {0}")]
    BadMass(f64),
    #[error("atom and mass counts differ ({atoms} vs {masses})")]
    LengthMismatch { atoms: usize, masses: usize },
    #[error("density length {got} does not match cloud size {want}")]
    DensityMismatch { got: usize, want: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A finite list of point masses.
#[derive(Debug, Clone)]
pub struct AtomicMeasure {
    group: Arc<GroupSpec>,
    atoms: Vec<GPoint>,
    masses: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(
        group: Arc<GroupSpec>,
        atoms: Vec<GPoint>,
        masses: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        if atoms.len() != masses.len() {
            return Err(MeasureError::LengthMismatch { atoms: atoms.len(), masses: masses.len() });
        }
        for a in &atoms {
            group.check_shape(a)?;
        }
        for &m in &masses {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(MeasureError::BadMass(m));
            }
        }
        Ok(AtomicMeasure { group, atoms, masses })
    }

    pub fn single(group: Arc<GroupSpec>, atom: GPoint, mass: f64) -> Result<Self, MeasureError> {
        AtomicMeasure::new(group, vec![atom], vec![mass])
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn atoms(&self) -> &[GPoint] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> AtomicMeasure {
        AtomicMeasure {
            group: self.group.clone(),
            atoms: self.atoms.clone(),
            masses: self.masses.iter().map(|m| m * c).collect(),
        }
    }

    pub fn ball_mass(&self, x: &GPoint, t: f64) -> f64 {
        let g = self.group.as_ref();
        self.atoms
            .iter()
            .zip(&self.masses)
            .filter(|(a, _)| g.qdist_raw(x.coords(), a.coords()) < t)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn restrict_to_ball(&self, center: &GPoint, radius: f64) -> AtomicMeasure {
        let g = self.group.as_ref();
        let masses = self
            .atoms
            .iter()
            .zip(&self.masses)
            .map(|(a, &m)| {
                if g.qdist_raw(center.coords(), a.coords()) < radius {
                    m
                } else {
                    0.0
                }
            })
            .collect();
        AtomicMeasure { group: self.group.clone(), atoms: self.atoms.clone(), masses }
    }
}

/// An absolutely continuous measure `f dx` sampled on a cloud: `density[i]`
/// is the value of the density at point i, carrying mass
/// `density[i] * cell_volume`.
#[derive(Debug, Clone)]
pub struct GridDensity {
    cloud: Arc<PointCloud>,
    density: Vec<f64>,
}

impl GridDensity {
    pub fn new(cloud: Arc<PointCloud>, density: Vec<f64>) -> Result<Self, MeasureError> {
        if density.len() != cloud.len() {
            return Err(MeasureError::DensityMismatch { got: density.len(), want: cloud.len() });
        }
        for &d in &density {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(MeasureError::BadMass(d));
            }
        }
        Ok(GridDensity { cloud, density })
    }

    /// Density `value` on the gauge ball, zero outside.
    pub fn uniform_ball(
        cloud: Arc<PointCloud>,
        center: &GPoint,
        radius: f64,
        value: f64,
    ) -> Result<Self, MeasureError> {
        let g = cloud.group().clone();
        let density = cloud
            .points()
            .iter()
            .map(|p| {
                if g.qdist_raw(center.coords(), p.coords()) < radius {
                    value
                } else {
                    0.0
                }
            })
            .collect();
        GridDensity::new(cloud, density)
    }

    pub fn cloud(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        self.cloud.group()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cloud.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> GridDensity {
        GridDensity {
            cloud: self.cloud.clone(),
            density: self.density.iter().map(|d| d * c).collect(),
        }
    }

    pub fn ball_mass(&self, x: &GPoint, t: f64) -> f64 {
        let g = self.cloud.group().as_ref();
        let vol = self.cloud.cell_volume();
        self.cloud
            .points()
            .iter()
            .zip(&self.density)
            .filter(|(p, _)| g.qdist_raw(x.coords(), p.coords()) < t)
            .map(|(_, d)| d * vol)
            .sum()
    }

    pub fn restrict_to_ball(&self, center: &GPoint, radius: f64) -> GridDensity {
        let g = self.cloud.group().as_ref();
        let density = self
            .cloud
            .points()
            .iter()
            .zip(&self.density)
            .map(|(p, &d)| {
                if g.qdist_raw(center.coords(), p.coords()) < radius {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        GridDensity { cloud: self.cloud.clone(), density }
    }
}

/// A nonnegative measure of either kind.
#[derive(Debug, Clone)]
pub enum Measure {
    Atomic(AtomicMeasure),
    Grid(GridDensity),
}

impl Measure {
    pub fn group(&self) -> &Arc<GroupSpec> {
        match self {
            Measure::Atomic(a) => a.group(),
            Measure::Grid(d) => d.group(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Measure::Atomic(a) => a.total_mass(),
            Measure::Grid(d) => d.total_mass(),
        }
    }

    pub fn ball_mass(&self, x: &GPoint, t: f64) -> f64 {
        match self {
            Measure::Atomic(a) => a.ball_mass(x, t),
            Measure::Grid(d) => d.ball_mass(x, t),
        }
    }

    pub fn restrict_to_ball(&self, center: &GPoint, radius: f64) -> Measure {
        match self {
            Measure::Atomic(a) => Measure::Atomic(a.restrict_to_ball(center, radius)),
            Measure::Grid(d) => Measure::Grid(d.restrict_to_ball(center, radius)),
        }
    }

    pub fn scaled(&self, c: f64) -> Measure {
        match self {
            Measure::Atomic(a) => Measure::Atomic(a.scaled(c)),
            Measure::Grid(d) => Measure::Grid(d.scaled(c)),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Measure::Atomic(_))
    }

    /// (distance from x, carried mass) pairs for every carrier element.
    pub(crate) fn distance_masses(&self, x: &GPoint, out: &mut Vec<(f64, f64)>) {
        match self {
            Measure::Atomic(a) => {
                let g = a.group.as_ref();
                for (p, &m) in a.atoms.iter().zip(&a.masses) {
                    if m > 0.0 {
                        out.push((g.qdist_raw(x.coords(), p.coords()), m));
                    }
                }
            }
            Measure::Grid(d) => {
                let g = d.cloud.group().as_ref();
                let vol = d.cloud.cell_volume();
                for (p, &v) in d.cloud.points().iter().zip(&d.density) {
                    if v > 0.0 {
                        out.push((g.qdist_raw(x.coords(), p.coords()), v * vol));
                    }
                }
            }
        }
    }

    /// Finest carrier resolution among grid components, if any.
    pub(crate) fn grid_resolution(&self) -> Option<f64> {
        match self {
            Measure::Atomic(_) => None,
            Measure::Grid(d) => Some(d.cloud.resolution()),
        }
    }
}
