//! Lattice point clouds over bounded regions of the group and Christ-type
//! dyadic cube families built on them.
//!
//! A cloud is a finite carrier for Haar measure: every sample point stands
//! for `cell_volume` of volume (Haar = Lebesgue in exponential coordinates).
//! Cube families are nested partitions of the point indices built from
//! greedy separated nets, with ball certificates checked at construction:
//! members of a level-k cube lie within `lambda^(k+1)` of its center, and
//! every sampled point within `lambda^k` of the center belongs to the cube.

use crate::group::{GPoint, GroupError, GroupSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("lattice would exceed the point cap ({requested} > {cap})")]
    TooManyPoints { requested: u64, cap: u64 },
    #[error("cloud has no points")]
    EmptyCloud,
    #[error("scale out of range: {0}")]
    ScaleOutOfRange(String),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Default cap on lattice sizes. Callers with more memory can raise it.
pub const DEFAULT_POINT_CAP: u64 = 4_000_000;

/// A finite sample of a bounded region, carrying Haar volume per point.
#[derive(Debug, Clone)]
pub struct PointCloud {
    group: Arc<GroupSpec>,
    points: Vec<GPoint>,
    cell_volume: f64,
    center: GPoint,
    radius: f64,
    /// layer-1 coordinate spacing of the generating lattice
    spacing: f64,
    /// gauge distance from a cell center to its farthest corner
    resolution: f64,
}

impl PointCloud {
    /// Assembles a cloud from explicit points; the bounding-ball invariant
    /// is the caller's responsibility and is checked here.
    pub fn from_points(
        group: Arc<GroupSpec>,
        points: Vec<GPoint>,
        cell_volume: f64,
        center: GPoint,
        radius: f64,
        spacing: f64,
    ) -> Result<PointCloud, SpatialError> {
        if !(cell_volume > 0.0) {
            return Err(SpatialError::ScaleOutOfRange("cell volume must be positive".into()));
        }
        for p in &points {
            group.check_shape(p)?;
            if group.qdist_raw(center.coords(), p.coords()) >= radius {
                return Err(SpatialError::ScaleOutOfRange(
                    "point outside the bounding ball".into(),
                ));
            }
        }
        let resolution = cell_corner_resolution(&group, spacing);
        Ok(PointCloud { group, points, cell_volume, center, radius, spacing, resolution })
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn points(&self) -> &[GPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn center(&self) -> &GPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volume * self.points.len() as f64
    }

    /// Image of the cloud under the dilation `delta_t`. Cell volumes scale
    /// exactly by `t^M` (the Jacobian of the dilation), gauge radii by `t`.
    pub fn dilate(&self, t: f64) -> Result<PointCloud, SpatialError> {
        if !(t > 0.0) {
            return Err(GroupError::NonpositiveScale(t).into());
        }
        let g = &self.group;
        let points = self
            .points
            .iter()
            .map(|p| g.dilate(t, p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PointCloud {
            group: self.group.clone(),
            points,
            cell_volume: self.cell_volume * t.powf(g.hom_dim()),
            center: g.dilate(t, &self.center)?,
            radius: self.radius * t,
            spacing: self.spacing * t,
            resolution: self.resolution * t,
        })
    }
}

fn cell_corner_resolution(g: &GroupSpec, spacing: f64) -> f64 {
    let half: SmallVec<[f64; 8]> = SmallVec::from_elem(spacing / 2.0, g.n());
    g.hnorm_raw(&half)
}

/// Uniform lattice in exponential coordinates clipped to the open gauge ball
/// `rho(center, .) < radius`. Cell volume is `spacing^N`.
pub fn lattice_cloud(
    g: &Arc<GroupSpec>,
    center: &GPoint,
    radius: f64,
    spacing: f64,
    cap: u64,
) -> Result<PointCloud, SpatialError> {
    shell_cloud(g, center, 0.0, radius, spacing, cap)
}

/// Lattice points of the shell `r_in <= |z| < r_out` around `center`
/// (offsets measured in the gauge). `r_in = 0` yields a full ball cloud.
pub fn shell_cloud(
    g: &Arc<GroupSpec>,
    center: &GPoint,
    r_in: f64,
    r_out: f64,
    spacing: f64,
    cap: u64,
) -> Result<PointCloud, SpatialError> {
    if !(spacing > 0.0) || !(r_out > 0.0) || r_in < 0.0 || r_in >= r_out {
        return Err(SpatialError::ScaleOutOfRange(format!(
            "shell [{r_in}, {r_out}) with spacing {spacing}"
        )));
    }
    g.check_shape(center)?;
    let n = g.n();
    // per-coordinate bound: layer-i offsets of points with |z| < r_out are < r_out^i
    let mut counts = Vec::with_capacity(n);
    let mut candidates = 1u64;
    for f in 0..n {
        let bound = r_out.powi(g.layer_of(f) as i32);
        let kmax = (bound / spacing).floor() as i64;
        let c = (2 * kmax + 1) as u64;
        counts.push(kmax);
        candidates = candidates.saturating_mul(c);
        if candidates > cap.saturating_mul(16) {
            return Err(SpatialError::TooManyPoints { requested: candidates, cap });
        }
    }
    let mut points = Vec::new();
    let mut idx = vec![0i64; n];
    for f in 0..n {
        idx[f] = -counts[f];
    }
    let mut offset: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, n);
    'outer: loop {
        for f in 0..n {
            offset[f] = idx[f] as f64 * spacing;
        }
        let norm = g.hnorm_raw(&offset);
        if norm < r_out && norm >= r_in {
            if points.len() as u64 >= cap {
                return Err(SpatialError::TooManyPoints { requested: candidates, cap });
            }
            points.push(GPoint::new(g.multiply_raw(center.coords(), &offset)));
        }
        // odometer increment, last coordinate fastest
        let mut f = n;
        loop {
            if f == 0 {
                break 'outer;
            }
            f -= 1;
            idx[f] += 1;
            if idx[f] <= counts[f] {
                break;
            }
            idx[f] = -counts[f];
        }
    }
    Ok(PointCloud {
        group: g.clone(),
        points,
        cell_volume: spacing.powi(n as i32),
        center: center.clone(),
        radius: r_out,
        spacing,
        resolution: cell_corner_resolution(g, spacing),
    })
}

/// Exactly the indices of cloud points with `rho(x, p) < t`. A coordinate
/// box on the first layer prefilters candidates; membership is always
/// verified by an exact gauge evaluation.
pub fn ball_query(cloud: &PointCloud, x: &GPoint, t: f64) -> Vec<u32> {
    let g = cloud.group.as_ref();
    let xs = x.coords();
    let mut out = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if !g.layer1_prefilter(xs, p.coords(), t) {
            continue;
        }
        if g.qdist_raw(xs, p.coords()) < t {
            out.push(i as u32);
        }
    }
    out
}

/// Monte Carlo Haar volume of the gauge ball of the given radius: uniform
/// samples in the coordinate box `prod [-R^i, R^i]` (volume `2^N R^M`).
pub fn mc_ball_volume(g: &GroupSpec, radius: f64, samples: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n();
    let bounds: Vec<f64> = (0..n).map(|f| radius.powi(g.layer_of(f) as i32)).collect();
    let box_volume = bounds.iter().map(|b| 2.0 * b).product::<f64>();
    let mut hits = 0u64;
    let mut z: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, n);
    for _ in 0..samples {
        for f in 0..n {
            z[f] = rng.gen_range(-bounds[f]..bounds[f]);
        }
        if g.hnorm_raw(&z) < radius {
            hits += 1;
        }
    }
    box_volume * hits as f64 / samples as f64
}

/// Lattice estimate of the Haar volume of the unit gauge ball.
pub fn unit_ball_volume(g: &Arc<GroupSpec>, spacing: f64) -> f64 {
    let e = g.identity();
    lattice_cloud(g, &e, 1.0, spacing, DEFAULT_POINT_CAP)
        .map(|c| c.total_volume())
        .unwrap_or(f64::NAN)
}

/// Default net separation in units of the level scale `lambda^k`.
///
/// Centers at level k are kept at least `SEPARATION_FACTOR * lambda^k`
/// apart. The factor must exceed 2 (up to the quasi-metric constant) for the
/// inner ball property to be attainable at all: two centers closer than
/// twice the inner radius would both claim the points between them, which a
/// partition cannot honor.
pub const SEPARATION_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    /// cloud point index of the net center x_j^k
    pub center: u32,
    /// cube index at the next-coarser level
    pub parent: Option<u32>,
    /// cube indices at the next-finer level
    pub children: Vec<u32>,
    /// sorted cloud point indices
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub k: i32,
    pub cubes: Vec<Cube>,
    /// cloud point index -> cube index at this level
    pub cube_of_point: Vec<u32>,
}

/// Identifies one cube: `level` indexes `DyadicFamily::levels` (0 = finest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeRef {
    pub level: usize,
    pub cube: usize,
}

/// Result of certifying the partition, nesting and ball-sandwich properties
/// against the sample at construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCertificate {
    pub partition_ok: bool,
    pub nesting_ok: bool,
    pub outer_ok: bool,
    pub inner_ok: bool,
    /// max over cubes of (member distance to center) / lambda^(k+1)
    pub max_outer_ratio: f64,
    pub inner_violations: usize,
}

impl FamilyCertificate {
    pub fn is_clean(&self) -> bool {
        self.partition_ok && self.nesting_ok && self.outer_ok && self.inner_ok
    }
}

/// One grid `D_m` of dyadic cubes over a sampled region: levels
/// `k = m .. k_top`, each a partition of the cloud points refining the next.
#[derive(Debug, Clone)]
pub struct DyadicFamily {
    cloud: Arc<PointCloud>,
    lambda: f64,
    base_level: i32,
    top_level: i32,
    separation_factor: f64,
    levels: Vec<Level>,
    certificate: FamilyCertificate,
}

impl DyadicFamily {
    pub fn cloud(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn base_level(&self) -> i32 {
        self.base_level
    }

    pub fn top_level(&self) -> i32 {
        self.top_level
    }

    pub fn separation_factor(&self) -> f64 {
        self.separation_factor
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn certificate(&self) -> &FamilyCertificate {
        &self.certificate
    }

    pub fn cube(&self, r: CubeRef) -> &Cube {
        &self.levels[r.level].cubes[r.cube]
    }

    /// Side length `lambda^k` of cubes at a level index.
    pub fn side_length(&self, level: usize) -> f64 {
        self.lambda.powi(self.levels[level].k)
    }

    /// Radius `lambda^(k+1)` of the containing ball Q*.
    pub fn outer_radius(&self, level: usize) -> f64 {
        self.lambda.powi(self.levels[level].k + 1)
    }

    /// Radius `2 lambda^(k+2)` of the enlarged ball Q**.
    pub fn qss_radius(&self, level: usize) -> f64 {
        2.0 * self.lambda.powi(self.levels[level].k + 2)
    }

    pub fn center_point(&self, r: CubeRef) -> &GPoint {
        &self.cloud.points()[self.cube(r).center as usize]
    }

    /// All cube refs, finest level first.
    pub fn all_cubes(&self) -> Vec<CubeRef> {
        let mut v = Vec::new();
        for (li, lvl) in self.levels.iter().enumerate() {
            for ci in 0..lvl.cubes.len() {
                v.push(CubeRef { level: li, cube: ci });
            }
        }
        v
    }

    /// Chain of cubes containing a cloud point, finest first.
    pub fn chain_of_point(&self, point: u32) -> Vec<CubeRef> {
        self.levels
            .iter()
            .enumerate()
            .map(|(li, lvl)| CubeRef { level: li, cube: lvl.cube_of_point[point as usize] as usize })
            .collect()
    }
}

/// Number of same-level cubes whose sampled point set meets the enlarged
/// ball Q** of the given cube. Bounded by a constant of the group geometry.
pub fn overlap_count(family: &DyadicFamily, cube: CubeRef) -> usize {
    let g = family.cloud.group().as_ref();
    let center = family.center_point(cube);
    let radius = family.qss_radius(cube.level);
    let lvl = &family.levels[cube.level];
    let mut seen = vec![false; lvl.cubes.len()];
    for (i, p) in family.cloud.points().iter().enumerate() {
        if !g.layer1_prefilter(center.coords(), p.coords(), radius) {
            continue;
        }
        if g.qdist_raw(center.coords(), p.coords()) < radius {
            seen[lvl.cube_of_point[i] as usize] = true;
        }
    }
    seen.iter().filter(|x| **x).count()
}

/// Max of [`overlap_count`] over all cubes, with the per-level maxima.
pub fn max_overlap(family: &DyadicFamily) -> (usize, Vec<usize>) {
    let mut per_level = Vec::new();
    let mut best = 0;
    for (li, lvl) in family.levels.iter().enumerate() {
        let mut m = 0;
        for ci in 0..lvl.cubes.len() {
            m = m.max(overlap_count(family, CubeRef { level: li, cube: ci }));
        }
        per_level.push(m);
        best = best.max(m);
    }
    (best, per_level)
}

/// Builds the cube family over the cloud with the default net separation.
pub fn build_family(
    cloud: &Arc<PointCloud>,
    m: i32,
    k_top: i32,
    lambda: f64,
) -> Result<DyadicFamily, SpatialError> {
    build_family_with(cloud, m, k_top, lambda, SEPARATION_FACTOR)
}

/// Builds the cube family: greedy maximal separated nets per level (coarse
/// levels seed fine ones, scan order is ascending point index), parent
/// assignment to the nearest coarser net point (ties by lowest index), leaf
/// assignment of every sample point to its nearest finest net point, then
/// members accumulate up the tree. The returned family carries the
/// certificate of the partition/nesting/sandwich checks.
pub fn build_family_with(
    cloud: &Arc<PointCloud>,
    m: i32,
    k_top: i32,
    lambda: f64,
    separation_factor: f64,
) -> Result<DyadicFamily, SpatialError> {
    if cloud.is_empty() {
        return Err(SpatialError::EmptyCloud);
    }
    if m > k_top {
        return Err(SpatialError::ScaleOutOfRange(format!("base level {m} above top {k_top}")));
    }
    if !(lambda > 1.0) {
        return Err(SpatialError::ScaleOutOfRange(format!("lambda {lambda} must exceed 1")));
    }
    if !(separation_factor > 0.0) {
        return Err(SpatialError::ScaleOutOfRange("nonpositive separation factor".into()));
    }
    let g = cloud.group().clone();
    let pts = cloud.points();
    let n_levels = (k_top - m + 1) as usize;

    // nets[l] holds cloud point indices; build coarsest first so coarser
    // nets seed finer ones and promoted centers persist down the levels
    let mut nets: Vec<Vec<u32>> = Vec::with_capacity(n_levels);
    for l in 0..n_levels {
        let k = k_top - l as i32;
        let sep = separation_factor * lambda.powi(k);
        let mut net: Vec<u32> = if l == 0 { Vec::new() } else { nets[l - 1].clone() };
        for (i, p) in pts.iter().enumerate() {
            let mut ok = true;
            for &q in &net {
                if q as usize == i {
                    ok = false;
                    break;
                }
                if g.layer1_prefilter(p.coords(), pts[q as usize].coords(), sep)
                    && g.qdist_raw(p.coords(), pts[q as usize].coords()) < sep
                {
                    ok = false;
                    break;
                }
            }
            if ok {
                net.push(i as u32);
            }
        }
        net.sort_unstable();
        nets.push(net);
    }
    nets.reverse(); // now nets[0] = level m (finest) .. nets[n_levels-1] = k_top

    let nearest_in = |candidates: &[u32], p: &GPoint| -> u32 {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (ci, &q) in candidates.iter().enumerate() {
            let d = g.qdist_raw(p.coords(), pts[q as usize].coords());
            if d < best_d {
                best_d = d;
                best = ci;
            }
        }
        best as u32
    };

    // levels from finest (index 0 = k = m) upward
    let mut levels: Vec<Level> = Vec::with_capacity(n_levels);
    for (l, net) in nets.iter().enumerate() {
        let k = m + l as i32;
        let cubes: Vec<Cube> = net
            .iter()
            .map(|&c| Cube { center: c, parent: None, children: Vec::new(), members: Vec::new() })
            .collect();
        levels.push(Level { k, cubes, cube_of_point: vec![0; pts.len()] });
    }

    // parent links: net point -> nearest net point one level coarser
    for l in 0..n_levels - 1 {
        let coarser = nets[l + 1].clone();
        for ci in 0..levels[l].cubes.len() {
            let center = levels[l].cubes[ci].center;
            // a promoted center parents itself
            let parent = match coarser.binary_search(&center) {
                Ok(pos) => pos as u32,
                Err(_) => nearest_in(&coarser, &pts[center as usize]),
            };
            levels[l].cubes[ci].parent = Some(parent);
            levels[l + 1].cubes[parent as usize].children.push(ci as u32);
        }
    }

    // leaf assignment and upward accumulation
    let leaf_net = nets[0].clone();
    for (i, p) in pts.iter().enumerate() {
        let leaf = nearest_in(&leaf_net, p);
        levels[0].cube_of_point[i] = leaf;
        levels[0].cubes[leaf as usize].members.push(i as u32);
    }
    for l in 1..n_levels {
        for i in 0..pts.len() {
            let below = levels[l - 1].cube_of_point[i];
            let here = levels[l - 1].cubes[below as usize].parent.unwrap();
            levels[l].cube_of_point[i] = here;
            levels[l].cubes[here as usize].members.push(i as u32);
        }
    }
    for lvl in &mut levels {
        for cube in &mut lvl.cubes {
            cube.members.sort_unstable();
        }
    }

    let mut family = DyadicFamily {
        cloud: cloud.clone(),
        lambda,
        base_level: m,
        top_level: k_top,
        separation_factor,
        levels,
        certificate: FamilyCertificate {
            partition_ok: false,
            nesting_ok: false,
            outer_ok: false,
            inner_ok: false,
            max_outer_ratio: 0.0,
            inner_violations: 0,
        },
    };
    family.certificate = certify(&family);
    Ok(family)
}

fn certify(f: &DyadicFamily) -> FamilyCertificate {
    let g = f.cloud.group().as_ref();
    let pts = f.cloud.points();
    let n = pts.len();

    let mut partition_ok = true;
    for lvl in &f.levels {
        let total: usize = lvl.cubes.iter().map(|c| c.members.len()).sum();
        if total != n {
            partition_ok = false;
        }
        let mut seen = vec![false; n];
        for c in &lvl.cubes {
            for &i in &c.members {
                if seen[i as usize] {
                    partition_ok = false;
                }
                seen[i as usize] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            partition_ok = false;
        }
    }

    let mut nesting_ok = true;
    for l in 0..f.levels.len() - 1 {
        for c in &f.levels[l].cubes {
            let parent = &f.levels[l + 1].cubes[c.parent.unwrap() as usize];
            for &i in &c.members {
                if parent.members.binary_search(&i).is_err() {
                    nesting_ok = false;
                }
            }
        }
    }

    let mut max_outer_ratio = 0.0f64;
    let mut outer_ok = true;
    let mut inner_violations = 0usize;
    for (li, lvl) in f.levels.iter().enumerate() {
        let outer = f.outer_radius(li);
        let inner = f.side_length(li);
        for (ci, c) in lvl.cubes.iter().enumerate() {
            let center = &pts[c.center as usize];
            for &i in &c.members {
                let d = g.qdist_raw(center.coords(), pts[i as usize].coords());
                let ratio = d / outer;
                if ratio > max_outer_ratio {
                    max_outer_ratio = ratio;
                }
                if d >= outer {
                    outer_ok = false;
                }
            }
            // every sampled point inside the inner ball must be a member
            for j in ball_query(&f.cloud, center, inner) {
                if lvl.cube_of_point[j as usize] as usize != ci {
                    inner_violations += 1;
                }
            }
        }
    }

    FamilyCertificate {
        partition_ok,
        nesting_ok,
        outer_ok,
        inner_ok: inner_violations == 0,
        max_outer_ratio,
        inner_violations,
    }
}
