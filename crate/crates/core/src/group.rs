//! Carnot groups of step r <= 4 in exponential coordinates.
//!
//! A group is described by its stratified Lie algebra: layer dimensions
//! `dim V_1, ..., dim V_r` and a sparse table of rational structure constants
//! for the brackets of basis vectors. The group product is the Dynkin form of
//! the Baker-Campbell-Hausdorff series truncated at commutator length 4,
//! which is exact for nilpotent algebras of step <= 4. Coordinates of layer i
//! scale as t^i under the dilation `delta_t`, the homogeneous gauge is
//! `|x| = (sum |x_ij|^(2 r!/i))^(1/(2 r!))`, and `rho(x,y) = |x^-1 y|` is the
//! working quasi-metric.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::Zero;
use smallvec::SmallVec;
use thiserror::Error;

/// Inline coordinate storage; every supported group has small dimension.
pub type Coords = SmallVec<[f64; 8]>;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("stratification violated: {0}")]
    Stratification(String),
    #[error("Jacobi identity fails on basis triple ({0}, {1}, {2})")]
    Jacobi(usize, usize, usize),
    #[error("step {0} not supported (BCH truncation is hardcoded through step 4)")]
    UnsupportedStep(usize),
    #[error("point has {got} coordinates, group has topological dimension {want}")]
    ShapeMismatch { got: usize, want: usize },
    #[error("dilation scale must be positive, got {0}")]
    NonpositiveScale(f64),
    #[error("unknown builtin group `{0}`")]
    UnknownName(String),
    #[error("invalid strata spec: {0}")]
    BadSpec(String),
}

/// One bracket rule `[X_{i,a}, X_{j,b}] = sum_k c_k X_{target_k}`.
///
/// Layers and in-layer indices are 1-based, matching the usual X_{ij}
/// notation. Rules may be given in either orientation; the reversed
/// orientation is derived by antisymmetry and checked for consistency if
/// supplied explicitly.
#[derive(Debug, Clone)]
pub struct BracketRule {
    pub left: (usize, usize),
    pub right: (usize, usize),
    pub terms: Vec<(usize, usize, Rational64)>,
}

/// A stratified nilpotent Lie algebra given by layer dimensions and sparse
/// rational structure constants.
#[derive(Debug, Clone)]
pub struct StrataSpec {
    pub layer_dims: Vec<usize>,
    pub brackets: Vec<BracketRule>,
}

/// One directed structure-constant entry on flat coordinate indices:
/// `[e_i, e_j]` contains `coeff * e_k`.
#[derive(Debug, Clone)]
struct FlatEntry {
    i: u32,
    j: u32,
    k: u32,
    coeff: f64,
}

/// A validated Carnot group. Immutable after construction; all operations
/// are pure functions and safe for unrestricted concurrent use.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    strata: StrataSpec,
    n: usize,
    hom_dim: u32,
    step: usize,
    /// flat coordinate index -> 1-based layer number
    layer_of: Vec<usize>,
    /// 1-based layer -> offset of its first flat coordinate
    layer_offset: Vec<usize>,
    entries: Vec<FlatEntry>,
    entries_exact: Vec<(u32, u32, u32, BigRational)>,
    /// gauge exponent per flat coordinate: 2 r! / layer
    gauge_exp: Vec<i32>,
    two_r_fact: i32,
}

/// A group element in exponential coordinates, grouped by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GPoint {
    coords: Coords,
}

impl GPoint {
    pub fn new(coords: impl Into<Coords>) -> Self {
        GPoint { coords: coords.into() }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        GPoint { coords: SmallVec::from_slice(coords) }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

/// Validates a strata spec and assembles the group: computes N, M, r, the
/// flattened structure table (with the antisymmetric orientation filled in),
/// and checks grading and the Jacobi identity exactly in rational arithmetic.
pub fn make_group(spec: StrataSpec) -> Result<GroupSpec, GroupError> {
    if spec.layer_dims.is_empty() {
        return Err(GroupError::BadSpec("no layers".into()));
    }
    if spec.layer_dims.iter().any(|&d| d == 0) {
        return Err(GroupError::BadSpec("zero-dimensional layer".into()));
    }
    let step = spec.layer_dims.len();
    if step > 4 {
        return Err(GroupError::UnsupportedStep(step));
    }
    let n: usize = spec.layer_dims.iter().sum();
    let hom_dim: usize = spec.layer_dims.iter().enumerate().map(|(i, d)| (i + 1) * d).sum();

    let mut layer_of = Vec::with_capacity(n);
    let mut layer_offset = Vec::with_capacity(step);
    let mut off = 0usize;
    for (i, &d) in spec.layer_dims.iter().enumerate() {
        layer_offset.push(off);
        off += d;
        for _ in 0..d {
            layer_of.push(i + 1);
        }
    }

    let flat = |layer: usize, idx: usize| -> Result<usize, GroupError> {
        if layer == 0 || layer > step {
            return Err(GroupError::BadSpec(format!("layer {layer} out of range")));
        }
        if idx == 0 || idx > spec.layer_dims[layer - 1] {
            return Err(GroupError::BadSpec(format!(
                "index {idx} out of range for layer {layer}"
            )));
        }
        Ok(layer_offset[layer - 1] + idx - 1)
    };

    // Directed table: key (i, j) -> coefficient vector over flat indices.
    let mut table: Vec<Vec<Option<Vec<BigRational>>>> = vec![vec![None; n]; n];
    let big = |r: Rational64| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));

    for rule in &spec.brackets {
        let li = rule.left.0;
        let lj = rule.right.0;
        let fi = flat(rule.left.0, rule.left.1)?;
        let fj = flat(rule.right.0, rule.right.1)?;
        let mut coeffs = vec![BigRational::zero(); n];
        for &(tk, tl, c) in &rule.terms {
            let fk = flat(tk, tl)?;
            if tk != li + lj {
                return Err(GroupError::Stratification(format!(
                    "[X_{{{},{}}}, X_{{{},{}}}] has a component in layer {} (expected layer {})",
                    rule.left.0, rule.left.1, rule.right.0, rule.right.1, tk,
                    li + lj
                )));
            }
            coeffs[fk] += big(c);
        }
        if li + lj > step && coeffs.iter().any(|c| !c.is_zero()) {
            return Err(GroupError::Stratification(format!(
                "[X_{{{},{}}}, X_{{{},{}}}] must vanish: layers sum to {} > step {}",
                rule.left.0, rule.left.1, rule.right.0, rule.right.1,
                li + lj, step
            )));
        }
        if fi == fj && coeffs.iter().any(|c| !c.is_zero()) {
            return Err(GroupError::Stratification(format!(
                "[X, X] must vanish for basis vector ({}, {})",
                rule.left.0, rule.left.1
            )));
        }
        if let Some(existing) = &table[fi][fj] {
            if existing != &coeffs {
                return Err(GroupError::BadSpec(format!(
                    "conflicting entries for bracket ({:?}, {:?})",
                    rule.left, rule.right
                )));
            }
        }
        table[fi][fj] = Some(coeffs);
    }

    // Fill antisymmetric counterparts and check consistency where both given.
    for i in 0..n {
        for j in 0..n {
            if let Some(c) = table[i][j].clone() {
                let neg: Vec<BigRational> = c.iter().map(|x| -x.clone()).collect();
                match &table[j][i] {
                    None => table[j][i] = Some(neg),
                    Some(existing) => {
                        if existing != &neg {
                            return Err(GroupError::Stratification(format!(
                                "bracket table is not antisymmetric on basis pair ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
    }

    let bracket_basis = |i: usize, j: usize| -> Vec<BigRational> {
        table[i][j].clone().unwrap_or_else(|| vec![BigRational::zero(); n])
    };
    let bracket_vec = |u: &[BigRational], v: &[BigRational]| -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); n];
        for i in 0..n {
            if u[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if v[j].is_zero() {
                    continue;
                }
                let c = bracket_basis(i, j);
                for k in 0..n {
                    if !c[k].is_zero() {
                        out[k] += &u[i] * &v[j] * &c[k];
                    }
                }
            }
        }
        out
    };

    // Jacobi identity on all basis triples, exact.
    let basis = |i: usize| -> Vec<BigRational> {
        let mut e = vec![BigRational::zero(); n];
        e[i] = BigRational::from(BigInt::from(1));
        e
    };
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                let ea = basis(a);
                let eb = basis(b);
                let ec = basis(c);
                let t1 = bracket_vec(&ea, &bracket_vec(&eb, &ec));
                let t2 = bracket_vec(&eb, &bracket_vec(&ec, &ea));
                let t3 = bracket_vec(&ec, &bracket_vec(&ea, &eb));
                let sum: Vec<BigRational> = (0..n)
                    .map(|k| t1[k].clone() + t2[k].clone() + t3[k].clone())
                    .collect();
                if sum.iter().any(|x| !x.is_zero()) {
                    return Err(GroupError::Jacobi(a, b, c));
                }
            }
        }
    }

    // Flatten the sparse directed entries.
    let mut entries = Vec::new();
    let mut entries_exact = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if let Some(c) = &table[i][j] {
                for k in 0..n {
                    if !c[k].is_zero() {
                        let num: f64 = bigrational_to_f64(&c[k]);
                        entries.push(FlatEntry { i: i as u32, j: j as u32, k: k as u32, coeff: num });
                        entries_exact.push((i as u32, j as u32, k as u32, c[k].clone()));
                    }
                }
            }
        }
    }

    let two_r_fact = (2 * factorial(step)) as i32;
    let gauge_exp: Vec<i32> = layer_of.iter().map(|&l| two_r_fact / l as i32).collect();

    Ok(GroupSpec {
        strata: spec,
        n,
        hom_dim: hom_dim as u32,
        step,
        layer_of,
        layer_offset,
        entries,
        entries_exact,
        gauge_exp,
        two_r_fact,
    })
}

fn bigrational_to_f64(r: &BigRational) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // structure constants are small; direct conversion is exact here
    let nf = num.to_string().parse::<f64>().unwrap_or(f64::NAN);
    let df = den.to_string().parse::<f64>().unwrap_or(f64::NAN);
    nf / df
}

impl GroupSpec {
    /// Topological dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous dimension M = sum_i i dim V_i.
    pub fn hom_dim(&self) -> f64 {
        self.hom_dim as f64
    }

    /// Step r of the stratification.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.strata.layer_dims
    }

    /// 1-based layer of a flat coordinate index.
    pub fn layer_of(&self, flat: usize) -> usize {
        self.layer_of[flat]
    }

    pub fn identity(&self) -> GPoint {
        GPoint { coords: SmallVec::from_elem(0.0, self.n) }
    }

    pub fn check_shape(&self, p: &GPoint) -> Result<(), GroupError> {
        if p.coords.len() != self.n {
            return Err(GroupError::ShapeMismatch { got: p.coords.len(), want: self.n });
        }
        Ok(())
    }

    #[inline]
    fn bracket_into(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for e in &self.entries {
            out[e.k as usize] += e.coeff * u[e.i as usize] * v[e.j as usize];
        }
    }

    /// Group product in exponential coordinates via the Dynkin BCH series
    /// truncated at commutator length 4 (exact for step <= 4):
    /// `X + Y + [X,Y]/2 + ([X,[X,Y]] - [Y,[X,Y]])/12 - [Y,[X,[X,Y]]]/24`.
    #[inline]
    pub fn multiply_raw(&self, a: &[f64], b: &[f64]) -> Coords {
        let n = self.n;
        let mut z: Coords = SmallVec::from_slice(a);
        for k in 0..n {
            z[k] += b[k];
        }
        if self.step >= 2 {
            let mut b1: Coords = SmallVec::from_elem(0.0, n);
            self.bracket_into(a, b, &mut b1);
            for k in 0..n {
                z[k] += 0.5 * b1[k];
            }
            if self.step >= 3 {
                let mut b2a: Coords = SmallVec::from_elem(0.0, n);
                let mut b2b: Coords = SmallVec::from_elem(0.0, n);
                self.bracket_into(a, &b1, &mut b2a);
                self.bracket_into(b, &b1, &mut b2b);
                for k in 0..n {
                    z[k] += (b2a[k] - b2b[k]) / 12.0;
                }
                if self.step >= 4 {
                    let mut b3: Coords = SmallVec::from_elem(0.0, n);
                    self.bracket_into(b, &b2a, &mut b3);
                    for k in 0..n {
                        z[k] -= b3[k] / 24.0;
                    }
                }
            }
        }
        z
    }

    pub fn multiply(&self, a: &GPoint, b: &GPoint) -> Result<GPoint, GroupError> {
        self.check_shape(a)?;
        self.check_shape(b)?;
        Ok(GPoint { coords: self.multiply_raw(&a.coords, &b.coords) })
    }

    /// Exact group product over rational coordinates. Reference path for
    /// tests of the floating-point product.
    pub fn multiply_exact(&self, a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
        let n = self.n;
        assert_eq!(a.len(), n);
        assert_eq!(b.len(), n);
        let br = |u: &[BigRational], v: &[BigRational]| -> Vec<BigRational> {
            let mut out = vec![BigRational::zero(); n];
            for (i, j, k, c) in &self.entries_exact {
                let term = &u[*i as usize] * &v[*j as usize] * c;
                out[*k as usize] += term;
            }
            out
        };
        let frac = |num: i64, den: i64| BigRational::new(BigInt::from(num), BigInt::from(den));
        let mut z: Vec<BigRational> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        if self.step >= 2 {
            let b1 = br(a, b);
            for k in 0..n {
                z[k] += &b1[k] * frac(1, 2);
            }
            if self.step >= 3 {
                let b2a = br(a, &b1);
                let b2b = br(b, &b1);
                for k in 0..n {
                    z[k] += (&b2a[k] - &b2b[k]) * frac(1, 12);
                }
                if self.step >= 4 {
                    let b3 = br(b, &b2a);
                    for k in 0..n {
                        z[k] -= &b3[k] * frac(1, 24);
                    }
                }
            }
        }
        z
    }

    /// exp(X)^-1 = exp(-X): coordinate-wise negation.
    pub fn inverse(&self, a: &GPoint) -> Result<GPoint, GroupError> {
        self.check_shape(a)?;
        Ok(GPoint { coords: a.coords.iter().map(|x| -x).collect() })
    }

    /// Anisotropic dilation: layer-i coordinates scale by t^i.
    pub fn dilate(&self, t: f64, a: &GPoint) -> Result<GPoint, GroupError> {
        if !(t > 0.0) {
            return Err(GroupError::NonpositiveScale(t));
        }
        self.check_shape(a)?;
        let coords: Coords = a
            .coords
            .iter()
            .enumerate()
            .map(|(f, x)| x * t.powi(self.layer_of[f] as i32))
            .collect();
        Ok(GPoint { coords })
    }

    #[inline]
    pub fn hnorm_raw(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0f64;
        for (f, &v) in x.iter().enumerate() {
            acc += v.abs().powi(self.gauge_exp[f]);
        }
        acc.powf(1.0 / self.two_r_fact as f64)
    }

    /// Homogeneous gauge `|x| = (sum |x_ij|^(2 r!/i))^(1/(2 r!))`.
    pub fn hnorm(&self, a: &GPoint) -> Result<f64, GroupError> {
        self.check_shape(a)?;
        Ok(self.hnorm_raw(&a.coords))
    }

    /// Quasi-metric `rho(a, b) = |a^-1 b|`; left-invariant by construction.
    pub fn qdist(&self, a: &GPoint, b: &GPoint) -> Result<f64, GroupError> {
        self.check_shape(a)?;
        self.check_shape(b)?;
        Ok(self.qdist_raw(&a.coords, &b.coords))
    }

    #[inline]
    pub fn qdist_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut neg: Coords = SmallVec::from_slice(a);
        for x in neg.iter_mut() {
            *x = -*x;
        }
        let z = self.multiply_raw(&neg, b);
        self.hnorm_raw(&z)
    }

    /// Upper bounds on |coordinate offsets| of points within gauge distance t:
    /// layer-i coordinates of x^-1 y are at most t^i in absolute value.
    /// Only the first layer offsets are plain coordinate differences, so the
    /// cheap prefilter below uses layer 1 alone.
    #[inline]
    pub fn layer1_prefilter(&self, a: &[f64], b: &[f64], t: f64) -> bool {
        let d1 = self.strata.layer_dims[0];
        for f in 0..d1 {
            if (a[f] - b[f]).abs() >= t {
                return false;
            }
        }
        true
    }
}

/// Names accepted by [`builtin`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinGroup {
    Euclidean(usize),
    Heisenberg,
    Engel,
}

/// Returns a validated spec for one of the bundled test groups.
pub fn builtin(which: BuiltinGroup) -> Result<GroupSpec, GroupError> {
    match which {
        BuiltinGroup::Euclidean(n) => {
            if n == 0 {
                return Err(GroupError::BadSpec("euclidean(0)".into()));
            }
            make_group(StrataSpec { layer_dims: vec![n], brackets: vec![] })
        }
        BuiltinGroup::Heisenberg => make_group(StrataSpec {
            layer_dims: vec![2, 1],
            brackets: vec![BracketRule {
                left: (1, 1),
                right: (1, 2),
                terms: vec![(2, 1, Rational64::new(1, 1))],
            }],
        }),
        BuiltinGroup::Engel => make_group(StrataSpec {
            layer_dims: vec![2, 1, 1],
            brackets: vec![
                BracketRule {
                    left: (1, 1),
                    right: (1, 2),
                    terms: vec![(2, 1, Rational64::new(1, 1))],
                },
                BracketRule {
                    left: (1, 1),
                    right: (2, 1),
                    terms: vec![(3, 1, Rational64::new(1, 1))],
                },
            ],
        }),
    }
}

/// Parses a builtin group name as used by the CLI: `euclidean(n)`, `h1`
/// (or `heisenberg`), `engel`.
pub fn builtin_by_name(name: &str) -> Result<GroupSpec, GroupError> {
    let lower = name.trim().to_ascii_lowercase();
    if lower == "h1" || lower == "heisenberg" {
        return builtin(BuiltinGroup::Heisenberg);
    }
    if lower == "engel" {
        return builtin(BuiltinGroup::Engel);
    }
    if let Some(rest) = lower.strip_prefix("euclidean(").and_then(|s| s.strip_suffix(')')) {
        let n: usize = rest
            .parse()
            .map_err(|_| GroupError::UnknownName(name.to_string()))?;
        return builtin(BuiltinGroup::Euclidean(n));
    }
    Err(GroupError::UnknownName(name.to_string()))
}
