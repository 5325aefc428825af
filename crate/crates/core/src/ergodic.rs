//! Diagonal spectral models of a representation of the character algebra, and
//! numerical checks of the mean ergodic statements along a subset sequence.
//!
//! A model is a finite list of spectral points together with the value of
//! every character at every point; π(χ(α)) acts on H = ℂ^points as the
//! diagonal operator with those values. Angles are exact rational multiples
//! of π, so the points where characters reach their dimension are hit exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{fixes, FixPolicy, SubsetSequence, Verdict};
use crate::error::{Error, Result};
use crate::fusion::{FusionRing, IrrepLabel, RingKind};

/// Tolerance for identities that hold exactly in the model.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Tolerance for the endpoint of a decay trace.
pub const DECAY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpectralPoint {
    /// θ = r·π on the circle.
    Angle(Rational64),
    /// A point of the d-torus, each coordinate r·π.
    Torus(Vec<Rational64>),
    /// j ∈ ℤ/m.
    Residue(u64),
    /// A real spectral parameter t.
    Real(Rational64),
    /// A named column of a tabulated model.
    Named(String),
}

impl fmt::Display for SpectralPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralPoint::Angle(r) => write!(f, "pi*{r}"),
            SpectralPoint::Torus(rs) => {
                let parts: Vec<String> = rs.iter().map(|r| format!("pi*{r}")).collect();
                write!(f, "({})", parts.join(";"))
            }
            SpectralPoint::Residue(j) => write!(f, "j={j}"),
            SpectralPoint::Real(t) => write!(f, "t={t}"),
            SpectralPoint::Named(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug)]
enum Characters {
    /// χ_k(θ) = e^{i⟨k, θ⟩}.
    Lattice,
    /// χ_a(θ) = sin((a+1)θ)/sin θ.
    Su2,
    /// χ_k(j) = e^{2πikj/m}.
    Cyclic(u64),
    /// χ_0 = 1, χ_1 = t, χ_{k+1} = tχ_k − χ_{k−1}.
    Chebyshev,
    Table(BTreeMap<IrrepLabel, Vec<Complex64>>),
}

#[derive(Clone, Debug)]
pub struct SpectralModel {
    ring: FusionRing,
    points: Vec<SpectralPoint>,
    chars: Characters,
}

fn reduce_angle(r: Rational64) -> Rational64 {
    let two = Rational64::from_integer(2);
    let q = (r / two).floor();
    r - q * two
}

/// e^{iπ·num/den}, exact when 2·num/den is an integer.
fn exp_i_pi(num: i128, den: i128) -> Complex64 {
    let num = num.rem_euclid(2 * den);
    if num == 0 {
        Complex64::new(1.0, 0.0)
    } else if 2 * num == den {
        Complex64::new(0.0, 1.0)
    } else if num == den {
        Complex64::new(-1.0, 0.0)
    } else if 2 * num == 3 * den {
        Complex64::new(0.0, -1.0)
    } else {
        let (s, c) = (PI * num as f64 / den as f64).sin_cos();
        Complex64::new(c, s)
    }
}

/// sin(π·num/den), exact when 2·num/den is an integer.
fn sin_pi(num: i128, den: i128) -> f64 {
    exp_i_pi(num, den).im
}

impl SpectralModel {
    /// Lattice dual ℤ^d on torus points; each point has `rank` angle
    /// coordinates, given as multiples of π. The origin is always included.
    pub fn integer_dual(rank: usize, grid: Vec<Vec<Rational64>>) -> Result<Self> {
        let ring = FusionRing::integer_dual(rank)?;
        let mut points = Vec::new();
        let origin = vec![Rational64::zero(); rank];
        for p in std::iter::once(origin).chain(grid) {
            if p.len() != rank {
                return Err(Error::Model(format!(
                    "torus point needs {rank} coordinates, got {}",
                    p.len()
                )));
            }
            let p: Vec<_> = p.into_iter().map(reduce_angle).collect();
            let point = if rank == 1 {
                SpectralPoint::Angle(p[0])
            } else {
                SpectralPoint::Torus(p)
            };
            if !points.contains(&point) {
                points.push(point);
            }
        }
        Ok(Self {
            ring,
            points,
            chars: Characters::Lattice,
        })
    }

    /// ℤ on circle angles (multiples of π); θ = 0 is always included.
    pub fn circle(grid: &[Rational64]) -> Result<Self> {
        Self::integer_dual(1, grid.iter().map(|r| vec![*r]).collect())
    }

    /// SU(2) on angles in [0, π] (multiples of π), with the point θ = 0
    /// adjoined, where χ_a takes its limit value a + 1.
    pub fn su2(grid: &[Rational64]) -> Result<Self> {
        let mut points = vec![SpectralPoint::Angle(Rational64::zero())];
        for r in grid {
            let mut r = reduce_angle(*r);
            if r > Rational64::from_integer(1) {
                r = Rational64::from_integer(2) - r;
            }
            let p = SpectralPoint::Angle(r);
            if !points.contains(&p) {
                points.push(p);
            }
        }
        Ok(Self {
            ring: FusionRing::su2(),
            points,
            chars: Characters::Su2,
        })
    }

    /// ℤ/m on all m points.
    pub fn cyclic(m: u64) -> Result<Self> {
        Ok(Self {
            ring: FusionRing::cyclic_dual(m)?,
            points: (0..m).map(SpectralPoint::Residue).collect(),
            chars: Characters::Cyclic(m),
        })
    }

    /// Free orthogonal O_N^+ on real parameters t ∈ [−N, N], with t = N
    /// adjoined. Characters satisfy the SU(2)-type recursion.
    pub fn free_orthogonal(n: u64, grid: &[Rational64]) -> Result<Self> {
        let ring = FusionRing::free_orthogonal(n)?;
        let bound = Rational64::from_integer(n as i64);
        let mut points = vec![SpectralPoint::Real(bound)];
        for t in grid {
            if t.abs() > bound {
                return Err(Error::Model(format!("t = {t} lies outside [-{n}, {n}]")));
            }
            let p = SpectralPoint::Real(*t);
            if !points.contains(&p) {
                points.push(p);
            }
        }
        Ok(Self {
            ring,
            points,
            chars: Characters::Chebyshev,
        })
    }

    /// A model from a character table: `values[α][i]` is χ_α at point `i`.
    /// Every label of the (finite) ring must be listed.
    pub fn tabulated(
        ring: &FusionRing,
        points: Vec<String>,
        values: BTreeMap<IrrepLabel, Vec<Complex64>>,
    ) -> Result<Self> {
        let size = ring
            .size()
            .ok_or_else(|| Error::Model("tabulated models need a finite ring".into()))?;
        for (l, row) in &values {
            ring.check(l)?;
            if row.len() != points.len() {
                return Err(Error::Model(format!(
                    "row {l} has {} values for {} points",
                    row.len(),
                    points.len()
                )));
            }
        }
        if values.len() != size {
            return Err(Error::Model(format!(
                "table lists {} of {size} labels",
                values.len()
            )));
        }
        Ok(Self {
            ring: ring.clone(),
            points: points.into_iter().map(SpectralPoint::Named).collect(),
            chars: Characters::Table(values),
        })
    }

    /// The built-in model with its default grid.
    pub fn default_for(ring: &FusionRing) -> Result<Self> {
        let r = |n, d| Rational64::new(n, d);
        match ring.kind() {
            RingKind::IntegerDual(1) => Self::circle(&[
                r(1, 3),
                r(1, 2),
                r(2, 3),
                r(1, 1),
                r(4, 3),
                r(3, 2),
                r(5, 3),
            ]),
            RingKind::IntegerDual(d) => {
                let axis = [r(0, 1), r(1, 2), r(1, 1)];
                let mut grid = vec![vec![]];
                for _ in 0..d {
                    grid = grid
                        .into_iter()
                        .flat_map(|p: Vec<Rational64>| {
                            axis.iter().map(move |a| {
                                let mut q = p.clone();
                                q.push(*a);
                                q
                            })
                        })
                        .collect();
                }
                Self::integer_dual(d, grid)
            }
            RingKind::Su2 => Self::su2(&[r(1, 4), r(1, 3), r(1, 2), r(2, 3), r(1, 1)]),
            RingKind::CyclicDual(m) => Self::cyclic(m),
            RingKind::FreeOrthogonal(n) => {
                Self::free_orthogonal(n, &[r(1, 1), r(0, 1), r(1, 2), r(-1, 1), r(-(n as i64), 1)])
            }
            other => Err(Error::Model(format!(
                "no built-in spectral model for {other}"
            ))),
        }
    }

    pub fn ring(&self) -> &FusionRing {
        &self.ring
    }

    pub fn points(&self) -> &[SpectralPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self, label: &IrrepLabel) -> Result<f64> {
        Ok(self.ring.dim(label)?.to_f64().unwrap_or(f64::INFINITY))
    }

    /// χ_α at point `i`.
    pub fn char_value(&self, label: &IrrepLabel, i: usize) -> Result<Complex64> {
        self.ring.check(label)?;
        let point = self
            .points
            .get(i)
            .ok_or_else(|| Error::Model(format!("point index {i} out of range")))?;
        Ok(match (&self.chars, point) {
            (Characters::Lattice, SpectralPoint::Angle(r)) => {
                let k = label.as_int().expect("validated") as i128;
                exp_i_pi(k * *r.numer() as i128, *r.denom() as i128)
            }
            (Characters::Lattice, SpectralPoint::Torus(rs)) => {
                let ks = label.int_coords().expect("validated");
                // common denominator keeps the phase exact
                let den = rs.iter().fold(1i128, |acc, r| lcm(acc, *r.denom() as i128));
                let num = ks
                    .iter()
                    .zip(rs)
                    .map(|(k, r)| {
                        let scale = den / *r.denom() as i128;
                        (*k as i128 * *r.numer() as i128 * scale).rem_euclid(2 * den)
                    })
                    .sum::<i128>();
                exp_i_pi(num, den)
            }
            (Characters::Su2, SpectralPoint::Angle(r)) => {
                let a = label.as_int().expect("validated") as i128;
                let (p, q) = (*r.numer() as i128, *r.denom() as i128);
                let v = if p == 0 {
                    (a + 1) as f64
                } else if p == q {
                    if a % 2 == 0 {
                        (a + 1) as f64
                    } else {
                        -(a + 1) as f64
                    }
                } else {
                    sin_pi((a + 1) * p, q) / sin_pi(p, q)
                };
                Complex64::new(v, 0.0)
            }
            (Characters::Cyclic(m), SpectralPoint::Residue(j)) => {
                let k = label.as_int().expect("validated") as i128;
                exp_i_pi(2 * k * *j as i128, *m as i128)
            }
            (Characters::Chebyshev, SpectralPoint::Real(t)) => {
                let k = label.as_int().expect("validated");
                let t = *t.numer() as f64 / *t.denom() as f64;
                let (mut prev, mut cur) = (1.0, t);
                if k == 0 {
                    cur = 1.0;
                }
                for _ in 1..k {
                    let next = t * cur - prev;
                    prev = cur;
                    cur = next;
                }
                Complex64::new(cur, 0.0)
            }
            (Characters::Table(rows), _) => rows[label][i],
            _ => unreachable!("point shape matches the character family"),
        })
    }

    /// (χ_α/d_α)·x, the normalised action of α.
    pub fn act(&self, label: &IrrepLabel, x: &VectorH) -> Result<VectorH> {
        self.check_vector(x)?;
        let d = self.dim(label)?;
        let coords = (0..self.len())
            .map(|i| Ok(self.char_value(label, i)? / d * x.coords[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorH { coords })
    }

    fn check_vector(&self, x: &VectorH) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Model(format!(
                "vector has {} coordinates, model has {} points",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

fn lcm(a: i128, b: i128) -> i128 {
    fn gcd(a: i128, b: i128) -> i128 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorH {
    pub coords: Vec<Complex64>,
}

impl VectorH {
    pub fn new(coords: Vec<Complex64>) -> Self {
        Self { coords }
    }

    pub fn real(coords: &[f64]) -> Self {
        Self {
            coords: coords.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }

    /// The basis vector at point `i` of an `n`-point model.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut coords = vec![Complex64::zero(); n];
        coords[i] = Complex64::new(1.0, 0.0);
        Self { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coords
            .iter()
            .map(Complex64::norm_sqr)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &VectorH) -> VectorH {
        VectorH {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Pointwise product with a diagonal operator.
    pub fn apply(&self, diag: &[Complex64]) -> VectorH {
        VectorH {
            coords: self.coords.iter().zip(diag).map(|(a, b)| a * b).collect(),
        }
    }
}

/// A_n = (1/|F_n|_w) Σ_{α∈F_n} d_α π(χ(α)), as its diagonal.
///
/// Labels are summed in ascending order for reproducibility.
pub fn cesaro_average(
    model: &SpectralModel,
    seq: &SubsetSequence,
    n: usize,
) -> Result<Vec<Complex64>> {
    same_ring(model, seq)?;
    let f = seq.term(n)?;
    let w = f.weighted_card().to_f64().unwrap_or(f64::INFINITY);
    let dims = f
        .members()
        .iter()
        .map(|l| model.dim(l).map(|d| (l, d)))
        .collect::<Result<Vec<_>>>()?;
    (0..model.len())
        .map(|i| {
            let mut acc = Complex64::zero();
            for (l, d) in &dims {
                acc += model.char_value(l, i)? * *d;
            }
            Ok(acc / w)
        })
        .collect()
}

fn same_ring(model: &SpectralModel, seq: &SubsetSequence) -> Result<()> {
    if model.ring().kind() != seq.ring().kind() {
        return Err(Error::Model(format!(
            "model ring {} does not match sequence ring {}",
            model.ring().kind(),
            seq.ring().kind()
        )));
    }
    Ok(())
}

/// The orthogonal projection onto H_Σ, as a 0/1 diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedSpaceProjector {
    pub mask: Vec<bool>,
    pub horizon: usize,
}

impl FixedSpaceProjector {
    pub fn diagonal(&self) -> Vec<Complex64> {
        self.mask
            .iter()
            .map(|&m| Complex64::new(if m { 1.0 } else { 0.0 }, 0.0))
            .collect()
    }

    pub fn apply(&self, x: &VectorH) -> VectorH {
        x.apply(&self.diagonal())
    }

    pub fn fixed_points(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }
}

/// Labels of F_1 ∪ … ∪ F_horizon, ascending.
fn union_up_to(seq: &SubsetSequence, horizon: usize) -> Result<BTreeSet<IrrepLabel>> {
    let last = seq.len().map_or(horizon, |len| len.min(horizon));
    let mut all = BTreeSet::new();
    for n in 1..=last {
        all.extend(seq.term(n)?.members().iter().cloned());
    }
    Ok(all)
}

/// Marks the points where χ_α = d_α (within [`IDENTITY_TOL`]) for every α in
/// F_1 ∪ … ∪ F_horizon.
pub fn fixed_projector(
    model: &SpectralModel,
    seq: &SubsetSequence,
    horizon: usize,
) -> Result<FixedSpaceProjector> {
    same_ring(model, seq)?;
    if horizon == 0 {
        return Err(Error::Model("horizon must be ≥ 1".into()));
    }
    let labels = union_up_to(seq, horizon)?;
    let mask = (0..model.len())
        .map(|i| {
            for l in &labels {
                let d = model.dim(l)?;
                if (model.char_value(l, i)? - d).norm() > IDENTITY_TOL * d.max(1.0) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixedSpaceProjector { mask, horizon })
}

#[derive(Clone, Debug)]
pub struct MeanConvergenceReport {
    pub projector: FixedSpaceProjector,
    /// max over fixed points of |A_n − 1|, for n = 1..=n_max.
    pub trace: Vec<(usize, f64)>,
    pub max_deviation: f64,
    /// A_{n_max}, standing in for a limit point T.
    pub t_operator: Vec<Complex64>,
    /// ‖TP − P‖ and ‖PT − P‖ on the diagonal.
    pub tp_residual: f64,
    pub pt_residual: f64,
    pub tol: f64,
}

impl MeanConvergenceReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tol
            && self.tp_residual <= self.tol
            && self.pt_residual <= self.tol
    }
}

/// On fixed points every A_n must equal 1; with T = A_{n_max}, TP = PT = P.
pub fn verify_mean_convergence(
    model: &SpectralModel,
    seq: &SubsetSequence,
    n_max: usize,
    tol: f64,
) -> Result<MeanConvergenceReport> {
    let projector = fixed_projector(model, seq, n_max)?;
    let fixed: Vec<usize> = projector.fixed_points().collect();
    let averages = (1..=n_max)
        .into_par_iter()
        .map(|n| cesaro_average(model, seq, n))
        .collect::<Result<Vec<_>>>()?;
    let trace: Vec<(usize, f64)> = averages
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let dev = fixed
                .iter()
                .map(|&i| (a[i] - 1.0).norm())
                .fold(0.0, f64::max);
            (k + 1, dev)
        })
        .collect();
    let max_deviation = trace.iter().map(|t| t.1).fold(0.0, f64::max);
    let t_operator = averages.last().cloned().unwrap_or_default();
    let p = projector.diagonal();
    let residual = |prod: &dyn Fn(usize) -> Complex64| {
        (0..p.len())
            .map(|i| (prod(i) - p[i]).norm())
            .fold(0.0, f64::max)
    };
    let tp_residual = residual(&|i| t_operator[i] * p[i]);
    let pt_residual = residual(&|i| p[i] * t_operator[i]);
    Ok(MeanConvergenceReport {
        projector,
        trace,
        max_deviation,
        t_operator,
        tp_residual,
        pt_residual,
        tol,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugateEigenViolation {
    pub label: IrrepLabel,
    pub point: usize,
    /// |χ_α − d_α| and |χ_ᾱ − d_ᾱ|.
    pub deviations: (f64, f64),
}

#[derive(Clone, Debug, Default)]
pub struct ConjugateEigenReport {
    pub checked: usize,
    pub premises_met: usize,
    pub violations: Vec<ConjugateEigenViolation>,
}

/// If χ_α(x) = d_α at a point then χ_ᾱ(x) = d_ᾱ there: checked for the first
/// `horizon` labels at every point, with premise tolerance `tol` and
/// conclusion tolerance 10·tol.
pub fn verify_conjugate_eigenvectors(
    model: &SpectralModel,
    horizon: usize,
    tol: f64,
) -> Result<ConjugateEigenReport> {
    let mut report = ConjugateEigenReport::default();
    for l in model.ring().enumerate(horizon) {
        let conj = model.ring().conjugate(&l)?;
        let d = model.dim(&l)?;
        let dc = model.dim(&conj)?;
        for i in 0..model.len() {
            report.checked += 1;
            let dev = (model.char_value(&l, i)? - d).norm();
            if dev > tol {
                continue;
            }
            report.premises_met += 1;
            let dev_c = (model.char_value(&conj, i)? - dc).norm();
            if dev_c > 10.0 * tol {
                report.violations.push(ConjugateEigenViolation {
                    label: l.clone(),
                    point: i,
                    deviations: (dev, dev_c),
                });
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelViolation {
    NormBound {
        label: IrrepLabel,
        point: usize,
        value: f64,
    },
    TrivialCharacter {
        point: usize,
    },
    Conjugation {
        label: IrrepLabel,
        point: usize,
    },
    Multiplicativity {
        a: IrrepLabel,
        b: IrrepLabel,
        point: usize,
        residual: f64,
    },
}

/// Checks |χ_α| ≤ d_α, χ_{γ₀} = 1, χ_ᾱ = conj χ_α and
/// χ_αχ_β = Σ N_{α,β}^γ χ_γ on the first `horizon` labels.
///
/// Tolerances are relative to d_α (or d_αd_β), so large dimensions in
/// floating point do not produce spurious failures.
pub fn check_model(model: &SpectralModel, horizon: usize, tol: f64) -> Result<Vec<ModelViolation>> {
    let ring = model.ring();
    let labels = ring.enumerate(horizon);
    let e = ring.trivial();
    let mut out = Vec::new();
    for i in 0..model.len() {
        if (model.char_value(&e, i)? - 1.0).norm() > tol {
            out.push(ModelViolation::TrivialCharacter { point: i });
        }
        for l in &labels {
            let d = model.dim(l)?;
            let v = model.char_value(l, i)?;
            if v.norm() > d * (1.0 + tol) {
                out.push(ModelViolation::NormBound {
                    label: l.clone(),
                    point: i,
                    value: v.norm(),
                });
            }
            let vc = model.char_value(&ring.conjugate(l)?, i)?;
            if (vc - v.conj()).norm() > tol * d.max(1.0) {
                out.push(ModelViolation::Conjugation {
                    label: l.clone(),
                    point: i,
                });
            }
        }
    }
    let pairs: Vec<(&IrrepLabel, &IrrepLabel)> = labels
        .iter()
        .flat_map(|a| labels.iter().map(move |b| (a, b)))
        .collect();
    let found = pairs
        .into_par_iter()
        .map(|(a, b)| {
            let dec = ring.decompose(a, b)?;
            let scale = (model.dim(a)? * model.dim(b)?).max(1.0);
            let mut v = Vec::new();
            for i in 0..model.len() {
                let lhs = model.char_value(a, i)? * model.char_value(b, i)?;
                let mut rhs = Complex64::zero();
                for (c, n) in dec.entries() {
                    rhs += model.char_value(c, i)? * *n as f64;
                }
                let residual = (lhs - rhs).norm();
                if residual > tol * scale {
                    v.push(ModelViolation::Multiplicativity {
                        a: a.clone(),
                        b: b.clone(),
                        point: i,
                        residual,
                    });
                }
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    out.extend(found.into_iter().flatten());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitVerdict {
    Witness {
        alpha: IrrepLabel,
        beta: IrrepLabel,
        residual: f64,
    },
    NotFoundInWindow,
}

/// ‖(χ_α/d_α)x − (χ_β/d_β)y‖.
pub fn orbit_residual(
    model: &SpectralModel,
    x: &VectorH,
    y: &VectorH,
    alpha: &IrrepLabel,
    beta: &IrrepLabel,
) -> Result<f64> {
    Ok(model.act(alpha, x)?.sub(&model.act(beta, y)?).norm())
}

/// Searches window × window for (α, β) with (χ_α/d_α)x = (χ_β/d_β)y within
/// `tol`. Pairs are scanned β-major in window order, so witnesses of the
/// form (α, γ₀) are preferred when the window starts with γ₀.
pub fn orbit_test(
    model: &SpectralModel,
    x: &VectorH,
    y: &VectorH,
    window: &[IrrepLabel],
    tol: f64,
) -> Result<OrbitVerdict> {
    model.check_vector(x)?;
    model.check_vector(y)?;
    for beta in window {
        let by = model.act(beta, y)?;
        for alpha in window {
            let residual = model.act(alpha, x)?.sub(&by).norm();
            if residual <= tol {
                return Ok(OrbitVerdict::Witness {
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                    residual,
                });
            }
        }
    }
    Ok(OrbitVerdict::NotFoundInWindow)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Envelope {
    /// Bound c·n^{−power}.
    pub c: f64,
    pub power: f64,
}

impl Envelope {
    pub fn at(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.power)
    }
}

#[derive(Clone, Debug)]
pub struct DecayOptions {
    pub n_max: usize,
    pub tol: f64,
    pub tail_window: usize,
    pub envelope: Option<Envelope>,
}

impl DecayOptions {
    pub fn new(n_max: usize) -> Self {
        Self {
            n_max,
            tol: DECAY_TOL,
            tail_window: 10.min(n_max.max(1)),
            envelope: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayTrace {
    /// (n, ‖A_n(x − y)‖).
    pub trace: Vec<(usize, f64)>,
    pub witness: (IrrepLabel, IrrepLabel),
    pub witness_residual: f64,
    pub tail_within_envelope: bool,
    pub passed: bool,
}

impl DecayTrace {
    pub fn final_value(&self) -> f64 {
        self.trace.last().map_or(0.0, |t| t.1)
    }
}

/// ‖A_n(x − y)‖ for n ≤ n_max, given a witness (α, β) that relates x and y
/// and whose labels both fix the sequence under `policy`.
#[allow(clippy::too_many_arguments)]
pub fn verify_orbit_decay(
    model: &SpectralModel,
    seq: &SubsetSequence,
    x: &VectorH,
    y: &VectorH,
    witness: (&IrrepLabel, &IrrepLabel),
    policy: &FixPolicy,
    options: &DecayOptions,
) -> Result<DecayTrace> {
    same_ring(model, seq)?;
    for l in [witness.0, witness.1] {
        if fixes(seq, l, policy)?.verdict != Verdict::Fixes {
            return Err(Error::WitnessNotInStabilizer(l.clone()));
        }
    }
    let witness_residual = orbit_residual(model, x, y, witness.0, witness.1)?;
    if witness_residual > IDENTITY_TOL {
        return Err(Error::WitnessMismatch {
            residual: witness_residual,
        });
    }
    let diff = x.sub(y);
    let trace = (1..=options.n_max)
        .into_par_iter()
        .map(|n| Ok((n, diff.apply(&cesaro_average(model, seq, n)?).norm())))
        .collect::<Result<Vec<_>>>()?;
    let tail_start = options.n_max + 1 - options.tail_window.clamp(1, options.n_max.max(1));
    let tail_within_envelope = options.envelope.is_none_or(|env| {
        trace
            .iter()
            .filter(|(n, _)| *n >= tail_start)
            .all(|(n, v)| *v <= env.at(*n) + IDENTITY_TOL)
    });
    let final_ok = trace.last().is_none_or(|t| t.1 <= options.tol);
    Ok(DecayTrace {
        passed: final_ok && tail_within_envelope,
        trace,
        witness: (witness.0.clone(), witness.1.clone()),
        witness_residual,
        tail_within_envelope,
    })
}

/// Model file format: `{ "model": "integer_dual", "grid": ["0", "1/3", "1"] }`.
///
/// Angles are multiples of π written as exact fractions; `integer_dual`
/// with `rank` ≥ 2 takes a list of coordinate lists, `free_orthogonal` takes
/// real parameters t, and `cyclic_dual` ignores the grid.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: String,
    #[serde(default)]
    pub grid: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

fn parse_fraction(v: &serde_json::Value, path: &str) -> Result<Rational64> {
    match v {
        serde_json::Value::String(s) => s
            .trim()
            .parse::<Rational64>()
            .map_err(|_| Error::config(path, format!("{s:?} is not a fraction p/q"))),
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(Rational64::from_integer)
            .ok_or_else(|| Error::config(path, "angles must be integers or \"p/q\" strings")),
        _ => Err(Error::config(path, "expected a fraction")),
    }
}

impl ModelSpec {
    pub fn build(&self, path: &str) -> Result<SpectralModel> {
        let flat = || {
            self.grid
                .iter()
                .enumerate()
                .map(|(i, v)| parse_fraction(v, &format!("{path}.grid[{i}]")))
                .collect::<Result<Vec<_>>>()
        };
        let need = |v: Option<u64>, key: &str| {
            v.ok_or_else(|| {
                Error::config(
                    format!("{path}.{key}"),
                    format!("{} requires \"{key}\"", self.model),
                )
            })
        };
        let model = match self.model.as_str() {
            "integer_dual" => match self.rank.unwrap_or(1) {
                1 => SpectralModel::circle(&flat()?),
                d => {
                    let grid = self
                        .grid
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            let p = format!("{path}.grid[{i}]");
                            v.as_array()
                                .ok_or_else(|| Error::config(&p, "expected a list of coordinates"))?
                                .iter()
                                .enumerate()
                                .map(|(j, c)| parse_fraction(c, &format!("{p}[{j}]")))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    SpectralModel::integer_dual(d, grid)
                }
            },
            "su2" => SpectralModel::su2(&flat()?),
            "cyclic_dual" => SpectralModel::cyclic(need(self.m, "m")?),
            "free_orthogonal" => SpectralModel::free_orthogonal(need(self.n, "n")?, &flat()?),
            other => {
                return Err(Error::config(
                    format!("{path}.model"),
                    format!("unknown model {other:?}"),
                ))
            }
        };
        model.map_err(|e| match e {
            Error::Model(msg) | Error::InvalidRing(msg) => Error::config(path, msg),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Affine;

    fn i(k: i64) -> IrrepLabel {
        IrrepLabel::Int(k)
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn exact_angles() {
        assert_eq!(exp_i_pi(0, 1), Complex64::new(1.0, 0.0));
        assert_eq!(exp_i_pi(7, 1), Complex64::new(-1.0, 0.0));
        assert_eq!(exp_i_pi(-1, 2), Complex64::new(0.0, -1.0));
        assert!(close(
            exp_i_pi(1, 3),
            Complex64::new(0.5, 3f64.sqrt() / 2.0)
        ));
        assert_eq!(reduce_angle(r(-1, 2)), r(3, 2));
    }

    #[test]
    fn cesaro_examples() {
        let model = SpectralModel::circle(&[r(1, 1)]).unwrap();
        let seq = SubsetSequence::symmetric_intervals(model.ring()).unwrap();
        let a1 = cesaro_average(&model, &seq, 1).unwrap();
        assert_eq!(a1[0], Complex64::new(1.0, 0.0));
        assert!(close(a1[1], Complex64::new(-1.0 / 3.0, 0.0)));
        for n in [2, 17, 60] {
            assert_eq!(cesaro_average(&model, &seq, n).unwrap()[0].re, 1.0);
        }

        let su2 = SpectralModel::su2(&[r(1, 3), r(1, 2)]).unwrap();
        let seq = SubsetSequence::initial_segments(su2.ring()).unwrap();
        for n in 1..=30 {
            let a = cesaro_average(&su2, &seq, n).unwrap();
            assert_eq!(a[0], Complex64::new(1.0, 0.0));
            assert!(a.iter().all(|v| v.norm() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn su2_characters() {
        let su2 = SpectralModel::su2(&[r(1, 2), r(1, 1), r(3, 2)]).unwrap();
        // grid {0, π/2, π}; 3π/2 folds onto π/2
        assert_eq!(su2.len(), 3);
        assert_eq!(su2.char_value(&i(4), 0).unwrap().re, 5.0);
        assert_eq!(su2.char_value(&i(3), 2).unwrap().re, -4.0);
        // sin(3π/2)/sin(π/2)
        assert_eq!(su2.char_value(&i(2), 1).unwrap().re, -1.0);
        assert_eq!(su2.char_value(&i(1), 1).unwrap().re, 0.0);
    }

    #[test]
    fn projector_examples() {
        let model = SpectralModel::circle(&[r(1, 2), r(1, 1), r(3, 2)]).unwrap();
        let seq = SubsetSequence::symmetric_intervals(model.ring()).unwrap();
        let p = fixed_projector(&model, &seq, 5).unwrap();
        assert_eq!(p.mask, vec![true, false, false, false]);

        let c2 = SpectralModel::cyclic(2).unwrap();
        let seq = SubsetSequence::explicit(c2.ring(), vec![vec![i(0)], vec![i(0)]]).unwrap();
        assert_eq!(
            fixed_projector(&c2, &seq, 2).unwrap().mask,
            vec![true, true]
        );

        let su2 = SpectralModel::default_for(&FusionRing::su2()).unwrap();
        let seq = SubsetSequence::initial_segments(su2.ring()).unwrap();
        let p = fixed_projector(&su2, &seq, 10).unwrap();
        assert_eq!(p.fixed_points().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn projector_shrinks_with_horizon() {
        let c6 = SpectralModel::cyclic(6).unwrap();
        // F_1 = {0}, F_2 = {0, 3}, F_3 = {0, 2, 3}
        let sets = vec![vec![i(0)], vec![i(0), i(3)], vec![i(0), i(2), i(3)]];
        let seq = SubsetSequence::explicit(c6.ring(), sets).unwrap();
        let counts: Vec<usize> = (1..=3)
            .map(|h| {
                fixed_projector(&c6, &seq, h)
                    .unwrap()
                    .fixed_points()
                    .count()
            })
            .collect();
        assert_eq!(counts, vec![6, 3, 1]);
    }

    #[test]
    fn mean_convergence_on_builtin_models() {
        let model = SpectralModel::default_for(&FusionRing::integer_dual(1).unwrap()).unwrap();
        let seq = SubsetSequence::symmetric_intervals(model.ring()).unwrap();
        let rep = verify_mean_convergence(&model, &seq, 50, 0.0).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.projector.fixed_points().collect::<Vec<_>>(), vec![0]);

        let su2 = SpectralModel::default_for(&FusionRing::su2()).unwrap();
        let seq = SubsetSequence::initial_segments(su2.ring()).unwrap();
        assert!(verify_mean_convergence(&su2, &seq, 40, 0.0)
            .unwrap()
            .passed());

        let c4 = SpectralModel::cyclic(4).unwrap();
        let seq = SubsetSequence::explicit(c4.ring(), vec![vec![i(0)]]).unwrap();
        let rep = verify_mean_convergence(&c4, &seq, 1, 0.0).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.projector.fixed_points().count(), 4);
    }

    #[test]
    fn models_satisfy_character_identities() {
        let models = [
            SpectralModel::default_for(&FusionRing::integer_dual(1).unwrap()).unwrap(),
            SpectralModel::default_for(&FusionRing::integer_dual(2).unwrap()).unwrap(),
            SpectralModel::default_for(&FusionRing::su2()).unwrap(),
            SpectralModel::default_for(&FusionRing::cyclic_dual(7).unwrap()).unwrap(),
            SpectralModel::default_for(&FusionRing::free_orthogonal(3).unwrap()).unwrap(),
        ];
        for m in &models {
            let v = check_model(m, 12, IDENTITY_TOL).unwrap();
            assert!(v.is_empty(), "{}: {:?}", m.ring().kind(), v);
            let bar = verify_conjugate_eigenvectors(m, 30, IDENTITY_TOL).unwrap();
            assert!(bar.violations.is_empty());
            assert!(bar.premises_met >= 1);
        }
    }

    #[test]
    fn broken_model_is_caught() {
        let ring = FusionRing::cyclic_dual(2).unwrap();
        let mut rows = BTreeMap::new();
        rows.insert(i(0), vec![Complex64::new(1.0, 0.0); 2]);
        rows.insert(
            i(1),
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
        );
        let m = SpectralModel::tabulated(&ring, vec!["e".into(), "g".into()], rows).unwrap();
        let v = check_model(&m, 2, IDENTITY_TOL).unwrap();
        assert!(v
            .iter()
            .any(|x| matches!(x, ModelViolation::Multiplicativity { point: 1, .. })));
    }

    #[test]
    fn orbit_examples() {
        let model = SpectralModel::circle(&[r(1, 1)]).unwrap();
        let x = VectorH::real(&[1.0, 1.0]);
        let y = VectorH::real(&[1.0, -1.0]);
        let window = vec![i(0), i(1), i(2)];
        assert_eq!(
            orbit_test(&model, &x, &x, &window, 1e-12).unwrap(),
            OrbitVerdict::Witness {
                alpha: i(0),
                beta: i(0),
                residual: 0.0
            }
        );
        assert_eq!(
            orbit_test(&model, &x, &y, &window, 1e-12).unwrap(),
            OrbitVerdict::Witness {
                alpha: i(1),
                beta: i(0),
                residual: 0.0
            }
        );
        assert_eq!(orbit_residual(&model, &y, &x, &i(0), &i(1)).unwrap(), 0.0);
        let z = VectorH::real(&[2.0, 1.0]);
        assert_eq!(
            orbit_test(&model, &x, &z, &window, 1e-9).unwrap(),
            OrbitVerdict::NotFoundInWindow
        );
    }

    #[test]
    fn orbit_decay_dirichlet() {
        let model = SpectralModel::circle(&[r(1, 1)]).unwrap();
        let seq = SubsetSequence::symmetric_intervals(model.ring()).unwrap();
        let x = VectorH::real(&[1.0, 1.0]);
        let y = VectorH::real(&[1.0, -1.0]);
        let policy = FixPolicy::new(200, 0.05, 10).unwrap();
        let mut opts = DecayOptions::new(60);
        opts.tol = 0.02;
        opts.envelope = Some(Envelope { c: 1.0, power: 1.0 });
        let d = verify_orbit_decay(&model, &seq, &x, &y, (&i(1), &i(0)), &policy, &opts).unwrap();
        for (n, v) in &d.trace {
            assert!((v - 2.0 / (2 * n + 1) as f64).abs() < 1e-12);
        }
        assert!(d.passed);

        let same =
            verify_orbit_decay(&model, &seq, &x, &x, (&i(0), &i(0)), &policy, &opts).unwrap();
        assert!(same.trace.iter().all(|t| t.1 == 0.0));

        let odd = SubsetSequence::intervals(model.ring(), Affine::new(0, 1), Affine::new(2, 1), 2)
            .unwrap();
        assert!(matches!(
            verify_orbit_decay(&model, &odd, &x, &y, (&i(1), &i(0)), &policy, &opts),
            Err(Error::WitnessNotInStabilizer(_))
        ));
        assert!(matches!(
            verify_orbit_decay(&model, &seq, &x, &y, (&i(2), &i(0)), &policy, &opts),
            Err(Error::WitnessMismatch { .. })
        ));
    }

    #[test]
    fn su2_off_identity_vector_averages_out() {
        let su2 = SpectralModel::su2(&[r(1, 2)]).unwrap();
        let seq = SubsetSequence::initial_segments(su2.ring()).unwrap();
        let x = VectorH::basis(2, 1);
        let norms: Vec<f64> = [10, 100, 400]
            .iter()
            .map(|&n| x.apply(&cesaro_average(&su2, &seq, n).unwrap()).norm())
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2]);
        assert!(norms[2] < 1e-2);
    }

    #[test]
    fn model_spec_parsing() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{ "model": "integer_dual", "grid": ["0", "1/3", "1/2", 1] }"#)
                .unwrap();
        let m = spec.build("$").unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.points()[1].to_string(), "pi*1/3");

        let spec: ModelSpec = serde_json::from_str(
            r#"{ "model": "integer_dual", "rank": 2, "grid": [["1/2", "1"]] }"#,
        )
        .unwrap();
        assert_eq!(spec.build("$").unwrap().len(), 2);

        let spec: ModelSpec = serde_json::from_str(r#"{ "model": "su2", "grid": ["x"] }"#).unwrap();
        assert!(
            matches!(spec.build("$"), Err(Error::Config { ref path, .. }) if path == "$.grid[0]")
        );
        let spec: ModelSpec = serde_json::from_str(r#"{ "model": "cyclic_dual" }"#).unwrap();
        assert!(matches!(spec.build("$"), Err(Error::Config { ref path, .. }) if path == "$.m"));
    }
}
