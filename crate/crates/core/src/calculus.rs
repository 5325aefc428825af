//! Weighted cardinalities, relative boundaries and fixing ratios on a fusion ring.
//!
//! All quantities are exact: weights are big integers and ratios are big
//! rationals. Conversion to floating point only happens in reports.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Decomposition, FusionRing, IrrepLabel, RingKind};

pub type Ratio = BigRational;

pub fn ratio(num: &BigUint, den: &BigUint) -> Ratio {
    Ratio::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn ratio_from_f64(x: f64) -> Ratio {
    Ratio::from_float(x).expect("finite float")
}

pub fn ratio_to_f64(r: &Ratio) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Σ d_α² over `labels`.
pub fn weighted_card<'a, I>(ring: &FusionRing, labels: I) -> Result<BigUint>
where
    I: IntoIterator<Item = &'a IrrepLabel>,
{
    let mut total = BigUint::zero();
    for l in labels {
        let d = ring.dim(l)?;
        total += &d * &d;
    }
    Ok(total)
}

/// A finite set of irreducible classes of one ring.
#[derive(Clone, Debug)]
pub struct FiniteSubset {
    ring: FusionRing,
    members: BTreeSet<IrrepLabel>,
}

impl FiniteSubset {
    pub fn new<I>(ring: &FusionRing, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = IrrepLabel>,
    {
        let members: BTreeSet<IrrepLabel> = members.into_iter().collect();
        for m in &members {
            ring.check(m)?;
        }
        Ok(Self {
            ring: ring.clone(),
            members,
        })
    }

    pub fn ring(&self) -> &FusionRing {
        &self.ring
    }

    pub fn members(&self) -> &BTreeSet<IrrepLabel> {
        &self.members
    }

    pub fn contains(&self, label: &IrrepLabel) -> bool {
        self.members.contains(label)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weighted_card(&self) -> BigUint {
        weighted_card(&self.ring, &self.members).expect("members validated at construction")
    }
}

/// ∂_S(F) split into the part inside F and the part outside F.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryReport {
    pub inner: BTreeSet<IrrepLabel>,
    pub outer: BTreeSet<IrrepLabel>,
    pub weighted_inner: BigUint,
    pub weighted_outer: BigUint,
}

impl BoundaryReport {
    pub fn weighted_total(&self) -> BigUint {
        &self.weighted_inner + &self.weighted_outer
    }

    pub fn labels(&self) -> BTreeSet<IrrepLabel> {
        self.inner.union(&self.outer).cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty() && self.outer.is_empty()
    }
}

/// Boundary of `f` relative to the labels `s`:
/// inner = {α ∈ F : α⊗γ has a constituent outside F for some γ ∈ S},
/// outer = {α ∉ F : α⊗γ has a constituent inside F for some γ ∈ S}.
///
/// The outer part is enumerated from F: N_{α,γ}^β = N_{β,γ̄}^α, so the
/// candidates are the constituents of β⊗γ̄ for β ∈ F.
pub fn boundary(f: &FiniteSubset, s: &[IrrepLabel]) -> Result<BoundaryReport> {
    if s.is_empty() {
        return Err(Error::EmptySet("boundary needs a nonempty S".into()));
    }
    let ring = f.ring();
    let conj_s = s
        .iter()
        .map(|g| ring.conjugate(g))
        .collect::<Result<Vec<_>>>()?;

    let mut inner = BTreeSet::new();
    for a in f.members() {
        for g in s {
            if ring.decompose(a, g)?.labels().any(|b| !f.contains(b)) {
                inner.insert(a.clone());
                break;
            }
        }
    }
    let mut outer = BTreeSet::new();
    for b in f.members() {
        for g in &conj_s {
            for a in ring.decompose(b, g)?.labels() {
                if !f.contains(a) {
                    outer.insert(a.clone());
                }
            }
        }
    }
    let weighted_inner = weighted_card(ring, &inner)?;
    let weighted_outer = weighted_card(ring, &outer)?;
    Ok(BoundaryReport {
        inner,
        outer,
        weighted_inner,
        weighted_outer,
    })
}

/// ∂_α(F) for a finite-dimensional representation α: the boundary relative to
/// the set of irreducible constituents of α.
pub fn boundary_rel_rep(f: &FiniteSubset, rep: &Decomposition) -> Result<BoundaryReport> {
    let s: Vec<IrrepLabel> = rep.labels().cloned().collect();
    boundary(f, &s)
}

/// a·n + b.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub a: i64,
    pub b: i64,
}

impl Affine {
    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    pub fn at(&self, n: usize) -> i64 {
        self.a * n as i64 + self.b
    }
}

pub type SubsetRule = Arc<dyn Fn(usize) -> Vec<IrrepLabel> + Send + Sync>;

#[derive(Clone)]
pub enum SequenceKind {
    /// Labels `start(n), start(n)+step, …, ≤ end(n)`. On integer lattices of
    /// rank ≥ 2 every coordinate ranges over that progression (boxes); on
    /// cyclic duals labels are reduced mod m.
    Intervals {
        start: Affine,
        end: Affine,
        step: i64,
    },
    Explicit(Vec<Vec<IrrepLabel>>),
    Custom(SubsetRule),
}

impl fmt::Debug for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::Intervals { start, end, step } => f
                .debug_struct("Intervals")
                .field("start", start)
                .field("end", end)
                .field("step", step)
                .finish(),
            SequenceKind::Explicit(sets) => f.debug_tuple("Explicit").field(&sets.len()).finish(),
            SequenceKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Σ = {F_n}, n ≥ 1.
#[derive(Clone, Debug)]
pub struct SubsetSequence {
    ring: FusionRing,
    kind: SequenceKind,
    len: Option<usize>,
}

impl SubsetSequence {
    pub fn intervals(ring: &FusionRing, start: Affine, end: Affine, step: i64) -> Result<Self> {
        if step < 1 {
            return Err(Error::InvalidSequence("interval step must be ≥ 1".into()));
        }
        match ring.kind() {
            RingKind::IntegerDual(_)
            | RingKind::CyclicDual(_)
            | RingKind::Su2
            | RingKind::FreeOrthogonal(_) => {}
            other => {
                return Err(Error::InvalidSequence(format!(
                    "interval sequences are not defined on {other}"
                )))
            }
        }
        Ok(Self {
            ring: ring.clone(),
            kind: SequenceKind::Intervals { start, end, step },
            len: None,
        })
    }

    /// F_n = {0, 1, …, n}.
    pub fn initial_segments(ring: &FusionRing) -> Result<Self> {
        Self::intervals(ring, Affine::new(0, 0), Affine::new(1, 0), 1)
    }

    /// F_n = {−n, …, n}.
    pub fn symmetric_intervals(ring: &FusionRing) -> Result<Self> {
        Self::intervals(ring, Affine::new(-1, 0), Affine::new(1, 0), 1)
    }

    pub fn explicit(ring: &FusionRing, sets: Vec<Vec<IrrepLabel>>) -> Result<Self> {
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidSequence(format!("set {} is empty", i + 1)));
            }
            for l in set {
                ring.check(l)?;
            }
        }
        let len = Some(sets.len());
        Ok(Self {
            ring: ring.clone(),
            kind: SequenceKind::Explicit(sets),
            len,
        })
    }

    pub fn custom(ring: &FusionRing, rule: SubsetRule, len: Option<usize>) -> Self {
        Self {
            ring: ring.clone(),
            kind: SequenceKind::Custom(rule),
            len,
        }
    }

    pub fn ring(&self) -> &FusionRing {
        &self.ring
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    /// Declared length; `None` for infinite sequences.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Option<usize> {
        self.len
    }

    pub fn check_index(&self, n: usize) -> Result<()> {
        match self.len {
            _ if n == 0 => Err(Error::IndexOutOfRange {
                n,
                len: self.len.unwrap_or(usize::MAX),
            }),
            Some(len) if n > len => Err(Error::IndexOutOfRange { n, len }),
            _ => Ok(()),
        }
    }

    /// F_n.
    pub fn term(&self, n: usize) -> Result<FiniteSubset> {
        self.check_index(n)?;
        let labels = match &self.kind {
            SequenceKind::Intervals { start, end, step } => {
                self.interval_labels(start.at(n), end.at(n), *step)?
            }
            SequenceKind::Explicit(sets) => sets[n - 1].clone(),
            SequenceKind::Custom(rule) => rule(n),
        };
        let set = FiniteSubset::new(&self.ring, labels)?;
        if set.is_empty() {
            return Err(Error::InvalidSequence(format!("F_{n} is empty")));
        }
        Ok(set)
    }

    fn interval_labels(&self, lo: i64, hi: i64, step: i64) -> Result<Vec<IrrepLabel>> {
        let line: Vec<i64> = (lo..=hi).step_by(step as usize).collect();
        Ok(match self.ring.kind() {
            RingKind::CyclicDual(m) => line
                .iter()
                .map(|k| IrrepLabel::Int(k.rem_euclid(m as i64)))
                .collect(),
            RingKind::IntegerDual(1) => line.into_iter().map(IrrepLabel::Int).collect(),
            RingKind::IntegerDual(d) => {
                let mut boxes: Vec<Vec<i64>> = vec![Vec::new()];
                for _ in 0..d {
                    boxes = boxes
                        .into_iter()
                        .flat_map(|p| {
                            line.iter().map(move |x| {
                                let mut q = p.clone();
                                q.push(*x);
                                q
                            })
                        })
                        .collect();
                }
                boxes.into_iter().map(IrrepLabel::tuple).collect()
            }
            _ => {
                if lo < 0 {
                    return Err(Error::InvalidSequence(format!(
                        "interval starts at {lo}, below the smallest label 0"
                    )));
                }
                line.into_iter().map(IrrepLabel::Int).collect()
            }
        })
    }
}

/// One point of a ratio trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioPoint {
    pub n: usize,
    pub weighted_set: BigUint,
    pub weighted_boundary: BigUint,
    pub ratio: Ratio,
}

/// |∂_S(F_n)|_w / |F_n|_w with full bookkeeping.
pub fn ratio_point(seq: &SubsetSequence, s: &[IrrepLabel], n: usize) -> Result<RatioPoint> {
    let f = seq.term(n)?;
    let b = boundary(&f, s)?;
    let weighted_set = f.weighted_card();
    let weighted_boundary = b.weighted_total();
    Ok(RatioPoint {
        n,
        ratio: ratio(&weighted_boundary, &weighted_set),
        weighted_set,
        weighted_boundary,
    })
}

/// |∂_γ(F_n)|_w / |F_n|_w.
pub fn fix_ratio(seq: &SubsetSequence, gamma: &IrrepLabel, n: usize) -> Result<Ratio> {
    seq.ring().check(gamma)?;
    Ok(ratio_point(seq, std::slice::from_ref(gamma), n)?.ratio)
}

/// Ratio points for every n in `range`, evaluated in parallel, returned in order.
pub fn ratio_trace(
    seq: &SubsetSequence,
    gamma: &IrrepLabel,
    range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<RatioPoint>> {
    seq.ring().check(gamma)?;
    let ns: Vec<usize> = range.collect();
    ns.into_par_iter()
        .map(|n| ratio_point(seq, std::slice::from_ref(gamma), n))
        .collect()
}

/// Truncation policy for deciding a limit from finitely many terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixPolicy {
    pub n_max: usize,
    pub epsilon: f64,
    pub tail_window: usize,
}

impl FixPolicy {
    pub fn new(n_max: usize, epsilon: f64, tail_window: usize) -> Result<Self> {
        let p = Self {
            n_max,
            epsilon,
            tail_window,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tail_window < 2 || self.n_max < self.tail_window {
            return Err(Error::InvalidPolicy(format!(
                "need n_max ≥ tail_window ≥ 2, got n_max = {}, tail_window = {}",
                self.n_max, self.tail_window
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidPolicy(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn tail(&self) -> std::ops::RangeInclusive<usize> {
        self.n_max + 1 - self.tail_window..=self.n_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Fixes,
    DoesNotFix,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Fixes => "Fixes",
            Verdict::DoesNotFix => "DoesNotFix",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

/// Classifies the tail of a ratio trace.
///
/// `Fixes`: the last ratio is ≤ ε and the tail is nonincreasing.
/// `DoesNotFix`: every tail ratio is ≥ ε and the tail's trend does not reach
/// ε: continuing the average per-step change of the tail for another `n_max`
/// steps still stays ≥ ε (always true for a nondecreasing tail).
/// `Inconclusive` otherwise.
pub fn judge(tail: &[Ratio], policy: &FixPolicy) -> Verdict {
    let (Some(first), Some(last)) = (tail.first(), tail.last()) else {
        return Verdict::Inconclusive;
    };
    let eps = ratio_from_f64(policy.epsilon);
    let nonincreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    if *last <= eps && nonincreasing {
        return Verdict::Fixes;
    }
    if tail.iter().all(|r| *r >= eps) {
        let steps = Ratio::from_integer(BigInt::from(tail.len().saturating_sub(1).max(1)));
        let slope = (last - first) / steps;
        let projected = last + slope * Ratio::from_integer(BigInt::from(policy.n_max));
        if projected >= eps {
            return Verdict::DoesNotFix;
        }
    }
    Verdict::Inconclusive
}

#[derive(Clone, Debug)]
pub struct FixReport {
    pub label: IrrepLabel,
    pub verdict: Verdict,
    pub policy: FixPolicy,
    /// Ratio points over the policy's tail window.
    pub trace: Vec<RatioPoint>,
}

impl FixReport {
    pub fn final_ratio(&self) -> &Ratio {
        &self.trace.last().expect("tail window is nonempty").ratio
    }
}

/// Decides "γ fixes Σ" under a truncation policy; see [`judge`].
pub fn fixes(seq: &SubsetSequence, gamma: &IrrepLabel, policy: &FixPolicy) -> Result<FixReport> {
    policy.validate()?;
    seq.check_index(policy.n_max)?;
    let trace = ratio_trace(seq, gamma, policy.tail())?;
    let tail: Vec<Ratio> = trace.iter().map(|p| p.ratio.clone()).collect();
    Ok(FixReport {
        label: gamma.clone(),
        verdict: judge(&tail, policy),
        policy: *policy,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct DensityEstimate {
    /// (n, |Λ ∩ F_n|_w / |F_n|_w)
    pub trace: Vec<(usize, Ratio)>,
    /// Maximum over the last `tail` terms.
    pub estimate: Ratio,
}

/// Weighted upper density of Λ along Σ, estimated by the maximum of the tail.
pub fn weighted_upper_density(
    seq: &SubsetSequence,
    member: &(dyn Fn(&IrrepLabel) -> bool + Sync),
    n_max: usize,
    tail: usize,
) -> Result<DensityEstimate> {
    if n_max == 0 || tail == 0 || tail > n_max {
        return Err(Error::InvalidPolicy(format!(
            "need n_max ≥ tail ≥ 1, got n_max = {n_max}, tail = {tail}"
        )));
    }
    seq.check_index(n_max)?;
    let trace = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let f = seq.term(n)?;
            let hit = weighted_card(f.ring(), f.members().iter().filter(|l| member(l)))?;
            Ok((n, ratio(&hit, &f.weighted_card())))
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = trace[n_max - tail..]
        .iter()
        .map(|(_, r)| r.clone())
        .max()
        .expect("tail is nonempty");
    Ok(DensityEstimate { trace, estimate })
}
