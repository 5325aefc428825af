//! Countable discrete groups: fixing ratios |gF_n Δ F_n|/|F_n|, the subgroup
//! G_Σ, upper densities, arithmetic-progression search and the empirical
//! measures of the correspondence principle.
//!
//! Shift convention on {0,1}^Γ: (s·ω)(t) = ω(ts). Hence (t·ω)(s) = ω(st),
//! and the cylinder {ω(s) = bit} pulled back by b is {ω(sb) = bit}.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{judge, Affine, FixPolicy, Ratio, Verdict};
use crate::error::{Error, Result};
use crate::fusion::{lattice_points, FusionRing, IrrepLabel, RingKind};

/// A group element: integer coordinates (abelian groups, Heisenberg) or a
/// reduced word in the letters ±1, …, ±r (free groups).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Tuple(Vec<i64>),
    Word(Vec<i8>),
}

impl Element {
    pub fn int(k: i64) -> Self {
        Element::Tuple(vec![k])
    }

    pub fn coords(&self) -> &[i64] {
        match self {
            Element::Tuple(v) => v,
            Element::Word(_) => &[],
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Element::Tuple(v) if v.len() == 1 => Some(v[0]),
            _ => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Tuple(v) if v.len() == 1 => write!(f, "{}", v[0]),
            Element::Tuple(v) => {
                let parts: Vec<String> = v.iter().map(i64::to_string).collect();
                write!(f, "({})", parts.join(","))
            }
            Element::Word(w) if w.is_empty() => f.write_str("e"),
            Element::Word(w) => {
                for &l in w {
                    let c = (b'a' + (l.unsigned_abs() - 1)) as char;
                    if l > 0 {
                        write!(f, "{c}")?;
                    } else {
                        write!(f, "{}", c.to_ascii_uppercase())?;
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupUniverse {
    /// ℤ^d.
    FreeAbelian(usize),
    /// ℤ/m₁ × … × ℤ/m_k, coordinates stored in [0, m_i).
    CyclicProduct(Vec<u64>),
    /// Triples with (x,y,z)(x',y',z') = (x+x', y+y', z+z'+xy').
    Heisenberg,
    /// Free group on `r` generators (r ≤ 26).
    FreeGroup(u8),
}

impl fmt::Display for GroupUniverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupUniverse::FreeAbelian(1) => f.write_str("Z"),
            GroupUniverse::FreeAbelian(d) => write!(f, "Z^{d}"),
            GroupUniverse::CyclicProduct(ms) => {
                let parts: Vec<String> = ms.iter().map(|m| format!("Z/{m}")).collect();
                f.write_str(&parts.join(" x "))
            }
            GroupUniverse::Heisenberg => f.write_str("H3(Z)"),
            GroupUniverse::FreeGroup(r) => write!(f, "F{r}"),
        }
    }
}

impl GroupUniverse {
    pub fn free_abelian(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidGroup("rank must be ≥ 1".into()));
        }
        Ok(GroupUniverse::FreeAbelian(d))
    }

    pub fn cyclic(moduli: Vec<u64>) -> Result<Self> {
        if moduli.is_empty() || moduli.contains(&0) {
            return Err(Error::InvalidGroup("cyclic factors need moduli ≥ 1".into()));
        }
        Ok(GroupUniverse::CyclicProduct(moduli))
    }

    pub fn free_group(rank: u8) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::InvalidGroup(format!(
                "free group rank {rank} outside 1..=26"
            )));
        }
        Ok(GroupUniverse::FreeGroup(rank))
    }

    pub fn is_abelian(&self) -> bool {
        matches!(
            self,
            GroupUniverse::FreeAbelian(_) | GroupUniverse::CyclicProduct(_)
        )
    }

    fn arity(&self) -> usize {
        match self {
            GroupUniverse::FreeAbelian(d) => *d,
            GroupUniverse::CyclicProduct(ms) => ms.len(),
            GroupUniverse::Heisenberg => 3,
            GroupUniverse::FreeGroup(_) => 0,
        }
    }

    pub fn identity(&self) -> Element {
        match self {
            GroupUniverse::FreeGroup(_) => Element::Word(Vec::new()),
            _ => Element::Tuple(vec![0; self.arity()]),
        }
    }

    pub fn check(&self, g: &Element) -> Result<()> {
        let bad = |why: String| {
            Err(Error::InvalidGroup(format!(
                "{g} is not an element of {self}: {why}"
            )))
        };
        match (self, g) {
            (GroupUniverse::FreeGroup(r), Element::Word(w)) => {
                if let Some(l) = w.iter().find(|l| **l == 0 || l.unsigned_abs() > *r) {
                    return bad(format!("letter {l}"));
                }
                if w.windows(2).any(|p| p[0] == -p[1]) {
                    return bad("word is not reduced".into());
                }
                Ok(())
            }
            (GroupUniverse::FreeGroup(_), _) => bad("expected a word".into()),
            (_, Element::Word(_)) => bad("expected coordinates".into()),
            (_, Element::Tuple(v)) if v.len() != self.arity() => {
                bad(format!("expected {} coordinates", self.arity()))
            }
            (GroupUniverse::CyclicProduct(ms), Element::Tuple(v)) => {
                if v.iter().zip(ms).any(|(x, m)| *x < 0 || *x as u64 >= *m) {
                    return bad("residues must lie in [0, m)".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Reduces raw coordinates or a raw word to canonical form.
    pub fn normalize(&self, g: Element) -> Element {
        match (self, g) {
            (GroupUniverse::CyclicProduct(ms), Element::Tuple(v)) => Element::Tuple(
                v.iter()
                    .zip(ms)
                    .map(|(x, m)| x.rem_euclid(*m as i64))
                    .collect(),
            ),
            (GroupUniverse::FreeGroup(_), Element::Word(w)) => {
                let mut out: Vec<i8> = Vec::with_capacity(w.len());
                for l in w {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Element::Word(out)
            }
            (_, g) => g,
        }
    }

    pub fn multiply(&self, g: &Element, h: &Element) -> Element {
        match (self, g, h) {
            (GroupUniverse::FreeAbelian(_), Element::Tuple(a), Element::Tuple(b)) => {
                Element::Tuple(a.iter().zip(b).map(|(x, y)| x + y).collect())
            }
            (GroupUniverse::CyclicProduct(ms), Element::Tuple(a), Element::Tuple(b)) => {
                Element::Tuple(
                    a.iter()
                        .zip(b)
                        .zip(ms)
                        .map(|((x, y), m)| (x + y).rem_euclid(*m as i64))
                        .collect(),
                )
            }
            (GroupUniverse::Heisenberg, Element::Tuple(a), Element::Tuple(b)) => {
                Element::Tuple(vec![a[0] + b[0], a[1] + b[1], a[2] + b[2] + a[0] * b[1]])
            }
            (GroupUniverse::FreeGroup(_), Element::Word(a), Element::Word(b)) => {
                let mut out = a.clone();
                for &l in b {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Element::Word(out)
            }
            _ => panic!("element shape does not match {self}"),
        }
    }

    pub fn inverse(&self, g: &Element) -> Element {
        match (self, g) {
            (GroupUniverse::FreeAbelian(_), Element::Tuple(a)) => {
                Element::Tuple(a.iter().map(|x| -x).collect())
            }
            (GroupUniverse::CyclicProduct(ms), Element::Tuple(a)) => Element::Tuple(
                a.iter()
                    .zip(ms)
                    .map(|(x, m)| (-x).rem_euclid(*m as i64))
                    .collect(),
            ),
            (GroupUniverse::Heisenberg, Element::Tuple(a)) => {
                Element::Tuple(vec![-a[0], -a[1], -a[2] + a[0] * a[1]])
            }
            (GroupUniverse::FreeGroup(_), Element::Word(w)) => {
                Element::Word(w.iter().rev().map(|l| -l).collect())
            }
            _ => panic!("element shape does not match {self}"),
        }
    }

    /// g^k by repeated squaring; negative k uses the inverse.
    pub fn pow(&self, g: &Element, k: i64) -> Element {
        let mut base = if k < 0 { self.inverse(g) } else { g.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.multiply(&acc, &base);
            }
            base = self.multiply(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// A symmetric generating set.
    pub fn generators(&self) -> Vec<Element> {
        let unit = |d: usize, i: usize, s: i64| {
            let mut v = vec![0; d];
            v[i] = s;
            Element::Tuple(v)
        };
        match self {
            GroupUniverse::FreeAbelian(d) => (0..*d)
                .flat_map(|i| [unit(*d, i, 1), unit(*d, i, -1)])
                .collect(),
            GroupUniverse::CyclicProduct(ms) => (0..ms.len())
                .flat_map(|i| [unit(ms.len(), i, 1), unit(ms.len(), i, -1)])
                .map(|g| self.normalize(g))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            GroupUniverse::Heisenberg => {
                vec![unit(3, 0, 1), unit(3, 0, -1), unit(3, 1, 1), unit(3, 1, -1)]
            }
            GroupUniverse::FreeGroup(r) => (1..=*r as i8)
                .flat_map(|l| [Element::Word(vec![l]), Element::Word(vec![-l])])
                .collect(),
        }
    }

    /// The word-metric ball of radius `r` for [`generators`](Self::generators).
    pub fn ball(&self, r: usize) -> BTreeSet<Element> {
        let gens = self.generators();
        let mut seen: HashSet<Element> = HashSet::from([self.identity()]);
        let mut queue = VecDeque::from([(self.identity(), 0usize)]);
        while let Some((g, d)) = queue.pop_front() {
            if d == r {
                continue;
            }
            for s in &gens {
                let h = self.multiply(&g, s);
                if seen.insert(h.clone()) {
                    queue.push_back((h, d + 1));
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Search window in spiral order: coordinate groups by sup-norm radius
    /// ≤ r, then lexicographically (residues reduced, first occurrence
    /// kept); free groups by word length ≤ r, then lexicographically.
    pub fn spiral(&self, r: usize) -> Vec<Element> {
        match self {
            GroupUniverse::FreeGroup(_) => {
                let mut v: Vec<Element> = self.ball(r).into_iter().collect();
                v.sort_by(|a, b| match (a, b) {
                    (Element::Word(x), Element::Word(y)) => x.len().cmp(&y.len()).then(x.cmp(y)),
                    _ => a.cmp(b),
                });
                v
            }
            _ => {
                let d = self.arity();
                let count = (2 * r + 1).pow(d as u32);
                let mut seen = HashSet::new();
                lattice_points(d, count)
                    .into_iter()
                    .map(|p| self.normalize(Element::Tuple(p)))
                    .filter(|g| seen.insert(g.clone()))
                    .collect()
            }
        }
    }

    /// The integer vector used by residue conditions: coordinates, or the
    /// exponent sums (abelianization) of a word.
    pub fn abelian_coords(&self, g: &Element) -> Vec<i64> {
        match (self, g) {
            (GroupUniverse::FreeGroup(r), Element::Word(w)) => {
                let mut v = vec![0; *r as usize];
                for &l in w {
                    v[l.unsigned_abs() as usize - 1] += l.signum() as i64;
                }
                v
            }
            (_, g) => g.coords().to_vec(),
        }
    }

    /// The same element as a label of the dual fusion ring, for ℤ^d and ℤ/m.
    pub fn to_label(&self, g: &Element) -> Option<IrrepLabel> {
        match self {
            GroupUniverse::FreeAbelian(1) => g.as_int().map(IrrepLabel::Int),
            GroupUniverse::FreeAbelian(_) => Some(IrrepLabel::tuple(g.coords().iter().copied())),
            GroupUniverse::CyclicProduct(ms) if ms.len() == 1 => g.as_int().map(IrrepLabel::Int),
            _ => None,
        }
    }

    /// The dual fusion ring whose labels are this group's elements.
    pub fn dual_ring(&self) -> Option<FusionRing> {
        match self {
            GroupUniverse::FreeAbelian(d) => FusionRing::integer_dual(*d).ok(),
            GroupUniverse::CyclicProduct(ms) if ms.len() == 1 => {
                FusionRing::cyclic_dual(ms[0]).ok()
            }
            _ => None,
        }
    }
}

/// Radius scale·n^power along one coordinate of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRadius {
    pub scale: i64,
    pub power: u32,
}

impl BoxRadius {
    pub const LINEAR: BoxRadius = BoxRadius { scale: 1, power: 1 };

    fn at(&self, n: usize) -> i64 {
        self.scale * (n as i64).pow(self.power)
    }
}

pub type GroupRule = Arc<dyn Fn(usize) -> Vec<Element> + Send + Sync>;

#[derive(Clone)]
pub enum GroupSequenceKind {
    /// {start(n), start(n)+step, …, ≤ end(n)} in ℤ or a single ℤ/m.
    Intervals {
        start: Affine,
        end: Affine,
        step: i64,
    },
    /// Coordinate boxes [−r_i(n), r_i(n)].
    Boxes(Vec<BoxRadius>),
    /// Word-metric balls of radius n.
    Balls,
    /// {base, base², …, baseⁿ} ⊂ ℤ.
    Powers {
        base: i64,
    },
    Explicit(Vec<Vec<Element>>),
    Custom(GroupRule),
}

impl fmt::Debug for GroupSequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSequenceKind::Intervals { start, end, step } => {
                write!(f, "Intervals({start:?}, {end:?}, {step})")
            }
            GroupSequenceKind::Boxes(r) => write!(f, "Boxes({r:?})"),
            GroupSequenceKind::Balls => f.write_str("Balls"),
            GroupSequenceKind::Powers { base } => write!(f, "Powers({base})"),
            GroupSequenceKind::Explicit(s) => write!(f, "Explicit({})", s.len()),
            GroupSequenceKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupSubsetSequence {
    group: GroupUniverse,
    kind: GroupSequenceKind,
    len: Option<usize>,
}

impl GroupSubsetSequence {
    pub fn intervals(group: &GroupUniverse, start: Affine, end: Affine, step: i64) -> Result<Self> {
        if step < 1 {
            return Err(Error::InvalidSequence("interval step must be ≥ 1".into()));
        }
        match group {
            GroupUniverse::FreeAbelian(1) => {}
            GroupUniverse::CyclicProduct(ms) if ms.len() == 1 => {}
            other => {
                return Err(Error::InvalidSequence(format!(
                    "intervals need Z or Z/m, not {other}"
                )));
            }
        }
        Ok(Self::new(
            group,
            GroupSequenceKind::Intervals { start, end, step },
            None,
        ))
    }

    /// Cubes [−n, n]^d (Heisenberg: |x|, |y| ≤ n, |z| ≤ n²).
    pub fn boxes(group: &GroupUniverse) -> Result<Self> {
        let radii = match group {
            GroupUniverse::Heisenberg => vec![
                BoxRadius::LINEAR,
                BoxRadius::LINEAR,
                BoxRadius { scale: 1, power: 2 },
            ],
            GroupUniverse::FreeGroup(_) => {
                return Err(Error::InvalidSequence(
                    "boxes are not defined on free groups".into(),
                ));
            }
            g => vec![BoxRadius::LINEAR; g.arity()],
        };
        Self::boxes_with(group, radii)
    }

    pub fn boxes_with(group: &GroupUniverse, radii: Vec<BoxRadius>) -> Result<Self> {
        if matches!(group, GroupUniverse::FreeGroup(_)) || radii.len() != group.arity() {
            return Err(Error::InvalidSequence(format!(
                "{group} needs {} box radii",
                group.arity()
            )));
        }
        if radii.iter().any(|r| r.scale < 0) {
            return Err(Error::InvalidSequence(
                "box radii must be nonnegative".into(),
            ));
        }
        Ok(Self::new(group, GroupSequenceKind::Boxes(radii), None))
    }

    pub fn balls(group: &GroupUniverse) -> Self {
        Self::new(group, GroupSequenceKind::Balls, None)
    }

    pub fn powers(group: &GroupUniverse, base: i64) -> Result<Self> {
        if *group != GroupUniverse::FreeAbelian(1) || base.abs() < 2 {
            return Err(Error::InvalidSequence(
                "powers need Z and |base| ≥ 2".into(),
            ));
        }
        // largest n with |base|^n representable
        let len = (0..).take_while(|&k| base.checked_pow(k).is_some()).count() - 1;
        Ok(Self::new(
            group,
            GroupSequenceKind::Powers { base },
            Some(len),
        ))
    }

    pub fn explicit(group: &GroupUniverse, sets: Vec<Vec<Element>>) -> Result<Self> {
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidSequence(format!("set {} is empty", i + 1)));
            }
            for g in set {
                group.check(g)?;
            }
        }
        let len = Some(sets.len());
        Ok(Self::new(group, GroupSequenceKind::Explicit(sets), len))
    }

    pub fn custom(group: &GroupUniverse, rule: GroupRule, len: Option<usize>) -> Self {
        Self::new(group, GroupSequenceKind::Custom(rule), len)
    }

    fn new(group: &GroupUniverse, kind: GroupSequenceKind, len: Option<usize>) -> Self {
        Self {
            group: group.clone(),
            kind,
            len,
        }
    }

    pub fn group(&self) -> &GroupUniverse {
        &self.group
    }

    pub fn kind(&self) -> &GroupSequenceKind {
        &self.kind
    }

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
    pub fn term(&self, n: usize) -> Result<BTreeSet<Element>> {
        self.check_index(n)?;
        let g = &self.group;
        let set: BTreeSet<Element> = match &self.kind {
            GroupSequenceKind::Intervals { start, end, step } => {
                let (lo, hi) = (start.at(n), end.at(n));
                (0..)
                    .map(|k| lo + k * step)
                    .take_while(|x| *x <= hi)
                    .map(|x| g.normalize(Element::int(x)))
                    .collect()
            }
            GroupSequenceKind::Boxes(radii) => {
                let mut out = BTreeSet::new();
                let r: Vec<i64> = radii.iter().map(|r| r.at(n)).collect();
                let mut p: Vec<i64> = r.iter().map(|x| -x).collect();
                loop {
                    out.insert(g.normalize(Element::Tuple(p.clone())));
                    let mut i = p.len();
                    loop {
                        if i == 0 {
                            return self.nonempty(n, out);
                        }
                        i -= 1;
                        if p[i] < r[i] {
                            p[i] += 1;
                            break;
                        }
                        p[i] = -r[i];
                    }
                }
            }
            GroupSequenceKind::Balls => g.ball(n),
            GroupSequenceKind::Powers { base } => {
                (1..=n as u32).map(|k| Element::int(base.pow(k))).collect()
            }
            GroupSequenceKind::Explicit(sets) => sets[n - 1].iter().cloned().collect(),
            GroupSequenceKind::Custom(rule) => {
                let set: BTreeSet<Element> = rule(n).into_iter().map(|e| g.normalize(e)).collect();
                for e in &set {
                    g.check(e)?;
                }
                set
            }
        };
        self.nonempty(n, set)
    }

    fn nonempty(&self, n: usize, set: BTreeSet<Element>) -> Result<BTreeSet<Element>> {
        if set.is_empty() {
            return Err(Error::EmptySet(format!("F_{n} is empty")));
        }
        Ok(set)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// |gF Δ F| / |F|.
    Left,
    /// |Fg Δ F| / |F|.
    Right,
}

fn translate(
    group: &GroupUniverse,
    f: &BTreeSet<Element>,
    g: &Element,
    side: Side,
) -> BTreeSet<Element> {
    f.iter()
        .map(|t| match side {
            Side::Left => group.multiply(g, t),
            Side::Right => group.multiply(t, g),
        })
        .collect()
}

fn rational(num: usize, den: usize) -> Ratio {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

/// |gF Δ F| as a count, with F given.
pub fn symmetric_difference(
    group: &GroupUniverse,
    f: &BTreeSet<Element>,
    g: &Element,
    side: Side,
) -> usize {
    let moved = translate(group, f, g, side);
    moved.symmetric_difference(f).count()
}

/// |gF_n Δ F_n| / |F_n| (left) or |F_n g Δ F_n| / |F_n| (right), exactly.
pub fn fixing_ratio(seq: &GroupSubsetSequence, g: &Element, side: Side, n: usize) -> Result<Ratio> {
    seq.group().check(g)?;
    let f = seq.term(n)?;
    Ok(rational(
        symmetric_difference(seq.group(), &f, g, side),
        f.len(),
    ))
}

#[derive(Clone, Debug)]
pub struct GroupFixReport {
    pub element: Element,
    pub verdict: Verdict,
    /// (n, ratio) over the policy's tail window.
    pub trace: Vec<(usize, Ratio)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClosureAnomaly {
    Product {
        g: Element,
        h: Element,
        product: Element,
    },
    Inverse {
        g: Element,
        inverse: Element,
    },
}

#[derive(Clone, Debug)]
pub struct GroupStabilizer {
    pub side: Side,
    pub members: BTreeSet<Element>,
    pub reports: BTreeMap<Element, GroupFixReport>,
    /// Members whose product or inverse lies in the window but was not
    /// certified: the policy disagrees with the subgroup law there.
    pub anomalies: Vec<ClosureAnomaly>,
}

/// Classifies the window elements with the same tail rule as the quantum
/// stabilizer, then checks the certified members for closure inside the
/// window.
pub fn classify_g_sigma(
    seq: &GroupSubsetSequence,
    window: &[Element],
    policy: &FixPolicy,
    side: Side,
) -> Result<GroupStabilizer> {
    policy.validate()?;
    seq.check_index(policy.n_max)?;
    let group = seq.group();
    let mut elems: BTreeSet<Element> = window.iter().cloned().collect();
    elems.insert(group.identity());
    for g in &elems {
        group.check(g)?;
    }
    let elems: Vec<Element> = elems.into_iter().collect();
    // one F_n per tail index, shared by every element
    let columns = policy
        .tail()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let f = seq.term(n)?;
            Ok(elems
                .iter()
                .map(|g| {
                    (
                        n,
                        rational(symmetric_difference(group, &f, g, side), f.len()),
                    )
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = BTreeMap::new();
    let mut members = BTreeSet::new();
    for (i, g) in elems.iter().enumerate() {
        let trace: Vec<(usize, Ratio)> = columns.iter().map(|c| c[i].clone()).collect();
        let tail: Vec<Ratio> = trace.iter().map(|(_, r)| r.clone()).collect();
        let verdict = judge(&tail, policy);
        if verdict == Verdict::Fixes {
            members.insert(g.clone());
        }
        reports.insert(
            g.clone(),
            GroupFixReport {
                element: g.clone(),
                verdict,
                trace,
            },
        );
    }

    let mut anomalies = Vec::new();
    for g in &members {
        let inv = group.inverse(g);
        if reports.contains_key(&inv) && !members.contains(&inv) {
            anomalies.push(ClosureAnomaly::Inverse {
                g: g.clone(),
                inverse: inv,
            });
        }
        for h in &members {
            let p = group.multiply(g, h);
            if reports.contains_key(&p) && !members.contains(&p) {
                anomalies.push(ClosureAnomaly::Product {
                    g: g.clone(),
                    h: h.clone(),
                    product: p,
                });
            }
        }
    }
    Ok(GroupStabilizer {
        side,
        members,
        reports,
        anomalies,
    })
}

pub type Predicate = Arc<dyn Fn(&Element) -> bool + Send + Sync>;

/// Λ ⊆ Γ, decidable on any finite window.
#[derive(Clone)]
pub enum DensitySet {
    /// ⟨weights, coords⟩ mod m ∈ classes.
    Residue {
        modulus: i64,
        weights: Vec<i64>,
        classes: BTreeSet<i64>,
    },
    Explicit(BTreeSet<Element>),
    /// lo ≤ first coordinate ≤ hi.
    Interval {
        lo: i64,
        hi: i64,
    },
    Intersection(Vec<DensitySet>),
    Predicate {
        description: String,
        member: Predicate,
    },
}

impl fmt::Debug for DensitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description())
    }
}

impl DensitySet {
    /// {x : x ≡ c mod m for some c in `classes`} on the first coordinate.
    pub fn residue(modulus: i64, classes: &[i64]) -> Result<Self> {
        Self::residue_weighted(modulus, vec![1], classes)
    }

    pub fn residue_weighted(modulus: i64, weights: Vec<i64>, classes: &[i64]) -> Result<Self> {
        if modulus < 1 {
            return Err(Error::InvalidGroup("residue modulus must be ≥ 1".into()));
        }
        Ok(DensitySet::Residue {
            modulus,
            weights,
            classes: classes.iter().map(|c| c.rem_euclid(modulus)).collect(),
        })
    }

    pub fn explicit<I: IntoIterator<Item = Element>>(elements: I) -> Self {
        DensitySet::Explicit(elements.into_iter().collect())
    }

    /// Each integer of [lo, hi] independently with probability `density`,
    /// from a seeded ChaCha8 stream.
    pub fn random(density: f64, seed: u64, lo: i64, hi: i64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) || lo > hi {
            return Err(Error::InvalidGroup(format!(
                "bad random set: density {density}, window [{lo}, {hi}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(DensitySet::Explicit(
            (lo..=hi)
                .filter(|_| rng.gen_bool(density))
                .map(Element::int)
                .collect(),
        ))
    }

    pub fn contains(&self, group: &GroupUniverse, g: &Element) -> bool {
        match self {
            DensitySet::Residue {
                modulus,
                weights,
                classes,
            } => {
                let c = group.abelian_coords(g);
                let s: i64 = weights.iter().zip(&c).map(|(w, x)| w * x).sum();
                classes.contains(&s.rem_euclid(*modulus))
            }
            DensitySet::Explicit(set) => set.contains(g),
            DensitySet::Interval { lo, hi } => {
                g.coords().first().is_some_and(|x| lo <= x && x <= hi)
            }
            DensitySet::Intersection(parts) => parts.iter().all(|p| p.contains(group, g)),
            DensitySet::Predicate { member, .. } => member(g),
        }
    }

    pub fn description(&self) -> String {
        match self {
            DensitySet::Residue {
                modulus,
                weights,
                classes,
            } => {
                format!("residue(mod {modulus}, weights {weights:?}, classes {classes:?})")
            }
            DensitySet::Explicit(s) => format!("explicit({} elements)", s.len()),
            DensitySet::Interval { lo, hi } => format!("interval[{lo}, {hi}]"),
            DensitySet::Intersection(p) => {
                let parts: Vec<String> = p.iter().map(DensitySet::description).collect();
                parts.join(" & ")
            }
            DensitySet::Predicate { description, .. } => description.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityTrace {
    /// (n, |F_n ∩ Λ| / |F_n|).
    pub trace: Vec<(usize, Ratio)>,
    /// Maximum over the last `tail` ratios.
    pub estimate: Ratio,
}

pub fn upper_density(
    seq: &GroupSubsetSequence,
    lambda: &DensitySet,
    n_max: usize,
    tail: usize,
) -> Result<DensityTrace> {
    if n_max == 0 || tail == 0 || tail > n_max {
        return Err(Error::InvalidPolicy(format!(
            "need n_max ≥ tail ≥ 1, got n_max = {n_max}, tail = {tail}"
        )));
    }
    seq.check_index(n_max)?;
    let group = seq.group();
    let trace = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let f = seq.term(n)?;
            let hit = f.iter().filter(|g| lambda.contains(group, g)).count();
            Ok((n, rational(hit, f.len())))
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = trace[n_max - tail..]
        .iter()
        .map(|t| t.1.clone())
        .max()
        .expect("tail is nonempty");
    Ok(DensityTrace { trace, estimate })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApBounds {
    pub n_max: usize,
    /// Candidate starting points, searched in this order for each n.
    pub a_window: Vec<Element>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ApWitness {
    pub a: Element,
    pub n: usize,
    pub side: Side,
    /// b^{jn}a (left) or ab^{jn} (right) for j = 0..k.
    pub elements: Vec<Element>,
}

/// The progression {b^{jn}a} or {ab^{jn}}, j = 0..k, built from fresh powers.
pub fn progression(
    group: &GroupUniverse,
    a: &Element,
    b: &Element,
    k: usize,
    n: usize,
    side: Side,
) -> Vec<Element> {
    (0..k)
        .map(|j| {
            let p = group.pow(b, (j * n) as i64);
            match side {
                Side::Left => group.multiply(&p, a),
                Side::Right => group.multiply(a, &p),
            }
        })
        .collect()
}

/// Rechecks a witness element by element: k distinct elements, all in Λ.
pub fn verify_progression(
    group: &GroupUniverse,
    lambda: &DensitySet,
    b: &Element,
    k: usize,
    witness: &ApWitness,
) -> bool {
    let elems = progression(group, &witness.a, b, k, witness.n, witness.side);
    let distinct: BTreeSet<&Element> = elems.iter().collect();
    elems == witness.elements
        && distinct.len() == k
        && elems.iter().all(|g| lambda.contains(group, g))
}

#[allow(clippy::too_many_arguments)]
fn ap_candidates(
    group: &GroupUniverse,
    lambda: &DensitySet,
    b: &Element,
    k: usize,
    n: usize,
    side: Side,
    window: &[Element],
    first_only: bool,
) -> Vec<ApWitness> {
    let step = group.pow(b, n as i64);
    // b^n of finite order dividing some j < k repeats elements
    let mut p = group.identity();
    for _ in 1..k {
        p = group.multiply(&p, &step);
        if p == group.identity() {
            return Vec::new();
        }
    }
    let mut found = Vec::new();
    for a in window {
        let mut elements = Vec::with_capacity(k);
        let mut cur = a.clone();
        let mut ok = true;
        for j in 0..k {
            if j > 0 {
                cur = match side {
                    Side::Left => group.multiply(&step, &cur),
                    Side::Right => group.multiply(&cur, &step),
                };
            }
            if !lambda.contains(group, &cur) {
                ok = false;
                break;
            }
            elements.push(cur.clone());
        }
        if ok {
            found.push(ApWitness {
                a: a.clone(),
                n,
                side,
                elements,
            });
            if first_only {
                break;
            }
        }
    }
    found
}

fn check_ap_args(group: &GroupUniverse, b: &Element, k: usize, bounds: &ApBounds) -> Result<()> {
    group.check(b)?;
    for a in &bounds.a_window {
        group.check(a)?;
    }
    if k == 0 || bounds.n_max == 0 {
        return Err(Error::InvalidPolicy("need k ≥ 1 and n_max ≥ 1".into()));
    }
    Ok(())
}

/// First (n, a) with n ascending, then a in window order, such that the k
/// elements b^{jn}a (j = 0..k) are distinct and lie in Λ. The witness is
/// re-verified from fresh powers before it is returned.
pub fn ap_search(
    group: &GroupUniverse,
    lambda: &DensitySet,
    b: &Element,
    k: usize,
    bounds: &ApBounds,
    side: Side,
) -> Result<ApWitness> {
    check_ap_args(group, b, k, bounds)?;
    let hit = (1..=bounds.n_max).into_par_iter().find_map_first(|n| {
        ap_candidates(group, lambda, b, k, n, side, &bounds.a_window, true)
            .into_iter()
            .next()
    });
    match hit {
        Some(w) if verify_progression(group, lambda, b, k, &w) => Ok(w),
        Some(w) => Err(Error::SearchExhausted(format!(
            "witness (a = {}, n = {}) failed re-verification",
            w.a, w.n
        ))),
        None => Err(Error::SearchExhausted(format!(
            "no progression of length {k} with step {b}^n, n ≤ {}, over {} starting points",
            bounds.n_max,
            bounds.a_window.len()
        ))),
    }
}

/// Every witness within the bounds, ordered by n then window order.
pub fn ap_search_all(
    group: &GroupUniverse,
    lambda: &DensitySet,
    b: &Element,
    k: usize,
    bounds: &ApBounds,
    side: Side,
) -> Result<Vec<ApWitness>> {
    check_ap_args(group, b, k, bounds)?;
    let all: Vec<ApWitness> = (1..=bounds.n_max)
        .into_par_iter()
        .flat_map_iter(|n| ap_candidates(group, lambda, b, k, n, side, &bounds.a_window, false))
        .collect();
    if all
        .iter()
        .any(|w| !verify_progression(group, lambda, b, k, w))
    {
        return Err(Error::SearchExhausted(
            "a witness failed re-verification".into(),
        ));
    }
    Ok(all)
}

/// A finite cylinder condition {ω : ω(s_i) = bit_i for all i}.
pub type Event = Vec<(Element, bool)>;

/// μ_n(event) = |{t ∈ F_n : 1_Λ(s_i t) = bit_i ∀i}| / |F_n|.
pub fn empirical_measure_eval(
    seq: &GroupSubsetSequence,
    lambda: &DensitySet,
    event: &Event,
    n: usize,
) -> Result<Ratio> {
    let group = seq.group();
    for (s, _) in event {
        group.check(s)?;
    }
    let f = seq.term(n)?;
    let hits = f
        .iter()
        .filter(|t| {
            event
                .iter()
                .all(|(s, bit)| lambda.contains(group, &group.multiply(s, t)) == *bit)
        })
        .count();
    Ok(rational(hits, f.len()))
}

/// The cylinder b⁻¹·A for A = `event`: conditions move from s to sb.
pub fn shift_event(group: &GroupUniverse, event: &Event, b: &Element) -> Event {
    event
        .iter()
        .map(|(s, bit)| (group.multiply(s, b), *bit))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceRow {
    pub n: usize,
    /// |μ_n(b⁻¹·A) − μ_n(A)|.
    pub difference: Ratio,
    /// C · |bF_n Δ F_n| / |F_n|.
    pub bound: Ratio,
}

#[derive(Clone, Debug)]
pub struct InvarianceTrend {
    pub constant: Ratio,
    pub rows: Vec<InvarianceRow>,
}

impl InvarianceTrend {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.difference <= r.bound)
    }
}

/// Tracks |μ_n(b⁻¹·A) − μ_n(A)| against C·(left fixing ratio of b) with C = 1:
/// the two counts differ only on bF_n Δ F_n, and by at most half of it.
pub fn verify_invariance_trend(
    seq: &GroupSubsetSequence,
    lambda: &DensitySet,
    b: &Element,
    event: &Event,
    policy: &FixPolicy,
) -> Result<InvarianceTrend> {
    policy.validate()?;
    seq.check_index(policy.n_max)?;
    let group = seq.group();
    group.check(b)?;
    let tail: Vec<Ratio> = policy
        .tail()
        .map(|n| fixing_ratio(seq, b, Side::Left, n))
        .collect::<Result<_>>()?;
    if judge(&tail, policy) != Verdict::Fixes {
        return Err(Error::WitnessNotFixing(b.to_string()));
    }
    let shifted = shift_event(group, event, b);
    let constant = Ratio::from_integer(BigInt::from(1));
    let rows = (1..=policy.n_max)
        .into_par_iter()
        .map(|n| {
            let a = empirical_measure_eval(seq, lambda, event, n)?;
            let s = empirical_measure_eval(seq, lambda, &shifted, n)?;
            let diff = if a > s { a - s } else { s - a };
            Ok(InvarianceRow {
                n,
                difference: diff,
                bound: &constant * fixing_ratio(seq, b, Side::Left, n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InvarianceTrend { constant, rows })
}

/// Fixing ratios of a ℤ or ℤ/m sequence recomputed on the dual fusion ring.
pub fn dual_sequence(
    seq: &GroupSubsetSequence,
    n_max: usize,
) -> Result<crate::calculus::SubsetSequence> {
    let group = seq.group();
    let ring = group
        .dual_ring()
        .ok_or_else(|| Error::InvalidGroup(format!("{group} has no built-in dual ring")))?;
    if !matches!(
        ring.kind(),
        RingKind::IntegerDual(_) | RingKind::CyclicDual(_)
    ) {
        return Err(Error::InvalidGroup(format!(
            "{group} has no built-in dual ring"
        )));
    }
    let sets = (1..=n_max)
        .map(|n| {
            Ok(seq
                .term(n)?
                .iter()
                .filter_map(|g| group.to_label(g))
                .collect())
        })
        .collect::<Result<Vec<Vec<IrrepLabel>>>>()?;
    crate::calculus::SubsetSequence::explicit(&ring, sets)
}
