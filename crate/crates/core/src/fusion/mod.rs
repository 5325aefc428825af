//! Fusion rings of compact quantum groups: irreducible classes, dimensions,
//! conjugation and tensor-product multiplicities.
//!
//! Infinite families are rule-generated and answer queries for any label
//! without enumerating the ring.

mod axioms;
mod decomposition;
pub mod json;
mod label;
mod table;

use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_traits::One;

pub use axioms::{verify_ring_axioms, AxiomCheckOptions, AxiomReport, AxiomViolation};
pub use decomposition::Decomposition;
pub use label::IrrepLabel;
pub use table::{ExplicitTable, TableEntry};

use crate::error::{Error, Result};

/// Dimension sequence d₀ = 1, d₁ = N, d_{k+1} = N·d_k − d_{k−1}, grown on demand.
#[derive(Debug)]
struct DimRecursion {
    n: u64,
    dims: RwLock<Vec<BigUint>>,
}

impl DimRecursion {
    fn new(n: u64) -> Self {
        Self {
            n,
            dims: RwLock::new(vec![BigUint::one(), BigUint::from(n)]),
        }
    }

    fn get(&self, k: usize) -> BigUint {
        if let Some(d) = self.dims.read().expect("dimension cache poisoned").get(k) {
            return d.clone();
        }
        let mut dims = self.dims.write().expect("dimension cache poisoned");
        while dims.len() <= k {
            let len = dims.len();
            let next = &dims[len - 1] * self.n - &dims[len - 2];
            dims.push(next);
        }
        dims[k].clone()
    }
}

#[derive(Clone, Debug)]
enum Family {
    Explicit(Arc<ExplicitTable>),
    CyclicDual(u64),
    IntegerDual(usize),
    Su2,
    FreeOrthogonal(Arc<DimRecursion>),
    Product(Vec<FusionRing>),
}

/// Descriptive tag for a ring's family, without its data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RingKind {
    ExplicitTable,
    CyclicDual(u64),
    IntegerDual(usize),
    Su2,
    FreeOrthogonal(u64),
    Product(Vec<RingKind>),
}

impl fmt::Display for RingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingKind::ExplicitTable => write!(f, "explicit"),
            RingKind::CyclicDual(m) => write!(f, "cyclic_dual({m})"),
            RingKind::IntegerDual(d) => write!(f, "integer_dual({d})"),
            RingKind::Su2 => write!(f, "su2"),
            RingKind::FreeOrthogonal(n) => write!(f, "free_orthogonal({n})"),
            RingKind::Product(fs) => {
                write!(f, "product(")?;
                for (i, k) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Fusion ring of a compact quantum group. Immutable and cheap to clone.
#[derive(Clone, Debug)]
pub struct FusionRing {
    family: Family,
}

impl FusionRing {
    /// Dual of ℤ/m: labels `0..m`, fusion by addition mod m.
    pub fn cyclic_dual(m: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidRing("cyclic dual needs m ≥ 1".into()));
        }
        Ok(Self {
            family: Family::CyclicDual(m),
        })
    }

    /// Dual of the torus 𝕋^d, i.e. the group ℤ^d. Rank 1 uses integer labels,
    /// higher ranks use integer tuples.
    pub fn integer_dual(rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRing("integer dual needs rank ≥ 1".into()));
        }
        Ok(Self {
            family: Family::IntegerDual(rank),
        })
    }

    /// SU(2) with labels equal to twice the spin.
    pub fn su2() -> Self {
        Self {
            family: Family::Su2,
        }
    }

    /// Free orthogonal quantum group O_N⁺: SU(2) fusion rules with the
    /// N-recursion dimensions.
    pub fn free_orthogonal(n: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidRing("free orthogonal needs N ≥ 2".into()));
        }
        Ok(Self {
            family: Family::FreeOrthogonal(Arc::new(DimRecursion::new(n))),
        })
    }

    pub fn product(factors: Vec<FusionRing>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidRing(
                "product needs at least one factor".into(),
            ));
        }
        Ok(Self {
            family: Family::Product(factors),
        })
    }

    pub fn explicit(table: ExplicitTable) -> Self {
        Self {
            family: Family::Explicit(Arc::new(table)),
        }
    }

    pub fn kind(&self) -> RingKind {
        match &self.family {
            Family::Explicit(_) => RingKind::ExplicitTable,
            Family::CyclicDual(m) => RingKind::CyclicDual(*m),
            Family::IntegerDual(d) => RingKind::IntegerDual(*d),
            Family::Su2 => RingKind::Su2,
            Family::FreeOrthogonal(rec) => RingKind::FreeOrthogonal(rec.n),
            Family::Product(fs) => RingKind::Product(fs.iter().map(FusionRing::kind).collect()),
        }
    }

    pub fn explicit_table(&self) -> Option<&ExplicitTable> {
        match &self.family {
            Family::Explicit(t) => Some(t),
            _ => None,
        }
    }

    /// True when every label has dimension 1, i.e. the ring is the group
    /// algebra of a discrete group.
    pub fn is_group_dual(&self) -> bool {
        match &self.family {
            Family::CyclicDual(_) | Family::IntegerDual(_) => true,
            Family::Product(fs) => fs.iter().all(FusionRing::is_group_dual),
            _ => false,
        }
    }

    pub fn trivial(&self) -> IrrepLabel {
        match &self.family {
            Family::Explicit(t) => t.trivial().clone(),
            Family::CyclicDual(_) | Family::Su2 | Family::FreeOrthogonal(_) => IrrepLabel::Int(0),
            Family::IntegerDual(1) => IrrepLabel::Int(0),
            Family::IntegerDual(d) => IrrepLabel::tuple(std::iter::repeat_n(0, *d)),
            Family::Product(fs) => IrrepLabel::Seq(fs.iter().map(FusionRing::trivial).collect()),
        }
    }

    pub fn contains(&self, label: &IrrepLabel) -> bool {
        match (&self.family, label) {
            (Family::Explicit(t), l) => t.contains(l),
            (Family::CyclicDual(m), IrrepLabel::Int(k)) => *k >= 0 && (*k as u64) < *m,
            (Family::IntegerDual(1), IrrepLabel::Int(_)) => true,
            (Family::IntegerDual(d), IrrepLabel::Seq(v)) if *d >= 2 => {
                v.len() == *d && v.iter().all(|x| x.as_int().is_some())
            }
            (Family::Su2 | Family::FreeOrthogonal(_), IrrepLabel::Int(k)) => *k >= 0,
            (Family::Product(fs), IrrepLabel::Seq(v)) => {
                v.len() == fs.len() && fs.iter().zip(v).all(|(f, x)| f.contains(x))
            }
            _ => false,
        }
    }

    pub fn check(&self, label: &IrrepLabel) -> Result<()> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(Error::UnknownLabel(label.clone()))
        }
    }

    pub fn dim(&self, label: &IrrepLabel) -> Result<BigUint> {
        self.check(label)?;
        Ok(match (&self.family, label) {
            (Family::Explicit(t), l) => t.dim(l).cloned().expect("checked label"),
            (Family::CyclicDual(_) | Family::IntegerDual(_), _) => BigUint::one(),
            (Family::Su2, IrrepLabel::Int(k)) => BigUint::from(*k as u64 + 1),
            (Family::FreeOrthogonal(rec), IrrepLabel::Int(k)) => rec.get(*k as usize),
            (Family::Product(fs), IrrepLabel::Seq(v)) => {
                let mut d = BigUint::one();
                for (f, x) in fs.iter().zip(v) {
                    d *= f.dim(x)?;
                }
                d
            }
            _ => unreachable!("label shape validated by check"),
        })
    }

    pub fn conjugate(&self, label: &IrrepLabel) -> Result<IrrepLabel> {
        self.check(label)?;
        Ok(match (&self.family, label) {
            (Family::Explicit(t), l) => t.conj(l).cloned().expect("checked label"),
            (Family::CyclicDual(m), IrrepLabel::Int(k)) => {
                IrrepLabel::Int(((*m as i64) - k).rem_euclid(*m as i64))
            }
            (Family::IntegerDual(_), l) => negate(l),
            (Family::Su2 | Family::FreeOrthogonal(_), l) => l.clone(),
            (Family::Product(fs), IrrepLabel::Seq(v)) => IrrepLabel::Seq(
                fs.iter()
                    .zip(v)
                    .map(|(f, x)| f.conjugate(x))
                    .collect::<Result<_>>()?,
            ),
            _ => unreachable!("label shape validated by check"),
        })
    }

    /// Decomposition of the tensor product α⊗β into irreducibles.
    pub fn decompose(&self, a: &IrrepLabel, b: &IrrepLabel) -> Result<Decomposition> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (&self.family, a, b) {
            (Family::Explicit(t), a, b) => t.pair(a, b)?.clone(),
            (Family::CyclicDual(m), IrrepLabel::Int(x), IrrepLabel::Int(y)) => {
                Decomposition::single(IrrepLabel::Int((x + y).rem_euclid(*m as i64)))
            }
            (Family::IntegerDual(_), a, b) => Decomposition::single(add(a, b)),
            (Family::Su2 | Family::FreeOrthogonal(_), IrrepLabel::Int(x), IrrepLabel::Int(y)) => {
                Decomposition::from_pairs(
                    ((x - y).abs()..=x + y)
                        .step_by(2)
                        .map(|c| (IrrepLabel::Int(c), 1)),
                )
            }
            (Family::Product(fs), IrrepLabel::Seq(u), IrrepLabel::Seq(v)) => {
                let mut partial: Vec<(Vec<IrrepLabel>, u64)> = vec![(Vec::new(), 1)];
                for ((f, x), y) in fs.iter().zip(u).zip(v) {
                    let d = f.decompose(x, y)?;
                    partial = partial
                        .into_iter()
                        .flat_map(|(prefix, m)| {
                            d.entries().iter().map(move |(c, n)| {
                                let mut next = prefix.clone();
                                next.push(c.clone());
                                (next, m * n)
                            })
                        })
                        .collect();
                }
                Decomposition::from_pairs(partial.into_iter().map(|(v, m)| (IrrepLabel::Seq(v), m)))
            }
            _ => unreachable!("label shape validated by check"),
        })
    }

    /// N_{α,β}^γ evaluated directly from the family's closed form, not
    /// through [`decompose`](Self::decompose).
    pub fn multiplicity(&self, a: &IrrepLabel, b: &IrrepLabel, c: &IrrepLabel) -> Result<u64> {
        self.check(a)?;
        self.check(b)?;
        self.check(c)?;
        Ok(match (&self.family, a, b, c) {
            (Family::Explicit(t), a, b, c) => t.pair(a, b)?.multiplicity(c),
            (Family::CyclicDual(m), IrrepLabel::Int(x), IrrepLabel::Int(y), IrrepLabel::Int(z)) => {
                u64::from((x + y - z).rem_euclid(*m as i64) == 0)
            }
            (Family::IntegerDual(_), a, b, c) => u64::from(add(a, b) == *c),
            (
                Family::Su2 | Family::FreeOrthogonal(_),
                IrrepLabel::Int(x),
                IrrepLabel::Int(y),
                IrrepLabel::Int(z),
            ) => u64::from((x - y).abs() <= *z && *z <= x + y && (x + y + z) % 2 == 0),
            (Family::Product(fs), IrrepLabel::Seq(u), IrrepLabel::Seq(v), IrrepLabel::Seq(w)) => {
                let mut n = 1;
                for (i, f) in fs.iter().enumerate() {
                    n *= f.multiplicity(&u[i], &v[i], &w[i])?;
                    if n == 0 {
                        break;
                    }
                }
                n
            }
            _ => unreachable!("label shape validated by check"),
        })
    }

    /// Number of labels, or `None` for infinite rings.
    pub fn size(&self) -> Option<usize> {
        match &self.family {
            Family::Explicit(t) => Some(t.labels().len()),
            Family::CyclicDual(m) => Some(*m as usize),
            Family::Product(fs) => fs.iter().map(FusionRing::size).product(),
            _ => None,
        }
    }

    /// The first `count` labels in the ring's canonical order (all labels if
    /// the ring is smaller). Always starts with the trivial label for the
    /// built-in families.
    pub fn enumerate(&self, count: usize) -> Vec<IrrepLabel> {
        match &self.family {
            Family::Explicit(t) => {
                let mut v = t.labels().to_vec();
                v.sort();
                v.truncate(count);
                v
            }
            Family::CyclicDual(m) => (0..(*m as i64)).take(count).map(IrrepLabel::Int).collect(),
            Family::Su2 | Family::FreeOrthogonal(_) => {
                (0..count as i64).map(IrrepLabel::Int).collect()
            }
            Family::IntegerDual(d) => lattice_points(*d, count)
                .into_iter()
                .map(|p| {
                    if *d == 1 {
                        IrrepLabel::Int(p[0])
                    } else {
                        IrrepLabel::tuple(p)
                    }
                })
                .collect(),
            Family::Product(fs) => product_enumeration(fs, count),
        }
    }

    /// Left fold of the tensor product over `labels`, with multiplicities combined.
    pub fn constituents_of_product(&self, labels: &[IrrepLabel]) -> Result<Decomposition> {
        let (first, rest) = labels
            .split_first()
            .ok_or_else(|| Error::InvalidRing("product of an empty list of labels".into()))?;
        self.check(first)?;
        let mut acc = Decomposition::single(first.clone());
        for l in rest {
            acc = self.fuse(&acc, l)?;
        }
        Ok(acc)
    }

    /// (Σ m_μ μ) ⊗ β.
    pub fn fuse(&self, lhs: &Decomposition, rhs: &IrrepLabel) -> Result<Decomposition> {
        let mut pairs = Vec::new();
        for (mu, m) in lhs.entries() {
            for (g, n) in self.decompose(mu, rhs)?.entries() {
                pairs.push((g.clone(), m * n));
            }
        }
        Ok(Decomposition::from_pairs(pairs))
    }

    /// (Σ m_μ μ) ⊗ (Σ n_ν ν).
    pub fn fuse_decompositions(
        &self,
        lhs: &Decomposition,
        rhs: &Decomposition,
    ) -> Result<Decomposition> {
        let mut pairs = Vec::new();
        for (nu, n) in rhs.entries() {
            for (g, m) in self.fuse(lhs, nu)?.entries() {
                pairs.push((g.clone(), m * n));
            }
        }
        Ok(Decomposition::from_pairs(pairs))
    }

    /// Σ m_γ d_γ.
    pub fn total_dim(&self, d: &Decomposition) -> Result<BigUint> {
        let mut total = BigUint::default();
        for (l, m) in d.entries() {
            total += self.dim(l)? * *m;
        }
        Ok(total)
    }
}

fn negate(l: &IrrepLabel) -> IrrepLabel {
    match l {
        IrrepLabel::Int(k) => IrrepLabel::Int(-k),
        IrrepLabel::Seq(v) => IrrepLabel::Seq(v.iter().map(negate).collect()),
    }
}

fn add(a: &IrrepLabel, b: &IrrepLabel) -> IrrepLabel {
    match (a, b) {
        (IrrepLabel::Int(x), IrrepLabel::Int(y)) => IrrepLabel::Int(x + y),
        (IrrepLabel::Seq(u), IrrepLabel::Seq(v)) => {
            IrrepLabel::Seq(u.iter().zip(v).map(|(x, y)| add(x, y)).collect())
        }
        _ => unreachable!("mismatched lattice labels"),
    }
}

/// Points of ℤ^d ordered by sup-norm radius, then lexicographically.
pub(crate) fn lattice_points(d: usize, count: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(count);
    let mut r: i64 = 0;
    while out.len() < count {
        let mut shell = Vec::new();
        let mut p = vec![-r; d];
        loop {
            if p.iter().any(|x| x.abs() == r) {
                shell.push(p.clone());
            }
            if !odometer_step(&mut p, r) {
                break;
            }
        }
        out.extend(shell.into_iter().take(count - out.len()));
        r += 1;
    }
    out
}

/// Advances `p` through [-r, r]^d in lexicographic order; false when done.
fn odometer_step(p: &mut [i64], r: i64) -> bool {
    for x in p.iter_mut().rev() {
        if *x < r {
            *x += 1;
            return true;
        }
        *x = -r;
    }
    false
}

fn product_enumeration(fs: &[FusionRing], count: usize) -> Vec<IrrepLabel> {
    if count == 0 {
        return Vec::new();
    }
    // enough labels per factor that the grid has at least `count` points
    let mut per = 1usize;
    loop {
        let total: Option<usize> = fs
            .iter()
            .map(|f| f.size().map_or(per, |s| s.min(per)))
            .try_fold(1usize, |acc, s| acc.checked_mul(s));
        let saturated = fs.iter().all(|f| f.size().is_some_and(|s| s <= per));
        if total.is_none_or(|t| t >= count) || saturated {
            break;
        }
        per += 1;
    }
    let lists: Vec<Vec<IrrepLabel>> = fs.iter().map(|f| f.enumerate(per)).collect();
    let mut idx: Vec<Vec<usize>> = vec![Vec::new()];
    for l in &lists {
        idx = idx
            .into_iter()
            .flat_map(|p| {
                (0..l.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    idx.sort_by_key(|p| (p.iter().copied().max().unwrap_or(0), p.clone()));
    idx.into_iter()
        .take(count)
        .map(|p| IrrepLabel::Seq(p.iter().zip(&lists).map(|(i, l)| l[*i].clone()).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(k: i64) -> IrrepLabel {
        IrrepLabel::Int(k)
    }

    fn pairs(d: &Decomposition) -> Vec<(IrrepLabel, u64)> {
        d.entries().to_vec()
    }

    #[test]
    fn su2_clebsch_gordan_matches_brute_force() {
        let ring = FusionRing::su2();
        for a in 0..8i64 {
            for b in 0..8i64 {
                // brute force over c ≤ a+b with the triangle and parity rule
                let expected: Vec<(IrrepLabel, u64)> = (0..=a + b)
                    .filter(|c| (a - b).abs() <= *c && (a + b + c) % 2 == 0)
                    .map(|c| (i(c), 1))
                    .collect();
                assert_eq!(pairs(&ring.decompose(&i(a), &i(b)).unwrap()), expected);
            }
        }
        assert_eq!(
            pairs(&ring.decompose(&i(2), &i(2)).unwrap()),
            vec![(i(0), 1), (i(2), 1), (i(4), 1)]
        );
    }

    #[test]
    fn unit_law_on_every_family() {
        let rings = [
            FusionRing::su2(),
            FusionRing::cyclic_dual(5).unwrap(),
            FusionRing::integer_dual(2).unwrap(),
            FusionRing::free_orthogonal(3).unwrap(),
        ];
        for ring in rings {
            let e = ring.trivial();
            for a in ring.enumerate(10) {
                assert_eq!(
                    pairs(&ring.decompose(&a, &e).unwrap()),
                    vec![(a.clone(), 1)]
                );
            }
        }
    }

    #[test]
    fn integer_dual_fuses_by_addition() {
        let ring = FusionRing::integer_dual(1).unwrap();
        assert_eq!(
            pairs(&ring.decompose(&i(3), &i(-5)).unwrap()),
            vec![(i(-2), 1)]
        );
    }

    #[test]
    fn dimensions() {
        let su2 = FusionRing::su2();
        assert_eq!(su2.dim(&i(4)).unwrap(), BigUint::from(5u32));
        let o3 = FusionRing::free_orthogonal(3).unwrap();
        let dims: Vec<BigUint> = (0..5).map(|k| o3.dim(&i(k)).unwrap()).collect();
        let expected: Vec<BigUint> = [1u32, 3, 8, 21, 55].iter().map(|&d| d.into()).collect();
        assert_eq!(dims, expected);
        for ring in [su2, o3, FusionRing::cyclic_dual(7).unwrap()] {
            assert_eq!(ring.dim(&ring.trivial()).unwrap(), BigUint::one());
        }
    }

    #[test]
    fn free_orthogonal_two_has_su2_dimensions() {
        let o2 = FusionRing::free_orthogonal(2).unwrap();
        for k in 0..=30 {
            assert_eq!(o2.dim(&i(k)).unwrap(), BigUint::from(k as u64 + 1));
        }
    }

    #[test]
    fn conjugates() {
        let c5 = FusionRing::cyclic_dual(5).unwrap();
        assert_eq!(c5.conjugate(&i(2)).unwrap(), i(3));
        assert_eq!(c5.conjugate(&i(0)).unwrap(), i(0));

        let su2 = FusionRing::su2();
        assert_eq!(su2.conjugate(&i(6)).unwrap(), i(6));
        // self-conjugacy witnessed by the trivial constituent of 6⊗6
        assert_eq!(su2.decompose(&i(6), &i(6)).unwrap().multiplicity(&i(0)), 1);

        let z2 = FusionRing::integer_dual(2).unwrap();
        assert_eq!(
            z2.conjugate(&IrrepLabel::tuple([1, -4])).unwrap(),
            IrrepLabel::tuple([-1, 4])
        );
    }

    #[test]
    fn unknown_labels_are_rejected() {
        let su2 = FusionRing::su2();
        assert!(matches!(su2.dim(&i(-1)), Err(Error::UnknownLabel(_))));
        let c3 = FusionRing::cyclic_dual(3).unwrap();
        assert!(matches!(c3.conjugate(&i(3)), Err(Error::UnknownLabel(_))));
        let z2 = FusionRing::integer_dual(2).unwrap();
        assert!(matches!(
            z2.decompose(&i(1), &i(1)),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn iterated_products() {
        let su2 = FusionRing::su2();
        let d = su2.constituents_of_product(&[i(1), i(1), i(1)]).unwrap();
        assert_eq!(pairs(&d), vec![(i(1), 2), (i(3), 1)]);

        let e = su2.trivial();
        let d = su2
            .constituents_of_product(&[e.clone(), e.clone()])
            .unwrap();
        assert_eq!(pairs(&d), vec![(e, 1)]);

        let c4 = FusionRing::cyclic_dual(4).unwrap();
        let d = c4
            .constituents_of_product(&[i(1), i(1), i(1), i(1)])
            .unwrap();
        assert_eq!(pairs(&d), vec![(i(0), 1)]);

        assert!(su2.constituents_of_product(&[]).is_err());
    }

    #[test]
    fn product_ring_multiplies_factor_data() {
        let ring =
            FusionRing::product(vec![FusionRing::cyclic_dual(2).unwrap(), FusionRing::su2()])
                .unwrap();
        let a = IrrepLabel::Seq(vec![i(1), i(1)]);
        let d = ring.decompose(&a, &a).unwrap();
        assert_eq!(
            pairs(&d),
            vec![
                (IrrepLabel::Seq(vec![i(0), i(0)]), 1),
                (IrrepLabel::Seq(vec![i(0), i(2)]), 1)
            ]
        );
        assert_eq!(ring.dim(&a).unwrap(), BigUint::from(2u32));
        assert_eq!(ring.enumerate(100).len(), 100);
        assert_eq!(ring.enumerate(1), vec![ring.trivial()]);
    }

    #[test]
    fn lattice_enumeration_is_by_radius() {
        let pts = lattice_points(1, 5);
        assert_eq!(pts, vec![vec![0], vec![-1], vec![1], vec![-2], vec![2]]);
        let pts = lattice_points(2, 9);
        assert_eq!(pts[0], vec![0, 0]);
        assert!(pts[1..]
            .iter()
            .all(|p| p.iter().map(|x| x.abs()).max() == Some(1)));
    }
}
