//! The subset of labels fixing a sequence, and the inequalities that make it
//! closed under conjugation and under taking constituents of products.
//!
//! Membership is only ever certified under a [`FixPolicy`]; every verdict keeps
//! its ratio trace.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::calculus::{
    boundary, boundary_rel_rep, fixes, FixPolicy, FixReport, SubsetSequence, Verdict,
};
use crate::error::{Error, Result};
use crate::fusion::{Decomposition, FusionRing, IrrepLabel};

#[derive(Clone, Debug)]
pub struct StabilizerSet {
    pub members: BTreeSet<IrrepLabel>,
    /// Verdict and tail trace for every classified label, members or not.
    pub reports: BTreeMap<IrrepLabel, FixReport>,
    pub policy: FixPolicy,
}

impl StabilizerSet {
    pub fn contains(&self, label: &IrrepLabel) -> bool {
        self.members.contains(label)
    }

    pub fn verdict(&self, label: &IrrepLabel) -> Option<Verdict> {
        self.reports.get(label).map(|r| r.verdict)
    }

    pub fn labels_with(&self, verdict: Verdict) -> BTreeSet<IrrepLabel> {
        self.reports
            .iter()
            .filter(|(_, r)| r.verdict == verdict)
            .map(|(l, _)| l.clone())
            .collect()
    }
}

/// Classifies every label of `window` (and the trivial label) under `policy`.
pub fn classify_window(
    seq: &SubsetSequence,
    window: &[IrrepLabel],
    policy: &FixPolicy,
) -> Result<StabilizerSet> {
    policy.validate()?;
    let mut labels: BTreeSet<IrrepLabel> = window.iter().cloned().collect();
    labels.insert(seq.ring().trivial());
    let reports = labels
        .into_par_iter()
        .map(|l| fixes(seq, &l, policy).map(|r| (l, r)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let members = reports
        .iter()
        .filter(|(_, r)| r.verdict == Verdict::Fixes)
        .map(|(l, _)| l.clone())
        .collect();
    Ok(StabilizerSet {
        members,
        reports,
        policy: *policy,
    })
}

/// One exact comparison `lhs ≤ rhs` at sequence index `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InequalityRow {
    pub n: usize,
    pub lhs: BigUint,
    pub rhs: BigUint,
}

impl InequalityRow {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Clone, Debug, Default)]
pub struct InequalityReport {
    pub rows: Vec<InequalityRow>,
}

impl InequalityReport {
    pub fn violations(&self) -> impl Iterator<Item = &InequalityRow> + '_ {
        self.rows.iter().filter(|r| !r.holds())
    }

    pub fn holds(&self) -> bool {
        self.rows.iter().all(InequalityRow::holds)
    }
}

/// |∂_γ̄(F_n)|_w ≤ d_γ² · |∂_γ(F_n)|_w for every n in `range`.
pub fn check_conjugate_closure(
    seq: &SubsetSequence,
    gamma: &IrrepLabel,
    range: std::ops::RangeInclusive<usize>,
) -> Result<InequalityReport> {
    let ring = seq.ring();
    let conj = ring.conjugate(gamma)?;
    let d = ring.dim(gamma)?;
    let d2 = &d * &d;
    let rows = range
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let f = seq.term(n)?;
            let lhs = boundary(&f, std::slice::from_ref(&conj))?.weighted_total();
            let rhs = &d2 * boundary(&f, std::slice::from_ref(gamma))?.weighted_total();
            Ok(InequalityRow { n, lhs, rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport { rows })
}

/// |∂_{γ₁γ₂}(F_n)|_w ≤ max{d_{γ₁}², d_{γ₂}²} · (|∂_{γ₁}(F_n)|_w + |∂_{γ₂}(F_n)|_w),
/// with ∂_{γ₁γ₂} taken relative to the constituents of γ₁⊗γ₂.
pub fn check_fusion_closure(
    seq: &SubsetSequence,
    g1: &IrrepLabel,
    g2: &IrrepLabel,
    range: std::ops::RangeInclusive<usize>,
) -> Result<InequalityReport> {
    let ring = seq.ring();
    let product = ring.decompose(g1, g2)?;
    let d1 = ring.dim(g1)?;
    let d2 = ring.dim(g2)?;
    let factor = (&d1 * &d1).max(&d2 * &d2);
    let rows = range
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let f = seq.term(n)?;
            let lhs = boundary_rel_rep(&f, &product)?.weighted_total();
            let b1 = boundary(&f, std::slice::from_ref(g1))?.weighted_total();
            let b2 = boundary(&f, std::slice::from_ref(g2))?.weighted_total();
            Ok(InequalityRow {
                n,
                lhs,
                rhs: &factor * (b1 + b2),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InequalityReport { rows })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplicityBoundReport {
    /// Σ d_β² over every β with N_{α,γ}^β > 0.
    pub forward_sum: BigUint,
    /// d_α² d_γ².
    pub forward_bound: BigUint,
    /// Σ d_x² over every x with N_{x,γ}^α > 0 (the dual sum with α in the
    /// role of β).
    pub dual_sum: BigUint,
    /// d_α² d_γ².
    pub dual_bound: BigUint,
}

impl MultiplicityBoundReport {
    pub fn holds(&self) -> bool {
        self.forward_sum <= self.forward_bound && self.dual_sum <= self.dual_bound
    }
}

/// Both multiplicity inequalities, summed over all constituents rather than
/// only those in a stabilizer, which makes the check stronger.
pub fn check_multiplicity_bounds(
    ring: &FusionRing,
    alpha: &IrrepLabel,
    gamma: &IrrepLabel,
) -> Result<MultiplicityBoundReport> {
    let sq = |d: BigUint| &d * &d;
    let bound = sq(ring.dim(alpha)?) * sq(ring.dim(gamma)?);
    let mut forward_sum = BigUint::default();
    for b in ring.decompose(alpha, gamma)?.labels() {
        forward_sum += sq(ring.dim(b)?);
    }
    // N_{x,γ}^α = N_{α,γ̄}^x
    let mut dual_sum = BigUint::default();
    for x in ring.decompose(alpha, &ring.conjugate(gamma)?)?.labels() {
        dual_sum += sq(ring.dim(x)?);
    }
    Ok(MultiplicityBoundReport {
        forward_sum,
        forward_bound: bound.clone(),
        dual_sum,
        dual_bound: bound,
    })
}

#[derive(Clone, Debug)]
pub struct ClosureReport {
    /// Generated labels that re-verified as `Fixes`.
    pub members: BTreeSet<IrrepLabel>,
    /// Labels first produced at the last depth; their products were not explored.
    pub frontier: BTreeSet<IrrepLabel>,
    /// Generated labels whose re-verification did not return `Fixes`: the
    /// policy is too loose for the generated range.
    pub anomalies: Vec<FixReport>,
    pub reports: BTreeMap<IrrepLabel, FixReport>,
    pub depth: usize,
}

/// Closes `seeds` under conjugation and constituents of products with the
/// seeds and their conjugates, `depth` times, re-verifying every label.
///
/// Depth 0 is the seeds together with the trivial label.
pub fn closure_generate(
    seq: &SubsetSequence,
    seeds: &[IrrepLabel],
    policy: &FixPolicy,
    depth: usize,
) -> Result<ClosureReport> {
    policy.validate()?;
    let ring = seq.ring();
    let mut reports = BTreeMap::new();
    for s in seeds {
        let r = fixes(seq, s, policy)?;
        if r.verdict != Verdict::Fixes {
            return Err(Error::WitnessNotInStabilizer(s.clone()));
        }
        reports.insert(s.clone(), r);
    }
    let mut generators: BTreeSet<IrrepLabel> = seeds.iter().cloned().collect();
    for s in seeds {
        generators.insert(ring.conjugate(s)?);
    }

    let mut members: BTreeSet<IrrepLabel> = seeds.iter().cloned().collect();
    let e = ring.trivial();
    if !members.contains(&e) {
        reports.insert(e.clone(), fixes(seq, &e, policy)?);
        members.insert(e);
    }
    let mut anomalies = Vec::new();
    let mut frontier: BTreeSet<IrrepLabel> = members.clone();

    for _ in 0..depth {
        let mut produced = BTreeSet::new();
        for m in &members {
            produced.insert(ring.conjugate(m)?);
            for g in &generators {
                produced.extend(ring.decompose(m, g)?.labels().cloned());
            }
        }
        let fresh: Vec<IrrepLabel> = produced
            .into_iter()
            .filter(|l| !members.contains(l) && !reports.contains_key(l))
            .collect();
        let checked = fresh
            .into_par_iter()
            .map(|l| fixes(seq, &l, policy).map(|r| (l, r)))
            .collect::<Result<Vec<_>>>()?;
        frontier.clear();
        for (l, r) in checked {
            if r.verdict == Verdict::Fixes {
                members.insert(l.clone());
                frontier.insert(l.clone());
            } else {
                anomalies.push(r.clone());
            }
            reports.insert(l, r);
        }
    }
    Ok(ClosureReport {
        members,
        frontier,
        anomalies,
        reports,
        depth,
    })
}

#[derive(Clone, Debug)]
pub struct ProbeStep {
    pub j: usize,
    /// Constituents of α^{jn} ⊗ β.
    pub constituents: Decomposition,
    pub contained: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeFinding {
    pub alpha: IrrepLabel,
    pub beta: IrrepLabel,
    pub n: usize,
    pub steps: Vec<ProbeStep>,
}

#[derive(Clone, Debug)]
pub struct ProbeBounds {
    /// Candidate α; only those in the stabilizer are searched.
    pub alphas: Vec<IrrepLabel>,
    pub betas: Vec<IrrepLabel>,
    pub n_max: usize,
}

#[derive(Clone, Debug)]
pub struct ProbeFindings {
    pub k: usize,
    pub findings: Vec<ProbeFinding>,
    pub candidates_searched: usize,
}

impl ProbeFindings {
    /// Findings with α different from the trivial label.
    pub fn nontrivial<'a>(
        &'a self,
        ring: &FusionRing,
    ) -> impl Iterator<Item = &'a ProbeFinding> + 'a {
        let e = ring.trivial();
        self.findings.iter().filter(move |f| f.alpha != e)
    }
}

/// Searches (α, β, n) with α in the stabilizer such that every constituent of
/// α^{jn}⊗β lies in Λ for 0 ≤ j < k. Each k is searched on its own, so α may
/// depend on k. An experimental probe: exhaustion proves nothing.
pub fn progression_probe(
    stabilizer: &StabilizerSet,
    ring: &FusionRing,
    lambda: &(dyn Fn(&IrrepLabel) -> bool + Sync),
    k: usize,
    bounds: &ProbeBounds,
) -> Result<ProbeFindings> {
    if k == 0 {
        return Err(Error::InvalidPolicy(
            "progression length k must be ≥ 1".into(),
        ));
    }
    let alphas: Vec<&IrrepLabel> = bounds
        .alphas
        .iter()
        .filter(|a| stabilizer.contains(a))
        .collect();
    let mut candidates = Vec::new();
    for a in &alphas {
        for b in &bounds.betas {
            for n in 1..=bounds.n_max {
                candidates.push(((*a).clone(), b.clone(), n));
            }
        }
    }
    let searched = candidates.len();
    let findings: Vec<ProbeFinding> = candidates
        .into_par_iter()
        .map(|(alpha, beta, n)| probe_one(ring, lambda, k, alpha, beta, n))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if findings.is_empty() {
        return Err(Error::SearchExhausted(format!(
            "no (α, β, n) with k = {k} among {} stabilizer α, {} β, n ≤ {}",
            alphas.len(),
            bounds.betas.len(),
            bounds.n_max
        )));
    }
    Ok(ProbeFindings {
        k,
        findings,
        candidates_searched: searched,
    })
}

fn probe_one(
    ring: &FusionRing,
    lambda: &(dyn Fn(&IrrepLabel) -> bool + Sync),
    k: usize,
    alpha: IrrepLabel,
    beta: IrrepLabel,
    n: usize,
) -> Result<Option<ProbeFinding>> {
    let mut current = Decomposition::single(beta.clone());
    let mut steps = Vec::with_capacity(k);
    for j in 0..k {
        if j > 0 {
            for _ in 0..n {
                current = ring.fuse(&current, &alpha)?;
            }
        }
        let contained = current.labels().all(lambda);
        steps.push(ProbeStep {
            j,
            constituents: current.clone(),
            contained,
        });
        if !contained {
            return Ok(None);
        }
    }
    Ok(Some(ProbeFinding {
        alpha,
        beta,
        n,
        steps,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Affine;

    fn i(k: i64) -> IrrepLabel {
        IrrepLabel::Int(k)
    }

    fn ints(v: &BTreeSet<IrrepLabel>) -> Vec<i64> {
        v.iter().map(|l| l.as_int().unwrap()).collect()
    }

    fn odd_intervals() -> SubsetSequence {
        let z = FusionRing::integer_dual(1).unwrap();
        SubsetSequence::intervals(&z, Affine::new(0, 1), Affine::new(2, 1), 2).unwrap()
    }

    #[test]
    fn odd_intervals_stabilize_even_labels() {
        let seq = odd_intervals();
        let window: Vec<_> = (-8..=8).map(i).collect();
        let policy = FixPolicy::new(200, 0.05, 10).unwrap();
        let st = classify_window(&seq, &window, &policy).unwrap();
        assert_eq!(
            ints(&st.members),
            (-8..=8).filter(|k| k % 2 == 0).collect::<Vec<_>>()
        );
        assert_eq!(
            ints(&st.labels_with(Verdict::DoesNotFix)),
            (-8..=8).filter(|k| k % 2 != 0).collect::<Vec<_>>()
        );
    }

    #[test]
    fn su2_intervals_fix_small_labels() {
        let su2 = FusionRing::su2();
        let seq = SubsetSequence::initial_segments(&su2).unwrap();
        // ratio for γ = 6 is ≈ 36/n
        let policy = FixPolicy::new(2000, 0.05, 5).unwrap();
        let window: Vec<_> = (0..=6).map(i).collect();
        let st = classify_window(&seq, &window, &policy).unwrap();
        assert_eq!(ints(&st.members), (0..=6).collect::<Vec<_>>());
    }

    #[test]
    fn free_orthogonal_intervals_fix_only_the_trivial_label() {
        let o3 = FusionRing::free_orthogonal(3).unwrap();
        let seq = SubsetSequence::initial_segments(&o3).unwrap();
        let policy = FixPolicy::new(20, 0.05, 5).unwrap();
        let window: Vec<_> = (0..=5).map(i).collect();
        let st = classify_window(&seq, &window, &policy).unwrap();
        assert_eq!(ints(&st.members), vec![0]);
        assert_eq!(
            ints(&st.labels_with(Verdict::DoesNotFix)),
            vec![1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn conjugate_closure_inequalities() {
        let c5 = FusionRing::cyclic_dual(5).unwrap();
        let sets = (1..=12)
            .map(|n| (0..=(n % 5) as i64).map(i).collect())
            .collect();
        let seq = SubsetSequence::explicit(&c5, sets).unwrap();
        let r = check_conjugate_closure(&seq, &i(1), 1..=12).unwrap();
        assert!(r.holds());
        assert_eq!(r.rows.len(), 12);

        let su2 = FusionRing::su2();
        let seq = SubsetSequence::initial_segments(&su2).unwrap();
        let r = check_conjugate_closure(&seq, &i(3), 1..=20).unwrap();
        for row in &r.rows {
            assert_eq!(&row.lhs * 16u32, row.rhs);
        }

        let z = FusionRing::integer_dual(1).unwrap();
        let seq = SubsetSequence::symmetric_intervals(&z).unwrap();
        let r = check_conjugate_closure(&seq, &i(3), 1..=20).unwrap();
        assert!(r.rows.iter().all(|row| row.lhs == row.rhs));
    }

    #[test]
    fn fusion_closure_inequalities() {
        let su2 = FusionRing::su2();
        let seq = SubsetSequence::initial_segments(&su2).unwrap();
        let r = check_fusion_closure(&seq, &i(1), &i(1), 10..=10).unwrap();
        let row = &r.rows[0];
        // ∂_{0,2}({0..10}) = {9, 10, 11, 12}; ∂_1 = {10, 11}
        assert_eq!(row.lhs, BigUint::from((100 + 121 + 144 + 169) as u32));
        assert_eq!(row.rhs, BigUint::from(4u32 * 2 * (121 + 144)));
        assert!(row.holds());

        let r = check_fusion_closure(&seq, &i(3), &i(0), 1..=15).unwrap();
        let alone = check_conjugate_closure(&seq, &i(3), 1..=15).unwrap();
        for (row, single) in r.rows.iter().zip(&alone.rows) {
            assert_eq!(row.lhs, single.lhs);
            assert!(row.holds());
        }

        let c6 = FusionRing::cyclic_dual(6).unwrap();
        let sets = vec![
            vec![i(0)],
            vec![i(0), i(2)],
            vec![i(1), i(2), i(5)],
            vec![i(0), i(3)],
        ];
        let seq = SubsetSequence::explicit(&c6, sets).unwrap();
        assert!(check_fusion_closure(&seq, &i(2), &i(3), 1..=4)
            .unwrap()
            .holds());
    }

    #[test]
    fn multiplicity_bound_examples() {
        let su2 = FusionRing::su2();
        let r = check_multiplicity_bounds(&su2, &i(2), &i(2)).unwrap();
        assert_eq!(r.forward_sum, BigUint::from(35u32));
        assert_eq!(r.forward_bound, BigUint::from(81u32));
        assert!(r.holds());

        let r = check_multiplicity_bounds(&su2, &i(5), &i(0)).unwrap();
        assert_eq!(r.forward_sum, r.forward_bound);

        let o3 = FusionRing::free_orthogonal(3).unwrap();
        let r = check_multiplicity_bounds(&o3, &i(1), &i(1)).unwrap();
        assert_eq!(r.forward_sum, BigUint::from(65u32));
        assert_eq!(r.forward_bound, BigUint::from(81u32));
    }

    #[test]
    fn closure_of_two_in_odd_intervals() {
        let seq = odd_intervals();
        let policy = FixPolicy::new(200, 0.05, 10).unwrap();
        let c = closure_generate(&seq, &[i(2)], &policy, 2).unwrap();
        assert!(c.anomalies.is_empty());
        assert!(c.members.iter().all(|l| l.as_int().unwrap() % 2 == 0));
        assert!(
            c.members.contains(&i(-2)) && c.members.contains(&i(4)) && c.members.contains(&i(0))
        );

        let trivial = closure_generate(&seq, &[i(0)], &policy, 3).unwrap();
        assert_eq!(ints(&trivial.members), vec![0]);

        assert!(matches!(
            closure_generate(&seq, &[i(1)], &policy, 1),
            Err(Error::WitnessNotInStabilizer(_))
        ));
    }

    #[test]
    fn loose_policy_surfaces_closure_anomalies() {
        let seq = odd_intervals();
        // 2k fixes only while 2k/(n+1) ≤ ε at n = 200
        let policy = FixPolicy::new(200, 0.05, 10).unwrap();
        let c = closure_generate(&seq, &[i(2)], &policy, 8).unwrap();
        assert!(!c.anomalies.is_empty());
        assert!(c
            .anomalies
            .iter()
            .all(|r| r.label.as_int().unwrap().abs() > 10));
    }

    #[test]
    fn su2_closure_of_the_fundamental() {
        let su2 = FusionRing::su2();
        let seq = SubsetSequence::initial_segments(&su2).unwrap();
        let policy = FixPolicy::new(2000, 0.05, 5).unwrap();
        let c = closure_generate(&seq, &[i(1)], &policy, 3).unwrap();
        assert_eq!(ints(&c.members), vec![0, 1, 2, 3, 4]);
        assert_eq!(ints(&c.frontier), vec![4]);
        let again = closure_generate(&seq, &[i(1)], &policy, 3).unwrap();
        assert_eq!(again.members, c.members);
        let deeper = closure_generate(&seq, &[i(1)], &policy, 4).unwrap();
        assert!(c.members.is_subset(&deeper.members));
    }

    #[test]
    fn probe_finds_progressions() {
        let seq = odd_intervals();
        let z = seq.ring().clone();
        let policy = FixPolicy::new(200, 0.05, 10).unwrap();
        let window: Vec<_> = (-8..=8).map(i).collect();
        let st = classify_window(&seq, &window, &policy).unwrap();
        let bounds = ProbeBounds {
            alphas: window.clone(),
            betas: window.clone(),
            n_max: 2,
        };
        let mult4 = |l: &IrrepLabel| l.as_int().unwrap() % 4 == 0;
        let found = progression_probe(&st, &z, &mult4, 3, &bounds).unwrap();
        assert!(found
            .findings
            .iter()
            .any(|f| f.alpha == i(4) && f.beta == i(0) && f.n == 1));
        assert!(found
            .nontrivial(&z)
            .all(|f| f.alpha.as_int().unwrap() % 2 == 0));
        let f = found
            .findings
            .iter()
            .find(|f| f.alpha == i(4) && f.beta == i(0) && f.n == 1)
            .unwrap();
        let labels: Vec<i64> = f
            .steps
            .iter()
            .map(|s| s.constituents.entries()[0].0.as_int().unwrap())
            .collect();
        assert_eq!(labels, vec![0, 4, 8]);

        let k1 = progression_probe(&st, &z, &mult4, 1, &bounds).unwrap();
        assert!(k1
            .findings
            .iter()
            .any(|f| f.alpha == i(0) && f.beta == i(4)));

        let never = |_: &IrrepLabel| false;
        assert!(matches!(
            progression_probe(&st, &z, &never, 2, &bounds),
            Err(Error::SearchExhausted(_))
        ));
    }

    #[test]
    fn probe_on_su2_even_labels() {
        let su2 = FusionRing::su2();
        let seq = SubsetSequence::initial_segments(&su2).unwrap();
        let policy = FixPolicy::new(2000, 0.05, 5).unwrap();
        let window: Vec<_> = (0..=4).map(i).collect();
        let st = classify_window(&seq, &window, &policy).unwrap();
        let even = |l: &IrrepLabel| l.as_int().unwrap() % 2 == 0;
        let bounds = ProbeBounds {
            alphas: window.clone(),
            betas: vec![i(0)],
            n_max: 1,
        };
        let found = progression_probe(&st, &su2, &even, 2, &bounds).unwrap();
        let f = found.findings.iter().find(|f| f.alpha == i(2)).unwrap();
        assert_eq!(f.steps[0].constituents, Decomposition::single(i(0)));
        assert_eq!(f.steps[1].constituents, Decomposition::single(i(2)));
        assert!(found
            .findings
            .iter()
            .all(|f| f.alpha.as_int().unwrap() % 2 == 0));
    }
}
