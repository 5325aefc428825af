use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FusionRing, IrrepLabel};
use crate::error::Result;

/// How much of the triple space the associativity check covers.
///
/// Every triple drawn from the first `assoc_span` window labels is checked,
/// plus `assoc_samples` seeded random triples from the whole window.
#[derive(Clone, Debug)]
pub struct AxiomCheckOptions {
    pub assoc_span: usize,
    pub assoc_samples: usize,
    pub seed: u64,
}

impl Default for AxiomCheckOptions {
    fn default() -> Self {
        Self {
            assoc_span: 12,
            assoc_samples: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AxiomViolation {
    TrivialDimension {
        dim: BigUint,
    },
    TrivialNotSelfConjugate {
        conj: IrrepLabel,
    },
    ConjugateNotInvolution {
        label: IrrepLabel,
        double: IrrepLabel,
    },
    ConjugateDimension {
        label: IrrepLabel,
    },
    UnitLaw {
        label: IrrepLabel,
    },
    Dimension {
        a: IrrepLabel,
        b: IrrepLabel,
        product: BigUint,
        sum: BigUint,
    },
    Frobenius {
        a: IrrepLabel,
        b: IrrepLabel,
        c: IrrepLabel,
        values: [u64; 3],
    },
    DecompositionMismatch {
        a: IrrepLabel,
        b: IrrepLabel,
        c: IrrepLabel,
        listed: u64,
        direct: u64,
    },
    Associativity {
        a: IrrepLabel,
        b: IrrepLabel,
        c: IrrepLabel,
    },
}

impl fmt::Display for AxiomViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AxiomViolation::*;
        match self {
            TrivialDimension { dim } => write!(f, "trivial label has dimension {dim}"),
            TrivialNotSelfConjugate { conj } => write!(f, "trivial label conjugates to {conj}"),
            ConjugateNotInvolution { label, double } => {
                write!(f, "conj(conj({label})) = {double}")
            }
            ConjugateDimension { label } => write!(f, "d({label}) differs from its conjugate's"),
            UnitLaw { label } => write!(f, "{label} ⊗ trivial is not {label}"),
            Dimension { a, b, product, sum } => {
                write!(f, "d({a})·d({b}) = {product} but Σ N d = {sum}")
            }
            Frobenius { a, b, c, values } => write!(
                f,
                "Frobenius triple ({a}, {b}, {c}): N = {}, {}, {}",
                values[0], values[1], values[2]
            ),
            DecompositionMismatch {
                a,
                b,
                c,
                listed,
                direct,
            } => write!(
                f,
                "N_{{{a},{b}}}^{c}: decomposition lists {listed}, direct query gives {direct}"
            ),
            Associativity { a, b, c } => write!(f, "({a}⊗{b})⊗{c} ≠ {a}⊗({b}⊗{c})"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AxiomReport {
    pub labels_checked: usize,
    pub pairs_checked: usize,
    pub triples_checked: usize,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Recomputes every fusion-ring identity on `window` and lists the failures.
///
/// Unit law, conjugation and dimension checks run on every label and pair.
/// Frobenius reciprocity runs on every (α, β, γ) with α, β in the window and γ
/// in the window or among the constituents of α⊗β; the three multiplicities
/// come from direct queries, independent of the decomposition enumerator.
pub fn verify_ring_axioms(
    ring: &FusionRing,
    window: &[IrrepLabel],
    options: &AxiomCheckOptions,
) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let window: Vec<IrrepLabel> = window
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for l in &window {
        ring.check(l)?;
    }
    let e = ring.trivial();
    let v = &mut report.violations;

    let de = ring.dim(&e)?;
    if !de.is_one() {
        v.push(AxiomViolation::TrivialDimension { dim: de });
    }
    let ce = ring.conjugate(&e)?;
    if ce != e {
        v.push(AxiomViolation::TrivialNotSelfConjugate { conj: ce });
    }

    for a in &window {
        let ca = ring.conjugate(a)?;
        let cca = ring.conjugate(&ca)?;
        if &cca != a {
            v.push(AxiomViolation::ConjugateNotInvolution {
                label: a.clone(),
                double: cca,
            });
        }
        if ring.dim(&ca)? != ring.dim(a)? {
            v.push(AxiomViolation::ConjugateDimension { label: a.clone() });
        }
        let unit = ring.decompose(a, &e)?;
        if unit.entries() != [(a.clone(), 1)] {
            v.push(AxiomViolation::UnitLaw { label: a.clone() });
        }
    }
    report.labels_checked = window.len();

    for a in &window {
        let da = ring.dim(a)?;
        let ca = ring.conjugate(a)?;
        for b in &window {
            let dec = ring.decompose(a, b)?;
            let product = &da * ring.dim(b)?;
            let sum = ring.total_dim(&dec)?;
            if product != sum {
                v.push(AxiomViolation::Dimension {
                    a: a.clone(),
                    b: b.clone(),
                    product,
                    sum,
                });
            }
            let cb = ring.conjugate(b)?;
            let mut targets: BTreeSet<&IrrepLabel> = window.iter().collect();
            targets.extend(dec.labels());
            for c in targets {
                let listed = dec.multiplicity(c);
                let n1 = ring.multiplicity(a, b, c)?;
                if listed != n1 {
                    v.push(AxiomViolation::DecompositionMismatch {
                        a: a.clone(),
                        b: b.clone(),
                        c: c.clone(),
                        listed,
                        direct: n1,
                    });
                }
                let n2 = ring.multiplicity(c, &cb, a)?;
                let n3 = ring.multiplicity(&ca, c, b)?;
                if n1 != n2 || n1 != n3 {
                    v.push(AxiomViolation::Frobenius {
                        a: a.clone(),
                        b: b.clone(),
                        c: c.clone(),
                        values: [n1, n2, n3],
                    });
                }
            }
            report.pairs_checked += 1;
        }
    }

    let span = options.assoc_span.min(window.len());
    let mut triples = Vec::new();
    for a in &window[..span] {
        for b in &window[..span] {
            for c in &window[..span] {
                triples.push((a, b, c));
            }
        }
    }
    if !window.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..options.assoc_samples {
            let pick = |rng: &mut ChaCha8Rng| &window[rng.gen_range(0..window.len())];
            let t = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            triples.push(t);
        }
    }
    for (a, b, c) in triples {
        let left = ring.fuse(&ring.decompose(a, b)?, c)?;
        let bc = ring.decompose(b, c)?;
        let right = ring.fuse_decompositions(&super::Decomposition::single(a.clone()), &bc)?;
        if left != right {
            v.push(AxiomViolation::Associativity {
                a: a.clone(),
                b: b.clone(),
                c: c.clone(),
            });
        }
        report.triples_checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{ExplicitTable, TableEntry};

    fn i(k: i64) -> IrrepLabel {
        IrrepLabel::Int(k)
    }

    fn z3_table() -> ExplicitTable {
        let entries = (0..3)
            .map(|k| TableEntry {
                id: i(k),
                dim: BigUint::one(),
                conj: i((3 - k) % 3),
            })
            .collect();
        let mut fusion = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                fusion.push((i(a), i(b), i((a + b) % 3), 1));
            }
        }
        ExplicitTable::new(entries, fusion, None).unwrap()
    }

    #[test]
    fn su2_window_is_clean() {
        let ring = FusionRing::su2();
        let window: Vec<_> = (0..=8).map(i).collect();
        let report = verify_ring_axioms(&ring, &window, &AxiomCheckOptions::default()).unwrap();
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(report.pairs_checked, 81);
    }

    #[test]
    fn cyclic_full_window_is_clean() {
        let ring = FusionRing::cyclic_dual(3).unwrap();
        let window = ring.enumerate(3);
        let report = verify_ring_axioms(&ring, &window, &AxiomCheckOptions::default()).unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn corrupted_entry_is_reported_as_frobenius_failure() {
        let mut table = z3_table();
        assert!(verify_ring_axioms(
            &FusionRing::explicit(table.clone()),
            &[i(0), i(1), i(2)],
            &AxiomCheckOptions::default()
        )
        .unwrap()
        .is_clean());

        // N_{1,1}^2 := 2
        table.set_multiplicity(&i(1), &i(1), &i(2), 2);
        let ring = FusionRing::explicit(table);
        let report =
            verify_ring_axioms(&ring, &[i(0), i(1), i(2)], &AxiomCheckOptions::default()).unwrap();
        assert!(report.violations.iter().any(|v| matches!(
            v,
            AxiomViolation::Frobenius { a, b, c, .. } if *a == i(1) && *b == i(1) && *c == i(2)
        )));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AxiomViolation::Dimension { .. })));
    }

    #[test]
    fn missing_pair_is_an_error() {
        let entries = vec![
            TableEntry {
                id: i(0),
                dim: BigUint::one(),
                conj: i(0),
            },
            TableEntry {
                id: i(1),
                dim: BigUint::one(),
                conj: i(1),
            },
        ];
        let fusion = vec![
            (i(0), i(0), i(0), 1),
            (i(0), i(1), i(1), 1),
            (i(1), i(0), i(1), 1),
        ];
        let ring = FusionRing::explicit(ExplicitTable::new(entries, fusion, None).unwrap());
        let err = verify_ring_axioms(&ring, &[i(0), i(1)], &AxiomCheckOptions::default());
        assert!(matches!(
            err,
            Err(crate::error::Error::TableIncomplete(_, _))
        ));
    }
}
