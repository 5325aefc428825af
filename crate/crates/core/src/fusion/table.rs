use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::Zero;

use super::{Decomposition, IrrepLabel};
use crate::error::{Error, Result};

/// Finite fusion data listed in full: dimensions, conjugates and one
/// decomposition per ordered pair.
///
/// Construction checks referential integrity only. Whether the data obeys the
/// fusion-ring identities is the job of [`verify_ring_axioms`](super::verify_ring_axioms).
#[derive(Clone, Debug)]
pub struct ExplicitTable {
    labels: Vec<IrrepLabel>,
    dims: BTreeMap<IrrepLabel, BigUint>,
    conj: BTreeMap<IrrepLabel, IrrepLabel>,
    fusion: HashMap<(IrrepLabel, IrrepLabel), Decomposition>,
    trivial: IrrepLabel,
}

#[derive(Clone, Debug)]
pub struct TableEntry {
    pub id: IrrepLabel,
    pub dim: BigUint,
    pub conj: IrrepLabel,
}

impl ExplicitTable {
    /// `trivial` defaults to the first listed label.
    pub fn new(
        entries: Vec<TableEntry>,
        fusion: Vec<(IrrepLabel, IrrepLabel, IrrepLabel, u64)>,
        trivial: Option<IrrepLabel>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidRing("explicit table has no labels".into()));
        }
        let mut dims = BTreeMap::new();
        let mut conj = BTreeMap::new();
        for e in &entries {
            if e.dim.is_zero() {
                return Err(Error::InvalidRing(format!(
                    "label {} has dimension 0",
                    e.id
                )));
            }
            if dims.insert(e.id.clone(), e.dim.clone()).is_some() {
                return Err(Error::InvalidRing(format!("duplicate label {}", e.id)));
            }
            conj.insert(e.id.clone(), e.conj.clone());
        }
        for (id, c) in &conj {
            if !dims.contains_key(c) {
                return Err(Error::InvalidRing(format!(
                    "conjugate {c} of {id} is not a listed label"
                )));
            }
        }
        let trivial = trivial.unwrap_or_else(|| entries[0].id.clone());
        if !dims.contains_key(&trivial) {
            return Err(Error::InvalidRing(format!(
                "trivial label {trivial} is not listed"
            )));
        }

        let mut raw: HashMap<(IrrepLabel, IrrepLabel), BTreeMap<IrrepLabel, u64>> = HashMap::new();
        for (a, b, c, n) in fusion {
            for x in [&a, &b, &c] {
                if !dims.contains_key(x) {
                    return Err(Error::InvalidRing(format!(
                        "fusion entry uses unknown label {x}"
                    )));
                }
            }
            let slot = raw.entry((a.clone(), b.clone())).or_default();
            if slot.contains_key(&c) {
                return Err(Error::InvalidRing(format!(
                    "duplicate fusion entry ({a}, {b}, {c})"
                )));
            }
            slot.insert(c, n);
        }
        let fusion = raw
            .into_iter()
            .map(|(k, v)| (k, Decomposition::from_pairs(v)))
            .collect();

        let labels = entries.into_iter().map(|e| e.id).collect();
        Ok(Self {
            labels,
            dims,
            conj,
            fusion,
            trivial,
        })
    }

    /// Labels in listing order.
    pub fn labels(&self) -> &[IrrepLabel] {
        &self.labels
    }

    pub fn trivial(&self) -> &IrrepLabel {
        &self.trivial
    }

    pub fn contains(&self, label: &IrrepLabel) -> bool {
        self.dims.contains_key(label)
    }

    pub fn dim(&self, label: &IrrepLabel) -> Option<&BigUint> {
        self.dims.get(label)
    }

    pub fn conj(&self, label: &IrrepLabel) -> Option<&IrrepLabel> {
        self.conj.get(label)
    }

    pub fn pair(&self, a: &IrrepLabel, b: &IrrepLabel) -> Result<&Decomposition> {
        self.fusion
            .get(&(a.clone(), b.clone()))
            .ok_or_else(|| Error::TableIncomplete(a.clone(), b.clone()))
    }

    /// Every listed fusion entry as `(a, b, c, N)`, sorted.
    pub fn fusion_entries(&self) -> Vec<(IrrepLabel, IrrepLabel, IrrepLabel, u64)> {
        let mut out: Vec<_> = self
            .fusion
            .iter()
            .flat_map(|((a, b), d)| {
                d.entries()
                    .iter()
                    .map(move |(c, n)| (a.clone(), b.clone(), c.clone(), *n))
            })
            .collect();
        out.sort();
        out
    }

    /// Overwrites a single multiplicity. Zero removes the entry.
    pub fn set_multiplicity(&mut self, a: &IrrepLabel, b: &IrrepLabel, c: &IrrepLabel, n: u64) {
        let key = (a.clone(), b.clone());
        let current = self.fusion.remove(&key).unwrap_or_default();
        let updated = current
            .into_entries()
            .into_iter()
            .filter(|(l, _)| l != c)
            .chain(std::iter::once((c.clone(), n)));
        self.fusion.insert(key, Decomposition::from_pairs(updated));
    }
}
