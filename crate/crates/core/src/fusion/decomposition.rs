use std::collections::BTreeMap;

use super::IrrepLabel;

/// Multiset of irreducible constituents, sorted by label, multiplicities ≥ 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Decomposition {
    entries: Vec<(IrrepLabel, u64)>,
}

impl Decomposition {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(label: IrrepLabel) -> Self {
        Self {
            entries: vec![(label, 1)],
        }
    }

    /// Builds a decomposition, merging repeated labels and dropping zero multiplicities.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (IrrepLabel, u64)>,
    {
        let mut acc: BTreeMap<IrrepLabel, u64> = BTreeMap::new();
        for (label, mult) in pairs {
            if mult > 0 {
                *acc.entry(label).or_insert(0) += mult;
            }
        }
        Self {
            entries: acc.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(IrrepLabel, u64)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &IrrepLabel> + '_ {
        self.entries.iter().map(|(l, _)| l)
    }

    pub fn multiplicity(&self, label: &IrrepLabel) -> u64 {
        self.entries
            .binary_search_by(|(l, _)| l.cmp(label))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, label: &IrrepLabel) -> bool {
        self.multiplicity(label) > 0
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_entries(self) -> Vec<(IrrepLabel, u64)> {
        self.entries
    }
}

impl FromIterator<(IrrepLabel, u64)> for Decomposition {
    fn from_iter<I: IntoIterator<Item = (IrrepLabel, u64)>>(iter: I) -> Self {
        Self::from_pairs(iter)
    }
}
