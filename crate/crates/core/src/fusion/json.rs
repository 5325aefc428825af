//! Fusion-ring file format.
//!
//! Either a built-in family selected by name,
//! `{ "family": "su2" }`, `{ "family": "cyclic_dual", "m": 5 }`,
//! `{ "family": "integer_dual", "rank": 2 }`, `{ "family": "free_orthogonal", "n": 3 }`,
//! `{ "family": "product", "factors": [ ... ] }`,
//! or an explicit table
//! `{ "labels": [{"id": 0, "dim": 1, "conj": 0}, ...], "fusion": [[a, b, c, N], ...] }`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::{ExplicitTable, FusionRing, IrrepLabel, RingKind, TableEntry};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimValue {
    Small(u64),
    Big(String),
}

impl DimValue {
    fn to_biguint(&self, path: &str) -> Result<BigUint> {
        match self {
            DimValue::Small(d) => Ok(BigUint::from(*d)),
            DimValue::Big(s) => s
                .parse()
                .map_err(|_| Error::config(path, format!("dimension {s:?} is not an integer"))),
        }
    }

    fn from_biguint(d: &BigUint) -> Self {
        u64::try_from(d).map_or_else(|_| DimValue::Big(d.to_string()), DimValue::Small)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    pub id: IrrepLabel,
    pub dim: DimValue,
    pub conj: IrrepLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<RingSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<LabelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<Vec<(IrrepLabel, IrrepLabel, IrrepLabel, u64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trivial: Option<IrrepLabel>,
}

impl RingSpec {
    pub fn family(name: &str) -> Self {
        Self {
            family: Some(name.to_string()),
            ..Self::default()
        }
    }

    /// Describes a built-in ring by name and parameters. Explicit tables
    /// have no short form; use [`export_table`].
    pub fn describe(kind: &RingKind) -> Option<Self> {
        Some(match kind {
            RingKind::ExplicitTable => return None,
            RingKind::CyclicDual(m) => Self {
                m: Some(*m),
                ..Self::family("cyclic_dual")
            },
            RingKind::IntegerDual(d) => Self {
                rank: Some(*d),
                ..Self::family("integer_dual")
            },
            RingKind::Su2 => Self::family("su2"),
            RingKind::FreeOrthogonal(n) => Self {
                n: Some(*n),
                ..Self::family("free_orthogonal")
            },
            RingKind::Product(fs) => Self {
                factors: Some(fs.iter().map(Self::describe).collect::<Option<_>>()?),
                ..Self::family("product")
            },
        })
    }

    /// Validates the spec and builds the ring. `path` prefixes error locations.
    pub fn build(&self, path: &str) -> Result<FusionRing> {
        let family = match (&self.family, &self.labels) {
            (Some(f), _) => f.as_str(),
            (None, Some(_)) => "explicit",
            (None, None) => {
                return Err(Error::config(path, "expected \"family\" or \"labels\""));
            }
        };
        let need = |v: Option<u64>, key: &str| {
            v.ok_or_else(|| {
                Error::config(
                    format!("{path}.{key}"),
                    format!("{family} requires \"{key}\""),
                )
            })
        };
        let wrap = |e: Error| match e {
            Error::InvalidRing(msg) => Error::config(path, msg),
            other => other,
        };
        match family {
            "su2" => Ok(FusionRing::su2()),
            "cyclic_dual" => FusionRing::cyclic_dual(need(self.m, "m")?).map_err(wrap),
            "integer_dual" => FusionRing::integer_dual(self.rank.unwrap_or(1)).map_err(wrap),
            "free_orthogonal" => FusionRing::free_orthogonal(need(self.n, "n")?).map_err(wrap),
            "product" => {
                let factors = self.factors.as_ref().ok_or_else(|| {
                    Error::config(format!("{path}.factors"), "product requires \"factors\"")
                })?;
                let rings = factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| f.build(&format!("{path}.factors[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                FusionRing::product(rings).map_err(wrap)
            }
            "explicit" => {
                let labels = self.labels.as_ref().ok_or_else(|| {
                    Error::config(
                        format!("{path}.labels"),
                        "explicit table requires \"labels\"",
                    )
                })?;
                let entries = labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        Ok(TableEntry {
                            id: l.id.clone(),
                            dim: l.dim.to_biguint(&format!("{path}.labels[{i}].dim"))?,
                            conj: l.conj.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let fusion = self.fusion.clone().unwrap_or_default();
                ExplicitTable::new(entries, fusion, self.trivial.clone())
                    .map(FusionRing::explicit)
                    .map_err(wrap)
            }
            other => Err(Error::config(
                format!("{path}.family"),
                format!("unknown family {other:?}"),
            )),
        }
    }
}

/// Parses and builds a ring from JSON text.
pub fn parse_ring(text: &str) -> Result<FusionRing> {
    let spec: RingSpec = from_json(text)?;
    spec.build("$")
}

/// Deserializes with the JSON path of the first schema violation in the error.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(
            format!("$.{path}").trim_end_matches('.').to_string(),
            e.into_inner().to_string(),
        )
    })
}

/// Exports the ring restricted to `window` as an explicit table.
///
/// The listed labels are the window, every constituent of a window pair, and
/// their conjugates; fusion entries are given for window pairs only.
pub fn export_table(ring: &FusionRing, window: &[IrrepLabel]) -> Result<RingSpec> {
    let window: BTreeSet<IrrepLabel> = window.iter().cloned().collect();
    let mut listed: BTreeSet<IrrepLabel> = window.clone();
    listed.insert(ring.trivial());
    let mut fusion = Vec::new();
    for a in &window {
        for b in &window {
            for (c, n) in ring.decompose(a, b)?.entries() {
                listed.insert(c.clone());
                fusion.push((a.clone(), b.clone(), c.clone(), *n));
            }
        }
    }
    let conjugates = listed
        .iter()
        .map(|l| ring.conjugate(l))
        .collect::<Result<Vec<_>>>()?;
    listed.extend(conjugates);

    let trivial = ring.trivial();
    let mut order: Vec<IrrepLabel> = vec![trivial.clone()];
    order.extend(listed.into_iter().filter(|l| *l != trivial));
    let labels = order
        .into_iter()
        .map(|l| {
            Ok(LabelSpec {
                dim: DimValue::from_biguint(&ring.dim(&l)?),
                conj: ring.conjugate(&l)?,
                id: l,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RingSpec {
        labels: Some(labels),
        fusion: Some(fusion),
        trivial: Some(trivial),
        ..RingSpec::default()
    })
}
