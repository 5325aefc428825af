use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of an irreducible representation class.
///
/// Plain integers cover the one-parameter families; tuples cover lattice
/// duals and products. The owning [`FusionRing`](super::FusionRing) decides
/// which shapes are valid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IrrepLabel {
    Int(i64),
    Seq(Vec<IrrepLabel>),
}

impl IrrepLabel {
    pub fn int(k: i64) -> Self {
        IrrepLabel::Int(k)
    }

    pub fn tuple<I: IntoIterator<Item = i64>>(coords: I) -> Self {
        IrrepLabel::Seq(coords.into_iter().map(IrrepLabel::Int).collect())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            IrrepLabel::Int(k) => Some(*k),
            IrrepLabel::Seq(_) => None,
        }
    }

    pub fn as_seq(&self) -> Option<&[IrrepLabel]> {
        match self {
            IrrepLabel::Int(_) => None,
            IrrepLabel::Seq(v) => Some(v),
        }
    }

    /// Flat integer coordinates, if every component is an integer.
    pub fn int_coords(&self) -> Option<Vec<i64>> {
        match self {
            IrrepLabel::Int(k) => Some(vec![*k]),
            IrrepLabel::Seq(v) => v.iter().map(IrrepLabel::as_int).collect(),
        }
    }
}

impl From<i64> for IrrepLabel {
    fn from(k: i64) -> Self {
        IrrepLabel::Int(k)
    }
}

impl fmt::Display for IrrepLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrrepLabel::Int(k) => write!(f, "{k}"),
            IrrepLabel::Seq(v) => {
                write!(f, "(")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}
