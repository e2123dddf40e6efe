//! Typed indices for the four kinds of combinatorial objects.
//!
//! `P` and `I` are opaque ordered labels for the matrix blocks of `E` and
//! `F`; `Y` and `X` index diagonal slots (edges and vertices of the dual
//! picture). Everything downstream is keyed by these, never by raw
//! positions after a transformation pass.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! index_type {
    ($name:ident, $tag:literal) => {
        #[derive(
            Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        pub struct $name(pub u32);

        impl $name {
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $tag, self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $tag, self.0)
            }
        }
    };
}

index_type!(PIdx, "p");
index_type!(IIdx, "i");
index_type!(YIdx, "y");
index_type!(XIdx, "x");

/// Identifier of one multiplicity copy (a slot block) of some `F`-summand
/// inside an `E`-block, for one boundary side.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CopyId(pub u32);

impl CopyId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for CopyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}
