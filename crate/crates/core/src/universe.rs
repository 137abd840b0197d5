use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Largest address universe the topology enumeration accepts.
pub const MAX_LOCS: usize = 5;

/// Declared finite universes of addresses, messages and internal actions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Universe {
    pub locs: Vec<String>,
    pub msgs: Vec<String>,
    pub iacts: Vec<String>,
}

impl Universe {
    pub fn new<L, M, I>(locs: L, msgs: M, iacts: I) -> Self
    where
        L: IntoIterator,
        L::Item: Into<String>,
        M: IntoIterator,
        M::Item: Into<String>,
        I: IntoIterator,
        I::Item: Into<String>,
    {
        Universe {
            locs: locs.into_iter().map(Into::into).collect(),
            msgs: msgs.into_iter().map(Into::into).collect(),
            iacts: iacts.into_iter().map(Into::into).collect(),
        }
    }

    pub fn loc_index(&self, name: &str) -> Option<usize> {
        self.locs.iter().position(|l| l == name)
    }

    pub fn has_loc(&self, name: &str) -> bool {
        self.loc_index(name).is_some()
    }

    pub fn has_msg(&self, name: &str) -> bool {
        self.msgs.iter().any(|m| m == name)
    }

    pub fn has_iact(&self, name: &str) -> bool {
        self.iacts.iter().any(|m| m == name)
    }

    /// Number of ordered address pairs without self-links.
    pub fn pair_count(&self) -> usize {
        let n = self.locs.len();
        n * n.saturating_sub(1)
    }

    pub fn check_size(&self) -> Result<()> {
        if self.locs.len() > MAX_LOCS {
            Err(CoreError::UniverseTooLarge(self.locs.len()))
        } else {
            Ok(())
        }
    }

    pub fn same_as(&self, other: &Universe) -> Result<()> {
        let mut a = (self.locs.clone(), self.msgs.clone());
        let mut b = (other.locs.clone(), other.msgs.clone());
        a.0.sort();
        a.1.sort();
        b.0.sort();
        b.1.sort();
        if a == b {
            Ok(())
        } else {
            Err(CoreError::UniverseMismatch)
        }
    }
}
