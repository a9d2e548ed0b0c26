//! The password universe.
//!
//! A [`PasswordSpace`] fixes a total order over distinct password strings.
//! Everything downstream refers to passwords by [`PasswordId`], which is the
//! position in that order, so comparing ids is the deterministic tie-break
//! used throughout the optimizers.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a password in its [`PasswordSpace`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PasswordId(pub u32);

impl PasswordId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PasswordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct PasswordSpace {
    passwords: Vec<Arc<str>>,
    index: HashMap<Arc<str>, PasswordId>,
}

impl PasswordSpace {
    pub fn new<I, S>(passwords: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut list: Vec<Arc<str>> = Vec::new();
        let mut index = HashMap::new();
        for pw in passwords {
            let pw: Arc<str> = Arc::from(pw.into());
            let id = PasswordId(
                u32::try_from(list.len())
                    .map_err(|_| Error::InvalidArgument("password space too large".into()))?,
            );
            if index.insert(pw.clone(), id).is_some() {
                return Err(Error::DuplicatePassword(pw.to_string()));
            }
            list.push(pw);
        }
        if list.is_empty() {
            return Err(Error::EmptySpace);
        }
        Ok(PasswordSpace {
            passwords: list,
            index,
        })
    }

    /// Number of passwords `N`.
    pub fn len(&self) -> usize {
        self.passwords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passwords.is_empty()
    }

    pub fn get(&self, id: PasswordId) -> &str {
        &self.passwords[id.index()]
    }

    pub fn id_of(&self, password: &str) -> Option<PasswordId> {
        self.index.get(password).copied()
    }

    pub fn require(&self, password: &str) -> Result<PasswordId> {
        self.id_of(password)
            .ok_or_else(|| Error::UnknownPassword(password.to_string()))
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = PasswordId> + Clone {
        (0..self.passwords.len() as u32).map(PasswordId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PasswordId, &str)> {
        self.passwords
            .iter()
            .enumerate()
            .map(|(i, p)| (PasswordId(i as u32), &**p))
    }

    pub fn names(&self, ids: &[PasswordId]) -> Vec<&str> {
        ids.iter().map(|&id| self.get(id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(matches!(
            PasswordSpace::new(["a", "b", "a"]),
            Err(Error::DuplicatePassword(p)) if p == "a"
        ));
        assert!(matches!(
            PasswordSpace::new(Vec::<String>::new()),
            Err(Error::EmptySpace)
        ));
    }

    #[test]
    fn ids_follow_insertion_order() {
        let space = PasswordSpace::new(["zeta", "alpha", "mid"]).unwrap();
        assert_eq!(space.len(), 3);
        assert_eq!(space.id_of("zeta"), Some(PasswordId(0)));
        assert_eq!(space.id_of("mid"), Some(PasswordId(2)));
        assert_eq!(space.get(PasswordId(1)), "alpha");
        assert!(matches!(
            space.require("nope"),
            Err(Error::UnknownPassword(_))
        ));
    }

    #[test]
    fn byte_equality() {
        // "é" precomposed vs decomposed are different passwords.
        let space = PasswordSpace::new(["caf\u{e9}", "cafe\u{301}"]).unwrap();
        assert_eq!(space.len(), 2);
    }
}
