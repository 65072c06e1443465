//! Ordered variable universes shared by polynomials and charts.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// An ordered, duplicate-free list of symbol names. The declared order fixes
/// the monomial order everywhere downstream, so two `Vars` compare equal only
/// when the names and their order agree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Vars(Arc<Vec<String>>);

impl Vars {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || !is_symbol(n) {
                return Err(Error::UnknownSymbol(n.clone()));
            }
            if names[..i].contains(n) {
                return Err(Error::Shape(format!("duplicate variable `{n}`")));
            }
        }
        Ok(Vars(Arc::new(names)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// Concatenation `self ++ extra`, failing on duplicates.
    pub fn extended<I, S>(&self, extra: I) -> Result<Vars>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names = self.0.as_ref().clone();
        names.extend(extra.into_iter().map(Into::into));
        Vars::new(names)
    }
}

impl fmt::Debug for Vars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vars{:?}", self.0)
    }
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_bad_names() {
        assert!(Vars::new(["x", "x"]).is_err());
        assert!(Vars::new(["2x"]).is_err());
        assert!(Vars::new(["x", "y_1"]).is_ok());
    }

    #[test]
    fn order_matters_for_equality() {
        let a = Vars::new(["x", "y"]).unwrap();
        let b = Vars::new(["y", "x"]).unwrap();
        assert_ne!(a, b);
    }
}
