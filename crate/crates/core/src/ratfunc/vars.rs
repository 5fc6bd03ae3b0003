use std::fmt;
use std::sync::Arc;

use super::RatFuncError;

/// Ordered set of variable names shared by every expression built over it.
///
/// The position of a name is its variable index; it never changes once the
/// table is constructed, so tables are handed around behind an [`Arc`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarTable {
    names: Vec<String>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl VarTable {
    pub fn new<I, S>(names: I) -> Result<Arc<Self>, RatFuncError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for name in names {
            let name = name.into();
            if !is_identifier(&name) {
                return Err(RatFuncError::InvalidName(name));
            }
            if out.contains(&name) {
                return Err(RatFuncError::DuplicateName(name));
            }
            out.push(name);
        }
        Ok(Arc::new(VarTable { names: out }))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Like [`VarTable::index_of`] but reports unknown names as an error.
    pub fn require(&self, name: &str) -> Result<usize, RatFuncError> {
        self.index_of(name)
            .ok_or_else(|| RatFuncError::UnknownVariable(name.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl fmt::Display for VarTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names.join(", "))
    }
}
