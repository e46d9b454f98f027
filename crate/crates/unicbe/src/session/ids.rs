use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SessionError;

/// Dense index of a model under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelId(pub u32);

/// Dense index of a benchmark sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u32);

impl ModelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SampleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Index of the unordered pair `(i, j)`, `i < j`, in a lower-triangular layout.
///
/// The layout is stable under growth: adding model `m` appends pairs
/// `pair_index(0, m) .. pair_index(m - 1, m)` after every existing pair.
pub fn pair_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(lo != hi);
    hi * (hi - 1) / 2 + lo
}

/// Number of unordered pairs among `m` models.
pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Assigns contiguous dense indices to string names. Removal tombstones.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    names: Vec<String>,
    active: Vec<bool>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_names<I, S>(names: I) -> Result<Self, SessionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut reg = Self::new();
        for n in names {
            reg.register(n)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, name: impl Into<String>) -> Result<u32, SessionError> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(SessionError::DuplicateName(name));
        }
        let idx = self.names.len() as u32;
        self.lookup.insert(name.clone(), idx);
        self.names.push(name);
        self.active.push(true);
        Ok(idx)
    }

    pub fn deactivate(&mut self, idx: u32) -> bool {
        match self.active.get_mut(idx as usize) {
            Some(a) if *a => {
                *a = false;
                true
            }
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, idx: u32) -> bool {
        (idx as usize) < self.names.len()
    }

    pub fn is_active(&self, idx: u32) -> bool {
        self.active.get(idx as usize).copied().unwrap_or(false)
    }

    pub fn active_indices(&self) -> Vec<u32> {
        (0..self.names.len() as u32).filter(|&i| self.active[i as usize]).collect()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn name(&self, idx: u32) -> Option<&str> {
        self.names.get(idx as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn find(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    /// Rebuilds the name lookup after deserialization.
    pub fn reindex(&mut self) {
        self.lookup = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_index_is_dense_and_stable() {
        let mut seen = Vec::new();
        for j in 1..6 {
            for i in 0..j {
                seen.push(pair_index(i, j));
            }
        }
        assert_eq!(seen, (0..pair_count(6)).collect::<Vec<_>>());
        assert_eq!(pair_index(3, 1), pair_index(1, 3));
    }

    #[test]
    fn registry_tombstones_without_renumbering() {
        let mut reg = Registry::with_names(["a", "b", "c"]).unwrap();
        assert!(reg.deactivate(1));
        assert!(!reg.deactivate(1));
        assert_eq!(reg.active_indices(), vec![0, 2]);
        assert_eq!(reg.register("d").unwrap(), 3);
        assert_eq!(reg.find("c"), Some(2));
        assert!(matches!(reg.register("a"), Err(SessionError::DuplicateName(_))));
    }
}
