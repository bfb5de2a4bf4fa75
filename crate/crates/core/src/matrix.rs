//! Shared data types and index conventions for the scoring modules.
//!
//! Items are rows (index `i` in `0..n`), users are columns (index `j` in
//! `0..N`). All matrices are dense and immutable after construction; at the
//! scale this toolkit targets (tens of items, thousands of users) sparsity
//! buys nothing.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

fn validate_ids(kind: &'static str, ids: &[String]) -> Result<HashMap<String, usize>> {
    if ids.is_empty() {
        return Err(Error::EmptyIdList { kind });
    }
    let mut index = HashMap::with_capacity(ids.len());
    for (pos, id) in ids.iter().enumerate() {
        if id.is_empty() {
            return Err(Error::BadId {
                kind,
                id: id.clone(),
                reason: "empty identifier",
            });
        }
        if id.contains([',', '"', '\n', '\r']) {
            return Err(Error::BadId {
                kind,
                id: id.clone(),
                reason: "identifier contains a CSV metacharacter",
            });
        }
        if index.insert(id.clone(), pos).is_some() {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(index)
}

/// Ordered list of profile item identifiers; row index space of all matrices.
#[derive(Debug, Clone)]
pub struct ItemCatalog {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemCatalog {
    pub fn new(items: Vec<String>) -> Result<Self> {
        let index = validate_ids("item", &items)?;
        Ok(Self { items, index })
    }

    /// Number of items `n`.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(String::as_str)
    }
}

/// Ordered list of user identifiers; column index space of all matrices.
#[derive(Debug, Clone)]
pub struct UserRegistry {
    users: Vec<String>,
    index: HashMap<String, usize>,
}

impl UserRegistry {
    pub fn new(users: Vec<String>) -> Result<Self> {
        let index = validate_ids("user", &users)?;
        Ok(Self { users, index })
    }

    /// Number of users `N`.
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn id(&self, j: usize) -> &str {
        &self.users[j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.users.iter().map(String::as_str)
    }
}

/// Binary n×N share/hide matrix. Cell 1 means the user shares the item.
#[derive(Debug, Clone)]
pub struct ResponseMatrix {
    catalog: Arc<ItemCatalog>,
    registry: Arc<UserRegistry>,
    cells: Vec<u8>,
}

impl ResponseMatrix {
    pub fn new(
        catalog: Arc<ItemCatalog>,
        registry: Arc<UserRegistry>,
        cells: Vec<u8>,
    ) -> Result<Self> {
        let expected = catalog.len() * registry.len();
        if cells.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: cells.len(),
            });
        }
        for (pos, &c) in cells.iter().enumerate() {
            if c > 1 {
                return Err(Error::InvalidCell {
                    row: pos / registry.len(),
                    col: pos % registry.len(),
                    reason: format!("response must be 0 or 1, got {c}"),
                });
            }
        }
        Ok(Self {
            catalog,
            registry,
            cells,
        })
    }

    /// Derives the share/hide matrix from byte counts: a cell is 1 exactly
    /// when the user shared a nonzero number of bytes for the item.
    pub fn from_granularity(gm: &GranularityMatrix) -> Self {
        let cells = gm.cells().iter().map(|&b| u8::from(b > 0)).collect();
        Self {
            catalog: gm.catalog_arc(),
            registry: gm.registry_arc(),
            cells,
        }
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn catalog_arc(&self) -> Arc<ItemCatalog> {
        Arc::clone(&self.catalog)
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn item_count(&self) -> usize {
        self.catalog.len()
    }

    pub fn user_count(&self) -> usize {
        self.registry.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.registry.len() + j]
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let n_users = self.registry.len();
        &self.cells[i * n_users..(i + 1) * n_users]
    }

    /// |R_i|: number of users sharing item `i`.
    pub fn row_share_count(&self, i: usize) -> Result<usize> {
        if i >= self.item_count() {
            return Err(Error::IndexOutOfRange {
                kind: "item",
                index: i,
                len: self.item_count(),
            });
        }
        Ok(self.row(i).iter().map(|&c| c as usize).sum())
    }

    /// |R^j|: number of items user `j` shares.
    pub fn column_share_count(&self, j: usize) -> Result<usize> {
        if j >= self.user_count() {
            return Err(Error::IndexOutOfRange {
                kind: "user",
                index: j,
                len: self.user_count(),
            });
        }
        let n_users = self.user_count();
        Ok((0..self.item_count())
            .map(|i| self.cells[i * n_users + j] as usize)
            .sum())
    }

    /// |R_i| for every item.
    pub fn row_share_counts(&self) -> Vec<usize> {
        (0..self.item_count())
            .map(|i| self.row(i).iter().map(|&c| c as usize).sum())
            .collect()
    }

    /// |R^j| for every user.
    pub fn column_share_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.user_count()];
        for i in 0..self.item_count() {
            for (j, &c) in self.row(i).iter().enumerate() {
                counts[j] += c as usize;
            }
        }
        counts
    }
}

/// Non-negative byte counts per (item, user) cell.
#[derive(Debug, Clone)]
pub struct GranularityMatrix {
    catalog: Arc<ItemCatalog>,
    registry: Arc<UserRegistry>,
    cells: Vec<u64>,
}

impl GranularityMatrix {
    pub fn new(
        catalog: Arc<ItemCatalog>,
        registry: Arc<UserRegistry>,
        cells: Vec<u64>,
    ) -> Result<Self> {
        let expected = catalog.len() * registry.len();
        if cells.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: cells.len(),
            });
        }
        Ok(Self {
            catalog,
            registry,
            cells,
        })
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn catalog_arc(&self) -> Arc<ItemCatalog> {
        Arc::clone(&self.catalog)
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn item_count(&self) -> usize {
        self.catalog.len()
    }

    pub fn user_count(&self) -> usize {
        self.registry.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> u64 {
        self.cells[i * self.registry.len() + j]
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let n_users = self.registry.len();
        &self.cells[i * n_users..(i + 1) * n_users]
    }
}

/// Discrete granularity levels per (item, user) cell; 0 means no share.
#[derive(Debug, Clone)]
pub struct GranularityLevelMatrix {
    catalog: Arc<ItemCatalog>,
    registry: Arc<UserRegistry>,
    cells: Vec<u8>,
    max_level: u8,
}

impl GranularityLevelMatrix {
    pub fn new(
        catalog: Arc<ItemCatalog>,
        registry: Arc<UserRegistry>,
        cells: Vec<u8>,
        max_level: u8,
    ) -> Result<Self> {
        if max_level < 1 {
            return Err(Error::Config("max level must be at least 1".into()));
        }
        let expected = catalog.len() * registry.len();
        if cells.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: cells.len(),
            });
        }
        for (pos, &c) in cells.iter().enumerate() {
            if c > max_level {
                return Err(Error::InvalidCell {
                    row: pos / registry.len(),
                    col: pos % registry.len(),
                    reason: format!("level {c} exceeds maximum {max_level}"),
                });
            }
        }
        Ok(Self {
            catalog,
            registry,
            cells,
            max_level,
        })
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn catalog_arc(&self) -> Arc<ItemCatalog> {
        Arc::clone(&self.catalog)
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn item_count(&self) -> usize {
        self.catalog.len()
    }

    pub fn user_count(&self) -> usize {
        self.registry.len()
    }

    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    pub fn cell(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.registry.len() + j]
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let n_users = self.registry.len();
        &self.cells[i * n_users..(i + 1) * n_users]
    }

    /// Share/hide matrix induced by thresholding levels at zero.
    pub fn to_response_matrix(&self) -> ResponseMatrix {
        let cells = self.cells.iter().map(|&c| u8::from(c > 0)).collect();
        ResponseMatrix {
            catalog: Arc::clone(&self.catalog),
            registry: Arc::clone(&self.registry),
            cells,
        }
    }
}

/// Scoring model labels used on score vectors and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Psn,
    Psi,
    Psgn,
    Psgi,
    PscPrc,
    PscEvc,
    PscCc,
    PscBc,
    Psna,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Psn,
        ModelKind::Psi,
        ModelKind::Psgn,
        ModelKind::Psgi,
        ModelKind::PscPrc,
        ModelKind::PscEvc,
        ModelKind::PscCc,
        ModelKind::PscBc,
        ModelKind::Psna,
    ];

    /// Label used in reports, e.g. `PSC-PRC`.
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Psn => "PSN",
            ModelKind::Psi => "PSI",
            ModelKind::Psgn => "PSGN",
            ModelKind::Psgi => "PSGI",
            ModelKind::PscPrc => "PSC-PRC",
            ModelKind::PscEvc => "PSC-EVC",
            ModelKind::PscCc => "PSC-CC",
            ModelKind::PscBc => "PSC-BC",
            ModelKind::Psna => "PSNA",
        }
    }

    /// Label used in file names, e.g. `psc_prc`.
    pub fn file_stem(&self) -> &'static str {
        match self {
            ModelKind::Psn => "psn",
            ModelKind::Psi => "psi",
            ModelKind::Psgn => "psgn",
            ModelKind::Psgi => "psgi",
            ModelKind::PscPrc => "psc_prc",
            ModelKind::PscEvc => "psc_evc",
            ModelKind::PscCc => "psc_cc",
            ModelKind::PscBc => "psc_bc",
            ModelKind::Psna => "psna",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psn" => Ok(ModelKind::Psn),
            "psi" => Ok(ModelKind::Psi),
            "psgn" => Ok(ModelKind::Psgn),
            "psgi" => Ok(ModelKind::Psgi),
            "psc:prc" | "psc-prc" | "psc_prc" => Ok(ModelKind::PscPrc),
            "psc:evc" | "psc-evc" | "psc_evc" => Ok(ModelKind::PscEvc),
            "psc:cc" | "psc-cc" | "psc_cc" => Ok(ModelKind::PscCc),
            "psc:bc" | "psc-bc" | "psc_bc" => Ok(ModelKind::PscBc),
            "psna" => Ok(ModelKind::Psna),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

/// Per-user score assignment for one scoring model. Every value is finite.
#[derive(Debug, Clone)]
pub struct ScoreVector {
    registry: Arc<UserRegistry>,
    model: ModelKind,
    values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(registry: Arc<UserRegistry>, model: ModelKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != registry.len() {
            return Err(Error::DimensionMismatch {
                expected: registry.len(),
                actual: values.len(),
            });
        }
        for (j, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteScore {
                    user: registry.id(j).to_string(),
                });
            }
        }
        Ok(Self {
            registry,
            model,
            values,
        })
    }

    pub fn registry(&self) -> &UserRegistry {
        &self.registry
    }

    pub fn registry_arc(&self) -> Arc<UserRegistry> {
        Arc::clone(&self.registry)
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same values under a different model label.
    pub fn relabeled(&self, model: ModelKind) -> Self {
        Self {
            registry: Arc::clone(&self.registry),
            model,
            values: self.values.clone(),
        }
    }
}
