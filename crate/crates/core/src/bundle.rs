//! Dataset bundles and the on-disk file formats.
//!
//! A bundle is a plain directory: a versioned `manifest.json`, canonical
//! `users.csv` / `items.csv` listings, the `edges.csv` edge list, and either
//! `granularity.csv` (byte counts) or `responses.csv` (share flags). All
//! files are UTF-8, comma-separated, LF-terminated, header row required.
//! Re-ingesting an emitted bundle reproduces identical in-memory objects.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::matrix::{
    GranularityMatrix, ItemCatalog, ResponseMatrix, ScoreVector, UserRegistry,
};
use crate::synth::GroundTruth;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const USERS_FILE: &str = "users.csv";
pub const ITEMS_FILE: &str = "items.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const GRANULARITY_FILE: &str = "granularity.csv";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

pub const FORMAT_VERSION: u32 = 1;

/// Creation time for manifests; honors SOURCE_DATE_EPOCH so archived runs
/// can be reproduced byte for byte.
pub fn created_unix_now() -> u64 {
    if let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(fixed) = raw.parse() {
            return fixed;
        }
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Validated in-memory dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: Arc<ItemCatalog>,
    pub registry: Arc<UserRegistry>,
    /// Present when the bundle carries byte counts.
    pub granularity: Option<GranularityMatrix>,
    /// Share/hide matrix; derived from the byte counts when present.
    pub responses: ResponseMatrix,
    pub graph: SocialGraph,
}

/// Ingest findings worth surfacing.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_dropped: usize,
    /// Users present in the data file but absent from the edge list; they
    /// join the registry as isolated nodes.
    pub isolated_users_added: Vec<String>,
}

impl ValidationReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.self_loops_dropped > 0 {
            out.push(format!("dropped {} self-loop(s)", self.self_loops_dropped));
        }
        if self.duplicate_edges_dropped > 0 {
            out.push(format!(
                "dropped {} duplicate edge(s)",
                self.duplicate_edges_dropped
            ));
        }
        for user in &self.isolated_users_added {
            out.push(format!(
                "user {user:?} not in edge list; added as isolated node"
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// Bundle metadata. `content_hash` pins the data files; result files
/// emitted by later commands reference it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub artifact_version: String,
    pub created_unix: u64,
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub files: Vec<FileDigest>,
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

struct CsvTable {
    rows: Vec<(u64, Vec<String>)>,
}

/// Reads a CSV file, checks the exact expected header, skips leading `#`
/// comment lines, and returns (line, fields) rows.
fn read_csv(path: &Path, header: &[&str]) -> Result<CsvTable> {
    let file = std::fs::File::open(path)
        .map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        if !saw_header {
            if fields != header {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected header {:?}", header.join(",")),
                ));
            }
            saw_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), fields.len()),
            ));
        }
        rows.push((line, fields));
    }
    if !saw_header {
        return Err(parse_error(path, 1, "missing header row"));
    }
    Ok(CsvTable { rows })
}

pub fn read_edges_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let table = read_csv(path, &["source", "target"])?;
    Ok(table
        .rows
        .into_iter()
        .map(|(_, mut fields)| {
            let target = fields.pop().unwrap();
            let source = fields.pop().unwrap();
            (source, target)
        })
        .collect())
}

fn read_granularity_rows(path: &Path) -> Result<Vec<(u64, String, String, u64)>> {
    let table = read_csv(path, &["user_id", "item_id", "bytes"])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in table.rows {
        let signed: i128 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, line, format!("invalid byte count {:?}", fields[2])))?;
        if signed < 0 {
            return Err(parse_error(
                path,
                line,
                format!("negative byte count {signed}"),
            ));
        }
        let bytes = u64::try_from(signed)
            .map_err(|_| parse_error(path, line, format!("byte count {signed} out of range")))?;
        out.push((line, fields[0].clone(), fields[1].clone(), bytes));
    }
    Ok(out)
}

pub fn read_granularity_csv(path: &Path) -> Result<Vec<(String, String, u64)>> {
    Ok(read_granularity_rows(path)?
        .into_iter()
        .map(|(_, user, item, bytes)| (user, item, bytes))
        .collect())
}

fn read_response_rows(path: &Path) -> Result<Vec<(u64, String, String, u8)>> {
    let table = read_csv(path, &["user_id", "item_id", "shared"])?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, fields) in table.rows {
        let shared = match fields[2].as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(parse_error(
                    path,
                    line,
                    format!("shared must be 0 or 1, got {other:?}"),
                ))
            }
        };
        out.push((line, fields[0].clone(), fields[1].clone(), shared));
    }
    Ok(out)
}

pub fn read_responses_csv(path: &Path) -> Result<Vec<(String, String, u8)>> {
    Ok(read_response_rows(path)?
        .into_iter()
        .map(|(_, user, item, shared)| (user, item, shared))
        .collect())
}

/// Which kind of data file feeds the ingest.
pub enum CellData {
    Granularity(Vec<(String, String, u64)>),
    Responses(Vec<(String, String, u8)>),
}

/// Assembles validated core objects from raw edge and cell rows. The
/// registry and catalog are sorted lexicographically, making the result
/// independent of input row order.
pub fn assemble(
    edges: Vec<(String, String)>,
    cells: CellData,
    data_path: &Path,
    cell_lines: Option<&[u64]>,
) -> Result<(Dataset, ValidationReport)> {
    let mut edge_users: BTreeSet<&str> = BTreeSet::new();
    for (a, b) in &edges {
        edge_users.insert(a);
        edge_users.insert(b);
    }

    let (cell_keys, item_names): (Vec<(&str, &str)>, BTreeSet<&str>) = match &cells {
        CellData::Granularity(rows) => (
            rows.iter().map(|(u, i, _)| (u.as_str(), i.as_str())).collect(),
            rows.iter().map(|(_, i, _)| i.as_str()).collect(),
        ),
        CellData::Responses(rows) => (
            rows.iter().map(|(u, i, _)| (u.as_str(), i.as_str())).collect(),
            rows.iter().map(|(_, i, _)| i.as_str()).collect(),
        ),
    };

    let mut report = ValidationReport::default();
    let mut all_users: BTreeSet<&str> = edge_users.clone();
    for &(user, _) in &cell_keys {
        if all_users.insert(user) {
            report.isolated_users_added.push(user.to_string());
        }
    }

    let registry = Arc::new(UserRegistry::new(
        all_users.iter().map(|s| s.to_string()).collect(),
    )?);
    let catalog = Arc::new(ItemCatalog::new(
        item_names.iter().map(|s| s.to_string()).collect(),
    )?);

    // Reject duplicate (user, item) cells, naming the offending line.
    let n_users = registry.len();
    let n_items = catalog.len();
    let mut seen = vec![false; n_items * n_users];
    for (pos, &(user, item)) in cell_keys.iter().enumerate() {
        let j = registry.index_of(user).unwrap();
        let i = catalog.index_of(item).unwrap();
        if seen[i * n_users + j] {
            let line = cell_lines.map(|l| l[pos]).unwrap_or(0);
            return Err(parse_error(
                data_path,
                line,
                format!("duplicate cell for user {user:?}, item {item:?}"),
            ));
        }
        seen[i * n_users + j] = true;
    }

    let edge_indices: Vec<(usize, usize)> = edges
        .iter()
        .map(|(a, b)| {
            (
                registry.index_of(a).unwrap(),
                registry.index_of(b).unwrap(),
            )
        })
        .collect();
    let (graph, edge_report) = SocialGraph::from_edges(Arc::clone(&registry), edge_indices)?;
    report.self_loops_dropped = edge_report.self_loops_dropped;
    report.duplicate_edges_dropped = edge_report.duplicates_dropped;

    let (granularity, responses) = match cells {
        CellData::Granularity(rows) => {
            let mut matrix = vec![0u64; n_items * n_users];
            for (user, item, bytes) in rows {
                let j = registry.index_of(&user).unwrap();
                let i = catalog.index_of(&item).unwrap();
                matrix[i * n_users + j] = bytes;
            }
            let gm = GranularityMatrix::new(Arc::clone(&catalog), Arc::clone(&registry), matrix)?;
            let rm = ResponseMatrix::from_granularity(&gm);
            (Some(gm), rm)
        }
        CellData::Responses(rows) => {
            let mut matrix = vec![0u8; n_items * n_users];
            for (user, item, shared) in rows {
                let j = registry.index_of(&user).unwrap();
                let i = catalog.index_of(&item).unwrap();
                matrix[i * n_users + j] = shared;
            }
            let rm = ResponseMatrix::new(Arc::clone(&catalog), Arc::clone(&registry), matrix)?;
            (None, rm)
        }
    };

    Ok((
        Dataset {
            catalog,
            registry,
            granularity,
            responses,
            graph,
        },
        report,
    ))
}

/// Ingests raw edge and data files into a validated dataset.
pub fn ingest(
    edges_path: &Path,
    granularity_path: Option<&Path>,
    responses_path: Option<&Path>,
) -> Result<(Dataset, ValidationReport)> {
    let edges = read_edges_csv(edges_path)?;
    match (granularity_path, responses_path) {
        (Some(path), _) => {
            let rows = read_granularity_rows(path)?;
            let lines: Vec<u64> = rows.iter().map(|(l, ..)| *l).collect();
            let cells = rows
                .into_iter()
                .map(|(_, user, item, bytes)| (user, item, bytes))
                .collect();
            assemble(edges, CellData::Granularity(cells), path, Some(&lines))
        }
        (None, Some(path)) => {
            let rows = read_response_rows(path)?;
            let lines: Vec<u64> = rows.iter().map(|(l, ..)| *l).collect();
            let cells = rows
                .into_iter()
                .map(|(_, user, item, shared)| (user, item, shared))
                .collect();
            assemble(edges, CellData::Responses(cells), path, Some(&lines))
        }
        (None, None) => Err(Error::Config(
            "either a granularity file or a responses file is required".into(),
        )),
    }
}

fn render_users_csv(registry: &UserRegistry) -> String {
    let mut out = String::from("user_id\n");
    for id in registry.ids() {
        let _ = writeln!(out, "{id}");
    }
    out
}

fn render_items_csv(catalog: &ItemCatalog) -> String {
    let mut out = String::from("item_id\n");
    for id in catalog.ids() {
        let _ = writeln!(out, "{id}");
    }
    out
}

fn render_edges_csv(dataset: &Dataset) -> String {
    let mut out = String::from("source,target\n");
    for (a, b) in dataset.graph.edges() {
        let _ = writeln!(
            out,
            "{},{}",
            dataset.registry.id(a),
            dataset.registry.id(b)
        );
    }
    out
}

fn render_granularity_csv(gm: &GranularityMatrix) -> String {
    // Nonzero cells only, sorted by (user, item); absent cells are zero.
    let mut out = String::from("user_id,item_id,bytes\n");
    for j in 0..gm.user_count() {
        for i in 0..gm.item_count() {
            let bytes = gm.cell(i, j);
            if bytes > 0 {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    gm.registry().id(j),
                    gm.catalog().id(i),
                    bytes
                );
            }
        }
    }
    out
}

fn render_responses_csv(rm: &ResponseMatrix) -> String {
    let mut out = String::from("user_id,item_id,shared\n");
    for j in 0..rm.user_count() {
        for i in 0..rm.item_count() {
            if rm.cell(i, j) == 1 {
                let _ = writeln!(out, "{},{},1", rm.registry().id(j), rm.catalog().id(i));
            }
        }
    }
    out
}

/// Writes the dataset as a bundle directory and returns its manifest.
pub fn write_bundle(
    dataset: &Dataset,
    dir: &Path,
    source: &str,
    seed: Option<u64>,
    truth: Option<&GroundTruth>,
) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![
        (USERS_FILE, render_users_csv(&dataset.registry)),
        (ITEMS_FILE, render_items_csv(&dataset.catalog)),
        (EDGES_FILE, render_edges_csv(dataset)),
    ];
    match &dataset.granularity {
        Some(gm) => files.push((GRANULARITY_FILE, render_granularity_csv(gm))),
        None => files.push((RESPONSES_FILE, render_responses_csv(&dataset.responses))),
    }
    if let Some(truth) = truth {
        files.push((
            GROUND_TRUTH_FILE,
            serde_json::to_string_pretty(truth)? + "\n",
        ));
    }

    let mut digests = Vec::with_capacity(files.len());
    let mut combined = String::new();
    for (name, contents) in &files {
        std::fs::write(dir.join(name), contents)?;
        let digest = sha256_hex(contents.as_bytes());
        let _ = writeln!(combined, "{name}:{digest}");
        digests.push(FileDigest {
            name: name.to_string(),
            sha256: digest,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix: created_unix_now(),
        source: source.to_string(),
        seed,
        files: digests,
        content_hash: sha256_hex(combined.as_bytes()),
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

fn read_id_column(path: &Path, header: &str) -> Result<Vec<String>> {
    let table = read_csv(path, &[header])?;
    Ok(table.rows.into_iter().map(|(_, mut f)| f.pop().unwrap()).collect())
}

/// Loads a bundle directory back into memory.
pub fn load_bundle(dir: &Path) -> Result<(Dataset, Manifest)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_raw = std::fs::read_to_string(&manifest_path)
        .map_err(|_| Error::MissingFile(manifest_path.clone()))?;
    let manifest: Manifest = serde_json::from_str(&manifest_raw)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported bundle format version {}",
            manifest.format_version
        )));
    }

    let registry = Arc::new(UserRegistry::new(read_id_column(
        &dir.join(USERS_FILE),
        "user_id",
    )?)?);
    let catalog = Arc::new(ItemCatalog::new(read_id_column(
        &dir.join(ITEMS_FILE),
        "item_id",
    )?)?);

    let edges = read_edges_csv(&dir.join(EDGES_FILE))?;
    let edge_indices: Vec<(usize, usize)> = edges
        .iter()
        .map(|(a, b)| {
            let ja = registry
                .index_of(a)
                .ok_or_else(|| Error::Config(format!("edge user {a:?} not in users.csv")))?;
            let jb = registry
                .index_of(b)
                .ok_or_else(|| Error::Config(format!("edge user {b:?} not in users.csv")))?;
            Ok((ja, jb))
        })
        .collect::<Result<_>>()?;
    let (graph, _) = SocialGraph::from_edges(Arc::clone(&registry), edge_indices)?;

    let n_users = registry.len();
    let n_items = catalog.len();
    let granularity_path = dir.join(GRANULARITY_FILE);
    let (granularity, responses) = if granularity_path.exists() {
        let mut cells = vec![0u64; n_items * n_users];
        for (user, item, bytes) in read_granularity_csv(&granularity_path)? {
            let j = registry.index_of(&user).ok_or_else(|| {
                Error::Config(format!("granularity user {user:?} not in users.csv"))
            })?;
            let i = catalog.index_of(&item).ok_or_else(|| {
                Error::Config(format!("granularity item {item:?} not in items.csv"))
            })?;
            cells[i * n_users + j] = bytes;
        }
        let gm = GranularityMatrix::new(Arc::clone(&catalog), Arc::clone(&registry), cells)?;
        let rm = ResponseMatrix::from_granularity(&gm);
        (Some(gm), rm)
    } else {
        let responses_path = dir.join(RESPONSES_FILE);
        let mut cells = vec![0u8; n_items * n_users];
        for (user, item, shared) in read_responses_csv(&responses_path)? {
            let j = registry.index_of(&user).ok_or_else(|| {
                Error::Config(format!("response user {user:?} not in users.csv"))
            })?;
            let i = catalog.index_of(&item).ok_or_else(|| {
                Error::Config(format!("response item {item:?} not in items.csv"))
            })?;
            cells[i * n_users + j] = shared;
        }
        let rm = ResponseMatrix::new(Arc::clone(&catalog), Arc::clone(&registry), cells)?;
        (None, rm)
    };

    Ok((
        Dataset {
            catalog,
            registry,
            granularity,
            responses,
            graph,
        },
        manifest,
    ))
}

/// Loads the ground-truth sidecar of a generated bundle.
pub fn load_ground_truth(dir: &Path) -> Result<GroundTruth> {
    let path = dir.join(GROUND_TRUTH_FILE);
    let raw = std::fs::read_to_string(&path).map_err(|_| Error::MissingFile(path))?;
    Ok(serde_json::from_str(&raw)?)
}

/// Writes one score file: `# key: value` metadata comments, the exact
/// `user_id,score` header, then one row per user sorted by user id, scores
/// printed as shortest round-trip decimals.
pub fn write_scores_csv(
    path: &Path,
    scores: &ScoreVector,
    metadata: &[(String, String)],
) -> Result<()> {
    let registry = scores.registry();
    let mut order: Vec<usize> = (0..registry.len()).collect();
    order.sort_by(|&a, &b| registry.id(a).cmp(registry.id(b)));
    let mut out = String::new();
    for (key, value) in metadata {
        let _ = writeln!(out, "# {key}: {value}");
    }
    out.push_str("user_id,score\n");
    for j in order {
        let _ = writeln!(out, "{},{}", registry.id(j), scores.values()[j]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a score file back: metadata pairs and (user_id, score) rows.
#[allow(clippy::type_complexity)]
pub fn read_scores_csv(path: &Path) -> Result<(Vec<(String, String)>, Vec<(String, f64)>)> {
    let raw = std::fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    let mut metadata = Vec::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in raw.lines().enumerate() {
        let lineno = idx as u64 + 1;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                metadata.push((key.trim().to_string(), value.trim().to_string()));
            }
            continue;
        }
        if !saw_header {
            if line != "user_id,score" {
                return Err(parse_error(path, lineno, "expected header user_id,score"));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (user, score) = line
            .split_once(',')
            .ok_or_else(|| parse_error(path, lineno, "expected user_id,score"))?;
        let score: f64 = score
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("invalid score {score:?}")))?;
        rows.push((user.to_string(), score));
    }
    if !saw_header {
        return Err(parse_error(path, 1, "missing header row"));
    }
    Ok((metadata, rows))
}

/// Hash used by result files to reference the run that produced them:
/// covers the artifact version, command, flags, and input data hash, but
/// not wall-clock time.
pub fn run_hash(command: &str, bundle_hash: &str, flags: &[(String, String)]) -> String {
    let mut combined = format!("{}\n{command}\n{bundle_hash}\n", env!("CARGO_PKG_VERSION"));
    for (key, value) in flags {
        let _ = writeln!(combined, "{key}={value}");
    }
    sha256_hex(combined.as_bytes())
}

/// Where a score file for a model lives inside a scores directory.
pub fn score_file_name(model: crate::matrix::ModelKind) -> PathBuf {
    PathBuf::from(format!("scores_{}.csv", model.file_stem()))
}
