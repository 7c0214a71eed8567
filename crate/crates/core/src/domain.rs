//! Document and extraction data model shared by every stage of the engine.
//!
//! A [`DocumentBundle`] is one input document: rendered page images plus the
//! layout regions detected on them. Extraction produces [`MoleculeCandidate`]s
//! and parsed activity tables, and alignment joins them into [`SarRecord`]s.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageFormat};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Render resolution assumed when a manifest does not declare one.
pub const DEFAULT_DPI: u32 = 200;

/// Name of the manifest file inside a bundle directory.
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("no manifest.json in {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest field `{field}`: {reason}")]
    MalformedManifest { field: String, reason: String },
    #[error("region {region_id} references page {page_index}, document has {page_count} pages")]
    DanglingPageReference {
        region_id: String,
        page_index: usize,
        page_count: usize,
    },
    #[error("invalid bounding box on region {region_id}: width and height must be positive")]
    InvalidBBox { region_id: String },
    #[error("bounding box {bbox:?} lies outside the {width}x{height} page")]
    BBoxOutsidePage { bbox: BBox, width: u32, height: u32 },
    #[error("crop scale must be >= 1, got {0}")]
    InvalidScale(f64),
    #[error("page image {0} is missing")]
    MissingPageImage(PathBuf),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Axis-aligned box in page-image pixel space (origin top-left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn within_page(&self, width: u32, height: u32) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.right() <= width as f64
            && self.bottom() <= height as f64
    }

    /// Scales the box about its center by `scale` on each axis, without clamping.
    pub fn scaled(&self, scale: f64) -> BBox {
        let dw = self.w * (scale - 1.0) / 2.0;
        let dh = self.h * (scale - 1.0) / 2.0;
        BBox::new(self.x - dw, self.y - dh, self.w * scale, self.h * scale)
    }

    /// Intersection with the page rectangle `[0, width] x [0, height]`.
    pub fn clamped(&self, width: u32, height: u32) -> BBox {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width as f64);
        let y1 = self.bottom().min(height as f64);
        BBox::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum RegionKind {
    Molecule,
    Table,
}

/// A detected layout element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Region {
    pub id: String,
    pub page_index: usize,
    pub kind: RegionKind,
    pub bbox: BBox,
    pub confidence: f64,
    /// Text recognised inside the region, when the detector supplies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Annotated activity relevance for table regions (benchmark statistics only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<bool>,
}

impl Region {
    pub fn is_molecule(&self) -> bool {
        self.kind == RegionKind::Molecule
    }

    pub fn is_table(&self) -> bool {
        self.kind == RegionKind::Table
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum DocType {
    Patent,
    Literature,
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DocType::Patent => "Patent",
            DocType::Literature => "Literature",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PageRef {
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_dpi")]
    pub dpi: u32,
    /// Image file name relative to the bundle directory.
    pub image: String,
}

fn default_dpi() -> u32 {
    DEFAULT_DPI
}

/// One input document: page images plus detected regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DocumentBundle {
    pub doc_id: String,
    pub doc_type: DocType,
    #[serde(default)]
    pub language_tags: BTreeSet<String>,
    #[serde(default = "default_dpi")]
    pub dpi: u32,
    pub pages: Vec<PageRef>,
    #[serde(default)]
    pub regions: Vec<Region>,
    /// Directory the bundle was loaded from; not part of the manifest.
    #[serde(skip)]
    pub root: Option<PathBuf>,
}

impl DocumentBundle {
    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn molecules(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.is_molecule())
    }

    pub fn tables(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.is_table())
    }

    pub fn page_path(&self, page_index: usize) -> Option<PathBuf> {
        let page = self.pages.get(page_index)?;
        Some(match &self.root {
            Some(root) => root.join(&page.image),
            None => PathBuf::from(&page.image),
        })
    }

    pub fn load_page_image(&self, page_index: usize) -> Result<DynamicImage, DomainError> {
        let path = self
            .page_path(page_index)
            .ok_or_else(|| DomainError::DanglingPageReference {
                region_id: String::new(),
                page_index,
                page_count: self.pages.len(),
            })?;
        let bytes = fs::read(&path).map_err(|source| DomainError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(image::load_from_memory(&bytes)?)
    }

    /// Checks every invariant of the bundle and its regions.
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.doc_id.trim().is_empty() {
            return Err(malformed("doc_id", "must be nonempty"));
        }
        if self.pages.is_empty() {
            return Err(malformed("pages", "document has no pages"));
        }
        for (i, page) in self.pages.iter().enumerate() {
            if page.width == 0 || page.height == 0 {
                return Err(malformed(format!("pages[{i}]"), "page dimensions must be positive"));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, region) in self.regions.iter().enumerate() {
            if region.id.is_empty() || !seen.insert(region.id.as_str()) {
                return Err(malformed(
                    format!("regions[{i}].id"),
                    "region ids must be nonempty and unique",
                ));
            }
            if region.page_index >= self.pages.len() {
                return Err(DomainError::DanglingPageReference {
                    region_id: region.id.clone(),
                    page_index: region.page_index,
                    page_count: self.pages.len(),
                });
            }
            if !region.bbox.is_valid() {
                return Err(DomainError::InvalidBBox {
                    region_id: region.id.clone(),
                });
            }
            if !(0.0..=1.0).contains(&region.confidence) {
                return Err(malformed(
                    format!("regions[{i}].confidence"),
                    "confidence must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    /// Writes `manifest.json` into `dir` (page images are the caller's concern).
    pub fn write_manifest(&self, dir: &Path) -> Result<(), DomainError> {
        let path = dir.join(MANIFEST_FILE);
        let body = serde_json::to_vec_pretty(self).expect("bundle serializes");
        fs::write(&path, body).map_err(|source| DomainError::Io { path, source })
    }
}

fn malformed(field: impl Into<String>, reason: impl Into<String>) -> DomainError {
    DomainError::MalformedManifest {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Loads and validates a bundle directory (`manifest.json` + page images).
pub fn load_bundle(path: impl AsRef<Path>) -> Result<DocumentBundle, DomainError> {
    let dir = path.as_ref();
    let manifest = dir.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(DomainError::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest).map_err(|source| DomainError::Io {
        path: manifest.clone(),
        source,
    })?;
    let mut bundle = parse_manifest(&text)?;
    for page in &bundle.pages {
        let image = dir.join(&page.image);
        if !image.is_file() {
            return Err(DomainError::MissingPageImage(image));
        }
    }
    bundle.root = Some(dir.to_path_buf());
    Ok(bundle)
}

/// Parses and validates manifest JSON without touching the filesystem.
pub fn parse_manifest(text: &str) -> Result<DocumentBundle, DomainError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let bundle: DocumentBundle = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        malformed(if field == "." { "<root>".into() } else { field }, e.inner().to_string())
    })?;
    bundle.validate()?;
    Ok(bundle)
}

/// Loads every bundle directory directly below `corpus`, sorted by directory name.
pub fn load_corpus(corpus: impl AsRef<Path>) -> Result<Vec<DocumentBundle>, DomainError> {
    let corpus = corpus.as_ref();
    if corpus.join(MANIFEST_FILE).is_file() {
        return Ok(vec![load_bundle(corpus)?]);
    }
    let entries = fs::read_dir(corpus).map_err(|source| DomainError::Io {
        path: corpus.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    let bundles = dirs.iter().map(load_bundle).collect::<Result<Vec<_>, _>>()?;
    let mut ids = BTreeSet::new();
    for b in &bundles {
        if !ids.insert(b.doc_id.clone()) {
            return Err(malformed("doc_id", format!("duplicate doc_id {} in corpus", b.doc_id)));
        }
    }
    Ok(bundles)
}

/// Context window for a region: the box scaled about its center, clamped to the page.
pub fn crop_window(bbox: &BBox, scale: f64, width: u32, height: u32) -> Result<BBox, DomainError> {
    if !(scale >= 1.0) || !scale.is_finite() {
        return Err(DomainError::InvalidScale(scale));
    }
    if !bbox.is_valid() || !bbox.within_page(width, height) {
        return Err(DomainError::BBoxOutsidePage {
            bbox: *bbox,
            width,
            height,
        });
    }
    Ok(bbox.scaled(scale).clamped(width, height))
}

/// Crops `page` to the scaled window of `bbox`. Fractional edges round outward.
pub fn crop(page: &DynamicImage, bbox: &BBox, scale: f64) -> Result<DynamicImage, DomainError> {
    let window = crop_window(bbox, scale, page.width(), page.height())?;
    let x0 = window.x.floor() as u32;
    let y0 = window.y.floor() as u32;
    let x1 = (window.right().ceil() as u32).min(page.width());
    let y1 = (window.bottom().ceil() as u32).min(page.height());
    Ok(page.crop_imm(x0, y0, (x1 - x0).max(1), (y1 - y0).max(1)))
}

pub fn encode_png(image: &DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image
        .write_to(&mut out, ImageFormat::Png)
        .expect("png encoding into memory");
    out.into_inner()
}

/// One detected molecule after OCSR and coreference recognition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MoleculeCandidate {
    pub region_id: String,
    pub page_index: usize,
    pub smiles: Option<String>,
    pub coref_id: Option<String>,
    pub smiles_valid: bool,
    pub atom_count: Option<usize>,
}

impl MoleculeCandidate {
    /// Builds a candidate, validating the SMILES so the validity fields stay consistent.
    pub fn new(
        region_id: impl Into<String>,
        page_index: usize,
        smiles: Option<String>,
        coref_id: Option<String>,
    ) -> Self {
        let atom_count = smiles
            .as_deref()
            .and_then(|s| crate::smiles::parse_smiles(s).ok())
            .map(|g| crate::smiles::heavy_atom_count(&g));
        Self {
            region_id: region_id.into(),
            page_index,
            smiles,
            coref_id,
            smiles_valid: atom_count.is_some(),
            atom_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum Attribute {
    EC50,
    IC50,
    Ki,
    Kd,
    #[serde(rename = "pKd")]
    PKd,
    TD50,
    Ti,
    TC50,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Attribute::EC50,
        Attribute::IC50,
        Attribute::Ki,
        Attribute::Kd,
        Attribute::PKd,
        Attribute::TD50,
        Attribute::Ti,
        Attribute::TC50,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Attribute::EC50 => "EC50",
            Attribute::IC50 => "IC50",
            Attribute::Ki => "Ki",
            Attribute::Kd => "Kd",
            Attribute::PKd => "pKd",
            Attribute::TD50 => "TD50",
            Attribute::Ti => "Ti",
            Attribute::TC50 => "TC50",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown activity attribute {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default, JsonSchema)]
pub enum Qualifier {
    #[default]
    None,
    GT,
    LT,
    GE,
    LE,
    Approx,
}

impl Qualifier {
    /// Symbolic form used in CSV files; `None` is the empty string.
    pub fn symbol(&self) -> &'static str {
        match self {
            Qualifier::None => "",
            Qualifier::GT => ">",
            Qualifier::LT => "<",
            Qualifier::GE => ">=",
            Qualifier::LE => "<=",
            Qualifier::Approx => "~",
        }
    }
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Qualifier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "" | "=" => Qualifier::None,
            ">" => Qualifier::GT,
            "<" => Qualifier::LT,
            ">=" | "≥" => Qualifier::GE,
            "<=" | "≤" => Qualifier::LE,
            "~" | "≈" => Qualifier::Approx,
            other => return Err(format!("unknown qualifier {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default, JsonSchema)]
pub enum Unit {
    #[serde(rename = "uM")]
    Micromolar,
    #[serde(rename = "nM")]
    Nanomolar,
    #[serde(rename = "percent")]
    Percent,
    #[serde(rename = "kcal_per_mol")]
    KcalPerMol,
    #[default]
    Unknown,
}

impl Unit {
    pub fn symbol(&self) -> &'static str {
        match self {
            Unit::Micromolar => "uM",
            Unit::Nanomolar => "nM",
            Unit::Percent => "%",
            Unit::KcalPerMol => "kcal/mol",
            Unit::Unknown => "",
        }
    }

    pub fn is_concentration(&self) -> bool {
        matches!(self, Unit::Micromolar | Unit::Nanomolar)
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "uM" | "µM" | "μM" | "micromolar" => Unit::Micromolar,
            "nM" | "nanomolar" => Unit::Nanomolar,
            "%" | "percent" => Unit::Percent,
            "kcal/mol" | "kcal_per_mol" => Unit::KcalPerMol,
            "" | "unknown" | "Unknown" => Unit::Unknown,
            other => return Err(format!("unknown unit {other:?}")),
        })
    }
}

/// One measured activity value parsed from a table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ActivityValue {
    pub attribute: Attribute,
    pub qualifier: Qualifier,
    pub value: f64,
    pub unit: Unit,
    /// Verbatim cell fragment the value was parsed from.
    pub raw_text: String,
}

impl ActivityValue {
    /// Same measurement, comparing values with the given relative tolerance.
    pub fn same_measurement(&self, other: &ActivityValue, rel_tol: f64) -> bool {
        self.attribute == other.attribute
            && self.qualifier == other.qualifier
            && self.unit == other.unit
            && values_close(self.value, other.value, rel_tol)
    }
}

pub fn values_close(a: f64, b: f64, rel_tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Which cascade tier produced a molecule-to-row link; earlier variants rank higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum MatchTier {
    Exact,
    CaseInsensitive,
    Normalized,
    Fuzzy,
}

impl fmt::Display for MatchTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchTier::Exact => "Exact",
            MatchTier::CaseInsensitive => "CaseInsensitive",
            MatchTier::Normalized => "Normalized",
            MatchTier::Fuzzy => "Fuzzy",
        })
    }
}

impl FromStr for MatchTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Exact" => MatchTier::Exact,
            "CaseInsensitive" => MatchTier::CaseInsensitive,
            "Normalized" => MatchTier::Normalized,
            "Fuzzy" => MatchTier::Fuzzy,
            other => return Err(format!("unknown match tier {other:?}")),
        })
    }
}

/// Where a record's molecule or table came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct RegionAnchor {
    pub region_id: String,
    pub page_index: usize,
}

/// Quality-control annotation kept on a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum RecordFlag {
    RangeViolation { activity: usize },
}

/// One linked structure-activity record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SarRecord {
    pub doc_id: String,
    pub smiles: String,
    pub coref_id: String,
    pub activities: Vec<ActivityValue>,
    pub molecule_region: RegionAnchor,
    pub table_region: RegionAnchor,
    /// Index of the linked data row within the parsed table.
    pub table_row: usize,
    pub match_tier: MatchTier,
    pub match_similarity: f64,
    /// Composite ranking score of the winning link.
    pub score: f64,
    #[serde(default)]
    pub edited: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RecordFlag>,
}

/// One annotated molecule with its complete activity set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GroundTruthRow {
    pub doc_id: String,
    pub coref_id: String,
    pub smiles: String,
    pub activities: Vec<ActivityValue>,
    pub molecule_page: usize,
    #[serde(default)]
    pub molecule_bbox: Option<BBox>,
    #[serde(default)]
    pub table_page: Option<usize>,
}

pub const GROUND_TRUTH_HEADER: [&str; 9] = [
    "doc_id",
    "coref_id",
    "smiles",
    "attribute",
    "qualifier",
    "value",
    "unit",
    "molecule_page",
    "table_page",
];

#[derive(Debug, Error)]
pub enum TruthError {
    #[error("malformed ground-truth CSV at line {line}: {reason}")]
    MalformedTruthCsv { line: u64, reason: String },
}

#[derive(Debug, Deserialize)]
struct TruthCsvRow {
    doc_id: String,
    coref_id: String,
    smiles: String,
    attribute: String,
    qualifier: String,
    value: String,
    unit: String,
    molecule_page: usize,
    table_page: Option<usize>,
}

/// Reads ground-truth CSV; consecutive or scattered rows of the same molecule are merged.
pub fn read_ground_truth<R: std::io::Read>(reader: R) -> Result<Vec<GroundTruthRow>, TruthError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| TruthError::MalformedTruthCsv {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != GROUND_TRUTH_HEADER {
        return Err(TruthError::MalformedTruthCsv {
            line: 1,
            reason: format!("expected header {}", GROUND_TRUTH_HEADER.join(",")),
        });
    }
    let mut rows: Vec<GroundTruthRow> = Vec::new();
    for result in rdr.records() {
        let record = result.map_err(|e| TruthError::MalformedTruthCsv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw: TruthCsvRow =
            record
                .deserialize(Some(&headers))
                .map_err(|e| TruthError::MalformedTruthCsv {
                    line,
                    reason: e.to_string(),
                })?;
        let bad = |reason: String| TruthError::MalformedTruthCsv { line, reason };
        if let Err(e) = crate::smiles::parse_smiles(&raw.smiles) {
            return Err(bad(format!("invalid SMILES {:?}: {e}", raw.smiles)));
        }
        let value: f64 = raw
            .value
            .trim()
            .parse()
            .map_err(|_| bad(format!("value {:?} is not a number", raw.value)))?;
        if !value.is_finite() {
            return Err(bad("value must be finite".into()));
        }
        let activity = ActivityValue {
            attribute: raw.attribute.parse().map_err(bad)?,
            qualifier: raw.qualifier.parse().map_err(bad)?,
            value,
            unit: raw.unit.parse().map_err(bad)?,
            raw_text: raw.value.trim().to_string(),
        };
        match rows.iter_mut().find(|r| {
            r.doc_id == raw.doc_id
                && r.coref_id == raw.coref_id
                && r.smiles == raw.smiles
                && r.molecule_page == raw.molecule_page
        }) {
            Some(row) => row.activities.push(activity),
            None => rows.push(GroundTruthRow {
                doc_id: raw.doc_id,
                coref_id: raw.coref_id,
                smiles: raw.smiles,
                activities: vec![activity],
                molecule_page: raw.molecule_page,
                molecule_bbox: None,
                table_page: raw.table_page,
            }),
        }
    }
    Ok(rows)
}

/// Writes ground-truth rows in the CSV exchange format (one line per activity).
pub fn write_ground_truth<W: std::io::Write>(rows: &[GroundTruthRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(GROUND_TRUTH_HEADER)?;
    for row in rows {
        for a in &row.activities {
            w.write_record([
                row.doc_id.as_str(),
                row.coref_id.as_str(),
                row.smiles.as_str(),
                a.attribute.as_str(),
                a.qualifier.symbol(),
                &format_value(a.value),
                a.unit.symbol(),
                &row.molecule_page.to_string(),
                &row.table_page.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shortest decimal text that parses back to the same value.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}
