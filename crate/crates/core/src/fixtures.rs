//! Built-in demonstration corpus: ten small documents with oracle backend
//! answers and ground truth, covering same-page and cross-page links,
//! full-width identifiers, molecules drawn inside tables, merged header cells,
//! screened-out tables, duplicates and missing identifiers.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use image::{DynamicImage, GrayImage, Luma};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::backends::{CorefEntry, FixtureOracle};
use crate::domain::{
    encode_png, ActivityValue, Attribute, BBox, DocType, DocumentBundle, GroundTruthRow, PageRef,
    Qualifier, Region, RegionKind, Unit,
};
use crate::metrics::{CorefTruth, Difficulty};

pub const PAGE_WIDTH: u32 = 612;
pub const PAGE_HEIGHT: u32 = 792;
pub const PAGE_DPI: u32 = 72;

/// Sub-task annotations per document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Annotations {
    /// doc id → molecule region id → identifier truth.
    pub coref: BTreeMap<String, BTreeMap<String, CorefTruth>>,
    /// doc id → table region id → (truth HTML, difficulty).
    pub tables: BTreeMap<String, BTreeMap<String, (String, Difficulty)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoCorpus {
    pub bundles: Vec<DocumentBundle>,
    pub oracle: FixtureOracle,
    pub truth: Vec<GroundTruthRow>,
    pub annotations: Annotations,
}

fn act(attribute: Attribute, qualifier: Qualifier, value: f64, unit: Unit) -> ActivityValue {
    ActivityValue {
        attribute,
        qualifier,
        value,
        unit,
        raw_text: String::new(),
    }
}

fn left(id: &str) -> CorefEntry {
    CorefEntry::Context {
        left: Some(id.into()),
        right: None,
        same_cell: None,
        nearby: None,
    }
}

fn right_only(id: &str) -> CorefEntry {
    CorefEntry::Context {
        left: Some(String::new()),
        right: Some(id.into()),
        same_cell: None,
        nearby: None,
    }
}

struct Doc<'a> {
    corpus: &'a mut DemoCorpus,
    bundle: DocumentBundle,
}

impl<'a> Doc<'a> {
    fn new(corpus: &'a mut DemoCorpus, doc_id: &str, doc_type: DocType, lang: &str, pages: usize) -> Self {
        corpus.annotations.coref.entry(doc_id.into()).or_default();
        corpus.annotations.tables.entry(doc_id.into()).or_default();
        Self {
            corpus,
            bundle: DocumentBundle {
                doc_id: doc_id.into(),
                doc_type,
                language_tags: [lang.to_string()].into_iter().collect(),
                dpi: PAGE_DPI,
                pages: (0..pages)
                    .map(|i| PageRef {
                        width: PAGE_WIDTH,
                        height: PAGE_HEIGHT,
                        dpi: PAGE_DPI,
                        image: format!("page_{i:03}.png"),
                    })
                    .collect(),
                regions: Vec::new(),
                root: None,
            },
        }
    }

    fn region_id(&self, local: &str) -> String {
        format!("{}-{local}", self.bundle.doc_id)
    }

    #[allow(clippy::too_many_arguments)]
    fn molecule(&mut self, local: &str, page: usize, bbox: BBox, smiles: &str, coref: CorefEntry, truth_id: Option<&str>, difficulty: Difficulty) {
        let id = self.region_id(local);
        self.bundle.regions.push(Region {
            id: id.clone(),
            page_index: page,
            kind: RegionKind::Molecule,
            bbox,
            confidence: 0.97,
            text: None,
            activity: None,
        });
        self.corpus.oracle.ocsr.insert(id.clone(), smiles.into());
        self.corpus.oracle.coref.insert(id.clone(), coref);
        if let Some(t) = truth_id {
            self.corpus.annotations.coref.get_mut(&self.bundle.doc_id).expect("doc entry").insert(
                id,
                CorefTruth {
                    id: t.into(),
                    difficulty,
                },
            );
        }
    }

    fn table(&mut self, local: &str, page: usize, bbox: BBox, html: Option<&str>, text: Option<&str>, difficulty: Difficulty) {
        let id = self.region_id(local);
        let relevant = html.is_some_and(|h| !h.contains("None"));
        self.bundle.regions.push(Region {
            id: id.clone(),
            page_index: page,
            kind: RegionKind::Table,
            bbox,
            confidence: 0.93,
            text: text.map(str::to_string),
            activity: Some(relevant),
        });
        if let Some(h) = html {
            self.corpus.oracle.tables.insert(id.clone(), h.into());
            self.corpus
                .annotations
                .tables
                .get_mut(&self.bundle.doc_id)
                .expect("doc entry")
                .insert(id, (h.into(), difficulty));
        }
    }

    fn truth(&mut self, coref: &str, smiles: &str, mol_page: usize, table_page: usize, acts: Vec<ActivityValue>) {
        self.corpus.truth.push(GroundTruthRow {
            doc_id: self.bundle.doc_id.clone(),
            coref_id: coref.into(),
            smiles: smiles.into(),
            activities: acts,
            molecule_page: mol_page,
            molecule_bbox: None,
            table_page: Some(table_page),
        });
    }

    fn finish(self) {
        self.corpus.bundles.push(self.bundle);
    }
}

const MOL_A: BBox = BBox {
    x: 60.0,
    y: 80.0,
    w: 200.0,
    h: 150.0,
};
const MOL_B: BBox = BBox {
    x: 340.0,
    y: 80.0,
    w: 200.0,
    h: 150.0,
};
const MOL_C: BBox = BBox {
    x: 60.0,
    y: 260.0,
    w: 200.0,
    h: 120.0,
};
const TABLE: BBox = BBox {
    x: 50.0,
    y: 420.0,
    w: 500.0,
    h: 300.0,
};

/// Builds the corpus in memory.
pub fn demo_corpus() -> DemoCorpus {
    use Attribute::*;
    use Difficulty::{Hard, Simple};
    use Qualifier as Q;
    use Unit::*;

    let mut c = DemoCorpus {
        bundles: Vec::new(),
        oracle: FixtureOracle::default(),
        truth: Vec::new(),
        annotations: Annotations::default(),
    };

    // Structures and their table on one page.
    let mut d = Doc::new(&mut c, "d01", DocType::Patent, "en", 1);
    d.molecule("m1", 0, MOL_A, "NC(=O)c1ccccc1", left("1a"), Some("1a"), Simple);
    d.molecule("m2", 0, MOL_B, "Cc1ccccc1C(N)=O", left("1b"), Some("1b"), Simple);
    d.table(
        "t1",
        0,
        TABLE,
        Some("<table><tr><th>Compound</th><th>IC50 (nM)</th></tr><tr><td>1a</td><td>12.5</td></tr><tr><td>1b</td><td>&lt;10</td></tr></table>"),
        None,
        Simple,
    );
    d.truth("1a", "NC(=O)c1ccccc1", 0, 0, vec![act(IC50, Q::None, 12.5, Nanomolar)]);
    d.truth("1b", "Cc1ccccc1C(N)=O", 0, 0, vec![act(IC50, Q::LT, 10.0, Nanomolar)]);
    d.finish();

    // Structure on page 34, activities on page 70.
    let mut d = Doc::new(&mut c, "d02", DocType::Patent, "en", 71);
    d.molecule("m1", 34, MOL_A, "CCOc1ccc(cc1)C(=O)O", left("Compound 5"), Some("5"), Simple);
    d.molecule("m2", 35, MOL_A, "CCOc1ccc(cc1)C(N)=O", right_only("6"), Some("6"), Hard);
    d.table(
        "t1",
        70,
        TABLE,
        Some("```html\n<table>\n<tr><th>Example</th><th>IC50 (µM)</th></tr>\n<tr><td>5</td><td>0.42</td></tr>\n<tr><td>6</td><td>1.7</td></tr>\n</table>\n```"),
        None,
        Simple,
    );
    d.truth("5", "CCOc1ccc(cc1)C(=O)O", 34, 70, vec![act(IC50, Q::None, 0.42, Micromolar)]);
    d.truth("6", "CCOc1ccc(cc1)C(N)=O", 35, 70, vec![act(IC50, Q::None, 1.7, Micromolar)]);
    d.finish();

    // Full-width identifiers with a Japanese prefix.
    let mut d = Doc::new(&mut c, "d03", DocType::Patent, "ja", 2);
    d.molecule("m1", 0, MOL_A, "O=C(O)c1ccncc1", CorefEntry::Plain("化合物１２".into()), Some("12"), Hard);
    d.molecule("m2", 0, MOL_B, "NC(=O)c1ccncc1", CorefEntry::Plain("化合物１３".into()), Some("13"), Hard);
    d.table(
        "t1",
        1,
        TABLE,
        Some("<table><tr><th>化合物</th><th>IC₅₀ (µM)</th></tr><tr><td>12</td><td>0,85</td></tr><tr><td>13</td><td>≥ 10</td></tr></table>"),
        None,
        Simple,
    );
    d.truth("12", "O=C(O)c1ccncc1", 0, 1, vec![act(IC50, Q::None, 0.85, Micromolar)]);
    d.truth("13", "NC(=O)c1ccncc1", 0, 1, vec![act(IC50, Q::GE, 10.0, Micromolar)]);
    d.finish();

    // Identifiers that differ from the table only in case.
    let mut d = Doc::new(&mut c, "d04", DocType::Literature, "en", 1);
    d.molecule("m1", 0, MOL_A, "Clc1ccc(cc1)N1CCNCC1", CorefEntry::Plain("A35".into()), Some("A35"), Simple);
    d.molecule("m2", 0, MOL_B, "Fc1ccc(cc1)N1CCNCC1", CorefEntry::Plain("B2".into()), Some("B2"), Simple);
    d.table(
        "t1",
        0,
        TABLE,
        Some("<table><tr><th>ID</th><th>Ki (nM)</th></tr><tr><td>a35</td><td>3.0 ± 0.4</td></tr><tr><td>b2</td><td>&gt; 1000</td></tr></table>"),
        None,
        Simple,
    );
    d.truth("A35", "Clc1ccc(cc1)N1CCNCC1", 0, 0, vec![act(Ki, Q::None, 3.0, Nanomolar)]);
    d.truth("B2", "Fc1ccc(cc1)N1CCNCC1", 0, 0, vec![act(Ki, Q::GT, 1000.0, Nanomolar)]);
    d.finish();

    // Structures drawn inside the activity table.
    let mut d = Doc::new(&mut c, "d05", DocType::Literature, "en", 1);
    let table = BBox::new(40.0, 100.0, 530.0, 400.0);
    let in_table = |id: Option<&str>, nearby: Option<&str>| CorefEntry::Context {
        left: Some("Scheme 2".into()),
        right: None,
        same_cell: id.map(str::to_string),
        nearby: nearby.map(str::to_string),
    };
    d.molecule("m1", 0, BBox::new(150.0, 160.0, 150.0, 100.0), "c1ccc2[nH]ccc2c1", in_table(Some("7"), None), Some("7"), Hard);
    d.molecule("m2", 0, BBox::new(150.0, 300.0, 150.0, 100.0), "Cc1c[nH]c2ccccc12", in_table(None, Some("8")), Some("8"), Hard);
    d.table(
        "t1",
        0,
        table,
        Some("<table><tr><th>Cpd</th><th>Structure</th><th>IC50 (nM)</th><th>EC50 (nM)</th></tr><tr><td>7</td><td>[mol]</td><td>45</td><td>120</td></tr><tr><td>8</td><td>[mol]</td><td>3.1</td><td>n.d.</td></tr></table>"),
        None,
        Hard,
    );
    d.truth(
        "7",
        "c1ccc2[nH]ccc2c1",
        0,
        0,
        vec![act(IC50, Q::None, 45.0, Nanomolar), act(EC50, Q::None, 120.0, Nanomolar)],
    );
    d.truth("8", "Cc1c[nH]c2ccccc12", 0, 0, vec![act(IC50, Q::None, 3.1, Nanomolar)]);
    d.finish();

    // A non-activity table next to an activity table; identifiers to the right.
    let mut d = Doc::new(&mut c, "d06", DocType::Patent, "en", 2);
    d.molecule("m1", 0, MOL_A, "OC1CCN(CC1)c1ncccn1", right_only("15"), Some("15"), Hard);
    d.molecule("m2", 1, MOL_A, "NC1CCN(CC1)c1ncccn1", left("16"), Some("16"), Simple);
    d.table("t1", 0, TABLE, Some("<table>None</table>"), None, Simple);
    d.table(
        "t2",
        1,
        TABLE,
        Some("<table><tr><th>No.</th><th>TC50 (µM)</th><th>Ti</th></tr><tr><td>15</td><td>12</td><td>8.5</td></tr><tr><td>16</td><td>40</td><td>2</td></tr></table>"),
        None,
        Simple,
    );
    d.truth(
        "15",
        "OC1CCN(CC1)c1ncccn1",
        0,
        1,
        vec![act(TC50, Q::None, 12.0, Micromolar), act(Ti, Q::None, 8.5, Unknown)],
    );
    d.truth(
        "16",
        "NC1CCN(CC1)c1ncccn1",
        1,
        1,
        vec![act(TC50, Q::None, 40.0, Micromolar), act(Ti, Q::None, 2.0, Unknown)],
    );
    d.finish();

    // Two-level header with merged cells.
    let mut d = Doc::new(&mut c, "d07", DocType::Patent, "en", 1);
    d.molecule("m1", 0, MOL_A, "COc1cc2ncnc(Nc3ccccc3)c2cc1OC", left("21"), Some("21"), Simple);
    d.molecule("m2", 0, MOL_B, "COc1cc2ncnc(Nc3cccc(Cl)c3)c2cc1OC", left("22"), Some("22"), Simple);
    d.table(
        "t1",
        0,
        TABLE,
        Some("<table><tr><th rowspan=\"2\">Compound</th><th colspan=\"2\">IC50 (nM)</th></tr><tr><th>EGFR</th><th>HER2</th></tr><tr><td>21</td><td>5.5</td><td>60</td></tr><tr><td>22</td><td>0.9</td><td>&lt;1</td></tr></table>"),
        None,
        Hard,
    );
    d.truth(
        "21",
        "COc1cc2ncnc(Nc3ccccc3)c2cc1OC",
        0,
        0,
        vec![act(IC50, Q::None, 5.5, Nanomolar), act(IC50, Q::None, 60.0, Nanomolar)],
    );
    d.truth(
        "22",
        "COc1cc2ncnc(Nc3cccc(Cl)c3)c2cc1OC",
        0,
        0,
        vec![act(IC50, Q::None, 0.9, Nanomolar), act(IC50, Q::LT, 1.0, Nanomolar)],
    );
    d.finish();

    // The same compound drawn twice, plus a structure without an identifier.
    let mut d = Doc::new(&mut c, "d08", DocType::Literature, "en", 1);
    d.molecule("m1", 0, MOL_A, "CC(C)Nc1ncnc2ccccc12", left("30"), Some("30"), Simple);
    d.molecule("m2", 0, MOL_B, "c1ccc2c(c1)c(ncn2)NC(C)C", left("30"), Some("30"), Simple);
    d.molecule("m3", 0, MOL_C, "CC(C)Nc1ncnc2ccncc12", CorefEntry::Plain("[None]".into()), None, Simple);
    d.table(
        "t1",
        0,
        TABLE,
        Some("<table><tr><th>Entry</th><th>Kd (nM)</th></tr><tr><td>30</td><td>15</td></tr><tr><td>31</td><td>220</td></tr></table>"),
        None,
        Simple,
    );
    d.truth("30", "CC(C)Nc1ncnc2ccccc12", 0, 0, vec![act(Kd, Q::None, 15.0, Nanomolar)]);
    d.finish();

    // Unitless and dose-style attributes; one identifier carries a prefix.
    let mut d = Doc::new(&mut c, "d09", DocType::Literature, "en", 1);
    d.molecule("m1", 0, MOL_A, "O=C1C=C(c2ccccc2)C(=O)N1", left("40"), Some("40"), Simple);
    d.molecule("m2", 0, MOL_B, "O=C1C=C(c2ccc(F)cc2)C(=O)N1", left("cpd 41"), Some("41"), Simple);
    d.table(
        "t1",
        0,
        TABLE,
        Some("<table><tr><th>Compound</th><th>pKd</th><th>TD50</th></tr><tr><td>40</td><td>7.2</td><td>25</td></tr><tr><td>41</td><td>6.85</td><td>110</td></tr></table>"),
        None,
        Simple,
    );
    d.truth(
        "40",
        "O=C1C=C(c2ccccc2)C(=O)N1",
        0,
        0,
        vec![act(PKd, Q::None, 7.2, Unknown), act(TD50, Q::None, 25.0, Unknown)],
    );
    d.truth(
        "41",
        "O=C1C=C(c2ccc(F)cc2)C(=O)N1",
        0,
        0,
        vec![act(PKd, Q::None, 6.85, Unknown), act(TD50, Q::None, 110.0, Unknown)],
    );
    d.finish();

    // A yields table removed by keyword screening; units only in the caption.
    let mut d = Doc::new(&mut c, "d10", DocType::Literature, "en", 2);
    d.molecule("m1", 1, MOL_A, "CN1CCN(CC1)c1ccc(N)cc1", left("example 3"), Some("Example 3"), Simple);
    d.molecule("m2", 1, MOL_B, "CN1CCN(CC1)c1ccc(O)cc1", left("Example 4"), Some("Example 4"), Simple);
    d.table("t1", 0, TABLE, None, Some("Table 1. Synthetic yields (%) by step"), Simple);
    d.table(
        "t2",
        1,
        TABLE,
        Some("<table><tr><th>Example</th><th>Ki</th></tr><tr><td>Example 3</td><td>2,5</td></tr><tr><td>Example 4</td><td>0.75</td></tr></table>"),
        Some("Table 2. Ki values (nM) at the human receptor"),
        Simple,
    );
    d.truth("Example 3", "CN1CCN(CC1)c1ccc(N)cc1", 1, 1, vec![act(Ki, Q::None, 2.5, Nanomolar)]);
    d.truth("Example 4", "CN1CCN(CC1)c1ccc(O)cc1", 1, 1, vec![act(Ki, Q::None, 0.75, Nanomolar)]);
    d.finish();

    c
}

fn blank_page(doc_index: usize, page: usize) -> DynamicImage {
    // A faint per-page mark keeps page images distinct.
    let mut img = GrayImage::from_pixel(PAGE_WIDTH, PAGE_HEIGHT, Luma([255]));
    let x = (doc_index * 7 + page) as u32 % PAGE_WIDTH;
    img.put_pixel(x, 0, Luma([0]));
    DynamicImage::ImageLuma8(img)
}

/// Writes bundles (manifest plus page images) under `dir/docs`, and
/// `oracle.json`, `truth.csv` and `annotations.json` under `dir`.
pub fn write_demo_corpus(dir: &Path) -> io::Result<DemoCorpus> {
    let corpus = demo_corpus();
    let docs = dir.join("docs");
    for (i, b) in corpus.bundles.iter().enumerate() {
        let bdir = docs.join(&b.doc_id);
        std::fs::create_dir_all(&bdir)?;
        b.write_manifest(&bdir).map_err(io::Error::other)?;
        for (p, page) in b.pages.iter().enumerate() {
            std::fs::write(bdir.join(&page.image), encode_png(&blank_page(i, p)))?;
        }
    }
    std::fs::write(dir.join("oracle.json"), serde_json::to_vec_pretty(&corpus.oracle)?)?;
    std::fs::write(dir.join("annotations.json"), serde_json::to_vec_pretty(&corpus.annotations)?)?;
    let f = std::fs::File::create(dir.join("truth.csv"))?;
    crate::domain::write_ground_truth(&corpus.truth, f).map_err(io::Error::other)?;
    Ok(corpus)
}
