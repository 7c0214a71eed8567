use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarline_core::align::{levenshtein, similarity};
use sarline_core::domain::{
    ActivityValue, Attribute, BBox, DocType, DocumentBundle, GroundTruthRow, MatchTier, PageRef, Qualifier, Region,
    RegionAnchor, RegionKind, SarRecord, Unit,
};
use sarline_core::metrics::{
    aggregate, evaluate_document, rename_cost_fraction, table_recall, teds, tree_edit_distance, RecallCount,
};
use sarline_core::stats::{compute_stats, summarize_atom_counts};
use sarline_core::tableparse::{screen_keywords, NOT_ACTIVITY_SENTINEL};

use crate::generators::{random_table_html, random_tree};
use crate::oracles::{brute_force_ted, wagner_fischer, Exact};
use crate::{ensure, Outcome};

pub fn similarity_values() -> Outcome {
    let a = similarity("A35", "A36").map_err(|e| e.to_string())?;
    ensure!(a == 2.0 / 3.0, "similarity(A35, A36) = {a}");
    let b = similarity("compound 5", "compound9").map_err(|e| e.to_string())?;
    ensure!(b == 0.8, "similarity(compound 5, compound9) = {b}");

    let alphabet: Vec<char> = "ab1-é".chars().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..rng.random_range(0..=8)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
    };
    let triples = 10_000;
    for _ in 0..triples {
        let (x, y, z) = (word(&mut rng), word(&mut rng), word(&mut rng));
        let (dxy, dyx, dyz, dxz) = (levenshtein(&x, &y), levenshtein(&y, &x), levenshtein(&y, &z), levenshtein(&x, &z));
        ensure!(dxy == wagner_fischer(&x, &y), "lev({x:?}, {y:?}) = {dxy}, reference {}", wagner_fischer(&x, &y));
        ensure!(levenshtein(&x, &x) == 0, "lev({x:?}, {x:?}) != 0");
        ensure!((dxy == 0) == (x == y), "identity fails for {x:?}, {y:?}");
        ensure!(dxy == dyx, "asymmetric on {x:?}, {y:?}");
        ensure!(dxz <= dxy + dyz, "triangle fails on {x:?}, {y:?}, {z:?}");
        if let Ok(s) = similarity(&x, &y) {
            let m = x.chars().count().max(y.chars().count());
            ensure!(s == (m - dxy) as f64 / m as f64, "similarity({x:?}, {y:?}) = {s}");
        }
    }
    Ok(format!("2/3 and 0.8 exact; metric laws on {triples} triples"))
}

pub fn ted_dp_vs_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pairs = 600;
    let mut nonzero = 0;
    for k in 0..pairs {
        let a = random_tree(&mut rng, 8);
        let b = random_tree(&mut rng, 8);
        let dp: Exact = tree_edit_distance(Some(&a), Some(&b), |x, y| {
            let (n, d) = rename_cost_fraction(x, y);
            Exact(Ratio::new(n as i64, d as i64))
        });
        let brute = brute_force_ted(&a, &b);
        ensure!(dp.0 == brute, "pair {k}: dp {} != brute force {brute}\n{a:?}\n{b:?}", dp.0);
        nonzero += usize::from(brute != Ratio::from_integer(0));
    }
    Ok(format!("{pairs} tree pairs of at most 8 nodes agree exactly ({nonzero} at nonzero distance)"))
}

pub fn teds_self_and_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let pairs = 1000;
    let mut tables: Vec<String> = vec![NOT_ACTIVITY_SENTINEL.to_string()];
    let mut distinct = 0;
    for k in 0..pairs {
        let a = if k % 50 == 0 { tables[0].clone() } else { random_table_html(&mut rng) };
        let b = random_table_html(&mut rng);
        let aa = teds(&a, &a).map_err(|e| format!("{a}: {e}"))?;
        ensure!(aa == 1.0, "teds(a, a) = {aa} for {a}");
        let ab = teds(&a, &b).map_err(|e| e.to_string())?;
        let ba = teds(&b, &a).map_err(|e| e.to_string())?;
        ensure!(ab.to_bits() == ba.to_bits(), "teds(a, b) = {ab} but teds(b, a) = {ba}\n{a}\n{b}");
        ensure!((0.0..=1.0).contains(&ab), "teds out of range: {ab}");
        distinct += usize::from(ab < 1.0);
        tables.push(b);
    }
    Ok(format!("{pairs} pairs: self score 1 and exact symmetry ({distinct} pairs below 1)"))
}

pub fn screening_grid() -> Outcome {
    // (keyword, unicode subscript spelling, markup subscript spelling)
    let keywords = [
        ("IC50", "IC₅₀", "IC<sub>50</sub>"),
        ("EC50", "EC₅₀", "EC<sub>50</sub>"),
        ("TD50", "TD₅₀", "TD<sub>50</sub>"),
        ("TC50", "TC₅₀", "TC<sub>50</sub>"),
        ("Ki", "Kᵢ", "K<sub>i</sub>"),
        ("Kd", "K d", "K<sub>d</sub>"),
        ("pKd", "pK d", "pK<sub>d</sub>"),
        ("TI", "Tᵢ", "T<sub>I</sub>"),
    ];
    let mut cases: Vec<(String, bool)> = Vec::new();
    for (plain, unicode, markup) in keywords {
        let mixed: String = plain
            .chars()
            .enumerate()
            .map(|(i, c)| if i % 2 == 0 { c.to_ascii_lowercase() } else { c.to_ascii_uppercase() })
            .collect();
        cases.push((plain.to_lowercase(), true));
        cases.push((plain.to_uppercase(), true));
        cases.push((mixed, true));
        cases.push((unicode.to_string(), true));
        cases.push((markup.to_string(), true));
        cases.push((format!("{plain} (nM)"), true));
        cases.push((format!("Mean {markup} value"), true));
    }
    for unit in ["nM", "µM", "uM", "%", "kcal/mol", "mol/L", "mg/kg", "ng/mL"] {
        cases.push((unit.to_string(), false));
    }
    let wrong: Vec<String> = cases
        .iter()
        .filter(|(text, want)| screen_keywords(text) != *want)
        .map(|(text, want)| format!("{text:?} expected {want}"))
        .collect();
    ensure!(wrong.is_empty(), "{} of {} cases wrong: {}", wrong.len(), cases.len(), wrong.join(", "));
    let distinct: BTreeSet<&String> = cases.iter().map(|(t, _)| t).collect();
    ensure!(cases.len() == 64, "grid has {} cases", cases.len());
    Ok(format!("{} cases ({} distinct strings) screen as expected", cases.len(), distinct.len()))
}

fn table_region(id: String, activity: bool) -> Region {
    Region {
        id,
        page_index: 0,
        kind: RegionKind::Table,
        bbox: BBox::new(10.0, 10.0, 100.0, 100.0),
        confidence: 1.0,
        text: None,
        activity: Some(activity),
    }
}

pub fn stats_fraction() -> Outcome {
    let (total, relevant) = (2617usize, 599usize);
    let docs = 37;
    let mut bundles: Vec<DocumentBundle> = (0..docs)
        .map(|d| DocumentBundle {
            doc_id: format!("s{d:02}"),
            doc_type: if d % 3 == 0 { DocType::Literature } else { DocType::Patent },
            language_tags: BTreeSet::new(),
            dpi: 72,
            pages: vec![PageRef {
                width: 612,
                height: 792,
                dpi: 72,
                image: "p.png".into(),
            }],
            regions: Vec::new(),
            root: None,
        })
        .collect();
    for t in 0..total {
        let b = &mut bundles[(t * 7) % docs];
        let id = format!("{}-t{t}", b.doc_id);
        b.regions.push(table_region(id, t % 4 == 1 && t / 4 < relevant));
    }
    let r = compute_stats(&[], &bundles, 5).map_err(|e| e.to_string())?;
    let tc = &r.table_counts;
    ensure!(tc.total == total && tc.relevant == relevant, "counted {} tables, {} relevant", tc.total, tc.relevant);
    ensure!(
        (tc.irrelevant_fraction - 0.7711).abs() <= 1e-4,
        "irrelevant fraction {}",
        tc.irrelevant_fraction
    );
    Ok(format!("{} of {} irrelevant: {:.6}", tc.total - tc.relevant, tc.total, tc.irrelevant_fraction))
}

pub fn stats_summary() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let trials = 500;
    for k in 0..trials {
        let n = rng.random_range(1..=200);
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(1..=90)).collect();
        let s = summarize_atom_counts(&counts, 5).map_err(|e| e.to_string())?;
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        let sum: usize = counts.iter().sum();
        let mean = sum as f64 / n as f64;
        let median = if n % 2 == 1 {
            sorted[n / 2] as f64
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
        };
        ensure!(s.n == n, "trial {k}: n {} != {n}", s.n);
        ensure!(s.mean == mean, "trial {k}: mean {} != {mean}", s.mean);
        ensure!(s.median == median, "trial {k}: median {} != {median}", s.median);
        ensure!(s.min == sorted[0] && s.max == sorted[n - 1], "trial {k}: min/max {}/{}", s.min, s.max);
    }
    Ok(format!("mean, median, min and max exact on {trials} samples"))
}

fn act(value: f64) -> ActivityValue {
    ActivityValue {
        attribute: Attribute::IC50,
        qualifier: Qualifier::None,
        value,
        unit: Unit::Nanomolar,
        raw_text: String::new(),
    }
}

fn truth(doc: &str, id: &str, smiles: &str, value: f64) -> GroundTruthRow {
    GroundTruthRow {
        doc_id: doc.into(),
        coref_id: id.into(),
        smiles: smiles.into(),
        activities: vec![act(value)],
        molecule_page: 0,
        molecule_bbox: None,
        table_page: Some(0),
    }
}

fn record(doc: &str, id: &str, smiles: &str, value: f64) -> SarRecord {
    let anchor = |r: &str| RegionAnchor {
        region_id: r.into(),
        page_index: 0,
    };
    SarRecord {
        doc_id: doc.into(),
        smiles: smiles.into(),
        coref_id: id.into(),
        activities: vec![act(value)],
        molecule_region: anchor("m"),
        table_region: anchor("t"),
        table_row: 0,
        match_tier: MatchTier::Exact,
        match_similarity: 1.0,
        score: 1.0,
        edited: false,
        flags: Vec::new(),
    }
}

const SMILES: [(&str, &str); 4] = [
    ("CCO", "OCC"),
    ("c1ccccc1N", "Nc1ccccc1"),
    ("CC(=O)O", "OC(C)=O"),
    ("C1CC1C#N", "N#CC1CC1"),
];

/// Truth rows for `doc` and predictions hitting the first `hits` of them; the
/// others are predicted with a wrong value.
fn doc_rows(doc: &str, hits: usize) -> (Vec<GroundTruthRow>, Vec<SarRecord>) {
    let mut t = Vec::new();
    let mut p = Vec::new();
    for (i, (written, rewritten)) in SMILES.iter().enumerate() {
        let id = format!("{}", i + 1);
        t.push(truth(doc, &id, written, 10.0 * (i + 1) as f64));
        let v = if i < hits { 10.0 * (i + 1) as f64 } else { 999.0 };
        p.push(record(doc, &id, rewritten, v));
    }
    (t, p)
}

pub fn recall_arithmetic() -> Outcome {
    let (t, p) = doc_rows("r", 3);
    let r = table_recall(&p, &t).map_err(|e| e.to_string())?;
    let want = RecallCount {
        hit: 3,
        total: 4,
        rate: 0.75,
    };
    ensure!(r == want, "table_recall gave {r:?}");
    Ok(format!("({}, {}, {})", r.hit, r.total, r.rate))
}

pub fn aggregate_arithmetic() -> Outcome {
    let (tp, pp) = doc_rows("p", 2);
    let (tl, pl) = doc_rows("l", 4);
    let docs = vec![
        evaluate_document("p", DocType::Patent, &pp, &tp, None, None).map_err(|e| e.to_string())?,
        evaluate_document("l", DocType::Literature, &pl, &tl, None, None).map_err(|e| e.to_string())?,
    ];
    let r = aggregate(&docs).map_err(|e| e.to_string())?;
    let hits: usize = r.per_doc.values().map(|d| d.rows_hit).sum();
    let total: usize = r.per_doc.values().map(|d| d.rows_total).sum();
    ensure!((hits, total) == (6, 8), "counted {hits}/{total}");
    ensure!(r.overall == 0.75, "overall {}", r.overall);
    let patent = r.by_doc_type.get(&DocType::Patent).copied();
    let literature = r.by_doc_type.get(&DocType::Literature).copied();
    ensure!(patent == Some(0.5), "patent {patent:?}");
    ensure!(literature == Some(1.0), "literature {literature:?}");
    Ok(format!("{hits}/{total} = {}, patent 0.5, literature 1.0", r.overall))
}
