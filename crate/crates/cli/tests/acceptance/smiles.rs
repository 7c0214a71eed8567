use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarline_core::smiles::{canonical_key, heavy_atom_count, is_valid_smiles, parse_smiles, parse_smiles_bytes, to_smiles};

use crate::generators::{Mol, HARD_CASES};
use crate::oracles::{invariant, isomorphic};
use crate::{ensure, Outcome};

pub fn canonical_key_vs_isomorphism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut written: Vec<String> = HARD_CASES.iter().map(|s| s.to_string()).collect();
    for _ in 0..120 {
        let base = Mol::random(&mut rng, 8);
        written.push(base.write(&mut rng));
        written.push(base.write(&mut rng));
        written.push(base.mutate(&mut rng).write(&mut rng));
    }
    let mut graphs = Vec::new();
    for s in &written {
        let g = parse_smiles(s).map_err(|e| format!("generated {s:?} does not parse: {e}"))?;
        ensure!(heavy_atom_count(&g) <= 8, "{s:?} has more than 8 heavy atoms");
        graphs.push(g);
    }
    let keys: Vec<String> = graphs.iter().map(canonical_key).collect();
    let invariants: Vec<_> = graphs.iter().map(invariant).collect();
    let (mut iso_pairs, mut pairs) = (0, 0);
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            pairs += 1;
            let iso = invariants[i] == invariants[j] && isomorphic(&graphs[i], &graphs[j]);
            iso_pairs += usize::from(iso);
            ensure!(
                (keys[i] == keys[j]) == iso,
                "{:?} and {:?}: isomorphic {iso} but keys {}",
                written[i],
                written[j],
                if keys[i] == keys[j] { "equal" } else { "differ" }
            );
        }
        let again = parse_smiles(&to_smiles(&graphs[i])).map_err(|e| e.to_string())?;
        ensure!(canonical_key(&again) == keys[i], "write/parse changes the key of {:?}", written[i]);
    }
    Ok(format!("{} molecules, {pairs} pairs, {iso_pairs} isomorphic", graphs.len()))
}

const SMILES_BYTES: &[u8] = b"CNOSPFIBrcnospl()[]=#-+:/\\.%@H0123456789*";

pub fn validator_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let n = 100_000;
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut valid = 0;
    let mut failure = None;
    for k in 0..n {
        let len = rng.random_range(0..=48);
        let bytes: Vec<u8> = match k % 3 {
            0 => (0..len).map(|_| rng.random()).collect(),
            1 => (0..len).map(|_| SMILES_BYTES[rng.random_range(0..SMILES_BYTES.len())]).collect(),
            _ => {
                // A valid string with a few byte edits.
                let mut b = Mol::random(&mut rng, 8).write(&mut rng).into_bytes();
                for _ in 0..rng.random_range(0..=2) {
                    let c = SMILES_BYTES[rng.random_range(0..SMILES_BYTES.len())];
                    let i = rng.random_range(0..=b.len());
                    match rng.random_range(0..3) {
                        0 if i < b.len() => b[i] = c,
                        1 if i < b.len() => {
                            b.remove(i);
                        }
                        _ => b.insert(i, c),
                    }
                }
                b
            }
        };
        let r = catch_unwind(AssertUnwindSafe(|| {
            let parsed = parse_smiles_bytes(&bytes);
            if let Ok(s) = std::str::from_utf8(&bytes) {
                assert_eq!(is_valid_smiles(s), parsed.is_ok());
            }
            parsed.map(|g| canonical_key(&g)).is_ok()
        }));
        match r {
            Ok(ok) => valid += usize::from(ok),
            Err(_) => {
                failure = Some(bytes);
                break;
            }
        }
    }
    std::panic::set_hook(prev);
    if let Some(bytes) = failure {
        return Err(format!("panicked on {:?}", String::from_utf8_lossy(&bytes)));
    }
    Ok(format!("{n} byte strings, {valid} valid, no aborts"))
}
