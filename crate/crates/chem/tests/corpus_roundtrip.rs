use std::path::PathBuf;

use moldpo_chem::smiles::{canonical_smiles, detokenize, parse, read_corpus, tokenize};
use moldpo_chem::{canonicalize, properties};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/corpus/moses_10k.smi");
    read_corpus(path).expect("corpus is shipped with the repository")
}

#[test]
fn every_corpus_line_parses_and_canonicalizes_to_a_fixed_point() {
    let smiles = corpus();
    assert_eq!(smiles.len(), 10_000);
    for s in &smiles {
        let c1 = canonical_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        let c2 = canonical_smiles(&c1).unwrap_or_else(|e| panic!("{s} -> {c1}: {e}"));
        assert_eq!(c1, c2, "{s}");
    }
}

#[test]
fn tokenize_round_trip_on_corpus() {
    for s in corpus().iter().take(1000) {
        assert_eq!(&detokenize(&tokenize(s).unwrap()), s);
    }
}

#[test]
fn canonical_form_is_permutation_invariant_on_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in corpus().iter().take(1000) {
        let g = parse(s).unwrap();
        let c = canonicalize(&g);
        let p = properties(&g);
        for _ in 0..3 {
            let mut perm: Vec<usize> = (0..g.atom_count()).collect();
            perm.shuffle(&mut rng);
            let h = g.permuted(&perm);
            assert_eq!(canonicalize(&h), c, "{s}");
            assert_eq!(properties(&h), p, "{s}");
        }
    }
}

#[test]
fn planted_target_is_in_corpus() {
    let target = canonical_smiles("CC(=O)Nc1ccccc1").unwrap();
    let hits = corpus().iter().filter(|s| canonical_smiles(s).unwrap() == target).count();
    assert!(hits >= 1);
    assert_eq!(parse("CC(=O)Nc1ccccc1").unwrap().atom_count(), 10);
}
