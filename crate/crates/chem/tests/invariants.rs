use moldpo_chem::descriptors::{arithmetic_mean, geometric_mean, threshold_modifier, DEFAULT_RADIUS, DEFAULT_WIDTH};
use moldpo_chem::smiles::{detokenize, formula, parse};
use moldpo_chem::tasks::{isomer_task, rediscovery_task, score_batch};
use moldpo_chem::{canonicalize, circular_fingerprint, tanimoto, tokenize, validate, Fingerprint};
use proptest::prelude::*;

const SEEDS: &[&str] = &[
    "CCO",
    "CC(=O)Nc1ccccc1",
    "c1ccc2ccccc2c1",
    "C1CC2CCC1CC2",
    "O=C(O)C[C@H](N)C(=O)O",
    "C[N+](C)(C)C.[Cl-]",
    "c1cc[nH]c1",
    "FC(F)(F)c1ccc(Br)cc1",
    "N#CC1=CC=CC=C1",
    "O=S(=O)(N)c1ccc(Cl)cc1",
    "CC(C)CCCCCCCC",
];

fn smiles_strategy() -> impl Strategy<Value = String> {
    prop::sample::select(SEEDS).prop_map(str::to_string)
}

fn fingerprint_strategy() -> impl Strategy<Value = Fingerprint> {
    prop::collection::btree_set(0usize..256, 0..40).prop_map(|bits| Fingerprint::from_bits(256, bits).unwrap())
}

proptest! {
    #[test]
    fn tokenize_round_trips_accepted_text(s in "[CNOScnos()=#1-9%\\[\\]H+@.Brl-]{1,40}") {
        if let Ok(tokens) = tokenize(&s) {
            prop_assert_eq!(detokenize(&tokens), s);
        }
    }

    #[test]
    fn validate_is_total_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let s = String::from_utf8_lossy(&bytes);
        let v = validate(&s);
        prop_assert_eq!(v.valid, parse(&s).is_ok());
        prop_assert_eq!(v.valid, v.diagnostic.is_none());
    }

    #[test]
    fn canonical_form_survives_relabeling(s in smiles_strategy(), seed in any::<u64>()) {
        let g = parse(&s).unwrap();
        let n = g.atom_count();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let c = canonicalize(&g);
        prop_assert_eq!(canonicalize(&g.permuted(&perm)), c.clone());
        let again = parse(&c).unwrap();
        prop_assert_eq!(canonicalize(&again), c);
        prop_assert_eq!(formula(&again), formula(&g));
    }

    #[test]
    fn tanimoto_is_symmetric_and_bounded(a in fingerprint_strategy(), b in fingerprint_strategy()) {
        let ab = tanimoto(&a, &b).unwrap();
        prop_assert_eq!(ab, tanimoto(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
    }

    #[test]
    fn geometric_mean_lies_between_extremes(scores in prop::collection::vec(1e-6f64..=1.0, 1..12)) {
        let g = geometric_mean(&scores).unwrap();
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(0.0, f64::max);
        prop_assert!(g >= lo - 1e-12 && g <= hi + 1e-12);
        prop_assert!(g <= arithmetic_mean(&scores).unwrap() + 1e-12);
    }

    #[test]
    fn threshold_ramp_is_bounded(x in -10.0f64..10.0, t in 0.01f64..5.0, asc in any::<bool>()) {
        let v = threshold_modifier(x, t, asc).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn batch_agrees_with_single_scores(batch in prop::collection::vec(smiles_strategy(), 1..6)) {
        let oracle = rediscovery_task("CC(=O)Nc1ccccc1").unwrap();
        let scores = score_batch(&oracle, &batch);
        for (s, score) in batch.iter().zip(scores) {
            prop_assert_eq!(score, oracle.score(&parse(s).unwrap()));
            prop_assert!((0.0..=1.0).contains(&score));
        }
    }
}

#[test]
fn fingerprints_are_stable_bytes() {
    let a = circular_fingerprint(&parse("CC(=O)Nc1ccccc1").unwrap(), DEFAULT_RADIUS, DEFAULT_WIDTH).unwrap();
    let b = circular_fingerprint(&parse("c1ccccc1NC(C)=O").unwrap(), DEFAULT_RADIUS, DEFAULT_WIDTH).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert!(a.count_ones() >= 1);
}

#[test]
fn methane_and_benzene_share_no_atom_bits() {
    let methane = circular_fingerprint(&parse("C").unwrap(), 0, DEFAULT_WIDTH).unwrap();
    let benzene = circular_fingerprint(&parse("c1ccccc1").unwrap(), 0, DEFAULT_WIDTH).unwrap();
    assert_eq!(tanimoto(&methane, &benzene).unwrap(), 0.0);
}

#[test]
fn undecane_isomers_score_one() {
    let oracle = isomer_task("C11H24").unwrap();
    for s in ["CCCCCCCCCCC", "CC(C)(C)CC(C)(C)CCC", "CCC(CC)(CC)C(C)CC"] {
        assert_eq!(oracle.score(&parse(s).unwrap()), 1.0, "{s}");
    }
    for s in ["CCCCCCCCCC=C", "CCCCCCCCCCCC", "C1CCCCCCCCCC1", "CCCCCCCCCCO"] {
        assert!(oracle.score(&parse(s).unwrap()) < 1.0, "{s}");
    }
}
