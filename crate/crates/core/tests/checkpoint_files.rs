use moldpo_chem::Vocabulary;
use moldpo_core::checkpoint::checkpoint_bytes;
use moldpo_core::{
    adam_step, init_params, load_checkpoint, load_checkpoint_for, nll_loss_and_grad, save_checkpoint, CheckpointError,
    ModelConfig, OptimizerState, Params, TokenSequence,
};
use std::fs;

fn vocab() -> Vocabulary {
    Vocabulary::from_corpus(["CCO", "c1ccccc1N", "CC(=O)Cl"]).unwrap()
}

fn trained(vocab: &Vocabulary) -> (Params, OptimizerState<f32>) {
    let mut p: Params = init_params(&ModelConfig::tiny(vocab.len(), 5)).unwrap();
    let mut opt = OptimizerState::new(&p, 1e-3);
    let batch = vec![TokenSequence::from_smiles(vocab, "CCO").unwrap()];
    for _ in 0..3 {
        let (_, g) = nll_loss_and_grad(&p, &batch).unwrap();
        adam_step(&mut p, &mut opt, &g).unwrap();
    }
    (p, opt)
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let v = vocab();
    let (p, opt) = trained(&v);
    let first = dir.path().join("a.ckpt");
    let second = dir.path().join("b.ckpt");
    save_checkpoint(&p, Some(&opt), Some(&v), &first).unwrap();
    let ck = load_checkpoint::<f32>(&first).unwrap();
    assert_eq!(ck.params, p);
    assert_eq!(ck.optimizer.as_ref(), Some(&opt));
    assert_eq!(ck.vocab.as_ref(), Some(&v));
    save_checkpoint(&ck.params, ck.optimizer.as_ref(), ck.vocab.as_ref(), &second).unwrap();
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    assert!(!dir.path().join("a.partial").exists());
}

#[test]
fn file_layout_starts_with_magic_and_version() {
    let v = vocab();
    let (p, _) = trained(&v);
    let b = checkpoint_bytes(&p, None, None);
    assert_eq!(&b[..4], b"MDPO");
    assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
    let header_len = u32::from_le_bytes([b[6], b[7], b[8], b[9]]) as usize;
    let header: serde_json::Value = serde_json::from_slice(&b[10..10 + header_len]).unwrap();
    let tensors = header["tensors"].as_array().unwrap();
    assert_eq!(tensors.len(), p.tensors.len());
    let payload = p.num_scalars() * 4;
    assert_eq!(b.len(), 10 + header_len + payload + 4);
    let crc = u32::from_le_bytes(b[b.len() - 4..].try_into().unwrap());
    assert_eq!(crc, crc32fast::hash(&b[10 + header_len..b.len() - 4]));
}

#[test]
fn corrupted_payload_is_a_checksum_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let v = vocab();
    let (p, _) = trained(&v);
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&p, None, Some(&v), &path).unwrap();
    let mut b = fs::read(&path).unwrap();
    let mid = b.len() - 20;
    b[mid] ^= 0x40;
    fs::write(&path, &b).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(CheckpointError::ChecksumMismatch { .. })));
}

#[test]
fn wrong_version_or_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let v = vocab();
    let (p, _) = trained(&v);
    let good = checkpoint_bytes(&p, None, None);
    let path = dir.path().join("v.ckpt");
    let mut b = good.clone();
    b[4] = 9;
    fs::write(&path, &b).unwrap();
    assert!(matches!(
        load_checkpoint::<f32>(&path),
        Err(CheckpointError::FormatVersionMismatch { found: 9, expected: 1 })
    ));
    let mut b = good.clone();
    b[0] = b'X';
    fs::write(&path, &b).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&path), Err(CheckpointError::BadMagic)));
    fs::write(&path, &good[..12]).unwrap();
    assert!(load_checkpoint::<f32>(&path).is_err());
    assert!(matches!(load_checkpoint::<f32>(dir.path().join("missing")), Err(CheckpointError::Io(_))));
}

#[test]
fn other_vocabulary_is_incompatible() {
    let dir = tempfile::tempdir().unwrap();
    let v = vocab();
    let (p, _) = trained(&v);
    let path = dir.path().join("p.ckpt");
    save_checkpoint(&p, None, Some(&v), &path).unwrap();
    assert!(load_checkpoint_for::<f32>(&path, &v).is_ok());
    let other = Vocabulary::from_corpus(["CCBr"]).unwrap();
    assert!(matches!(load_checkpoint_for::<f32>(&path, &other), Err(CheckpointError::Incompatible(_))));
}
