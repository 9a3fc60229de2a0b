//! Checkpoint directories and embedding export.
//!
//! A graph checkpoint is a directory of three files:
//!
//! ```text
//! manifest.json   version, kind, dim, metric, vocab hash, step, full config
//! table.f32       raw rows in id order, little-endian f32
//! vocab.tsv       token <TAB> frequency, one row per id
//! ```
//!
//! Sentence checkpoints store a flat parameter vector the same way, with the
//! manifest listing named groups (name, length) in concatenation order.
//! Nothing here embeds timestamps or absolute paths: identical training runs
//! produce byte-identical checkpoints.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ball::Metric;
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::eval::EmbeddingSet;
use crate::graph::{ReparamTable, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct GraphManifest {
    version: u32,
    kind: String,
    dim: usize,
    metric: Metric,
    vocab_hash: String,
    vocab_len: usize,
    step: u64,
    config: TrainConfig,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct SentManifest {
    version: u32,
    kind: String,
    vocab_hash: String,
    vocab_len: usize,
    step: u64,
    groups: Vec<ParamGroup>,
    config: serde_json::Value,
}

#[derive(Debug)]
pub struct GraphCheckpoint {
    pub table: ReparamTable,
    pub vocab: Vocab,
    pub config: TrainConfig,
    pub step: u64,
}

#[derive(Debug)]
pub struct SentCheckpoint {
    pub params: Vec<f64>,
    pub groups: Vec<ParamGroup>,
    pub vocab: Vocab,
    pub config: serde_json::Value,
    pub step: u64,
}

fn write_f32_le(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f32_le(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Checkpoint(format!(
            "{} has {} bytes, not a multiple of 4",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_vocab_tsv(path: &Path, vocab: &Vocab) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for id in 0..vocab.len() as u32 {
        writeln!(w, "{}\t{}", vocab.token(id), vocab.freq(id))?;
    }
    w.flush()?;
    Ok(())
}

fn read_vocab_tsv(path: &Path, unk: Option<u32>) -> Result<Vocab> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut tokens = Vec::new();
    let mut freqs = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let (tok, freq) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: "expected token<TAB>frequency".into(),
        })?;
        tokens.push(tok.to_string());
        freqs.push(freq.parse::<u64>().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: format!("bad frequency: {e}"),
        })?);
    }
    Vocab::from_parts(tokens, freqs, unk)
}

fn write_manifest<M: serde::Serialize>(path: &Path, manifest: &M) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn save_graph(
    dir: &Path,
    table: &ReparamTable,
    vocab: &Vocab,
    config: &TrainConfig,
    step: u64,
) -> Result<()> {
    if table.rows() != vocab.len() {
        return Err(Error::VocabMismatch {
            expected: table.rows().to_string(),
            actual: vocab.len().to_string(),
        });
    }
    fs::create_dir_all(dir)?;
    let manifest = GraphManifest {
        version: FORMAT_VERSION,
        kind: "graph".into(),
        dim: table.ball_dim(),
        metric: config.metric,
        vocab_hash: vocab.hash(),
        vocab_len: vocab.len(),
        step,
        config: config.clone(),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)?;
    write_f32_le(&dir.join("table.f32"), table.raw())?;
    write_vocab_tsv(&dir.join("vocab.tsv"), vocab)
}

pub fn load_graph(dir: &Path) -> Result<GraphCheckpoint> {
    let kind = checkpoint_kind(dir)?;
    if kind != "graph" {
        return Err(Error::Checkpoint(format!(
            "expected a graph checkpoint, found kind {kind:?}"
        )));
    }
    let manifest: GraphManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            manifest.version
        )));
    }
    let vocab = read_vocab_tsv(&dir.join("vocab.tsv"), None)?;
    if vocab.hash() != manifest.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: manifest.vocab_hash,
            actual: vocab.hash(),
        });
    }
    if vocab.len() != manifest.vocab_len {
        return Err(Error::Checkpoint(format!(
            "manifest says {} vocab entries, vocab.tsv has {}",
            manifest.vocab_len,
            vocab.len()
        )));
    }
    let raw = read_f32_le(&dir.join("table.f32"))?;
    let expected = vocab.len() * (manifest.dim + 1);
    if raw.len() != expected {
        return Err(Error::Checkpoint(format!(
            "table.f32 holds {} values, expected {expected} ({} rows of dim {} + 1)",
            raw.len(),
            vocab.len(),
            manifest.dim
        )));
    }
    let table = ReparamTable::from_raw(manifest.dim, raw)?;
    Ok(GraphCheckpoint {
        table,
        vocab,
        config: manifest.config,
        step: manifest.step,
    })
}

/// Peek at a checkpoint's kind without loading parameters.
pub fn checkpoint_kind(dir: &Path) -> Result<String> {
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    value
        .get("kind")
        .and_then(|k| k.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Checkpoint("manifest.json has no kind field".into()))
}

pub fn save_sent(
    dir: &Path,
    params: &[f64],
    groups: &[ParamGroup],
    vocab: &Vocab,
    config: &serde_json::Value,
    step: u64,
) -> Result<()> {
    let total: usize = groups.iter().map(|g| g.len).sum();
    if total != params.len() {
        return Err(Error::Checkpoint(format!(
            "groups cover {total} parameters, vector has {}",
            params.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let manifest = SentManifest {
        version: FORMAT_VERSION,
        kind: "sent".into(),
        vocab_hash: vocab.hash(),
        vocab_len: vocab.len(),
        step,
        groups: groups.to_vec(),
        config: config.clone(),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)?;
    write_f32_le(&dir.join("params.f32"), params)?;
    write_vocab_tsv(&dir.join("vocab.tsv"), vocab)
}

pub fn load_sent(dir: &Path) -> Result<SentCheckpoint> {
    let kind = checkpoint_kind(dir)?;
    if kind != "sent" {
        return Err(Error::Checkpoint(format!(
            "expected a sentence checkpoint, found kind {kind:?}"
        )));
    }
    let manifest: SentManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            manifest.version
        )));
    }
    // Sentence vocabularies are built with an UNK slot in the last row.
    let vocab = read_vocab_tsv(&dir.join("vocab.tsv"), Some((manifest.vocab_len - 1) as u32))?;
    if vocab.hash() != manifest.vocab_hash {
        return Err(Error::VocabMismatch {
            expected: manifest.vocab_hash,
            actual: vocab.hash(),
        });
    }
    let params = read_f32_le(&dir.join("params.f32"))?;
    let total: usize = manifest.groups.iter().map(|g| g.len).sum();
    if params.len() != total {
        return Err(Error::Checkpoint(format!(
            "params.f32 holds {} values, manifest groups cover {total}",
            params.len()
        )));
    }
    Ok(SentCheckpoint {
        params,
        groups: manifest.groups,
        vocab,
        config: manifest.config,
        step: manifest.step,
    })
}

/// TSV export of realized points: token, the d coordinates, then the
/// Euclidean norm of the row. No header.
pub fn export_tsv<W: Write>(out: &mut W, vocab: &Vocab, emb: &EmbeddingSet) -> Result<()> {
    if vocab.len() != emb.len() {
        return Err(Error::VocabMismatch {
            expected: vocab.len().to_string(),
            actual: emb.len().to_string(),
        });
    }
    for id in 0..vocab.len() as u32 {
        write!(out, "{}", vocab.token(id))?;
        let p = emb.point(id);
        for c in p {
            write!(out, "\t{c}")?;
        }
        let norm = p.iter().map(|c| c * c).sum::<f64>().sqrt();
        writeln!(out, "\t{norm}")?;
    }
    Ok(())
}

/// Byte-wise equality of two checkpoint directories (manifest, parameters,
/// vocabulary). Used by the determinism acceptance check.
pub fn dirs_identical(a: &Path, b: &Path) -> Result<bool> {
    let mut names: Vec<String> = Vec::new();
    for entry in fs::read_dir(a)? {
        names.push(entry?.file_name().to_string_lossy().into_owned());
    }
    names.sort();
    let mut other: Vec<String> = Vec::new();
    for entry in fs::read_dir(b)? {
        other.push(entry?.file_name().to_string_lossy().into_owned());
    }
    other.sort();
    if names != other {
        return Ok(false);
    }
    for name in &names {
        let mut fa = Vec::new();
        fs::File::open(a.join(name))?.read_to_end(&mut fa)?;
        let mut fb = Vec::new();
        fs::File::open(b.join(name))?.read_to_end(&mut fb)?;
        if fa != fb {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;
    use rand::SeedableRng;

    fn demo_vocab(n: usize) -> Vocab {
        let tokens: Vec<String> = (0..n).map(|i| format!("tok{i}")).collect();
        let freqs: Vec<u64> = (0..n).map(|i| (n - i) as u64).collect();
        Vocab::from_parts(tokens, freqs, None).unwrap()
    }

    #[test]
    fn graph_checkpoint_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("ckpt");
        let mut rng = SeededRng::seed_from_u64(3);
        let table = ReparamTable::init(6, 4, 0.001, -5.0, &mut rng);
        let vocab = demo_vocab(6);
        let cfg = TrainConfig { dim: 4, ..Default::default() };
        save_graph(&dir, &table, &vocab, &cfg, 123).unwrap();

        let loaded = load_graph(&dir).unwrap();
        assert_eq!(loaded.step, 123);
        assert_eq!(loaded.table.rows(), 6);
        assert_eq!(loaded.table.ball_dim(), 4);
        assert_eq!(loaded.vocab.tokens(), vocab.tokens());
        assert_eq!(loaded.config.dim, 4);
        // Values survive modulo the f32 storage precision.
        for (a, b) in table.raw().iter().zip(loaded.table.raw()) {
            assert!((a - b).abs() <= (*a as f32).abs() as f64 * 1e-7 + 1e-10);
        }
        assert_eq!(checkpoint_kind(&dir).unwrap(), "graph");
    }

    #[test]
    fn identical_saves_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::seed_from_u64(9);
        let table = ReparamTable::init(4, 3, 0.001, -5.0, &mut rng);
        let vocab = demo_vocab(4);
        let cfg = TrainConfig { dim: 3, ..Default::default() };
        let d1 = tmp.path().join("one");
        let d2 = tmp.path().join("two");
        save_graph(&d1, &table, &vocab, &cfg, 7).unwrap();
        save_graph(&d2, &table, &vocab, &cfg, 7).unwrap();
        assert!(dirs_identical(&d1, &d2).unwrap());

        let d3 = tmp.path().join("three");
        save_graph(&d3, &table, &vocab, &cfg, 8).unwrap();
        assert!(!dirs_identical(&d1, &d3).unwrap());
    }

    #[test]
    fn tampered_vocab_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("ckpt");
        let mut rng = SeededRng::seed_from_u64(4);
        let table = ReparamTable::init(3, 3, 0.001, -5.0, &mut rng);
        let vocab = demo_vocab(3);
        let cfg = TrainConfig { dim: 3, ..Default::default() };
        save_graph(&dir, &table, &vocab, &cfg, 0).unwrap();
        std::fs::write(dir.join("vocab.tsv"), "tok0\t3\ntok1\t2\nDIFFERENT\t1\n").unwrap();
        match load_graph(&dir) {
            Err(Error::VocabMismatch { .. }) => {}
            other => panic!("expected vocab mismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncated_table_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("ckpt");
        let mut rng = SeededRng::seed_from_u64(5);
        let table = ReparamTable::init(3, 3, 0.001, -5.0, &mut rng);
        let vocab = demo_vocab(3);
        let cfg = TrainConfig { dim: 3, ..Default::default() };
        save_graph(&dir, &table, &vocab, &cfg, 0).unwrap();
        let bytes = std::fs::read(dir.join("table.f32")).unwrap();
        std::fs::write(dir.join("table.f32"), &bytes[..bytes.len() - 4]).unwrap();
        match load_graph(&dir) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("table.f32")),
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn sent_groups_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("sent");
        let params: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let groups = vec![
            ParamGroup { name: "emb_in".into(), len: 12 },
            ParamGroup { name: "gru_fwd_w".into(), len: 6 },
            ParamGroup { name: "lambdas".into(), len: 2 },
        ];
        let vocab = demo_vocab(5);
        let config = serde_json::json!({"hidden_dim": 3, "layer_norm": true});
        save_sent(&dir, &params, &groups, &vocab, &config, 42).unwrap();

        let loaded = load_sent(&dir).unwrap();
        assert_eq!(loaded.step, 42);
        assert_eq!(loaded.groups.len(), 3);
        assert_eq!(loaded.groups[1].name, "gru_fwd_w");
        assert_eq!(loaded.params.len(), 20);
        assert_eq!(loaded.config["hidden_dim"], 3);
        assert_eq!(checkpoint_kind(&dir).unwrap(), "sent");
        // Last vocab row doubles as the UNK slot for sentence models.
        assert_eq!(loaded.vocab.unk_id(), Some(4));
    }

    #[test]
    fn group_length_mismatch_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("sent");
        let params = vec![0.0; 5];
        let groups = vec![ParamGroup { name: "x".into(), len: 4 }];
        let vocab = demo_vocab(2);
        let config = serde_json::Value::Null;
        match save_sent(&dir, &params, &groups, &vocab, &config, 0) {
            Err(Error::Checkpoint(_)) => {}
            other => panic!("expected checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn export_writes_norm_column() {
        let vocab = demo_vocab(2);
        let emb = EmbeddingSet::from_flat(2, vec![0.3, 0.4, 0.0, 0.5]).unwrap();
        let mut out = Vec::new();
        export_tsv(&mut out, &vocab, &emb).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "tok0\t0.3\t0.4\t0.5");
        assert_eq!(lines[1], "tok1\t0\t0.5\t0.5");
    }

    #[test]
    fn kind_mismatch_is_caught_on_load() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("ckpt");
        let mut rng = SeededRng::seed_from_u64(6);
        let table = ReparamTable::init(3, 2, 0.001, -5.0, &mut rng);
        let vocab = demo_vocab(3);
        let cfg = TrainConfig { dim: 2, ..Default::default() };
        save_graph(&dir, &table, &vocab, &cfg, 0).unwrap();
        match load_sent(&dir) {
            Err(Error::Checkpoint(msg)) => assert!(msg.contains("kind")),
            other => panic!("expected kind error, got {other:?}"),
        }
    }
}
