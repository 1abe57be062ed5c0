//! Drive decoding from a model living in another process.
//!
//! With `--serve` this program is the model: it reads JSON requests on
//! stdin and answers with bigram log-probabilities learned from the demo
//! corpus. Without arguments it starts itself with `--serve` and decodes
//! through it.
//!
//! The CLI can use the same server:
//! `tonealign translate --melody data/demo_melodies.jsonl --model external
//!  --model-command "target/debug/examples/external_model --serve"`

use std::io::{BufRead, Write};
use std::time::Duration;

use serde_json::{json, Value};
use tonealign::decode::{decode_lines, DecodeOptions, LineInput};
use tonealign::melody::parse_records;
use tonealign::model::{train_ngram, CandidateModel, ExternalModel, NGramModel, Vocabulary};
use tonealign::scoring::{ConstraintConfig, Lexicons};

const MELODIES: &str = include_str!("../data/demo_melodies.jsonl");
const CORPUS: &str = include_str!("../data/demo_corpus.txt");

fn bigram(vocab: Vocabulary) -> tonealign::Result<NGramModel> {
    let corpus: Vec<Vec<String>> = CORPUS
        .lines()
        .map(|l| l.chars().map(String::from).filter(|t| vocab.id(t).is_some()).collect())
        .collect();
    train_ngram(&corpus, vocab, 2, 0.1)
}

fn vocab() -> tonealign::Result<Vocabulary> {
    Vocabulary::from_lexicon(&Lexicons::bundled().tones, &["，", "。"])
}

fn serve() -> tonealign::Result<()> {
    let model = bigram(vocab()?)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in std::io::stdin().lock().lines() {
        let req: Value = serde_json::from_str(&line?).map_err(|e| tonealign::Error::Model(e.to_string()))?;
        let source = req["source"].as_str().unwrap_or_default();
        let prefix: Vec<usize> = req["prefix"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|t| model.vocab().id(t.as_str()?))
            .collect();
        let lps = model.log_probs(source, &prefix)?;
        let candidates: Vec<Value> = model
            .vocab()
            .tokens()
            .iter()
            .zip(lps)
            .map(|(t, lp)| json!([t, lp]))
            .collect();
        writeln!(out, "{}", json!({ "candidates": candidates }))?;
        out.flush()?;
    }
    Ok(())
}

fn main() -> tonealign::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("--serve") {
        return serve();
    }
    let me = std::env::current_exe()?.to_string_lossy().into_owned();
    let remote = ExternalModel::spawn(vocab()?, &me, &["--serve".to_string()], Duration::from_secs(10))?;
    let local = bigram(vocab()?)?;

    let triples = parse_records(MELODIES)
        .into_iter()
        .map(|(_, r)| r)
        .collect::<tonealign::Result<Vec<_>>>()?;
    let inputs: Vec<LineInput> = triples
        .iter()
        .map(|t| LineInput {
            melody: &t.melody,
            source: &t.source,
        })
        .collect();
    let (lex, cfg, opts) = (Lexicons::bundled(), ConstraintConfig::default(), DecodeOptions::default());
    let via_pipe = decode_lines(&inputs, &remote, &lex, &cfg, &opts)?;
    let in_process = decode_lines(&inputs, &local, &lex, &cfg, &opts)?;
    for (a, b) in via_pipe.iter().zip(&in_process) {
        let (a, b) = (a.as_ref().map_err(Clone::clone)?, b.as_ref().map_err(Clone::clone)?);
        println!(
            "{:<8} {:.6}   in-process {:<8} {:.6}",
            a.text(remote.vocab()),
            a.total_logscore,
            b.text(local.vocab()),
            b.total_logscore
        );
    }
    Ok(())
}
