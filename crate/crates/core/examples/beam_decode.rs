//! Train a small n-gram model and decode lyrics that fit each melody
//! line, with beam search and with the exhaustive oracle.

use tonealign::decode::{beam_search, exhaustive_decode, DecodeRequest};
use tonealign::melody::parse_records;
use tonealign::model::{train_ngram, CandidateModel, Vocabulary};
use tonealign::scoring::{ConstraintConfig, Lexicons};

const MELODIES: &str = include_str!("../data/demo_melodies.jsonl");
const CORPUS: &str = include_str!("../data/demo_corpus.txt");

fn main() -> tonealign::Result<()> {
    let lexicons = Lexicons::bundled();
    let vocab = Vocabulary::from_lexicon(&lexicons.tones, &["，", "。"])?;
    let corpus: Vec<Vec<String>> = CORPUS
        .lines()
        .map(|l| l.chars().map(String::from).filter(|t| vocab.id(t).is_some()).collect())
        .collect();
    let model = train_ngram(&corpus, vocab, 3, 0.1)?;
    let cfg = ConstraintConfig::default();

    for (line, rec) in parse_records(MELODIES) {
        let triple = rec?;
        let req = DecodeRequest {
            melody: &triple.melody,
            source: &triple.source,
            cfg: &cfg,
            lexicons: &lexicons,
            model: &model,
            beam_size: 8,
            punc_budget: 1,
        };
        let beam = beam_search(&req)?;
        println!("line {line}: {} ({} groups)", triple.source, triple.melody.len());
        for h in beam.iter().take(3) {
            println!("    {:<8} {:>9.4}", h.text(model.vocab()), h.total_logscore);
        }
    }

    // The oracle enumerates every syllable sequence, so keep it tiny.
    let rec = parse_records(MELODIES).remove(3).1?;
    let small = Vocabulary::new(["快", "回", "家", "我", "</s>"])?;
    let tiny_corpus: Vec<Vec<String>> = corpus
        .iter()
        .map(|l| l.iter().filter(|t| small.id(t).is_some()).cloned().collect())
        .collect();
    let tiny = train_ngram(&tiny_corpus, small, 2, 0.1)?;
    let req = DecodeRequest {
        melody: &rec.melody,
        source: &rec.source,
        cfg: &cfg,
        lexicons: &lexicons,
        model: &tiny,
        beam_size: 64,
        punc_budget: 0,
    };
    let best = exhaustive_decode(&req, 10_000)?;
    let beam = beam_search(&req)?.swap_remove(0);
    println!(
        "\noracle {} {:.6} / beam {} {:.6}",
        best.text(tiny.vocab()),
        best.total_logscore,
        beam.text(tiny.vocab()),
        beam.total_logscore
    );
    Ok(())
}
