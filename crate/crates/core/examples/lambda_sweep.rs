//! Sweep one constraint weight and watch the swept score respond.

use tonealign::decode::DecodeOptions;
use tonealign::eval::{sweep, sweep_csv, LambdaKind};
use tonealign::melody::parse_records;
use tonealign::model::{train_ngram, Vocabulary};
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
    let dataset = parse_records(MELODIES)
        .into_iter()
        .map(|(_, r)| r)
        .collect::<tonealign::Result<Vec<_>>>()?;
    let opts = DecodeOptions {
        workers: 2,
        ..DecodeOptions::default()
    };
    let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
    for which in [LambdaKind::Inter, LambdaKind::Intra, LambdaKind::Rest] {
        let points = sweep(&dataset, &model, &lexicons, which, &grid, &ConstraintConfig::default(), &opts)?;
        println!("{which:?}");
        print!("{}", sweep_csv(&points));
    }
    Ok(())
}
