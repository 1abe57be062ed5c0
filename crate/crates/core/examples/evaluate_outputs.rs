//! Evaluate system outputs: constraint scores, length errors and BLEU.

use tonealign::eval::{bleu_tokens, corpus_bleu, evaluate};
use tonealign::melody::parse_records;
use tonealign::scoring::{ConstraintConfig, Lexicons};

const MELODIES: &str = include_str!("../data/demo_melodies.jsonl");

fn main() -> tonealign::Result<()> {
    let triples = parse_records(MELODIES)
        .into_iter()
        .map(|(_, r)| r)
        .collect::<tonealign::Result<Vec<_>>>()?;
    let outputs: Vec<String> = ["四季的爱", "晚安，朋友", "蓝天多美丽啊", "回家"]
        .into_iter()
        .map(String::from)
        .collect();
    let report = evaluate(&triples, &outputs, &Lexicons::bundled(), &ConstraintConfig::default())?;
    print!("{}", report.to_tsv());

    let hyp = bleu_tokens("a b c d");
    let reference = bleu_tokens("a b c d e");
    println!("\nbrevity-penalized BLEU: {:.6}", corpus_bleu(&[hyp], &[reference], 4, false)?);
    Ok(())
}
