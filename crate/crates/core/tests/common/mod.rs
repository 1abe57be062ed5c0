#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tonealign::decode::Hypothesis;
use tonealign::melody::{Beats, MelodyLine, NoteGroup, Pitch};
use tonealign::model::{CandidateModel, TokenId, Vocabulary, EOL};
use tonealign::scoring::{score_line_incremental, ConstraintConfig, Lexicons, Lyric};
use tonealign::segment::SegLexicon;
use tonealign::tone::ToneLexicon;

/// Syllables covering every tone, with a few words (one of them 3-3).
pub const TOY_TONES: &str = "妈\tma\t1\n麻\tma\t2\n马\tma\t3\n骂\tma\t4\n吗\tma\t5\n\
天\ttian\t1\n来\tlai\t2\n好\thao\t3\n去\tqu\t4\n的\tde\t5\n\
风\tfeng\t1\n人\tren\t2\n你\tni\t3\n是\tshi\t4\n了\tle\t5\n";
pub const TOY_WORDS: [&str; 10] = ["天来", "马好", "你好", "好马", "去来", "人是", "风人", "是的", "骂人", "妈麻"];
pub const TOY_SYLLABLES: [&str; 15] = [
    "妈", "麻", "马", "骂", "吗", "天", "来", "好", "去", "的", "风", "人", "你", "是", "了",
];

pub fn toy_lexicons() -> Lexicons {
    Lexicons {
        tones: ToneLexicon::parse(TOY_TONES, "toy").unwrap(),
        words: SegLexicon::new(TOY_WORDS),
    }
}

/// Deterministic pseudo-random next-token distribution that depends on
/// the source and the full prefix.
pub struct RandomModel {
    pub vocab: Vocabulary,
    pub seed: u64,
    pub spread: f64,
}

impl CandidateModel for RandomModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn log_probs(&self, source: &str, prefix: &[TokenId]) -> tonealign::Result<Vec<f64>> {
        let mut h = DefaultHasher::new();
        (self.seed, source, prefix).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        let logits: Vec<f64> = (0..self.vocab.len())
            .map(|_| rng.gen_range(-self.spread..self.spread))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        Ok(logits.into_iter().map(|l| l - lse).collect())
    }
}

/// A random vocabulary of `n_syllables` toy syllables, optional
/// punctuation, and the end-of-line token.
pub fn random_vocab(rng: &mut impl Rng, n_syllables: usize, punctuation: bool) -> Vocabulary {
    let mut pool: Vec<&str> = TOY_SYLLABLES.to_vec();
    let mut tokens = Vec::new();
    for _ in 0..n_syllables {
        tokens.push(pool.swap_remove(rng.gen_range(0..pool.len())));
    }
    if punctuation {
        tokens.push("，");
    }
    tokens.push(EOL);
    Vocabulary::new(tokens).unwrap()
}

pub fn random_group(rng: &mut impl Rng, max_notes: usize) -> NoteGroup {
    let n = rng.gen_range(1..=max_notes);
    let pitches: Vec<Pitch> = (0..n).map(|_| rng.gen_range(55..=76)).collect();
    let durations = (0..n).map(|_| Beats::new(rng.gen_range(1..=4), 2)).collect();
    NoteGroup::new(pitches, durations).unwrap()
}

pub fn random_melody(rng: &mut impl Rng, len: usize) -> MelodyLine {
    let groups = (0..len).map(|_| random_group(rng, 3)).collect();
    let rests = (0..len)
        .map(|_| match rng.gen_range(0..3) {
            0 => Beats::new(1, 2),
            _ => Beats::from_integer(0),
        })
        .collect();
    MelodyLine::new(groups, rests).unwrap()
}

/// Recomputes a hypothesis's objective from its tokens alone.
pub fn recompute_total(
    hyp: &Hypothesis,
    model: &dyn CandidateModel,
    source: &str,
    melody: &MelodyLine,
    lex: &Lexicons,
    cfg: &ConstraintConfig,
) -> f64 {
    let mut log_p = 0.0;
    for k in 0..hyp.tokens.len() {
        log_p += model.log_probs(source, &hyp.tokens[..k]).unwrap()[hyp.tokens[k]];
    }
    let lyric = Lyric::parse(&hyp.text(model.vocab()));
    let positions = score_line_incremental(melody, &lyric, lex, cfg).unwrap();
    let constraint: f64 = positions
        .iter()
        .map(|p| cfg.lambda_inter * p.inter.ln() + cfg.lambda_intra * p.intra.ln() + cfg.lambda_rest * p.rest.ln())
        .sum();
    log_p + constraint
}

/// Number of syllables (non-punctuation characters) in decoded text.
pub fn syllable_count(text: &str) -> usize {
    Lyric::parse(text).len()
}

/// Wraps a model and adds `bonus` to the logit of each token of a
/// preferred output while the prefix still follows it.
pub struct PreferModel<M> {
    pub inner: M,
    pub prefer: std::collections::HashMap<String, Vec<TokenId>>,
    pub bonus: f64,
}

impl<M: CandidateModel> CandidateModel for PreferModel<M> {
    fn vocab(&self) -> &Vocabulary {
        self.inner.vocab()
    }

    fn log_probs(&self, source: &str, prefix: &[TokenId]) -> tonealign::Result<Vec<f64>> {
        let mut lps = self.inner.log_probs(source, prefix)?;
        if let Some(want) = self.prefer.get(source) {
            if prefix.len() < want.len() && want.starts_with(prefix) {
                lps[want[prefix.len()]] += self.bonus;
                let max = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + lps.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                for l in &mut lps {
                    *l -= lse;
                }
            }
        }
        Ok(lps)
    }
}
