//! Constrained beam search over a candidate model.
//!
//! Each hypothesis is scored as
//!
//! ```text
//! sum_i log P(y_i | y_<i, X)
//!     + lambda_inter * log S_inter(i) + lambda_intra * log S_intra(i) + lambda_rest * log S_rest(i)
//! ```
//!
//! where the alignment scores are taken from [`crate::scoring`]. A line
//! finishes exactly when every note group has a syllable; punctuation
//! marks consume no group.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melody::MelodyLine;
use crate::model::{CandidateModel, TokenId, TokenKind, Vocabulary};
use crate::scoring::{
    annotate, normalized_line_scores, score_position, ConstraintConfig, LineReport, Lexicons,
    PositionScores,
};

pub const DEFAULT_BEAM_SIZE: usize = 5;
pub const DEFAULT_PUNC_BUDGET: usize = 2;

/// Cumulative, unweighted score terms of a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Components {
    pub log_p: f64,
    pub log_inter: f64,
    pub log_intra: f64,
    pub log_rest: f64,
}

impl Components {
    pub fn weighted_total(&self, cfg: &ConstraintConfig) -> f64 {
        self.log_p
            + cfg.lambda_inter * self.log_inter
            + cfg.lambda_intra * self.log_intra
            + cfg.lambda_rest * self.log_rest
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub consumed_groups: usize,
    pub total_logscore: f64,
    pub components: Components,
    pub punc_pending: bool,
    pub punc_used: usize,
    pub finished: bool,
    pub positions: Vec<PositionScores>,
    syllables: Vec<char>,
    breaks: Vec<bool>,
}

impl Hypothesis {
    pub fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            consumed_groups: 0,
            total_logscore: 0.0,
            components: Components::default(),
            punc_pending: false,
            punc_used: 0,
            finished: false,
            positions: Vec::new(),
            syllables: Vec::new(),
            breaks: Vec::new(),
        }
    }

    pub fn text(&self, vocab: &Vocabulary) -> String {
        vocab.render(&self.tokens)
    }

    pub fn report(&self) -> Result<LineReport> {
        normalized_line_scores(&self.positions)
    }

    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }
}

/// Higher score first, then lexicographically smaller token ids.
pub fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.total_logscore
        .total_cmp(&a.total_logscore)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

pub struct DecodeRequest<'a> {
    pub melody: &'a MelodyLine,
    pub source: &'a str,
    pub cfg: &'a ConstraintConfig,
    pub lexicons: &'a Lexicons,
    pub model: &'a dyn CandidateModel,
    pub beam_size: usize,
    /// Maximum punctuation marks per line; zero disables punctuation.
    pub punc_budget: usize,
}

impl DecodeRequest<'_> {
    fn validate(&self) -> Result<()> {
        if self.beam_size < 1 {
            return Err(Error::Decode("beam size must be >= 1".into()));
        }
        if self.melody.is_empty() {
            return Err(Error::Decode("melody has no note groups".into()));
        }
        self.cfg.validate()
    }

    fn vocab(&self) -> &Vocabulary {
        self.model.vocab()
    }

    /// Tokens the length and punctuation rules allow after `hyp`.
    fn allowed(&self, hyp: &Hypothesis) -> Vec<TokenId> {
        let vocab = self.vocab();
        if hyp.finished {
            return Vec::new();
        }
        if hyp.consumed_groups == self.melody.len() {
            return vec![vocab.eol()];
        }
        (0..vocab.len())
            .filter(|id| match vocab.kind(*id) {
                TokenKind::Syllable(_) => true,
                TokenKind::Punctuation => {
                    hyp.consumed_groups > 0 && !hyp.punc_pending && hyp.punc_used < self.punc_budget
                }
                TokenKind::EndOfLine => false,
            })
            .collect()
    }
}

/// Extends `hyp` by one token whose model log-probability is `log_p`.
pub fn step_score(hyp: &Hypothesis, token: TokenId, log_p: f64, req: &DecodeRequest) -> Result<Hypothesis> {
    if hyp.finished {
        return Err(Error::Decode("hypothesis already complete".into()));
    }
    let vocab = req.vocab();
    let cfg = req.cfg;
    let mut next = hyp.clone();
    next.tokens.push(token);
    next.components.log_p += log_p;
    match vocab.kind(token) {
        TokenKind::EndOfLine => {
            if hyp.consumed_groups != req.melody.len() {
                return Err(Error::Decode(format!(
                    "end of line after {} of {} groups",
                    hyp.consumed_groups,
                    req.melody.len()
                )));
            }
            next.total_logscore += log_p;
            next.finished = true;
        }
        TokenKind::Punctuation => {
            if hyp.consumed_groups == 0 || hyp.punc_pending || hyp.consumed_groups == req.melody.len() {
                return Err(Error::Decode("punctuation not allowed here".into()));
            }
            next.total_logscore += log_p;
            next.punc_pending = true;
            next.punc_used += 1;
        }
        TokenKind::Syllable(ch) => {
            let i = hyp.consumed_groups;
            if i >= req.melody.len() {
                return Err(Error::Decode("all note groups already have syllables".into()));
            }
            next.syllables.push(ch);
            next.breaks.push(hyp.punc_pending && i > 0);
            let ann = annotate(&next.syllables, &next.breaks, req.lexicons)?;
            let s = score_position(req.melody, i, &ann, hyp.punc_pending, cfg);
            let (li, lt, lr) = (s.inter.ln(), s.intra.ln(), s.rest.ln());
            next.components.log_inter += li;
            next.components.log_intra += lt;
            next.components.log_rest += lr;
            next.total_logscore +=
                log_p + cfg.lambda_inter * li + cfg.lambda_intra * lt + cfg.lambda_rest * lr;
            next.positions.push(s);
            next.punc_pending = false;
            next.consumed_groups += 1;
        }
    }
    Ok(next)
}

fn model_scores(req: &DecodeRequest, prefix: &[TokenId]) -> Result<Vec<f64>> {
    let lps = req.model.log_probs(req.source, prefix)?;
    if lps.len() != req.vocab().len() {
        return Err(Error::Model(format!(
            "model returned {} scores for a vocabulary of {}",
            lps.len(),
            req.vocab().len()
        )));
    }
    Ok(lps)
}

/// Beam search. Returns complete hypotheses, best first.
pub fn beam_search(req: &DecodeRequest) -> Result<Vec<Hypothesis>> {
    req.validate()?;
    let mut active = vec![Hypothesis::empty()];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut rejected = 0usize;
    let mut last_error = None;
    while !active.is_empty() {
        let mut candidates = Vec::new();
        for hyp in &active {
            let lps = model_scores(req, &hyp.tokens)?;
            for tok in req.allowed(hyp) {
                if lps[tok] == f64::NEG_INFINITY {
                    continue;
                }
                match step_score(hyp, tok, lps[tok], req) {
                    Ok(h) => candidates.push(h),
                    Err(e) => {
                        rejected += 1;
                        last_error = Some(e);
                    }
                }
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(req.beam_size);
        let (done, open): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|h| h.finished);
        finished.extend(done);
        active = open;
    }
    if finished.is_empty() {
        return Err(Error::Decode(match last_error {
            Some(e) => format!("beam collapsed ({rejected} expansions rejected, last: {e})"),
            None => "beam collapsed: no expansion has non-zero probability".into(),
        }));
    }
    finished.sort_by(rank);
    Ok(finished)
}

/// Number of full-length sequences the exhaustive oracle would visit.
pub fn search_space(vocab_size: usize, length: usize) -> Option<u128> {
    (vocab_size as u128).checked_pow(u32::try_from(length).ok()?)
}

/// Exact maximizer of the decoding objective by enumerating every
/// syllable sequence of the right length. Punctuation is not inserted.
pub fn exhaustive_decode(req: &DecodeRequest, max_states: u128) -> Result<Hypothesis> {
    req.validate()?;
    let required = search_space(req.vocab().len(), req.melody.len()).unwrap_or(u128::MAX);
    if required > max_states {
        return Err(Error::StateBound {
            required,
            bound: max_states,
        });
    }
    let syllables: Vec<TokenId> = (0..req.vocab().len())
        .filter(|id| matches!(req.vocab().kind(*id), TokenKind::Syllable(_)))
        .collect();
    let mut best: Option<Hypothesis> = None;
    let mut first_error = None;
    enumerate(req, &syllables, Hypothesis::empty(), &mut best, &mut first_error)?;
    best.ok_or_else(|| {
        Error::Decode(match first_error {
            Some(e) => format!("no admissible sequence (first error: {e})"),
            None => "no admissible sequence".into(),
        })
    })
}

fn enumerate(
    req: &DecodeRequest,
    syllables: &[TokenId],
    hyp: Hypothesis,
    best: &mut Option<Hypothesis>,
    first_error: &mut Option<Error>,
) -> Result<()> {
    let lps = model_scores(req, &hyp.tokens)?;
    if hyp.consumed_groups == req.melody.len() {
        let eol = req.vocab().eol();
        if lps[eol] == f64::NEG_INFINITY {
            return Ok(());
        }
        let done = step_score(&hyp, eol, lps[eol], req)?;
        if best.as_ref().is_none_or(|b| rank(&done, b) == Ordering::Less) {
            *best = Some(done);
        }
        return Ok(());
    }
    for &tok in syllables {
        if lps[tok] == f64::NEG_INFINITY {
            continue;
        }
        match step_score(&hyp, tok, lps[tok], req) {
            Ok(next) => enumerate(req, syllables, next, best, first_error)?,
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    Ok(())
}

/// How each line of a corpus is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam_size: usize,
    pub punc_budget: usize,
    /// Use the exhaustive oracle with this state bound instead of beam search.
    pub exhaustive: Option<u128>,
    pub workers: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            beam_size: DEFAULT_BEAM_SIZE,
            punc_budget: DEFAULT_PUNC_BUDGET,
            exhaustive: None,
            workers: 1,
        }
    }
}

/// A melody line with the source text to translate.
pub struct LineInput<'a> {
    pub melody: &'a MelodyLine,
    pub source: &'a str,
}

/// Decodes every line, in parallel across `opts.workers` threads. The
/// output order matches the input order. Each entry is the best
/// hypothesis or that line's error.
pub fn decode_lines(
    lines: &[LineInput],
    model: &dyn CandidateModel,
    lexicons: &Lexicons,
    cfg: &ConstraintConfig,
    opts: &DecodeOptions,
) -> Result<Vec<Result<Hypothesis>>> {
    let one = |line: &LineInput| -> Result<Hypothesis> {
        let req = DecodeRequest {
            melody: line.melody,
            source: line.source,
            cfg,
            lexicons,
            model,
            beam_size: opts.beam_size,
            punc_budget: opts.punc_budget,
        };
        match opts.exhaustive {
            Some(bound) => exhaustive_decode(&req, bound),
            None => beam_search(&req).map(|mut v| v.swap_remove(0)),
        }
    };
    if opts.workers <= 1 {
        return Ok(lines.iter().map(one).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| lines.par_iter().map(one).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::{Beats, NoteGroup};
    use crate::model::{uniform_model, UniformModel, EOL};
    use crate::scoring::Lexicons;
    use crate::segment::SegLexicon;
    use crate::tone::ToneLexicon;

    fn lexicons() -> Lexicons {
        Lexicons {
            tones: ToneLexicon::parse("妈\tma\t1\n麻\tma\t2\n马\tma\t3\n骂\tma\t4\n", "t").unwrap(),
            words: SegLexicon::default(),
        }
    }

    fn model(tokens: &[&str]) -> UniformModel {
        let mut t: Vec<&str> = tokens.to_vec();
        t.push(EOL);
        uniform_model(Vocabulary::new(t).unwrap()).unwrap()
    }

    fn melody(groups: &[&[i32]]) -> MelodyLine {
        MelodyLine::new(
            groups.iter().map(|g| NoteGroup::quarters(g).unwrap()).collect(),
            vec![Beats::from_integer(0); groups.len()],
        )
        .unwrap()
    }

    #[test]
    fn zero_lambdas_add_only_log_p() {
        let lex = lexicons();
        let m = model(&["妈", "骂"]);
        let mel = melody(&[&[60, 64]]);
        let cfg = ConstraintConfig::default().unconstrained();
        let req = DecodeRequest {
            melody: &mel,
            source: "",
            cfg: &cfg,
            lexicons: &lex,
            model: &m,
            beam_size: 2,
            punc_budget: 0,
        };
        let h = step_score(&Hypothesis::empty(), 1, -0.7, &req).unwrap();
        assert_eq!(h.total_logscore, -0.7);
    }

    #[test]
    fn shape_mismatch_costs_log_epsilon() {
        let lex = lexicons();
        let m = model(&["妈", "麻", "骂"]);
        let mel = melody(&[&[60, 62, 64]]);
        let cfg = ConstraintConfig {
            lambda_intra: 1.0,
            ..ConstraintConfig::default()
        };
        let req = DecodeRequest {
            melody: &mel,
            source: "",
            cfg: &cfg,
            lexicons: &lex,
            model: &m,
            beam_size: 4,
            punc_budget: 0,
        };
        // 骂 is tone 4 on a rising group: log 0.01 = -4.605170185988091.
        let h = step_score(&Hypothesis::empty(), 2, -1.0, &req).unwrap();
        assert!((h.total_logscore - (-1.0 - 4.605170185988091)).abs() < 1e-12);
        // 麻 is tone 2: no penalty.
        let h = step_score(&Hypothesis::empty(), 1, -1.0, &req).unwrap();
        assert_eq!(h.total_logscore, -1.0);
        let best = beam_search(&req).unwrap();
        assert_eq!(best[0].text(m.vocab()), "麻");
    }

    #[test]
    fn punctuation_rules() {
        let lex = lexicons();
        let m = model(&["妈", "，"]);
        let mel = melody(&[&[60], &[60]]);
        let cfg = ConstraintConfig::default();
        let req = DecodeRequest {
            melody: &mel,
            source: "",
            cfg: &cfg,
            lexicons: &lex,
            model: &m,
            beam_size: 10,
            punc_budget: 1,
        };
        assert!(step_score(&Hypothesis::empty(), 1, 0.0, &req).is_err());
        let h = step_score(&Hypothesis::empty(), 0, 0.0, &req).unwrap();
        let h = step_score(&h, 1, 0.0, &req).unwrap();
        assert!(h.punc_pending);
        assert!(step_score(&h, 1, 0.0, &req).is_err());
        assert!(step_score(&h, 2, 0.0, &req).is_err());
        let out = beam_search(&req).unwrap();
        assert!(out.iter().all(|h| h.syllable_count() == 2));
        assert!(out.iter().any(|h| h.text(m.vocab()) == "妈，妈"));
        assert!(out.iter().all(|h| !h.text(m.vocab()).ends_with('，')));
    }

    #[test]
    fn collapse_and_bounds() {
        let lex = Lexicons::default();
        let m = model(&["妈"]);
        let mel = melody(&[&[60]]);
        let cfg = ConstraintConfig::default();
        let req = DecodeRequest {
            melody: &mel,
            source: "",
            cfg: &cfg,
            lexicons: &lex,
            model: &m,
            beam_size: 1,
            punc_budget: 0,
        };
        assert!(matches!(beam_search(&req), Err(Error::Decode(_))));
        assert!(matches!(
            exhaustive_decode(&req, 1),
            Err(Error::StateBound { required: 2, bound: 1 })
        ));
    }
}
