//! Corpus evaluation: BLEU, alignment reports and weight sweeps.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decode::{decode_lines, DecodeOptions, LineInput};
use crate::error::{Error, Result};
use crate::melody::{is_cjk, AlignedTriple};
use crate::model::CandidateModel;
use crate::scoring::{
    is_punctuation, length_stats, normalized_line_scores, score_line, ConstraintConfig,
    LengthStats, LineReport, Lexicons, Lyric, DEFAULT_LAMBDA_INTER, DEFAULT_LAMBDA_INTRA,
    DEFAULT_LAMBDA_REST,
};

/// Splits text into BLEU tokens: every CJK character and punctuation
/// mark is a token, other runs are split on whitespace.
pub fn bleu_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() || is_cjk(ch) || is_punctuation(ch) {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis. Without smoothing any
/// zero n-gram precision gives 0. `smooth` adds one to numerator and
/// denominator for orders above one.
pub fn corpus_bleu<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_order: usize,
    smooth: bool,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::Domain(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.is_empty() || max_order == 0 {
        return Err(Error::Domain("BLEU needs references and max_order >= 1".into()));
    }
    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_order {
            let hc = ngram_counts(h, n);
            let rc = ngram_counts(r, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc
                .iter()
                .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..max_order {
        let (m, t) = if smooth && n > 0 {
            (matches[n] as f64 + 1.0, totals[n] as f64 + 1.0)
        } else {
            (matches[n] as f64, totals[n] as f64)
        };
        if m == 0.0 || t == 0.0 {
            return Ok(0.0);
        }
        log_sum += (m / t).ln();
    }
    let brevity = if hyp_len < ref_len {
        1.0 - ref_len as f64 / hyp_len as f64
    } else {
        0.0
    };
    Ok((log_sum / max_order as f64 + brevity).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineEval {
    /// Index into the evaluated corpus.
    pub index: usize,
    pub report: Option<LineReport>,
    pub error: Option<String>,
    pub output_syllables: usize,
    pub target_syllables: usize,
    pub punc_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub lines: Vec<LineEval>,
    pub s_inter: Option<f64>,
    pub s_intra: Option<f64>,
    /// Intra score averaged over multi-note positions only.
    pub s_intra_multi: Option<f64>,
    pub s_rest: Option<f64>,
    pub avg_missed_rests: Option<f64>,
    pub length: LengthStats,
    pub bleu: Option<f64>,
    pub failed_lines: usize,
    pub punc_count: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores each output against its melody and aggregates. Melodies are
/// used as given, so apply the assignment strategy first.
pub fn evaluate(
    triples: &[AlignedTriple],
    outputs: &[String],
    lexicons: &Lexicons,
    cfg: &ConstraintConfig,
) -> Result<EvalReport> {
    if triples.len() != outputs.len() {
        return Err(Error::Domain(format!(
            "{} records vs {} outputs",
            triples.len(),
            outputs.len()
        )));
    }
    cfg.validate()?;
    let lines: Vec<LineEval> = triples
        .iter()
        .zip(outputs)
        .enumerate()
        .map(|(index, (t, out))| {
            let lyric = Lyric::parse(out);
            let scored = if lyric.is_empty() {
                Err(Error::Domain("output has no syllables".into()))
            } else {
                score_line(&t.melody, &lyric, lexicons, cfg).and_then(|p| normalized_line_scores(&p))
            };
            let delta = lyric.len() as i64 - t.melody.len() as i64;
            let (report, error) = match scored {
                Ok(mut r) => {
                    r.length_delta = delta;
                    (Some(r), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            LineEval {
                index,
                report,
                error,
                output_syllables: lyric.len(),
                target_syllables: t.melody.len(),
                punc_count: lyric.punc_count,
            }
        })
        .collect();

    let ok: Vec<&LineReport> = lines.iter().filter_map(|l| l.report.as_ref()).collect();
    let length = length_stats(
        &lines.iter().map(|l| l.output_syllables).collect::<Vec<_>>(),
        &lines.iter().map(|l| l.target_syllables).collect::<Vec<_>>(),
    )?;

    let with_ref: Vec<(usize, &str)> = triples
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.reference.as_deref().map(|r| (i, r)))
        .collect();
    let bleu = if with_ref.is_empty() {
        None
    } else {
        let hyps: Vec<Vec<String>> = with_ref.iter().map(|(i, _)| bleu_tokens(&outputs[*i])).collect();
        let refs: Vec<Vec<String>> = with_ref.iter().map(|(_, r)| bleu_tokens(r)).collect();
        Some(corpus_bleu(&hyps, &refs, 4, false)?)
    };

    Ok(EvalReport {
        s_inter: mean(ok.iter().map(|r| r.s_inter)),
        s_intra: mean(ok.iter().map(|r| r.s_intra)),
        s_intra_multi: mean(ok.iter().filter_map(|r| r.s_intra_multi)),
        s_rest: mean(ok.iter().map(|r| r.s_rest)),
        avg_missed_rests: mean(ok.iter().map(|r| r.missed_rest_count as f64)),
        failed_lines: lines.len() - ok.len(),
        punc_count: lines.iter().map(|l| l.punc_count).sum(),
        lines,
        length,
        bleu,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn fmt_count(n: usize, ratio: f64) -> String {
    if n == 0 {
        "0".to_string()
    } else {
        format!("{n} ({ratio:.2})")
    }
}

impl EvalReport {
    /// Tab-separated per-line table followed by a corpus summary row.
    /// The summary renders length errors as `count (mean ratio)`, prints
    /// `-` for an intra score with no multi-note positions, and BLEU on a
    /// 0-100 scale.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("line\tinter\tintra\trest\tmissed_rests\tlength_delta\tstatus\n");
        for l in &self.lines {
            match (&l.report, &l.error) {
                (Some(r), _) => {
                    let _ = writeln!(
                        out,
                        "{}\t{:.4}\t{}\t{:.4}\t{}\t{}\tok",
                        l.index,
                        r.s_inter,
                        fmt_opt(r.s_intra_multi.map(|_| r.s_intra), 4),
                        r.s_rest,
                        r.missed_rest_count,
                        r.length_delta
                    );
                }
                (None, e) => {
                    let _ = writeln!(
                        out,
                        "{}\t-\t-\t-\t-\t{}\terror: {}",
                        l.index,
                        l.output_syllables as i64 - l.target_syllables as i64,
                        e.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        out.push('\n');
        out.push_str("inter\tintra\tavg_missed_rests\tlonger\tshorter\tbleu\tfailed\n");
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_opt(self.s_inter, 2),
            fmt_opt(self.s_intra_multi.and(self.s_intra), 2),
            fmt_opt(self.avg_missed_rests, 2),
            fmt_count(self.length.n_longer, self.length.longer_ratio),
            fmt_count(self.length.n_shorter, self.length.shorter_ratio),
            fmt_opt(self.bleu.map(|b| b * 100.0), 1),
            self.failed_lines
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Which weight a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKind {
    Inter,
    Intra,
    Rest,
}

impl LambdaKind {
    pub fn default_value(self) -> f64 {
        match self {
            Self::Inter => DEFAULT_LAMBDA_INTER,
            Self::Intra => DEFAULT_LAMBDA_INTRA,
            Self::Rest => DEFAULT_LAMBDA_REST,
        }
    }

    pub fn apply(self, cfg: &ConstraintConfig, value: f64) -> ConstraintConfig {
        let mut c = cfg.clone();
        match self {
            Self::Inter => c.lambda_inter = value,
            Self::Intra => c.lambda_intra = value,
            Self::Rest => c.lambda_rest = value,
        }
        c
    }
}

impl FromStr for LambdaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inter" => Ok(Self::Inter),
            "intra" => Ok(Self::Intra),
            "rest" | "r" | "R" => Ok(Self::Rest),
            other => Err(Error::Config(format!("unknown lambda `{other}` (inter|intra|rest)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Corpus mean of the swept constraint's normalized score.
    pub score: f64,
    /// Sum over lines of the swept constraint's cumulative log score.
    pub log_score: f64,
    pub bleu: Option<f64>,
    pub punc_count: usize,
    pub failures: usize,
    /// The grid value equals the default weight for this constraint.
    pub is_default: bool,
    pub outputs: Vec<Option<String>>,
}

/// Decodes the dataset once per grid value of the chosen weight.
pub fn sweep(
    dataset: &[AlignedTriple],
    model: &dyn CandidateModel,
    lexicons: &Lexicons,
    which: LambdaKind,
    grid: &[f64],
    base: &ConstraintConfig,
    opts: &DecodeOptions,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Domain("empty sweep grid".into()));
    }
    let inputs: Vec<LineInput> = dataset
        .iter()
        .map(|t| LineInput {
            melody: &t.melody,
            source: &t.source,
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let cfg = which.apply(base, value);
        cfg.validate()?;
        let decoded = decode_lines(&inputs, model, lexicons, &cfg, opts)?;
        let mut scores = Vec::new();
        let mut log_score = 0.0;
        let mut punc_count = 0;
        let mut failures = 0;
        let mut outputs = Vec::with_capacity(decoded.len());
        for res in &decoded {
            match res {
                Ok(h) => {
                    let r = h.report()?;
                    scores.push(match which {
                        LambdaKind::Inter => r.s_inter,
                        LambdaKind::Intra => r.s_intra,
                        LambdaKind::Rest => r.s_rest,
                    });
                    log_score += match which {
                        LambdaKind::Inter => h.components.log_inter,
                        LambdaKind::Intra => h.components.log_intra,
                        LambdaKind::Rest => h.components.log_rest,
                    };
                    punc_count += h.punc_used;
                    outputs.push(Some(h.text(model.vocab())));
                }
                Err(e) => {
                    log::warn!("sweep {which:?}={value}: {e}");
                    failures += 1;
                    outputs.push(None);
                }
            }
        }
        let pairs: Vec<(Vec<String>, Vec<String>)> = dataset
            .iter()
            .zip(&outputs)
            .filter_map(|(t, o)| Some((bleu_tokens(o.as_deref()?), bleu_tokens(t.reference.as_deref()?))))
            .collect();
        let bleu = if pairs.is_empty() {
            None
        } else {
            let (h, r): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            Some(corpus_bleu(&h, &r, 4, false)?)
        };
        points.push(SweepPoint {
            lambda: value,
            score: mean(scores.into_iter()).unwrap_or(f64::NAN),
            log_score,
            bleu,
            punc_count,
            failures,
            is_default: value == which.default_value(),
            outputs,
        });
    }
    Ok(points)
}

pub const SWEEP_CSV_HEADER: &str = "lambda,score,bleu,punc_count,failures";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.lambda,
            p.score,
            p.bleu.map(|b| b.to_string()).unwrap_or_default(),
            p.punc_count,
            p.failures
        );
    }
    out
}
