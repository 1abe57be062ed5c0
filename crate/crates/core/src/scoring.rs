//! Per-position alignment scores (tone shape, pitch contour, rests),
//! their per-line normalization, and length statistics.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melody::{Beats, MelodyLine, NoteGroup, Pitch};
use crate::segment::{is_boundary, segment_with_breaks, SegLexicon};
use crate::shape::{classify_shape_with, shape_matches_tone, XMode};
use crate::tone::{apply_sandhi, classify_transition, Tone, ToneLexicon, TransitionTable};

pub const DEFAULT_LAMBDA_INTER: f64 = 0.5;
pub const DEFAULT_LAMBDA_INTRA: f64 = 1.0;
pub const DEFAULT_LAMBDA_REST: f64 = 1.5;
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_STEP_MAX: u32 = 2;

const PUNCTUATION: &str = "，。！？、；：,.!?;:…";

pub fn is_punctuation(ch: char) -> bool {
    PUNCTUATION.contains(ch)
}

#[derive(Debug, Clone)]
pub struct ConstraintConfig {
    pub lambda_inter: f64,
    pub lambda_intra: f64,
    pub lambda_rest: f64,
    pub epsilon: f64,
    pub step_max: u32,
    pub transition_table: Arc<TransitionTable>,
    pub intra_x_mode: XMode,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            lambda_inter: DEFAULT_LAMBDA_INTER,
            lambda_intra: DEFAULT_LAMBDA_INTRA,
            lambda_rest: DEFAULT_LAMBDA_REST,
            epsilon: DEFAULT_EPSILON,
            step_max: DEFAULT_STEP_MAX,
            transition_table: Arc::new(TransitionTable::default_table()),
            intra_x_mode: XMode::Index,
        }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_inter", self.lambda_inter),
            ("lambda_intra", self.lambda_intra),
            ("lambda_rest", self.lambda_rest),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if self.step_max < 1 {
            return Err(Error::Config("step_max must be >= 1".into()));
        }
        Ok(())
    }

    /// All three weights set to zero.
    pub fn unconstrained(&self) -> Self {
        Self {
            lambda_inter: 0.0,
            lambda_intra: 0.0,
            lambda_rest: 0.0,
            ..self.clone()
        }
    }
}

/// Tone and segmentation resources shared by scoring and decoding.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub tones: ToneLexicon,
    pub words: SegLexicon,
}

impl Lexicons {
    pub fn bundled() -> Self {
        Self {
            tones: ToneLexicon::bundled(),
            words: SegLexicon::bundled(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionScores {
    pub intra: f64,
    pub inter: f64,
    pub rest: f64,
    /// A rest precedes this position.
    pub has_rest: bool,
    /// The position's group has more than one note.
    pub multi_note: bool,
}

impl PositionScores {
    pub fn missed_rest(&self) -> bool {
        self.has_rest && self.rest < 1.0
    }
}

pub fn intra_score(group: &NoteGroup, tone: Tone, cfg: &ConstraintConfig) -> f64 {
    if group.len() < 2 {
        return 1.0;
    }
    match classify_shape_with(group, cfg.intra_x_mode) {
        Ok(shape) if shape_matches_tone(shape, tone) => 1.0,
        _ => cfg.epsilon,
    }
}

/// `prev` is the preceding syllable's tone and first pitch, `None` at the
/// start of a line.
pub fn inter_score(
    prev: Option<(Tone, Pitch)>,
    cur: (Tone, Pitch),
    same_word: bool,
    cfg: &ConstraintConfig,
) -> f64 {
    let Some((prev_tone, prev_pitch)) = prev else {
        return 1.0;
    };
    if !same_word {
        return 1.0;
    }
    let cat = classify_transition(prev_pitch, cur.1, cfg.step_max);
    if cfg.transition_table.accepts(prev_tone, cur.0, cat) {
        1.0
    } else {
        cfg.epsilon
    }
}

pub fn rest_score(rest: Beats, punc_after_prev: bool, p_seg: f64, epsilon: f64) -> f64 {
    if rest <= Beats::from_integer(0) || punc_after_prev {
        1.0
    } else {
        p_seg.clamp(epsilon, 1.0)
    }
}

/// Per-line means of the position scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub s_intra: f64,
    pub s_inter: f64,
    pub s_rest: f64,
    /// Intra score over multi-note positions only.
    pub s_intra_multi: Option<f64>,
    pub missed_rest_count: usize,
    pub positions: usize,
    /// Output syllables minus melody positions.
    pub length_delta: i64,
}

pub fn normalized_line_scores(per_position: &[PositionScores]) -> Result<LineReport> {
    if per_position.is_empty() {
        return Err(Error::Domain("cannot normalize an empty line".into()));
    }
    let n = per_position.len() as f64;
    let mean = |f: fn(&PositionScores) -> f64| per_position.iter().map(f).sum::<f64>() / n;
    let multi: Vec<f64> = per_position
        .iter()
        .filter(|p| p.multi_note)
        .map(|p| p.intra)
        .collect();
    Ok(LineReport {
        s_intra: mean(|p| p.intra),
        s_inter: mean(|p| p.inter),
        s_rest: mean(|p| p.rest),
        s_intra_multi: (!multi.is_empty()).then(|| multi.iter().sum::<f64>() / multi.len() as f64),
        missed_rest_count: per_position.iter().filter(|p| p.missed_rest()).count(),
        positions: per_position.len(),
        length_delta: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LengthStats {
    pub n_longer: usize,
    pub longer_ratio: f64,
    pub n_shorter: usize,
    pub shorter_ratio: f64,
}

/// Counts lines longer and shorter than their target, with the mean
/// relative error of each group.
pub fn length_stats(outputs: &[usize], targets: &[usize]) -> Result<LengthStats> {
    if outputs.len() != targets.len() {
        return Err(Error::Domain(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut stats = LengthStats::default();
    let (mut long_sum, mut short_sum) = (0.0, 0.0);
    for (i, (&out, &target)) in outputs.iter().zip(targets).enumerate() {
        if target == 0 {
            return Err(Error::Domain(format!("line {i} has zero target length")));
        }
        let ratio = (out as f64 - target as f64).abs() / target as f64;
        if out > target {
            stats.n_longer += 1;
            long_sum += ratio;
        } else if out < target {
            stats.n_shorter += 1;
            short_sum += ratio;
        }
    }
    if stats.n_longer > 0 {
        stats.longer_ratio = long_sum / stats.n_longer as f64;
    }
    if stats.n_shorter > 0 {
        stats.shorter_ratio = short_sum / stats.n_shorter as f64;
    }
    Ok(stats)
}

/// A Mandarin lyric split into syllables, with punctuation folded onto
/// the syllable before it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lyric {
    pub syllables: Vec<char>,
    pub punc_after: Vec<bool>,
    pub punc_count: usize,
}

impl Lyric {
    pub fn parse(text: &str) -> Self {
        let mut lyric = Lyric::default();
        for ch in text.chars().filter(|c| !c.is_whitespace()) {
            if is_punctuation(ch) {
                lyric.punc_count += 1;
                if let Some(last) = lyric.punc_after.last_mut() {
                    *last = true;
                }
            } else {
                lyric.syllables.push(ch);
                lyric.punc_after.push(false);
            }
        }
        lyric
    }

    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    /// `breaks[i]`: punctuation sits between syllables `i-1` and `i`.
    pub fn breaks(&self) -> Vec<bool> {
        std::iter::once(false)
            .chain(self.punc_after.iter().copied())
            .take(self.syllables.len())
            .collect()
    }
}

/// Word spans and post-sandhi tones of a syllable sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneAnnotation {
    pub spans: Vec<Range<usize>>,
    pub citation: Vec<Tone>,
    pub tones: Vec<Tone>,
}

impl ToneAnnotation {
    pub fn same_word(&self, i: usize) -> bool {
        i > 0 && !is_boundary(&self.spans, i)
    }
}

pub fn annotate(syllables: &[char], breaks: &[bool], lex: &Lexicons) -> Result<ToneAnnotation> {
    let spans = segment_with_breaks(syllables, breaks, &lex.words);
    let citation = lex.tones.citation_tones(syllables, &spans)?;
    let tones = apply_sandhi(&citation, &spans)?;
    Ok(ToneAnnotation {
        spans,
        citation,
        tones,
    })
}

/// Scores position `i` given an annotation covering at least `0..=i`.
pub fn score_position(
    melody: &MelodyLine,
    i: usize,
    ann: &ToneAnnotation,
    punc_before: bool,
    cfg: &ConstraintConfig,
) -> PositionScores {
    let group = &melody.groups()[i];
    let tone = ann.tones[i];
    let rest = melody.rests()[i];
    let same_word = ann.same_word(i);
    let prev = (i > 0).then(|| (ann.tones[i - 1], melody.groups()[i - 1].first_pitch()));
    // The line start counts as a word boundary.
    let p_seg = if i == 0 || !same_word { 1.0 } else { cfg.epsilon };
    PositionScores {
        intra: intra_score(group, tone, cfg),
        inter: inter_score(prev, (tone, group.first_pitch()), same_word, cfg),
        rest: rest_score(rest, punc_before, p_seg, cfg.epsilon),
        has_rest: rest > Beats::from_integer(0),
        multi_note: group.len() > 1,
    }
}

/// Scores a finished lyric against its melody using whole-line
/// segmentation and sandhi. Positions beyond the shorter of the two are
/// not scored.
pub fn score_line(
    melody: &MelodyLine,
    lyric: &Lyric,
    lex: &Lexicons,
    cfg: &ConstraintConfig,
) -> Result<Vec<PositionScores>> {
    let ann = annotate(&lyric.syllables, &lyric.breaks(), lex)?;
    let breaks = lyric.breaks();
    Ok((0..lyric.len().min(melody.len()))
        .map(|i| score_position(melody, i, &ann, breaks[i], cfg))
        .collect())
}

/// Scores a lyric the way the decoder does: position `i` sees only the
/// prefix `0..=i` when segmenting and applying sandhi.
pub fn score_line_incremental(
    melody: &MelodyLine,
    lyric: &Lyric,
    lex: &Lexicons,
    cfg: &ConstraintConfig,
) -> Result<Vec<PositionScores>> {
    let breaks = lyric.breaks();
    (0..lyric.len().min(melody.len()))
        .map(|i| {
            let ann = annotate(&lyric.syllables[..=i], &breaks[..=i], lex)?;
            Ok(score_position(melody, i, &ann, breaks[i], cfg))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tone::TransitionCategory;

    fn cfg() -> ConstraintConfig {
        ConstraintConfig::default()
    }

    fn group(p: &[Pitch]) -> NoteGroup {
        NoteGroup::quarters(p).unwrap()
    }

    #[test]
    fn intra_cases() {
        let c = cfg();
        for t in Tone::all() {
            assert_eq!(intra_score(&group(&[60]), t, &c), 1.0);
        }
        assert_eq!(intra_score(&group(&[69, 64]), Tone::FALLING, &c), 1.0);
        assert_eq!(intra_score(&group(&[60, 62, 64]), Tone::FALLING, &c), 0.01);
    }

    #[test]
    fn inter_cases() {
        let c = cfg();
        assert_eq!(inter_score(None, (Tone::FALLING, 60), true, &c), 1.0);
        assert_eq!(inter_score(Some((Tone::FALLING, 60)), (Tone::FALLING, 62), false, &c), 1.0);
        // si4 zai4 on rising notes
        assert_eq!(inter_score(Some((Tone::FALLING, 60)), (Tone::FALLING, 62), true, &c), 0.01);
        assert_eq!(inter_score(Some((Tone::FALLING, 62)), (Tone::FALLING, 60), true, &c), 1.0);
        let open = ConstraintConfig {
            transition_table: Arc::new(TransitionTable::permissive()),
            ..cfg()
        };
        assert_eq!(inter_score(Some((Tone::FALLING, 60)), (Tone::FALLING, 62), true, &open), 1.0);
        assert!(!c.transition_table.accepts(Tone::FALLING, Tone::FALLING, TransitionCategory::StepUp));
    }

    #[test]
    fn rest_cases() {
        let zero = Beats::from_integer(0);
        let one = Beats::from_integer(1);
        assert_eq!(rest_score(zero, false, 0.01, 0.01), 1.0);
        assert_eq!(rest_score(zero, true, 0.01, 0.01), 1.0);
        assert_eq!(rest_score(one, true, 0.01, 0.01), 1.0);
        assert_eq!(rest_score(one, false, 0.01, 0.01), 0.01);
        assert_eq!(rest_score(one, false, 1.0, 0.01), 1.0);
    }

    #[test]
    fn normalization() {
        let p = |intra| PositionScores {
            intra,
            inter: 1.0,
            rest: 1.0,
            has_rest: false,
            multi_note: true,
        };
        let r = normalized_line_scores(&[p(1.0), p(0.01)]).unwrap();
        assert!((r.s_intra - 0.505).abs() < 1e-15);
        assert_eq!(r.s_inter, 1.0);
        assert_eq!(r.missed_rest_count, 0);
        assert!(normalized_line_scores(&[]).is_err());
    }

    #[test]
    fn lengths() {
        assert_eq!(length_stats(&[3, 4], &[3, 4]).unwrap(), LengthStats::default());
        let s = length_stats(&[12], &[10]).unwrap();
        assert_eq!(s.n_longer, 1);
        assert!((s.longer_ratio - 0.2).abs() < 1e-12);
        let s = length_stats(&[12, 8, 10, 5], &[10, 10, 10, 10]).unwrap();
        assert_eq!((s.n_longer, s.n_shorter), (1, 2));
        assert!((s.shorter_ratio - 0.35).abs() < 1e-12);
        assert!(length_stats(&[1], &[0]).is_err());
        assert!(length_stats(&[1], &[]).is_err());
    }

    #[test]
    fn lyric_parsing() {
        let l = Lyric::parse("你好，再见。");
        assert_eq!(l.syllables, vec!['你', '好', '再', '见']);
        assert_eq!(l.punc_after, vec![false, true, false, true]);
        assert_eq!(l.breaks(), vec![false, false, true, false]);
        assert_eq!(l.punc_count, 2);
    }

    #[test]
    fn rest_inside_word_is_missed() {
        let lex = Lexicons::bundled();
        let melody = MelodyLine::new(
            vec![group(&[60]), group(&[60]), group(&[60])],
            vec![Beats::from_integer(0), Beats::from_integer(1), Beats::from_integer(0)],
        )
        .unwrap();
        let split = score_line(&melody, &Lyric::parse("再见吗"), &lex, &cfg()).unwrap();
        assert_eq!(split[1].rest, 0.01);
        let punct = score_line(&melody, &Lyric::parse("再，见吗"), &lex, &cfg()).unwrap();
        assert_eq!(punct[1].rest, 1.0);
        let report = normalized_line_scores(&split).unwrap();
        assert_eq!(report.missed_rest_count, 1);
    }
}
