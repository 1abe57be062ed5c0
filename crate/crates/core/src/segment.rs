//! Forward maximum-match word segmentation and the word-boundary
//! probability used by the rest score.

use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};

const DEFAULT_WORDS: &str = include_str!("../data/seg_lexicon.txt");

#[derive(Debug, Clone, Default)]
pub struct SegLexicon {
    words: HashSet<String>,
    max_len: usize,
}

impl SegLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: HashSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        let max_len = words.iter().map(|w| w.chars().count()).max().unwrap_or(1);
        Self { words, max_len }
    }

    /// One word per line, `#` comments.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_WORDS)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// A copy without `word`.
    pub fn without(&self, word: &str) -> Self {
        Self::new(self.words.iter().filter(|w| *w != word).cloned())
    }
}

/// Forward maximum match: at each position take the longest lexicon word
/// starting there, otherwise a single character.
pub fn segment(chars: &[char], lexicon: &SegLexicon) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut at = 0;
    let mut buf = String::new();
    while at < chars.len() {
        let longest = (chars.len() - at).min(lexicon.max_len());
        let mut len = 1;
        for n in (2..=longest).rev() {
            buf.clear();
            buf.extend(&chars[at..at + n]);
            if lexicon.contains(&buf) {
                len = n;
                break;
            }
        }
        spans.push(at..at + len);
        at += len;
    }
    spans
}

/// Segments each punctuation-delimited run separately so that no word
/// spans a punctuation mark. `breaks[i]` marks a forced boundary before
/// syllable `i`.
pub fn segment_with_breaks(chars: &[char], breaks: &[bool], lexicon: &SegLexicon) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=chars.len() {
        if i == chars.len() || breaks.get(i).copied().unwrap_or(false) {
            spans.extend(
                segment(&chars[start..i], lexicon)
                    .into_iter()
                    .map(|r| r.start + start..r.end + start),
            );
            start = i;
        }
    }
    spans
}

pub(crate) fn is_boundary(spans: &[Range<usize>], i: usize) -> bool {
    spans.iter().any(|s| s.start == i)
}

/// 1.0 when the segmentation puts a word boundary between `chars[i-1]`
/// and `chars[i]`, otherwise `epsilon`.
pub fn boundary_prob(chars: &[char], i: usize, lexicon: &SegLexicon, epsilon: f64) -> Result<f64> {
    if i == 0 || i >= chars.len() {
        return Err(Error::Domain(format!(
            "boundary position {i} outside 1..{}",
            chars.len()
        )));
    }
    Ok(if is_boundary(&segment(chars, lexicon), i) {
        1.0
    } else {
        epsilon
    })
}
