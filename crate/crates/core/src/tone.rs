//! Mandarin tones: lexicon lookup, third-tone sandhi, and the table of
//! melodic transitions that suit each pair of successive tones.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melody::Pitch;

const DEFAULT_TABLE: &str = include_str!("../data/transition_table.tsv");
const DEFAULT_LEXICON: &str = include_str!("../data/tone_lexicon.tsv");

/// A Mandarin tone, 1-4 plus 5 for the neutral tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Tone(u8);

impl Tone {
    pub const HIGH: Tone = Tone(1);
    pub const RISING: Tone = Tone(2);
    pub const DIPPING: Tone = Tone(3);
    pub const FALLING: Tone = Tone(4);
    pub const NEUTRAL: Tone = Tone(5);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Tone(value))
        } else {
            Err(Error::Domain(format!("tone {value} outside 1..=5")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_neutral(self) -> bool {
        self.0 == 5
    }

    pub fn all() -> impl Iterator<Item = Tone> {
        (1..=5).map(Tone)
    }

    fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for Tone {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Tone::new(v)
    }
}

impl From<Tone> for u8 {
    fn from(t: Tone) -> u8 {
        t.0
    }
}

impl fmt::Display for Tone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Direction and size of the move between two successive notes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionCategory {
    Level,
    StepUp,
    JumpUp,
    StepDown,
    JumpDown,
}

impl TransitionCategory {
    pub const ALL: [TransitionCategory; 5] = [
        Self::Level,
        Self::StepUp,
        Self::JumpUp,
        Self::StepDown,
        Self::JumpDown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Level => "level",
            Self::StepUp => "step-up",
            Self::JumpUp => "jump-up",
            Self::StepDown => "step-down",
            Self::JumpDown => "jump-down",
        }
    }

    /// The same-sized move in the other direction.
    pub fn mirrored(self) -> Self {
        match self {
            Self::Level => Self::Level,
            Self::StepUp => Self::StepDown,
            Self::JumpUp => Self::JumpDown,
            Self::StepDown => Self::StepUp,
            Self::JumpDown => Self::JumpUp,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl FromStr for TransitionCategory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown transition category `{s}`")))
    }
}

impl fmt::Display for TransitionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn classify_transition(prev: Pitch, next: Pitch, step_max: u32) -> TransitionCategory {
    let delta = i64::from(next) - i64::from(prev);
    let step_max = i64::from(step_max.max(1));
    match delta {
        0 => TransitionCategory::Level,
        d if d > 0 && d <= step_max => TransitionCategory::StepUp,
        d if d > 0 => TransitionCategory::JumpUp,
        d if -d <= step_max => TransitionCategory::StepDown,
        _ => TransitionCategory::JumpDown,
    }
}

/// Acceptable transition categories for every ordered pair of tones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable {
    cells: [[u8; 5]; 5],
}

impl TransitionTable {
    /// Every transition is acceptable for every tone pair.
    pub fn permissive() -> Self {
        let all = TransitionCategory::ALL.iter().fold(0, |m, c| m | c.bit());
        Self {
            cells: [[all; 5]; 5],
        }
    }

    /// The bundled table.
    pub fn default_table() -> Self {
        Self::parse(DEFAULT_TABLE, "transition_table.tsv").expect("bundled transition table is valid")
    }

    /// Parses `prev<TAB>next<TAB>cat,cat,...` lines. All 25 pairs must be
    /// present exactly once, each with a non-empty set.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::DataFile {
            file: file.to_string(),
            line,
            message,
        };
        let mut cells = [[0u8; 5]; 5];
        let mut seen = [[false; 5]; 5];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(i + 1, format!("expected 3 fields, found {}", fields.len())));
            }
            let tone = |s: &str| {
                s.trim()
                    .parse::<u8>()
                    .map_err(|_| Error::Domain(format!("`{s}` is not a tone")))
                    .and_then(Tone::new)
            };
            let prev = tone(fields[0]).map_err(|e| err(i + 1, e.to_string()))?;
            let next = tone(fields[1]).map_err(|e| err(i + 1, e.to_string()))?;
            let mut mask = 0;
            for name in fields[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let cat: TransitionCategory = name.parse().map_err(|e: Error| err(i + 1, e.to_string()))?;
                mask |= cat.bit();
            }
            if mask == 0 {
                return Err(err(i + 1, format!("empty category set for {prev}->{next}")));
            }
            if seen[prev.index()][next.index()] {
                return Err(err(i + 1, format!("duplicate entry for {prev}->{next}")));
            }
            seen[prev.index()][next.index()] = true;
            cells[prev.index()][next.index()] = mask;
        }
        let missing: Vec<String> = Tone::all()
            .flat_map(|a| Tone::all().map(move |b| (a, b)))
            .filter(|(a, b)| !seen[a.index()][b.index()])
            .map(|(a, b)| format!("{a}->{b}"))
            .collect();
        if !missing.is_empty() {
            return Err(err(0, format!("missing tone pairs: {}", missing.join(" "))));
        }
        Ok(Self { cells })
    }

    pub fn accepts(&self, prev: Tone, next: Tone, cat: TransitionCategory) -> bool {
        self.cells[prev.index()][next.index()] & cat.bit() != 0
    }

    pub fn categories(&self, prev: Tone, next: Tone) -> Vec<TransitionCategory> {
        TransitionCategory::ALL
            .into_iter()
            .filter(|c| self.accepts(prev, next, *c))
            .collect()
    }

    /// Renders the table in its file format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for a in Tone::all() {
            for b in Tone::all() {
                let cats: Vec<&str> = self.categories(a, b).iter().map(|c| c.name()).collect();
                out.push_str(&format!("{a}\t{b}\t{}\n", cats.join(",")));
            }
        }
        out
    }
}

impl Default for TransitionTable {
    fn default() -> Self {
        Self::default_table()
    }
}

pub fn transition_acceptable(
    prev: Tone,
    next: Tone,
    cat: TransitionCategory,
    table: &TransitionTable,
) -> bool {
    table.accepts(prev, next, cat)
}

/// Citation tones for characters and multi-character words.
#[derive(Debug, Clone, Default)]
pub struct ToneLexicon {
    chars: HashMap<char, Vec<Tone>>,
    words: HashMap<String, Vec<Tone>>,
}

impl ToneLexicon {
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_LEXICON, "tone_lexicon.tsv").expect("bundled tone lexicon is valid")
    }

    /// Parses `entry<TAB>pinyin<TAB>tone` lines. Single characters take
    /// one tone per line (repeats are heteronyms, first wins) or a
    /// comma-separated list. Words take one tone digit per character.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lex = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::DataFile {
                file: file.to_string(),
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let entry = fields[0].trim();
            let chars: Vec<char> = entry.chars().collect();
            let digit = |c: char| {
                c.to_digit(10)
                    .ok_or_else(|| err(format!("`{c}` is not a tone")))
                    .and_then(|d| Tone::new(d as u8).map_err(|e| err(e.to_string())))
            };
            match chars.len() {
                0 => return Err(err("empty entry".into())),
                1 => {
                    let readings = lex.chars.entry(chars[0]).or_default();
                    for t in fields[2].split(',').map(str::trim) {
                        let mut cs = t.chars();
                        match (cs.next(), cs.next()) {
                            (Some(c), None) => {
                                let tone = digit(c)?;
                                if !readings.contains(&tone) {
                                    readings.push(tone);
                                }
                            }
                            _ => return Err(err(format!("bad tone field `{t}`"))),
                        }
                    }
                }
                n => {
                    let tones = fields[2]
                        .chars()
                        .filter(|c| !c.is_whitespace())
                        .map(digit)
                        .collect::<Result<Vec<_>>>()?;
                    if tones.len() != n {
                        return Err(err(format!("{n} characters but {} tones", tones.len())));
                    }
                    lex.words.entry(entry.to_string()).or_insert(tones);
                }
            }
        }
        Ok(lex)
    }

    pub fn contains(&self, ch: char) -> bool {
        self.chars.contains_key(&ch)
    }

    /// Single characters with an entry, in code point order.
    pub fn characters(&self) -> Vec<char> {
        let mut v: Vec<char> = self.chars.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn word_tones(&self, word: &str) -> Option<&[Tone]> {
        self.words.get(word).map(Vec::as_slice)
    }

    /// Citation tone of one character; `pos` is reported on failure.
    pub fn lookup_tone(&self, ch: char, pos: usize) -> Result<Tone> {
        self.chars
            .get(&ch)
            .and_then(|r| r.first().copied())
            .ok_or(Error::UnknownCharacter {
                ch: ch.to_string(),
                pos,
            })
    }

    /// Citation tones for a segmented character sequence. Word entries
    /// override per-character readings.
    pub fn citation_tones(&self, chars: &[char], spans: &[Range<usize>]) -> Result<Vec<Tone>> {
        check_partition(spans, chars.len())?;
        let mut out = Vec::with_capacity(chars.len());
        for span in spans {
            if span.len() > 1 {
                let word: String = chars[span.clone()].iter().collect();
                if let Some(t) = self.word_tones(&word) {
                    out.extend_from_slice(t);
                    continue;
                }
            }
            for i in span.clone() {
                out.push(self.lookup_tone(chars[i], i)?);
            }
        }
        Ok(out)
    }
}

pub fn lookup_tone(ch: char, lexicon: &ToneLexicon) -> Result<Tone> {
    lexicon.lookup_tone(ch, 0)
}

pub(crate) fn check_partition(spans: &[Range<usize>], len: usize) -> Result<()> {
    let mut at = 0;
    for s in spans {
        if s.start != at || s.end <= s.start {
            return Err(Error::Structural(format!(
                "word spans do not partition 0..{len}: bad span {s:?}"
            )));
        }
        at = s.end;
    }
    if at != len {
        return Err(Error::Structural(format!(
            "word spans cover 0..{at}, expected 0..{len}"
        )));
    }
    Ok(())
}

/// Third-tone sandhi: within each word, one left-to-right pass turns a
/// tone 3 followed by tone 3 into tone 2.
pub fn apply_sandhi(tones: &[Tone], spans: &[Range<usize>]) -> Result<Vec<Tone>> {
    check_partition(spans, tones.len())?;
    let mut out = tones.to_vec();
    for span in spans {
        for i in span.start..span.end.saturating_sub(1) {
            if out[i] == Tone::DIPPING && out[i + 1] == Tone::DIPPING {
                out[i] = Tone::RISING;
            }
        }
    }
    Ok(out)
}
