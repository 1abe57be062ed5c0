//! Melody data model: note groups, rests, aligned records and the two
//! syllable-note assignment strategies.
//!
//! Pitches are MIDI semitone numbers (C4 = 60). Durations are exact
//! rationals where 1 is a quarter note.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Pitch = i32;

/// Exact note or rest length, in quarter notes.
pub type Beats = Rational64;

const LETTERS: [(char, i32); 7] = [
    ('C', 0),
    ('D', 2),
    ('E', 4),
    ('F', 5),
    ('G', 7),
    ('A', 9),
    ('B', 11),
];

const SHARP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// Parses a scientific pitch name such as `A3`, `C#4` or `Bb-1`.
pub fn note_name_to_pitch(name: &str) -> Result<Pitch> {
    let bad = |reason: &str| Error::PitchName {
        token: name.to_string(),
        reason: reason.to_string(),
    };
    let mut chars = name.chars();
    let letter = chars.next().ok_or_else(|| bad("empty name"))?;
    let base = LETTERS
        .iter()
        .find(|(l, _)| *l == letter)
        .map(|(_, s)| *s)
        .ok_or_else(|| bad("letter must be one of A-G"))?;
    let rest = chars.as_str();
    let (shift, octave) = match rest.chars().next() {
        Some('#') => (1, &rest[1..]),
        Some('b') => (-1, &rest[1..]),
        _ => (0, rest),
    };
    if octave.is_empty() {
        return Err(bad("missing octave"));
    }
    let octave: i32 = octave
        .parse()
        .map_err(|_| bad("octave must be an integer"))?;
    octave
        .checked_add(1)
        .and_then(|o| o.checked_mul(12))
        .and_then(|o| o.checked_add(base + shift))
        .ok_or_else(|| bad("octave out of range"))
}

/// Canonical sharp spelling of a pitch, e.g. `61 -> "C#4"`.
pub fn pitch_to_note_name(pitch: Pitch) -> String {
    let octave = pitch.div_euclid(12) - 1;
    format!("{}{}", SHARP_NAMES[pitch.rem_euclid(12) as usize], octave)
}

/// The notes sung on a single syllable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteGroup {
    pitches: Vec<Pitch>,
    durations: Vec<Beats>,
}

impl NoteGroup {
    pub fn new(pitches: Vec<Pitch>, durations: Vec<Beats>) -> Result<Self> {
        if pitches.is_empty() {
            return Err(Error::Domain("note group is empty".into()));
        }
        if pitches.len() != durations.len() {
            return Err(Error::Domain(format!(
                "{} pitches vs {} durations",
                pitches.len(),
                durations.len()
            )));
        }
        if let Some(d) = durations.iter().find(|d| **d <= Beats::from_integer(0)) {
            return Err(Error::Domain(format!("non-positive duration {d}")));
        }
        Ok(Self { pitches, durations })
    }

    /// A group with quarter-note durations, handy in tests and examples.
    pub fn quarters(pitches: &[Pitch]) -> Result<Self> {
        Self::new(
            pitches.to_vec(),
            vec![Beats::from_integer(1); pitches.len()],
        )
    }

    pub fn pitches(&self) -> &[Pitch] {
        &self.pitches
    }

    pub fn durations(&self) -> &[Beats] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.pitches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pitches.is_empty()
    }

    pub fn first_pitch(&self) -> Pitch {
        self.pitches[0]
    }

    pub fn total_duration(&self) -> Beats {
        self.durations.iter().copied().sum()
    }
}

/// One lyric line worth of melody. `rests[i]` is the rest before group `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MelodyLine {
    groups: Vec<NoteGroup>,
    rests: Vec<Beats>,
}

impl MelodyLine {
    pub fn new(groups: Vec<NoteGroup>, rests: Vec<Beats>) -> Result<Self> {
        if groups.len() != rests.len() {
            return Err(Error::Domain(format!(
                "{} groups vs {} rests",
                groups.len(),
                rests.len()
            )));
        }
        if let Some(r) = rests.iter().find(|r| **r < Beats::from_integer(0)) {
            return Err(Error::Domain(format!("negative rest {r}")));
        }
        Ok(Self { groups, rests })
    }

    pub fn groups(&self) -> &[NoteGroup] {
        &self.groups
    }

    pub fn rests(&self) -> &[Beats] {
        &self.rests
    }

    /// Number of syllable positions.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn note_count(&self) -> usize {
        self.groups.iter().map(NoteGroup::len).sum()
    }

    pub fn total_duration(&self) -> Beats {
        self.groups.iter().map(NoteGroup::total_duration).sum()
    }

    pub fn total_rest(&self) -> Beats {
        self.rests.iter().copied().sum()
    }

    /// Adds `delta` semitones to every note.
    pub fn transposed(&self, delta: Pitch) -> Self {
        let groups = self
            .groups
            .iter()
            .map(|g| NoteGroup {
                pitches: g.pitches.iter().map(|p| p + delta).collect(),
                durations: g.durations.clone(),
            })
            .collect();
        Self {
            groups,
            rests: self.rests.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentStrategy {
    /// One syllable per note.
    NoteToSyllable,
    /// One syllable per original note group.
    #[default]
    SyllableToSyllable,
}

impl FromStr for AssignmentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "note-to-syllable" => Ok(Self::NoteToSyllable),
            "syllable-to-syllable" => Ok(Self::SyllableToSyllable),
            other => Err(Error::Config(format!("unknown assignment strategy `{other}`"))),
        }
    }
}

impl fmt::Display for AssignmentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoteToSyllable => "note-to-syllable",
            Self::SyllableToSyllable => "syllable-to-syllable",
        })
    }
}

pub fn apply_assignment(line: &MelodyLine, strategy: AssignmentStrategy) -> MelodyLine {
    match strategy {
        AssignmentStrategy::SyllableToSyllable => line.clone(),
        AssignmentStrategy::NoteToSyllable => {
            let mut groups = Vec::with_capacity(line.note_count());
            let mut rests = Vec::with_capacity(line.note_count());
            for (group, rest) in line.groups.iter().zip(&line.rests) {
                for (k, (p, d)) in group.pitches.iter().zip(&group.durations).enumerate() {
                    groups.push(NoteGroup {
                        pitches: vec![*p],
                        durations: vec![*d],
                    });
                    rests.push(if k == 0 { *rest } else { Beats::from_integer(0) });
                }
            }
            MelodyLine { groups, rests }
        }
    }
}

/// Melody plus source lyric and optional reference translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedTriple {
    pub melody: MelodyLine,
    pub source: String,
    pub reference: Option<String>,
}

/// Splits source lyrics into syllables. Whitespace separates words, a
/// hyphen ends a syllable (`a-bout` is two), and CJK characters are one
/// syllable each.
pub fn source_syllables(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if is_cjk(ch) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_string());
        } else if ch == '-' {
            cur.push(ch);
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.retain(|s| s.chars().any(|c| c.is_alphanumeric()));
    out
}

pub(crate) fn is_cjk(ch: char) -> bool {
    matches!(ch as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    groups: Vec<RawGroup>,
    rests: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    pitches: Vec<Value>,
    durations: Vec<Value>,
}

fn parse_beats(v: &Value) -> std::result::Result<Beats, String> {
    match v {
        Value::String(s) => {
            Beats::from_str(s.trim()).map_err(|_| format!("`{s}` is not a rational"))
        }
        Value::Number(n) => n
            .as_i64()
            .map(Beats::from_integer)
            .ok_or_else(|| format!("`{n}` is not an integer or rational string")),
        other => Err(format!("expected rational string, found {other}")),
    }
}

fn parse_pitch(v: &Value) -> std::result::Result<Pitch, String> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .and_then(|p| Pitch::try_from(p).ok())
            .ok_or_else(|| format!("pitch {n} is not an integer")),
        Value::String(s) => note_name_to_pitch(s.trim()).map_err(|e| e.to_string()),
        other => Err(format!("expected integer or pitch name, found {other}")),
    }
}

/// Parses one JSON melody record. `record` is reported in errors.
pub fn parse_record(text: &str, record: usize) -> Result<AlignedTriple> {
    let err = |field: &str, message: String| Error::Record {
        record,
        field: field.to_string(),
        message,
    };
    let raw: RawRecord =
        serde_json::from_str(text).map_err(|e| err("schema", e.to_string()))?;

    let mut groups = Vec::with_capacity(raw.groups.len());
    for (gi, g) in raw.groups.iter().enumerate() {
        if g.pitches.is_empty() {
            return Err(err("groups", format!("group {gi}: empty group")));
        }
        if g.pitches.len() != g.durations.len() {
            let (np, nd) = (g.pitches.len(), g.durations.len());
            let noun = |n: usize, one: &'static str, many: &'static str| {
                if n == 1 {
                    one
                } else {
                    many
                }
            };
            return Err(err(
                "groups",
                format!(
                    "group {gi}: {np} {} vs {nd} {}",
                    noun(np, "pitch", "pitches"),
                    noun(nd, "duration", "durations")
                ),
            ));
        }
        let pitches = g
            .pitches
            .iter()
            .map(parse_pitch)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| err("pitches", format!("group {gi}: {m}")))?;
        let durations = g
            .durations
            .iter()
            .map(parse_beats)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| err("durations", format!("group {gi}: {m}")))?;
        let group = NoteGroup::new(pitches, durations)
            .map_err(|e| err("durations", format!("group {gi}: {e}")))?;
        groups.push(group);
    }
    if groups.is_empty() {
        return Err(err("groups", "line has no note groups".into()));
    }

    let rests = raw
        .rests
        .iter()
        .enumerate()
        .map(|(i, v)| parse_beats(v).map_err(|m| format!("rest {i}: {m}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|m| err("rests", m))?;
    if let Some(i) = rests.iter().position(|r| *r < Beats::from_integer(0)) {
        return Err(err("rests", format!("rest {i}: negative rest {}", rests[i])));
    }
    let melody = MelodyLine::new(groups, rests).map_err(|e| err("rests", e.to_string()))?;

    let source = raw.source.unwrap_or_default();
    if !source.trim().is_empty() {
        let n = source_syllables(&source).len();
        if n != melody.len() {
            return Err(err(
                "source",
                format!("{n} syllables vs {} note groups", melody.len()),
            ));
        }
    }
    Ok(AlignedTriple {
        melody,
        source,
        reference: raw.reference,
    })
}

pub fn parse_melody_line(text: &str, record: usize) -> Result<MelodyLine> {
    parse_record(text, record).map(|t| t.melody)
}

/// Serializes a record as a single JSON line (no trailing newline).
pub fn to_record(triple: &AlignedTriple) -> String {
    let beats = |b: &Beats| Value::String(b.to_string());
    let raw = RawRecord {
        groups: triple
            .melody
            .groups
            .iter()
            .map(|g| RawGroup {
                pitches: g.pitches.iter().map(|p| Value::from(*p)).collect(),
                durations: g.durations.iter().map(beats).collect(),
            })
            .collect(),
        rests: triple.melody.rests.iter().map(beats).collect(),
        source: (!triple.source.is_empty()).then(|| triple.source.clone()),
        reference: triple.reference.clone(),
    };
    serde_json::to_string(&raw).expect("record serialization cannot fail")
}

/// Parses a whole record file. Blank lines and `#` comments are skipped;
/// records are numbered by 1-based file line.
pub fn parse_records(text: &str) -> Vec<(usize, Result<AlignedTriple>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| (i + 1, parse_record(l, i + 1)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Beats {
        Beats::new(n, d)
    }

    pub(crate) const SEASONS: &str = r#"{"groups":[{"pitches":["A3"],"durations":["1/4"]},{"pitches":["C4"],"durations":["1/4"]},{"pitches":["D4"],"durations":["1/2"]},{"pitches":["F4","G4","F4","F4"],"durations":["3","3/2","1/2","1/2"]}],"rests":["0","0","0","1"],"source":"How a-bout love"}"#;

    #[test]
    fn pitch_names() {
        assert_eq!(note_name_to_pitch("A3").unwrap(), 57);
        assert_eq!(note_name_to_pitch("C4").unwrap(), 60);
        assert_eq!(note_name_to_pitch("D4").unwrap(), 62);
        assert_eq!(note_name_to_pitch("F4").unwrap(), 65);
        assert_eq!(note_name_to_pitch("G4").unwrap(), 67);
        assert_eq!(note_name_to_pitch("C#4").unwrap(), 61);
        assert_eq!(note_name_to_pitch("Db4").unwrap(), 61);
        assert_eq!(note_name_to_pitch("C-1").unwrap(), 0);
        assert_eq!(pitch_to_note_name(61), "C#4");
    }

    #[test]
    fn bad_pitch_names_name_the_token() {
        for bad in ["H4", "C", "", "Cx4", "C#", "c4", "C4.5"] {
            match note_name_to_pitch(bad) {
                Err(Error::PitchName { token, .. }) => assert_eq!(token, bad),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn seasons_of_love_record() {
        let t = parse_record(SEASONS, 0).unwrap();
        let pitches: Vec<_> = t.melody.groups().iter().map(|g| g.pitches().to_vec()).collect();
        assert_eq!(pitches, vec![vec![57], vec![60], vec![62], vec![65, 67, 65, 65]]);
        assert_eq!(t.melody.rests(), &[r(0, 1), r(0, 1), r(0, 1), r(1, 1)]);
        assert_eq!(t.melody.groups()[3].durations(), &[r(3, 1), r(3, 2), r(1, 2), r(1, 2)]);
        assert_eq!(t.melody.groups()[0].durations(), &[r(1, 4)]);
        assert_eq!(t.source, "How a-bout love");
    }

    #[test]
    fn single_group() {
        let m = parse_melody_line(r#"{"groups":[{"pitches":[60],"durations":["1"]}],"rests":["0"]}"#, 0)
            .unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn length_mismatch_message() {
        let e = parse_melody_line(
            r#"{"groups":[{"pitches":[60,62],"durations":["1"]}],"rests":["0"]}"#,
            4,
        )
        .unwrap_err();
        match e {
            Error::Record { record, message, .. } => {
                assert_eq!(record, 4);
                assert_eq!(message, "group 0: 2 pitches vs 1 duration");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_records() {
        let cases = [
            r#"{"groups":[{"pitches":[60],"durations":["1"]}],"rests":["-1"]}"#,
            r#"{"groups":[{"pitches":[],"durations":[]}],"rests":["0"]}"#,
            r#"{"groups":[{"pitches":[60.5],"durations":["1"]}],"rests":["0"]}"#,
            r#"{"groups":[{"pitches":[60],"durations":["0"]}],"rests":["0"]}"#,
            r#"{"groups":[{"pitches":[60],"durations":["1"]}],"rests":[]}"#,
            r#"{"groups":[{"pitches":[60],"durations":["1"]}],"rests":["0"],"bogus":1}"#,
            r#"{"groups":[{"pitches":[60],"durations":["1"]}],"rests":["0"],"source":"one two"}"#,
            r#"not json"#,
        ];
        for c in cases {
            assert!(matches!(parse_record(c, 7), Err(Error::Record { record: 7, .. })), "{c}");
        }
    }

    #[test]
    fn note_to_syllable_flattens_love() {
        let line = parse_melody_line(SEASONS, 0).unwrap();
        let flat = apply_assignment(&line, AssignmentStrategy::NoteToSyllable);
        // Seven notes (the REST column is not a note).
        assert_eq!(flat.len(), 7);
        assert!(flat.groups().iter().all(|g| g.len() == 1));
        assert_eq!(flat.rests()[3], r(1, 1));
        assert!(flat.rests()[4..].iter().all(|r| *r == Beats::from_integer(0)));
        assert_eq!(apply_assignment(&line, AssignmentStrategy::SyllableToSyllable), line);
    }

    #[test]
    fn rest_attaches_to_first_note() {
        let line = MelodyLine::new(
            vec![NoteGroup::quarters(&[65, 67]).unwrap()],
            vec![Beats::from_integer(2)],
        )
        .unwrap();
        let flat = apply_assignment(&line, AssignmentStrategy::NoteToSyllable);
        let p: Vec<_> = flat.groups().iter().map(|g| g.pitches().to_vec()).collect();
        assert_eq!(p, vec![vec![65], vec![67]]);
        assert_eq!(flat.rests(), &[r(2, 1), r(0, 1)]);
    }

    #[test]
    fn syllables_of_source() {
        assert_eq!(source_syllables("How a-bout love?"), ["How", "a-", "bout", "love?"]);
        assert_eq!(source_syllables("你好 吗"), ["你", "好", "吗"]);
    }

    #[test]
    fn record_round_trip() {
        let t = parse_record(SEASONS, 0).unwrap();
        let again = parse_record(&to_record(&t), 0).unwrap();
        assert_eq!(t, again);
    }
}
