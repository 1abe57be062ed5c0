mod common;

use proptest::prelude::*;

use common::{toy_lexicons, TOY_SYLLABLES, TOY_WORDS};
use tonealign::eval::{bleu_tokens, corpus_bleu};
use tonealign::melody::{
    apply_assignment, note_name_to_pitch, parse_melody_line, pitch_to_note_name, to_record, AlignedTriple,
    AssignmentStrategy, Beats, MelodyLine, NoteGroup, Pitch,
};
use tonealign::model::{train_ngram, CandidateModel, Vocabulary, EOL};
use tonealign::scoring::{normalized_line_scores, score_line, ConstraintConfig, Lyric};
use tonealign::segment::{boundary_prob, segment, SegLexicon};
use tonealign::shape::{classify_shape, ShapeCategory};
use tonealign::tone::{apply_sandhi, classify_transition, Tone, TransitionCategory, TransitionTable};

fn beats() -> impl Strategy<Value = Beats> {
    (1i64..=16, prop::sample::select(vec![1i64, 2, 3, 4, 8])).prop_map(|(n, d)| Beats::new(n, d))
}

fn group() -> impl Strategy<Value = NoteGroup> {
    prop::collection::vec((40..90 as Pitch, beats()), 1..=5).prop_map(|notes| {
        let (p, d) = notes.into_iter().unzip();
        NoteGroup::new(p, d).unwrap()
    })
}

fn melody() -> impl Strategy<Value = MelodyLine> {
    prop::collection::vec(
        (group(), prop_oneof![Just(Beats::from_integer(0)), beats()]),
        1..=8,
    )
    .prop_map(|items| {
        let (g, r) = items.into_iter().unzip();
        MelodyLine::new(g, r).unwrap()
    })
}

fn lyric_for(len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec((prop::sample::select(TOY_SYLLABLES.to_vec()), prop::bool::weighted(0.15)), len)
        .prop_map(|parts| {
            let n = parts.len();
            let mut s = String::new();
            for (i, (syl, punc)) in parts.into_iter().enumerate() {
                s.push_str(syl);
                if punc && i + 1 < n {
                    s.push('，');
                }
            }
            s
        })
}

fn tone() -> impl Strategy<Value = Tone> {
    (1u8..=5).prop_map(|t| Tone::new(t).unwrap())
}

proptest! {
    #[test]
    fn record_round_trip(m in melody()) {
        let triple = AlignedTriple { melody: m.clone(), source: String::new(), reference: None };
        let text = to_record(&triple);
        let back = parse_melody_line(&text, 1).unwrap();
        prop_assert_eq!(&back, &m);
        let again = to_record(&AlignedTriple { melody: back, source: String::new(), reference: None });
        prop_assert_eq!(again, text);
    }

    #[test]
    fn assignment_invariants(m in melody()) {
        prop_assert_eq!(apply_assignment(&m, AssignmentStrategy::SyllableToSyllable), m.clone());
        let flat = apply_assignment(&m, AssignmentStrategy::NoteToSyllable);
        prop_assert_eq!(flat.len(), m.note_count());
        prop_assert_eq!(flat.note_count(), m.note_count());
        prop_assert_eq!(flat.total_duration(), m.total_duration());
        prop_assert_eq!(flat.total_rest(), m.total_rest());
        prop_assert!(flat.groups().iter().all(|g| g.len() == 1));
    }

    #[test]
    fn transposition_changes_no_score(m in melody(), k in -12i32..=12, seed in 0usize..1000) {
        let lex = toy_lexicons();
        let cfg = ConstraintConfig::default();
        let text: String = (0..m.len()).map(|i| TOY_SYLLABLES[(seed + 7 * i) % TOY_SYLLABLES.len()]).collect();
        let lyric = Lyric::parse(&text);
        let a = score_line(&m, &lyric, &lex, &cfg).unwrap();
        let b = score_line(&m.transposed(k), &lyric, &lex, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scores_bounded_and_rest_free_without_rests(m in melody(), text in lyric_for(8)) {
        let lex = toy_lexicons();
        let cfg = ConstraintConfig::default();
        let lyric = Lyric::parse(&text);
        let positions = score_line(&m, &lyric, &lex, &cfg).unwrap();
        for p in &positions {
            for v in [p.intra, p.inter, p.rest] {
                prop_assert!(v == 1.0 || v == cfg.epsilon);
            }
        }
        let silent = MelodyLine::new(m.groups().to_vec(), vec![Beats::from_integer(0); m.len()]).unwrap();
        let positions = score_line(&silent, &lyric, &lex, &cfg).unwrap();
        let r = normalized_line_scores(&positions).unwrap();
        prop_assert_eq!(r.s_rest, 1.0);
        prop_assert_eq!(r.missed_rest_count, 0);
    }

    #[test]
    fn permissive_table_frees_inter(m in melody(), text in lyric_for(8)) {
        let cfg = ConstraintConfig { transition_table: TransitionTable::permissive().into(), ..ConstraintConfig::default() };
        let positions = score_line(&m, &Lyric::parse(&text), &toy_lexicons(), &cfg).unwrap();
        prop_assert!(positions.iter().all(|p| p.inter == 1.0));
    }

    #[test]
    fn note_names_fixed_point(p in 0i32..128) {
        let name = pitch_to_note_name(p);
        prop_assert_eq!(note_name_to_pitch(&name).unwrap(), p);
        prop_assert_eq!(pitch_to_note_name(note_name_to_pitch(&name).unwrap()), name);
    }

    #[test]
    fn note_names_increase_chromatically(octave in -1i32..=8) {
        let names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
        let pitches: Vec<Pitch> = names.iter().map(|n| note_name_to_pitch(&format!("{n}{octave}")).unwrap()).collect();
        prop_assert!(pitches.windows(2).all(|w| w[1] == w[0] + 1));
        let next = note_name_to_pitch(&format!("C{}", octave + 1)).unwrap();
        prop_assert_eq!(next, pitches[11] + 1);
        // Flats name the same keys as the sharps below them.
        prop_assert_eq!(note_name_to_pitch(&format!("Db{octave}")).unwrap(), pitches[1]);
    }

    #[test]
    fn transitions_antisymmetric(p in 30i32..100, q in 30i32..100, step in 1u32..4) {
        let there = classify_transition(p, q, step);
        let back = classify_transition(q, p, step);
        prop_assert_eq!(back, there.mirrored());
        prop_assert_eq!(there == TransitionCategory::Level, p == q);
    }

    #[test]
    fn sandhi_pass_is_stable(tones in prop::collection::vec(tone(), 1..10), cut in 1usize..10) {
        let n = tones.len();
        let cut = cut.min(n);
        let spans = if cut < n { vec![0..cut, cut..n] } else { vec![0..n] };
        let once = apply_sandhi(&tones, &spans).unwrap();
        prop_assert_eq!(once.len(), n);
        prop_assert_eq!(apply_sandhi(&once, &spans).unwrap(), once.clone());
        // No two adjacent dipping tones survive inside a word.
        for s in &spans {
            prop_assert!(once[s.clone()].windows(2).all(|w| !(w[0] == Tone::DIPPING && w[1] == Tone::DIPPING)));
        }
    }

    #[test]
    fn shape_translation_and_reversal(p in prop::collection::vec(48i32..=84, 2..=8), k in -20i32..=20) {
        let shape = |v: &[Pitch]| classify_shape(&NoteGroup::quarters(v).unwrap()).unwrap();
        let s = shape(&p);
        let moved: Vec<Pitch> = p.iter().map(|x| x + k).collect();
        prop_assert_eq!(shape(&moved), s);
        let rev: Vec<Pitch> = p.iter().rev().copied().collect();
        prop_assert_eq!(shape(&rev), s.reversed());
        let max = *p.iter().max().unwrap();
        let min = *p.iter().min().unwrap();
        if max - min <= 1 {
            prop_assert_eq!(s, ShapeCategory::Level);
        }
    }

    #[test]
    fn segmentation_partitions(text in prop::collection::vec(prop::sample::select(TOY_SYLLABLES.to_vec()), 0..12)) {
        let chars: Vec<char> = text.concat().chars().collect();
        let lex = SegLexicon::new(TOY_WORDS);
        let spans = segment(&chars, &lex);
        let mut at = 0;
        for s in &spans {
            prop_assert_eq!(s.start, at);
            prop_assert!(s.end > s.start);
            at = s.end;
        }
        prop_assert_eq!(at, chars.len());
        prop_assert_eq!(segment(&chars, &lex), spans.clone());

        for i in 1..chars.len() {
            let before = boundary_prob(&chars, i, &lex, 0.01).unwrap();
            prop_assert!(before == 1.0 || before == 0.01);
            if let Some(s) = spans.iter().find(|s| s.start < i && i < s.end) {
                let word: String = chars[s.clone()].iter().collect();
                let after = boundary_prob(&chars, i, &lex.without(&word), 0.01).unwrap();
                prop_assert!(after >= before);
            }
        }
    }

    #[test]
    fn bleu_permutation_invariant(
        pairs in prop::collection::vec((lyric_for(6), lyric_for(6)), 1..6),
        rot in 0usize..6,
    ) {
        let h: Vec<Vec<String>> = pairs.iter().map(|(a, _)| bleu_tokens(a)).collect();
        let r: Vec<Vec<String>> = pairs.iter().map(|(_, b)| bleu_tokens(b)).collect();
        let base = corpus_bleu(&h, &r, 4, false).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        let k = rot % h.len();
        let (mut h2, mut r2) = (h.clone(), r.clone());
        h2.rotate_left(k);
        r2.rotate_left(k);
        prop_assert!((corpus_bleu(&h2, &r2, 4, false).unwrap() - base).abs() < 1e-12);
        prop_assert!((corpus_bleu(&h, &h, 4, false).unwrap() - 1.0).abs() < 1e-12 || h.iter().all(|x| x.len() < 4));
    }
}

#[test]
fn heavy_smoothing_approaches_uniform() {
    let vocab = Vocabulary::new(["a", "b", "c", EOL]).unwrap();
    let corpus = vec![vec!["a", "b"], vec!["a", "c", "c"]];
    let model = train_ngram(&corpus, vocab, 3, 1e9).unwrap();
    for prefix in [vec![], vec![0], vec![0, 2]] {
        let lps = model.log_probs("", &prefix).unwrap();
        for lp in lps {
            assert!((lp.exp() - 0.25).abs() < 1e-6);
        }
    }
}
