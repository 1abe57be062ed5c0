//! Parse a melody record, show its groups, and apply both assignment
//! strategies.

use tonealign::melody::{
    apply_assignment, note_name_to_pitch, parse_record, pitch_to_note_name, AssignmentStrategy,
};

const RECORD: &str = r#"{"groups":[{"pitches":["A3"],"durations":["1/4"]},{"pitches":["C4"],"durations":["1/4"]},{"pitches":["D4"],"durations":["1/2"]},{"pitches":["F4","G4","F4","F4"],"durations":["3","3/2","1/2","1/2"]}],"rests":["0","0","0","1"],"source":"How a-bout love"}"#;

fn main() -> tonealign::Result<()> {
    for name in ["C4", "A3", "F#4", "Bb-1"] {
        let p = note_name_to_pitch(name)?;
        println!("{name:>5} -> {p:>3} -> {}", pitch_to_note_name(p));
    }

    let triple = parse_record(RECORD, 1)?;
    println!("\nsource: {}", triple.source);
    for strategy in [AssignmentStrategy::SyllableToSyllable, AssignmentStrategy::NoteToSyllable] {
        let line = apply_assignment(&triple.melody, strategy);
        println!("{strategy}: {} positions, {} notes", line.len(), line.note_count());
        for (g, rest) in line.groups().iter().zip(line.rests()) {
            let names: Vec<String> = g.pitches().iter().map(|p| pitch_to_note_name(*p)).collect();
            println!("  rest {:<3} then {:<14} dur {}", rest.to_string(), names.join(" "), g.total_duration());
        }
    }
    Ok(())
}
