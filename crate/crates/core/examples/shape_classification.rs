//! Fit parabolas to note groups and read off their melodic shapes.

use tonealign::melody::NoteGroup;
use tonealign::shape::{classify_shape, fit_parabola, shape_matches_tone};
use tonealign::tone::Tone;

fn main() -> tonealign::Result<()> {
    let groups: [&[i32]; 6] = [
        &[64, 65],
        &[69, 64],
        &[60, 62, 64],
        &[65, 67, 65, 65],
        &[64, 60, 64],
        &[60, 61, 64],
    ];
    for pitches in groups {
        let g = NoteGroup::quarters(pitches)?;
        let xs: Vec<f64> = (0..pitches.len()).map(|i| i as f64).collect();
        let fit = fit_parabola(pitches, &xs)?;
        let shape = classify_shape(&g)?;
        let fits: Vec<String> = Tone::all()
            .filter(|t| shape_matches_tone(shape, *t))
            .map(|t| t.to_string())
            .collect();
        println!(
            "{:<18} a={:+.3} b={:+.3} axis={:<8} {:?} carries tones {}",
            format!("{pitches:?}"),
            fit.a,
            fit.b,
            fit.axis().map_or("-".into(), |x| format!("{x:.3}")),
            shape,
            fits.join(",")
        );
    }
    Ok(())
}
