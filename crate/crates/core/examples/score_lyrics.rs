//! Score candidate lyrics against one melody line, position by position.

use tonealign::melody::parse_record;
use tonealign::scoring::{normalized_line_scores, score_line, ConstraintConfig, Lexicons, Lyric};

const RECORD: &str = r#"{"groups":[{"pitches":["A4"],"durations":["1"]},{"pitches":["E4"],"durations":["1"]},{"pitches":["C4","D4"],"durations":["1","1"]}],"rests":["0","1","0"]}"#;

fn main() -> tonealign::Result<()> {
    let melody = parse_record(RECORD, 1)?.melody;
    let lex = Lexicons::bundled();
    let cfg = ConstraintConfig::default();
    for text in ["让我走", "让我，走", "四季来", "在一起"] {
        let lyric = Lyric::parse(text);
        let positions = score_line(&melody, &lyric, &lex, &cfg)?;
        let report = normalized_line_scores(&positions)?;
        println!(
            "{text:<6} inter {:.3} intra {:.3} rest {:.3} missed rests {}",
            report.s_inter, report.s_intra, report.s_rest, report.missed_rest_count
        );
        for (i, p) in positions.iter().enumerate() {
            println!("    {i}: intra {:<5} inter {:<5} rest {:<5}", p.intra, p.inter, p.rest);
        }
    }
    Ok(())
}
