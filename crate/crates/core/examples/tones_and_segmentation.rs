//! Segment lyrics into words, look up citation tones and apply
//! third-tone sandhi.

use tonealign::scoring::{annotate, Lexicons, Lyric};
use tonealign::segment::segment;

fn main() -> tonealign::Result<()> {
    let lex = Lexicons::bundled();
    for text in ["你好", "展览馆里", "我们一起唱歌", "小老虎，你好"] {
        let lyric = Lyric::parse(text);
        let words: Vec<String> = segment(&lyric.syllables, &lex.words)
            .into_iter()
            .map(|r| lyric.syllables[r].iter().collect())
            .collect();
        let ann = annotate(&lyric.syllables, &lyric.breaks(), &lex)?;
        let show = |ts: &[tonealign::tone::Tone]| ts.iter().map(|t| t.to_string()).collect::<String>();
        println!(
            "{text:<8} words [{}] citation {} sung {}",
            words.join(" "),
            show(&ann.citation),
            show(&ann.tones)
        );
    }
    Ok(())
}
