//! Command-line front end: `score`, `translate`, `eval`, `sweep`,
//! `segment` and `tones`.
//!
//! Settings come from built-in defaults, then an optional TOML config
//! file (`--config`), then command-line flags. The effective settings are
//! written to `effective_config.toml` in the output directory.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::decode::{decode_lines, DecodeOptions, LineInput, DEFAULT_BEAM_SIZE, DEFAULT_PUNC_BUDGET};
use crate::error::{Error, Result};
use crate::eval::{evaluate, sweep, sweep_csv, LambdaKind};
use crate::melody::{apply_assignment, parse_records, AlignedTriple, AssignmentStrategy};
use crate::model::{train_ngram, uniform_model, CandidateModel, ExternalModel, Vocabulary};
use crate::scoring::{
    annotate, ConstraintConfig, Lexicons, Lyric, DEFAULT_EPSILON, DEFAULT_LAMBDA_INTER,
    DEFAULT_LAMBDA_INTRA, DEFAULT_LAMBDA_REST, DEFAULT_STEP_MAX,
};
use crate::segment::{segment, SegLexicon};
use crate::shape::XMode;
use crate::tone::{ToneLexicon, TransitionTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

const PUNCTUATION_TOKENS: [&str; 2] = ["，", "。"];

/// Every setting of a run. Keys match the config file 1:1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub melody: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
    pub tone_lexicon: Option<PathBuf>,
    pub seg_lexicon: Option<PathBuf>,
    pub transition_table: Option<PathBuf>,
    pub permissive_table: bool,
    pub out_dir: Option<PathBuf>,
    pub model: String,
    pub corpus: Option<PathBuf>,
    pub ngram_order: usize,
    pub ngram_k: f64,
    pub model_command: Option<String>,
    pub model_timeout_ms: u64,
    pub lambda_inter: f64,
    pub lambda_intra: f64,
    pub lambda_rest: f64,
    pub epsilon: f64,
    pub step_max: u32,
    pub intra_x_mode: XMode,
    pub strategy: AssignmentStrategy,
    pub beam_size: usize,
    pub punc_budget: usize,
    pub workers: usize,
    pub oracle: bool,
    pub max_states: u64,
    pub sweep_lambda: LambdaKind,
    pub sweep_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            melody: None,
            outputs: None,
            tone_lexicon: None,
            seg_lexicon: None,
            transition_table: None,
            permissive_table: false,
            out_dir: None,
            model: "uniform".into(),
            corpus: None,
            ngram_order: 3,
            ngram_k: 0.1,
            model_command: None,
            model_timeout_ms: 30_000,
            lambda_inter: DEFAULT_LAMBDA_INTER,
            lambda_intra: DEFAULT_LAMBDA_INTRA,
            lambda_rest: DEFAULT_LAMBDA_REST,
            epsilon: DEFAULT_EPSILON,
            step_max: DEFAULT_STEP_MAX,
            intra_x_mode: XMode::Index,
            strategy: AssignmentStrategy::SyllableToSyllable,
            beam_size: DEFAULT_BEAM_SIZE,
            punc_budget: DEFAULT_PUNC_BUDGET,
            workers: 1,
            oracle: false,
            max_states: 1_000_000,
            sweep_lambda: LambdaKind::Inter,
            sweep_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let paths = [
            ("melody", &self.melody),
            ("outputs", &self.outputs),
            ("tone_lexicon", &self.tone_lexicon),
            ("seg_lexicon", &self.seg_lexicon),
            ("transition_table", &self.transition_table),
            ("corpus", &self.corpus),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        if self.beam_size < 1 {
            return Err(Error::Config("beam_size must be >= 1".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.constraints_unchecked().validate()
    }

    fn constraints_unchecked(&self) -> ConstraintConfig {
        ConstraintConfig {
            lambda_inter: self.lambda_inter,
            lambda_intra: self.lambda_intra,
            lambda_rest: self.lambda_rest,
            epsilon: self.epsilon,
            step_max: self.step_max,
            transition_table: Arc::new(TransitionTable::permissive()),
            intra_x_mode: self.intra_x_mode,
        }
    }

    pub fn constraints(&self) -> Result<ConstraintConfig> {
        let table = if self.permissive_table {
            TransitionTable::permissive()
        } else if let Some(p) = &self.transition_table {
            TransitionTable::parse(&read(p)?, &p.display().to_string())?
        } else {
            TransitionTable::default_table()
        };
        let cfg = ConstraintConfig {
            transition_table: Arc::new(table),
            ..self.constraints_unchecked()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lexicons(&self) -> Result<Lexicons> {
        let tones = match &self.tone_lexicon {
            Some(p) => ToneLexicon::parse(&read(p)?, &p.display().to_string())?,
            None => ToneLexicon::bundled(),
        };
        let words = match &self.seg_lexicon {
            Some(p) => SegLexicon::parse(&read(p)?),
            None => SegLexicon::bundled(),
        };
        Ok(Lexicons { tones, words })
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            beam_size: self.beam_size,
            punc_budget: if self.oracle { 0 } else { self.punc_budget },
            exhaustive: self.oracle.then_some(u128::from(self.max_states)),
            workers: self.workers,
        }
    }

    /// Builds the configured candidate model over a vocabulary of every
    /// lexicon character plus `，`, `。` and the end-of-line token.
    pub fn build_model(&self, lexicons: &Lexicons) -> Result<Box<dyn CandidateModel>> {
        let vocab = Vocabulary::from_lexicon(&lexicons.tones, &PUNCTUATION_TOKENS)?;
        match self.model.as_str() {
            "uniform" => Ok(Box::new(uniform_model(vocab)?)),
            "ngram" => {
                let path = self
                    .corpus
                    .as_ref()
                    .ok_or_else(|| Error::Config("model `ngram` needs `corpus`".into()))?;
                let text = read(path)?;
                let mut dropped = 0usize;
                let corpus: Vec<Vec<String>> = text
                    .lines()
                    .map(|l| {
                        l.chars()
                            .filter(|c| !c.is_whitespace())
                            .map(String::from)
                            .filter(|t| {
                                let keep = vocab.id(t).is_some();
                                dropped += usize::from(!keep);
                                keep
                            })
                            .collect()
                    })
                    .collect();
                if dropped > 0 {
                    log::warn!("{dropped} corpus characters outside the vocabulary were dropped");
                }
                Ok(Box::new(train_ngram(&corpus, vocab, self.ngram_order, self.ngram_k)?))
            }
            "external" => {
                let cmd = self
                    .model_command
                    .as_ref()
                    .ok_or_else(|| Error::Config("model `external` needs `model_command`".into()))?;
                let mut parts = cmd.split_whitespace().map(String::from);
                let program = parts.next().ok_or_else(|| Error::Config("empty model_command".into()))?;
                let args: Vec<String> = parts.collect();
                Ok(Box::new(ExternalModel::spawn(
                    vocab,
                    &program,
                    &args,
                    Duration::from_millis(self.model_timeout_ms),
                )?))
            }
            other => Err(Error::Config(format!("unknown model `{other}` (uniform|ngram|external)"))),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "tonealign", about = "Score and generate Mandarin lyrics that fit a melody")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score lyrics against their melodies (outputs file, else references).
    Score,
    /// Decode lyrics for each melody line.
    Translate,
    /// Score outputs and compute BLEU against references.
    Eval,
    /// Decode the corpus once per value of one constraint weight.
    Sweep,
    /// Print the word segmentation of each argument.
    Segment { text: Vec<String> },
    /// Print citation and post-sandhi tones of each argument.
    Tones { text: Vec<String> },
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub melody: Option<PathBuf>,
    #[arg(long, global = true)]
    pub outputs: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tone_lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seg_lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub transition_table: Option<PathBuf>,
    /// Accept every transition (disables the contour constraint's table).
    #[arg(long, global = true)]
    pub permissive_table: bool,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// uniform, ngram or external
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ngram_order: Option<usize>,
    #[arg(long, global = true)]
    pub ngram_k: Option<f64>,
    #[arg(long, global = true)]
    pub model_command: Option<String>,
    #[arg(long, global = true)]
    pub model_timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub lambda_inter: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_intra: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_rest: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub step_max: Option<u32>,
    /// index or duration
    #[arg(long, global = true)]
    pub intra_x_mode: Option<String>,
    /// note-to-syllable or syllable-to-syllable
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    #[arg(long, global = true)]
    pub beam_size: Option<usize>,
    #[arg(long, global = true)]
    pub punc_budget: Option<usize>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Decode exhaustively (small instances only).
    #[arg(long, global = true)]
    pub oracle: bool,
    #[arg(long, global = true)]
    pub max_states: Option<u64>,
    /// inter, intra or rest
    #[arg(long = "lambda", global = true)]
    pub sweep_lambda: Option<String>,
    /// Comma-separated weights.
    #[arg(long = "grid", global = true, value_delimiter = ',')]
    pub sweep_grid: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        take!(
            melody, outputs, tone_lexicon, seg_lexicon, transition_table, out_dir, model, corpus,
            ngram_order, ngram_k, model_command, model_timeout_ms, lambda_inter, lambda_intra,
            lambda_rest, epsilon, step_max, beam_size, punc_budget, workers, max_states, sweep_grid
        );
        if self.permissive_table {
            cfg.permissive_table = true;
        }
        if self.oracle {
            cfg.oracle = true;
        }
        if let Some(m) = &self.intra_x_mode {
            cfg.intra_x_mode = match m.as_str() {
                "index" => XMode::Index,
                "duration" => XMode::Duration,
                other => return Err(Error::Config(format!("unknown intra_x_mode `{other}`"))),
            };
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = s.parse()?;
        }
        if let Some(l) = &self.sweep_lambda {
            cfg.sweep_lambda = l.parse()?;
        }
        Ok(())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    match run(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg)?;
    cfg.validate()?;
    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("effective_config.toml"), cfg.to_toml())?;
    }
    match &cli.command {
        Command::Score => cmd_score(&cfg, stdout, false),
        Command::Eval => cmd_score(&cfg, stdout, true),
        Command::Translate => cmd_translate(&cfg, stdout),
        Command::Sweep => cmd_sweep(&cfg, stdout),
        Command::Segment { text } => cmd_segment(&cfg, text, stdout),
        Command::Tones { text } => cmd_tones(&cfg, text, stdout),
    }
}

/// Parsed records after the assignment strategy, plus per-record errors.
struct Loaded {
    records: Vec<(usize, AlignedTriple)>,
    errors: Vec<String>,
}

fn load_melodies(cfg: &RunConfig) -> Result<Loaded> {
    let path = cfg
        .melody
        .as_ref()
        .ok_or_else(|| Error::Config("no melody file given (--melody)".into()))?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in parse_records(&read(path)?) {
        match rec {
            Ok(mut t) => {
                t.melody = apply_assignment(&t.melody, cfg.strategy);
                records.push((line, t));
            }
            Err(e) => errors.push(format!("{}:{line}: {e}", path.display())),
        }
    }
    Ok(Loaded { records, errors })
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, name: &str, body: &str) -> Result<()> {
    match &cfg.out_dir {
        Some(dir) => fs::write(dir.join(name), body)?,
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn cmd_score(cfg: &RunConfig, stdout: &mut dyn Write, with_bleu: bool) -> Result<i32> {
    let lexicons = cfg.lexicons()?;
    let constraints = cfg.constraints()?;
    let Loaded { records, mut errors } = load_melodies(cfg)?;

    let outputs: Vec<String> = match &cfg.outputs {
        Some(p) => {
            let lines: Vec<String> = read(p)?.lines().map(str::to_string).collect();
            let total = records.len() + errors.len();
            if lines.len() != total {
                return Err(Error::Config(format!(
                    "{} has {} lines for {total} melody records",
                    p.display(),
                    lines.len()
                )));
            }
            // Outputs align with every record, including unparsable ones.
            let path = cfg.melody.as_ref().expect("checked in load_melodies");
            let all_lines: Vec<usize> = parse_records(&read(path)?).into_iter().map(|(l, _)| l).collect();
            records
                .iter()
                .map(|(line, _)| {
                    let k = all_lines.iter().position(|l| l == line).expect("record line present");
                    lines[k].clone()
                })
                .collect()
        }
        None => records
            .iter()
            .map(|(_, t)| t.reference.clone().unwrap_or_default())
            .collect(),
    };
    let mut triples: Vec<AlignedTriple> = records.iter().map(|(_, t)| t.clone()).collect();
    if !with_bleu || cfg.outputs.is_none() {
        // Scoring references against themselves says nothing about meaning.
        for t in &mut triples {
            t.reference = None;
        }
    }
    let report = evaluate(&triples, &outputs, &lexicons, &constraints)?;
    for l in &report.lines {
        if let Some(e) = &l.error {
            errors.push(format!("record at line {}: {e}", records[l.index].0));
        }
    }
    emit(cfg, stdout, "report.tsv", &report.to_tsv())?;
    if let Some(dir) = &cfg.out_dir {
        fs::write(dir.join("report.json"), report.to_json())?;
    }
    for e in &errors {
        eprintln!("{e}");
    }
    Ok(if errors.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

fn cmd_translate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let lexicons = cfg.lexicons()?;
    let constraints = cfg.constraints()?;
    let Loaded { records, errors } = load_melodies(cfg)?;
    for e in &errors {
        eprintln!("{e}");
    }
    let model = cfg.build_model(&lexicons)?;
    let inputs: Vec<LineInput> = records
        .iter()
        .map(|(_, t)| LineInput {
            melody: &t.melody,
            source: &t.source,
        })
        .collect();
    let decoded = decode_lines(&inputs, model.as_ref(), &lexicons, &constraints, &cfg.decode_options())?;

    let mut out = String::from("line\tlyric\ttotal\tlog_p\tinter\tintra\trest\n");
    let mut failures = 0;
    for ((line, _), res) in records.iter().zip(&decoded) {
        match res.as_ref().map_err(Clone::clone).and_then(|h| Ok((h, h.report()?))) {
            Ok((h, r)) => out.push_str(&format!(
                "{line}\t{}\t{:.9}\t{:.9}\t{:.4}\t{:.4}\t{:.4}\n",
                h.text(model.vocab()),
                h.total_logscore,
                h.components.log_p,
                r.s_inter,
                r.s_intra,
                r.s_rest
            )),
            Err(e) => {
                failures += 1;
                eprintln!("line {line}: {e}");
                out.push_str(&format!("{line}\t\t\t\t\t\t\n"));
            }
        }
    }
    emit(cfg, stdout, "translations.tsv", &out)?;
    Ok(if !records.is_empty() && failures == records.len() {
        EXIT_FAILURE
    } else {
        EXIT_OK
    })
}

fn cmd_sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32> {
    let lexicons = cfg.lexicons()?;
    let constraints = cfg.constraints()?;
    let Loaded { records, errors } = load_melodies(cfg)?;
    for e in &errors {
        eprintln!("{e}");
    }
    let model = cfg.build_model(&lexicons)?;
    let dataset: Vec<AlignedTriple> = records.into_iter().map(|(_, t)| t).collect();
    let points = sweep(
        &dataset,
        model.as_ref(),
        &lexicons,
        cfg.sweep_lambda,
        &cfg.sweep_grid,
        &constraints,
        &cfg.decode_options(),
    )?;
    emit(cfg, stdout, "sweep.csv", &sweep_csv(&points))?;
    let all_failed = !dataset.is_empty() && points.iter().all(|p| p.failures == dataset.len());
    Ok(if all_failed { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_segment(cfg: &RunConfig, text: &[String], stdout: &mut dyn Write) -> Result<i32> {
    let lexicons = cfg.lexicons()?;
    for t in text {
        let chars: Vec<char> = t.chars().filter(|c| !c.is_whitespace()).collect();
        let words: Vec<String> = segment(&chars, &lexicons.words)
            .into_iter()
            .map(|r| chars[r].iter().collect())
            .collect();
        writeln!(stdout, "{}", words.join(" "))?;
    }
    Ok(EXIT_OK)
}

fn cmd_tones(cfg: &RunConfig, text: &[String], stdout: &mut dyn Write) -> Result<i32> {
    let lexicons = cfg.lexicons()?;
    let mut code = EXIT_OK;
    for t in text {
        let lyric = Lyric::parse(t);
        match annotate(&lyric.syllables, &lyric.breaks(), &lexicons) {
            Ok(ann) => {
                writeln!(stdout, "char\tword\tcitation\tsung")?;
                for (w, span) in ann.spans.iter().enumerate() {
                    for i in span.clone() {
                        writeln!(
                            stdout,
                            "{}\t{w}\t{}\t{}",
                            lyric.syllables[i], ann.citation[i], ann.tones[i]
                        )?;
                    }
                }
            }
            Err(e) => {
                eprintln!("`{t}`: {e}");
                code = EXIT_PARTIAL;
            }
        }
    }
    Ok(code)
}
