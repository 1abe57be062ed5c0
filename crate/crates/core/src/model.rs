//! Next-token candidate providers for the decoder.
//!
//! A [`CandidateModel`] scores every vocabulary token given the source
//! line and the target prefix. Two models are built in (uniform and an
//! add-k character n-gram); [`ExternalModel`] talks to another process
//! over a line-delimited JSON protocol so a real translation model can be
//! plugged in.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scoring::is_punctuation;
use crate::tone::ToneLexicon;

pub type TokenId = usize;

pub const EOL: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Syllable(char),
    Punctuation,
    EndOfLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    kinds: Vec<TokenKind>,
    index: HashMap<String, TokenId>,
    eol: TokenId,
}

impl Vocabulary {
    /// Tokens must be unique and include [`EOL`]. Every other token is a
    /// single punctuation mark or a single syllable character.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(tokens.len());
        let mut kinds = Vec::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::Model(format!("duplicate vocabulary token `{tok}`")));
            }
            let mut chars = tok.chars();
            let kind = match (chars.next(), chars.next()) {
                _ if tok == EOL => TokenKind::EndOfLine,
                (Some(c), None) if is_punctuation(c) => TokenKind::Punctuation,
                (Some(c), None) if !c.is_whitespace() => TokenKind::Syllable(c),
                _ => {
                    return Err(Error::Model(format!(
                        "vocabulary token `{tok}` is not a single syllable or punctuation mark"
                    )))
                }
            };
            kinds.push(kind);
        }
        let eol = *index
            .get(EOL)
            .ok_or_else(|| Error::Model(format!("vocabulary lacks the end-of-line token {EOL}")))?;
        Ok(Self {
            tokens,
            kinds,
            index,
            eol,
        })
    }

    /// Every character of the tone lexicon plus the given punctuation and
    /// the end-of-line token.
    pub fn from_lexicon(lexicon: &ToneLexicon, punctuation: &[&str]) -> Result<Self> {
        let mut tokens: Vec<String> = lexicon.characters().into_iter().map(String::from).collect();
        tokens.extend(punctuation.iter().map(|p| p.to_string()));
        tokens.push(EOL.to_string());
        Self::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn kind(&self, id: TokenId) -> TokenKind {
        self.kinds[id]
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn eol(&self) -> TokenId {
        self.eol
    }

    /// Syllable tokens with no entry in the tone lexicon.
    pub fn missing_tones(&self, lexicon: &ToneLexicon) -> Vec<&str> {
        self.kinds
            .iter()
            .enumerate()
            .filter_map(|(id, k)| match k {
                TokenKind::Syllable(c) if !lexicon.contains(*c) => Some(self.tokens[id].as_str()),
                _ => None,
            })
            .collect()
    }

    /// Joins token ids into text, dropping the end-of-line token.
    pub fn render(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|id| **id != self.eol)
            .map(|id| self.tokens[*id].as_str())
            .collect()
    }
}

/// Scores the next target token.
pub trait CandidateModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Log-probability of every vocabulary token (indexed by token id)
    /// following `prefix` when translating `source`. Values are finite or
    /// negative infinity and their probabilities sum to one.
    fn log_probs(&self, source: &str, prefix: &[TokenId]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct UniformModel {
    vocab: Vocabulary,
}

pub fn uniform_model(vocab: Vocabulary) -> Result<UniformModel> {
    if vocab.is_empty() {
        return Err(Error::Model("empty vocabulary".into()));
    }
    Ok(UniformModel { vocab })
}

impl CandidateModel for UniformModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn log_probs(&self, _source: &str, _prefix: &[TokenId]) -> Result<Vec<f64>> {
        let n = self.vocab.len() as f64;
        Ok(vec![(1.0 / n).ln(); self.vocab.len()])
    }
}

const BOS: TokenId = TokenId::MAX;

/// Add-k smoothed token n-gram. Ignores the source line.
#[derive(Debug, Clone)]
pub struct NGramModel {
    vocab: Vocabulary,
    order: usize,
    k: f64,
    counts: HashMap<Vec<TokenId>, (HashMap<TokenId, u64>, u64)>,
}

/// Trains on token sequences; each sequence implicitly ends with [`EOL`].
pub fn train_ngram<S: AsRef<str>>(
    corpus: &[Vec<S>],
    vocab: Vocabulary,
    order: usize,
    smoothing_k: f64,
) -> Result<NGramModel> {
    if order < 1 {
        return Err(Error::Model("n-gram order must be >= 1".into()));
    }
    if !(smoothing_k > 0.0 && smoothing_k.is_finite()) {
        return Err(Error::Model(format!("smoothing k must be > 0, got {smoothing_k}")));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::Model("empty training corpus".into()));
    }
    let mut counts: HashMap<Vec<TokenId>, (HashMap<TokenId, u64>, u64)> = HashMap::new();
    for (line, sentence) in corpus.iter().enumerate() {
        let mut ids = vec![BOS; order - 1];
        for tok in sentence {
            let tok = tok.as_ref();
            let id = vocab
                .id(tok)
                .ok_or_else(|| Error::Model(format!("corpus line {line}: token `{tok}` not in vocabulary")))?;
            ids.push(id);
        }
        ids.push(vocab.eol());
        for w in ids.windows(order) {
            let (ctx, next) = w.split_at(order - 1);
            let entry = counts.entry(ctx.to_vec()).or_default();
            *entry.0.entry(next[0]).or_default() += 1;
            entry.1 += 1;
        }
    }
    Ok(NGramModel {
        vocab,
        order,
        k: smoothing_k,
        counts,
    })
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    fn context(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let need = self.order - 1;
        let mut ctx = vec![BOS; need.saturating_sub(prefix.len())];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(need)..]);
        ctx
    }
}

impl CandidateModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn log_probs(&self, _source: &str, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let v = self.vocab.len() as f64;
        let ctx = self.context(prefix);
        let (next, total) = match self.counts.get(&ctx) {
            Some((next, total)) => (Some(next), *total as f64),
            None => (None, 0.0),
        };
        let denom = (total + self.k * v).ln();
        Ok((0..self.vocab.len())
            .map(|id| {
                let c = next.and_then(|m| m.get(&id)).copied().unwrap_or(0) as f64;
                (c + self.k).ln() - denom
            })
            .collect())
    }
}

#[derive(Serialize)]
struct Request<'a> {
    source: &'a str,
    prefix: Vec<&'a str>,
}

struct Channel {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    broken: Option<String>,
    child: Option<Child>,
}

impl Drop for Channel {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Candidate model served by a peer over a byte stream.
///
/// Each request is one JSON line `{"source": .., "prefix": [..]}`; the
/// peer answers with one line `{"candidates": [[token, logprob], ..]}`.
/// Tokens the peer leaves out get probability zero. Distributions that
/// do not sum to one are renormalized.
pub struct ExternalModel {
    vocab: Vocabulary,
    timeout: Duration,
    channel: Mutex<Channel>,
}

pub fn external_stream_model<R, W>(
    vocab: Vocabulary,
    reader: R,
    writer: W,
    timeout: Duration,
) -> ExternalModel
where
    R: Read + Send + 'static,
    W: Write + Send + 'static,
{
    ExternalModel::new(vocab, reader, writer, timeout, None)
}

impl ExternalModel {
    fn new<R, W>(vocab: Vocabulary, reader: R, writer: W, timeout: Duration, child: Option<Child>) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Self {
            vocab,
            timeout,
            channel: Mutex::new(Channel {
                writer: Box::new(writer),
                lines: rx,
                broken: None,
                child,
            }),
        }
    }

    /// Starts `program` and speaks the protocol over its stdin/stdout.
    pub fn spawn(vocab: Vocabulary, program: &str, args: &[String], timeout: Duration) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self::new(vocab, stdout, stdin, timeout, Some(child)))
    }

    fn exchange(&self, request: &str) -> Result<String> {
        let mut ch = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &ch.broken {
            return Err(Error::Model(format!("connection unusable: {reason}")));
        }
        let sent = writeln!(ch.writer, "{request}").and_then(|_| ch.writer.flush());
        if let Err(e) = sent {
            ch.broken = Some(e.to_string());
            return Err(Error::Model(format!("write to peer failed: {e}")));
        }
        match ch.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                ch.broken = Some(e.to_string());
                Err(Error::Model(format!("read from peer failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                ch.broken = Some("timed out".into());
                Err(Error::Model(format!("peer timed out after {:?}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                ch.broken = Some("closed".into());
                Err(Error::Model("peer closed the stream".into()))
            }
        }
    }

    fn parse_response(&self, line: &str) -> Result<Vec<f64>> {
        let bad = |m: String| Error::Model(format!("malformed response: {m}"));
        let value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let candidates = value
            .get("candidates")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `candidates` array".into()))?;
        let mut out = vec![f64::NEG_INFINITY; self.vocab.len()];
        let mut seen = vec![false; self.vocab.len()];
        for c in candidates {
            let pair = c.as_array().filter(|a| a.len() == 2).ok_or_else(|| bad(format!("bad candidate {c}")))?;
            let tok = pair[0].as_str().ok_or_else(|| bad(format!("bad token {}", pair[0])))?;
            let lp = pair[1]
                .as_f64()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("bad log-prob {}", pair[1])))?;
            let id = self.vocab.id(tok).ok_or_else(|| bad(format!("unknown token `{tok}`")))?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(bad(format!("duplicate token `{tok}`")));
            }
            out[id] = lp;
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(bad("no candidates".into()));
        }
        let mass: f64 = out.iter().map(|lp| (lp - max).exp()).sum::<f64>() * max.exp();
        if (mass - 1.0).abs() > 1e-9 {
            if (mass - 1.0).abs() > 1e-3 {
                log::warn!("peer distribution sums to {mass}; renormalizing");
            }
            let lse = max + out.iter().map(|lp| (lp - max).exp()).sum::<f64>().ln();
            for lp in &mut out {
                *lp -= lse;
            }
        }
        Ok(out)
    }
}

impl CandidateModel for ExternalModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn log_probs(&self, source: &str, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let req = Request {
            source,
            prefix: prefix.iter().map(|id| self.vocab.token(*id)).collect(),
        };
        let line = self.exchange(&serde_json::to_string(&req).expect("request serializes"))?;
        self.parse_response(&line)
    }
}
