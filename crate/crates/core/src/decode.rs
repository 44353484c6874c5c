//! Turning CTC output into text.
//!
//! All decoders consume a [`ProbMatrix`] whose last column is the blank.
//! [`beam_decode`] is the classic prefix beam search; [`wbs_decode`] adds the
//! word-level constraints of word beam search: characters inside a word must
//! follow the lexicon's [`PrefixTree`], a word may only be closed by a
//! non-word character (or the end of the line) when it is complete, and in
//! [`LmMode::NGrams`] every closed word multiplies the beam score by its
//! bigram probability.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::lexicon::{tokenize, Charset, NgramLm, NodeId, PrefixTree};
use crate::math;
use crate::numkit::Mat2;

/// Row-sum tolerance accepted by [`ProbMatrix::new`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Per-timestep class distributions (`steps × classes`, blank last).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    steps: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    /// Validates that every row is a probability vector.
    pub fn new(steps: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if classes < 1 {
            return Err(invalid!(
                "a probability matrix needs at least the blank class"
            ));
        }
        if data.len() != steps * classes {
            return Err(invalid!(
                "matrix data has {} entries, expected {steps}x{classes}",
                data.len()
            ));
        }
        for (t, row) in data.chunks_exact(classes).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(invalid!("row {t}: entry {v} outside [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(invalid!("row {t} sums to {sum}"));
            }
        }
        Ok(Self {
            steps,
            classes,
            data,
        })
    }

    pub fn from_mat(m: Mat2) -> Result<Self> {
        let (r, c) = m.shape();
        Self::new(r, c, m.into_vec())
    }

    /// Number of timesteps `T`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of classes including the blank.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blank(&self) -> usize {
        self.classes - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn get(&self, t: usize, class: usize) -> f64 {
        self.data[t * self.classes + class]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_mat(&self) -> Mat2 {
        Mat2::from_vec(self.steps, self.classes, self.data.clone())
            .expect("probabilities are finite")
    }

    /// Fails unless the matrix has one column per charset class plus blank.
    pub fn check_charset(&self, charset: &Charset) -> Result<()> {
        if self.classes != charset.classes() {
            return Err(invalid!(
                "matrix has {} classes but the charset needs {}",
                self.classes,
                charset.classes()
            ));
        }
        Ok(())
    }
}

/// Merges adjacent repeats, then drops blanks.
pub fn collapse_labels(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in path {
        if prev != Some(c) && c != blank {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

/// Collapses a path of class indices into text.
pub fn collapse(path: &[usize], charset: &Charset) -> String {
    charset.decode(&collapse_labels(path, charset.blank_index()))
}

/// Index of the largest entry, lowest index on ties.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Best-path decoding: per-timestep argmax, then collapse.
pub fn greedy_decode(m: &ProbMatrix, charset: &Charset) -> Result<String> {
    m.check_charset(charset)?;
    let path: Vec<usize> = (0..m.steps()).map(|t| argmax(m.row(t))).collect();
    Ok(collapse(&path, charset))
}

/// Word-level scoring used by [`LmMode::NGrams`].
pub trait LanguageModel: Send + Sync {
    /// `ln P(word | previous)`, with `previous = None` at the line start.
    fn log_prob(&self, previous: Option<&str>, word: &str) -> f64;
}

impl LanguageModel for NgramLm {
    fn log_prob(&self, previous: Option<&str>, word: &str) -> f64 {
        math::ln(self.probability(previous, word))
    }
}

/// How word beam search scores completed words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LmMode {
    /// Lexicon membership only.
    Words,
    /// Lexicon membership plus bigram probabilities.
    #[default]
    NGrams,
}

#[derive(Debug, Clone)]
struct WordState {
    // Trie node of the word being spelled, `None` between words.
    node: Option<NodeId>,
    word: String,
    previous: Option<String>,
}

#[derive(Debug, Clone)]
struct Beam {
    labels: Vec<usize>,
    text: String,
    log_blank: f64,
    log_nonblank: f64,
    lm: f64,
    state: WordState,
}

impl Beam {
    fn log_total(&self) -> f64 {
        math::log_add(self.log_blank, self.log_nonblank)
    }

    fn score(&self) -> f64 {
        self.log_total() + self.lm
    }
}

/// Higher score first; lexicographically smaller text on ties.
fn rank(a_score: f64, a_text: &str, b_score: f64, b_text: &str) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a_text.cmp(b_text))
}

struct Lexicon<'a> {
    tree: &'a PrefixTree,
    lm: Option<&'a dyn LanguageModel>,
    charset: &'a Charset,
}

impl Lexicon<'_> {
    /// State and LM increment after appending `c`, or `None` if not allowed.
    fn extend(&self, state: &WordState, c: char) -> Option<(WordState, f64)> {
        if self.charset.is_wordchar(c) {
            let from = state.node.unwrap_or(self.tree.root());
            let node = self.tree.child(from, c)?;
            let mut word = state.word.clone();
            word.push(c);
            let next = WordState {
                node: Some(node),
                word,
                previous: state.previous.clone(),
            };
            Some((next, 0.0))
        } else {
            match state.node {
                None => Some((state.clone(), 0.0)),
                Some(node) if self.tree.node_is_word(node) => {
                    let lm = self.close_word(state);
                    let next = WordState {
                        node: None,
                        word: String::new(),
                        previous: Some(state.word.clone()),
                    };
                    Some((next, lm))
                }
                Some(_) => None,
            }
        }
    }

    fn close_word(&self, state: &WordState) -> f64 {
        self.lm.map_or(0.0, |lm| {
            lm.log_prob(state.previous.as_deref(), &state.word)
        })
    }
}

/// Prefix beam search, optionally constrained by a lexicon. Returns the
/// surviving beams after the last timestep.
fn prefix_search(
    m: &ProbMatrix,
    charset: &Charset,
    beam_width: usize,
    lexicon: Option<&Lexicon<'_>>,
) -> Vec<Beam> {
    let blank = m.blank();
    let mut beams = alloc::vec![Beam {
        labels: Vec::new(),
        text: String::new(),
        log_blank: 0.0,
        log_nonblank: f64::NEG_INFINITY,
        lm: 0.0,
        state: WordState {
            node: None,
            word: String::new(),
            previous: None,
        },
    }];
    let chars = charset.chars();

    for t in 0..m.steps() {
        let log_row: Vec<f64> = m.row(t).iter().map(|&p| math::ln(p)).collect();
        let mut next: BTreeMap<Vec<usize>, Beam> = BTreeMap::new();
        let mut add = |template: &Beam,
                       labels: Vec<usize>,
                       text: Option<(String, WordState, f64)>,
                       log_b: f64,
                       log_nb: f64| {
            let entry = next.entry(labels).or_insert_with_key(|labels| {
                let (text, state, lm) = text.unwrap_or_else(|| {
                    (template.text.clone(), template.state.clone(), template.lm)
                });
                Beam {
                    labels: labels.clone(),
                    text,
                    log_blank: f64::NEG_INFINITY,
                    log_nonblank: f64::NEG_INFINITY,
                    lm,
                    state,
                }
            });
            entry.log_blank = math::log_add(entry.log_blank, log_b);
            entry.log_nonblank = math::log_add(entry.log_nonblank, log_nb);
        };

        for beam in &beams {
            let total = beam.log_total();
            let last = beam.labels.last().copied();
            let mut same_nb = f64::NEG_INFINITY;
            if let Some(l) = last {
                same_nb = beam.log_nonblank + log_row[l];
            }
            add(
                beam,
                beam.labels.clone(),
                None,
                total + log_row[blank],
                same_nb,
            );

            for (c, &ch) in chars.iter().enumerate() {
                if log_row[c] == f64::NEG_INFINITY {
                    continue;
                }
                let (state, lm_step) = match lexicon {
                    Some(lex) => match lex.extend(&beam.state, ch) {
                        Some(s) => s,
                        None => continue,
                    },
                    None => (beam.state.clone(), 0.0),
                };
                let source = if last == Some(c) {
                    beam.log_blank
                } else {
                    total
                };
                let mut labels = beam.labels.clone();
                labels.push(c);
                let mut text = beam.text.clone();
                text.push(ch);
                add(
                    beam,
                    labels,
                    Some((text, state, beam.lm + lm_step)),
                    f64::NEG_INFINITY,
                    source + log_row[c],
                );
            }
        }

        beams = next
            .into_values()
            .filter(|b| b.log_total() > f64::NEG_INFINITY)
            .collect();
        beams.sort_by(|a, b| rank(a.score(), &a.text, b.score(), &b.text));
        beams.truncate(beam_width);
    }
    beams
}

/// CTC prefix beam search keeping the `beam_width` most probable prefixes.
pub fn beam_decode(m: &ProbMatrix, charset: &Charset, beam_width: usize) -> Result<String> {
    m.check_charset(charset)?;
    if beam_width == 0 {
        return Err(invalid!("beam width must be at least 1"));
    }
    let beams = prefix_search(m, charset, beam_width, None);
    Ok(beams.into_iter().next().map(|b| b.text).unwrap_or_default())
}

/// Word beam search settings. The defaults are beam width 50, bigram
/// scoring and add-k smoothing with k = 0.01.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbsConfig {
    pub beam_width: usize,
    pub mode: LmMode,
    pub smooth: f64,
}

impl Default for WbsConfig {
    fn default() -> Self {
        Self {
            beam_width: 50,
            mode: LmMode::NGrams,
            smooth: 0.01,
        }
    }
}

/// Word beam search.
///
/// At the last timestep the best beam whose current word is empty or
/// complete wins. If every surviving beam ends inside a word, the best one is
/// completed with the lexicon word of highest LM probability that extends it
/// (shortest, then alphabetically first, without an LM).
pub fn wbs_decode(
    m: &ProbMatrix,
    charset: &Charset,
    tree: &PrefixTree,
    lm: Option<&dyn LanguageModel>,
    mode: LmMode,
    beam_width: usize,
) -> Result<String> {
    m.check_charset(charset)?;
    if beam_width == 0 {
        return Err(invalid!("beam width must be at least 1"));
    }
    if tree.is_empty() {
        return Err(invalid!("word beam search needs a non-empty lexicon"));
    }
    let lm = match mode {
        LmMode::Words => None,
        LmMode::NGrams => Some(lm.ok_or_else(|| invalid!("n-gram mode needs a language model"))?),
    };
    let lexicon = Lexicon { tree, lm, charset };
    let beams = prefix_search(m, charset, beam_width, Some(&lexicon));

    let mut best: Option<(f64, &Beam)> = None;
    for beam in &beams {
        let closing = match beam.state.node {
            None => 0.0,
            Some(node) if tree.node_is_word(node) => lexicon.close_word(&beam.state),
            Some(_) => continue,
        };
        let score = beam.score() + closing;
        let better = match best {
            None => true,
            Some((s, b)) => rank(score, &beam.text, s, &b.text) == Ordering::Less,
        };
        if better {
            best = Some((score, beam));
        }
    }
    if let Some((_, beam)) = best {
        return Ok(beam.text.clone());
    }

    // Every beam ends mid-word.
    let Some(beam) = beams.first() else {
        return Ok(String::new());
    };
    let candidates = tree.words_with_prefix(&beam.state.word);
    let mut choice: Option<(f64, &String)> = None;
    for w in &candidates {
        let p = lm.map_or(0.0, |lm| lm.log_prob(beam.state.previous.as_deref(), w));
        if choice.is_none_or(|(best_p, _)| p > best_p) {
            choice = Some((p, w));
        }
    }
    let mut text = beam.text.clone();
    if let Some((_, w)) = choice {
        text.push_str(&w[beam.state.word.len()..]);
    }
    Ok(text)
}

/// Largest instance [`brute_force_constrained`] accepts by default.
pub const BRUTE_FORCE_MAX_STEPS: usize = 8;
const BRUTE_FORCE_MAX_CLASSES: usize = 4;

/// Exhaustive lexicon-constrained decoding, the reference for
/// [`wbs_decode`] in [`LmMode::Words`].
///
/// Enumerates every path, collapses it, keeps labelings whose words are all
/// in `tree`, sums path probabilities per labeling and returns the most
/// probable one (lexicographically smaller on exact ties).
pub fn brute_force_constrained(
    m: &ProbMatrix,
    charset: &Charset,
    tree: &PrefixTree,
    max_steps: usize,
) -> Result<String> {
    m.check_charset(charset)?;
    if m.steps() > max_steps || m.classes() > BRUTE_FORCE_MAX_CLASSES {
        return Err(invalid!(
            "instance {}x{} exceeds the exhaustive-search limit {}x{}",
            m.steps(),
            m.classes(),
            max_steps,
            BRUTE_FORCE_MAX_CLASSES
        ));
    }
    let wordchars = charset.wordchars();
    let mut mass: BTreeMap<String, f64> = BTreeMap::new();
    let mut valid: BTreeMap<String, bool> = BTreeMap::new();
    let mut path = alloc::vec![0usize; m.steps()];
    loop {
        let p: f64 = path.iter().enumerate().map(|(t, &c)| m.get(t, c)).product();
        if p > 0.0 {
            let text = collapse(&path, charset);
            let ok = *valid
                .entry(text.clone())
                .or_insert_with(|| tokenize(&text, wordchars).iter().all(|w| tree.is_word(w)));
            if ok {
                *mass.entry(text).or_default() += p;
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == path.len() {
                return mass
                    .into_iter()
                    .fold(None, |best: Option<(String, f64)>, (text, p)| match best {
                        Some((bt, bp)) if bp >= p => Some((bt, bp)),
                        _ => Some((text, p)),
                    })
                    .map(|(t, _)| t)
                    .ok_or_else(|| {
                        Error::InvalidArgument("no lexicon-valid labeling has positive mass".into())
                    });
            }
            path[i] += 1;
            if path[i] < m.classes() {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}
