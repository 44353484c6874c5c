//! Charsets, word tokenization, the prefix tree used to constrain decoding
//! and a smoothed word bigram language model.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Separator line between the character list and the word-character list in
/// a charset file.
pub const CHARSET_SEPARATOR: &str = "---";

/// The recognizer's output alphabet. Class `i < len()` is `chars[i]`; the CTC
/// blank is the extra class `len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charset {
    chars: Vec<char>,
    wordchars: Vec<char>,
}

impl Charset {
    /// Validates that `chars` has no duplicates and that every word character
    /// is also a character.
    pub fn new(chars: Vec<char>, wordchars: Vec<char>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &c in &chars {
            if !seen.insert(c) {
                return Err(Error::Format(format!("duplicate character {c:?}")));
            }
        }
        let mut seen_word = BTreeSet::new();
        for &c in &wordchars {
            if !seen.contains(&c) {
                return Err(Error::Format(format!(
                    "word character {c:?} is not in the character list"
                )));
            }
            if !seen_word.insert(c) {
                return Err(Error::Format(format!("duplicate word character {c:?}")));
            }
        }
        Ok(Self { chars, wordchars })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn wordchars(&self) -> &[char] {
        &self.wordchars
    }

    /// Number of characters, excluding the blank.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Class index of the CTC blank (always the last class).
    pub fn blank_index(&self) -> usize {
        self.chars.len()
    }

    /// Number of output classes including the blank.
    pub fn classes(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.chars.iter().position(|&x| x == c)
    }

    pub fn char_at(&self, index: usize) -> Option<char> {
        self.chars.get(index).copied()
    }

    pub fn is_wordchar(&self, c: char) -> bool {
        self.wordchars.contains(&c)
    }

    /// Maps text to class indices; fails on characters outside the charset.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| invalid!("character {c:?} is not in the charset"))
            })
            .collect()
    }

    /// Maps class indices back to text, skipping the blank.
    pub fn decode(&self, indices: &[usize]) -> String {
        indices.iter().filter_map(|&i| self.char_at(i)).collect()
    }

    /// Serializes to the charset file format read by [`parse_charset`].
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for &c in &self.chars {
            out.push_str(&escape_char(c));
            out.push('\n');
        }
        out.push_str(CHARSET_SEPARATOR);
        out.push('\n');
        for &c in &self.wordchars {
            out.push_str(&escape_char(c));
            out.push('\n');
        }
        out
    }
}

fn escape_char(c: char) -> String {
    match c {
        ' ' => "\\s".to_string(),
        '\n' => "\\n".to_string(),
        '\t' => "\\t".to_string(),
        '\\' => "\\\\".to_string(),
        c => c.to_string(),
    }
}

fn unescape_line(line: &str, lineno: usize) -> Result<char> {
    let mut it = line.chars();
    let c = match (it.next(), it.next(), it.next()) {
        (Some('\\'), Some(e), None) => match e {
            's' => ' ',
            'n' => '\n',
            't' => '\t',
            '\\' => '\\',
            other => {
                return Err(Error::Format(format!(
                    "line {lineno}: unknown escape \\{other}"
                )))
            }
        },
        (Some(c), None, _) => c,
        _ => {
            return Err(Error::Format(format!(
                "line {lineno}: expected one character, got {line:?}"
            )))
        }
    };
    Ok(c)
}

/// Parses a charset file.
///
/// One character per line, in class order, then a line `---`, then the word
/// characters. Escapes: `\s` space, `\t` tab, `\n` newline, `\\` backslash.
/// Empty lines are ignored.
pub fn parse_charset(contents: &str) -> Result<Charset> {
    let mut chars = Vec::new();
    let mut wordchars = Vec::new();
    let mut in_words = false;
    for (i, raw) in contents.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if line == CHARSET_SEPARATOR {
            if in_words {
                return Err(Error::Format(format!("line {}: second separator", i + 1)));
            }
            in_words = true;
            continue;
        }
        let c = unescape_line(line, i + 1)?;
        if in_words {
            wordchars.push(c);
        } else {
            chars.push(c);
        }
    }
    if !in_words {
        return Err(Error::Format(format!(
            "missing {CHARSET_SEPARATOR:?} line before the word characters"
        )));
    }
    Charset::new(chars, wordchars)
}

/// Splits `text` into maximal runs of word characters.
pub fn tokenize(text: &str, wordchars: &[char]) -> Vec<String> {
    text.split(|c: char| !wordchars.contains(&c))
        .filter(|w| !w.is_empty())
        .map(String::from)
        .collect()
}

/// Index of a node inside a [`PrefixTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Default)]
struct Node {
    // Sorted by character.
    children: Vec<(char, usize)>,
    is_word: bool,
}

/// Character trie over the lexicon words.
#[derive(Debug, Clone)]
pub struct PrefixTree {
    nodes: Vec<Node>,
    words: usize,
}

impl Default for PrefixTree {
    fn default() -> Self {
        Self {
            nodes: alloc::vec![Node::default()],
            words: 0,
        }
    }
}

impl PrefixTree {
    /// Builds a tree from `words`, rejecting any character outside
    /// `wordchars`. Duplicate words are ignored.
    pub fn build<S: AsRef<str>>(words: &[S], wordchars: &[char]) -> Result<Self> {
        let mut tree = Self::default();
        for w in words {
            let w = w.as_ref();
            if let Some(c) = w.chars().find(|c| !wordchars.contains(c)) {
                return Err(invalid!("word {w:?} contains non-word character {c:?}"));
            }
            tree.insert(w);
        }
        Ok(tree)
    }

    /// Builds a tree from every word of a text corpus.
    pub fn from_corpus(corpus: &str, wordchars: &[char]) -> Self {
        let mut tree = Self::default();
        for line in corpus.lines() {
            for w in tokenize(line, wordchars) {
                tree.insert(&w);
            }
        }
        tree
    }

    fn insert(&mut self, word: &str) {
        if word.is_empty() {
            return;
        }
        let mut node = 0;
        for c in word.chars() {
            node = match self.nodes[node].children.binary_search_by_key(&c, |e| e.0) {
                Ok(pos) => self.nodes[node].children[pos].1,
                Err(pos) => {
                    let id = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[node].children.insert(pos, (c, id));
                    id
                }
            };
        }
        if !self.nodes[node].is_word {
            self.nodes[node].is_word = true;
            self.words += 1;
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.words
    }

    pub fn is_empty(&self) -> bool {
        self.words == 0
    }

    pub fn child(&self, node: NodeId, c: char) -> Option<NodeId> {
        let children = &self.nodes[node.0].children;
        children
            .binary_search_by_key(&c, |e| e.0)
            .ok()
            .map(|pos| NodeId(children[pos].1))
    }

    pub fn node_is_word(&self, node: NodeId) -> bool {
        self.nodes[node.0].is_word
    }

    /// Characters that extend `node` towards some word, in sorted order.
    pub fn node_next_chars(&self, node: NodeId) -> impl Iterator<Item = char> + '_ {
        self.nodes[node.0].children.iter().map(|e| e.0)
    }

    /// Node reached by spelling `prefix` from the root.
    pub fn find(&self, prefix: &str) -> Option<NodeId> {
        prefix
            .chars()
            .try_fold(self.root(), |node, c| self.child(node, c))
    }

    /// Characters `c` such that `prefix + c` is a prefix of some word.
    pub fn next_chars(&self, prefix: &str) -> Vec<char> {
        self.find(prefix)
            .map(|n| self.node_next_chars(n).collect())
            .unwrap_or_default()
    }

    pub fn is_word(&self, s: &str) -> bool {
        self.find(s).is_some_and(|n| self.node_is_word(n))
    }

    /// All words starting with `prefix`, shortest first and then in
    /// character order.
    pub fn words_with_prefix(&self, prefix: &str) -> Vec<String> {
        let Some(start) = self.find(prefix) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        // Breadth-first keeps the shortest-first order.
        let mut frontier = alloc::vec![(start.0, String::from(prefix))];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (node, text) in frontier {
                if self.nodes[node].is_word {
                    out.push(text.clone());
                }
                for &(c, child) in &self.nodes[node].children {
                    let mut t = text.clone();
                    t.push(c);
                    next.push((child, t));
                }
            }
            frontier = next;
        }
        out
    }

    /// Every word in the tree, in the order of [`Self::words_with_prefix`].
    pub fn words(&self) -> Vec<String> {
        self.words_with_prefix("")
    }
}

/// Add-k smoothed word bigram model.
///
/// `P(w | v) = (count(v, w) + k) / (count(v) + k·|V|)` where `count(v)` is the
/// number of bigrams with history `v`, and the start of each corpus line is a
/// distinguished history. Unigrams are smoothed the same way.
#[derive(Debug, Clone)]
pub struct NgramLm {
    k: f64,
    vocab: BTreeSet<String>,
    unigrams: BTreeMap<String, usize>,
    total_words: usize,
    // Keyed by history; `None` is the line start.
    bigrams: BTreeMap<Option<String>, BTreeMap<String, usize>>,
    history_totals: BTreeMap<Option<String>, usize>,
}

impl NgramLm {
    /// Trains on a corpus with one sentence per line.
    pub fn train(corpus: &str, wordchars: &[char], k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid!("smoothing constant must be positive, got {k}"));
        }
        let mut lm = Self {
            k,
            vocab: BTreeSet::new(),
            unigrams: BTreeMap::new(),
            total_words: 0,
            bigrams: BTreeMap::new(),
            history_totals: BTreeMap::new(),
        };
        for line in corpus.lines() {
            let mut history: Option<String> = None;
            for w in tokenize(line, wordchars) {
                *lm.unigrams.entry(w.clone()).or_default() += 1;
                lm.total_words += 1;
                *lm.bigrams
                    .entry(history.clone())
                    .or_default()
                    .entry(w.clone())
                    .or_default() += 1;
                *lm.history_totals.entry(history).or_default() += 1;
                lm.vocab.insert(w.clone());
                history = Some(w);
            }
        }
        if lm.total_words == 0 {
            return Err(invalid!("corpus contains no words"));
        }
        Ok(lm)
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn count(&self, word: &str) -> usize {
        self.unigrams.get(word).copied().unwrap_or(0)
    }

    pub fn bigram_count(&self, history: Option<&str>, word: &str) -> usize {
        self.bigrams
            .get(&history.map(String::from))
            .and_then(|m| m.get(word))
            .copied()
            .unwrap_or(0)
    }

    /// Smoothed unigram probability.
    pub fn unigram(&self, word: &str) -> f64 {
        let v = self.vocab.len() as f64;
        (self.count(word) as f64 + self.k) / (self.total_words as f64 + self.k * v)
    }

    /// Smoothed `P(word | history)`; `history = None` is the sentence start.
    pub fn probability(&self, history: Option<&str>, word: &str) -> f64 {
        let v = self.vocab.len() as f64;
        let key = history.map(String::from);
        let total = self.history_totals.get(&key).copied().unwrap_or(0) as f64;
        (self.bigram_count(history, word) as f64 + self.k) / (total + self.k * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn letters() -> Vec<char> {
        ('a'..='z').chain(['\'']).collect()
    }

    #[test]
    fn parse_charset_examples() {
        let cs = parse_charset("a\nb\n---\na\nb").unwrap();
        assert_eq!(cs.chars(), &['a', 'b']);
        assert_eq!(cs.wordchars(), &['a', 'b']);
        assert_eq!(cs.blank_index(), 2);

        let cs = parse_charset("a\n\\s\n---\na").unwrap();
        assert_eq!(cs.chars(), &['a', ' ']);
        assert_eq!(cs.wordchars(), &['a']);

        let cs = parse_charset("\\\\\n\\n\n\\t\n---\n").unwrap();
        assert_eq!(cs.chars(), &['\\', '\n', '\t']);
        assert!(cs.wordchars().is_empty());
    }

    #[test]
    fn parse_charset_errors() {
        assert!(matches!(
            parse_charset("a\na\n---\na"),
            Err(Error::Format(_))
        ));
        assert!(matches!(parse_charset("a\n---\nb"), Err(Error::Format(_))));
        assert!(matches!(parse_charset("ab\n---\n"), Err(Error::Format(_))));
        assert!(matches!(parse_charset("\\q\n---\n"), Err(Error::Format(_))));
        assert!(matches!(parse_charset("a\nb"), Err(Error::Format(_))));
    }

    #[test]
    fn seventy_nine_characters_give_blank_79() {
        // First 79 printable ASCII characters, the size of a typical
        // line-level English charset.
        let chars: Vec<char> = (' '..='~').take(79).collect();
        let mut text = String::new();
        for &c in &chars {
            text.push_str(&escape_char(c));
            text.push('\n');
        }
        text.push_str("---\n");
        for c in chars.iter().filter(|c| c.is_alphanumeric()) {
            text.push(*c);
            text.push('\n');
        }
        let cs = parse_charset(&text).unwrap();
        assert_eq!(cs.len(), 79);
        assert_eq!(cs.blank_index(), 79);
        assert_eq!(parse_charset(&cs.to_file_string()).unwrap(), cs);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("the cat", &letters()), vec!["the", "cat"]);
        assert_eq!(tokenize("it's", &letters()), vec!["it's"]);
        assert_eq!(tokenize("  a  b ", &letters()), vec!["a", "b"]);
        assert!(tokenize("", &letters()).is_empty());
    }

    #[test]
    fn prefix_tree_examples() {
        let t = PrefixTree::build(&["ab", "ac"], &letters()).unwrap();
        let a = t.child(t.root(), 'a').unwrap();
        assert_eq!(t.node_next_chars(t.root()).collect::<Vec<_>>(), vec!['a']);
        assert_eq!(t.node_next_chars(a).collect::<Vec<_>>(), vec!['b', 'c']);
        assert!(t.is_word("ab") && t.is_word("ac"));
        assert!(!t.is_word("a"));
        assert_eq!(t.next_chars("a"), vec!['b', 'c']);
        assert_eq!(t.next_chars("x"), Vec::<char>::new());

        let t = PrefixTree::build(&["ab"], &letters()).unwrap();
        assert_eq!(t.next_chars(""), vec!['a']);

        let empty = PrefixTree::build::<&str>(&[], &letters()).unwrap();
        assert!(empty.is_empty());
        assert!(!empty.is_word(""));
        assert!(empty.next_chars("").is_empty());

        assert!(PrefixTree::build(&["a b"], &letters()).is_err());
        let dup = PrefixTree::build(&["ab", "ab"], &letters()).unwrap();
        assert_eq!(dup.len(), 1);
    }

    #[test]
    fn words_with_prefix_orders_shortest_first() {
        let t = PrefixTree::build(&["abc", "ab", "abd", "b"], &letters()).unwrap();
        assert_eq!(t.words_with_prefix("ab"), vec!["ab", "abc", "abd"]);
        assert_eq!(t.words(), vec!["b", "ab", "abc", "abd"]);
    }

    #[test]
    fn tree_membership_matches_hash_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alphabet: Vec<char> = ('a'..='h').collect();
        let word = |rng: &mut ChaCha8Rng| -> String {
            let len = rng.gen_range(1..=7);
            (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect()
        };
        let words: Vec<String> = (0..1000).map(|_| word(&mut rng)).collect();
        let set: HashSet<&str> = words.iter().map(String::as_str).collect();
        let tree = PrefixTree::build(&words, &letters()).unwrap();
        assert_eq!(tree.len(), set.len());
        for w in &words {
            assert!(tree.is_word(w));
        }
        for _ in 0..1000 {
            let q = word(&mut rng);
            assert_eq!(tree.is_word(&q), set.contains(q.as_str()), "{q}");
        }
    }

    #[test]
    fn bigram_examples() {
        let l = letters();
        let lm = NgramLm::train("a b", &l, 1e-12).unwrap();
        assert!((lm.probability(Some("a"), "b") - 1.0).abs() < 1e-9);

        let k = 0.01;
        let lm = NgramLm::train("a b a c", &l, k).unwrap();
        assert_eq!(lm.vocab_size(), 3);
        let p = lm.probability(Some("a"), "b");
        assert!((p - 1.01 / 2.03).abs() < 1e-15);
        assert!((p - 0.4975).abs() < 1e-4);
        // "b" is followed once (by "a"); "c" never follows it.
        let unseen = lm.probability(Some("b"), "c");
        assert!((unseen - k / (1.0 + 3.0 * k)).abs() < 1e-15);
        assert!(unseen > 0.0);

        assert!(NgramLm::train("  \n ", &l, k).is_err());
        assert!(NgramLm::train("a", &l, 0.0).is_err());
    }

    #[test]
    fn line_start_is_a_separate_history() {
        let lm = NgramLm::train("x y\nx z\n", &letters(), 0.5).unwrap();
        assert_eq!(lm.bigram_count(None, "x"), 2);
        // "y" ends line 1, so "y x" is not a bigram.
        assert_eq!(lm.bigram_count(Some("y"), "x"), 0);
        let p = lm.probability(None, "x");
        assert!((p - 2.5 / (2.0 + 1.5)).abs() < 1e-15);
    }

    fn corpus_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "ab", "ba", "c"]), 1..6)
                .prop_map(|ws| ws.join(" ")),
            1..5,
        )
        .prop_map(|lines| lines.join("\n"))
    }

    proptest! {
        #[test]
        fn bigram_distributions_normalize(corpus in corpus_strategy(), k in 0.001f64..2.0) {
            let lm = NgramLm::train(&corpus, &letters(), k).unwrap();
            let vocab: Vec<String> = lm.vocabulary().iter().cloned().collect();
            let mut histories: Vec<Option<&str>> = vec![None];
            histories.extend(vocab.iter().map(|w| Some(w.as_str())));
            for h in histories {
                let total: f64 = vocab.iter().map(|w| lm.probability(h, w)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "{h:?} {total}");
            }
            let uni: f64 = vocab.iter().map(|w| lm.unigram(w)).sum();
            prop_assert!((uni - 1.0).abs() < 1e-9);
        }

        #[test]
        fn next_chars_always_lead_to_a_word(corpus in corpus_strategy(), prefix in "[abc]{0,3}") {
            let tree = PrefixTree::from_corpus(&corpus, &letters());
            for c in tree.next_chars(&prefix) {
                let mut p = prefix.clone();
                p.push(c);
                prop_assert!(!tree.words_with_prefix(&p).is_empty());
            }
        }

        #[test]
        fn rejoining_tokens_creates_no_new_words(text in "[ab ,.]{0,20}") {
            let wc = ['a', 'b'];
            let words = tokenize(&text, &wc);
            let again = tokenize(&words.join(" "), &wc);
            prop_assert_eq!(words, again);
        }
    }
}
