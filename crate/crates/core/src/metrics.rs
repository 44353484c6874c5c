//! Levenshtein alignment and the character / word error rates built on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::lexicon::tokenize;

/// Operation counts of one minimum-cost alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Length of the reference sequence.
    pub ref_len: usize,
}

impl EditCounts {
    /// Total edit distance.
    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `distance / ref_len`, or `None` for an empty reference.
    pub fn rate(&self) -> Option<f64> {
        (self.ref_len > 0).then(|| self.distance() as f64 / self.ref_len as f64)
    }
}

impl core::ops::Add for EditCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            ref_len: self.ref_len + o.ref_len,
        }
    }
}

/// Unit-cost Levenshtein alignment of `hyp` against `reference`.
///
/// Deletions are reference tokens missing from the hypothesis, insertions are
/// extra hypothesis tokens. When several alignments are optimal the backtrace
/// prefers a diagonal step (match or substitution), then a deletion, then an
/// insertion.
pub fn levenshtein<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let n = reference.len();
    let m = hyp.len();
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for (j, cell) in d[..w].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut counts = EditCounts {
        ref_len: n,
        ..EditCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let differs = reference[i - 1] != hyp[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(differs) == here {
                counts.substitutions += usize::from(differs);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Word-level edit counts; words are maximal runs of `wordchars`.
pub fn word_edits(ref_text: &str, hyp_text: &str, wordchars: &[char]) -> EditCounts {
    let r = tokenize(ref_text, wordchars);
    let h = tokenize(hyp_text, wordchars);
    levenshtein(&r, &h)
}

/// Character-level edit counts over Unicode scalar values.
pub fn char_edits(ref_text: &str, hyp_text: &str) -> EditCounts {
    let r: Vec<char> = ref_text.chars().collect();
    let h: Vec<char> = hyp_text.chars().collect();
    levenshtein(&r, &h)
}

/// Word error rate `(S + D + I) / N` with `N` the number of reference words.
///
/// Not clamped: many insertions push it above 1.
pub fn wer(ref_text: &str, hyp_text: &str, wordchars: &[char]) -> Result<f64> {
    word_edits(ref_text, hyp_text, wordchars)
        .rate()
        .ok_or_else(|| invalid!("reference {ref_text:?} contains no words"))
}

/// Character error rate `(S + D + I) / N` with `N` the reference length.
pub fn cer(ref_text: &str, hyp_text: &str) -> Result<f64> {
    char_edits(ref_text, hyp_text)
        .rate()
        .ok_or_else(|| invalid!("empty reference"))
}

/// Per-line evaluation inside a [`CorpusReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineReport {
    pub chars: EditCounts,
    pub words: EditCounts,
}

impl LineReport {
    pub fn cer(&self) -> Option<f64> {
        self.chars.rate()
    }

    /// `None` when the reference line tokenizes to no words.
    pub fn wer(&self) -> Option<f64> {
        self.words.rate()
    }
}

/// Micro-averaged CER / WER over a set of (reference, hypothesis) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub lines: Vec<LineReport>,
    pub chars: EditCounts,
    pub words: EditCounts,
}

impl CorpusReport {
    /// Sum of character edits over sum of reference lengths.
    pub fn cer(&self) -> f64 {
        self.chars.distance() as f64 / self.chars.ref_len as f64
    }

    /// Sum of word edits over sum of reference word counts.
    pub fn wer(&self) -> f64 {
        self.words.distance() as f64 / self.words.ref_len as f64
    }
}

/// Evaluates a corpus of line pairs.
pub fn corpus_report<R, H>(pairs: &[(R, H)], wordchars: &[char]) -> Result<CorpusReport>
where
    R: AsRef<str>,
    H: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(invalid!("no line pairs to evaluate"));
    }
    let mut lines = Vec::with_capacity(pairs.len());
    let mut chars = EditCounts::default();
    let mut words = EditCounts::default();
    for (i, (r, h)) in pairs.iter().enumerate() {
        let (r, h) = (r.as_ref(), h.as_ref());
        if r.is_empty() {
            return Err(invalid!("reference line {} is empty", i + 1));
        }
        let line = LineReport {
            chars: char_edits(r, h),
            words: word_edits(r, h, wordchars),
        };
        chars = chars + line.chars;
        words = words + line.words;
        lines.push(line);
    }
    if words.ref_len == 0 {
        return Err(invalid!("references contain no words"));
    }
    Ok(CorpusReport {
        lines,
        chars,
        words,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LETTERS: &[char] = &[
        'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r',
        's', 't', 'u', 'v', 'w', 'x', 'y', 'z',
    ];

    /// Plain recursive edit distance over the full lattice (memoized).
    fn oracle_distance(a: &[char], b: &[char]) -> usize {
        fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Option<usize>>) -> usize {
            let w = b.len() + 1;
            if let Some(v) = memo[i * w + j] {
                return v;
            }
            let v = if i == a.len() {
                b.len() - j
            } else if j == b.len() {
                a.len() - i
            } else {
                let sub = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
                let del = go(a, b, i + 1, j, memo) + 1;
                let ins = go(a, b, i, j + 1, memo) + 1;
                sub.min(del).min(ins)
            };
            memo[i * w + j] = Some(v);
            v
        }
        let mut memo = vec![None; (a.len() + 1) * (b.len() + 1)];
        go(a, b, 0, 0, &mut memo)
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn levenshtein_examples() {
        let c = levenshtein(&chars("abc"), &chars("abc"));
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 0, 0));
        let c = levenshtein(&chars("kitten"), &chars("sitting"));
        assert_eq!(
            c.distance(),
            oracle_distance(&chars("kitten"), &chars("sitting"))
        );
        assert_eq!(c.distance(), 3);
        let c = levenshtein(&chars("abc"), &[]);
        assert_eq!(
            (c.substitutions, c.deletions, c.insertions, c.ref_len),
            (0, 3, 0, 3)
        );
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer("the cat sat", "the cat sat", LETTERS).unwrap(), 0.0);
        let e = word_edits("the cat sat", "the bat sat on", LETTERS);
        assert_eq!((e.substitutions, e.deletions, e.insertions), (1, 0, 1));
        assert!((wer("the cat sat", "the bat sat on", LETTERS).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer("a", "", LETTERS).unwrap(), 1.0);
        assert!(wer("  ", "a", LETTERS).is_err());
        // Insertions are not clamped.
        assert_eq!(wer("a", "b c d", LETTERS).unwrap(), 3.0);
    }

    #[test]
    fn cer_examples() {
        assert_eq!(cer("ab", "ab").unwrap(), 0.0);
        assert_eq!(cer("ab", "ba").unwrap(), 1.0);
        assert_eq!(cer("abcd", "abed").unwrap(), 0.25);
        assert!(cer("", "x").is_err());
        // Scalar values, not bytes.
        assert_eq!(cer("été", "ete").unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn corpus_examples() {
        let r = corpus_report(&[("ab c", "ab c"), ("ab c", "ab c")], LETTERS).unwrap();
        assert_eq!((r.cer(), r.wer()), (0.0, 0.0));
        let r = corpus_report(&[("abcd", "abed"), ("wxyz", "wxy")], LETTERS).unwrap();
        assert_eq!(r.cer(), 0.25);
        assert_eq!(r.lines.len(), 2);
        assert_eq!(r.lines[1].chars.deletions, 1);
        let empty: [(&str, &str); 0] = [];
        assert!(corpus_report(&empty, LETTERS).is_err());
        assert!(corpus_report(&[("", "a")], LETTERS).is_err());
    }

    #[test]
    fn deletion_and_insertion_swap_with_arguments() {
        let a = chars("abcde");
        let b = chars("xbd");
        let ab = levenshtein(&a, &b);
        let ba = levenshtein(&b, &a);
        assert_eq!(ab.distance(), ba.distance());
        assert_eq!(ab.deletions - ab.insertions, ba.insertions - ba.deletions);
    }

    fn short() -> impl Strategy<Value = Vec<char>> {
        prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd']), 0..10)
    }

    proptest! {
        #[test]
        fn matches_lattice_oracle(a in short(), b in short()) {
            let c = levenshtein(&a, &b);
            prop_assert_eq!(c.distance(), oracle_distance(&a, &b));
            prop_assert_eq!(c.ref_len, a.len());
            // Split is consistent with the sequence lengths.
            prop_assert_eq!(a.len() - c.deletions + c.insertions, b.len());
        }

        #[test]
        fn metric_axioms(a in short(), b in short(), c in short()) {
            let d = |x: &[char], y: &[char]| levenshtein(x, y).distance();
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert_eq!(d(&a, &[]), a.len());
        }
    }
}
