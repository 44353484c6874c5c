//! Deterministic synthetic text-line images rendered from a built-in 5×7
//! bitmap font.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::lexicon::Charset;
use crate::preprocess::GrayImage;

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;
/// Blank border around the text, in font pixels.
pub const MARGIN: usize = 2;
/// Narrowest canvas, in font pixels.
pub const MIN_WIDTH: usize = 16;

const INK: u8 = 0;
const PAPER: u8 = 255;
/// Per-sample tone ranges: ink is drawn from `[0, INK_SPREAD]`, paper from
/// `[255 - PAPER_SPREAD, 255]`.
const INK_SPREAD: u8 = 40;
const PAPER_SPREAD: u8 = 40;

#[rustfmt::skip]
const FONT: &[(char, [&str; GLYPH_HEIGHT])] = &[
    (' ', [".....", ".....", ".....", ".....", ".....", ".....", "....."]),
    ('a', [".....", ".....", ".###.", "....#", ".####", "#...#", ".####"]),
    ('b', ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "####."]),
    ('c', [".....", ".....", ".###.", "#....", "#....", "#...#", ".###."]),
    ('d', ["....#", "....#", ".##.#", "#..##", "#...#", "#...#", ".####"]),
    ('e', [".....", ".....", ".###.", "#...#", "#####", "#....", ".###."]),
    ('f', ["..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."]),
    ('g', [".....", ".####", "#...#", "#...#", ".####", "....#", ".###."]),
    ('h', ["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('i', ["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."]),
    ('j', ["...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."]),
    ('k', ["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."]),
    ('l', [".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('m', [".....", ".....", "##.#.", "#.#.#", "#.#.#", "#...#", "#...#"]),
    ('n', [".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('o', [".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."]),
    ('p', [".....", ".....", "####.", "#...#", "####.", "#....", "#...."]),
    ('q', [".....", ".....", ".##.#", "#..##", ".####", "....#", "....#"]),
    ('r', [".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."]),
    ('s', [".....", ".....", ".###.", "#....", ".###.", "....#", "####."]),
    ('t', [".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."]),
    ('u', [".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"]),
    ('v', [".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('w', [".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."]),
    ('x', [".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"]),
    ('y', [".....", ".....", "#...#", "#...#", ".####", "....#", ".###."]),
    ('z', [".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"]),
    ('0', [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', ["####.", "....#", "....#", ".###.", "....#", "....#", "####."]),
    ('4', ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('.', [".....", ".....", ".....", ".....", ".....", ".##..", ".##.."]),
    (',', [".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."]),
    ('\'', ["..#..", "..#..", ".#...", ".....", ".....", ".....", "....."]),
    ('"', [".#.#.", ".#.#.", ".....", ".....", ".....", ".....", "....."]),
    ('-', [".....", ".....", ".....", "#####", ".....", ".....", "....."]),
    ('!', ["..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."]),
    ('?', [".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."]),
    (':', [".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."]),
    (';', [".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#..."]),
];

fn glyph(c: char) -> Option<&'static [&'static str; GLYPH_HEIGHT]> {
    FONT.iter().find(|(g, _)| *g == c).map(|(_, rows)| rows)
}

/// Whether the built-in font can draw `c`.
pub fn has_glyph(c: char) -> bool {
    glyph(c).is_some()
}

/// Characters the built-in font covers, in table order.
pub fn font_chars() -> impl Iterator<Item = char> {
    FONT.iter().map(|(c, _)| *c)
}

/// Font bitmap of `c` as a `GLYPH_HEIGHT × GLYPH_WIDTH` ink mask.
pub fn glyph_mask(c: char) -> Option<[[bool; GLYPH_WIDTH]; GLYPH_HEIGHT]> {
    let rows = glyph(c)?;
    let mut mask = [[false; GLYPH_WIDTH]; GLYPH_HEIGHT];
    for (y, row) in rows.iter().enumerate() {
        for (x, b) in row.bytes().enumerate() {
            mask[y][x] = b == b'#';
        }
    }
    Some(mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub alphabet: Vec<char>,
    pub min_len: usize,
    pub max_len: usize,
    /// Pixels per font pixel.
    pub scale: usize,
    /// Salt-and-pepper probability per pixel.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// The three-letter task: `a`, `b`, `c` and space, lines of 1 to 5
    /// characters.
    pub fn toy(seed: u64) -> Self {
        Self {
            alphabet: alloc::vec!['a', 'b', 'c', ' '],
            min_len: 1,
            max_len: 5,
            scale: 1,
            noise: 0.02,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Canvas height in pixels.
    pub fn height(&self) -> usize {
        (GLYPH_HEIGHT + 2 * MARGIN) * self.scale
    }

    /// Widest canvas a label of `max_len` characters can produce.
    pub fn max_width(&self) -> usize {
        let w =
            2 * MARGIN + self.max_len * GLYPH_WIDTH + self.max_len.saturating_sub(1) * GLYPH_WIDTH;
        w.max(MIN_WIDTH) * self.scale
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet.is_empty() {
            return Err(invalid!("empty alphabet"));
        }
        if let Some(c) = self.alphabet.iter().find(|c| !has_glyph(**c)) {
            return Err(invalid!("no built-in glyph for {c:?}"));
        }
        if self.alphabet.iter().all(|&c| c == ' ') {
            return Err(invalid!("alphabet needs at least one visible character"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(invalid!(
                "length range [{}, {}] must satisfy 1 <= min <= max",
                self.min_len,
                self.max_len
            ));
        }
        if self.scale == 0 {
            return Err(invalid!("glyph scale must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(invalid!("noise {} outside [0, 1)", self.noise));
        }
        Ok(())
    }

    /// Checks the alphabet against a model charset.
    pub fn check_charset(&self, charset: &Charset) -> Result<()> {
        match self
            .alphabet
            .iter()
            .find(|&&c| charset.index_of(c).is_none())
        {
            Some(c) => Err(invalid!("alphabet character {c:?} is not in the charset")),
            None => Ok(()),
        }
    }
}

fn render_with(text: &str, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<GrayImage> {
    let masks = text
        .chars()
        .map(|c| glyph_mask(c).ok_or_else(|| invalid!("no built-in glyph for {c:?}")))
        .collect::<Result<Vec<_>>>()?;
    let mut offsets = Vec::with_capacity(masks.len());
    let mut x = MARGIN;
    for i in 0..masks.len() {
        if i > 0 {
            x += rng.gen_range(1..=GLYPH_WIDTH);
        }
        offsets.push(x);
        x += GLYPH_WIDTH;
    }
    let (ink, paper) = if spec.noise > 0.0 {
        (
            rng.gen_range(INK..=INK_SPREAD),
            rng.gen_range(PAPER - PAPER_SPREAD..=PAPER),
        )
    } else {
        (INK, PAPER)
    };
    let s = spec.scale;
    let width = (x + MARGIN).max(MIN_WIDTH) * s;
    let height = spec.height();
    let mut img = GrayImage::filled(width, height, paper);
    for (mask, &ox) in masks.iter().zip(&offsets) {
        for (gy, row) in mask.iter().enumerate() {
            for (gx, &on) in row.iter().enumerate() {
                if !on {
                    continue;
                }
                for dy in 0..s {
                    for dx in 0..s {
                        img.set((ox + gx) * s + dx, (MARGIN + gy) * s + dy, ink);
                    }
                }
            }
        }
    }
    if spec.noise > 0.0 {
        for y in 0..height {
            for x in 0..width {
                if rng.gen_bool(spec.noise) {
                    img.set(x, y, if rng.gen_bool(0.5) { INK } else { PAPER });
                }
            }
        }
    }
    Ok(img)
}

/// Renders `text` with glyph gaps, ink and paper tones, and noise drawn from
/// `spec.seed`. At zero noise the tones are pure black on white.
pub fn render_line(text: &str, spec: &SynthSpec) -> Result<GrayImage> {
    spec.validate()?;
    if let Some(c) = text.chars().find(|c| !spec.alphabet.contains(c)) {
        return Err(invalid!("character {c:?} is not in the alphabet"));
    }
    render_with(text, spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Whether `label` can be told apart from its rendering: no leading,
/// trailing or doubled spaces.
pub fn is_renderable_label(label: &str) -> bool {
    !label.starts_with(' ') && !label.ends_with(' ') && !label.contains("  ")
}

fn draw_label(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> String {
    loop {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let label: String = (0..len)
            .map(|_| spec.alphabet[rng.gen_range(0..spec.alphabet.len())])
            .collect();
        if is_renderable_label(&label) {
            return label;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    pub image: GrayImage,
    pub label: String,
}

/// One sample from its own ChaCha stream, so sample `i` does not depend on
/// how many samples precede it.
pub fn make_sample(spec: &SynthSpec, index: u64) -> Result<Sample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let label = draw_label(spec, &mut rng);
    let image = render_with(&label, spec, &mut rng)?;
    Ok(Sample { image, label })
}

/// `n` samples with labels drawn uniformly over lengths and characters
/// (resampling labels with edge or doubled spaces).
pub fn make_dataset(n: usize, spec: &SynthSpec) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(invalid!("dataset size must be at least 1"));
    }
    (0..n as u64).map(|i| make_sample(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn plain(seed: u64) -> SynthSpec {
        SynthSpec {
            noise: 0.0,
            ..SynthSpec::toy(seed)
        }
    }

    #[test]
    fn font_rows_are_well_formed_and_distinct() {
        let mut seen = BTreeSet::new();
        for (c, rows) in FONT {
            assert!(rows
                .iter()
                .all(|r| r.len() == GLYPH_WIDTH && r.bytes().all(|b| b == b'.' || b == b'#')));
            assert!(seen.insert(rows.concat()), "duplicate glyph for {c:?}");
        }
        for c in 'a'..='z' {
            assert!(has_glyph(c));
        }
    }

    #[test]
    fn empty_text_is_a_blank_minimum_canvas() {
        let img = render_line("", &plain(1)).unwrap();
        assert_eq!(img.width(), MIN_WIDTH);
        assert_eq!(img.height(), GLYPH_HEIGHT + 2 * MARGIN);
        assert!(img.pixels().iter().all(|&v| v == PAPER));
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = SynthSpec::toy(3);
        assert_eq!(
            render_line("a", &spec).unwrap(),
            render_line("a", &spec).unwrap()
        );
        assert!(render_line("d", &spec).is_err());
    }

    // Template match each ink-column run against the font.
    fn read_back(img: &GrayImage, alphabet: &[char]) -> String {
        let ink_col = |x: usize| (0..img.height()).any(|y| img.get(x, y) == INK);
        let mut out = String::new();
        let mut x = 0;
        while x < img.width() {
            if !ink_col(x) {
                x += 1;
                continue;
            }
            let best = alphabet
                .iter()
                .filter(|&&c| c != ' ')
                .max_by_key(|&&c| {
                    let mask = glyph_mask(c).unwrap();
                    let mut agree = 0;
                    for (gy, row) in mask.iter().enumerate() {
                        for (gx, &m) in row.iter().enumerate() {
                            let px = x + gx;
                            let on = px < img.width() && img.get(px, MARGIN + gy) == INK;
                            agree += usize::from(on == m);
                        }
                    }
                    agree
                })
                .unwrap();
            out.push(*best);
            x += GLYPH_WIDTH;
        }
        out
    }

    #[test]
    fn template_matching_reads_back_the_text() {
        let alphabet: Vec<char> = ('a'..='z').collect();
        let spec = SynthSpec {
            alphabet: alphabet.clone(),
            ..plain(7)
        };
        assert_eq!(
            read_back(&render_line("ab", &spec).unwrap(), &alphabet),
            "ab"
        );
        assert_eq!(
            read_back(&render_line("cab", &spec).unwrap(), &alphabet),
            "cab"
        );
    }

    #[test]
    fn scale_multiplies_dimensions() {
        let spec = SynthSpec {
            scale: 3,
            ..plain(2)
        };
        let img = render_line("", &spec).unwrap();
        assert_eq!((img.width(), img.height()), (MIN_WIDTH * 3, spec.height()));
    }

    #[test]
    fn dataset_labels_are_stable_and_in_range() {
        let spec = SynthSpec::toy(11);
        let a = make_dataset(10, &spec).unwrap();
        let b = make_dataset(10, &spec).unwrap();
        assert_eq!(a, b);
        for s in make_dataset(300, &spec).unwrap() {
            let n = s.label.chars().count();
            assert!((spec.min_len..=spec.max_len).contains(&n));
            assert!(is_renderable_label(&s.label));
            assert!(s.image.width() <= spec.max_width());
            // Two-pixel strips leave room for every label and its repeats.
            let labels: Vec<usize> = s.label.chars().map(|c| c as usize).collect();
            let repeats = labels.windows(2).filter(|w| w[0] == w[1]).count();
            assert!(s.image.width() / 2 >= n + repeats);
        }
        assert!(make_dataset(0, &spec).is_err());
    }

    #[test]
    fn disjoint_seeds_share_no_samples() {
        let spec = SynthSpec::toy(0);
        let mut seen = BTreeSet::new();
        for seed in [100, 200, 300] {
            for s in make_dataset(100, &spec.with_seed(seed)).unwrap() {
                assert!(seen.insert((s.image.pixels().to_vec(), s.label)));
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = SynthSpec::toy(0);
        s.noise = 1.0;
        assert!(s.validate().is_err());
        let mut s = SynthSpec::toy(0);
        s.min_len = 0;
        assert!(s.validate().is_err());
        let mut s = SynthSpec::toy(0);
        s.alphabet = vec!['A'];
        assert!(s.validate().is_err());
        let cs = Charset::new(vec!['a', 'b'], vec!['a', 'b']).unwrap();
        assert!(SynthSpec::toy(0).check_charset(&cs).is_err());
    }
}
