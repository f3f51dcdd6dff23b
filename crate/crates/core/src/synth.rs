//! Synthetic bilingual corpus generation.
//!
//! Builds labeled corpora whose two classes draw from disjoint vocabularies,
//! so token identity alone separates them and small models converge within a
//! few epochs. The words are neutral coinage; only their co-occurrence with
//! the label carries signal. Useful for end-to-end tests and demos where a
//! real corpus is unavailable.
//!
//! The output is fully determined by `(name, n, seed)`. Texts are emitted in
//! already-normalized form (single spaces, placeholder tokens instead of raw
//! URLs), so writing and reloading a generated dataset reproduces it exactly.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, Label, Language, Sample, Source};

const EN_POSITIVE: &[&str] = &[
    "crimson", "falcon", "ember", "quartz", "raven", "anvil", "bramble", "cinder", "drift",
    "fjord", "gale", "hollow",
];
const EN_NEGATIVE: &[&str] = &[
    "meadow", "lantern", "pebble", "willow", "harbor", "saffron", "tundra", "velvet", "walnut",
    "yarrow", "zephyr", "orchid",
];
const ES_POSITIVE: &[&str] = &[
    "cumbre", "brizna", "fuego", "granito", "cuervo", "yunque", "zarza", "ceniza", "deriva",
    "bahía", "viento", "hueco",
];
const ES_NEGATIVE: &[&str] = &[
    "pradera", "farol", "guijarro", "sauce", "puerto", "azafrán", "estepa", "terciopelo",
    "nogal", "milenrama", "brisa", "orquídea",
];
const EN_FILLER: &[&str] = &["the", "a", "and", "with", "some", "very"];
const ES_FILLER: &[&str] = &["el", "una", "y", "con", "algo", "muy"];
const PLACEHOLDERS: &[&str] = &["<URL>", "<USER>"];

fn class_vocab(language: Language, label: Label) -> &'static [&'static str] {
    match (language, label) {
        (Language::En, Label::Sexist) => EN_POSITIVE,
        (Language::En, Label::NonSexist) => EN_NEGATIVE,
        (Language::Es, Label::Sexist) => ES_POSITIVE,
        (Language::Es, Label::NonSexist) => ES_NEGATIVE,
    }
}

fn filler_vocab(language: Language) -> &'static [&'static str] {
    match language {
        Language::En => EN_FILLER,
        Language::Es => ES_FILLER,
    }
}

/// Words that may appear in both classes of a language.
pub fn shared_words(language: Language) -> Vec<&'static str> {
    let mut words = filler_vocab(language).to_vec();
    words.extend_from_slice(PLACEHOLDERS);
    words
}

/// Generates `n` samples cycling through the eight
/// (language, label, source) combinations, so every cell holds ⌊n/8⌋ or
/// ⌈n/8⌉ samples. Each text carries 5 to 10 tokens, mostly from the
/// (language, label) vocabulary plus one or two fillers and an occasional
/// placeholder token.
pub fn generate(name: &str, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let language = if i % 2 == 0 { Language::En } else { Language::Es };
        let label = if (i / 2) % 2 == 0 {
            Label::NonSexist
        } else {
            Label::Sexist
        };
        let source = if (i / 4) % 2 == 0 {
            Source::Twitter
        } else {
            Source::Gab
        };

        let n_tokens = rng.random_range(5..=10);
        let n_filler = rng.random_range(1..=2);
        let vocab = class_vocab(language, label);
        let fillers = filler_vocab(language);
        let mut words: Vec<&str> = Vec::with_capacity(n_tokens + 1);
        for _ in 0..(n_tokens - n_filler) {
            words.push(vocab.choose(&mut rng).copied().expect("non-empty vocab"));
        }
        for _ in 0..n_filler {
            words.push(fillers.choose(&mut rng).copied().expect("non-empty vocab"));
        }
        if rng.random_bool(0.1) {
            words.push(
                PLACEHOLDERS
                    .choose(&mut rng)
                    .copied()
                    .expect("non-empty vocab"),
            );
        }
        words.shuffle(&mut rng);

        samples.push(Sample {
            id: format!("s{i:05}"),
            source: Some(source),
            language,
            text: words.join(" "),
            label: Some(label),
        });
    }
    Dataset::new(name, samples, true).expect("generated samples satisfy the invariants")
}
