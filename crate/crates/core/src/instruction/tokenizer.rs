/// Counts tokens in text. Implementations are deterministic and shareable
/// across threads.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;

    fn name(&self) -> &str;
}

/// Approximates a byte-pair vocabulary: letters cost one token per four,
/// digits one per three, and every other visible character one token.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxBpeTokenizer;

impl ApproxBpeTokenizer {
    const LETTERS_PER_TOKEN: usize = 4;
    const DIGITS_PER_TOKEN: usize = 3;
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    Letter,
    Digit,
    Other,
    Space,
}

fn class(c: char) -> Class {
    if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Digit
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

impl Tokenizer for ApproxBpeTokenizer {
    fn count(&self, text: &str) -> usize {
        let mut total = 0;
        let mut run_class = Class::Space;
        let mut run_len = 0usize;
        let flush = |class: Class, len: usize| match class {
            Class::Letter => len.div_ceil(Self::LETTERS_PER_TOKEN),
            Class::Digit => len.div_ceil(Self::DIGITS_PER_TOKEN),
            Class::Other => len,
            Class::Space => 0,
        };
        for c in text.chars() {
            let k = class(c);
            if k == run_class {
                run_len += 1;
            } else {
                total += flush(run_class, run_len);
                run_class = k;
                run_len = 1;
            }
        }
        total + flush(run_class, run_len)
    }

    fn name(&self) -> &str {
        "approx-bpe"
    }
}

/// One token per whitespace-separated word.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }

    fn name(&self) -> &str {
        "whitespace"
    }
}
