use std::collections::HashMap;

/// Descriptions whose overlap is at most this fraction are concatenated.
pub const MERGE_OVERLAP_LIMIT: (usize, usize) = (70, 100);

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Shared word multiset size and the smaller word count.
fn overlap_counts(a: &str, b: &str) -> (usize, usize) {
    let wa = words(a);
    let wb = words(b);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in &wa {
        *counts.entry(w).or_default() += 1;
    }
    let mut shared = 0;
    for w in &wb {
        if let Some(c) = counts.get_mut(w.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    (shared, wa.len().min(wb.len()))
}

/// Word-multiset overlap normalised by the shorter text, in `[0, 1]`.
/// Texts without words overlap fully with anything.
pub fn description_overlap(a: &str, b: &str) -> f64 {
    let (shared, smaller) = overlap_counts(a, b);
    if smaller == 0 {
        1.0
    } else {
        shared as f64 / smaller as f64
    }
}

fn within_merge_limit(a: &str, b: &str) -> bool {
    let (shared, smaller) = overlap_counts(a, b);
    let (num, den) = MERGE_OVERLAP_LIMIT;
    smaller > 0 && shared * den <= num * smaller
}

fn join_sentences(a: &str, b: &str) -> String {
    format!("{}. {}", a.trim_end().trim_end_matches('.'), b.trim())
}

/// Left fold over the descriptions: a pair overlapping by at most 70% is
/// concatenated with `". "`, otherwise the longer text is kept.
pub fn merge_descriptions<S: AsRef<str>>(descriptions: &[S]) -> String {
    let mut iter = descriptions.iter().map(|d| d.as_ref().trim());
    let Some(first) = iter.next() else {
        return String::new();
    };
    iter.fold(first.to_string(), |acc, next| {
        if within_merge_limit(&acc, next) {
            join_sentences(&acc, next)
        } else if words(next).len() > words(&acc).len() {
            next.to_string()
        } else {
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_descriptions_collapse() {
        let d = "A heap overflow in libfoo";
        assert_eq!(merge_descriptions(&[d, d]), d);
    }

    #[test]
    fn disjoint_descriptions_concatenate() {
        assert_eq!(
            merge_descriptions(&["heap overflow.", "remote attackers crash"]),
            "heap overflow. remote attackers crash"
        );
    }

    #[test]
    fn seventy_percent_boundary_merges() {
        let a = "a b c d e f g h i j";
        let b = "a b c d e f g x y z";
        assert_eq!(description_overlap(a, b), 0.7);
        assert_eq!(merge_descriptions(&[a, b]), format!("{a}. {b}"));
        // 8/10 shared keeps the longer (first on ties).
        let c = "a b c d e f g h y z";
        assert_eq!(merge_descriptions(&[a, c]), a);
    }

    #[test]
    fn longer_text_kept_on_high_overlap() {
        let short = "buffer overflow in parser";
        let long = "buffer overflow in parser allows remote code execution";
        assert_eq!(merge_descriptions(&[short, long]), long);
    }

    proptest! {
        #[test]
        fn singleton_is_noop(s in "[a-z ]{0,40}") {
            prop_assert_eq!(merge_descriptions(std::slice::from_ref(&s)), s.trim());
        }

        #[test]
        fn word_count_never_grows(ds in proptest::collection::vec("[a-e]{1,2}( [a-e]{1,2}){0,8}", 1..5)) {
            let merged = merge_descriptions(&ds);
            let total: usize = ds.iter().map(|d| d.split_whitespace().count()).sum();
            prop_assert!(merged.split_whitespace().count() <= total);
        }
    }
}
