use regex::Regex;
use std::sync::OnceLock;

struct Patterns {
    tag: Regex,
    markdown: Regex,
    url: Regex,
    cve: Regex,
    empty_brackets: Regex,
    space_before_punct: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        tag: Regex::new(r"</?[A-Za-z][^<>]*>").unwrap(),
        markdown: Regex::new(r"\*\*|__|`+|^#+\s").unwrap(),
        url: Regex::new(r"(?i)\b(?:https?|ftp)://\S+|\bwww\.\S+").unwrap(),
        cve: Regex::new(r"(?i)\bCVE-\d{4}-\d{4,}\b[:,;]?").unwrap(),
        empty_brackets: Regex::new(r"\(\s*[,;]?\s*\)|\[\s*[,;]?\s*\]").unwrap(),
        space_before_punct: Regex::new(r"\s+([.,;:])").unwrap(),
    })
}

fn clean_once(text: &str, org_mode: bool) -> String {
    let p = patterns();
    let mut s: String = text
        .chars()
        .filter(|&c| c != '\u{FFFD}')
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    s = p.tag.replace_all(&s, " ").into_owned();
    s = p.markdown.replace_all(&s, "").into_owned();
    s = p.url.replace_all(&s, " ").into_owned();
    if org_mode {
        s = p.cve.replace_all(&s, " ").into_owned();
        s = p.empty_brackets.replace_all(&s, " ").into_owned();
    }
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let collapsed = p
        .space_before_punct
        .replace_all(&collapsed, "$1")
        .into_owned();
    collapsed
        .trim_start_matches(|c: char| matches!(c, ':' | ',' | ';' | '-') || c.is_whitespace())
        .trim()
        .to_string()
}

/// Removes URLs, markup and control characters and collapses whitespace.
/// In `org_mode` CVE identifiers are stripped as well.
///
/// Applied to a fixpoint, so `clean(clean(x)) == clean(x)`.
pub fn clean_description(text: &str, org_mode: bool) -> String {
    let mut current = clean_once(text, org_mode);
    for _ in 0..8 {
        let next = clean_once(&current, org_mode);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Byte-level entry point: invalid UTF-8 sequences are dropped.
pub fn clean_description_bytes(raw: &[u8], org_mode: bool) -> String {
    clean_description(&String::from_utf8_lossy(raw), org_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn removes_urls() {
        assert_eq!(
            clean_description("Overflow. See https://ex.com/a for details.", false),
            "Overflow. See for details."
        );
        assert_eq!(
            clean_description("Patch at www.example.org/fix now", false),
            "Patch at now"
        );
    }

    #[test]
    fn org_mode_strips_cve_ids() {
        assert_eq!(
            clean_description("CVE-2023-1234: heap overflow", true),
            "heap overflow"
        );
        assert_eq!(
            clean_description("Heap overflow (CVE-2023-1234) in parser", true),
            "Heap overflow in parser"
        );
        // Public mode keeps them.
        assert_eq!(
            clean_description("CVE-2023-1234: heap overflow", false),
            "CVE-2023-1234: heap overflow"
        );
    }

    #[test]
    fn plain_text_unchanged() {
        let t = "A use-after-free in the renderer allows code execution.";
        assert_eq!(clean_description(t, false), t);
    }

    #[test]
    fn strips_markup_and_invalid_bytes() {
        assert_eq!(
            clean_description("<p>Buffer <b>overflow</b></p> in **libfoo**", false),
            "Buffer overflow in libfoo"
        );
        let raw = b"bad \xff\xfe bytes\n\tand tabs";
        assert_eq!(clean_description_bytes(raw, false), "bad bytes and tabs");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,80}", org in any::<bool>()) {
            let once = clean_description(&s, org);
            prop_assert_eq!(clean_description(&once, org), once.clone());
        }

        #[test]
        fn idempotent_on_structured_noise(
            parts in proptest::collection::vec(
                prop_oneof![
                    Just("http://a.b/c".to_string()),
                    Just("CVE-2021-44228:".to_string()),
                    Just("<i>".to_string()),
                    Just("(".to_string()),
                    Just(")".to_string()),
                    Just("**".to_string()),
                    Just(" . ".to_string()),
                    "[a-z]{1,6}",
                ],
                0..16,
            ),
            org in any::<bool>(),
        ) {
            let s = parts.join(" ");
            let once = clean_description(&s, org);
            prop_assert_eq!(clean_description(&once, org), once.clone());
        }
    }
}
