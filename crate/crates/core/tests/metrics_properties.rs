use proptest::prelude::*;

use vexeval_core::cvss::{parse_vector, CvssVector};
use vexeval_core::metrics::{
    emit_report, evaluate_drafts, micro_f1, normalize_words, rouge_l, vector_component_scores,
    MetricReport, VectorPair, NOT_APPLICABLE_LABEL,
};

/// Longest common subsequence by exhaustive recursion with memoisation,
/// independent of the library's rolling-row implementation.
fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    fn go(
        a: &[String],
        b: &[String],
        i: usize,
        j: usize,
        memo: &mut Vec<Vec<Option<usize>>>,
    ) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

fn rouge_oracle(c: &str, r: &str) -> f64 {
    let c = normalize_words(c);
    let r = normalize_words(r);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let l = lcs_oracle(&c, &r) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, rec) = (l / c.len() as f64, l / r.len() as f64);
    2.0 * p * rec / (p + rec)
}

fn words() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        proptest::sample::select(vec![
            "the", "cat", "sat", "on", "mat", "was", "a", "dog", "Update", "fix.",
        ]),
        0..14,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rouge_matches_exhaustive_lcs(a in words(), b in words()) {
        let got = rouge_l(&a, &b);
        prop_assert!((got - rouge_oracle(&a, &b)).abs() < 1e-9);
        prop_assert!((got - rouge_l(&b, &a)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
        if !normalize_words(&a).is_empty() {
            prop_assert_eq!(rouge_l(&a, &a), 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn micro_f1_equals_accuracy(
        pairs in proptest::collection::vec((0u8..5, 0u8..5), 1..60),
    ) {
        let pred: Vec<String> = pairs.iter().map(|p| format!("L{}", p.0)).collect();
        let gold: Vec<String> = pairs.iter().map(|p| format!("L{}", p.1)).collect();
        let accuracy = pairs.iter().filter(|p| p.0 == p.1).count() as f64 / pairs.len() as f64;
        let f1 = micro_f1(&pred, &gold).unwrap().unwrap();
        prop_assert!((f1 - accuracy).abs() < 1e-12);
    }
}

#[test]
fn hand_rouge_fixture() {
    let s = rouge_l("the cat sat on the mat", "the cat was on the mat");
    assert!((s - 0.8333).abs() <= 1e-4);
}

fn v(s: &str) -> Option<CvssVector> {
    Some(parse_vector(s).unwrap())
}

fn three_pairs() -> Vec<VectorPair> {
    vec![
        VectorPair {
            version: vexeval_core::cvss::CvssVersion::V3_1,
            predicted: v("CVSS:3.1/CR:H"),
            gold: v("CVSS:3.1/CR:H/MAV:N"),
        },
        VectorPair {
            version: vexeval_core::cvss::CvssVersion::V3_1,
            predicted: v("CVSS:3.1/MAV:L/MPR:H"),
            gold: v("CVSS:3.1/MAV:L"),
        },
        VectorPair {
            version: vexeval_core::cvss::CvssVersion::V2,
            predicted: v("AV:N/AC:L/Au:N/C:P/I:P/A:P/CDP:L"),
            gold: v("AV:N/AC:L/Au:N/C:P/I:P/A:P/CDP:L/CR:M"),
        },
    ]
}

#[test]
fn three_pair_vector_fixture_matches_hand_counts() {
    let scores = vector_component_scores(&three_pairs());
    let by_name = |n: &str| scores.metrics.iter().find(|m| m.metric == n).unwrap();
    assert_eq!(scores.metrics.len(), 13);
    let expect = [
        ("Confidentiality Requirement", 2.0 / 3.0, 3),
        ("Integrity Requirement", 1.0, 3),
        ("Modified Attack Vector", 0.5, 2),
        ("Modified Privileges Required", 0.5, 2),
        ("Modified Availability", 1.0, 2),
        ("Collateral Damage Potential", 1.0, 1),
        ("Target Distribution", 1.0, 1),
    ];
    for (name, f1, support) in expect {
        let m = by_name(name);
        assert!((m.micro_f1.unwrap() - f1).abs() < 1e-12, "{name}");
        assert_eq!(m.support, support, "{name}");
        assert_eq!(m.confusion.total(), support);
    }
    let mav = &by_name("Modified Attack Vector").confusion;
    assert_eq!(mav.counts["Network"]["XXXX"], 1);
    let total: usize = scores.metrics.iter().map(|m| m.confusion.total()).sum();
    assert_eq!(total, 2 * 11 + 5);
    assert_eq!(scores.exact_match_rate, Some(0.0));

    let identical: Vec<VectorPair> = three_pairs()
        .into_iter()
        .map(|p| VectorPair {
            predicted: p.gold.clone(),
            ..p
        })
        .collect();
    let perfect = vector_component_scores(&identical);
    assert!(perfect.metrics.iter().all(|m| m.micro_f1 == Some(1.0)));
    assert_eq!(perfect.exact_match_rate, Some(1.0));
}

#[test]
fn prediction_in_another_version_is_not_applicable() {
    let pairs = vec![VectorPair {
        version: vexeval_core::cvss::CvssVersion::V3_1,
        predicted: v("AV:N/AC:L/Au:N/C:P/I:P/A:P/CR:H"),
        gold: v("CVSS:3.1/CR:H/MAV:N"),
    }];
    let scores = vector_component_scores(&pairs);
    let mav = scores
        .metrics
        .iter()
        .find(|m| m.metric == "Modified Attack Vector")
        .unwrap();
    assert_eq!(mav.confusion.counts["Network"][NOT_APPLICABLE_LABEL], 1);
    let cr = scores
        .metrics
        .iter()
        .find(|m| m.metric == "Confidentiality Requirement")
        .unwrap();
    assert_eq!(cr.micro_f1, Some(1.0));
}

#[test]
fn empty_input_gives_null_scores_and_stable_files() {
    let report = evaluate_drafts(&[], &[]);
    assert_eq!(report.pairs, 0);
    assert_eq!(report.category_micro_f1, None);
    assert_eq!(report.internal_comment_rouge_l, None);
    assert_eq!(report.vector.exact_match_rate, None);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(
        csv,
        "metric,micro_f1,support\ncategory,,0\njustification,,0\n"
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap())
            .unwrap();
    assert!(json["category_micro_f1"].is_null());
}

#[test]
fn report_files_are_deterministic() {
    let report = MetricReport {
        pairs: 3,
        vector: vector_component_scores(&three_pairs()),
        ..MetricReport::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&report, a.path()).unwrap();
    emit_report(&report, b.path()).unwrap();
    for f in ["metrics.json", "metrics.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
    let csv = std::fs::read_to_string(a.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 + 13);
    assert_eq!(lines[3], "Confidentiality Requirement,0.6666666666666666,3");
    assert_eq!(lines[15], "Target Distribution,1.0,1");
}
