#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use vexeval_core::corpus::{EvaluationKey, VexCategory, VexJustification};
use vexeval_core::cvss::{expand_to_text, metric_table, CvssVector, CvssVersion, MetricGroup};
use vexeval_core::inference::EvaluationDraft;

/// Builds a vector from per-metric choices: `None` omits the metric, `Some(k)`
/// picks value `k % (values + 1)`, where the extra slot is "not defined".
pub fn vector_from_choices(
    version: CvssVersion,
    choices: &[Option<u8>],
    full_base: bool,
) -> CvssVector {
    let mut v = CvssVector::new(version);
    let nd = vexeval_core::cvss::not_defined_code(version);
    for (def, choice) in metric_table(version).iter().zip(choices.iter().cycle()) {
        let is_base = def.group == MetricGroup::Base;
        let choice = match (choice, full_base && is_base) {
            (None, false) => continue,
            (None, true) => Some(0),
            (c, _) => *c,
        };
        let k = choice.unwrap() as usize;
        let slots = if full_base && is_base {
            def.values.len()
        } else {
            def.values.len() + 1
        };
        let idx = k % slots;
        let code = if idx == def.values.len() {
            nd
        } else {
            def.values[idx].code
        };
        v.set(def.abbrev, code).unwrap();
    }
    v
}

pub fn arb_version() -> impl Strategy<Value = CvssVersion> {
    prop_oneof![
        Just(CvssVersion::V2),
        Just(CvssVersion::V3_0),
        Just(CvssVersion::V3_1)
    ]
}

pub fn arb_vector() -> impl Strategy<Value = CvssVector> {
    (
        arb_version(),
        proptest::collection::vec(proptest::option::of(any::<u8>()), 22),
    )
        .prop_map(|(version, choices)| {
            // Unprefixed v2 strings are only unambiguous with the full base group.
            vector_from_choices(version, &choices, version == CvssVersion::V2)
        })
}

pub fn random_vector<R: Rng>(rng: &mut R, version: CvssVersion, full_base: bool) -> CvssVector {
    let choices: Vec<Option<u8>> = (0..22)
        .map(|_| {
            if rng.gen_bool(0.3) {
                None
            } else {
                Some(rng.gen())
            }
        })
        .collect();
    vector_from_choices(version, &choices, full_base)
}

pub fn arb_justification_text() -> impl Strategy<Value = (VexJustification, Option<String>)> {
    prop_oneof![
        proptest::sample::select(VexJustification::ALL.to_vec()).prop_map(|j| (j, None)),
        "[a-z]{3,8}( [a-z]{3,8}){0,3}".prop_map(|t| (VexJustification::NA, Some(t))),
    ]
}

pub fn arb_draft() -> impl Strategy<Value = EvaluationDraft> {
    (
        proptest::option::of(proptest::sample::select(VexCategory::ALL.to_vec())),
        arb_justification_text(),
        prop_oneof![Just(String::new()), "[a-z ]{1,20}"],
        prop_oneof![Just(String::new()), "[a-z ]{1,20}"],
        arb_vector(),
        0u8..4,
    )
        .prop_map(
            |(category, (justification, unrecognized), internal, customer, vector, vt)| {
                let version = vector.version();
                let mut d = EvaluationDraft::new(EvaluationKey::new("a", "n"), version, None);
                d.vex_category = category;
                d.vex_justification = justification;
                d.unrecognized_justification = unrecognized;
                d.internal_comment = internal;
                d.customer_comment = customer;
                d.vector_text = match vt {
                    0 => None,
                    1 => Some(expand_to_text(&vector, &[MetricGroup::Environmental], true)),
                    2 => Some(expand_to_text(&vector, &[MetricGroup::Base], false)),
                    _ => Some("Scope is Sideways.".into()),
                };
                if vt != 0 {
                    d.vector = Some(vector);
                }
                if version == CvssVersion::V2 {
                    d.notification_vector = None;
                }
                d
            },
        )
}
