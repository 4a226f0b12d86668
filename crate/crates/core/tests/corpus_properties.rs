use proptest::prelude::*;
use vexeval_core::corpus::{
    match_common_components, Asset, Component, Notification, VexCategory, VexJustification,
};

const NAMES: &[&str] = &[
    "dav1d", "DAV1D", "zlib", "z-lib", "openssl", "libxml2", "curl",
];
const VERSIONS: &[&str] = &["All Versions", "1.0", "1.1", "2.0", "1.0, 2.0", "*", "v1.1"];

fn arb_component() -> impl Strategy<Value = Component> {
    (0..NAMES.len(), 0..VERSIONS.len())
        .prop_map(|(n, v)| Component::new(NAMES[n], None, VERSIONS[v]))
}

fn asset(components: Vec<Component>) -> Asset {
    Asset {
        asset_id: "a".into(),
        product_name_version: "p".into(),
        software_name_version: "s".into(),
        sub_organization: "o".into(),
        components,
    }
}

fn notification(components: Vec<Component>) -> Notification {
    Notification {
        notification_id: "n".into(),
        description: "d".into(),
        affected_components: components,
        base_temporal_vector: None,
        base_temporal_score: None,
        cve_ids: vec![],
        cwe_ids: vec![],
    }
}

/// Explicit version list for a spec, or `None` for the wildcard.
fn expand(spec: &str) -> Option<Vec<&'static str>> {
    match spec {
        "All Versions" | "*" => None,
        "1.0" => Some(vec!["1.0"]),
        "1.1" | "v1.1" => Some(vec!["1.1"]),
        "2.0" => Some(vec!["2.0"]),
        "1.0, 2.0" => Some(vec!["1.0", "2.0"]),
        other => panic!("unexpected spec {other}"),
    }
}

fn canonical_name(name: &str) -> String {
    name.to_lowercase().replace('-', "")
}

fn oracle(a: &Asset, n: &Notification) -> Vec<Component> {
    a.components
        .iter()
        .filter(|c| {
            n.affected_components.iter().any(|m| {
                canonical_name(&c.name) == canonical_name(&m.name)
                    && match (expand(&c.version_spec), expand(&m.version_spec)) {
                        (Some(x), Some(y)) => x.iter().any(|v| y.contains(v)),
                        _ => true,
                    }
            })
        })
        .cloned()
        .collect()
}

proptest! {
    #[test]
    fn matching_agrees_with_pairwise_oracle(
        ac in proptest::collection::vec(arb_component(), 0..6),
        nc in proptest::collection::vec(arb_component(), 0..6),
    ) {
        let a = asset(ac);
        let n = notification(nc);
        prop_assert_eq!(match_common_components(&a, &n), oracle(&a, &n));
    }

    #[test]
    fn matching_is_subset_and_permutation_stable(
        ac in proptest::collection::vec(arb_component(), 0..6),
        nc in proptest::collection::vec(arb_component(), 0..6).prop_shuffle(),
    ) {
        let a = asset(ac);
        let mut n = notification(nc);
        let got = match_common_components(&a, &n);
        for c in &got {
            prop_assert!(a.components.contains(c));
        }
        n.affected_components.reverse();
        prop_assert_eq!(match_common_components(&a, &n), got);
    }
}

#[test]
fn enumerations_are_a_wire_bijection() {
    for c in VexCategory::ALL {
        let wire = serde_json::to_value(c).unwrap();
        assert_eq!(serde_json::from_value::<VexCategory>(wire).unwrap(), c);
    }
    let wires: std::collections::BTreeSet<String> = VexJustification::ALL
        .iter()
        .map(|j| serde_json::to_string(j).unwrap())
        .collect();
    assert_eq!(wires.len(), VexJustification::ALL.len());
}
