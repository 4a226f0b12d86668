//! Base / temporal / environmental scores from the FIRST equations.

use serde::{Deserialize, Serialize};

use super::metrics::{metric_table, MetricGroup};
use super::{CvssError, CvssVector, CvssVersion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBundle {
    pub base: f64,
    pub temporal: Option<f64>,
    pub environmental: Option<f64>,
}

impl ScoreBundle {
    /// Environmental score when present, otherwise temporal, otherwise base.
    pub fn most_specific(&self) -> f64 {
        self.environmental.or(self.temporal).unwrap_or(self.base)
    }
}

/// Scores a vector. Temporal and environmental scores are only produced when
/// at least one metric of that group is defined.
pub fn score(vector: &CvssVector) -> Result<ScoreBundle, CvssError> {
    for def in metric_table(vector.version())
        .iter()
        .filter(|d| d.group == MetricGroup::Base)
    {
        if vector.code(def.abbrev).is_none() {
            return Err(CvssError::MissingBaseMetric(def.abbrev.to_string()));
        }
    }
    Ok(match vector.version() {
        CvssVersion::V2 => score_v2(vector),
        version => score_v3(vector, version),
    })
}

/// Smallest one-decimal number >= `x`, computed on a 1e-5 integer grid so that
/// binary floating point noise does not push exact tenths up a step.
fn round_up(x: f64) -> f64 {
    let scaled = (x * 100_000.0).round() as i64;
    let tenths = if scaled % 10_000 == 0 {
        scaled / 10_000
    } else {
        scaled / 10_000 + 1
    };
    tenths as f64 / 10.0
}

/// Round half away from zero to one decimal, tolerant of float noise at the
/// half-way point.
fn round_half_up(x: f64) -> f64 {
    let scaled = (x.abs() * 10.0 * 100_000.0).round() / 100_000.0;
    let tenths = (scaled + 0.5).floor();
    x.signum() * tenths / 10.0
}

fn weight_v3(abbrev: &str, code: &str, scope_changed: bool) -> f64 {
    match (abbrev, code) {
        ("AV" | "MAV", "N") => 0.85,
        ("AV" | "MAV", "A") => 0.62,
        ("AV" | "MAV", "L") => 0.55,
        ("AV" | "MAV", "P") => 0.2,
        ("AC" | "MAC", "L") => 0.77,
        ("AC" | "MAC", "H") => 0.44,
        ("PR" | "MPR", "N") => 0.85,
        ("PR" | "MPR", "L") => {
            if scope_changed {
                0.68
            } else {
                0.62
            }
        }
        ("PR" | "MPR", "H") => {
            if scope_changed {
                0.5
            } else {
                0.27
            }
        }
        ("UI" | "MUI", "N") => 0.85,
        ("UI" | "MUI", "R") => 0.62,
        ("C" | "I" | "A" | "MC" | "MI" | "MA", "H") => 0.56,
        ("C" | "I" | "A" | "MC" | "MI" | "MA", "L") => 0.22,
        ("C" | "I" | "A" | "MC" | "MI" | "MA", "N") => 0.0,
        ("E", "F") => 0.97,
        ("E", "P") => 0.94,
        ("E", "U") => 0.91,
        ("RL", "W") => 0.97,
        ("RL", "T") => 0.96,
        ("RL", "O") => 0.95,
        ("RC", "R") => 0.96,
        ("RC", "U") => 0.92,
        ("CR" | "IR" | "AR", "H") => 1.5,
        ("CR" | "IR" | "AR", "L") => 0.5,
        // Not defined, E:H, RL:U, RC:C and requirement M all weigh 1.
        _ => 1.0,
    }
}

fn score_v3(v: &CvssVector, version: CvssVersion) -> ScoreBundle {
    let base_code = |k: &str| v.code(k).expect("base metrics checked");
    // Modified metrics fall back to their base counterpart when undefined.
    let modified = |m: &str, k: &str| v.code(m).unwrap_or_else(|| base_code(k));

    let changed = base_code("S") == "C";
    let w = |k: &str| weight_v3(k, base_code(k), changed);
    let iss = 1.0 - (1.0 - w("C")) * (1.0 - w("I")) * (1.0 - w("A"));
    let impact = if changed {
        7.52 * (iss - 0.029) - 3.25 * (iss - 0.02).powi(15)
    } else {
        6.42 * iss
    };
    let exploitability = 8.22 * w("AV") * w("AC") * w("PR") * w("UI");
    let base = if impact <= 0.0 {
        0.0
    } else if changed {
        round_up((1.08 * (impact + exploitability)).min(10.0))
    } else {
        round_up((impact + exploitability).min(10.0))
    };

    let t = |k: &str| weight_v3(k, v.code(k).unwrap_or("X"), false);
    let temporal_factor = t("E") * t("RL") * t("RC");
    let temporal = v
        .has_defined_in(MetricGroup::Temporal)
        .then(|| round_up(base * temporal_factor));

    let environmental = v.has_defined_in(MetricGroup::Environmental).then(|| {
        let m_changed = modified("MS", "S") == "C";
        let mw = |m: &str, k: &str| weight_v3(m, modified(m, k), m_changed);
        let req = |k: &str| weight_v3(k, v.code(k).unwrap_or("X"), false);
        let miss = (1.0
            - (1.0 - req("CR") * mw("MC", "C"))
                * (1.0 - req("IR") * mw("MI", "I"))
                * (1.0 - req("AR") * mw("MA", "A")))
        .min(0.915);
        let m_impact = if !m_changed {
            6.42 * miss
        } else if version == CvssVersion::V3_0 {
            7.52 * (miss - 0.029) - 3.25 * (miss - 0.02).powi(15)
        } else {
            7.52 * (miss - 0.029) - 3.25 * (miss * 0.9731 - 0.02).powi(13)
        };
        let m_exploitability =
            8.22 * mw("MAV", "AV") * mw("MAC", "AC") * mw("MPR", "PR") * mw("MUI", "UI");
        if m_impact <= 0.0 {
            0.0
        } else if m_changed {
            round_up(round_up((1.08 * (m_impact + m_exploitability)).min(10.0)) * temporal_factor)
        } else {
            round_up(round_up((m_impact + m_exploitability).min(10.0)) * temporal_factor)
        }
    });

    ScoreBundle {
        base,
        temporal,
        environmental,
    }
}

fn weight_v2(abbrev: &str, code: Option<&str>) -> f64 {
    match (abbrev, code) {
        ("AV", Some("L")) => 0.395,
        ("AV", Some("A")) => 0.646,
        ("AV", Some("N")) => 1.0,
        ("AC", Some("H")) => 0.35,
        ("AC", Some("M")) => 0.61,
        ("AC", Some("L")) => 0.71,
        ("Au", Some("M")) => 0.45,
        ("Au", Some("S")) => 0.56,
        ("Au", Some("N")) => 0.704,
        ("C" | "I" | "A", Some("N")) => 0.0,
        ("C" | "I" | "A", Some("P")) => 0.275,
        ("C" | "I" | "A", Some("C")) => 0.660,
        ("E", Some("U")) => 0.85,
        ("E", Some("POC")) => 0.9,
        ("E", Some("F")) => 0.95,
        ("RL", Some("OF")) => 0.87,
        ("RL", Some("TF")) => 0.90,
        ("RL", Some("W")) => 0.95,
        ("RC", Some("UC")) => 0.90,
        ("RC", Some("UR")) => 0.95,
        ("CDP", None | Some("N")) => 0.0,
        ("CDP", Some("L")) => 0.1,
        ("CDP", Some("LM")) => 0.3,
        ("CDP", Some("MH")) => 0.4,
        ("CDP", Some("H")) => 0.5,
        ("TD", Some("N")) => 0.0,
        ("TD", Some("L")) => 0.25,
        ("TD", Some("M")) => 0.75,
        ("CR" | "IR" | "AR", Some("L")) => 0.5,
        ("CR" | "IR" | "AR", Some("H")) => 1.51,
        _ => 1.0,
    }
}

fn score_v2(v: &CvssVector) -> ScoreBundle {
    let w = |k: &str| weight_v2(k, v.code(k));
    let exploitability = 20.0 * w("AV") * w("AC") * w("Au");
    let base_equation = |impact: f64| {
        let f_impact = if impact == 0.0 { 0.0 } else { 1.176 };
        round_half_up(((0.6 * impact) + (0.4 * exploitability) - 1.5) * f_impact)
    };

    let impact = 10.41 * (1.0 - (1.0 - w("C")) * (1.0 - w("I")) * (1.0 - w("A")));
    let base = base_equation(impact).max(0.0);
    let temporal_factor = w("E") * w("RL") * w("RC");
    let temporal = v
        .has_defined_in(MetricGroup::Temporal)
        .then(|| round_half_up(base * temporal_factor).max(0.0));

    let environmental = v.has_defined_in(MetricGroup::Environmental).then(|| {
        let adjusted_impact = (10.41
            * (1.0
                - (1.0 - w("C") * w("CR")) * (1.0 - w("I") * w("IR")) * (1.0 - w("A") * w("AR"))))
        .min(10.0);
        let adjusted_temporal = round_half_up(base_equation(adjusted_impact) * temporal_factor);
        round_half_up((adjusted_temporal + (10.0 - adjusted_temporal) * w("CDP")) * w("TD"))
            .max(0.0)
    });

    ScoreBundle {
        base,
        temporal,
        environmental,
    }
}
