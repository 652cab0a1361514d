//! Versioned JSON reports.
//!
//! Floats are rounded to 12 significant digits before serialization so that
//! identical runs produce byte-identical output.

use serde::Serialize;
use serde_json::{json, Value};

use crate::detect::{CorrectionResult, DiagnosticsReport};
use crate::graph::{Coordinate, WeightedDigraph};
use crate::matrix::DeviationSeries;
use crate::spectral::Spectrum;

pub const SCHEMA: &str = "loopwatch-report/1";

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest form of the 12-digit rounding; exponent notation outside
/// `[1e-4, 1e15)`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && r.is_finite() && !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Rounds every float in a JSON tree.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round_sig(f)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    round_floats(serde_json::to_value(t).expect("report types serialize"))
}

/// `{"z": .., "series": [{"r", "norm", "norm_l2", "diag"}, ..]}`
pub fn series_json(s: &DeviationSeries) -> Value {
    to_value(s)
}

pub fn diagnostics_json(r: &DiagnosticsReport) -> Value {
    let ranking: Vec<Value> = r
        .vertex_ranking
        .iter()
        .map(|(v, d)| json!({"vertex": v, "deviation": d}))
        .collect();
    round_floats(json!({
        "verdict": r.verdict,
        "z": r.series.z,
        "tau": r.tau,
        "eps_clean": r.eps_clean,
        "first_failing_r": r.first_failing_r,
        "series": series_json(&r.series)["series"],
        "vertex_ranking": ranking,
        "spectrum_deviation": r.spectrum_deviation,
        "spectrum_non_real": r.spectrum_non_real,
    }))
}

/// `{"z": .., "eigenvalues": [..], "deviation_from_z1": ..}`
pub fn spectrum_json(s: &Spectrum, deviation_from_z1: f64) -> Value {
    let multiplicities: Vec<Value> = s
        .multiplicities
        .iter()
        .map(|(v, m)| json!({"value": v, "multiplicity": m}))
        .collect();
    round_floats(json!({
        "z": s.z,
        "eigenvalues": s.eigenvalues,
        "imaginary": s.imaginary,
        "multiplicities": multiplicities,
        "non_real": s.non_real,
        "deviation_from_z1": deviation_from_z1,
    }))
}

pub fn network_json(g: &WeightedDigraph) -> Value {
    let arcs: Vec<Value> = g
        .arcs()
        .iter()
        .map(|a| json!({"from": a.tail, "to": a.head, "w": a.weight}))
        .collect();
    round_floats(json!({ "vertices": g.vertices(), "arcs": arcs }))
}

pub fn correction_json(g: &WeightedDigraph, c: &CorrectionResult) -> Value {
    let suspects: Vec<Value> = c
        .suspects
        .iter()
        .zip(&c.x_star)
        .map(|(&i, dx)| {
            let before = &g.arcs()[i];
            json!({
                "from": before.tail,
                "to": before.head,
                "weight": before.weight,
                "correction": dx,
                "corrected_weight": c.corrected.arcs()[i].weight,
            })
        })
        .collect();
    round_floats(json!({
        "z": c.z,
        "r": c.r,
        "suspects": suspects,
        "x_star": c.x_star,
        "e_zero": c.e_zero,
        "e_min": c.e_min,
        "iterations": c.iterations,
        "converged": c.converged,
        "numeric": c.numeric,
        "pre_report": diagnostics_json(&c.pre_report),
        "post_report": diagnostics_json(&c.post_report),
    }))
}

/// One analysed component of one coordinate.
pub fn section(coordinate: Option<Coordinate>, component: usize, vertices: &[String], body: Value) -> Value {
    json!({
        "coordinate": coordinate.map(|c| c.to_string()),
        "component": component,
        "vertices": vertices,
        "result": body,
    })
}

/// Top-level envelope.
pub fn envelope(command: &str, verdict: Option<&str>, sections: Vec<Value>) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "verdict": verdict,
        "sections": sections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_stable() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(-0.0), 0.0);
        assert_eq!(round_sig(1234.567890123456), 1234.56789012);
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(4.440892098500626e-16), "4.4408920985e-16");
        assert_eq!(fmt_sig(-0.00025), "-0.00025");
        assert_eq!(round_floats(json!({"a": [1.00000000000001, 3]})), json!({"a": [1.0, 3]}));
    }
}
