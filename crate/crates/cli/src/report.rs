//! JSON document for `robzero robustness`.

use std::path::Path;

use serde_json::{json, Map, Value};

use robzero::fields::SampledField;
use robzero::filtration::Mode;
use robzero::obstruction::{Persistence, RobustnessReport};

pub const SCHEMA: u32 = 1;

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Simplicial => "simplicial",
        Mode::Cubical => "cubical",
    }
}

/// A persistence level as a number, or one of `below_r0` / `inconclusive`.
pub fn persistence(p: Persistence) -> Value {
    match p {
        Persistence::BelowR0 => json!("below_r0"),
        Persistence::Inconclusive => json!("inconclusive"),
        Persistence::Level { value, .. } | Persistence::Top { value, .. } => json!(value),
    }
}

fn number_or_none(x: Option<f64>) -> Value {
    x.map_or(json!("none"), |v| json!(v))
}

pub fn verdict(r: &RobustnessReport) -> &'static str {
    if matches!(r.r2, Some(Persistence::Inconclusive)) {
        "inconclusive"
    } else if r.lower_bound.is_some() {
        "robust_zero"
    } else {
        "no_guarantee_of_zero"
    }
}

pub fn document(input: &Path, field: &SampledField, r: &RobustnessReport) -> Value {
    let d = &r.diagnostics;
    let timings: Map<String, Value> = d
        .timings
        .iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    let upper = if r.upper_capped {
        json!("capped")
    } else {
        number_or_none(r.upper_bound)
    };
    let mut doc = json!({
        "schema": SCHEMA,
        "input": {
            "path": input.display().to_string(),
            "dims": field.domain.dims(),
            "topology": field.domain.topology().to_string(),
            "codomain": field.n,
            "vertices": field.domain.vertex_count(),
        },
        "verdict": verdict(r),
        "mode": mode_name(r.mode),
        "depth": r.depth.to_string(),
        "start": r.start.to_string(),
        "norm": r.norm.to_string(),
        "alpha": r.alpha,
        "lipschitz_threshold": r.lipschitz_threshold,
        "heuristic": r.heuristic,
        "r0": r.r0,
        "r0_level": r.r0_level,
        "r1": persistence(r.r1),
        "r1_at_top": matches!(r.r1, Persistence::Top { .. }),
        "r2": r.r2.map_or(json!("none"), persistence),
        "r2_at_top": matches!(r.r2, Some(Persistence::Top { .. })),
        "lower_bound": number_or_none(r.lower_bound),
        "upper_bound": upper,
        "nonexistence_robustness": number_or_none(r.nonexistence_robustness),
        "diagnostics": {
            "primary_columns": d.primary_columns,
            "primary_rows": d.primary_rows,
            "primary_columns_used": d.primary_columns_used,
            "primary_rhs_entries": d.primary_rhs_entries,
            "bezout_steps": d.bezout_steps,
            "generators": d.generators,
            "secondary_columns_used": d.secondary_columns_used,
            "secondary_rhs_entries": d.secondary_rhs_entries,
            "timings": timings,
        },
    });
    if r.upper_capped {
        doc["upper_bound_cap"] = json!(r.upper_bound);
    }
    doc
}
