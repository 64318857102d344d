//! Command-line front end: configuration handling and SVG output.

pub mod svg;

use anyhow::{Context, Result};
use qdkit::pipeline::PipelineConfig;
use serde_json::Value;

pub use svg::emit_svg;

/// Seed for every random start, from `QD_SEED` (0 when unset).
pub fn seed_from_env() -> Result<u64> {
    match std::env::var("QD_SEED") {
        Ok(s) => s.trim().parse().with_context(|| format!("QD_SEED={s:?} is not an integer")),
        Err(_) => Ok(0),
    }
}

/// Merges a JSON document into `cfg`, field by field.
pub fn apply_config_doc(cfg: &mut PipelineConfig, text: &str) -> Result<()> {
    let mut base = serde_json::to_value(&*cfg)?;
    let doc: Value = serde_json::from_str(text).context("config document is not JSON")?;
    merge(&mut base, doc);
    *cfg = serde_json::from_value(base).context("config document does not fit the configuration")?;
    Ok(())
}

fn merge(base: &mut Value, doc: Value) {
    match (base, doc) {
        (Value::Object(b), Value::Object(d)) => {
            for (k, v) in d {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, d) => *b = d,
    }
}
