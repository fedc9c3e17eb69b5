//! Scenario resolution: load a TOML file or a bundled preset, splice in
//! `--set` dotted-path overrides, then deserialize and validate.
//!
//! Overrides edit the TOML value tree before deserialization, so a bad
//! override fails with exactly the message the same mistake in a config
//! file would produce.

use std::fs;

use otaform_core::presets;
use otaform_core::ScenarioConfig;
use toml::Value;

use crate::{CliError, ConfigArgs};

pub fn resolve(args: &ConfigArgs) -> Result<ScenarioConfig, CliError> {
    let mut tree = base_tree(args)?;
    for raw in &args.set {
        apply_set(&mut tree, raw)?;
    }
    if let Some(seed) = args.seed {
        // TOML integers are signed; seeds beyond i64 cannot be written back.
        let value = i64::try_from(seed).map_err(|_| {
            CliError::Invalid(format!("--seed {seed} exceeds the TOML integer range"))
        })?;
        tree.as_table_mut()
            .expect("base_tree always yields a table")
            .insert("seed".to_string(), Value::Integer(value));
    }
    let config: ScenarioConfig = tree
        .try_into()
        .map_err(|e| CliError::Invalid(format!("config: {e}")))?;
    config
        .validate()
        .map_err(|e| CliError::Invalid(format!("config: {e}")))?;
    Ok(config)
}

fn base_tree(args: &ConfigArgs) -> Result<Value, CliError> {
    match (&args.config, &args.preset) {
        (Some(_), Some(_)) => Err(CliError::Invalid(
            "give either --config or --preset, not both".to_string(),
        )),
        (None, None) => Err(CliError::Invalid(format!(
            "a scenario is required: --config <path> or --preset <{}>",
            presets::PRESET_NAMES.join("|")
        ))),
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            text.parse::<Value>()
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
        }
        (None, Some(name)) => {
            let config = presets::by_name(name).ok_or_else(|| {
                CliError::Invalid(format!(
                    "unknown preset '{name}'; available: {}",
                    presets::PRESET_NAMES.join(", ")
                ))
            })?;
            Ok(Value::try_from(config).expect("presets serialize to TOML"))
        }
    }
}

fn apply_set(tree: &mut Value, raw: &str) -> Result<(), CliError> {
    let (path, literal) = raw.split_once('=').ok_or_else(|| {
        CliError::Invalid(format!("override '{raw}' is not of the form key=value"))
    })?;
    let path = path.trim();
    let segments: Vec<&str> = path.split('.').collect();
    if path.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Invalid(format!(
            "override '{raw}' has an empty key segment"
        )));
    }
    let mut cursor = &mut *tree;
    for segment in &segments[..segments.len() - 1] {
        let table = cursor.as_table_mut().ok_or_else(|| {
            CliError::Invalid(format!("override '{path}': '{segment}' is not a table"))
        })?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| Value::Table(toml::Table::new()));
    }
    let leaf = segments[segments.len() - 1];
    let table = cursor.as_table_mut().ok_or_else(|| {
        CliError::Invalid(format!(
            "override '{path}': parent of '{leaf}' is not a table"
        ))
    })?;
    table.insert(leaf.to_string(), parse_literal(literal.trim()));
    Ok(())
}

/// Parse the right-hand side as a TOML literal; anything that does not parse
/// as one (a bare word like `pool`) is taken as a string.
fn parse_literal(raw: &str) -> Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").expect("snippet defines v"),
        Err(_) => Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(preset: &str, set: &[&str], seed: Option<u64>) -> ConfigArgs {
        ConfigArgs {
            config: None,
            preset: Some(preset.to_string()),
            set: set.iter().map(|s| s.to_string()).collect(),
            seed,
        }
    }

    #[test]
    fn literals_parse_as_their_toml_types() {
        assert_eq!(parse_literal("2.5"), Value::Float(2.5));
        assert_eq!(parse_literal("7"), Value::Integer(7));
        assert_eq!(parse_literal("true"), Value::Boolean(true));
        assert_eq!(parse_literal("\"pool\""), Value::String("pool".to_string()));
        assert_eq!(parse_literal("pool"), Value::String("pool".to_string()));
        let arr = parse_literal("[[0.0, 0.0], [1.0, 0.0]]");
        assert!(arr.is_array());
    }

    #[test]
    fn nested_paths_descend_and_create_tables() {
        let mut tree = Value::Table(toml::Table::new());
        apply_set(&mut tree, "agents.gain_a=2.5").unwrap();
        apply_set(&mut tree, "agents.n=4").unwrap();
        assert_eq!(tree["agents"]["gain_a"], Value::Float(2.5));
        assert_eq!(tree["agents"]["n"], Value::Integer(4));
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        let mut tree = Value::Table(toml::Table::new());
        assert!(apply_set(&mut tree, "no_equals_sign").is_err());
        assert!(apply_set(&mut tree, "a..b=1").is_err());
        assert!(apply_set(&mut tree, "=1").is_err());
        apply_set(&mut tree, "seed=1").unwrap();
        // seed is now an integer leaf, not a table to descend into.
        assert!(apply_set(&mut tree, "seed.sub=1").is_err());
    }

    #[test]
    fn preset_with_overrides_resolves_and_revalidates() {
        let config = resolve(&args("hexagon6", &["agents.gain_a=2.0"], Some(99))).unwrap();
        assert_eq!(config.agents.gain_a, 2.0);
        assert_eq!(config.seed, 99);

        let err = resolve(&args("hexagon6", &["agents.gain_a=-1.0"], None)).unwrap_err();
        assert!(err.message().contains("agents.gain_a"));

        // Unknown keys fail at deserialization, same as in a file.
        let err = resolve(&args("hexagon6", &["agents.typo=1"], None)).unwrap_err();
        assert!(err.message().contains("typo"));
    }

    #[test]
    fn scenario_source_is_mandatory_and_unique() {
        let err = resolve(&ConfigArgs {
            config: None,
            preset: None,
            set: vec![],
            seed: None,
        })
        .unwrap_err();
        assert!(err.message().contains("--config"));

        let err = resolve(&ConfigArgs {
            config: Some("x.toml".into()),
            preset: Some("hexagon6".to_string()),
            set: vec![],
            seed: None,
        })
        .unwrap_err();
        assert!(err.message().contains("not both"));

        let err = resolve(&args("nonagon9", &[], None)).unwrap_err();
        assert!(err.message().contains("hexagon6"));
    }
}
