use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use nmc_core::report::AnalysisConfig;

use crate::ConfigArgs;

/// Loads the configuration file, if any, then applies flag overrides.
pub fn load(args: &ConfigArgs) -> anyhow::Result<AnalysisConfig> {
    let mut config = match &args.config {
        Some(path) => from_file(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(v) = &args.line_sizes {
        config.line_sizes = Some(v.clone());
    }
    if let Some(v) = args.max_line {
        config.max_line = v;
    }
    if let Some(v) = &args.entropy_cuts {
        config.entropy_cuts = v.clone();
    }
    if let Some(v) = &args.policies {
        config.policies = v.clone();
    }
    if args.memory_deps {
        config.memory_deps = true;
    }
    if let Some(v) = &args.features {
        config.features = v.clone();
    }
    if let Some(v) = args.components {
        config.components = v;
    }
    Ok(config)
}

fn from_file(path: &Path) -> anyhow::Result<AnalysisConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(anyhow::Error::from),
        Some("json") => serde_json::from_str(&text).map_err(anyhow::Error::from),
        _ => bail!("config {} must end in .toml or .json", path.display()),
    };
    parsed.with_context(|| format!("parsing config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nmc_core::parallelism::DependencyPolicy;
    use std::io::Write;

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(f, "max_line = 64\nentropy_cuts = [0, 4]\npolicies = [\"full\"]").unwrap();
        let args = ConfigArgs {
            config: Some(f.path().to_path_buf()),
            entropy_cuts: Some(vec![0, 2, 5]),
            ..Default::default()
        };
        let c = load(&args).unwrap();
        assert_eq!(c.max_line, 64);
        assert_eq!(c.entropy_cuts, vec![0, 2, 5]);
        assert_eq!(c.policies, vec![DependencyPolicy::Full]);
    }

    #[test]
    fn json_config_and_unknown_keys() {
        let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        write!(f, r#"{{"components": 3}}"#).unwrap();
        let args = ConfigArgs {
            config: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        assert_eq!(load(&args).unwrap().components, 3);

        let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        write!(f, r#"{{"componets": 3}}"#).unwrap();
        let args = ConfigArgs {
            config: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        assert!(load(&args).is_err());
    }
}
