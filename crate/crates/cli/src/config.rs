//! Settings resolution: command-line flags, then environment, then the config file.

use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use legoc_core::splitter::PolicyKind;
use legoc_core::translation::{LlmConfig, Mode};
use legoc_core::SplitConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Ref,
    Llm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Target {
    #[value(name = "x86_64")]
    #[serde(rename = "x86_64")]
    X86_64,
}

/// Contents of a `--config` TOML file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub backend: Option<BackendKind>,
    pub target: Option<Target>,
    pub max_retries: Option<u32>,
    pub split_threshold: Option<usize>,
    pub expr_complexity_limit: Option<usize>,
    pub split_policy: Option<PolicyKind>,
    pub timeout_secs: Option<u64>,
    pub jobs: Option<usize>,
    pub llm: Option<LlmConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Flag or environment values; `None` defers to the file, then the default.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Translation mode.
    #[arg(long, env = "LEGOC_MODE")]
    pub mode: Option<Mode>,
    /// Translation backend.
    #[arg(long, value_enum, env = "LEGOC_BACKEND")]
    pub backend: Option<BackendKind>,
    #[arg(long, value_enum, env = "LEGOC_TARGET")]
    pub target: Option<Target>,
    /// Attempts in the repair loop.
    #[arg(long, env = "LEGOC_MAX_RETRIES")]
    pub max_retries: Option<u32>,
    /// Token count above which control blocks are split.
    #[arg(long, env = "LEGOC_SPLIT_THRESHOLD")]
    pub split_threshold: Option<usize>,
    /// Wall-clock limit for each test process.
    #[arg(long, env = "LEGOC_TIMEOUT_SECS")]
    pub timeout_secs: Option<u64>,
    /// Parallel pipelines in batch mode.
    #[arg(long, env = "LEGOC_JOBS")]
    pub jobs: Option<usize>,
    /// TOML file with defaults for any of the above.
    #[arg(long, env = "LEGOC_CONFIG")]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub mode: Mode,
    pub backend: BackendKind,
    pub target: Target,
    pub max_retries: u32,
    pub split: SplitConfig,
    pub timeout_secs: u64,
    pub jobs: usize,
    pub llm: LlmConfig,
}

impl Settings {
    pub fn resolve(flags: &Overrides, file: FileConfig) -> anyhow::Result<Settings> {
        let split_defaults = SplitConfig::default();
        let split = SplitConfig {
            split_threshold: flags
                .split_threshold
                .or(file.split_threshold)
                .unwrap_or(split_defaults.split_threshold),
            expr_complexity_limit: file.expr_complexity_limit.unwrap_or(split_defaults.expr_complexity_limit),
            policy: file.split_policy.unwrap_or(split_defaults.policy),
        };
        anyhow::ensure!(split.split_threshold > 0, "split threshold must be positive");
        Ok(Settings {
            mode: flags.mode.or(file.mode).unwrap_or(Mode::Lego),
            backend: flags.backend.or(file.backend).unwrap_or(BackendKind::Ref),
            target: flags.target.or(file.target).unwrap_or(Target::X86_64),
            max_retries: flags.max_retries.or(file.max_retries).unwrap_or(legoc_core::verify::DEFAULT_K).max(1),
            split,
            timeout_secs: flags.timeout_secs.or(file.timeout_secs).unwrap_or(10).max(1),
            jobs: flags.jobs.or(file.jobs).unwrap_or(1).max(1),
            llm: file.llm.unwrap_or_default().with_env(),
        })
    }

    pub fn load(flags: &Overrides) -> anyhow::Result<Settings> {
        Settings::resolve(flags, FileConfig::load(flags.config.as_deref())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_and_file_beats_defaults() {
        let file: FileConfig = toml::from_str("mode = \"direct\"\nmax_retries = 2\nsplit_threshold = 50\n").unwrap();
        let flags = Overrides {
            max_retries: Some(7),
            ..Overrides::default()
        };
        let s = Settings::resolve(&flags, file).unwrap();
        assert_eq!(s.mode, Mode::Direct);
        assert_eq!(s.max_retries, 7);
        assert_eq!(s.split.split_threshold, 50);
        assert_eq!(s.backend, BackendKind::Ref);
        assert_eq!(s.timeout_secs, 10);
    }

    #[test]
    fn defaults() {
        let s = Settings::resolve(&Overrides::default(), FileConfig::default()).unwrap();
        assert_eq!((s.mode, s.max_retries, s.split.split_threshold), (Mode::Lego, 5, 400));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }
}
