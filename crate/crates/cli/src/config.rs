//! TOML run configuration. Every key is optional; unknown keys are rejected.
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use echo_spotter::aggregation::{MergeKeep, MergePolicy, VoteOptions};
use echo_spotter::judging::{HttpClientConfig, JudgePanel, JudgePromptSpec};
use echo_spotter::{
    JudgeKind, LabelTable, RetryPolicy, SpotConfig, TimestampPolicy, ToleranceGrid, WindowConfig,
};
use serde::Deserialize;

use crate::exit::{Classify, CliResult};

pub const DEFAULT_URL: &str = "http://localhost:8000/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "meta-llama/Llama-3.1-8B-Instruct";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub timestamp: TimestampPolicy,
    pub window: WindowConfig,
    pub merge: MergeSection,
    pub vote: VoteOptions,
    pub judge: JudgeSection,
    pub prompts: PromptPaths,
    pub tolerances: ToleranceGrid,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 4,
            timestamp: TimestampPolicy::default(),
            window: WindowConfig::default(),
            merge: MergeSection::default(),
            vote: VoteOptions::default(),
            judge: JudgeSection::default(),
            prompts: PromptPaths::default(),
            tolerances: ToleranceGrid::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeSection {
    /// Applies to the judge pipeline only; the baseline always merges.
    pub enabled: bool,
    pub delta_s: f64,
    pub keep: MergeKeep,
}

impl Default for MergeSection {
    fn default() -> Self {
        let p = MergePolicy::default();
        Self {
            enabled: true,
            delta_s: p.delta_s,
            keep: p.keep,
        }
    }
}

impl MergeSection {
    pub fn policy(&self) -> MergePolicy {
        MergePolicy {
            delta_s: self.delta_s,
            keep: self.keep,
        }
    }
}

/// Endpoint settings. The key is never read from the file; set
/// `ECHO_SPOTTER_LLM_KEY` instead.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JudgeSection {
    pub url: String,
    pub model: String,
    pub timeout_s: f64,
    pub retry: RetryPolicy,
}

impl Default for JudgeSection {
    fn default() -> Self {
        Self {
            url: DEFAULT_URL.into(),
            model: DEFAULT_MODEL.into(),
            timeout_s: 60.0,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptPaths {
    pub outcome: Option<PathBuf>,
    pub excitement: Option<PathBuf>,
    pub tactical: Option<PathBuf>,
    pub class_map: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub commentary_root: Option<PathBuf>,
    pub labels_root: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .bad_config()?;
        let mut cfg: Self = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .bad_config()?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))
            .bad_config()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.prompts.outcome);
        fix(&mut self.prompts.excitement);
        fix(&mut self.prompts.tactical);
        fix(&mut self.prompts.class_map);
        fix(&mut self.paths.commentary_root);
        fix(&mut self.paths.labels_root);
        fix(&mut self.paths.output_dir);
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.window.validate()?;
        self.tolerances.validate()?;
        if !(self.merge.delta_s > 0.0 && self.merge.delta_s.is_finite()) {
            bail!("merge.delta_s must be positive, got {}", self.merge.delta_s);
        }
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        if self.judge.retry.max_attempts == 0 {
            bail!("judge.retry.max_attempts must be at least 1");
        }
        if !(self.judge.timeout_s > 0.0 && self.judge.timeout_s.is_finite()) {
            bail!(
                "judge.timeout_s must be positive, got {}",
                self.judge.timeout_s
            );
        }
        Ok(())
    }

    pub fn spot_config(&self, jobs: usize) -> SpotConfig {
        SpotConfig {
            window: self.window,
            merge: self.merge.enabled.then(|| self.merge.policy()),
            timestamp: self.timestamp,
            vote: self.vote,
            retry: self.judge.retry.clone(),
            jobs,
        }
    }

    pub fn http_config(&self) -> HttpClientConfig {
        HttpClientConfig {
            url: self.judge.url.clone(),
            model: self.judge.model.clone(),
            api_key: None,
            timeout: Duration::from_secs_f64(self.judge.timeout_s),
        }
        .with_env_overrides()
    }

    pub fn label_table(&self) -> CliResult<LabelTable> {
        match &self.prompts.class_map {
            None => Ok(LabelTable::default()),
            Some(path) => {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("reading class map {}", path.display()))
                    .bad_config()?;
                LabelTable::from_class_map_json(&bytes)
                    .with_context(|| format!("class map {}", path.display()))
                    .bad_config()
            }
        }
    }

    pub fn panel(&self) -> CliResult<JudgePanel> {
        let mut specs = Vec::with_capacity(3);
        for kind in JudgeKind::ALL {
            let path = match kind {
                JudgeKind::Outcome => &self.prompts.outcome,
                JudgeKind::Excitement => &self.prompts.excitement,
                JudgeKind::Tactical => &self.prompts.tactical,
            };
            let spec = match path {
                None => JudgePromptSpec::default_for(kind),
                Some(p) => {
                    let spec = JudgePromptSpec::from_file(p)
                        .with_context(|| format!("{kind} prompt"))
                        .bad_config()?;
                    if spec.kind != kind {
                        return Err(crate::exit::Failure::config(format!(
                            "{} holds a {} prompt, expected {kind}",
                            p.display(),
                            spec.kind
                        )));
                    }
                    spec
                }
            };
            specs.push(spec);
        }
        JudgePanel::new(specs, self.label_table()?).bad_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.window, WindowConfig::default());
        assert_eq!(cfg.merge.policy(), MergePolicy::default());
        assert!(cfg.merge.enabled);
        assert_eq!(cfg.tolerances, ToleranceGrid::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("windw = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[window]\nlength = 3.0").is_err());
        assert!(toml::from_str::<RunConfig>("[judge]\napi_key = \"x\"").is_err());
    }

    #[test]
    fn sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 7
            timestamp = "window_center"
            [window]
            stride_s = 1.0
            [merge]
            delta_s = 5.0
            keep = "max_confidence"
            [vote]
            require_class_agreement = true
            [tolerances]
            tight = [1.0, 2.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.timestamp, TimestampPolicy::WindowCenter);
        assert_eq!(cfg.window.stride_s, 1.0);
        assert_eq!(cfg.window.window_len_s, 10.0);
        assert_eq!(cfg.merge.keep, MergeKeep::MaxConfidence);
        assert!(cfg.vote.require_class_agreement);
        assert_eq!(cfg.tolerances.tight, vec![1.0, 2.0]);
        assert_eq!(cfg.tolerances.loose.len(), 12);
    }

    #[test]
    fn shipped_config_is_the_default_pipeline() {
        let cfg: RunConfig = toml::from_str(include_str!("../../../configs/table1.toml")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.window, WindowConfig::default());
        assert_eq!(cfg.merge.policy(), MergePolicy::default());
        assert_eq!(cfg.tolerances, ToleranceGrid::default());
        assert_eq!(cfg.timestamp, TimestampPolicy::AnchorSentenceStart);
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = |s: &str| toml::from_str::<RunConfig>(s).unwrap().validate().is_err();
        assert!(bad("[window]\nstride_s = 20.0"));
        assert!(bad("[merge]\ndelta_s = 0.0"));
        assert!(bad("jobs = 0"));
        assert!(bad("[tolerances]\nloose = [5.0, 1.0]"));
    }
}
