//! Single-prompt scoring baseline: one call per feature, name and task only.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{RankedFeature, Ranking};
use crate::debate::{parse_agent_output, DebateConfig, FailurePolicy, ParseStatus, NEUTRAL_SCORE};
use crate::features::FeatureMetadata;
use crate::llm::{ChatBackend, ChatRequest, ScriptKey};
use crate::par;
use crate::{Error, Result};

/// Role name used as the scripted-backend key for baseline calls.
pub const SELECTOR_ROLE: &str = "Selector";

const SYSTEM: &str = "You are a feature-selection assistant. Given a prediction task and the name \
of one input feature, estimate how important that feature is for the task.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub feature: String,
    pub feature_index: usize,
    pub prompt_text: String,
    pub raw_response: String,
    pub score: f64,
    pub parse_status: ParseStatus,
    pub flags: Vec<String>,
}

fn user_prompt(feature: &str, task: &str) -> String {
    format!(
        "Task: {task}\nFeature: \"{feature}\"\n\nRate the importance of this feature for the task.\n\n{}",
        crate::debate::prompt_contract()
    )
}

/// Scores every feature with a single prompt each.
pub fn score_single_prompt<B: ChatBackend + ?Sized>(
    features: &[FeatureMetadata],
    task_description: &str,
    backend: &B,
    config: &DebateConfig,
) -> Result<Vec<BaselineRecord>> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no features to score".into()));
    }
    par::try_map_with_threads(features, config.parallelism, |_, f| {
        let user = user_prompt(&f.name, task_description);
        let mut req = ChatRequest::new(config.model.clone(), SYSTEM, user.clone())
            .with_key(ScriptKey::new(SELECTOR_ROLE, f.name.clone()));
        req.temperature = config.temperature;
        req.max_tokens = config.max_tokens;
        req.request_seed = config.request_seed;
        let mut flags = Vec::new();
        let (raw, parsed) = match backend.complete(&req) {
            Ok(r) => {
                let p = parse_agent_output(&r.text);
                (r.text, Some(p))
            }
            Err(e) => {
                if config.failure_policy == FailurePolicy::Fast {
                    return Err(e);
                }
                warn!("{}: baseline call failed: {e}", f.name);
                flags.push("backend_failure".to_string());
                (String::new(), None)
            }
        };
        let (score, status) = match parsed {
            Some(p) => {
                match p.status {
                    ParseStatus::Fallback => flags.push("parse_fallback".into()),
                    ParseStatus::Failed => {
                        if config.failure_policy == FailurePolicy::Fast {
                            return Err(Error::ParseFailure {
                                role: SELECTOR_ROLE.into(),
                                feature: f.name.clone(),
                            });
                        }
                        flags.push("parse_failed".into());
                    }
                    ParseStatus::Clean => {}
                }
                (p.score.unwrap_or(NEUTRAL_SCORE), p.status)
            }
            None => (NEUTRAL_SCORE, ParseStatus::Failed),
        };
        Ok(BaselineRecord {
            feature: f.name.clone(),
            feature_index: f.index,
            prompt_text: format!("{SYSTEM}\n\n{user}"),
            raw_response: raw,
            score,
            parse_status: status,
            flags,
        })
    })
}

/// Ranks features by their single-prompt scores, using the same ordering
/// rule as the debate ranking.
pub fn llm_select_score<B: ChatBackend + ?Sized>(
    features: &[FeatureMetadata],
    task_description: &str,
    backend: &B,
    config: &DebateConfig,
    method_id: &str,
    provenance: &str,
) -> Result<(Ranking, Vec<BaselineRecord>)> {
    let records = score_single_prompt(features, task_description, backend, config)?;
    let ranking = Ranking::from_scores(
        method_id,
        provenance,
        records
            .iter()
            .map(|r| RankedFeature {
                feature: r.feature.clone(),
                score: r.score,
                original_index: r.feature_index,
            })
            .collect(),
    );
    Ok((ranking, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;

    fn feats(n: usize) -> Vec<FeatureMetadata> {
        (0..n)
            .map(|i| FeatureMetadata {
                name: format!("f{i}"),
                index: i,
                mean: 0.0,
                std: 1.0,
                corr_per_class: vec![],
                corr_mean: 0.0,
                corr_std: 0.0,
                constant: false,
            })
            .collect()
    }

    #[test]
    fn one_call_per_feature_and_deterministic() {
        let fs = feats(84);
        let mut b = ScriptedBackend::new();
        for (i, f) in fs.iter().enumerate() {
            b.insert(
                SELECTOR_ROLE,
                &f.name,
                format!(r#"{{"score": {}, "reasoning": "r"}}"#, (i * 37 % 84) as f64 / 84.0),
            );
        }
        let cfg = DebateConfig::default();
        let (r1, recs) = llm_select_score(&fs, "ids", &b, &cfg, "llm_select", "x").unwrap();
        assert_eq!(b.call_count(), 84);
        assert_eq!(recs.len(), 84);
        let (r2, _) = llm_select_score(&fs, "ids", &b, &cfg, "llm_select", "x").unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 84);
    }

    #[test]
    fn prompt_has_no_statistics() {
        let b = ScriptedBackend::new().with_default(r#"{"score": 0.5, "reasoning": "r"}"#);
        let recs = score_single_prompt(&feats(1), "ids", &b, &DebateConfig::default()).unwrap();
        assert!(recs[0].prompt_text.contains("f0"));
        assert!(!recs[0].prompt_text.contains("correlation"));
    }

    #[test]
    fn failures_follow_policy() {
        let b = ScriptedBackend::new();
        let recs = score_single_prompt(&feats(2), "ids", &b, &DebateConfig::default()).unwrap();
        assert!(recs.iter().all(|r| r.score == NEUTRAL_SCORE));
        assert!(recs[0].flags.contains(&"backend_failure".to_string()));
        let fast = DebateConfig {
            failure_policy: FailurePolicy::Fast,
            ..DebateConfig::default()
        };
        assert!(score_single_prompt(&feats(2), "ids", &b, &fast).is_err());
    }
}
