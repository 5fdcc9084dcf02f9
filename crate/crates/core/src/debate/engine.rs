use std::time::Instant;

use log::{info, warn};

use super::{
    judge_aggregate, parse_agent_output, render_prompt, AgentRole, AgentTurn, AggregationMode,
    DebateConfig, FailurePolicy, FeatureVerdict, ParseStatus, NEUTRAL_SCORE,
};
use crate::features::FeatureMetadata;
use crate::llm::{ChatBackend, ChatRequest, ScriptKey};
use crate::par;
use crate::{Error, Result};

/// A verdict plus the wall time its debate took.
#[derive(Debug, Clone)]
pub struct TimedVerdict {
    pub verdict: FeatureVerdict,
    pub wall_time: f64,
}

fn failed_turn(role: AgentRole, system: String, prompt: String) -> AgentTurn {
    AgentTurn {
        role,
        system_prompt: system,
        prompt_text: prompt,
        raw_response: String::new(),
        score: None,
        rationale: String::new(),
        parse_status: ParseStatus::Failed,
    }
}

/// Runs Initiator → Refiner → Challenger → Judge for one feature.
///
/// Under the soft failure policy a backend error stops the debate, the
/// remaining turns are recorded as failed, and the verdict carries a
/// `backend_failure` flag with neutral scores. Parse problems add
/// `parse_fallback:<Role>` or `parse_failed:<Role>` flags.
pub fn deliberate_feature<B: ChatBackend + ?Sized>(
    feature: &FeatureMetadata,
    task_description: &str,
    backend: &B,
    config: &DebateConfig,
) -> Result<FeatureVerdict> {
    let weights = config.weights()?;
    let mut turns: Vec<AgentTurn> = Vec::with_capacity(4);
    let mut flags: Vec<String> = Vec::new();
    let mut broken = false;

    for role in AgentRole::ORDER {
        let prompt = render_prompt(role, &feature.name, task_description, feature, &turns)?;
        if broken {
            turns.push(failed_turn(role, prompt.system, prompt.user));
            continue;
        }
        let mut req = ChatRequest::new(config.model.clone(), prompt.system.clone(), prompt.user.clone())
            .with_key(ScriptKey::new(role.name(), feature.name.clone()));
        req.temperature = config.temperature;
        req.max_tokens = config.max_tokens;
        req.request_seed = config.request_seed;

        let raw = match backend.complete(&req) {
            Ok(r) => r.text,
            Err(e) => {
                if config.failure_policy == FailurePolicy::Fast {
                    return Err(e);
                }
                warn!("{}: {role} call failed: {e}", feature.name);
                flags.push("backend_failure".to_string());
                broken = true;
                turns.push(failed_turn(role, prompt.system, prompt.user));
                continue;
            }
        };
        let parsed = parse_agent_output(&raw);
        match parsed.status {
            ParseStatus::Clean => {}
            ParseStatus::Fallback => flags.push(format!("parse_fallback:{role}")),
            ParseStatus::Failed => {
                if config.failure_policy == FailurePolicy::Fast {
                    return Err(Error::ParseFailure {
                        role: role.name().to_string(),
                        feature: feature.name.clone(),
                    });
                }
                flags.push(format!("parse_failed:{role}"));
            }
        }
        turns.push(AgentTurn {
            role,
            system_prompt: prompt.system,
            prompt_text: prompt.user,
            raw_response: raw,
            score: parsed.score,
            rationale: parsed.rationale,
            parse_status: parsed.status,
        });
    }

    let s_initial = turns[0].effective_score();
    let s_refined = turns[1].effective_score();
    let s_challenged = turns[2].effective_score();
    let s_formula = judge_aggregate(s_refined, s_challenged, weights);
    let s_final = match config.aggregation {
        AggregationMode::Formula => s_formula,
        AggregationMode::JudgeLlm => match turns[3].score {
            Some(s) => s,
            None => {
                flags.push("judge_score_missing".to_string());
                if broken {
                    NEUTRAL_SCORE
                } else {
                    s_formula
                }
            }
        },
    };
    let judge_rationale = turns[3].rationale.clone();
    Ok(FeatureVerdict {
        feature_name: feature.name.clone(),
        feature_index: feature.index,
        s_initial,
        s_refined,
        s_challenged,
        s_formula,
        s_final,
        aggregation: config.aggregation,
        weights,
        judge_rationale,
        turns,
        flags,
    })
}

/// Debates every feature; output follows input order.
pub fn deliberate_all<B: ChatBackend + ?Sized>(
    features: &[FeatureMetadata],
    task_description: &str,
    backend: &B,
    config: &DebateConfig,
) -> Result<Vec<FeatureVerdict>> {
    Ok(deliberate_all_timed(features, task_description, backend, config)?
        .into_iter()
        .map(|t| t.verdict)
        .collect())
}

/// Like [`deliberate_all`], keeping per-feature wall time.
///
/// Up to `config.parallelism` debates run at once; the turns within one
/// debate are always sequential.
pub fn deliberate_all_timed<B: ChatBackend + ?Sized>(
    features: &[FeatureMetadata],
    task_description: &str,
    backend: &B,
    config: &DebateConfig,
) -> Result<Vec<TimedVerdict>> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no features to deliberate".into()));
    }
    config.weights()?;
    let total = features.len();
    par::try_map_with_threads(features, config.parallelism, |i, f| {
        let start = Instant::now();
        let verdict = deliberate_feature(f, task_description, backend, config)?;
        let wall_time = start.elapsed().as_secs_f64();
        info!(
            "[{}/{total}] {}: s_refined={:.3} s_challenged={:.3} s_final={:.3} ({wall_time:.2}s){}",
            i + 1,
            f.name,
            verdict.s_refined,
            verdict.s_challenged,
            verdict.s_final,
            if verdict.flags.is_empty() {
                String::new()
            } else {
                format!(" flags={}", verdict.flags.join(","))
            }
        );
        Ok(TimedVerdict { verdict, wall_time })
    })
}
