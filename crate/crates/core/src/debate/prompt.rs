use std::fmt::Write as _;

use super::{AgentRole, AgentTurn};
use crate::features::FeatureMetadata;
use crate::{Error, Result};

/// System and user message for one agent call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    /// Both messages joined, as stored in transcripts.
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

pub(crate) const FORMAT_CONTRACT: &str = "Respond with a single JSON object and nothing else, in the form \
{\"score\": <number between 0 and 1>, \"reasoning\": \"<concise justification>\"}. \
A score of 1 means the feature is essential for the task and 0 means it is useless.";

fn system_prompt(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Initiator => {
            "You are the Initiator in a feature-selection debate. Your job is an initial semantic \
             analysis of each feature based on the task description: explain what the feature \
             measures and give a preliminary relevance assessment."
        }
        AgentRole::Refiner => {
            "You are the Quantitative Refiner in a feature-selection debate. Strengthen the \
             Initiator's analysis with supporting arguments, grounding them in the statistical \
             metadata provided for the feature."
        }
        AgentRole::Challenger => {
            "You are the Critical Challenger in a feature-selection debate. Examine the \
             Initiator's arguments to identify weaknesses, redundancies, or biases, and give \
             structured counter-arguments as a peer reviewer would."
        }
        AgentRole::Judge => {
            "You are the Judge in a feature-selection debate. The Judge acts as the final arbiter: \
             weigh Analysis A against Analysis B, synthesize the arguments and counter-arguments, \
             and give the feature its final importance score."
        }
    }
}

fn metadata_block(m: &FeatureMetadata) -> String {
    let mut s = String::from("Feature statistics (training split):\n");
    let _ = writeln!(s, "- mean: {:.4}", m.mean);
    let _ = writeln!(s, "- standard deviation: {:.4}", m.std);
    for c in &m.corr_per_class {
        let _ = writeln!(s, "- correlation with class `{}`: {:.4}", c.class, c.r);
    }
    let _ = writeln!(s, "- feature-target correlation mean: {:.4}", m.corr_mean);
    let _ = write!(
        s,
        "- feature-target correlation standard deviation: {:.4}",
        m.corr_std
    );
    if m.constant {
        s.push_str("\n- note: the column is constant, so correlations are undefined (shown as 0)");
    }
    s
}

fn turn_block(label: &str, t: &AgentTurn) -> String {
    let score = t
        .score
        .map_or_else(|| "unavailable".to_string(), |v| format!("{v:.2}"));
    format!("{label}\nScore: {score}\nReasoning: {}", t.rationale.trim())
}

fn check_prior(role: AgentRole, prior: &[AgentTurn]) -> Result<()> {
    let expected = role.prerequisites();
    let got: Vec<AgentRole> = prior.iter().map(|t| t.role).collect();
    if got != expected {
        let fmt = |v: &[AgentRole]| {
            if v.is_empty() {
                "none".to_string()
            } else {
                v.iter().map(|r| r.name()).collect::<Vec<_>>().join(", ")
            }
        };
        return Err(Error::MissingPriorTurns {
            role: role.name().to_string(),
            expected: fmt(expected),
            got: fmt(&got),
        });
    }
    Ok(())
}

/// Builds the messages for `role`.
///
/// `prior_turns` must hold exactly the earlier roles, in order: none for the
/// Initiator, the Initiator for the Refiner, Initiator and Refiner for the
/// Challenger, and all three for the Judge. The Judge sees the Refiner as
/// "Analysis A" and the Challenger as "Analysis B".
pub fn render_prompt(
    role: AgentRole,
    feature_name: &str,
    task_description: &str,
    metadata: &FeatureMetadata,
    prior_turns: &[AgentTurn],
) -> Result<Prompt> {
    check_prior(role, prior_turns)?;
    let mut user = format!("Task: {task_description}\nFeature: \"{feature_name}\"\n\n");
    match role {
        AgentRole::Initiator => {
            user.push_str(
                "Assess how relevant this feature is likely to be for the task, judging from its \
                 name and meaning.",
            );
        }
        AgentRole::Refiner => {
            user.push_str(&turn_block("Initiator analysis:", &prior_turns[0]));
            user.push_str("\n\n");
            user.push_str(&metadata_block(metadata));
            user.push_str(
                "\n\nBuild on the Initiator analysis with supporting arguments that use these \
                 statistics, then give your refined score.",
            );
        }
        AgentRole::Challenger => {
            user.push_str(&turn_block("Initiator analysis:", &prior_turns[0]));
            user.push_str("\n\n");
            user.push_str(&turn_block("Refiner analysis:", &prior_turns[1]));
            user.push_str("\n\n");
            user.push_str(&metadata_block(metadata));
            user.push_str(
                "\n\nChallenge the arguments above: look for spurious reasoning, redundancy with \
                 other traffic features, and dataset or attacker-controlled biases. Then give \
                 your challenged score.",
            );
        }
        AgentRole::Judge => {
            user.push_str(&turn_block("Initiator analysis:", &prior_turns[0]));
            user.push_str("\n\n");
            user.push_str(&turn_block("Analysis A (Refiner):", &prior_turns[1]));
            user.push_str("\n\n");
            user.push_str(&turn_block("Analysis B (Challenger):", &prior_turns[2]));
            user.push_str(
                "\n\nDecide between Analysis A and Analysis B and state your final verdict.",
            );
        }
    }
    user.push_str("\n\n");
    user.push_str(FORMAT_CONTRACT);
    Ok(Prompt {
        system: system_prompt(role).to_string(),
        user,
    })
}
