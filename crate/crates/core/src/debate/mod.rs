//! Four-role debate per feature and the final-score aggregation.

mod engine;
mod parse;
mod prompt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use engine::{deliberate_all, deliberate_all_timed, deliberate_feature, TimedVerdict};
pub use parse::{parse_agent_output, ParsedOutput};
pub use prompt::{render_prompt, Prompt};

/// The output-format instruction appended to every agent prompt.
pub fn prompt_contract() -> &'static str {
    prompt::FORMAT_CONTRACT
}

/// Score used when an agent output cannot be parsed (fail-soft policy).
pub const NEUTRAL_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentRole {
    Initiator,
    Refiner,
    Challenger,
    Judge,
}

impl AgentRole {
    /// Execution order.
    pub const ORDER: [AgentRole; 4] = [
        AgentRole::Initiator,
        AgentRole::Refiner,
        AgentRole::Challenger,
        AgentRole::Judge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentRole::Initiator => "Initiator",
            AgentRole::Refiner => "Refiner",
            AgentRole::Challenger => "Challenger",
            AgentRole::Judge => "Judge",
        }
    }

    /// Roles whose turns must precede this one.
    pub fn prerequisites(self) -> &'static [AgentRole] {
        let i = Self::ORDER.iter().position(|&r| r == self).unwrap_or(0);
        &Self::ORDER[..i]
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of the Refiner and Challenger scores; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct JudgeWeights {
    refined: f64,
    challenged: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    w_r: f64,
    w_c: f64,
}

impl TryFrom<RawWeights> for JudgeWeights {
    type Error = Error;

    fn try_from(r: RawWeights) -> Result<Self> {
        JudgeWeights::new(r.w_r, r.w_c)
    }
}

impl From<JudgeWeights> for RawWeights {
    fn from(w: JudgeWeights) -> Self {
        RawWeights {
            w_r: w.refined,
            w_c: w.challenged,
        }
    }
}

impl JudgeWeights {
    /// Accepts `w_r + w_c` within 1e-12 of one; `w_c` is then stored as
    /// `1 - w_r` so the pair sums to one exactly.
    pub fn new(w_r: f64, w_c: f64) -> Result<Self> {
        for (name, w) in [("w_r", w_r), ("w_c", w_c)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!("{name} = {w} must lie in [0, 1]")));
            }
        }
        if (w_r + w_c - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "w_r + w_c = {} but must equal 1",
                w_r + w_c
            )));
        }
        Ok(Self::from_refined(w_r))
    }

    pub fn from_refined(w_r: f64) -> Self {
        let w_r = w_r.clamp(0.0, 1.0);
        Self {
            refined: w_r,
            challenged: 1.0 - w_r,
        }
    }

    pub fn w_r(&self) -> f64 {
        self.refined
    }

    pub fn w_c(&self) -> f64 {
        self.challenged
    }
}

impl Default for JudgeWeights {
    fn default() -> Self {
        Self::from_refined(0.5)
    }
}

/// `w_r · s_refined + w_c · s_challenged`, kept inside `[min, max]` of the
/// two inputs.
pub fn judge_aggregate(s_refined: f64, s_challenged: f64, w: JudgeWeights) -> f64 {
    let v = w.w_r() * s_refined + w.w_c() * s_challenged;
    v.clamp(s_refined.min(s_challenged), s_refined.max(s_challenged))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    /// The final score is the weighted combination; the Judge only explains.
    #[default]
    Formula,
    /// The Judge's own parsed score is final; the formula value is kept for audit.
    JudgeLlm,
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(Self::Formula),
            "judge-llm" => Ok(Self::JudgeLlm),
            other => Err(Error::Config(format!(
                "unknown aggregation mode `{other}` (expected formula or judge-llm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Neutral score plus a flag; the run continues.
    #[default]
    Soft,
    /// The first backend or parse failure aborts the run.
    Fast,
}

impl std::str::FromStr for FailurePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "fast" => Ok(Self::Fast),
            other => Err(Error::Config(format!(
                "unknown failure policy `{other}` (expected soft or fast)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Clean,
    Fallback,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub role: AgentRole,
    pub system_prompt: String,
    pub prompt_text: String,
    pub raw_response: String,
    pub score: Option<f64>,
    pub rationale: String,
    pub parse_status: ParseStatus,
}

impl AgentTurn {
    /// Parsed score, or the neutral score when parsing failed.
    pub fn effective_score(&self) -> f64 {
        self.score.unwrap_or(NEUTRAL_SCORE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    pub feature_name: String,
    pub feature_index: usize,
    pub s_initial: f64,
    pub s_refined: f64,
    pub s_challenged: f64,
    /// Weighted combination, always recorded.
    pub s_formula: f64,
    pub s_final: f64,
    pub aggregation: AggregationMode,
    pub weights: JudgeWeights,
    pub judge_rationale: String,
    pub turns: Vec<AgentTurn>,
    pub flags: Vec<String>,
}

impl FeatureVerdict {
    /// Recomputes the aggregation from the stored turns and compares
    /// bit-for-bit. Returns a description of the first mismatch.
    pub fn replay(&self) -> std::result::Result<(), String> {
        if self.turns.len() != 4 {
            return Err(format!("{} turns, expected 4", self.turns.len()));
        }
        for (t, r) in self.turns.iter().zip(AgentRole::ORDER) {
            if t.role != r {
                return Err(format!("turn order: found {} where {} expected", t.role, r));
            }
        }
        let s_r = self.turns[1].effective_score();
        let s_c = self.turns[2].effective_score();
        if s_r.to_bits() != self.s_refined.to_bits() || s_c.to_bits() != self.s_challenged.to_bits()
        {
            return Err("stored refined/challenged scores differ from turn scores".into());
        }
        let formula = judge_aggregate(s_r, s_c, self.weights);
        if formula.to_bits() != self.s_formula.to_bits() {
            return Err(format!(
                "formula value {} != stored {}",
                formula, self.s_formula
            ));
        }
        if self.aggregation == AggregationMode::Formula
            && formula.to_bits() != self.s_final.to_bits()
        {
            return Err(format!("s_final {} != recomputed {}", self.s_final, formula));
        }
        Ok(())
    }
}

/// Everything a debate run needs besides the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebateConfig {
    pub model: String,
    pub w_r: f64,
    pub w_c: f64,
    pub aggregation: AggregationMode,
    pub failure_policy: FailurePolicy,
    /// Concurrent per-feature debates.
    pub parallelism: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_seed: Option<u64>,
}

impl Default for DebateConfig {
    fn default() -> Self {
        Self {
            model: "llama3.2".to_string(),
            w_r: 0.5,
            w_c: 0.5,
            aggregation: AggregationMode::Formula,
            failure_policy: FailurePolicy::Soft,
            parallelism: 4,
            temperature: 0.0,
            max_tokens: 1024,
            request_seed: None,
        }
    }
}

impl DebateConfig {
    pub fn weights(&self) -> Result<JudgeWeights> {
        JudgeWeights::new(self.w_r, self.w_c)
    }

    pub fn set_weights(&mut self, w: JudgeWeights) {
        self.w_r = w.w_r();
        self.w_c = w.w_c();
    }
}
