//! Multi-candidate fault-analysis generation, ranker-based response ranking
//! and the multi-turn RAG troubleshooting session.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{Adapter, BackendError, ChatMessage, GenerationParams, GenerationRequest, Generator, Role};
use crate::curation::Corpus;
use crate::domain::{FaultAnalysis, Ticket};
use crate::error::Error;
use crate::prompts::{
    build_fa_prompt, build_rag_first_round, final_report_followup, FOLLOWUP_EXPLAIN_RESOLUTIONS,
    FOLLOWUP_TOP3_SIMILAR, RAG_ASSISTANT_PREFIX,
};
use crate::retrieval::{select_demonstrations, Demonstration, RankerEnsemble};
use crate::text::TokenCounter;

/// (temperature, sample count) pairs, generated in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemperatureGrid(pub Vec<(f64, usize)>);

impl TemperatureGrid {
    /// Five samples at each of 0.1, 0.3, 0.5, 0.7, 0.9.
    pub fn response_ranking() -> Self {
        TemperatureGrid([0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&t| (t, 5)).collect())
    }

    /// One, two and three samples at 0.1, 0.5 and 0.9.
    pub fn preference() -> Self {
        TemperatureGrid(alloc::vec![(0.1, 1), (0.5, 2), (0.9, 3)])
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.0.is_empty() {
            return Err(Error::invalid("temperature grid is empty"));
        }
        for (t, c) in &self.0 {
            if *c == 0 {
                return Err(Error::invalid("grid counts must be >= 1"));
            }
            if !(*t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid("grid temperatures must be >= 0"));
            }
        }
        Ok(())
    }
}

impl Default for TemperatureGrid {
    fn default() -> Self {
        Self::response_ranking()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub text: String,
    pub temperature: f64,
    /// Position within its temperature bucket.
    pub sample_index: usize,
    pub seed: u64,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub temperature: f64,
    pub sample_index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateBatch {
    pub candidates: Vec<CandidateReport>,
    pub failures: Vec<CandidateFailure>,
}

/// Samples the fault-analysis adapter over `grid`; call `n` uses seed `seed + n`.
pub fn generate_candidates(
    generator: &dyn Generator,
    ticket: &Ticket,
    grid: &TemperatureGrid,
    seed: u64,
) -> Result<CandidateBatch, Error> {
    grid.validate()?;
    let messages = build_fa_prompt(ticket);
    let mut batch = CandidateBatch::default();
    let mut last_err: Option<BackendError> = None;
    let mut running = 0u64;
    for &(temperature, count) in &grid.0 {
        for sample_index in 0..count {
            let call_seed = seed.wrapping_add(running);
            running += 1;
            let params = GenerationParams::default()
                .with_temperature(temperature)
                .with_seed(call_seed);
            let outcome = GenerationRequest::new(Some(Adapter::FaultAnalysis), messages.clone(), params)
                .and_then(|req| generator.generate(&req));
            match outcome {
                Ok(text) => batch.candidates.push(CandidateReport {
                    text,
                    temperature,
                    sample_index,
                    seed: call_seed,
                    score: None,
                }),
                Err(e) => {
                    batch.failures.push(CandidateFailure {
                        temperature,
                        sample_index,
                        seed: call_seed,
                        error: e.to_string(),
                    });
                    last_err = Some(e);
                }
            }
        }
    }
    if batch.candidates.is_empty() {
        return Err(Error::AllCandidatesFailed(
            last_err.unwrap_or_else(|| BackendError::Precondition("no candidates requested".into())),
        ));
    }
    Ok(batch)
}

/// Scores every candidate with the ensemble and sorts descending; ties keep
/// (temperature, sample_index) order. The head is the returned report.
pub fn rank_candidates(
    ensemble: &RankerEnsemble,
    ticket: &Ticket,
    candidates: Vec<CandidateReport>,
) -> Result<Vec<CandidateReport>, Error> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates to rank"));
    }
    let texts: Vec<&str> = candidates.iter().map(|c| c.text.as_str()).collect();
    let scores = ensemble.aggregate_report_scores(ticket, &texts)?;
    let mut ranked: Vec<CandidateReport> = candidates
        .into_iter()
        .zip(scores)
        .map(|(mut c, s)| {
            c.score = Some(s);
            c
        })
        .collect();
    ranked.sort_by(|a, b| {
        let (sa, sb) = (a.score.unwrap_or(f64::NEG_INFINITY), b.score.unwrap_or(f64::NEG_INFINITY));
        sb.total_cmp(&sa)
            .then_with(|| a.temperature.total_cmp(&b.temperature))
            .then_with(|| a.sample_index.cmp(&b.sample_index))
    });
    Ok(ranked)
}

pub const DEFAULT_RAG_TEMPERATURE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub token_budget: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            token_budget: crate::retrieval::DEFAULT_TOKEN_BUDGET,
            temperature: DEFAULT_RAG_TEMPERATURE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TroubleshootSession {
    pub session_id: String,
    pub ticket: Ticket,
    pub demonstrations: Vec<Demonstration>,
    pub messages: Vec<ChatMessage>,
    /// Seconds since the Unix epoch, supplied by the caller.
    pub created_at: u64,
    pub options: SessionOptions,
    pub no_demonstrations: bool,
    pub oversized_demonstration: bool,
}

impl TroubleshootSession {
    /// The first assistant turn (prefix + continuation).
    pub fn first_assistant_turn(&self) -> &str {
        &self.messages[2].content
    }

    pub fn demonstration_pairs(&self) -> Vec<(Ticket, FaultAnalysis)> {
        self.demonstrations
            .iter()
            .map(|d| (d.ticket.clone(), d.fault_analysis.clone()))
            .collect()
    }
}

fn send(
    generator: &dyn Generator,
    mut messages: Vec<ChatMessage>,
    temperature: f64,
    seed: u64,
) -> Result<String, Error> {
    // fold a trailing assistant prefix into the user turn for backends that cannot continue it
    if !generator.supports_prefill() && messages.last().map(|m| m.role) == Some(Role::Assistant) {
        let prefix = messages.pop().expect("checked").content;
        if let Some(user) = messages.iter_mut().rev().find(|m| m.role == Role::User) {
            user.content.push_str("\n\n");
            user.content.push_str(&prefix);
        }
    }
    let params = GenerationParams::default()
        .with_temperature(temperature)
        .with_seed(seed);
    let req = GenerationRequest::new(None, messages, params)?;
    Ok(generator.generate(&req)?)
}

/// Selects demonstrations, sends the guided first round to the base model
/// (no adapter) and records the full exchange.
#[allow(clippy::too_many_arguments)]
pub fn open_session(
    ensemble: &RankerEnsemble,
    corpus: &Corpus,
    generator: &dyn Generator,
    counter: &dyn TokenCounter,
    ticket: &Ticket,
    options: SessionOptions,
    session_id: String,
    created_at: u64,
) -> Result<TroubleshootSession, Error> {
    let selection = select_demonstrations(ensemble, corpus, ticket, options.token_budget, counter)?;
    let pairs = selection.pairs();
    let mut messages = build_rag_first_round(ticket, &pairs);
    let continuation = send(generator, messages.clone(), options.temperature, options.seed)?;
    let last = messages.last_mut().expect("first round has three messages");
    last.content = format!("{RAG_ASSISTANT_PREFIX}{continuation}");
    Ok(TroubleshootSession {
        session_id,
        ticket: ticket.clone(),
        no_demonstrations: selection.demonstrations.is_empty(),
        oversized_demonstration: selection.oversized_top1,
        demonstrations: selection.demonstrations,
        messages,
        created_at,
        options,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalFollowUp {
    Top3Similar,
    ExplainResolutions,
    FinalJsonReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FollowUp {
    Canonical(CanonicalFollowUp),
    Text(String),
}

impl FollowUp {
    pub fn user_text(&self) -> String {
        match self {
            FollowUp::Canonical(CanonicalFollowUp::Top3Similar) => FOLLOWUP_TOP3_SIMILAR.to_string(),
            FollowUp::Canonical(CanonicalFollowUp::ExplainResolutions) => {
                FOLLOWUP_EXPLAIN_RESOLUTIONS.to_string()
            }
            FollowUp::Canonical(CanonicalFollowUp::FinalJsonReport) => final_report_followup(),
            FollowUp::Text(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUpReply {
    pub text: String,
    pub parsed_report: Option<FaultAnalysis>,
    /// Set when a final JSON report was requested but could not be parsed.
    pub parse_failed: bool,
}

/// Appends a user turn, sends the full history and appends the reply.
/// On backend failure the history is left unchanged.
pub fn post_followup(
    session: &mut TroubleshootSession,
    generator: &dyn Generator,
    followup: &FollowUp,
) -> Result<FollowUpReply, Error> {
    let mut messages = session.messages.clone();
    messages.push(ChatMessage::user(followup.user_text()));
    let turn = (messages.len() / 2) as u64;
    let reply = send(
        generator,
        messages.clone(),
        session.options.temperature,
        session.options.seed.wrapping_add(turn),
    )?;
    messages.push(ChatMessage::assistant(reply.clone()));
    session.messages = messages;
    let wants_report = matches!(followup, FollowUp::Canonical(CanonicalFollowUp::FinalJsonReport));
    let parsed_report = if wants_report {
        parse_report_json(&format!("{}:final", session.ticket.id), &reply)
    } else {
        None
    };
    Ok(FollowUpReply {
        parse_failed: wants_report && parsed_report.is_none(),
        parsed_report,
        text: reply,
    })
}

#[derive(Deserialize)]
struct ReportJson {
    identification: serde_json::Value,
    root_cause: serde_json::Value,
    resolution: serde_json::Value,
}

fn json_text(v: serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Extracts the outermost JSON object and reads the three report keys.
pub fn parse_report_json(id: &str, text: &str) -> Option<FaultAnalysis> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    let r: ReportJson = serde_json::from_str(&text[start..=end]).ok()?;
    Some(FaultAnalysis {
        id: id.to_string(),
        identification: json_text(r.identification),
        root_cause: json_text(r.root_cause),
        resolution: json_text(r.resolution),
    })
}
