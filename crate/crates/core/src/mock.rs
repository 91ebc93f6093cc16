//! Deterministic in-process backends for tests, demos and the synthetic corpus.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{BackendError, Embedder, EmbeddingVector, GenerationRequest, Generator, Role};
use crate::domain::parse_fault_analysis_text;
use crate::judge::JUDGE_INSTRUCTION;
use crate::prompts::{
    FAULT_ANALYSIS_INSTRUCTION, FAULT_ANALYSIS_MARKER, FOLLOWUP_EXPLAIN_RESOLUTIONS,
    FOLLOWUP_FINAL_JSON_REPORT, FOLLOWUP_TOP3_SIMILAR, RAG_INTRO, RAG_REQUEST, RAG_STEP_BY_STEP,
    ROUTING_INSTRUCTION, TICKET_MARKER,
};
use crate::text::{mix64, stable_hash, tokenize};

/// Feature-hashing embedder: signed term-frequency buckets, L2-normalized.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    id: String,
    dimension: usize,
    seed: u64,
}

impl MockEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, BackendError> {
        if dimension < 2 {
            return Err(BackendError::Precondition("mock embedder dimension must be >= 2".into()));
        }
        Ok(MockEmbedder {
            id: format!("mock-{dimension}-{seed}"),
            dimension,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bucket and sign assigned to a token.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let bucket = (stable_hash(self.seed, token.as_bytes()) % self.dimension as u64) as usize;
        let sign = if stable_hash(self.seed ^ 0x5bd1_e995, token.as_bytes()) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        (bucket, sign)
    }

    fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut acc = alloc::vec![0.0f64; self.dimension];
        for token in tokenize(text) {
            let (bucket, sign) = self.slot(&token);
            acc[bucket] += sign;
        }
        let norm = libm::sqrt(acc.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            return EmbeddingVector::zeros(self.dimension);
        }
        EmbeddingVector::new(acc.into_iter().map(|v| (v / norm) as f32).collect())
            .expect("finite by construction")
    }
}

impl Embedder for MockEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, BackendError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

pub const CANNED_REPORT: &str = "Identification: The ticket was analyzed and no similar historical case was available.\nRoot Cause: unknown\nResolution: Collect additional logs and escalate to the responsible team.";

/// Rule-based generator.
///
/// * routing prompts return the value after a `team:` marker in the ticket,
///   or the catch-all label;
/// * fault-analysis and RAG prompts return the report of the demonstration
///   (or remembered ticket) with the largest token overlap with the new ticket,
///   or [`CANNED_REPORT`];
/// * follow-ups list, explain or emit the JSON report for the best demonstrations;
/// * judge prompts return the configured verdict;
/// * at temperature > 0, free text gets seeded word dropout at `temperature / 10`;
/// * with probability `degeneration_rate`, free text is replaced by a run of `!`.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    seed: u64,
    catch_all: String,
    degeneration_rate: f64,
    memory: Vec<(String, String)>,
    verdict: String,
    prefill: bool,
}

pub const DEFAULT_MOCK_VERDICT: &str = r#"{"accuracy":{"score":4,"justification":"Root cause matches the groundtruth."},"completeness":{"score":4,"justification":"Main cause and resolution hints are covered."},"relevance":{"score":5,"justification":"Stays on the ticket."},"clarity":{"score":4,"justification":"Reasoning is structured."}}"#;

impl MockGenerator {
    pub fn new(seed: u64) -> Self {
        MockGenerator {
            seed,
            catch_all: "Other".to_string(),
            degeneration_rate: 0.0,
            memory: Vec::new(),
            verdict: DEFAULT_MOCK_VERDICT.to_string(),
            prefill: true,
        }
    }

    pub fn with_catch_all(mut self, label: impl Into<String>) -> Self {
        self.catch_all = label.into();
        self
    }

    pub fn with_degeneration_rate(mut self, rate: f64) -> Self {
        self.degeneration_rate = rate.clamp(0.0, 1.0);
        self
    }

    /// (ticket text, fault analysis text) pairs consulted for plain
    /// fault-analysis prompts, which carry no demonstrations.
    pub fn with_memory(mut self, pairs: Vec<(String, String)>) -> Self {
        self.memory = pairs;
        self
    }

    pub fn with_verdict(mut self, verdict: impl Into<String>) -> Self {
        self.verdict = verdict.into();
        self
    }

    /// Disables assistant-prefix continuation.
    pub fn without_prefill(mut self) -> Self {
        self.prefill = false;
        self
    }

    fn rng(&self, request: &GenerationRequest, prompt: &str) -> ChaCha8Rng {
        let call_seed = request.params.seed.unwrap_or(0);
        ChaCha8Rng::seed_from_u64(mix64(self.seed ^ mix64(call_seed)) ^ stable_hash(0, prompt.as_bytes()))
    }

    fn free_text(&self, text: String, request: &GenerationRequest, prompt: &str) -> String {
        let mut rng = self.rng(request, prompt);
        if self.degeneration_rate > 0.0 && rng.random::<f64>() < self.degeneration_rate {
            return "!".repeat(400);
        }
        let t = request.params.temperature;
        if t <= 0.0 {
            return text;
        }
        let rate = (t / 10.0).min(1.0);
        let lines: Vec<String> = text
            .split('\n')
            .map(|line| {
                line.split(' ')
                    .filter(|_| rng.random::<f64>() >= rate)
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        lines.join("\n")
    }
}

fn overlap(a: &BTreeSet<String>, b: &str) -> usize {
    tokenize(b).into_iter().collect::<BTreeSet<_>>().intersection(a).count()
}

/// (ticket text, fault analysis text) demonstration blocks and the new ticket.
fn parse_rag_prompt(prompt: &str) -> Option<(Vec<(String, String)>, String)> {
    if !prompt.starts_with(RAG_INTRO) {
        return None;
    }
    let (demo_part, rest) = prompt.split_once(RAG_REQUEST)?;
    let new_ticket = rest
        .trim_start_matches('\n')
        .strip_prefix(TICKET_MARKER)?
        .rsplit_once(RAG_STEP_BY_STEP)?
        .0
        .trim_end_matches('\n')
        .to_string();
    let mut demos = Vec::new();
    for block in demo_part.split("\n\nDemonstration ").skip(1) {
        let body = block.split_once(":\n")?.1;
        let body = body.strip_prefix(TICKET_MARKER)?;
        let (ticket, fa) = body.split_once(&format!("\n{FAULT_ANALYSIS_MARKER}"))?;
        demos.push((ticket.to_string(), fa.trim_end_matches('\n').to_string()));
    }
    Some((demos, new_ticket))
}

/// Demonstration indices ordered by descending overlap with the ticket (stable).
fn rank_by_overlap(demos: &[(String, String)], ticket: &str) -> Vec<usize> {
    let query: BTreeSet<String> = tokenize(ticket).into_iter().collect();
    let mut order: Vec<(usize, usize)> = demos
        .iter()
        .enumerate()
        .map(|(i, (t, _))| (i, overlap(&query, t)))
        .collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}

fn extract_team_marker(ticket: &str) -> Option<String> {
    let lower = ticket.to_lowercase();
    let pos = lower.find("team:")?;
    let rest = &ticket[pos + "team:".len()..];
    let label: String = rest
        .trim_start()
        .chars()
        .take_while(|c| !c.is_whitespace() && !matches!(c, ',' | '.' | ';' | ')'))
        .collect();
    (!label.is_empty()).then_some(label)
}

impl Generator for MockGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        request.validate()?;
        let prompt = request
            .last_user()
            .ok_or_else(|| BackendError::Precondition("no user message".into()))?;

        if let Some(rest) = prompt.strip_prefix(ROUTING_INSTRUCTION) {
            let ticket = rest.split_once(TICKET_MARKER).map_or(rest, |(_, t)| t);
            return Ok(extract_team_marker(ticket).unwrap_or_else(|| self.catch_all.clone()));
        }
        if prompt.contains(JUDGE_INSTRUCTION) {
            return Ok(self.verdict.clone());
        }

        let first_user = request
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or(prompt);
        let rag = parse_rag_prompt(first_user);

        if let Some((demos, ticket)) = &rag {
            if prompt.starts_with(FOLLOWUP_FINAL_JSON_REPORT) {
                let best = rank_by_overlap(demos, ticket)
                    .first()
                    .map(|&i| demos[i].1.clone())
                    .unwrap_or_else(|| CANNED_REPORT.to_string());
                let fa = parse_fault_analysis_text("mock", &best)
                    .or_else(|| parse_fault_analysis_text("mock", CANNED_REPORT))
                    .expect("canned report parses");
                let json = serde_json::json!({
                    "identification": fa.identification,
                    "root_cause": fa.root_cause,
                    "resolution": fa.resolution,
                });
                return Ok(format!("```json\n{json}\n```"));
            }
            if prompt == FOLLOWUP_TOP3_SIMILAR {
                let lines: Vec<String> = rank_by_overlap(demos, ticket)
                    .into_iter()
                    .take(3)
                    .enumerate()
                    .map(|(r, i)| format!("{}. Demonstration {}", r + 1, i + 1))
                    .collect();
                return Ok(if lines.is_empty() {
                    "No demonstrations were provided.".to_string()
                } else {
                    lines.join("\n")
                });
            }
            if prompt == FOLLOWUP_EXPLAIN_RESOLUTIONS {
                let lines: Vec<String> = rank_by_overlap(demos, ticket)
                    .into_iter()
                    .take(3)
                    .map(|i| {
                        let resolution = parse_fault_analysis_text("d", &demos[i].1)
                            .map(|f| f.resolution)
                            .unwrap_or_default();
                        format!("Demonstration {} was resolved by: {resolution}", i + 1)
                    })
                    .collect();
                return Ok(lines.join("\n"));
            }
            if request.messages.iter().filter(|m| m.role == Role::User).count() == 1 {
                let text = rank_by_overlap(demos, ticket)
                    .first()
                    .map(|&i| demos[i].1.clone())
                    .unwrap_or_else(|| CANNED_REPORT.to_string());
                return Ok(self.free_text(text, request, prompt));
            }
            return Ok(format!("Noted: {prompt}"));
        }

        if let Some(rest) = prompt.strip_prefix(FAULT_ANALYSIS_INSTRUCTION) {
            let ticket = rest.split_once(TICKET_MARKER).map_or(rest, |(_, t)| t);
            let text = rank_by_overlap(&self.memory, ticket)
                .first()
                .filter(|&&i| overlap(&tokenize(ticket).into_iter().collect(), &self.memory[i].0) > 0)
                .map(|&i| self.memory[i].1.clone())
                .unwrap_or_else(|| CANNED_REPORT.to_string());
            return Ok(self.free_text(text, request, prompt));
        }

        Ok(format!("Noted: {prompt}"))
    }

    fn supports_prefill(&self) -> bool {
        self.prefill
    }
}
