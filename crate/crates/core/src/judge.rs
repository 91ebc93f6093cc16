//! LLM-as-judge harness: prompt construction and strict verdict parsing.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{ChatMessage, GenerationParams, GenerationRequest, Generator};
use crate::domain::{fault_analysis_text, ticket_text, FaultAnalysis, Ticket};
use crate::error::Error;
use crate::prompts::SYSTEM_PROMPT;

pub const JUDGE_INSTRUCTION: &str = "Evaluate the predicted fault analysis of the ticket against the groundtruth fault analysis. For each criterion, give an integer rating from 0 (poor) to 5 (excellent) and a justification.";

/// (key, question) for each judged criterion.
pub const CRITERIA: [(&str, &str); 4] = [
    (
        "accuracy",
        "To what extent is the predicted fault analysis semantically aligned with the groundtruth fault analysis?",
    ),
    (
        "completeness",
        "Does the predicted fault analysis capture all key aspects of the groundtruth fault analysis (main cause, contributing factors, resolution hints)?",
    ),
    (
        "relevance",
        "Does the predicted fault analysis stay on the topic of the provided ticket and avoid irrelevant details?",
    ),
    (
        "clarity",
        "Is the reasoning of the predicted fault analysis clear and well-structured?",
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub score: u8,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub accuracy: CriterionScore,
    pub completeness: CriterionScore,
    pub relevance: CriterionScore,
    pub clarity: CriterionScore,
}

pub fn build_judge_prompt(
    ticket: &Ticket,
    groundtruth: &FaultAnalysis,
    predicted: &str,
) -> Vec<ChatMessage> {
    let mut user = String::from(JUDGE_INSTRUCTION);
    user.push_str("\n\nCriteria:\n");
    for (key, question) in CRITERIA {
        user.push_str(&format!("- {key}: {question}\n"));
    }
    user.push_str(&format!(
        "\nTicket = {}\n\nGroundtruth Fault Analysis = {}\n\nPredicted Fault Analysis = {}\n\n",
        ticket_text(ticket),
        fault_analysis_text(groundtruth),
        predicted
    ));
    user.push_str("Answer with a single JSON object of the form {\"accuracy\": {\"score\": <0-5>, \"justification\": \"...\"}, \"completeness\": {...}, \"relevance\": {...}, \"clarity\": {...}}.");
    alloc::vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(user)]
}

fn parse_err(message: String, raw: &str) -> Error {
    Error::Parse {
        message,
        raw: raw.to_string(),
    }
}

/// Strict parse of the judge's JSON answer; scores must be integers in 0..=5.
pub fn parse_verdict(raw: &str) -> Result<JudgeVerdict, Error> {
    let (start, end) = match (raw.find('{'), raw.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(parse_err("no JSON object in judge output".into(), raw)),
    };
    let value: serde_json::Value = serde_json::from_str(&raw[start..=end])
        .map_err(|e| parse_err(format!("invalid JSON: {e}"), raw))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err("judge output is not an object".into(), raw))?;
    let mut scores = Vec::with_capacity(4);
    for (key, _) in CRITERIA {
        let entry = obj
            .get(key)
            .ok_or_else(|| parse_err(format!("missing criterion `{key}`"), raw))?;
        let score = entry
            .get("score")
            .ok_or_else(|| parse_err(format!("criterion `{key}` has no score"), raw))?;
        let score = score
            .as_u64()
            .ok_or_else(|| parse_err(format!("criterion `{key}` score is not a non-negative integer"), raw))?;
        if score > 5 {
            return Err(parse_err(format!("criterion `{key}` score {score} outside 0..=5"), raw));
        }
        let justification = entry
            .get("justification")
            .and_then(|j| j.as_str())
            .ok_or_else(|| parse_err(format!("criterion `{key}` has no justification"), raw))?;
        scores.push(CriterionScore {
            score: score as u8,
            justification: justification.to_string(),
        });
    }
    let mut it = scores.into_iter();
    let mut next = || it.next().expect("four criteria");
    Ok(JudgeVerdict {
        accuracy: next(),
        completeness: next(),
        relevance: next(),
        clarity: next(),
    })
}

pub fn judge(
    generator: &dyn Generator,
    ticket: &Ticket,
    groundtruth: &FaultAnalysis,
    predicted: &str,
) -> Result<JudgeVerdict, Error> {
    let req = GenerationRequest::new(
        None,
        build_judge_prompt(ticket, groundtruth, predicted),
        GenerationParams::default().with_seed(0),
    )?;
    let raw = generator.generate(&req)?;
    parse_verdict(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{MockGenerator, DEFAULT_MOCK_VERDICT};

    #[test]
    fn mock_verdict_round_trips() {
        let g = MockGenerator::new(0);
        let v = judge(&g, &Ticket::default(), &FaultAnalysis::default(), "x").unwrap();
        assert_eq!(v, parse_verdict(DEFAULT_MOCK_VERDICT).unwrap());
        assert_eq!(v.relevance.score, 5);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(parse_verdict(&json).unwrap(), v);
    }

    #[test]
    fn out_of_range_score_rejected() {
        let raw = DEFAULT_MOCK_VERDICT.replace("\"score\":5", "\"score\":7");
        match parse_verdict(&raw) {
            Err(Error::Parse { message, raw: r }) => {
                assert!(message.contains("outside"));
                assert_eq!(r, raw);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_key_is_named() {
        let raw = r#"{"accuracy":{"score":1,"justification":"a"},"completeness":{"score":1,"justification":"a"},"relevance":{"score":1,"justification":"a"}}"#;
        match parse_verdict(raw) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("clarity")),
            other => panic!("{other:?}"),
        }
        assert!(parse_verdict("nothing").is_err());
    }

    #[test]
    fn prompt_quotes_all_criteria() {
        let msgs = build_judge_prompt(&Ticket::default(), &FaultAnalysis::default(), "p");
        for (_, q) in CRITERIA {
            assert!(msgs[1].content.contains(q));
        }
    }
}
