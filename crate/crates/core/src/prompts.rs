//! Chat templates for routing, fault-analysis generation and the RAG session.
//!
//! The checked-in golden files under `tests/golden/` are the normative rendering.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{ChatMessage, Role};
use crate::domain::{fault_analysis_text, ticket_text, FaultAnalysis, Ticket};

pub const SYSTEM_PROMPT: &str = "You are an expert Ticket Resolution and Troubleshooting Assistant.";

pub const ROUTING_INSTRUCTION: &str =
    "Predict the team that is responsible for solving the given ticket.";

pub const FAULT_ANALYSIS_INSTRUCTION: &str = "Analyze the given ticket by identifying and explaining the problems and symptoms, then generate possible root causes and resolutions.";

pub const RAG_INTRO: &str = "You are given these demonstrations, where each demonstration is composed of a trouble ticket and its accurate fault analysis of the ticket:";

pub const RAG_REQUEST: &str = "Please generate a very detailed fault analysis of this new given trouble ticket by relating it to the provided demonstrations:";

pub const RAG_STEP_BY_STEP: &str =
    "Please think step by step about the fault analysis of the new given trouble ticket!";

/// Hard-coded opening of the first assistant turn; the backend continues it.
pub const RAG_ASSISTANT_PREFIX: &str = "As an expert ticket resolution assistant, here is my step-by-step detailed fault analysis of the new given ticket by relating it to the provided demonstrations:\n\n[FAULT ANALYSIS]\n\nMy detailed chain-of-thoughts starts with examining the similarities in terms of symptoms and resolutions with the provided demonstrations, then I should leverage the fault analysis part of the similar demonstrations to generate the most reasonable fault analysis of the new ticket.\n\n**Similarities**: ";

pub const TICKET_MARKER: &str = "Ticket = ";
pub const FAULT_ANALYSIS_MARKER: &str = "Fault Analysis = ";

pub const FOLLOWUP_TOP3_SIMILAR: &str =
    "List the top 3 most similar demonstrations to the new ticket";

pub const FOLLOWUP_EXPLAIN_RESOLUTIONS: &str = "Explain how these identified similar demonstrations were resolved based on their fault analysis reports";

pub const FOLLOWUP_FINAL_JSON_REPORT: &str = "Based on all your analysis, provide the final fault analysis report of the new ticket exactly in the following json template of fault analysis by inserting your answers in the indicated sections";

/// JSON template appended to the final-report follow-up.
pub const FAULT_ANALYSIS_JSON_TEMPLATE: &str = "{\n  \"identification\": \"<identification of the problems and symptoms, including the debugging process>\",\n  \"root_cause\": \"<root cause>\",\n  \"resolution\": \"<resolution: workarounds and corrections>\"\n}";

pub fn build_routing_prompt(ticket: &Ticket) -> Vec<ChatMessage> {
    single_turn(ROUTING_INSTRUCTION, ticket)
}

pub fn build_fa_prompt(ticket: &Ticket) -> Vec<ChatMessage> {
    single_turn(FAULT_ANALYSIS_INSTRUCTION, ticket)
}

fn single_turn(instruction: &str, ticket: &Ticket) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(format!("{instruction}\n\n{TICKET_MARKER}{}", ticket_text(ticket))),
    ]
}

/// System, user (demonstrations + new ticket) and the pre-seeded assistant prefix.
pub fn build_rag_first_round(
    ticket: &Ticket,
    demonstrations: &[(Ticket, FaultAnalysis)],
) -> Vec<ChatMessage> {
    let mut user = String::from(RAG_INTRO);
    user.push_str("\n\n");
    for (i, (t, f)) in demonstrations.iter().enumerate() {
        user.push_str(&format!(
            "Demonstration {}:\n{TICKET_MARKER}{}\n{FAULT_ANALYSIS_MARKER}{}\n\n",
            i + 1,
            ticket_text(t),
            fault_analysis_text(f)
        ));
    }
    user.push_str(RAG_REQUEST);
    user.push_str("\n\n");
    user.push_str(TICKET_MARKER);
    user.push_str(&ticket_text(ticket));
    user.push_str("\n\n");
    user.push_str(RAG_STEP_BY_STEP);
    vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(user),
        ChatMessage::assistant(RAG_ASSISTANT_PREFIX),
    ]
}

pub fn final_report_followup() -> String {
    format!("{FOLLOWUP_FINAL_JSON_REPORT}:\n{FAULT_ANALYSIS_JSON_TEMPLATE}")
}

/// Plain-text transcript rendering used by the golden files.
pub fn render_messages(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        let tag = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        out.push_str(&format!("<|{tag}|>\n{}\n", m.content));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routing_prompt_embeds_ticket_verbatim() {
        let t = Ticket {
            id: "t".into(),
            title: "\"quoted\" <b>".into(),
            ..Default::default()
        };
        let msgs = build_routing_prompt(&t);
        assert_eq!(msgs[0].content, SYSTEM_PROMPT);
        assert!(msgs[1].content.starts_with(ROUTING_INSTRUCTION));
        assert!(msgs[1].content.ends_with(&ticket_text(&t)));
        assert_eq!(msgs, build_routing_prompt(&t));
    }

    #[test]
    fn rag_without_demonstrations_keeps_rest() {
        let t = Ticket::default();
        let msgs = build_rag_first_round(&t, &[]);
        assert_eq!(msgs.len(), 3);
        assert!(!msgs[1].content.contains("Demonstration 1"));
        assert!(msgs[1].content.contains(RAG_REQUEST));
        assert!(msgs[2].content.ends_with("**Similarities**: "));
    }
}
