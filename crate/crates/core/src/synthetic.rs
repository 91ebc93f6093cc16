//! Seeded synthetic corpus with planted retrieval structure.
//!
//! Every fault analysis owns a handful of unique "signature" tokens. Its
//! tickets mention a random subset of them among shared background noise, so
//! lexical rankers can find a ticket's siblings and Recall@k is measurable.
//! A configurable share of reports is template-only and therefore
//! uninformative, which gives curation something to drop.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curation::Corpus;
use crate::domain::{FaultAnalysis, LabelSet, TeamLabel, Ticket, TicketFaultLink};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub tickets: usize,
    pub faults: usize,
    pub seed: u64,
    pub signature_tokens: usize,
    /// Signature tokens mentioned by each ticket.
    pub signature_per_ticket: usize,
    pub noise_tokens: usize,
    pub low_information_fraction: f64,
    /// Adds `team: <label>` to each ticket description.
    pub plant_team_marker: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            tickets: 500,
            faults: 120,
            seed: 0,
            signature_tokens: 5,
            signature_per_ticket: 3,
            noise_tokens: 10,
            low_information_fraction: 0.1,
            plant_team_marker: true,
        }
    }
}

const BACKGROUND: &[&str] = &[
    "alarm", "cell", "link", "node", "restart", "traffic", "degraded", "observed", "after",
    "upgrade", "timeout", "interface", "module", "status", "counter", "packet", "loss", "sync",
    "clock", "radio", "baseband", "transport", "port", "service", "outage", "intermittent",
    "customer", "site", "field", "report", "unit", "power", "temperature", "fan", "card",
    "software", "kernel", "process", "crash", "memory", "cpu", "load", "high", "low", "signal",
    "antenna", "carrier", "fiber", "optical", "ethernet", "vlan", "routing", "table", "session",
    "handover", "drop", "call", "setup", "failure", "license", "config", "parameter", "database",
    "backup", "restore", "log", "trace", "debug", "warning", "error", "critical", "minor",
];

const PRODUCTS: &[&str] = &["AirScale", "Flexi", "MetroCore", "EdgeLink", "CoreRouter"];
const HARDWARE: &[&str] = &["RRU-4T4R", "BBU-10", "FPGA-X2", "SFP-28", "PSU-1200", "TRX-B7"];
const ROOT_CAUSES: &[&str] = &[
    "implementation error",
    "configuration error",
    "hardware fault",
    "third party issue",
    "specification gap",
    "documentation error",
    "environmental condition",
    "duplicate ticket",
];
const SYLLABLES: &[&str] = &[
    "ka", "zu", "mor", "tex", "vil", "qua", "rin", "dso", "plo", "gex", "nur", "fai", "bly", "cro",
];
const TEMPLATE_IDENTIFICATION: &str =
    "The issue was analyzed and the logs were checked by the team.";
const TEMPLATE_RESOLUTION: &str = "The problem is fixed in a later build.";

fn signature_word(rng: &mut ChaCha8Rng, unique: usize) -> String {
    let a = SYLLABLES.choose(rng).expect("non-empty");
    let b = SYLLABLES.choose(rng).expect("non-empty");
    format!("{a}{b}{unique:x}")
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|_| *BACKGROUND.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn generate(cfg: &SyntheticConfig, labels: &LabelSet) -> Result<Corpus, Error> {
    if cfg.faults == 0 && cfg.tickets > 0 {
        return Err(Error::invalid("tickets need at least one fault analysis"));
    }
    if cfg.signature_per_ticket > cfg.signature_tokens {
        return Err(Error::invalid("signature_per_ticket exceeds signature_tokens"));
    }
    if !(0.0..=1.0).contains(&cfg.low_information_fraction) {
        return Err(Error::invalid("low_information_fraction must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    struct Fault {
        id: String,
        signature: Vec<String>,
        team: TeamLabel,
        hardware: &'static str,
        product: &'static str,
    }
    let mut faults = Vec::with_capacity(cfg.faults);
    let mut reports = Vec::with_capacity(cfg.faults);
    for f in 0..cfg.faults {
        let signature: Vec<String> = (0..cfg.signature_tokens)
            .map(|k| signature_word(&mut rng, f * cfg.signature_tokens + k))
            .collect();
        let team = labels.parse(labels.labels().choose(&mut rng).expect("non-empty"))?;
        let hardware = *HARDWARE.choose(&mut rng).expect("non-empty");
        let product = *PRODUCTS.choose(&mut rng).expect("non-empty");
        let root_cause = ROOT_CAUSES.choose(&mut rng).expect("non-empty").to_string();
        let id = format!("F{f:05}");
        let report = if rng.random_bool(cfg.low_information_fraction) {
            FaultAnalysis {
                id: id.clone(),
                identification: TEMPLATE_IDENTIFICATION.into(),
                root_cause,
                resolution: TEMPLATE_RESOLUTION.into(),
            }
        } else {
            let half = signature.len().div_ceil(2);
            FaultAnalysis {
                id: id.clone(),
                identification: format!(
                    "Debugging showed {} on the {hardware} unit while {}.",
                    signature[..half].join(" "),
                    noise(&mut rng, 4)
                ),
                root_cause,
                resolution: format!(
                    "Apply the correction for {} and reload the {product} build.",
                    signature[half..].join(" ")
                ),
            }
        };
        reports.push(report);
        faults.push(Fault {
            id,
            signature,
            team,
            hardware,
            product,
        });
    }

    let mut tickets = Vec::with_capacity(cfg.tickets);
    let mut links = Vec::with_capacity(cfg.tickets);
    let mut team_labels = Vec::with_capacity(cfg.tickets);
    for t in 0..cfg.tickets {
        let fault = if t < cfg.faults {
            &faults[t]
        } else {
            &faults[rng.random_range(0..cfg.faults)]
        };
        let mut sig = fault.signature.clone();
        sig.shuffle(&mut rng);
        sig.truncate(cfg.signature_per_ticket);
        let id = format!("T{t:06}");
        let half = cfg.noise_tokens / 2;
        let mut description = format!(
            "Observed {} with {}.",
            sig.join(" "),
            noise(&mut rng, cfg.noise_tokens - half)
        );
        if cfg.plant_team_marker {
            description.push_str(&format!(" Assigned team: {}.", fault.team));
        }
        let snippet_count = rng.random_range(0..3usize);
        let log_snippets = (0..snippet_count)
            .map(|_| {
                format!(
                    "ERR 0x{:04x} {} {}",
                    rng.random::<u16>(),
                    sig.choose(&mut rng).map(String::as_str).unwrap_or(""),
                    noise(&mut rng, 2)
                )
            })
            .collect();
        tickets.push(Ticket {
            id: id.clone(),
            product_name: fault.product.into(),
            hardware_unit: fault.hardware.into(),
            software_build: format!("SW{}.{}", 20 + rng.random_range(0..5u8), rng.random_range(0..10u8)),
            title: format!("{} {}", sig.first().map(String::as_str).unwrap_or(""), noise(&mut rng, half)),
            problem_description: description,
            log_snippets,
        });
        links.push(TicketFaultLink {
            ticket_id: id.clone(),
            fault_analysis_id: fault.id.clone(),
        });
        team_labels.push((id, fault.team.clone()));
    }
    Corpus::new(tickets, reports, links, team_labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let cfg = SyntheticConfig {
            tickets: 50,
            faults: 10,
            seed: 7,
            ..Default::default()
        };
        let a = generate(&cfg, &LabelSet::default()).unwrap();
        let b = generate(&cfg, &LabelSet::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ticket_count(), 50);
        assert_eq!(a.fault_count(), 10);
        assert!(a.fault_analyses().all(|f| !a.tickets_of(&f.id).is_empty()));
    }

    #[test]
    fn siblings_share_signature_tokens() {
        let cfg = SyntheticConfig {
            tickets: 40,
            faults: 5,
            seed: 1,
            low_information_fraction: 0.0,
            ..Default::default()
        };
        let c = generate(&cfg, &LabelSet::default()).unwrap();
        let f = c.fault_analyses().next().unwrap();
        let sig: Vec<String> = crate::text::tokenize(&f.identification)
            .into_iter()
            .filter(|t| t.chars().any(|ch| ch.is_ascii_hexdigit()) && t.len() > 4 && !BACKGROUND.contains(&t.as_str()))
            .collect();
        assert!(!sig.is_empty());
    }
}
