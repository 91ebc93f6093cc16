//! Tickets, fault analyses, team labels and their canonical text renderings.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ticket {
    pub id: String,
    #[serde(default)]
    pub product_name: String,
    #[serde(default)]
    pub hardware_unit: String,
    #[serde(default)]
    pub software_build: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub problem_description: String,
    #[serde(default)]
    pub log_snippets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FaultAnalysis {
    pub id: String,
    #[serde(default)]
    pub identification: String,
    #[serde(default)]
    pub root_cause: String,
    #[serde(default)]
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamLabel(String);

impl TeamLabel {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for TeamLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TicketFaultLink {
    pub ticket_id: String,
    pub fault_analysis_id: String,
}

/// The configured team label set `C`, with one designated catch-all label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<String>,
    catch_all: String,
}

impl Default for LabelSet {
    /// Ten numbered teams plus `Other`.
    fn default() -> Self {
        let mut labels: Vec<String> = (1..=10).map(|i| i.to_string()).collect();
        labels.push("Other".to_string());
        LabelSet {
            labels,
            catch_all: "Other".to_string(),
        }
    }
}

impl LabelSet {
    pub fn new(labels: Vec<String>, catch_all: &str) -> Result<Self, Error> {
        if labels.is_empty() {
            return Err(Error::invalid("label set is empty"));
        }
        let mut folded: Vec<String> = labels.iter().map(|l| l.trim().to_lowercase()).collect();
        folded.sort();
        if folded.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("label set has labels equal after case folding"));
        }
        if folded.iter().any(|l| l.is_empty()) {
            return Err(Error::invalid("label set contains an empty label"));
        }
        if !labels.iter().any(|l| l == catch_all) {
            return Err(Error::invalid(format!("catch-all `{catch_all}` not in label set")));
        }
        Ok(LabelSet {
            labels,
            catch_all: catch_all.to_string(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn catch_all(&self) -> TeamLabel {
        TeamLabel(self.catch_all.clone())
    }

    /// Exact membership check.
    pub fn parse(&self, name: &str) -> Result<TeamLabel, Error> {
        self.labels
            .iter()
            .find(|l| l.as_str() == name)
            .map(|l| TeamLabel(l.clone()))
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Trim + case-fold + exact match; returns the canonical spelling.
    pub fn normalize(&self, raw: &str) -> Option<TeamLabel> {
        let folded = raw.trim().to_lowercase();
        self.labels
            .iter()
            .find(|l| l.to_lowercase() == folded)
            .map(|l| TeamLabel(l.clone()))
    }

    pub fn contains(&self, label: &TeamLabel) -> bool {
        self.labels.contains(&label.0)
    }
}

pub const TICKET_FIELDS: [&str; 5] = [
    "product_name",
    "hardware_unit",
    "software_build",
    "title",
    "problem_description",
];

pub const LOG_SNIPPETS_HEADER: &str = "Log Snippets:";

/// Attribute block followed by the log snippets, one per line.
pub fn ticket_text(t: &Ticket) -> String {
    let values = [
        &t.product_name,
        &t.hardware_unit,
        &t.software_build,
        &t.title,
        &t.problem_description,
    ];
    let mut out = String::new();
    for (i, (name, value)) in TICKET_FIELDS.iter().zip(values).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(name);
        out.push_str(": ");
        out.push_str(value);
    }
    if !t.log_snippets.is_empty() {
        out.push('\n');
        out.push_str(LOG_SNIPPETS_HEADER);
        for s in &t.log_snippets {
            out.push('\n');
            out.push_str(s);
        }
    }
    out
}

/// `Identification`, `Root Cause`, `Resolution` sections in that order.
pub fn fault_analysis_text(f: &FaultAnalysis) -> String {
    format!(
        "Identification: {}\nRoot Cause: {}\nResolution: {}",
        f.identification, f.root_cause, f.resolution
    )
}

/// Inverse of [`fault_analysis_text`] for texts that carry all three sections.
pub fn parse_fault_analysis_text(id: &str, text: &str) -> Option<FaultAnalysis> {
    let rest = text.strip_prefix("Identification: ")?;
    let (identification, rest) = rest.split_once("\nRoot Cause: ")?;
    let (root_cause, resolution) = rest.split_once("\nResolution: ")?;
    Some(FaultAnalysis {
        id: id.to_string(),
        identification: identification.to_string(),
        root_cause: root_cause.to_string(),
        resolution: resolution.to_string(),
    })
}

/// JSONL ticket record: a ticket plus its optional team label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TicketRecord {
    pub id: String,
    #[serde(default)]
    pub product_name: String,
    #[serde(default)]
    pub hardware_unit: String,
    #[serde(default)]
    pub software_build: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub problem_description: String,
    #[serde(default)]
    pub log_snippets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team_label: Option<String>,
}

impl TicketRecord {
    pub fn from_ticket(t: &Ticket, team_label: Option<&TeamLabel>) -> Self {
        TicketRecord {
            id: t.id.clone(),
            product_name: t.product_name.clone(),
            hardware_unit: t.hardware_unit.clone(),
            software_build: t.software_build.clone(),
            title: t.title.clone(),
            problem_description: t.problem_description.clone(),
            log_snippets: t.log_snippets.clone(),
            team_label: team_label.map(|l| l.as_str().to_string()),
        }
    }

    pub fn ticket(&self) -> Ticket {
        Ticket {
            id: self.id.clone(),
            product_name: self.product_name.clone(),
            hardware_unit: self.hardware_unit.clone(),
            software_build: self.software_build.clone(),
            title: self.title.clone(),
            problem_description: self.problem_description.clone(),
            log_snippets: self.log_snippets.clone(),
        }
    }
}

/// JSONL fault-analysis record: a report plus the tickets it resolves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultAnalysisRecord {
    pub id: String,
    #[serde(default)]
    pub identification: String,
    #[serde(default)]
    pub root_cause: String,
    #[serde(default)]
    pub resolution: String,
    #[serde(default)]
    pub ticket_ids: Vec<String>,
}

impl FaultAnalysisRecord {
    pub fn fault_analysis(&self) -> FaultAnalysis {
        FaultAnalysis {
            id: self.id.clone(),
            identification: self.identification.clone(),
            root_cause: self.root_cause.clone(),
            resolution: self.resolution.clone(),
        }
    }
}
