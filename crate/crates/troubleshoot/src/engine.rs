//! Loaded pipeline: corpus, ranker ensemble and generator, shared by the CLI
//! and the HTTP service.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use troubleshoot_core::domain::{fault_analysis_text, ticket_text, TicketRecord};
use troubleshoot_core::fault_analysis::{
    generate_candidates, open_session, rank_candidates, CandidateFailure, CandidateReport, SessionOptions,
    TemperatureGrid, TroubleshootSession,
};
use troubleshoot_core::retrieval::Ranker;
use troubleshoot_core::routing::{route_by_generation, route_by_retrieval, RoutingMethod, RoutingPrediction};
use troubleshoot_core::text::{ByteEstimator, TokenCounter};
use troubleshoot_core::{Corpus, Embedder, Generator, LabelSet, RankerEnsemble, Ticket};

use crate::config::ServiceConfig;
use crate::error::{AppError, Result};
use crate::index_file;

pub struct Engine {
    pub config: ServiceConfig,
    pub labels: LabelSet,
    pub corpus: Corpus,
    pub ensemble: RankerEnsemble,
    pub generator: Arc<dyn Generator>,
    pub counter: Arc<dyn TokenCounter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedTicket {
    pub ticket_id: String,
    pub score: f64,
    pub fault_analysis_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResult {
    pub items: Vec<RetrievedTicket>,
    pub empty_intersection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResult {
    /// Descending by ensemble score; the head is the selected report.
    pub candidates: Vec<CandidateReport>,
    pub failures: Vec<CandidateFailure>,
}

/// (ticket text, report text) for every linked ticket, used as mock memory.
pub fn memory_pairs(corpus: &Corpus) -> Vec<(String, String)> {
    corpus
        .tickets()
        .filter_map(|t| corpus.fault_of(&t.id).map(|f| (ticket_text(t), fault_analysis_text(f))))
        .collect()
}

/// Loads per-ranker index files from `dir` when all exist, else builds and
/// writes them.
pub fn load_or_build_ensemble(
    embedders: Vec<Arc<dyn Embedder>>,
    corpus: &Corpus,
    dir: Option<&Path>,
) -> Result<RankerEnsemble> {
    let Some(dir) = dir else {
        return Ok(RankerEnsemble::build(embedders, corpus)?);
    };
    let paths: Vec<_> = (0..embedders.len()).map(|i| index_file::ranker_path(dir, i)).collect();
    if paths.iter().all(|p| p.exists()) {
        let rankers = embedders
            .into_iter()
            .zip(&paths)
            .map(|(embedder, p)| {
                Ok(Ranker {
                    embedder,
                    index: index_file::read(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return RankerEnsemble::from_rankers(rankers, corpus).map_err(|e| {
            AppError::Config(format!("index at {} does not match the corpus ({e}); rebuild it", dir.display()))
        });
    }
    build_and_write(embedders, corpus, dir)
}

pub fn build_and_write(embedders: Vec<Arc<dyn Embedder>>, corpus: &Corpus, dir: &Path) -> Result<RankerEnsemble> {
    let ensemble = RankerEnsemble::build(embedders, corpus)?;
    for (i, r) in ensemble.rankers().iter().enumerate() {
        index_file::write(&index_file::ranker_path(dir, i), &r.index)?;
    }
    Ok(ensemble)
}

impl Engine {
    /// Loads the corpus named by the config and its index.
    pub fn load(config: ServiceConfig) -> Result<Self> {
        let labels = config.label_set()?;
        let corpus = crate::io::load_corpus(&config.corpus, &labels)?;
        Self::from_corpus(config, corpus)
    }

    pub fn from_corpus(config: ServiceConfig, corpus: Corpus) -> Result<Self> {
        if let Some(rc) = &config.root_causes {
            corpus.check_root_causes(rc)?;
        }
        let embedders = config.build_embedders()?;
        let ensemble = load_or_build_ensemble(embedders, &corpus, config.index.as_deref())?;
        let generator = config.build_generator(|| memory_pairs(&corpus));
        Self::from_parts(config, corpus, ensemble, generator)
    }

    /// Rebuilds the index from scratch (overwriting index files) for a new corpus.
    pub fn rebuild(config: ServiceConfig, corpus: Corpus) -> Result<Self> {
        let embedders = config.build_embedders()?;
        let ensemble = match config.index.as_deref() {
            Some(dir) => build_and_write(embedders, &corpus, dir)?,
            None => RankerEnsemble::build(embedders, &corpus)?,
        };
        let generator = config.build_generator(|| memory_pairs(&corpus));
        Self::from_parts(config, corpus, ensemble, generator)
    }

    pub fn from_parts(
        config: ServiceConfig,
        corpus: Corpus,
        ensemble: RankerEnsemble,
        generator: Arc<dyn Generator>,
    ) -> Result<Self> {
        Ok(Engine {
            labels: config.label_set()?,
            config,
            corpus,
            ensemble,
            generator,
            counter: Arc::new(ByteEstimator),
        })
    }

    /// A ticket from the corpus by id, or an inline record.
    pub fn resolve_ticket(&self, ticket_id: Option<&str>, inline: Option<&TicketRecord>) -> Result<Ticket> {
        match (ticket_id, inline) {
            (Some(_), Some(_)) => Err(AppError::Validation("give either ticket_id or ticket, not both".into())),
            (Some(id), None) => self
                .corpus
                .ticket(id)
                .cloned()
                .ok_or_else(|| AppError::NotFound(format!("ticket `{id}`"))),
            (None, Some(r)) => Ok(r.ticket()),
            (None, None) => Err(AppError::Validation("ticket_id or ticket is required".into())),
        }
    }

    pub fn retrieve(&self, ticket: &Ticket, k: usize) -> Result<RetrieveResult> {
        if k == 0 {
            return Err(AppError::Validation("k must be >= 1".into()));
        }
        let order = self.config.defaults.candidate_order.max(k);
        let res = self.ensemble.consensus_retrieve(ticket, order, k)?;
        Ok(RetrieveResult {
            items: res
                .items
                .into_iter()
                .map(|i| RetrievedTicket {
                    fault_analysis_id: self.corpus.fault_id_of(&i.item_id).map(String::from),
                    ticket_id: i.item_id,
                    score: i.score,
                })
                .collect(),
            empty_intersection: res.empty_intersection,
        })
    }

    pub fn route_retrieval(&self, ticket: &Ticket) -> Result<RoutingPrediction> {
        let d = &self.config.defaults;
        Ok(route_by_retrieval(
            &self.ensemble,
            &self.corpus,
            &self.labels,
            ticket,
            d.route_k,
            d.candidate_order,
        )?)
    }

    pub fn route(&self, ticket: &Ticket, method: RoutingMethod, seed: u64) -> Result<RoutingPrediction> {
        match method {
            RoutingMethod::Retrieval => self.route_retrieval(ticket),
            RoutingMethod::Generative => Ok(route_by_generation(
                self.generator.as_ref(),
                ticket,
                &self.labels,
                seed,
                || {
                    self.route_retrieval(ticket).map_err(|e| match e {
                        AppError::Core(c) => c,
                        other => troubleshoot_core::Error::InvalidArgument(other.to_string()),
                    })
                },
            )?),
        }
    }

    pub fn analyze(&self, ticket: &Ticket, grid: Option<&TemperatureGrid>, seed: u64) -> Result<AnalyzeResult> {
        let grid = grid.unwrap_or(&self.config.defaults.grid);
        let batch = generate_candidates(self.generator.as_ref(), ticket, grid, seed)?;
        let candidates = rank_candidates(&self.ensemble, ticket, batch.candidates)?;
        Ok(AnalyzeResult {
            candidates,
            failures: batch.failures,
        })
    }

    pub fn open_session(
        &self,
        ticket: &Ticket,
        token_budget: Option<usize>,
        seed: u64,
        session_id: String,
        created_at: u64,
    ) -> Result<TroubleshootSession> {
        let options = SessionOptions {
            token_budget: token_budget.unwrap_or(self.config.defaults.token_budget),
            temperature: self.config.defaults.rag_temperature,
            seed,
        };
        if options.token_budget == 0 {
            return Err(AppError::Validation("token_budget must be >= 1".into()));
        }
        Ok(open_session(
            &self.ensemble,
            &self.corpus,
            self.generator.as_ref(),
            self.counter.as_ref(),
            ticket,
            options,
            session_id,
            created_at,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use troubleshoot_core::synthetic::{generate, SyntheticConfig};

    fn small_config() -> ServiceConfig {
        let mut cfg = ServiceConfig::default();
        cfg.embedders.truncate(2);
        for e in &mut cfg.embedders {
            if let crate::config::EmbedderSpec::Mock { dimension, .. } = e {
                *dimension = 64;
            }
        }
        cfg
    }

    #[test]
    fn index_files_are_reused() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.index = Some(dir.path().join("idx"));
        let corpus = generate(
            &SyntheticConfig {
                tickets: 40,
                faults: 10,
                seed: 2,
                ..Default::default()
            },
            &LabelSet::default(),
        )
        .unwrap();
        let a = Engine::from_corpus(cfg.clone(), corpus.clone()).unwrap();
        assert!(index_file::ranker_path(&dir.path().join("idx"), 1).exists());
        let b = Engine::from_corpus(cfg.clone(), corpus.clone()).unwrap();
        let t = corpus.tickets().next().unwrap().clone();
        assert_eq!(a.retrieve(&t, 5).unwrap(), b.retrieve(&t, 5).unwrap());

        let smaller = corpus.restrict_tickets(&corpus.tickets().skip(1).map(|t| t.id.clone()).collect());
        assert!(matches!(Engine::from_corpus(cfg, smaller), Err(AppError::Config(_))));
    }
}
