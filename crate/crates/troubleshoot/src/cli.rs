//! Command-line entry points.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use troubleshoot_core::curation::{
    build_pair_set, filter_reports, instruction_records, pair_records, InstructionTask,
};
use troubleshoot_core::domain::TicketRecord;
use troubleshoot_core::fault_analysis::TemperatureGrid;
use troubleshoot_core::rlrf::{build_preference_dataset, preference_records, PreferenceConfig};
use troubleshoot_core::routing::RoutingMethod;
use troubleshoot_core::synthetic::{generate, SyntheticConfig};
use troubleshoot_core::{Corpus, Ticket};

use crate::config::ServiceConfig;
use crate::engine::{build_and_write, Engine};
use crate::error::{AppError, Result};
use crate::evaluate::{self, EvalOptions, Task};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "troubleshoot", version, about = "Ticket troubleshooting pipeline")]
pub struct Cli {
    /// TOML configuration file; every key may also be set via TROUBLESHOOT_<KEY>.
    #[arg(long, global = true, env = "TROUBLESHOOT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory (tickets.jsonl, faults.jsonl).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Index directory; built on first use.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub candidate_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TicketArgs {
    /// Ticket from the corpus.
    #[arg(long, conflicts_with = "ticket")]
    pub ticket_id: Option<String>,
    /// JSON file holding one ticket record.
    #[arg(long)]
    pub ticket: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InstructionTaskArg {
    Routing,
    FaultAnalysis,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RouteMethodArg {
    Retrieval,
    Generative,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalTaskArg {
    Retrieval,
    Routing,
    Generation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop uninformative fault-analysis reports and their tickets.
    Curate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Export ticket/report and ticket/ticket training pairs.
    Pairs {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export system/user/assistant instruction records.
    ExportInstructions {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        task: InstructionTaskArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed the corpus with every ranker and write the index files.
    Index {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        index: PathBuf,
    },
    /// Consensus retrieval of similar tickets.
    Retrieve {
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        ticket: TicketArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Predict the responsible team.
    Route {
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        ticket: TicketArgs,
        #[arg(long, value_enum, default_value = "retrieval")]
        method: RouteMethodArg,
    },
    /// Generate candidate reports over the temperature grid and rank them.
    Analyze {
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        ticket: TicketArgs,
        /// Comma-separated temperature:count pairs, e.g. `0.1:5,0.5:5`.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the ranker-feedback preference dataset.
    BuildPreference {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_pathology: bool,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        p_groundtruth: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Held-out evaluation of one pipeline stage.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum)]
        task: EvalTaskArg,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 200)]
        max_queries: usize,
        /// Also score best-of-n reports with the judge prompt.
        #[arg(long)]
        judge: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus.
    GenSynthetic {
        #[arg(long, default_value_t = 500)]
        tickets: usize,
        #[arg(long, default_value_t = 120)]
        faults: usize,
        #[arg(long, default_value_t = 0.1)]
        low_information_fraction: f64,
        #[arg(long)]
        no_team_marker: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        listen: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<ServiceConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_corpus(cfg: &mut ServiceConfig, a: &CorpusArgs) {
    if let Some(c) = &a.corpus {
        cfg.corpus = c.clone();
    }
}

fn apply_engine(cfg: &mut ServiceConfig, a: &EngineArgs) -> Result<()> {
    apply_corpus(cfg, &a.corpus);
    if let Some(i) = &a.index {
        cfg.index = Some(i.clone());
    }
    if let Some(k) = a.candidate_order {
        cfg.defaults.candidate_order = k;
    }
    cfg.validate()
}

fn load_corpus(cfg: &ServiceConfig) -> Result<Corpus> {
    io::load_corpus(&cfg.corpus, &cfg.label_set()?)
}

fn ticket_of(engine: &Engine, a: &TicketArgs) -> Result<Ticket> {
    let inline = match &a.ticket {
        Some(p) => Some(
            serde_json::from_str::<TicketRecord>(&io::read_text(p)?).map_err(|e| AppError::Record {
                path: p.clone(),
                line: e.line(),
                message: e.to_string(),
            })?,
        ),
        None => None,
    };
    engine.resolve_ticket(a.ticket_id.as_deref(), inline.as_ref())
}

/// Parses `t:n,t:n`.
pub fn parse_grid(s: &str) -> Result<TemperatureGrid> {
    let bad = || AppError::Validation(format!("grid `{s}`: expected temperature:count pairs"));
    let grid = TemperatureGrid(
        s.split(',')
            .map(|part| {
                let (t, n) = part.trim().split_once(':').ok_or_else(bad)?;
                Ok((t.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<_>>>()?,
    );
    grid.validate()?;
    Ok(grid)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match out {
        Some(p) => io::write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Curate {
            corpus,
            out,
            threshold,
            top_k,
        } => {
            apply_corpus(&mut cfg, &corpus);
            let th = threshold.unwrap_or(cfg.defaults.informativeness_threshold);
            let k = top_k.unwrap_or(cfg.defaults.informativeness_top_k);
            let (kept, report) = filter_reports(&load_corpus(&cfg)?, th, k)?;
            io::save_corpus(&out, &kept)?;
            emit(
                &json!({ "kept": report.kept, "dropped": report.dropped, "kept_tickets": report.kept_tickets }),
                None,
            )
        }
        Command::Pairs { corpus, out } => {
            apply_corpus(&mut cfg, &corpus);
            let pairs = build_pair_set(&load_corpus(&cfg)?);
            io::write_jsonl(&out, &pair_records(&pairs))?;
            emit(
                &json!({
                    "implicit": pairs.implicit_pairs.len(),
                    "explicit": pairs.explicit_pairs.len(),
                    "total": pairs.len(),
                }),
                None,
            )
        }
        Command::ExportInstructions { corpus, task, out } => {
            apply_corpus(&mut cfg, &corpus);
            let task = match task {
                InstructionTaskArg::Routing => InstructionTask::Routing,
                InstructionTaskArg::FaultAnalysis => InstructionTask::FaultAnalysis,
            };
            let n = io::write_jsonl(&out, &instruction_records(&load_corpus(&cfg)?, task)?)?;
            emit(&json!({ "records": n }), None)
        }
        Command::Index { corpus, index } => {
            apply_corpus(&mut cfg, &corpus);
            let c = load_corpus(&cfg)?;
            let ens = build_and_write(cfg.build_embedders()?, &c, &index)?;
            emit(
                &json!({ "rankers": ens.len(), "tickets": c.ticket_count(), "fault_analyses": c.fault_count() }),
                None,
            )
        }
        Command::Retrieve { engine, ticket, k } => {
            apply_engine(&mut cfg, &engine)?;
            let e = Engine::load(cfg)?;
            let t = ticket_of(&e, &ticket)?;
            emit(&e.retrieve(&t, k)?, None)
        }
        Command::Route { engine, ticket, method } => {
            apply_engine(&mut cfg, &engine)?;
            let e = Engine::load(cfg)?;
            let t = ticket_of(&e, &ticket)?;
            let method = match method {
                RouteMethodArg::Retrieval => RoutingMethod::Retrieval,
                RouteMethodArg::Generative => RoutingMethod::Generative,
            };
            let seed = e.config.seed;
            emit(&e.route(&t, method, seed)?, None)
        }
        Command::Analyze {
            engine,
            ticket,
            grid,
            out,
        } => {
            apply_engine(&mut cfg, &engine)?;
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let e = Engine::load(cfg)?;
            let t = ticket_of(&e, &ticket)?;
            let seed = e.config.seed;
            emit(&e.analyze(&t, grid.as_ref(), seed)?, out.as_deref())
        }
        Command::BuildPreference {
            engine,
            out,
            include_pathology,
            tau,
            p_groundtruth,
            threshold,
        } => {
            apply_engine(&mut cfg, &engine)?;
            let d = &cfg.defaults;
            let pc = PreferenceConfig {
                grid: d.preference_grid.clone(),
                tau: tau.unwrap_or(d.tau),
                p_groundtruth: p_groundtruth.unwrap_or(d.p_groundtruth),
                pathology_threshold: threshold.unwrap_or(d.pathology_threshold),
                include_pathology,
                seed: cfg.seed,
            };
            pc.validate()?;
            let e = Engine::load(cfg)?;
            let ds = build_preference_dataset(&e.corpus, e.generator.as_ref(), &e.ensemble, &pc)?;
            let n = io::write_jsonl(&out, &preference_records(&e.corpus, &ds.triples))?;
            emit(&json!({ "triples": n, "skipped": ds.skipped }), None)
        }
        Command::Evaluate {
            corpus,
            task,
            test_fraction,
            max_queries,
            judge,
            format,
            out,
        } => {
            apply_corpus(&mut cfg, &corpus);
            let opts = EvalOptions {
                task: match task {
                    EvalTaskArg::Retrieval => Task::Retrieval,
                    EvalTaskArg::Routing => Task::Routing,
                    EvalTaskArg::Generation => Task::Generation,
                },
                seed: cfg.seed,
                test_fraction,
                max_queries,
                judge,
            };
            let report = evaluate::run(&cfg, &load_corpus(&cfg)?, &opts)?;
            if let Some(p) = &out {
                emit(&report, Some(p))?;
            }
            match format {
                Format::Json if out.is_none() => emit(&report, None),
                Format::Json => Ok(()),
                Format::Table => {
                    print!("{}", report.table());
                    Ok(())
                }
            }
        }
        Command::GenSynthetic {
            tickets,
            faults,
            low_information_fraction,
            no_team_marker,
            out,
        } => {
            let sc = SyntheticConfig {
                tickets,
                faults,
                seed: cfg.seed,
                low_information_fraction,
                plant_team_marker: !no_team_marker,
                ..Default::default()
            };
            let c = generate(&sc, &cfg.label_set()?)?;
            io::save_corpus(&out, &c)?;
            emit(&json!({ "tickets": c.ticket_count(), "fault_analyses": c.fault_count() }), None)
        }
        Command::Serve { engine, listen } => {
            apply_engine(&mut cfg, &engine)?;
            if let Some(l) = listen {
                cfg.listen = l;
            }
            let e = Engine::load(cfg)?;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| AppError::io("tokio runtime", e))?;
            rt.block_on(crate::service::serve(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.1:5, 0.9:2").unwrap();
        assert_eq!(g.0, vec![(0.1, 5), (0.9, 2)]);
        assert!(parse_grid("0.1").is_err());
        assert!(parse_grid("0.1:0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
