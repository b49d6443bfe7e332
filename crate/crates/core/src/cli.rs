//! The `vsmm` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bench::{bench_op, bench_osm, bench_smm, BenchReport};
use crate::decompose::{decompose_full, SparseMatrixCoo};
use crate::error::{Error, Result};
use crate::gcn::secure::{infer, Sources};
use crate::gcn::{accuracy, predictions, train_clear, train_secure, GraphDataset, Optimizer, SecureModel, SecureSetup, Totals, TrainConfig, TrainReport};
use crate::ring::FixedPointConfig;
use crate::runtime::NetworkModel;

pub const SEED_ENV: &str = "VSMM_SEED";

#[derive(Parser, Debug)]
#[command(name = "vsmm", version, about = "Two-party secure sparse matrix multiplication and GCN training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchProtocol {
    Smm,
    Op,
    Osm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn parse_net(s: &str) -> std::result::Result<NetworkModel, String> {
    NetworkModel::by_name(s).ok_or_else(|| format!("unknown network condition {s:?} (expected normal, nb or hl)"))
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decompose a sparse matrix given as 1-based COO text.
    Decompose {
        coo: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        frac_bits: u32,
    },
    /// Measure one protocol on random inputs.
    Bench {
        protocol: BenchProtocol,
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        edges_per_node: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the two-layer GCN on shares.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// sgd or adam
        #[arg(long, default_value = "sgd")]
        opt: Optimizer,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Learning rate; defaults depend on the optimizer.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        save_model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also train the float reference and print both accuracies.
        #[arg(long)]
        compare_clear: bool,
    },
    /// Secure forward pass of a saved model.
    Infer {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-render a train or bench report under one network condition.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_net, default_value = "normal")]
        net: NetworkModel,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Write the synthetic two-community dataset.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        nodes: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// `VSMM_SEED` wins over the flag when set.
pub fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} is not an integer: {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn emit(out: &mut dyn Write, v: &impl Serialize) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn write_or_emit(out: &mut dyn Write, path: Option<&PathBuf>, v: &impl Serialize) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, serde_json::to_string_pretty(v)? + "\n")?),
        None => emit(out, v),
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Decompose { coo, out: path, frac_bits } => {
            let cfg = FixedPointConfig::new(frac_bits)?;
            let a = SparseMatrixCoo::parse_text(&std::fs::read_to_string(coo)?, cfg)?;
            let json = decompose_full(&a)?.to_json()?;
            match path {
                Some(p) => std::fs::write(p, json + "\n")?,
                None => writeln!(out, "{json}")?,
            }
            Ok(())
        }
        Command::Bench { protocol, nodes, edges_per_node, dim, trials, seed } => {
            if nodes == 0 || dim == 0 {
                return Err(Error::Config("nodes and dim must be positive".into()));
            }
            let seed = effective_seed(seed)?;
            let r = match protocol {
                BenchProtocol::Smm => bench_smm(nodes, edges_per_node, dim, trials, seed)?,
                BenchProtocol::Op => bench_op(nodes, dim, trials, seed)?,
                BenchProtocol::Osm => bench_osm(nodes, dim, trials, seed)?,
            };
            emit(out, &r)
        }
        Command::Train { dataset, opt, epochs, seed, lr, hidden, save_model, out: path, compare_clear } => {
            let ds = GraphDataset::load(&dataset)?;
            let mut cfg = TrainConfig::new(opt, epochs, effective_seed(seed)?);
            if let Some(lr) = lr {
                cfg.eta = lr;
            }
            if let Some(h) = hidden {
                cfg.hidden = h;
            }
            let run = train_secure(&ds, &cfg)?;
            if let Some(p) = save_model {
                run.model.save(&p)?;
            }
            if compare_clear {
                let clear = train_clear(&ds, &cfg)?;
                let agree = clear.predictions.iter().zip(&run.predictions).filter(|(a, b)| a == b).count();
                eprintln!(
                    "secure test accuracy {:.4}, clear test accuracy {:.4}, prediction agreement {}/{}",
                    run.report.test_accuracy, clear.test_accuracy, agree, ds.nodes
                );
            }
            write_or_emit(out, path.as_ref(), &run.report)
        }
        Command::Infer { dataset, model, seed } => {
            let ds = GraphDataset::load(&dataset)?;
            let model = SecureModel::load(&model)?;
            let setup = SecureSetup::new(&ds, model.cfg)?;
            let (logits, meter) = infer(&setup, &model, &mut Sources::new(effective_seed(seed)?))?;
            let pred = predictions(&logits);
            let mut totals = Totals::default();
            totals.add(&meter);
            emit(
                out,
                &json!({
                    "dataset": ds.name,
                    "test_accuracy": accuracy(&pred, &ds.labels, &ds.test),
                    "predictions": pred,
                    "online_bytes": totals.online_bytes,
                    "offline_bytes": totals.offline_bytes,
                    "rounds": totals.rounds,
                    "est_time": totals.est_time(),
                }),
            )
        }
        Command::Report { input, net, format } => {
            let text = std::fs::read_to_string(&input)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            if value.get("protocol").is_some() {
                report_bench(out, &serde_json::from_value(value)?, net, format)
            } else {
                report_train(out, &serde_json::from_value(value)?, net, format)
            }
        }
        Command::GenSynthetic { out: dir, nodes, dim, seed } => {
            if nodes < 2 || dim == 0 {
                return Err(Error::Config("need at least two nodes and one feature".into()));
            }
            GraphDataset::synthetic(nodes, dim, effective_seed(seed)?).write(&dir)?;
            Ok(())
        }
    }
}

fn report_bench(out: &mut dyn Write, r: &BenchReport, net: NetworkModel, format: Format) -> Result<()> {
    let est = net.estimate(r.rounds, r.online_bits);
    match format {
        Format::Json => emit(
            out,
            &json!({
                "protocol": r.protocol,
                "net": net.name,
                "online_bytes": r.online_bytes,
                "offline_bytes": r.offline_bytes,
                "rounds": r.rounds,
                "est_time_s": est,
                "baseline": r.baseline,
            }),
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["protocol", "net", "online_bytes", "offline_bytes", "rounds", "est_time_s"])
                .map_err(|e| Error::Format(e.to_string()))?;
            w.serialize((&r.protocol, net.name, r.online_bytes, r.offline_bytes, r.rounds, est))
                .map_err(|e| Error::Format(e.to_string()))?;
            w.flush()?;
            Ok(())
        }
    }
}

fn report_train(out: &mut dyn Write, r: &TrainReport, net: NetworkModel, format: Format) -> Result<()> {
    let epochs: Vec<_> = r
        .per_epoch
        .iter()
        .map(|e| (e.epoch, e.loss, e.acc, e.online_bytes, e.rounds, net.estimate(e.rounds, e.online_bits)))
        .collect();
    let total = net.estimate(r.totals.rounds, r.totals.online_bits);
    match format {
        Format::Json => emit(
            out,
            &json!({
                "dataset": r.dataset,
                "net": net.name,
                "test_accuracy": r.test_accuracy,
                "online_bytes": r.totals.online_bytes,
                "offline_bytes": r.totals.offline_bytes,
                "rounds": r.totals.rounds,
                "est_time_s": total,
                "per_epoch": epochs.iter().map(|e| json!({
                    "epoch": e.0, "loss": e.1, "acc": e.2, "online_bytes": e.3, "rounds": e.4, "est_time_s": e.5,
                })).collect::<Vec<_>>(),
            }),
        ),
        Format::Csv => {
            let fmt = |e: csv::Error| Error::Format(e.to_string());
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["epoch", "loss", "acc", "online_bytes", "rounds", "est_time_s"]).map_err(fmt)?;
            for e in &epochs {
                w.serialize(e).map_err(fmt)?;
            }
            w.serialize(("total", "", r.test_accuracy, r.totals.online_bytes, r.totals.rounds, total)).map_err(fmt)?;
            w.flush()?;
            Ok(())
        }
    }
}

/// Parses and runs; returns the process exit code (2 for usage errors, 1 for
/// failures while running).
pub fn main_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}
