//! Command-line client for the rtlmend service.
//!
//! Without `--server`, an embedded service is started on a loopback port and
//! every subcommand talks to it over HTTP, same as against a remote server.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rtlmend_api as api;
use rtlmend_client::Client;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "rtlmend", version, about = "Verilog-subset verification and repair pipeline")]
struct Cli {
    /// Service URL; when omitted an embedded service is started.
    #[arg(long, global = true)]
    server: Option<String>,
    /// JSON config file for session/campaign settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Repair backend: scripted | remote | oracle | null.
    #[arg(long, global = true, default_value = "null")]
    backend: String,
    /// Fixture file for the scripted backend (call index -> response JSON).
    #[arg(long, global = true)]
    scripted: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lint a source file; warnings print as JSON lines.
    Lint {
        file: PathBuf,
        /// Apply W1-W3 template fixes and print the fixed source.
        #[arg(long)]
        fix: bool,
    },
    /// Simulate a design and export the trace.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value = "random")]
        mode: String,
        #[arg(long, default_value_t = 256)]
        cycles: u64,
        /// Directed mode: JSON file with per-cycle input rows, e.g. [[1,0],[0,1]].
        #[arg(long)]
        sequences: Option<PathBuf>,
        /// Write a VCD dump here.
        #[arg(long)]
        vcd: Option<PathBuf>,
        /// Write the JSON trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Build a mutation benchmark from a corpus directory.
    Inject {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_kind: usize,
    },
    /// Differential verification of a DUT against a golden model.
    Verify {
        #[arg(long)]
        dut: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        /// Print the full JSONL check log instead of just the summary.
        #[arg(long)]
        log: bool,
    },
    /// Run one repair session.
    Repair {
        #[arg(long)]
        dut: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        /// Design-specification prose handed to the repair backend.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// pair | whole-file
        #[arg(long, default_value = "pair")]
        mode: String,
        /// Persist session artifacts (v{N}.v, session.json) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Oracle backend: the injected snippet to reverse.
        #[arg(long)]
        oracle_wrong: Option<String>,
        #[arg(long)]
        oracle_right: Option<String>,
    },
    /// Run a benchmark campaign over a corpus.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        /// Reuse a benchmark directory produced by `inject` instead of
        /// building mutants again.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        per_kind: usize,
    },
    /// Render a campaign.json into a summary table and heat-map CSV.
    Report {
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (base, _embedded) = match &cli.server {
        Some(url) => (url.clone(), None),
        None => {
            let addr = start_embedded_service()?;
            (format!("http://{addr}"), Some(addr))
        }
    };
    let client = Client::new(&base);
    client.health().context("service is not reachable")?;
    run(&cli, &client)
}

/// Run the service on a background thread with its own runtime; the CLI
/// stays a plain blocking program.
fn start_embedded_service() -> Result<std::net::SocketAddr> {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .expect("runtime builds");
        rt.block_on(async move {
            let addr = rtlmend_service::serve("127.0.0.1:0".parse().unwrap())
                .await
                .expect("embedded service binds");
            tx.send(addr).expect("addr channel");
            // keep the runtime alive for the process lifetime
            std::future::pending::<()>().await;
        });
    });
    Ok(rx.recv()?)
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn backend_spec(cli: &Cli) -> Result<api::BackendSpec> {
    Ok(match cli.backend.as_str() {
        "null" => api::BackendSpec::Null,
        "oracle" => api::BackendSpec::Oracle { wrong: String::new(), right: String::new() },
        "scripted" => {
            let path = cli
                .scripted
                .as_ref()
                .context("--scripted FIXTURE is required with --backend scripted")?;
            let text = read(path)?;
            let map: BTreeMap<String, String> = serde_json::from_str(&text)?;
            api::BackendSpec::Scripted { responses: map }
        }
        "remote" => {
            let config = cli.config.as_ref().context("--config is required with --backend remote")?;
            let value: serde_json::Value = serde_json::from_str(&read(config)?)?;
            let remote = &value["backend"];
            api::BackendSpec::Remote {
                endpoint: remote["endpoint"].as_str().context("backend.endpoint missing")?.to_string(),
                model: remote["model"].as_str().unwrap_or("gpt-4-turbo").to_string(),
                temperature: remote["temperature"].as_f64().unwrap_or(0.2),
                key_env: remote["key_env"].as_str().unwrap_or("REPAIR_BACKEND_KEY").to_string(),
            }
        }
        other => bail!("unknown backend '{other}' (expected scripted|remote|oracle|null)"),
    })
}

fn session_config_value(cli: &Cli) -> Result<Option<serde_json::Value>> {
    match &cli.config {
        None => Ok(None),
        Some(path) => {
            let value: serde_json::Value = serde_json::from_str(&read(path)?)?;
            // the config file may carry backend settings alongside session
            // fields; strip the backend block before handing it over
            let mut obj = value.as_object().cloned().unwrap_or_default();
            obj.remove("backend");
            if obj.is_empty() {
                Ok(None)
            } else {
                Ok(Some(serde_json::Value::Object(obj)))
            }
        }
    }
}

fn run(cli: &Cli, client: &Client) -> Result<()> {
    match &cli.command {
        Command::Lint { file, fix } => {
            let resp = client.lint(&api::LintRequest { text: read(file)?, fix: *fix })?;
            // machine-readable JSON lines on stdout, human-readable on stderr
            for d in resp.diagnostics.iter().chain(resp.warnings.iter()) {
                println!("{d}");
                eprintln!(
                    "{}:{}:{}: {}: {} [{}]",
                    file.display(),
                    d["line"],
                    d["col"],
                    d["severity"].as_str().unwrap_or("?"),
                    d["message"].as_str().unwrap_or(""),
                    d["code"].as_str().unwrap_or("")
                );
            }
            if let Some(fixed) = resp.fixed_text {
                print!("{fixed}");
            }
            if !resp.ok {
                std::process::exit(1);
            }
        }
        Command::Simulate { file, mode, cycles, sequences, vcd, trace } => {
            let rows = sequences.as_ref().map(read).transpose()?.map(|t| serde_json::from_str(&t)).transpose()?;
            let resp = client.simulate(&api::SimulateRequest {
                text: read(file)?,
                mode: mode.clone(),
                seed: cli.seed,
                cycles: *cycles,
                sequences: rows,
                vcd: vcd.is_some(),
            })?;
            if let (Some(path), Some(dump)) = (vcd, &resp.vcd) {
                std::fs::write(path, dump)?;
            }
            if let Some(path) = trace {
                std::fs::write(path, serde_json::to_string_pretty(&resp.trace)?)?;
            }
            println!("simulated {} cycles", resp.horizon + 1);
        }
        Command::Inject { corpus, out, per_kind } => {
            let resp = client.inject(&api::InjectRequest {
                corpus_dir: corpus.display().to_string(),
                per_kind: *per_kind,
                seed: cli.seed,
                out_dir: Some(out.display().to_string()),
            })?;
            println!(
                "built {} mutants ({} equivalent discarded) -> {}",
                resp.mutant_count,
                resp.discarded_equivalent,
                out.display()
            );
        }
        Command::Verify { dut, golden, log } => {
            let resp = client.verify(&api::VerifyRequest {
                dut: read(dut)?,
                golden: read(golden)?,
                seeds: None,
                cycles_per_seed: None,
                master_seed: Some(cli.seed),
            })?;
            if *log {
                for line in &resp.log {
                    println!("{line}");
                }
            } else {
                println!(
                    "pass rate {:.4} ({}/{} checks), {} mismatches",
                    resp.pass_rate,
                    resp.passed_checks,
                    resp.total_checks,
                    resp.mismatches.len()
                );
            }
        }
        Command::Repair { dut, golden, spec, mode, out, oracle_wrong, oracle_right } => {
            let mut backend = backend_spec(cli)?;
            if let api::BackendSpec::Oracle { wrong, right } = &mut backend {
                *wrong = oracle_wrong.clone().unwrap_or_default();
                *right = oracle_right.clone().unwrap_or_default();
            }
            let mut config = session_config_value(cli)?.unwrap_or_else(|| serde_json::json!({}));
            config["mode"] = serde_json::Value::String(mode.clone());
            let result = client.run_session(&api::SessionRequest {
                dut: read(dut)?,
                golden: read(golden)?,
                spec_text: spec.as_ref().map(read).transpose()?.unwrap_or_default(),
                backend,
                config: Some(config),
                persist_dir: out.as_ref().map(|p| p.display().to_string()),
            })?;
            println!(
                "outcome: {} after {} iterations (final score {:.4})",
                result["outcome"].as_str().unwrap_or("?"),
                result["iterations_used"],
                result["final_score"].as_f64().unwrap_or(0.0)
            );
            if out.is_none() {
                print!("{}", result["final_text"].as_str().unwrap_or(""));
            }
        }
        Command::Bench { corpus, benchmark, out, per_kind } => {
            let result = client.run_campaign(&api::CampaignRequest {
                corpus_dir: corpus.display().to_string(),
                benchmark_dir: benchmark.as_ref().map(|p| p.display().to_string()),
                per_kind: *per_kind,
                seed: cli.seed,
                backend: backend_spec(cli)?,
                config: session_config_value(cli)?,
                workers: Some(cli.workers),
                out_dir: Some(out.display().to_string()),
            })?;
            println!(
                "HR {}/{}  FR {}/{}  (campaign.json and heatmap.csv in {})",
                result["hr"]["num"],
                result["hr"]["den"],
                result["fr"]["num"],
                result["fr"]["den"],
                out.display()
            );
        }
        Command::Report { campaign, csv } => {
            let result: rtlmend_core::campaign::CampaignResult = serde_json::from_str(&read(campaign)?)?;
            print!("{}", rtlmend_core::campaign::summary_table(&result));
            let rendered = rtlmend_core::campaign::heatmap_csv(&result);
            match csv {
                Some(path) => std::fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
        }
    }
    Ok(())
}
