// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use exopipe::broker::Broker;
use exopipe::controller::live::LiveServer;
use exopipe::controller::{Controller, FilterPlacement, PipelineMode};
use exopipe::fabric::TopologyConfig;
use exopipe::harness::{self, HarnessError, ModeKind, ScenarioConfig, ScenarioKind};
use exopipe::time::SimTime;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CALIBRATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "exopipe", version, about = "Externalized packet-processing testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its samples as CSV.
    Run(RunArgs),
    /// Check that the external-mode ping RTT lands inside a band.
    Calibrate {
        /// `low,high` in milliseconds.
        #[arg(long, default_value = "24,35", value_parser = parse_band)]
        band: (f64, f64),
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build a topology and print it.
    Topo {
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        sites: Option<u32>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the edge list.
        #[arg(long)]
        dump: bool,
    },
    /// Serve the controller on local TCP sockets.
    Live {
        #[arg(long, default_value_t = 6653)]
        sb_port: u16,
        #[arg(long, default_value_t = 6654)]
        event_port: u16,
        #[arg(long, default_value_t = 6655)]
        nb_port: u16,
        #[arg(long, value_enum, default_value_t = Placement::ClientSide)]
        placement: Placement,
        /// Append every published record to this log file.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stop after this long, e.g. `30s`; serve until killed otherwise.
        #[arg(long, value_parser = humantime_duration)]
        serve_for: Option<Duration>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    placement: Option<Placement>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Output CSV; samples go to standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run independent simulations on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scenario {
    Ping,
    Throughput,
    Filter,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Internal,
    External,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Placement {
    ClientSide,
    ServerSide,
    ControllerSide,
}

impl From<Placement> for FilterPlacement {
    fn from(p: Placement) -> Self {
        match p {
            Placement::ClientSide => FilterPlacement::ClientSide,
            Placement::ServerSide => FilterPlacement::ServerSide,
            Placement::ControllerSide => FilterPlacement::ControllerSide,
        }
    }
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected low,high")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(lo)?, p(hi)?))
}

fn humantime_duration(s: &str) -> Result<Duration, String> {
    humantime::parse_duration(s).map_err(|e| e.to_string())
}

fn load(config: Option<&PathBuf>) -> Result<ScenarioConfig, HarnessError> {
    match config {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let mut cfg = load(args.config.as_ref())?;
    if let Some(s) = args.scenario {
        cfg.scenario = match s {
            Scenario::Ping => ScenarioKind::Ping,
            Scenario::Throughput => ScenarioKind::Throughput,
            Scenario::Filter => ScenarioKind::FilterCompare,
        };
    }
    if let Some(m) = args.mode {
        cfg.mode = match m {
            Mode::Internal => ModeKind::Internal,
            Mode::External => ModeKind::External,
        };
    }
    if let Some(p) = args.placement {
        cfg.placement = p.into();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.repetitions {
        cfg.repetitions = r;
    }
    cfg.parallel |= args.parallel;
    cfg.validate()?;
    let samples = harness::run(&cfg)?;
    match &args.out {
        Some(path) => {
            harness::emit_csv(&samples, path)?;
            for s in harness::summarize(&samples) {
                println!("{s}");
            }
        }
        None => {
            harness::write_csv(&samples, std::io::stdout().lock())?;
            for s in harness::summarize(&samples) {
                eprintln!("{s}");
            }
        }
    }
    Ok(())
}

fn topo(k: Option<u32>, sites: Option<u32>, config: Option<&PathBuf>, dump: bool) -> Result<(), HarnessError> {
    let mut t: TopologyConfig = load(config)?.topology;
    t.k = k.unwrap_or(t.k);
    t.sites = sites.unwrap_or(t.sites);
    let g = t.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    if dump {
        print!("{}", g.dump_edge_list());
    } else {
        println!(
            "k={} sites={} switches={} hosts={} switch_links={}",
            t.k,
            t.sites,
            g.switches.len(),
            g.hosts.len(),
            g.switch_link_set().len()
        );
    }
    Ok(())
}

fn live(
    ports: (u16, u16, u16),
    placement: FilterPlacement,
    log: Option<PathBuf>,
    serve_for: Option<Duration>,
) -> anyhow::Result<()> {
    let mut broker = Broker::new(SimTime::ZERO);
    if let Some(path) = &log {
        broker = broker
            .with_persistence(path)
            .with_context(|| format!("opening {}", path.display()))?;
    }
    let ctl = Controller::new(PipelineMode::External { placement }, Default::default(), broker, 1)?;
    let server = LiveServer::bind(
        ctl,
        ("127.0.0.1", ports.0),
        ("127.0.0.1", ports.1),
        ("127.0.0.1", ports.2),
    )
    .context("binding sockets")?;
    let handle = server.spawn()?;
    println!(
        "southbound {} events {} northbound {}",
        handle.addrs.sb, handle.addrs.event, handle.addrs.nb
    );
    match serve_for {
        Some(d) => {
            std::thread::sleep(d);
            handle.with_controller(|c| c.broker_mut().flush())?;
            handle.shutdown();
        }
        None => handle.join(),
    }
    Ok(())
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) | HarnessError::InvalidBand { .. } => EXIT_CONFIG,
        HarnessError::CalibrationOutOfBand { .. } => EXIT_CALIBRATION,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args),
        Command::Calibrate { band, config } => load(config.as_ref()).and_then(|cfg| {
            let m = harness::calibrate(&cfg, band)?;
            println!(
                "calibrated: rest_install={:?} rpc_packet_out={:?} internal_processing={:?} broker_delay={:?}",
                Duration::from(m.rest_install_delay),
                Duration::from(m.rpc_packet_out_delay),
                Duration::from(m.internal_processing_delay),
                Duration::from(cfg.broker.delay)
            );
            Ok(())
        }),
        Command::Topo {
            k,
            sites,
            config,
            dump,
        } => topo(k, sites, config.as_ref(), dump),
        Command::Live {
            sb_port,
            event_port,
            nb_port,
            placement,
            log,
            serve_for,
        } => {
            return match live((sb_port, event_port, nb_port), placement.into(), log, serve_for) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_FAILURE)
                }
            };
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
