//! `ztiam` — administrator command line.
//!
//! Pure verbs (`policy lint`, `policy eval`, `trust score`) run the engines
//! in-process; stateful verbs (`device enroll`, `events tail`) talk to a
//! running gateway over HTTP; `serve` runs the gateway itself.
//!
//! Exit codes: 0 success, 1 operational error, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use ztiam_core::policy::{evaluate, parse_policy_set, parse_request_context, PdpDecision};
use ztiam_core::trust::{combine_decision, trust_score, TrustConfig, TrustFactors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    /// Human-readable lines.
    Text,
    /// One JSON record per result line.
    Structured,
}

#[derive(Parser)]
#[command(name = "ztiam", version, about = "Zero-trust IAM service and tooling")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the gateway until interrupted.
    Serve {
        #[arg(long, env = "ZTIAM_CONFIG")]
        config: PathBuf,
    },
    /// Policy authoring tools.
    Policy {
        #[command(subcommand)]
        cmd: PolicyCmd,
    },
    /// Device identity operations against a running gateway.
    Device {
        #[command(subcommand)]
        cmd: DeviceCmd,
    },
    /// Trust-score what-ifs.
    Trust {
        #[command(subcommand)]
        cmd: TrustCmd,
    },
    /// Audit log inspection against a running gateway.
    Events {
        #[command(subcommand)]
        cmd: EventsCmd,
    },
}

#[derive(Subcommand)]
enum PolicyCmd {
    /// Validate a policy document and print diagnostics.
    Lint {
        #[arg(long)]
        file: PathBuf,
    },
    /// Evaluate a policy document against a request context document.
    Eval {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        context: PathBuf,
    },
}

#[derive(Subcommand)]
enum DeviceCmd {
    /// Enroll a device public key and write the issued certificate.
    Enroll {
        #[arg(long)]
        id: String,
        /// Path to the device's public key (SubjectPublicKeyInfo PEM).
        #[arg(long)]
        pubkey: PathBuf,
        #[arg(long, env = "ZTIAM_SERVER", default_value = "http://127.0.0.1:8443")]
        server: String,
        #[arg(long, env = "ZTIAM_ADMIN_TOKEN", hide_env_values = true)]
        admin_token: String,
        /// Where to write the issued certificate PEM.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the CA certificate PEM.
        #[arg(long)]
        ca_out: Option<PathBuf>,
        #[arg(long, default_value_t = 365)]
        days: u32,
    },
}

#[derive(Subcommand)]
enum TrustCmd {
    /// Score a factor vector and show the outcome for every PDP decision.
    Score {
        /// Comma-separated factors, e.g. f_geo=1.0,f_res=0.5,f_hist=0.8,f_pen=1.0,f_meta=0.0
        #[arg(long)]
        factors: String,
        /// Service config supplying weights and threshold; defaults otherwise.
        #[arg(long, env = "ZTIAM_CONFIG")]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EventsCmd {
    /// Print audit events in sequence order.
    Tail {
        #[arg(long, env = "ZTIAM_SERVER", default_value = "http://127.0.0.1:8443")]
        server: String,
        #[arg(long, env = "ZTIAM_ADMIN_TOKEN", hide_env_values = true)]
        admin_token: String,
        /// Start after this sequence number.
        #[arg(long, default_value_t = 0)]
        after: u64,
        /// Keep polling for new events.
        #[arg(long)]
        follow: bool,
    },
}

/// Operational (exit 1) vs usage (exit 2) failure.
enum Failure {
    Op(String),
    Usage(String),
}

impl Failure {
    fn op(e: impl std::fmt::Display) -> Self {
        Failure::Op(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Op(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.output;
    match cli.command {
        Command::Serve { config } => serve(&config),
        Command::Policy {
            cmd: PolicyCmd::Lint { file },
        } => lint(&file, out),
        Command::Policy {
            cmd: PolicyCmd::Eval { file, context },
        } => eval(&file, &context, out),
        Command::Device {
            cmd:
                DeviceCmd::Enroll {
                    id,
                    pubkey,
                    server,
                    admin_token,
                    out: dest,
                    ca_out,
                    days,
                },
        } => enroll(
            &id,
            &pubkey,
            &server,
            &admin_token,
            dest.as_deref(),
            ca_out.as_deref(),
            days,
            out,
        ),
        Command::Trust {
            cmd: TrustCmd::Score { factors, config },
        } => score(&factors, config.as_deref(), out),
        Command::Events {
            cmd:
                EventsCmd::Tail {
                    server,
                    admin_token,
                    after,
                    follow,
                },
        } => tail(&server, &admin_token, after, follow, out),
    }
}

fn serve(config: &std::path::Path) -> Result<(), Failure> {
    use ztiam_core::pki::{master_key_from_env, MASTER_KEY_ENV};

    let cfg = ztiam_core::config::ServiceConfig::load(config).map_err(Failure::op)?;
    let master_key = match std::env::var_os(MASTER_KEY_ENV) {
        Some(_) => master_key_from_env(MASTER_KEY_ENV).map_err(Failure::op)?,
        None => {
            // without a configured key the keystore cannot outlive the process
            eprintln!("{MASTER_KEY_ENV} not set; using an ephemeral keystore key");
            let mut key = [0u8; 32];
            rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut key);
            key
        }
    };

    let listen: std::net::SocketAddr = cfg.listen.parse().map_err(Failure::op)?;
    let tls = cfg.tls.clone();
    let state = ztiam_gateway::AppState::new(cfg, &master_key).map_err(Failure::op)?;

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::op)?;
    rt.block_on(async move {
        let served = async {
            if tls.enabled {
                let cert = std::fs::read_to_string(tls.cert.as_ref().expect("validated"))?;
                let key = std::fs::read_to_string(tls.key.as_ref().expect("validated"))?;
                let client_ca = if tls.require_client_cert {
                    Some(state.pki.ca_cert_pem().map_err(std::io::Error::other)?)
                } else {
                    None
                };
                let config = ztiam_gateway::server_tls_config(&cert, &key, client_ca.as_deref())
                    .map_err(std::io::Error::other)?;
                eprintln!("listening on https://{listen}");
                ztiam_gateway::serve_tls(state, listen, config).await
            } else {
                let listener = tokio::net::TcpListener::bind(listen).await?;
                eprintln!("listening on http://{listen}");
                ztiam_gateway::serve_plain(state, listener).await
            }
        };
        tokio::select! {
            r = served => r,
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
    .map_err(Failure::op)
}

fn lint(file: &std::path::Path, out: Output) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file).map_err(Failure::op)?;
    match parse_policy_set(&text) {
        Ok(set) => {
            let rules: usize = set.policies.iter().map(|p| p.rules.len()).sum();
            match out {
                Output::Text => println!("ok: {} policies, {} rules", set.policies.len(), rules),
                Output::Structured => println!(
                    "{}",
                    json!({ "ok": true, "policies": set.policies.len(), "rules": rules })
                ),
            }
            Ok(())
        }
        Err(e) => {
            if out == Output::Structured {
                println!("{}", json!({ "ok": false, "diagnostic": e.to_string() }));
            }
            Err(Failure::op(e))
        }
    }
}

fn eval(file: &std::path::Path, context: &std::path::Path, out: Output) -> Result<(), Failure> {
    let policy_text = std::fs::read_to_string(file).map_err(Failure::op)?;
    let set = parse_policy_set(&policy_text).map_err(Failure::op)?;
    let context_text = std::fs::read_to_string(context).map_err(Failure::op)?;
    let ctx = parse_request_context(&context_text, ztiam_core::unix_now()).map_err(Failure::op)?;
    let decision = evaluate(&set, &ctx);
    match out {
        Output::Text => println!("{decision}"),
        Output::Structured => println!("{}", json!({ "decision": decision })),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn enroll(
    id: &str,
    pubkey: &std::path::Path,
    server: &str,
    admin_token: &str,
    dest: Option<&std::path::Path>,
    ca_out: Option<&std::path::Path>,
    days: u32,
    out: Output,
) -> Result<(), Failure> {
    let public_key_pem = std::fs::read_to_string(pubkey).map_err(Failure::op)?;
    let response = ureq::post(&format!("{server}/v1/device/enroll"))
        .set("authorization", &format!("Bearer {admin_token}"))
        .send_json(json!({
            "device_id": id,
            "public_key_pem": public_key_pem,
            "validity_days": days,
        }))
        .map_err(api_failure)?;
    let body: serde_json::Value = response.into_json().map_err(Failure::op)?;
    let cert = body["certificate_pem"]
        .as_str()
        .ok_or_else(|| Failure::Op(format!("response lacks certificate_pem: {body}")))?;
    if let Some(path) = dest {
        std::fs::write(path, cert).map_err(Failure::op)?;
    }
    if let Some(path) = ca_out {
        let ca = body["ca_cert_pem"].as_str().unwrap_or_default();
        std::fs::write(path, ca).map_err(Failure::op)?;
    }
    match out {
        Output::Text => {
            println!("enrolled {id} (serial {})", body["serial"]);
            if let Some(path) = dest {
                println!("wrote {}", path.display());
            }
        }
        Output::Structured => println!(
            "{}",
            json!({
                "device_id": id,
                "serial": body["serial"],
                "certificate": dest.map(|p| p.display().to_string()),
            })
        ),
    }
    Ok(())
}

fn score(factors: &str, config: Option<&std::path::Path>, out: Output) -> Result<(), Failure> {
    let cfg = match config {
        Some(path) => ztiam_core::config::ServiceConfig::load(path)
            .map_err(Failure::op)?
            .trust_config()
            .map_err(Failure::op)?,
        None => TrustConfig::default(),
    };
    let f = parse_factors(factors)?;
    let score = trust_score(&f, &cfg);
    let outcomes: Vec<(PdpDecision, _)> = [
        PdpDecision::Permit,
        PdpDecision::Deny,
        PdpDecision::Indeterminate,
        PdpDecision::NotApplicable,
    ]
    .into_iter()
    .map(|d| (d, combine_decision(d, score, cfg.threshold)))
    .collect();
    match out {
        Output::Text => {
            println!("score {score:.4}");
            println!("threshold {:.4}", cfg.threshold);
            for (pdp, outcome) in outcomes {
                println!("{pdp} -> {outcome:?}");
            }
        }
        Output::Structured => {
            let map: serde_json::Map<String, serde_json::Value> = outcomes
                .into_iter()
                .map(|(pdp, o)| (pdp.to_string(), json!(format!("{o:?}"))))
                .collect();
            println!(
                "{}",
                json!({ "score": score, "threshold": cfg.threshold, "outcomes": map })
            );
        }
    }
    Ok(())
}

fn parse_factors(spec: &str) -> Result<TrustFactors, Failure> {
    let mut f = [None::<f64>; 5];
    const NAMES: [&str; 5] = ["f_geo", "f_res", "f_hist", "f_pen", "f_meta"];
    for part in spec.split(',') {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("factor {part:?} is not name=value")))?;
        let slot = NAMES
            .iter()
            .position(|n| *n == name.trim())
            .ok_or_else(|| Failure::Usage(format!("unknown factor {name:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("factor {name} is not a number: {value:?}")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Failure::Usage(format!(
                "factor {name} must lie in [0,1], got {v}"
            )));
        }
        f[slot] = Some(v);
    }
    let get = |i: usize| f[i].ok_or_else(|| Failure::Usage(format!("missing factor {}", NAMES[i])));
    Ok(TrustFactors {
        f_geo: get(0)?,
        f_res: get(1)?,
        f_hist: get(2)?,
        f_pen: get(3)?,
        f_meta: get(4)?,
    })
}

fn tail(
    server: &str,
    admin_token: &str,
    mut after: u64,
    follow: bool,
    out: Output,
) -> Result<(), Failure> {
    loop {
        let response = ureq::get(&format!("{server}/v1/events/tail"))
            .query("after", &after.to_string())
            .set("authorization", &format!("Bearer {admin_token}"))
            .call()
            .map_err(api_failure)?;
        let body = response.into_string().map_err(Failure::op)?;
        for line in body.lines().filter(|l| !l.trim().is_empty()) {
            let event: serde_json::Value = serde_json::from_str(line).map_err(Failure::op)?;
            after = after.max(event["event_id"].as_u64().unwrap_or(after));
            match out {
                Output::Structured => println!("{event}"),
                Output::Text => println!(
                    "{:>6} {:<18} {:<12} {}",
                    event["event_id"],
                    event["kind"].as_str().unwrap_or("?"),
                    event["principal"].as_str().unwrap_or("?"),
                    event["resource_id"].as_str().unwrap_or("-"),
                ),
            }
        }
        if !follow {
            return Ok(());
        }
        std::thread::sleep(std::time::Duration::from_millis(500));
    }
}

/// HTTP-level failures are operational; include the server's error body when
/// there is one.
fn api_failure(e: ureq::Error) -> Failure {
    match e {
        ureq::Error::Status(status, resp) => {
            let body = resp.into_string().unwrap_or_default();
            Failure::Op(format!("server returned {status}: {body}"))
        }
        other => Failure::Op(other.to_string()),
    }
}
