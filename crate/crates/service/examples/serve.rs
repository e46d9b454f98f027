//! Runs the annotation service.
//!
//!     cargo run -p unicbe-service --example serve -- --addr 127.0.0.1:8080 --data-dir sessions
//!
//! With `--demo` a small session is created on start and its id printed, so
//! the endpoints can be tried with curl right away.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use unicbe_service::{router, AppState, ServiceConfig, TOKEN_HEADER};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Persist sessions here and reload them on start.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Shared secret expected in the token header.
    #[arg(long, env = "UNICBE_TOKEN")]
    token: Option<String>,
    /// Minutes an assignment stays reserved.
    #[arg(long, default_value_t = 10)]
    ttl_minutes: u64,
    #[arg(long)]
    demo: bool,
}

fn demo_payload() -> serde_json::Value {
    let samples = ["capital of France", "2 + 2", "a haiku about rain"];
    let answers = [
        ["Paris.", "4", "Rain taps the window / grey streets hum a quiet song / puddles hold the sky"],
        ["It is Paris, on the Seine.", "2 + 2 = 4", "rain rain rain"],
        ["Lyon", "5", "Clouds weep. The end."],
    ];
    let models = ["model-a", "model-b", "model-c"];
    let responses: serde_json::Map<String, serde_json::Value> = models
        .iter()
        .zip(answers)
        .map(|(m, row)| {
            let row: serde_json::Map<String, serde_json::Value> = samples
                .iter()
                .zip(row)
                .map(|(s, a)| (s.to_string(), a.into()))
                .collect();
            (m.to_string(), row.into())
        })
        .collect();
    serde_json::json!({
        "name": "demo",
        "models": models,
        "samples": samples.iter().map(|s| serde_json::json!({"name": s, "instruction": s})).collect::<Vec<_>>(),
        "responses": responses,
    })
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let state = AppState::new(ServiceConfig {
        ttl: Duration::from_secs(args.ttl_minutes * 60),
        token: args.token.clone(),
        data_dir: args.data_dir.clone(),
    })
    .context("loading sessions")?;
    for id in state.session_ids() {
        println!("restored session {id}");
    }
    let app = router(state);

    if args.demo {
        use tower::ServiceExt;
        let mut req = axum::http::Request::post("/sessions").header("content-type", "application/json");
        if let Some(t) = &args.token {
            req = req.header(TOKEN_HEADER, t);
        }
        let resp = app
            .clone()
            .oneshot(req.body(axum::body::Body::from(demo_payload().to_string()))?)
            .await?;
        let body = axum::body::to_bytes(resp.into_body(), usize::MAX).await?;
        println!("demo session: {}", String::from_utf8_lossy(&body));
    }

    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
