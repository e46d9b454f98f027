//! Drives an evaluation with an external judge command. The example doubles as
//! its own judge: run with `--judge` it reads one request from stdin and
//! prefers the longer output, ties on equal length.
//!
//!     cargo run --example external_judge

use std::io::{BufRead, Write};
use std::time::Duration;

use serde::Deserialize;
use unicbe::judges::{CommandSpec, ExternalJudge};
use unicbe::session::StepOutcome;
use unicbe::{Session, SessionConfig};

#[derive(Deserialize)]
struct Request {
    output_1: String,
    output_2: String,
}

fn judge_stdin() -> anyhow::Result<()> {
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line)?;
    let req: Request = serde_json::from_str(&line)?;
    let winner = match req.output_1.len().cmp(&req.output_2.len()) {
        std::cmp::Ordering::Greater => "1",
        std::cmp::Ordering::Less => "2",
        std::cmp::Ordering::Equal => "\"tie\"",
    };
    writeln!(std::io::stdout(), "{{\"winner\": {winner}}}")?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    if std::env::args().any(|a| a == "--judge") {
        return judge_stdin();
    }

    let instructions: Vec<String> = ["name a colour", "count to three", "greet someone", "describe rain"]
        .map(String::from)
        .to_vec();
    // Verbosity grows with the model index, so the judge should rank them in order.
    let outputs: Vec<Vec<String>> = (1..=4)
        .map(|v| instructions.iter().map(|q| format!("{q}: {}", "more ".repeat(v))).collect())
        .collect();

    let exe = std::env::current_exe()?;
    let command = CommandSpec::new(exe.to_string_lossy(), vec!["--judge".into()]).with_timeout(Duration::from_secs(10));
    let mut judge = ExternalJudge {
        command,
        instructions,
        outputs,
    };

    let mut session = Session::with_sizes(4, 4, SessionConfig::default(), 11);
    while session.budget_used() < 16 {
        match session.step(&mut judge)? {
            StepOutcome::Recorded(r) => println!("{} vs {} on {}: r = {}", r.a, r.b, r.sample, r.r),
            StepOutcome::Exhausted => break,
        }
    }
    let scores = session.config().aggregator.aggregate(session.records(), &session.active_models())?;
    for (id, v) in scores.models.iter().zip(&scores.values) {
        println!("{id}: {:?} score {v:.3}", scores.kind);
    }
    Ok(())
}
