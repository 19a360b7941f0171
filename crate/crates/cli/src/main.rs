//! `predictability`: scriptable pipelines from raw trajectories to entropy,
//! predictability bounds, predictor accuracy and criticality diagnostics.
//!
//! Exit status is 0 on success, 2 for usage errors, 3 for data errors and
//! 4 for numeric failures. Errors are one JSON object per line on stderr.

mod analysis;
mod args;
mod ingest;
mod report;
mod run;
mod synth;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use run::{CliError, CliResult, Run};

fn dispatch(run: &mut Run, command: &Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest::ingest(run, a),
        Command::Entropy(a) => analysis::entropy_cmd(run, a),
        Command::Bound(a) => analysis::bound_cmd(run, a),
        Command::Predict(a) => analysis::predict_cmd(run, a),
        Command::Mi(a) => analysis::mi_cmd(run, a),
        Command::Fit(a) => analysis::fit_cmd(run, a),
        Command::Rank(a) => analysis::rank_cmd(run, a),
        Command::Dwell(a) => ingest::dwell(run, a),
        Command::Synth(a) => synth::synth_cmd(run, a),
        Command::Report(a) => report::report_cmd(run, a),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let message = first.strip_prefix("error: ").unwrap_or(first).to_string();
            let err = CliError::Usage(message);
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(err.exit_code());
        }
    };
    let parameters = serde_json::to_value(&cli.command).unwrap_or_default();
    let mut run = Run::new(argv, parameters, cli.jobs);
    match dispatch(&mut run, &cli.command).and_then(|()| run.finish()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}
