use std::io::{Read, Write};
use std::process::ExitCode;

use clap::Parser;
use hamtorus::cli::{execute, render, Cli, CliError, Outcome};

fn read_payload(cli: &Cli) -> Result<Option<String>, CliError> {
    if !cli.command.needs_payload() {
        return Ok(None);
    }
    let text = match &cli.input {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::Io(format!("cannot read standard input: {e}")))?;
            buf
        }
    };
    Ok(Some(text))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match read_payload(&cli) {
        Ok(payload) => execute(&cli, payload.as_deref()),
        Err(e) => Outcome { status: 1, document: e.document() },
    };
    let text = render(&outcome.document, cli.pretty);
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| format!("cannot write standard output: {e}"))
        }
    };
    if let Err(detail) = written {
        let doc = CliError::Io(detail).document();
        // stdout may be the failed sink
        let _ = std::io::stdout().lock().write_all(render(&doc, cli.pretty).as_bytes());
        return ExitCode::from(1);
    }
    ExitCode::from(outcome.status as u8)
}
