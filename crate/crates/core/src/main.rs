use std::io::{self, Write};
use std::process::ExitCode;

use faraday_edr::cli;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stderr = &mut io::stderr();
    if let Err(e) = cli::init_threads() {
        let _ = writeln!(stderr, "error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let code = cli::run(std::env::args_os(), &mut out, stderr);
    if out.flush().is_err() && code == 0 {
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
