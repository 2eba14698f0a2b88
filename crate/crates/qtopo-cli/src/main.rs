use clap::Parser;
use qtopo_cli::{exit_code, tasks, Cli, ExperimentSpec};

/// Sizes the worker pool from QTOPO_THREADS before any parallel work runs.
/// Unset or empty means the library default (one worker per core).
#[cfg(feature = "parallel")]
fn init_threads() -> Result<(), String> {
    match std::env::var("QTOPO_THREADS") {
        Ok(v) if !v.is_empty() => {
            let n: usize = v
                .parse()
                .map_err(|_| format!("QTOPO_THREADS must be a positive integer, got '{v}'"))?;
            if n == 0 {
                return Err("QTOPO_THREADS must be a positive integer, got '0'".to_string());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("thread pool: {e}"))
        }
        _ => Ok(()),
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> Result<(), String> {
    Ok(())
}

fn main() {
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let spec = match ExperimentSpec::resolve(cli) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    };
    match tasks::run(&spec) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
