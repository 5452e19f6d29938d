use clap::Parser;

use eel_core::cli::{run, CliConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = std::env::var("EEL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not configure {threads} threads: {e}");
        }
    }
    let config = CliConfig::parse();
    let outcome = run(&config);
    if let Some(err) = &outcome.error {
        eprintln!("error: {err}");
    } else if config.out.is_none() {
        print!("{}", outcome.output);
    }
    std::process::exit(outcome.code);
}
