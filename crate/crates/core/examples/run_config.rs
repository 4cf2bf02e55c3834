//! Run any experiment from a TOML file, as the `ftlab` binary does.
//!
//! ```text
//! cargo run --release --example run_config -- configs/gamma_1d.toml out/gamma
//! ```

use std::path::PathBuf;

use ftlab::config::ExperimentConfig;
use ftlab::experiments::run;

fn main() -> ftlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/convex_1d.toml"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ftlab-example"));
    let config = ExperimentConfig::from_path(&path)?;
    println!("{} experiment, config hash {}", config.kind.name(), config.hash);
    let outcome = run(&config, None, &out)?;
    print!("{}", outcome.report.render());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
