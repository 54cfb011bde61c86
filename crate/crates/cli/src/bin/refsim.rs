//! Reference simulator. Reads an input XML, writes `collected.csv` and
//! `spatial.<k>.csv` into the output directory.

use std::path::PathBuf;

use clap::Parser;

#[derive(Parser)]
#[command(name = "refsim", version, about = "Seeded foraging simulator used as the reference platform")]
struct Cli {
    #[arg(long)]
    input: PathBuf,
    /// Must match the seed in the input file when given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "output")]
    output: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    match xbatch_core::refplat::run_refsim(&cli.input, &cli.output, cli.seed) {
        Ok(out) => {
            let total = out.collected.last().copied().unwrap_or(0);
            println!("refsim: {} ticks, {total} objects collected", out.collected.len());
        }
        Err(e) => {
            eprintln!("refsim: {e}");
            std::process::exit(1);
        }
    }
}
