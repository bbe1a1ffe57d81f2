//! Lazy vs eager over a directory of scenarios.
//!
//! ```text
//! cargo run --release -p kinolazy --example bench_suite -- crates/core/scenarios/suite 5
//! ```

use std::path::PathBuf;

use kinolazy::bench::{load_suite, run_bench};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(
        args.next()
            .unwrap_or_else(|| "crates/core/scenarios/suite".into()),
    );
    let reps: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5);
    let report = run_bench(&load_suite(&dir)?, reps)?;
    print!("{}", report.format_table());
    Ok(())
}
