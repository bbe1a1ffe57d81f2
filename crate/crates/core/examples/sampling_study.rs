//! Useful-sample ratio and endpoint spread for each control sampling strategy.
//!
//! ```text
//! cargo run -p kinolazy --example sampling_study -- 125 20
//! ```

use kinolazy::bench::{run_sample_eval, SampleEvalConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let m = args.next().and_then(|a| a.parse().ok()).unwrap_or(125);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let cfg = SampleEvalConfig {
        m,
        seeds: (0..seeds).collect(),
        ..SampleEvalConfig::default()
    };
    let report = run_sample_eval(&cfg).expect("valid sampling config");
    println!(
        "M = {m}, tau = {} s, u_max = {}, {seeds} seeds, rest start",
        cfg.tau, cfg.u_max
    );
    print!("{}", report.format_table());
}
