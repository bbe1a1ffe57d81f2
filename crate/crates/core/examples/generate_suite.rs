//! Write seeded random clutter scenarios as JSON files.
//!
//! ```text
//! cargo run -p kinolazy --example generate_suite -- crates/core/scenarios/suite 10
//! ```
//!
//! The bundled suite is exactly this command's output: seeds 0..10 of the
//! default generator (8 x 8 x 3 m, 0.25 m voxels, 10-30 % occupancy, 27
//! uniform controls, tau 1 s).

use std::path::PathBuf;

use kinolazy::scenario::{generate_scenario, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "suite".into()));
    let count: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(10);
    std::fs::create_dir_all(&dir)?;
    let cfg = GeneratorConfig::default();
    for seed in 0..count {
        let scenario = generate_scenario(&format!("clutter_{seed:02}"), seed, &cfg);
        scenario.validate()?;
        let path = dir.join(format!("{}.json", scenario.name));
        scenario.save(&path)?;
        println!(
            "{} occupancy {:.3}",
            path.display(),
            scenario.build_world()?.grid.occupied_fraction()
        );
    }
    Ok(())
}
