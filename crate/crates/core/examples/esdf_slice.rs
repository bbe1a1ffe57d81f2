//! Print one horizontal slice of a scenario's distance field as characters.
//!
//! ```text
//! cargo run -p kinolazy --example esdf_slice -- crates/core/scenarios/forest.json 1.5
//! ```
//!
//! `#` is occupied, digits are the distance in voxels (capped at 9).

use kinolazy::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().ok_or("usage: esdf_slice <scenario.json> [z]")?;
    let z: f64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1.5);
    let scenario = load_scenario(&path)?;
    let world = scenario.build_world()?;
    let g = &world.field.geometry;
    let k = (((z - g.origin.z) / g.resolution).floor() as usize).min(g.dims[2] - 1);
    println!(
        "{} at z = {:.2} m (layer {k}), {:.2} m voxels",
        scenario.name,
        g.center(0, 0, k).z,
        g.resolution
    );
    for j in (0..g.dims[1]).rev() {
        let row: String = (0..g.dims[0])
            .map(|i| {
                let d = world.field.distance_at(i, j, k);
                if d <= 0.0 {
                    '#'
                } else {
                    let v = (d / g.resolution).round().min(9.0) as u32;
                    char::from_digit(v, 10).unwrap_or('9')
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
