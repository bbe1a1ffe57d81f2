//! Closed-form propagation against explicit Euler for a few substep counts.
//!
//! ```text
//! cargo run -p kinolazy --example propagate
//! ```

use kinolazy::dynamics::{propagate_euler, propagate_exact, ControlInput, State, Vec3};

fn main() {
    let s = State::new([Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.5, 0.0)]).unwrap();
    let u = ControlInput::new(0.8, -0.4, 0.2);
    let tau = 1.0;
    let exact = propagate_exact(&s, &u, tau);
    println!(
        "exact end: p = {:?}, v = {:?}",
        exact.position().as_slice(),
        exact.velocity().as_slice()
    );

    println!("{:>8} {:>14} {:>8}", "substeps", "error", "ratio");
    let mut prev: Option<f64> = None;
    for p in 0..=8 {
        let substeps = 1usize << p;
        let err = propagate_euler(&s, &u, tau, substeps)
            .unwrap()
            .distance(&exact);
        let ratio = prev.map_or(String::new(), |e| format!("{:.4}", err / e));
        println!("{substeps:>8} {err:>14.3e} {ratio:>8}");
        prev = Some(err);
    }
}
