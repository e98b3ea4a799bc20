//! Rough per-step cost of the streaming walk.
//!
//! cargo run --release -p giantwalk --example throughput -- 1000000 1.05 20

use std::time::Instant;

use giantwalk::{seed_stream, simulate_summary, walk_components, Params, TheoryValues};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(100_000, |s| s.parse().unwrap());
    let lambda: f64 = args.get(2).map_or(1.5, |s| s.parse().unwrap());
    let reps: u64 = args.get(3).map_or(20, |s| s.parse().unwrap());
    let params = Params::new(n, lambda).unwrap();
    let theory = TheoryValues::new(&params).unwrap();

    let start = Instant::now();
    let mut l1 = 0;
    for i in 0..reps {
        l1 += walk_components(&params, &mut seed_stream(0, i)).unwrap().l1;
    }
    let bare = start.elapsed().as_secs_f64();

    let start = Instant::now();
    for i in 0..reps {
        l1 += simulate_summary(&params, &theory, &mut seed_stream(0, i)).unwrap().l1;
    }
    let full = start.elapsed().as_secs_f64();

    let steps = (n as u64 * reps) as f64;
    println!(
        "n={n} lambda={lambda} reps={reps}: walk {:.1} ns/step, with diagnostics {:.1} ns/step (checksum {l1})",
        bare / steps * 1e9,
        full / steps * 1e9
    );
}
