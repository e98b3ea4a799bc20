//! Print the first outputs of a stream, one per line (used to refresh
//! `tests/fixtures/stream_seed42_index0.txt`).

use giantwalk::seed_stream;
use rand::RngCore;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(42, |s| s.parse().unwrap());
    let index: u64 = args.next().map_or(0, |s| s.parse().unwrap());
    let count: usize = args.next().map_or(64, |s| s.parse().unwrap());
    let mut stream = seed_stream(seed, index);
    for _ in 0..count {
        println!("{}", stream.next_u64());
    }
}
