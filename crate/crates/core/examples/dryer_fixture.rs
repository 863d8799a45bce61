//! Writes the synthetic dryer inputs: `cargo run -p batchkit --example dryer_fixture -- <dir> [n_batches] [seed]`.

use std::path::PathBuf;

use batchkit::synthetic::{DryerConfig, DryerFixture};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixture".into()));
    let n_batches = args.next().map_or(30, |s| s.parse().expect("n_batches must be an integer"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let fixture = DryerFixture::generate(&DryerConfig { n_batches, seed, ..Default::default() });
    let paths = fixture.write(&dir).expect("write fixture");
    println!("{}", paths.trajectories.display());
}
