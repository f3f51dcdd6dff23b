//! Writes a synthetic labeled corpus to a TSV file.
//!
//! Usage: cargo run --example gen_demo_corpus -- [PATH] [N] [SEED]

use trivote::corpus::save_dataset;
use trivote::synth::generate;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "demo.tsv".to_owned());
    let n: usize = args
        .next()
        .map(|v| v.parse().expect("N must be an integer"))
        .unwrap_or(480);
    let seed: u64 = args
        .next()
        .map(|v| v.parse().expect("SEED must be an integer"))
        .unwrap_or(7);

    let ds = generate("demo", n, seed);
    save_dataset(&ds, &path).expect("write TSV");
    println!("wrote {} samples to {path}", ds.len());
}
