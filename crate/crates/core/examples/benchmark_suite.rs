//! Runs a shipped benchmark preset, or a trimmed copy of one, and prints the CSV.
//!
//! `cargo run --release --example benchmark_suite -- fig4-beta-sweep 16`
//! runs the β sweep at side 16 instead of 32.

use ccp_irl::bench::{run_benchmark, write_bench_csv, write_summary_csv, BenchSuite};

fn main() -> ccp_irl::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig4-beta-sweep".into());
    let mut suite = BenchSuite::preset(&name)?;
    if let Some(n) = args.next().and_then(|s| s.parse().ok()) {
        for cell in &mut suite.cells {
            cell.sizes = vec![n];
        }
    }
    suite.repeats = 1;
    let out = run_benchmark(&suite)?;
    write_bench_csv(std::io::stdout(), &out.records)?;
    println!();
    write_summary_csv(std::io::stdout(), &out.pairs)?;
    for f in &out.failures {
        eprintln!("failed {}: {}", f.cell.label(), f.message);
    }
    Ok(())
}
