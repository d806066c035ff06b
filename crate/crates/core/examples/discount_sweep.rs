//! Wall time against the discount factor.
//!
//! Soft value iteration needs more sweeps as β approaches one; the Hotz-Miller
//! operator is built once and its cost barely moves. Pass a grid side to
//! change the problem size (default 16).

use ccp_irl::bench::{run_benchmark, BenchCell, BenchSuite};
use ccp_irl::env::{EnvSpec, GridSpec};

fn main() -> ccp_irl::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let suite = BenchSuite {
        name: "discount-sweep".into(),
        repeats: 1,
        cells: vec![BenchCell {
            env: EnvSpec::FixedTarget(GridSpec { n, ..Default::default() }),
            discounts: vec![0.9, 0.95, 0.99],
            ..Default::default()
        }],
        ..Default::default()
    };
    let out = run_benchmark(&suite)?;
    println!("{:>6} {:>10} {:>10} {:>8}", "beta", "maxent s", "ccp s", "speedup");
    for p in &out.pairs {
        println!("{:>6} {:>10.3} {:>10.3} {:>8.2}", p.beta, p.maxent_mean_s, p.ccp_mean_s, p.speedup);
    }
    Ok(())
}
