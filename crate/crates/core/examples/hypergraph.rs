//! Forms the interaction hypergraph of a few merge scenes with an untrained
//! model and prints affinity, thresholds and incidence.
//!
//! ```text
//! cargo run --example hypergraph
//! ```

use nest::harness::inspect_records;
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::{Config, Model};

fn main() -> nest::Result<()> {
    let cfg = Config {
        d: 16,
        s: 4,
        ..Config::default()
    };
    let model = Model::init(cfg.clone())?;
    let raw = generate_synthetic(SynthKind::Merge, 2, 11, &SynthParams::default())?;
    let scenes = make_batch(&raw, cfg.t_h, cfg.t_f, false)?;

    for rec in inspect_records(&model, &scenes)? {
        println!("{}  beta = {:?}", rec.scenario_id, rec.beta);
        println!("  {:<10} {:>6}  {:<24} E", "agent", "alpha", "C");
        for (i, id) in rec.agent_ids.iter().enumerate() {
            let c: Vec<String> = rec.c[i].iter().map(|v| format!("{v:.2}")).collect();
            let e: String = rec.e[i].iter().map(|&b| if b == 1 { '#' } else { '.' }).collect();
            println!("  {:<10} {:>6.3}  {:<24} {e}", id, rec.alpha[i], c.join(" "));
        }
        let sizes: Vec<usize> = (0..cfg.s)
            .map(|j| rec.e.iter().filter(|r| r[j] == 1).count())
            .collect();
        println!("  hyperedge sizes {sizes:?}\n");
    }
    Ok(())
}
