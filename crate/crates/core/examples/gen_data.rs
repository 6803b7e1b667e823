//! Generates each synthetic scenario family, writes it as JSON lines and
//! reads it back.
//!
//! ```text
//! cargo run --example gen_data -- [count] [seed]
//! ```

use nest::scenario::{
    generate_synthetic, load_scenarios, make_batch, save_scenarios, SynthKind, SynthParams,
};

fn main() -> nest::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let dir = std::env::temp_dir().join("nest-gen-data");
    std::fs::create_dir_all(&dir).map_err(|e| nest::NestError::Usage(e.to_string()))?;

    let params = SynthParams::default();
    for kind in [
        SynthKind::Chain,
        SynthKind::Intersection,
        SynthKind::Merge,
        SynthKind::Uturn,
    ] {
        let scenes = generate_synthetic(kind, count, seed, &params)?;
        let path = dir.join(format!("{kind:?}.jsonl").to_lowercase());
        save_scenarios(&path, &scenes)?;
        let back = load_scenarios(&path)?;
        assert_eq!(back, scenes);

        let inputs = make_batch(&back, params.t_h, params.t_f, true)?;
        let s = &inputs[0];
        let end = s
            .future
            .as_ref()
            .and_then(|f| f.last())
            .copied()
            .unwrap_or_default();
        println!(
            "{:<13} {} scenarios -> {}  first: {} agents, {} lanes, target ends at ({:.1}, {:.1}) in its own frame",
            format!("{kind:?}"),
            back.len(),
            path.display(),
            s.num_valid(),
            s.lanes.len(),
            end[0],
            end[1],
        );
    }
    Ok(())
}
