//! Saves a network, reloads it and checks the scores bit for bit.
//!
//! ```text
//! cargo run --example checkpoint_roundtrip
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vcn::data::{generate, SyntheticSpec, Task};
use vcn::model::{load_checkpoint, save_checkpoint};
use vcn::{ModelConfig, Vcn};

fn main() -> vcn::Result<()> {
    let cfg = ModelConfig {
        reset_gate: true,
        head_hidden: Some(4),
        ..ModelConfig::for_data(2, 2, 1)
    };
    let model = Vcn::new(cfg, &mut ChaCha8Rng::seed_from_u64(9))?;
    let path = std::env::temp_dir().join("vcn-example.ckpt");
    save_checkpoint(&model, &path)?;
    let back = load_checkpoint(&path)?;

    let data = generate(&SyntheticSpec::new(Task::AttrMajority, 50, 1))?;
    let same = data
        .graphs()
        .all(|g| model.score(g).unwrap().to_bits() == back.score(g).unwrap().to_bits());
    let header: Vec<String> = std::fs::read_to_string(&path)?
        .lines()
        .take(3)
        .map(|l| l.chars().take(72).collect())
        .collect();
    println!("{}", header.join("\n"));
    println!(
        "{} parameters, scores identical after reload: {same}",
        back.store().len()
    );
    Ok(())
}
