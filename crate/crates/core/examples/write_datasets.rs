//! Regenerates the bundled synthetic study files under `data/`.

use flexmeta::synth::{normal_dataset, skew_normal_dataset, to_csv};

fn main() -> std::io::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("skew_normal_k20.csv"), to_csv(&skew_normal_dataset()))?;
    std::fs::write(dir.join("normal_k10.csv"), to_csv(&normal_dataset()))?;
    Ok(())
}
