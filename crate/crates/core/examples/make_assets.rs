//! Writes the bundled sample inputs:
//!
//! ```text
//! cargo run -p mosaicgen --example make_assets -- assets
//! ```
//!
//! produces `assets/reference.png` (128×128) and `assets/pool/<label>/*.png`
//! (32 textures of 64×64, eight per label).

use std::path::PathBuf;

use mosaicgen::image::save_image;
use mosaicgen::synth::{exemplar_pool, reference_image};

fn main() -> mosaicgen::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets".into()));
    std::fs::create_dir_all(&root)?;
    save_image(&reference_image(128, 128, 7), root.join("reference.png"))?;
    let pool = exemplar_pool(32, 64, 64, 1)?;
    for (i, (img, label)) in pool.exemplars().iter().zip(pool.labels()).enumerate() {
        let dir = root.join("pool").join(label);
        std::fs::create_dir_all(&dir)?;
        save_image(img, dir.join(format!("{label}_{i:02}.png")))?;
    }
    println!("wrote {} exemplars under {}", pool.len(), root.join("pool").display());
    Ok(())
}
