//! Writes the synthetic retrieval corpus as PPM files plus a ground-truth file.
//!
//! ```text
//! cargo run --example make_corpus -- crates/core/tests/data/corpus
//! ```

use std::path::PathBuf;

use objpool::synthetic::{corpus_ground_truth, retrieval_corpus};

fn main() -> anyhow::Result<()> {
    let dir: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("corpus"));
    std::fs::create_dir_all(&dir)?;
    let corpus = retrieval_corpus();
    for img in &corpus {
        std::fs::write(
            dir.join(format!("{}.ppm", img.image_id)),
            img.image.to_ppm(),
        )?;
    }
    std::fs::write(
        dir.join("ground_truth.tsv"),
        corpus_ground_truth(&corpus).to_text(),
    )?;
    println!("wrote {} images to {}", corpus.len(), dir.display());
    Ok(())
}
