//! Regenerates the shipped fixture tree: `cargo run --example gen_fixtures`.

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    for path in fakesci_core::synth::write_fixture_tree(&root)? {
        println!("{}", path.display());
    }
    Ok(())
}
