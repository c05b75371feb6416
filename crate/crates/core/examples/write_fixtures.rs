//! Regenerates the `.domain` fixtures: `cargo run -p mmplan-core --example write_fixtures [dir]`.

use std::path::PathBuf;

use mmplan_core::domain_io::serialize;
use mmplan_core::fixtures::all_fixtures;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    for f in all_fixtures() {
        let path = dir.join(format!("{}.domain", f.name));
        std::fs::write(&path, serialize(&f.model, &f.heuristic)?)?;
        println!("{}", path.display());
    }
    Ok(())
}
