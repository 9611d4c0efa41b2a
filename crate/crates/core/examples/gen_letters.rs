//! Write synthetic "A" demonstrations as CSV files.
//!
//! `cargo run -p vfix --example gen_letters -- <out-dir> [seed]`

use vfix::learning::write_csv;
use vfix::sim::letters::letter_a_demos;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = std::path::PathBuf::from(args.first().map(String::as_str).unwrap_or("scenarios/letters"));
    let seed = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(11);
    std::fs::create_dir_all(&out)?;
    for (k, d) in letter_a_demos(3, 200, 4.0, seed)?.iter().enumerate() {
        let path = out.join(format!("a_{k}.csv"));
        write_csv(d, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
