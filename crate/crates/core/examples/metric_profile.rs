//! Response of all twelve similarity measures to five canonical descriptor
//! relationships, written as a CSV table of percentages.
//!
//! ```text
//! cargo run --example metric_profile -- [table.csv]
//! ```

use layerlens::similarity::{metric_response_profile, standard_response_cases};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cases = standard_response_cases();
    let table = metric_response_profile(&cases)?;
    let csv = table.to_csv();
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &csv)?;
            println!("wrote {path}");
        }
        None => print!("{csv}"),
    }
    Ok(())
}
