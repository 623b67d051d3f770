//! Effective bits of the four elementary operations as the symbol rate
//! rises from 10 to 50 GBd.

use optocloud::opu::{op_precision, ElementaryOp, OpuConfig};

fn main() -> optocloud::Result<()> {
    println!("baud_ghz  multiply  add  subtract  mac");
    for baud in [10.0, 18.0, 26.0, 34.0, 42.0, 50.0] {
        let row = ElementaryOp::ALL
            .iter()
            .map(|&op| {
                op_precision(&OpuConfig::new(8).noisy(baud), op, 4096, 5)
                    .map(|p| format!("{:.2}", p.enob))
            })
            .collect::<optocloud::Result<Vec<_>>>()?;
        println!("{baud:>8}  {}", row.join("  "));
    }
    Ok(())
}
