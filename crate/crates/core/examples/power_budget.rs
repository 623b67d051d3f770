//! Power by scope for the default component table, with efficiency at the
//! five-OPU throughput.

use optocloud::energy::{edfa_pump_power, laser_power, pd_power, total_power, PowerFixture, Scope};

fn main() -> optocloud::Result<()> {
    let f = PowerFixture::default_fixture();
    for scope in Scope::ALL {
        let r = total_power(&f.table, &f.bom, scope)?.with_throughput(3.6)?;
        println!(
            "{:<16} {:>8.2} mW  {:>7.2} mW/TOPS",
            scope.name(),
            r.total_mw,
            r.efficiency_mw_per_tops.unwrap_or(f64::NAN)
        );
        for (kind, mw) in &r.subtotals_mw {
            println!("    {:<14} {mw:>8.2}", kind.name());
        }
    }
    println!(
        "laser at 10 dBm, 20% wall-plug, 50 mW TEC: {:.1} mW",
        laser_power(10.0, 0.2, 50.0)?
    );
    println!(
        "photodiode 0.65 A/W, 2 V, 1 mW: {:.2} mW",
        pd_power(0.65, 2.0, 1.0)
    );
    println!(
        "EDFA 0 -> 17 dBm at 5%: {:.1} mW",
        edfa_pump_power(0.0, 17.0, 0.05)?
    );
    Ok(())
}
