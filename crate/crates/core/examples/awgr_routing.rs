//! Prints the cyclic port map of an 8-port AWGR and routes one comb per
//! input port through it.

use optocloud::photonics::{awgr_output_port, generate_comb, route_spectra, AwgrSpec, Passband};

fn main() -> optocloud::Result<()> {
    let n = 8;
    let spec = AwgrSpec::new(n, 84.0, n)?;
    println!("output port for (input row, wavelength offset column):");
    for p in 0..n {
        let row: Vec<String> = (0..n as i64)
            .map(|m| awgr_output_port(&spec, p, m).map(|q| q.to_string()))
            .collect::<optocloud::Result<_>>()?;
        println!("  {p}: {}", row.join(" "));
    }

    for passband in [Passband::Ideal, Passband::Gaussian { fwhm_ghz: 40.0 }] {
        let spec = spec.with_passband(passband)?;
        let inputs: Vec<_> = (0..n)
            .map(|p| generate_comb(2 * n, 84.0, 193.4, 0.0).map(|c| c.scaled(1.0 + p as f64)))
            .collect::<optocloud::Result<_>>()?;
        let outputs = route_spectra(&spec, &inputs)?;
        let inp: f64 = inputs.iter().map(|c| c.total_power()).sum();
        let out: f64 = outputs.iter().map(|c| c.total_power()).sum();
        println!("{passband:?}: {inp:.3} mW in, {out:.3} mW out");
    }
    Ok(())
}
