//! Sends 256 KiB over the edge-to-cloud link with growing extra attenuation.

use optocloud::link::{
    received_power, transmit_payload, FecConfig, LinkModel, PamConfig, RopBerCurve,
};
use rand::Rng;

fn main() -> optocloud::Result<()> {
    let (link, pam, fec, curve) = (
        LinkModel::default(),
        PamConfig::default(),
        FecConfig::default(),
        RopBerCurve::default(),
    );
    let mut rng = optocloud::seed::rng(0);
    let payload: Vec<u8> = (0..256 * 1024).map(|_| rng.random()).collect();
    println!("extra_db  rop_dbm  pre_fec_ber  decoded");
    for db in 0..=9 {
        let l = link.with_extra_attenuation(db as f64);
        let (out, stats) = transmit_payload(&payload, &l, &pam, &fec, &curve, db)?;
        println!(
            "{db:>8}  {:>7.1}  {:>11.2e}  {}",
            received_power(&l),
            stats.pre_fec_ber,
            stats.decoded && out == payload
        );
    }
    Ok(())
}
