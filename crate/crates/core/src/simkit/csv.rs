//! CSV output for campaign results.

use super::BerRecord;
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "system,k_users,n_tx,n_rx,beta,rho,n_beams,mod_order,snr_db,\
                              bits_sent,bit_errors,ber,ml_ops,seed,wall_time_s";

/// Formats `x` with six significant digits in plain decimal notation.
pub fn format_significant(x: f64, digits: u32) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return format!("{:.*}", (digits - 1) as usize, 0.0);
    }
    let mut decimals = decimals_for(x, digits);
    let mut s = format!("{x:.decimals$}");
    // Rounding can bump the magnitude up a decade (0.09999999 -> "0.100000"
    // carries one digit too many), so recompute from the rounded value.
    let bumped: f64 = s.parse().expect("formatted float reparses");
    if bumped != 0.0 && decimals_for(bumped, digits) != decimals {
        decimals = decimals_for(bumped, digits);
        s = format!("{bumped:.decimals$}");
    }
    s
}

fn decimals_for(x: f64, digits: u32) -> usize {
    let exp = x.abs().log10().floor() as i64;
    (digits as i64 - 1 - exp).max(0) as usize
}

fn push_record(out: &mut String, r: &BerRecord) {
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
        r.system,
        r.k_users,
        r.n_tx,
        r.n_rx,
        r.beta,
        r.rho,
        r.n_beams,
        r.mod_order,
        r.snr_db,
        r.bits_sent,
        r.bit_errors,
        format_significant(r.ber, 6),
        r.ml_ops,
        r.seed,
        r.wall_time_s,
    );
}

/// Writes records in order with the fixed header, UTF-8 with LF endings.
pub fn write_csv(records: &[BerRecord], path: &Path) -> std::io::Result<()> {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        push_record(&mut out, r);
    }
    std::fs::write(path, out)
}
