//! Long-run check that the analytical bound for the beam-index system
//! brackets its simulation from above without going slack. Ignored by
//! default; run with `cargo test --test bd_band -- --ignored`.

use smsim::simkit::engine::simulate_cell;
use smsim::simkit::{cell_seed, parse_config, theory_overlay};

#[test]
#[ignore = "several minutes of simulation; run explicitly"]
fn bound_band_tracks_bd_sm_simulation() {
    let cfgs = parse_config(
        "system = bd_sm\nn_tx = 64\nn_rx = 2\nn_users = 4\nn_beams = 32\nmod_order = 4\n\
         beta = 1.0\nrho = 0.9\nsnr_db = 15, 20, 25\nruns = 1\n\
         symbols_per_run = 100000\ncoherence_block = 100\n",
    )
    .unwrap();
    let cfg = &cfgs[0];
    let bound_rows = theory_overlay(cfg).unwrap();
    let runs = 8;

    for (si, &snr) in cfg.snr_grid_db.iter().enumerate() {
        let mut bers = Vec::with_capacity(runs);
        let mut bits = 0u64;
        let mut errors = 0u64;
        for run in 0..runs {
            let stats = simulate_cell(cfg, snr, cell_seed(0xBA2D, 0, si, run)).unwrap();
            bits += stats.bits_sent;
            errors += stats.bit_errors;
            bers.push(stats.bit_errors as f64 / stats.bits_sent as f64);
        }
        let n = bers.len() as f64;
        let mean = bers.iter().sum::<f64>() / n;
        let var = bers.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let ber = errors as f64 / bits as f64;
        let bound = bound_rows[si].ber;
        println!("  snr={snr}: sim {ber:.4e} (se {se:.1e}) bound {bound:.4e}");
        assert!(
            bound >= ber - 2.576 * se,
            "snr={snr}: bound {bound:.4e} below simulation {ber:.4e} (se {se:.1e})"
        );
        assert!(
            bound <= 3.0 * (ber + 2.576 * se),
            "snr={snr}: bound {bound:.4e} looser than 3x simulation {ber:.4e}"
        );
    }
}
