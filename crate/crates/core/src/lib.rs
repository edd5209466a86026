//! Link-level simulation and analytical BER bounds for multi-user spatial
//! modulation (SM) over correlated massive MIMO downlink channels.
//!
//! The crate covers four downlink transmission schemes end to end:
//!
//! * `tdma_sm` — time-shared single-user SM over the transmit antennas,
//! * `bd_sm` — SM over block-diagonalization beamforming patterns,
//! * `bd_vblast` — two-layer spatial multiplexing over BD beams with
//!   joint maximum-likelihood detection,
//! * `channel_inversion` — pseudo-inverse precoding to single-antenna users.
//!
//! Channels follow a Kronecker model whose transmit/receive correlation is
//! masked by a cluster-survival matrix `exp(-beta*|m-n|)`, modelling scatterer
//! birth-death along large antenna arrays. The [`theory`] module computes
//! union-bound average BER curves for the two SM schemes from the same
//! labeling and correlation structure the simulator uses, so bound and
//! measurement are directly comparable.
//!
//! # Example
//!
//! ```
//! use smsim::{channel, modem};
//! use rand::SeedableRng;
//!
//! // A 4x2 correlated channel and one SM frame mapped onto it.
//! let cfg = channel::ChannelConfig {
//!     n_tx: 4, n_rx: 2, n_users: 1,
//!     beta_tx: 0.3, beta_rx: 0.3,
//!     rho_tx: 0.5, rho_rx: 0.5,
//!     seed: 7,
//! };
//! let corr = std::sync::Arc::new(channel::build_correlation_set(&cfg).unwrap());
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
//! let h = channel::realize_channel(&corr, &cfg, &mut rng);
//! assert_eq!(h.per_user[0].nrows(), 2);
//!
//! let qpsk = modem::build_constellation(4).unwrap();
//! let frame = modem::sm_map_word(0b0110, 4, &qpsk);
//! assert_eq!(frame.index, 2); // leading bits 01 -> second antenna
//! ```

pub mod channel;
pub mod detect;
pub mod modem;
pub mod numerics;
pub mod precode;
pub mod simkit;
pub mod theory;
