//! Gray-labeled digital constellations and the spatial-modulation word
//! mapping shared by the simulator and the analytical bounds.
//!
//! An SM frame carries `m = log2(n_index) + log2(M)` bits: the leading bits
//! select the active spatial resource (a transmit antenna or a beamforming
//! pattern), the trailing bits select a constellation point. Keeping one
//! mapping here guarantees that simulated bit errors and the Hamming weights
//! inside the union bound count the same bit flips.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModemError {
    #[error("unsupported modulation order {0}; expected a power of two in 2..=8192")]
    UnsupportedOrder(usize),
    #[error("bit string has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spatial index {index} outside 1..={n_index}")]
    IndexOutOfRange { index: usize, n_index: usize },
}

/// A rectangular Gray-coded constellation with unit average energy.
///
/// Points are stored indexed by their bit label: `point(l)` is the complex
/// point whose Gray label is `l`. For square orders this is classic square
/// QAM (BPSK and QPSK are the 2- and 4-point cases); non-square orders use
/// the rectangular `2^ceil(b/2) x 2^floor(b/2)` grid, which keeps per-axis
/// Gray labeling exact at every supported order.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits: u32,
    points: Vec<Complex64>,
}

impl Constellation {
    /// Modulation order M.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Bits per symbol, `log2(M)`.
    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// The point whose Gray label is `label`.
    pub fn point(&self, label: u32) -> Complex64 {
        self.points[label as usize]
    }

    /// All points, indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
}

/// Binary-reflected Gray code of `v`.
pub fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

/// Inverse of [`gray_encode`].
pub fn gray_decode(g: u32) -> u32 {
    let mut v = g;
    v ^= v >> 1;
    v ^= v >> 2;
    v ^= v >> 4;
    v ^= v >> 8;
    v ^= v >> 16;
    v
}

/// Builds the unit-energy rectangular Gray constellation of the given order.
///
/// Supported orders are the powers of two from 2 (BPSK) through 8192.
pub fn build_constellation(order: usize) -> Result<Constellation, ModemError> {
    if !order.is_power_of_two() || !(2..=8192).contains(&order) {
        return Err(ModemError::UnsupportedOrder(order));
    }
    let bits = order.trailing_zeros();
    let bits_i = bits.div_ceil(2);
    let bits_q = bits / 2;
    let levels_i = 1usize << bits_i;
    let levels_q = 1usize << bits_q;
    // Half distance between grid neighbors that yields unit mean energy:
    // E = d^2 * (Li^2 + Lq^2 - 2) / 3 over the uniform rectangle.
    let d = (3.0 / ((levels_i * levels_i + levels_q * levels_q - 2) as f64)).sqrt();
    let mut points = vec![Complex64::new(0.0, 0.0); order];
    let q_mask = (1u32 << bits_q) - 1;
    for label in 0..order as u32 {
        let pos_i = gray_decode(label >> bits_q);
        let pos_q = gray_decode(label & q_mask);
        let re = ((levels_i - 1) as f64 - 2.0 * pos_i as f64) * d;
        let im = ((levels_q - 1) as f64 - 2.0 * pos_q as f64) * d;
        points[label as usize] = Complex64::new(re, im);
    }
    Ok(Constellation {
        order,
        bits,
        points,
    })
}

/// One mapped SM transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmFrame {
    /// Active spatial resource, 1-based.
    pub index: usize,
    /// Transmitted constellation point.
    pub symbol: Complex64,
    /// Gray label of the transmitted point.
    pub symbol_label: u32,
    /// The m-bit source word, index bits in the high positions.
    pub word: u32,
}

/// Bits per SM frame for a spatial alphabet of `n_index` resources.
pub fn frame_bits(n_index: usize, constellation: &Constellation) -> u32 {
    assert!(
        n_index.is_power_of_two() && n_index >= 2,
        "spatial alphabet size must be a power of two >= 2"
    );
    n_index.trailing_zeros() + constellation.bits_per_symbol()
}

/// Maps an m-bit word onto an SM frame. The first `log2(n_index)` bits give
/// the spatial index (natural binary, 1-based), the rest select the symbol.
pub fn sm_map_word(word: u32, n_index: usize, constellation: &Constellation) -> SmFrame {
    let m = frame_bits(n_index, constellation);
    debug_assert!(word < 1u32 << m, "word exceeds the {m}-bit frame");
    let sym_bits = constellation.bits_per_symbol();
    let symbol_label = word & ((1u32 << sym_bits) - 1);
    let index = (word >> sym_bits) as usize + 1;
    SmFrame {
        index,
        symbol: constellation.point(symbol_label),
        symbol_label,
        word,
    }
}

/// Maps a bit slice (one bit per entry, most significant first) onto an SM
/// frame. Length must equal `log2(n_index) + log2(M)`.
pub fn sm_map(
    bits: &[u8],
    n_index: usize,
    constellation: &Constellation,
) -> Result<SmFrame, ModemError> {
    let m = frame_bits(n_index, constellation) as usize;
    if bits.len() != m {
        return Err(ModemError::LengthMismatch {
            expected: m,
            got: bits.len(),
        });
    }
    let mut word = 0u32;
    for &b in bits {
        word = (word << 1) | u32::from(b & 1);
    }
    Ok(sm_map_word(word, n_index, constellation))
}

/// Inverse of [`sm_map_word`]: rebuilds the source word from a detected
/// (index, symbol label) pair.
pub fn sm_demap_word(
    index: usize,
    symbol_label: u32,
    n_index: usize,
    sym_bits: u32,
) -> Result<u32, ModemError> {
    if index < 1 || index > n_index {
        return Err(ModemError::IndexOutOfRange { index, n_index });
    }
    Ok((((index - 1) as u32) << sym_bits) | symbol_label)
}

/// Inverse of [`sm_map`]: rebuilds the source bit string (most significant
/// first) from a detected index and symbol-label bits.
pub fn sm_demap(
    index: usize,
    symbol_label: &[u8],
    n_index: usize,
) -> Result<Vec<u8>, ModemError> {
    let sym_bits = symbol_label.len() as u32;
    let mut label = 0u32;
    for &b in symbol_label {
        label = (label << 1) | u32::from(b & 1);
    }
    let word = sm_demap_word(index, label, n_index, sym_bits)?;
    let m = n_index.trailing_zeros() + sym_bits;
    Ok((0..m).rev().map(|i| ((word >> i) & 1) as u8).collect())
}
