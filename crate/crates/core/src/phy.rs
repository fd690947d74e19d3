//! Transmit/receive primitives: 4QAM, pilot patterns, ZF precoding and ZF
//! detection.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::seed;

pub const BITS_PER_SYMBOL: usize = 2;

/// Gray-mapped 4QAM: the first bit picks the sign of the real part, the
/// second the sign of the imaginary part, `0 → +`. Unit average power.
pub fn map_bits(b0: u8, b1: u8) -> C64 {
    let re = if b0 == 0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    let im = if b1 == 0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    C64::new(re, im)
}

pub fn modulate(bits: &[u8]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(BITS_PER_SYMBOL) {
        return Err(Error::OddBitCount(bits.len()));
    }
    Ok(bits.chunks_exact(2).map(|b| map_bits(b[0], b[1])).collect())
}

/// Hard quadrant decision.
pub fn demodulate(symbols: &[C64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * BITS_PER_SYMBOL);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
}

/// Zero-forcing precoder W = α·Hᴴ(HHᴴ)⁻¹ with ‖W‖_F² = P_tx.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    pub matrix: CMatrix,
    pub alpha: f64,
}

pub fn zf_precode(h: &CMatrix, p_tx: f64) -> Result<ZfPrecoder> {
    let (m, n) = h.shape();
    if m == 0 || m > n {
        return Err(Error::Dimension(format!(
            "ZF precoding needs M' <= N, got {m}x{n}"
        )));
    }
    if !(p_tx > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "precoder power must be positive, got {p_tx}"
        )));
    }
    let gram_inv = linalg::gram_inverse(&(h * h.adjoint()), "zf precoder")?;
    let pinv = h.adjoint() * gram_inv;
    let alpha = (p_tx / linalg::frobenius_sqr(&pinv)).sqrt();
    Ok(ZfPrecoder {
        matrix: pinv.scale(alpha),
        alpha,
    })
}

/// ZF detection matrix F = (HᴴH)⁻¹Hᴴ.
pub fn zf_detector(h: &CMatrix) -> Result<CMatrix> {
    let (r, k) = h.shape();
    if k == 0 || k > r {
        return Err(Error::Dimension(format!(
            "ZF detection needs K' <= R, got {r}x{k}"
        )));
    }
    let gram_inv = linalg::gram_inverse(&(h.adjoint() * h), "zf detector")?;
    Ok(gram_inv * h.adjoint())
}

pub fn zf_detect(h: &CMatrix, y: &CVector) -> Result<(CVector, CMatrix)> {
    if y.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "{} samples for {} antennas",
            y.len(),
            h.nrows()
        )));
    }
    let f = zf_detector(h)?;
    Ok((&f * y, f))
}

/// Unit-modulus pilot alphabet: the 4QAM points rotated onto the axes.
pub const PILOT_ALPHABET: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// Comb pilots repeated on one dedicated OFDM symbol per DL stream, so
/// streams are orthogonal in time and every stream sees the same comb.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    pub interval: usize,
    pub subcarriers: Vec<usize>,
    /// `symbols[m][p]` is the pilot of stream m on `subcarriers[p]`.
    pub symbols: Vec<Vec<C64>>,
}

impl PilotPattern {
    pub fn streams(&self) -> usize {
        self.symbols.len()
    }

    pub fn pilots_per_stream(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn stream(&self, m: usize) -> &[C64] {
        &self.symbols[m]
    }

    /// Pilots of all streams, stream-major.
    pub fn flattened(&self) -> Vec<C64> {
        self.symbols.iter().flatten().copied().collect()
    }
}

pub fn build_pilot_pattern(
    streams: usize,
    subcarriers: usize,
    interval: usize,
    seed: u64,
) -> Result<PilotPattern> {
    if streams == 0 || subcarriers == 0 || interval == 0 {
        return Err(Error::Dimension(
            "pilot pattern needs streams, subcarriers and interval >= 1".into(),
        ));
    }
    let indices: Vec<usize> = (0..subcarriers).step_by(interval).collect();
    let mut rng = seed::rng(seed);
    let symbols = (0..streams)
        .map(|_| {
            indices
                .iter()
                .map(|_| PILOT_ALPHABET[rng.random_range(0..PILOT_ALPHABET.len())])
                .collect()
        })
        .collect();
    Ok(PilotPattern {
        interval,
        subcarriers: indices,
        symbols,
    })
}
