//! Uplink signal synthesis at the interfered BS and MMSE-IRC detection.
//!
//! Per subcarrier w: y_w = H_UT,w u_w + H_CLI,w d_w + n, and
//! û_w = Ĥ_UTᴴ Q_w⁻¹ y_w with Q_w = Ĥ_UT Ĥ_UTᴴ + Ĥ_CLI Ĥ_CLIᴴ + σ_n² I.

use rand::Rng;

use crate::channel::CfrGrid;
use crate::error::{Error, Result};
use crate::estimation;
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::phy::{self, PilotPattern};

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkSlot {
    pub y: Vec<CVector>,
    pub u_true: Vec<CVector>,
    pub d_true: Vec<CVector>,
    pub sigma_n2: f64,
}

/// The three additive parts of a received slot, kept apart so a sweep can
/// rescale the desired signal while reusing interference and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotParts {
    pub desired: Vec<CVector>,
    pub interference: Vec<CVector>,
    pub noise: Vec<CVector>,
}

impl SlotParts {
    pub fn draw<R: Rng + ?Sized>(
        h_ut: &CfrGrid,
        h_cli: &CfrGrid,
        u: &[CVector],
        d: &[CVector],
        sigma_n2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w = h_ut.subcarriers();
        if h_cli.subcarriers() != w || u.len() != w || d.len() != w || h_cli.rows() != h_ut.rows() {
            return Err(Error::Dimension(
                "slot grids disagree on subcarriers or antennas".into(),
            ));
        }
        if u.iter().any(|v| v.len() != h_ut.cols()) || d.iter().any(|v| v.len() != h_cli.cols()) {
            return Err(Error::Dimension(
                "symbol vectors do not match channel columns".into(),
            ));
        }
        let r = h_ut.rows();
        let desired = (0..w).map(|k| h_ut.at(k) * &u[k]).collect();
        let interference = (0..w).map(|k| h_cli.at(k) * &d[k]).collect();
        let noise = (0..w)
            .map(|_| CVector::from_fn(r, |_, _| linalg::complex_normal(rng, sigma_n2)))
            .collect();
        Ok(Self {
            desired,
            interference,
            noise,
        })
    }

    /// y = √scale·desired + interference + noise.
    pub fn combine(&self, desired_power_scale: f64) -> Vec<CVector> {
        let a = desired_power_scale.sqrt();
        self.desired
            .iter()
            .zip(&self.interference)
            .zip(&self.noise)
            .map(|((s, i), n)| s * C64::new(a, 0.0) + i + n)
            .collect()
    }
}

pub fn synthesize_slot<R: Rng + ?Sized>(
    h_ut: &CfrGrid,
    h_cli: &CfrGrid,
    u: &[CVector],
    d: &[CVector],
    sigma_n2: f64,
    rng: &mut R,
) -> Result<UplinkSlot> {
    let parts = SlotParts::draw(h_ut, h_cli, u, d, sigma_n2, rng)?;
    Ok(UplinkSlot {
        y: parts.combine(1.0),
        u_true: u.to_vec(),
        d_true: d.to_vec(),
        sigma_n2,
    })
}

/// Channel estimates handed to the detector.
#[derive(Debug, Clone, Copy)]
pub struct DetectorInput<'a> {
    pub h_ut_hat: &'a CfrGrid,
    /// `None` gives the CLI-blind detector.
    pub h_cli_hat: Option<&'a CfrGrid>,
    pub sigma_n2: f64,
}

/// Q_w = Ĥ_UT Ĥ_UTᴴ + Ĥ_CLI Ĥ_CLIᴴ + σ_n² I, Hermitian by construction.
pub fn irc_covariance(h_ut: &CMatrix, h_cli: Option<&CMatrix>, sigma_n2: f64) -> CMatrix {
    let r = h_ut.nrows();
    let mut q = h_ut * h_ut.adjoint();
    if let Some(hc) = h_cli {
        q += hc * hc.adjoint();
    }
    for i in 0..r {
        q[(i, i)] += sigma_n2;
    }
    linalg::hermitian_part(&q)
}

/// Linear MMSE-IRC combiner G_w = Ĥ_UTᴴ Q_w⁻¹ for one subcarrier.
pub fn irc_combiner(h_ut: &CMatrix, h_cli: Option<&CMatrix>, sigma_n2: f64) -> Result<CMatrix> {
    let q = irc_covariance(h_ut, h_cli, sigma_n2);
    // Q Hermitian: (Q⁻¹ Ĥ)ᴴ = Ĥᴴ Q⁻¹.
    Ok(linalg::solve_hpd(&q, h_ut, "irc covariance")?.adjoint())
}

pub fn mmse_irc_detect(y: &[CVector], input: &DetectorInput<'_>) -> Result<Vec<CVector>> {
    let w = input.h_ut_hat.subcarriers();
    if y.len() != w || input.h_cli_hat.is_some_and(|h| h.subcarriers() != w) {
        return Err(Error::Dimension(
            "detector inputs disagree on subcarrier count".into(),
        ));
    }
    (0..w)
        .map(|k| {
            let h = input.h_ut_hat.at(k);
            let q = irc_covariance(h, input.h_cli_hat.map(|g| g.at(k)), input.sigma_n2);
            let v = linalg::solve_hpd(
                &q,
                &CMatrix::from_column_slice(y[k].len(), 1, y[k].as_slice()),
                "irc covariance",
            )?;
            Ok((h.adjoint() * v).column(0).into_owned())
        })
        .collect()
}

/// Hard-demodulates û and counts bit errors against `true_bits`, ordered
/// subcarrier-major then UT, two bits per symbol.
pub fn count_bit_errors(u_hat: &[CVector], true_bits: &[u8]) -> Result<(u64, u64)> {
    let symbols: Vec<C64> = u_hat.iter().flat_map(|v| v.iter().copied()).collect();
    let decided = phy::demodulate(&symbols);
    if decided.len() != true_bits.len() {
        return Err(Error::Dimension(format!(
            "{} decided bits vs {} true bits",
            decided.len(),
            true_bits.len()
        )));
    }
    let errors = decided
        .iter()
        .zip(true_bits)
        .filter(|(a, b)| a != b)
        .count() as u64;
    Ok((errors, true_bits.len() as u64))
}

/// Samples received on each DL stream's pilot symbol: `out[m]` is P×R with
/// z(p, r) = H_CLI[c_p](r, m)·x_{m,p} + n.
pub fn receive_cli_pilots<R: Rng + ?Sized>(
    h_cli: &CfrGrid,
    pattern: &PilotPattern,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    if pattern.streams() != h_cli.cols() {
        return Err(Error::Dimension(format!(
            "{} pilot streams for {} CLI streams",
            pattern.streams(),
            h_cli.cols()
        )));
    }
    let antennas = h_cli.rows();
    Ok((0..pattern.streams())
        .map(|m| {
            let mut z = CMatrix::zeros(pattern.pilots_per_stream(), antennas);
            for (p, &c) in pattern.subcarriers.iter().enumerate() {
                for r in 0..antennas {
                    z[(p, r)] = h_cli.get(c, r, m) * pattern.symbols[m][p]
                        + linalg::complex_normal(rng, sigma_n2);
                }
            }
            z
        })
        .collect())
}

/// LS estimate of the UT channels from time-orthogonal uplink comb pilots.
/// `h_ut` includes the UTs' transmit amplitudes.
pub fn estimate_ut_channel_ls<R: Rng + ?Sized>(
    h_ut: &CfrGrid,
    pattern: &PilotPattern,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<CfrGrid> {
    let w = h_ut.subcarriers();
    let rx = receive_cli_pilots(h_ut, pattern, sigma_n2, rng)?;
    let mut grid = CfrGrid::zeros(w, h_ut.rows(), h_ut.cols());
    for (k, z) in rx.iter().enumerate() {
        for r in 0..h_ut.rows() {
            let ls: Vec<C64> = pattern.symbols[k]
                .iter()
                .enumerate()
                .map(|(p, x)| z[(p, r)] / x)
                .collect();
            for (c, v) in estimation::interpolate(&ls, &pattern.subcarriers, w)?
                .into_iter()
                .enumerate()
            {
                grid.at_mut(c)[(r, k)] = v;
            }
        }
    }
    Ok(grid)
}
