//! Over-the-air pilot sharing through a forwarding terminal.
//!
//! Transmission stage: the interfering BS ZF-precodes each pilot value to the
//! terminal, which scales by 1/α. Forwarding stage: the terminal re-sends its
//! estimate and the interfered BS ZF-detects it. Each hop adds an independent
//! equivalent noise, so the recovered pilot x̃_p = x_p − ñ_p carries noise of
//! variance τ_p·σ_n² with τ_p = 1/α² + ξ_p.

use rand::Rng;

use crate::channel::CfrGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::phy::{self, PilotPattern};

/// One pilot as seen along the forwarding chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotRecord {
    pub stream: usize,
    pub pilot: usize,
    pub subcarrier: usize,
    /// True pilot transmitted by the interfering BS.
    pub x: C64,
    /// Value recovered at the forwarding terminal.
    pub x_hat: C64,
    /// Value recovered at the interfered BS.
    pub x_tilde: C64,
    /// Transmission-stage precoder scaling; infinite when that hop is noiseless.
    pub alpha: f64,
    pub xi: f64,
    pub tau: f64,
}

impl PilotRecord {
    /// Pilot shared without error (e.g. over a backhaul).
    pub fn perfect(stream: usize, pilot: usize, subcarrier: usize, x: C64) -> Self {
        Self {
            stream,
            pilot,
            subcarrier,
            x,
            x_hat: x,
            x_tilde: x,
            alpha: f64::INFINITY,
            xi: 0.0,
            tau: 0.0,
        }
    }

    /// ñ_p = x_p − x̃_p.
    pub fn equivalent_noise(&self) -> C64 {
        self.x - self.x_tilde
    }
}

/// Records for every pilot of `pattern`, shared without error. Stream-major.
pub fn perfect_records(pattern: &PilotPattern) -> Vec<PilotRecord> {
    pattern
        .symbols
        .iter()
        .enumerate()
        .flat_map(|(m, syms)| {
            syms.iter()
                .zip(&pattern.subcarriers)
                .enumerate()
                .map(move |(p, (&x, &c))| PilotRecord::perfect(m, p, c, x))
        })
        .collect()
}

/// What the interfered BS learns from the forwarded payload. MCS and
/// synchronization fields are carried opaquely.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMetadata {
    pub streams: usize,
    pub positions: Vec<usize>,
    /// Recovered pilot values, stream-major.
    pub values: Vec<C64>,
    /// Transmission-stage scaling per pilot, signaled alongside the values.
    pub alpha: Vec<f64>,
    pub mcs: String,
}

impl PilotMetadata {
    pub fn from_records(records: &[PilotRecord], positions: &[usize], streams: usize) -> Self {
        Self {
            streams,
            positions: positions.to_vec(),
            values: records.iter().map(|r| r.x_tilde).collect(),
            alpha: records.iter().map(|r| r.alpha).collect(),
            mcs: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    /// Forwarding noise follows from the drop's geometry and channels.
    Physical,
    /// ñ_p is injected with a prescribed power relative to the pilot power.
    Synthetic { relative_power_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionOutput {
    pub x_hat: C64,
    pub alpha: f64,
}

/// Interfering BS → forwarding terminal. `channels[k]` is the 1×N CFR slice
/// on the subcarrier carrying `pilots[k]`.
pub fn transmission_stage<R: Rng + ?Sized>(
    pilots: &[C64],
    channels: &[CMatrix],
    p_tx: f64,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<TransmissionOutput>> {
    if pilots.len() != channels.len() {
        return Err(Error::Dimension(format!(
            "{} pilots, {} channel slices",
            pilots.len(),
            channels.len()
        )));
    }
    pilots
        .iter()
        .zip(channels)
        .map(|(&x, h)| {
            if h.nrows() != 1 {
                return Err(Error::Dimension(
                    "transmission stage serves a single terminal".into(),
                ));
            }
            let pre = phy::zf_precode(h, p_tx)?;
            let y = (h * &pre.matrix)[(0, 0)] * x + linalg::complex_normal(rng, sigma_n2);
            Ok(TransmissionOutput {
                x_hat: y / pre.alpha,
                alpha: pre.alpha,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardingOutput {
    pub x_tilde: C64,
    pub xi: f64,
}

/// Forwarding terminal → interfered BS. `channels[k]` is the R×1 CFR slice
/// (transmit power included) on the subcarrier carrying `x_hat[k]`.
pub fn forwarding_stage<R: Rng + ?Sized>(
    x_hat: &[C64],
    channels: &[CMatrix],
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<ForwardingOutput>> {
    if x_hat.len() != channels.len() {
        return Err(Error::Dimension(format!(
            "{} values, {} channel slices",
            x_hat.len(),
            channels.len()
        )));
    }
    x_hat
        .iter()
        .zip(channels)
        .map(|(&x, h)| {
            if h.ncols() != 1 {
                return Err(Error::Dimension(
                    "forwarding stage carries a single terminal".into(),
                ));
            }
            let f = phy::zf_detector(h)?;
            let mut y = h.column(0).into_owned() * x;
            for v in y.iter_mut() {
                *v += linalg::complex_normal(rng, sigma_n2);
            }
            let x_tilde = (f.row(0) * y)[(0, 0)];
            let xi = f.row(0).iter().map(|z| z.norm_sqr()).sum();
            Ok(ForwardingOutput { x_tilde, xi })
        })
        .collect()
}

/// τ_p = 1/α² + ξ_p.
pub fn total_noise_params(alpha: f64, xi: f64) -> f64 {
    alpha.powi(-2) + xi
}

/// Converts a relative power in dB to linear; `-inf` maps to zero.
pub fn db_to_linear(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Injects ñ_p ~ CN(0, 10^(dB/10)) into every pilot of `pattern`, with τ_p
/// set so that τ_p·σ_n² equals the injected variance.
pub fn synthetic_forward<R: Rng + ?Sized>(
    pattern: &PilotPattern,
    relative_power_db: f64,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<PilotRecord>> {
    let variance = db_to_linear(relative_power_db);
    if variance.is_nan() || variance.is_infinite() {
        return Err(Error::InvalidConfig(format!(
            "bad relative noise power {relative_power_db} dB"
        )));
    }
    if variance > 0.0 && !(sigma_n2 > 0.0) {
        return Err(Error::InvalidConfig(
            "synthetic forwarding noise needs sigma_n2 > 0".into(),
        ));
    }
    let tau = if variance > 0.0 {
        variance / sigma_n2
    } else {
        0.0
    };
    let amp = variance.sqrt();
    Ok(perfect_records(pattern)
        .into_iter()
        .map(|mut r| {
            // Draw unit-variance noise first so sweeps over the power stay paired.
            let noise = linalg::complex_normal(rng, 1.0) * amp;
            r.x_hat = r.x - noise;
            r.x_tilde = r.x_hat;
            r.xi = tau;
            r.tau = total_noise_params(r.alpha, r.xi);
            r
        })
        .collect())
}

/// Radio links and powers used by one forwarding terminal.
#[derive(Debug, Clone, Copy)]
pub struct ForwardingLinks<'a> {
    /// Interfering BS → terminal, 1×N per subcarrier.
    pub downlink: &'a CfrGrid,
    /// Terminal → interfered BS, R×1 per subcarrier, without transmit power.
    pub uplink: &'a CfrGrid,
    pub bs_power_per_re: f64,
    pub terminal_power_per_re: f64,
    /// Subcarriers reserved for the pilot payload; pilot k rides on
    /// `subcarriers[k % len]`.
    pub subcarriers: &'a [usize],
}

/// Runs both stages for every pilot of `pattern` (stream-major order).
pub fn forward_physical<R: Rng + ?Sized>(
    pattern: &PilotPattern,
    links: &ForwardingLinks<'_>,
    sigma_n2: f64,
    rng: &mut R,
) -> Result<Vec<PilotRecord>> {
    if links.subcarriers.is_empty() {
        return Err(Error::InvalidConfig(
            "no forwarding subcarriers allocated".into(),
        ));
    }
    let w = links.downlink.subcarriers().min(links.uplink.subcarriers());
    if let Some(&bad) = links.subcarriers.iter().find(|&&s| s >= w) {
        return Err(Error::InvalidConfig(format!(
            "forwarding subcarrier {bad} outside the band"
        )));
    }
    let mut records = perfect_records(pattern);
    let carriers: Vec<usize> = (0..records.len())
        .map(|k| links.subcarriers[k % links.subcarriers.len()])
        .collect();
    let pilots: Vec<C64> = records.iter().map(|r| r.x).collect();

    let down: Vec<CMatrix> = carriers
        .iter()
        .map(|&c| links.downlink.at(c).clone())
        .collect();
    let stage1 = transmission_stage(&pilots, &down, links.bs_power_per_re, sigma_n2, rng)?;

    let amp = links.terminal_power_per_re.sqrt();
    let up: Vec<CMatrix> = carriers
        .iter()
        .map(|&c| links.uplink.at(c).scale(amp))
        .collect();
    let x_hat: Vec<C64> = stage1.iter().map(|s| s.x_hat).collect();
    let stage2 = forwarding_stage(&x_hat, &up, sigma_n2, rng)?;

    for ((r, s1), s2) in records.iter_mut().zip(&stage1).zip(&stage2) {
        r.x_hat = s1.x_hat;
        r.alpha = s1.alpha;
        r.x_tilde = s2.x_tilde;
        r.xi = s2.xi;
        r.tau = total_noise_params(r.alpha, r.xi);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::phy::build_pilot_pattern;
    use crate::seed;

    fn unit_row(n: usize, gain: f64) -> CMatrix {
        let mut h = CMatrix::zeros(1, n);
        h[(0, 0)] = C64::new(gain, 0.0);
        h
    }

    fn variance(samples: impl Iterator<Item = C64>) -> f64 {
        let v: Vec<C64> = samples.collect();
        let mean: C64 = v.iter().sum::<C64>() / v.len() as f64;
        v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (v.len() - 1) as f64
    }

    #[test]
    fn noiseless_transmission_recovers_pilots() {
        let mut rng = seed::rng(1);
        let pilots = [ONE, C64::new(0.0, -1.0)];
        let h = linalg::complex_normal_matrix(&mut rng, 1, 8, 1.0);
        let out = transmission_stage(&pilots, &[h.clone(), h], 2.0, 0.0, &mut rng).unwrap();
        for (o, x) in out.iter().zip(pilots) {
            assert!((o.x_hat - x).norm() < 1e-12);
        }
    }

    #[test]
    fn transmission_noise_variance_is_sigma2_over_alpha2() {
        // h = e_1, p_tx = 4 → α = 2; σ² = 0.4 → Var = 0.1.
        let mut rng = seed::rng(2);
        let n = 100_000;
        let pilots = vec![ONE; n];
        let chans = vec![unit_row(4, 1.0); n];
        let out = transmission_stage(&pilots, &chans, 4.0, 0.4, &mut rng).unwrap();
        assert!((out[0].alpha - 2.0).abs() < 1e-12);
        let v = variance(out.iter().map(|o| ONE - o.x_hat));
        assert!((v - 0.1).abs() / 0.1 < 0.03, "{v}");
        let mean: C64 = out.iter().map(|o| o.x_hat).sum::<C64>() / n as f64;
        assert!((mean - ONE).norm() < 0.01);
    }

    #[test]
    fn forwarding_xi_definition() {
        // F = hᴴ/‖h‖² = [0.5, 0.5j] for h = [1, -j]ᵀ.
        let h = CMatrix::from_column_slice(2, 1, &[ONE, C64::new(0.0, -1.0)]);
        let mut rng = seed::rng(3);
        let out = forwarding_stage(&[ONE], std::slice::from_ref(&h), 0.0, &mut rng).unwrap();
        assert!((out[0].xi - 0.5).abs() < 1e-15);
        assert!((out[0].x_tilde - ONE).norm() < 1e-15);

        let n = 100_000;
        let x = vec![C64::new(0.3, -0.2); n];
        let out = forwarding_stage(&x, &vec![h; n], 0.8, &mut rng).unwrap();
        let v = variance(out.iter().zip(&x).map(|(o, x)| x - o.x_tilde));
        assert!((v - 0.5 * 0.8).abs() / 0.4 < 0.03, "{v}");
    }

    #[test]
    fn tau_arithmetic() {
        assert_eq!(total_noise_params(2.0, 0.25), 0.5);
        assert_eq!(total_noise_params(f64::INFINITY, 0.0), 0.0);
        assert!(total_noise_params(1e8, 0.0) < 1e-15);
    }

    #[test]
    fn two_stage_noise_adds_up() {
        let n = 100_000;
        let mut rng = seed::rng(4);
        let sigma2 = 0.3;
        let down = unit_row(8, 0.5);
        let up = CMatrix::from_column_slice(3, 1, &[ONE, C64::new(0.5, 0.5), ZERO]);
        let pilots = vec![ONE; n];
        let s1 = transmission_stage(&pilots, &vec![down; n], 2.0, sigma2, &mut rng).unwrap();
        let xh: Vec<C64> = s1.iter().map(|s| s.x_hat).collect();
        let s2 = forwarding_stage(&xh, &vec![up; n], sigma2, &mut rng).unwrap();
        let tau = total_noise_params(s1[0].alpha, s2[0].xi);
        let v = variance(s2.iter().map(|s| ONE - s.x_tilde));
        assert!(
            (v - tau * sigma2).abs() / (tau * sigma2) < 0.03,
            "{v} vs {}",
            tau * sigma2
        );
    }

    #[test]
    fn synthetic_noise_power() {
        let pattern = build_pilot_pattern(4, 144, 4, 1).unwrap();
        let mut rng = seed::rng(5);
        let clean = synthetic_forward(&pattern, f64::NEG_INFINITY, 1.0, &mut rng).unwrap();
        assert!(clean.iter().all(|r| r.x_tilde == r.x && r.tau == 0.0));

        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            for r in synthetic_forward(&pattern, -20.0, 0.5, &mut rng).unwrap() {
                acc += r.equivalent_noise().norm_sqr();
                assert!((r.tau * 0.5 - 0.01).abs() < 1e-15);
                count += 1;
            }
        }
        assert!((acc / count as f64 - 0.01).abs() / 0.01 < 0.03);
        assert!(synthetic_forward(&pattern, -10.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn physical_forwarding_without_noise_is_exact() {
        let pattern = build_pilot_pattern(2, 16, 4, 7).unwrap();
        let mut rng = seed::rng(6);
        let downlink = CfrGrid::from_slices(
            (0..16)
                .map(|_| linalg::complex_normal_matrix(&mut rng, 1, 4, 1.0))
                .collect(),
        )
        .unwrap();
        let uplink = CfrGrid::from_slices(
            (0..16)
                .map(|_| linalg::complex_normal_matrix(&mut rng, 4, 1, 1.0))
                .collect(),
        )
        .unwrap();
        let links = ForwardingLinks {
            downlink: &downlink,
            uplink: &uplink,
            bs_power_per_re: 3.0,
            terminal_power_per_re: 2.0,
            subcarriers: &[5, 6, 7],
        };
        let recs = forward_physical(&pattern, &links, 0.0, &mut rng).unwrap();
        assert_eq!(recs.len(), 8);
        for r in &recs {
            assert!((r.x_tilde - r.x).norm() < 1e-12);
            assert!(r.tau >= r.xi && r.xi >= 0.0 && r.alpha > 0.0);
        }
        let bad = ForwardingLinks {
            subcarriers: &[16],
            ..links
        };
        assert!(forward_physical(&pattern, &bad, 0.0, &mut rng).is_err());
    }
}
