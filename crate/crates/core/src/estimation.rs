//! CLI channel estimators.
//!
//! The CLI channel splits into R·M subchannels. Each is estimated from its P
//! pilot observations z = X̃g + Ñg + n and linearly interpolated to all
//! subcarriers.
//!
//! - LS: ĝ = X̃⁻¹z
//! - LMMSE: ĝ = R_g (R_g + σ_n²/σ_x² I)⁻¹ ĝ_LS
//! - Proposed: ĝ = R_g (R_g + R_n′(X̃ᴴX̃)⁻¹)⁻¹ X̃⁻¹z with
//!   R_n′ = diag((τ_p R_g(p,p) + 1) σ_n²), which folds the forwarding noise
//!   into the Wiener filter.

use std::fmt;
use std::str::FromStr;

use crate::channel::CfrGrid;
use crate::error::{Error, Result};
use crate::forwarding::PilotRecord;
use crate::linalg::{self, CMatrix, C64};

/// Pilot symbol power; pilots are unit-modulus.
pub const SIGMA_X2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Ls,
    Lmmse,
    Proposed,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Ls, Estimator::Lmmse, Estimator::Proposed];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Lmmse => "lmmse",
            Estimator::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(Estimator::Ls),
            "lmmse" => Ok(Estimator::Lmmse),
            "proposed" => Ok(Estimator::Proposed),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Received pilots of one or more subchannels sharing the same pilots.
/// Column k of `z` is one subchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub z: CMatrix,
    pub x_tilde: Vec<C64>,
    pub subcarriers: Vec<usize>,
    pub tau: Vec<f64>,
    pub sigma_n2: f64,
}

impl PilotObservation {
    pub fn new(
        z: CMatrix,
        x_tilde: Vec<C64>,
        subcarriers: Vec<usize>,
        tau: Vec<f64>,
        sigma_n2: f64,
    ) -> Result<Self> {
        let p = z.nrows();
        if x_tilde.len() != p || subcarriers.len() != p || tau.len() != p {
            return Err(Error::Dimension(format!(
                "{p} observations with {} pilots, {} indices, {} noise terms",
                x_tilde.len(),
                subcarriers.len(),
                tau.len()
            )));
        }
        if let Some(index) = x_tilde.iter().position(|x| !(x.norm_sqr() > 0.0)) {
            return Err(Error::ZeroPilot { index });
        }
        if tau.iter().any(|t| !(*t >= 0.0)) || !(sigma_n2 >= 0.0) {
            return Err(Error::InvalidConfig(
                "noise parameters must be nonnegative".into(),
            ));
        }
        Ok(Self {
            z,
            x_tilde,
            subcarriers,
            tau,
            sigma_n2,
        })
    }

    pub fn from_records(z: CMatrix, records: &[PilotRecord], sigma_n2: f64) -> Result<Self> {
        Self::new(
            z,
            records.iter().map(|r| r.x_tilde).collect(),
            records.iter().map(|r| r.subcarrier).collect(),
            records.iter().map(|r| r.tau).collect(),
            sigma_n2,
        )
    }

    pub fn pilots(&self) -> usize {
        self.z.nrows()
    }
}

pub fn ls_estimate(obs: &PilotObservation) -> Result<CMatrix> {
    let mut g = obs.z.clone();
    for (p, x) in obs.x_tilde.iter().enumerate() {
        if !(x.norm_sqr() > 0.0) {
            return Err(Error::ZeroPilot { index: p });
        }
        for v in g.row_mut(p).iter_mut() {
            *v /= x;
        }
    }
    Ok(g)
}

fn check_correlation(r_g: &CMatrix, p: usize) -> Result<()> {
    if r_g.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "R_g is {:?}, expected {p}x{p}",
            r_g.shape()
        )));
    }
    let scale = r_g
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let asym = linalg::hermitian_asymmetry(r_g);
    if asym > 1e-9 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// R_g (R_g + diag(loading))⁻¹ ĝ_LS; the identity when every loading is zero.
fn wiener_smooth(r_g: &CMatrix, loading: &[f64], g_ls: CMatrix) -> Result<CMatrix> {
    if loading.iter().all(|&l| l == 0.0) {
        return Ok(g_ls);
    }
    let mut a = r_g.clone();
    for (p, &l) in loading.iter().enumerate() {
        a[(p, p)] += l;
    }
    let x = linalg::solve_hpd(&a, &g_ls, "wiener filter")?;
    Ok(r_g * x)
}

pub fn lmmse_estimate(obs: &PilotObservation, r_g: &CMatrix) -> Result<CMatrix> {
    check_correlation(r_g, obs.pilots())?;
    let loading = vec![obs.sigma_n2 / SIGMA_X2; obs.pilots()];
    wiener_smooth(r_g, &loading, ls_estimate(obs)?)
}

/// η_p = (τ_p R_g(p,p) + 1) σ_n².
pub fn equivalent_noise_power(tau: f64, r_pp: f64, sigma_n2: f64) -> f64 {
    (tau * r_pp + 1.0) * sigma_n2
}

pub fn proposed_estimate(obs: &PilotObservation, r_g: &CMatrix) -> Result<CMatrix> {
    check_correlation(r_g, obs.pilots())?;
    // R_n′ (X̃ᴴX̃)⁻¹ is diagonal.
    let loading: Vec<f64> = (0..obs.pilots())
        .map(|p| {
            equivalent_noise_power(obs.tau[p], r_g[(p, p)].re, obs.sigma_n2)
                / obs.x_tilde[p].norm_sqr()
        })
        .collect();
    wiener_smooth(r_g, &loading, ls_estimate(obs)?)
}

pub fn estimate(method: Estimator, obs: &PilotObservation, r_g: &CMatrix) -> Result<CMatrix> {
    match method {
        Estimator::Ls => ls_estimate(obs),
        Estimator::Lmmse => lmmse_estimate(obs, r_g),
        Estimator::Proposed => proposed_estimate(obs, r_g),
    }
}

/// Linear interpolation through the pilot estimates; values beyond the first
/// or last pilot hold the nearest pilot value.
pub fn interpolate(g_hat: &[C64], pilot_indices: &[usize], subcarriers: usize) -> Result<Vec<C64>> {
    if g_hat.len() != pilot_indices.len() {
        return Err(Error::Dimension(
            "one estimate per pilot index required".into(),
        ));
    }
    if pilot_indices.len() < 2 {
        return Err(Error::Dimension(
            "interpolation needs at least two pilots".into(),
        ));
    }
    if pilot_indices.windows(2).any(|w| w[1] <= w[0])
        || pilot_indices[pilot_indices.len() - 1] >= subcarriers
    {
        return Err(Error::Dimension(
            "pilot indices must increase and lie inside the band".into(),
        ));
    }
    let mut out = Vec::with_capacity(subcarriers);
    let mut seg = 0;
    for w in 0..subcarriers {
        while seg + 2 < pilot_indices.len() && w >= pilot_indices[seg + 1] {
            seg += 1;
        }
        let (c0, c1) = (pilot_indices[seg], pilot_indices[seg + 1]);
        let v = if w <= c0 {
            g_hat[seg]
        } else if w >= c1 {
            g_hat[seg + 1]
        } else {
            let t = (w - c0) as f64 / (c1 - c0) as f64;
            g_hat[seg] * (1.0 - t) + g_hat[seg + 1] * t
        };
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelEstimate {
    pub estimator: Estimator,
    pub at_pilots: Vec<C64>,
    pub full: Vec<C64>,
}

/// Estimate of the full W × R × M CLI transfer tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CliChannelEstimate {
    pub estimator: Estimator,
    pub grid: CfrGrid,
}

/// Runs `method` on every (r, m) subchannel and interpolates.
///
/// `rx_pilots[m]` is P×R: the samples received on stream m's pilot symbol.
/// `correlations[m]` is the R_g of stream m's subchannels.
pub fn estimate_cli_channel(
    rx_pilots: &[CMatrix],
    records: &[PilotRecord],
    correlations: &[CMatrix],
    sigma_n2: f64,
    subcarriers: usize,
    method: Estimator,
) -> Result<CliChannelEstimate> {
    let streams = rx_pilots.len();
    if correlations.len() != streams {
        return Err(Error::Dimension(format!(
            "{} correlations for {streams} streams",
            correlations.len()
        )));
    }
    let antennas = rx_pilots.first().map_or(0, |z| z.ncols());
    let mut grid = CfrGrid::zeros(subcarriers, antennas, streams);
    for (m, z) in rx_pilots.iter().enumerate() {
        let p_count = z.nrows();
        let mut stream_records: Vec<PilotRecord> =
            records.iter().filter(|r| r.stream == m).copied().collect();
        stream_records.sort_by_key(|r| r.pilot);
        for p in 0..p_count {
            if stream_records.get(p).map(|r| r.pilot) != Some(p) {
                return Err(Error::MissingPilot {
                    stream: m,
                    pilot: p,
                });
            }
        }
        stream_records.truncate(p_count);
        let obs = PilotObservation::from_records(z.clone(), &stream_records, sigma_n2)?;
        let g_hat = estimate(method, &obs, &correlations[m])?;
        for r in 0..antennas {
            let col: Vec<C64> = g_hat.column(r).iter().copied().collect();
            let full = interpolate(&col, &obs.subcarriers, subcarriers)?;
            for (w, v) in full.into_iter().enumerate() {
                grid.at_mut(w)[(r, m)] = v;
            }
        }
    }
    Ok(CliChannelEstimate {
        estimator: method,
        grid,
    })
}

/// Normalized squared error ‖Ĥ − H‖² / ‖H‖² over the whole grid.
pub fn nse(estimate: &CfrGrid, truth: &CfrGrid) -> f64 {
    let err: f64 = estimate
        .slices()
        .iter()
        .zip(truth.slices())
        .map(|(a, b)| linalg::frobenius_sqr(&(a - b)))
        .sum();
    err / truth.energy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_rg, TdlProfile};
    use crate::forwarding::{perfect_records, synthetic_forward};
    use crate::linalg::{complex_normal, ONE};
    use crate::phy::build_pilot_pattern;
    use crate::seed;
    use proptest::prelude::*;

    fn obs(z: &[C64], x: &[C64], tau: &[f64], sigma2: f64) -> PilotObservation {
        let n = z.len();
        PilotObservation::new(
            CMatrix::from_column_slice(n, 1, z),
            x.to_vec(),
            (0..n).map(|p| 4 * p).collect(),
            tau.to_vec(),
            sigma2,
        )
        .unwrap()
    }

    #[test]
    fn ls_reference_cases() {
        let z = [C64::new(0.5, 0.5), ONE];
        let g = ls_estimate(&obs(&z, &[ONE, ONE], &[0.0, 0.0], 0.1)).unwrap();
        assert_eq!(g[(0, 0)], z[0]);
        assert_eq!(g[(1, 0)], z[1]);
        let g = ls_estimate(&obs(&[ONE], &[C64::new(2.0, 0.0)], &[0.0], 0.1)).unwrap();
        assert_eq!(g[(0, 0)], C64::new(0.5, 0.0));
        let zero = PilotObservation::new(
            CMatrix::zeros(1, 1),
            vec![C64::new(0.0, 0.0)],
            vec![0],
            vec![0.0],
            0.1,
        );
        assert!(matches!(zero, Err(Error::ZeroPilot { index: 0 })));
    }

    #[test]
    fn lmmse_scalar_shrinkage_and_noiseless_limit() {
        let z = [C64::new(0.4, -0.2), C64::new(1.0, 0.3), C64::new(-0.5, 0.0)];
        let x = [ONE, C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
        let o = obs(&z, &x, &[0.0; 3], 1.0);
        let g = lmmse_estimate(&o, &CMatrix::identity(3, 3)).unwrap();
        let ls = ls_estimate(&o).unwrap();
        assert!(linalg::frobenius_sqr(&(g - ls.scale(0.5))) < 1e-28);

        // Rank-one R_g: the σ² = 0 limit must still be the LS estimate.
        let o = obs(&z, &x, &[0.0; 3], 0.0);
        let ones = CMatrix::from_element(3, 3, ONE);
        assert_eq!(lmmse_estimate(&o, &ones).unwrap(), ls_estimate(&o).unwrap());

        let mut skew = CMatrix::identity(3, 3);
        skew[(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(
            lmmse_estimate(&o, &skew),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn eta_arithmetic() {
        assert!((equivalent_noise_power(1.0, 1.0, 0.1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn proposed_collapses_to_lmmse_bit_for_bit() {
        let profile = TdlProfile::builtin("tdl-c", 300e-9).unwrap();
        let pattern = build_pilot_pattern(1, 144, 4, 3).unwrap();
        let rg = build_rg(&profile, &pattern.subcarriers, 30e3)
            .unwrap()
            .scaled(3.0);
        let mut rng = seed::rng(10);
        let z = linalg::complex_normal_matrix(&mut rng, 36, 8, 1.0);
        let o = PilotObservation::from_records(z, &perfect_records(&pattern), 0.2).unwrap();
        assert_eq!(
            proposed_estimate(&o, &rg).unwrap(),
            lmmse_estimate(&o, &rg).unwrap()
        );
    }

    #[test]
    fn interpolation_cases() {
        let g = interpolate(&[C64::new(0.0, 0.0), ONE], &[0, 4], 8).unwrap();
        assert_eq!(g[2], C64::new(0.5, 0.0));
        assert_eq!(g[7], ONE);
        let c = C64::new(0.3, -0.7);
        assert!(interpolate(&[c; 3], &[1, 5, 9], 12)
            .unwrap()
            .iter()
            .all(|&v| v == c));
        assert!(interpolate(&[c], &[0], 4).is_err());
    }

    #[test]
    fn noiseless_ls_recovers_cli_channel_at_pilots() {
        let mut rng = seed::rng(12);
        let (w, r, m) = (144, 8, 4);
        let pattern = build_pilot_pattern(m, w, 4, 2).unwrap();
        let truth = CfrGrid::from_slices(
            (0..w)
                .map(|_| linalg::complex_normal_matrix(&mut rng, r, m, 1.0))
                .collect(),
        )
        .unwrap();
        let rx: Vec<CMatrix> = (0..m)
            .map(|s| {
                CMatrix::from_fn(pattern.pilots_per_stream(), r, |p, a| {
                    truth.get(pattern.subcarriers[p], a, s) * pattern.symbols[s][p]
                })
            })
            .collect();
        let rg = vec![CMatrix::identity(36, 36); m];
        let est = estimate_cli_channel(&rx, &perfect_records(&pattern), &rg, 0.0, w, Estimator::Ls)
            .unwrap();
        assert_eq!(est.estimator, Estimator::Ls);
        assert_eq!(
            (est.grid.subcarriers(), est.grid.rows(), est.grid.cols()),
            (144, 8, 4)
        );
        for &c in &pattern.subcarriers {
            assert!(linalg::frobenius_sqr(&(est.grid.at(c) - truth.at(c))).sqrt() < 1e-9);
        }
        let partial: Vec<PilotRecord> = perfect_records(&pattern)
            .into_iter()
            .filter(|r| r.pilot != 7)
            .collect();
        assert!(matches!(
            estimate_cli_channel(&rx, &partial, &rg, 0.0, w, Estimator::Ls),
            Err(Error::MissingPilot {
                stream: 0,
                pilot: 7
            })
        ));
    }

    /// Monte-Carlo check that the Wiener filter beats LS on a correlated channel.
    #[test]
    fn lmmse_mse_below_ls() {
        let profile = TdlProfile::builtin("tdl-c", 300e-9).unwrap();
        let pattern = build_pilot_pattern(1, 144, 4, 1).unwrap();
        let rg = build_rg(&profile, &pattern.subcarriers, 30e3).unwrap();
        let synth = crate::channel::ChannelSynth::new(&profile, 144, 30e3);
        let mut rng = seed::rng(13);
        let (mut e_ls, mut e_lmmse) = (0.0, 0.0);
        let records = perfect_records(&pattern);
        for _ in 0..10_000 {
            let h = synth.realize(1, 1, 1.0, &mut rng);
            let g: Vec<C64> = pattern
                .subcarriers
                .iter()
                .map(|&c| h.get(c, 0, 0))
                .collect();
            let z = CMatrix::from_fn(36, 1, |p, _| {
                g[p] * pattern.symbols[0][p] + complex_normal(&mut rng, 0.1)
            });
            let o = PilotObservation::from_records(z, &records, 0.1).unwrap();
            let err = |est: CMatrix| {
                est.iter()
                    .zip(&g)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            };
            e_ls += err(ls_estimate(&o).unwrap());
            e_lmmse += err(lmmse_estimate(&o, &rg.matrix).unwrap());
        }
        assert!(e_lmmse < e_ls, "{e_lmmse} vs {e_ls}");
    }

    #[test]
    fn proposed_beats_lmmse_under_forwarding_noise() {
        let profile = TdlProfile::builtin("tdl-c", 300e-9).unwrap();
        let pattern = build_pilot_pattern(1, 144, 4, 1).unwrap();
        let rg = build_rg(&profile, &pattern.subcarriers, 30e3)
            .unwrap()
            .scaled(50.0);
        let synth = crate::channel::ChannelSynth::new(&profile, 144, 30e3);
        let mut rng = seed::rng(14);
        let (mut e_prop, mut e_lmmse) = (0.0, 0.0);
        for _ in 0..2_000 {
            let h = synth.realize(1, 1, 50.0, &mut rng);
            let records = synthetic_forward(&pattern, -5.0, 1.0, &mut rng).unwrap();
            let g: Vec<C64> = pattern
                .subcarriers
                .iter()
                .map(|&c| h.get(c, 0, 0))
                .collect();
            let z = CMatrix::from_fn(36, 1, |p, _| {
                g[p] * records[p].x + complex_normal(&mut rng, 1.0)
            });
            let o = PilotObservation::from_records(z, &records, 1.0).unwrap();
            let energy: f64 = g.iter().map(|v| v.norm_sqr()).sum();
            let err = |est: CMatrix| {
                est.iter()
                    .zip(&g)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    / energy
            };
            e_prop += err(proposed_estimate(&o, &rg).unwrap());
            e_lmmse += err(lmmse_estimate(&o, &rg).unwrap());
        }
        assert!(e_prop < e_lmmse, "{e_prop} vs {e_lmmse}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn estimators_are_linear_in_z(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0, tau in 0.0f64..2.0) {
            let profile = TdlProfile::builtin("tdl-a", 100e-9).unwrap();
            let pattern = build_pilot_pattern(1, 64, 4, seed).unwrap();
            let rg = build_rg(&profile, &pattern.subcarriers, 30e3).unwrap().scaled(2.0);
            let mut rng = seed::rng(seed);
            let mut records = synthetic_forward(&pattern, -10.0, 0.5, &mut rng).unwrap();
            for r in &mut records { r.tau = tau; }
            let z = linalg::complex_normal_matrix(&mut rng, 16, 2, 1.0);
            let a = C64::new(re, im);
            let o1 = PilotObservation::from_records(z.clone(), &records, 0.5).unwrap();
            let o2 = PilotObservation::from_records(z.map(|v| v * a), &records, 0.5).unwrap();
            for m in Estimator::ALL {
                let e1 = estimate(m, &o1, &rg).unwrap().map(|v| v * a);
                let e2 = estimate(m, &o2, &rg).unwrap();
                let scale = linalg::frobenius_sqr(&e1).max(1e-300);
                prop_assert!(linalg::frobenius_sqr(&(e1 - e2)) / scale < 1e-20);
            }
        }

        #[test]
        fn interpolation_passes_through_knots(values in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20)) {
            let g: Vec<C64> = values.iter().map(|&(a, b)| C64::new(a, b)).collect();
            let idx: Vec<usize> = (0..g.len()).map(|p| 3 * p + 1).collect();
            let full = interpolate(&g, &idx, 3 * g.len() + 2).unwrap();
            for (k, &c) in idx.iter().enumerate() {
                prop_assert_eq!(full[c], g[k]);
            }
        }
    }
}
