//! The per-drop simulation pipeline and the parallel drop loop.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{CorrelationModel, ScenarioConfig, SweepAxis, UtCsi};
use super::sink::{DropMetrics, MetricSink, PilotSource, Series};
use crate::channel::{build_rg, CfrGrid, ChannelSynth, FreqCorrelation, TdlProfile};
use crate::error::{Error, Result};
use crate::estimation::{self, Estimator};
use crate::forwarding::{self, ForwardingLinks, NoiseMode, PilotRecord};
use crate::geometry::{self, ForwardingStrategy, Layout, Node};
use crate::linalg::{CMatrix, CVector};
use crate::phy::{self, PilotPattern};
use crate::receiver::{self, DetectorInput, SlotParts};
use crate::seed::{self, stream};

/// Receiver noise variance; every power is expressed relative to it.
const SIGMA_N2: f64 = 1.0;

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Scale for the desired signal power so that S·scale / (I + N) hits
/// `target_db`, given mean per-subcarrier desired, CLI and noise powers.
pub fn set_target_sinr(signal: f64, cli: f64, noise: f64, target_db: f64) -> Result<f64> {
    if !(signal > 0.0) {
        return Err(Error::Singular {
            context: "desired signal power",
            condition: f64::INFINITY,
        });
    }
    Ok(10f64.powf(target_db / 10.0) * (cli + noise) / signal)
}

/// Forwarding-noise power relative to the pilot power, in dB:
/// 10 log10(Σ|x − x̃|² / Σ|x|²). Perfect records give `-inf`.
pub fn relative_noise_power(records: &[PilotRecord]) -> f64 {
    let (noise, pilot) = noise_and_pilot_energy(records);
    if noise == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (noise / pilot).log10()
    }
}

fn noise_and_pilot_energy(records: &[PilotRecord]) -> (f64, f64) {
    records.iter().fold((0.0, 0.0), |(n, p), r| {
        (n + r.equivalent_noise().norm_sqr(), p + r.x.norm_sqr())
    })
}

fn stack_cols(parts: &[CfrGrid]) -> Result<CfrGrid> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Dimension("nothing to stack".into()))?;
    let (w, rows) = (first.subcarriers(), first.rows());
    if parts
        .iter()
        .any(|p| p.subcarriers() != w || p.rows() != rows)
    {
        return Err(Error::Dimension(
            "cannot stack grids of different shapes".into(),
        ));
    }
    let cols: usize = parts.iter().map(|p| p.cols()).sum();
    let slices = (0..w)
        .map(|k| {
            let mut m = CMatrix::zeros(rows, cols);
            let mut c0 = 0;
            for p in parts {
                m.columns_mut(c0, p.cols()).copy_from(p.at(k));
                c0 += p.cols();
            }
            m
        })
        .collect();
    CfrGrid::from_slices(slices)
}

/// Everything one drop needs that does not depend on the sweep point.
struct DropState {
    /// UL UT → interfered BS, R×K, path gain included, no transmit power.
    h_ut: CfrGrid,
    /// Effective CLI channel H_cli·W, R×M, transmit power included.
    h_cli: CfrGrid,
    pattern: PilotPattern,
    rx_pilots: Vec<CMatrix>,
    correlations: Vec<CMatrix>,
    /// Detection scaffolding, absent when detection is disabled.
    detection: Option<DetectionState>,
}

struct DetectionState {
    bits: Vec<u8>,
    parts: SlotParts,
    signal: f64,
    cli: f64,
}

/// A configured experiment: precomputed profile data plus the drop loop.
pub struct Experiment {
    config: ScenarioConfig,
    synth: ChannelSynth,
    profile_rg: FreqCorrelation,
    noise_mw: f64,
    forwarding_band: Vec<usize>,
}

impl Experiment {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let profile: TdlProfile = config.load_profile()?;
        let df = config.subcarrier_spacing_hz();
        let synth = ChannelSynth::new(&profile, config.subcarriers, df);
        let pilots: Vec<usize> = (0..config.subcarriers)
            .step_by(config.pilot_interval)
            .collect();
        let profile_rg = build_rg(&profile, &pilots, df)?;
        Ok(Self {
            noise_mw: dbm_to_mw(config.noise_dbm_per_re()),
            forwarding_band: config.forwarding_band(),
            config,
            synth,
            profile_rg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Runs every drop on a pool of `config.workers` threads. Results are
    /// merged in drop order, so the output does not depend on the pool size.
    pub fn run(&self) -> Result<MetricSink> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.config.workers > 0 {
            builder = builder.num_threads(self.config.workers);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        let results: Vec<Result<Option<DropMetrics>>> = pool.install(|| {
            (0..self.config.drops)
                .into_par_iter()
                .map(|d| self.simulate_drop(d))
                .collect()
        });

        let mut sink = MetricSink::new(self.config.sweep.values().to_vec());
        for (d, r) in results.into_iter().enumerate() {
            match r? {
                Some(m) => sink.push(m),
                None => {
                    log::warn!(
                        "drop {d}: no usable geometry after {} redraws, excluded",
                        self.config.max_redraws
                    );
                    sink.record_failure();
                }
            }
        }
        Ok(sink)
    }

    /// Simulates drop `index`, redrawing on singular channels or failed
    /// terminal selection. `None` when every attempt failed.
    pub fn simulate_drop(&self, index: usize) -> Result<Option<DropMetrics>> {
        for attempt in 0..=self.config.max_redraws {
            let drop_seed = seed::derive_path(self.config.seed, &[index as u64, attempt as u64]);
            match self.attempt(drop_seed) {
                Ok(mut m) => {
                    m.redraws = attempt;
                    return Ok(Some(m));
                }
                Err(e @ (Error::Singular { .. } | Error::Selection(_))) => {
                    log::debug!("drop {index} attempt {attempt}: {e}");
                }
                Err(e) => return Err(e),
            }
        }
        Ok(None)
    }

    fn gain(&self, seed: u64, a: &Node, b: &Node) -> f64 {
        let (i, j) = (a.index.min(b.index) as u64, a.index.max(b.index) as u64);
        let mut rng = seed::rng(seed::derive_path(seed, &[stream::SHADOWING, i, j]));
        geometry::link_gain(
            a,
            b,
            self.config.carrier_ghz,
            self.config.shadow_std_db,
            &mut rng,
        )
        .total_gain_linear
            / self.noise_mw
    }

    /// Fading channel `tx → rx` with `rows` receive and `cols` transmit antennas.
    fn channel(&self, seed: u64, tx: &Node, rx: &Node, rows: usize, cols: usize) -> CfrGrid {
        let gain = self.gain(seed, tx, rx);
        let mut rng = seed::rng(seed::derive_path(
            seed,
            &[stream::CHANNELS, tx.index as u64, rx.index as u64],
        ));
        self.synth.realize(rows, cols, gain, &mut rng)
    }

    fn attempt(&self, drop_seed: u64) -> Result<DropMetrics> {
        let cfg = &self.config;
        let layout =
            geometry::drop_scenario(&cfg.geometry(), seed::derive(drop_seed, stream::LAYOUT))?;
        let state = self.drop_state(&layout, drop_seed)?;

        let mut metrics = DropMetrics {
            points: vec![BTreeMap::new(); cfg.sweep.values().len()],
            ..Default::default()
        };

        let mut fixed: Vec<(Series, CfrGrid)> = Vec::new();
        let perfect = forwarding::perfect_records(&state.pattern);
        for est in [Estimator::Ls, Estimator::Lmmse] {
            fixed.push((
                Series::new(est, PilotSource::Perfect),
                self.estimate(&state, &perfect, est)?,
            ));
        }

        match (&cfg.sweep, cfg.noise_mode) {
            (SweepAxis::RelativeNoise(values), _) => {
                for (i, &db) in values.iter().enumerate() {
                    let records = self.synthetic_records(&state, drop_seed, db)?;
                    let mut series = fixed.clone();
                    for &est in &cfg.estimators {
                        series.push((
                            Series::new(est, PilotSource::Synthetic),
                            self.estimate(&state, &records, est)?,
                        ));
                    }
                    metrics.points[i] =
                        self.evaluate(&state, &series, cfg.fixed_sinr_db, drop_seed)?;
                }
            }
            (SweepAxis::Sinr(values), mode) => {
                let mut series = fixed;
                let sources: Vec<(PilotSource, Vec<PilotRecord>)> = match mode {
                    NoiseMode::Synthetic { relative_power_db } => {
                        vec![(
                            PilotSource::Synthetic,
                            self.synthetic_records(&state, drop_seed, relative_power_db)?,
                        )]
                    }
                    NoiseMode::Physical => cfg
                        .strategies
                        .iter()
                        .map(|&s| {
                            Ok((
                                PilotSource::Forwarded(s),
                                self.forwarded_records(&layout, &state, drop_seed, s)?,
                            ))
                        })
                        .collect::<Result<_>>()?,
                };
                for (source, records) in &sources {
                    if let PilotSource::Forwarded(s) = source {
                        metrics
                            .relative_noise
                            .insert(*s, noise_and_pilot_energy(records));
                    }
                    for &est in &cfg.estimators {
                        series.push((
                            Series::new(est, *source),
                            self.estimate(&state, records, est)?,
                        ));
                    }
                }
                for (i, &sinr) in values.iter().enumerate() {
                    metrics.points[i] = self.evaluate(&state, &series, sinr, drop_seed)?;
                }
            }
        }
        Ok(metrics)
    }

    fn drop_state(&self, layout: &Layout, drop_seed: u64) -> Result<DropState> {
        let cfg = &self.config;
        let (r_ant, n_ant, w) = (
            cfg.interfered_bs_antennas,
            cfg.interfering_bs_antennas,
            cfg.subcarriers,
        );
        let ib = layout.interfered_bs();
        let jb = layout.interfering_bs();

        let ut_cols: Vec<CfrGrid> = layout
            .ul_uts()
            .map(|u| self.channel(drop_seed, u, ib, r_ant, 1))
            .collect();
        let h_ut = stack_cols(&ut_cols)?;
        let dl_rows: Vec<CfrGrid> = layout
            .dl_uts()
            .map(|u| self.channel(drop_seed, jb, u, 1, n_ant))
            .collect();
        let h_dl = CfrGrid::stack_rows(&dl_rows)?;
        let h_bs = self.channel(drop_seed, jb, ib, r_ant, n_ant);

        let p_bs_re = dbm_to_mw(cfg.interfering_bs_power_dbm) / w as f64;
        let precoders: Vec<CMatrix> = h_dl
            .slices()
            .iter()
            .map(|h| phy::zf_precode(h, p_bs_re).map(|z| z.matrix))
            .collect::<Result<_>>()?;
        let h_cli = h_bs.times(&precoders)?;
        let streams = h_cli.cols();

        let pattern = phy::build_pilot_pattern(
            streams,
            w,
            cfg.pilot_interval,
            seed::derive(drop_seed, stream::PILOTS),
        )?;
        let rx_pilots = receiver::receive_cli_pilots(
            &h_cli,
            &pattern,
            SIGMA_N2,
            &mut seed::rng(seed::derive(drop_seed, stream::CLI_PILOT_NOISE)),
        )?;

        // The link gain below is the noise-normalized fading power of H_cli.
        let cli_gain = self.gain(drop_seed, jb, ib);
        let correlations = (0..streams)
            .map(|m| match cfg.rg_model {
                CorrelationModel::PrecoderAware => {
                    let v: Vec<CVector> = pattern
                        .subcarriers
                        .iter()
                        .map(|&c| precoders[c].column(m).into_owned())
                        .collect();
                    self.profile_rg.precoded(&v, cli_gain)
                }
                CorrelationModel::ProfileScaled => {
                    let col_power = precoders
                        .iter()
                        .map(|p| p.column(m).norm_squared())
                        .sum::<f64>()
                        / precoders.len() as f64;
                    Ok(self.profile_rg.scaled(cli_gain * col_power))
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let detection = if cfg.detection {
            let k = h_ut.cols();
            let p_ut_re = dbm_to_mw(cfg.ut_power_dbm) / w as f64;
            let h_ut_tx = h_ut.scaled(p_ut_re.sqrt());
            let mut data_rng = seed::rng(seed::derive(drop_seed, stream::DATA));
            let bits = phy::random_bits(&mut data_rng, w * k * phy::BITS_PER_SYMBOL);
            let dl_bits = phy::random_bits(&mut data_rng, w * streams * phy::BITS_PER_SYMBOL);
            let u: Vec<CVector> = phy::modulate(&bits)?
                .chunks(k)
                .map(CVector::from_column_slice)
                .collect();
            let d: Vec<CVector> = phy::modulate(&dl_bits)?
                .chunks(streams)
                .map(CVector::from_column_slice)
                .collect();
            let parts = SlotParts::draw(
                &h_ut_tx,
                &h_cli,
                &u,
                &d,
                SIGMA_N2,
                &mut seed::rng(seed::derive(drop_seed, stream::SLOT_NOISE)),
            )?;
            Some(DetectionState {
                bits,
                parts,
                signal: h_ut_tx.mean_frobenius_sqr(),
                cli: h_cli.mean_frobenius_sqr(),
            })
        } else {
            None
        };

        Ok(DropState {
            h_ut,
            h_cli,
            pattern,
            rx_pilots,
            correlations,
            detection,
        })
    }

    fn estimate(
        &self,
        state: &DropState,
        records: &[PilotRecord],
        method: Estimator,
    ) -> Result<CfrGrid> {
        Ok(estimation::estimate_cli_channel(
            &state.rx_pilots,
            records,
            &state.correlations,
            SIGMA_N2,
            self.config.subcarriers,
            method,
        )?
        .grid)
    }

    fn synthetic_records(
        &self,
        state: &DropState,
        drop_seed: u64,
        db: f64,
    ) -> Result<Vec<PilotRecord>> {
        // Same seed at every sweep point: the noise realizations are paired.
        let mut rng = seed::rng(seed::derive(drop_seed, stream::SYNTHETIC));
        forwarding::synthetic_forward(&state.pattern, db, SIGMA_N2, &mut rng)
    }

    fn forwarded_records(
        &self,
        layout: &Layout,
        state: &DropState,
        drop_seed: u64,
        strategy: ForwardingStrategy,
    ) -> Result<Vec<PilotRecord>> {
        let cfg = &self.config;
        let terminal = geometry::select_forwarding_terminal(layout, strategy)?;
        let jb = layout.interfering_bs();
        let ib = layout.interfered_bs();
        let downlink = self.channel(drop_seed, jb, terminal, 1, cfg.interfering_bs_antennas);
        let uplink = match layout.ul_uts().position(|u| u.index == terminal.index) {
            // A UL UT reuses its uplink data channel.
            Some(k) => state.h_ut.column(k),
            None => self.channel(drop_seed, terminal, ib, cfg.interfered_bs_antennas, 1),
        };
        let links = ForwardingLinks {
            downlink: &downlink,
            uplink: &uplink,
            bs_power_per_re: dbm_to_mw(cfg.interfering_bs_power_dbm) / cfg.subcarriers as f64,
            terminal_power_per_re: dbm_to_mw(terminal.tx_power_dbm)
                / self.forwarding_band.len() as f64,
            subcarriers: &self.forwarding_band,
        };
        let tag = ForwardingStrategy::ALL
            .iter()
            .position(|&s| s == strategy)
            .unwrap_or(0) as u64;
        let mut rng = seed::rng(seed::derive_path(drop_seed, &[stream::FORWARDING, tag]));
        forwarding::forward_physical(&state.pattern, &links, SIGMA_N2, &mut rng)
    }

    /// NSE of every series plus, when enabled, bit errors at `sinr_db`.
    fn evaluate(
        &self,
        state: &DropState,
        series: &[(Series, CfrGrid)],
        sinr_db: f64,
        drop_seed: u64,
    ) -> Result<BTreeMap<Series, (f64, u64, u64)>> {
        let mut out = BTreeMap::new();
        let Some(det) = &state.detection else {
            for (s, est) in series {
                out.insert(*s, (estimation::nse(est, &state.h_cli), 0, 0));
            }
            return Ok(out);
        };
        let noise = SIGMA_N2 * self.config.interfered_bs_antennas as f64;
        let scale = set_target_sinr(det.signal, det.cli, noise, sinr_db)?;
        let y = det.parts.combine(scale);
        let p_ut_re = dbm_to_mw(self.config.ut_power_dbm) / self.config.subcarriers as f64;
        let h_ut_true = state.h_ut.scaled((p_ut_re * scale).sqrt());
        let h_ut_hat = match self.config.ut_csi {
            UtCsi::Genie => h_ut_true,
            UtCsi::Ls => {
                let ul_pattern = phy::build_pilot_pattern(
                    h_ut_true.cols(),
                    self.config.subcarriers,
                    self.config.pilot_interval,
                    seed::derive_path(drop_seed, &[stream::UL_PILOTS, 0]),
                )?;
                let mut rng = seed::rng(seed::derive_path(drop_seed, &[stream::UL_PILOTS, 1]));
                receiver::estimate_ut_channel_ls(&h_ut_true, &ul_pattern, SIGMA_N2, &mut rng)?
            }
        };
        for (s, est) in series {
            let input = DetectorInput {
                h_ut_hat: &h_ut_hat,
                h_cli_hat: Some(est),
                sigma_n2: SIGMA_N2,
            };
            let u_hat = receiver::mmse_irc_detect(&y, &input)?;
            let (errors, bits) = receiver::count_bit_errors(&u_hat, &det.bits)?;
            out.insert(*s, (estimation::nse(est, &state.h_cli), errors, bits));
        }
        Ok(out)
    }
}

/// Builds the experiment for `config` and runs all of its drops.
pub fn run_experiment(config: &ScenarioConfig) -> Result<MetricSink> {
    Experiment::new(config.clone())?.run()
}
