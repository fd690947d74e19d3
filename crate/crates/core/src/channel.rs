//! Tapped-delay-line fading channels and their frequency correlation.
//!
//! Each antenna pair fades independently with Rayleigh taps; the channel is
//! constant over one slot (block fading). Built-in profiles use the TDL-A/B/C
//! normalized tap tables scaled to a requested RMS delay spread.

use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    /// Linear power; profile powers sum to one.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    name: String,
    taps: Vec<Tap>,
}

// (normalized delay, power dB)
const TDL_A: &[(f64, f64)] = &[
    (0.0000, -13.4),
    (0.3819, 0.0),
    (0.4025, -2.2),
    (0.5868, -4.0),
    (0.4610, -6.0),
    (0.5375, -8.2),
    (0.6708, -9.9),
    (0.5750, -10.5),
    (0.7618, -7.5),
    (1.5375, -15.9),
    (1.8978, -6.6),
    (2.2242, -16.7),
    (2.1718, -12.4),
    (2.4942, -15.2),
    (2.5119, -10.8),
    (3.0582, -11.3),
    (4.0810, -12.7),
    (4.4579, -16.2),
    (4.5695, -18.3),
    (4.7966, -18.9),
    (5.0066, -16.6),
    (5.3043, -19.9),
    (9.6586, -29.7),
];

const TDL_B: &[(f64, f64)] = &[
    (0.0000, 0.0),
    (0.1072, -2.2),
    (0.2155, -4.0),
    (0.2095, -3.2),
    (0.2870, -9.8),
    (0.2986, -1.2),
    (0.3752, -3.4),
    (0.5055, -5.2),
    (0.3681, -7.6),
    (0.3697, -3.0),
    (0.5700, -8.9),
    (0.5283, -9.0),
    (1.1021, -4.8),
    (1.2756, -5.7),
    (1.5474, -7.5),
    (1.7842, -1.9),
    (2.0169, -7.6),
    (2.8294, -12.2),
    (3.0219, -9.8),
    (3.6187, -11.4),
    (4.1067, -14.9),
    (4.2790, -9.2),
    (4.7834, -11.3),
];

#[allow(clippy::approx_constant)]
const TDL_C: &[(f64, f64)] = &[
    (0.0000, -4.4),
    (0.2099, -1.2),
    (0.2219, -3.5),
    (0.2329, -5.2),
    (0.2176, -2.5),
    (0.6366, 0.0),
    (0.6448, -2.2),
    (0.6560, -3.9),
    (0.6584, -7.4),
    (0.7935, -7.1),
    (0.8213, -10.7),
    (0.9336, -11.1),
    (1.2285, -5.1),
    (1.3083, -6.8),
    (2.1704, -8.7),
    (2.7105, -13.2),
    (4.2589, -13.9),
    (4.6003, -13.9),
    (5.4902, -15.8),
    (5.6077, -17.1),
    (6.3065, -16.0),
    (6.6374, -15.7),
    (7.0427, -21.6),
    (8.6523, -22.8),
];

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl TdlProfile {
    pub const BUILTIN: [&'static str; 4] = ["tdl-a", "tdl-b", "tdl-c", "flat"];

    /// Validates, sorts by delay and normalizes the total power to one.
    pub fn new(name: impl Into<String>, mut taps: Vec<Tap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidProfile("empty tap list".into()));
        }
        if taps.iter().any(|t| {
            !t.delay_s.is_finite() || t.delay_s < 0.0 || !t.power.is_finite() || t.power < 0.0
        }) {
            return Err(Error::InvalidProfile(
                "tap delays and powers must be finite and nonnegative".into(),
            ));
        }
        taps.sort_by(|a, b| a.delay_s.total_cmp(&b.delay_s));
        if taps.windows(2).any(|w| w[1].delay_s <= w[0].delay_s) {
            return Err(Error::InvalidProfile("duplicate tap delays".into()));
        }
        let total: f64 = taps.iter().map(|t| t.power).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidProfile("total tap power is zero".into()));
        }
        for t in &mut taps {
            t.power /= total;
        }
        Ok(Self {
            name: name.into(),
            taps,
        })
    }

    fn from_table(name: &str, table: &[(f64, f64)], delay_spread_s: f64) -> Result<Self> {
        let taps = table
            .iter()
            .map(|&(d, p)| Tap {
                delay_s: d * delay_spread_s,
                power: db_to_linear(p),
            })
            .collect();
        Self::new(name, taps)
    }

    /// One of [`TdlProfile::BUILTIN`], scaled to `delay_spread_s`.
    pub fn builtin(name: &str, delay_spread_s: f64) -> Result<Self> {
        if !(delay_spread_s >= 0.0) || !delay_spread_s.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "bad delay spread {delay_spread_s}"
            )));
        }
        let key = name.trim().to_ascii_lowercase();
        match key.as_str() {
            "tdl-a" => Self::from_table(&key, TDL_A, delay_spread_s),
            "tdl-b" => Self::from_table(&key, TDL_B, delay_spread_s),
            "tdl-c" => Self::from_table(&key, TDL_C, delay_spread_s),
            "flat" => Self::new(
                key,
                vec![Tap {
                    delay_s: 0.0,
                    power: 1.0,
                }],
            ),
            _ => Err(Error::InvalidProfile(format!("unknown profile '{name}'"))),
        }
    }

    /// Parses a plain-text profile: one `delay_ns power_db` pair per line,
    /// `#` starts a comment.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut taps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [d, p] => d.parse::<f64>().ok().zip(p.parse::<f64>().ok()),
                _ => None,
            };
            let (delay_ns, power_db) = parsed.ok_or_else(|| {
                Error::InvalidProfile(format!("line {}: expected 'delay_ns power_db'", lineno + 1))
            })?;
            taps.push(Tap {
                delay_s: delay_ns * 1e-9,
                power: db_to_linear(power_db),
            });
        }
        Self::new(name, taps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into());
        Self::parse(name, &text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn mean_delay_s(&self) -> f64 {
        self.taps.iter().map(|t| t.power * t.delay_s).sum()
    }

    pub fn rms_delay_spread_s(&self) -> f64 {
        let mean = self.mean_delay_s();
        self.taps
            .iter()
            .map(|t| t.power * (t.delay_s - mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Frequency correlation between two subcarriers `delta` spacings apart.
    pub fn correlation(&self, delta: f64, subcarrier_spacing_hz: f64) -> C64 {
        self.taps
            .iter()
            .map(|t| C64::from_polar(t.power, -TAU * subcarrier_spacing_hz * delta * t.delay_s))
            .sum()
    }
}

/// Per-subcarrier channel frequency response of one MIMO link.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrGrid {
    rows: usize,
    cols: usize,
    slices: Vec<CMatrix>,
}

impl CfrGrid {
    pub fn zeros(subcarriers: usize, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            slices: vec![CMatrix::zeros(rows, cols); subcarriers],
        }
    }

    pub fn from_slices(slices: Vec<CMatrix>) -> Result<Self> {
        let (rows, cols) = slices
            .first()
            .map(|m| m.shape())
            .ok_or_else(|| Error::Dimension("grid needs at least one subcarrier".into()))?;
        if slices.iter().any(|m| m.shape() != (rows, cols)) {
            return Err(Error::Dimension(
                "inconsistent per-subcarrier shapes".into(),
            ));
        }
        Ok(Self { rows, cols, slices })
    }

    pub fn subcarriers(&self) -> usize {
        self.slices.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, w: usize) -> &CMatrix {
        &self.slices[w]
    }

    pub fn at_mut(&mut self, w: usize) -> &mut CMatrix {
        &mut self.slices[w]
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    pub fn get(&self, w: usize, r: usize, c: usize) -> C64 {
        self.slices[w][(r, c)]
    }

    /// Frequency response of the (r, c) subchannel across all subcarriers.
    pub fn subchannel(&self, r: usize, c: usize) -> Vec<C64> {
        self.slices.iter().map(|m| m[(r, c)]).collect()
    }

    pub fn column(&self, c: usize) -> CfrGrid {
        CfrGrid {
            rows: self.rows,
            cols: 1,
            slices: self
                .slices
                .iter()
                .map(|m| m.columns(c, 1).into_owned())
                .collect(),
        }
    }

    pub fn row(&self, r: usize) -> CfrGrid {
        CfrGrid {
            rows: 1,
            cols: self.cols,
            slices: self
                .slices
                .iter()
                .map(|m| m.rows(r, 1).into_owned())
                .collect(),
        }
    }

    /// Stacks single-row grids (e.g. one per DL UT) into one multi-row grid.
    pub fn stack_rows(parts: &[CfrGrid]) -> Result<CfrGrid> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("nothing to stack".into()))?;
        let (w, cols) = (first.subcarriers(), first.cols);
        if parts.iter().any(|p| p.subcarriers() != w || p.cols != cols) {
            return Err(Error::Dimension(
                "cannot stack grids of different shapes".into(),
            ));
        }
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let slices = (0..w)
            .map(|k| {
                let mut m = CMatrix::zeros(rows, cols);
                let mut r0 = 0;
                for p in parts {
                    m.rows_mut(r0, p.rows).copy_from(p.at(k));
                    r0 += p.rows;
                }
                m
            })
            .collect();
        Ok(CfrGrid { rows, cols, slices })
    }

    pub fn scaled(&self, amplitude: f64) -> CfrGrid {
        CfrGrid {
            rows: self.rows,
            cols: self.cols,
            slices: self.slices.iter().map(|m| m.scale(amplitude)).collect(),
        }
    }

    /// Per-subcarrier product `self[w] · rhs[w]`.
    pub fn times(&self, rhs: &[CMatrix]) -> Result<CfrGrid> {
        if rhs.len() != self.slices.len() || rhs.iter().any(|m| m.nrows() != self.cols) {
            return Err(Error::Dimension(
                "per-subcarrier product shape mismatch".into(),
            ));
        }
        let slices: Vec<CMatrix> = self.slices.iter().zip(rhs).map(|(a, b)| a * b).collect();
        let cols = rhs.first().map_or(0, |m| m.ncols());
        Ok(CfrGrid {
            rows: self.rows,
            cols,
            slices,
        })
    }

    /// Σ_w ‖H_w‖_F².
    pub fn energy(&self) -> f64 {
        self.slices.iter().map(linalg::frobenius_sqr).sum()
    }

    /// Average ‖H_w‖_F² over subcarriers.
    pub fn mean_frobenius_sqr(&self) -> f64 {
        self.energy() / self.slices.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.slices
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

/// Precomputed tap phasors for repeated realizations of one profile.
#[derive(Debug, Clone)]
pub struct ChannelSynth {
    subcarriers: usize,
    tap_std: Vec<f64>,
    // phasors[w * taps + l] = exp(-j 2π f_w τ_l)
    phasors: Vec<C64>,
}

impl ChannelSynth {
    pub fn new(profile: &TdlProfile, subcarriers: usize, subcarrier_spacing_hz: f64) -> Self {
        let taps = profile.taps();
        let mut phasors = Vec::with_capacity(subcarriers * taps.len());
        for w in 0..subcarriers {
            let f = w as f64 * subcarrier_spacing_hz;
            phasors.extend(
                taps.iter()
                    .map(|t| C64::from_polar(1.0, -TAU * f * t.delay_s)),
            );
        }
        Self {
            subcarriers,
            tap_std: taps.iter().map(|t| t.power.sqrt()).collect(),
            phasors,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// Draws one block-fading realization with average entry power `gain`.
    pub fn realize<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        gain: f64,
        rng: &mut R,
    ) -> CfrGrid {
        let n_taps = self.tap_std.len();
        let amp = gain.sqrt();
        let mut grid = CfrGrid::zeros(self.subcarriers, rows, cols);
        let mut h = vec![C64::new(0.0, 0.0); n_taps];
        for c in 0..cols {
            for r in 0..rows {
                for (hl, &s) in h.iter_mut().zip(&self.tap_std) {
                    *hl = linalg::complex_normal(rng, 1.0) * (s * amp);
                }
                for (w, row) in self.phasors.chunks_exact(n_taps).enumerate() {
                    let v: C64 = h.iter().zip(row).map(|(a, b)| a * b).sum();
                    grid.slices[w][(r, c)] = v;
                }
            }
        }
        grid
    }
}

/// Convenience wrapper: one seeded realization of `profile`.
pub fn realize_channel(
    profile: &TdlProfile,
    subcarriers: usize,
    rows: usize,
    cols: usize,
    gain: f64,
    subcarrier_spacing_hz: f64,
    seed: u64,
) -> Result<CfrGrid> {
    if subcarriers == 0 || rows == 0 || cols == 0 {
        return Err(Error::Dimension(
            "channel dimensions must be positive".into(),
        ));
    }
    let synth = ChannelSynth::new(profile, subcarriers, subcarrier_spacing_hz);
    Ok(synth.realize(rows, cols, gain, &mut seed::rng(seed)))
}

/// Frequency correlation R_g over a set of pilot subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqCorrelation {
    pub matrix: CMatrix,
    pub indices: Vec<usize>,
}

impl FreqCorrelation {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn scaled(&self, power: f64) -> CMatrix {
        self.matrix.scale(power)
    }

    /// Correlation of a precoded subchannel g_c = Σ_n H_c(n) v_c(n), where the
    /// fading H has this profile correlation and average power `gain`, and
    /// `precoder[i]` is the precoding vector v on pilot subcarrier i:
    /// R(i,j) = gain · R_prof(i,j) · Σ_n v_i(n) conj(v_j(n)).
    pub fn precoded(&self, precoder: &[CVector], gain: f64) -> Result<CMatrix> {
        let p = self.indices.len();
        if precoder.len() != p {
            return Err(Error::Dimension(format!(
                "{} precoder vectors for {p} pilots",
                precoder.len()
            )));
        }
        Ok(CMatrix::from_fn(p, p, |i, j| {
            self.matrix[(i, j)] * precoder[j].dotc(&precoder[i]) * gain
        }))
    }
}

/// Analytic R_g(i,j) = Σ_l P_l exp(-j 2π Δf (c_i - c_j) τ_l).
pub fn build_rg(
    profile: &TdlProfile,
    pilot_subcarriers: &[usize],
    subcarrier_spacing_hz: f64,
) -> Result<FreqCorrelation> {
    if pilot_subcarriers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Dimension(
            "pilot indices must be strictly increasing".into(),
        ));
    }
    let p = pilot_subcarriers.len();
    let matrix = CMatrix::from_fn(p, p, |i, j| {
        let delta = pilot_subcarriers[i] as f64 - pilot_subcarriers[j] as f64;
        profile.correlation(delta, subcarrier_spacing_hz)
    });
    Ok(FreqCorrelation {
        matrix,
        indices: pilot_subcarriers.to_vec(),
    })
}
