//! CSV files and the human-readable run summary.

use std::fmt::Write as _;
use std::path::Path;

use super::config::SweepAxis;
use super::sink::MetricSink;
use crate::error::{Error, Result};
use crate::stats;

pub const CSV_FILES: [&str; 4] = [
    "nmse.csv",
    "nse_cdf.csv",
    "ber_vs_sinr.csv",
    "ber_vs_relnoise.csv",
];

fn io_err(path: &Path, e: csv::Error) -> Error {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes all four CSV files into `dir`. Files that do not apply to the
/// sweep axis (or to a run without detection) hold only the header.
pub fn emit_csv(sink: &MetricSink, axis: &SweepAxis, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let series = sink.series();
    let mut nmse = Vec::new();
    let mut cdf = Vec::new();
    let mut ber_sinr = Vec::new();
    let mut ber_rel = Vec::new();

    match axis {
        SweepAxis::RelativeNoise(_) => {
            for (i, x) in sink.sweep_values.iter().enumerate() {
                for s in &series {
                    let Some(m) = sink.get(i, *s) else { continue };
                    nmse.push(vec![
                        x.to_string(),
                        s.estimator_label(),
                        m.nmse().to_string(),
                    ]);
                    if m.bits() > 0 {
                        ber_rel.push(vec![
                            x.to_string(),
                            s.estimator_label(),
                            m.ber().to_string(),
                        ]);
                    }
                }
            }
        }
        SweepAxis::Sinr(_) => {
            for (i, x) in sink.sweep_values.iter().enumerate() {
                for s in &series {
                    let Some(m) = sink.get(i, *s) else { continue };
                    if m.bits() > 0 {
                        ber_sinr.push(vec![
                            x.to_string(),
                            s.estimator_label(),
                            s.source.label().into(),
                            m.ber().to_string(),
                        ]);
                    }
                }
            }
            // NSE does not depend on the SINR; the first point carries it.
            for s in &series {
                let Some(m) = sink.get(0, *s) else { continue };
                for (v, p) in stats::empirical_cdf(&m.nse) {
                    cdf.push(vec![
                        s.estimator_label(),
                        s.source.label().into(),
                        v.to_string(),
                        p.to_string(),
                    ]);
                }
            }
        }
    }

    write_csv(
        &dir.join(CSV_FILES[0]),
        &["rel_noise_db", "estimator", "nmse"],
        &nmse,
    )?;
    write_csv(
        &dir.join(CSV_FILES[1]),
        &["estimator", "strategy", "nse", "cdf"],
        &cdf,
    )?;
    write_csv(
        &dir.join(CSV_FILES[2]),
        &["sinr_db", "estimator", "strategy", "ber"],
        &ber_sinr,
    )?;
    write_csv(
        &dir.join(CSV_FILES[3]),
        &["rel_noise_db", "estimator", "ber"],
        &ber_rel,
    )?;
    Ok(())
}

/// Short plain-text digest of a finished run.
pub fn summary(sink: &MetricSink, axis: &SweepAxis) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "drops: {} ok, {} excluded, {} redraws; sweep: {} ({} points)",
        sink.drops,
        sink.failed_drops,
        sink.redraws,
        axis.name(),
        sink.sweep_values.len()
    );
    for (strategy, r) in &sink.relative_noise {
        let _ = writeln!(s, "measured forwarding noise, {strategy}: {:.2} dB", r.db());
    }
    for series in sink.series() {
        if let Some(m) = sink.get(0, series) {
            let median = stats::quantile(&m.nse, 0.5);
            let _ = write!(
                s,
                "{series}: nmse {:.4e}, median nse {:.4e}",
                m.nmse(),
                median
            );
            if m.bits() > 0 {
                let _ = write!(s, ", ber at first point {:.4e}", m.ber());
            }
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_experiment;
    use crate::harness::ScenarioConfig;

    fn read(dir: &Path, name: &str) -> String {
        std::fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn relnoise_run_writes_all_files() {
        let cfg = ScenarioConfig::parse(
            "drops = 2\nseed = 1\nworkers = 1\nsweep = relative_noise\nsweep_values = -inf, -5\nfixed_sinr_db = 5",
        )
        .unwrap();
        let sink = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_csv(&sink, &cfg.sweep, dir.path()).unwrap();
        let nmse = read(dir.path(), "nmse.csv");
        assert!(nmse.starts_with("rel_noise_db,estimator,nmse\n"));
        // 2 points × (2 perfect + 3 synthetic)
        assert_eq!(nmse.lines().count(), 11);
        assert!(nmse.contains("\n-inf,lmmse_perfect,"));
        assert_eq!(read(dir.path(), "ber_vs_relnoise.csv").lines().count(), 11);
        assert_eq!(
            read(dir.path(), "nse_cdf.csv"),
            "estimator,strategy,nse,cdf\n"
        );
        assert_eq!(
            read(dir.path(), "ber_vs_sinr.csv"),
            "sinr_db,estimator,strategy,ber\n"
        );
        assert!(summary(&sink, &cfg.sweep).contains("drops: 2 ok"));
    }
}
