//! Trial CSV, summary JSON and run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wignerlab_core::verify::{TrialStat, Verdict};

use crate::run::Summary;

pub const CSV_HEADER: [&str; 10] = ["experiment", "N", "trial", "seed", "statistic", "value", "z1_re", "z1_im", "z2_re", "z2_im"];
pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trials_csv<W: Write>(out: W, stats: &[TrialStat]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in stats {
        let z = |p: Option<wignerlab_core::semicircle::SpectralPoint>| match p {
            Some(p) => [fmt_float(p.e()), fmt_float(p.eta())],
            None => [String::new(), String::new()],
        };
        let [z1r, z1i] = z(s.z1);
        let [z2r, z2i] = z(s.z2);
        w.write_record([
            s.experiment.clone(),
            s.n.to_string(),
            s.trial.to_string(),
            s.seed.to_string(),
            s.statistic.clone(),
            fmt_float(s.value),
            z1r,
            z1i,
            z2r,
            z2i,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        Ok(FileEntry {
            path: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(&data)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub seed: u64,
    pub workers: usize,
    pub verdicts: BTreeMap<String, Verdict>,
    pub files: Vec<FileEntry>,
}

pub struct Written {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_all(
    dir: &Path,
    summary: &Summary,
    stats: &[TrialStat],
    started: chrono::DateTime<chrono::Utc>,
    workers: usize,
) -> std::io::Result<Written> {
    std::fs::create_dir_all(dir)?;
    let trials = dir.join(TRIALS_FILE);
    let f = std::io::BufWriter::new(std::fs::File::create(&trials)?);
    write_trials_csv(f, stats).map_err(std::io::Error::other)?;
    let summary_path = dir.join(SUMMARY_FILE);
    std::fs::write(&summary_path, serde_json::to_string_pretty(summary).map_err(std::io::Error::other)? + "\n")?;
    let manifest = RunManifest {
        config_hash: summary.config_hash.clone(),
        tool_version: summary.tool_version.clone(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        seed: summary.seed,
        workers,
        verdicts: BTreeMap::from([(summary.experiment.name().to_string(), summary.verdict)]),
        files: vec![FileEntry::of(&trials)?, FileEntry::of(&summary_path)?],
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n")?;
    Ok(Written {
        trials,
        summary: summary_path,
        manifest: manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use wignerlab_core::semicircle::SpectralPoint;

    #[test]
    fn csv_layout_and_float_format() {
        let z = SpectralPoint::new(0.5, -0.25).unwrap();
        let stats = vec![
            TrialStat::new("local_law", 64, 3, 9, "trace_ratio", 0.1),
            TrialStat::new("derivation_check", 8, 0, 9, "cancellation[2,5]", 1.0 / 3.0).at(z, z),
        ];
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &stats).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,N,trial,seed,statistic,value,z1_re,z1_im,z2_re,z2_im");
        assert_eq!(lines[1], "local_law,64,3,9,trace_ratio,1.0000000000000001e-1,,,,");
        assert_eq!(
            lines[2],
            "derivation_check,8,0,9,\"cancellation[2,5]\",3.3333333333333331e-1,5.0000000000000000e-1,-2.5000000000000000e-1,5.0000000000000000e-1,-2.5000000000000000e-1"
        );
        let back: f64 = "3.3333333333333331e-1".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
