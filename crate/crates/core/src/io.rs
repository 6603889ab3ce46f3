//! Data files, reports, and run manifests.
//!
//! Input CSV carries either `group,w,z` rows (two-sample mode, group `Y`
//! or `X`) or `w,z` rows (pooled mode for regression discontinuity
//! splits). Original row order is preserved through the `index` field,
//! which drives the deterministic distance tie-break.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::induced::ObservationPair;
use crate::runner::{OutcomeMetadata, TargetResult, TestConfig, TestOutcome};

/// Parsed contents of a data file.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedData {
    TwoSample {
        ysample: Vec<ObservationPair>,
        xsample: Vec<ObservationPair>,
    },
    Pooled { sample: Vec<ObservationPair> },
}

fn parse_field(record: &csv::StringRecord, col: usize, line: u64) -> Result<f64> {
    let raw = record.get(col).ok_or(Error::Parse {
        line,
        msg: "missing field".into(),
    })?;
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("'{raw}' is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {value}"),
        });
    }
    Ok(value)
}

/// Reads a data file. The header decides the mode: with a `group` column
/// the rows split into the Y and X samples, without one the file is a
/// pooled sample for later splitting at a cutoff.
pub fn parse_csv(path: &Path) -> Result<ParsedData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Option<usize> {
        headers.iter().position(|h| h.eq_ignore_ascii_case(name))
    };
    let w_col = find("w").ok_or(Error::Parse {
        line: 1,
        msg: "missing required column 'w'".into(),
    })?;
    let z_col = find("z").ok_or(Error::Parse {
        line: 1,
        msg: "missing required column 'z'".into(),
    })?;
    let group_col = find("group");

    let mut ysample = Vec::new();
    let mut xsample = Vec::new();
    let mut pooled = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(row_idx as u64 + 2);
        let w = parse_field(&record, w_col, line)?;
        let z = parse_field(&record, z_col, line)?;
        let obs = ObservationPair::new(w, z, row_idx);
        match group_col {
            Some(col) => {
                let group = record.get(col).unwrap_or("");
                match group.trim() {
                    g if g.eq_ignore_ascii_case("y") => ysample.push(obs),
                    g if g.eq_ignore_ascii_case("x") => xsample.push(obs),
                    g => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("group must be Y or X, got '{g}'"),
                        })
                    }
                }
            }
            None => pooled.push(obs),
        }
    }

    match group_col {
        Some(_) => {
            if ysample.is_empty() {
                return Err(Error::EmptyInput("no rows with group Y".into()));
            }
            if xsample.is_empty() {
                return Err(Error::EmptyInput("no rows with group X".into()));
            }
            Ok(ParsedData::TwoSample { ysample, xsample })
        }
        None => {
            if pooled.is_empty() {
                return Err(Error::EmptyInput("no data rows".into()));
            }
            Ok(ParsedData::Pooled { sample: pooled })
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes parsed data back out; numbers round-trip exactly.
pub fn write_samples_csv<W: std::io::Write>(out: W, data: &ParsedData) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match data {
        ParsedData::TwoSample { ysample, xsample } => {
            w.write_record(["group", "w", "z"])?;
            for o in ysample {
                w.write_record(["Y", &fmt_f64(o.w), &fmt_f64(o.z)])?;
            }
            for o in xsample {
                w.write_record(["X", &fmt_f64(o.w), &fmt_f64(o.z)])?;
            }
        }
        ParsedData::Pooled { sample } => {
            w.write_record(["w", "z"])?;
            for o in sample {
                w.write_record([&fmt_f64(o.w), &fmt_f64(o.z)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Machine-readable report of a test run. Contains no timestamps, so a
/// rerun with the same inputs and configuration is byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub schema_version: u32,
    pub config: TestConfig,
    pub per_target: Vec<TargetResult>,
    pub overall_reject: bool,
    pub warnings: Vec<String>,
    pub metadata: OutcomeMetadata,
}

impl TestReport {
    pub fn new(config: TestConfig, outcome: TestOutcome) -> Self {
        TestReport {
            schema_version: 1,
            config,
            per_target: outcome.per_target,
            overall_reject: outcome.overall_reject,
            warnings: outcome.warnings,
            metadata: outcome.metadata,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Everything needed to reproduce a run byte-for-byte: the exact command,
/// the resolved configuration, and a checksum of the input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub input_path: Option<String>,
    pub input_sha256: Option<String>,
    pub output_path: String,
    pub library_version: String,
    pub created_unix_ms: u64,
}

impl RunManifest {
    pub fn new(
        command: Vec<String>,
        config: serde_json::Value,
        input_path: Option<&Path>,
        output_path: &Path,
    ) -> Result<Self> {
        let input_sha256 = match input_path {
            Some(p) => Some(sha256_file(p)?),
            None => None,
        };
        Ok(RunManifest {
            schema_version: 1,
            command,
            config,
            input_path: input_path.map(|p| p.display().to_string()),
            input_sha256,
            output_path: output_path.display().to_string(),
            library_version: env!("CARGO_PKG_VERSION").into(),
            created_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        })
    }

    /// Writes the manifest next to the output file as
    /// `<output>.manifest.json`.
    pub fn write_alongside(&self, output_path: &Path) -> Result<()> {
        let mut path = output_path.as_os_str().to_owned();
        path.push(".manifest.json");
        let mut file = std::fs::File::create(std::path::PathBuf::from(path))?;
        file.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn parses_two_sample_file() {
        let f = write_temp("group,w,z\nY,1.0,0.5\nX,2.0,0.6\n");
        let ParsedData::TwoSample { ysample, xsample } = parse_csv(f.path()).unwrap()
        else {
            panic!("expected two-sample data");
        };
        assert_eq!(ysample.len(), 1);
        assert_eq!(xsample.len(), 1);
        assert_eq!(ysample[0].index, 0);
        assert_eq!(xsample[0].index, 1);
    }

    #[test]
    fn parses_pooled_file() {
        let f = write_temp("w,z\n1.0,-0.5\n2.0,0.5\n");
        let ParsedData::Pooled { sample } = parse_csv(f.path()).unwrap() else {
            panic!("expected pooled data");
        };
        assert_eq!(sample.len(), 2);
    }

    #[test]
    fn parse_error_names_line() {
        let f = write_temp("group,w,z\nY,1.0,0.5\nX,2.0,0.6\nY,1.0,0.7\nX,2.0,0.8\nY,1.0,0.9\nX,2.0,1.0\nY,oops,1.1\n");
        match parse_csv(f.path()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 8);
                assert!(msg.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_group_side_is_rejected() {
        let f = write_temp("group,w,z\nY,1.0,0.5\nY,2.0,0.6\n");
        assert!(matches!(parse_csv(f.path()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn bad_group_label_is_rejected() {
        let f = write_temp("group,w,z\nY,1.0,0.5\nQ,2.0,0.6\n");
        assert!(matches!(parse_csv(f.path()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn roundtrip_preserves_bits() {
        let vals = [
            0.1,
            -1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            1.23456789012345678e17,
        ];
        let ysample: Vec<ObservationPair> = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| ObservationPair::new(v, v / 7.0, i))
            .collect();
        let data = ParsedData::TwoSample {
            ysample: ysample.clone(),
            xsample: vec![ObservationPair::new(2.0, 3.0, 5)],
        };
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &data).unwrap();
        let f = write_temp(std::str::from_utf8(&buf).unwrap());
        let ParsedData::TwoSample { ysample: back, .. } = parse_csv(f.path()).unwrap()
        else {
            panic!()
        };
        for (orig, round) in ysample.iter().zip(&back) {
            assert_eq!(orig.w.to_bits(), round.w.to_bits());
            assert_eq!(orig.z.to_bits(), round.z.to_bits());
        }
    }

    #[test]
    fn sha256_is_stable() {
        let f = write_temp("abc");
        assert_eq!(
            sha256_file(f.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
