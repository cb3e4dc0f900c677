//! Line-oriented profile logs.
//!
//! ```text
//! # pipenav profile-log format_version=1.0
//! timestamp_s,azimuth_deg,max_range_m,n_bins,label_range_m,s_0,s_1,...
//! 0,0,2,1200,0.731,5.2,4.9,...
//! ```
//!
//! The `label_range_m` column is optional; when present an empty cell means
//! "unlabeled". Every row carries exactly `n_bins` samples after the fixed
//! columns. Numbers are written in shortest round-trip form.

use super::{check_format_version, CliError, FORMAT_VERSION};
use crate::sonar_dsp::IntensityProfile;

pub const PROFILE_LOG_MAGIC: &str = "# pipenav profile-log";

const FIXED: [&str; 4] = ["timestamp_s", "azimuth_deg", "max_range_m", "n_bins"];
const LABEL: &str = "label_range_m";

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub profile: IntensityProfile,
    pub label_range_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProfileLog {
    pub records: Vec<ProfileRecord>,
    pub malformed: Vec<MalformedRow>,
    /// True when the input had no version line at all (an empty file).
    pub empty_input: bool,
}

/// Version line written at the top of a file of the given kind.
pub fn version_line(kind: &str) -> String {
    format!("# pipenav {kind} format_version={FORMAT_VERSION}")
}

/// Extracts and checks the `format_version=` value from the first line.
pub(crate) fn parse_version_line(first: &str, kind: &str) -> Result<(), CliError> {
    let prefix = format!("# pipenav {kind} ");
    let rest = first.trim_end().strip_prefix(&prefix).ok_or_else(|| {
        CliError::Validation(format!("{kind}: first line must start with {prefix:?}"))
    })?;
    let version = rest
        .strip_prefix("format_version=")
        .ok_or_else(|| CliError::Validation(format!("{kind}: missing format_version")))?;
    check_format_version(version, kind)
}

pub fn read_profile_log(text: &str) -> Result<ProfileLog, CliError> {
    if text.trim().is_empty() {
        return Ok(ProfileLog {
            empty_input: true,
            ..ProfileLog::default()
        });
    }
    let first = text.lines().next().unwrap_or_default();
    parse_version_line(first, "profile-log")?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("profile-log header: {e}")))?
        .clone();
    if header.is_empty() {
        return Ok(ProfileLog::default());
    }
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < FIXED.len() || names[..FIXED.len()] != FIXED {
        return Err(CliError::Validation(format!(
            "profile-log header must start with {}",
            FIXED.join(",")
        )));
    }
    let has_label = names.get(FIXED.len()) == Some(&LABEL);
    let n_fixed = FIXED.len() + usize::from(has_label);

    let mut log = ProfileLog::default();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                log.malformed.push(MalformedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, has_label, n_fixed) {
            Ok(rec) => log.records.push(rec),
            Err(reason) => log.malformed.push(MalformedRow { line, reason }),
        }
    }
    Ok(log)
}

fn parse_row(row: &csv::StringRecord, has_label: bool, n_fixed: usize) -> Result<ProfileRecord, String> {
    if row.len() < n_fixed {
        return Err(format!("expected at least {n_fixed} fields, found {}", row.len()));
    }
    let num = |i: usize, name: &str| -> Result<f64, String> {
        row[i]
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("{name}: not a number: {:?}", &row[i]))
    };
    let timestamp = num(0, "timestamp_s")?;
    let azimuth = num(1, "azimuth_deg")?;
    let max_range = num(2, "max_range_m")?;
    let n_bins: usize = row[3]
        .trim()
        .parse()
        .map_err(|_| format!("n_bins: not a count: {:?}", &row[3]))?;
    let label = if has_label && !row[4].trim().is_empty() {
        Some(num(4, LABEL)?)
    } else {
        None
    };
    if row.len() - n_fixed != n_bins {
        return Err(format!("n_bins is {n_bins} but row has {} samples", row.len() - n_fixed));
    }
    let samples = (n_fixed..row.len())
        .map(|i| num(i, &format!("s_{}", i - n_fixed)))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = IntensityProfile::new(samples, azimuth, max_range, timestamp).map_err(|e| e.to_string())?;
    Ok(ProfileRecord {
        profile,
        label_range_m: label,
    })
}

/// Serializes records. `header_bins` sets how many `s_i` names the header
/// lists; it defaults to the first record's bin count.
pub fn write_profile_log(records: &[ProfileRecord], header_bins: Option<usize>) -> Vec<u8> {
    let mut out = version_line("profile-log").into_bytes();
    out.push(b'\n');
    let bins = header_bins
        .or_else(|| records.first().map(|r| r.profile.n_bins()))
        .unwrap_or(0);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.push(LABEL.into());
    header.extend((0..bins).map(|i| format!("s_{i}")));
    w.write_record(&header).expect("write to Vec");
    for r in records {
        let p = &r.profile;
        let mut fields = vec![
            p.timestamp_s.to_string(),
            p.azimuth_deg.to_string(),
            p.max_range_m.to_string(),
            p.n_bins().to_string(),
            r.label_range_m.map(|l| l.to_string()).unwrap_or_default(),
        ];
        fields.extend(p.samples.iter().map(f64::to_string));
        w.write_record(&fields).expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(samples: Vec<f64>, label: Option<f64>) -> ProfileRecord {
        ProfileRecord {
            profile: IntensityProfile::new(samples, 12.5, 2.0, 0.1).unwrap(),
            label_range_m: label,
        }
    }

    #[test]
    fn round_trip() {
        let records = vec![
            rec(vec![0.1, 1.0 / 3.0, 7.0, 1e-300], Some(0.731)),
            rec(vec![5.0, 6.0, 0.0, 2.5], None),
        ];
        let bytes = write_profile_log(&records, None);
        let log = read_profile_log(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert!(log.malformed.is_empty());
        assert_eq!(log.records, records);
    }

    #[test]
    fn empty_and_header_only() {
        let log = read_profile_log("").unwrap();
        assert!(log.empty_input && log.records.is_empty());
        let bytes = write_profile_log(&[], Some(3));
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 2);
        let log = read_profile_log(&text).unwrap();
        assert!(!log.empty_input && log.records.is_empty() && log.malformed.is_empty());
    }

    #[test]
    fn malformed_rows_are_reported_by_line() {
        let text = "# pipenav profile-log format_version=1.0\n\
                    timestamp_s,azimuth_deg,max_range_m,n_bins,label_range_m\n\
                    0,0,2,2,0.5,1,2\n\
                    0,0,2,3,0.5,1,2\n\
                    0,abc,2,2,,1,2\n\
                    0,0,2,2,,1,-4\n\
                    0,400,2,2,,1,2\n\
                    1,0,2,2,,3,4\n";
        let log = read_profile_log(text).unwrap();
        assert_eq!(log.records.len(), 2);
        let lines: Vec<u64> = log.malformed.iter().map(|m| m.line).collect();
        assert_eq!(lines, vec![4, 5, 6, 7]);
    }

    #[test]
    fn log_without_label_column() {
        let text = "# pipenav profile-log format_version=1.0\n\
                    timestamp_s,azimuth_deg,max_range_m,n_bins\n\
                    0,0,2,2,1,2\n";
        let log = read_profile_log(text).unwrap();
        assert_eq!(log.records[0].label_range_m, None);
        assert_eq!(log.records[0].profile.samples, vec![1.0, 2.0]);
    }

    #[test]
    fn version_gate() {
        let err = read_profile_log("# pipenav profile-log format_version=2.0\ntimestamp_s\n").unwrap_err();
        assert!(err.to_string().contains("unsupported"));
        assert!(read_profile_log("timestamp_s,azimuth_deg\n").is_err());
    }
}
