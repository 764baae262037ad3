use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::study::{StudyResult, StudyRow};

pub const CSV_HEADER: &str = "lambda,tau,d_markov,i_norm,q_norm";

/// Rows in `(lambda, tau)` order, 17 significant digits per value.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::with_capacity(96 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.lambda, r.tau, r.d_markov, r.i_norm, r.q_norm
        );
    }
    out
}

pub fn read_study_csv(text: &str) -> Result<Vec<StudyRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config(format!("expected CSV header `{CSV_HEADER}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("row {}: {e}", k + 1)))?;
            if v.len() != 5 {
                return Err(Error::Config(format!("row {} has {} fields", k + 1, v.len())));
            }
            Ok(StudyRow { lambda: v[0], tau: v[1], d_markov: v[2], i_norm: v[3], q_norm: v[4] })
        })
        .collect()
}

/// Writes `study.csv` and `report.json` into `dir`, creating it if needed.
pub fn write_study_outputs(result: &StudyResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("study.csv");
    let json = dir.join("report.json");
    std::fs::write(&csv, study_csv(&result.rows))?;
    std::fs::write(&json, serde_json::to_string_pretty(result)?)?;
    Ok((csv, json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let rows = vec![
            StudyRow { lambda: 0.1, tau: 0.0, d_markov: 1.0 / 3.0, i_norm: 0.0, q_norm: 2f64.sqrt() },
            StudyRow { lambda: 0.4, tau: 2.0, d_markov: 1e-17, i_norm: 7.25, q_norm: 0.1 + 0.2 },
        ];
        let text = study_csv(&rows);
        assert!(text.starts_with("lambda,tau,d_markov,i_norm,q_norm\n"));
        assert_eq!(read_study_csv(&text).unwrap(), rows);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_study_csv("a,b\n1,2\n").is_err());
    }
}
