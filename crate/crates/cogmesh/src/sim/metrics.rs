//! Per-run metrics and their CSV form. Formatting is fixed-width
//! decimal so identical runs serialize to identical bytes.

use std::fmt::Write as _;

use thiserror::Error;

/// One simulation run's measurements: planning failure rate, execution
/// failure rate (None when no plan succeeded), mean composition time
/// over completed requests, average provider peak memory, and the
/// total cognitive cycles spent.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub mode: String,
    pub mobility: String,
    pub density: u32,
    pub composition_length: u32,
    pub config_id: String,
    pub pfr: f64,
    pub efr: Option<f64>,
    pub ct_s: f64,
    pub mu_bytes: f64,
    pub cycles: u64,
}

pub fn csv_header() -> &'static str {
    "seed,mode,mobility,density,cl,config_id,pfr,efr,ct_s,mu_bytes,cycles"
}

impl RunRecord {
    pub fn to_csv_row(&self) -> String {
        let mut row = String::new();
        let efr = match self.efr {
            Some(v) => format!("{v:.6}"),
            None => "NA".to_owned(),
        };
        write!(
            row,
            "{},{},{},{},{},{},{:.6},{},{:.6},{:.2},{}",
            self.seed,
            self.mode,
            self.mobility,
            self.density,
            self.composition_length,
            self.config_id,
            self.pfr,
            efr,
            self.ct_s,
            self.mu_bytes,
            self.cycles
        )
        .expect("writing to String cannot fail");
        row
    }

    pub fn from_csv_row(row: &str) -> Result<Self, MetricsError> {
        let fields: Vec<&str> = row.trim_end().split(',').collect();
        if fields.len() != 11 {
            return Err(MetricsError::FieldCount { got: fields.len() });
        }
        let parse_f = |s: &str, name: &'static str| {
            s.parse::<f64>().map_err(|_| MetricsError::BadField { name, value: s.to_owned() })
        };
        let parse_u = |s: &str, name: &'static str| {
            s.parse::<u64>().map_err(|_| MetricsError::BadField { name, value: s.to_owned() })
        };
        Ok(Self {
            seed: parse_u(fields[0], "seed")?,
            mode: fields[1].to_owned(),
            mobility: fields[2].to_owned(),
            density: parse_u(fields[3], "density")? as u32,
            composition_length: parse_u(fields[4], "cl")? as u32,
            config_id: fields[5].to_owned(),
            pfr: parse_f(fields[6], "pfr")?,
            efr: match fields[7] {
                "NA" => None,
                other => Some(parse_f(other, "efr")?),
            },
            ct_s: parse_f(fields[8], "ct_s")?,
            mu_bytes: parse_f(fields[9], "mu_bytes")?,
            cycles: parse_u(fields[10], "cycles")?,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("expected 11 CSV fields, got {got}")]
    FieldCount { got: usize },
    #[error("unparseable {name} field `{value}`")]
    BadField { name: &'static str, value: String },
}

/// Grouping key for aggregate tables: one experiment cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub mode: String,
    pub config_id: String,
    pub mobility: String,
    pub density: u32,
    pub composition_length: u32,
}

/// Mean metrics over every run that landed in one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    pub runs: usize,
    pub mean_pfr: f64,
    /// Mean over runs that had at least one successful plan.
    pub mean_efr: Option<f64>,
    pub mean_ct_s: f64,
    pub mean_mu_bytes: f64,
}

/// Collapse run rows into per-cell means, sorted by key.
pub fn aggregate(rows: &[RunRecord]) -> Vec<CellSummary> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for row in rows {
        let key = CellKey {
            mode: row.mode.clone(),
            config_id: row.config_id.clone(),
            mobility: row.mobility.clone(),
            density: row.density,
            composition_length: row.composition_length,
        };
        cells.entry(key).or_default().push(row);
    }
    cells
        .into_iter()
        .map(|(key, rows)| {
            let n = rows.len() as f64;
            let efrs: Vec<f64> = rows.iter().filter_map(|r| r.efr).collect();
            CellSummary {
                key,
                runs: rows.len(),
                mean_pfr: rows.iter().map(|r| r.pfr).sum::<f64>() / n,
                mean_efr: if efrs.is_empty() {
                    None
                } else {
                    Some(efrs.iter().sum::<f64>() / efrs.len() as f64)
                },
                mean_ct_s: rows.iter().map(|r| r.ct_s).sum::<f64>() / n,
                mean_mu_bytes: rows.iter().map(|r| r.mu_bytes).sum::<f64>() / n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, pfr: f64, efr: Option<f64>) -> RunRecord {
        RunRecord {
            seed,
            mode: "flexibility".into(),
            mobility: "slow".into(),
            density: 20,
            composition_length: 5,
            config_id: "C1".into(),
            pfr,
            efr,
            ct_s: 1.25,
            mu_bytes: 412.5,
            cycles: 90,
        }
    }

    #[test]
    fn rows_round_trip() {
        let r = record(7, 0.125, Some(0.5));
        assert_eq!(RunRecord::from_csv_row(&r.to_csv_row()).unwrap(), r);
        let no_plans = record(8, 1.0, None);
        let row = no_plans.to_csv_row();
        assert!(row.contains(",NA,"));
        assert_eq!(RunRecord::from_csv_row(&row).unwrap(), no_plans);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert_eq!(
            RunRecord::from_csv_row("1,2,3").unwrap_err(),
            MetricsError::FieldCount { got: 3 }
        );
        let mut row = record(1, 0.0, None).to_csv_row();
        row = row.replace("0.000000", "zero");
        assert!(matches!(
            RunRecord::from_csv_row(&row).unwrap_err(),
            MetricsError::BadField { name: "pfr", .. }
        ));
    }

    #[test]
    fn identical_records_serialize_identically() {
        assert_eq!(record(3, 0.25, Some(0.1)).to_csv_row(), record(3, 0.25, Some(0.1)).to_csv_row());
    }

    #[test]
    fn aggregate_means_skip_missing_efr() {
        let rows =
            vec![record(1, 0.2, Some(0.4)), record(2, 0.4, None), record(3, 0.0, Some(0.2))];
        let cells = aggregate(&rows);
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        assert_eq!(cell.runs, 3);
        assert!((cell.mean_pfr - 0.2).abs() < 1e-12);
        assert!((cell.mean_efr.unwrap() - 0.3).abs() < 1e-12);
    }
}
