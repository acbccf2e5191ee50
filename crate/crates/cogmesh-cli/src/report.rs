//! CSV ingestion and table rendering over the library's per-cell
//! aggregation. Output depends only on the input rows, so re-running a
//! report never changes it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cogmesh::sim::{aggregate, CellSummary, RunRecord};

/// Read every row of the given metrics CSVs.
pub fn read_rows(paths: &[impl AsRef<Path>]) -> Result<Vec<RunRecord>> {
    let mut rows = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read metrics CSV {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("seed,") {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let row = RunRecord::from_csv_row(line)
                .with_context(|| format!("{}:{}: bad metrics row", path.display(), i + 1))?;
            rows.push(row);
        }
    }
    if rows.is_empty() {
        bail!("no metrics rows found in the given files");
    }
    Ok(rows)
}

/// Aggregate rows and order cells for presentation: one block per
/// (mode, attention config, length), mobility and density inside it.
pub fn summarize(rows: &[RunRecord]) -> Vec<CellSummary> {
    let mut cells = aggregate(rows);
    cells.sort_by(|a, b| {
        let ka = (&a.key.mode, &a.key.config_id, a.key.composition_length, &a.key.mobility, a.key.density);
        let kb = (&b.key.mode, &b.key.config_id, b.key.composition_length, &b.key.mobility, b.key.density);
        ka.cmp(&kb)
    });
    cells
}

fn efr_text(efr: Option<f64>) -> String {
    match efr {
        Some(v) => format!("{v:.6}"),
        None => "NA".to_owned(),
    }
}

/// Fixed-width table, one block per (mode, attention config, length).
pub fn render(cells: &[CellSummary]) -> String {
    let mut out = String::new();
    let mut block: Option<(&str, &str, u32)> = None;
    for cell in cells {
        let head =
            (cell.key.mode.as_str(), cell.key.config_id.as_str(), cell.key.composition_length);
        if block != Some(head) {
            if block.is_some() {
                out.push('\n');
            }
            writeln!(out, "mode={} config={} length={}", head.0, head.1, head.2).unwrap();
            writeln!(
                out,
                "{:<10} {:>8} {:>6} {:>10} {:>10} {:>10} {:>12}",
                "mobility", "density", "runs", "pfr", "efr", "ct_s", "mu_bytes"
            )
            .unwrap();
            block = Some(head);
        }
        writeln!(
            out,
            "{:<10} {:>8} {:>6} {:>10.6} {:>10} {:>10.6} {:>12.2}",
            cell.key.mobility,
            cell.key.density,
            cell.runs,
            cell.mean_pfr,
            efr_text(cell.mean_efr),
            cell.mean_ct_s,
            cell.mean_mu_bytes
        )
        .unwrap();
    }
    out
}

/// The same aggregate as CSV, for downstream plotting.
pub fn to_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from("mode,config_id,cl,mobility,density,runs,pfr,efr,ct_s,mu_bytes\n");
    for cell in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{},{:.6},{:.2}",
            cell.key.mode,
            cell.key.config_id,
            cell.key.composition_length,
            cell.key.mobility,
            cell.key.density,
            cell.runs,
            cell.mean_pfr,
            efr_text(cell.mean_efr),
            cell.mean_ct_s,
            cell.mean_mu_bytes
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, density: u32, cl: u32, pfr: f64, efr: Option<f64>) -> RunRecord {
        RunRecord {
            seed,
            mode: "flexibility".into(),
            mobility: "slow".into(),
            density,
            composition_length: cl,
            config_id: "C1".into(),
            pfr,
            efr,
            ct_s: 8.0,
            mu_bytes: 1024.0,
            cycles: 500,
        }
    }

    #[test]
    fn summaries_group_blocks_by_length_before_mobility() {
        let rows = vec![
            row(0, 20, 10, 0.5, None),
            row(0, 20, 5, 0.1, Some(0.25)),
            row(1, 20, 5, 0.3, None),
        ];
        let cells = summarize(&rows);
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].key.composition_length, 5);
        assert_eq!(cells[0].runs, 2);
        assert!((cells[0].mean_pfr - 0.2).abs() < 1e-12);
        // The NA row does not drag the mean down; it is simply absent.
        assert_eq!(cells[0].mean_efr, Some(0.25));
    }

    #[test]
    fn rendering_is_deterministic() {
        let rows = vec![row(0, 40, 5, 0.25, Some(0.5)), row(0, 20, 5, 0.75, None)];
        assert_eq!(render(&summarize(&rows)), render(&summarize(&rows)));
        assert!(to_csv(&summarize(&rows)).contains("flexibility,C1,5,slow,20,1,0.750000,NA"));
    }
}
