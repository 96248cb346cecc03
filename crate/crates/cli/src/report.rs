//! CSV rendering with pinned headers. Floats are written with Rust's
//! shortest-roundtrip formatting, so output is byte-stable for a given
//! configuration and parses back to the exact computed value.

use crate::runner::{EfficiencyTable, InfoRow};
use crate::CliError;

pub const EFFICIENCY_HEADER: &str = "density,estimator,n,reps,failures,mc_variance,efficiency";
pub const INFO_HEADER: &str = "density,eta,info_eta,ratio";
pub const DIAG_HEADER: &str = "t,h";

fn empty(what: &str) -> CliError {
    CliError::Internal(format!("refusing to write an empty {what} table"))
}

pub fn efficiency_csv(table: &EfficiencyTable) -> Result<String, CliError> {
    if table.rows.is_empty() {
        return Err(empty("efficiency"));
    }
    let mut out = String::from(EFFICIENCY_HEADER);
    out.push('\n');
    for row in &table.rows {
        let eff = match row.efficiency {
            Some(e) => e.to_string(),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.density, row.estimator, row.n, row.reps, row.failures, row.mc_variance, eff
        ));
    }
    Ok(out)
}

pub fn info_csv(rows: &[InfoRow]) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(empty("information-curve"));
    }
    let mut out = String::from(INFO_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.density, row.eta, row.info_eta, row.ratio
        ));
    }
    Ok(out)
}

pub fn diagnostics_csv(grid: &[(f64, f64)]) -> Result<String, CliError> {
    if grid.is_empty() {
        return Err(empty("diagnostics"));
    }
    let mut out = String::from(DIAG_HEADER);
    out.push('\n');
    for &(t, h) in grid {
        out.push_str(&format!("{t},{h}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::EfficiencyRow;

    #[test]
    fn efficiency_csv_pins_header_and_blanks_missing_efficiency() {
        let table = EfficiencyTable {
            rows: vec![
                EfficiencyRow {
                    density: "normal".into(),
                    estimator: "mean".into(),
                    n: 30,
                    reps: 10,
                    failures: 0,
                    mc_variance: 0.03125,
                    efficiency: Some(1.0),
                },
                EfficiencyRow {
                    density: "symbeta(1.5)".into(),
                    estimator: "mean".into(),
                    n: 30,
                    reps: 10,
                    failures: 2,
                    mc_variance: 0.5,
                    efficiency: None,
                },
            ],
        };
        let csv = efficiency_csv(&table).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], EFFICIENCY_HEADER);
        assert_eq!(lines[1], "normal,mean,30,10,0,0.03125,1");
        assert_eq!(lines[2], "symbeta(1.5),mean,30,10,2,0.5,");
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn empty_tables_are_rejected() {
        assert!(efficiency_csv(&EfficiencyTable { rows: vec![] }).is_err());
        assert!(info_csv(&[]).is_err());
        assert!(diagnostics_csv(&[]).is_err());
    }

    #[test]
    fn diagnostics_csv_is_two_columns() {
        let csv = diagnostics_csv(&[(0.0, 0.125), (1.0, 0.0)]).unwrap();
        assert_eq!(csv, "t,h\n0,0.125\n1,0\n");
    }
}
