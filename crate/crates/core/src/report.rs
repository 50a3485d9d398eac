//! CSV serialization with a fixed column order and 17 significant digits.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Formats a float with 17 significant digits, enough to round-trip.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One `(quantity, parameter, value, flag)` record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub quantity: String,
    pub parameter: f64,
    pub value: f64,
    pub flag: String,
}

impl ReportRow {
    pub fn new(quantity: impl Into<String>, parameter: f64, value: f64, flag: impl Into<String>) -> Self {
        Self { quantity: quantity.into(), parameter, value, flag: flag.into() }
    }
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "parameter", "value", "flag"])?;
    for r in rows {
        w.write_record([r.quantity.clone(), format_float(r.parameter), format_float(r.value), r.flag.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// One `(experiment, fixture, strategy, n, statistic, value, pass_flag)` record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub fixture: String,
    pub strategy: String,
    pub n: u64,
    pub statistic: String,
    pub value: f64,
    pub pass_flag: bool,
}

impl ExperimentRow {
    pub fn new(
        experiment: &str,
        fixture: &str,
        strategy: &str,
        n: u64,
        statistic: &str,
        value: f64,
        pass_flag: bool,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            fixture: fixture.into(),
            strategy: strategy.into(),
            n,
            statistic: statistic.into(),
            value,
            pass_flag,
        }
    }
}

pub fn write_experiment_csv<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment", "fixture", "strategy", "n", "statistic", "value", "pass_flag"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.fixture.clone(),
            r.strategy.clone(),
            r.n.to_string(),
            r.statistic.clone(),
            format_float(r.value),
            u8::from(r.pass_flag).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 7.0, 0.7 * 3.0] {
            assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn fixed_columns() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[ReportRow::new("v", 1.0, 0.5, "ok")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "quantity,parameter,value,flag\nv,1.0000000000000000e0,5.0000000000000000e-1,ok\n");
    }
}
