//! Sweep and prediction tables and their CSV form.

use std::fmt::Write as _;

use crate::analytics::AnalyticalPrediction;
use crate::error::StatsError;
use crate::stats::sig9;

fn round9(v: f64) -> f64 {
    sig9(v).parse().unwrap()
}

pub const SWEEP_HEADER: &str =
    "parameter,value,mean_x,mean_x_se,sigma_x,sigma_x_se,mean_p,x_eq,sigma_analytic,p_eq";
pub const PREDICTIONS_HEADER: &str = "rho,p_eq,x_eq,n_o,n_v,sigma_x,warnings";

/// Simulated and analytic summary at one sweep value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub mean_x: f64,
    pub mean_x_se: f64,
    pub sigma_x: f64,
    pub sigma_x_se: f64,
    pub mean_p: f64,
    pub x_eq: f64,
    pub sigma_analytic: f64,
    pub p_eq: f64,
}

impl SweepRow {
    fn numbers(&self) -> [f64; 9] {
        [
            self.value,
            self.mean_x,
            self.mean_x_se,
            self.sigma_x,
            self.sigma_x_se,
            self.mean_p,
            self.x_eq,
            self.sigma_analytic,
            self.p_eq,
        ]
    }

    /// The row as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let n = self.numbers().map(round9);
        SweepRow {
            parameter: self.parameter.clone(),
            value: n[0],
            mean_x: n[1],
            mean_x_se: n[2],
            sigma_x: n[3],
            sigma_x_se: n[4],
            mean_p: n[5],
            x_eq: n[6],
            sigma_analytic: n[7],
            p_eq: n[8],
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let nums: Vec<String> = r.numbers().iter().map(|&v| sig9(v)).collect();
        let _ = writeln!(out, "{},{}", r.parameter, nums.join(","));
    }
    out
}

fn csv_err(line: usize, reason: impl Into<String>) -> StatsError {
    StatsError::Csv {
        line,
        reason: reason.into(),
    }
}

fn data_lines<'a>(
    text: &'a str,
    header: &str,
) -> Result<impl Iterator<Item = (usize, &'a str)>, StatsError> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(csv_err(1, format!("expected header `{header}`")));
    }
    Ok(lines
        .enumerate()
        .map(|(i, l)| (i + 2, l))
        .filter(|(_, l)| !l.is_empty()))
}

fn number(line: usize, field: &str) -> Result<f64, StatsError> {
    field
        .parse()
        .map_err(|_| csv_err(line, format!("bad number `{field}`")))
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, StatsError> {
    data_lines(text, SWEEP_HEADER)?
        .map(|(line, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(csv_err(
                    line,
                    format!("expected 10 fields, got {}", f.len()),
                ));
            }
            let n: Vec<f64> = f[1..]
                .iter()
                .map(|s| number(line, s))
                .collect::<Result<_, _>>()?;
            Ok(SweepRow {
                parameter: f[0].to_string(),
                value: n[0],
                mean_x: n[1],
                mean_x_se: n[2],
                sigma_x: n[3],
                sigma_x_se: n[4],
                mean_p: n[5],
                x_eq: n[6],
                sigma_analytic: n[7],
                p_eq: n[8],
            })
        })
        .collect()
}

/// One line of `predictions.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub rho: f64,
    pub p_eq: f64,
    pub x_eq: f64,
    pub n_o: f64,
    pub n_v: f64,
    pub sigma_x: f64,
    pub warnings: Vec<String>,
}

impl PredictionRow {
    pub fn new(rho: f64, pred: &AnalyticalPrediction) -> Self {
        PredictionRow {
            rho: round9(rho),
            p_eq: round9(pred.p_eq),
            x_eq: round9(pred.x_eq),
            n_o: round9(pred.n_o),
            n_v: round9(pred.n_v),
            sigma_x: round9(pred.sigma_x),
            warnings: pred
                .warnings
                .iter()
                .map(|w| w.label().to_string())
                .collect(),
        }
    }
}

pub fn write_predictions_csv(rows: &[PredictionRow]) -> String {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig9(r.rho),
            sig9(r.p_eq),
            sig9(r.x_eq),
            sig9(r.n_o),
            sig9(r.n_v),
            sig9(r.sigma_x),
            r.warnings.join(";")
        );
    }
    out
}

pub fn parse_predictions_csv(text: &str) -> Result<Vec<PredictionRow>, StatsError> {
    data_lines(text, PREDICTIONS_HEADER)?
        .map(|(line, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(csv_err(line, format!("expected 7 fields, got {}", f.len())));
            }
            let n: Vec<f64> = f[..6]
                .iter()
                .map(|s| number(line, s))
                .collect::<Result<_, _>>()?;
            Ok(PredictionRow {
                rho: n[0],
                p_eq: n[1],
                x_eq: n[2],
                n_o: n[3],
                n_v: n[4],
                sigma_x: n[5],
                warnings: f[6]
                    .split(';')
                    .filter(|w| !w.is_empty())
                    .map(str::to_string)
                    .collect(),
            })
        })
        .collect()
}
