//! Time-averaged rent histograms and the statistics derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::market::MarketState;

/// Which flats a density refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatClass {
    All,
    Occupied,
    Vacant,
}

/// Snapshot counts over the rent lattice, split by occupancy.
///
/// Counts are stored densely by lattice index. Merging is element-wise
/// addition, so histograms from disjoint windows or independent runs
/// combine into the histogram of the union.
#[derive(Debug, Clone, PartialEq)]
pub struct RentHistogram {
    occupied: Vec<u64>,
    vacant: Vec<u64>,
    samples: u64,
    lattice_resolution: f64,
}

impl RentHistogram {
    pub fn new(lattice_resolution: f64) -> Self {
        RentHistogram {
            occupied: Vec::new(),
            vacant: Vec::new(),
            samples: 0,
            lattice_resolution,
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn lattice_resolution(&self) -> f64 {
        self.lattice_resolution
    }

    pub fn count_occupied(&self, n: u32) -> u64 {
        self.occupied.get(n as usize).copied().unwrap_or(0)
    }

    pub fn count_vacant(&self, n: u32) -> u64 {
        self.vacant.get(n as usize).copied().unwrap_or(0)
    }

    pub fn count(&self, n: u32, class: FlatClass) -> u64 {
        match class {
            FlatClass::All => self.count_occupied(n) + self.count_vacant(n),
            FlatClass::Occupied => self.count_occupied(n),
            FlatClass::Vacant => self.count_vacant(n),
        }
    }

    pub fn total(&self, class: FlatClass) -> u64 {
        match class {
            FlatClass::All => self.total(FlatClass::Occupied) + self.total(FlatClass::Vacant),
            FlatClass::Occupied => self.occupied.iter().sum(),
            FlatClass::Vacant => self.vacant.iter().sum(),
        }
    }

    fn bump(counts: &mut Vec<u64>, n: u32, by: u64) {
        let n = n as usize;
        if counts.len() <= n {
            counts.resize(n + 1, 0);
        }
        counts[n] += by;
    }

    /// Adds one raw observation.
    pub fn record(&mut self, n: u32, occupied: bool, by: u64) {
        if occupied {
            Self::bump(&mut self.occupied, n, by);
        } else {
            Self::bump(&mut self.vacant, n, by);
        }
    }

    /// Adds one snapshot of every flat.
    pub fn accumulate(&mut self, state: &MarketState) {
        for f in state.flats() {
            self.record(f.rent_index, f.occupied, 1);
        }
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &RentHistogram) -> Result<(), StatsError> {
        if self.lattice_resolution != other.lattice_resolution {
            return Err(StatsError::LatticeMismatch(
                self.lattice_resolution,
                other.lattice_resolution,
            ));
        }
        for (n, &c) in other.occupied.iter().enumerate() {
            if c > 0 {
                Self::bump(&mut self.occupied, n as u32, c);
            }
        }
        for (n, &c) in other.vacant.iter().enumerate() {
            if c > 0 {
                Self::bump(&mut self.vacant, n as u32, c);
            }
        }
        self.samples += other.samples;
        Ok(())
    }

    /// Lattice indices with at least one count in `class`, ascending.
    pub fn populated(&self, class: FlatClass) -> Vec<u32> {
        let len = self.occupied.len().max(self.vacant.len());
        (0..len as u32)
            .filter(|&n| self.count(n, class) > 0)
            .collect()
    }

    /// Normalized density of log-rent on every bin populated by any flat.
    /// Each class is normalized to integrate to one on its own.
    pub fn density_log(&self, class: FlatClass) -> Result<Vec<(f64, f64)>, StatsError> {
        if self.samples == 0 || self.total(FlatClass::All) == 0 {
            return Err(StatsError::EmptyHistogram);
        }
        let total = self.total(class) as f64;
        let a = self.lattice_resolution;
        Ok(self
            .populated(FlatClass::All)
            .into_iter()
            .map(|n| {
                let c = self.count(n, class) as f64;
                let phi = if total > 0.0 { c / (total * a) } else { 0.0 };
                (n as f64 * a, phi)
            })
            .collect())
    }

    /// Fraction of observations at each populated log-rent that were occupied.
    pub fn occupation_rate(&self) -> Vec<(f64, f64)> {
        self.populated(FlatClass::All)
            .into_iter()
            .map(|n| {
                let occ = self.count_occupied(n) as f64;
                let all = self.count(n, FlatClass::All) as f64;
                (n as f64 * self.lattice_resolution, occ / all)
            })
            .collect()
    }

    fn weighted(&self, class: FlatClass) -> Vec<(f64, f64)> {
        self.populated(class)
            .into_iter()
            .map(|n| {
                (
                    n as f64 * self.lattice_resolution,
                    self.count(n, class) as f64,
                )
            })
            .collect()
    }

    pub fn moments_log(&self) -> Result<Moments, StatsError> {
        self.moments_log_of(FlatClass::All)
    }

    pub fn moments_log_of(&self, class: FlatClass) -> Result<Moments, StatsError> {
        Moments::from_weighted(&self.weighted(class))
    }

    /// Normal fit on `x = log10 p` by sample moments, scored by the
    /// Kolmogorov-Smirnov distance. Each lattice value is treated as the
    /// bin `[x - a/2, x + a/2]`.
    pub fn fit_gaussian(&self) -> Result<FitResult, StatsError> {
        let bins = self.weighted(FlatClass::All);
        if bins.len() < 3 {
            return Err(StatsError::TooFewBins {
                found: bins.len(),
                required: 3,
            });
        }
        let m = Moments::from_weighted(&bins)?;
        let total: f64 = bins.iter().map(|b| b.1).sum();
        let half = 0.5 * self.lattice_resolution;
        let mut cum = 0.0;
        let mut ks: f64 = 0.0;
        for &(x, w) in &bins {
            let lo = normal_cdf(x - half, m.mean, m.std);
            ks = ks.max((cum / total - lo).abs());
            cum += w;
            let hi = normal_cdf(x + half, m.mean, m.std);
            ks = ks.max((cum / total - hi).abs());
        }
        Ok(FitResult {
            mean: m.mean,
            std: m.std,
            goodness: ks,
            sample_size: total as u64,
        })
    }

    pub fn fit_lognormal(&self) -> Result<LognormalFit, StatsError> {
        self.fit_gaussian().map(LognormalFit::from_log_fit)
    }
}

/// Weighted moments of log-rent. Skewness and kurtosis are `None` for a
/// point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

impl Moments {
    pub fn from_weighted(bins: &[(f64, f64)]) -> Result<Moments, StatsError> {
        let total: f64 = bins.iter().map(|b| b.1).sum();
        if bins.is_empty() || total <= 0.0 {
            return Err(StatsError::EmptyHistogram);
        }
        let mean = bins.iter().map(|&(x, w)| x * w).sum::<f64>() / total;
        let central = |k: i32| {
            bins.iter()
                .map(|&(x, w)| (x - mean).powi(k) * w)
                .sum::<f64>()
                / total
        };
        let var = central(2);
        let std = var.sqrt();
        let populated = bins.iter().filter(|b| b.1 > 0.0).count();
        if populated < 2 || var <= 0.0 {
            return Ok(Moments {
                mean,
                std: 0.0,
                skewness: None,
                excess_kurtosis: None,
            });
        }
        Ok(Moments {
            mean,
            std,
            skewness: Some(central(3) / var.powf(1.5)),
            excess_kurtosis: Some(central(4) / (var * var) - 3.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Mean of log10 rent.
    pub mean: f64,
    /// Standard deviation of log10 rent.
    pub std: f64,
    /// Kolmogorov-Smirnov distance to the fitted normal.
    pub goodness: f64,
    pub sample_size: u64,
}

/// The Gaussian fit on log-rent restated in rent space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub median: f64,
    pub multiplicative_std: f64,
    pub log_fit: FitResult,
}

impl LognormalFit {
    pub fn from_log_fit(log_fit: FitResult) -> Self {
        LognormalFit {
            median: 10f64.powf(log_fit.mean),
            multiplicative_std: 10f64.powf(log_fit.std),
            log_fit,
        }
    }

    /// Lognormal density of rent `p`.
    pub fn density(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let s = self.log_fit.std;
        let z = (p.log10() - self.log_fit.mean) / s;
        (-0.5 * z * z).exp()
            / (p * std::f64::consts::LN_10 * s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

pub fn normal_cdf(x: f64, mean: f64, std: f64) -> f64 {
    if std <= 0.0 {
        return if x < mean { 0.0 } else { 1.0 };
    }
    0.5 * libm::erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
}

/// Finds the sweep after which the series has settled.
///
/// The series is cut into consecutive windows of 10% of its length. The
/// burn-in ends at the first window from which every following window mean
/// differs from its predecessor by less than 1% of the predecessor.
pub fn detect_burn_in(series: &[(u64, f64)]) -> Result<u64, StatsError> {
    const MIN_LEN: usize = 20;
    if series.len() < MIN_LEN {
        return Err(StatsError::SeriesTooShort {
            found: series.len(),
            required: MIN_LEN,
        });
    }
    let width = series.len() / 10;
    let means: Vec<f64> = series
        .chunks_exact(width)
        .map(|w| w.iter().map(|p| p.1).sum::<f64>() / width as f64)
        .collect();
    let settled: Vec<bool> = means
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() < 0.01 * w[0].abs())
        .collect();
    // the last window pair that fails bounds the burn-in from below
    let start = match settled.iter().rposition(|ok| !ok) {
        None => 0,
        Some(k) if k + 1 < settled.len() => k + 1,
        Some(_) => {
            return Err(StatsError::EquilibriumNotReached {
                sweeps: series.last().map(|p| p.0).unwrap_or(0),
            })
        }
    };
    Ok(series[start * width].0)
}

/// Bins below this fraction of the peak density are left out of the
/// occupation-rate trend: their rate rests on a handful of observations.
pub const TREND_MIN_RELATIVE_DENSITY: f64 = 0.01;

/// Spearman correlation of the occupation rate against log-rent over bins
/// whose total density is at least `min_relative_density` times the peak.
/// `None` when fewer than three bins qualify.
pub fn occupation_trend(hist: &RentHistogram, min_relative_density: f64) -> Option<f64> {
    let phi = hist.density_log(FlatClass::All).ok()?;
    let peak = phi.iter().map(|p| p.1).fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = phi
        .iter()
        .zip(hist.occupation_rate())
        .filter(|(p, _)| p.1 >= min_relative_density * peak)
        .map(|(_, e)| e)
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    Some(spearman(&xs, &ys)).filter(|r| r.is_finite())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    pearson(&rx, &ry)
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// One row of the equilibrium histogram export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRow {
    pub x: f64,
    pub phi_all: f64,
    pub phi_occupied: f64,
    pub phi_vacant: f64,
    pub eta: f64,
}

pub const HISTOGRAM_HEADER: &str = "x,phi_all,phi_occupied,phi_vacant,eta";
pub const TIMESERIES_HEADER: &str = "sweep,mean_x,mean_p,sigma_x";

/// Nine significant digits.
pub(crate) fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Values as they read back after printing: x to 6 decimals, the rest to
/// 9 significant digits.
pub fn histogram_rows(hist: &RentHistogram) -> Result<Vec<HistogramRow>, StatsError> {
    let all = hist.density_log(FlatClass::All)?;
    let occ = hist.density_log(FlatClass::Occupied)?;
    let vac = hist.density_log(FlatClass::Vacant)?;
    let eta = hist.occupation_rate();
    let round = |v: f64| sig9(v).parse::<f64>().unwrap();
    Ok(all
        .iter()
        .zip(&occ)
        .zip(&vac)
        .zip(&eta)
        .map(|(((a, o), v), e)| HistogramRow {
            x: format!("{:.6}", a.0).parse().unwrap(),
            phi_all: round(a.1),
            phi_occupied: round(o.1),
            phi_vacant: round(v.1),
            eta: round(e.1),
        })
        .collect())
}

pub fn write_histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from(HISTOGRAM_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.6},{},{},{},{}",
            r.x,
            sig9(r.phi_all),
            sig9(r.phi_occupied),
            sig9(r.phi_vacant),
            sig9(r.eta)
        );
    }
    out
}

fn parse_rows<const N: usize>(text: &str, header: &str) -> Result<Vec<[f64; N]>, StatsError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        _ => {
            return Err(StatsError::Csv {
                line: 1,
                reason: format!("expected header `{header}`"),
            })
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != N {
                return Err(StatsError::Csv {
                    line: i + 2,
                    reason: format!("expected {N} fields, got {}", fields.len()),
                });
            }
            let mut row = [0.0; N];
            for (slot, f) in row.iter_mut().zip(fields) {
                *slot = f.parse().map_err(|_| StatsError::Csv {
                    line: i + 2,
                    reason: format!("bad number `{f}`"),
                })?;
            }
            Ok(row)
        })
        .collect()
}

pub fn parse_histogram_csv(text: &str) -> Result<Vec<HistogramRow>, StatsError> {
    Ok(parse_rows::<5>(text, HISTOGRAM_HEADER)?
        .into_iter()
        .map(|r| HistogramRow {
            x: r[0],
            phi_all: r[1],
            phi_occupied: r[2],
            phi_vacant: r[3],
            eta: r[4],
        })
        .collect())
}

/// Per-sweep summary of the instantaneous rent distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub sweep: u64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub sigma_x: f64,
}

impl TimePoint {
    pub fn from_state(sweep: u64, state: &MarketState, lattice_resolution: f64) -> Self {
        let n = state.num_flats() as f64;
        let (mut sx, mut sxx, mut sp) = (0.0, 0.0, 0.0);
        for f in state.flats() {
            let x = f.rent_index as f64 * lattice_resolution;
            sx += x;
            sxx += x * x;
            sp += 10f64.powf(x);
        }
        let mean_x = sx / n;
        TimePoint {
            sweep,
            mean_x,
            mean_p: sp / n,
            sigma_x: (sxx / n - mean_x * mean_x).max(0.0).sqrt(),
        }
    }

    /// The point as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        let round = |v: f64| sig9(v).parse::<f64>().unwrap();
        TimePoint {
            sweep: self.sweep,
            mean_x: round(self.mean_x),
            mean_p: round(self.mean_p),
            sigma_x: round(self.sigma_x),
        }
    }
}

pub fn write_timeseries_csv(points: &[TimePoint]) -> String {
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.sweep,
            sig9(p.mean_x),
            sig9(p.mean_p),
            sig9(p.sigma_x)
        );
    }
    out
}

pub fn parse_timeseries_csv(text: &str) -> Result<Vec<TimePoint>, StatsError> {
    Ok(parse_rows::<4>(text, TIMESERIES_HEADER)?
        .into_iter()
        .map(|r| TimePoint {
            sweep: r[0] as u64,
            mean_x: r[1],
            mean_p: r[2],
            sigma_x: r[3],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Flat, MarketState};

    fn hist_from(a: f64, bins: &[(u32, u64, u64)]) -> RentHistogram {
        let mut h = RentHistogram::new(a);
        for &(n, o, v) in bins {
            h.record(n, true, o);
            h.record(n, false, v);
        }
        h.samples = 1;
        h
    }

    #[test]
    fn snapshot_mass_and_doubling() {
        let s = MarketState::from_flats(vec![
            Flat {
                rent_index: 5,
                occupied: true,
            },
            Flat {
                rent_index: 5,
                occupied: false,
            },
            Flat {
                rent_index: 7,
                occupied: false,
            },
        ]);
        let mut h = RentHistogram::new(0.001);
        h.accumulate(&s);
        assert_eq!(h.total(FlatClass::All), 3);
        let once = h.clone();
        h.accumulate(&s);
        for n in 0..10 {
            assert_eq!(h.count_occupied(n), 2 * once.count_occupied(n));
            assert_eq!(h.count_vacant(n), 2 * once.count_vacant(n));
        }
    }

    #[test]
    fn dirac_density_is_one_over_a() {
        let h = hist_from(0.001, &[(2000, 7, 3)]);
        let phi = h.density_log(FlatClass::All).unwrap();
        assert_eq!(phi.len(), 1);
        assert!((phi[0].0 - 2.0).abs() < 1e-12);
        assert!((phi[0].1 - 1000.0).abs() < 1e-9);
        let m = h.moments_log().unwrap();
        assert!((m.mean - 2.0).abs() < 1e-12);
        assert_eq!(m.std, 0.0);
        assert!(m.skewness.is_none() && m.excess_kurtosis.is_none());
        assert!(matches!(
            h.fit_gaussian(),
            Err(StatsError::TooFewBins { .. })
        ));
    }

    #[test]
    fn empty_histogram_errors() {
        let h = RentHistogram::new(0.001);
        assert_eq!(
            h.density_log(FlatClass::All),
            Err(StatsError::EmptyHistogram)
        );
        assert!(h.moments_log().is_err());
    }

    #[test]
    fn two_point_moments() {
        let h = hist_from(0.1, &[(19, 1, 0), (21, 0, 1)]);
        let m = h.moments_log().unwrap();
        assert!((m.mean - 2.0).abs() < 1e-12);
        assert!((m.std - 0.1).abs() < 1e-12);
        assert!(m.skewness.unwrap().abs() < 1e-9);
    }

    #[test]
    fn occupation_ratio_and_boundary() {
        let h = hist_from(0.01, &[(10, 30, 10), (11, 0, 5)]);
        let eta = h.occupation_rate();
        assert_eq!(eta[0].1, 0.75);
        assert_eq!(eta[1].1, 0.0);
    }

    #[test]
    fn mixture_identity_in_counts() {
        let h = hist_from(0.01, &[(10, 30, 10), (11, 5, 5), (12, 0, 20), (13, 7, 0)]);
        let all = h.density_log(FlatClass::All).unwrap();
        let occ = h.density_log(FlatClass::Occupied).unwrap();
        let vac = h.density_log(FlatClass::Vacant).unwrap();
        let w = h.total(FlatClass::Occupied) as f64 / h.total(FlatClass::All) as f64;
        for i in 0..all.len() {
            let mix = w * occ[i].1 + (1.0 - w) * vac[i].1;
            assert!((all[i].1 - mix).abs() < 1e-9);
        }
        for d in [&all, &occ, &vac] {
            let integral: f64 = d.iter().map(|p| p.1 * 0.01).sum();
            assert!((integral - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn merge_rejects_mismatched_lattices() {
        let mut a = RentHistogram::new(0.001);
        let b = RentHistogram::new(0.002);
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn lognormal_restates_gaussian() {
        let h = hist_from(0.01, &[(180, 1, 2), (190, 5, 5), (200, 9, 1), (210, 3, 3)]);
        let g = h.fit_gaussian().unwrap();
        let l = h.fit_lognormal().unwrap();
        assert_eq!(l.log_fit, g);
        assert!((l.median - 10f64.powf(g.mean)).abs() < 1e-9);
        assert!((l.multiplicative_std - 10f64.powf(g.std)).abs() < 1e-12);
    }

    #[test]
    fn burn_in_constant_and_drift() {
        let flat: Vec<(u64, f64)> = (0..100).map(|k| (k, 1.9)).collect();
        assert_eq!(detect_burn_in(&flat), Ok(0));
        let drift: Vec<(u64, f64)> = (0..100).map(|k| (k, 1.0 + k as f64 / 100.0)).collect();
        assert!(matches!(
            detect_burn_in(&drift),
            Err(StatsError::EquilibriumNotReached { .. })
        ));
        assert!(matches!(
            detect_burn_in(&flat[..10]),
            Err(StatsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn burn_in_after_transient() {
        let series: Vec<(u64, f64)> = (0..200)
            .map(|k| (k, if k < 50 { 1.0 + k as f64 * 0.02 } else { 2.0 }))
            .collect();
        let b = detect_burn_in(&series).unwrap();
        assert!((40..=60).contains(&b), "{b}");
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header_and_errors() {
        assert!(parse_histogram_csv("bogus\n1,2,3,4,5\n").is_err());
        let bad = format!("{HISTOGRAM_HEADER}\n1,2,3\n");
        assert!(matches!(
            parse_histogram_csv(&bad),
            Err(StatsError::Csv { line: 2, .. })
        ));
    }
}
