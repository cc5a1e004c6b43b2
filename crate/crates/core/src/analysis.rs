//! Post-processing of time series: boxcar binning, stroboscopic averages,
//! power-law fits and quasimomentum windowing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tdse::{SampleMode, TimeSeries};

/// Non-overlapping bins `[k w, (k + 1) w)` anchored at `t = 0`. Each
/// non-empty bin becomes one sample at the bin centre holding the mean of its
/// samples; a partial trailing bin is kept with its own count.
pub fn boxcar(series: &TimeSeries, bin_width: f64) -> Result<TimeSeries> {
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width}")));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("cannot bin an empty series".into()));
    }
    let mut bins: Vec<(i64, Vec<usize>)> = Vec::new();
    for (i, &t) in series.times.iter().enumerate() {
        let k = (t / bin_width).floor() as i64;
        match bins.last_mut() {
            Some((last, members)) if *last == k => members.push(i),
            _ => bins.push((k, vec![i])),
        }
    }
    if bins.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::invalid("series times must be increasing"));
    }

    let times = bins.iter().map(|(k, _)| (*k as f64 + 0.5) * bin_width).collect();
    let mut out = TimeSeries::new(times, SampleMode::Binned);
    for c in &series.channels {
        let values = bins
            .iter()
            .map(|(_, members)| members.iter().map(|&i| c.values[i]).sum::<f64>() / members.len() as f64)
            .collect();
        out.push_channel(c.name.clone(), values)?;
    }
    out.bin_counts = Some(bins.iter().map(|(_, m)| m.len()).collect());
    out.drive = series.drive;
    out.basis = series.basis;
    Ok(out)
}

/// Mean of a channel over stroboscopic samples after a burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAverage {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation.
    pub std_dev: f64,
    /// `std_dev / sqrt(samples)`, ignoring correlations between periods.
    pub std_error: f64,
    pub samples: usize,
}

pub const MIN_AVERAGE_SAMPLES: usize = 10;

/// Averages every channel of a stroboscopic series over periods
/// `nu >= burn_in_periods`.
pub fn stroboscopic_average(series: &TimeSeries, burn_in_periods: usize) -> Result<Vec<ChannelAverage>> {
    if series.mode != SampleMode::Stroboscopic {
        return Err(Error::invalid("stroboscopic average needs a stroboscopically sampled series"));
    }
    let n = series.len().saturating_sub(burn_in_periods);
    if n < MIN_AVERAGE_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{n} samples after a burn-in of {burn_in_periods} periods, need {MIN_AVERAGE_SAMPLES}"
        )));
    }
    Ok(series
        .channels
        .iter()
        .map(|c| {
            let tail = &c.values[burn_in_periods..];
            let mean = tail.iter().sum::<f64>() / n as f64;
            let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let std_dev = var.sqrt();
            ChannelAverage { name: c.name.clone(), mean, std_dev, std_error: std_dev / (n as f64).sqrt(), samples: n }
        })
        .collect())
}

/// `y = amplitude * t^exponent`, fitted by unweighted least squares in
/// log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub channel: String,
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    /// RMS residual of `ln y`.
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 5;

/// Fits the samples with `t_min <= t <= t_max`. The window must lie inside
/// the series' time range.
pub fn fit_power_law(series: &TimeSeries, channel: &str, window: (f64, f64)) -> Result<PowerLawFit> {
    let values = series
        .channel(channel)
        .ok_or_else(|| Error::invalid(format!("series has no channel '{channel}'")))?;
    let (t_min, t_max) = window;
    let (first, last) = match (series.times.first(), series.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InsufficientData("empty series".into())),
    };
    if !(t_min < t_max && t_min >= first && t_max <= last) {
        return Err(Error::invalid(format!("fit window {t_min}..{t_max} must lie inside the data range {first}..{last}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &y) in series.times.iter().zip(values) {
        if t < t_min || t > t_max {
            continue;
        }
        if !(t > 0.0 && y > 0.0) {
            return Err(Error::invalid(format!("power-law fit needs positive data, got ({t}, {y})")));
        }
        xs.push(t.ln());
        ys.push(y.ln());
    }
    let n = xs.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!("{n} samples in the fit window, need {MIN_FIT_SAMPLES}")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("fit window contains a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok(PowerLawFit {
        channel: channel.to_string(),
        exponent: slope,
        amplitude: intercept.exp(),
        window,
        residual,
        samples: n,
    })
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

fn interpolate(points: &[(f64, f64)], q: f64) -> f64 {
    let j = points.partition_point(|p| p.0 < q).clamp(1, points.len() - 1);
    let (a, b) = (points[j - 1], points[j]);
    a.1 + (q - a.0) / (b.0 - a.0) * (b.1 - a.1)
}

/// Fraction of the integral of a per-quasimomentum profile that lies in
/// `|q| <= window` (q in units of k_L, zone `[-1, 1]`; `window = 0.4` is the
/// central 40% of the zone). Trapezoid rule with linear interpolation at the
/// window edges. The profile must cover `[-window, window]`.
pub fn bz_window_fraction(profile: &[(f64, f64)], window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::invalid(format!("zone window must lie in (0, 1], got {window}")));
    }
    let mut points = profile.to_vec();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.len() < 2 || points.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InsufficientData("profile needs at least two distinct quasimomenta".into()));
    }
    let eps = 1e-12;
    if points[0].0 > -window + eps || points[points.len() - 1].0 < window - eps {
        return Err(Error::InsufficientData(format!(
            "profile covers {}..{}, window needs -{window}..{window}",
            points[0].0,
            points[points.len() - 1].0
        )));
    }
    let total = trapezoid(&points);
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::invalid("profile integral must be positive"));
    }
    let mut inside = vec![(-window, interpolate(&points, -window))];
    inside.extend(points.iter().copied().filter(|p| p.0.abs() < window));
    inside.push((window, interpolate(&points, window)));
    Ok(trapezoid(&inside) / total)
}
