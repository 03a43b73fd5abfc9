//! Harmonic spectra from position trajectories.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dynamics::PulseSpec;
use crate::error::{Error, Result};

/// Central second difference; the two endpoints are set to zero.
pub fn dipole_acceleration(x: &[f64], dt: f64) -> Result<Vec<f64>> {
    if x.len() < 3 {
        return Err(Error::param(format!(
            "need at least 3 samples, got {}",
            x.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::param("sample spacing must be positive"));
    }
    let mut a = vec![0.0; x.len()];
    let inv = 1.0 / (dt * dt);
    for m in 1..x.len() - 1 {
        a[m] = (x[m - 1] - 2.0 * x[m] + x[m + 1]) * inv;
    }
    Ok(a)
}

/// `sin^2(pi j / (M - 1))`
pub fn hann(samples: usize) -> Vec<f64> {
    let last = (samples.max(2) - 1) as f64;
    (0..samples)
        .map(|j| {
            let s = (PI * j as f64 / last).sin();
            s * s
        })
        .collect()
}

/// Harmonic yield `|FFT[hann a]|^2` on non-negative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// `Omega / omega` per bin.
    pub harmonic_order: Vec<f64>,
    pub yield_: Vec<f64>,
    pub log10_yield: Vec<f64>,
    /// Provenance of the run, written as `# key=value` header lines.
    pub metadata: BTreeMap<String, String>,
}

/// Spectrum of acceleration samples spanning `[0, T]` of `pulse`.
///
/// Bin `m` sits at the FFT frequency `2 pi m / (M dt)` with
/// `dt = T / (M - 1)`, expressed in units of the carrier frequency.
pub fn harmonic_spectrum(a: &[f64], pulse: &PulseSpec) -> Result<SpectrumResult> {
    let m = a.len();
    if m < 3 {
        return Err(Error::param("need at least 3 samples"));
    }
    let window = hann(m);
    let mut buf: Vec<Complex64> = a
        .iter()
        .zip(&window)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(m)
        .process(&mut buf);
    let dt = pulse.duration() / (m - 1) as f64;
    let bins = m / 2 + 1;
    let harmonic_order: Vec<f64> = (0..bins)
        .map(|j| 2.0 * PI * j as f64 / (m as f64 * dt * pulse.omega))
        .collect();
    let yield_: Vec<f64> = buf[..bins].iter().map(|z| z.norm_sqr()).collect();
    let log10_yield = yield_.iter().map(|y| y.log10()).collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("omega".into(), format!("{}", pulse.omega));
    metadata.insert("E0".into(), format!("{}", pulse.e0));
    metadata.insert("n_cyc".into(), pulse.n_cyc.to_string());
    metadata.insert("samples".into(), m.to_string());
    Ok(SpectrumResult {
        harmonic_order,
        yield_,
        log10_yield,
        metadata,
    })
}

/// Trajectory to spectrum in one step.
pub fn spectrum_of_trajectory(x: &[f64], pulse: &PulseSpec) -> Result<SpectrumResult> {
    let dt = pulse.duration() / (x.len().max(2) - 1) as f64;
    harmonic_spectrum(&dipole_acceleration(x, dt)?, pulse)
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.harmonic_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.harmonic_order.is_empty()
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Mean of `log10 Y` over bins with `lo <= order <= hi`.
    pub fn mean_log10(&self, lo: f64, hi: f64) -> f64 {
        let vals: Vec<f64> = self
            .harmonic_order
            .iter()
            .zip(&self.log10_yield)
            .filter(|(o, _)| **o >= lo && **o <= hi)
            .map(|(_, l)| *l)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    /// `log10 Y` at the bin nearest to `order`.
    pub fn log10_at(&self, order: f64) -> f64 {
        self.log10_yield[self.nearest_bin(order)]
    }

    pub fn nearest_bin(&self, order: f64) -> usize {
        let step = self.harmonic_order.get(1).copied().unwrap_or(1.0);
        ((order / step).round() as usize).min(self.len() - 1)
    }

    /// Strict local maxima with `order <= max_order` whose yield exceeds
    /// `floor` times the largest yield in that range.
    pub fn local_maxima(&self, max_order: f64, floor: f64) -> Vec<usize> {
        let last = self
            .harmonic_order
            .iter()
            .rposition(|&o| o <= max_order)
            .unwrap_or(0);
        let peak = self.yield_[..=last].iter().fold(0.0f64, |m, &y| m.max(y));
        (1..last.min(self.len() - 2) + 1)
            .filter(|&i| {
                let y = self.yield_[i];
                y > self.yield_[i - 1] && y > self.yield_[i + 1] && y > floor * peak
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "harmonic_order,yield,log10_yield")?;
        for ((o, y), l) in self
            .harmonic_order
            .iter()
            .zip(&self.yield_)
            .zip(&self.log10_yield)
        {
            writeln!(out, "{o:.10e},{y:.10e},{l:.10e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::Format {
            what: "spectrum CSV".into(),
            reason: format!("line {line}: {reason}"),
        };
        let mut metadata = BTreeMap::new();
        let (mut order, mut yield_, mut log10_yield) = (Vec::new(), Vec::new(), Vec::new());
        let mut header = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    metadata.insert(k.to_string(), v.to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !header {
                if line != "harmonic_order,yield,log10_yield" {
                    return Err(bad(i + 1, "unexpected column header"));
                }
                header = true;
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(i + 1, "unparsable number"))?;
            if cols.len() != 3 {
                return Err(bad(i + 1, "expected 3 columns"));
            }
            order.push(cols[0]);
            yield_.push(cols[1]);
            log10_yield.push(cols[2]);
        }
        if !header {
            return Err(bad(0, "missing column header"));
        }
        Ok(Self {
            harmonic_order: order,
            yield_,
            log10_yield,
            metadata,
        })
    }
}

/// `t,x` rows of a position trajectory.
pub fn write_trajectory_csv<W: Write>(times: &[f64], x: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "t,x")?;
    for (t, v) in times.iter().zip(x) {
        writeln!(out, "{t:.10e},{v:.16e}")?;
    }
    Ok(())
}
