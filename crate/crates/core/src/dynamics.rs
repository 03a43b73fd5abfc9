//! Laser pulse, eigenbasis dipole couplings and interaction-picture
//! propagation.
//!
//! With `psi(t) = sum_j b_j(t) exp(-i e_j t) u_j` the coefficients obey
//! `i db_k/dt = E(t) sum_j exp(-i (e_j - e_k) t) T_kj b_j` where
//! `T_kj = u_k . h u_j`, and the position expectation is
//! `x(t) = sum_kj conj(b_k) b_j exp(-i (e_j - e_k) t) T_kj`, phases included.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenSolution;
use crate::error::{Error, Result};
use crate::linalg::weighted_gram;

/// `E(t) = E0 sin^2(w t / 2 n_cyc) cos(w t)` on `0 < t < n_cyc 2 pi / w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Carrier angular frequency.
    pub omega: f64,
    /// Peak field amplitude.
    pub e0: f64,
    pub n_cyc: u32,
}

impl Default for PulseSpec {
    fn default() -> Self {
        let omega = 0.0049;
        Self {
            omega,
            e0: 0.4 * omega,
            n_cyc: 5,
        }
    }
}

impl PulseSpec {
    pub fn new(omega: f64, e0: f64, n_cyc: u32) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::param(format!("omega must be positive, got {omega}")));
        }
        if n_cyc == 0 {
            return Err(Error::param("n_cyc must be at least 1"));
        }
        if !e0.is_finite() {
            return Err(Error::param("E0 must be finite"));
        }
        Ok(Self { omega, e0, n_cyc })
    }

    /// Pulse length `n_cyc 2 pi / omega`.
    pub fn duration(&self) -> f64 {
        self.n_cyc as f64 * 2.0 * PI / self.omega
    }

    pub fn field(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.duration() {
            return 0.0;
        }
        let envelope = (self.omega * t / (2.0 * self.n_cyc as f64)).sin();
        self.e0 * envelope * envelope * (self.omega * t).cos()
    }

    /// Uniform grid of `samples` points spanning `[0, T]`.
    pub fn time_grid(&self, samples: usize) -> Vec<f64> {
        let t = self.duration();
        let last = (samples - 1) as f64;
        (0..samples).map(|m| t * m as f64 / last).collect()
    }
}

/// Dipole operator in the field-free eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub energies: Vec<f64>,
    /// `T_kj = u_k . h u_j`, symmetric.
    pub elements: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn new(energies: Vec<f64>, elements: DMatrix<f64>) -> Result<Self> {
        if elements.nrows() != energies.len() || elements.ncols() != energies.len() {
            return Err(Error::param("transition matrix and energy count differ"));
        }
        Ok(Self { energies, elements })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.elements.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Restriction to the states `keep`, in the given order.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if let Some(&bad) = keep.iter().find(|&&i| i >= self.len()) {
            return Err(Error::param(format!(
                "state {bad} is not available ({} states)",
                self.len()
            )));
        }
        let energies = keep.iter().map(|&i| self.energies[i]).collect();
        let elements = DMatrix::from_fn(keep.len(), keep.len(), |a, b| {
            self.elements[(keep[a], keep[b])]
        });
        Ok(Self { energies, elements })
    }

    /// The lowest `k` states.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..k.min(self.len())).collect();
        self.restrict(&keep)
    }
}

/// `T_kj = sum_r u_k[r] d[r] u_j[r]` for every pair of computed states.
pub fn transition_matrix(sol: &EigenSolution, dipole: &[f64]) -> Result<TransitionMatrix> {
    if sol.dim() != dipole.len() {
        return Err(Error::param(format!(
            "eigenvectors have dimension {} but the dipole has {}",
            sol.dim(),
            dipole.len()
        )));
    }
    let g = weighted_gram(&sol.vectors, &sol.vectors, Some(dipole));
    let elements = (&g + g.transpose()) * 0.5;
    TransitionMatrix::new(sol.energies.clone(), elements)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Output samples over `[0, T]`.
    pub samples: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            samples: 8192,
            rtol: 1e-10,
            atol: 1e-10,
        }
    }
}

/// Interaction-picture coefficients on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTrajectory {
    pub times: Vec<f64>,
    /// `b(t_m)` per sample.
    pub coefficients: Vec<Vec<Complex64>>,
    /// `x(t_m)`.
    pub position: Vec<f64>,
    /// Largest `| ||b||^2 - 1 |` over the grid.
    pub max_norm_drift: f64,
    /// Accepted integrator steps.
    pub steps: usize,
}

/// Dipole couplings with negligible entries dropped, row by row.
struct SparseCoupling {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseCoupling {
    fn new(t: &DMatrix<f64>) -> Self {
        let cutoff = 1e-14 * t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rows = (0..t.nrows())
            .map(|k| {
                (0..t.ncols())
                    .filter(|&j| t[(k, j)].abs() > cutoff)
                    .map(|j| (j, t[(k, j)]))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    /// `T c`
    fn apply(&self, c: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row
                .iter()
                .fold(Complex64::new(0.0, 0.0), |acc, &(j, t)| acc + c[j] * t);
        }
    }
}

struct InteractionPicture<'a> {
    pulse: &'a PulseSpec,
    /// energies relative to the lowest retained state
    shifted: Vec<f64>,
    coupling: SparseCoupling,
    phased: Vec<Complex64>,
    tc: Vec<Complex64>,
}

impl InteractionPicture<'_> {
    fn phases(&self, t: f64, out: &mut [Complex64]) {
        for (p, &e) in out.iter_mut().zip(&self.shifted) {
            let (s, c) = (e * t).sin_cos();
            *p = Complex64::new(c, -s);
        }
    }

    /// `db/dt = -i E(t) conj(p_k) (T (p . b))_k` with `p_j = exp(-i e_j t)`.
    fn derivative(&mut self, t: f64, b: &[Complex64], db: &mut [Complex64]) {
        let field = self.pulse.field(t);
        if field == 0.0 {
            db.iter_mut().for_each(|d| *d = Complex64::new(0.0, 0.0));
            return;
        }
        let mut phases = std::mem::take(&mut self.phased);
        self.phases(t, &mut phases);
        let c: Vec<Complex64> = phases.iter().zip(b).map(|(p, bj)| p * bj).collect();
        self.coupling.apply(&c, &mut self.tc);
        let scale = Complex64::new(0.0, -field);
        for ((d, p), tc) in db.iter_mut().zip(&phases).zip(&self.tc) {
            *d = scale * p.conj() * tc;
        }
        self.phased = phases;
    }

    /// `x(t)` and its imaginary rounding residue.
    fn position(&mut self, t: f64, b: &[Complex64]) -> (f64, f64) {
        let mut phases = vec![Complex64::new(0.0, 0.0); b.len()];
        self.phases(t, &mut phases);
        let c: Vec<Complex64> = phases.iter().zip(b).map(|(p, bj)| p * bj).collect();
        self.coupling.apply(&c, &mut self.tc);
        let x = c
            .iter()
            .zip(&self.tc)
            .fold(Complex64::new(0.0, 0.0), |acc, (ck, tk)| {
                acc + ck.conj() * tk
            });
        (x.re, x.im)
    }
}

/// Dormand-Prince 5(4) tableau.
mod dopri {
    pub const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// fifth-order minus embedded fourth-order weights
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

fn norm_sqr(b: &[Complex64]) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum()
}

/// Propagates from the lowest retained state (`b_0(0) = 1`).
pub fn propagate_interaction_picture(
    tm: &TransitionMatrix,
    pulse: &PulseSpec,
    opts: &PropagationOptions,
) -> Result<CoefficientTrajectory> {
    if tm.is_empty() {
        return Err(Error::param("no states to propagate"));
    }
    let mut b0 = vec![Complex64::new(0.0, 0.0); tm.len()];
    b0[0] = Complex64::new(1.0, 0.0);
    propagate_interaction_picture_from(tm, pulse, opts, b0)
}

/// Propagates an arbitrary normalized initial coefficient vector.
pub fn propagate_interaction_picture_from(
    tm: &TransitionMatrix,
    pulse: &PulseSpec,
    opts: &PropagationOptions,
    b0: Vec<Complex64>,
) -> Result<CoefficientTrajectory> {
    let k = tm.len();
    if b0.len() != k {
        return Err(Error::param(
            "initial coefficients do not match the state count",
        ));
    }
    if opts.samples < 3 {
        return Err(Error::param("need at least 3 output samples"));
    }
    let e_ref = tm.energies[0];
    let mut sys = InteractionPicture {
        pulse,
        shifted: tm.energies.iter().map(|e| e - e_ref).collect(),
        coupling: SparseCoupling::new(&tm.elements),
        phased: vec![Complex64::new(0.0, 0.0); k],
        tc: vec![Complex64::new(0.0, 0.0); k],
    };
    let times = pulse.time_grid(opts.samples);
    let duration = pulse.duration();
    let min_step = 1e-12 * duration;
    let spread = sys.shifted.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut h = (0.01 / spread.max(1e-3)).min(times[1]);

    let zero = Complex64::new(0.0, 0.0);
    let mut y = b0;
    let mut stages = vec![vec![zero; k]; 7];
    let mut tmp = vec![zero; k];
    let mut err = vec![zero; k];

    let mut coefficients = Vec::with_capacity(opts.samples);
    let mut position = Vec::with_capacity(opts.samples);
    let mut drift = 0.0f64;
    let mut steps = 0;
    let initial_norm = norm_sqr(&y);

    let mut record = |sys: &mut InteractionPicture, t: f64, y: &[Complex64]| -> Result<()> {
        let (x, residue) = sys.position(t, y);
        if residue.abs() > 1e-8 {
            return Err(Error::Propagation {
                time: t,
                reason: format!("position has imaginary part {residue:e}"),
            });
        }
        let d = (norm_sqr(y) - initial_norm).abs();
        if d > 1e-6 {
            return Err(Error::Propagation {
                time: t,
                reason: format!("norm drifted by {d:e}"),
            });
        }
        drift = drift.max(d);
        coefficients.push(y.to_vec());
        position.push(x);
        Ok(())
    };

    record(&mut sys, 0.0, &y)?;
    let mut t = 0.0;
    sys.derivative(t, &y, &mut stages[0]);
    for &target in &times[1..] {
        while t < target {
            let remaining = target - t;
            let landing = h >= remaining;
            let step = if landing { remaining } else { h };
            for s in 1..7 {
                for i in 0..k {
                    let mut acc = y[i];
                    for (j, a) in dopri::A[s][..s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += stages[j][i] * (a * step);
                        }
                    }
                    tmp[i] = acc;
                }
                let (done, rest) = stages.split_at_mut(s);
                let _ = done;
                sys.derivative(t + dopri::C[s] * step, &tmp, &mut rest[0]);
            }
            // stage 7 was evaluated at the fifth-order solution held in tmp
            let mut e_norm = 0.0;
            for i in 0..k {
                let mut e = zero;
                for (j, w) in dopri::E.iter().enumerate() {
                    if *w != 0.0 {
                        e += stages[j][i] * (w * step);
                    }
                }
                err[i] = e;
                let sc = opts.atol + opts.rtol * y[i].norm().max(tmp[i].norm());
                e_norm += (e.norm() / sc).powi(2);
            }
            let e_norm = (e_norm / k as f64).sqrt();
            let factor = if e_norm == 0.0 {
                5.0
            } else {
                (0.9 * e_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if e_norm <= 1.0 {
                t = if landing { target } else { t + step };
                y.copy_from_slice(&tmp);
                stages.swap(0, 6);
                steps += 1;
                // a clamped landing step says nothing about the natural size
                if !landing || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
                if h < min_step {
                    return Err(Error::Propagation {
                        time: t,
                        reason: format!("step size fell below {min_step:e}"),
                    });
                }
            }
        }
        record(&mut sys, target, &y)?;
    }

    Ok(CoefficientTrajectory {
        times,
        coefficients,
        position,
        max_norm_drift: drift,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(gap: f64, coupling: f64) -> TransitionMatrix {
        TransitionMatrix::new(
            vec![-0.3, -0.3 + gap],
            DMatrix::from_row_slice(2, 2, &[0.0, coupling, coupling, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn field_examples() {
        let p = PulseSpec::default();
        assert_eq!(p.field(0.0), 0.0);
        assert_eq!(p.field(p.duration()), 0.0);
        let mid = p.field(p.duration() / 2.0);
        assert!((mid + p.e0).abs() < 1e-15, "{mid}");
        assert!((p.duration() - 6411.413578).abs() < 1e-5);
    }

    #[test]
    fn pulse_validation() {
        assert!(PulseSpec::new(0.0, 0.1, 5).is_err());
        assert!(PulseSpec::new(0.1, 0.1, 0).is_err());
    }

    #[test]
    fn zero_field_keeps_coefficients() {
        let pulse = PulseSpec {
            e0: 0.0,
            ..PulseSpec::default()
        };
        let tm = two_level(0.05, 0.7);
        let opts = PropagationOptions {
            samples: 64,
            ..Default::default()
        };
        let traj = propagate_interaction_picture(&tm, &pulse, &opts).unwrap();
        for b in &traj.coefficients {
            assert_eq!(b[0], Complex64::new(1.0, 0.0));
            assert_eq!(b[1], Complex64::new(0.0, 0.0));
        }
        assert!(traj.position.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_field_superposition_keeps_magnitudes() {
        let pulse = PulseSpec {
            e0: 0.0,
            ..PulseSpec::default()
        };
        let tm = two_level(0.05, 0.7);
        let opts = PropagationOptions {
            samples: 64,
            ..Default::default()
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let b0 = vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)];
        let traj = propagate_interaction_picture_from(&tm, &pulse, &opts, b0).unwrap();
        for b in &traj.coefficients {
            assert!((b[0].norm() - s).abs() < 1e-15 && (b[1].norm() - s).abs() < 1e-15);
        }
        // x oscillates at the level spacing
        let t = traj.times[10];
        let expect = 0.7 * (0.05 * t).sin();
        assert!((traj.position[10] - expect).abs() < 1e-12);
    }

    /// Fixed-step exact-exponential stepping of the Schrodinger-picture
    /// two-level problem with midpoint field; second order in dt.
    fn two_level_oracle(
        tm: &TransitionMatrix,
        pulse: &PulseSpec,
        t_end: f64,
        steps: usize,
    ) -> [Complex64; 2] {
        let dt = t_end / steps as f64;
        let e = [0.0, tm.energies[1] - tm.energies[0]];
        let g = tm.elements[(0, 1)];
        let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for n in 0..steps {
            let f = pulse.field((n as f64 + 0.5) * dt);
            // H = [[e0, f g], [f g, e1]]: closed-form exponential
            let mean = 0.5 * (e[0] + e[1]);
            let half = 0.5 * (e[1] - e[0]);
            let off = f * g;
            let omega = (half * half + off * off).sqrt();
            let (s, c) = (omega * dt).sin_cos();
            let sinc = if omega == 0.0 { dt } else { s / omega };
            let ph = Complex64::from_polar(1.0, -mean * dt);
            let i = Complex64::new(0.0, 1.0);
            let u00 = ph * (c - i * (-half) * sinc);
            let u11 = ph * (c - i * half * sinc);
            let u01 = ph * (-i * off * sinc);
            psi = [u00 * psi[0] + u01 * psi[1], u01 * psi[0] + u11 * psi[1]];
        }
        // back to the interaction picture
        let b0 = psi[0] * Complex64::from_polar(1.0, e[0] * t_end);
        let b1 = psi[1] * Complex64::from_polar(1.0, e[1] * t_end);
        [b0, b1]
    }

    #[test]
    fn two_level_matches_direct_propagator() {
        let pulse = PulseSpec {
            omega: 0.05,
            e0: 0.002,
            n_cyc: 1,
        };
        let tm = two_level(0.11, 1.3);
        let opts = PropagationOptions {
            samples: 33,
            ..Default::default()
        };
        let traj = propagate_interaction_picture(&tm, &pulse, &opts).unwrap();
        let t_end = pulse.duration();
        // Richardson step doubling of the second-order oracle
        let fine = two_level_oracle(&tm, &pulse, t_end, 1 << 20);
        let coarse = two_level_oracle(&tm, &pulse, t_end, 1 << 19);
        let last = traj.coefficients.last().unwrap();
        for i in 0..2 {
            let extrapolated = fine[i] + (fine[i] - coarse[i]) / 3.0;
            assert!(
                (last[i] - extrapolated).norm() < 1e-8,
                "{i}: {} vs {}",
                last[i],
                extrapolated
            );
        }
        assert!(traj.max_norm_drift < 1e-8);
    }

    #[test]
    fn restriction_and_truncation() {
        let tm = TransitionMatrix::new(
            vec![0.0, 1.0, 2.0],
            DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0]),
        )
        .unwrap();
        let r = tm.restrict(&[0, 2]).unwrap();
        assert_eq!(r.energies, vec![0.0, 2.0]);
        assert_eq!(r.elements[(0, 1)], 2.0);
        assert!(tm.restrict(&[0, 3]).is_err());
        assert_eq!(tm.truncate(2).unwrap().elements[(1, 0)], 1.0);
    }
}
