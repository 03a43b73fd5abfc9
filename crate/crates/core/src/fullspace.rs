//! Reference propagation in the full many-body space.
//!
//! `H(t) = K + V + E(t) d` is split into the hopping part
//! `K = A (x) 1 + 1 (x) A`, whose exponential factorizes as `G (x) G` with
//! `G = exp(-i h A)` computed once from the single-spin matrix `A`, and the
//! diagonal `V + E(t) d`. Each substep is a Strang step with the field taken
//! at the substep midpoint; neighbouring diagonal half-steps are merged.
//! The dipole is diagonal, so `x(t)` does not depend on where the pending
//! diagonal phase is applied.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::FockBasis;
use crate::dynamics::PulseSpec;
use crate::eigen::sorted_eigen;
use crate::error::{Error, Result};
use crate::operators::{single_spin_hopping, ChainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplittingOrder {
    /// Strang, error `O(dt^2)`.
    Second,
    /// Triple-jump composition of Strang steps, error `O(dt^4)`.
    Fourth,
}

impl SplittingOrder {
    fn weights(self) -> Vec<f64> {
        match self {
            SplittingOrder::Second => vec![1.0],
            SplittingOrder::Fourth => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                vec![w1, -c * w1, w1]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullSpaceOptions {
    pub samples: usize,
    /// Splitting steps between consecutive output samples.
    pub steps_per_sample: usize,
    pub order: SplittingOrder,
}

impl Default for FullSpaceOptions {
    fn default() -> Self {
        Self {
            samples: 8192,
            steps_per_sample: 128,
            order: SplittingOrder::Second,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullSpaceTrajectory {
    pub times: Vec<f64>,
    pub position: Vec<f64>,
    pub max_norm_drift: f64,
    /// `psi(T)`
    pub final_state: Vec<Complex64>,
}

/// `exp(-i h A)` for real symmetric `A` given by eigenvalues and
/// eigenvector columns.
fn exp_symmetric(values: &[f64], vectors: &DMatrix<f64>, h: f64) -> Vec<Complex64> {
    let d = values.len();
    let phases: Vec<Complex64> = values
        .iter()
        .map(|&l| Complex64::from_polar(1.0, -h * l))
        .collect();
    let mut g = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = (0..d)
                .map(|l| phases[l] * (vectors[(i, l)] * vectors[(j, l)]))
                .sum();
        }
    }
    g
}

struct Splitting {
    d: usize,
    u: f64,
    /// `x` summed over the occupied sites of each single-spin word
    word_dipole: Vec<f64>,
    double_occupancy: Vec<u8>,
    dipole: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Splitting {
    /// `psi <- exp(-i (a V + b d)) psi`
    fn diagonal(&self, psi: &mut [Complex64], a: f64, b: f64) {
        let f: Vec<Complex64> = self
            .word_dipole
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -b * x))
            .collect();
        let max_docc = self.double_occupancy.iter().copied().max().unwrap_or(0) as usize;
        let g: Vec<Complex64> = (0..=max_docc)
            .map(|n| Complex64::from_polar(1.0, -a * self.u * n as f64))
            .collect();
        for (iu, row) in psi.chunks_mut(self.d).enumerate() {
            let docc = &self.double_occupancy[iu * self.d..(iu + 1) * self.d];
            for ((p, fd), &n) in row.iter_mut().zip(&f).zip(docc) {
                *p *= f[iu] * fd * g[n as usize];
            }
        }
    }

    /// `Psi <- G Psi G` with `Psi` the `D x D` amplitude matrix and `G` symmetric.
    fn hopping(&mut self, psi: &mut [Complex64], g: &[Complex64]) {
        let d = self.d;
        let tmp = &mut self.scratch;
        tmp.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for i in 0..d {
            let out = &mut tmp[i * d..(i + 1) * d];
            for l in 0..d {
                let gil = g[i * d + l];
                for (o, p) in out.iter_mut().zip(&psi[l * d..(l + 1) * d]) {
                    *o += gil * p;
                }
            }
        }
        psi.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for i in 0..d {
            let out = &mut psi[i * d..(i + 1) * d];
            for l in 0..d {
                let t = tmp[i * d + l];
                for (o, gl) in out.iter_mut().zip(&g[l * d..(l + 1) * d]) {
                    *o += t * gl;
                }
            }
        }
    }

    fn position(&self, psi: &[Complex64]) -> f64 {
        psi.iter()
            .zip(&self.dipole)
            .map(|(p, x)| p.norm_sqr() * x)
            .sum()
    }
}

/// Propagates `psi0` over the pulse in the full half-filled space.
pub fn propagate_full_space(
    spec: &ChainSpec,
    pulse: &PulseSpec,
    psi0: &[Complex64],
    opts: &FullSpaceOptions,
) -> Result<FullSpaceTrajectory> {
    spec.validate()?;
    let basis = FockBasis::half_filling(spec.sites)?;
    if psi0.len() != basis.dim() {
        return Err(Error::param(format!(
            "initial state has length {} but the space has dimension {}",
            psi0.len(),
            basis.dim()
        )));
    }
    if opts.samples < 2 || opts.steps_per_sample == 0 {
        return Err(Error::param(
            "need at least 2 samples and 1 step per sample",
        ));
    }
    let d = basis.up.dim();
    let a = DMatrix::from_row_slice(d, d, &single_spin_hopping(spec, &basis.up).to_dense());
    let (values, vectors) = sorted_eigen(a);

    let x = spec.positions();
    let word_dipole: Vec<f64> = basis
        .up
        .words()
        .iter()
        .map(|&w| crate::basis::occupied_sites(w).map(|s| x[s]).sum())
        .collect();
    let mut double_occupancy = Vec::with_capacity(basis.dim());
    let mut dipole = Vec::with_capacity(basis.dim());
    for (iu, &wu) in basis.up.words().iter().enumerate() {
        for (id, &wd) in basis.dn.words().iter().enumerate() {
            double_occupancy.push((wu & wd).count_ones() as u8);
            dipole.push(word_dipole[iu] + word_dipole[id]);
        }
    }
    let mut split = Splitting {
        d,
        u: spec.u,
        word_dipole,
        double_occupancy,
        dipole,
        scratch: vec![Complex64::new(0.0, 0.0); d * d],
    };

    let times = pulse.time_grid(opts.samples);
    let dt = times[1] / opts.steps_per_sample as f64;
    let weights = opts.order.weights();
    let propagators: Vec<Vec<Complex64>> = weights
        .iter()
        .map(|w| exp_symmetric(&values, &vectors, w * dt))
        .collect();

    let mut psi = psi0.to_vec();
    let norm0: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let mut drift = 0.0f64;
    let mut position = Vec::with_capacity(opts.samples);
    position.push(split.position(&psi));
    // pending diagonal exponent: a V + b d
    let (mut pa, mut pb) = (0.0, 0.0);
    for m in 1..opts.samples {
        let t_start = times[m - 1];
        for n in 0..opts.steps_per_sample {
            let mut tau = t_start + n as f64 * dt;
            for (w, g) in weights.iter().zip(&propagators) {
                let h = w * dt;
                let field = pulse.field(tau + 0.5 * h);
                pa += 0.5 * h;
                pb += 0.5 * h * field;
                split.diagonal(&mut psi, pa, pb);
                split.hopping(&mut psi, g);
                pa = 0.5 * h;
                pb = 0.5 * h * field;
                tau += h;
            }
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let dn = (norm - norm0).abs();
        if dn > 1e-6 {
            return Err(Error::Propagation {
                time: times[m],
                reason: format!("norm drifted by {dn:e}"),
            });
        }
        drift = drift.max(dn);
        position.push(split.position(&psi));
    }
    split.diagonal(&mut psi, pa, pb);

    Ok(FullSpaceTrajectory {
        times,
        position,
        max_norm_drift: drift,
        final_state: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{lowest_eigenpairs, SolverOptions};
    use crate::operators::assemble_h0;

    fn ground_state(spec: &ChainSpec) -> Vec<Complex64> {
        let h = assemble_h0(spec).unwrap();
        let sol = lowest_eigenpairs(&h, &SolverOptions::with_k(1)).unwrap();
        sol.vectors[0]
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect()
    }

    fn short_pulse() -> PulseSpec {
        PulseSpec {
            omega: 0.05,
            e0: 0.02,
            n_cyc: 2,
        }
    }

    #[test]
    fn zero_field_ground_state_is_stationary() {
        let spec = ChainSpec::topological(4, 0.1);
        let psi0 = ground_state(&spec);
        let pulse = PulseSpec {
            e0: 0.0,
            ..short_pulse()
        };
        let opts = FullSpaceOptions {
            samples: 64,
            steps_per_sample: 4,
            order: SplittingOrder::Second,
        };
        let traj = propagate_full_space(&spec, &pulse, &psi0, &opts).unwrap();
        let x0 = traj.position[0];
        assert!(traj.position.iter().all(|x| (x - x0).abs() < 1e-10));
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn convergence_orders() {
        let spec = ChainSpec::trivial(4, 0.3);
        let psi0 = ground_state(&spec);
        let pulse = short_pulse();
        let run = |steps, order| {
            let opts = FullSpaceOptions {
                samples: 17,
                steps_per_sample: steps,
                order,
            };
            propagate_full_space(&spec, &pulse, &psi0, &opts)
                .unwrap()
                .final_state
        };
        let reference = run(1024, SplittingOrder::Fourth);
        let e1 = max_diff(&run(32, SplittingOrder::Second), &reference);
        let e2 = max_diff(&run(64, SplittingOrder::Second), &reference);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "second order ratio {ratio}");
        let f1 = max_diff(&run(32, SplittingOrder::Fourth), &reference);
        let f2 = max_diff(&run(64, SplittingOrder::Fourth), &reference);
        let ratio = f1 / f2;
        assert!((13.0..19.0).contains(&ratio), "fourth order ratio {ratio}");
    }

    #[test]
    fn rejects_mismatched_state() {
        let spec = ChainSpec::trivial(4, 0.0);
        let psi0 = vec![Complex64::new(1.0, 0.0); 3];
        assert!(
            propagate_full_space(&spec, &short_pulse(), &psi0, &FullSpaceOptions::default())
                .is_err()
        );
    }
}
