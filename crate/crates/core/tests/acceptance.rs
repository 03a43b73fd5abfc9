//! Acceptance suite: one `PASS`/`FAIL` line per criterion A1 to A13.
//!
//! Eigen-decompositions are cached under the cargo target directory (or
//! `SSHHUB_ACCEPTANCE_CACHE`), so only the first run pays for the N = 12
//! diagonalizations. The process exits non-zero on a computation error, and
//! on a failed criterion only when `SSHHUB_ACCEPTANCE_STRICT` is set.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use sshhub::analysis::{
    allowed_transitions, check_selection_rules, dominant_configurations, reduce_levels, u_grid,
    ConfigurationReport, LevelScheme, SelectionRuleCheck, SpinLabels, DEFAULT_THRESHOLD,
};
use sshhub::basis::FockBasis;
use sshhub::config::{Phase, RunConfig};
use sshhub::dynamics::{
    propagate_interaction_picture, PropagationOptions, PulseSpec, TransitionMatrix,
};
use sshhub::eigen::{lowest_eigenpairs, SolverOptions};
use sshhub::fullspace::{propagate_full_space, FullSpaceOptions, SplittingOrder};
use sshhub::operators::{assemble_h0, ChainSpec};
use sshhub::pipeline::{load_or_diagonalize, run_spectrum, run_u_scan, solve, transitions};
use sshhub::spectrum::SpectrumResult;
use sshhub::Result;

const SITES: usize = 12;
const SELECTION_STATES: usize = 40;
const SCAN_STATES: usize = 40;
const TOPOLOGICAL_KEEP: [usize; 7] = [0, 2, 3, 5, 11, 16, 18];
const TRIVIAL_KEEP: [usize; 10] = [0, 2, 4, 11, 13, 15, 17, 29, 30, 34];
/// Expected allowed pairs within the kept states.
const TOPOLOGICAL_PAIRS: [(usize, usize); 11] = [
    (0, 2),
    (0, 11),
    (0, 18),
    (2, 3),
    (2, 5),
    (2, 16),
    (3, 11),
    (3, 18),
    (5, 18),
    (11, 16),
    (16, 18),
];
const TRIVIAL_PAIRS: [(usize, usize); 23] = [
    (0, 2),
    (0, 11),
    (0, 13),
    (0, 29),
    (0, 30),
    (0, 34),
    (2, 4),
    (2, 15),
    (2, 17),
    (4, 11),
    (4, 13),
    (4, 29),
    (4, 30),
    (4, 34),
    (11, 15),
    (13, 15),
    (13, 17),
    (15, 29),
    (15, 30),
    (15, 34),
    (17, 29),
    (17, 30),
    (17, 34),
];

fn cache_dir() -> PathBuf {
    std::env::var_os("SSHHUB_ACCEPTANCE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance"))
}

fn config(phase: Phase, u: f64, k: usize) -> RunConfig {
    RunConfig {
        sites: SITES,
        phase,
        u,
        k,
        directory: cache_dir(),
        ..RunConfig::default()
    }
}

fn progress(msg: &str) {
    eprintln!("[acceptance] {msg}");
}

struct Outcome {
    failed: Vec<&'static str>,
    max_drift: f64,
}

impl Outcome {
    fn report(&mut self, id: &'static str, pass: bool, detail: String) {
        println!("{id:<4} {}  {detail}", if pass { "PASS" } else { "FAIL" });
        std::io::stdout().flush().ok();
        if !pass {
            self.failed.push(id);
        }
    }

    fn drift(&mut self, d: f64) {
        self.max_drift = self.max_drift.max(d);
    }
}

/// What the criteria need from one N = 12, U = 0.1 decomposition; the
/// eigenvectors themselves are dropped once this is filled in.
struct PhaseData {
    energies: Vec<f64>,
    tm: TransitionMatrix,
    scheme: LevelScheme,
    rules: SelectionRuleCheck,
    /// Pairs among the lowest states whose thresholded coupling disagrees
    /// with "allowed iff the reflection parities differ".
    bare_parity_mismatches: usize,
    bare_pairs: usize,
    same_parity_allowed: usize,
    configs: Vec<ConfigurationReport>,
}

fn phase_data(phase: Phase) -> Result<PhaseData> {
    let cfg = config(phase, 0.1, 200);
    let t = Instant::now();
    let (sol, path, source) = load_or_diagonalize(&cfg, None)?;
    progress(&format!(
        "{phase:?} U=0.1 k=200: {source:?} {} in {:.0?}",
        path.display(),
        t.elapsed()
    ));
    let chain = cfg.chain()?;
    let tm = transitions(&chain, &sol)?;
    let scheme = allowed_transitions(&sol, &tm, cfg.omega, DEFAULT_THRESHOLD)?;
    let basis = FockBasis::half_filling(SITES)?;
    let labels = sol.vectors[..SELECTION_STATES]
        .iter()
        .map(|v| SpinLabels::of(&basis, v))
        .collect::<Result<Vec<_>>>()?;
    let rules = check_selection_rules(&sol, &scheme, &labels, SELECTION_STATES)?;
    let (mut bare_parity_mismatches, mut bare_pairs, mut same_parity_allowed) = (0, 0, 0);
    for j in 0..SELECTION_STATES {
        for i in 0..j {
            if sol.clusters[i] == sol.clusters[j] {
                continue;
            }
            bare_pairs += 1;
            let differ = sol.characters[i][0] != sol.characters[j][0];
            let allowed = scheme.is_allowed(i, j);
            if differ != allowed {
                bare_parity_mismatches += 1;
            }
            if allowed && !differ {
                same_parity_allowed += 1;
            }
        }
    }
    let configs = [0, 2]
        .iter()
        .map(|&s| dominant_configurations(&basis, s, &sol.vectors[s], 4))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseData {
        energies: sol.energies.clone(),
        tm,
        scheme,
        rules,
        bare_parity_mismatches,
        bare_pairs,
        same_parity_allowed,
        configs,
    })
}

fn is_neel(config: &str) -> bool {
    let b = config.as_bytes();
    b.iter().all(|&c| c == b'u' || c == b'd') && b.windows(2).all(|w| w[0] != w[1])
}

fn has_edge_doublon_holon(config: &str) -> bool {
    let b = config.as_bytes();
    let (first, last) = (b[0], b[b.len() - 1]);
    (first == b'2' && last == b'0') || (first == b'0' && last == b'2')
}

/// Comparison of `log10 Y` over bins with order `<= max_order`.
struct LogComparison {
    worst: f64,
    worst_order: f64,
    /// `log10 Y_b` at the worst bin relative to the largest `log10 Y_b`.
    worst_depth: f64,
    bins_over: usize,
    bins: usize,
}

fn compare_logs(
    a: &SpectrumResult,
    b: &SpectrumResult,
    max_order: f64,
    limit: f64,
) -> LogComparison {
    let idx: Vec<usize> = (0..b.len())
        .filter(|&i| b.harmonic_order[i] <= max_order)
        .collect();
    let peak = idx
        .iter()
        .map(|&i| b.log10_yield[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let diff = |i: usize| (a.log10_yield[i] - b.log10_yield[i]).abs();
    let worst_bin = idx
        .iter()
        .copied()
        .max_by(|&i, &j| diff(i).total_cmp(&diff(j)))
        .unwrap_or(0);
    LogComparison {
        worst: diff(worst_bin),
        worst_order: b.harmonic_order[worst_bin],
        worst_depth: b.log10_yield[worst_bin] - peak,
        bins_over: idx.iter().filter(|&&i| diff(i) >= limit).count(),
        bins: idx.len(),
    }
}

fn spectrum(out: &mut Outcome, cfg: &RunConfig, tm: &TransitionMatrix) -> Result<SpectrumResult> {
    let run = run_spectrum(cfg, tm)?;
    out.drift(run.trajectory.max_norm_drift);
    Ok(run.spectrum)
}

fn a2_dimer() -> Result<f64> {
    let (v, u) = (0.18268, 0.1);
    let chain = ChainSpec::new(2, v, v, u)?;
    let sol = lowest_eigenpairs(&assemble_h0(&chain)?, &SolverOptions::with_k(4))?;
    let root = (u * u + 16.0 * v * v).sqrt();
    let mut exact = [0.0, u, 0.5 * (u - root), 0.5 * (u + root)];
    exact.sort_by(f64::total_cmp);
    Ok(sol
        .energies
        .iter()
        .zip(exact)
        .map(|(e, x)| (e - x).abs())
        .fold(0.0, f64::max))
}

fn a3_additivity() -> Result<f64> {
    let mut worst = 0.0f64;
    for chain in [ChainSpec::topological(8, 0.0), ChainSpec::trivial(8, 0.0)] {
        let one = DMatrix::from_row_slice(8, 8, &chain.one_body_matrix());
        let mut levels: Vec<f64> = SymmetricEigen::new(one)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        levels.sort_by(f64::total_cmp);
        let expected = 2.0 * levels[..4].iter().sum::<f64>();
        let ground = solve(&chain, &SolverOptions::with_k(1))?.energies[0];
        worst = worst.max((ground - expected).abs());
    }
    Ok(worst)
}

fn a4_cross_method(out: &mut Outcome) -> Result<f64> {
    let chain = ChainSpec::topological(6, 0.1);
    let pulse = PulseSpec::default();
    let sol = solve(&chain, &SolverOptions::with_k(400))?;
    let tm = transitions(&chain, &sol)?;
    let samples = PropagationOptions::default().samples;
    let eig = propagate_interaction_picture(&tm, &pulse, &PropagationOptions::default())?;
    let psi0: Vec<Complex64> = sol.vectors[0]
        .iter()
        .map(|&a| Complex64::new(a, 0.0))
        .collect();
    let full = propagate_full_space(
        &chain,
        &pulse,
        &psi0,
        &FullSpaceOptions {
            samples,
            steps_per_sample: 8,
            order: SplittingOrder::Fourth,
        },
    )?;
    out.drift(eig.max_norm_drift);
    out.drift(full.max_norm_drift);
    Ok(eig
        .position
        .iter()
        .zip(&full.position)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn run() -> Result<Outcome> {
    let started = Instant::now();
    let mut out = Outcome {
        failed: Vec::new(),
        max_drift: 0.0,
    };
    progress(&format!("cache directory {}", cache_dir().display()));

    let n = FockBasis::half_filling(SITES)?.dim();
    out.report("A1", n == 853_776, format!("N=12 half filling: n = {n}"));

    let err = a2_dimer()?;
    out.report(
        "A2",
        err < 1e-12,
        format!("dimer v=0.18268 U=0.1: max |error| = {err:.2e}"),
    );

    let err = a3_additivity()?;
    out.report(
        "A3",
        err < 1e-10,
        format!("N=8 U=0, both phases: max |E0 - 2 sum eps| = {err:.2e}"),
    );

    let diff = a4_cross_method(&mut out)?;
    out.report(
        "A4",
        diff < 1e-6,
        format!("N=6 U=0.1, 400 states vs full Fock space: max |dx| = {diff:.2e}"),
    );

    let topo = phase_data(Phase::Topological)?;
    let triv = phase_data(Phase::Trivial)?;

    let topo_cfg = config(Phase::Topological, 0.1, 200);
    let triv_cfg = config(Phase::Trivial, 0.1, 200);
    progress("propagating the 200-state models");
    let topo_full = spectrum(&mut out, &topo_cfg, &topo.tm)?;
    let triv_full = spectrum(&mut out, &triv_cfg, &triv.tm)?;
    progress("propagating the 100-state and reduced models");
    let topo_100 = spectrum(&mut out, &topo_cfg, &topo.tm.truncate(100)?)?;
    let triv_100 = spectrum(&mut out, &triv_cfg, &triv.tm.truncate(100)?)?;
    let topo_red = spectrum(
        &mut out,
        &topo_cfg,
        &reduce_levels(&topo.tm, &TOPOLOGICAL_KEEP)?,
    )?;
    let triv_red = spectrum(
        &mut out,
        &triv_cfg,
        &reduce_levels(&triv.tm, &TRIVIAL_KEEP)?,
    )?;

    progress("U=0.2 decompositions");
    let mut configs_02 = Vec::new();
    for phase in [Phase::Topological, Phase::Trivial] {
        let cfg = config(phase, 0.2, 4);
        let (sol, _, _) = load_or_diagonalize(&cfg, None)?;
        let basis = FockBasis::half_filling(SITES)?;
        configs_02.push((
            phase,
            dominant_configurations(&basis, 0, &sol.vectors[0], 4)?,
            dominant_configurations(&basis, 2, &sol.vectors[2], 4)?,
        ));
    }

    progress("U scan");
    let scan_cfg = config(Phase::Topological, 0.0, SCAN_STATES);
    let scan = run_u_scan(&scan_cfg, &u_grid(0.0, 0.2, 0.02)?)?;
    for p in &scan.points {
        out.drift(
            p.spectrum
                .metadata
                .get("max_norm_drift")
                .and_then(|s| s.parse::<f64>().ok())
                .unwrap_or(f64::INFINITY),
        );
    }

    // A5 is reported once every propagation has run.
    {
        // A6
        let pass = [&topo, &triv].iter().all(|d| d.bare_parity_mismatches == 0);
        let detail = format!(
            "lowest {SELECTION_STATES}, bare parity rule disagrees on {}/{} (topological) and {}/{} (trivial) nondegenerate pairs; \
             equal-parity allowed pairs {} and {}; refined rule (parity, spin swap, S, |d eta| = 1) disagrees on {}/{} and {}/{}",
            topo.bare_parity_mismatches,
            topo.bare_pairs,
            triv.bare_parity_mismatches,
            triv.bare_pairs,
            topo.same_parity_allowed,
            triv.same_parity_allowed,
            topo.rules.violations.len(),
            topo.rules.pairs_checked,
            triv.rules.violations.len(),
            triv.rules.pairs_checked,
        );
        let a6 = (pass, detail);

        // A7
        let (pt, pv) = (
            topo_full.mean_log10(5.0, 15.0),
            triv_full.mean_log10(5.0, 15.0),
        );
        let a7 = (
            pt - pv >= 10.0,
            format!("mean log10 Y over orders 5-15: topological {pt:.2}, trivial {pv:.2}, difference {:.2}", pt - pv),
        );

        // A8
        let gt = topo.scheme.lowest_allowed_gap();
        let gv = triv.scheme.lowest_allowed_gap();
        let a8 = (
            gv.is_some_and(|g| (36.0..=44.0).contains(&g)) && gt.is_some_and(|g| g < 20.0),
            format!("lowest allowed gap / omega: trivial {gv:.2?}, topological {gt:.2?}"),
        );

        // A9
        let mut worst9 = 0.0f64;
        let mut count9 = 0;
        for (full, red) in [(&topo_full, &topo_red), (&triv_full, &triv_red)] {
            for i in full.local_maxima(25.0, 1e-25) {
                count9 += 1;
                worst9 = worst9.max((full.log10_yield[i] - red.log10_yield[i]).abs());
            }
        }
        // pair structure of the kept states against the expected lists
        let structure = |scheme: &LevelScheme, keep: &[usize], expected: &[(usize, usize)]| {
            let found = scheme.restrict(keep).pair_set();
            let missing: Vec<_> = expected.iter().filter(|p| !found.contains(p)).collect();
            let extra: Vec<_> = found.iter().filter(|p| !expected.contains(p)).collect();
            format!(
                "{} pairs, missing {missing:?}, extra {extra:?}",
                found.len()
            )
        };
        let a9 = (
            count9 > 0 && worst9 < 1.0,
            format!(
                "7-state and 10-state models at {count9} maxima: max |d log10 Y| = {worst9:.3}; \
                 topological scheme {}; trivial scheme {}",
                structure(&topo.scheme, &TOPOLOGICAL_KEEP, &TOPOLOGICAL_PAIRS),
                structure(&triv.scheme, &TRIVIAL_KEEP, &TRIVIAL_PAIRS),
            ),
        );

        // A10
        let ct = compare_logs(&topo_100, &topo_full, 60.0, 0.5);
        let cv = compare_logs(&triv_100, &triv_full, 60.0, 0.5);
        let describe = |c: &LogComparison| {
            format!(
                "{:.3} at order {:.2} ({:.1} decades below the peak), {} of {} bins >= 0.5",
                c.worst, c.worst_order, -c.worst_depth, c.bins_over, c.bins
            )
        };
        let a10 = (
            ct.worst < 0.5 && cv.worst < 0.5,
            format!(
                "100 vs 200 states, orders <= 60: max |d log10 Y| topological {}; trivial {}",
                describe(&ct),
                describe(&cv)
            ),
        );

        // A11
        let split = (topo.energies[3] - topo.energies[2]).abs();
        let closest = triv.energies[..5]
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let a11 = (
            split < 1e-3 && closest >= 1e-3,
            format!("topological |e3 - e2| = {split:.2e}; trivial smallest spacing among lowest 5 = {closest:.2e}"),
        );

        // A12
        let mut a12_ok = true;
        let mut tops = Vec::new();
        let entries = [
            (Phase::Topological, 0.1, &topo.configs[0], &topo.configs[1]),
            (Phase::Trivial, 0.1, &triv.configs[0], &triv.configs[1]),
        ];
        let entries_02: Vec<_> = configs_02
            .iter()
            .map(|(p, c0, c2)| (*p, 0.2, c0, c2))
            .collect();
        for (phase, u, c0, c2) in entries.into_iter().chain(entries_02) {
            let top0 = c0
                .top()
                .map(|e| e.configurations.clone())
                .unwrap_or_default();
            let neel = !top0.is_empty() && top0.iter().all(|c| is_neel(c));
            a12_ok &= neel;
            let mut line = format!("{phase:?} U={u}: u0 {}", top0.join("/"));
            if phase == Phase::Topological {
                let top2 = c2
                    .top()
                    .map(|e| e.configurations.clone())
                    .unwrap_or_default();
                let edge = !top2.is_empty() && top2.iter().all(|c| has_edge_doublon_holon(c));
                if u == 0.1 {
                    a12_ok &= edge;
                }
                line.push_str(&format!(", u2 {}", top2.join("/")));
            }
            tops.push(line);
        }
        let a12 = (a12_ok, tops.join("; "));

        // A13
        let gaps = scan.lowest_allowed_gaps();
        let plateau: Vec<f64> = scan
            .points
            .iter()
            .map(|p| p.spectrum.mean_log10(5.0, 15.0))
            .collect();
        let gaps_ok = gaps.iter().all(|(_, g)| g.is_some())
            && gaps
                .windows(2)
                .all(|w| w[1].1.unwrap_or(0.0) >= w[0].1.unwrap_or(f64::INFINITY));
        let plateau_ok = plateau.windows(2).all(|w| w[1] <= w[0]);
        let a13 = (
            scan.missing.is_empty() && scan.points.len() == 11 && gaps_ok && plateau_ok,
            format!(
                "U = 0..0.2 ({SCAN_STATES} states): gaps [{}]; plateau [{}]{}",
                gaps.iter()
                    .map(|(_, g)| g.map_or("-".into(), |g| format!("{g:.2}")))
                    .collect::<Vec<_>>()
                    .join(", "),
                plateau
                    .iter()
                    .map(|p| format!("{p:.2}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                if scan.missing.is_empty() {
                    String::new()
                } else {
                    format!("; missing {:?}", scan.missing)
                }
            ),
        );

        let drift = out.max_drift;
        out.report(
            "A5",
            drift <= 1e-8,
            format!("largest | ||b||^2 - 1 | over every propagation = {drift:.2e}"),
        );
        for (id, (pass, detail)) in [
            ("A6", a6),
            ("A7", a7),
            ("A8", a8),
            ("A9", a9),
            ("A10", a10),
            ("A11", a11),
            ("A12", a12),
            ("A13", a13),
        ] {
            out.report(id, pass, detail);
        }
    }
    progress(&format!("finished in {:.0?}", started.elapsed()));
    Ok(out)
}

fn main() {
    match run() {
        Ok(out) => {
            println!(
                "acceptance: {} of 13 criteria passed{}",
                13 - out.failed.len(),
                if out.failed.is_empty() {
                    String::new()
                } else {
                    format!("; failed {}", out.failed.join(", "))
                }
            );
            if !out.failed.is_empty() && std::env::var_os("SSHHUB_ACCEPTANCE_STRICT").is_some() {
                std::process::exit(1);
            }
        }
        Err(e) => {
            eprintln!("acceptance suite aborted: {e}");
            std::process::exit(2);
        }
    }
}
