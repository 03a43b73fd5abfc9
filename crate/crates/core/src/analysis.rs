//! Selection rules, few-level reduction, configuration reports and U scans.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::basis::{FockBasis, Word};
use crate::dynamics::TransitionMatrix;
use crate::eigen::EigenSolution;
use crate::error::{Error, Result};
use crate::spectrum::SpectrumResult;

/// Default relative cutoff on `|T_kj| / max |T|`.
pub const DEFAULT_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeState {
    pub id: usize,
    pub energy: f64,
    pub parity: Option<i8>,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllowedPair {
    /// Lower state.
    pub i: usize,
    /// Upper state.
    pub j: usize,
    /// Largest `|T|` between the clusters of `i` and `j`.
    pub magnitude: f64,
    /// `(e_j - e_i) / omega`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub omega: f64,
    pub threshold: f64,
    pub states: Vec<SchemeState>,
    pub pairs: Vec<AllowedPair>,
}

/// Cluster id per state of `tm`, from `sol` when it covers them, else
/// singletons.
fn cluster_ids(sol: &EigenSolution, n: usize) -> Vec<usize> {
    if sol.clusters.len() >= n {
        sol.clusters[..n].to_vec()
    } else {
        (0..n).collect()
    }
}

/// `max |T_ab|` over `a` in the cluster of `i` and `b` in the cluster of `j`.
fn cluster_magnitude(tm: &TransitionMatrix, clusters: &[usize], i: usize, j: usize) -> f64 {
    let mut best = 0.0f64;
    for (a, &ca) in clusters.iter().enumerate() {
        if ca != clusters[i] {
            continue;
        }
        for (b, &cb) in clusters.iter().enumerate() {
            if cb == clusters[j] {
                best = best.max(tm.elements[(a, b)].abs());
            }
        }
    }
    best
}

/// Pairs `(i, j)`, `i < j`, of distinct clusters whose coupling exceeds
/// `threshold * max |T|`. States of one cluster are never paired.
pub fn allowed_transitions(
    sol: &EigenSolution,
    tm: &TransitionMatrix,
    omega: f64,
    threshold: f64,
) -> Result<LevelScheme> {
    if !(omega > 0.0) || !(threshold >= 0.0) {
        return Err(Error::param(
            "omega must be positive and the threshold non-negative",
        ));
    }
    let n = tm.len();
    let clusters = cluster_ids(sol, n);
    let parities = sol.parities();
    let cut = threshold * tm.max_abs();
    let states = (0..n)
        .map(|id| SchemeState {
            id,
            energy: tm.energies[id],
            parity: parities.as_ref().and_then(|p| p.get(id).copied()),
            cluster: clusters[id],
        })
        .collect();
    let mut pairs = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if clusters[i] == clusters[j] {
                continue;
            }
            let magnitude = cluster_magnitude(tm, &clusters, i, j);
            if magnitude > cut {
                pairs.push(AllowedPair {
                    i,
                    j,
                    magnitude,
                    gap: (tm.energies[j] - tm.energies[i]) / omega,
                });
            }
        }
    }
    pairs.sort_by_key(|p| (p.i, p.j));
    Ok(LevelScheme {
        omega,
        threshold,
        states,
        pairs,
    })
}

impl LevelScheme {
    pub fn is_allowed(&self, i: usize, j: usize) -> bool {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.iter().any(|p| p.i == i && p.j == j)
    }

    /// States and pairs within `keep`, keeping the original ids.
    pub fn restrict(&self, keep: &[usize]) -> LevelScheme {
        LevelScheme {
            omega: self.omega,
            threshold: self.threshold,
            states: self
                .states
                .iter()
                .filter(|s| keep.contains(&s.id))
                .cloned()
                .collect(),
            pairs: self
                .pairs
                .iter()
                .filter(|p| keep.contains(&p.i) && keep.contains(&p.j))
                .cloned()
                .collect(),
        }
    }

    pub fn pair_set(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.i, p.j)).collect()
    }

    /// Smallest `(e_j - e_0) / omega` over states allowed from the ground state.
    pub fn lowest_allowed_gap(&self) -> Option<f64> {
        self.pairs
            .iter()
            .filter(|p| p.i == 0)
            .map(|p| p.gap)
            .min_by(f64::total_cmp)
    }

    /// `((e_j - e_0) / omega, allowed from 0)` for every excited state.
    pub fn overlay(&self, u: f64) -> Vec<OverlayDot> {
        let e0 = self.states.first().map_or(0.0, |s| s.energy);
        self.states
            .iter()
            .skip(1)
            .map(|s| OverlayDot {
                u,
                gap: (s.energy - e0) / self.omega,
                allowed: self.is_allowed(0, s.id),
            })
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Few-level model: `tm` restricted to `keep` (ascending, ground state
/// included).
pub fn reduce_levels(tm: &TransitionMatrix, keep: &[usize]) -> Result<TransitionMatrix> {
    if !keep.contains(&0) {
        return Err(Error::param(
            "the kept states must include the ground state 0",
        ));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    tm.restrict(&keep)
}

/// Parses `0,2,3` style state lists.
pub fn parse_state_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::param(format!("bad state id {s:?}")))
        })
        .collect()
}

/// Site symbols `u`, `d`, `2`, `0`, site 0 leftmost.
pub fn configuration_string(sites: usize, up: Word, dn: Word) -> String {
    (0..sites)
        .map(|s| match ((up >> s) & 1, (dn >> s) & 1) {
            (1, 1) => '2',
            (1, 0) => 'u',
            (0, 1) => 'd',
            _ => '0',
        })
        .collect()
}

fn spin_flipped(config: &str) -> String {
    config
        .chars()
        .map(|c| match c {
            'u' => 'd',
            'd' => 'u',
            c => c,
        })
        .collect()
}

/// Reflected, spin-flipped and both.
fn inversion_images(config: &str) -> [String; 3] {
    let reflected: String = config.chars().rev().collect();
    let flipped = spin_flipped(config);
    let both = spin_flipped(&reflected);
    [reflected, flipped, both]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationEntry {
    pub rank: usize,
    /// Configuration strings of equal weight related by inversion; the
    /// first one is the representative.
    pub configurations: Vec<String>,
    /// Weight of each listed configuration.
    pub weight: f64,
}

impl ConfigurationEntry {
    pub fn total_weight(&self) -> f64 {
        self.weight * self.configurations.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationReport {
    pub state: usize,
    pub entries: Vec<ConfigurationEntry>,
}

/// Weights tied within this are treated as equal.
const WEIGHT_TIE: f64 = 1e-10;

/// The `top_m` heaviest basis configurations of `v`, grouped with their
/// equal-weight inversion partners.
pub fn dominant_configurations(
    basis: &FockBasis,
    state: usize,
    v: &[f64],
    top_m: usize,
) -> Result<ConfigurationReport> {
    if top_m == 0 {
        return Err(Error::param("top_m must be at least 1"));
    }
    if v.len() != basis.dim() {
        return Err(Error::param(format!(
            "vector has length {} but the basis has dimension {}",
            v.len(),
            basis.dim()
        )));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| (v[b] * v[b]).total_cmp(&(v[a] * v[a])).then(a.cmp(&b)));
    let sites = basis.sites();
    let weight_of: HashMap<String, f64> = order
        .iter()
        .take(4 * top_m + 8)
        .map(|&r| {
            let (u, d) = basis.words(r);
            (configuration_string(sites, u, d), v[r] * v[r])
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::new();
    let mut listed = 0;
    for &r in &order {
        if listed >= top_m {
            break;
        }
        let (u, d) = basis.words(r);
        let config = configuration_string(sites, u, d);
        if seen.contains(&config) {
            continue;
        }
        let weight = v[r] * v[r];
        let mut group = vec![config.clone()];
        for image in inversion_images(&config) {
            if group.contains(&image) {
                continue;
            }
            let w = match weight_of.get(&image) {
                Some(&w) => w,
                None => {
                    let (iu, id) = parse_configuration(&image);
                    basis.index_of(iu, id).map_or(0.0, |k| v[k] * v[k])
                }
            };
            if (w - weight).abs() <= WEIGHT_TIE {
                group.push(image);
            }
        }
        listed += group.len();
        seen.extend(group.iter().cloned());
        entries.push(ConfigurationEntry {
            rank: entries.len() + 1,
            configurations: group,
            weight,
        });
    }
    Ok(ConfigurationReport { state, entries })
}

/// Inverse of [`configuration_string`].
pub fn parse_configuration(config: &str) -> (Word, Word) {
    let (mut up, mut dn) = (0, 0);
    for (s, c) in config.chars().enumerate() {
        if matches!(c, 'u' | '2') {
            up |= 1 << s;
        }
        if matches!(c, 'd' | '2') {
            dn |= 1 << s;
        }
    }
    (up, dn)
}

impl ConfigurationReport {
    pub fn top(&self) -> Option<&ConfigurationEntry> {
        self.entries.first()
    }

    pub fn to_table(&self) -> String {
        let shown: Vec<String> = self
            .entries
            .iter()
            .map(|e| e.configurations.join(" / "))
            .collect();
        let width = shown
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("configuration".len());
        let mut s = String::new();
        let _ = writeln!(s, "# state {}", self.state);
        let _ = writeln!(s, "{:>4}  {:<width$}  weight", "rank", "configuration");
        for (e, config) in self.entries.iter().zip(&shown) {
            let _ = writeln!(s, "{:>4}  {:<width$}  {:.6e}", e.rank, config, e.weight);
        }
        s
    }
}

/// `||O psi||^2` for `O = sum_s f(s, up, dn)` with each term moving one
/// basis word pair to another.
fn squared_image_norm<F>(basis: &FockBasis, v: &[f64], term: F) -> Result<f64>
where
    F: Fn(usize, Word, Word) -> Option<(Word, Word, f64)>,
{
    if basis.up.particles() != basis.dn.particles() || 2 * basis.up.particles() != basis.sites() {
        return Err(Error::param(
            "spin and pseudospin need a half-filled S_z = 0 space",
        ));
    }
    if v.len() != basis.dim() {
        return Err(Error::param("vector length does not match the basis"));
    }
    let mut image: HashMap<(Word, Word), f64> = HashMap::new();
    for (r, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let (u, d) = basis.words(r);
        for s in 0..basis.sites() {
            if let Some((u2, d2, sign)) = term(s, u, d) {
                *image.entry((u2, d2)).or_insert(0.0) += sign * a;
            }
        }
    }
    Ok(image.values().map(|x| x * x).sum())
}

fn jw_sign(count: usize) -> f64 {
    if count.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `<S^2>` of a real half-filled state with `S_z = 0`, as `||S_+ psi||^2`.
pub fn total_spin_squared(basis: &FockBasis, v: &[f64]) -> Result<f64> {
    let n_up = basis.up.particles();
    squared_image_norm(basis, v, |s, u, d| {
        let bit: Word = 1 << s;
        if d & bit == 0 || u & bit != 0 {
            return None;
        }
        let below = bit - 1;
        // annihilate the down electron, then create the up one
        let count = n_up + (d & below).count_ones() as usize + (u & below).count_ones() as usize;
        Some((u | bit, d & !bit, jw_sign(count)))
    })
}

/// `<eta^2>` of a real half-filled state (`eta_z = 0`), as
/// `||eta_+ psi||^2` with `eta_+ = sum_s (-1)^s c+_{s up} c+_{s down}`.
pub fn total_pseudospin_squared(basis: &FockBasis, v: &[f64]) -> Result<f64> {
    let n_up = basis.up.particles();
    squared_image_norm(basis, v, |s, u, d| {
        let bit: Word = 1 << s;
        if d & bit != 0 || u & bit != 0 {
            return None;
        }
        let below = bit - 1;
        let count =
            s + n_up + (d & below).count_ones() as usize + (u & below).count_ones() as usize;
        Some((u | bit, d | bit, jw_sign(count)))
    })
}

/// `S` from `S (S + 1)`; also `eta` from `eta (eta + 1)`.
pub fn spin_from_s2(s2: f64) -> f64 {
    0.5 * ((1.0 + 4.0 * s2.max(0.0)).sqrt() - 1.0)
}

/// Disagreement between thresholded `|T|` and the symmetry prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleViolation {
    pub i: usize,
    pub j: usize,
    pub predicted: bool,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRuleCheck {
    pub pairs_checked: usize,
    pub violations: Vec<RuleViolation>,
}

/// Spin and pseudospin quantum numbers of one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinLabels {
    pub spin: f64,
    pub pseudospin: f64,
}

impl SpinLabels {
    pub fn of(basis: &FockBasis, v: &[f64]) -> Result<Self> {
        Ok(Self {
            spin: spin_from_s2(total_spin_squared(basis, v)?),
            pseudospin: spin_from_s2(total_pseudospin_squared(basis, v)?),
        })
    }
}

/// Dipole selection rule: opposite reflection parity, equal remaining
/// characters, equal spin and pseudospin differing by one. The position
/// is a spin scalar and the `z` part of a pseudospin vector.
pub fn dipole_rule(ci: &[i8], cj: &[i8], li: SpinLabels, lj: SpinLabels) -> bool {
    ci[0] != cj[0]
        && ci[1..] == cj[1..]
        && (li.spin - lj.spin).abs() < 0.25
        && ((li.pseudospin - lj.pseudospin).abs() - 1.0).abs() < 0.25
}

/// Compares allowed pairs of `scheme` with [`dipole_rule`] over the first
/// `count` states.
pub fn check_selection_rules(
    sol: &EigenSolution,
    scheme: &LevelScheme,
    labels: &[SpinLabels],
    count: usize,
) -> Result<SelectionRuleCheck> {
    let count = count.min(scheme.states.len());
    if sol.characters.len() < count || sol.characters.iter().take(count).any(|c| c.is_empty()) {
        return Err(Error::param("states carry no reflection parity"));
    }
    if labels.len() < count {
        return Err(Error::param("missing spin labels"));
    }
    let mut checked = 0;
    let mut violations = Vec::new();
    for j in 0..count {
        for i in 0..j {
            if scheme.states[i].cluster == scheme.states[j].cluster {
                continue;
            }
            checked += 1;
            let predicted =
                dipole_rule(&sol.characters[i], &sol.characters[j], labels[i], labels[j]);
            let actual = scheme.is_allowed(i, j);
            if predicted != actual {
                let magnitude = scheme
                    .pairs
                    .iter()
                    .find(|p| p.i == i && p.j == j)
                    .map_or(0.0, |p| p.magnitude);
                violations.push(RuleViolation {
                    i,
                    j,
                    predicted,
                    magnitude,
                });
            }
        }
    }
    Ok(SelectionRuleCheck {
        pairs_checked: checked,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayDot {
    #[serde(rename = "U")]
    pub u: f64,
    pub gap: f64,
    pub allowed: bool,
}

/// One successful U-scan point.
#[derive(Debug, Clone, PartialEq)]
pub struct UScanPoint {
    pub u: f64,
    pub spectrum: SpectrumResult,
    pub overlay: Vec<OverlayDot>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UScan {
    pub points: Vec<UScanPoint>,
    /// `(U, error message)` of failed points.
    pub missing: Vec<(f64, String)>,
}

/// Runs `point` for every `U`, recording failures instead of stopping.
pub fn u_scan<F>(values: &[f64], mut point: F) -> Result<UScan>
where
    F: FnMut(f64) -> Result<(SpectrumResult, Vec<OverlayDot>)>,
{
    if values.is_empty() {
        return Err(Error::param("the U grid is empty"));
    }
    let mut scan = UScan::default();
    for &u in values {
        match point(u) {
            Ok((spectrum, overlay)) => scan.points.push(UScanPoint {
                u,
                spectrum,
                overlay,
            }),
            Err(e) => scan.missing.push((u, e.to_string())),
        }
    }
    Ok(scan)
}

/// `start, start + step, ..., stop` with `stop` included up to rounding.
pub fn u_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::param("U grid needs step > 0 and stop >= start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

impl UScan {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "U,harmonic_order,log10_yield")?;
        for p in &self.points {
            for (o, l) in p
                .spectrum
                .harmonic_order
                .iter()
                .zip(&p.spectrum.log10_yield)
            {
                writeln!(out, "{},{o:.10e},{l:.10e}", p.u)?;
            }
        }
        Ok(())
    }

    pub fn write_overlay_json<W: Write>(&self, out: W) -> Result<()> {
        let dots: Vec<&OverlayDot> = self.points.iter().flat_map(|p| &p.overlay).collect();
        serde_json::to_writer_pretty(out, &dots)?;
        Ok(())
    }

    pub fn lowest_allowed_gaps(&self) -> Vec<(f64, Option<f64>)> {
        self.points
            .iter()
            .map(|p| {
                let gap = p
                    .overlay
                    .iter()
                    .filter(|d| d.allowed)
                    .map(|d| d.gap)
                    .min_by(f64::total_cmp);
                (p.u, gap)
            })
            .collect()
    }
}
