//! Hybrid ternary/sparsifier compression and its group planner.
//!
//! Coordinates are sorted by decreasing magnitude and partitioned into `k`
//! ternary groups plus a sparsified residue. A group is led by an *anchor*
//! `q` (its largest magnitude, sent as a float); every other member `j`
//! is sent as a ternary symbol against `|z_q|`, which is admissible when
//!
//! ```text
//! |z_j| (|z_q| − |z_j|) < z_j² / C
//! ```
//!
//! so its ternary noise stays below `z_j²/C`. The residue is sparsified with
//! `p ≥ C/(C+1)`, whose per-coordinate noise `(1/p − 1) z_j²` obeys the same
//! bound. Together `E‖ε‖² ≤ ‖z‖²/C`.
//!
//! Choosing the groups to minimize the bit cost is an integer program.
//! [`hybrid_plan`] is the greedy heuristic; [`brute_force_plan`] enumerates
//! every admissible grouping for small `d` and serves as its oracle.

use rand::Rng;

use super::{Anchor, CompressError, CompressedMessage, HybridLayout, Scheme};
use crate::codec::CostModel;

/// Largest dimension [`brute_force_plan`] accepts.
pub const BRUTE_FORCE_MAX_DIM: usize = 12;

/// A grouping of one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPlan {
    pub dim: usize,
    /// SNR floor the plan was built for.
    pub c: f64,
    /// Residue keep-probability.
    pub p: f64,
    /// Anchor coordinates (original indices), one per group, in the order the
    /// groups were formed.
    pub anchors: Vec<usize>,
    /// Group members (original indices, anchor first, then by decreasing
    /// magnitude).
    pub groups: Vec<Vec<usize>>,
    /// Sparsified residue (original indices, ascending).
    pub sparsified: Vec<usize>,
    /// Expected bit cost of the plan under the cost model it was built with.
    pub objective_bits: f64,
    /// Elementary operations spent by the planner (sort comparisons excluded;
    /// see [`HybridPlan::sort_steps`]).
    pub steps: u64,
    /// `d ⌈log₂ d⌉`, the comparison budget charged for the initial sort.
    pub sort_steps: u64,
    checksum: u64,
}

impl HybridPlan {
    pub fn k(&self) -> usize {
        self.anchors.len()
    }

    /// `Σ s_i`, the number of coordinates in ternary groups.
    pub fn covered(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// True when the plan was computed for a vector with the same sorted
    /// magnitudes as `z`.
    pub fn matches(&self, z: &[f64]) -> bool {
        z.len() == self.dim && magnitude_checksum(z) == self.checksum
    }

    /// Per-coordinate group tags, 0 for the residue.
    pub fn tags(&self) -> Vec<usize> {
        let mut tags = vec![0; self.dim];
        for (g, members) in self.groups.iter().enumerate() {
            for &j in members {
                tags[j] = g + 1;
            }
        }
        tags
    }

    /// Analytic noise power `Σ_groups |z_j|(|z_q| − |z_j|) + (1/p − 1) Σ_residue z_j²`.
    pub fn noise_power(&self, z: &[f64]) -> f64 {
        let mut total = 0.0;
        for (q, members) in self.anchors.iter().zip(&self.groups) {
            let a = z[*q].abs();
            total += members.iter().map(|&j| z[j].abs() * (a - z[j].abs())).sum::<f64>();
        }
        total + (1.0 / self.p - 1.0) * self.sparsified.iter().map(|&j| z[j] * z[j]).sum::<f64>()
    }
}

/// `|z_k| (|z_j| − |z_k|) < z_k² / C`, evaluated literally.
#[inline]
pub(crate) fn admissible(anchor: f64, member: f64, c: f64) -> bool {
    member * (anchor - member) < member * member / c
}

fn sorted_by_magnitude(z: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    order
}

fn magnitude_checksum(z: &[f64]) -> u64 {
    // FNV-1a over the sorted magnitude bit patterns.
    let mut mags: Vec<u64> = z.iter().map(|v| v.abs().to_bits()).collect();
    mags.sort_unstable();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for m in mags {
        for b in m.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn ceil_log2(d: usize) -> u64 {
    if d <= 1 {
        0
    } else {
        (usize::BITS - (d - 1).leading_zeros()) as u64
    }
}

/// Greedy group planner with the residue probability at `C/(C+1)`.
pub fn hybrid_plan(z: &[f64], c: f64, model: &CostModel) -> HybridPlan {
    plan_with_p(z, c, c / (c + 1.0), model)
}

/// Greedy group planner.
///
/// Each round scans the unassigned coordinates in decreasing magnitude and,
/// for each candidate anchor `j`, finds the admissible set
/// `S_j = {k : |z_k| ≤ |z_j|, |z_k|(|z_j| − |z_k|) < z_k²/C}`. That set is a
/// contiguous run of the sorted order, so a two-pointer sweep finds every
/// `|S_j|` in one linear pass. The largest set wins (ties go to the larger
/// `|z_j|`, then the earlier sorted position) and is accepted as a group if
/// `c1 + c0t (s − 1)` beats the sparsifier cost of the same `s` elements;
/// otherwise the loop stops.
///
/// The acceptance test is local and ignores that every additional group can
/// widen the `⌈log₂(k+1)⌉` tag of all symbols, so the returned plan keeps the
/// prefix of accepted groups with the lowest total objective.
pub fn plan_with_p(z: &[f64], c: f64, p: f64, model: &CostModel) -> HybridPlan {
    let d = z.len();
    let mag: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let order = sorted_by_magnitude(z);
    let mut remaining = order.clone();
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut steps = 0u64;

    loop {
        let m = remaining.len();
        let (mut best_size, mut best) = (0usize, (0usize, 0usize, 0usize));
        let (mut start, mut end) = (0usize, 0usize);
        for jpos in 0..m {
            let aj = mag[remaining[jpos]];
            steps += 1;
            while start < m && mag[remaining[start]] > aj {
                start += 1;
                steps += 1;
            }
            end = end.max(start);
            while end < m && admissible(aj, mag[remaining[end]], c) {
                end += 1;
                steps += 1;
            }
            if end - start > best_size {
                best_size = end - start;
                best = (jpos, start, end);
            }
        }
        if best_size == 0 {
            break;
        }
        let s = best_size;
        if model.greedy_group_cost(s) >= model.greedy_sparse_cost(s, p) {
            break;
        }
        let (jpos, lo, hi) = best;
        let anchor = remaining[jpos];
        let mut members = vec![anchor];
        members.extend(remaining[lo..hi].iter().copied().filter(|&i| i != anchor));
        groups.push((anchor, members));
        remaining.drain(lo..hi);
        steps += m as u64;
    }

    // Best prefix of the accepted group sequence under the full objective.
    let mut best_k = 0;
    let mut best_obj = model.hybrid_expected(d, 0, 0, p);
    let mut covered = 0;
    for (k, (_, members)) in groups.iter().enumerate() {
        covered += members.len();
        let obj = model.hybrid_expected(d, k + 1, covered, p);
        if obj < best_obj {
            best_obj = obj;
            best_k = k + 1;
        }
    }
    groups.truncate(best_k);
    build(z, c, p, groups, best_obj, steps, ceil_log2(d) * d as u64)
}

fn build(
    z: &[f64],
    c: f64,
    p: f64,
    groups: Vec<(usize, Vec<usize>)>,
    objective_bits: f64,
    steps: u64,
    sort_steps: u64,
) -> HybridPlan {
    let d = z.len();
    let mut grouped = vec![false; d];
    for (_, members) in &groups {
        for &j in members {
            grouped[j] = true;
        }
    }
    let (anchors, groups): (Vec<usize>, Vec<Vec<usize>>) = groups.into_iter().unzip();
    HybridPlan {
        dim: d,
        c,
        p,
        anchors,
        groups,
        sparsified: (0..d).filter(|&j| !grouped[j]).collect(),
        objective_bits,
        steps,
        sort_steps,
        checksum: magnitude_checksum(z),
    }
}

/// Exhaustive minimizer of the hybrid objective over every admissible
/// grouping, for `d ≤ 12`.
///
/// Coordinates are visited in decreasing magnitude; each one joins the
/// residue, joins an open group whose anchor admits it, or opens a new group
/// as its anchor. Each grouping is generated exactly once.
pub fn brute_force_plan(z: &[f64], c: f64, model: &CostModel) -> Result<HybridPlan, CompressError> {
    if z.len() > BRUTE_FORCE_MAX_DIM {
        return Err(CompressError::TooLarge { d: z.len(), max: BRUTE_FORCE_MAX_DIM });
    }
    let p = c / (c + 1.0);
    let order = sorted_by_magnitude(z);
    let mag: Vec<f64> = order.iter().map(|&i| z[i].abs()).collect();

    struct Search<'a> {
        mag: &'a [f64],
        c: f64,
        p: f64,
        model: &'a CostModel,
        label: Vec<usize>,
        anchors: Vec<usize>,
        best: (f64, Vec<usize>, usize),
    }

    impl Search<'_> {
        fn visit(&mut self, pos: usize, covered: usize) {
            let d = self.mag.len();
            if pos == d {
                let k = self.anchors.len();
                let obj = self.model.hybrid_expected(d, k, covered, self.p);
                if obj < self.best.0 {
                    self.best = (obj, self.label.clone(), k);
                }
                return;
            }
            self.label[pos] = 0;
            self.visit(pos + 1, covered);
            for g in 0..self.anchors.len() {
                if admissible(self.mag[self.anchors[g]], self.mag[pos], self.c) {
                    self.label[pos] = g + 1;
                    self.visit(pos + 1, covered + 1);
                }
            }
            if self.mag[pos] > 0.0 {
                self.anchors.push(pos);
                self.label[pos] = self.anchors.len();
                self.visit(pos + 1, covered + 1);
                self.anchors.pop();
            }
            self.label[pos] = 0;
        }
    }

    let d = z.len();
    let mut search =
        Search { mag: &mag, c, p, model, label: vec![0; d], anchors: Vec::new(), best: (f64::INFINITY, vec![0; d], 0) };
    search.visit(0, 0);
    let (objective, labels, k) = search.best;

    let mut groups: Vec<(usize, Vec<usize>)> = Vec::with_capacity(k);
    for (pos, &g) in labels.iter().enumerate() {
        if g == 0 {
            continue;
        }
        if g > groups.len() {
            groups.push((order[pos], Vec::new()));
        }
        groups[g - 1].1.push(order[pos]);
    }
    Ok(build(z, c, p, groups, objective, 0, 0))
}

/// One draw of the hybrid compressor under `plan`. Group members are sent as
/// `sign(z_j) |z_q|` with probability `|z_j|/|z_q|` (the anchor itself with
/// probability 1), residue coordinates as `z_j/p` with probability `p`.
pub(crate) fn realize<R: Rng + ?Sized>(
    plan: &HybridPlan,
    z: &[f64],
    rng: &mut R,
    model: &CostModel,
) -> CompressedMessage {
    let tags = plan.tags();
    let anchors: Vec<Anchor> =
        plan.anchors.iter().map(|&q| Anchor { index: q, magnitude: model.wire.round(z[q].abs()) }).collect();
    let decoded = z
        .iter()
        .zip(&tags)
        .map(|(&v, &g)| {
            let u: f64 = rng.random();
            if g > 0 {
                let a = z[plan.anchors[g - 1]].abs();
                if u < v.abs() / a {
                    anchors[g - 1].magnitude.copysign(v)
                } else {
                    0.0
                }
            } else {
                super::sparsify(v, plan.p, u, model.wire)
            }
        })
        .collect();
    CompressedMessage::finish(Scheme::Hybrid, decoded, Some(HybridLayout { anchors, tags }), Some(plan.clone()), model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = aux_stream(seed, 99);
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn check_invariants(plan: &HybridPlan, z: &[f64]) {
        let mut seen = vec![0; z.len()];
        for (q, members) in plan.anchors.iter().zip(&plan.groups) {
            assert_eq!(members[0], *q);
            for &j in members {
                seen[j] += 1;
                assert!(z[j].abs() <= z[*q].abs());
                if j != *q {
                    assert!(admissible(z[*q].abs(), z[j].abs(), plan.c), "membership at {j}");
                }
            }
        }
        for &j in &plan.sparsified {
            seen[j] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1), "partition: {seen:?}");
    }

    #[test]
    fn equal_magnitudes_form_one_group() {
        let z = [1.5, -1.5, 1.5, 1.5, -1.5, 1.5];
        let plan = hybrid_plan(&z, 2.0, &CostModel::default());
        assert_eq!(plan.k(), 1);
        assert_eq!(plan.covered(), 6);
        assert_eq!(plan.noise_power(&z), 0.0);
        check_invariants(&plan, &z);
    }

    #[test]
    fn huge_snr_bound_leaves_everything_sparsified() {
        let z = gaussian(40, 1);
        let plan = hybrid_plan(&z, 1e6, &CostModel::default());
        assert_eq!(plan.k(), 0);
        assert_eq!(plan.sparsified.len(), 40);
    }

    #[test]
    fn zero_vector_plan() {
        let plan = hybrid_plan(&[0.0; 7], 1.0, &CostModel::default());
        assert_eq!(plan.k(), 0);
        assert_eq!(plan.sparsified, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn zeros_are_always_sparsified() {
        let z = [2.0, 0.0, 1.9, 0.0, 1.95];
        let plan = hybrid_plan(&z, 1.0, &CostModel::default());
        assert!(plan.sparsified.contains(&1) && plan.sparsified.contains(&3));
        let brute = brute_force_plan(&z, 1.0, &CostModel::default()).unwrap();
        assert!(brute.sparsified.contains(&1) && brute.sparsified.contains(&3));
    }

    #[test]
    fn single_element_brute_force() {
        let m = CostModel::default();
        // Group: 32 floats + 0 symbols. Residue at p = 1/2: 16 + 2 * 0.5 = 17.
        let plan = brute_force_plan(&[0.7], 1.0, &m).unwrap();
        assert_eq!(plan.objective_bits, 17.0);
        assert_eq!(plan.k(), 0);
        // p close to 1 makes the group cheaper than the residue.
        let plan = brute_force_plan(&[0.7], 1e3, &m).unwrap();
        let p = 1e3 / 1001.0;
        assert_eq!(plan.objective_bits, (32.0f64).min(32.0 * p + 2.0 * (1.0 - p)));
    }

    #[test]
    fn equal_pair_enumeration() {
        // Partitions of [c, c]: residue only, one group of one + residue,
        // two singleton groups, one group of both.
        let m = CostModel::default();
        let p = 0.5;
        let candidates = [
            m.hybrid_expected(2, 0, 0, p),
            m.hybrid_expected(2, 1, 1, p),
            m.hybrid_expected(2, 2, 2, p),
            m.hybrid_expected(2, 1, 2, p),
        ];
        let min = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        let plan = brute_force_plan(&[0.4, -0.4], 1.0, &m).unwrap();
        assert_eq!(plan.objective_bits, min);
        // 32 + (2 + 1) < 2 (32 p + 2 (1 - p)) = 34
        assert_eq!(min, 35.0f64.min(34.0));
    }

    #[test]
    fn brute_force_refuses_large_inputs() {
        let z = vec![1.0; 13];
        assert_eq!(brute_force_plan(&z, 1.0, &CostModel::default()), Err(CompressError::TooLarge { d: 13, max: 12 }));
    }

    #[test]
    fn greedy_between_oracle_and_sparsifier() {
        let m = CostModel::default();
        for seed in 0..40 {
            for c in [1.0, 2.0] {
                let z = gaussian(7, seed);
                let g = hybrid_plan(&z, c, &m);
                let b = brute_force_plan(&z, c, &m).unwrap();
                check_invariants(&g, &z);
                check_invariants(&b, &z);
                let pure = m.hybrid_expected(7, 0, 0, c / (c + 1.0));
                assert!(b.objective_bits <= g.objective_bits + 1e-9);
                assert!(g.objective_bits <= pure + 1e-9);
                assert_eq!(b.objective_bits, m.hybrid_expected(7, b.k(), b.covered(), b.p));
            }
        }
    }

    #[test]
    fn plan_noise_respects_snr_bound() {
        for seed in 0..20 {
            let z = gaussian(50, seed);
            for c in [1.0, 2.0, 5.0] {
                let plan = hybrid_plan(&z, c, &CostModel::default());
                check_invariants(&plan, &z);
                let signal: f64 = z.iter().map(|v| v * v).sum();
                assert!(plan.noise_power(&z) <= signal / c * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn mismatched_vector_is_rejected() {
        let z = gaussian(10, 3);
        let plan = hybrid_plan(&z, 2.0, &CostModel::default());
        let mut rng = aux_stream(0, 0);
        let mut other = z.clone();
        other[4] += 0.5;
        assert_eq!(
            super::super::hybrid_compress(&plan, &other, &mut rng, &CostModel::default()),
            Err(CompressError::PlanMismatch)
        );
        assert!(super::super::hybrid_compress(&plan, &z, &mut rng, &CostModel::default()).is_ok());
    }

    #[test]
    fn anchors_are_sent_exactly() {
        let z = gaussian(30, 4);
        let m = CostModel::default().with_wire(crate::ValueWidth::F64);
        let plan = hybrid_plan(&z, 2.0, &m);
        assert!(plan.k() > 0);
        let mut rng = aux_stream(5, 0);
        for _ in 0..20 {
            let msg = super::super::hybrid_compress(&plan, &z, &mut rng, &m).unwrap();
            for (q, members) in plan.anchors.iter().zip(&plan.groups) {
                assert_eq!(msg.decoded[*q], z[*q]);
                for &j in &members[1..] {
                    let v = msg.decoded[j];
                    assert!(v == 0.0 || v.abs() == z[*q].abs());
                }
            }
        }
    }

    #[test]
    fn empty_plan_matches_sparsifier_draws() {
        let z = gaussian(25, 8);
        let m = CostModel::default().with_wire(crate::ValueWidth::F64);
        let plan = hybrid_plan(&z, 1e6, &m);
        assert_eq!(plan.k(), 0);
        let sparse = super::super::Compressor::new(super::super::CompressorSpec::Sparsifier { p: plan.p }, m).unwrap();
        let a = super::super::hybrid_compress(&plan, &z, &mut aux_stream(9, 1), &m).unwrap();
        let b = sparse.compress(&z, &mut aux_stream(9, 1)).unwrap();
        assert_eq!(a.decoded, b.decoded);
    }
}
