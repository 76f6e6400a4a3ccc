//! Agglomerative clustering of sign instances, inconsistency coefficients and
//! the adaptive dendrogram cut.

use serde::{Deserialize, Serialize};

use super::KbError;
use crate::keyframe::{euclidean, KeyframeMatrix};

/// Linkage criterion for merging clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Linkage {
    Average,
    Single,
    Complete,
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "average" => Some(Linkage::Average),
            "single" => Some(Linkage::Single),
            "complete" => Some(Linkage::Complete),
            _ => None,
        }
    }
}

/// Which maximum the cut threshold starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Largest coefficient over all links.
    #[default]
    GlobalMax,
    /// Coefficient of the final (root) merge.
    RootLink,
}

impl ThresholdMode {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdMode::GlobalMax => "global-max",
            ThresholdMode::RootLink => "root-link",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "global-max" => Some(ThresholdMode::GlobalMax),
            "root-link" => Some(ThresholdMode::RootLink),
            _ => None,
        }
    }
}

/// One merge. Node ids `0..n` are leaves; link `i` creates node `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub links: Vec<Link>,
}

impl Dendrogram {
    fn leaves_under(&self, node: usize, out: &mut Vec<usize>) {
        if node < self.n_leaves {
            out.push(node);
        } else {
            let l = &self.links[node - self.n_leaves];
            self.leaves_under(l.left, out);
            self.leaves_under(l.right, out);
        }
    }
}

/// Mean over key-frame positions of the Euclidean distance between
/// corresponding rows.
pub fn instance_distance(a: &KeyframeMatrix, b: &KeyframeMatrix) -> Result<f64, KbError> {
    if a.k() != b.k() {
        return Err(KbError::KMismatch { expected: a.k(), found: b.k() });
    }
    if a.k() == 0 {
        return Ok(0.0);
    }
    let total: f64 = a.rows.iter().zip(&b.rows).map(|(x, y)| euclidean(x, y)).sum();
    Ok(total / a.k() as f64)
}

pub fn distance_matrix(instances: &[&KeyframeMatrix]) -> Result<Vec<Vec<f64>>, KbError> {
    let n = instances.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = instance_distance(instances[i], instances[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

pub fn linkage(instances: &[&KeyframeMatrix], method: Linkage) -> Result<Dendrogram, KbError> {
    linkage_from_distances(&distance_matrix(instances)?, method)
}

/// Agglomerates from a symmetric distance matrix. At each step the closest
/// pair of active clusters merges; equal distances go to the pair with the
/// smallest slot indices. Cluster distances follow the Lance-Williams update.
pub fn linkage_from_distances(dist: &[Vec<f64>], method: Linkage) -> Result<Dendrogram, KbError> {
    let n = dist.len();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut links: Vec<Link> = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if best.is_none_or(|(_, _, h)| d[i][j] < h) {
                    best = Some((i, j, d[i][j]));
                }
            }
        }
        let (a, b, mut height) = best.expect("two active clusters remain");
        if let Some(prev) = links.last().map(|l| l.height) {
            if height < prev {
                if prev - height > 1e-9 * prev.abs().max(1.0) {
                    return Err(KbError::NonMonotone { step, previous: prev, height });
                }
                height = prev;
            }
        }
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in (0..n).filter(|&k| active[k] && k != a && k != b) {
            let v = match method {
                Linkage::Average => (na * d[a][k] + nb * d[b][k]) / (na + nb),
                Linkage::Single => d[a][k].min(d[b][k]),
                Linkage::Complete => d[a][k].max(d[b][k]),
            };
            d[a][k] = v;
            d[k][a] = v;
        }
        links.push(Link { left: node_id[a], right: node_id[b], height, size: size[a] + size[b] });
        size[a] += size[b];
        node_id[a] = n + step;
        active[b] = false;
    }
    Ok(Dendrogram { n_leaves: n, links })
}

/// Inconsistency coefficient of every link: `(h - mean) / std` over the
/// heights of the link and the links up to `depth - 1` levels beneath it,
/// using the sample standard deviation. Zero when fewer than two heights are
/// gathered or they do not vary.
pub fn inconsistency(d: &Dendrogram, depth: usize) -> Result<Vec<f64>, KbError> {
    if depth < 1 {
        return Err(KbError::InvalidDepth(depth));
    }
    let n = d.n_leaves;
    let mut coeffs = Vec::with_capacity(d.links.len());
    let mut heights = Vec::new();
    let mut stack = Vec::new();
    for (i, link) in d.links.iter().enumerate() {
        heights.clear();
        stack.push((i, 1));
        while let Some((li, level)) = stack.pop() {
            let l = &d.links[li];
            heights.push(l.height);
            if level < depth {
                for child in [l.left, l.right] {
                    if child >= n {
                        stack.push((child - n, level + 1));
                    }
                }
            }
        }
        let m = heights.len() as f64;
        let coeff = if heights.len() < 2 {
            0.0
        } else {
            let mean = heights.iter().sum::<f64>() / m;
            let var = heights.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / (m - 1.0);
            let std = var.sqrt();
            if std > 0.0 {
                (link.height - mean) / std
            } else {
                0.0
            }
        };
        coeffs.push(coeff);
    }
    Ok(coeffs)
}

/// Adaptive cut threshold `max − δ·γ`, where γ is the population standard
/// deviation of the non-zero coefficients (0 when fewer than two).
pub fn cut_threshold(coeffs: &[f64], delta: f64, mode: ThresholdMode) -> Result<f64, KbError> {
    validate_delta(delta)?;
    let top = match mode {
        ThresholdMode::GlobalMax => coeffs.iter().copied().reduce(f64::max),
        ThresholdMode::RootLink => coeffs.last().copied(),
    }
    .ok_or(KbError::EmptyCoefficients)?;
    let nonzero: Vec<f64> = coeffs.iter().copied().filter(|c| *c != 0.0).collect();
    let gamma = if nonzero.len() < 2 {
        0.0
    } else {
        let m = nonzero.len() as f64;
        let mean = nonzero.iter().sum::<f64>() / m;
        (nonzero.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / m).sqrt()
    };
    Ok(top - delta * gamma)
}

pub fn validate_delta(delta: f64) -> Result<(), KbError> {
    if !(0.1..=1.0).contains(&delta) {
        return Err(KbError::InvalidDelta(delta));
    }
    Ok(())
}

/// Flat clusters: a merge is kept when its coefficient is `<= th` and every
/// merge beneath it is kept. Returns leaf sets ordered by smallest leaf.
pub fn cut(d: &Dendrogram, coeffs: &[f64], th: f64) -> Vec<Vec<usize>> {
    let n = d.n_leaves;
    if n == 0 {
        return Vec::new();
    }
    let mut accepted = vec![false; d.links.len()];
    for (i, l) in d.links.iter().enumerate() {
        let child_ok = |c: usize| c < n || accepted[c - n];
        accepted[i] = coeffs[i] <= th && child_ok(l.left) && child_ok(l.right);
    }
    let mut clusters = Vec::new();
    let root = if d.links.is_empty() { 0 } else { n + d.links.len() - 1 };
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node < n || accepted[node - n] {
            let mut leaves = Vec::new();
            d.leaves_under(node, &mut leaves);
            leaves.sort_unstable();
            clusters.push(leaves);
        } else {
            let l = &d.links[node - n];
            stack.push(l.left);
            stack.push(l.right);
        }
    }
    clusters.sort();
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::FEATURE_DIM;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn km(rows: Vec<[f64; FEATURE_DIM]>) -> KeyframeMatrix {
        KeyframeMatrix::from_rows(rows)
    }

    fn random_km(rng: &mut ChaCha8Rng, k: usize) -> KeyframeMatrix {
        km((0..k).map(|_| std::array::from_fn(|_| rng.random_range(-10.0..10.0))).collect())
    }

    /// Average linkage recomputed from scratch each step from the original
    /// pairwise distances of the member sets.
    fn naive_average_heights(dist: &[Vec<f64>]) -> Vec<f64> {
        let mut clusters: Vec<Vec<usize>> = (0..dist.len()).map(|i| vec![i]).collect();
        let mut heights = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 1, f64::INFINITY);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut s = 0.0;
                    for &a in &clusters[i] {
                        for &b in &clusters[j] {
                            s += dist[a][b];
                        }
                    }
                    let avg = s / (clusters[i].len() * clusters[j].len()) as f64;
                    if avg < best.2 {
                        best = (i, j, avg);
                    }
                }
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
            heights.push(best.2);
        }
        heights
    }

    #[test]
    fn instance_distance_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_km(&mut rng, 40);
        assert_eq!(instance_distance(&a, &a).unwrap(), 0.0);
        let shifted = km(a.rows.iter().map(|r| r.map(|v| v + 1.0)).collect());
        assert!((instance_distance(&a, &shifted).unwrap() - 7f64.sqrt()).abs() < 1e-12);

        let b = random_km(&mut rng, 40);
        let mut total = 0.0;
        for j in 0..40 {
            let mut sq = 0.0;
            for f in 0..FEATURE_DIM {
                sq += (a.rows[j][f] - b.rows[j][f]).powi(2);
            }
            total += sq.sqrt();
        }
        assert!((instance_distance(&a, &b).unwrap() - total / 40.0).abs() < 1e-12);
        assert!(matches!(instance_distance(&a, &random_km(&mut rng, 39)), Err(KbError::KMismatch { .. })));
    }

    #[test]
    fn single_instance_has_no_links() {
        let d = linkage_from_distances(&[vec![0.0]], Linkage::Average).unwrap();
        assert!(d.links.is_empty());
        assert_eq!(cut(&d, &[], 0.0), vec![vec![0]]);
    }

    #[test]
    fn forced_merge_order() {
        let dist = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]];
        let d = linkage_from_distances(&dist, Linkage::Average).unwrap();
        assert_eq!(d.links[0], Link { left: 0, right: 1, height: 1.0, size: 2 });
        assert_eq!(d.links[1], Link { left: 3, right: 2, height: 5.0, size: 3 });
    }

    #[test]
    fn average_linkage_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let inst: Vec<KeyframeMatrix> = (0..6).map(|_| random_km(&mut rng, 5)).collect();
            let refs: Vec<&KeyframeMatrix> = inst.iter().collect();
            let dist = distance_matrix(&refs).unwrap();
            let d = linkage(&refs, Linkage::Average).unwrap();
            let naive = naive_average_heights(&dist);
            assert_eq!(d.links.len(), 5);
            for (l, h) in d.links.iter().zip(&naive) {
                assert!((l.height - h).abs() < 1e-9, "{} vs {}", l.height, h);
            }
        }
    }

    /// 5 leaves, heights {1, 1, 1, 10}: ((0 1) 4) and (2 3) joined at 10.
    fn five_leaf() -> Dendrogram {
        Dendrogram {
            n_leaves: 5,
            links: vec![
                Link { left: 0, right: 1, height: 1.0, size: 2 },
                Link { left: 2, right: 3, height: 1.0, size: 2 },
                Link { left: 5, right: 4, height: 1.0, size: 3 },
                Link { left: 7, right: 6, height: 10.0, size: 5 },
            ],
        }
    }

    #[test]
    fn inconsistency_hand_computed() {
        // root gathers {10, 1, 1}: mean 4, sample std sqrt((36+9+9)/2) = sqrt(27)
        let c = inconsistency(&five_leaf(), 2).unwrap();
        assert_eq!(&c[..3], &[0.0, 0.0, 0.0]);
        assert!((c[3] - 6.0 / 27f64.sqrt()).abs() < 1e-12);
        // depth 3 adds link 0 below link 2: {10, 1, 1, 1}, mean 3.25,
        // std sqrt((6.75^2 + 3*2.25^2)/3) = sqrt(20.25)
        let c3 = inconsistency(&five_leaf(), 3).unwrap();
        assert!((c3[3] - 6.75 / 20.25f64.sqrt()).abs() < 1e-12);
        // depth 1 only sees the link itself
        assert_eq!(inconsistency(&five_leaf(), 1).unwrap(), vec![0.0; 4]);
        assert!(inconsistency(&five_leaf(), 0).is_err());
    }

    #[test]
    fn equal_heights_and_lone_link_give_zero() {
        let mut d = five_leaf();
        d.links[3].height = 1.0;
        assert_eq!(inconsistency(&d, 2).unwrap(), vec![0.0; 4]);
        let two = Dendrogram { n_leaves: 2, links: vec![Link { left: 0, right: 1, height: 3.0, size: 2 }] };
        assert_eq!(inconsistency(&two, 2).unwrap(), vec![0.0]);
    }

    #[test]
    fn threshold_arithmetic() {
        let gm = ThresholdMode::GlobalMax;
        assert_eq!(cut_threshold(&[0.0, 0.0, 0.0], 0.5, gm).unwrap(), 0.0);
        assert_eq!(cut_threshold(&[1.15], 0.5, gm).unwrap(), 1.15);
        assert!((cut_threshold(&[0.0, 0.8, 1.2], 1.0, gm).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(cut_threshold(&[], 0.5, gm), Err(KbError::EmptyCoefficients)));
        assert!(matches!(cut_threshold(&[1.0], 0.05, gm), Err(KbError::InvalidDelta(_))));
        // root-link mode reads the last coefficient
        assert!((cut_threshold(&[2.0, 0.5, 1.0], 1.0, ThresholdMode::RootLink).unwrap() - (1.0 - 14f64.sqrt() / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn cut_extremes() {
        let d = five_leaf();
        let c = inconsistency(&d, 2).unwrap();
        assert_eq!(cut(&d, &c, f64::INFINITY), vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(cut(&d, &c, 1.0), vec![vec![0, 1, 4], vec![2, 3]]);
        let positive = vec![0.5, 0.7, 0.9, 1.1];
        assert_eq!(cut(&d, &positive, 0.4), (0..5).map(|i| vec![i]).collect::<Vec<_>>());
        // a rejected child blocks every merge above it
        assert_eq!(cut(&d, &[0.0, 0.0, 5.0, 0.0], 1.0), vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn two_groups_cut_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut inst = Vec::new();
        for g in 0..2 {
            for _ in 0..5 {
                let base = g as f64 * 50.0;
                inst.push(km((0..10).map(|_| std::array::from_fn(|_| base + rng.random_range(0.0..1.0))).collect()));
            }
        }
        let refs: Vec<&KeyframeMatrix> = inst.iter().collect();
        let d = linkage(&refs, Linkage::Average).unwrap();
        let c = inconsistency(&d, 2).unwrap();
        let th = cut_threshold(&c, 0.5, ThresholdMode::GlobalMax).unwrap();
        assert_eq!(cut(&d, &c, th), vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
    }

    fn arb_dist() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..12).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(0.0f64..3.0, 2), n).prop_map(|pts| {
                let n = pts.len();
                let mut d = vec![vec![0.0; n]; n];
                for i in 0..n {
                    for j in 0..n {
                        d[i][j] = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
                    }
                }
                d
            })
        })
    }

    proptest! {
        #[test]
        fn cut_is_monotone_partition(dist in arb_dist(), method in prop_oneof![Just(Linkage::Average), Just(Linkage::Single), Just(Linkage::Complete)]) {
            let d = linkage_from_distances(&dist, method).unwrap();
            prop_assert_eq!(d.links.len(), dist.len() - 1);
            prop_assert!(d.links.windows(2).all(|w| w[0].height <= w[1].height));
            let c = inconsistency(&d, 2).unwrap();
            let mut ths: Vec<f64> = c.clone();
            ths.push(-1.0);
            ths.push(f64::INFINITY);
            ths.sort_by(f64::total_cmp);
            let mut last = usize::MAX;
            for th in ths {
                let cl = cut(&d, &c, th);
                let mut all: Vec<usize> = cl.iter().flatten().copied().collect();
                all.sort();
                prop_assert_eq!(all, (0..dist.len()).collect::<Vec<_>>());
                prop_assert!(cl.len() <= last);
                last = cl.len();
            }
            prop_assert_eq!(last, 1);
        }
    }
}
