use crate::gaze::ImagePoint;

/// One-to-one assignment of predictions to ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(prediction index, ground-truth index, distance)`, sorted by
    /// prediction index.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Unmatched prediction indices.
    pub false_positives: Vec<usize>,
    /// Unmatched ground-truth indices.
    pub false_negatives: Vec<usize>,
    pub radius: f64,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Match predictions to ground truth within `radius`: the largest possible
/// number of pairs, and among those the smallest total distance.
pub fn match_points(pred: &[ImagePoint], gt: &[ImagePoint], radius: f64) -> MatchResult {
    let mut matched_pred = vec![None; pred.len()];

    // Solve each connected component of the "within radius" graph separately;
    // components are usually one or two points per side.
    for (ps, gs) in radius_components(pred, gt, radius) {
        if gs.is_empty() || ps.is_empty() {
            continue;
        }
        let n = ps.len().max(gs.len());
        let big = (ps.len().min(gs.len()) as f64 + 1.0) * (radius.abs() + 1.0);
        let mut cost = vec![vec![0.0; n]; n];
        for (r, &i) in ps.iter().enumerate() {
            for (c, &j) in gs.iter().enumerate() {
                let d = pred[i].distance(&gt[j]);
                if d <= radius {
                    cost[r][c] = d - big;
                }
            }
        }
        let assignment = hungarian(&cost);
        for (r, &c) in assignment.iter().enumerate() {
            if r < ps.len() && c < gs.len() && cost[r][c] < 0.0 {
                matched_pred[ps[r]] = Some(gs[c]);
            }
        }
    }

    let mut pairs = Vec::new();
    let mut false_positives = Vec::new();
    let mut gt_used = vec![false; gt.len()];
    for (i, m) in matched_pred.iter().enumerate() {
        match m {
            Some(j) => {
                gt_used[*j] = true;
                pairs.push((i, *j, pred[i].distance(&gt[*j])));
            }
            None => false_positives.push(i),
        }
    }
    let false_negatives = (0..gt.len()).filter(|&j| !gt_used[j]).collect();
    MatchResult {
        pairs,
        false_positives,
        false_negatives,
        radius,
    }
}

/// Connected components of the bipartite graph with an edge between every
/// prediction and ground truth no farther apart than `radius`.
fn radius_components(
    pred: &[ImagePoint],
    gt: &[ImagePoint],
    radius: f64,
) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = pred.len();
    let mut parent: Vec<usize> = (0..n + gt.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            if p.distance(g) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> =
        std::collections::BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().0.push(i);
    }
    for j in 0..gt.len() {
        let r = find(&mut parent, n + j);
        groups.entry(r).or_default().1.push(j);
    }
    groups.into_values().collect()
}

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// potentials). Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Best (cardinality, total distance) over every partial matching.
    pub(crate) fn exhaustive(pred: &[ImagePoint], gt: &[ImagePoint], radius: f64) -> (usize, f64) {
        #[allow(clippy::too_many_arguments)]
        fn go(
            i: usize,
            pred: &[ImagePoint],
            gt: &[ImagePoint],
            radius: f64,
            used: &mut Vec<bool>,
            card: usize,
            dist: f64,
            best: &mut (usize, f64),
        ) {
            if i == pred.len() {
                if card > best.0 || (card == best.0 && dist < best.1) {
                    *best = (card, dist);
                }
                return;
            }
            go(i + 1, pred, gt, radius, used, card, dist, best);
            for j in 0..gt.len() {
                let d = pred[i].distance(&gt[j]);
                if !used[j] && d <= radius {
                    used[j] = true;
                    go(i + 1, pred, gt, radius, used, card + 1, dist + d, best);
                    used[j] = false;
                }
            }
        }
        let mut best = (0, 0.0);
        go(0, pred, gt, radius, &mut vec![false; gt.len()], 0, 0.0, &mut best);
        best
    }

    #[test]
    fn coincident_points_match() {
        let p = [ImagePoint::new(10.0, 10.0)];
        let m = match_points(&p, &p, 30.0);
        assert_eq!(m.tp(), 1);
        assert!(m.false_positives.is_empty() && m.false_negatives.is_empty());
    }

    #[test]
    fn out_of_radius_does_not_match() {
        let m = match_points(&[ImagePoint::new(50.0, 10.0)], &[ImagePoint::new(10.0, 10.0)], 30.0);
        assert_eq!(m.tp(), 0);
        assert_eq!(m.false_positives, vec![0]);
        assert_eq!(m.false_negatives, vec![0]);
    }

    #[test]
    fn nearest_prediction_wins() {
        let pred = [ImagePoint::new(0.0, 0.0), ImagePoint::new(10.0, 0.0)];
        let gt = [ImagePoint::new(6.0, 0.0)];
        let m = match_points(&pred, &gt, 10.0);
        assert_eq!(m.pairs, vec![(1, 0, 4.0)]);
        assert_eq!(m.false_positives, vec![0]);
    }

    #[test]
    fn cardinality_beats_distance() {
        // Greedy nearest pairing would match (5,0)-(6,0) and strand both ends.
        let pred = [ImagePoint::new(5.0, 0.0), ImagePoint::new(14.0, 0.0)];
        let gt = [ImagePoint::new(6.0, 0.0), ImagePoint::new(-4.0, 0.0)];
        let m = match_points(&pred, &gt, 10.0);
        assert_eq!(m.tp(), 2);
    }

    #[test]
    fn agrees_with_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let np = rng.random_range(0..=6);
            let ng = rng.random_range(0..=6);
            let pt = |rng: &mut ChaCha8Rng| ImagePoint::new(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0));
            let pred: Vec<_> = (0..np).map(|_| pt(&mut rng)).collect();
            let gt: Vec<_> = (0..ng).map(|_| pt(&mut rng)).collect();
            let m = match_points(&pred, &gt, 20.0);
            let (card, dist) = exhaustive(&pred, &gt, 20.0);
            assert_eq!(m.tp(), card);
            assert!((m.total_distance() - dist).abs() < 1e-9);
            assert!(m.pairs.iter().all(|p| p.2 <= 20.0));
        }
    }
}
