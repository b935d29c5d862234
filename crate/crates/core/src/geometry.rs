//! ∞-norm covers of point clouds, box-counting slopes, and the covering bound
//! for bounded network classes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest cloud handed to the exact minimal cover.
pub const EXACT_COVER_LIMIT: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.len();
            for p in &points {
                if p.len() != d {
                    return Err(Error::DimMismatch { expected: d, got: p.len() });
                }
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite("cloud coordinate".into()));
                }
            }
        }
        Ok(PointCloud { points, description: String::new(), seed: None })
    }

    pub fn with_meta(mut self, description: impl Into<String>, seed: Option<u64>) -> Self {
        self.description = description.into();
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One point per row, comma or whitespace separated; `#` starts a comment.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>();
            match row {
                Ok(r) => points.push(r),
                // a header line
                Err(_) if i == 0 && points.is_empty() => continue,
                Err(e) => return Err(Error::Schema(format!("line {}: {e}", i + 1))),
            }
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Either a full document or a bare array of points.
    pub fn from_json(text: &str) -> Result<Self> {
        if let Ok(doc) = serde_json::from_str::<PointCloud>(text) {
            let (desc, seed) = (doc.description.clone(), doc.seed);
            return Ok(Self::new(doc.points)?.with_meta(desc, seed));
        }
        let points: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::new(points)
    }
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMethod {
    Greedy,
    ExactSmall,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverReport {
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    pub count: usize,
    pub method: CoverMethod,
}

impl CoverReport {
    /// Every point lies within `eps` of some center.
    pub fn covers(&self, cloud: &PointCloud) -> bool {
        let tol = self.eps * (1.0 + 1e-12);
        cloud
            .points
            .iter()
            .all(|p| self.centers.iter().any(|c| linf(p, c) <= tol))
    }
}

/// Center of the bounding box of `pts`, clamped to stay within `eps` of `anchor`.
fn box_center(pts: &[&Vec<f64>], anchor: &[f64], eps: f64) -> Vec<f64> {
    (0..anchor.len())
        .map(|k| {
            let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
            (0.5 * (lo + hi)).clamp(anchor[k] - eps, anchor[k] + eps)
        })
        .collect()
}

/// Farthest-point greedy cover. Each new ball is anchored at the uncovered
/// point farthest from the existing centers and shifted toward the box
/// center of its uncovered `2ε`-neighbourhood.
pub fn greedy_cover(cloud: &PointCloud, eps: f64) -> Result<CoverReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("cover radius must be positive, got {eps}")));
    }
    let pts = &cloud.points;
    let mut nearest = vec![f64::INFINITY; pts.len()];
    let mut centers = Vec::new();
    loop {
        let mut pick = None;
        let mut far = eps;
        for (i, &d) in nearest.iter().enumerate() {
            if d > far {
                far = d;
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        let anchor = &pts[i];
        let near: Vec<&Vec<f64>> = pts
            .iter()
            .zip(&nearest)
            .filter(|(p, &d)| d > eps && linf(p, anchor) <= 2.0 * eps)
            .map(|(p, _)| p)
            .collect();
        let c = box_center(&near, anchor, eps);
        nearest
            .par_iter_mut()
            .zip(pts.par_iter())
            .for_each(|(d, p)| *d = d.min(linf(p, &c)));
        // the anchor is always covered, so this terminates
        nearest[i] = nearest[i].min(eps);
        centers.push(c);
    }
    Ok(CoverReport { eps, count: centers.len(), centers, method: CoverMethod::Greedy })
}

/// Minimal cover of a cloud of at most [`EXACT_COVER_LIMIT`] points. A set
/// fits in one ε-ball exactly when all its pairwise ∞-distances are ≤ 2ε, so
/// this is a minimum clique partition, solved by branch and bound.
pub fn exact_small_cover(cloud: &PointCloud, eps: f64) -> Result<CoverReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("cover radius must be positive, got {eps}")));
    }
    let n = cloud.len();
    if n > EXACT_COVER_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "exact cover limited to {EXACT_COVER_LIMIT} points, got {n}"
        )));
    }
    let pts = &cloud.points;
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && linf(&pts[i], &pts[j]) <= 2.0 * eps)
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();

    fn maximal_cliques(adj: &[u32], r: u32, mut p: u32, mut x: u32, out: &mut Vec<u32>) {
        if p == 0 {
            if x == 0 {
                out.push(r);
            }
            return;
        }
        while p != 0 {
            let v = p.trailing_zeros() as usize;
            maximal_cliques(adj, r | (1 << v), p & adj[v], x & adj[v], out);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }

    fn solve(adj: &[u32], rest: u32, used: &mut Vec<u32>, best: &mut Vec<u32>) {
        if rest == 0 {
            if used.len() < best.len() {
                *best = used.clone();
            }
            return;
        }
        if used.len() + 1 >= best.len() {
            return;
        }
        let p = rest.trailing_zeros() as usize;
        let mut cliques = Vec::new();
        maximal_cliques(adj, 1 << p, rest & adj[p] & !(1 << p), 0, &mut cliques);
        cliques.sort_by_key(|c| std::cmp::Reverse(c.count_ones()));
        for c in cliques {
            used.push(c);
            solve(adj, rest & !c, used, best);
            used.pop();
        }
    }

    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best: Vec<u32> = (0..n).map(|i| 1u32 << i).collect();
    best.push(0);
    let mut used = Vec::new();
    solve(&adj, full, &mut used, &mut best);
    best.retain(|&m| m != 0);
    let centers = best
        .iter()
        .map(|&m| {
            let group: Vec<&Vec<f64>> = (0..n).filter(|&j| m >> j & 1 == 1).map(|j| &pts[j]).collect();
            box_center(&group, group[0], eps)
        })
        .collect::<Vec<_>>();
    Ok(CoverReport { eps, count: centers.len(), centers, method: CoverMethod::ExactSmall })
}

/// Exact cover for tiny clouds, greedy otherwise.
pub fn cover(cloud: &PointCloud, eps: f64) -> Result<CoverReport> {
    if cloud.len() <= EXACT_COVER_LIMIT {
        exact_small_cover(cloud, eps)
    } else {
        greedy_cover(cloud, eps)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub eps: Vec<f64>,
    pub counts: Vec<usize>,
    /// Indices into `eps` that entered the fit.
    pub used: Vec<usize>,
    pub residuals: Vec<f64>,
}

/// Least-squares `(slope, intercept, residuals)` of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let res = x.iter().zip(y).map(|(a, b)| b - (icpt + slope * a)).collect();
    (slope, icpt, res)
}

/// Slope of `log N(ε)` against `log(1/ε)` over the grid. Scales where the
/// count exceeds half the sample size are resolution-limited and dropped,
/// as long as three scales remain.
pub fn minkowski_slope(cloud: &PointCloud, eps_grid: &[f64]) -> Result<SlopeFit> {
    if eps_grid.len() < 4 || eps_grid.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("need at least 4 positive scales".into()));
    }
    let lo = eps_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps_grid.iter().cloned().fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 {
        return Err(Error::InvalidArgument("scales must span at least 1.5 decades".into()));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("empty cloud".into()));
    }
    let counts: Vec<usize> = eps_grid
        .par_iter()
        .map(|&e| greedy_cover(cloud, e).map(|r| r.count))
        .collect::<Result<_>>()?;
    let limit = cloud.len() / 2;
    let mut used: Vec<usize> = (0..eps_grid.len()).filter(|&i| counts[i] <= limit.max(1)).collect();
    if used.len() < 3 {
        used = (0..eps_grid.len()).collect();
    }
    let x: Vec<f64> = used.iter().map(|&i| (1.0 / eps_grid[i]).ln()).collect();
    let y: Vec<f64> = used.iter().map(|&i| (counts[i] as f64).ln()).collect();
    let (slope, intercept, residuals) = least_squares(&x, &y);
    Ok(SlopeFit { slope, intercept, eps: eps_grid.to_vec(), counts, used, residuals })
}

/// `k` scales geometrically spaced from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, k: usize) -> Vec<f64> {
    let r = (lo / hi).powf(1.0 / (k.max(2) - 1) as f64);
    (0..k).map(|i| hi * r.powi(i as i32)).collect()
}

/// Recorded constant of the class covering bound.
pub const CLASS_COVER_CONSTANT: f64 = 1.0;

/// `c·N²L·log((N+1)^L B^L / ε)` (natural log); errors when the bound is vacuous.
pub fn class_covering_bound(n: usize, l: usize, b: f64, eps: f64) -> Result<f64> {
    if n == 0 || l == 0 || !(b > 0.0) || !(eps > 0.0) {
        return Err(Error::InvalidArgument("arguments must be positive".into()));
    }
    let (nf, lf) = (n as f64, l as f64);
    let log_arg = lf * (nf + 1.0).ln() + lf * b.ln() - eps.ln();
    if log_arg <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ε = {eps} is at least (N+1)^L B^L; the bound is vacuous"
        )));
    }
    Ok(CLASS_COVER_CONSTANT * nf * nf * lf * log_arg)
}

/// Samples of `A^{+ε}`: each point of `A` plus `per_point` uniform draws from
/// its closed ∞-ball of radius `eps`.
pub fn enlarge(cloud: &PointCloud, eps: f64, per_point: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cloud.len() * (per_point + 1));
    for p in &cloud.points {
        out.push(p.clone());
        for _ in 0..per_point {
            out.push(p.iter().map(|c| c + eps * rng.random_range(-1.0..=1.0)).collect());
        }
    }
    PointCloud::new(out).expect("jittered finite points").with_meta(
        format!("{}+{eps}", cloud.description),
        Some(seed),
    )
}

/// Uniform samples of `[0,1]^d`.
pub fn uniform_cube(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    PointCloud::new(pts).unwrap().with_meta(format!("uniform [0,1]^{d}"), Some(seed))
}

/// Samples `t ↦ a + t(b − a)` for uniform `t ∈ [0,1]`.
pub fn segment(n: usize, a: &[f64], b: &[f64], seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|_| {
            let t: f64 = rng.random();
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        })
        .collect();
    PointCloud::new(pts).unwrap().with_meta("segment", Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_ball_for_unit_interval() {
        let c = uniform_cube(200, 1, 3);
        let r = greedy_cover(&c, 0.5).unwrap();
        assert_eq!(r.count, 1);
        assert!(r.covers(&c));
    }

    #[test]
    fn clusters_need_two_balls() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![0.01 * i as f64, 0.0]);
            pts.push(vec![1.0 + 0.01 * i as f64, 0.0]);
        }
        let c = PointCloud::new(pts).unwrap();
        assert!(greedy_cover(&c, 0.1).unwrap().count >= 2);
        assert_eq!(exact_small_cover(&c, 0.1).unwrap().count, 2);
    }

    fn brute_min_cover(c: &PointCloud, eps: f64) -> usize {
        // smallest k such that some assignment into k groups of diameter ≤ 2ε exists
        let n = c.len();
        for k in 1..=n {
            let mut assign = vec![0usize; n];
            loop {
                let ok = (0..n).all(|i| {
                    (0..n).all(|j| assign[i] != assign[j] || linf(&c.points[i], &c.points[j]) <= 2.0 * eps)
                });
                if ok {
                    return k;
                }
                let mut p = 0;
                while p < n {
                    assign[p] += 1;
                    if assign[p] < k {
                        break;
                    }
                    assign[p] = 0;
                    p += 1;
                }
                if p == n {
                    break;
                }
            }
        }
        n
    }

    #[test]
    fn exact_matches_brute_force_and_greedy_dominates() {
        for seed in 0..12 {
            let c = uniform_cube(8, 2, seed);
            for eps in [0.1, 0.2, 0.35] {
                let ex = exact_small_cover(&c, eps).unwrap();
                assert!(ex.covers(&c));
                assert_eq!(ex.count, brute_min_cover(&c, eps));
                let gr = greedy_cover(&c, eps).unwrap();
                assert!(gr.covers(&c));
                assert!(gr.count >= ex.count);
            }
        }
    }

    #[test]
    fn greedy_monotone_in_eps() {
        let c = uniform_cube(500, 2, 1);
        let grid = geometric_grid(0.5, 0.01, 12);
        let counts: Vec<usize> = grid.iter().map(|&e| greedy_cover(&c, e).unwrap().count).collect();
        // finer scales never need fewer balls, up to greedy slack
        for w in counts.windows(2) {
            assert!(w[1] >= w[0], "{counts:?}");
        }
    }

    #[test]
    fn slopes_of_segment_square_and_point() {
        let seg = segment(4000, &[0.1, 0.2, 0.3], &[0.9, 0.6, 0.5], 5);
        let grid = geometric_grid(0.3, 0.003, 8);
        let s = minkowski_slope(&seg, &grid).unwrap().slope;
        assert!((0.8..=1.2).contains(&s), "segment slope {s}");
        let sq = uniform_cube(20000, 2, 6);
        let grid = geometric_grid(0.3, 0.009, 6);
        let s = minkowski_slope(&sq, &grid).unwrap().slope;
        assert!((1.7..=2.3).contains(&s), "square slope {s}");
        let pt = PointCloud::new(vec![vec![0.5, 0.5]; 3]).unwrap();
        let s = minkowski_slope(&pt, &geometric_grid(0.5, 0.001, 5)).unwrap().slope;
        assert!(s.abs() < 1e-12);
        assert!(minkowski_slope(&pt, &[0.1, 0.05, 0.02, 0.01]).is_err());
    }

    #[test]
    fn class_bound_structure() {
        let base = class_covering_bound(4, 3, 2.0, 0.1).unwrap();
        let hand = 16.0 * 3.0 * (5f64.powi(3) * 8.0 / 0.1).ln();
        assert!((base - hand).abs() < 1e-9);
        let half = class_covering_bound(4, 3, 2.0, 0.05).unwrap();
        assert!((half - base - 48.0 * 2f64.ln()).abs() < 1e-9);
        let r = class_covering_bound(8, 3, 2.0, 1e-300).unwrap() / class_covering_bound(4, 3, 2.0, 1e-300).unwrap();
        assert!((r - 4.0).abs() < 0.05);
        assert!(class_covering_bound(1, 1, 1.0, 2.0).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let c = uniform_cube(5, 3, 2);
        assert_eq!(PointCloud::from_csv(&c.to_csv()).unwrap().points, c.points);
        let with_header = format!("x,y,z\n{}", c.to_csv());
        assert_eq!(PointCloud::from_csv(&with_header).unwrap().points, c.points);
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(PointCloud::from_json(&j).unwrap(), c);
        assert_eq!(PointCloud::from_json("[[1,2],[3,4]]").unwrap().len(), 2);
    }
}
