//! Point-cloud ingestion and per-frame preprocessing.
//!
//! Raw radar frames pass through two stages before graph construction:
//! a rectangular range filter that drops out-of-area returns ("ghost
//! points"), and DBSCAN clustering that keeps only the largest cluster,
//! assumed to be the human target.

use serde::{Deserialize, Serialize};

/// A single 3-D point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0, z: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }
}

/// The variable-size set of points detected at one timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFrame {
    pub points: Vec<Point3>,
    pub timestamp_index: usize,
}

impl PointFrame {
    pub fn new(points: Vec<Point3>, timestamp_index: usize) -> Self {
        Self { points, timestamp_index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An N-frame activity instance with its class label and subject id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSequence {
    pub frames: Vec<PointFrame>,
    pub label: usize,
    pub subject_id: u32,
}

impl PointSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Axis-aligned detection area. Bounds are inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl RangeBounds {
    /// Detection area sized for an indoor human target 3-5 m from the radar.
    pub fn indoor_default() -> Self {
        Self { x_min: 0.5, x_max: 5.0, y_min: -1.2, y_max: 6.5, z_min: -1.0, z_max: 2.5 }
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max && self.z_min < self.z_max
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.x_min
            && p.x <= self.x_max
            && p.y >= self.y_min
            && p.y <= self.y_max
            && p.z >= self.z_min
            && p.z <= self.z_max
    }
}

/// Keeps only the points inside `bounds`, preserving order. Boundary-equal
/// points are retained.
pub fn range_filter(frame: &PointFrame, bounds: &RangeBounds) -> PointFrame {
    debug_assert!(bounds.is_valid(), "invalid range bounds");
    PointFrame {
        points: frame.points.iter().filter(|p| bounds.contains(p)).copied().collect(),
        timestamp_index: frame.timestamp_index,
    }
}

/// DBSCAN output: clusters as ascending point-index lists plus the noise set.
#[derive(Debug, Clone, PartialEq)]
pub struct DbscanResult {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum PointState {
    Unvisited,
    Noise,
    Cluster(usize),
}

/// Density-based clustering with Euclidean distance. A point's
/// eps-neighborhood includes the point itself, so `min_pts = 2` makes any
/// point with one neighbor a core point.
///
/// Deterministic given input order: seeds are scanned in ascending index
/// order and each cluster is grown to completion before the next seed is
/// considered, so a border point reachable from several clusters lands in
/// the cluster whose starting core has the lowest index.
pub fn dbscan(frame: &PointFrame, eps: f64, min_pts: usize) -> DbscanResult {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");

    let pts = &frame.points;
    let n = pts.len();
    let mut state = vec![PointState::Unvisited; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    let neighbors = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| pts[i].distance(&pts[j]) <= eps).collect()
    };

    for seed in 0..n {
        if state[seed] != PointState::Unvisited {
            continue;
        }
        let seed_neighbors = neighbors(seed);
        if seed_neighbors.len() < min_pts {
            state[seed] = PointState::Noise;
            continue;
        }
        let cluster_id = clusters.len();
        let mut members = vec![seed];
        state[seed] = PointState::Cluster(cluster_id);
        let mut queue: Vec<usize> = seed_neighbors;
        let mut head = 0;
        while head < queue.len() {
            let q = queue[head];
            head += 1;
            match state[q] {
                PointState::Cluster(_) => continue,
                PointState::Noise | PointState::Unvisited => {
                    let was_unvisited = state[q] == PointState::Unvisited;
                    state[q] = PointState::Cluster(cluster_id);
                    members.push(q);
                    if was_unvisited {
                        let q_neighbors = neighbors(q);
                        if q_neighbors.len() >= min_pts {
                            queue.extend(q_neighbors);
                        }
                    }
                }
            }
        }
        members.sort_unstable();
        members.dedup();
        clusters.push(members);
    }

    let noise = (0..n).filter(|&i| state[i] == PointState::Noise).collect();
    DbscanResult { clusters, noise }
}

/// Picks the points of the largest cluster; ties go to the cluster whose
/// lowest point index is smallest. All-noise input yields an empty frame.
pub fn largest_cluster(result: &DbscanResult, frame: &PointFrame) -> PointFrame {
    let best = result
        .clusters
        .iter()
        .max_by(|a, b| {
            a.len()
                .cmp(&b.len())
                // on equal size prefer the lower first index, i.e. reverse order
                .then(b[0].cmp(&a[0]))
        });
    let points = match best {
        Some(indices) => indices.iter().map(|&i| frame.points[i]).collect(),
        None => Vec::new(),
    };
    PointFrame { points, timestamp_index: frame.timestamp_index }
}

/// Runs range filter, DBSCAN, and largest-cluster selection on every frame.
/// Frame count, label, and subject are preserved; a frame may come out empty.
pub fn preprocess_sequence(
    raw: &PointSequence,
    bounds: &RangeBounds,
    eps: f64,
    min_pts: usize,
) -> PointSequence {
    let frames = raw
        .frames
        .iter()
        .map(|frame| {
            let filtered = range_filter(frame, bounds);
            let clusters = dbscan(&filtered, eps, min_pts);
            largest_cluster(&clusters, &filtered)
        })
        .collect();
    PointSequence { frames, label: raw.label, subject_id: raw.subject_id }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(points: &[(f64, f64, f64)]) -> PointFrame {
        PointFrame::new(points.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(), 0)
    }

    /// Textbook DBSCAN written as a separate pass structure: precomputed
    /// neighbor lists, then the published scan-and-expand loop. Used as a
    /// reference oracle for the production implementation.
    fn reference_dbscan(points: &[Point3], eps: f64, min_pts: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
        const UNCLASSIFIED: isize = -2;
        const NOISE: isize = -1;
        let n = points.len();
        let neighbor_lists: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| points[i].distance(&points[j]) <= eps).collect())
            .collect();
        let mut labels = vec![UNCLASSIFIED; n];
        let mut next_cluster = 0isize;
        for p in 0..n {
            if labels[p] != UNCLASSIFIED {
                continue;
            }
            if neighbor_lists[p].len() < min_pts {
                labels[p] = NOISE;
                continue;
            }
            let cluster = next_cluster;
            next_cluster += 1;
            labels[p] = cluster;
            let mut seeds: Vec<usize> = neighbor_lists[p].clone();
            let mut i = 0;
            while i < seeds.len() {
                let q = seeds[i];
                i += 1;
                if labels[q] == NOISE {
                    labels[q] = cluster;
                }
                if labels[q] != UNCLASSIFIED {
                    continue;
                }
                labels[q] = cluster;
                if neighbor_lists[q].len() >= min_pts {
                    seeds.extend(neighbor_lists[q].iter().copied());
                }
            }
        }
        let mut clusters = vec![Vec::new(); next_cluster as usize];
        let mut noise = Vec::new();
        for (idx, &label) in labels.iter().enumerate() {
            if label == NOISE {
                noise.push(idx);
            } else {
                clusters[label as usize].push(idx);
            }
        }
        (clusters, noise)
    }

    #[test]
    fn range_filter_keeps_in_area_points() {
        let f = frame(&[(1.0, 2.0, 0.5), (1.0, 2.0, 3.0)]);
        let out = range_filter(&f, &RangeBounds::indoor_default());
        assert_eq!(out.points, vec![Point3::new(1.0, 2.0, 0.5)]);
    }

    #[test]
    fn range_filter_empty_frame() {
        let out = range_filter(&frame(&[]), &RangeBounds::indoor_default());
        assert!(out.is_empty());
    }

    #[test]
    fn range_filter_boundary_point_retained() {
        let bounds = RangeBounds::indoor_default();
        let f = frame(&[(bounds.x_max, 1.0, 1.0)]);
        assert_eq!(range_filter(&f, &bounds).len(), 1);
    }

    #[test]
    fn dbscan_pair_within_eps_forms_cluster() {
        let f = frame(&[(0.0, 0.0, 0.0), (0.2, 0.0, 0.0)]);
        let res = dbscan(&f, 0.35, 2);
        assert_eq!(res.clusters, vec![vec![0, 1]]);
        assert!(res.noise.is_empty());
    }

    #[test]
    fn dbscan_isolated_point_is_noise() {
        let f = frame(&[(0.0, 0.0, 0.0)]);
        let res = dbscan(&f, 0.35, 2);
        assert!(res.clusters.is_empty());
        assert_eq!(res.noise, vec![0]);
    }

    #[test]
    fn dbscan_two_blobs_match_reference() {
        // 12 points: two 5-point blobs plus 2 outliers
        let f = frame(&[
            (0.0, 0.0, 0.0),
            (0.1, 0.0, 0.0),
            (0.0, 0.1, 0.0),
            (0.1, 0.1, 0.0),
            (0.05, 0.05, 0.1),
            (5.0, 5.0, 5.0),
            (5.1, 5.0, 5.0),
            (5.0, 5.1, 5.0),
            (5.1, 5.1, 5.0),
            (5.05, 5.05, 5.1),
            (10.0, 0.0, 0.0),
            (-10.0, 0.0, 0.0),
        ]);
        let res = dbscan(&f, 0.35, 2);
        let (ref_clusters, ref_noise) = reference_dbscan(&f.points, 0.35, 2);
        assert_eq!(res.clusters, ref_clusters);
        assert_eq!(res.noise, ref_noise);
        assert_eq!(res.clusters.len(), 2);
        assert_eq!(res.noise, vec![10, 11]);
    }

    #[test]
    fn dbscan_border_point_goes_to_first_cluster() {
        // Two dense cores on a line with a shared border point in the middle.
        // min_pts = 4 so the middle point (3 neighbors: one core point from
        // each side plus itself) is a border point of both clusters.
        let f = frame(&[
            (0.0, 0.0, 0.0),
            (0.1, 0.0, 0.0),
            (0.2, 0.0, 0.0),
            (0.3, 0.0, 0.0), // core of left cluster
            (0.6, 0.0, 0.0), // shared border point
            (0.9, 0.0, 0.0), // core of right cluster
            (1.0, 0.0, 0.0),
            (1.1, 0.0, 0.0),
            (1.2, 0.0, 0.0),
        ]);
        let res = dbscan(&f, 0.31, 4);
        assert_eq!(res.clusters.len(), 2);
        // border index 4 claimed by the cluster seeded first (lower index)
        assert!(res.clusters[0].contains(&4));
        assert!(!res.clusters[1].contains(&4));
    }

    #[test]
    fn largest_cluster_picks_max_cardinality() {
        let res = DbscanResult { clusters: vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7]], noise: vec![] };
        let f = frame(&[
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (2.0, 0.0, 0.0),
            (3.0, 0.0, 0.0),
            (4.0, 0.0, 0.0),
            (5.0, 0.0, 0.0),
            (6.0, 0.0, 0.0),
            (7.0, 0.0, 0.0),
        ]);
        assert_eq!(largest_cluster(&res, &f).len(), 5);
    }

    #[test]
    fn largest_cluster_all_noise_gives_empty_frame() {
        let res = DbscanResult { clusters: vec![], noise: vec![0, 1] };
        let f = frame(&[(0.0, 0.0, 0.0), (9.0, 9.0, 9.0)]);
        let out = largest_cluster(&res, &f);
        assert!(out.is_empty());
        assert_eq!(out.timestamp_index, f.timestamp_index);
    }

    #[test]
    fn largest_cluster_tie_breaks_on_lowest_first_index() {
        let res = DbscanResult { clusters: vec![vec![2, 3, 4, 5], vec![0, 1, 6, 7]], noise: vec![] };
        let f = frame(&[
            (0.0, 0.0, 0.0),
            (1.0, 0.0, 0.0),
            (2.0, 0.0, 0.0),
            (3.0, 0.0, 0.0),
            (4.0, 0.0, 0.0),
            (5.0, 0.0, 0.0),
            (6.0, 0.0, 0.0),
            (7.0, 0.0, 0.0),
        ]);
        let out = largest_cluster(&res, &f);
        // cluster starting at index 0 wins the tie
        assert_eq!(out.points[0], f.points[0]);
    }

    #[test]
    fn preprocess_is_noop_on_tight_in_bounds_blob() {
        let blob = frame(&[(2.0, 2.0, 1.0), (2.1, 2.0, 1.0), (2.0, 2.1, 1.0)]);
        let seq = PointSequence { frames: vec![blob.clone(), blob.clone()], label: 1, subject_id: 3 };
        let out = preprocess_sequence(&seq, &RangeBounds::indoor_default(), 0.35, 2);
        assert_eq!(out, seq);
    }

    #[test]
    fn preprocess_out_of_bounds_frame_becomes_empty() {
        let inside = frame(&[(2.0, 2.0, 1.0), (2.1, 2.0, 1.0)]);
        let outside = PointFrame::new(vec![Point3::new(100.0, 0.0, 0.0)], 1);
        let seq = PointSequence { frames: vec![inside.clone(), outside], label: 0, subject_id: 1 };
        let out = preprocess_sequence(&seq, &RangeBounds::indoor_default(), 0.35, 2);
        assert_eq!(out.frames[0], inside);
        assert!(out.frames[1].is_empty());
        assert_eq!(out.frames[1].timestamp_index, 1);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn preprocess_matches_manual_composition() {
        let mut rng_points = Vec::new();
        // deterministic pseudo-random scatter, no RNG dependency needed here
        let mut s = 1u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (u32::MAX as f64)
        };
        for t in 0..50 {
            let n = 5 + (t % 7);
            let pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(next() * 6.0, next() * 8.0 - 1.5, next() * 4.0 - 1.2))
                .collect();
            rng_points.push(PointFrame::new(pts, t));
        }
        let seq = PointSequence { frames: rng_points, label: 2, subject_id: 4 };
        let bounds = RangeBounds::indoor_default();
        let out = preprocess_sequence(&seq, &bounds, 0.8, 2);
        for (raw, got) in seq.frames.iter().zip(&out.frames) {
            let filtered = range_filter(raw, &bounds);
            let expect = largest_cluster(&dbscan(&filtered, 0.8, 2), &filtered);
            assert_eq!(*got, expect);
        }
        assert_eq!(out.label, seq.label);
        assert_eq!(out.subject_id, seq.subject_id);
    }

    proptest! {
        #[test]
        fn range_filter_subset_and_idempotent(
            pts in proptest::collection::vec((-3.0f64..8.0, -3.0f64..8.0, -3.0f64..4.0), 0..40)
        ) {
            let f = frame(&pts);
            let bounds = RangeBounds::indoor_default();
            let once = range_filter(&f, &bounds);
            prop_assert!(once.len() <= f.len());
            for p in &once.points {
                prop_assert!(f.points.contains(p));
            }
            let twice = range_filter(&once, &bounds);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn dbscan_partitions_all_indices(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0..30),
            eps in 0.05f64..0.8,
            min_pts in 1usize..5,
        ) {
            let f = frame(&pts);
            let res = dbscan(&f, eps, min_pts);
            let mut seen = vec![0usize; f.len()];
            for c in &res.clusters {
                prop_assert!(!c.is_empty());
                for &i in c {
                    seen[i] += 1;
                }
            }
            for &i in &res.noise {
                seen[i] += 1;
            }
            prop_assert!(seen.iter().all(|&c| c == 1), "every index in exactly one cluster or noise");
        }

        #[test]
        fn dbscan_matches_reference_on_random_frames(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0..40),
            eps in 0.05f64..0.9,
            min_pts in 1usize..5,
        ) {
            let f = frame(&pts);
            let res = dbscan(&f, eps, min_pts);
            let (ref_clusters, ref_noise) = reference_dbscan(&f.points, eps, min_pts);
            let mut sorted_ref = ref_clusters;
            for c in &mut sorted_ref {
                c.sort_unstable();
            }
            prop_assert_eq!(res.clusters, sorted_ref);
            prop_assert_eq!(res.noise, ref_noise);
        }

        #[test]
        fn dbscan_partition_survives_permutation(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..25),
            shift in 1usize..24,
        ) {
            // with min_pts = 2 every clustered point is a core point, so the
            // partition equals the connected components of the eps-graph and
            // must not depend on input order
            let f = frame(&pts);
            let eps = 0.3;
            let res = dbscan(&f, eps, 2);
            let k = shift % f.len();
            let rotated: Vec<Point3> = f.points[k..].iter().chain(&f.points[..k]).copied().collect();
            let g = PointFrame::new(rotated, 0);
            let res_rot = dbscan(&g, eps, 2);
            // map rotated indices back to original ones
            let unrotate = |i: usize| (i + k) % f.len();
            let mut back: Vec<Vec<usize>> = res_rot
                .clusters
                .iter()
                .map(|c| {
                    let mut mapped: Vec<usize> = c.iter().map(|&i| unrotate(i)).collect();
                    mapped.sort_unstable();
                    mapped
                })
                .collect();
            back.sort();
            let mut orig = res.clusters.clone();
            orig.sort();
            prop_assert_eq!(orig, back);
            let mut noise_back: Vec<usize> = res_rot.noise.iter().map(|&i| unrotate(i)).collect();
            noise_back.sort_unstable();
            prop_assert_eq!(res.noise, noise_back);
        }

        #[test]
        fn preprocess_preserves_length_and_label(
            n_frames in 1usize..8,
            label in 0usize..13,
            subject in 1u32..6,
        ) {
            let frames: Vec<PointFrame> = (0..n_frames)
                .map(|t| PointFrame::new(vec![Point3::new(2.0, 2.0, 1.0 + t as f64 * 0.01)], t))
                .collect();
            let seq = PointSequence { frames, label, subject_id: subject };
            let out = preprocess_sequence(&seq, &RangeBounds::indoor_default(), 0.35, 2);
            prop_assert_eq!(out.len(), seq.len());
            prop_assert_eq!(out.label, label);
            prop_assert_eq!(out.subject_id, subject);
        }
    }
}
