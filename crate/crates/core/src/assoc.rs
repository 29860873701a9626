//! Identity association between consecutive frames.
//!
//! Each detection carries a backward motion vector; adding it to the
//! detection's center predicts where the object was one frame earlier. Prior
//! objects within `kappa` of that prediction are candidates, and a
//! minimum-cost assignment over the candidates transfers identities.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::Point;

pub const DEFAULT_KAPPA: f64 = 15.0;

pub type TrackId = u64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub class: usize,
    pub center: Point,
    pub confidence: f64,
    /// Backward motion in pixels per frame: `center + motion` is the
    /// predicted previous-frame position.
    pub motion: Point,
    pub subpixel: Point,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackState {
    Active,
    /// Unmatched in the latest frame; may resume in the next frame only.
    Passive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackedObject {
    pub id: TrackId,
    pub detection: Detection,
    pub state: TrackState,
    pub last_seen: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackSet {
    objects: BTreeMap<TrackId, TrackedObject>,
    next_id: TrackId,
    frame: Option<usize>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Frame index this set describes, `None` before the first frame.
    pub fn frame(&self) -> Option<usize> {
        self.frame
    }

    pub fn next_id(&self) -> TrackId {
        self.next_id
    }

    pub fn get(&self, id: TrackId) -> Option<&TrackedObject> {
        self.objects.get(&id)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// All objects in ascending id order.
    pub fn objects(&self) -> impl Iterator<Item = &TrackedObject> {
        self.objects.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &TrackedObject> {
        self.objects().filter(|o| o.state == TrackState::Active)
    }

    pub fn passive(&self) -> impl Iterator<Item = &TrackedObject> {
        self.objects().filter(|o| o.state == TrackState::Passive)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssocConfig {
    pub kappa: f64,
}

impl AssocConfig {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { kappa })
    }
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            kappa: DEFAULT_KAPPA,
        }
    }
}

/// Predicted previous-frame position of a detection.
pub fn backcast(d: &Detection) -> Point {
    d.center + d.motion
}

/// Rectangular cost matrix where `None` marks a forbidden pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Option<f64>>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![None; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("cost matrix rows differ in length".into()));
        }
        let entries: Vec<Option<f64>> = rows.iter().flatten().copied().collect();
        if entries.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("cost matrix entries must be finite"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cost: Option<f64>) {
        self.entries[row * self.cols + col] = cost;
    }

    /// Sum of the costs of `pairs`; `None` if any pair is forbidden.
    pub fn total(&self, pairs: &[(usize, usize)]) -> Option<f64> {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Minimum-cost assignment over admissible entries.
///
/// Maximizes the number of matched pairs first and minimizes the total cost
/// among matchings of that size. Among equal-cost optima the lexicographically
/// smallest pair set (sorted by row) is returned. Pairs come back sorted by
/// row.
pub fn solve_assignment(cost: &CostMatrix) -> Vec<(usize, usize)> {
    let (rows, cols) = (cost.rows, cost.cols);
    if rows == 0 || cols == 0 || cost.entries.iter().all(Option::is_none) {
        return Vec::new();
    }
    let n = rows.max(cols);
    let max_abs = cost
        .entries
        .iter()
        .flatten()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    // One extra admissible pair always outweighs any cost difference.
    let big = 1.0 + 2.0 * n as f64 * max_abs;
    let mut square = vec![big; n * n];
    for r in 0..rows {
        for c in 0..cols {
            if let Some(v) = cost.get(r, c) {
                square[r * n + c] = v;
            }
        }
    }

    let (mut row_to_col, u, v) = hungarian(&square, n);
    let tol = 1e-12 * big * n as f64;
    canonicalize(&square, n, &u, &v, tol, &mut row_to_col);

    (0..rows)
        .filter_map(|r| {
            let c = row_to_col[r];
            (c < cols && cost.get(r, c).is_some()).then_some((r, c))
        })
        .collect()
}

/// Shortest-augmenting-path Hungarian method on an `n x n` matrix.
/// Returns the row assignment and the row/column dual potentials.
fn hungarian(a: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrites an optimal assignment into the lexicographically smallest optimal
/// one. Every optimal assignment uses only edges that are tight under the
/// optimal duals, so it suffices to search perfect matchings of the tight
/// subgraph, fixing rows in order and moving each to its smallest reachable
/// column along an alternating cycle.
fn canonicalize(a: &[f64], n: usize, u: &[f64], v: &[f64], tol: f64, row_to_col: &mut [usize]) {
    let tight = |r: usize, c: usize| a[r * n + c] - u[r] - v[c] <= tol;
    let mut col_to_row = vec![0usize; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    let mut fixed = vec![false; n];
    let mut prev_col = vec![usize::MAX; n];
    let mut seen_row = vec![false; n];
    let mut queue = Vec::with_capacity(n);

    for r in 0..n {
        let target = row_to_col[r];
        for c in 0..target {
            let holder = col_to_row[c];
            if fixed[holder] || !tight(r, c) {
                continue;
            }
            // Breadth-first search for an alternating path that lets `holder`
            // give up column `c` and ends by claiming `target`.
            seen_row.iter_mut().for_each(|s| *s = false);
            prev_col.iter_mut().for_each(|p| *p = usize::MAX);
            queue.clear();
            queue.push(holder);
            seen_row[holder] = true;
            seen_row[r] = true;
            let mut head = 0;
            let mut reached = false;
            'search: while head < queue.len() {
                let row = queue[head];
                head += 1;
                for col in 0..n {
                    if col == c || col == row_to_col[row] || !tight(row, col) {
                        continue;
                    }
                    if col == target {
                        prev_col[col] = row;
                        reached = true;
                        break 'search;
                    }
                    let next = col_to_row[col];
                    if fixed[next] || seen_row[next] || prev_col[col] != usize::MAX {
                        continue;
                    }
                    prev_col[col] = row;
                    seen_row[next] = true;
                    queue.push(next);
                }
            }
            if !reached {
                continue;
            }
            // Walk back from `target`, shifting each row onto its new column.
            let mut col = target;
            loop {
                let row = prev_col[col];
                let old = row_to_col[row];
                row_to_col[row] = col;
                col_to_row[col] = row;
                if row == holder {
                    debug_assert_eq!(old, c);
                    break;
                }
                col = old;
            }
            row_to_col[r] = c;
            col_to_row[c] = r;
            break;
        }
        fixed[r] = true;
    }
}

/// Canonical detection order: confidence descending, then position and
/// class. Makes association independent of the input order and lets the
/// assignment tie rule favor higher-confidence detections.
fn canonical_order(current: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..current.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&current[a], &current[b]);
        db.confidence
            .total_cmp(&da.confidence)
            .then(da.center.x.total_cmp(&db.center.x))
            .then(da.center.y.total_cmp(&db.center.y))
            .then(da.class.cmp(&db.class))
            .then(da.motion.x.total_cmp(&db.motion.x))
            .then(da.motion.y.total_cmp(&db.motion.y))
    });
    order
}

/// Associates frame `frame` detections with the prior track set (which must
/// describe frame `frame - 1`, or be fresh).
///
/// Matched detections inherit ids, unmatched ones get fresh ids, unmatched
/// active objects turn passive for one frame and unmatched passive objects
/// are retired.
pub fn associate(
    current: &[Detection],
    prior: &TrackSet,
    frame: usize,
    config: &AssocConfig,
) -> Result<TrackSet> {
    if let Some(prev) = prior.frame {
        if prev + 1 != frame {
            return Err(Error::invalid(format!(
                "track set describes frame {prev}, cannot associate frame {frame}"
            )));
        }
    }
    let order = canonical_order(current);
    let candidates: Vec<&TrackedObject> = prior.active().chain(prior.passive()).collect();

    let mut cost = CostMatrix::new(order.len(), candidates.len());
    for (row, &di) in order.iter().enumerate() {
        let b = backcast(&current[di]);
        for (col, obj) in candidates.iter().enumerate() {
            let d = b.distance(obj.detection.center);
            if d <= config.kappa {
                cost.set(row, col, Some(d));
            }
        }
    }
    let pairs = solve_assignment(&cost);

    let mut matched_row = vec![None; order.len()];
    let mut matched_col = vec![false; candidates.len()];
    for &(row, col) in &pairs {
        matched_row[row] = Some(col);
        matched_col[col] = true;
    }

    let mut next = TrackSet {
        objects: BTreeMap::new(),
        next_id: prior.next_id,
        frame: Some(frame),
    };
    for (row, &di) in order.iter().enumerate() {
        let id = match matched_row[row] {
            Some(col) => candidates[col].id,
            None => {
                let id = next.next_id;
                next.next_id += 1;
                id
            }
        };
        next.objects.insert(
            id,
            TrackedObject {
                id,
                detection: current[di],
                state: TrackState::Active,
                last_seen: frame,
            },
        );
    }
    for (col, obj) in candidates.iter().enumerate() {
        if !matched_col[col] && obj.state == TrackState::Active {
            next.objects.insert(
                obj.id,
                TrackedObject {
                    state: TrackState::Passive,
                    ..(*obj).clone()
                },
            );
        }
    }
    Ok(next)
}
