//! Training-time label assignment over pyramid candidates.
//!
//! Two strategies share [`AssignmentResult`]: the static center-sampling
//! rule and SimOTA, which picks a per-ground-truth dynamic number of
//! lowest-cost candidates from a classification + IoU cost matrix and then
//! resolves candidates claimed by several ground truths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pyramid::PyramidPoint;
use crate::segment::{tiou, Segment};

/// A ground-truth moment with an integer category id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub segment: Segment,
    pub label: usize,
}

/// What the model currently predicts at one pyramid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePrediction {
    pub point: PyramidPoint,
    pub class_probs: Vec<f64>,
    pub decoded: Segment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignConfig {
    /// Center prior radius in units of the candidate's stride.
    pub center_radius: f64,
    pub lambda_iou: f64,
    /// Number of top IoUs summed to get the dynamic k.
    pub top_q: usize,
    pub ineligible_cost: f64,
    pub eps: f64,
    /// Restrict the dynamic-k pool and the selection to eligible
    /// candidates. When false, ineligibility is only the cost term.
    pub hard_mask: bool,
}

impl Default for AssignConfig {
    fn default() -> Self {
        Self { center_radius: 1.5, lambda_iou: 3.0, top_q: 10, ineligible_cost: 1e5, eps: 1e-8, hard_mask: true }
    }
}

impl AssignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_radius > 0.0) {
            return Err(Error::Config(format!("center_radius must be positive, got {}", self.center_radius)));
        }
        if !(self.lambda_iou >= 0.0) {
            return Err(Error::Config(format!("lambda_iou must be non-negative, got {}", self.lambda_iou)));
        }
        if self.top_q == 0 {
            return Err(Error::Config("top_q must be at least 1".into()));
        }
        if !(self.ineligible_cost > 0.0) {
            return Err(Error::Config("ineligible_cost must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must be in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assigned {
    pub gt: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GtAssignment {
    /// Candidate indices kept after conflict resolution, ascending.
    pub candidates: Vec<usize>,
    pub dynamic_k: usize,
    /// Candidates selected before conflict resolution.
    pub claimed: usize,
    pub eligible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// `None` is background.
    pub candidates: Vec<Option<Assigned>>,
    pub gts: Vec<GtAssignment>,
}

impl AssignmentResult {
    pub fn num_positive(&self) -> usize {
        self.candidates.iter().filter(|c| c.is_some()).count()
    }

    fn from_owners(owners: Vec<Option<Assigned>>, mut gts: Vec<GtAssignment>) -> Self {
        for g in &mut gts {
            g.candidates.clear();
        }
        for (i, o) in owners.iter().enumerate() {
            if let Some(a) = o {
                gts[a.gt].candidates.push(i);
            }
        }
        Self { candidates: owners, gts }
    }
}

/// Center sampling: a point is positive for a ground truth when it lies
/// inside it, within `radius * stride` of its center, and the larger of its
/// distances to the two endpoints falls in the point's regression range.
/// Points eligible for several ground truths go to the shortest one.
pub fn center_sampling(points: &[PyramidPoint], gts: &[GtInstance], radius: f64) -> Result<AssignmentResult> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("center radius must be positive, got {radius}")));
    }
    let mut gt_info = vec![GtAssignment::default(); gts.len()];
    let mut owners = vec![None; points.len()];
    for (i, p) in points.iter().enumerate() {
        let (lo, hi) = p.range_seconds();
        let mut best: Option<usize> = None;
        for (j, g) in gts.iter().enumerate() {
            let s = &g.segment;
            if !s.contains(p.time) || (p.time - s.center()).abs() > radius * p.stride {
                continue;
            }
            let reach = (p.time - s.start()).max(s.end() - p.time);
            if !(lo <= reach && reach < hi) {
                continue;
            }
            gt_info[j].eligible += 1;
            gt_info[j].claimed += 1;
            if best.is_none_or(|b| s.duration() < gts[b].segment.duration()) {
                best = Some(j);
            }
        }
        owners[i] = best.map(|gt| Assigned { gt, cost: 0.0 });
    }
    let mut result = AssignmentResult::from_owners(owners, gt_info);
    for g in &mut result.gts {
        g.dynamic_k = g.candidates.len();
    }
    Ok(result)
}

/// Cost matrix for SimOTA, stored ground-truth major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub num_candidates: usize,
    pub costs: Vec<Vec<f64>>,
    pub ious: Vec<Vec<f64>>,
    pub eligible: Vec<Vec<bool>>,
}

impl CostMatrix {
    pub fn num_gts(&self) -> usize {
        self.costs.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }
}

/// Eligible when the candidate's time lies inside the ground truth or within
/// `center_radius * stride` of its center.
pub fn is_eligible(point: &PyramidPoint, gt: &Segment, center_radius: f64) -> bool {
    gt.contains(point.time) || (point.time - gt.center()).abs() <= center_radius * point.stride
}

/// Build the SimOTA cost matrix. Rows are computed independently, so the
/// result does not depend on the thread count.
pub fn build_costs(
    candidates: &[CandidatePrediction],
    gts: &[GtInstance],
    num_classes: usize,
    config: &AssignConfig,
) -> Result<CostMatrix> {
    config.validate()?;
    for (index, c) in candidates.iter().enumerate() {
        if c.class_probs.len() != num_classes {
            return Err(Error::ClassCount { index, expected: num_classes, got: c.class_probs.len() });
        }
        if c.class_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!("candidate {index}: class probability outside [0, 1]")));
        }
    }
    if let Some(g) = gts.iter().find(|g| g.label >= num_classes) {
        return Err(Error::Config(format!("ground-truth label {} outside 0..{num_classes}", g.label)));
    }

    let eps = config.eps;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = gts
        .par_iter()
        .map(|g| {
            let mut costs = Vec::with_capacity(candidates.len());
            let mut ious = Vec::with_capacity(candidates.len());
            let mut eligible = Vec::with_capacity(candidates.len());
            for c in candidates {
                let iou = tiou(&c.decoded, &g.segment);
                let ok = is_eligible(&c.point, &g.segment, config.center_radius);
                let cls = -c.class_probs[g.label].clamp(eps, 1.0).ln();
                let reg = -iou.clamp(eps, 1.0).ln();
                let penalty = if ok { 0.0 } else { config.ineligible_cost };
                costs.push(cls + config.lambda_iou * reg + penalty);
                ious.push(iou);
                eligible.push(ok);
            }
            (costs, ious, eligible)
        })
        .collect();

    let mut m =
        CostMatrix { num_candidates: candidates.len(), costs: Vec::new(), ious: Vec::new(), eligible: Vec::new() };
    for (c, i, e) in rows {
        m.costs.push(c);
        m.ious.push(i);
        m.eligible.push(e);
    }
    Ok(m)
}

/// `clamp(floor(sum of the top_q pool IoUs), 1, pool size)`, or 0 for an
/// empty pool.
pub fn dynamic_k(pool_ious: &[f64], top_q: usize) -> usize {
    if pool_ious.is_empty() {
        return 0;
    }
    let mut sorted = pool_ious.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let sum: f64 = sorted.iter().take(top_q).sum();
    (sum.floor() as usize).clamp(1, pool_ious.len())
}

/// Dynamic-k selection followed by conflict resolution on a prepared cost
/// matrix. Equal costs resolve towards the lower candidate index, and a
/// contested candidate goes to the ground truth with the lower cost, then
/// the lower index. There is no refill pass after conflicts.
pub fn solve(matrix: &CostMatrix, top_q: usize, hard_mask: bool) -> AssignmentResult {
    let n = matrix.num_candidates();
    let mut gts = Vec::with_capacity(matrix.num_gts());
    let mut owners: Vec<Option<Assigned>> = vec![None; n];

    for j in 0..matrix.num_gts() {
        let pool: Vec<usize> = (0..n).filter(|&i| !hard_mask || matrix.eligible[j][i]).collect();
        let eligible = matrix.eligible[j].iter().filter(|&&e| e).count();
        let pool_ious: Vec<f64> = pool.iter().map(|&i| matrix.ious[j][i]).collect();
        let k = dynamic_k(&pool_ious, top_q);

        let mut ranked = pool;
        ranked.sort_by(|&a, &b| matrix.costs[j][a].total_cmp(&matrix.costs[j][b]).then(a.cmp(&b)));
        ranked.truncate(k);
        for &i in &ranked {
            let cost = matrix.costs[j][i];
            // GTs are visited in index order, so strict `<` keeps the lower
            // index on equal cost.
            if owners[i].is_none_or(|o| cost < o.cost) {
                owners[i] = Some(Assigned { gt: j, cost });
            }
        }
        gts.push(GtAssignment { candidates: Vec::new(), dynamic_k: k, claimed: ranked.len(), eligible });
    }
    AssignmentResult::from_owners(owners, gts)
}

/// SimOTA dynamic label assignment.
pub fn simota_assign(
    candidates: &[CandidatePrediction],
    gts: &[GtInstance],
    num_classes: usize,
    config: &AssignConfig,
) -> Result<AssignmentResult> {
    if candidates.is_empty() {
        return Err(Error::Config("SimOTA needs at least one candidate".into()));
    }
    let matrix = build_costs(candidates, gts, num_classes, config)?;
    Ok(solve(&matrix, config.top_q, config.hard_mask))
}
