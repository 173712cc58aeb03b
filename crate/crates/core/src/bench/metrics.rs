//! CLEAR-MOT counts, MOTA and IDF1.

use std::collections::HashMap;
use std::fmt;

use crate::assignment::{solve, CostMatrix};
use crate::geometry::iou;
use crate::mot_io::LabeledBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub gt_count: usize,
    /// Identity-consistent true positives under the optimal global id map.
    pub idtp: usize,
    pub matches: usize,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MOTA {:.4}  IDF1 {:.4}  IDSW {}  FP {}  FN {}  GT {}",
            self.mota, self.idf1, self.id_switches, self.false_positives, self.false_negatives, self.gt_count
        )
    }
}

/// Frame-by-frame matching of ground truth to results.
///
/// Within a frame, each ground-truth object first keeps the hypothesis it was
/// last matched to when that hypothesis is present with IoU at or above the
/// threshold. The remaining pairs are matched by maximum cardinality, then
/// minimum total `1 − IoU`. A ground-truth object matched to a hypothesis
/// other than its previous one counts as an identity switch.
pub fn evaluate(gt: &[Vec<LabeledBox>], results: &[Vec<LabeledBox>], iou_threshold: f64) -> EvalReport {
    let n_frames = gt.len().max(results.len());
    let empty: Vec<LabeledBox> = Vec::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut fn_, mut idsw, mut gt_count, mut hyp_count, mut matched) = (0, 0, 0, 0, 0, 0);
    // (gt id, hyp id) -> frames with IoU >= threshold, for IDF1.
    let mut overlap: HashMap<(u64, u64), usize> = HashMap::new();

    for f in 0..n_frames {
        let g = gt.get(f).unwrap_or(&empty);
        let h = results.get(f).unwrap_or(&empty);
        gt_count += g.len();
        hyp_count += h.len();

        for a in g {
            for b in h {
                if iou(&a.bbox, &b.bbox) >= iou_threshold {
                    *overlap.entry((a.id, b.id)).or_default() += 1;
                }
            }
        }

        let mut g_done = vec![false; g.len()];
        let mut h_done = vec![false; h.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (i, a) in g.iter().enumerate() {
            let Some(&prev) = last_match.get(&a.id) else { continue };
            if let Some(j) = h.iter().position(|b| b.id == prev) {
                if !h_done[j] && iou(&a.bbox, &h[j].bbox) >= iou_threshold {
                    g_done[i] = true;
                    h_done[j] = true;
                    pairs.push((i, j));
                }
            }
        }

        let rest_g: Vec<usize> = (0..g.len()).filter(|&i| !g_done[i]).collect();
        let rest_h: Vec<usize> = (0..h.len()).filter(|&j| !h_done[j]).collect();
        if !rest_g.is_empty() && !rest_h.is_empty() {
            // Infeasible pairs cost more than any full set of feasible ones,
            // so the optimum maximizes the number of feasible matches first.
            let big = (rest_g.len().min(rest_h.len()) + 1) as f64;
            let mut data = Vec::with_capacity(rest_g.len() * rest_h.len());
            for &i in &rest_g {
                for &j in &rest_h {
                    let v = iou(&g[i].bbox, &h[j].bbox);
                    data.push(if v >= iou_threshold { 1.0 - v } else { big });
                }
            }
            let costs = CostMatrix::from_vec(rest_g.len(), rest_h.len(), data).expect("sized above");
            let result = solve(&costs, 1.0 - iou_threshold).expect("finite costs");
            for m in result.matches {
                pairs.push((rest_g[m.row], rest_h[m.col]));
            }
        }

        for &(i, j) in &pairs {
            let (gid, hid) = (g[i].id, h[j].id);
            if let Some(prev) = last_match.insert(gid, hid) {
                if prev != hid {
                    idsw += 1;
                }
            }
        }
        matched += pairs.len();
        fp += h.len() - pairs.len();
        fn_ += g.len() - pairs.len();
    }

    let idtp = identity_true_positives(&overlap);
    let mota = 1.0 - (fn_ + fp + idsw) as f64 / gt_count.max(1) as f64;
    let idf1 = if gt_count + hyp_count == 0 {
        1.0
    } else {
        2.0 * idtp as f64 / (gt_count + hyp_count) as f64
    };
    EvalReport {
        mota,
        idf1,
        id_switches: idsw,
        false_positives: fp,
        false_negatives: fn_,
        gt_count,
        idtp,
        matches: matched,
    }
}

/// Maximum total overlap over one-to-one maps between gt ids and hyp ids.
fn identity_true_positives(overlap: &HashMap<(u64, u64), usize>) -> usize {
    if overlap.is_empty() {
        return 0;
    }
    let mut gt_ids: Vec<u64> = overlap.keys().map(|k| k.0).collect();
    let mut hyp_ids: Vec<u64> = overlap.keys().map(|k| k.1).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    hyp_ids.sort_unstable();
    hyp_ids.dedup();
    let mut data = Vec::with_capacity(gt_ids.len() * hyp_ids.len());
    for g in &gt_ids {
        for h in &hyp_ids {
            data.push(-(overlap.get(&(*g, *h)).copied().unwrap_or(0) as f64));
        }
    }
    let costs = CostMatrix::from_vec(gt_ids.len(), hyp_ids.len(), data).expect("sized above");
    let result = solve(&costs, 0.0).expect("finite costs");
    result.matches.iter().map(|m| (-m.cost) as usize).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn lb(id: u64, x: f64) -> LabeledBox {
        LabeledBox {
            id,
            bbox: BoundingBox::from_ltwh(x, 0.0, 50.0, 100.0).unwrap(),
            score: 1.0,
        }
    }

    #[test]
    fn perfect_results() {
        let gt = vec![vec![lb(1, 0.0), lb(2, 200.0)]; 5];
        let r = evaluate(&gt, &gt, 0.5);
        assert_eq!(r.mota, 1.0);
        assert_eq!(r.idf1, 1.0);
        assert_eq!((r.id_switches, r.false_positives, r.false_negatives, r.gt_count), (0, 0, 0, 10));
    }

    #[test]
    fn empty_results() {
        let gt = vec![vec![lb(1, 0.0), lb(2, 200.0)]; 5];
        let r = evaluate(&gt, &[], 0.5);
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.idf1, 0.0);
        assert_eq!(r.false_negatives, 10);
    }

    #[test]
    fn identity_swap_fixture() {
        // Frame 1: A<->h1, B<->h2. Frame 2: hypotheses trade labels.
        // Both objects change partner: IDSW = 2, MOTA = 1 - 2/4.
        // Each (gt, hyp) pair overlaps in exactly one frame, so the best id
        // map scores IDTP = 2 and IDF1 = 2*2/(4+4).
        let gt = vec![vec![lb(1, 0.0), lb(2, 200.0)], vec![lb(1, 0.0), lb(2, 200.0)]];
        let res = vec![vec![lb(11, 0.0), lb(12, 200.0)], vec![lb(12, 0.0), lb(11, 200.0)]];
        let r = evaluate(&gt, &res, 0.5);
        assert_eq!(r.id_switches, 2);
        assert_eq!(r.mota, 0.5);
        assert_eq!(r.idtp, 2);
        assert_eq!(r.idf1, 0.5);
    }

    #[test]
    fn continuity_beats_better_overlap() {
        // gt 1 keeps hyp 10 although hyp 20 overlaps it better in frame 2.
        let gt = vec![vec![lb(1, 0.0)], vec![lb(1, 0.0)]];
        let res = vec![vec![lb(10, 0.0)], vec![lb(10, 10.0), lb(20, 1.0)]];
        let r = evaluate(&gt, &res, 0.5);
        assert_eq!(r.id_switches, 0);
        assert_eq!(r.false_positives, 1);
    }

    #[test]
    fn switch_counted_across_gap() {
        let gt = vec![vec![lb(1, 0.0)], vec![lb(1, 0.0)], vec![lb(1, 0.0)]];
        let res = vec![vec![lb(10, 0.0)], vec![], vec![lb(30, 0.0)]];
        let r = evaluate(&gt, &res, 0.5);
        assert_eq!(r.id_switches, 1);
        assert_eq!(r.false_negatives, 1);
        assert!((r.mota - (1.0 - 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn relabeling_results_is_harmless() {
        let gt = vec![vec![lb(1, 0.0), lb(2, 200.0)], vec![lb(1, 5.0), lb(2, 205.0)], vec![lb(1, 10.0)]];
        let res = vec![vec![lb(5, 2.0), lb(6, 230.0)], vec![lb(6, 5.0), lb(5, 205.0)], vec![lb(7, 10.0)]];
        let base = evaluate(&gt, &res, 0.5);
        let relabel = |id: u64| 1000 - id * 3;
        let res2: Vec<Vec<LabeledBox>> = res
            .iter()
            .map(|f| f.iter().map(|b| LabeledBox { id: relabel(b.id), ..*b }).collect())
            .collect();
        let other = evaluate(&gt, &res2, 0.5);
        assert_eq!(base.mota, other.mota);
        assert_eq!(base.idf1, other.idf1);
    }
}
