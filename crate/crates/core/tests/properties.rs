use std::collections::BTreeMap;

use proptest::prelude::*;

use momentq::assign::{build_costs, solve, AssignConfig, CandidatePrediction, CostMatrix, GtInstance};
use momentq::diagnose::near_replicates;
use momentq::eval::{evaluate, EvalConfig, RecallMode};
use momentq::pyramid::PyramidPoint;
use momentq::{Dataset, GroundTruth, PredictionSet, ScoredSegment, Segment, Video};

const DURATION: f64 = 60.0;
type Gts = Vec<(f64, f64, usize)>;
type Preds = Vec<(f64, f64, usize, f64)>;

const LABELS: [&str; 3] = ["a", "b", "c"];

fn interval() -> impl Strategy<Value = (f64, f64)> {
    (0.0..DURATION - 1.0, 0.5..20.0).prop_map(|(s, len): (f64, f64)| (s, (s + len).min(DURATION)))
}

fn gts() -> impl Strategy<Value = Gts> {
    prop::collection::vec((interval(), 0..LABELS.len()).prop_map(|((s, e), l)| (s, e, l)), 0..6)
}

fn preds() -> impl Strategy<Value = Preds> {
    prop::collection::vec((interval(), 0..LABELS.len(), 0.01..1.0).prop_map(|((s, e), l, p)| (s, e, l, p)), 0..10)
}

fn fixture(videos: &[(Gts, Preds)]) -> (Dataset, PredictionSet) {
    let mut dataset = Dataset::new();
    let mut map = BTreeMap::new();
    for (i, (g, p)) in videos.iter().enumerate() {
        let id = format!("v{i}");
        let ground_truths =
            g.iter().map(|&(s, e, l)| GroundTruth::new(Segment::new(s, e).unwrap(), LABELS[l])).collect();
        dataset.insert(id.clone(), Video { duration: DURATION, ground_truths }).unwrap();
        let scored = p
            .iter()
            .map(|&(s, e, l, sc)| ScoredSegment::new(Segment::new(s, e).unwrap(), LABELS[l], sc).unwrap())
            .collect();
        map.insert(id, scored);
    }
    (dataset, PredictionSet::from_map(map))
}

fn eval_config() -> EvalConfig {
    EvalConfig {
        thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        recall_ks: vec![1, 2, 3, 5],
        recall_mode: RecallMode::Micro,
    }
}

fn videos() -> impl Strategy<Value = Vec<(Gts, Preds)>> {
    prop::collection::vec((gts(), preds()), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn map_does_not_increase_with_threshold(v in videos()) {
        let (d, p) = fixture(&v);
        let r = evaluate(&d, &p, &eval_config()).unwrap();
        for w in r.map_at.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12, "{:?}", r.map_at);
        }
        let mean = r.map_at.iter().sum::<f64>() / r.map_at.len() as f64;
        prop_assert!((r.average_map - mean).abs() < 1e-12);
    }

    #[test]
    fn report_is_invariant_to_monotone_score_maps(v in videos()) {
        let (d, p) = fixture(&v);
        let squashed = p.map_videos(|_, preds| {
            preds.iter().map(|s| ScoredSegment { score: s.score.powi(3) * 0.5, ..s.clone() }).collect()
        });
        let cfg = eval_config();
        prop_assert_eq!(evaluate(&d, &p, &cfg).unwrap(), evaluate(&d, &squashed, &cfg).unwrap());
    }

    #[test]
    fn recall_does_not_decrease_with_k(v in videos(), macro_mode in any::<bool>()) {
        let (d, p) = fixture(&v);
        let mut cfg = eval_config();
        if macro_mode {
            cfg.recall_mode = RecallMode::Macro;
        }
        let r = evaluate(&d, &p, &cfg).unwrap();
        for w in r.recall.windows(2) {
            for (a, b) in w[0].values.iter().zip(&w[1].values) {
                prop_assert!(a <= b);
            }
        }
        for x in r.recall.iter().flat_map(|row| &row.values).chain(&r.map_at) {
            prop_assert!((0.0..=1.0).contains(x));
        }
    }

    #[test]
    fn trailing_disjoint_prediction_cannot_help(v in videos(), label in 0..LABELS.len()) {
        let (d, p) = fixture(&v);
        // Videos are stretched so the appended prediction lies past every
        // annotation.
        let mut d2 = Dataset::new();
        for (id, video) in d.iter() {
            d2.insert(id.clone(), Video { duration: DURATION + 2.0, ground_truths: video.ground_truths.clone() }).unwrap();
        }
        let floor = p.iter().flat_map(|(_, s)| s.iter().map(|x| x.score)).fold(1.0, f64::min);
        let extra = p.map_videos(|_, preds| {
            let mut out = preds.to_vec();
            out.push(ScoredSegment::new(Segment::new(DURATION + 0.5, DURATION + 1.5).unwrap(), LABELS[label], floor / 2.0).unwrap());
            out
        });
        let cfg = eval_config();
        let before = evaluate(&d2, &p, &cfg).unwrap();
        let after = evaluate(&d2, &extra, &cfg).unwrap();
        for (cat, aps) in &before.ap {
            for (a, b) in aps.iter().zip(&after.ap[cat]) {
                prop_assert!(b <= a);
            }
        }
        prop_assert_eq!(before.recall, after.recall);
    }

    #[test]
    fn near_replicates_are_order_independent(g in gts(), thr in 0.3..1.0f64) {
        let (d, _) = fixture(&[(g.clone(), vec![])]);
        let mut rev = g;
        rev.reverse();
        let (d_rev, _) = fixture(&[(rev, vec![])]);
        let a = near_replicates(&d, thr, false).unwrap();
        let b = near_replicates(&d_rev, thr, false).unwrap();
        prop_assert_eq!(a.flagged_count, b.flagged_count);
        prop_assert_eq!(a.pairs.len(), b.pairs.len());
        for pair in &a.pairs {
            prop_assert!(pair.first < pair.second);
        }
    }
}

fn assign_instance() -> impl Strategy<Value = (Vec<CandidatePrediction>, Vec<GtInstance>)> {
    let cand = (0..32usize, interval(), prop::collection::vec(0.0..1.0f64, 2)).prop_map(|(i, (s, e), probs)| {
        CandidatePrediction {
            point: PyramidPoint {
                time: i as f64 + 0.5,
                level: 0,
                stride: 1.0,
                range_min: 0.0,
                range_max: f64::INFINITY,
            },
            class_probs: probs,
            decoded: Segment::new(s, e).unwrap(),
        }
    });
    let gt = ((0.0..28.0f64, 1.0..10.0f64), 0..2usize)
        .prop_map(|((s, len), label)| GtInstance { segment: Segment::new(s, s + len).unwrap(), label });
    (prop::collection::vec(cand, 1..12), prop::collection::vec(gt, 0..4))
}

fn scaled(m: &CostMatrix, a: f64) -> CostMatrix {
    CostMatrix { costs: m.costs.iter().map(|r| r.iter().map(|c| c * a).collect()).collect(), ..m.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn simota_assigns_each_candidate_at_most_once((cands, gts) in assign_instance(), soft in any::<bool>()) {
        let cfg = AssignConfig { hard_mask: !soft, ..AssignConfig::default() };
        let m = build_costs(&cands, &gts, 2, &cfg).unwrap();
        let r = solve(&m, cfg.top_q, cfg.hard_mask);
        let mut seen = vec![0usize; cands.len()];
        for (j, g) in r.gts.iter().enumerate() {
            for &i in &g.candidates {
                seen[i] += 1;
                prop_assert_eq!(r.candidates[i].unwrap().gt, j);
            }
            prop_assert!(g.candidates.len() <= g.dynamic_k);
            if !soft && g.eligible > 0 {
                prop_assert!(g.dynamic_k >= 1 && g.claimed >= 1);
            }
        }
        prop_assert!(seen.iter().all(|&n| n <= 1));
        prop_assert_eq!(seen.iter().sum::<usize>(), r.num_positive());
    }

    #[test]
    fn simota_selection_is_invariant_to_positive_cost_scaling(
        (cands, gts) in assign_instance(),
        a in 0.01..100.0f64,
    ) {
        let cfg = AssignConfig::default();
        let m = build_costs(&cands, &gts, 2, &cfg).unwrap();
        let base = solve(&m, cfg.top_q, true);
        let other = solve(&scaled(&m, a), cfg.top_q, true);
        prop_assert_eq!(
            base.candidates.iter().map(|c| c.map(|x| x.gt)).collect::<Vec<_>>(),
            other.candidates.iter().map(|c| c.map(|x| x.gt)).collect::<Vec<_>>()
        );
        prop_assert_eq!(build_costs(&cands, &gts, 2, &cfg).unwrap(), m);
    }
}
