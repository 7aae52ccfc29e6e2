//! Property tests for the structural invariants.

use beatswarm::choreography::{parse_score, LayoutDirective, Modality, Score, Segment};
use beatswarm::cli::render_score;
use beatswarm::core::Vec3;
use beatswarm::filter::BernsteinBasis;
use beatswarm::primitives::PrimitiveSpec;
use proptest::prelude::*;

fn primitive_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "hover",
        "rotate",
        "helix",
        "spiral",
        "wave",
        "ascend_descend",
        "expand_contract",
        "figure_eight",
        "line_sweep",
        "cascade",
        "pulse",
        "swap_halves",
    ])
    .prop_map(str::to_string)
}

prop_compose! {
    fn segment()(
        name in primitive_name(),
        start in 0..20u32,
        len in 1..10u32,
        count in 1..20usize,
        radius in 0.5..3.0f64,
        amp in -2.0..2.0f64,
    ) -> Segment {
        let mut params = std::collections::BTreeMap::new();
        // one arbitrary (possibly irrelevant or invalid) parameter: the
        // round trip must survive semantic nonsense
        params.insert("amplitude".to_string(), (amp * 1000.0).round() / 1000.0);
        Segment {
            spec: PrimitiveSpec {
                name,
                params,
                t_start: start as f64,
                t_end: (start + len) as f64,
            },
            layout: LayoutDirective::Circle {
                count,
                radius: (radius * 100.0).round() / 100.0,
                center: Vec3::new(0.0, 0.0, 1.0),
                phase: 0.0,
            },
        }
    }
}

prop_compose! {
    fn primitive_score()(segments in prop::collection::vec(segment(), 1..6)) -> Score {
        let swarm_size = segments.iter().map(|s| s.layout.drone_count()).max().unwrap_or(1);
        let mut score = Score::empty(Modality::Primitives, swarm_size);
        let mut segments = segments;
        segments.sort_by(|a, b| a.spec.t_start.total_cmp(&b.spec.t_start));
        score.segments = segments;
        score
    }
}

prop_compose! {
    fn waypoint_score()(
        drones in 1..8usize,
        beats in prop::collection::vec((0..100u32, -30..30i32, -30..30i32, 2..25i32), 1..5),
    ) -> Score {
        let mut score = Score::empty(Modality::Waypoints, drones);
        for (t, x, y, z) in beats {
            let key = Score::time_key(t as f64 * 0.5);
            let entry = score.waypoints.entry(key).or_default();
            for d in 0..drones {
                entry.push((d, Vec3::new(
                    x as f64 * 0.1 + d as f64 * 0.01,
                    y as f64 * 0.1,
                    z as f64 * 0.1,
                )));
            }
        }
        score
    }
}

proptest! {
    /// Rendering a score to DSL text and parsing it back is lossless.
    #[test]
    fn primitive_scores_round_trip(score in primitive_score()) {
        let rendered = render_score(&score);
        let parsed = parse_score(&rendered).expect("rendered scores must parse");
        prop_assert_eq!(parsed, score);
    }

    #[test]
    fn waypoint_scores_round_trip(score in waypoint_score()) {
        let rendered = render_score(&score);
        let parsed = parse_score(&rendered).expect("rendered scores must parse");
        prop_assert_eq!(parsed.waypoints, score.waypoints);
        prop_assert_eq!(parsed.swarm_size, score.swarm_size);
    }

    /// Partition of unity and endpoint interpolation for arbitrary basis
    /// shapes.
    #[test]
    fn bernstein_rows_partition_unity(degree in 2..12usize, k in 2..40usize) {
        let basis = BernsteinBasis::new(degree, k, 0.1).unwrap();
        for i in 0..k {
            let row = basis.w(0).row(i);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|v| *v >= -1e-15));
        }
        prop_assert_eq!(basis.w(0)[(0, 0)], 1.0);
        prop_assert_eq!(basis.w(0)[(k - 1, degree)], 1.0);
    }

    /// Beat detection output is sorted with gaps >= min_gap regardless of
    /// the curve.
    #[test]
    fn detected_beats_are_sorted_and_gapped(
        values in prop::collection::vec(0.0..1.0f64, 10..400),
        min_gap in 0.05..0.5f64,
    ) {
        let curve = beatswarm::music::NoveltyCurve {
            values,
            frame_rate: 86.13,
            t_offset: 0.0,
            raw_max: 100.0,
        };
        let times = beatswarm::music::detect_beats(&curve, min_gap, 0.3).unwrap();
        for pair in times.windows(2) {
            prop_assert!(pair[1] > pair[0]);
            prop_assert!(pair[1] - pair[0] >= min_gap - 1e-9);
        }
    }
}
