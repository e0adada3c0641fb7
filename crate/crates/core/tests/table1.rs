//! The five-objective wastewater outcomes: approximation, update, neutral
//! reference and a classification that relaxes nitrogen.

mod common;

use paint_core::geometry::Simplex;
use paint_core::nimbus::{build_subproblem, Classification, ObjectiveClass};
use paint_core::outcomes::{compute_ranges, parse_outcome_set, Format};
use paint_core::paint::{build_approximation, update_approximation, Approximation, PaintOptions, StageStats, TOOL_VERSION};
use paint_core::surrogate::{build_surrogate, neutral_reference, solve_scalarized};
use paint_core::{Error, OutcomeSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table1() -> OutcomeSet {
    let text = include_str!("fixtures/table1.csv");
    parse_outcome_set(text.as_bytes(), Format::Csv).unwrap()
}

#[test]
fn fixture_is_read_in_canonical_space() {
    let t = table1();
    assert_eq!(t.len(), 6);
    assert_eq!(t.point(1)[4], -9935.0);
    assert_eq!(t.provenance()[5], "p2");
}

#[test]
fn neutral_reference_is_midpoint_of_ranges() {
    let r = compute_ranges(&table1(), 1e-6).unwrap();
    let n = neutral_reference(&r);
    let expected = [17.205, 415.3, 21.135, 15055.0, -9732.0];
    for (a, b) in n.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9 * b.abs(), "{n:?}");
    }
}

#[test]
fn six_outcomes_give_an_inherently_nondominated_approximation() {
    let set = table1();
    let approx = build_approximation(&set, &PaintOptions::default()).unwrap();
    approx.validate().unwrap();
    assert_eq!(approx.stats.triangulation_cells, 1);
    // One 5-simplex: 6 + 15 + 20 + 15 + 6 faces with at most five vertices.
    assert_eq!(approx.stats.candidates, 62);
    assert!(approx.polytopes.iter().all(|p| p.len() <= 5));

    let norm = approx.normalized_vertices(1e-6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sample = |rng: &mut ChaCha8Rng| {
        let p = &approx.polytopes[rand::Rng::gen_range(rng, 0..approx.polytopes.len())];
        let l = common::barycentric(rng, p.len());
        common::combine(&norm, p.vertices(), &l)
    };
    for _ in 0..1000 {
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        assert!(!common::dominates(&a, &b, 1e-6) && !common::dominates(&b, &a, 1e-6));
        for v in &norm {
            assert!(!common::dominates(&a, v, 1e-6) && !common::dominates(v, &a, 1e-6));
        }
    }
}

#[test]
fn five_outcomes_are_too_few() {
    let set = table1().select(&[0, 1, 2, 3, 4]);
    assert!(matches!(build_approximation(&set, &PaintOptions::default()), Err(Error::TooFewPoints { .. })));
}

#[test]
fn adding_p2_rebuilds_over_six_outcomes() {
    let t = table1();
    let base = t.select(&[0, 1, 2, 3, 4]);
    // Five outcomes cannot be triangulated in five dimensions; start from
    // the vertices alone.
    let approx = Approximation {
        tool_version: TOOL_VERSION.into(),
        polytopes: (0..5).map(|i| Simplex::new(vec![i])).collect(),
        outcomes: base,
        stats: StageStats::default(),
    };
    let r = update_approximation(&approx, &t.select(&[5]), &PaintOptions::default()).unwrap();
    assert!(r.rebuilt);
    assert_eq!(r.added, 1);
    assert!(r.rejected.is_empty() && r.dropped.is_empty());
    assert_eq!(r.approximation.outcomes.len(), 6);
}

#[test]
fn relaxing_nitrogen_does_not_worsen_improved_objectives() {
    let set = table1();
    let approx = build_approximation(&set, &PaintOptions::default()).unwrap();
    let prob = build_surrogate(&approx, 1e-6).unwrap();
    let s3 = set.point(2).to_vec();
    use ObjectiveClass::*;
    let c = Classification {
        classes: vec![WorsenTo { level: 17.74 }, Improve, Improve, Keep, Keep],
        current_point: s3.clone(),
    };
    let spec = build_subproblem(&c, &prob.ranges, 1e-4).unwrap();
    let sol = solve_scalarized(&prob, &spec).unwrap();
    let w = &prob.ranges.weights;
    // Bounds in normalized units.
    assert!((sol.z[0] - 17.74) * w[0] <= 1e-7);
    for i in 1..5 {
        assert!((sol.z[i] - s3[i]) * w[i] <= 1e-7, "objective {i}: {} vs {}", sol.z[i], s3[i]);
    }
    // The reconstruction lies on the reported polytope.
    let z = prob.point_on(sol.polytope_index, &sol.lambda);
    for (a, b) in z.iter().zip(&sol.z) {
        assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
    }
}
