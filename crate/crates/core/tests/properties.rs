mod common;

use declutter::clutter::{compute_clutter_map, FcmParams};
use declutter::experiment::default_workspace;
use declutter::geometry::{Rect, Vec2};
use declutter::grasp::{compute_gdi, kmeans, GdiParams};
use declutter::image::{Grid, Pixel};
use declutter::simscene::{apply_push, default_catalog, grasp_at, render, spawn_heap, CameraModel, GripperParams, PushStroke};
use proptest::prelude::*;

fn ws() -> Rect {
    default_workspace()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clutter_is_zero_on_constant_images(r in 0.0..1.0f64, g in 0.0..1.0f64, b in 0.0..1.0f64) {
        let img = Grid::filled(48, 40, [r, g, b]);
        let map = compute_clutter_map(&img, &FcmParams::default()).unwrap();
        prop_assert!(map.values.data().iter().all(|v| v.abs() <= 1e-9));
    }

    #[test]
    fn clutter_map_rotates_with_the_image(seed in 0u64..1000) {
        let scene = spawn_heap(seed, 6, &default_catalog(), ws(), 0.65).unwrap();
        let cam = CameraModel::covering(&ws(), 200.0);
        let (rgb, _) = render(&scene, &cam);
        let p = FcmParams::default();
        let a = compute_clutter_map(&rgb, &p).unwrap().values.rotate90();
        let b = compute_clutter_map(&rgb.rotate90(), &p).unwrap().values;
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn gdi_rotates_with_the_image(seed in 0u64..1000, step in 0usize..12, cx in 28i64..52, cy in 28i64..52) {
        let scene = spawn_heap(seed, 5, &default_catalog(), ws(), 0.65).unwrap();
        let cam = CameraModel::covering(&ws(), 180.0);
        let (_, depth) = render(&scene, &cam);
        let angle = (step as f64 * 15.0).to_radians();
        let p = GdiParams::default();
        let g = compute_gdi(&depth, Pixel::new(cx, cy), angle, &p, 40.0).unwrap();
        // (x, y) -> (y, w - 1 - x) turns directions by -90°
        let w = depth.width() as i64;
        let rot = depth.rotate90();
        let gr = compute_gdi(&rot, Pixel::new(cy, w - 1 - cx), angle - std::f64::consts::FRAC_PI_2, &p, 40.0).unwrap();
        prop_assert!((g - gr).abs() <= 1e-6, "{g} vs {gr}");
    }

    #[test]
    fn kmeans_objective_never_increases(seed in 0u64..10_000, k in 1usize..12, n in 20usize..300) {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = (i as u64).wrapping_mul(2_654_435_761).wrapping_add(seed) % 10_007;
                [(t % 101) as f64, (t / 101) as f64]
            })
            .collect();
        let r = kmeans(&pts, k, seed).unwrap();
        for w in r.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.objective_trace);
        }
    }

    #[test]
    fn simulator_actions_never_leave_penetration(
        seed in 0u64..10_000,
        n in 2usize..20,
        moves in prop::collection::vec((0.0..0.45f64, 0.0..0.45f64, 0.0..std::f64::consts::TAU, 0.02..0.2f64, any::<bool>()), 1..6),
    ) {
        let mut scene = spawn_heap(seed, n, &default_catalog(), ws(), 0.65).unwrap();
        prop_assert!(common::max_overlap(&scene) <= 1e-4);
        let g = GripperParams::default();
        for (x, y, a, len, push) in moves {
            let before = scene.len();
            let start = Vec2::new(x, y);
            if push {
                let stroke = PushStroke { start, end: start + Vec2::from_angle(a) * len };
                let Ok((next, _)) = apply_push(&scene, &stroke, &g) else { continue };
                prop_assert_eq!(next.len(), before);
                scene = next;
            } else {
                let (next, outcome) = grasp_at(&scene, start, a, &g);
                prop_assert_eq!(next.len(), before - outcome.picked_ids.len());
                scene = next;
            }
            prop_assert!(common::max_overlap(&scene) <= 1e-4, "overlap {}", common::max_overlap(&scene));
            for o in &scene.objects {
                let b = o.footprint().bounds();
                let ws = scene.workspace;
                let excess = (ws.min.x - b.min.x).max(ws.min.y - b.min.y).max(b.max.x - ws.max.x).max(b.max.y - ws.max.y);
                prop_assert!(excess <= 1e-4, "object {} leaves the workspace by {excess}", o.id);
            }
        }
    }
}

#[test]
fn policy_grid_fires_exactly_one_rule() {
    common::check_policy_partition().unwrap();
}

#[test]
fn fifty_episode_batches_are_byte_identical() {
    common::check_determinism().unwrap();
}

#[test]
fn long_random_action_sequences_stay_penetration_free() {
    let summary = common::check_non_penetration(100, 8).unwrap();
    println!("{summary}");
}
