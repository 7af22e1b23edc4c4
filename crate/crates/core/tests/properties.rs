mod common;

use common::*;
use evigrid::evaluation::{dynamic_mse, mse};
use evigrid::prediction::{
    fuse_prongs, match_tracks, persistence_baseline, predict, predict_eogms, static_prong, HistoryFrame,
};
use evigrid::representation::{build_rgm, build_sgm, remove_ground, sgm_to_measurement, update_eogm};
use evigrid::segmentation::{gradient_check, segment_heuristic, segment_learned, train, SegModel, SegTrainConfig};
use evigrid::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn cfg16() -> GridConfig {
    small_grid(16, 16)
}

fn closure_ok(m: BeliefMass) -> bool {
    closure_error(m) <= 1e-9 && in_bounds(m)
}

fn close(a: BeliefMass, b: BeliefMass, tol: f64) -> bool {
    (a.m_o - b.m_o).abs() <= tol && (a.m_f - b.m_f).abs() <= tol && (a.m_u - b.m_u).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn combination_and_discount_stay_closed(a in mass(), b in mass(), g in 0.0..=1.0f64) {
        if let Ok(c) = combine_masses(a, b) {
            prop_assert!(closure_ok(c), "{c:?}");
        }
        prop_assert!(closure_ok(discount_mass(a, g)));
        prop_assert!(closure_ok(BeliefMass::from_channels_lossy(a.m_o * 1.01, a.m_f * 1.01)));
    }

    #[test]
    fn vacuous_is_neutral(m in mass()) {
        let c = combine_masses(m, BeliefMass::VACUOUS).unwrap();
        prop_assert!(close(c, m, 1e-12));
    }

    #[test]
    fn dempster_commutes_and_associates(a in mass(), b in mass(), c in mass()) {
        let k = |x: BeliefMass, y: BeliefMass| x.m_o * y.m_f + x.m_f * y.m_o;
        prop_assume!(k(a, b) <= 0.99);
        let ab = combine_masses(a, b).unwrap();
        prop_assert!(close(ab, combine_masses(b, a).unwrap(), 1e-12));
        let bc = combine_masses(b, c);
        prop_assume!(k(ab, c) <= 0.99 && k(b, c) <= 0.99);
        let bc = bc.unwrap();
        prop_assume!(k(a, bc) <= 0.99);
        let left = combine_masses(ab, c).unwrap();
        let right = combine_masses(a, bc).unwrap();
        prop_assert!(close(left, right, 1e-12), "{left:?} {right:?}");
    }

    #[test]
    fn swapping_non_max_components_keeps_class(m in mass()) {
        let v = [m.m_o, m.m_f, m.m_u];
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        // only strict maxima have an unambiguous argmax
        prop_assume!(v.iter().filter(|&&x| x == max).count() == 1);
        let i = v.iter().position(|&x| x == max).unwrap();
        let mut w = v;
        let (j, k) = match i { 0 => (1, 2), 1 => (0, 2), _ => (0, 1) };
        w.swap(j, k);
        let swapped = BeliefMass { m_o: w[0], m_f: w[1], m_u: w[2] };
        prop_assert_eq!(classify_mass(m), classify_mass(swapped));
    }

    #[test]
    fn identity_transform_keeps_cells(s in sgm(cfg16()), x in -5.0..5.0f64, y in -5.0..5.0f64, h in -3.0..3.0f64) {
        let pose = Pose2::new(x, y, h);
        let src = Sgm { pose, ..s.clone() };
        prop_assert_eq!(transform_grid(&src, &pose, &pose).grid, s.grid);
    }

    #[test]
    fn rgm_is_symmetric(a in sgm(cfg16()), b in sgm(cfg16())) {
        prop_assert_eq!(build_rgm(&a, &b).unwrap(), build_rgm(&b, &a).unwrap());
    }

    #[test]
    fn split_then_fuse_is_identity(g in eogm(cfg16()), m in mask(cfg16())) {
        let (s, d) = split_by_mask(&g, &m).unwrap();
        for i in 0..g.grid.cells.len() {
            let f = combine_masses(s.grid.cells[i], d.grid.cells[i]).unwrap();
            prop_assert_eq!(f, g.grid.cells[i]);
        }
    }

    #[test]
    fn eogm_update_stays_closed(prior in eogm(cfg16()), s in sgm(cfg16())) {
        let meas = sgm_to_measurement(&s, &MeasurementModel::default());
        let post = update_eogm(&prior, &meas).unwrap();
        prop_assert!(post.grid.cells.iter().all(|&m| closure_ok(m)));
    }

    #[test]
    fn heuristic_mask_is_occupied_and_monotone(
        s in sgm(cfg16()),
        r in mask(cfg16()),
        extra in mask(cfg16()),
        radius in 0usize..3,
        min_size in 1usize..4,
    ) {
        let params = HeuristicParams { dilation_radius: radius, min_component_size: min_size, ..HeuristicParams::default() };
        let rgm = Rgm { grid: r.grid.clone() };
        let more = Rgm { grid: r.grid.clone() };
        let mut more = more;
        for (c, &e) in more.grid.cells.iter_mut().zip(&extra.grid.cells) {
            *c |= e;
        }
        let m = segment_heuristic(&s, &rgm, &params).unwrap();
        let m2 = segment_heuristic(&s, &more, &params).unwrap();
        for i in 0..m.grid.cells.len() {
            if m.grid.cells[i] {
                prop_assert_eq!(s.grid.cells[i], CellClass::Occupied);
                prop_assert!(m2.grid.cells[i]);
            }
        }
    }

    #[test]
    fn learned_masks_nest_by_threshold(
        s in sgm(cfg16()),
        r in mask(cfg16()),
        weights in prop::collection::vec(-1.0..1.0f64, segmentation::feature_len(1) + 1),
        t1 in 0.01..0.99f64,
        t2 in 0.01..0.99f64,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let model = SegModel { half_width: 1, weights, trained_epochs: 1 };
        let rgm = Rgm { grid: r.grid };
        let a = segment_learned(&model, &s, &rgm, lo).unwrap();
        let b = segment_learned(&model, &s, &rgm, hi).unwrap();
        for (x, y) in a.grid.cells.iter().zip(&b.grid.cells) {
            prop_assert!(*x || !*y);
        }
    }

    #[test]
    fn gradient_matches_differences(
        weights in prop::collection::vec(-0.5..0.5f64, segmentation::feature_len(1) + 1),
        features in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0)], segmentation::feature_len(1)),
        label in any::<bool>(),
        w in 0.5..20.0f64,
    ) {
        let model = SegModel { half_width: 1, weights, trained_epochs: 0 };
        prop_assert!(gradient_check(&model, &features, label, w, 1e-5) < 1e-4);
    }

    #[test]
    fn is_is_symmetric_and_zero_on_self(a in class_grid(small_grid(8, 8)), b in class_grid(small_grid(8, 8))) {
        prop_assert_eq!(image_similarity(&a, &b).unwrap(), image_similarity(&b, &a).unwrap());
        prop_assert_eq!(image_similarity(&a, &a).unwrap(), 0.0);
        prop_assert!(image_similarity(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn full_mask_dynamic_mse_is_mse(p in prop::collection::vec(0.0..=1.0f64, 64), q in prop::collection::vec(0.0..=1.0f64, 64)) {
        let cfg = small_grid(8, 8);
        let a = Ogm { grid: Grid::from_cells(cfg, p).unwrap() };
        let b = Ogm { grid: Grid::from_cells(cfg, q).unwrap() };
        let all = DynamicMask { grid: Grid::filled(cfg, true) };
        prop_assert_eq!(mse(&a, &b).unwrap(), dynamic_mse(&a, &b, &all).unwrap());
    }

    #[test]
    fn iou_is_bounded(a in mask(cfg16()), b in mask(cfg16())) {
        let s = mask_iou(&a, &b).unwrap();
        for v in [s.static_iou, s.dynamic_iou, s.mean_iou] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(s.mean_iou, (s.static_iou + s.dynamic_iou) / 2.0);
    }

    #[test]
    fn vacuous_prong_fusion_is_identity(g in eogm(cfg16())) {
        let vac = Eogm::vacuous(*g.config(), g.pose, g.timestamp);
        let fused = fuse_prongs(std::slice::from_ref(&g), std::slice::from_ref(&vac)).unwrap();
        prop_assert_eq!(&fused[0].grid, &g.grid);
        let fused = fuse_prongs(std::slice::from_ref(&vac), std::slice::from_ref(&g)).unwrap();
        prop_assert_eq!(&fused[0].grid, &g.grid);
    }

    #[test]
    fn static_prong_ignorance_grows(g in eogm(cfg16()), gamma in 0.5..0.999f64) {
        let poses = vec![Pose2::default(); 6];
        let seq = static_prong(&g, &poses, gamma, 6).unwrap();
        for i in 0..g.grid.cells.len() {
            for w in seq.windows(2) {
                prop_assert!(w[1].grid.cells[i].m_u >= w[0].grid.cells[i].m_u);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sgm_ignores_point_order(
        pts in prop::collection::vec((-3.0..3.0f32, -3.0..3.0f32), 1..40),
        seed in any::<u64>(),
    ) {
        let cfg = RepresentationConfig { grid: small_grid(16, 16), ..RepresentationConfig::default() };
        let points: Vec<[f32; 3]> = pts.iter().map(|&(x, y)| [x, y, 1.0]).collect();
        let mut shuffled = points.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = build_sgm(&PointCloud { points, ..PointCloud::default() }, &cfg);
        let b = build_sgm(&PointCloud { points: shuffled, ..PointCloud::default() }, &cfg);
        prop_assert_eq!(a.grid, b.grid);
    }

    #[test]
    fn free_cells_lie_on_traced_rays(pts in prop::collection::vec((-5.0..5.0f32, -5.0..5.0f32), 1..30)) {
        let rcfg = RepresentationConfig { grid: small_grid(16, 16), ..RepresentationConfig::default() };
        let cfg = rcfg.grid;
        let points: Vec<[f32; 3]> = pts.iter().map(|&(x, y)| [x, y, 1.0]).collect();
        let cloud = PointCloud { points: points.clone(), ..PointCloud::default() };
        let sgm = build_sgm(&cloud, &rcfg);
        let mut covered = std::collections::HashSet::new();
        let half = cfg.half_extent_x() * (1.0 - 1e-9);
        for p in &points {
            let (x, y) = (p[0] as f64, p[1] as f64);
            let scale = (half / x.abs().max(y.abs())).min(1.0);
            let target = world_to_cell(x * scale, y * scale, &cfg).unwrap();
            covered.extend(raytrace_cells(cfg.ego_cell(), target, &cfg));
            if scale < 1.0 {
                covered.insert(target);
            }
        }
        for i in 0..cfg.cell_count() {
            if sgm.grid.cells[i] == CellClass::Free {
                prop_assert!(covered.contains(&cfg.cell_of(i)));
            }
        }
    }

    #[test]
    fn ground_filter_keeps_only_raised_points(zs in prop::collection::vec(-1.0..2.0f32, 0..50)) {
        let points: Vec<[f32; 3]> = zs.iter().map(|&z| [1.0, 1.0, z]).collect();
        let kept = remove_ground(&PointCloud { points, ..PointCloud::default() }, 0.2);
        prop_assert!(kept.points.iter().all(|p| p[2] > 0.2));
        prop_assert_eq!(kept.points.len(), zs.iter().filter(|&&z| z > 0.2).count());
    }

    #[test]
    fn tracks_ignore_component_order(
        blobs in prop::collection::vec((2usize..26, 2usize..26, 1usize..3, 1usize..3), 1..4),
        shift in (0usize..3, 0usize..3),
    ) {
        let grid = small_grid(32, 32);
        let blob = |r: usize, c: usize, h: usize, w: usize| {
            let mut v = Vec::new();
            for dr in 0..h { for dc in 0..w { v.push(Cell::new(r + dr, c + dc)); } }
            v
        };
        let prev: Vec<Vec<Cell>> = blobs.iter().map(|&(r, c, h, w)| blob(r, c, h, w)).collect();
        let curr: Vec<Vec<Cell>> = blobs.iter().map(|&(r, c, h, w)| blob(r + shift.0, c + shift.1, h, w)).collect();
        let cfg = PredictorConfig::default();
        let a = match_tracks(&prev, &curr, &grid, &cfg);
        let mut rev = prev.clone();
        rev.reverse();
        let b = match_tracks(&rev, &curr, &grid, &cfg);
        let key = |t: &[Track]| {
            let mut v: Vec<_> = t.iter().map(|t| (t.cells.clone(), t.velocity)).collect();
            v.sort_by(|x, y| x.0.cmp(&y.0));
            v
        };
        prop_assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn empty_masks_match_persistence(g in eogm(cfg16()), dx in -1.0..1.0f64) {
        let cfg = PredictorConfig {
            sequence: SequenceSpec { past_frames: 3, horizon: 4, frame_dt: 0.1 },
            ..PredictorConfig::default()
        };
        let history: Vec<HistoryFrame> = (0..3)
            .map(|k| HistoryFrame {
                eogm: Eogm { pose: Pose2::new(dx * k as f64, 0.0, 0.0), ..g.clone() },
                mask: DynamicMask::empty(*g.config()),
            })
            .collect();
        let a = predict(&history, None, &cfg).unwrap();
        let b = persistence_baseline(&history, None, &cfg).unwrap();
        prop_assert_eq!(a, b);
        let closed = predict_eogms(&history, None, &cfg).unwrap();
        prop_assert!(closed.iter().all(|e| e.grid.cells.iter().all(|&m| closure_ok(m))));
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = cfg16();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let data: Vec<(Sgm, Rgm, DynamicMask)> = (0..4)
        .map(|_| {
            let s = sgm(cfg).new_tree(&mut runner).unwrap().current();
            let r = mask(cfg).new_tree(&mut runner).unwrap().current();
            let m = mask(cfg).new_tree(&mut runner).unwrap().current();
            (s, Rgm { grid: r.grid }, m)
        })
        .collect();
    let tc = SegTrainConfig { epochs: 3, half_width: 1, seed: 9, ..SegTrainConfig::default() };
    assert_eq!(train(&data, &tc).unwrap(), train(&data, &tc).unwrap());
}
