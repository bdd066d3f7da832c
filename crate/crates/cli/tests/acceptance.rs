//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (run with `-- --nocapture` to see them).
//!
//! Criteria:
//! 1. residual soundness on synthetic scenes (static < 1e-3; moving
//!    footprint grows with stride), under 30 s
//! 2. strip-pooling oracle, 1000 tensors, 1e-6
//! 3. fusion oracle, 1000 instances, 1e-6, weight sum = C
//! 4. spatial-guided block: zero-fusion identity (bitwise) + oracle 1e-6
//! 5. Lovász oracle, exhaustive binary ≤ 6 samples, 1e-9
//! 6. stride sampling frequencies within ±0.01 over 1e5 draws
//! 7. end-to-end golden report on the moving-box fixture + degenerate
//!    baseline comparison
//! 8. projection round trip and winner minimality
//! 9. soft performance targets (reported, not failing)

use std::process::Command;
use std::time::Instant;

use lidar_mos::blocks::{mga_fuse, mga_fuse_stages, sapl, FusionParams, Tensor};
use lidar_mos::dataset::Scan;
use lidar_mos::geometry::Pose;
use lidar_mos::loss::lovasz_softmax;
use lidar_mos::oracle;
use lidar_mos::projection::{back_project, project, ProjConfig};
use lidar_mos::residual::{compute_residual, sample_stride, StrideDistribution};
use lidar_mos::siem::{sgb_forward, voxelize, SgbParams};
use lidar_mos::synth::{gen_sequence, scenes, SensorModel};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn proj_cfg(sensor: &SensorModel<f64>) -> ProjConfig<f64> {
    ProjConfig {
        height: sensor.rings,
        width: sensor.azimuth_steps,
        fov_up_deg: sensor.fov_up_deg,
        fov_down_deg: sensor.fov_down_deg,
    }
}

fn unpack(frames: &[lidar_mos::synth::Frame<f64>]) -> (Vec<Scan<f64>>, Vec<Pose<f64>>) {
    (
        frames.iter().map(|f| f.scan.clone()).collect(),
        frames.iter().map(|f| f.pose).collect(),
    )
}

#[test]
fn criterion_1_residual_soundness() {
    let start = Instant::now();

    // Static-only 20-frame sequence with ego motion and 0.01 m noise.
    let static_cfg = scenes::static_arena::<f64>(1001);
    assert!((static_cfg.sensor.noise_sigma - 0.01).abs() < 1e-12);
    let frames = gen_sequence(&static_cfg, 20).unwrap();
    let pc = proj_cfg(&static_cfg.sensor);
    let (scans, poses) = unpack(&frames);
    let current = project(&scans[19], &pc).unwrap();
    let mut static_means = Vec::new();
    for stride in [1usize, 2, 3] {
        let stack = compute_residual(&current, 19, &scans, &poses, 3, stride, &pc).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for map in stack.maps() {
            for (px, v) in map.indexed_iter() {
                if current.valid[px] {
                    sum += v;
                    n += 1;
                }
            }
        }
        let mean = sum / n as f64;
        assert!(
            mean < 1e-3,
            "static scene stride {stride}: mean residual {mean:.3e} ≥ 1e-3"
        );
        static_means.push(mean);
    }

    // Box moving 2 m/frame: footprint residual strictly larger at Δt=3.
    let moving_cfg = scenes::moving_box::<f64>(1002);
    assert!((moving_cfg.actors.last().unwrap().speed() - 2.0).abs() < 1e-12);
    let frames = gen_sequence(&moving_cfg, 20).unwrap();
    let pc = proj_cfg(&moving_cfg.sensor);
    let (scans, poses) = unpack(&frames);
    let current = project(&scans[19], &pc).unwrap();
    let footprint_mean = |stride: usize| -> f64 {
        let stack = compute_residual(&current, 19, &scans, &poses, 3, stride, &pc).unwrap();
        let mut sum = 0.0;
        let mut n = 0usize;
        for map in stack.maps() {
            for (px, v) in map.indexed_iter() {
                let Some(idx) = current.index[px] else { continue };
                if frames[19].labels.semantic(idx as usize) == 252 {
                    sum += v;
                    n += 1;
                }
            }
        }
        assert!(n > 100, "footprint too small: {n} pixels");
        sum / n as f64
    };
    let at_1 = footprint_mean(1);
    let at_3 = footprint_mean(3);
    assert!(
        at_3 > at_1,
        "footprint residual must grow with stride: Δt=1 {at_1:.4} vs Δt=3 {at_3:.4}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?} (budget 30 s)");
    println!(
        "[PASS] criterion 1: static means {static_means:?} < 1e-3; footprint Δt=1 {at_1:.4} < Δt=3 {at_3:.4}; {elapsed:.2?}"
    );
}

#[test]
fn criterion_2_sapl_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut max_err = 0.0f64;
    let mut max_mean_drift = 0.0f64;
    for _ in 0..1000 {
        let c = rng.random_range(1..=8);
        let h = 2 * rng.random_range(1..=32);
        let w = 4 * rng.random_range(1..=32);
        let t = Tensor::from_shape_fn((c, h, w), |_| rng.random_range(-2.0f64..2.0));
        let ours = sapl(&t, 2, 4).unwrap();
        let brute = oracle::block_mean_naive(&t, 2, 4);
        for (a, b) in ours.iter().zip(brute.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        let mean_in: f64 = t.iter().sum::<f64>() / t.len() as f64;
        let mean_out: f64 = ours.iter().sum::<f64>() / ours.len() as f64;
        max_mean_drift = max_mean_drift.max((mean_in - mean_out).abs());
        assert!(
            (mean_in - mean_out).abs() < 1e-6,
            "mean preservation violated: {mean_in} vs {mean_out}"
        );
    }
    assert!(max_err < 1e-6, "max abs error {max_err:.3e}");
    println!(
        "[PASS] criterion 2: 1000 tensors ≤ 8×64×128, max err {max_err:.3e}, max mean drift {max_mean_drift:.3e}"
    );
}

#[test]
fn criterion_3_mga_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_err = 0.0f64;
    let mut max_sum_err = 0.0f64;
    for _ in 0..1000 {
        let c = rng.random_range(1..=6);
        let h = rng.random_range(1..=6);
        let w = rng.random_range(1..=6);
        let sem = Tensor::from_shape_fn((c, h, w), |_| rng.random_range(-2.0f64..2.0));
        let mot = Tensor::from_shape_fn((c, h, w), |_| rng.random_range(-2.0f64..2.0));
        let params = FusionParams {
            gate_weights: Array2::from_shape_fn((c, c), |_| rng.random_range(-1.0..1.0)),
            gate_bias: Array1::from_shape_fn(c, |_| rng.random_range(-1.0..1.0)),
            attn_weights: Array2::from_shape_fn((c, c), |_| rng.random_range(-1.0..1.0)),
            attn_bias: Array1::from_shape_fn(c, |_| rng.random_range(-1.0..1.0)),
        };
        let ours = mga_fuse(&sem, &mot, &params).unwrap();
        let reference = oracle::mga_reference(&sem, &mot, &params);
        for (a, b) in ours.iter().zip(reference.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        let stages = mga_fuse_stages(&sem, &mot, &params).unwrap();
        let sum: f64 = stages.channel_weights.iter().sum();
        max_sum_err = max_sum_err.max((sum - c as f64).abs());
        assert!((sum - c as f64).abs() < 1e-6, "weights sum {sum} vs C = {c}");
    }
    assert!(max_err < 1e-6, "max abs error {max_err:.3e}");
    println!(
        "[PASS] criterion 3: 1000 instances, max err {max_err:.3e}, max weight-sum err {max_sum_err:.3e}"
    );
}

#[test]
fn criterion_4_sgb_identity_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_err = 0.0f64;
    for case in 0..100 {
        let channels = rng.random_range(1..=4);
        let n = rng.random_range(5..60);
        let points: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ]
            })
            .collect();
        let features = Array2::from_shape_fn((n, channels), |_| rng.random_range(-1.0..1.0));
        let grid = voxelize(&points, &features, 0.2).unwrap();

        // Zero fusion weights: bitwise identity.
        let zero = SgbParams::<f64>::zeros(2, channels);
        let out = sgb_forward(&grid, &zero).unwrap();
        for (a, b) in out.features().iter().zip(grid.features().iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "case {case}: identity broken");
        }

        // Random weights against the dense-cube oracle.
        let mut params = SgbParams::zeros(rng.random_range(1..=3), channels);
        for b in &mut params.branches {
            for t in &mut b.taps {
                t.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            }
            b.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        params.fuse_weights.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        params.fuse_bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let ours = sgb_forward(&grid, &params).unwrap();
        let reference = oracle::sgb_reference(&grid, &params);
        for (a, b) in ours.features().iter().zip(reference.iter()) {
            max_err = max_err.max((a - b).abs());
        }
    }
    assert!(max_err < 1e-6, "max abs error {max_err:.3e}");
    println!("[PASS] criterion 4: 100 grids, zero-fusion bitwise identity, oracle max err {max_err:.3e}");
}

#[test]
fn criterion_5_lovasz_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut max_err = 0.0f64;
    let mut cases = 0usize;
    for n in 1..=6usize {
        for mask in 0..(1u32 << n) {
            let labels: Vec<Option<usize>> =
                (0..n).map(|i| Some(((mask >> i) & 1) as usize)).collect();
            for _ in 0..100 {
                let row_p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let probs = Array2::from_shape_fn((n, 2), |(i, k)| {
                    if k == 0 {
                        row_p[i]
                    } else {
                        1.0 - row_p[i]
                    }
                });
                let ours = lovasz_softmax(probs.view(), &labels).unwrap();
                let reference = oracle::lovasz_softmax_reference(&probs, &labels);
                max_err = max_err.max((ours - reference).abs());
                cases += 1;
            }
        }
    }
    assert!(max_err < 1e-9, "max abs error {max_err:.3e}");

    // Single-sample binary closed form: loss = 1 − p(true class).
    for p in [0.0f64, 0.123, 0.5, 0.987, 1.0] {
        let probs = ndarray::array![[p, 1.0 - p]];
        let loss = lovasz_softmax(probs.view(), &[Some(0)]).unwrap();
        assert!((loss - (1.0 - p)).abs() < 1e-12);
    }
    println!("[PASS] criterion 5: {cases} exhaustive binary instances, max err {max_err:.3e}; closed form holds");
}

#[test]
fn criterion_6_augmentation_distribution() {
    let dist = StrideDistribution::new(vec![1, 2, 3], vec![0.5, 0.25, 0.25]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        counts[sample_stride(&dist, &mut rng) - 1] += 1;
    }
    let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    for (f, p) in freqs.iter().zip([0.5, 0.25, 0.25]) {
        assert!((f - p).abs() < 0.01, "frequency {f} vs target {p}");
    }
    println!("[PASS] criterion 6: frequencies {freqs:?} within ±0.01 of [0.5, 0.25, 0.25]");
}

#[test]
fn criterion_7_end_to_end_golden_report() {
    let binary = env!("CARGO_BIN_EXE_lidar-mos");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        let out = Command::new(binary)
            .args(args)
            .current_dir(dir.path())
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "command {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    run(&[
        "synth-gen",
        "--scene",
        "moving-box",
        "--frames",
        "20",
        "--seed",
        "2024",
        "--out",
        data.to_str().unwrap(),
        "--sequence",
        "00",
    ]);
    let eval = |out: &str| {
        run(&[
            "baseline-eval",
            "--root",
            data.to_str().unwrap(),
            "--sequence",
            "00",
            "--k",
            "3",
            "--stride-preset",
            "max",
            "--threshold",
            "0.05",
            "--seed",
            "2024",
            "--out",
            out,
        ]);
        std::fs::read_to_string(dir.path().join(out).join("report.kv")).unwrap()
    };

    let report = eval("eval_a");
    let again = eval("eval_b");
    assert_eq!(report, again, "two runs under the same seed must match");

    let golden = include_str!("golden/moving_box_report.kv");
    assert_eq!(
        report, golden,
        "report deviates from the golden fixture report"
    );

    // The baseline must beat both degenerate baselines on moving IoU.
    let field = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|v| v.trim_start_matches(" = ").parse().ok())
            .unwrap_or_else(|| panic!("missing {key} in report"))
    };
    let baseline_iou = field("iou.moving");
    let tp = field("confusion.moving.moving");
    let fn_ = field("confusion.moving.static");
    let fp = field("confusion.static.moving");
    let tn = field("confusion.static.static");
    let moving_truth = tp + fn_;
    let total = tp + fn_ + fp + tn;
    assert!(moving_truth > 0.0, "fixture must contain moving truth");
    let all_static_iou = 0.0;
    let all_moving_iou = moving_truth / total;
    assert!(
        baseline_iou > all_static_iou && baseline_iou > all_moving_iou,
        "baseline {baseline_iou} vs all-static {all_static_iou} / all-moving {all_moving_iou:.4}"
    );
    println!(
        "[PASS] criterion 7: golden report reproduced; baseline IoU {baseline_iou:.4} > all-moving {all_moving_iou:.4} > all-static 0"
    );
}

#[test]
fn criterion_8_projection_round_trip() {
    // All-distinct-pixel scan from bin centers, ≤ 10⁴ points.
    let cfg = ProjConfig::<f64>::default();
    let fov_up = cfg.fov_up_deg.to_radians();
    let fov = (cfg.fov_up_deg - cfg.fov_down_deg).to_radians();
    let mut points = Vec::new();
    let mut expected = Vec::new();
    for ring in 0..cfg.height {
        for step in (0..cfg.width).step_by(14) {
            let pitch = fov_up - (ring as f64 + 0.5) * fov / cfg.height as f64;
            let yaw = std::f64::consts::PI * (1.0 - 2.0 * (step as f64 + 0.5) / cfg.width as f64);
            let r = 4.0 + ((ring * 13 + step) % 57) as f64;
            points.push(lidar_mos::dataset::Point {
                x: r * pitch.cos() * yaw.cos(),
                y: r * pitch.cos() * yaw.sin(),
                z: r * pitch.sin(),
                remission: 0.5,
            });
            expected.push((ring + step) as f64);
        }
    }
    let scan = Scan { points };
    assert!(scan.len() <= 10_000, "{} points", scan.len());
    let image = project(&scan, &cfg).unwrap();
    assert_eq!(image.valid_count(), scan.len(), "pixels are distinct");
    let mut grid = Array2::zeros((cfg.height, cfg.width));
    for (i, px) in image.point_pixels.iter().enumerate() {
        let (v, u) = px.unwrap();
        grid[(v as usize, u as usize)] = expected[i];
    }
    let back = back_project(&grid, &image, scan.len(), f64::NAN).unwrap();
    assert_eq!(back, expected, "round trip must be the identity");
    let distinct = scan.len();

    // Winner minimality by brute force on a conflict-heavy scan.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let small = ProjConfig::<f64> {
        height: 24,
        width: 96,
        ..Default::default()
    };
    let scan = Scan {
        points: (0..10_000)
            .map(|_| {
                let r: f64 = rng.random_range(2.0..80.0);
                let yaw: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let pitch: f64 = rng.random_range(-0.45..0.06);
                lidar_mos::dataset::Point {
                    x: r * pitch.cos() * yaw.cos(),
                    y: r * pitch.cos() * yaw.sin(),
                    z: r * pitch.sin(),
                    remission: 0.5,
                }
            })
            .collect(),
    };
    let image = project(&scan, &small).unwrap();
    let mut best: std::collections::HashMap<(u32, u32), (f64, usize)> = Default::default();
    for (i, px) in image.point_pixels.iter().enumerate() {
        let Some(px) = px else { continue };
        let p = &scan.points[i];
        let r = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
        let e = best.entry(*px).or_insert((f64::INFINITY, usize::MAX));
        if r < e.0 {
            *e = (r, i);
        }
    }
    for (px, (r, i)) in &best {
        let at = (px.0 as usize, px.1 as usize);
        assert_eq!(image.index[at], Some(*i as u32));
        assert!((image.range[at] - r).abs() < 1e-12);
    }
    println!(
        "[PASS] criterion 8: round trip identity on {distinct} distinct pixels; winner minimality over {} pixels",
        best.len()
    );
}

#[test]
fn criterion_9_performance_soft_targets() {
    // Soft targets, tracked but not failing: a slow machine prints SLOW.
    let cfg = scenes::moving_box::<f64>(9);
    let frames = gen_sequence(&cfg, 9).unwrap();
    let pc = proj_cfg(&cfg.sensor);
    let (scans, poses) = unpack(&frames);
    let n_points = scans[8].len();
    assert!(n_points >= 120_000, "fixture scan has {n_points} points");

    let start = Instant::now();
    let image = project(&scans[8], &pc).unwrap();
    let project_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let stack = compute_residual(&image, 8, &scans, &poses, 8, 1, &pc).unwrap();
    let residual_ms = start.elapsed().as_secs_f64() * 1e3;
    assert_eq!(stack.frame_count(), 8);

    let p_ok = project_ms < 20.0;
    let r_ok = residual_ms < 200.0;
    println!(
        "[{}] criterion 9 (soft): project {n_points} pts → {}×{} in {project_ms:.2} ms (target 20); 8-frame stack in {residual_ms:.2} ms (target 200)",
        if p_ok && r_ok { "PASS" } else { "SLOW" },
        pc.height,
        pc.width
    );
}
