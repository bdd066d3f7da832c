//! Randomized self-check of the block kernels against the brute-force
//! references. Exit status 0 means every check stayed within tolerance.

use anyhow::{bail, Result};
use clap::Args;
use lidar_mos::blocks::{mga_fuse, mga_fuse_stages, pixel_shuffle, sapl, FusionParams, Tensor};
use lidar_mos::loss::lovasz_softmax;
use lidar_mos::oracle;
use lidar_mos::siem::{sgb_forward, voxelize, SgbParams, VoxelGrid};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CommonOpts;

#[derive(Args, Debug)]
pub struct BlockCheckArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Randomized cases per check
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Corrupt one comparison to exercise the failure path
    #[arg(long, hide = true)]
    inject_fault: bool,
}

struct Check {
    name: &'static str,
    cases: usize,
    max_err: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.max_err < self.tolerance
    }
}

pub fn run(args: BlockCheckArgs) -> Result<()> {
    let cfg = crate::config::RunConfig::resolve(&args.common)?;
    let seed = cfg.seed;
    println!("seed = {seed}");

    let fault = if args.inject_fault { 1e-3 } else { 0.0 };
    let checks = [
        check_sapl(seed, args.iters, fault),
        check_pixel_shuffle(seed, args.iters),
        check_mga(seed, args.iters),
        check_sgb(seed, args.iters.min(100)),
        check_sgb_identity(seed, args.iters.min(100)),
        check_lovasz(seed),
    ];

    let mut failed = Vec::new();
    for c in &checks {
        println!(
            "check {:<20} {} (max err {:.3e} over {} cases, tolerance {:.0e})",
            c.name,
            if c.passed() { "ok    " } else { "FAILED" },
            c.max_err,
            c.cases,
            c.tolerance
        );
        if !c.passed() {
            failed.push(c.name);
        }
    }
    if !failed.is_empty() {
        bail!("checks failed: {}", failed.join(", "));
    }
    Ok(())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_tensor(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_shape_fn((c, h, w), |_| rng.random_range(-2.0..2.0))
}

fn check_sapl(seed: u64, iters: usize, fault: f64) -> Check {
    let mut rng = rng_for(seed, 1);
    let mut max_err = 0.0f64;
    for _ in 0..iters {
        let c = rng.random_range(1..=8);
        let h = 2 * rng.random_range(1..=32);
        let w = 4 * rng.random_range(1..=32);
        let t = random_tensor(&mut rng, c, h, w);
        let ours = sapl(&t, 2, 4).unwrap();
        let brute = oracle::block_mean_naive(&t, 2, 4);
        for (a, b) in ours.iter().zip(brute.iter()) {
            max_err = max_err.max((a - b).abs() + fault);
        }
        // Global mean preservation on every instance.
        let mean_in: f64 = t.iter().sum::<f64>() / t.len() as f64;
        let mean_out: f64 = ours.iter().sum::<f64>() / ours.len() as f64;
        max_err = max_err.max((mean_in - mean_out).abs());
    }
    Check {
        name: "sapl_block_mean",
        cases: iters,
        max_err,
        tolerance: 1e-6,
    }
}

fn check_pixel_shuffle(seed: u64, iters: usize) -> Check {
    let mut rng = rng_for(seed, 2);
    let mut max_err = 0.0f64;
    for _ in 0..iters {
        let groups = rng.random_range(1..=4);
        let t = random_tensor(&mut rng, 8 * groups, 3, 5);
        let ours = pixel_shuffle(&t, 2, 4).unwrap();
        let naive = oracle::pixel_shuffle_naive(&t, 2, 4);
        for (a, b) in ours.iter().zip(naive.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        // Multiset equality of elements.
        let mut xs: Vec<f64> = t.iter().copied().collect();
        let mut ys: Vec<f64> = ours.iter().copied().collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        if xs != ys {
            max_err = f64::INFINITY;
        }
    }
    Check {
        name: "pixel_shuffle",
        cases: iters,
        max_err,
        tolerance: 1e-12,
    }
}

fn check_mga(seed: u64, iters: usize) -> Check {
    let mut rng = rng_for(seed, 3);
    let mut max_err = 0.0f64;
    for _ in 0..iters {
        let c = rng.random_range(1..=6);
        let h = rng.random_range(1..=5);
        let w = rng.random_range(1..=5);
        let sem = random_tensor(&mut rng, c, h, w);
        let mot = random_tensor(&mut rng, c, h, w);
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
        // The channel weight vector sums to C.
        let stages = mga_fuse_stages(&sem, &mot, &params).unwrap();
        let sum: f64 = stages.channel_weights.iter().sum();
        max_err = max_err.max((sum - c as f64).abs());
    }
    Check {
        name: "mga_fusion",
        cases: iters,
        max_err,
        tolerance: 1e-6,
    }
}

fn random_grid(rng: &mut impl Rng, n: usize, channels: usize) -> VoxelGrid<f64> {
    let points: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..0.8),
                rng.random_range(0.0..0.8),
                rng.random_range(0.0..0.8),
            ]
        })
        .collect();
    let features = Array2::from_shape_fn((n, channels), |_| rng.random_range(-1.0..1.0));
    voxelize(&points, &features, 0.2).unwrap()
}

fn random_sgb_params(rng: &mut impl Rng, branch_out: usize, channels: usize) -> SgbParams<f64> {
    let mut p = SgbParams::zeros(branch_out, channels);
    for b in &mut p.branches {
        for t in &mut b.taps {
            t.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        }
        b.bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    p.fuse_weights.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    p.fuse_bias.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    p
}

fn check_sgb(seed: u64, iters: usize) -> Check {
    let mut rng = rng_for(seed, 4);
    let mut max_err = 0.0f64;
    for _ in 0..iters {
        let channels = rng.random_range(1..=3);
        let n = rng.random_range(5..40);
        let branch_out = rng.random_range(1..=3);
        let grid = random_grid(&mut rng, n, channels);
        let params = random_sgb_params(&mut rng, branch_out, channels);
        let ours = sgb_forward(&grid, &params).unwrap();
        let reference = oracle::sgb_reference(&grid, &params);
        for (a, b) in ours.features().iter().zip(reference.iter()) {
            max_err = max_err.max((a - b).abs());
        }
    }
    Check {
        name: "sgb_spatial",
        cases: iters,
        max_err,
        tolerance: 1e-6,
    }
}

fn check_sgb_identity(seed: u64, iters: usize) -> Check {
    let mut rng = rng_for(seed, 5);
    let mut max_err = 0.0f64;
    for _ in 0..iters {
        let channels = rng.random_range(1..=3);
        let n = rng.random_range(5..40);
        let grid = random_grid(&mut rng, n, channels);
        let mut params = random_sgb_params(&mut rng, 2, channels);
        params.fuse_weights.fill(0.0);
        params.fuse_bias.fill(0.0);
        let out = sgb_forward(&grid, &params).unwrap();
        // Zero fusion must reproduce the input bitwise.
        for (a, b) in out.features().iter().zip(grid.features().iter()) {
            if a.to_bits() != b.to_bits() {
                max_err = f64::INFINITY;
            }
        }
    }
    Check {
        name: "sgb_identity",
        cases: iters,
        max_err,
        tolerance: f64::MIN_POSITIVE,
    }
}

fn check_lovasz(seed: u64) -> Check {
    let mut rng = rng_for(seed, 6);
    let mut max_err = 0.0f64;
    let mut cases = 0usize;
    for n in 1..=6usize {
        for mask in 0..(1u32 << n) {
            let labels: Vec<Option<usize>> =
                (0..n).map(|i| Some(((mask >> i) & 1) as usize)).collect();
            for _ in 0..10 {
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
    Check {
        name: "lovasz_softmax",
        cases,
        max_err,
        tolerance: 1e-9,
    }
}
