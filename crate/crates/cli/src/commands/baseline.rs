use anyhow::{bail, Context, Result};
use clap::Args;
use lidar_mos::dataset::{remap_labels, MotionLabel, TaskLabels};
use lidar_mos::metrics::evaluate_sequence;
use lidar_mos::projection::{back_project, project};
use lidar_mos::residual::compute_residual;
use lidar_mos::synth::baseline_segment;

use crate::commands::load_sequence;
use crate::config::{CommonOpts, RunConfig};

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    common: CommonOpts,
}

pub fn run(args: BaselineArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let seq = load_sequence(&cfg.sequence_dir()?, true)?;
    let labels = seq.labels.as_ref().expect("loaded with labels");
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;

    let stride = cfg.stride_preset.resolve(&cfg.distribution);
    let first = cfg.k * stride;
    if first >= seq.scans.len() {
        bail!(
            "insufficient history: k = {} at stride {} needs {} predecessors, \
             sequence has {} frames",
            cfg.k,
            stride,
            first,
            seq.scans.len()
        );
    }

    let mut truth: Vec<TaskLabels> = Vec::new();
    let mut unknown_points = 0usize;
    for l in labels {
        let (t, stats) = remap_labels(l, &cfg.classmap);
        unknown_points += stats.unknown_points;
        truth.push(t);
    }
    if unknown_points > 0 {
        log::warn!("{unknown_points} points carry raw ids outside the class map (mapped to static/unmovable)");
    }

    let mut predictions: Vec<Vec<MotionLabel>> = Vec::new();
    let mut eval_truth: Vec<TaskLabels> = Vec::new();
    for frame in first..seq.scans.len() {
        let current = project(&seq.scans[frame], &cfg.proj)?;
        let stack = compute_residual(
            &current,
            frame,
            &seq.scans,
            &seq.poses,
            cfg.k,
            stride,
            &cfg.proj,
        )?;
        let moving = baseline_segment(&stack, &current, cfg.threshold)?;
        let per_point = back_project(&moving, &current, seq.scans[frame].len(), false)?;
        predictions.push(
            per_point
                .into_iter()
                .map(|m| {
                    if m {
                        MotionLabel::Moving
                    } else {
                        MotionLabel::Static
                    }
                })
                .collect(),
        );
        eval_truth.push(truth[frame].clone());
    }

    let report = evaluate_sequence(&predictions, &eval_truth)?;

    let config_echo = [
        format!("config.sequence = {}", cfg.sequence),
        format!("config.height = {}", cfg.proj.height),
        format!("config.width = {}", cfg.proj.width),
        format!("config.fov_up = {:.6}", cfg.proj.fov_up_deg),
        format!("config.fov_down = {:.6}", cfg.proj.fov_down_deg),
        format!("config.k = {}", cfg.k),
        format!(
            "config.strides = {}",
            cfg.distribution
                .strides()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ),
        format!(
            "config.stride_preset = {}",
            match cfg.stride_preset {
                lidar_mos::residual::StridePreset::One => "1",
                lidar_mos::residual::StridePreset::Max => "max",
            }
        ),
        format!("config.stride = {stride}"),
        format!("config.threshold = {:.6}", cfg.threshold),
        format!("config.first_evaluated_frame = {first}"),
    ]
    .join("\n");

    let kv = format!("{config_echo}\n{}", report.to_kv());
    let text = format!(
        "baseline evaluation, sequence {} (stride {stride}, threshold {:.3})\n{}",
        cfg.sequence,
        cfg.threshold,
        report.to_text()
    );
    std::fs::write(cfg.out.join("report.kv"), &kv)?;
    std::fs::write(cfg.out.join("report.txt"), &text)?;

    print!("{text}");
    println!("report written to {}", cfg.out.join("report.kv").display());
    Ok(())
}
