use std::io::Write;

use hybridlm_core::model::count_params;
use hybridlm_core::planner::{load_preset, zero1_memory, ParallelPlan, Phase};
use serde::Serialize;

use super::{stdout_err, to_json, PlanArgs};
use crate::error::Result;
use crate::manifest::RunManifest;
use crate::report::{grouped, Table};

#[derive(Serialize)]
struct PlanReport {
    preset: hybridlm_core::planner::Preset,
    parameters: u64,
    plan: ParallelPlan,
    memory_per_rank: hybridlm_core::planner::MemoryEstimate,
}

fn bytes(b: f64) -> String {
    format!("{} B ({:.2} GB)", grouped(b.round() as u64), b / 1e9)
}

pub fn plan(a: &PlanArgs, argv: &[String], out: &mut dyn Write) -> Result<()> {
    let phase: Phase = a.phase.parse()?;
    let preset = load_preset(&a.preset, phase)?;
    let p = count_params(&preset.model);
    let plan = ParallelPlan::new(preset.model.layers, a.stages, a.dp_ranks)?;
    let mem = zero1_memory(p, a.dp_ranks)?;

    let mut t = Table::new(["item", "value"]);
    let stages: Vec<String> = plan.stages.iter().map(usize::to_string).collect();
    t.row([
        "preset".to_string(),
        format!("{} ({})", preset.name, a.phase),
    ])
    .row([
        "parameters".to_string(),
        format!(
            "{} ({}M)",
            grouped(p),
            grouped((p as f64 / 1e6).round() as u64)
        ),
    ])
    .row([
        "pipeline stages".to_string(),
        format!("{}: [{}]", plan.stages.len(), stages.join(", ")),
    ])
    .row(["data-parallel ranks".to_string(), a.dp_ranks.to_string()])
    .row(["weights / rank".to_string(), bytes(mem.weights)])
    .row(["gradients / rank".to_string(), bytes(mem.grads)])
    .row([
        "optimizer shard / rank".to_string(),
        bytes(mem.optimizer_shard),
    ])
    .row([
        "total / rank".to_string(),
        format!("{} = {}P", bytes(mem.total), mem.total / p as f64),
    ]);
    write!(out, "{t}").map_err(stdout_err)?;

    if let Some(dir) = &a.out {
        let report = PlanReport {
            preset,
            parameters: p,
            plan,
            memory_per_rank: mem,
        };
        let mut manifest = RunManifest::new("plan", argv, dir).with_config(
            None,
            &serde_json::json!({ "preset": a.preset, "phase": a.phase, "stages": a.stages, "dp_ranks": a.dp_ranks }),
        );
        manifest.write_artifact(&dir.join("plan.json"), &to_json(&report))?;
        manifest.write_artifact(&dir.join("plan.txt"), t.to_string().as_bytes())?;
        manifest.save(&dir.join("manifest.json"))?;
    }
    Ok(())
}
