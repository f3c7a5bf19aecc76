//! `merge`: combines `sweep.json` files of runs over disjoint repetition ranges.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use super::create_dir;
use super::simulate::write_report;
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::sweep::SweepReport;

#[derive(Debug, Clone, Args)]
pub struct MergeArgs {
    /// `sweep.json` files to combine.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(args: &MergeArgs) -> CliResult<SweepReport> {
    let mut reports = args.inputs.iter().map(|p| SweepReport::read_json(p));
    let first = reports.next().ok_or_else(|| CliError::Usage("nothing to merge".into()))??;
    let merged = reports.try_fold(first, |acc, r| SweepReport::merge(&acc, &r?))?;
    create_dir(&args.out_dir)?;
    write_report(&merged, &args.out_dir)?;
    let seed = merged.config.get("seed").and_then(|s| s.as_u64()).unwrap_or(0);
    let inputs: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    Manifest::new("merge", seed, json!({"inputs": inputs, "merged": merged.config})).write(&args.out_dir)?;
    Ok(merged)
}
