//! `generate`: writes one synthetic scenario in the ingest CSV format, so it
//! can be fed to `test` or inspected.

use std::path::PathBuf;

use clap::Args;
use credal_core::datagen::{generate, Case, ScenarioSpec};
use serde::Serialize;

use super::create_parent;
use super::simulate::{parse_case, FamilyArg};
use crate::error::CliResult;
use crate::io::write_dataset;
use crate::manifest::{sidecar_path, Manifest};

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "binary")]
    pub family: FamilyArg,
    #[arg(long, value_parser = parse_case)]
    pub case: Case,
    #[arg(long = "n", short = 'N', default_value_t = 400)]
    pub n: usize,
    /// Ensemble size (binary: always 2; multiclass default 10).
    #[arg(long = "m", short = 'M')]
    pub m: Option<usize>,
    /// Number of classes (binary: always 2; multiclass default 5).
    #[arg(long = "k", short = 'K')]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub u: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; the manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateSummary {
    pub rows: usize,
    pub regenerated: usize,
}

pub fn scenario(args: &GenerateArgs) -> ScenarioSpec {
    let mut spec = match args.family {
        FamilyArg::Binary => ScenarioSpec::binary(args.case, args.n, args.seed),
        FamilyArg::Multiclass => {
            ScenarioSpec::multiclass(args.case, args.n, args.m.unwrap_or(10), args.k.unwrap_or(5), args.seed)
        }
    };
    if let Some(m) = args.m {
        spec.m = m;
    }
    if let Some(k) = args.k {
        spec.k = k;
    }
    spec.u = args.u;
    spec
}

pub fn run(args: &GenerateArgs) -> CliResult<GenerateSummary> {
    let spec = scenario(args);
    spec.validate()?;
    let (data, truth) = generate(&spec)?;
    create_parent(&args.out)?;
    write_dataset(&args.out, &data)?;
    let config = serde_json::to_value(args).expect("arguments serialize");
    Manifest::new("generate", args.seed, config).write_as(&sidecar_path(&args.out))?;
    Ok(GenerateSummary { rows: data.n(), regenerated: truth.regenerated })
}
