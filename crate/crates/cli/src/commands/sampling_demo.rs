//! `sampling-demo`: shows that flat-Dirichlet weights over the vertices of a
//! polytope do not give uniform points inside it.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use credal_core::random::{sample_dirichlet, sample_weight_simplex};
use credal_core::simplex::{convex_combine, point_in_hull};
use credal_core::testkit::quantile_type7;
use credal_core::{ProbVector, RngStream};
use serde::Serialize;

use super::{create_dir, to_json_text};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::svg::ternary_scatter;
use crate::sweep::write_text;

/// Share of uniform points inside the reference ball around the centroid.
pub const BALL_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// The three corners, further vertices drawn at random.
    Corners,
    /// Corners, then edge midpoints, then random vertices.
    EdgeMidpoints,
    /// All vertices drawn from the flat Dirichlet.
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplingDemoArgs {
    #[arg(long = "m", short = 'M', default_value_t = 6)]
    pub m: usize,
    /// Number of classes; only the 2-simplex (K=3) can be drawn.
    #[arg(long = "k", short = 'K', default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, value_enum, default_value = "edge-midpoints")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingSummary {
    pub m: usize,
    pub count: usize,
    pub baseline_count: usize,
    pub vertices: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
    /// Radius holding `BALL_SHARE` of the uniform baseline.
    pub radius: f64,
    pub image_share: f64,
    pub baseline_share: f64,
    /// `image_share / baseline_share`; 1 for uniform images.
    pub concentration_ratio: f64,
    /// Every image point passed the hull-membership check.
    pub all_inside: bool,
}

fn place_vertices(preset: Preset, m: usize, stream: RngStream) -> CliResult<Vec<ProbVector>> {
    let fixed: Vec<[f64; 3]> = match preset {
        Preset::Corners => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        Preset::EdgeMidpoints => {
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
        }
        Preset::Random => Vec::new(),
    };
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        out.push(match fixed.get(i) {
            Some(v) => ProbVector::new(v.to_vec())?,
            None => sample_dirichlet(&[1.0; 3], &mut rng)?,
        });
    }
    Ok(out)
}

/// Vertices of the convex hull of `points` in counter-clockwise order
/// (monotone chain on planar coordinates of the simplex).
fn hull_order(points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let plane = |p: &[f64; 3]| (p[1] + 0.5 * p[2], p[2] * 3f64.sqrt() / 2.0);
    let mut pts: Vec<[f64; 3]> = points.to_vec();
    pts.sort_by(|a, b| {
        let (pa, pb) = (plane(a), plane(b));
        pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1))
    });
    let cross = |o: &[f64; 3], a: &[f64; 3], b: &[f64; 3]| {
        let (o, a, b) = (plane(o), plane(a), plane(b));
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<[f64; 3]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 3]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 1e-12 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn run(args: &SamplingDemoArgs) -> CliResult<SamplingSummary> {
    if args.k != 3 {
        return Err(CliError::Usage(format!("sampling-demo draws the 2-simplex and needs K=3, got {}", args.k)));
    }
    if args.m < 3 {
        return Err(CliError::Usage(format!("sampling-demo needs M >= 3, got {}", args.m)));
    }
    if args.count < 10 {
        return Err(CliError::Usage("--count must be at least 10".into()));
    }
    let root = RngStream::from_seed(args.seed);
    let vertices = place_vertices(args.preset, args.m, root.substream(0))?;
    let vrefs: Vec<&[f64]> = vertices.iter().map(ProbVector::as_slice).collect();

    let weights = sample_weight_simplex(args.m, args.count, &mut root.substream(1).rng())?;
    let image: Vec<ProbVector> =
        weights.iter().map(|w| convex_combine(&vertices, w.as_slice())).collect::<Result<_, _>>()?;
    let mut all_inside = true;
    for p in &image {
        all_inside &= point_in_hull(p.as_slice(), &vrefs, 1e-9)?.inside;
    }

    // Uniform points on the polytope: flat-Dirichlet points on the simplex
    // kept when inside the hull.
    let baseline_count = 4 * args.count;
    let mut rng = root.substream(2).rng();
    let mut baseline: Vec<ProbVector> = Vec::with_capacity(baseline_count);
    let mut tries = 0usize;
    while baseline.len() < baseline_count {
        tries += 1;
        if tries > 1000 * baseline_count {
            return Err(CliError::Numeric("hull too thin for rejection sampling".into()));
        }
        let p = sample_dirichlet(&[1.0; 3], &mut rng)?;
        if point_in_hull(p.as_slice(), &vrefs, 1e-12)?.inside {
            baseline.push(p);
        }
    }
    let mut centroid = vec![0.0; 3];
    for p in &baseline {
        for (c, v) in centroid.iter_mut().zip(p.as_slice()) {
            *c += v / baseline_count as f64;
        }
    }
    let mut base_d: Vec<f64> = baseline.iter().map(|p| dist(p.as_slice(), &centroid)).collect();
    base_d.sort_by(f64::total_cmp);
    let radius = quantile_type7(&base_d, BALL_SHARE);
    let share = |pts: &[ProbVector]| {
        pts.iter().filter(|p| dist(p.as_slice(), &centroid) <= radius).count() as f64 / pts.len() as f64
    };
    let image_share = share(&image);
    let baseline_share = share(&baseline);
    let summary = SamplingSummary {
        m: args.m,
        count: args.count,
        baseline_count,
        vertices: vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
        centroid,
        radius,
        image_share,
        baseline_share,
        concentration_ratio: image_share / baseline_share,
        all_inside,
    };

    create_dir(&args.out_dir)?;
    let pts: Vec<[f64; 3]> = image.iter().map(|p| [p.as_slice()[0], p.as_slice()[1], p.as_slice()[2]]).collect();
    let corners: Vec<[f64; 3]> = vertices.iter().map(|v| [v.as_slice()[0], v.as_slice()[1], v.as_slice()[2]]).collect();
    let outline = hull_order(&corners);
    let svg = ternary_scatter(
        &format!("{} vertices, flat weights (ratio {:.3})", args.m, summary.concentration_ratio),
        &pts,
        &outline,
    );
    write_text(&args.out_dir.join("sampling.svg"), &svg)?;
    write_text(&args.out_dir.join("summary.json"), &to_json_text(&summary))?;
    let config = serde_json::to_value(args).expect("arguments serialize");
    Manifest::new("sampling-demo", args.seed, config).write(&args.out_dir)?;
    Ok(summary)
}
