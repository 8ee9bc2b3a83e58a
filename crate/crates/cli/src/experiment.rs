//! `robzero experiment`: the pipeline over a batch of Gaussian samples.
//!
//! Sample `i` uses seed `seed + i`, so any row can be regenerated with
//! `robzero gen gaussian`. Rows are deterministic unless `--timings` is set.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::Args;

use robzero::fields::gen_gaussian;
use robzero::obstruction::{robustness_report, Options, Persistence, RobustnessReport};
use robzero::par::{self, Parallelism};

use crate::{output, parallelism, GaussianArgs, PipelineArgs};

#[derive(Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub gaussian: GaussianArgs,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Add a wall-clock `seconds` column.
    #[arg(long)]
    pub timings: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const HEADER: [&str; 11] = [
    "kind",
    "l",
    "g",
    "seed",
    "r0",
    "r1",
    "r2",
    "frac_r1_gt_r0",
    "avg_r1",
    "max_r1",
    "frac_r2_gt_r1",
];

struct Sample {
    seed: u64,
    result: std::result::Result<RobustnessReport, String>,
    seconds: f64,
}

fn cell(p: Persistence) -> String {
    match p {
        Persistence::BelowR0 => "below_r0".into(),
        Persistence::Inconclusive => "inconclusive".into(),
        other => other.value().unwrap().to_string(),
    }
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    let opts = Options {
        par: Parallelism::Sequential,
        ..args.pipeline.options()
    };
    // reject bad parameters before spawning the batch
    gen_gaussian(&args.gaussian.params(args.gaussian.seed))?;
    let samples = par::map_range(parallelism(), args.count, |i| {
        let seed = args.gaussian.seed.wrapping_add(i as u64);
        let start = Instant::now();
        let result = gen_gaussian(&args.gaussian.params(seed))
            .and_then(|f| args.pipeline.apply_norm(f))
            .and_then(|f| robustness_report(&f, &opts))
            .map_err(|e| e.to_string());
        Sample {
            seed,
            result,
            seconds: start.elapsed().as_secs_f64(),
        }
    });

    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let mut header = HEADER.to_vec();
    if args.timings {
        header.push("seconds");
    }
    w.write_record(&header)?;
    let l = args.gaussian.l.to_string();
    let g = args.gaussian.grid.to_string();
    let blank = String::new;

    let mut done = Vec::new();
    for s in &samples {
        let mut row = vec!["sample".to_string(), l.clone(), g.clone(), s.seed.to_string()];
        match &s.result {
            Ok(r) => {
                row.push(r.r0.to_string());
                row.push(cell(r.r1));
                row.push(r.r2.map_or("none".into(), cell));
                done.push(r);
            }
            Err(e) => {
                log::warn!("seed {}: {e}", s.seed);
                row.extend(["error".into(), "error".into(), "error".into()]);
            }
        }
        row.extend((0..4).map(|_| blank()));
        if args.timings {
            row.push(format!("{:.3}", s.seconds));
        }
        w.write_record(&row)?;
    }

    let count = done.len();
    let frac = |k: usize| {
        if count == 0 {
            String::new()
        } else {
            (k as f64 / count as f64).to_string()
        }
    };
    let r1s: Vec<f64> = done.iter().map(|r| r1_value(r)).collect();
    let alive = done
        .iter()
        .filter(|r| !matches!(r.r1, Persistence::BelowR0 | Persistence::Inconclusive))
        .count();
    let r2_above = done
        .iter()
        .filter(|r| r.r2.and_then(|p| p.value()).is_some_and(|b| b > r1_value(r)))
        .count();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            String::new()
        } else {
            (xs.iter().sum::<f64>() / xs.len() as f64).to_string()
        }
    };
    let r0s: Vec<f64> = done.iter().map(|r| r.r0).collect();
    let mut row = vec![
        "summary".to_string(),
        l,
        g,
        args.gaussian.seed.to_string(),
        mean(&r0s),
        blank(),
        blank(),
        frac(alive),
        mean(&r1s),
        r1s.iter()
            .copied()
            .reduce(f64::max)
            .map_or(String::new(), |x| x.to_string()),
        frac(r2_above),
    ];
    if args.timings {
        let total: f64 = samples.iter().map(|s| s.seconds).sum();
        row.push(format!("{total:.3}"));
    }
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// `r1`, counting an obstruction absent at `r0` as dying there.
fn r1_value(r: &RobustnessReport) -> f64 {
    r.r1.value().unwrap_or(r.r0_level)
}
