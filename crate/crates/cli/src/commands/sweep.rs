//! Architecture sweep: every (arrangement, variant) pair over k seeds,
//! trained against one shared reference, summarized as a table.

use std::fmt::Write as _;
use std::io::Write as _;
use std::time::Instant;

use elastmap_core::fem::{solve_forward, FemSolution};
use elastmap_core::fieldgen::{
    add_strain_noise, elemental_modulus, load_image, map_image_to_nodes, sample_grf, ModulusField,
    Tensor2Field,
};
use elastmap_core::geometry::{build_crossed_mesh, Mesh};
use elastmap_core::net::Fcnn;
use elastmap_core::pinn::{evaluate_fields, train, GroundTruth, TransformStats, Variant};
use elastmap_core::threads::run_pooled;
use elastmap_core::{Error, Result};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, FieldSource};
use crate::manifest::Manifest;

use super::announce;

/// Rows with a mean error under this many percent are marked.
pub const MARK_THRESHOLD_PCT: f64 = 5.0;

pub struct SweepArgs {
    /// Comma-separated architecture codes like "IIB"; None sweeps all 20.
    pub archs: Option<String>,
    pub seeds: usize,
}

struct JobResult {
    e_l2_pct: f64,
    wall_s: f64,
}

pub fn run(cfg: &ExperimentConfig, args: &SweepArgs) -> Result<()> {
    if args.seeds == 0 {
        return Err(Error::invalid("--seeds must be at least 1"));
    }
    let archs = match &args.archs {
        Some(list) => parse_archs(list)?,
        None => all_archs(),
    };
    let seeds: Vec<u64> = (1..=args.seeds as u64).collect();

    let mesh = build_crossed_mesh(cfg.mesh.grid_n)?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;

    // one shared reference for every job
    let intensity = match cfg.field.source {
        FieldSource::Grf => sample_grf(&mesh, cfg.field.length_scale, cfg.field.seed)?,
        FieldSource::Image => {
            let path = cfg.field.image_path.as_deref().ok_or_else(|| {
                Error::invalid("field.image_path is required when field.source is \"image\"")
            })?;
            map_image_to_nodes(&load_image(std::path::Path::new(path))?, &mesh)?
        }
    };
    let modulus = elemental_modulus(&intensity, &mesh);
    let solution = solve_forward(&mesh, &cfg.material_model()?, &modulus, &cfg.boundary_load()?)?;
    let strain_ref = add_strain_noise(&solution.strain_nodes, cfg.noise.percent, cfg.noise.seed)?;
    let stats = TransformStats::from_displacements(&solution.u)?;

    let jobs: Vec<(usize, u64)> = archs
        .iter()
        .enumerate()
        .flat_map(|(ai, _)| seeds.iter().map(move |&s| (ai, s)))
        .collect();
    println!(
        "sweeping {} architectures x {} seeds = {} runs",
        archs.len(),
        seeds.len(),
        jobs.len()
    );

    let results: Vec<JobResult> = run_pooled(|| {
        jobs.par_iter()
            .map(|&(ai, seed)| {
                let (fcnn, variant) = archs[ai];
                run_job(cfg, &mesh, &strain_ref, &stats, &solution, &modulus, variant, fcnn, seed)
            })
            .collect()
    });

    let mut csv = String::new();
    let _ = writeln!(
        csv,
        "arch,variant,fcnn,seeds,mean_e_l2_pct,std_e_l2_pct,mean_wall_s,marked"
    );
    println!("arch    mean E err %   std      mean wall s   <{MARK_THRESHOLD_PCT}%");
    for (ai, &(fcnn, variant)) in archs.iter().enumerate() {
        let errs: Vec<f64> = jobs
            .iter()
            .zip(&results)
            .filter(|((j, _), _)| *j == ai)
            .map(|(_, r)| r.e_l2_pct)
            .collect();
        let walls: Vec<f64> = jobs
            .iter()
            .zip(&results)
            .filter(|((j, _), _)| *j == ai)
            .map(|(_, r)| r.wall_s)
            .collect();
        let k = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / k;
        let std = (errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / k).sqrt();
        let wall = walls.iter().sum::<f64>() / k;
        let marked = mean < MARK_THRESHOLD_PCT;
        let code = format!("{fcnn}{variant}");
        let _ = writeln!(csv, "{code},{variant},{fcnn},{},{mean},{std},{wall},{marked}", errs.len());
        println!("{code:<7} {mean:<14.4} {std:<8.4} {wall:<13.2} {}", if marked { "yes" } else { "" });
    }

    let table = out.join("sweep.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&table)?);
    file.write_all(csv.as_bytes())?;
    file.flush()?;
    announce(&table);

    Manifest::new("sweep", cfg)
        .seed("field", cfg.field.seed)
        .seed("noise", cfg.noise.seed)
        .seed("pinn", serde_json::json!(seeds))
        .write(&out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_job(
    cfg: &ExperimentConfig,
    mesh: &Mesh,
    strain_ref: &Tensor2Field,
    stats: &TransformStats,
    truth_fem: &FemSolution,
    truth_modulus: &ModulusField,
    variant: Variant,
    fcnn: Fcnn,
    seed: u64,
) -> JobResult {
    let started = Instant::now();
    let e_l2_pct = (|| -> Result<f64> {
        let mut pc = cfg.pinn_config()?;
        pc.variant = variant;
        pc.fcnn = fcnn;
        pc.seed = seed;
        let outcome = train(&pc, mesh, strain_ref, stats, None)?;
        let fields = evaluate_fields(
            &pc,
            &outcome.params,
            mesh,
            stats,
            Some(GroundTruth {
                fem: truth_fem,
                modulus: truth_modulus,
            }),
        )?;
        Ok(fields.l2.map(|l| l.e).unwrap_or(f64::NAN))
    })()
    .unwrap_or_else(|e| {
        eprintln!("run {fcnn}{variant} seed {seed} failed: {e}");
        f64::NAN
    });
    JobResult {
        e_l2_pct,
        wall_s: started.elapsed().as_secs_f64(),
    }
}

/// All 20 combinations, arrangement-major: IA, IB, ... VD.
fn all_archs() -> Vec<(Fcnn, Variant)> {
    let mut v = Vec::with_capacity(20);
    for fcnn in [Fcnn::I, Fcnn::II, Fcnn::III, Fcnn::IV, Fcnn::V] {
        for variant in Variant::all() {
            v.push((fcnn, variant));
        }
    }
    v
}

/// Parses codes like "IIB" or "iv-a" (roman arrangement + variant letter).
fn parse_archs(list: &str) -> Result<Vec<(Fcnn, Variant)>> {
    let mut v = Vec::new();
    for code in list.split(',') {
        let code = code.trim().trim_matches('-');
        if code.len() < 2 {
            return Err(Error::invalid(format!(
                "architecture code {code:?} should be an arrangement plus a variant, like IIB"
            )));
        }
        let split = code.len() - 1;
        let fcnn: Fcnn = code[..split].trim_end_matches('-').parse()?;
        let variant: Variant = code[split..].parse()?;
        v.push((fcnn, variant));
    }
    if v.is_empty() {
        return Err(Error::invalid("--archs lists no architectures"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_covers_all_twenty() {
        let archs = all_archs();
        assert_eq!(archs.len(), 20);
        assert_eq!(archs[0], (Fcnn::I, Variant::A));
        assert_eq!(archs[19], (Fcnn::V, Variant::D));
    }

    #[test]
    fn arch_codes_parse() {
        assert_eq!(parse_archs("IIB").unwrap(), vec![(Fcnn::II, Variant::B)]);
        assert_eq!(
            parse_archs("ia, VD").unwrap(),
            vec![(Fcnn::I, Variant::A), (Fcnn::V, Variant::D)]
        );
        assert!(parse_archs("X").is_err());
        assert!(parse_archs("IIQ").is_err());
    }
}
