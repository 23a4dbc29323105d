use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rfs_swarm::phd::{DEFAULT_MAX_COMPONENTS, DEFAULT_MERGE_DIST, DEFAULT_WEIGHT_FLOOR};
use rfs_swarm::{
    extract_states, phd_predict, phd_update, prune_merge, simulate_measurements, uniform_clutter, Component,
    Dynamics, Mixture, Phd,
};

use crate::config::{ConfigError, ConfigResult, Document, Scope};
use crate::output::{num, write_atomic, Table};
use crate::CliError;

pub const HEADER: [&str; 8] = ["step", "cardinality", "n_measurements", "estimate", "x", "y", "vx", "vy"];

#[derive(Debug, Clone)]
pub struct PhdDemoArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
}

/// Settings of one demo run.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub steps: usize,
    pub seed: u64,
    pub dt: f64,
    pub survival_prob: f64,
    pub detect_prob: f64,
    /// Expected clutter returns per scan over the whole region.
    pub clutter_rate: f64,
    /// `(xmin, xmax, ymin, ymax)`.
    pub region: [f64; 4],
    pub obs_noise: f64,
    pub process_noise: f64,
    /// `(mean, spread variances, count)` of each group of true agents.
    pub truth: Vec<(Vec<f64>, Option<Vec<f64>>, usize)>,
    pub birth: Vec<(Vec<f64>, Vec<f64>, f64)>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            seed: 0,
            dt: 0.1,
            survival_prob: 0.99,
            detect_prob: 1.0,
            clutter_rate: 0.0,
            region: [-5.0, 5.0, -5.0, 5.0],
            obs_noise: 0.01,
            process_noise: 1e-4,
            truth: vec![(vec![0.0, 0.0, 0.0, 0.0], None, 1)],
            birth: vec![(vec![0.0, 0.0, 0.0, 0.0], vec![4.0, 4.0, 1.0, 1.0], 0.1)],
        }
    }
}

fn mean4(scope: &mut Scope) -> ConfigResult<Vec<f64>> {
    let line = scope.line();
    let m = scope.get_list_of("mean", &[2, 4])?.ok_or_else(|| ConfigError::Syntax {
        line,
        message: format!("[{}] block needs a `mean`", scope.name()),
    })?;
    Ok(if m.len() == 2 { vec![m[0], m[1], 0.0, 0.0] } else { m })
}

pub fn parse_demo(mut doc: Document) -> ConfigResult<DemoConfig> {
    doc.check_sections(&["truth", "birth"])?;
    let d = DemoConfig::default();
    let top = &mut doc.top;
    let region = match top.get_list_of("region", &[4])? {
        Some(r) => [r[0], r[1], r[2], r[3]],
        None => d.region,
    };
    let mut cfg = DemoConfig {
        steps: top.get("steps")?.unwrap_or(d.steps),
        seed: top.get("seed")?.unwrap_or(d.seed),
        dt: top.get("dt")?.unwrap_or(d.dt),
        survival_prob: top.get("survival_prob")?.unwrap_or(d.survival_prob),
        detect_prob: top.get("detect_prob")?.unwrap_or(d.detect_prob),
        clutter_rate: top.get("clutter_rate")?.unwrap_or(d.clutter_rate),
        region,
        obs_noise: top.get("obs_noise")?.unwrap_or(d.obs_noise),
        process_noise: top.get("process_noise")?.unwrap_or(d.process_noise),
        truth: Vec::new(),
        birth: Vec::new(),
    };
    top.finish()?;
    for block in &mut doc.blocks {
        let mean = mean4(block)?;
        if block.name() == "truth" {
            let spread = block.get_list_of("cov_diag", &[4])?;
            let count = block.get::<usize>("count")?.unwrap_or(1);
            cfg.truth.push((mean, spread, count));
        } else {
            let cov = block.get_list_of("cov_diag", &[4])?.unwrap_or(vec![4.0, 4.0, 1.0, 1.0]);
            let weight = block.get::<f64>("weight")?.unwrap_or(0.1);
            cfg.birth.push((mean, cov, weight));
        }
        block.finish()?;
    }
    if !doc.blocks.iter().any(|b| b.name() == "truth") {
        cfg.truth = d.truth;
    }
    if !doc.blocks.iter().any(|b| b.name() == "birth") {
        cfg.birth = d.birth;
    }
    Ok(cfg)
}

/// Builds the filter model; errors here are configuration errors.
pub fn build_model(cfg: &DemoConfig) -> rfs_swarm::Result<Phd> {
    let [x0, x1, y0, y1] = cfg.region;
    let area = (x1 - x0) * (y1 - y0);
    let motion = Dynamics::double_integrator_2d(cfg.dt)?.with_process_noise(DMatrix::identity(4, 4) * cfg.process_noise)?;
    let birth = cfg
        .birth
        .iter()
        .map(|(m, c, w)| Component::diagonal(*w, m, c))
        .collect::<rfs_swarm::Result<Vec<_>>>()?;
    let model = Phd {
        survival_prob: cfg.survival_prob,
        detect_prob: cfg.detect_prob,
        motion,
        obs_h: DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        obs_r: DMatrix::identity(2, 2) * cfg.obs_noise,
        clutter_intensity: uniform_clutter(cfg.clutter_rate, area)?,
        birth: if birth.is_empty() { Mixture::empty(4) } else { Mixture::new(birth)? },
    };
    model.validate()?;
    Ok(model)
}

/// One row per extracted estimate per step; a step without estimates gets a
/// single row with empty estimate fields.
pub fn simulate(cfg: &DemoConfig) -> Result<Vec<u8>, CliError> {
    let model = build_model(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let [x0, x1, y0, y1] = cfg.region;
    let region = [(x0, x1), (y0, y1)];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut truth: Vec<DVector<f64>> = Vec::new();
    for (mean, spread, count) in &cfg.truth {
        let m = DVector::from_column_slice(mean);
        for _ in 0..*count {
            let x = match spread {
                Some(v) => DVector::from_iterator(4, (0..4).map(|i| m[i] + v[i].max(0.0).sqrt() * rng.sample::<f64, _>(StandardNormal))),
                None => m.clone(),
            };
            truth.push(x);
        }
    }

    let mut table = Table::new(&HEADER)?;
    let mut posterior = Mixture::empty(4);
    for step in 1..=cfg.steps {
        for x in &mut truth {
            *x = model.motion.a() * &*x;
        }
        let predicted = phd_predict(&posterior, &model)?;
        let z = simulate_measurements(&truth, &model, &region, &mut rng)?;
        let updated = phd_update(&predicted, &z, &model)?;
        posterior = prune_merge(&updated, DEFAULT_WEIGHT_FLOOR, DEFAULT_MERGE_DIST, DEFAULT_MAX_COMPONENTS)?;
        let cardinality = num(posterior.total_weight());
        let estimates = extract_states(&posterior, 0.5);
        if estimates.is_empty() {
            table.row([step.to_string(), cardinality.clone(), z.len().to_string(), String::new(), String::new(), String::new(), String::new(), String::new()])?;
        }
        for (i, e) in estimates.iter().enumerate() {
            table.row([
                step.to_string(),
                cardinality.clone(),
                z.len().to_string(),
                i.to_string(),
                num(e[0]),
                num(e[1]),
                num(e[2]),
                num(e[3]),
            ])?;
        }
    }
    Ok(table.into_bytes())
}

pub fn run(args: &PhdDemoArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => parse_demo(Document::load(p)?)?,
        None => DemoConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    let bytes = simulate(&cfg)?;
    write_atomic(&args.out, &bytes).map_err(|e| CliError::Runtime(format!("writing {}: {e}", args.out.display())))?;
    println!("wrote {} ({} steps)", args.out.display(), cfg.steps);
    Ok(())
}
