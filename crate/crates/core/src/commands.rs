//! The four front-end operations: sample, estimate, diagnose, transform-check.
//! They return plain data; printing and exit codes belong to the caller.

use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bps::{sample_velocity, Bps, State, Trajectory, TrajectoryHeader};
use crate::config::{EstimatorSpec, RunConfig, SamplingTarget};
use crate::diagnostics::{classify_regime, verify_drift, DriftGrid, DriftReport, RegimeAdvice};
use crate::error::{Error, Result};
use crate::estimators::{
    jump_chain_weights, pull_back, weighted_ratio_report, EstimateReport, JumpChainReport, PathAverager,
};
use crate::io::{load_trajectory, save_trajectory};
use crate::rng::chain_rng;
use crate::targets::{GenGaussian, StudentT, Target};
use crate::transform::{IsotropicTransform, TransformedTarget};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain: u64,
    pub seed: u64,
    pub stream: u64,
    pub file: String,
    pub events: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: RunConfig,
    pub chains: Vec<ChainRecord>,
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs chain `chain` of the configuration; independent of every other chain.
///
/// An explicit initial position is given in the original coordinates and
/// pulled back through the transform when there is one.
pub fn run_chain(cfg: &RunConfig, target: &SamplingTarget, chain: u64) -> Result<Trajectory> {
    let horizon = cfg
        .horizon
        .ok_or_else(|| Error::Config("sampling needs a horizon".into()))?;
    let mut rng = chain_rng(cfg.seed, chain);
    let d = cfg.target.dimension;
    let init = cfg.init.clone().unwrap_or_default();
    let x = match init.x {
        Some(x) => {
            let x = Vector::from_vec(x);
            target.transform().map_or(x.clone(), |t| t.invert(&x))
        }
        None => Vector::zeros(d),
    };
    let v = match init.v {
        Some(v) => Vector::from_vec(v).normalize(),
        None => sample_velocity(&mut rng, d),
    };
    let sampler = Bps::new(target, cfg.policy)?.with_method(cfg.method);
    let mut traj = sampler.simulate(&State { x, v }, horizon, &mut rng)?;
    traj.header = TrajectoryHeader {
        target: Some(cfg.target.clone()),
        transform: target.transform().map(IsotropicTransform::config),
        policy: cfg.policy,
        seed: Some(cfg.seed),
        chain: Some(chain),
        d,
    };
    Ok(traj)
}

/// Runs every chain in memory, in parallel.
pub fn run_chains(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let target = cfg.sampling_target()?;
    thread_pool(threads)?.install(|| {
        (0..cfg.chains as u64)
            .into_par_iter()
            .map(|c| run_chain(cfg, &target, c))
            .collect()
    })
}

pub fn chain_file_name(chain: u64) -> String {
    format!("chain_{chain}.jsonl")
}

/// Samples every chain into `out_dir/chain_{c}.jsonl` and writes `manifest.json`.
pub fn cmd_sample(cfg: &RunConfig, out_dir: &Path, threads: Option<usize>) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let target = cfg.sampling_target()?;
    info!("sampling {} chain(s) into {}", cfg.chains, out_dir.display());
    let chains: Vec<ChainRecord> = thread_pool(threads)?.install(|| {
        (0..cfg.chains as u64)
            .into_par_iter()
            .map(|c| {
                let traj = run_chain(cfg, &target, c)?;
                let file = chain_file_name(c);
                save_trajectory(&traj, &out_dir.join(&file))?;
                debug!("chain {c}: {} events over t = {}", traj.events.len(), traj.duration);
                Ok(ChainRecord {
                    chain: c,
                    seed: cfg.seed,
                    stream: c,
                    file,
                    events: traj.events.len(),
                    duration: traj.duration,
                })
            })
            .collect::<Result<_>>()
    })?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        chains,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out_dir.join("manifest.json"), text)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub name: String,
    pub path: EstimateReport,
    pub chain_variances: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_chain: Option<JumpChainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub chains: usize,
    pub total_duration: f64,
    pub functions: Vec<FunctionReport>,
}

fn same_run(a: &TrajectoryHeader, b: &TrajectoryHeader) -> bool {
    a.target == b.target && a.transform == b.transform && a.policy == b.policy && a.d == b.d
}

/// Estimates from trajectories already in memory; every chain must share one configuration.
pub fn estimate_trajectories(trajectories: &[Trajectory], specs: &[EstimatorSpec]) -> Result<EstimateOutput> {
    let first = trajectories.first().ok_or(Error::EmptyTrajectory)?;
    if let Some(bad) = trajectories.iter().find(|t| !same_run(&t.header, &first.header)) {
        return Err(Error::MixedConfigs(format!(
            "chain {:?} differs from chain {:?}",
            bad.header.chain, first.header.chain
        )));
    }
    let header = &first.header;
    let transform = match (&header.transform, &header.target) {
        (Some(t), Some(target)) => Some(t.resolve(target)?),
        (Some(_), None) => return Err(Error::Config("transformed trajectory without a target record".into())),
        _ => None,
    };
    let target = header
        .target
        .as_ref()
        .map(|t| -> Result<SamplingTarget> {
            let base = t.build()?;
            Ok(match transform {
                Some(h) => SamplingTarget::Transformed(TransformedTarget::new(base, h)),
                None => SamplingTarget::Plain(base),
            })
        })
        .transpose()?;
    let weights: Option<Vec<Vec<f64>>> = target
        .as_ref()
        .map(|t| trajectories.iter().map(|tr| jump_chain_weights(tr, t, &header.policy)).collect())
        .transpose()?;

    let averager = PathAverager::default();
    let functions = specs
        .iter()
        .map(|spec| {
            let g = spec.function()?;
            let g = match &transform {
                Some(h) => pull_back(h, &g),
                None => g,
            };
            let sums: Vec<_> = trajectories.iter().map(|t| averager.sums(t, &g)).collect::<Result<_>>()?;
            let chain_variances = sums
                .iter()
                .map(|s| EstimateReport::pool(std::slice::from_ref(s)).map(|r| r.variance))
                .collect::<Result<_>>()?;
            let jump_chain = match &weights {
                Some(w) => {
                    let all_w: Vec<f64> = w.concat();
                    let values: Vec<f64> = trajectories
                        .iter()
                        .flat_map(|t| t.jump_events().map(|e| g.eval(&e.x, &e.v)).collect::<Vec<_>>())
                        .collect();
                    Some(weighted_ratio_report(&all_w, &values)?)
                }
                None => None,
            };
            Ok(FunctionReport {
                name: spec.name.clone(),
                path: EstimateReport::pool(&sums)?,
                chain_variances,
                jump_chain,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EstimateOutput {
        chains: trajectories.len(),
        total_duration: trajectories.iter().map(|t| t.duration).sum(),
        functions,
    })
}

/// Loads trajectory files and pools them into one report per test function.
pub fn cmd_estimate(paths: &[PathBuf], specs: Option<&[EstimatorSpec]>) -> Result<EstimateOutput> {
    if paths.is_empty() {
        return Err(Error::Config("no trajectory files given".into()));
    }
    let trajectories: Vec<Trajectory> = paths.iter().map(|p| load_trajectory(p)).collect::<Result<_>>()?;
    let defaults;
    let specs = match specs {
        Some(s) if !s.is_empty() => s,
        _ => {
            defaults = EstimatorSpec::default_moments(trajectories[0].dim());
            &defaults
        }
    };
    estimate_trajectories(&trajectories, specs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOutput {
    pub advice: RegimeAdvice,
    pub drift: DriftReport,
}

pub fn default_drift_grid() -> DriftGrid {
    DriftGrid::new(vec![10.0, 20.0, 50.0, 100.0, 200.0], 16, 65)
}

/// Regime advice and a drift sweep for the configured target (after any transform).
pub fn cmd_diagnose(cfg: &RunConfig, threads: Option<usize>) -> Result<DiagnoseOutput> {
    cfg.validate()?;
    let target = cfg.sampling_target()?;
    let grid = cfg.drift.clone().unwrap_or_else(default_drift_grid);
    thread_pool(threads)?.install(|| {
        Ok(DiagnoseOutput {
            advice: classify_regime(&target)?,
            drift: verify_drift(&target, &cfg.policy, &grid)?,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformCheckReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn central_jacobian(t: &IsotropicTransform, y: &Vector) -> Matrix {
    let d = y.len();
    let h = 1e-6 * (1.0 + y.norm());
    let mut m = Matrix::zeros(d, d);
    for j in 0..d {
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[j] += h;
        ym[j] -= h;
        m.set_column(j, &((t.apply(&yp) - t.apply(&ym)) / (2.0 * h)));
    }
    m
}

fn central_gradient<F: Fn(&Vector) -> f64>(f: F, y: &Vector) -> Vector {
    let h = 1e-6 * (1.0 + y.norm());
    Vector::from_iterator(
        y.len(),
        (0..y.len()).map(|i| {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += h;
            ym[i] -= h;
            (f(&yp) - f(&ym)) / (2.0 * h)
        }),
    )
}

fn random_point<R: Rng>(rng: &mut R, d: usize, r_lo: f64, r_hi: f64) -> Vector {
    sample_velocity(rng, d) * rng.random_range(r_lo..r_hi)
}

/// Finite-difference and round-trip checks of the transform machinery.
pub fn cmd_transform_check(seed: u64) -> Result<TransformCheckReport> {
    let mut rng = chain_rng(seed, 0);
    let families = [
        ("exp(b=1)", IsotropicTransform::exponential(1.0)?),
        ("poly(R=1,p=3)", IsotropicTransform::polynomial(1.0, 3)?),
        ("poly(R=1,p=5)", IsotropicTransform::polynomial(1.0, 5)?),
    ];
    let mut checks = Vec::new();
    let mut record = |name: String, max_error: f64, tolerance: f64| {
        checks.push(CheckResult {
            name,
            passed: max_error < tolerance,
            max_error,
            tolerance,
        })
    };
    for (label, t) in &families {
        let (mut jac, mut det, mut ldg, mut trip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let y = loop {
                let y = random_point(&mut rng, 3, 0.05, 3.0);
                if (y.norm() - t.join()).abs() > 1e-3 {
                    break y;
                }
            };
            let exact = t.jacobian(&y);
            let fd = central_jacobian(t, &y);
            jac = jac.max((&exact - &fd).norm() / exact.norm());
            let (log_det, grad) = t.log_det_jacobian(&y);
            let numeric = fd.determinant();
            det = det.max((log_det.exp() - numeric).abs() / numeric.abs());
            let fd_grad = central_gradient(|z| t.log_det_jacobian(z).0, &y);
            ldg = ldg.max((&grad - &fd_grad).norm() / grad.norm().max(1e-3));
        }
        for _ in 0..1000 {
            let x = random_point(&mut rng, 3, 0.0, 1e3);
            trip = trip.max((t.apply(&t.invert(&x)) - &x).norm() / (1.0 + x.norm()));
        }
        record(format!("{label}: jacobian vs finite differences"), jac, 1e-5);
        record(format!("{label}: determinant vs numeric jacobian"), det, 1e-5);
        record(format!("{label}: log-det gradient vs finite differences"), ldg, 1e-5);
        record(format!("{label}: round trip"), trip, 1e-10);
    }
    let pulled: [(&str, Box<dyn Target>, f64); 2] = [
        (
            "student_t(k=1,d=2) under exp(b=1)",
            Box::new(TransformedTarget::new(StudentT::new(2, 1.0)?, families[0].1)),
            2.0,
        ),
        (
            "gen_gaussian(beta=0.5,d=2) under poly(R=1,p=5)",
            Box::new(TransformedTarget::new(GenGaussian::new(2, 0.5)?, families[2].1)),
            1.1,
        ),
    ];
    for (label, target, r_lo) in &pulled {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let y = random_point(&mut rng, 2, *r_lo, 4.0);
            let g = target.grad(&y)?.value;
            let fd = central_gradient(|z| target.potential(z).expect("dimension fixed"), &y);
            worst = worst.max((&g - &fd).norm() / g.norm());
        }
        record(format!("{label}: gradient vs finite differences"), worst, 1e-5);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(TransformCheckReport { checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bps::{EventKind, Horizon, RefreshPolicy};
    use crate::targets::TargetConfig;
    use crate::transform::TransformConfig;

    fn gauss_cfg() -> RunConfig {
        let mut cfg = RunConfig::new(TargetConfig::gaussian(2), RefreshPolicy::constant(1.0));
        cfg.horizon = Some(Horizon::Duration(10.0));
        cfg.seed = 5;
        cfg.chains = 4;
        cfg
    }

    #[test]
    fn sample_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = gauss_cfg();
        let manifest = cmd_sample(&cfg, dir.path(), Some(2)).unwrap();
        assert_eq!(manifest.chains.len(), 4);
        assert_eq!(manifest.config_hash, cfg.hash());
        let mut first_events = Vec::new();
        for rec in &manifest.chains {
            let t = load_trajectory(&dir.path().join(&rec.file)).unwrap();
            let last = t.events.last().unwrap();
            assert_eq!((last.kind, last.t), (EventKind::Final, 10.0));
            first_events.push(t.events[1].clone());
        }
        first_events.dedup();
        assert_eq!(first_events.len(), 4);
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = gauss_cfg();
        assert_eq!(run_chains(&cfg, Some(1)).unwrap(), run_chains(&cfg, Some(3)).unwrap());
        assert!(run_chains(&cfg, Some(0)).is_err());
    }

    #[test]
    fn estimates_from_memory_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = gauss_cfg();
        let manifest = cmd_sample(&cfg, dir.path(), None).unwrap();
        let paths: Vec<PathBuf> = manifest.chains.iter().map(|c| dir.path().join(&c.file)).collect();
        let from_files = cmd_estimate(&paths, None).unwrap();
        let from_memory = estimate_trajectories(&run_chains(&cfg, None).unwrap(), &cfg.estimator_specs()).unwrap();
        assert_eq!(from_files, from_memory);
        assert_eq!(from_files.functions.len(), 4);
    }

    #[test]
    fn mixed_configurations_are_refused() {
        let a = run_chains(&gauss_cfg(), None).unwrap();
        let mut other = gauss_cfg();
        other.policy = RefreshPolicy::constant(2.0);
        let b = run_chains(&other, None).unwrap();
        let mixed = vec![a[0].clone(), b[0].clone()];
        assert!(matches!(
            estimate_trajectories(&mixed, &EstimatorSpec::default_moments(2)),
            Err(Error::MixedConfigs(_))
        ));
    }

    #[test]
    fn transformed_runs_record_the_resolved_transform() {
        let mut cfg = RunConfig::new(TargetConfig::gen_gaussian(2, 0.5), RefreshPolicy::constant(1.0));
        cfg.transform = Some(TransformConfig::Poly { radius: None, p: None });
        cfg.horizon = Some(Horizon::Events(50));
        let t = run_chains(&cfg, None).unwrap().remove(0);
        assert_eq!(t.header.transform, Some(TransformConfig::Poly { radius: Some(1.0), p: Some(5.0) }));
        let out = estimate_trajectories(&[t], &[EstimatorSpec {
            name: "one".into(),
            terms: vec![crate::estimators::Monomial { coefficient: 1.0, indices: vec![] }],
        }])
        .unwrap();
        assert!((out.functions[0].path.estimate - 1.0).abs() < 1e-12);
        assert!((out.functions[0].jump_chain.as_ref().unwrap().estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_checks_pass() {
        let report = cmd_transform_check(1).unwrap();
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(report.passed);
    }

    #[test]
    fn diagnose_gaussian() {
        let mut cfg = gauss_cfg();
        cfg.policy = RefreshPolicy::constant(10.0);
        cfg.drift = Some(DriftGrid::new(vec![20.0, 50.0, 100.0], 8, 33));
        let out = cmd_diagnose(&cfg, None).unwrap();
        assert_eq!(out.drift.verdict, crate::diagnostics::Verdict::Confirmed);
        assert_eq!(out.advice.regime, crate::diagnostics::Regime::RegularA);
    }
}
