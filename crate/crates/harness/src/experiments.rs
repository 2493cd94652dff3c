//! Experiment orchestration: variant comparisons, learning-rate tuning, sweeps
//! and the self-contained verification suite.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use ecx_core::oracle::{self, C2Sign, SignResolution};
use ecx_core::{
    run_on, AlphaSchedule, CompressorKind, CompressorSpec, Error, EstimatorKind, Formulation, Problem,
    ProblemKind, ProblemSpec, RunConfig, RunTrace, SchemeKind,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Variant, DEFAULT_GAMMA, GAMMA_GRID};
use crate::metrics::{fmt17, write_csv};

/// Result of one variant run.
#[derive(Debug)]
pub struct VariantOutcome {
    pub label: String,
    pub config: RunConfig,
    /// Full trace, or the partial trace up to a divergence.
    pub trace: RunTrace,
    pub divergence: Option<(u64, String)>,
}

impl VariantOutcome {
    /// Compressed runs without compensation are allowed to blow up.
    pub fn expected_divergence(&self) -> bool {
        self.config.is_compressed() && self.config.scheme.kind == SchemeKind::NoCompensation
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.trace.final_grad_norm_sq.sqrt()
    }
}

/// Run one configuration, turning divergence into a flagged partial result.
pub fn run_variant(label: &str, config: RunConfig, problem: &Problem) -> anyhow::Result<VariantOutcome> {
    match run_on(&config, problem) {
        Ok(trace) => Ok(VariantOutcome {
            label: label.into(),
            config,
            trace,
            divergence: None,
        }),
        Err(Error::Divergence { step, reason, trace }) => Ok(VariantOutcome {
            label: label.into(),
            config,
            trace: *trace,
            divergence: Some((step, reason)),
        }),
        Err(e) => Err(e).with_context(|| format!("variant {label:?}")),
    }
}

/// Run all variants of `cfg` against one shared problem instance, concurrently.
pub fn run_variants(cfg: &ExperimentConfig, base: &RunConfig, problem: &Problem) -> anyhow::Result<Vec<VariantOutcome>> {
    cfg.variants
        .par_iter()
        .map(|v| run_variant(&v.label, v.apply(base), problem))
        .collect()
}

/// Pick the `γ` from `grid` with the smallest final `‖∇f‖²` on `reference`.
/// Divergent or non-finite runs never win; ties go to the earlier grid entry.
pub fn tune_gamma(reference: &RunConfig, grid: &[f64], problem: &Problem) -> anyhow::Result<(f64, Vec<(f64, f64)>)> {
    if grid.is_empty() {
        bail!("empty learning-rate grid");
    }
    let scores: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&gamma| {
            let mut cfg = reference.clone();
            cfg.gamma = gamma;
            let outcome = run_variant("tuning", cfg, problem)?;
            let score = if outcome.divergence.is_some() || !outcome.trace.final_grad_norm_sq.is_finite() {
                f64::INFINITY
            } else {
                outcome.trace.final_grad_norm_sq
            };
            Ok((gamma, score))
        })
        .collect::<anyhow::Result<_>>()?;
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |best, &(g, s)| match best {
            Some((_, bs)) if bs <= s => best,
            _ => Some((g, s)),
        })
        .unwrap();
    if !best.1.is_finite() {
        bail!("every learning rate in the grid diverged");
    }
    Ok((best.0, scores))
}

fn reference_variant(cfg: &ExperimentConfig) -> &Variant {
    cfg.variants
        .iter()
        .find(|v| v.uncompressed)
        .unwrap_or(&cfg.variants[0])
}

#[derive(Debug)]
pub struct CompareSummary {
    pub gamma: f64,
    pub tuning: Vec<(f64, f64)>,
    pub reference: String,
    pub outcomes: Vec<VariantOutcome>,
}

impl CompareSummary {
    fn reference_outcome(&self) -> &VariantOutcome {
        self.outcomes.iter().find(|o| o.label == self.reference).unwrap()
    }

    /// `log10 ‖∇f(x_T)‖` of `label` minus that of the reference (positive = worse).
    pub fn log10_gap(&self, label: &str) -> Option<f64> {
        let o = self.outcomes.iter().find(|o| o.label == label)?;
        if o.divergence.is_some() {
            return None;
        }
        Some(o.final_grad_norm().log10() - self.reference_outcome().final_grad_norm().log10())
    }

    pub fn unexpected_divergence(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| o.divergence.is_some() && !o.expected_divergence())
    }

    /// Key-value report.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "gamma = {}", fmt17(self.gamma));
        for (g, score) in &self.tuning {
            let _ = writeln!(s, "tuning.gamma_{g} = {}", fmt17(*score));
        }
        let _ = writeln!(s, "reference = {}", self.reference);
        let reference = self.reference_outcome().trace.final_grad_norm_sq;
        for o in &self.outcomes {
            let p = &o.label;
            let _ = writeln!(s, "{p}.final_grad_norm_sq = {}", fmt17(o.trace.final_grad_norm_sq));
            let rel = (o.trace.final_grad_norm_sq - reference) / reference;
            let _ = writeln!(s, "{p}.relative_gap = {}", fmt17(rel));
            match self.log10_gap(p) {
                Some(gap) => {
                    let _ = writeln!(s, "{p}.log10_gap = {}", fmt17(gap));
                }
                None => {
                    let _ = writeln!(s, "{p}.log10_gap = diverged");
                }
            }
            let _ = writeln!(s, "{p}.steps = {}", o.trace.t_effective);
            if let Some((step, reason)) = &o.divergence {
                let kind = if o.expected_divergence() { "expected" } else { "unexpected" };
                let _ = writeln!(s, "{p}.divergence = {kind} at step {step}: {reason}");
            }
        }
        s
    }
}

/// Tune (if requested) and run every variant.
pub fn compare(cfg: &ExperimentConfig) -> anyhow::Result<CompareSummary> {
    let problem = Problem::build(&cfg.base.problem)?;
    let reference = reference_variant(cfg);
    let mut base = cfg.base.clone();
    let mut tuning = Vec::new();
    if let Some(t) = &cfg.tuning {
        let (gamma, scores) = tune_gamma(&reference.apply(&base), &t.gammas, &problem)?;
        base.gamma = gamma;
        tuning = scores;
    }
    let outcomes = run_variants(cfg, &base, &problem)?;
    Ok(CompareSummary {
        gamma: base.gamma,
        tuning,
        reference: reference.label.clone(),
        outcomes,
    })
}

/// One CSV per variant plus `summary.txt`.
pub fn write_outputs(summary: &CompareSummary, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for o in &summary.outcomes {
        let path = out.join(format!("{}.csv", o.label));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(&o.trace, std::io::BufWriter::new(file))?;
    }
    fs::write(out.join("summary.txt"), summary.render())?;
    Ok(())
}

/// Learning-rate grid used by the linear-regression comparison: the searched
/// grid plus the separately reported best value.
pub fn figure1_gamma_grid() -> Vec<f64> {
    let mut grid = GAMMA_GRID.to_vec();
    grid.insert(2, DEFAULT_GAMMA);
    grid
}

#[derive(Debug)]
pub struct Figure1Summary {
    pub estimator: EstimatorKind,
    pub compare: CompareSummary,
}

/// Uncompressed / no compensation / single / ErrorCompensatedX with `γ` tuned on
/// the uncompressed run.
pub fn figure1_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Figure1Summary> {
    let base = &cfg.base;
    if !matches!(base.estimator, EstimatorKind::Storm | EstimatorKind::Igt | EstimatorKind::RootSgd) {
        bail!("the comparison needs a STORM or IGT estimator");
    }
    if !matches!(base.schedule, AlphaSchedule::InverseT | AlphaSchedule::InverseLinear { .. }) {
        bail!("the comparison needs alpha_t = 1/t or 1/(1 + c0 t)");
    }
    if !matches!(base.worker_compressor.map(|c| c.kind), Some(CompressorKind::OneBit)) {
        bail!("the comparison needs the OneBit compressor");
    }
    if base.problem.batch_size != 1 {
        bail!("the comparison needs batch size 1");
    }
    let mut cfg = cfg.clone();
    if cfg.tuning.is_none() {
        cfg.tuning = Some(crate::config::Tuning {
            gammas: figure1_gamma_grid(),
        });
    }
    Ok(Figure1Summary {
        estimator: base.estimator,
        compare: compare(&cfg)?,
    })
}

#[derive(Debug)]
pub struct SweepCell {
    pub gamma: f64,
    pub param: Option<(String, f64)>,
    pub outcome: VariantOutcome,
}

impl SweepCell {
    pub fn file_stem(&self) -> String {
        match &self.param {
            Some((name, value)) => format!("gamma_{}_{}_{}", self.gamma, name, value),
            None => format!("gamma_{}", self.gamma),
        }
    }
}

/// Grid over `γ` × (`α` or `c₀`) on the base configuration, cells in parallel.
pub fn sweep(cfg: &ExperimentConfig) -> anyhow::Result<Vec<SweepCell>> {
    let Some(s) = &cfg.sweep else {
        bail!("config has no [sweep] section");
    };
    let problem = Problem::build(&cfg.base.problem)?;
    let params: Vec<Option<(String, AlphaSchedule, f64)>> = if !s.alphas.is_empty() {
        s.alphas
            .iter()
            .map(|&a| Some(("alpha".to_string(), AlphaSchedule::constant(a), a)))
            .collect()
    } else if !s.c0s.is_empty() {
        s.c0s
            .iter()
            .map(|&c0| Some(("c0".to_string(), AlphaSchedule::InverseLinear { c0 }, c0)))
            .collect()
    } else {
        vec![None]
    };
    let cells: Vec<(f64, Option<(String, AlphaSchedule, f64)>)> = s
        .gammas
        .iter()
        .flat_map(|&g| params.iter().map(move |p| (g, p.clone())))
        .collect();
    cells
        .into_par_iter()
        .map(|(gamma, param)| {
            let mut c = cfg.base.clone();
            c.gamma = gamma;
            if let Some((_, schedule, _)) = &param {
                c.schedule = *schedule;
            }
            let outcome = run_variant("cell", c, &problem)?;
            Ok(SweepCell {
                gamma,
                param: param.map(|(n, _, v)| (n, v)),
                outcome,
            })
        })
        .collect()
}

pub fn write_sweep(cells: &[SweepCell], out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let mut summary = String::from("cell,gamma,param,value,final_grad_norm_sq,diverged\n");
    for cell in cells {
        let stem = cell.file_stem();
        let file = fs::File::create(out.join(format!("{stem}.csv")))?;
        write_csv(&cell.outcome.trace, std::io::BufWriter::new(file))?;
        let (name, value) = cell
            .param
            .as_ref()
            .map_or((String::new(), String::new()), |(n, v)| (n.clone(), v.to_string()));
        let _ = writeln!(
            summary,
            "{stem},{},{name},{value},{},{}",
            cell.gamma,
            fmt17(cell.outcome.trace.final_grad_norm_sq),
            cell.outcome.divergence.is_some()
        );
    }
    fs::write(out.join("sweep_summary.csv"), summary)?;
    Ok(())
}

/// One named pass/fail line of the verification suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Sign of the two-steps-back term that reproduces the simulation.
    pub c2_sign: Option<C2Sign>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let sign = match self.c2_sign {
            Some(C2Sign::Minus) => "minus",
            Some(C2Sign::Plus) => "plus",
            None => "unresolved",
        };
        let _ = writeln!(s, "c2_sign = {sign}");
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(s, "{} = {verdict} ({})", c.name, c.detail);
        }
        let _ = writeln!(s, "overall = {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Outcome of the residual-identity sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentitySweep {
    pub cases: usize,
    pub max_rel_err: f64,
    /// Sign shared by every case where it is identifiable.
    pub sign: Option<C2Sign>,
    pub consistent: bool,
    pub failures: Vec<String>,
}

/// Closed-form residual check for `β = 1`, constant `α ∈ {0.1, 0.5, 1}`, all
/// schemes, `n ∈ {1, 4}`, OneBit and TopK, `T = 200`, `d = 10`, in `formulation`.
pub fn residual_identity_sweep(seed: u64, formulation: Formulation, tolerance: f64) -> anyhow::Result<IdentitySweep> {
    let problem = ProblemSpec::new(ProblemKind::LinReg {
        d: 10,
        samples: 256,
        label_noise: 0.1,
        condition_number: 10.0,
    })
    .with_seed(seed);
    let built = Problem::build(&problem)?;
    let mut cases = Vec::new();
    for compressor in [CompressorSpec::one_bit(), CompressorSpec::new(CompressorKind::TopK { k: 3 })] {
        for alpha in [0.1, 0.5, 1.0] {
            for scheme in SchemeKind::ALL {
                for n in [1, 4] {
                    let mut c = RunConfig::new(problem.clone(), EstimatorKind::Momentum, AlphaSchedule::constant(alpha), 0.01, 200)
                        .with_compressor(compressor)
                        .with_scheme(scheme, 1.0)
                        .with_workers(n)
                        .with_seed(seed);
                    c.formulation = formulation;
                    c.record.full = true;
                    cases.push(c);
                }
            }
        }
    }
    let results: Vec<(String, std::result::Result<oracle::IdentityReport, Error>)> = cases
        .par_iter()
        .map(|c| {
            let name = format!(
                "{:?}/alpha={}/{}/n={}",
                c.worker_compressor.unwrap().kind,
                match c.schedule {
                    AlphaSchedule::Constant { alpha } => alpha,
                    _ => f64::NAN,
                },
                c.scheme.kind.label(),
                c.workers
            );
            let report = run_on(c, &built).and_then(|t| oracle::verify_residual_identity(&t, tolerance));
            (name, report)
        })
        .collect();

    let mut out = IdentitySweep {
        cases: results.len(),
        max_rel_err: 0.0,
        sign: None,
        consistent: true,
        failures: Vec::new(),
    };
    for (name, r) in results {
        match r {
            Ok(rep) => {
                let (err, sign) = match rep.resolved {
                    SignResolution::Minus => (rep.max_rel_err_minus, Some(C2Sign::Minus)),
                    SignResolution::Plus => (rep.max_rel_err_plus, Some(C2Sign::Plus)),
                    SignResolution::Either => (rep.max_rel_err_minus.min(rep.max_rel_err_plus), None),
                };
                out.max_rel_err = out.max_rel_err.max(err);
                if let Some(s) = sign {
                    match out.sign {
                        None => out.sign = Some(s),
                        Some(prev) if prev != s => {
                            out.consistent = false;
                            out.failures.push(format!("{name}: sign {s:?} disagrees with {prev:?}"));
                        }
                        _ => {}
                    }
                }
            }
            Err(e) => out.failures.push(format!("{name}: {e}")),
        }
    }
    Ok(out)
}

fn bitwise_same(a: &RunTrace, b: &RunTrace) -> bool {
    a.final_x.bitwise_eq(&b.final_x)
        && a.records.len() == b.records.len()
        && a
            .records
            .iter()
            .zip(&b.records)
            .all(|(x, y)| x.loss.to_bits() == y.loss.to_bits() && x.v_norm.to_bits() == y.v_norm.to_bits())
}

/// The self-contained oracle suite behind `ecx verify`.
pub fn verify_suite(seed: u64) -> anyhow::Result<VerifyReport> {
    let mut checks = Vec::new();

    let folded = residual_identity_sweep(seed, Formulation::Folded, 1e-9)?;
    let unified = residual_identity_sweep(seed, Formulation::Unified, 1e-9)?;
    let sign = match (folded.sign, unified.sign) {
        (Some(a), Some(b)) if a == b => Some(a),
        (a, None) => a,
        (None, b) => b,
        _ => None,
    };
    for (name, s) in [("residual_identity.folded", &folded), ("residual_identity.unified", &unified)] {
        checks.push(Check {
            name,
            passed: s.failures.is_empty() && s.consistent && s.sign.is_some(),
            detail: format!(
                "{} cases, max relative error {:e}{}",
                s.cases,
                s.max_rel_err,
                s.failures.first().map(|f| format!(", first failure {f}")).unwrap_or_default()
            ),
        });
    }

    let linreg = ProblemSpec::default_linreg().with_seed(seed);
    let problem = Problem::build(&linreg)?;

    // α ≡ 1 makes ErrorCompensatedX and single compensation coincide.
    let collapse = |kind| {
        RunConfig::new(linreg.clone(), EstimatorKind::Storm, AlphaSchedule::constant(1.0), 0.05, 300)
            .with_compressor(CompressorSpec::one_bit())
            .with_scheme(kind, 0.3)
            .with_workers(4)
            .with_seed(seed)
    };
    let a = run_on(&collapse(SchemeKind::ErrorCompensatedX), &problem)?;
    let b = run_on(&collapse(SchemeKind::SingleCompensation), &problem)?;
    checks.push(Check {
        name: "alpha_one_collapse",
        passed: bitwise_same(&a, &b),
        detail: "ecx vs single, alpha = 1, 300 steps".into(),
    });

    // The identity compressor reproduces the uncompressed run for every scheme.
    let plain = RunConfig::new(linreg.clone(), EstimatorKind::Storm, AlphaSchedule::constant(0.2), 0.05, 300)
        .with_workers(4)
        .with_seed(seed);
    let reference = run_on(&plain, &problem)?;
    let identity_ok = SchemeKind::ALL.iter().all(|&kind| {
        let c = plain.clone().with_compressor(CompressorSpec::identity()).with_scheme(kind, 0.3);
        run_on(&c, &problem).is_ok_and(|t| bitwise_same(&t, &reference))
    });
    checks.push(Check {
        name: "identity_compressor_reduction",
        passed: identity_ok,
        detail: "all schemes vs uncompressed, 300 steps".into(),
    });

    // Residual-sum ordering and non-accumulation.
    let runs: Vec<RunTrace> = SchemeKind::ALL
        .par_iter()
        .map(|&kind| {
            let mut c = RunConfig::new(linreg.clone(), EstimatorKind::Momentum, AlphaSchedule::constant(0.05), 1e-3, 2000)
                .with_compressor(CompressorSpec::one_bit())
                .with_scheme(kind, 1.0)
                .with_workers(8)
                .with_seed(seed);
            c.record.ghost = true;
            run_on(&c, &problem)
        })
        .collect::<Result<_, _>>()?;
    let sums = oracle::residual_sum_comparison(&runs[0], &runs[1], &runs[2])?;
    checks.push(Check {
        name: "residual_sum_ordering",
        passed: sums.ordering_holds && sums.ecx_non_accumulating,
        detail: format!(
            "none {:e}, single {:e}, ecx {:e}, ecx max {:e} vs 2*gamma*eps {:e}",
            sums.no_compensation,
            sums.single,
            sums.ecx,
            sums.ecx_max_norm,
            2e-3 * sums.epsilon_hat
        ),
    });

    // Aggregated update over workers and server.
    let mut c = RunConfig::new(linreg, EstimatorKind::Storm, AlphaSchedule::constant(0.1), 0.01, 500)
        .with_compressor(CompressorSpec::one_bit())
        .with_scheme(SchemeKind::ErrorCompensatedX, 0.3)
        .with_workers(4)
        .with_seed(seed);
    c.record.full = true;
    let err = oracle::aggregated_update_error(&run_on(&c, &problem)?)?;
    checks.push(Check {
        name: "aggregated_update",
        passed: err < 1e-12,
        detail: format!("max relative error {err:e}"),
    });

    Ok(VerifyReport { checks, c2_sign: sign })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default_linreg();
        cfg.base.steps = 200;
        cfg
    }

    #[test]
    fn identity_compressor_closes_every_gap() {
        let mut cfg = small();
        cfg.base.worker_compressor = Some(CompressorSpec::identity());
        cfg.base.server_compressor = Some(CompressorSpec::identity());
        cfg.base.formulation = Formulation::Folded;
        let summary = compare(&cfg).unwrap();
        for o in &summary.outcomes {
            assert_eq!(summary.log10_gap(&o.label), Some(0.0), "{}", o.label);
            assert_eq!(
                fmt17(o.trace.final_grad_norm_sq),
                fmt17(summary.outcomes[0].trace.final_grad_norm_sq)
            );
        }
    }

    #[test]
    fn tuning_skips_divergent_rates() {
        let cfg = small();
        let problem = Problem::build(&cfg.base.problem).unwrap();
        let mut reference = cfg.base.clone();
        reference.worker_compressor = None;
        reference.server_compressor = None;
        let (gamma, scores) = tune_gamma(&reference, &[1e6, 0.05], &problem).unwrap();
        assert_eq!(gamma, 0.05);
        assert!(scores[0].1.is_infinite());
    }

    #[test]
    fn figure1_rejects_wrong_estimator() {
        let mut cfg = small();
        cfg.base.estimator = EstimatorKind::Momentum;
        assert!(figure1_experiment(&cfg).is_err());
    }

    #[test]
    fn sweep_cells_cover_the_grid() {
        let mut cfg = small();
        cfg.base.steps = 20;
        cfg.sweep = Some(crate::config::Sweep {
            gammas: vec![0.1, 0.01],
            alphas: vec![],
            c0s: vec![0.1, 0.05, 0.001],
        });
        let cells = sweep(&cfg).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].file_stem(), "gamma_0.1_c0_0.1");
    }
}
