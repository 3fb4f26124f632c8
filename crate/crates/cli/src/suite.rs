//! Suite configuration and the check runner.

use std::path::Path;

use anyhow::Context;
use onesided::grid::{FunctionSpec, Grid};
use onesided::operators::KernelSpec;
use onesided::orlicz::YoungFunction;
use onesided::verify::{
    cotlar_report, estimate_report, good_lambda_records, lemma_check, maximal_equivalence_report,
    necessity_construct_and_check, with_refinement, Corpus, EstimateMode, EstimateSpec, Expr, GoodLambdaWeight,
    LemmaParams, RatioRecord, VerificationReport,
};
use onesided::maximal::{maximal_plus, sharp_maximal};
use onesided::weights::{cp_plus_scan, log_condition_ratio, ConfigSpec, ScanGenerator, Weight, WeightSpec};
use onesided::WindowPolicy;
use serde::{Deserialize, Serialize};

use crate::grid_spec::GridSpec;
use crate::output::number;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub grid: GridSpec,
    #[serde(default)]
    pub corpus: CorpusSpec,
    /// Rerun every check with twice the cells and record the trend.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Explicit functions; the standard corpus when absent.
    #[serde(default)]
    pub functions: Option<Vec<FunctionSpec>>,
    #[serde(default)]
    pub seed: u64,
    /// Drop signed functions from the standard corpus.
    #[serde(default)]
    pub nonnegative: bool,
}

impl CorpusSpec {
    pub fn corpus(&self) -> Corpus {
        match &self.functions {
            Some(functions) => Corpus {
                functions: functions.clone(),
            },
            None if self.nonnegative => Corpus::nonnegative(self.seed),
            None => Corpus::standard(self.seed),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    /// Largest acceptable supremum ratio.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Largest acceptable relative change under refinement.
    #[serde(default)]
    pub max_trend: Option<f64>,
    /// Flags do not fail the check.
    #[serde(default)]
    pub allow_flags: bool,
    pub check: CheckKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodLambdaWeightSpec {
    pub weight: WeightSpec,
    pub q: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    /// Fast against naive `M^+`; the ratio is the relative difference.
    MaximalEquivalence {},
    Estimate {
        lhs: Expr,
        rhs: Expr,
        mode: EstimateMode,
    },
    CpScan {
        weight: WeightSpec,
        p: f64,
        eps: f64,
        generator: ScanGenerator,
    },
    LogCondition {
        weight: WeightSpec,
        p: f64,
        configs: Vec<ConfigSpec>,
    },
    /// Levels `k` default to four below the top of `M^+f`, per function.
    GoodLambda {
        gamma: f64,
        #[serde(default)]
        levels: Option<Vec<i32>>,
        #[serde(default)]
        weighted: Option<GoodLambdaWeightSpec>,
    },
    Lemma {
        weight: WeightSpec,
        params: LemmaParams,
    },
    /// The ratio is `M^{♯,+}f / M^+χ_{(a,c)}`; broken exactness is flagged.
    Necessity { generator: ScanGenerator },
    Cotlar {
        kernel: KernelSpec,
        young: YoungFunction,
        delta: f64,
    },
}

impl SuiteConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Realizes every grammar once so that errors surface before any check
    /// runs.
    pub fn validate(&self) -> anyhow::Result<()> {
        let grid = self.grid.grid()?;
        if self.checks.iter().any(|c| c.needs_corpus()) {
            self.corpus.corpus().realize(&grid)?;
        }
        let mut names = std::collections::BTreeSet::new();
        for c in &self.checks {
            anyhow::ensure!(names.insert(&c.name), "duplicate check name {:?}", c.name);
            c.check.validate(&grid).with_context(|| format!("check {:?}", c.name))?;
        }
        Ok(())
    }

    pub fn reseed(&mut self, seed: u64) {
        self.corpus.seed = seed;
        for c in &mut self.checks {
            if let CheckKind::CpScan { generator, .. } | CheckKind::Necessity { generator } = &mut c.check {
                generator.seed = seed;
            }
        }
    }
}

impl Check {
    fn needs_corpus(&self) -> bool {
        matches!(
            self.check,
            CheckKind::MaximalEquivalence {}
                | CheckKind::Estimate { .. }
                | CheckKind::GoodLambda { .. }
                | CheckKind::Lemma {
                    params: LemmaParams::Mpq { .. },
                    ..
                }
                | CheckKind::Cotlar { .. }
        )
    }
}

impl CheckKind {
    fn validate(&self, grid: &Grid) -> anyhow::Result<()> {
        match self {
            CheckKind::Estimate {
                mode: EstimateMode::WeightedNorm { weight, .. },
                ..
            } => {
                Weight::from_spec(weight, grid)?;
            }
            CheckKind::CpScan { weight, generator, .. } => {
                Weight::from_spec(weight, grid)?;
                for (k, c) in generator.configs().iter().enumerate() {
                    c.realize(k.to_string(), grid)?;
                }
            }
            CheckKind::LogCondition { weight, configs, .. } => {
                Weight::from_spec(weight, grid)?;
                for (k, c) in configs.iter().enumerate() {
                    c.realize(k.to_string(), grid)?;
                }
            }
            CheckKind::Lemma { weight, .. } => {
                Weight::from_spec(weight, grid)?;
            }
            CheckKind::Necessity { generator } => {
                for (k, c) in generator.configs().iter().enumerate() {
                    c.realize(k.to_string(), grid)?;
                }
            }
            CheckKind::GoodLambda { weighted: Some(w), .. } => {
                Weight::from_spec(&w.weight, grid)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn run(&self, grid: &Grid, corpus: &Corpus) -> anyhow::Result<VerificationReport> {
        let functions = || corpus.realize(grid);
        Ok(match self {
            CheckKind::MaximalEquivalence {} => maximal_equivalence_report(&functions()?)?,
            CheckKind::Estimate { lhs, rhs, mode } => {
                let spec = EstimateSpec {
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                    mode: mode.clone(),
                };
                estimate_report(&spec, &functions()?)?
            }
            CheckKind::CpScan {
                weight,
                p,
                eps,
                generator,
            } => cp_plus_scan(&Weight::from_spec(weight, grid)?, *p, *eps, generator)?,
            CheckKind::LogCondition { weight, p, configs } => {
                let w = Weight::from_spec(weight, grid)?;
                let records = configs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| Ok(log_condition_ratio(&w, *p, &c.realize(format!("config-{k:04}"), grid)?)?))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                VerificationReport::from_records("log_condition", records)
            }
            CheckKind::GoodLambda {
                gamma,
                levels,
                weighted,
            } => {
                let w = weighted
                    .as_ref()
                    .map(|s| Weight::from_spec(&s.weight, grid))
                    .transpose()?;
                let mut report = VerificationReport::new("good_lambda");
                let mut sup_measure: f64 = 0.0;
                for (id, f) in functions()? {
                    let mf = maximal_plus(&f);
                    let sharp = sharp_maximal(&f, 1.0, WindowPolicy::AllLengths)?;
                    let peak = mf.max_value();
                    let ks = match levels {
                        Some(ks) => ks.clone(),
                        None if peak > 0.0 => {
                            let top = peak.log2().floor() as i32;
                            (top - 4..top).collect()
                        }
                        None => Vec::new(),
                    };
                    for k in ks {
                        let side = weighted.as_ref().zip(w.as_ref()).map(|(s, w)| GoodLambdaWeight {
                            w,
                            q: s.q,
                            eps: s.eps,
                        });
                        let (records, sup) = good_lambda_records(&f, &mf, &sharp, *gamma, k, side)?;
                        sup_measure = sup_measure.max(sup);
                        for r in records {
                            report.push(RatioRecord {
                                id: format!("{id}/{}", r.id),
                                ..r
                            });
                        }
                    }
                }
                report.extra("sup_measure_ratio", sup_measure)
            }
            CheckKind::Lemma { weight, params } => {
                let w = Weight::from_spec(weight, grid)?;
                let corpus = match params {
                    LemmaParams::Mpq { .. } => functions()?,
                    _ => Vec::new(),
                };
                lemma_check(params, &w, &corpus)?
            }
            CheckKind::Necessity { generator } => {
                let mut report = VerificationReport::new("necessity");
                for (k, spec) in generator.configs().iter().enumerate() {
                    let cfg = spec.realize(format!("config-{k:04}"), grid)?;
                    let out = necessity_construct_and_check(&cfg)?;
                    let x = &out.report.extras;
                    let mut r = RatioRecord::new(cfg.id.clone(), x["sharp_over_closed_form"], 1.0)
                        .with_param("average", x["average"])
                        .with_param("bmo_plus", x["bmo_plus"]);
                    if x["support_violations"] > 0.0 {
                        r = r.flag("support-violation");
                    }
                    if x["e_violations"] > 0.0 {
                        r = r.flag("e-violation");
                    }
                    report.push(r);
                }
                report.seed = Some(generator.seed);
                report
            }
            CheckKind::Cotlar { kernel, young, delta } => cotlar_report(kernel, young, *delta, &functions()?)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub reasons: Vec<String>,
    pub report: VerificationReport,
}

impl Check {
    pub fn evaluate(&self, report: VerificationReport) -> CheckResult {
        let mut reasons = Vec::new();
        if let Some(t) = self.threshold {
            if !(report.sup_ratio <= t) {
                reasons.push(format!("sup ratio {} exceeds threshold {t}", report.sup_ratio));
            }
        }
        if let (Some(limit), Some(trend)) = (self.max_trend, report.trend) {
            if !(trend.relative_change <= limit) {
                reasons.push(format!("relative change {} exceeds {limit}", trend.relative_change));
            }
        }
        if !self.allow_flags && report.flag_count() > 0 {
            reasons.push(format!("{} unexpected flags", report.flag_count()));
        }
        CheckResult {
            name: self.name.clone(),
            passed: reasons.is_empty(),
            reasons,
            report,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub grid: GridSpec,
    pub refine: bool,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One row per check: name, supremum, trend, flag count, pass.
    pub fn summary_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "sup_ratio", "trend", "flags", "passed"])?;
        for c in &self.checks {
            let trend = c.report.trend.map(|t| number(t.relative_change)).unwrap_or_default();
            w.write_record([
                c.name.clone(),
                number(c.report.sup_ratio),
                trend,
                c.report.flag_count().to_string(),
                c.passed.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

pub fn run_suite(config: &SuiteConfig) -> anyhow::Result<SuiteReport> {
    let grid = config.grid.grid()?;
    let corpus = config.corpus.corpus();
    let checks = config
        .checks
        .iter()
        .map(|c| {
            let report = if config.refine {
                with_refinement(&grid, |g| c.check.run(g, &corpus).map_err(to_core))
            } else {
                c.check.run(&grid, &corpus).map_err(to_core)
            }
            .with_context(|| format!("check {:?}", c.name))?;
            Ok(c.evaluate(report))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(SuiteReport {
        grid: config.grid,
        refine: config.refine,
        seed: config.corpus.seed,
        checks,
    })
}

fn to_core(e: anyhow::Error) -> onesided::Error {
    match e.downcast::<onesided::Error>() {
        Ok(e) => e,
        Err(e) => onesided::Error::Unsupported(e.to_string()),
    }
}
