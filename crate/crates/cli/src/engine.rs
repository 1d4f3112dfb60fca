//! Engine dispatch: builds the models from a config, runs one engine and
//! collects every artifact file in memory.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smforge_core::circuit::{AffineFine, CoarseModel, FineEmulator, TouchstoneSequence};
use smforge_core::explicit::{run_explicit_sm, ExplicitSettings, PointKind};
use smforge_core::model::FineRecord;
use smforge_core::rrsm::{coarse_optimum, Mode, Outcome};
use smforge_core::{
    run_ism_rrsm, violation, AuxModel, DesignModel, DesignSpec, EvalCounter, Response, Violation, WithAux,
};

use crate::config::{Engine, FineSource, LoadedConfig};
use crate::error::Result;

pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const LOG_FILE: &str = "run.log";

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub corners: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub band: String,
    pub worst_margin_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub step: String,
    pub design: Vec<f64>,
    pub objective: f64,
    /// Fine evaluations spent up to and including this row.
    pub fine_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub engine: Engine,
    pub outcome: String,
    pub success: bool,
    pub fine_evals: usize,
    pub coarse_evals: u64,
    pub seed: u64,
    pub final_design: Option<Vec<f64>>,
    pub final_objective: Option<f64>,
    /// Worst margin per spec band of the final response; `<= 0` is met.
    pub margins: Vec<BandSummary>,
    pub iterations: Vec<IterationRow>,
    pub fine_files: Vec<String>,
    /// Every file of the run directory other than this summary.
    pub files: Vec<String>,
    pub error: Option<String>,
}

/// Files of one run, in write order, plus the summary.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Summary,
}

impl Artifact {
    /// One-line human summary.
    pub fn headline(&self) -> String {
        let s = &self.summary;
        let mut line = format!("{}: {}, fine_evals={}", s.engine.name(), s.outcome, s.fine_evals);
        if let Some(obj) = s.final_objective {
            let _ = write!(line, ", objective={obj:.4} dB");
        }
        if let Some(err) = &s.error {
            let _ = write!(line, ", error: {err}");
        }
        line
    }
}

struct Collector {
    files: Vec<(String, Vec<u8>)>,
    log: String,
}

impl Collector {
    fn new() -> Self {
        Collector {
            files: Vec::new(),
            log: String::new(),
        }
    }

    fn log(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let text = serde_json::to_string_pretty(value).expect("artifact types serialize");
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn csv(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn fine_records(&mut self, records: &[FineRecord]) -> Vec<String> {
        records
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let name = fine_file_name(k, &r.label);
                self.csv(&name, r.response.to_csv_string());
                name
            })
            .collect()
    }
}

pub fn fine_file_name(index: usize, label: &str) -> String {
    format!("fine_{index:03}_{label}.csv")
}

fn margins(v: &Violation) -> Vec<BandSummary> {
    v.bands
        .iter()
        .map(|b| BandSummary {
            band: b.band.to_string(),
            worst_margin_db: b.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Result of one engine before file naming and summary assembly.
struct EngineResult {
    outcome: String,
    success: bool,
    final_design: Option<Vec<f64>>,
    final_response: Option<Response>,
    iterations: Vec<IterationRow>,
    records: Vec<FineRecord>,
}

/// Runs the engine selected for `loaded` and returns the complete artifact.
/// Engine failures are recorded in the artifact instead of being returned.
pub fn execute(engine: Engine, loaded: &LoadedConfig, overrides: Overrides) -> Artifact {
    let cfg = &loaded.config;
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let counter = Arc::new(EvalCounter::new());
    let mut out = Collector::new();
    out.files.push((CONFIG_FILE.to_string(), loaded.raw.clone()));
    out.log(format!("engine={}", engine.name()));
    out.log(format!("seed={seed}"));
    out.log(format!("grid={}", cfg.grid));

    let result = run_engine(engine, loaded, overrides, seed, &counter, &mut out);
    let fine_count = counter.fine_evals() as usize;
    let coarse_count = counter.coarse_evals();

    let (summary_core, error) = match result {
        Ok(r) => (Some(r), None),
        Err(e) => {
            out.log(format!("error: {e}"));
            (None, Some(e.to_string()))
        }
    };
    let mut summary = Summary {
        engine,
        outcome: "error".into(),
        success: false,
        fine_evals: fine_count,
        coarse_evals: coarse_count,
        seed,
        final_design: None,
        final_objective: None,
        margins: Vec::new(),
        iterations: Vec::new(),
        fine_files: Vec::new(),
        files: Vec::new(),
        error,
    };
    if let Some(r) = summary_core {
        summary.fine_files = out.fine_records(&r.records);
        if r.records.len() != fine_count {
            out.log(format!(
                "warning: {} fine responses recorded but the counter shows {fine_count}",
                r.records.len()
            ));
        }
        if let Some(resp) = &r.final_response {
            if let Ok(v) = violation(resp, &cfg.spec) {
                summary.final_objective = Some(v.worst);
                summary.margins = margins(&v);
            }
        }
        summary.outcome = r.outcome;
        summary.success = r.success;
        summary.final_design = r.final_design;
        summary.iterations = r.iterations;
    }
    out.log(format!(
        "outcome={} fine_evals={} coarse_evals={}",
        summary.outcome, summary.fine_evals, summary.coarse_evals
    ));
    let log = std::mem::take(&mut out.log);
    out.files.push((LOG_FILE.to_string(), log.into_bytes()));
    summary.files = out.files.iter().map(|(n, _)| n.clone()).collect();
    Artifact {
        files: out.files,
        summary,
    }
}

fn fine_model(loaded: &LoadedConfig, coarse: &CoarseModel, counter: &Arc<EvalCounter>) -> Result<Box<dyn DesignModel>> {
    let cfg = &loaded.config;
    Ok(match &loaded.fine {
        FineSource::Emulator(truth) => Box::new(FineEmulator::new(cfg.geometry, cfg.aux(), *truth, counter.clone())?),
        FineSource::Touchstone(dir) => Box::new(TouchstoneSequence::new(dir.clone(), counter.clone())?),
        FineSource::Affine(a) => Box::new(AffineFine::new(
            coarse.clone(),
            cfg.aux(),
            a.shift,
            a.scale,
            a.offset_db,
            counter.clone(),
        )),
    })
}

fn run_engine(
    engine: Engine,
    loaded: &LoadedConfig,
    overrides: Overrides,
    seed: u64,
    counter: &Arc<EvalCounter>,
    out: &mut Collector,
) -> Result<EngineResult> {
    let cfg = &loaded.config;
    let coarse = CoarseModel::new(cfg.geometry, counter.clone())?;
    let fine = fine_model(loaded, &coarse, counter)?;
    let p0 = cfg.aux().to_vec();
    let start = cfg.start_design();
    let grid = &cfg.grid;
    let spec: &DesignSpec = &cfg.spec;

    match engine {
        Engine::Eval => {
            let response = fine.evaluate(&start, grid)?;
            let objective = violation(&response, spec)?.worst;
            out.log(format!("design={} objective={objective:.6}", fmt_vec(&start)));
            out.csv(
                "coarse.csv",
                coarse.evaluate_with_aux(&start, &p0, grid)?.to_csv_string(),
            );
            Ok(EngineResult {
                outcome: if objective <= 0.0 {
                    "spec-satisfied"
                } else {
                    "spec-violated"
                }
                .into(),
                success: true,
                final_design: Some(start.clone()),
                final_response: Some(response.clone()),
                iterations: vec![IterationRow {
                    step: "eval".into(),
                    design: start.clone(),
                    objective,
                    fine_evals: 1,
                }],
                records: vec![FineRecord {
                    label: "eval".into(),
                    design: start,
                    response,
                }],
            })
        }
        Engine::CoarseOpt => {
            let opt = coarse_optimum(&coarse, &p0, spec, grid, &start, &cfg.bounds(), &cfg.optimizer)?;
            let start_obj = violation(&coarse.evaluate_with_aux(&start, &p0, grid)?, spec)?.worst;
            out.log(format!("start objective={start_obj:.6}"));
            out.log(format!(
                "coarse optimum objective={:.6} iterations={} design={}",
                opt.objective_value,
                opt.iterations,
                fmt_vec(&opt.minimizer)
            ));
            out.json("coarse_optimum.json", &opt);
            out.csv(
                "coarse_start.csv",
                coarse.evaluate_with_aux(&start, &p0, grid)?.to_csv_string(),
            );
            let response = coarse.evaluate_with_aux(&opt.minimizer, &p0, grid)?;
            out.csv("coarse_optimum.csv", response.to_csv_string());
            let ok = opt.objective_value <= 0.0;
            Ok(EngineResult {
                outcome: if ok { "spec-satisfied" } else { "spec-violated" }.into(),
                success: ok,
                final_design: Some(opt.minimizer.clone()),
                final_response: Some(response),
                iterations: vec![IterationRow {
                    step: "coarse-optimum".into(),
                    design: opt.minimizer,
                    objective: opt.objective_value,
                    fine_evals: 0,
                }],
                records: Vec::new(),
            })
        }
        Engine::IsmRrsm => {
            let bounds = cfg.bounds();
            let xc = coarse_optimum(&coarse, &p0, spec, grid, &start, &bounds, &cfg.optimizer)?;
            out.log(format!(
                "coarse optimum objective={:.6} design={}",
                xc.objective_value,
                fmt_vec(&xc.minimizer)
            ));
            out.json("coarse_optimum.json", &xc);
            out.csv(
                "coarse_initial.csv",
                coarse.evaluate_with_aux(&xc.minimizer, &p0, grid)?.to_csv_string(),
            );
            let report = run_ism_rrsm(
                &coarse,
                fine.as_ref(),
                spec,
                grid,
                &xc.minimizer,
                &p0,
                &bounds,
                &cfg.rrsm,
                &cfg.optimizer,
            )?;
            for it in &report.iterations {
                out.log(format!(
                    "iteration {} mode={} fine_objective={:.6} calibration_residual={} design={}",
                    it.iteration,
                    mode_name(it.mode),
                    it.fine_objective,
                    it.calibration_residual.map_or("-".into(), |r| format!("{r:.6e}")),
                    fmt_vec(&it.design)
                ));
            }
            out.log(format!("rrsm_iterations={}", report.rrsm_iterations));
            out.json("rrsm_report.json", &report);
            let last = report.iterations.last().expect("at least one fine evaluation");
            out.csv(
                "coarse_final.csv",
                coarse.evaluate_with_aux(&last.design, &last.aux, grid)?.to_csv_string(),
            );
            let iterations = report
                .iterations
                .iter()
                .map(|it| IterationRow {
                    step: format!("{}-{}", it.iteration, mode_name(it.mode)),
                    design: it.design.clone(),
                    objective: it.fine_objective,
                    fine_evals: it.iteration + 1,
                })
                .collect();
            let success = report.outcome == Outcome::SpecSatisfied;
            Ok(EngineResult {
                outcome: if success { "spec-satisfied" } else { "budget-exhausted" }.into(),
                success,
                final_design: Some(last.design.clone()),
                final_response: report.fine_records.last().map(|r| r.response.clone()),
                iterations,
                records: report.fine_records,
            })
        }
        Engine::ExplicitSm => {
            let settings = ExplicitSettings {
                include_corners: cfg.explicit.include_corners || overrides.corners,
                seed,
                ..cfg.explicit
            };
            let cm = WithAux::new(&coarse, &p0);
            let run = run_explicit_sm(&cm, fine.as_ref(), spec, &cfg.region, grid, &settings, &cfg.optimizer)?;
            let rep = &run.report;
            out.log(format!(
                "base points={} corners={}",
                run.base.len(),
                settings.include_corners
            ));
            out.log(format!(
                "base error max before={:.6e} after={:.6e}",
                rep.max_base_before(),
                rep.max_base_after()
            ));
            out.log(format!(
                "test error max coarse={:.6e} surrogate={:.6e}",
                rep.max_test_coarse(),
                rep.max_test_surrogate()
            ));
            out.json("mapping.json", &run.mapping);
            out.json("surrogate_report.json", rep);
            out.json("surrogate_optimum.json", &run.surrogate_opt);
            out.csv(
                "base_errors.csv",
                base_error_csv(&run.base.points, &run.base.kinds, rep),
            );
            out.csv("test_errors.csv", test_error_csv(&run.test_points, rep));
            let success = run.validation_passed();
            let confirm = run.fine_records.last().expect("confirmation run is recorded");
            Ok(EngineResult {
                outcome: if success {
                    "validation-passed"
                } else {
                    "validation-failed"
                }
                .into(),
                success,
                final_design: Some(confirm.design.clone()),
                final_response: Some(confirm.response.clone()),
                iterations: vec![IterationRow {
                    step: "confirm".into(),
                    design: confirm.design.clone(),
                    objective: run.confirmation_objective,
                    fine_evals: run.fine_records.len(),
                }],
                records: run.fine_records,
            })
        }
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Ism => "ism",
        Mode::Rrsm => "rrsm",
    }
}

fn design_header(n: usize) -> String {
    (1..=n).map(|i| format!(",x{i}")).collect()
}

fn design_cells(x: &[f64]) -> String {
    x.iter().map(|v| format!(",{v}")).collect()
}

fn base_error_csv(points: &[Vec<f64>], kinds: &[PointKind], rep: &smforge_core::explicit::SurrogateReport) -> String {
    let n = points.first().map_or(0, Vec::len);
    let mut s = format!("index,kind{},coarse_error,surrogate_error\n", design_header(n));
    for (k, x) in points.iter().enumerate() {
        let kind = match kinds[k] {
            PointKind::Reference => "reference",
            PointKind::StarMinus => "star-",
            PointKind::StarPlus => "star+",
            PointKind::Corner => "corner",
        };
        let _ = writeln!(
            s,
            "{k},{kind}{},{},{}",
            design_cells(x),
            rep.base_before[k],
            rep.base_after[k]
        );
    }
    s
}

fn test_error_csv(points: &[Vec<f64>], rep: &smforge_core::explicit::SurrogateReport) -> String {
    let n = points.first().map_or(0, Vec::len);
    let mut s = format!("index{},coarse_error,surrogate_error\n", design_header(n));
    for (k, x) in points.iter().enumerate() {
        let _ = writeln!(
            s,
            "{k}{},{},{}",
            design_cells(x),
            rep.test_coarse[k],
            rep.test_surrogate[k]
        );
    }
    s
}
