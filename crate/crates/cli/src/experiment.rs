//! Command implementations: transform inspection, one-shot simulation, the
//! convergence bundle, and pipeline comparison.

use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use localsde::funcdsl::{PiecewiseFunction, SegmentForm};
use localsde::measure::{Regime, SignedMeasure};
use localsde::montecarlo::{
    curve_from_estimates, fit_rate, ks_critical, ks_distance, stats, terminal_samples, McError,
    Payoff, RefMethod, ReferenceValue, WeakErrorCurve, WeakErrorEstimate, DOMAIN_LADDER_BASE,
    DOMAIN_REFERENCE,
};
use localsde::sde::{EvalSide, RngSpec};
use localsde::transform::{
    build_basschen_pair, build_legall_pair, jump_ratio_check, CoefficientPsi, TransformPair,
};

use crate::config::{Pipeline, PipelineModel, Prepared};
use crate::output::{fmt_f64, write_csv, write_json, write_text, Metadata};

pub struct OutOptions {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
}

impl OutOptions {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn side_name(side: EvalSide) -> &'static str {
    match side {
        EvalSide::Right => "right",
        EvalSide::Left => "left",
    }
}

// ---------------------------------------------------------------------------
// JSON mirrors of the piecewise representations.

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum FormJson {
    Constant {
        value: f64,
    },
    Linear {
        intercept: f64,
        slope: f64,
    },
    Exponential {
        scale: f64,
        offset: f64,
        rate: f64,
    },
    Rational1 {
        scale: f64,
        shape: f64,
    },
}

impl From<&SegmentForm> for FormJson {
    fn from(form: &SegmentForm) -> Self {
        match *form {
            SegmentForm::Constant { value } => FormJson::Constant { value },
            SegmentForm::Linear { intercept, slope } => FormJson::Linear { intercept, slope },
            SegmentForm::Exponential {
                scale,
                offset,
                rate,
            } => FormJson::Exponential {
                scale,
                offset,
                rate,
            },
            SegmentForm::Rational1 { scale, shape } => FormJson::Rational1 { scale, shape },
        }
    }
}

/// Interval bounds; infinite endpoints serialize as null.
#[derive(Serialize)]
struct SegmentJson {
    lower: Option<f64>,
    upper: Option<f64>,
    form: FormJson,
}

#[derive(Serialize)]
struct FunctionJson {
    text: String,
    segments: Vec<SegmentJson>,
}

fn function_json(f: &PiecewiseFunction) -> FunctionJson {
    FunctionJson {
        text: f.render(),
        segments: f
            .segments()
            .map(|s| SegmentJson {
                lower: s.lower.is_finite().then_some(s.lower),
                upper: s.upper.is_finite().then_some(s.upper),
                form: FormJson::from(&s.form),
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct AtomCheckJson {
    location: f64,
    jump: f64,
    expected: f64,
    pass: bool,
}

#[derive(Serialize)]
struct IntervalCheckJson {
    probe: f64,
    log_slope: f64,
    expected: f64,
    pass: bool,
}

#[derive(Serialize)]
struct JumpCheckJson {
    pass: bool,
    atoms: Vec<AtomCheckJson>,
    intervals: Vec<IntervalCheckJson>,
}

#[derive(Serialize)]
struct PairJson {
    density: FunctionJson,
    map_breakpoints: Vec<f64>,
    map_values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jump_check: Option<JumpCheckJson>,
}

fn pair_json(pair: &TransformPair, checked_against: Option<&SignedMeasure>) -> PairJson {
    let jump_check = checked_against.map(|measure| {
        let report = jump_ratio_check(pair.density(), measure);
        JumpCheckJson {
            pass: report.pass(),
            atoms: report
                .atoms
                .iter()
                .map(|a| AtomCheckJson {
                    location: a.location,
                    jump: a.jump,
                    expected: a.expected,
                    pass: a.pass,
                })
                .collect(),
            intervals: report
                .intervals
                .iter()
                .map(|i| IntervalCheckJson {
                    probe: i.probe,
                    log_slope: i.log_slope,
                    expected: i.expected,
                    pass: i.pass,
                })
                .collect(),
        }
    });
    PairJson {
        density: function_json(pair.density()),
        map_breakpoints: pair.breakpoints().to_vec(),
        map_values: pair.map_values().to_vec(),
        jump_check,
    }
}

#[derive(Serialize)]
struct AtomJson {
    location: f64,
    weight: f64,
}

#[derive(Serialize)]
struct DensityJson {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct MeasureJson {
    atoms: Vec<AtomJson>,
    density: Option<DensityJson>,
    total_variation: f64,
}

fn measure_json(measure: &SignedMeasure) -> MeasureJson {
    MeasureJson {
        atoms: measure
            .atoms()
            .iter()
            .map(|a| AtomJson {
                location: a.location,
                weight: a.weight,
            })
            .collect(),
        density: (!measure.continuous().is_empty()).then(|| DensityJson {
            breakpoints: measure.continuous().breakpoints().to_vec(),
            values: measure.continuous().values().to_vec(),
        }),
        total_variation: measure.total_variation(),
    }
}

#[derive(Serialize)]
struct PsiJumpJson {
    location: f64,
    left: f64,
    right: f64,
    liminf_sq: f64,
}

#[derive(Serialize)]
struct DiagnosticsJson {
    /// Which transform the coefficient view composes with.
    psi_pipeline: String,
    psi_continuous: bool,
    psi_discontinuities: Vec<PsiJumpJson>,
    min_liminf_sq_at_jumps: Option<f64>,
    at_most_linear_growth: Option<bool>,
    initial_fourth_moment_finite: bool,
}

fn diagnostics_json(psi: &CoefficientPsi, pipeline: Pipeline) -> DiagnosticsJson {
    let psi_pipeline = match pipeline {
        Pipeline::Basschen => Pipeline::Basschen,
        _ => Pipeline::Legall,
    };
    DiagnosticsJson {
        psi_pipeline: psi_pipeline.to_string(),
        psi_continuous: psi.is_continuous(),
        psi_discontinuities: psi
            .discontinuities()
            .iter()
            .map(|j| PsiJumpJson {
                location: j.location,
                left: j.left_limit,
                right: j.right_limit,
                liminf_sq: j.liminf_sq(),
            })
            .collect(),
        min_liminf_sq_at_jumps: psi.min_liminf_sq(),
        at_most_linear_growth: psi.at_most_linear_growth(),
        initial_fourth_moment_finite: true,
    }
}

fn print_diagnostics(diag: &DiagnosticsJson) {
    println!("transformed-coefficient diagnostics (advisory, {} view):", diag.psi_pipeline);
    println!("  psi continuous: {}", diag.psi_continuous);
    if diag.psi_discontinuities.is_empty() {
        println!("  psi discontinuity set: empty");
    } else {
        let locs: Vec<String> = diag
            .psi_discontinuities
            .iter()
            .map(|j| fmt_f64(j.location))
            .collect();
        println!(
            "  psi discontinuity set: [{}] (a finite set, so of measure zero)",
            locs.join(", ")
        );
        if let Some(min) = diag.min_liminf_sq_at_jumps {
            println!(
                "  min liminf psi^2 over the discontinuity set: {} (positive: {})",
                fmt_f64(min),
                min > 0.0
            );
            if !(min > 0.0) {
                println!("  warning: psi^2 vanishes at a discontinuity; convergence is not covered");
            }
        }
    }
    match diag.at_most_linear_growth {
        Some(true) => println!("  at most linear growth: yes"),
        Some(false) => {
            println!("  at most linear growth: no");
            println!("  warning: psi grows super-linearly in a tail; convergence is not covered");
        }
        None => println!("  at most linear growth: unclassified (non-constant density tail)"),
    }
    println!("  initial fourth moment finite: yes (deterministic start)");
}

// ---------------------------------------------------------------------------
// transform inspect

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    /// Parses "lo:hi:count" with hi > lo and count >= 2.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        let err = || format!("grid must be lo:hi:count (got '{text}')");
        if parts.len() != 3 {
            return Err(err());
        }
        let lo: f64 = parts[0].parse().map_err(|_| err())?;
        let hi: f64 = parts[1].parse().map_err(|_| err())?;
        let count: usize = parts[2].parse().map_err(|_| err())?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || count < 2 {
            return Err(format!(
                "grid needs finite lo < hi and count >= 2 (got '{text}')"
            ));
        }
        Ok(GridSpec { lo, hi, count })
    }

    fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(move |i| {
            if i + 1 == self.count {
                self.hi
            } else {
                self.lo + step * i as f64
            }
        })
    }
}

#[derive(Serialize)]
struct TransformDoc {
    seed: u64,
    config: String,
    pipeline: String,
    measure: MeasureJson,
    legall: Option<PairJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    legall_note: Option<String>,
    basschen: Option<PairJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    basschen_note: Option<String>,
    diagnostics: DiagnosticsJson,
}

fn transform_doc(prep: &Prepared) -> TransformDoc {
    let measure = &prep.measure;
    let (legall, legall_note) = match build_legall_pair(measure) {
        Ok(pair) => (Some(pair_json(&pair, Some(measure))), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (basschen, basschen_note) = match measure
        .require_admissible(Regime::BassChen)
        .map_err(|e| e.to_string())
        .and_then(|()| build_basschen_pair(measure).map_err(|e| e.to_string()))
    {
        Ok(pair) => (Some(pair_json(&pair, None)), None),
        Err(e) => (None, Some(e)),
    };
    TransformDoc {
        seed: prep.seed(),
        config: format!("sha256:{}", prep.hash),
        pipeline: prep.config.model.pipeline.to_string(),
        measure: measure_json(measure),
        legall,
        legall_note,
        basschen,
        basschen_note,
        diagnostics: diagnostics_json(&prep.diag_psi, prep.config.model.pipeline),
    }
}

pub fn inspect_transform(prep: &Prepared, grid: GridSpec, out: &OutOptions) -> Result<()> {
    let doc = transform_doc(prep);
    let mut written = Vec::new();
    if out.json {
        written.push(write_json(&out.path("transform.json"), &doc)?);
    }
    if out.csv {
        let meta = Metadata {
            seed: prep.seed(),
            hash: &prep.hash,
        };
        let legall = build_legall_pair(&prep.measure).ok();
        let basschen = build_basschen_pair(&prep.measure).ok();
        let psi_pair = prep.diag_psi.pair();
        let rows = grid.points().map(|x| {
            let cell = |pair: &Option<TransformPair>, f: &dyn Fn(&TransformPair) -> f64| {
                pair.as_ref().map(|p| fmt_f64(f(p))).unwrap_or_default()
            };
            vec![
                fmt_f64(x),
                cell(&legall, &|p| p.density().eval(x)),
                cell(&legall, &|p| p.map(x)),
                cell(&basschen, &|p| p.density().eval(x)),
                cell(&basschen, &|p| p.map(x)),
                fmt_f64(prep.diag_psi.eval(psi_pair.map(x))),
            ]
        });
        written.push(write_csv(
            &out.path("transform_grid.csv"),
            &meta,
            &[(
                "grid",
                format!("{}:{}:{}", fmt_f64(grid.lo), fmt_f64(grid.hi), grid.count),
            )],
            &[
                "x",
                "density_legall",
                "map_legall",
                "density_basschen",
                "map_basschen",
                "psi_at_map_x",
            ],
            rows,
        )?);
    }

    println!("pipeline: {}", doc.pipeline);
    for (name, pair, note) in [
        ("legall", &doc.legall, &doc.legall_note),
        ("basschen", &doc.basschen, &doc.basschen_note),
    ] {
        match (pair, note) {
            (Some(p), _) => {
                let check = p
                    .jump_check
                    .as_ref()
                    .map(|c| format!(", jump identity pass: {}", c.pass))
                    .unwrap_or_default();
                println!(
                    "{name}: {} density segment(s){check}",
                    p.density.segments.len()
                );
            }
            (None, Some(why)) => println!("{name}: not available ({why})"),
            (None, None) => unreachable!("absent pair always carries a note"),
        }
    }
    print_diagnostics(&doc.diagnostics);
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

pub struct SimulateArgs {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub side: EvalSide,
}

pub fn simulate(prep: &Prepared, args: &SimulateArgs, out: &OutOptions) -> Result<()> {
    let model = prep.model(args.side);
    let rng = RngSpec::new(args.seed);
    let samples = terminal_samples(&model, args.n, args.m, &rng).map_err(anyhow::Error::from)?;
    let (mean, se) = stats::mean_and_standard_error(&samples);
    println!(
        "simulated {} path(s) at n={}: terminal mean {} (se {})",
        args.m,
        args.n,
        fmt_f64(mean),
        fmt_f64(se)
    );
    if out.csv {
        let meta = Metadata {
            seed: args.seed,
            hash: &prep.hash,
        };
        let path = write_csv(
            &out.path(&format!("simulate_n{}.csv", args.n)),
            &meta,
            &[
                ("pipeline", prep.config.model.pipeline.to_string()),
                ("n", args.n.to_string()),
                ("m", args.m.to_string()),
                ("side", side_name(args.side).to_string()),
            ],
            &["terminal"],
            samples.iter().map(|&x| vec![fmt_f64(x)]),
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// converge (the full experiment bundle)

#[derive(Serialize)]
struct ReferenceJson {
    value: f64,
    std_error: f64,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<usize>,
}

fn reference_json(reference: &ReferenceValue) -> ReferenceJson {
    match reference.method {
        RefMethod::ClosedForm => ReferenceJson {
            value: reference.value,
            std_error: reference.std_error,
            method: "closed-form".into(),
            steps: None,
            paths: None,
        },
        RefMethod::FineGrid { steps, paths } => ReferenceJson {
            value: reference.value,
            std_error: reference.std_error,
            method: "fine-grid".into(),
            steps: Some(steps),
            paths: Some(paths),
        },
    }
}

#[derive(Serialize)]
struct CurvePointJson {
    n: usize,
    dt: f64,
    estimate: f64,
    std_error: f64,
    abs_error: f64,
    joint_se: f64,
    excluded: bool,
}

#[derive(Serialize)]
struct FitJson {
    gamma_hat: f64,
    ci: [f64; 2],
    r2: f64,
    log_c_hat: f64,
    points_used: usize,
}

#[derive(Serialize)]
struct KsJson {
    statistic: f64,
    critical_1pct: f64,
    ladder_steps: usize,
    reference_steps: usize,
}

#[derive(Serialize)]
struct SummaryDoc {
    seed: u64,
    config: String,
    pipeline: String,
    x0: f64,
    t: f64,
    side: String,
    m: usize,
    diagnostics: DiagnosticsJson,
    reference: ReferenceJson,
    curve: Vec<CurvePointJson>,
    fit: Option<FitJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_largest_n_vs_reference: Option<KsJson>,
}

fn estimate_from_samples(samples: &[f64], payoff: &Payoff, steps: usize) -> WeakErrorEstimate {
    let values: Vec<f64> = samples.iter().map(|&x| payoff.eval(x)).collect();
    let (mean, std_error) = stats::mean_and_standard_error(&values);
    WeakErrorEstimate {
        steps,
        paths: samples.len(),
        mean,
        std_error,
    }
}

fn samples_csv(
    out: &OutOptions,
    prep: &Prepared,
    name: &str,
    n: usize,
    side: EvalSide,
    domain: u32,
    samples: &[f64],
) -> Result<PathBuf> {
    let meta = Metadata {
        seed: prep.seed(),
        hash: &prep.hash,
    };
    write_csv(
        &out.path(name),
        &meta,
        &[
            ("pipeline", prep.config.model.pipeline.to_string()),
            ("n", n.to_string()),
            ("m", samples.len().to_string()),
            ("side", side_name(side).to_string()),
            ("stream_domain", domain.to_string()),
        ],
        &["terminal"],
        samples.iter().map(|&x| vec![fmt_f64(x)]),
    )
}

pub fn run_experiment(prep: &Prepared, side: EvalSide, out: &OutOptions) -> Result<()> {
    let model = prep.model(side);
    let run = &prep.config.run;
    let rng = RngSpec::new(prep.seed());
    let mut written = Vec::new();

    written.push(write_text(
        &out.path("config.toml"),
        &format!(
            "{}{}",
            Metadata {
                seed: prep.seed(),
                hash: &prep.hash,
            }
            .header(&[]),
            prep.config.render()
        ),
    )?);
    if out.json {
        written.push(write_json(
            &out.path("transform.json"),
            &transform_doc(prep),
        )?);
    }

    let closed_form = model
        .gaussian_terminal_law()
        .and_then(|(mean, sd)| prep.payoff.gaussian_expectation(mean, sd));
    let (reference, ref_samples) = match closed_form {
        Some(value) => (
            ReferenceValue {
                value,
                std_error: 0.0,
                method: RefMethod::ClosedForm,
            },
            None,
        ),
        None => {
            let samples = terminal_samples(
                &model,
                run.n_ref,
                run.m_ref,
                &rng.subdomain(DOMAIN_REFERENCE),
            )
            .map_err(anyhow::Error::from)?;
            let est = estimate_from_samples(&samples, &prep.payoff, run.n_ref);
            (
                ReferenceValue {
                    value: est.mean,
                    std_error: est.std_error,
                    method: RefMethod::FineGrid {
                        steps: run.n_ref,
                        paths: run.m_ref,
                    },
                },
                Some(samples),
            )
        }
    };

    let mut estimates = Vec::with_capacity(run.n_list.len());
    let mut last_samples = Vec::new();
    for (i, &n) in run.n_list.iter().enumerate() {
        let domain = DOMAIN_LADDER_BASE + i as u32;
        let samples = terminal_samples(&model, n, run.m, &rng.subdomain(domain))
            .map_err(anyhow::Error::from)?;
        estimates.push(estimate_from_samples(&samples, &prep.payoff, n));
        if out.csv {
            written.push(samples_csv(
                out,
                prep,
                &format!("samples_n{n}.csv"),
                n,
                side,
                domain,
                &samples,
            )?);
        }
        if i + 1 == run.n_list.len() {
            last_samples = samples;
        }
    }
    if let (true, Some(samples)) = (out.csv, &ref_samples) {
        written.push(samples_csv(
            out,
            prep,
            &format!("samples_ref_n{}.csv", run.n_ref),
            run.n_ref,
            side,
            DOMAIN_REFERENCE,
            samples,
        )?);
    }

    let curve = curve_from_estimates(&estimates, model.horizon(), reference);
    let (fit, fit_note) = match fit_rate(&curve) {
        Ok(f) => (Some(f), None),
        Err(McError::InsufficientPoints { usable }) => (
            None,
            Some(format!(
                "rate not fitted: {usable} usable point(s), need 3 (errors within noise are excluded)"
            )),
        ),
        Err(e) => (None, Some(format!("rate not fitted: {e}"))),
    };
    let ks = ref_samples.as_ref().map(|reference_samples| KsJson {
        statistic: ks_distance(&last_samples, reference_samples),
        critical_1pct: ks_critical(0.01, last_samples.len(), reference_samples.len()),
        ladder_steps: *run.n_list.last().expect("validated non-empty"),
        reference_steps: run.n_ref,
    });

    if out.csv {
        let meta = Metadata {
            seed: prep.seed(),
            hash: &prep.hash,
        };
        let reference_desc = match reference.method {
            RefMethod::ClosedForm => "closed-form".to_string(),
            RefMethod::FineGrid { steps, paths } => format!("fine-grid n={steps} m={paths}"),
        };
        written.push(write_csv(
            &out.path("convergence.csv"),
            &meta,
            &[
                ("pipeline", prep.config.model.pipeline.to_string()),
                ("side", side_name(side).to_string()),
                ("m", run.m.to_string()),
                ("reference", reference_desc),
                ("reference_value", fmt_f64(reference.value)),
            ],
            &[
                "n",
                "dt",
                "estimate",
                "std_error",
                "abs_error",
                "joint_se",
                "excluded",
            ],
            curve.points.iter().map(|p| {
                vec![
                    p.steps.to_string(),
                    fmt_f64(p.dt),
                    fmt_f64(p.estimate),
                    fmt_f64(p.std_error),
                    fmt_f64(p.abs_error),
                    fmt_f64(p.joint_se),
                    p.excluded.to_string(),
                ]
            }),
        )?);
    }

    let diagnostics = diagnostics_json(&prep.diag_psi, prep.config.model.pipeline);
    let summary = SummaryDoc {
        seed: prep.seed(),
        config: format!("sha256:{}", prep.hash),
        pipeline: prep.config.model.pipeline.to_string(),
        x0: prep.config.model.x0,
        t: prep.config.model.t,
        side: side_name(side).to_string(),
        m: run.m,
        diagnostics,
        reference: reference_json(&reference),
        curve: curve
            .points
            .iter()
            .map(|p| CurvePointJson {
                n: p.steps,
                dt: p.dt,
                estimate: p.estimate,
                std_error: p.std_error,
                abs_error: p.abs_error,
                joint_se: p.joint_se,
                excluded: p.excluded,
            })
            .collect(),
        fit: fit.map(|f| FitJson {
            gamma_hat: f.gamma_hat,
            ci: [
                f.gamma_hat - f.gamma_half_width,
                f.gamma_hat + f.gamma_half_width,
            ],
            r2: f.r_squared,
            log_c_hat: f.log_c_hat,
            points_used: f.points_used,
        }),
        fit_note,
        ks_largest_n_vs_reference: ks,
    };
    if out.json {
        written.push(write_json(&out.path("summary.json"), &summary)?);
    }

    print_run_report(&summary, &curve);
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_run_report(summary: &SummaryDoc, curve: &WeakErrorCurve) {
    println!("pipeline: {} (side: {})", summary.pipeline, summary.side);
    print_diagnostics(&summary.diagnostics);
    let r = &summary.reference;
    match (r.steps, r.paths) {
        (Some(n), Some(m)) => println!(
            "reference ({}, n={n}, m={m}): {} (se {})",
            r.method,
            fmt_f64(r.value),
            fmt_f64(r.std_error)
        ),
        _ => println!("reference ({}): {}", r.method, fmt_f64(r.value)),
    }
    println!("n,dt,estimate,std_error,abs_error,joint_se,excluded");
    for p in &curve.points {
        println!(
            "{},{},{},{},{},{},{}",
            p.steps,
            fmt_f64(p.dt),
            fmt_f64(p.estimate),
            fmt_f64(p.std_error),
            fmt_f64(p.abs_error),
            fmt_f64(p.joint_se),
            p.excluded
        );
    }
    match (&summary.fit, &summary.fit_note) {
        (Some(f), _) => println!(
            "fitted rate: gamma_hat = {} (95% ci [{}, {}]), r2 = {}, points used = {}",
            fmt_f64(f.gamma_hat),
            fmt_f64(f.ci[0]),
            fmt_f64(f.ci[1]),
            fmt_f64(f.r2),
            f.points_used
        ),
        (None, Some(note)) => println!("{note}"),
        (None, None) => {}
    }
    if let Some(ks) = &summary.ks_largest_n_vs_reference {
        println!(
            "ks distance (n={} samples vs n={} reference): {} (1% critical {})",
            ks.ladder_steps,
            ks.reference_steps,
            fmt_f64(ks.statistic),
            fmt_f64(ks.critical_1pct)
        );
    }
}

// ---------------------------------------------------------------------------
// compare

pub struct CompareArgs {
    pub against: Pipeline,
    pub other: PipelineModel,
    pub n: usize,
    pub m: usize,
    pub side: EvalSide,
}

#[derive(Serialize)]
struct CompareKsJson {
    statistic: f64,
    critical_1pct: f64,
    critical_5pct: f64,
}

#[derive(Serialize)]
struct ComparePayoffJson {
    mean_a: f64,
    se_a: f64,
    mean_b: f64,
    se_b: f64,
    diff: f64,
    joint_se: f64,
}

#[derive(Serialize)]
struct CompareDoc {
    seed: u64,
    config: String,
    pipeline_a: String,
    pipeline_b: String,
    n: usize,
    m: usize,
    side: String,
    /// Both pipelines consume identical Brownian streams.
    shared_streams: bool,
    ks: CompareKsJson,
    payoff: ComparePayoffJson,
}

pub fn compare_pipelines(prep: &Prepared, args: &CompareArgs, out: &OutOptions) -> Result<()> {
    let model_a = prep.model(args.side);
    let model_b = args
        .other
        .to_sim(prep.config.model.x0, prep.config.model.t, args.side);
    let rng = RngSpec::new(prep.seed());
    let samples_a =
        terminal_samples(&model_a, args.n, args.m, &rng).map_err(anyhow::Error::from)?;
    let samples_b =
        terminal_samples(&model_b, args.n, args.m, &rng).map_err(anyhow::Error::from)?;
    let est_a = estimate_from_samples(&samples_a, &prep.payoff, args.n);
    let est_b = estimate_from_samples(&samples_b, &prep.payoff, args.n);
    let doc = CompareDoc {
        seed: prep.seed(),
        config: format!("sha256:{}", prep.hash),
        pipeline_a: prep.config.model.pipeline.to_string(),
        pipeline_b: args.against.to_string(),
        n: args.n,
        m: args.m,
        side: side_name(args.side).to_string(),
        shared_streams: true,
        ks: CompareKsJson {
            statistic: ks_distance(&samples_a, &samples_b),
            critical_1pct: ks_critical(0.01, args.m, args.m),
            critical_5pct: ks_critical(0.05, args.m, args.m),
        },
        payoff: ComparePayoffJson {
            mean_a: est_a.mean,
            se_a: est_a.std_error,
            mean_b: est_b.mean,
            se_b: est_b.std_error,
            diff: est_a.mean - est_b.mean,
            joint_se: (est_a.std_error * est_a.std_error + est_b.std_error * est_b.std_error)
                .sqrt(),
        },
    };
    println!(
        "{} vs {} at n={}, m={} (shared streams; exploratory report, no pass/fail)",
        doc.pipeline_a, doc.pipeline_b, doc.n, doc.m
    );
    println!(
        "ks distance: {} (1% critical {}, 5% critical {})",
        fmt_f64(doc.ks.statistic),
        fmt_f64(doc.ks.critical_1pct),
        fmt_f64(doc.ks.critical_5pct)
    );
    println!(
        "payoff means: {} vs {} -> diff {} (joint se {})",
        fmt_f64(doc.payoff.mean_a),
        fmt_f64(doc.payoff.mean_b),
        fmt_f64(doc.payoff.diff),
        fmt_f64(doc.payoff.joint_se)
    );
    if out.json {
        let path = write_json(&out.path("comparison.json"), &doc)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Canonical config file with metadata headers, used by `example
/// --emit-config` before any run bundle exists.
pub fn write_config_only(prep: &Prepared, out: &OutOptions) -> Result<PathBuf> {
    write_text(
        &out.path("config.toml"),
        &format!(
            "{}{}",
            Metadata {
                seed: prep.seed(),
                hash: &prep.hash,
            }
            .header(&[]),
            prep.config.render()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::builtin;

    #[test]
    fn grid_spec_parses_and_rejects() {
        let g = GridSpec::parse("-5:5:201").unwrap();
        assert_eq!((g.lo, g.hi, g.count), (-5.0, 5.0, 201));
        let pts: Vec<f64> = g.points().collect();
        assert_eq!(pts.len(), 201);
        assert_eq!(pts[0], -5.0);
        assert_eq!(pts[200], 5.0);
        assert_eq!(pts[100], 0.0);
        assert!(GridSpec::parse("5:-5:10").is_err());
        assert!(GridSpec::parse("0:1:1").is_err());
        assert!(GridSpec::parse("0:1").is_err());
        assert!(GridSpec::parse("a:b:c").is_err());
    }

    #[test]
    fn transform_doc_reports_both_pairs_for_a_small_atom() {
        let prep = builtin("example2", 0.25).unwrap().validate().unwrap();
        let doc = transform_doc(&prep);
        let legall = doc.legall.expect("legall admissible");
        assert!(legall.jump_check.expect("checked").pass);
        assert_eq!(legall.density.segments.len(), 2);
        assert!(doc.basschen.is_some());
        assert!(doc.basschen_note.is_none());
        assert!(!doc.diagnostics.psi_continuous);
    }

    #[test]
    fn basschen_pair_is_refused_above_half() {
        let prep = builtin("example2", 0.75).unwrap().validate().unwrap();
        let doc = transform_doc(&prep);
        assert!(doc.legall.is_some());
        assert!(doc.basschen.is_none());
        assert!(doc.basschen_note.expect("note").contains("weight"));
    }

    #[test]
    fn estimates_match_the_library_reduction() {
        use localsde::montecarlo::estimate_payoff;
        let prep = builtin("example2", 0.5).unwrap().validate().unwrap();
        let model = prep.model(EvalSide::Right);
        let rng = RngSpec::new(7).subdomain(3);
        let samples = terminal_samples(&model, 8, 500, &rng).unwrap();
        let ours = estimate_from_samples(&samples, &prep.payoff, 8);
        let lib = estimate_payoff(&model, &prep.payoff, 8, 500, &rng).unwrap();
        assert_eq!(ours.mean.to_bits(), lib.mean.to_bits());
        assert_eq!(ours.std_error.to_bits(), lib.std_error.to_bits());
    }
}
