use std::fs;
use std::path::Path;

use serde::Serialize;
use spectral_plane::checks::{verify_suite, CheckResult, FD_STEP};
use spectral_plane::config::{BranchConfig, RawConfig, DEFAULT_GAP_MARGIN};
use spectral_plane::error::Error;
use spectral_plane::exec::{with_threads, Execution};
use spectral_plane::io::{csv, fmt_f64, scan_csv, to_json};
use spectral_plane::jacobian::{asymptotic_probe, closed_n, reduce_blocks, ProbeMode, ProbeRow};
use spectral_plane::nodal::{analytic_jacobian, uv_origin};
use spectral_plane::oracle::{fd_jacobian, uv_single_axis};
use spectral_plane::quadrature::QuadOptions;
use spectral_plane::search::{certify, default_box, hunt, scan, Candidate, Model, SearchOptions};

use crate::args::*;

/// A failed run, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid input (exit 1).
    Config(String),
    /// Numerical failure (exit 2).
    Numerical(String),
    /// Ran fine but found nothing or a check failed (exit 3).
    Unmet(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Unmet(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Unmet(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    let threads = match &command {
        Command::Eval(a) => a.common.threads,
        Command::Jacobian(a) => a.common.threads,
        Command::Verify(a) => a.common.threads,
        Command::Asymptote(a) => a.common.threads,
        Command::Scan(a) => a.common.threads,
        Command::Hunt(a) => a.common.threads,
        Command::Certify(a) => a.common.threads,
    };
    with_threads(threads, move || match command {
        Command::Eval(a) => eval(a),
        Command::Jacobian(a) => jacobian(a),
        Command::Verify(a) => verify(a),
        Command::Asymptote(a) => asymptote(a),
        Command::Scan(a) => scan_cmd(a),
        Command::Hunt(a) => hunt_cmd(a),
        Command::Certify(a) => certify_cmd(a),
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn load_config(c: &ConfigArgs) -> Result<BranchConfig, Failure> {
    let mut raw = match (&c.config, &c.theta) {
        (Some(path), _) => RawConfig::from_json(&read(path)?)?,
        (None, Some(theta)) => RawConfig::new(theta.clone()),
        (None, None) => {
            return Err(Failure::Config(
                "either --theta or --config is required".into(),
            ))
        }
    };
    if let Some(g) = c.g {
        if g != raw.g {
            return Err(Failure::Config(format!(
                "--g {g} disagrees with g = {} from the angles",
                raw.g
            )));
        }
    }
    if let Some(t) = &c.t {
        raw.t = Some(t.clone());
    }
    Ok(BranchConfig::new(&raw)?)
}

fn quad(common: &Common) -> Result<QuadOptions, Failure> {
    if !(common.quad_tol > 0.0) {
        return Err(Failure::Config(format!(
            "--quad-tol must be positive, got {}",
            common.quad_tol
        )));
    }
    Ok(QuadOptions::default().with_tol(common.quad_tol))
}

fn write_out(common: &Common, text: &str) -> Outcome {
    match &common.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes JSON or CSV; `csv_text` is `None` for JSON-only commands.
fn emit<T: Serialize>(
    common: &Common,
    default: Format,
    value: &T,
    csv_text: Option<String>,
) -> Outcome {
    let text = match (common.format.unwrap_or(default), csv_text) {
        (Format::Json, _) => to_json(value),
        (Format::Csv, Some(text)) => text,
        (Format::Csv, None) => return Err(Failure::Config("this command only writes JSON".into())),
    };
    write_out(common, &text)
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

fn strings(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_f64).collect()
}

#[derive(Serialize)]
struct EvalOut<'a> {
    g: usize,
    theta: &'a [f64],
    t: &'a [f64],
    source: &'static str,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn eval(a: EvalArgs) -> Outcome {
    let cfg = load_config(&a.cfg)?;
    let (plane, source) = if cfg.is_nodal() {
        (uv_origin(&cfg), "closed-form")
    } else {
        (uv_single_axis(&cfg, &quad(&a.common)?)?, "oracle")
    };
    let table: Vec<Vec<String>> = (0..plane.dim())
        .map(|m| {
            let mut r = vec![(m + 1).to_string()];
            r.extend(strings([plane.u[m], plane.v[m]]));
            r
        })
        .collect();
    let out = EvalOut {
        g: cfg.g(),
        theta: cfg.theta(),
        t: cfg.t(),
        source,
        u: plane.u.clone(),
        v: plane.v.clone(),
    };
    emit(
        &a.common,
        Format::Json,
        &out,
        Some(csv(&["m", "u", "v"], &table)),
    )
}

#[derive(Serialize)]
struct JacobianOut<'a> {
    g: usize,
    theta: &'a [f64],
    t_columns: &'static str,
    du_dtheta: Vec<Vec<f64>>,
    dv_dtheta: Vec<Vec<f64>>,
    du_dt: Vec<Vec<f64>>,
    dv_dt: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    n: Vec<Vec<f64>>,
    #[serde(rename = "detN")]
    det_n: f64,
    closed_form_max_deviation: f64,
}

fn jacobian(a: JacobianArgs) -> Outcome {
    let cfg = load_config(&a.cfg)?;
    if !cfg.is_nodal() {
        return Err(Failure::Config(
            "the derivative table is taken at t = 0; drop --t".into(),
        ));
    }
    let table = if a.fd {
        fd_jacobian(&cfg, FD_STEP, &quad(&a.common)?, Execution::Parallel)?
    } else {
        analytic_jacobian(&cfg)?
    };
    let n = reduce_blocks(&table)?;
    let closed = closed_n(&cfg)?;
    let header: Vec<String> = (1..=cfg.g()).map(|k| format!("n_{k}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let body: Vec<Vec<String>> = (0..cfg.g())
        .map(|r| strings(n.n.row(r).iter().copied()))
        .collect();
    let out = JacobianOut {
        g: cfg.g(),
        theta: cfg.theta(),
        t_columns: if a.fd { "oracle" } else { "closed-form" },
        du_dtheta: rows(&table.du_dtheta),
        dv_dtheta: rows(&table.dv_dtheta),
        du_dt: rows(&table.du_dt),
        dv_dt: rows(&table.dv_dt),
        n: rows(&n.n),
        det_n: n.det(),
        closed_form_max_deviation: (&n.n - &closed.n).amax(),
    };
    emit(&a.common, Format::Json, &out, Some(csv(&header, &body)))
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    g: usize,
    theta: &'a [f64],
    passed: bool,
    checks: &'a [CheckResult],
}

fn verify(a: VerifyArgs) -> Outcome {
    let cfg = load_config(&a.cfg)?;
    if !cfg.is_nodal() {
        return Err(Failure::Config(
            "verification runs at t = 0; drop --t".into(),
        ));
    }
    let checks = verify_suite(&cfg, &quad(&a.common)?, Execution::Parallel)?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let body: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                c.passed.to_string(),
                fmt_f64(c.measured),
                fmt_f64(c.tolerance),
            ]
        })
        .collect();
    let out = VerifyOut {
        g: cfg.g(),
        theta: cfg.theta(),
        passed: failed.is_empty(),
        checks: &checks,
    };
    emit(
        &a.common,
        Format::Json,
        &out,
        Some(csv(&["check", "passed", "measured", "tolerance"], &body)),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Unmet(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            checks.len(),
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct AsymptoteOut<'a> {
    g: usize,
    mode: ProbeMode,
    rows: &'a [ProbeRow],
    fitted_order: Option<f64>,
}

fn asymptote(a: AsymptoteArgs) -> Outcome {
    let mode = if a.lagrangian {
        ProbeMode::Lagrangian
    } else {
        ProbeMode::Generic
    };
    let report = asymptotic_probe(a.g, mode, &a.radii)?;
    let body: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| strings([r.radius, r.h_value.re, r.h_value.im, r.limit, r.abs_error]))
        .collect();
    let out = AsymptoteOut {
        g: a.g,
        mode,
        rows: &report.rows,
        fitted_order: report.fitted_order,
    };
    emit(
        &a.common,
        Format::Json,
        &out,
        Some(csv(
            &["radius", "h_re", "h_im", "limit", "abs_error"],
            &body,
        )),
    )
}

fn parse_box(g: usize, ranges: &Option<Vec<String>>) -> Result<Vec<(f64, f64)>, Failure> {
    let Some(parts) = ranges else {
        return Ok(default_box(g, DEFAULT_GAP_MARGIN));
    };
    let bad = |p: &str| Failure::Config(format!("box entry {p:?} is not lo:hi"));
    let ranges: Vec<(f64, f64)> = parts
        .iter()
        .map(|p| {
            let (lo, hi) = p.split_once(':').ok_or_else(|| bad(p))?;
            Ok((
                lo.trim().parse().map_err(|_| bad(p))?,
                hi.trim().parse().map_err(|_| bad(p))?,
            ))
        })
        .collect::<Result<_, Failure>>()?;
    match ranges.len() {
        1 => Ok(vec![ranges[0]; g]),
        n if n == g => Ok(ranges),
        n => Err(Failure::Config(format!("--box has {n} ranges for g = {g}"))),
    }
}

#[derive(Serialize)]
struct ScanRowOut<'a> {
    theta: &'a [f64],
    #[serde(rename = "detN")]
    det_n: Option<f64>,
}

fn scan_cmd(a: ScanArgs) -> Outcome {
    let bounds = parse_box(a.g, &a.r#box)?;
    let table = scan(&bounds, a.grid, Execution::Parallel)?;
    let kept: Vec<ScanRowOut> = table
        .rows
        .iter()
        .filter(|r| {
            a.threshold
                .is_none_or(|th| r.det_n.is_some_and(|d| d.abs() > th))
        })
        .map(|r| ScanRowOut {
            theta: &r.theta,
            det_n: r.det_n,
        })
        .collect();
    emit(
        &a.common,
        Format::Csv,
        &kept,
        Some(scan_csv(&table, a.threshold)),
    )
}

fn hunt_cmd(a: HuntArgs) -> Outcome {
    let cfg = load_config(&a.cfg)?;
    let model = match a.model {
        ModelArg::Auto => Model::default_for(cfg.g()),
        ModelArg::Linearized => Model::Linearized,
        ModelArg::ExactElliptic => Model::ExactElliptic,
    };
    if !(a.tol > 0.0 && a.radius > 0.0 && a.qmax >= 1) {
        return Err(Failure::Config(
            "--tol and --radius must be positive and --qmax at least 1".into(),
        ));
    }
    let opts = SearchOptions {
        tol: a.tol,
        quad: quad(&a.common)?,
        exec: Execution::Parallel,
        ..SearchOptions::default()
    };
    let found = hunt(&cfg, cfg.theta(), a.qmax, a.radius, a.budget, model, &opts)?;
    emit(&a.common, Format::Json, &found, None)?;
    if found.is_empty() {
        Err(Failure::Unmet("no candidates".into()))
    } else {
        Ok(())
    }
}

#[derive(Serialize)]
struct CertifyOut {
    index: usize,
    passed: bool,
    model: Model,
    before: f64,
    after: Option<f64>,
    growth: Option<f64>,
    floor: Option<f64>,
    error: Option<String>,
}

fn certify_cmd(a: CertifyArgs) -> Outcome {
    let text = read(&a.candidates)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("candidate file: {e}")))?;
    let list = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    let candidates: Vec<Candidate> = list
        .into_iter()
        .map(serde_json::from_value)
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("candidate file: {e}")))?;
    let opts = SearchOptions {
        quad: quad(&a.common)?,
        ..SearchOptions::default()
    };
    let mut reports = Vec::with_capacity(candidates.len());
    for (index, c) in candidates.iter().enumerate() {
        let base = BranchConfig::at_nodal_locus(&c.theta)?;
        let out = match certify(&base, c, a.tighten, &opts) {
            Ok(r) => CertifyOut {
                index,
                passed: true,
                model: c.model,
                before: r.before,
                after: Some(r.after),
                growth: Some(r.growth),
                floor: Some(r.floor),
                error: None,
            },
            Err(e @ Error::InvalidConfig(_)) => return Err(e.into()),
            Err(e) => CertifyOut {
                index,
                passed: false,
                model: c.model,
                before: c.residual,
                after: match e {
                    Error::CertificationFailed { after, .. } => Some(after),
                    _ => None,
                },
                growth: None,
                floor: None,
                error: Some(e.to_string()),
            },
        };
        reports.push(out);
    }
    emit(&a.common, Format::Json, &reports, None)?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed == 0 && !reports.is_empty() {
        Ok(())
    } else {
        Err(Failure::Unmet(format!(
            "{failed} of {} candidates failed certification",
            reports.len()
        )))
    }
}
