//! File formats: result JSON schemas, flat CSV writers, and the binary/CSV
//! instance serialization. All numeric output uses Rust's shortest
//! round-trip decimal formatting, so files are bit-reproducible.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{failure, usage, CliResult};
use l1phase_core::experiments::{ScalingFit, TransitionCurve};
use l1phase_core::linalg::Mat;
use l1phase_core::model::{CorrelationSpec, KroneckerMatrix, ProblemInstance};
use l1phase_core::replica::ThresholdResult;

pub fn ensure_dir(dir: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| failure(format!("cannot create '{dir}': {e}")))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| failure(format!("cannot write '{}': {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| failure(format!("serialization: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn out_path(dir: &str, name: &str, suffix: &str) -> PathBuf {
    Path::new(dir).join(format!("{name}.{suffix}"))
}

// ---- threshold ----

#[derive(Debug, Serialize, Deserialize)]
pub struct ThresholdFile {
    pub schema: String,
    pub rho: f64,
    pub r: f64,
    pub alpha_c: f64,
    pub mc_stderr: f64,
    pub chihat_at_threshold: f64,
    pub n_chain: usize,
    pub samples: usize,
    pub seed: u64,
    pub monotone_ok: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub alpha: f64,
    pub bracket_mean: f64,
    pub bracket_stderr: f64,
    pub chihat: f64,
    pub converged: bool,
}

pub const THRESHOLD_SCHEMA: &str = "l1phase.threshold.v1";
pub const TRACE_CSV_HEADER: &str =
    "rho,r,alpha,bracket_mean,bracket_stderr,chihat,n_chain,n_samples,seed";

pub fn threshold_file(
    rho: f64,
    r: f64,
    seed: u64,
    result: &ThresholdResult,
) -> ThresholdFile {
    ThresholdFile {
        schema: THRESHOLD_SCHEMA.to_string(),
        rho,
        r,
        alpha_c: result.alpha_c,
        mc_stderr: result.mc_stderr,
        chihat_at_threshold: result.chihat_at_threshold,
        n_chain: result.n_used,
        samples: result.samples_used,
        seed,
        monotone_ok: result.monotone_ok,
        trace: result
            .bracket_trace
            .iter()
            .map(|t| TraceRow {
                alpha: t.alpha,
                bracket_mean: t.bracket_mean,
                bracket_stderr: t.bracket_stderr,
                chihat: t.chihat,
                converged: t.converged,
            })
            .collect(),
    }
}

pub fn trace_csv(rho: f64, r: f64, seed: u64, result: &ThresholdResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema: {THRESHOLD_SCHEMA}\n"));
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for t in &result.bracket_trace {
        out.push_str(&format!(
            "{rho},{r},{},{},{},{},{},{},{seed}\n",
            t.alpha,
            t.bracket_mean,
            t.bracket_stderr,
            t.chihat,
            result.n_used,
            result.samples_used,
        ));
    }
    out
}

// ---- sweep ----

pub const SWEEP_SCHEMA: &str = "l1phase.sweep.v1";

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepFile {
    pub schema: String,
    pub r_fixed: Option<f64>,
    pub rho_fixed: Option<f64>,
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub r: f64,
    pub alpha_c: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub chihat: Option<f64>,
    pub error: Option<String>,
}

pub fn sweep_csv(file: &SweepFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema: {SWEEP_SCHEMA}\n"));
    out.push_str("rho,r,alpha_c,alpha_c_stderr,chihat,status\n");
    for p in &file.points {
        match (p.alpha_c, p.mc_stderr, p.chihat) {
            (Some(a), Some(s), Some(c)) => {
                out.push_str(&format!("{},{},{a},{s},{c},ok\n", p.rho, p.r));
            }
            _ => {
                out.push_str(&format!(
                    "{},{},,,,{}\n",
                    p.rho,
                    p.r,
                    p.error.as_deref().unwrap_or("failed")
                ));
            }
        }
    }
    out
}

// ---- experiment ----

pub const EXPERIMENT_SCHEMA: &str = "l1phase.experiment.v1";

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub schema: String,
    pub rho: f64,
    pub r: f64,
    pub rr: String,
    pub trials: usize,
    pub seed: u64,
    pub alpha_grid: Vec<f64>,
    pub curves: Vec<CurveSummary>,
    pub scaling_inv_sqrt_n: ScalingSummary,
    pub scaling_inv_n: ScalingSummary,
    /// Which scaling variable gave the better (chi^2/dof closest to 1) fit.
    pub preferred_scaling: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveSummary {
    pub n: usize,
    pub alpha_c_n: f64,
    pub alpha_c_n_stderr: f64,
    pub flagged: bool,
    pub points: Vec<PointSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub alpha: f64,
    pub trials: u32,
    pub successes: u32,
    pub excluded: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub variable: String,
    pub alpha_c_inf: f64,
    pub alpha_c_inf_stderr: f64,
    pub coefficients: [f64; 3],
    pub chi2_dof: f64,
}

impl From<&ScalingFit> for ScalingSummary {
    fn from(fit: &ScalingFit) -> Self {
        ScalingSummary {
            variable: fit.scaling_variable.label().to_string(),
            alpha_c_inf: fit.alpha_c_inf,
            alpha_c_inf_stderr: fit.alpha_c_inf_stderr,
            coefficients: fit.coefficients,
            chi2_dof: fit.chi2_dof,
        }
    }
}

pub fn curve_summary(curve: &TransitionCurve) -> CurveSummary {
    CurveSummary {
        n: curve.n,
        alpha_c_n: curve.alpha_c_n,
        alpha_c_n_stderr: curve.alpha_c_n_stderr,
        flagged: curve.flagged,
        points: curve
            .points
            .iter()
            .map(|p| PointSummary {
                alpha: p.alpha,
                trials: p.trials,
                successes: p.successes,
                excluded: p.excluded,
            })
            .collect(),
    }
}

/// One row per `(n, alpha)`: the spec's flat experiment format.
pub fn experiment_csv(file: &ExperimentFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("# schema: {EXPERIMENT_SCHEMA}\n"));
    out.push_str("n,alpha,trials,successes,excluded\n");
    for c in &file.curves {
        for p in &c.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.n, p.alpha, p.trials, p.successes, p.excluded
            ));
        }
    }
    out
}

// ---- instance serialization (binary/CSV pair) ----

pub const INSTANCE_SCHEMA: &str = "l1phase.instance.v1";

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub schema: String,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub rt: String,
    pub rr: String,
    pub seed: u64,
}

/// Writes `<stem>.matrix.bin` (row-major little-endian f64),
/// `<stem>.vectors.csv` (columns `vector,index,value`), and
/// `<stem>.meta.json`.
pub fn write_instance(
    stem: &Path,
    inst: &ProblemInstance,
    rt: &str,
    rr: &str,
    seed: u64,
) -> CliResult<()> {
    let dense = inst.matrix.to_dense();
    let mut bytes = Vec::with_capacity(dense.rows() * dense.cols() * 8);
    for v in dense.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let bin_path = stem.with_extension("matrix.bin");
    fs::File::create(&bin_path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| failure(format!("cannot write '{}': {e}", bin_path.display())))?;

    let mut csv = String::from("vector,index,value\n");
    for (i, v) in inst.x0.iter().enumerate() {
        csv.push_str(&format!("x0,{i},{v}\n"));
    }
    for (i, v) in inst.y.iter().enumerate() {
        csv.push_str(&format!("y,{i},{v}\n"));
    }
    write_text(&stem.with_extension("vectors.csv"), &csv)?;

    write_json(
        &stem.with_extension("meta.json"),
        &InstanceMeta {
            schema: INSTANCE_SCHEMA.to_string(),
            n: inst.matrix.cols(),
            p: inst.matrix.rows(),
            alpha: inst.alpha,
            rt: rt.to_string(),
            rr: rr.to_string(),
            seed,
        },
    )
}

/// Loads an instance written by [`write_instance`].
pub fn read_instance(stem: &Path) -> CliResult<(ProblemInstance, InstanceMeta)> {
    let meta_path = stem.with_extension("meta.json");
    let meta: InstanceMeta = serde_json::from_str(
        &fs::read_to_string(&meta_path)
            .map_err(|e| usage(format!("cannot read '{}': {e}", meta_path.display())))?,
    )
    .map_err(|e| usage(format!("bad instance metadata: {e}")))?;
    if meta.schema != INSTANCE_SCHEMA {
        return Err(usage(format!("unknown instance schema '{}'", meta.schema)));
    }

    let bin_path = stem.with_extension("matrix.bin");
    let bytes = fs::read(&bin_path)
        .map_err(|e| usage(format!("cannot read '{}': {e}", bin_path.display())))?;
    if bytes.len() != meta.p * meta.n * 8 {
        return Err(usage(format!(
            "matrix file holds {} bytes, expected {}",
            bytes.len(),
            meta.p * meta.n * 8
        )));
    }
    let mut data = Vec::with_capacity(meta.p * meta.n);
    for chunk in bytes.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let dense = Mat::from_rows(meta.p, meta.n, data);

    let csv_path = stem.with_extension("vectors.csv");
    let text = fs::read_to_string(&csv_path)
        .map_err(|e| usage(format!("cannot read '{}': {e}", csv_path.display())))?;
    let mut x0 = vec![0.0; meta.n];
    for line in text.lines().skip(1) {
        let mut parts = line.split(',');
        let kind = parts.next().unwrap_or("");
        if kind != "x0" {
            continue;
        }
        let idx: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| usage("bad vectors.csv index".to_string()))?;
        let val: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| usage("bad vectors.csv value".to_string()))?;
        if idx >= meta.n {
            return Err(usage(format!("x0 index {idx} out of range")));
        }
        x0[idx] = val;
    }

    let rt = crate::spec::parse_correlation(&meta.rt, meta.n)?;
    let rr = crate::spec::parse_correlation(&meta.rr, meta.p)?;
    let matrix = KroneckerMatrix::from_dense(dense, rt, rr);
    let inst = ProblemInstance::from_parts(matrix, x0)
        .map_err(|e| usage(format!("inconsistent instance: {e}")))?;
    Ok((inst, meta))
}

/// Dimension-independent correlation description stored in metadata.
pub fn correlation_label(spec: &CorrelationSpec) -> String {
    use l1phase_core::model::CorrelationKind;
    match spec.kind() {
        CorrelationKind::Identity => "identity".to_string(),
        CorrelationKind::Tridiagonal { r } => format!("tridiag:{r}"),
        CorrelationKind::Custom(_) => "custom".to_string(),
    }
}
