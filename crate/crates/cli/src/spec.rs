//! Flag grammar helpers: `lo:hi:step` grids and correlation-spec strings
//! (`identity`, `tridiag:<r>`, `file:<path>`).

use crate::{usage, CliError, CliResult};
use l1phase_core::linalg::Mat;
use l1phase_core::model::CorrelationSpec;

/// Parses `lo:hi:step` into an inclusive grid.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("grid must be lo:hi:step, got '{s}'")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| usage(format!("bad grid start '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| usage(format!("bad grid end '{}'", parts[1])))?;
    let step: f64 = parts[2]
        .parse()
        .map_err(|_| usage(format!("bad grid step '{}'", parts[2])))?;
    if !(step > 0.0) || hi < lo {
        return Err(usage(format!("empty or malformed grid '{s}'")));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let v = lo + step * k as f64;
        if v > hi + 1e-9 * step {
            break;
        }
        grid.push(v);
        k += 1;
    }
    if grid.is_empty() {
        return Err(usage(format!("empty grid '{s}'")));
    }
    Ok(grid)
}

/// Parses a comma-separated list of positive integers.
pub fn parse_usize_list(s: &str) -> CliResult<Vec<usize>> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let v: usize = tok
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad integer '{tok}'")))?;
        if v == 0 {
            return Err(usage("sizes must be positive".to_string()));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(usage("empty size list".to_string()));
    }
    Ok(out)
}

/// Builds a correlation spec of dimension `n` from its string form.
pub fn parse_correlation(s: &str, n: usize) -> CliResult<CorrelationSpec> {
    parse_correlation_family(s)?
        .bind(n)
        .map_err(|e| usage(e.to_string()))
}

/// Parses a correlation string into a size-free family; `file:` specs bind
/// to their stored dimension.
pub fn parse_correlation_family(s: &str) -> CliResult<l1phase_core::model::CorrelationFamily> {
    use l1phase_core::model::CorrelationFamily;
    if s == "identity" {
        return Ok(CorrelationFamily::Identity);
    }
    if let Some(rs) = s.strip_prefix("tridiag:") {
        let r: f64 = rs
            .parse()
            .map_err(|_| usage(format!("bad correlation parameter '{rs}'")))?;
        check_r(r)?;
        return Ok(CorrelationFamily::Tridiagonal { r });
    }
    if s.starts_with("file:") {
        // dimension comes from the file itself
        let probe = parse_correlation_file_any(s)?;
        return Ok(CorrelationFamily::Fixed(probe));
    }
    Err(usage(format!(
        "unknown correlation spec '{s}' (identity | tridiag:<r> | file:<path>)"
    )))
}

fn parse_correlation_file_any(s: &str) -> CliResult<CorrelationSpec> {
    let path = s.strip_prefix("file:").unwrap();
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read correlation file '{path}': {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| usage(format!("line {}: {e}", ln + 1)))?);
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(usage(format!("correlation file '{path}' is not square")));
    }
    let mat = Mat::from_fn(dim, dim, |i, j| rows[i][j]);
    CorrelationSpec::custom(mat).map_err(|e| usage(e.to_string()))
}

pub fn check_rho(rho: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&rho) && rho.is_finite() {
        Ok(rho)
    } else {
        Err(usage(format!("rho must lie in [0,1], got {rho}")))
    }
}

pub fn check_r(r: f64) -> CliResult<f64> {
    if r.is_finite() && r.abs() <= 0.5 {
        Ok(r)
    } else {
        Err(usage(format!(
            "correlation infeasible: |r| must be <= 1/2, got {r}"
        )))
    }
}

pub fn check_format(format: &str) -> CliResult<()> {
    match format {
        "text" | "json" => Ok(()),
        other => Err(usage(format!("unknown format '{other}' (text | json)"))),
    }
}

pub fn map_usage<T, E: std::fmt::Display>(r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

pub fn map_failure<T, E: std::fmt::Display>(r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| CliError::Failure(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parses_inclusive_endpoints() {
        let g = parse_grid("0:0.5:0.05").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_malformed() {
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn correlation_specs_parse() {
        assert!(parse_correlation("identity", 8).is_ok());
        assert!(parse_correlation("tridiag:0.5", 8).is_ok());
        assert!(parse_correlation("tridiag:0.6", 8).is_err());
        assert!(parse_correlation("nonsense", 8).is_err());
    }
}
