//! Plot-ready CSV artifacts for each command, with parsers so every
//! emitted file round-trips through the tool itself.
//!
//! Floating-point cells use the shortest round-trip decimal form, so a
//! rerun with the same seed produces byte-identical files.

use std::path::Path;

use crate::design_space::ParameterSpace;
use crate::dimred_linear::{ActiveSubspace, BootstrapIntervals};
use crate::error::{CalibError, Result};
use crate::optimizer::BOState;
use crate::sensitivity::{MorrisStats, VariableClass};
use crate::sim::{OutputSeries, N_BINS};

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CalibError::Io)?;
    }
    std::fs::write(path, body).map_err(CalibError::Io)
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(CalibError::Io)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(CalibError::InvalidArgument(format!(
                "{}: expected header {header:?}, found {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    Ok(lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn cell_f64(row: &[String], i: usize) -> Result<f64> {
    row.get(i)
        .ok_or_else(|| CalibError::InvalidArgument(format!("missing column {i}")))?
        .parse()
        .map_err(|_| CalibError::InvalidArgument(format!("bad float in column {i}: {:?}", row[i])))
}

/// One row of morris.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct MorrisRow {
    pub dim: usize,
    pub name: String,
    pub mu: f64,
    pub sigma: f64,
    pub mu_star: f64,
    pub class: String,
}

const MORRIS_HEADER: &str = "dim,name,mu,sigma,mu_star,class";

/// Write screening stats, ranked by mu*.
pub fn write_morris_csv(
    path: &Path,
    space: &ParameterSpace,
    stats: &MorrisStats,
    ranking: &[(usize, Vec<VariableClass>)],
) -> Result<()> {
    let mut body = format!("{MORRIS_HEADER}\n");
    for (dim, tags) in ranking {
        let class = if tags.is_empty() {
            "unclassified".to_string()
        } else {
            tags.iter().map(|t| t.label()).collect::<Vec<_>>().join("+")
        };
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            dim,
            space.params()[*dim].name,
            stats.mu[*dim],
            stats.sigma[*dim],
            stats.mu_star[*dim],
            class
        ));
    }
    write_file(path, &body)
}

pub fn read_morris_csv(path: &Path) -> Result<Vec<MorrisRow>> {
    read_rows(path, MORRIS_HEADER)?
        .iter()
        .map(|row| {
            Ok(MorrisRow {
                dim: row[0]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad dim {:?}", row[0])))?,
                name: row[1].clone(),
                mu: cell_f64(row, 2)?,
                sigma: cell_f64(row, 3)?,
                mu_star: cell_f64(row, 4)?,
                class: row[5].clone(),
            })
        })
        .collect()
}

const EIGVALS_HEADER: &str = "index,eigenvalue,lower,upper";

/// One row of eigvals.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct EigvalRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn write_eigvals_csv(path: &Path, a: &ActiveSubspace, iv: &BootstrapIntervals) -> Result<()> {
    let mut body = format!("{EIGVALS_HEADER}\n");
    for (i, e) in a.eigvals.iter().enumerate() {
        body.push_str(&format!("{i},{e},{},{}\n", iv.lower[i], iv.upper[i]));
    }
    write_file(path, &body)
}

pub fn read_eigvals_csv(path: &Path) -> Result<Vec<EigvalRow>> {
    read_rows(path, EIGVALS_HEADER)?
        .iter()
        .map(|row| {
            Ok(EigvalRow {
                index: row[0]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad index {:?}", row[0])))?,
                eigenvalue: cell_f64(row, 1)?,
                lower: cell_f64(row, 2)?,
                upper: cell_f64(row, 3)?,
            })
        })
        .collect()
}

/// Write projected training samples: one row per sample, active
/// coordinates then the loss.
pub fn write_projection_csv(path: &Path, projected: &[Vec<f64>], losses: &[f64]) -> Result<()> {
    if projected.len() != losses.len() {
        return Err(CalibError::DimensionMismatch { expected: projected.len(), got: losses.len() });
    }
    let q = projected.first().map(|v| v.len()).unwrap_or(0);
    let mut body: String = (0..q).map(|i| format!("v{i},")).collect();
    body.push_str("loss\n");
    for (v, l) in projected.iter().zip(losses) {
        for c in v {
            body.push_str(&format!("{c},"));
        }
        body.push_str(&format!("{l}\n"));
    }
    write_file(path, &body)
}

pub fn read_projection_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(CalibError::Io)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CalibError::InvalidArgument("empty projection file".into()))?;
    if !header.ends_with("loss") {
        return Err(CalibError::InvalidArgument(format!("bad projection header {header:?}")));
    }
    let cols = header.split(',').count();
    let mut projected = Vec::new();
    let mut losses = Vec::new();
    for line in lines {
        let row: Vec<String> = line.split(',').map(str::to_string).collect();
        if row.len() != cols {
            return Err(CalibError::InvalidArgument(format!("ragged projection row {line:?}")));
        }
        projected.push((0..cols - 1).map(|i| cell_f64(&row, i)).collect::<Result<_>>()?);
        losses.push(cell_f64(&row, cols - 1)?);
    }
    Ok((projected, losses))
}

/// One parsed row of trace.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCsvRow {
    pub iteration: usize,
    pub best_loss: f64,
    pub point: usize,
    pub theta: Vec<f64>,
}

fn trace_header(space: &ParameterSpace) -> String {
    let mut h = String::from("iteration,best_loss,point");
    for p in space.params() {
        h.push(',');
        h.push_str(&p.name);
    }
    h
}

/// Write the convergence trace: one row per proposed point per iteration.
pub fn write_trace_csv(path: &Path, space: &ParameterSpace, state: &BOState) -> Result<()> {
    let mut body = trace_header(space);
    body.push('\n');
    for row in &state.trace {
        for (k, theta) in row.proposed.iter().enumerate() {
            body.push_str(&format!("{},{},{}", row.iteration, row.best_loss, k));
            for v in theta {
                body.push_str(&format!(",{v}"));
            }
            body.push('\n');
        }
    }
    write_file(path, &body)
}

pub fn read_trace_csv(path: &Path, space: &ParameterSpace) -> Result<Vec<TraceCsvRow>> {
    read_rows(path, &trace_header(space))?
        .iter()
        .map(|row| {
            Ok(TraceCsvRow {
                iteration: row[0]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad iteration {:?}", row[0])))?,
                best_loss: cell_f64(row, 1)?,
                point: row[2]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad point index {:?}", row[2])))?,
                theta: (3..row.len()).map(|i| cell_f64(row, i)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

/// One parsed row of evaluations.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationCsvRow {
    pub id: usize,
    pub status: String,
    pub loss: Option<f64>,
    pub theta: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Write the full evaluation log. The psi block width equals the search
/// dimension of the run; failed rows leave the loss cell empty.
pub fn write_evaluations_csv(path: &Path, space: &ParameterSpace, state: &BOState) -> Result<()> {
    let q = state.evaluated.first().map(|e| e.psi.len()).unwrap_or(0);
    let mut body = String::from("id,status");
    for p in space.params() {
        body.push(',');
        body.push_str(&p.name);
    }
    for i in 0..q {
        body.push_str(&format!(",psi{i}"));
    }
    body.push_str(",loss\n");
    for (id, e) in state.evaluated.iter().enumerate() {
        // status text must not break the delimiter structure
        let status = e.status.replace([',', '\n'], ";");
        body.push_str(&format!("{id},{status}"));
        for v in e.theta.values() {
            body.push_str(&format!(",{v}"));
        }
        for v in &e.psi {
            body.push_str(&format!(",{v}"));
        }
        match e.loss {
            Some(l) => body.push_str(&format!(",{l}\n")),
            None => body.push_str(",\n"),
        }
    }
    write_file(path, &body)
}

pub fn read_evaluations_csv(path: &Path, space: &ParameterSpace) -> Result<Vec<EvaluationCsvRow>> {
    let text = std::fs::read_to_string(path).map_err(CalibError::Io)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CalibError::InvalidArgument("empty evaluations file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let d = space.dimension();
    if cols.len() < d + 3 || cols[0] != "id" || cols[1] != "status" || *cols.last().unwrap() != "loss" {
        return Err(CalibError::InvalidArgument(format!("bad evaluations header {header:?}")));
    }
    let q = cols.len() - d - 3;
    lines
        .map(|line| {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != cols.len() {
                return Err(CalibError::InvalidArgument(format!("ragged evaluations row {line:?}")));
            }
            let loss = if row[cols.len() - 1].is_empty() {
                None
            } else {
                Some(cell_f64(&row, cols.len() - 1)?)
            };
            Ok(EvaluationCsvRow {
                id: row[0]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad id {:?}", row[0])))?,
                status: row[1].clone(),
                loss,
                theta: (2..2 + d).map(|i| cell_f64(&row, i)).collect::<Result<_>>()?,
                psi: (2 + d..2 + d + q).map(|i| cell_f64(&row, i)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

const SUMMARY_HEADER: &str = "configuration,best_value,improvement_pct,iteration_found";

/// One parsed row of summary.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub configuration: String,
    pub best_value: f64,
    pub improvement_pct: f64,
    pub iteration_found: usize,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut body = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        body.push_str(&format!(
            "{},{},{},{}\n",
            r.configuration, r.best_value, r.improvement_pct, r.iteration_found
        ));
    }
    write_file(path, &body)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    read_rows(path, SUMMARY_HEADER)?
        .iter()
        .map(|row| {
            Ok(SummaryRow {
                configuration: row[0].clone(),
                best_value: cell_f64(row, 1)?,
                improvement_pct: cell_f64(row, 2)?,
                iteration_found: row[3]
                    .parse()
                    .map_err(|_| CalibError::InvalidArgument(format!("bad iteration {:?}", row[3])))?,
            })
        })
        .collect()
}

const QQ_HEADER: &str = "observed,calibrated,initial";

/// Write quantile columns: each input series sorted ascending,
/// row-aligned across the three columns.
pub fn write_qq_csv(
    path: &Path,
    observed: &OutputSeries,
    calibrated: &OutputSeries,
    initial: &OutputSeries,
) -> Result<()> {
    let sorted = |s: &OutputSeries| {
        let mut v = s.values().to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let (o, c, i) = (sorted(observed), sorted(calibrated), sorted(initial));
    let mut body = format!("{QQ_HEADER}\n");
    for k in 0..N_BINS {
        body.push_str(&format!("{},{},{}\n", o[k], c[k], i[k]));
    }
    write_file(path, &body)
}

pub fn read_qq_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let rows = read_rows(path, QQ_HEADER)?;
    if rows.len() != N_BINS {
        return Err(CalibError::InvalidArgument(format!(
            "qq file must have {N_BINS} rows, found {}",
            rows.len()
        )));
    }
    rows.iter()
        .map(|row| Ok((cell_f64(row, 0)?, cell_f64(row, 1)?, cell_f64(row, 2)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::unscale;
    use crate::optimizer::{EvaluationRecord, ReductionMap, TraceRow};

    fn space2() -> ParameterSpace {
        ParameterSpace::from_bounds(&[("alpha", 0.0, 2.0), ("beta", -1.0, 1.0)]).unwrap()
    }

    fn sample_state() -> BOState {
        let s = space2();
        let t1 = unscale(&[0.25, 0.5], &s).unwrap();
        let t2 = unscale(&[0.75, 0.25], &s).unwrap();
        BOState {
            evaluated: vec![
                EvaluationRecord { theta: t1.clone(), psi: vec![0.25, 0.5], loss: Some(1.5), status: "ok".into() },
                EvaluationRecord {
                    theta: t2.clone(),
                    psi: vec![0.75, 0.25],
                    loss: None,
                    status: "failed: exit code 1, no output".into(),
                },
            ],
            incumbent: (t1, 1.5),
            trace: vec![
                TraceRow { iteration: 1, best_loss: 1.5, proposed: vec![vec![0.5, 0.0], vec![1.5, 0.5]] },
                TraceRow { iteration: 2, best_loss: 1.25, proposed: vec![vec![0.25, -0.5], vec![0.75, 0.125]] },
            ],
            initial_best: 2.0,
            incumbent_iteration: 2,
            reduction: ReductionMap::Identity,
        }
    }

    #[test]
    fn morris_csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("morris.csv");
        let stats = MorrisStats {
            mu: vec![1.0, -0.25],
            sigma: vec![0.125, 0.5],
            mu_star: vec![1.0, 0.5],
            };
        let ranking = vec![
            (0usize, vec![VariableClass::Monotone]),
            (1usize, vec![VariableClass::Monotone, VariableClass::NonlinearOrInteracting]),
        ];
        write_morris_csv(&path, &space2(), &stats, &ranking).unwrap();
        let rows = read_morris_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].name, "alpha");
        assert_eq!(rows[0].mu, 1.0);
        assert_eq!(rows[1].class, "monotone+nonlinear_or_interacting");
        assert_eq!(rows[1].sigma, 0.5);
    }

    #[test]
    fn eigvals_csv_round_trip() {
        use nalgebra::DMatrix;
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("eigvals.csv");
        let a = ActiveSubspace {
            eigvals: vec![4.0, 0.5],
            w: DMatrix::identity(2, 2),
            q: 1,
            gap_log10: 0.9,
            low_confidence: false,
        };
        let iv = BootstrapIntervals { lower: vec![3.5, 0.25], upper: vec![4.5, 0.75], replicates: 100, redraws: 0 };
        write_eigvals_csv(&path, &a, &iv).unwrap();
        let rows = read_eigvals_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], EigvalRow { index: 0, eigenvalue: 4.0, lower: 3.5, upper: 4.5 });
    }

    #[test]
    fn projection_csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("projection.csv");
        let projected = vec![vec![0.1, -0.2], vec![0.3, 0.4]];
        let losses = vec![1.0, 2.5];
        write_projection_csv(&path, &projected, &losses).unwrap();
        let (p2, l2) = read_projection_csv(&path).unwrap();
        assert_eq!(p2, projected);
        assert_eq!(l2, losses);
    }

    #[test]
    fn trace_csv_round_trip_and_shape() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("trace.csv");
        let s = space2();
        let state = sample_state();
        write_trace_csv(&path, &s, &state).unwrap();
        let rows = read_trace_csv(&path, &s).unwrap();
        assert_eq!(rows.len(), 4); // 2 iterations x 2 points
        assert_eq!(rows[0].iteration, 1);
        assert_eq!(rows[0].point, 0);
        assert_eq!(rows[3].theta, vec![0.75, 0.125]);
        assert_eq!(rows[3].best_loss, 1.25);
    }

    #[test]
    fn evaluations_csv_round_trip_preserves_failures() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("evaluations.csv");
        let s = space2();
        let state = sample_state();
        write_evaluations_csv(&path, &s, &state).unwrap();
        let rows = read_evaluations_csv(&path, &s).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].loss, Some(1.5));
        assert_eq!(rows[0].theta, state.evaluated[0].theta.values());
        assert_eq!(rows[0].psi, vec![0.25, 0.5]);
        assert_eq!(rows[1].loss, None);
        // commas in the failure text must not corrupt the row
        assert!(rows[1].status.contains("exit code 1"));
    }

    #[test]
    fn summary_csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("summary.csv");
        let rows = vec![SummaryRow {
            configuration: "orig/zero".into(),
            best_value: 0.75,
            improvement_pct: 62.5,
            iteration_found: 14,
        }];
        write_summary_csv(&path, &rows).unwrap();
        assert_eq!(read_summary_csv(&path).unwrap(), rows);
    }

    #[test]
    fn qq_csv_round_trip_sorted() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("qq.csv");
        let mk = |scale: f64| {
            OutputSeries::new((0..N_BINS).map(|i| ((i * 7919) % N_BINS) as f64 * scale).collect()).unwrap()
        };
        write_qq_csv(&path, &mk(1.0), &mk(0.5), &mk(2.0)).unwrap();
        let rows = read_qq_csv(&path).unwrap();
        assert_eq!(rows.len(), N_BINS);
        for w in rows.windows(2) {
            assert!(w[0].0 <= w[1].0);
            assert!(w[0].1 <= w[1].1);
            assert!(w[0].2 <= w[1].2);
        }
    }

    #[test]
    fn writes_are_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let s = space2();
        let state = sample_state();
        let p1 = tmp.path().join("a.csv");
        let p2 = tmp.path().join("b.csv");
        write_trace_csv(&p1, &s, &state).unwrap();
        write_trace_csv(&p2, &s, &state).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
