//! Concurrent batch evaluation: a blocking in-process worker pool over a
//! `Simulator` handle, plus an adapter that drives an external simulator
//! executable through a CSV file protocol.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::design_space::{DesignPoint, ParameterSpace};
use crate::error::{CalibError, Result};
use crate::sim::{loss_mse, OutputSeries, N_BINS};

/// One simulator evaluation: the raw output series (when the simulator
/// produces one) and the scalar loss.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub series: Option<OutputSeries>,
    pub loss: f64,
}

/// Anything the pool can evaluate. Must be a pure function of
/// (theta, seed) and callable from several workers at once.
pub trait Simulator: Sync {
    fn evaluate(&self, theta: &DesignPoint, seed: u64) -> Result<SimOutput>;
}

impl<F> Simulator for F
where
    F: Fn(&DesignPoint, u64) -> Result<SimOutput> + Sync,
{
    fn evaluate(&self, theta: &DesignPoint, seed: u64) -> Result<SimOutput> {
        self(theta, seed)
    }
}

/// A unit of work for the pool.
#[derive(Debug, Clone)]
pub struct EvaluationJob {
    pub id: u64,
    pub theta: DesignPoint,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum JobStatus {
    Ok(SimOutput),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub id: u64,
    pub status: JobStatus,
    pub wall_time: Duration,
}

impl JobResult {
    pub fn loss(&self) -> Option<f64> {
        match &self.status {
            JobStatus::Ok(out) => Some(out.loss),
            JobStatus::Failed(_) => None,
        }
    }
}

/// Derive a per-job seed from the master seed and job id, so a job's
/// result never depends on what else is in the batch.
pub fn derive_seed(master: u64, id: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = master ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run every job, at most `workers` concurrently, and return results in
/// job order. Job failures are captured in the status; only malformed
/// batches error.
pub fn submit_batch(sim: &dyn Simulator, jobs: &[EvaluationJob], workers: usize) -> Result<Vec<JobResult>> {
    if workers == 0 {
        return Err(CalibError::InvalidArgument("workers must be >= 1".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for j in jobs {
        if !seen.insert(j.id) {
            return Err(CalibError::InvalidArgument(format!("duplicate job id {}", j.id)));
        }
    }
    if jobs.is_empty() {
        return Ok(Vec::new());
    }

    let run_one = |job: &EvaluationJob| -> JobResult {
        let start = Instant::now();
        let status = match sim.evaluate(&job.theta, job.seed) {
            Ok(out) if out.loss.is_finite() => JobStatus::Ok(out),
            Ok(out) => JobStatus::Failed(format!("non-finite loss {}", out.loss)),
            Err(e) => JobStatus::Failed(e.to_string()),
        };
        JobResult { id: job.id, status, wall_time: start.elapsed() }
    };

    let workers = workers.min(jobs.len());
    if workers == 1 {
        return Ok(jobs.iter().map(run_one).collect());
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<JobResult>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(run_one(&jobs[i]));
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("worker left a job unfinished"))
        .collect())
}

/// Sensible worker count: available parallelism capped at the batch size.
pub fn default_workers(batch: usize) -> usize {
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(batch.max(1))
}

/// External simulator executable driven through CSV files.
///
/// Per evaluation the adapter writes `<work_dir>/jobs/<id>/input.csv`
/// (`name,value` rows then `seed,<n>`), runs
/// `exe <input.csv> <output.csv>`, and parses `output.csv`
/// (`bin,value`, 288 rows) into a series. Loss is MSE against the
/// observed series.
pub struct ExternalSimulator {
    exe: PathBuf,
    space: ParameterSpace,
    observed: OutputSeries,
    work_dir: PathBuf,
    timeout: Duration,
    job_counter: AtomicUsize,
}

impl ExternalSimulator {
    pub fn new(
        exe: impl Into<PathBuf>,
        space: ParameterSpace,
        observed: OutputSeries,
        work_dir: impl Into<PathBuf>,
        timeout: Option<Duration>,
    ) -> Result<Self> {
        let exe = exe.into();
        if !exe.is_file() {
            return Err(CalibError::Simulator(format!("executable not found: {}", exe.display())));
        }
        Ok(Self {
            exe,
            space,
            observed,
            work_dir: work_dir.into(),
            timeout: timeout.unwrap_or(Duration::from_secs(3600)),
            job_counter: AtomicUsize::new(0),
        })
    }

    fn write_input(&self, path: &Path, theta: &DesignPoint, seed: u64) -> Result<()> {
        let mut body = String::from("name,value\n");
        for (p, v) in self.space.params().iter().zip(theta.values()) {
            body.push_str(&format!("{},{}\n", p.name, v));
        }
        body.push_str(&format!("seed,{seed}\n"));
        std::fs::write(path, body).map_err(CalibError::Io)
    }

}

/// Parse a series in the external output format (`bin,value`, 288 rows).
pub fn read_series_csv(path: &Path) -> Result<OutputSeries> {
    let text = std::fs::read_to_string(path).map_err(CalibError::Io)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("bin,value") => {}
        other => {
            return Err(CalibError::Simulator(format!(
                "bad output header {:?}, expected bin,value",
                other.unwrap_or("")
            )))
        }
    }
    let mut values = Vec::with_capacity(N_BINS);
    for (i, line) in lines.enumerate() {
        let (bin, value) = line
            .split_once(',')
            .ok_or_else(|| CalibError::Simulator(format!("malformed output row {i}: {line}")))?;
        let bin: usize = bin
            .trim()
            .parse()
            .map_err(|_| CalibError::Simulator(format!("bad bin index in row {i}: {line}")))?;
        if bin != i {
            return Err(CalibError::Simulator(format!("out-of-order bin {bin} at row {i}")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CalibError::Simulator(format!("bad value in row {i}: {line}")))?;
        values.push(v);
    }
    OutputSeries::new(values)
}

impl Simulator for ExternalSimulator {
    fn evaluate(&self, theta: &DesignPoint, seed: u64) -> Result<SimOutput> {
        let job_id = self.job_counter.fetch_add(1, Ordering::Relaxed);
        let dir = self.work_dir.join("jobs").join(job_id.to_string());
        std::fs::create_dir_all(&dir).map_err(CalibError::Io)?;
        let input = dir.join("input.csv");
        let output = dir.join("output.csv");
        let stderr_path = dir.join("stderr.txt");
        self.write_input(&input, theta, seed)?;

        let stderr_file = std::fs::File::create(&stderr_path).map_err(CalibError::Io)?;
        let mut child = Command::new(&self.exe)
            .arg(&input)
            .arg(&output)
            .stdout(Stdio::null())
            .stderr(Stdio::from(stderr_file))
            .spawn()
            .map_err(|e| CalibError::Simulator(format!("failed to launch {}: {e}", self.exe.display())))?;

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait().map_err(CalibError::Io)? {
                Some(s) => break s,
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(CalibError::Simulator(format!(
                        "simulator timed out after {:?}",
                        self.timeout
                    )));
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        if !status.success() {
            let mut diag = std::fs::read_to_string(&stderr_path).unwrap_or_default();
            diag.truncate(2000);
            return Err(CalibError::Simulator(format!(
                "simulator exited with {status}: {}",
                diag.trim()
            )));
        }
        let series = read_series_csv(&output)?;
        let loss = loss_mse(&self.observed, &series);
        Ok(SimOutput { series: Some(series), loss })
    }
}

/// Write an observed series in the external output format; useful for
/// seeding external-protocol work directories.
pub fn write_series_csv(path: &Path, series: &OutputSeries) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(CalibError::Io)?;
    writeln!(f, "bin,value").map_err(CalibError::Io)?;
    for (i, v) in series.values().iter().enumerate() {
        writeln!(f, "{i},{v}").map_err(CalibError::Io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::unscale;

    fn cube_jobs(n: usize) -> (ParameterSpace, Vec<EvaluationJob>) {
        let s = ParameterSpace::unit_cube(2).unwrap();
        let jobs = (0..n)
            .map(|i| EvaluationJob {
                id: i as u64 + 10,
                theta: unscale(&[0.1 + 0.05 * i as f64, 0.5], &s).unwrap(),
                seed: derive_seed(99, i as u64),
            })
            .collect();
        (s, jobs)
    }

    fn quad_sim(theta: &DesignPoint, _seed: u64) -> Result<SimOutput> {
        let v = theta.values();
        Ok(SimOutput { series: None, loss: v[0] * v[0] + v[1] })
    }

    #[test]
    fn batch_of_two_preserves_ids() {
        let (_, jobs) = cube_jobs(2);
        let res = submit_batch(&quad_sim, &jobs, 2).unwrap();
        assert_eq!(res.len(), 2);
        assert_eq!(res[0].id, 10);
        assert_eq!(res[1].id, 11);
        assert!(res.iter().all(|r| r.loss().is_some()));
    }

    #[test]
    fn results_independent_of_worker_count() {
        let (_, jobs) = cube_jobs(9);
        let baseline: Vec<Option<f64>> = submit_batch(&quad_sim, &jobs, 1).unwrap().iter().map(|r| r.loss()).collect();
        for workers in [2, 4, 8] {
            let got: Vec<Option<f64>> = submit_batch(&quad_sim, &jobs, workers).unwrap().iter().map(|r| r.loss()).collect();
            assert_eq!(got, baseline, "workers={workers}");
        }
    }

    #[test]
    fn sleepy_jobs_run_concurrently() {
        let sleepy = |theta: &DesignPoint, _s: u64| -> Result<SimOutput> {
            std::thread::sleep(Duration::from_millis(100));
            Ok(SimOutput { series: None, loss: theta.values()[0] })
        };
        let (_, jobs) = cube_jobs(8);
        let start = Instant::now();
        let res = submit_batch(&sleepy, &jobs, 4).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(res.len(), 8);
        assert!(elapsed < Duration::from_millis(450), "took {elapsed:?}");
        assert!(res.iter().all(|r| r.wall_time >= Duration::from_millis(90)));
    }

    #[test]
    fn per_job_failure_does_not_crash_batch() {
        let flaky = |theta: &DesignPoint, _s: u64| -> Result<SimOutput> {
            if theta.values()[0] < 0.12 {
                Err(CalibError::Simulator("boom".into()))
            } else {
                Ok(SimOutput { series: None, loss: 1.0 })
            }
        };
        let (_, jobs) = cube_jobs(4);
        let res = submit_batch(&flaky, &jobs, 2).unwrap();
        assert!(matches!(&res[0].status, JobStatus::Failed(m) if m.contains("boom")));
        assert!(res[1..].iter().all(|r| matches!(r.status, JobStatus::Ok(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let (s, _) = cube_jobs(0);
        let theta = unscale(&[0.5, 0.5], &s).unwrap();
        let jobs = vec![
            EvaluationJob { id: 1, theta: theta.clone(), seed: 0 },
            EvaluationJob { id: 1, theta, seed: 1 },
        ];
        assert!(submit_batch(&quad_sim, &jobs, 2).is_err());
        assert!(submit_batch(&quad_sim, &[], 0).is_err());
    }

    #[test]
    fn derived_seeds_ignore_batch_composition() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
    }

    fn fake_exe(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("sim.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    fn constant_series(v: f64) -> OutputSeries {
        OutputSeries::new(vec![v; N_BINS]).unwrap()
    }

    #[test]
    fn external_constant_series_smoke() {
        let tmp = tempfile::tempdir().unwrap();
        let script = format!(
            "echo bin,value > \"$2\"\ni=0\nwhile [ $i -lt {N_BINS} ]; do echo $i,2.5 >> \"$2\"; i=$((i+1)); done"
        );
        let exe = fake_exe(tmp.path(), &script);
        let s = ParameterSpace::unit_cube(2).unwrap();
        let ext = ExternalSimulator::new(exe, s.clone(), constant_series(2.0), tmp.path(), None).unwrap();
        let out = ext.evaluate(&unscale(&[0.3, 0.4], &s).unwrap(), 1).unwrap();
        assert!((out.loss - 0.25).abs() < 1e-12); // (2.5-2.0)^2
        assert_eq!(out.series.unwrap().values().len(), N_BINS);
        // protocol artifacts on disk
        assert!(tmp.path().join("jobs/0/input.csv").is_file());
        let input = std::fs::read_to_string(tmp.path().join("jobs/0/input.csv")).unwrap();
        assert!(input.starts_with("name,value\n"));
        assert!(input.trim_end().ends_with("seed,1"));
    }

    #[test]
    fn external_nonzero_exit_captures_stderr() {
        let tmp = tempfile::tempdir().unwrap();
        let exe = fake_exe(tmp.path(), "echo something broke >&2\nexit 3");
        let s = ParameterSpace::unit_cube(1).unwrap();
        let ext = ExternalSimulator::new(exe, s.clone(), constant_series(1.0), tmp.path(), None).unwrap();
        let err = ext.evaluate(&unscale(&[0.5], &s).unwrap(), 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("something broke"), "{msg}");
    }

    #[test]
    fn external_timeout_kills_job() {
        let tmp = tempfile::tempdir().unwrap();
        let exe = fake_exe(tmp.path(), "sleep 30");
        let s = ParameterSpace::unit_cube(1).unwrap();
        let ext = ExternalSimulator::new(
            exe,
            s.clone(),
            constant_series(1.0),
            tmp.path(),
            Some(Duration::from_millis(150)),
        )
        .unwrap();
        let start = Instant::now();
        let err = ext.evaluate(&unscale(&[0.5], &s).unwrap(), 0).unwrap_err();
        assert!(start.elapsed() < Duration::from_secs(5));
        assert!(err.to_string().contains("timed out"));
    }

    #[test]
    fn external_malformed_output_is_failure() {
        let tmp = tempfile::tempdir().unwrap();
        let exe = fake_exe(tmp.path(), "echo wrong,header > \"$2\"");
        let s = ParameterSpace::unit_cube(1).unwrap();
        let ext = ExternalSimulator::new(exe, s.clone(), constant_series(1.0), tmp.path(), None).unwrap();
        assert!(ext.evaluate(&unscale(&[0.5], &s).unwrap(), 0).is_err());
    }

    #[test]
    fn external_missing_exe_rejected() {
        let s = ParameterSpace::unit_cube(1).unwrap();
        assert!(ExternalSimulator::new("/no/such/binary", s, constant_series(1.0), "/tmp", None).is_err());
    }

}
