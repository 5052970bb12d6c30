//! Sweeps over schemes and step sizes: convergence, timing and stability.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ieqsim::integrators::{max_stable_dt, DivergenceMonitor, StepCounters};

use crate::config::{ExperimentConfig, Method};
use crate::error::{config_err, HarnessError, Result};
use crate::sim::{power_of_two_ratio, reference, whole_ratio, Setup, Trajectory};
use crate::table::{fmt_f64, loglog_slope, median, write_row};

/// Maps `f` over `items` on a small worker pool; results keep input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Positions of `method` at every step over `steps` steps.
pub fn trajectory(setup: &Setup, method: Method, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut s = setup.stepper(method, dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s.q().to_vec());
    for _ in 0..steps {
        s.advance()?;
        if !s.q().iter().all(|x| x.is_finite()) {
            return Err(ieqsim::Error::Diverged { step: s.step_index(), reason: "non-finite state".into() }.into());
        }
        out.push(s.q().to_vec());
    }
    Ok(out)
}

/// `√(Σₙ k ‖qⁿ − q_ref(nk)‖²)`, with `q_ref` taken every `stride` samples.
pub fn trajectory_error(run: &[Vec<f64>], reference: &[Vec<f64>], stride: usize, dt: f64) -> Result<f64> {
    let needed = (run.len() - 1) * stride + 1;
    if reference.len() < needed {
        return config_err(format!("reference has {} samples, {needed} needed", reference.len()));
    }
    let sum: f64 = run
        .iter()
        .enumerate()
        .map(|(n, q)| q.iter().zip(&reference[n * stride]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok((dt * sum).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: Method,
    pub dt: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares log-log slope per scheme.
    pub slopes: Vec<(Method, f64)>,
    pub fine_dt: Option<f64>,
}

impl ConvergenceReport {
    pub fn slope(&self, scheme: Method) -> Option<f64> {
        self.slopes.iter().find(|(m, _)| *m == scheme).map(|(_, s)| *s)
    }

    pub fn error(&self, scheme: Method, dt: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.scheme == scheme && r.dt == dt).map(|r| r.error)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        write_row(out, &["scheme", "dt", "error", "slope"].map(String::from))?;
        for r in &self.rows {
            let slope = self.slope(r.scheme).unwrap_or(f64::NAN);
            write_row(out, &[r.scheme.to_string(), fmt_f64(r.dt), fmt_f64(r.error), fmt_f64(slope)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The fine step nearest `2⁻²⁰ s` (in the log sense) of the form `dt / 2^m`.
pub fn default_fine_dt(dt: f64) -> f64 {
    let m = (dt * 2f64.powi(20)).log2().round().max(0.0);
    dt / m.exp2()
}

/// Errors of every scheme at every step in `dt_list` against a
/// Störmer–Verlet reference, either read from `reference_traj` or computed
/// at `fine_dt`.
pub fn converge(config: &ExperimentConfig, reference_traj: Option<&Trajectory>) -> Result<ConvergenceReport> {
    if config.dt_list.is_empty() {
        return config_err("converge needs dt_list");
    }
    let base = config.dt_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let strides: Vec<usize> = config
        .dt_list
        .iter()
        .map(|dt| whole_ratio(*dt, base).ok_or(HarnessError::NonCommensurateSteps { dt: *dt, fine: base }))
        .collect::<Result<_>>()?;
    let mut sampling = config.clone();
    sampling.dt = base;
    let (traj, fine_dt) = match reference_traj {
        Some(t) => (t.clone(), None),
        None => {
            let fine = config.fine_dt.unwrap_or_else(|| default_fine_dt(base));
            (reference(&sampling, fine)?, Some(fine))
        }
    };
    let ref_stride = power_of_two_ratio(base, traj.dt)
        .map(|m| 1usize << m)
        .ok_or(HarnessError::NonCommensurateSteps { dt: base, fine: traj.dt })?;
    let setup = Setup::new(config)?;
    let schemes = config.scheme_list();
    let jobs: Vec<(Method, f64, usize)> = schemes
        .iter()
        .flat_map(|m| config.dt_list.iter().zip(&strides).map(move |(dt, s)| (*m, *dt, *s)))
        .collect();
    let errors = par_map(&jobs, |(m, dt, stride)| -> Result<f64> {
        let run = trajectory(&setup, *m, *dt, config.steps_for(*dt))?;
        trajectory_error(&run, &traj.samples, stride * ref_stride, *dt)
    });
    let mut rows = Vec::with_capacity(jobs.len());
    for ((m, dt, _), e) in jobs.iter().zip(errors) {
        rows.push(ConvergenceRow { scheme: *m, dt: *dt, error: e? });
    }
    let slopes = schemes
        .iter()
        .map(|m| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.scheme == *m).map(|r| (r.dt, r.error)).unzip();
            (*m, if x.len() > 1 { loglog_slope(&x, &y) } else { f64::NAN })
        })
        .collect();
    Ok(ConvergenceReport { rows, slopes, fine_dt })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scheme: Method,
    pub dt: f64,
    pub steps: usize,
    /// Median wall time of the stepping loop in seconds.
    pub median_s: f64,
    /// Work of one timed repetition.
    pub counters: StepCounters,
}

pub fn write_bench_csv(out: &mut dyn Write, rows: &[BenchRow]) -> Result<()> {
    let header = ["scheme", "dt", "steps", "median_s", "gradient_evals", "linear_solves", "newton_iterations"];
    write_row(out, &header.map(String::from))?;
    for r in rows {
        write_row(
            out,
            &[
                r.scheme.to_string(),
                fmt_f64(r.dt),
                r.steps.to_string(),
                fmt_f64(r.median_s),
                r.counters.gradient_evals.to_string(),
                r.counters.linear_solves.to_string(),
                r.counters.newton_iterations.to_string(),
            ],
        )?;
    }
    out.flush()?;
    Ok(())
}

fn timed_run(setup: &Setup, method: Method, dt: f64, steps: usize) -> Result<(f64, StepCounters)> {
    let mut s = setup.stepper(method, dt)?;
    let before = s.counters();
    let clock = Instant::now();
    for _ in 0..steps {
        s.advance()?;
    }
    let t = clock.elapsed().as_secs_f64();
    let after = s.counters();
    let counters = StepCounters {
        steps: after.steps - before.steps,
        gradient_evals: after.gradient_evals - before.gradient_evals,
        mass_solves: after.mass_solves - before.mass_solves,
        linear_solves: after.linear_solves - before.linear_solves,
        newton_iterations: after.newton_iterations - before.newton_iterations,
        flops: after.flops,
    };
    Ok((t, counters))
}

/// Median stepping time over `repetitions` runs after one discarded warm-up,
/// for every scheme and every step in `dt_list` (or `dt`). Runs are
/// sequential so they do not compete for the machine.
pub fn bench(config: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    if config.repetitions == 0 {
        return config_err("repetitions must be at least 1");
    }
    let setup = Setup::new(config)?;
    let dts = if config.dt_list.is_empty() { vec![config.dt] } else { config.dt_list.clone() };
    let mut rows = Vec::new();
    for m in config.scheme_list() {
        for &dt in &dts {
            let steps = config.steps_for(dt);
            timed_run(&setup, m, dt, steps)?;
            let mut times = Vec::with_capacity(config.repetitions);
            let mut counters = StepCounters::default();
            for _ in 0..config.repetitions {
                let (t, c) = timed_run(&setup, m, dt, steps)?;
                times.push(t);
                counters = c;
            }
            rows.push(BenchRow { scheme: m, dt, steps, median_s: median(&mut times), counters });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub scheme: Method,
    pub dt: f64,
    pub stable: bool,
    /// Steps completed before divergence (all of them when stable).
    pub steps_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Spacing of the `dt` grid.
    pub cell: f64,
    /// `2/√λ_max(M⁻¹K)` when the system has a split.
    pub predicted: Option<f64>,
}

impl ScanReport {
    /// Largest grid `dt` below which every tested step was stable.
    pub fn boundary(&self, scheme: Method) -> Option<f64> {
        let mut last = None;
        for r in self.rows.iter().filter(|r| r.scheme == scheme) {
            if !r.stable {
                break;
            }
            last = Some(r.dt);
        }
        last
    }

    pub fn all_stable(&self, scheme: Method) -> bool {
        self.rows.iter().filter(|r| r.scheme == scheme).all(|r| r.stable)
    }

    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        write_row(out, &["scheme", "dt", "stable", "steps_run"].map(String::from))?;
        for r in &self.rows {
            write_row(out, &[r.scheme.to_string(), fmt_f64(r.dt), r.stable.to_string(), r.steps_run.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn scan_grid(config: &ExperimentConfig) -> Vec<f64> {
    let n = config.scan_cells;
    let w = (config.scan_max - config.scan_min) / n as f64;
    (0..=n).map(|j| config.scan_min + w * j as f64).collect()
}

/// Runs `scan_steps` steps at every grid `dt`; any failure counts as unstable.
pub fn scan(config: &ExperimentConfig) -> Result<ScanReport> {
    let setup = Setup::new(config)?;
    let grid = scan_grid(config);
    let jobs: Vec<(Method, f64)> =
        config.scheme_list().into_iter().flat_map(|m| grid.iter().map(move |dt| (m, *dt))).collect();
    let results = par_map(&jobs, |(m, dt)| -> Result<ScanRow> {
        let mut s = setup.probing_stepper(*m, *dt)?;
        let h0 = s.energy()?;
        let monitor = DivergenceMonitor::new(setup.system(), h0, config.divergence_threshold)?;
        let mut done = 0;
        let mut stable = true;
        for _ in 0..config.scan_steps {
            let step = s.advance().and_then(|_| monitor.check(s.step_index(), s.q(), s.p_half()));
            if step.is_err() {
                stable = false;
                break;
            }
            done += 1;
        }
        Ok(ScanRow { scheme: *m, dt: *dt, stable, steps_run: done })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let predicted = setup.system().split().map(|_| max_stable_dt(setup.system())).transpose()?;
    let cell = if config.scan_cells > 0 { (config.scan_max - config.scan_min) / config.scan_cells as f64 } else { 0.0 };
    Ok(ScanReport { rows, cell, predicted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<usize> = (0..50).collect();
        assert_eq!(par_map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn default_fine_step_for_millisecond_base() {
        assert_eq!(default_fine_dt(1e-3), 1e-3 / 1024.0);
        assert_eq!(default_fine_dt(1.25e-4), 1.25e-4 / 128.0);
        assert_eq!(default_fine_dt(1e-7), 1e-7);
    }

    #[test]
    fn error_is_zero_against_itself() {
        let run = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(trajectory_error(&run, &run, 1, 0.1).unwrap(), 0.0);
        assert!(trajectory_error(&run, &run, 2, 0.1).is_err());
    }
}
