//! Simulation traces, error metrics, and CSV export.

use std::fmt::Write as _;

use crate::model::BlockStructure;

/// One transmission: agent `i` received `y_j` at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvent {
    pub i: usize,
    pub j: usize,
    pub t: f64,
    /// `C x_j(t)`.
    pub clean: Vec<f64>,
    /// `C x_j(t) + w_j(t)` as received.
    pub received: Vec<f64>,
}

/// Estimation error of one observer, split into the position block and the
/// remaining blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeErrorSeries {
    pub i: usize,
    pub j: usize,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    /// `‖x_i − x_0‖` per follower (outer index `i − 1`).
    pub tracking_error: Vec<Vec<f64>>,
    /// `(1/N) Σ ‖x_i^{(1)} − x_0^{(1)}‖`.
    pub mean_position_error: Vec<f64>,
    pub estimation: Vec<EdgeErrorSeries>,
}

impl MetricSeries {
    pub fn estimation_error(&self, i: usize, j: usize) -> Option<&EdgeErrorSeries> {
        self.estimation.iter().find(|e| e.i == i && e.j == j)
    }
}

/// Recorded simulation output. Row `k` of every table belongs to `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub bs: BlockStructure,
    pub followers: usize,
    /// Observer pairs `(i, j)`, in estimate-column order.
    pub pairs: Vec<(usize, usize)>,
    pub times: Vec<f64>,
    /// `(N + 1) · n` values per row, leader first.
    pub states: Vec<Vec<f64>>,
    /// `pairs.len() · n` values per row.
    pub estimates: Vec<Vec<f64>>,
    /// `N · m` values per row.
    pub inputs: Vec<Vec<f64>>,
    pub events: Vec<SampleEvent>,
    /// Integrator sub-steps taken (base steps plus event splits).
    pub integrator_steps: usize,
    pub metrics: MetricSeries,
}

impl SimTrace {
    pub fn state(&self, row: usize, agent: usize) -> &[f64] {
        let n = self.bs.n();
        &self.states[row][agent * n..(agent + 1) * n]
    }

    pub fn pair_index(&self, i: usize, j: usize) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (i, j))
    }

    pub fn estimate(&self, row: usize, pair: usize) -> &[f64] {
        let n = self.bs.n();
        &self.estimates[row][pair * n..(pair + 1) * n]
    }

    pub fn input(&self, row: usize, agent: usize) -> &[f64] {
        let m = self.bs.m();
        &self.inputs[row][(agent - 1) * m..agent * m]
    }

    /// Long-format CSV: one row per (time, agent) with true state, the
    /// agent's self-estimate and its input (empty for the leader).
    pub fn trace_csv(&self) -> String {
        let (n, m) = (self.bs.n(), self.bs.m());
        let mut s = String::from("time,agent");
        for k in 1..=n {
            let _ = write!(s, ",x{k}");
        }
        for k in 1..=n {
            let _ = write!(s, ",xhat{k}");
        }
        for k in 1..=m {
            let _ = write!(s, ",u{k}");
        }
        s.push('\n');
        for (row, &t) in self.times.iter().enumerate() {
            for agent in 0..=self.followers {
                let _ = write!(s, "{t},{agent}");
                for v in self.state(row, agent) {
                    let _ = write!(s, ",{v}");
                }
                let own = (agent > 0).then(|| self.pair_index(agent, agent)).flatten();
                match own {
                    Some(p) => self.estimate(row, p).iter().for_each(|v| {
                        let _ = write!(s, ",{v}");
                    }),
                    None => s.push_str(&",".repeat(n)),
                }
                if agent > 0 {
                    for v in self.input(row, agent) {
                        let _ = write!(s, ",{v}");
                    }
                } else {
                    s.push_str(&",".repeat(m));
                }
                s.push('\n');
            }
        }
        s
    }

    /// One row per (time, observer pair).
    pub fn estimates_csv(&self) -> String {
        let n = self.bs.n();
        let mut s = String::from("time,observer,source");
        for k in 1..=n {
            let _ = write!(s, ",xhat{k}");
        }
        s.push_str(",position_error,velocity_error\n");
        for (row, &t) in self.times.iter().enumerate() {
            for (p, &(i, j)) in self.pairs.iter().enumerate() {
                let _ = write!(s, "{t},{i},{j}");
                for v in self.estimate(row, p) {
                    let _ = write!(s, ",{v}");
                }
                let e = &self.metrics.estimation[p];
                let _ = writeln!(s, ",{},{}", e.position[row], e.velocity[row]);
            }
        }
        s
    }

    pub fn events_csv(&self) -> String {
        let m = self.bs.m();
        let mut s = String::from("observer,source,time");
        for k in 1..=m {
            let _ = write!(s, ",y_clean{k}");
        }
        for k in 1..=m {
            let _ = write!(s, ",y_received{k}");
        }
        s.push('\n');
        for e in &self.events {
            let _ = write!(s, "{},{},{}", e.i, e.j, e.t);
            for v in e.clean.iter().chain(&e.received) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("time,mean_position_error");
        for i in 1..=self.followers {
            let _ = write!(s, ",tracking_error_{i}");
        }
        s.push('\n');
        for (row, &t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t},{}", self.metrics.mean_position_error[row]);
            for series in &self.metrics.tracking_error {
                let _ = write!(s, ",{}", series[row]);
            }
            s.push('\n');
        }
        s
    }

    /// Sampling instants of edge `(i, j)` from the event log.
    pub fn sample_times(&self, i: usize, j: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.i == i && e.j == j)
            .map(|e| e.t)
            .collect()
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Tracking and estimation error series from the recorded states.
pub fn metrics(trace: &SimTrace) -> MetricSeries {
    let (n, m) = (trace.bs.n(), trace.bs.m());
    let rows = trace.times.len();
    let nf = trace.followers;
    let mut tracking_error = vec![Vec::with_capacity(rows); nf];
    let mut mean_position_error = Vec::with_capacity(rows);
    let mut estimation: Vec<EdgeErrorSeries> = trace
        .pairs
        .iter()
        .map(|&(i, j)| EdgeErrorSeries {
            i,
            j,
            position: Vec::with_capacity(rows),
            velocity: Vec::with_capacity(rows),
        })
        .collect();
    for row in 0..rows {
        let leader = trace.state(row, 0);
        let mut mean = 0.0;
        for i in 1..=nf {
            let x = trace.state(row, i);
            tracking_error[i - 1].push(norm(x, leader));
            mean += norm(&x[..m], &leader[..m]);
        }
        mean_position_error.push(if nf > 0 { mean / nf as f64 } else { 0.0 });
        for (p, series) in estimation.iter_mut().enumerate() {
            let xh = trace.estimate(row, p);
            let x = trace.state(row, series.j);
            series.position.push(norm(&xh[..m], &x[..m]));
            series.velocity.push(norm(&xh[m..n], &x[m..n]));
        }
    }
    MetricSeries {
        tracking_error,
        mean_position_error,
        estimation,
    }
}

/// Time average of `values` over `times >= from`.
pub fn time_average(times: &[f64], values: &[f64], from: f64) -> f64 {
    let mut area = 0.0;
    let mut span = 0.0;
    for k in 1..times.len() {
        if times[k - 1] >= from {
            let dt = times[k] - times[k - 1];
            area += 0.5 * (values[k] + values[k - 1]) * dt;
            span += dt;
        }
    }
    if span > 0.0 {
        area / span
    } else {
        values.last().copied().unwrap_or(0.0)
    }
}

/// Least-squares slope of `ln(values)` against time over `[t0, t1]`,
/// ignoring non-positive values.
pub fn log_linear_slope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= t0 && t <= t1 && v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Decay window of an error series: from its peak to the first time it drops
/// below `floor_ratio · peak` (or the end of the series).
pub fn decay_window(times: &[f64], values: &[f64], floor_ratio: f64) -> (f64, f64) {
    let (peak_idx, peak) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
            );
    let end = values[peak_idx..]
        .iter()
        .position(|&v| v < floor_ratio * peak)
        .map(|off| peak_idx + off)
        .unwrap_or(values.len() - 1);
    (times[peak_idx], times[end])
}
