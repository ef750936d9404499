//! Fixed-step RK4 integration of agents and observer banks with event splitting.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gains::GainSet;
use crate::model::{eval_dynamics, NonlinearField};
use crate::observer::{Anchor, ProtocolConfig};
use crate::sim::scenario::ScenarioConfig;
use crate::sim::schedule::{generate_schedules, rng_for, stream};
use crate::sim::trace::{metrics, MetricSeries, SampleEvent, SimTrace};

/// Coupled leader + followers + observers, flattened into one state vector:
/// agents `0..=N` first, then one block per observer pair.
struct CoupledSystem<'a> {
    cfg: &'a ScenarioConfig,
    protocol: ProtocolConfig,
    field: &'a dyn NonlinearField,
    n: usize,
    followers: usize,
    pairs: Vec<(usize, usize)>,
    /// `pair_of[i][j]` = observer index of agent `i` estimating `j`.
    pair_of: Vec<Vec<Option<usize>>>,
    anchors: Vec<Option<Anchor>>,
}

impl<'a> CoupledSystem<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let gains = GainSet::synthesize(cfg.bs)?;
        let protocol = ProtocolConfig::new(cfg.tuning, gains, cfg.topology.clone())?;
        let followers = cfg.topology.followers();
        let pairs = cfg.topology.observed_pairs();
        let mut pair_of = vec![vec![None; followers + 1]; followers + 1];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pair_of[i][j] = Some(k);
        }
        Ok(Self {
            cfg,
            protocol,
            field: cfg.field.as_ref(),
            n: cfg.bs.n(),
            followers,
            anchors: vec![None; pairs.len()],
            pairs,
            pair_of,
        })
    }

    fn len(&self) -> usize {
        (self.followers + 1 + self.pairs.len()) * self.n
    }

    fn agent<'y>(&self, y: &'y [f64], a: usize) -> &'y [f64] {
        &y[a * self.n..(a + 1) * self.n]
    }

    fn observer_offset(&self, k: usize) -> usize {
        (self.followers + 1 + k) * self.n
    }

    fn observer<'y>(&self, y: &'y [f64], k: usize) -> &'y [f64] {
        let off = self.observer_offset(k);
        &y[off..off + self.n]
    }

    fn inputs(&self, y: &[f64]) -> Result<Vec<DVector<f64>>> {
        (1..=self.followers)
            .map(|i| {
                self.protocol
                    .control_input_with(i, |j| self.pair_of[i][j].map(|k| self.observer(y, k)))
            })
            .collect()
    }

    fn derivative(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.n;
        let bs = self.cfg.bs;
        let inputs = self.inputs(y)?;
        let chain = &self.protocol.chain;
        for a in 0..=self.followers {
            let x = DVector::from_column_slice(self.agent(y, a));
            let eps = self.cfg.disturbances.epsilon(bs, a, t);
            let u = (a > 0).then(|| &inputs[a - 1]);
            let dx = eval_dynamics(chain, self.field, t, &x, u, eps.as_ref())?;
            dy[a * n..(a + 1) * n].copy_from_slice(dx.as_slice());
        }
        for k in 0..self.pairs.len() {
            let xh = DVector::from_column_slice(self.observer(y, k));
            let d = self
                .protocol
                .observer_rhs(self.field, &xh, self.anchors[k].as_ref(), t);
            let off = self.observer_offset(k);
            dy[off..off + n].copy_from_slice(d.as_slice());
        }
        Ok(())
    }

    fn rk4(&self, t: f64, y: &mut [f64], h: f64, scratch: &mut Scratch) -> Result<()> {
        let Scratch {
            k1,
            k2,
            k3,
            k4,
            tmp,
        } = scratch;
        self.derivative(t, y, k1)?;
        axpy(tmp, y, 0.5 * h, k1);
        self.derivative(t + 0.5 * h, tmp, k2)?;
        axpy(tmp, y, 0.5 * h, k2);
        self.derivative(t + 0.5 * h, tmp, k3)?;
        axpy(tmp, y, h, k3);
        self.derivative(t + h, tmp, k4)?;
        for (idx, v) in y.iter_mut().enumerate() {
            *v += h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
        Ok(())
    }

    /// Applies the sample of edge `k` at `t`: `y_j(t) = C x_j(t) + w_j(t)`.
    fn sample(&mut self, k: usize, t: f64, y: &[f64], noise: &mut ChaCha8Rng) -> SampleEvent {
        let (i, j) = self.pairs[k];
        let c = &self.protocol.chain.c;
        let clean = c * DVector::from_column_slice(self.agent(y, j));
        let received = &clean + self.cfg.disturbances.noise.sample(self.cfg.bs.m(), noise);
        let x_hat = DVector::from_column_slice(self.observer(y, k));
        // a scheduled sample never precedes the previous one on the same edge
        debug_assert!(self.anchors[k].as_ref().is_none_or(|a| a.t <= t));
        self.anchors[k] = Some(Anchor {
            t,
            error: c * x_hat - &received,
        });
        SampleEvent {
            i,
            j,
            t,
            clean: clean.as_slice().to_vec(),
            received: received.as_slice().to_vec(),
        }
    }
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for ((o, yv), xv) in out.iter_mut().zip(y).zip(x) {
        *o = yv + a * xv;
    }
}

/// Runs a scenario to its horizon and returns the recorded trace.
pub fn run(config: &ScenarioConfig) -> Result<SimTrace> {
    config.validate()?;
    let mut sys = CoupledSystem::new(config)?;
    let init = config.initial_states();
    let n = sys.n;
    let m = config.bs.m();

    let mut y = vec![0.0; sys.len()];
    for a in 0..=sys.followers {
        y[a * n..(a + 1) * n].copy_from_slice(init.agent(a).as_slice());
    }
    for (k, xh) in init.observers.iter().enumerate() {
        let off = sys.observer_offset(k);
        y[off..off + n].copy_from_slice(xh.as_slice());
    }

    let schedule = generate_schedules(
        &config.topology,
        config.tuning.tau_m,
        config.tuning.tau_max,
        config.horizon,
        config.seed,
    )?;
    let mut queue: Vec<(f64, usize)> = Vec::new();
    for e in &schedule.edges {
        let k = sys.pair_of[e.i][e.j].expect("schedule covers observed pairs");
        queue.extend(e.instants.iter().map(|&t| (t, k)));
    }
    queue.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut noise = rng_for(config.seed, stream::NOISE, 0);
    let mut scratch = Scratch::new(y.len());
    let mut trace = SimTrace {
        bs: config.bs,
        followers: sys.followers,
        pairs: sys.pairs.clone(),
        times: Vec::new(),
        states: Vec::new(),
        estimates: Vec::new(),
        inputs: Vec::new(),
        events: Vec::with_capacity(queue.len()),
        integrator_steps: 0,
        metrics: MetricSeries::default(),
    };
    let record = |trace: &mut SimTrace, sys: &CoupledSystem, t: f64, y: &[f64]| -> Result<()> {
        let split = (sys.followers + 1) * n;
        trace.times.push(t);
        trace.states.push(y[..split].to_vec());
        trace.estimates.push(y[split..].to_vec());
        let mut u = Vec::with_capacity(sys.followers * m);
        for ui in sys.inputs(y)? {
            u.extend_from_slice(ui.as_slice());
        }
        trace.inputs.push(u);
        Ok(())
    };

    let steps = (config.horizon / config.dt - 1e-9).ceil() as usize;
    let stride = ((config.record_interval / config.dt).round() as usize).max(1);
    let mut t = 0.0;
    let mut next_event = 0;
    record(&mut trace, &sys, t, &y)?;
    for step in 1..=steps {
        let t_end = (step as f64 * config.dt).min(config.horizon);
        while next_event < queue.len() && queue[next_event].0 <= t_end {
            let (te, k) = queue[next_event];
            if te > t {
                sys.rk4(t, &mut y, te - t, &mut scratch)?;
                trace.integrator_steps += 1;
                t = te;
                guard(&y, t, config.blowup_guard)?;
            }
            let ev = sys.sample(k, t, &y, &mut noise);
            trace.events.push(ev);
            next_event += 1;
        }
        if t_end > t {
            sys.rk4(t, &mut y, t_end - t, &mut scratch)?;
            trace.integrator_steps += 1;
            guard(&y, t_end, config.blowup_guard)?;
        }
        t = t_end;
        if step % stride == 0 || step == steps {
            record(&mut trace, &sys, t, &y)?;
        }
    }
    trace.metrics = metrics(&trace);
    Ok(trace)
}

fn guard(y: &[f64], t: f64, limit: f64) -> Result<()> {
    let norm = y.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !norm.is_finite() || norm > limit {
        return Err(Error::NumericalBlowup {
            t,
            norm,
            guard: limit,
        });
    }
    Ok(())
}
