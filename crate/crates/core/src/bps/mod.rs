//! The Bouncy Particle Sampler: straight-line motion at unit speed,
//! interrupted by bounces off the gradient and velocity refreshments.

mod event_time;

pub use event_time::{invert_affine_rate, EventTime, EventTimeMethod, GridThinning};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::Target;
use crate::transform::TransformConfig;
use crate::targets::TargetConfig;
use crate::Vector;

/// Position and unit velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vector,
    pub v: Vector,
}

impl State {
    pub fn new(x: Vector, v: Vector) -> Result<Self> {
        if x.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: v.len(),
            });
        }
        if ((v.norm() - 1.0).abs()) > 1e-12 {
            return Err(Error::Config(format!("velocity must have unit norm, got {}", v.norm())));
        }
        Ok(Self { x, v })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

pub const DEFAULT_EPSILON: f64 = 0.5;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Refreshment rate `lambda_ref(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RefreshPolicy {
    Constant {
        lambda_ref: f64,
    },
    /// `lambda_ref + |grad U(x)| / max(1, |x|^epsilon)`, for thin-tailed targets.
    PositionDependent {
        lambda_ref: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

impl RefreshPolicy {
    pub fn constant(lambda_ref: f64) -> Self {
        RefreshPolicy::Constant { lambda_ref }
    }

    pub fn position_dependent(lambda_ref: f64, epsilon: f64) -> Self {
        RefreshPolicy::PositionDependent { lambda_ref, epsilon }
    }

    pub fn lambda_ref(&self) -> f64 {
        match *self {
            RefreshPolicy::Constant { lambda_ref } | RefreshPolicy::PositionDependent { lambda_ref, .. } => lambda_ref,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RefreshPolicy::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lambda_ref();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("lambda_ref must be positive, got {lr}")));
        }
        if let RefreshPolicy::PositionDependent { epsilon, .. } = *self {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
            }
        }
        Ok(())
    }

    /// Refresh rate given the position and its (already computed) gradient norm.
    pub fn rate_with_grad_norm(&self, x: &Vector, grad_norm: f64) -> f64 {
        match *self {
            RefreshPolicy::Constant { lambda_ref } => lambda_ref,
            RefreshPolicy::PositionDependent { lambda_ref, epsilon } => {
                lambda_ref + grad_norm / x.norm().powf(epsilon).max(1.0)
            }
        }
    }
}

/// Uniform draw on the unit sphere `S^{d-1}`.
pub fn sample_velocity<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    loop {
        let g = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Reflection of `v` off the hyperplane orthogonal to `gradient`.
pub fn reflect(gradient: &Vector, v: &Vector) -> Result<Vector> {
    let g2 = gradient.norm_squared();
    if g2 == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let out = v - gradient * (2.0 * gradient.dot(v) / g2);
    let n = out.norm();
    Ok(out / n)
}

/// Bounce intensity `<grad U(x), v>_+`.
pub fn bounce_rate<T: Target + ?Sized>(target: &T, x: &Vector, v: &Vector) -> Result<f64> {
    Ok(target.grad(x)?.value.dot(v).max(0.0))
}

pub fn refresh_rate<T: Target + ?Sized>(policy: &RefreshPolicy, target: &T, x: &Vector) -> Result<f64> {
    match policy {
        RefreshPolicy::Constant { lambda_ref } => Ok(*lambda_ref),
        RefreshPolicy::PositionDependent { .. } => {
            let g = target.grad(x)?.value;
            Ok(policy.rate_with_grad_norm(x, g.norm()))
        }
    }
}

/// Total event rate `lambda_ref(x) + <grad U(x), v>_+`.
pub fn total_rate<T: Target + ?Sized>(policy: &RefreshPolicy, target: &T, x: &Vector, v: &Vector) -> Result<f64> {
    let g = target.grad(x)?.value;
    Ok(policy.rate_with_grad_norm(x, g.norm()) + g.dot(v).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Init,
    Bounce,
    Refresh,
    Final,
}

/// State immediately after an event at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    #[serde(with = "vector_serde")]
    pub x: Vector,
    #[serde(with = "vector_serde")]
    pub v: Vector,
}

mod vector_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Vec::<f64>::deserialize(d).map(Vector::from_vec)
    }
}

/// Stopping rule for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    /// Run for exactly this much time; the last segment is cut with a `Final` event.
    Duration(f64),
    /// Stop after this many bounce/refresh events.
    Events(usize),
}

/// Provenance carried with a trajectory (the JSONL header line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformConfig>,
    pub policy: RefreshPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<u64>,
    pub d: usize,
}

/// A piecewise-linear BPS path: the event list plus total duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub events: Vec<Event>,
    pub duration: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.header.d
    }

    /// Segments `(x_k, v_k, t_k, t_{k+1})` between consecutive events.
    pub fn segments(&self) -> impl Iterator<Item = (&Vector, &Vector, f64, f64)> + '_ {
        self.events.windows(2).map(|w| (&w[0].x, &w[0].v, w[0].t, w[1].t))
    }

    /// Bounce and refresh events, i.e. the embedded jump chain.
    pub fn jump_events(&self) -> impl Iterator<Item = &Event> + '_ {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Bounce | EventKind::Refresh))
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Position at time `t` by linear interpolation on its segment.
    pub fn position_at(&self, t: f64) -> Result<Vector> {
        if self.events.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        let idx = self.events.partition_point(|e| e.t <= t).max(1) - 1;
        let e = &self.events[idx];
        Ok(&e.x + &e.v * (t - e.t))
    }
}

/// A configured sampler over a borrowed target.
#[derive(Debug, Clone)]
pub struct Bps<'a, T: Target + ?Sized> {
    target: &'a T,
    policy: RefreshPolicy,
    method: EventTimeMethod,
    grid: GridThinning,
}

impl<'a, T: Target + ?Sized> Bps<'a, T> {
    pub fn new(target: &'a T, policy: RefreshPolicy) -> Result<Self> {
        policy.validate()?;
        if target.dim() < 2 {
            return Err(Error::Config("dimension must be >= 2".into()));
        }
        Ok(Self {
            target,
            policy,
            method: EventTimeMethod::Auto,
            grid: GridThinning::default(),
        })
    }

    pub fn with_method(mut self, method: EventTimeMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_grid(mut self, grid: GridThinning) -> Self {
        self.grid = grid;
        self
    }

    pub fn target(&self) -> &T {
        self.target
    }

    pub fn policy(&self) -> &RefreshPolicy {
        &self.policy
    }

    /// First arrival of the Poisson process with intensity `t -> lambda_bar(x + t v, v)`.
    pub fn sample_event_time<R: Rng + ?Sized>(&self, x: &Vector, v: &Vector, rng: &mut R) -> Result<EventTime> {
        event_time::sample(self.target, &self.policy, self.method, &self.grid, x, v, rng)
    }

    /// Applies the jump at a state whose event time has been reached.
    fn jump<R: Rng + ?Sized>(&self, x: Vector, v: &Vector, et: &EventTime, rng: &mut R) -> Result<(EventKind, Vector, Vector)> {
        let u: f64 = rng.random();
        if u * et.total_rate < et.bounce_rate {
            let g = self.target.grad(&x)?.value;
            let nv = reflect(&g, v)?;
            Ok((EventKind::Bounce, x, nv))
        } else {
            let nv = sample_velocity(rng, x.len());
            Ok((EventKind::Refresh, x, nv))
        }
    }

    /// One event: drift for the sampled time, then bounce or refresh.
    pub fn step<R: Rng + ?Sized>(&self, state: &State, rng: &mut R) -> Result<(Event, State)> {
        let et = self.sample_event_time(&state.x, &state.v, rng)?;
        let x = &state.x + &state.v * et.tau;
        let (kind, x, v) = self.jump(x, &state.v, &et, rng)?;
        let event = Event {
            t: et.tau,
            kind,
            x: x.clone(),
            v: v.clone(),
        };
        Ok((event, State { x, v }))
    }

    pub fn simulate<R: Rng + ?Sized>(&self, init: &State, horizon: Horizon, rng: &mut R) -> Result<Trajectory> {
        self.target.check_dim(&init.x)?;
        match horizon {
            Horizon::Duration(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::Config(format!("duration must be positive, got {t}")))
            }
            Horizon::Events(0) => return Err(Error::Config("event count must be >= 1".into())),
            _ => {}
        }
        let mut events = vec![Event {
            t: 0.0,
            kind: EventKind::Init,
            x: init.x.clone(),
            v: init.v.clone(),
        }];
        let mut t = 0.0;
        let mut x = init.x.clone();
        let mut v = init.v.clone();
        let mut jumps = 0usize;
        loop {
            let et = self.sample_event_time(&x, &v, rng)?;
            if let Horizon::Duration(end) = horizon {
                if t + et.tau >= end {
                    let xf = &x + &v * (end - t);
                    events.push(Event {
                        t: end,
                        kind: EventKind::Final,
                        x: xf,
                        v: v.clone(),
                    });
                    t = end;
                    break;
                }
            }
            t += et.tau;
            let moved = &x + &v * et.tau;
            let (kind, nx, nv) = self.jump(moved, &v, &et, rng)?;
            x = nx;
            v = nv;
            events.push(Event {
                t,
                kind,
                x: x.clone(),
                v: v.clone(),
            });
            jumps += 1;
            if let Horizon::Events(n) = horizon {
                if jumps >= n {
                    break;
                }
            }
        }
        Ok(Trajectory {
            header: TrajectoryHeader {
                target: None,
                transform: None,
                policy: self.policy,
                seed: None,
                chain: None,
                d: self.target.dim(),
            },
            events,
            duration: t,
        })
    }
}

pub fn sample_event_time<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    policy: &RefreshPolicy,
    x: &Vector,
    v: &Vector,
    rng: &mut R,
) -> Result<EventTime> {
    Bps::new(target, *policy)?.sample_event_time(x, v, rng)
}

pub fn step<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    policy: &RefreshPolicy,
    state: &State,
    rng: &mut R,
) -> Result<(Event, State)> {
    Bps::new(target, *policy)?.step(state, rng)
}

pub fn simulate<T: Target + ?Sized, R: Rng + ?Sized>(
    target: &T,
    policy: &RefreshPolicy,
    init: &State,
    horizon: Horizon,
    rng: &mut R,
) -> Result<Trajectory> {
    Bps::new(target, *policy)?.simulate(init, horizon, rng)
}
