//! Worker lifecycle and the manager loop.
//!
//! The manager owns the supervisor and the trace. Each sample it reads the
//! signals, runs the supervisor, applies the resulting lifecycle commands and
//! then steps every live worker on the same input sample. Two worker pools
//! implement the stepping: [`LockstepPool`] keeps every filter state on the
//! manager's thread, [`ThreadPool`] gives each worker its own thread and
//! exchanges one message pair per sample with it. Both produce identical
//! traces.

mod pool;
mod trace;

pub use pool::{LockstepPool, ThreadPool, WorkerPool};
pub use trace::{SampleRecord, SampleTrace, TraceError, TraceMeta};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::filter::{DigitalFilter, FilterError, FilterId};
use crate::switching::{
    initial_slot, supervise, CommandKind, LifecycleCommand, PredictorConfig, SupervisorState, SwitchSignal,
};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid run configuration: {0}")]
    ConfigInvalid(String),
    #[error("no worker for filter {0}")]
    NoSuchWorker(FilterId),
    #[error("{command} is not allowed for filter {target} in status {status}")]
    IllegalTransition { command: &'static str, target: FilterId, status: WorkerStatus },
    #[error("worker for filter {0} panicked")]
    WorkerPanicked(FilterId),
    #[error("resources sized for {requested} workers but {live} are live at sample {n}")]
    ResourceDrift { requested: u32, live: u32, n: u64 },
    #[error("supervisor expects primary {expected} but runtime has {actual:?} at sample {n}")]
    PrimaryDesync { expected: FilterId, actual: Option<FilterId>, n: u64 },
    #[error("no primary worker at sample {0}")]
    NoPrimary(u64),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerStatus {
    Speculative,
    Primary,
    /// Retires when sample `deadline` is reached; keeps processing until then.
    Doomed {
        deadline: u64,
    },
    Dead,
}

impl WorkerStatus {
    pub fn is_live(self) -> bool {
        !matches!(self, WorkerStatus::Dead)
    }
}

impl fmt::Display for WorkerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkerStatus::Speculative => f.write_str("SPECULATIVE"),
            WorkerStatus::Primary => f.write_str("PRIMARY"),
            WorkerStatus::Doomed { deadline } => write!(f, "DOOMED({deadline})"),
            WorkerStatus::Dead => f.write_str("DEAD"),
        }
    }
}

/// Manager-side bookkeeping for one worker. The filter state itself lives in
/// the worker pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerHandle {
    pub filter: FilterId,
    pub status: WorkerStatus,
    pub spawned_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyLevel {
    Low,
    High,
}

/// Simulated compute resources: one core for the manager plus one per live
/// worker. Frequency is raised while more than one filter is running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceModel {
    pub active_cores: u32,
    pub frequency_level: FrequencyLevel,
}

impl ResourceModel {
    pub fn for_workers(workers: u32) -> Self {
        Self {
            active_cores: 1 + workers,
            frequency_level: if workers > 1 { FrequencyLevel::High } else { FrequencyLevel::Low },
        }
    }
}

/// Hook for a platform backend (core hotplug, frequency governor). The
/// runtime calls it on every `SCALE_RESOURCES` command.
pub trait ResourceBackend: Send {
    fn apply(&mut self, _model: &ResourceModel) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoopBackend;

impl ResourceBackend for NoopBackend {}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RuntimeStats {
    /// Workers started with zero state, including the initial primary.
    pub spawns: u64,
    pub retired: u64,
    pub cancelled_kills: u64,
    /// Workers still live after shutdown.
    pub leaked: usize,
    /// Time to bring up each worker (thread pool only).
    pub spawn_latency: Vec<Duration>,
}

/// The two filters of a run. Slot 0 runs while the switching function is
/// positive, slot 1 while it is negative.
pub type FilterPair = [DigitalFilter; 2];

/// Per-sample inputs: filter input `u`, decision signal `load` and switching
/// function `g`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Signals {
    pub u: Vec<f64>,
    pub load: Vec<f64>,
    pub g: Vec<f64>,
}

/// Outputs of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub primary: (FilterId, f64),
    pub standby: Option<(FilterId, f64)>,
}

pub struct Runtime<P: WorkerPool> {
    filters: BTreeMap<FilterId, Arc<DigitalFilter>>,
    workers: BTreeMap<FilterId, WorkerHandle>,
    n: u64,
    requested_workers: u32,
    backend: Box<dyn ResourceBackend>,
    pool: P,
    stats: RuntimeStats,
}

impl<P: WorkerPool> Runtime<P> {
    pub fn new(filters: &[DigitalFilter], pool: P) -> Self {
        Self {
            filters: filters.iter().map(|f| (f.id(), Arc::new(f.clone()))).collect(),
            workers: BTreeMap::new(),
            n: 0,
            requested_workers: 0,
            backend: Box::new(NoopBackend),
            pool,
            stats: RuntimeStats::default(),
        }
    }

    pub fn with_backend(mut self, backend: Box<dyn ResourceBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn sample(&self) -> u64 {
        self.n
    }

    pub fn stats(&self) -> &RuntimeStats {
        &self.stats
    }

    pub fn pool(&self) -> &P {
        &self.pool
    }

    pub fn worker(&self, id: FilterId) -> Option<&WorkerHandle> {
        self.workers.get(&id)
    }

    pub fn primary(&self) -> Option<FilterId> {
        self.workers.values().find(|w| w.status == WorkerStatus::Primary).map(|w| w.filter)
    }

    pub fn live_workers(&self) -> u32 {
        self.workers.values().filter(|w| w.status.is_live()).count() as u32
    }

    pub fn resource_level(&self) -> ResourceModel {
        ResourceModel::for_workers(self.live_workers())
    }

    /// Move to sample `n` and retire workers whose deadline has arrived.
    pub fn begin_sample(&mut self, n: u64) -> Result<(), RuntimeError> {
        self.n = n;
        self.expire()
    }

    fn expire(&mut self) -> Result<(), RuntimeError> {
        let due: Vec<FilterId> = self
            .workers
            .values()
            .filter(|w| matches!(w.status, WorkerStatus::Doomed { deadline } if deadline <= self.n))
            .map(|w| w.filter)
            .collect();
        for id in due {
            self.retire(id)?;
        }
        Ok(())
    }

    fn retire(&mut self, id: FilterId) -> Result<(), RuntimeError> {
        if let Some(w) = self.workers.get_mut(&id) {
            w.status = WorkerStatus::Dead;
            self.pool.retire(id)?;
            self.stats.retired += 1;
        }
        Ok(())
    }

    fn handle_mut(&mut self, id: FilterId) -> Result<&mut WorkerHandle, RuntimeError> {
        self.workers.get_mut(&id).ok_or(RuntimeError::NoSuchWorker(id))
    }

    /// Apply one lifecycle command at the current sample.
    pub fn apply_command(&mut self, cmd: &LifecycleCommand) -> Result<(), RuntimeError> {
        let illegal = |command, target, status| RuntimeError::IllegalTransition { command, target, status };
        let name = cmd.kind.name();
        match cmd.kind {
            CommandKind::RunThread(id) => {
                let filter = self.filters.get(&id).cloned().ok_or(RuntimeError::NoSuchWorker(id))?;
                if let Some(w) = self.workers.get(&id).filter(|w| w.status.is_live()) {
                    return Err(illegal(name, id, w.status));
                }
                let latency = self.pool.spawn(filter)?;
                self.stats.spawns += 1;
                if let Some(latency) = latency {
                    log::debug!("worker {id} spawned at sample {} in {latency:?}", self.n);
                    self.stats.spawn_latency.push(latency);
                }
                self.workers
                    .insert(id, WorkerHandle { filter: id, status: WorkerStatus::Speculative, spawned_at: self.n });
            }
            CommandKind::ActivateThread(id) => {
                let status = self.handle_mut(id)?.status;
                if status != WorkerStatus::Speculative {
                    return Err(illegal(name, id, status));
                }
                let n = self.n;
                for w in self.workers.values_mut().filter(|w| w.status == WorkerStatus::Primary) {
                    // provisional; the paired KILL_THREAD sets the real deadline
                    w.status = WorkerStatus::Doomed { deadline: n };
                }
                self.handle_mut(id)?.status = WorkerStatus::Primary;
            }
            CommandKind::KillThread { target, deadline } => {
                let w = self.handle_mut(target)?;
                match w.status {
                    WorkerStatus::Speculative | WorkerStatus::Doomed { .. } => {
                        w.status = WorkerStatus::Doomed { deadline }
                    }
                    status => return Err(illegal(name, target, status)),
                }
            }
            CommandKind::CancelKill(id) => {
                let w = self.handle_mut(id)?;
                match w.status {
                    WorkerStatus::Doomed { .. } => w.status = WorkerStatus::Speculative,
                    status => return Err(illegal(name, id, status)),
                }
                self.stats.cancelled_kills += 1;
            }
            CommandKind::ScaleResources(workers) => {
                self.requested_workers = workers;
                self.backend.apply(&ResourceModel::for_workers(workers));
            }
        }
        Ok(())
    }

    /// Close the command phase of the current sample: retire kills that are
    /// due now and check the resource request matches the live workers.
    pub fn finish_commands(&mut self) -> Result<(), RuntimeError> {
        self.expire()?;
        let live = self.live_workers();
        if live != self.requested_workers {
            return Err(RuntimeError::ResourceDrift { requested: self.requested_workers, live, n: self.n });
        }
        Ok(())
    }

    /// Feed `u` to every live worker.
    pub fn step(&mut self, u: f64) -> Result<StepOutput, RuntimeError> {
        let live: Vec<FilterId> = self.workers.values().filter(|w| w.status.is_live()).map(|w| w.filter).collect();
        let ys = self.pool.step(self.n, u, &live)?;
        let mut primary = None;
        let mut standby = None;
        for (&id, y) in live.iter().zip(ys) {
            if self.workers[&id].status == WorkerStatus::Primary {
                primary = Some((id, y));
            } else {
                standby = Some((id, y));
            }
        }
        let primary = primary.ok_or(RuntimeError::NoPrimary(self.n))?;
        Ok(StepOutput { primary, standby })
    }

    /// Retire everything at end of run. Returns the forced kills, standby
    /// workers first.
    pub fn shutdown(&mut self) -> Result<Vec<LifecycleCommand>, RuntimeError> {
        let n = self.n;
        let mut live: Vec<WorkerHandle> = self.workers.values().filter(|w| w.status.is_live()).copied().collect();
        live.sort_by_key(|w| w.status == WorkerStatus::Primary);
        let mut cmds = Vec::new();
        for w in live {
            self.retire(w.filter)?;
            cmds.push(LifecycleCommand { n, kind: CommandKind::KillThread { target: w.filter, deadline: n } });
        }
        if !cmds.is_empty() {
            cmds.push(LifecycleCommand { n, kind: CommandKind::ScaleResources(0) });
            self.requested_workers = 0;
            self.backend.apply(&ResourceModel::for_workers(0));
        }
        Ok(cmds)
    }

    pub fn leaked_workers(&self) -> usize {
        self.workers.values().filter(|w| w.status.is_live()).count()
    }
}

fn validate(filters: &FilterPair, signals: &Signals, length: usize) -> Result<(), RuntimeError> {
    if length == 0 {
        return Err(RuntimeError::ConfigInvalid("run length must be at least 1".into()));
    }
    if filters[0].id() == filters[1].id() {
        return Err(RuntimeError::ConfigInvalid(format!("both filters have id {}", filters[0].id())));
    }
    for (name, v) in [("u", &signals.u), ("load", &signals.load), ("g", &signals.g)] {
        if v.len() < length {
            return Err(RuntimeError::ConfigInvalid(format!("signal `{name}` has {} samples, need {length}", v.len())));
        }
    }
    Ok(())
}

/// Drive a full run on the given pool.
pub fn execute<P: WorkerPool>(
    pool: P,
    filters: &FilterPair,
    signals: &Signals,
    cfg: &PredictorConfig,
    length: usize,
) -> Result<(SampleTrace, RuntimeStats), RuntimeError> {
    validate(filters, signals, length)?;
    let ids = [filters[0].id(), filters[1].id()];
    let initial = initial_slot(&signals.g[..length]);
    let mut supervisor = SupervisorState::new(ids, initial);
    let mut runtime = Runtime::new(filters, pool);
    let mut sig = SwitchSignal::new();
    let mut records = Vec::with_capacity(length);

    for n in 0..length {
        let n64 = n as u64;
        runtime.begin_sample(n64)?;
        sig.push(signals.g[n]);

        let mut events = Vec::new();
        if n == 0 {
            let first = supervisor.primary_id();
            for kind in
                [CommandKind::ScaleResources(1), CommandKind::RunThread(first), CommandKind::ActivateThread(first)]
            {
                events.push(LifecycleCommand { n: 0, kind });
            }
        }
        let (next, cmds) = supervise(&supervisor, &sig, cfg);
        events.extend(cmds);
        for cmd in &events {
            runtime.apply_command(cmd)?;
        }
        runtime.finish_commands()?;
        supervisor = next;
        if runtime.primary() != Some(supervisor.primary_id()) {
            return Err(RuntimeError::PrimaryDesync {
                expected: supervisor.primary_id(),
                actual: runtime.primary(),
                n: n64,
            });
        }

        let cores = runtime.resource_level().active_cores;
        let out = runtime.step(signals.u[n])?;
        records.push(SampleRecord {
            n: n64,
            u: signals.u[n],
            load: signals.load[n],
            g: signals.g[n],
            node: supervisor.node,
            primary_id: out.primary.0,
            y_primary: out.primary.1,
            y_spec: out.standby.map(|(_, y)| y),
            cores,
            events,
        });
    }

    let forced = runtime.shutdown()?;
    if let Some(last) = records.last_mut() {
        last.events.extend(forced);
    }
    let mut stats = runtime.stats().clone();
    stats.leaked = runtime.leaked_workers();
    Ok((SampleTrace { meta: TraceMeta::default(), records }, stats))
}

/// Single-threaded deterministic execution.
pub fn run_lockstep(
    filters: &FilterPair,
    signals: &Signals,
    cfg: &PredictorConfig,
    length: usize,
) -> Result<SampleTrace, RuntimeError> {
    execute(LockstepPool::default(), filters, signals, cfg, length).map(|(trace, _)| trace)
}

/// One OS thread per worker, synchronized once per sample.
pub fn run_concurrent(
    filters: &FilterPair,
    signals: &Signals,
    cfg: &PredictorConfig,
    length: usize,
) -> Result<SampleTrace, RuntimeError> {
    execute(ThreadPool::default(), filters, signals, cfg, length).map(|(trace, _)| trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::design_cheby1_lowpass;

    fn pair() -> FilterPair {
        [
            design_cheby1_lowpass(FilterId(1), 3, 1.0, 0.043).unwrap(),
            design_cheby1_lowpass(FilterId(2), 2, 1.0, 0.0195).unwrap(),
        ]
    }

    fn cmd(n: u64, kind: CommandKind) -> LifecycleCommand {
        LifecycleCommand { n, kind }
    }

    fn started() -> Runtime<LockstepPool> {
        let mut rt = Runtime::new(&pair(), LockstepPool::default());
        rt.begin_sample(0).unwrap();
        for kind in [
            CommandKind::ScaleResources(1),
            CommandKind::RunThread(FilterId(1)),
            CommandKind::ActivateThread(FilterId(1)),
        ] {
            rt.apply_command(&cmd(0, kind)).unwrap();
        }
        rt.finish_commands().unwrap();
        rt
    }

    #[test]
    fn spawn_adds_a_core() {
        let mut rt = started();
        assert_eq!(rt.resource_level().active_cores, 2);
        rt.begin_sample(100).unwrap();
        rt.apply_command(&cmd(100, CommandKind::ScaleResources(2))).unwrap();
        rt.apply_command(&cmd(100, CommandKind::RunThread(FilterId(2)))).unwrap();
        rt.finish_commands().unwrap();
        let w = rt.worker(FilterId(2)).unwrap();
        assert_eq!((w.status, w.spawned_at), (WorkerStatus::Speculative, 100));
        assert_eq!(rt.pool().state(FilterId(2)).unwrap().values(), &[0.0, 0.0]);
        assert_eq!(rt.resource_level().active_cores, 3);
        assert_eq!(rt.resource_level().frequency_level, FrequencyLevel::High);
    }

    #[test]
    fn activate_swaps_roles_and_kill_expires() {
        let mut rt = started();
        rt.begin_sample(1).unwrap();
        rt.apply_command(&cmd(1, CommandKind::ScaleResources(2))).unwrap();
        rt.apply_command(&cmd(1, CommandKind::RunThread(FilterId(2)))).unwrap();
        rt.finish_commands().unwrap();
        rt.step(1.0).unwrap();

        rt.begin_sample(2).unwrap();
        rt.apply_command(&cmd(2, CommandKind::ActivateThread(FilterId(2)))).unwrap();
        rt.apply_command(&cmd(2, CommandKind::KillThread { target: FilterId(1), deadline: 4 })).unwrap();
        rt.finish_commands().unwrap();
        assert_eq!(rt.worker(FilterId(2)).unwrap().status, WorkerStatus::Primary);
        assert_eq!(rt.worker(FilterId(1)).unwrap().status, WorkerStatus::Doomed { deadline: 4 });
        let out = rt.step(1.0).unwrap();
        assert_eq!(out.primary.0, FilterId(2));
        assert_eq!(out.standby.unwrap().0, FilterId(1));

        rt.begin_sample(3).unwrap();
        rt.finish_commands().unwrap();
        rt.begin_sample(4).unwrap();
        assert_eq!(rt.worker(FilterId(1)).unwrap().status, WorkerStatus::Dead);
        rt.apply_command(&cmd(4, CommandKind::ScaleResources(1))).unwrap();
        rt.finish_commands().unwrap();
        assert_eq!(rt.resource_level().active_cores, 2);
    }

    #[test]
    fn illegal_transitions_are_rejected() {
        let mut rt = started();
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::CancelKill(FilterId(2)))),
            Err(RuntimeError::NoSuchWorker(FilterId(2)))
        ));
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::ActivateThread(FilterId(1)))),
            Err(RuntimeError::IllegalTransition { status: WorkerStatus::Primary, .. })
        ));
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::RunThread(FilterId(1)))),
            Err(RuntimeError::IllegalTransition { .. })
        ));
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::KillThread { target: FilterId(1), deadline: 3 })),
            Err(RuntimeError::IllegalTransition { status: WorkerStatus::Primary, .. })
        ));
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::RunThread(FilterId(9)))),
            Err(RuntimeError::NoSuchWorker(FilterId(9)))
        ));

        rt.apply_command(&cmd(0, CommandKind::RunThread(FilterId(2)))).unwrap();
        rt.apply_command(&cmd(0, CommandKind::KillThread { target: FilterId(2), deadline: 0 })).unwrap();
        rt.apply_command(&cmd(0, CommandKind::ScaleResources(1))).unwrap();
        rt.finish_commands().unwrap();
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::CancelKill(FilterId(2)))),
            Err(RuntimeError::IllegalTransition { status: WorkerStatus::Dead, .. })
        ));
        assert!(matches!(
            rt.apply_command(&cmd(0, CommandKind::ActivateThread(FilterId(2)))),
            Err(RuntimeError::IllegalTransition { status: WorkerStatus::Dead, .. })
        ));
    }

    #[test]
    fn resource_request_must_match_live_workers() {
        let mut rt = started();
        rt.begin_sample(1).unwrap();
        rt.apply_command(&cmd(1, CommandKind::RunThread(FilterId(2)))).unwrap();
        assert!(matches!(rt.finish_commands(), Err(RuntimeError::ResourceDrift { requested: 1, live: 2, n: 1 })));
    }

    #[test]
    fn backend_sees_every_scale_request() {
        use std::sync::Mutex;
        struct Recorder(Arc<Mutex<Vec<u32>>>);
        impl ResourceBackend for Recorder {
            fn apply(&mut self, model: &ResourceModel) {
                self.0.lock().unwrap().push(model.active_cores);
            }
        }
        let seen = Arc::new(Mutex::new(Vec::new()));
        let mut rt = Runtime::new(&pair(), LockstepPool::default()).with_backend(Box::new(Recorder(seen.clone())));
        rt.begin_sample(0).unwrap();
        rt.apply_command(&cmd(0, CommandKind::ScaleResources(1))).unwrap();
        rt.apply_command(&cmd(0, CommandKind::ScaleResources(2))).unwrap();
        assert_eq!(*seen.lock().unwrap(), vec![2, 3]);
    }

    #[test]
    fn rejects_bad_setups() {
        let f = pair();
        let sig = Signals { u: vec![0.0; 5], load: vec![0.0; 5], g: vec![1.0; 5] };
        assert!(matches!(run_lockstep(&f, &sig, &PredictorConfig::cold(), 0), Err(RuntimeError::ConfigInvalid(_))));
        assert!(matches!(run_lockstep(&f, &sig, &PredictorConfig::cold(), 6), Err(RuntimeError::ConfigInvalid(_))));
        let same = [f[0].clone(), f[0].clone()];
        assert!(matches!(run_lockstep(&same, &sig, &PredictorConfig::cold(), 5), Err(RuntimeError::ConfigInvalid(_))));
    }

    #[test]
    fn benchmark_keeps_both_filters_running() {
        let f = pair();
        let len = 200;
        let sig = Signals {
            u: (0..len).map(|k| (k as f64 * 0.3).sin()).collect(),
            load: vec![0.0; len],
            g: (0..len).map(|k| if (k / 7) % 2 == 0 { 0.5 } else { -0.5 }).collect(),
        };
        let (trace, stats) = execute(LockstepPool::default(), &f, &sig, &PredictorConfig::always_on(), len).unwrap();
        assert!(trace.records.iter().all(|r| r.y_spec.is_some() && r.cores == 3));
        assert_eq!(stats.spawns, 2);
        assert!(trace.switch_instants().len() > 20);
    }

    #[test]
    fn shutdown_retires_everything() {
        let f = pair();
        let len = 50;
        let sig =
            Signals { u: (0..len).map(|k| (k as f64 * 0.3).sin()).collect(), load: vec![0.0; len], g: vec![1.0; len] };
        let (trace, stats) = execute(LockstepPool::default(), &f, &sig, &PredictorConfig::always_on(), len).unwrap();
        let last = trace.records.last().unwrap();
        let names: Vec<String> = last.events.iter().map(|c| c.to_string()).collect();
        assert_eq!(names, vec!["KILL_THREAD(2@49)", "KILL_THREAD(1@49)", "SCALE_RESOURCES(0)"]);
        assert_eq!(stats.spawns, stats.retired);
    }
}
