use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::RuntimeError;
use crate::filter::{DigitalFilter, FilterId, FilterState};

/// Where worker filter states live and how a sample reaches them.
pub trait WorkerPool {
    /// Start a worker with zero state. Returns the measured bring-up time if
    /// the pool measures it.
    fn spawn(&mut self, filter: Arc<DigitalFilter>) -> Result<Option<Duration>, RuntimeError>;

    fn retire(&mut self, id: FilterId) -> Result<(), RuntimeError>;

    /// Step the listed workers on input `u` for sample `n`; outputs are in
    /// the order of `ids`.
    fn step(&mut self, n: u64, u: f64, ids: &[FilterId]) -> Result<Vec<f64>, RuntimeError>;
}

/// All filter states stepped on the calling thread.
#[derive(Debug, Default)]
pub struct LockstepPool {
    workers: BTreeMap<FilterId, (Arc<DigitalFilter>, FilterState)>,
}

impl LockstepPool {
    pub fn state(&self, id: FilterId) -> Option<&FilterState> {
        self.workers.get(&id).map(|(_, s)| s)
    }
}

impl WorkerPool for LockstepPool {
    fn spawn(&mut self, filter: Arc<DigitalFilter>) -> Result<Option<Duration>, RuntimeError> {
        let state = filter.new_state();
        self.workers.insert(filter.id(), (filter, state));
        Ok(None)
    }

    fn retire(&mut self, id: FilterId) -> Result<(), RuntimeError> {
        self.workers.remove(&id).map(|_| ()).ok_or(RuntimeError::NoSuchWorker(id))
    }

    fn step(&mut self, _n: u64, u: f64, ids: &[FilterId]) -> Result<Vec<f64>, RuntimeError> {
        ids.iter()
            .map(|id| {
                let (filter, state) = self.workers.get_mut(id).ok_or(RuntimeError::NoSuchWorker(*id))?;
                Ok(filter.step(state, u)?)
            })
            .collect()
    }
}

enum Request {
    Sample {
        n: u64,
        u: f64,
    },
    #[cfg(test)]
    Poison,
    Stop,
}

enum Reply {
    Ready,
    Output { n: u64, y: f64 },
}

struct WorkerThread {
    tx: Sender<Request>,
    rx: Receiver<Reply>,
    join: Option<JoinHandle<()>>,
}

impl WorkerThread {
    fn stop(&mut self) -> thread::Result<()> {
        let _ = self.tx.send(Request::Stop);
        self.join.take().map_or(Ok(()), JoinHandle::join)
    }
}

fn worker_loop(filter: Arc<DigitalFilter>, rx: Receiver<Request>, tx: Sender<Reply>) {
    let mut state = filter.new_state();
    if tx.send(Reply::Ready).is_err() {
        return;
    }
    while let Ok(req) = rx.recv() {
        match req {
            Request::Sample { n, u } => {
                let y = filter.step(&mut state, u).expect("worker owns the state of its own filter");
                if tx.send(Reply::Output { n, y }).is_err() {
                    return;
                }
            }
            #[cfg(test)]
            Request::Poison => panic!("poisoned worker"),
            Request::Stop => return,
        }
    }
}

/// One OS thread per worker. Each sample the manager sends the input to
/// every live worker and blocks until all of them have replied, so no worker
/// runs ahead of the manager.
#[derive(Default)]
pub struct ThreadPool {
    workers: BTreeMap<FilterId, WorkerThread>,
}

impl ThreadPool {
    pub fn running_threads(&self) -> usize {
        self.workers.len()
    }

    #[cfg(test)]
    fn poison(&mut self, id: FilterId) {
        let _ = self.workers[&id].tx.send(Request::Poison);
    }
}

impl WorkerPool for ThreadPool {
    fn spawn(&mut self, filter: Arc<DigitalFilter>) -> Result<Option<Duration>, RuntimeError> {
        let id = filter.id();
        let started = Instant::now();
        let (req_tx, req_rx) = mpsc::channel();
        let (rep_tx, rep_rx) = mpsc::channel();
        let join = thread::Builder::new()
            .name(format!("filter-{id}"))
            .spawn(move || worker_loop(filter, req_rx, rep_tx))
            .map_err(|_| RuntimeError::WorkerPanicked(id))?;
        match rep_rx.recv() {
            Ok(Reply::Ready) => {}
            _ => return Err(RuntimeError::WorkerPanicked(id)),
        }
        let latency = started.elapsed();
        if let Some(mut old) = self.workers.insert(id, WorkerThread { tx: req_tx, rx: rep_rx, join: Some(join) }) {
            old.stop().map_err(|_| RuntimeError::WorkerPanicked(id))?;
        }
        Ok(Some(latency))
    }

    fn retire(&mut self, id: FilterId) -> Result<(), RuntimeError> {
        let mut w = self.workers.remove(&id).ok_or(RuntimeError::NoSuchWorker(id))?;
        w.stop().map_err(|_| RuntimeError::WorkerPanicked(id))
    }

    fn step(&mut self, n: u64, u: f64, ids: &[FilterId]) -> Result<Vec<f64>, RuntimeError> {
        for id in ids {
            let w = self.workers.get(id).ok_or(RuntimeError::NoSuchWorker(*id))?;
            w.tx.send(Request::Sample { n, u }).map_err(|_| RuntimeError::WorkerPanicked(*id))?;
        }
        ids.iter()
            .map(|id| match self.workers[id].rx.recv() {
                Ok(Reply::Output { n: got, y }) if got == n => Ok(y),
                _ => Err(RuntimeError::WorkerPanicked(*id)),
            })
            .collect()
    }
}

impl Drop for ThreadPool {
    fn drop(&mut self) {
        for (_, mut w) in std::mem::take(&mut self.workers) {
            let _ = w.stop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::design_cheby1_lowpass;

    #[test]
    fn thread_pool_matches_lockstep_pool() {
        let a = Arc::new(design_cheby1_lowpass(FilterId(1), 3, 1.0, 0.1).unwrap());
        let b = Arc::new(design_cheby1_lowpass(FilterId(2), 2, 1.0, 0.2).unwrap());
        let mut threads = ThreadPool::default();
        let mut local = LockstepPool::default();
        for f in [&a, &b] {
            assert!(threads.spawn(f.clone()).unwrap().is_some());
            local.spawn(f.clone()).unwrap();
        }
        let ids = [FilterId(1), FilterId(2)];
        for n in 0..200u64 {
            let u = (n as f64 * 0.37).sin();
            let x = threads.step(n, u, &ids).unwrap();
            let y = local.step(n, u, &ids).unwrap();
            assert_eq!(
                x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                y.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        threads.retire(FilterId(1)).unwrap();
        assert_eq!(threads.running_threads(), 1);
        assert!(matches!(threads.retire(FilterId(1)), Err(RuntimeError::NoSuchWorker(_))));
    }

    #[test]
    fn panicking_worker_surfaces_as_error() {
        let a = Arc::new(design_cheby1_lowpass(FilterId(1), 3, 1.0, 0.1).unwrap());
        let mut pool = ThreadPool::default();
        pool.spawn(a).unwrap();
        pool.poison(FilterId(1));
        assert!(matches!(pool.step(0, 1.0, &[FilterId(1)]), Err(RuntimeError::WorkerPanicked(FilterId(1)))));
        assert!(matches!(pool.retire(FilterId(1)), Err(RuntimeError::WorkerPanicked(FilterId(1)))));
    }
}
