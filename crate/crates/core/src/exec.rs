//! Bounded fan-out and in-flight throttling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;

/// Counting semaphore shared by providers to cap concurrent remote calls.
#[derive(Debug)]
pub struct InflightLimit {
    cap: usize,
    in_use: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limit: &'a InflightLimit,
}

impl InflightLimit {
    pub fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_use.lock().expect("limit lock");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("limit lock");
        }
        *n += 1;
        Permit { limit: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limit.in_use.lock().expect("limit lock");
        *n -= 1;
        self.limit.freed.notify_one();
    }
}

/// Apply `f` to every item with at most `cap` concurrent workers. Results
/// come back in input order regardless of scheduling.
pub fn fan_out<T, R, F>(cap: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = cap.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("slot lock")
                .expect("every slot filled")
        })
        .collect()
}
