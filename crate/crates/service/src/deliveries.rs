//! Bounded record of handled delivery ids, persisted as one id per line.

use std::collections::{HashSet, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const DEFAULT_CAPACITY: usize = 10_000;

struct Inner {
    done: HashSet<String>,
    order: VecDeque<String>,
    in_flight: HashSet<String>,
    log: Option<File>,
    lines_in_log: usize,
}

/// Remembers the last `capacity` completed deliveries. A delivery is first
/// claimed, then either completed (persisted) or released so a redelivery
/// can try again.
pub struct DeliveryStore {
    inner: Mutex<Inner>,
    path: Option<PathBuf>,
    capacity: usize,
}

impl DeliveryStore {
    pub fn in_memory(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(Inner {
                done: HashSet::new(),
                order: VecDeque::new(),
                in_flight: HashSet::new(),
                log: None,
                lines_in_log: 0,
            }),
            path: None,
            capacity: capacity.max(1),
        }
    }

    /// Loads ids from `path` (if it exists) and appends new ones to it.
    pub fn open(path: impl AsRef<Path>, capacity: usize) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let store = Self::in_memory(capacity);
        {
            let mut inner = store.inner.lock().unwrap();
            if path.exists() {
                for line in BufReader::new(File::open(&path)?).lines() {
                    let id = line?;
                    let id = id.trim();
                    if !id.is_empty() {
                        inner.lines_in_log += 1;
                        store.remember(&mut inner, id.to_string());
                    }
                }
            } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            inner.log = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        }
        Ok(Self {
            path: Some(path),
            ..store
        })
    }

    fn remember(&self, inner: &mut Inner, id: String) {
        if inner.done.insert(id.clone()) {
            inner.order.push_back(id);
        }
        while inner.order.len() > self.capacity {
            if let Some(old) = inner.order.pop_front() {
                inner.done.remove(&old);
            }
        }
    }

    /// True if the id was neither completed nor in flight; it is now in flight.
    pub fn claim(&self, id: &str) -> bool {
        let mut inner = self.inner.lock().unwrap();
        if inner.done.contains(id) || inner.in_flight.contains(id) {
            return false;
        }
        inner.in_flight.insert(id.to_string());
        true
    }

    pub fn release(&self, id: &str) {
        self.inner.lock().unwrap().in_flight.remove(id);
    }

    pub fn complete(&self, id: &str) -> io::Result<()> {
        let mut inner = self.inner.lock().unwrap();
        inner.in_flight.remove(id);
        self.remember(&mut inner, id.to_string());
        if let Some(log) = inner.log.as_mut() {
            writeln!(log, "{id}")?;
            log.flush()?;
            inner.lines_in_log += 1;
        }
        if inner.lines_in_log > 2 * self.capacity {
            self.compact(&mut inner)?;
        }
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.inner.lock().unwrap().done.contains(id)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rewrites the log with only the ids still remembered.
    fn compact(&self, inner: &mut Inner) -> io::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            for id in &inner.order {
                writeln!(f, "{id}")?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        inner.log = Some(OpenOptions::new().append(true).open(path)?);
        inner.lines_in_log = inner.order.len();
        Ok(())
    }
}
