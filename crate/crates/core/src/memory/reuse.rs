//! Online reuse (stack) distance.
//!
//! Each line remembers the timestamp of its last access. A Fenwick tree over
//! timestamps holds a 1 at every live last-access time, so the distance of
//! an access is the number of marks after the line's previous timestamp.
//! When the timestamp space fills up, live timestamps are renumbered
//! `0..M` in order and the tree is rebuilt, which keeps memory at O(M) for
//! M distinct lines and the amortized cost at O(log M) per access.

use std::collections::HashMap;
use std::fmt;

use serde::{Serialize, Serializer};

/// Reuse distance of one access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReuseDistance {
    /// Distinct lines touched since the previous access to the same line.
    Finite(u64),
    /// First touch of the line.
    Cold,
}

impl ReuseDistance {
    pub fn finite(self) -> Option<u64> {
        match self {
            ReuseDistance::Finite(d) => Some(d),
            ReuseDistance::Cold => None,
        }
    }
}

impl fmt::Display for ReuseDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReuseDistance::Finite(d) => write!(f, "{d}"),
            ReuseDistance::Cold => f.write_str("cold"),
        }
    }
}

impl Serialize for ReuseDistance {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ReuseDistance::Finite(d) => s.serialize_u64(*d),
            ReuseDistance::Cold => s.serialize_none(),
        }
    }
}

struct Fenwick {
    tree: Vec<u32>,
}

impl Fenwick {
    fn with_prefix_ones(len: usize, ones: usize) -> Self {
        let mut tree = vec![0u32; len + 1];
        for slot in tree.iter_mut().skip(1).take(ones) {
            *slot = 1;
        }
        for i in 1..=len {
            let parent = i + (i & i.wrapping_neg());
            if parent <= len {
                tree[parent] += tree[i];
            }
        }
        Self { tree }
    }

    fn len(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, pos: usize, delta: i32) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add_signed(delta);
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..pos`.
    fn prefix(&self, pos: usize) -> u64 {
        let mut i = pos;
        let mut s = 0u64;
        while i > 0 {
            s += self.tree[i] as u64;
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Streaming reuse-distance tracker at a fixed line size.
pub struct ReuseTracker {
    line_shift: u32,
    last_access: HashMap<u64, usize>,
    marks: Fenwick,
    now: usize,
}

impl ReuseTracker {
    const MIN_CAPACITY: usize = 1024;

    /// `line_size_bytes` must be a power of two.
    pub fn new(line_size_bytes: u64) -> Self {
        assert!(line_size_bytes.is_power_of_two(), "line size must be a power of two");
        Self {
            line_shift: line_size_bytes.trailing_zeros(),
            last_access: HashMap::new(),
            marks: Fenwick::with_prefix_ones(Self::MIN_CAPACITY, 0),
            now: 0,
        }
    }

    pub fn distinct_lines(&self) -> usize {
        self.last_access.len()
    }

    pub fn access(&mut self, address: u64) -> ReuseDistance {
        if self.now == self.marks.len() {
            self.compact();
        }
        let line = address >> self.line_shift;
        let now = self.now;
        self.now += 1;
        let previous = self.last_access.insert(line, now);
        self.marks.add(now, 1);
        match previous {
            None => ReuseDistance::Cold,
            Some(t) => {
                let later = self.marks.prefix(now) - self.marks.prefix(t + 1);
                self.marks.add(t, -1);
                ReuseDistance::Finite(later)
            }
        }
    }

    fn compact(&mut self) {
        let mut live: Vec<(usize, u64)> = self.last_access.iter().map(|(&l, &t)| (t, l)).collect();
        live.sort_unstable();
        for (rank, &(_, line)) in live.iter().enumerate() {
            self.last_access.insert(line, rank);
        }
        let m = live.len();
        let capacity = (2 * m).max(Self::MIN_CAPACITY);
        self.marks = Fenwick::with_prefix_ones(capacity, m);
        self.now = m;
    }
}

/// Per-access reuse distances at `line_size_bytes`.
pub fn reuse_distances(addresses: &[u64], line_size_bytes: u64) -> Vec<ReuseDistance> {
    let mut tracker = ReuseTracker::new(line_size_bytes);
    addresses.iter().map(|&a| tracker.access(a)).collect()
}
