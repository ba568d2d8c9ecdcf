//! Index bookkeeping for symmetric derivative tensors in low dimension.
//!
//! Partial derivatives up to third order are stored in canonical sorted-index
//! slots: order-2 entries under (i <= j), order-3 under (i <= j <= l). Reads
//! with unsorted indices resolve to the canonical slot, so symmetry of stored
//! jets is exact by construction.

/// Number of distinct sorted pairs (i <= j) in dimension m.
pub fn sym2_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Number of distinct sorted triples (i <= j <= l) in dimension m.
pub fn sym3_len(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

/// Slot of the sorted pair {i, j}. Layout: (0,0),(0,1),...,(0,m-1),(1,1),...
pub fn sym2_idx(m: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * m - a * (a + 1) / 2 + b
}

/// Slot of the sorted triple {i, j, l}, ordered lexicographically.
pub fn sym3_idx(m: usize, i: usize, j: usize, l: usize) -> usize {
    let mut v = [i, j, l];
    v.sort_unstable();
    let [a, b, c] = v;
    // offset of leading index a: triples with all entries >= a removed from total
    let tail = |d: usize| sym3_len(m - d);
    let off_a = sym3_len(m) - tail(a);
    off_a + sym2_idx(m - a, b - a, c - a)
}

/// Enumerate sorted pairs in slot order.
pub fn sym2_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(sym2_len(m));
    for i in 0..m {
        for j in i..m {
            v.push((i, j));
        }
    }
    v
}

/// Enumerate sorted triples in slot order.
pub fn sym3_triples(m: usize) -> Vec<(usize, usize, usize)> {
    let mut v = Vec::with_capacity(sym3_len(m));
    for i in 0..m {
        for j in i..m {
            for l in j..m {
                v.push((i, j, l));
            }
        }
    }
    v
}

/// Row layout of a full derivative jet (value, gradient, symmetric second and
/// third partials) for scalar functions of m variables.
#[derive(Clone, Debug)]
pub struct JetLayout {
    pub m: usize,
}

impl JetLayout {
    pub fn new(m: usize) -> Self {
        JetLayout { m }
    }

    pub fn len(&self) -> usize {
        1 + self.m + sym2_len(self.m) + sym3_len(self.m)
    }

    pub fn value(&self) -> usize {
        0
    }

    pub fn grad(&self, i: usize) -> usize {
        1 + i
    }

    pub fn hess(&self, i: usize, j: usize) -> usize {
        1 + self.m + sym2_idx(self.m, i, j)
    }

    pub fn third(&self, i: usize, j: usize, l: usize) -> usize {
        1 + self.m + sym2_len(self.m) + sym3_idx(self.m, i, j, l)
    }
}
