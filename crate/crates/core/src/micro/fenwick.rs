//! Binary indexed tree over nonnegative weights with O(log n) update,
//! prefix search and swap-removal.

#[derive(Debug, Clone, Default)]
pub struct Fenwick {
    values: Vec<f64>,
    tree: Vec<f64>,
    len: usize,
}

impl Fenwick {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut f = Self { values: Vec::new(), tree: Vec::new(), len: 0 };
        f.rebuild_from(values);
        f
    }

    fn rebuild_from(&mut self, values: &[f64]) {
        let cap = values.len().next_power_of_two().max(16);
        self.values = vec![0.0; cap];
        self.values[..values.len()].copy_from_slice(values);
        self.len = values.len();
        self.tree = self.values.clone();
        for i in 0..cap {
            let parent = i | (i + 1);
            if parent < cap {
                let v = self.tree[i];
                self.tree[parent] += v;
            }
        }
    }

    /// Recomputes the internal sums from the stored weights, discarding
    /// accumulated rounding.
    pub fn rebuild(&mut self) {
        let vals = self.values[..self.len].to_vec();
        self.rebuild_from(&vals);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    fn add(&mut self, mut i: usize, delta: f64) {
        while i < self.tree.len() {
            self.tree[i] += delta;
            i |= i + 1;
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.len && v >= 0.0);
        let delta = v - self.values[i];
        self.values[i] = v;
        self.add(i, delta);
    }

    pub fn push(&mut self, v: f64) {
        if self.len == self.values.len() {
            let mut vals = self.values[..self.len].to_vec();
            vals.push(v);
            self.rebuild_from(&vals);
            return;
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    /// Moves the last weight into slot `i` and shrinks by one, mirroring
    /// `Vec::swap_remove`.
    pub fn swap_remove(&mut self, i: usize) {
        let last = self.len - 1;
        if i != last {
            let v = self.values[last];
            self.set(i, v);
        }
        self.set(last, 0.0);
        self.len -= 1;
    }

    /// Sum of all weights.
    pub fn total(&self) -> f64 {
        self.prefix(self.tree.len())
    }

    /// Sum of the first `n` weights.
    pub fn prefix(&self, n: usize) -> f64 {
        let mut s = 0.0;
        let mut i = n;
        while i > 0 {
            s += self.tree[i - 1];
            i &= i - 1;
        }
        s
    }

    /// Index `i` with `prefix(i) ≤ u < prefix(i + 1)`, restricted to slots
    /// with positive weight.
    pub fn find(&self, u: f64) -> usize {
        let cap = self.tree.len();
        let mut pos = 0usize;
        let mut rem = u;
        let mut step = cap;
        while step > 0 {
            let next = pos + step;
            if next <= cap && self.tree[next - 1] <= rem {
                rem -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        let mut idx = pos.min(self.len.saturating_sub(1));
        // Rounding can land on an empty slot at the end; step back.
        while idx > 0 && self.values[idx] <= 0.0 {
            idx -= 1;
        }
        idx
    }
}
