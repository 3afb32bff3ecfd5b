//! Right-continuous piecewise-constant paths.

/// A right-continuous step function on `[0, ∞)`.
///
/// The path equals `initial` before the first jump time and `values[k]` on
/// `[times[k], times[k + 1])`. Counting processes, cumulative intensities,
/// likelihood ratios and cumulative hazards are all stored this way.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    initial: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn constant(initial: f64) -> Self {
        StepFunction {
            initial,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a path from jump times and post-jump values.
    ///
    /// Panics if the lengths differ or the times are not strictly increasing.
    pub fn from_parts(initial: f64, times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "times/values length mismatch");
        assert!(
            times.windows(2).all(|w| w[0] < w[1]),
            "jump times must be strictly increasing"
        );
        StepFunction {
            initial,
            times,
            values,
        }
    }

    /// Counting process jumping by one at each listed time (ties add up).
    pub fn counting(jump_times: &[f64]) -> Self {
        let mut sorted = jump_times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut path = StepFunction::constant(0.0);
        let mut count = 0.0;
        for t in sorted {
            count += 1.0;
            path.set(t, count);
        }
        path
    }

    /// Appends (or overwrites, for an equal time) the value from `t` onwards.
    ///
    /// Panics if `t` precedes the last jump time.
    pub fn set(&mut self, t: f64, value: f64) {
        match self.times.last() {
            Some(&last) if t < last => panic!("step times must be appended in order"),
            Some(&last) if t == last => {
                *self.values.last_mut().unwrap() = value;
            }
            _ => {
                self.times.push(t);
                self.values.push(value);
            }
        }
    }

    /// Adds `delta` to the path from `t` onwards.
    pub fn add_jump(&mut self, t: f64, delta: f64) {
        let current = self.last_value();
        self.set(t, current + delta);
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Value at `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t);
        self.value_before_index(idx)
    }

    /// Left limit at `t`: the value on the open interval just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s < t);
        self.value_before_index(idx)
    }

    fn value_before_index(&self, idx: usize) -> f64 {
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Iterator over `(time, jump size)` pairs.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().enumerate().map(move |(k, &t)| {
            let before = if k == 0 { self.initial } else { self.values[k - 1] };
            (t, self.values[k] - before)
        })
    }

    /// Number of jump times in `[0, t]`.
    pub fn jumps_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Multiplies every value (including the initial one) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        StepFunction {
            initial: self.initial * factor,
            times: self.times.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}
