use crate::error::{Error, Result};

/// Right-continuous step function with finitely many jumps.
///
/// `eval(s)` includes the jumps at times `<= s`; `left_limit(s)` excludes a
/// jump located exactly at `s`. Values after each jump are stored, so
/// evaluation returns them bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    initial_value: f64,
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// Step function from jump sizes; values are the running sums.
    pub fn from_jumps(
        initial_value: f64,
        jump_times: Vec<f64>,
        jump_sizes: &[f64],
    ) -> Result<Self> {
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::LengthMismatch(jump_times.len(), jump_sizes.len()));
        }
        let mut acc = initial_value;
        let values = jump_sizes
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect();
        Self::from_values(initial_value, jump_times, values)
    }

    /// Step function from the value attained after each jump.
    pub fn from_values(initial_value: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::LengthMismatch(jump_times.len(), values.len()));
        }
        if jump_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite jump time".into()));
        }
        if jump_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "jump times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            initial_value,
            jump_times,
            values,
        })
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    /// Values attained at (and right after) each jump time.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jump_sizes(&self) -> Vec<f64> {
        let mut prev = self.initial_value;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    pub fn eval(&self, s: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&t| t <= s);
        if idx == 0 {
            self.initial_value
        } else {
            self.values[idx - 1]
        }
    }

    pub fn left_limit(&self, s: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&t| t < s);
        if idx == 0 {
            self.initial_value
        } else {
            self.values[idx - 1]
        }
    }

    /// `(time, value)` rows, starting with `(0, initial_value)`.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.initial_value))
            .chain(
                self.jump_times
                    .iter()
                    .copied()
                    .zip(self.values.iter().copied()),
            )
            .collect()
    }
}
