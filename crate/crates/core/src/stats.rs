//! Order-stable accumulation helpers.

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if libm::fabs(self.sum) >= libm::fabs(x) {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running mean / standard error from first and second moments.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanEstimator {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MeanEstimator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanEstimator) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.mean();
        let var = (self.sum_sq.value() - n * mean * mean) / (n - 1.0);
        var.max(0.0)
    }

    /// Standard error of the mean, `s / sqrt(n)`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        libm::sqrt(self.variance() / self.count as f64)
    }
}
