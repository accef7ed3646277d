//! Exact ratios presented as two-decimal percentages.

use std::fmt;

use serde::{Serialize, Serializer};

/// `numerator / denominator`, kept as integers until presentation.
///
/// A zero denominator is reported as 0.00 with [`Percent::undefined`] set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Percent {
    pub numerator: u64,
    pub denominator: u64,
}

impl Percent {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Percent {
            numerator,
            denominator,
        }
    }

    pub fn undefined(&self) -> bool {
        self.denominator == 0
    }

    /// The percentage in hundredths, rounded half-up.
    pub fn hundredths(&self) -> u64 {
        if self.denominator == 0 {
            return 0;
        }
        let num = self.numerator as u128 * 10_000;
        let den = self.denominator as u128;
        ((2 * num + den) / (2 * den)) as u64
    }

    pub fn as_f64(&self) -> f64 {
        self.hundredths() as f64 / 100.0
    }

    pub fn ratio(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        let s = format!("{}.{:02}", h / 100, h % 100);
        f.pad(&s)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_half_up() {
        assert_eq!(Percent::new(3, 4).to_string(), "75.00");
        assert_eq!(Percent::new(190, 276).to_string(), "68.84");
        assert_eq!(Percent::new(1, 3).to_string(), "33.33");
        assert_eq!(Percent::new(2, 3).to_string(), "66.67");
        // 1/8 = 12.5% exactly; 1/1600 = 0.0625% -> 0.06; 1/800 = 0.125% -> 0.13
        assert_eq!(Percent::new(1, 8).to_string(), "12.50");
        assert_eq!(Percent::new(1, 1600).to_string(), "0.06");
        assert_eq!(Percent::new(1, 800).to_string(), "0.13");
        assert_eq!(Percent::new(5, 5).to_string(), "100.00");
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let p = Percent::new(0, 0);
        assert!(p.undefined());
        assert_eq!(p.to_string(), "0.00");
    }

    #[test]
    fn padding() {
        assert_eq!(format!("{:>7}", Percent::new(1, 2)), "  50.00");
    }
}
