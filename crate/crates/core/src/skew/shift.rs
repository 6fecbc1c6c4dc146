//! Eventually periodic points of the full shift.

use std::fmt;

use serde::Serialize;

/// One-sided sequence `pre` followed by `period` repeated forever, kept in a
/// canonical form so structural equality is sequence equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EventuallyPeriodic {
    pre: Vec<usize>,
    period: Vec<usize>,
}

impl EventuallyPeriodic {
    pub fn new(pre: Vec<usize>, period: Vec<usize>) -> Self {
        assert!(!period.is_empty(), "period must be non-empty");
        let mut s = EventuallyPeriodic { pre, period };
        s.normalize();
        s
    }

    pub fn constant(symbol: usize) -> Self {
        EventuallyPeriodic::new(Vec::new(), vec![symbol])
    }

    pub fn pre(&self) -> &[usize] {
        &self.pre
    }

    pub fn period(&self) -> &[usize] {
        &self.period
    }

    fn normalize(&mut self) {
        let p = self.period.len();
        for q in 1..=p {
            if p % q == 0 && (q..p).all(|i| self.period[i] == self.period[i - q]) {
                self.period.truncate(q);
                break;
            }
        }
        while let Some(&last) = self.pre.last() {
            if last != *self.period.last().unwrap() {
                break;
            }
            self.pre.pop();
            self.period.rotate_right(1);
        }
    }

    pub fn get(&self, i: usize) -> usize {
        if i < self.pre.len() {
            self.pre[i]
        } else {
            self.period[(i - self.pre.len()) % self.period.len()]
        }
    }

    pub fn push_front(&mut self, s: usize) {
        self.pre.insert(0, s);
        self.normalize();
    }

    pub fn pop_front(&mut self) -> usize {
        if self.pre.is_empty() {
            let s = self.period[0];
            self.period.rotate_left(1);
            s
        } else {
            self.pre.remove(0)
        }
    }

    /// First `n` symbols.
    pub fn prefix(&self, n: usize) -> Vec<usize> {
        (0..n).map(|i| self.get(i)).collect()
    }

    pub fn max_symbol(&self) -> usize {
        self.pre.iter().chain(&self.period).copied().max().unwrap_or(0)
    }
}

impl fmt::Display for EventuallyPeriodic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.pre.iter().map(|s| s.to_string()).collect();
        let q: Vec<String> = self.period.iter().map(|s| s.to_string()).collect();
        write!(f, "{}({})", p.join(""), q.join(""))
    }
}

/// Bi-infinite sequence: `left` holds `x_0, x_{-1}, …` and `right` holds `x_1, x_2, …`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ShiftPoint {
    pub left: EventuallyPeriodic,
    pub right: EventuallyPeriodic,
    pub d: usize,
}

impl ShiftPoint {
    pub fn new(left: EventuallyPeriodic, right: EventuallyPeriodic, d: usize) -> Self {
        assert!(left.max_symbol() < d && right.max_symbol() < d, "symbol outside alphabet");
        ShiftPoint { left, right, d }
    }

    /// The constant sequence `…sss…`.
    pub fn constant(symbol: usize, d: usize) -> Self {
        ShiftPoint::new(EventuallyPeriodic::constant(symbol), EventuallyPeriodic::constant(symbol), d)
    }

    pub fn get(&self, i: i64) -> usize {
        if i <= 0 {
            self.left.get((-i) as usize)
        } else {
            self.right.get((i - 1) as usize)
        }
    }

    /// `(τx)_i = x_{i+1}`.
    pub fn shift(&self) -> Self {
        let mut out = self.clone();
        let s = out.right.pop_front();
        out.left.push_front(s);
        out
    }

    pub fn unshift(&self) -> Self {
        let mut out = self.clone();
        let s = out.left.pop_front();
        out.right.push_front(s);
        out
    }

    pub fn shift_by(&self, n: i64) -> Self {
        let mut x = self.clone();
        for _ in 0..n.unsigned_abs() {
            x = if n > 0 { x.shift() } else { x.unshift() };
        }
        x
    }

    /// Whether `x_i = y_i` for every `i <= 0`.
    pub fn same_past(&self, other: &ShiftPoint) -> bool {
        self.left == other.left
    }

    /// Whether `x_i = y_i` for every `i >= 1`.
    pub fn same_future(&self, other: &ShiftPoint) -> bool {
        self.right == other.right
    }
}

impl fmt::Display for ShiftPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} | {}]", self.left, self.right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_is_canonical() {
        let a = EventuallyPeriodic::new(vec![1, 0, 1], vec![0, 1]);
        let b = EventuallyPeriodic::new(vec![1], vec![0, 1, 0, 1]);
        assert_eq!(a, b);
        assert_eq!(a.prefix(6), vec![1, 0, 1, 0, 1, 0]);
        assert_eq!(EventuallyPeriodic::new(vec![0, 0], vec![0]), EventuallyPeriodic::constant(0));
    }

    #[test]
    fn shift_round_trip() {
        let x = ShiftPoint::new(
            EventuallyPeriodic::new(vec![2, 1], vec![0]),
            EventuallyPeriodic::new(vec![1, 2, 2], vec![0, 1]),
            3,
        );
        assert_eq!(x.shift().get(0), x.get(1));
        assert_eq!(x.shift().get(-2), x.get(-1));
        for n in 0..12 {
            assert_eq!(x.shift_by(n).shift_by(-n), x);
            assert_eq!(x.shift_by(-n).shift_by(n), x);
        }
    }

    #[test]
    fn constant_point_is_fixed() {
        let x = ShiftPoint::constant(1, 2);
        assert_eq!(x.shift(), x);
    }
}
