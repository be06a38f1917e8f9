//! Trailing-window statistics and interval extraction for observability flags.

use std::collections::VecDeque;

/// Root mean square of the last `len` samples.
#[derive(Clone, Debug)]
pub struct TrailingRms {
    len: usize,
    buf: VecDeque<f64>,
}

impl TrailingRms {
    pub fn new(len: usize) -> Self {
        let len = len.max(1);
        Self { len, buf: VecDeque::with_capacity(len) }
    }

    pub fn push(&mut self, value: f64) -> f64 {
        if self.buf.len() == self.len {
            self.buf.pop_front();
        }
        self.buf.push_back(value);
        // Summed afresh so the result does not depend on history beyond the window.
        (self.buf.iter().map(|v| v * v).sum::<f64>() / self.buf.len() as f64).sqrt()
    }
}

/// Sorted, disjoint `[first, last]` time spans where `mask` holds.
pub fn intervals(times: &[f64], mask: &[bool]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (k, (&t, &m)) in times.iter().zip(mask).enumerate() {
        match (open, m) {
            (None, true) => open = Some(t),
            (Some(start), false) => {
                out.push((start, times[k - 1]));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(start), Some(&last)) = (open, times.last()) {
        out.push((start, last));
    }
    out
}
