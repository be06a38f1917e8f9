//! Piecewise time profiles for setpoints, speeds, voltages and loads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `amplitude * sin(omega * t + phase)` with `t` the absolute time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// rad/s
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentKind {
    Constant {
        value: f64,
    },
    /// Linear from `from` at `t_start` to `to` at `t_end`.
    Ramp {
        from: f64,
        to: f64,
    },
    Sinusoids {
        offset: f64,
        terms: Vec<Sinusoid>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

impl Segment {
    fn value(&self, t: f64) -> f64 {
        match &self.kind {
            SegmentKind::Constant { value } => *value,
            SegmentKind::Ramp { from, to } => from + (to - from) * (t - self.t_start) / (self.t_end - self.t_start),
            SegmentKind::Sinusoids { offset, terms } => {
                offset + terms.iter().map(|s| s.amplitude * (s.omega * t + s.phase).sin()).sum::<f64>()
            }
        }
    }

    /// Integral of the segment from `t_start` to `t`.
    fn integral(&self, t: f64) -> f64 {
        let dt = t - self.t_start;
        match &self.kind {
            SegmentKind::Constant { value } => value * dt,
            SegmentKind::Ramp { from, to } => from * dt + 0.5 * (to - from) * dt * dt / (self.t_end - self.t_start),
            SegmentKind::Sinusoids { offset, terms } => {
                offset * dt
                    + terms
                        .iter()
                        .filter(|s| s.omega != 0.0)
                        .map(|s| {
                            s.amplitude / s.omega
                                * ((s.omega * self.t_start + s.phase).cos() - (s.omega * t + s.phase).cos())
                        })
                        .sum::<f64>()
                    + terms.iter().filter(|s| s.omega == 0.0).map(|s| s.amplitude * s.phase.sin() * dt).sum::<f64>()
            }
        }
    }

    fn has_oscillation(&self) -> bool {
        matches!(&self.kind, SegmentKind::Sinusoids { terms, .. } if terms.iter().any(|s| s.amplitude != 0.0 && s.omega != 0.0))
    }
}

/// Contiguous, non-overlapping segments covering `[t_start of first, t_end of last]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct SignalProfile {
    segments: Vec<Segment>,
}

impl TryFrom<Vec<Segment>> for SignalProfile {
    type Error = Error;

    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        Self::new(segments)
    }
}

impl From<SignalProfile> for Vec<Segment> {
    fn from(p: SignalProfile) -> Self {
        p.segments
    }
}

/// Boundary slack for times produced by accumulating steps.
const T_SLACK: f64 = 1e-9;

impl SignalProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("a profile needs at least one segment".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.t_end > s.t_start) || !s.t_start.is_finite() || !s.t_end.is_finite() {
                return Err(Error::Config(format!("segment {i} has an empty or invalid time span")));
            }
            if i > 0 && (s.t_start - segments[i - 1].t_end).abs() > T_SLACK {
                return Err(Error::Config(format!("segment {i} does not start where segment {} ends", i - 1)));
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(value: f64, t_start: f64, t_end: f64) -> Self {
        Self { segments: vec![Segment { t_start, t_end, kind: SegmentKind::Constant { value } }] }
    }

    /// Piecewise-linear profile through `(t, value)` knots.
    pub fn piecewise_linear(knots: &[(f64, f64)]) -> Result<Self> {
        let segments = knots
            .windows(2)
            .map(|w| {
                let kind = if w[0].1 == w[1].1 {
                    SegmentKind::Constant { value: w[0].1 }
                } else {
                    SegmentKind::Ramp { from: w[0].1, to: w[1].1 }
                };
                Segment { t_start: w[0].0, t_end: w[1].0, kind }
            })
            .collect();
        Self::new(segments)
    }

    /// Constant `base` on `[t_start, t_end]` with `base + amplitude sin(omega t)`
    /// inside each window.
    pub fn with_injection(
        base: f64,
        amplitude: f64,
        omega: f64,
        windows: &[(f64, f64)],
        t_start: f64,
        t_end: f64,
    ) -> Result<Self> {
        let mut segments = Vec::new();
        let mut t = t_start;
        for &(a, b) in windows {
            if a > t {
                segments.push(Segment { t_start: t, t_end: a, kind: SegmentKind::Constant { value: base } });
            }
            let terms = vec![Sinusoid { amplitude, omega, phase: 0.0 }];
            segments.push(Segment { t_start: a, t_end: b, kind: SegmentKind::Sinusoids { offset: base, terms } });
            t = b;
        }
        if t_end > t {
            segments.push(Segment { t_start: t, t_end, kind: SegmentKind::Constant { value: base } });
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.segments[0].t_start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].t_end
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start - T_SLACK && t <= end + T_SLACK) {
            return Err(Error::OutOfDomain { t, start, end });
        }
        let t = t.clamp(start, end);
        let idx = self.segments.partition_point(|s| s.t_end <= t).min(self.segments.len() - 1);
        Ok((idx, t))
    }

    /// Integral of the profile from its start to `t`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let (idx, t) = self.locate(t)?;
        let full: f64 = self.segments[..idx].iter().map(|s| s.integral(s.t_end)).sum();
        Ok(full + self.segments[idx].integral(t))
    }

    /// Time spans of segments carrying a nonzero sinusoid.
    pub fn oscillating_windows(&self) -> Vec<(f64, f64)> {
        self.segments.iter().filter(|s| s.has_oscillation()).map(|s| (s.t_start, s.t_end)).collect()
    }

    /// Maximal intervals over which the profile is held at exactly zero.
    pub fn zero_windows(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in &self.segments {
            if !matches!(s.kind, SegmentKind::Constant { value } if value == 0.0) {
                continue;
            }
            match out.last_mut() {
                Some(w) if w.1 == s.t_start => w.1 = s.t_end,
                _ => out.push((s.t_start, s.t_end)),
            }
        }
        out
    }
}

/// Value of `profile` at `t`. At a shared boundary the later segment is used.
pub fn evaluate_profile(profile: &SignalProfile, t: f64) -> Result<f64> {
    let (idx, t) = profile.locate(t)?;
    Ok(profile.segments[idx].value(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn examples() {
        let c = SignalProfile::constant(4.0, 0.0, 6.0);
        assert_eq!(evaluate_profile(&c, 3.0).unwrap(), 4.0);
        let inj = SignalProfile::with_injection(4.0, 0.5, 2.0 * PI * 1e3, &[(0.0, 1.0)], 0.0, 2.0).unwrap();
        assert_eq!(evaluate_profile(&inj, 0.0).unwrap(), 4.0);
        let r = SignalProfile::piecewise_linear(&[(0.0, 0.0), (1.5, 0.0), (2.5, 100.0), (4.0, 100.0)]).unwrap();
        assert!((evaluate_profile(&r, 2.0).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain() {
        let c = SignalProfile::constant(1.0, 0.0, 1.0);
        assert!(matches!(evaluate_profile(&c, 1.5), Err(Error::OutOfDomain { .. })));
        assert!(evaluate_profile(&c, -0.1).is_err());
    }

    #[test]
    fn rejects_gaps_and_overlaps() {
        let seg = |a, b| Segment { t_start: a, t_end: b, kind: SegmentKind::Constant { value: 0.0 } };
        assert!(SignalProfile::new(vec![seg(0.0, 1.0), seg(1.1, 2.0)]).is_err());
        assert!(SignalProfile::new(vec![seg(0.0, 1.0), seg(0.9, 2.0)]).is_err());
        assert!(SignalProfile::new(vec![seg(1.0, 1.0)]).is_err());
        assert!(SignalProfile::new(vec![]).is_err());
    }

    #[test]
    fn ramp_joins_are_continuous() {
        let r = SignalProfile::piecewise_linear(&[(0.0, 1.0), (1.0, 3.0), (2.0, -1.0)]).unwrap();
        let left = evaluate_profile(&r, 1.0 - 1e-12).unwrap();
        let right = evaluate_profile(&r, 1.0).unwrap();
        assert!((left - right).abs() < 1e-9);
    }

    #[test]
    fn integral_matches_quadrature() {
        let mut p = SignalProfile::piecewise_linear(&[(0.0, 2.0), (1.0, 2.0), (2.0, 0.0), (3.0, 0.0)]).unwrap();
        p.segments.push(Segment {
            t_start: 3.0,
            t_end: 4.0,
            kind: SegmentKind::Sinusoids {
                offset: 1.0,
                terms: vec![Sinusoid { amplitude: 0.5, omega: 7.0, phase: 0.3 }],
            },
        });
        // Trapezoid area of the linear part.
        assert!((p.integral(3.0).unwrap() - 3.0).abs() < 1e-12);
        let n = 7_000;
        let h = 0.7 / n as f64;
        let f = |t: f64| evaluate_profile(&p, t).unwrap();
        let quad: f64 = (0..n)
            .map(|k| {
                let t = 3.0 + k as f64 * h;
                h / 6.0 * (f(t) + 4.0 * f(t + h / 2.0) + f(t + h))
            })
            .sum();
        assert!((p.integral(3.7).unwrap() - 3.0 - quad).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let p = SignalProfile::with_injection(4.0, 0.5, 10.0, &[(1.0, 1.5)], 0.0, 2.0).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: SignalProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.oscillating_windows(), vec![(1.0, 1.5)]);
        let bad = r#"[{"t_start":0,"t_end":1,"kind":"constant","value":1},{"t_start":2,"t_end":3,"kind":"constant","value":1}]"#;
        assert!(serde_json::from_str::<SignalProfile>(bad).is_err());
    }

    #[test]
    fn zero_windows_merge_adjacent_segments() {
        let p = SignalProfile::piecewise_linear(&[(0.0, 5.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 1.0)]).unwrap();
        assert_eq!(p.zero_windows(), vec![(1.0, 3.0)]);
        assert!(SignalProfile::constant(1.0, 0.0, 2.0).zero_windows().is_empty());
    }
}
