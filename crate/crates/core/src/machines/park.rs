//! Rotations between the stationary (alpha-beta) frame and the rotor (d-q) frame.

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParkDirection {
    /// alpha-beta to d-q.
    ToDq,
    /// d-q to alpha-beta.
    ToAb,
}

/// Rotates a two-phase vector by the rotor angle `theta`.
///
/// `ToAb` applies `[[cos, -sin], [sin, cos]]`, `ToDq` its transpose.
pub fn park(v: [f64; 2], theta: f64, direction: ParkDirection) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    match direction {
        ParkDirection::ToAb => [c * v[0] - s * v[1], s * v[0] + c * v[1]],
        ParkDirection::ToDq => [c * v[0] + s * v[1], -s * v[0] + c * v[1]],
    }
}

pub fn to_dq(ab: [f64; 2], theta: f64) -> [f64; 2] {
    park(ab, theta, ParkDirection::ToDq)
}

pub fn to_ab(dq: [f64; 2], theta: f64) -> [f64; 2] {
    park(dq, theta, ParkDirection::ToAb)
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_at_zero() {
        assert_eq!(to_dq([1.0, 0.0], 0.0), [1.0, 0.0]);
    }

    #[test]
    fn quarter_turn() {
        let dq = to_dq([0.0, 1.0], PI / 2.0);
        assert_abs_diff_eq!(dq[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dq[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn round_trip() {
        let v = [0.3, -0.7];
        let back = to_ab(to_dq(v, 1.234), 1.234);
        assert_abs_diff_eq!(back[0], v[0], epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], v[1], epsilon = 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert_abs_diff_eq!(wrap_angle(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn norm_preserving(a in -1e3f64..1e3, b in -1e3f64..1e3, th in -100.0f64..100.0) {
            let n0 = a.hypot(b);
            for dir in [ParkDirection::ToDq, ParkDirection::ToAb] {
                let r = park([a, b], th, dir);
                prop_assert!((r[0].hypot(r[1]) - n0).abs() <= 1e-12 * n0.max(1.0));
            }
        }

        #[test]
        fn wrapped_in_half_open_interval(th in -1e4f64..1e4) {
            let w = wrap_angle(th);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((th - w) / (2.0 * PI)).round() * 2.0 * PI - (th - w) < 1e-9);
        }
    }
}
