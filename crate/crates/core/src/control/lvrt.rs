//! Low-voltage ride through with reactive-current priority, and the
//! converter current-magnitude limit.

use serde::{Deserialize, Serialize};

use crate::error::Checker;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LvrtParams {
    /// Enter ride-through below this bus voltage [p.u.].
    pub v_enter: f64,
    /// Leave ride-through above this bus voltage [p.u.].
    pub v_exit: f64,
    /// Reactive current gain [p.u./p.u.].
    pub k_q: f64,
    pub v_ref: f64,
}

impl Default for LvrtParams {
    fn default() -> Self {
        Self {
            v_enter: 0.9,
            v_exit: 0.95,
            k_q: 2.0,
            v_ref: 0.9,
        }
    }
}

impl LvrtParams {
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut c = Checker::new(prefix);
        // v_exit may exceed v_ref: the reactive injection is already zero there.
        c.check(self.v_enter < self.v_exit, "v_enter", || {
            format!("must satisfy v_enter < v_exit, got {} / {}", self.v_enter, self.v_exit)
        });
        c.check(self.v_enter <= self.v_ref, "v_ref", || {
            format!("must be >= v_enter ({} < {})", self.v_ref, self.v_enter)
        });
        c.non_negative("k_q", self.k_q);
        c.into_violations()
    }

    /// Hysteretic ride-through mode for bus voltage `v_ac`.
    pub fn next_mode(&self, in_lvrt: bool, v_ac: f64) -> bool {
        if in_lvrt {
            v_ac <= self.v_exit
        } else {
            v_ac < self.v_enter
        }
    }

    /// Final current set-points for a fixed mode.
    pub fn limit_currents(&self, i_max: f64, i_d0: f64, i_q0: f64, v_ac: f64, in_lvrt: bool) -> (f64, f64) {
        if in_lvrt {
            let i_q = (self.k_q * (self.v_ref - v_ac)).clamp(0.0, i_max);
            let room = (i_max * i_max - i_q * i_q).max(0.0).sqrt();
            (i_d0.clamp(-room, room), i_q)
        } else {
            let mag = i_d0.hypot(i_q0);
            if mag > i_max {
                let k = i_max / mag;
                (i_d0 * k, i_q0 * k)
            } else {
                (i_d0, i_q0)
            }
        }
    }
}

/// Updates the ride-through mode, then limits `(i_d0, i_q0)` to `(i_d*, i_q*)`.
pub fn lvrt_limit(
    p: &LvrtParams,
    i_max: f64,
    i_d0: f64,
    i_q0: f64,
    v_ac: f64,
    in_lvrt: bool,
) -> (f64, f64, bool) {
    let mode = p.next_mode(in_lvrt, v_ac);
    let (i_d, i_q) = p.limit_currents(i_max, i_d0, i_q0, v_ac, mode);
    (i_d, i_q, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reactive_priority_examples() {
        let p = LvrtParams::default();
        let (i_d, i_q, mode) = lvrt_limit(&p, 1.1, 1.0, 0.0, 0.6, false);
        assert!(mode);
        assert!((i_q - 0.6).abs() < 1e-12);
        assert!(i_d <= (1.21f64 - 0.36).sqrt() + 1e-12);
        assert!((i_d - 0.92195).abs() < 1e-4);

        let (i_d, i_q, _) = lvrt_limit(&p, 1.1, 0.5, 0.0, 0.2, false);
        assert!((i_q - 1.1).abs() < 1e-12);
        assert_eq!(i_d, 0.0);
    }

    #[test]
    fn passthrough_outside_ride_through() {
        let p = LvrtParams::default();
        assert_eq!(lvrt_limit(&p, 1.1, 0.5, 0.2, 1.0, false), (0.5, 0.2, false));
    }

    #[test]
    fn mode_hysteresis() {
        let p = LvrtParams::default();
        assert!(p.next_mode(false, 0.85));
        assert!(p.next_mode(true, 0.93));
        assert!(!p.next_mode(true, 0.96));
        assert!(!p.next_mode(false, 0.93));
    }

    proptest! {
        #[test]
        fn current_limit_circle(
            i_d0 in -3.0..3.0f64,
            i_q0 in -3.0..3.0f64,
            v in 0.0..1.3f64,
            in_lvrt: bool,
            i_max in 0.1..2.0f64,
        ) {
            let p = LvrtParams::default();
            let (i_d, i_q, _) = lvrt_limit(&p, i_max, i_d0, i_q0, v, in_lvrt);
            prop_assert!(i_d * i_d + i_q * i_q <= i_max * i_max + 1e-12);
        }
    }
}
