use serde::{Deserialize, Serialize};

use super::types::Scenario;
use crate::error::{NestError, Result};

const MIN_MOTION: f64 = 1e-9;

/// Rigid transform from the world frame into the target-centric frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: [f64; 2],
    /// World heading of the local +x axis, radians.
    pub heading: f64,
}

impl Frame {
    pub fn identity() -> Self {
        Frame {
            origin: [0.0, 0.0],
            heading: 0.0,
        }
    }

    fn rotate(&self, v: [f64; 2], angle: f64) -> [f64; 2] {
        let (s, c) = angle.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn point_to_local(&self, p: [f64; 2]) -> [f64; 2] {
        self.rotate([p[0] - self.origin[0], p[1] - self.origin[1]], -self.heading)
    }

    pub fn point_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let r = self.rotate(p, self.heading);
        [r[0] + self.origin[0], r[1] + self.origin[1]]
    }

    pub fn vector_to_local(&self, v: [f64; 2]) -> [f64; 2] {
        self.rotate(v, -self.heading)
    }

    pub fn vector_to_world(&self, v: [f64; 2]) -> [f64; 2] {
        self.rotate(v, self.heading)
    }
}

/// A scenario expressed in its target-centric frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedScenario {
    pub scenario: Scenario,
    pub frame: Frame,
    /// The target did not move at the end of its history, so no heading was
    /// defined and the rotation is the identity.
    pub heading_fallback: bool,
}

/// Moves the target's last history position (index `history_len - 1`) to the
/// origin and aligns its last-step heading with +x.
///
/// The heading comes from the last history displacement, else the last
/// velocity; a target with neither keeps the world orientation.
pub fn normalize_frame(s: &Scenario, history_len: usize) -> Result<NormalizedScenario> {
    let states = &s.target.states;
    if history_len == 0 || states.len() < history_len {
        return Err(NestError::Scenario {
            scenario: s.scenario_id.clone(),
            detail: format!("target has {} states, history needs {history_len}", states.len()),
        });
    }
    let last = states[history_len - 1];
    let mut heading = None;
    if history_len >= 2 {
        let prev = states[history_len - 2];
        let (dx, dy) = (last.x - prev.x, last.y - prev.y);
        if dx.hypot(dy) > MIN_MOTION {
            heading = Some(dy.atan2(dx));
        }
    }
    if heading.is_none() && last.vx.hypot(last.vy) > MIN_MOTION {
        heading = Some(last.vy.atan2(last.vx));
    }
    let heading_fallback = heading.is_none();
    if heading_fallback {
        log::warn!(
            "scenario `{}`: target has no motion at the last history step; using identity rotation",
            s.scenario_id
        );
    }
    let frame = Frame {
        origin: [last.x, last.y],
        heading: heading.unwrap_or(0.0),
    };
    Ok(NormalizedScenario {
        scenario: apply(s, |p| frame.point_to_local(p), |v| frame.vector_to_local(v)),
        frame,
        heading_fallback,
    })
}

/// Maps a normalized scenario back to world coordinates.
pub fn denormalize(n: &NormalizedScenario) -> Scenario {
    let f = n.frame;
    apply(&n.scenario, |p| f.point_to_world(p), |v| f.vector_to_world(v))
}

fn apply(
    s: &Scenario,
    point: impl Fn([f64; 2]) -> [f64; 2],
    vector: impl Fn([f64; 2]) -> [f64; 2],
) -> Scenario {
    let mut out = s.clone();
    for track in out.agents_mut() {
        for st in &mut track.states {
            [st.x, st.y] = point([st.x, st.y]);
            [st.vx, st.vy] = vector([st.vx, st.vy]);
            [st.ax, st.ay] = vector([st.ax, st.ay]);
        }
    }
    for lane in &mut out.lanes {
        for p in &mut lane.points {
            *p = point(*p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::types::{AgentState, AgentTrack, Role};

    fn state(t: f64, x: f64, y: f64, vx: f64, vy: f64) -> AgentState {
        AgentState {
            t,
            x,
            y,
            vx,
            vy,
            ax: 0.0,
            ay: 0.0,
        }
    }

    fn scene(target: Vec<AgentState>, others: Vec<Vec<AgentState>>) -> Scenario {
        Scenario {
            scenario_id: "f".into(),
            dt: 1.0,
            target: AgentTrack {
                agent_id: "t".into(),
                role: Role::Target,
                states: target,
            },
            surrounding: others
                .into_iter()
                .enumerate()
                .map(|(i, states)| AgentTrack {
                    agent_id: format!("o{i}"),
                    role: Role::Surrounding,
                    states,
                })
                .collect(),
            lanes: vec![],
        }
    }

    #[test]
    fn heading_north_maps_to_positive_x() {
        let s = scene(
            vec![state(0.0, 5.0, 4.0, 0.0, 1.0), state(1.0, 5.0, 5.0, 0.0, 1.0)],
            vec![],
        );
        let n = normalize_frame(&s, 2).unwrap();
        let st = &n.scenario.target.states;
        assert!(st[1].x.abs() < 1e-12 && st[1].y.abs() < 1e-12);
        assert!((st[0].x + 1.0).abs() < 1e-12 && st[0].y.abs() < 1e-12);
        assert!((st[1].vx - 1.0).abs() < 1e-12 && st[1].vy.abs() < 1e-12);
        assert!(!n.heading_fallback);
    }

    #[test]
    fn round_trip_and_rigidity() {
        let s = scene(
            vec![state(0.0, 1.0, 2.0, 3.0, -1.0), state(1.0, 4.0, 1.0, 3.0, -1.0)],
            vec![
                vec![state(0.0, -7.0, 3.5, 0.0, 2.0), state(1.0, -7.0, 5.5, 0.0, 2.0)],
                vec![state(0.0, 20.0, -3.0, 1.0, 1.0), state(1.0, 21.0, -2.0, 1.0, 1.0)],
            ],
        );
        let n = normalize_frame(&s, 2).unwrap();
        let back = denormalize(&n);
        for (a, b) in s.agents().zip(back.agents()) {
            for (p, q) in a.states.iter().zip(&b.states) {
                assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
                assert!((p.vx - q.vx).abs() < 1e-9 && (p.vy - q.vy).abs() < 1e-9);
            }
        }
        let dist = |sc: &Scenario, i: usize, j: usize, k: usize| {
            let a: Vec<_> = sc.agents().collect();
            let (p, q) = (a[i].states[k], a[j].states[k]);
            (p.x - q.x).hypot(p.y - q.y)
        };
        for k in 0..2 {
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                assert!((dist(&s, i, j, k) - dist(&n.scenario, i, j, k)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_motion_falls_back_to_identity() {
        let s = scene(
            vec![state(0.0, 2.0, 2.0, 0.0, 0.0), state(1.0, 2.0, 2.0, 0.0, 0.0)],
            vec![],
        );
        let n = normalize_frame(&s, 2).unwrap();
        assert!(n.heading_fallback);
        assert_eq!(n.frame.heading, 0.0);
        assert_eq!(n.scenario.target.states[0].x, 0.0);
    }

    #[test]
    fn short_history_is_an_error() {
        let s = scene(vec![state(0.0, 0.0, 0.0, 1.0, 0.0)], vec![]);
        assert!(normalize_frame(&s, 3).is_err());
    }
}
