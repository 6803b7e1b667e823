//! Synthetic traffic scenes with known interaction structure.
//!
//! Every track is integrated with piecewise-constant acceleration,
//! `p(t+1) = p + v dt + a dt^2 / 2`, `v(t+1) = v + a dt`, and the stored
//! `(ax, ay)` of a state is the acceleration applied over the following step.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::types::{AgentState, AgentTrack, LanePolyline, Role, Scenario};
use crate::error::{NestError, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Platoon where a lead-vehicle braking event propagates rearward.
    Chain,
    Intersection,
    Merge,
    /// Identical histories with either a straight or a U-turn future.
    Uturn,
}

impl FromStr for SynthKind {
    type Err = NestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(SynthKind::Chain),
            "intersection" => Ok(SynthKind::Intersection),
            "merge" => Ok(SynthKind::Merge),
            "uturn" => Ok(SynthKind::Uturn),
            other => Err(NestError::Usage(format!(
                "unknown scenario kind `{other}` (expected chain|intersection|merge|uturn)"
            ))),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Chain => "chain",
            SynthKind::Intersection => "intersection",
            SynthKind::Merge => "merge",
            SynthKind::Uturn => "uturn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub t_h: usize,
    pub t_f: usize,
    pub dt: f64,
    /// Platoon size for `chain` and main-lane size for `merge`, target included.
    pub vehicles: usize,
    pub speed: f64,
    pub gap: f64,
    /// Step at which the chain lead starts braking.
    pub brake_step: usize,
    /// Steps between successive vehicles reacting.
    pub reaction_delay: usize,
    /// How long each vehicle brakes, in steps.
    pub brake_steps: usize,
    pub decel: f64,
    /// Upper bound on any acceleration magnitude the generator emits.
    pub a_max: f64,
    /// Number of ramp vehicles for `merge`.
    pub merging: usize,
    /// Randomize speeds, gaps and event timing per scenario.
    pub jitter: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            t_h: 8,
            t_f: 12,
            dt: 0.5,
            vehicles: 5,
            speed: 10.0,
            gap: 15.0,
            brake_step: 3,
            reaction_delay: 2,
            brake_steps: 4,
            decel: 3.0,
            a_max: 8.0,
            merging: 1,
            jitter: true,
        }
    }
}

impl SynthParams {
    fn steps(&self) -> usize {
        self.t_h + self.t_f
    }
}

/// Integrates one track. `accel(step, velocity)` gives the acceleration
/// applied over `[step, step + 1)`.
fn simulate(
    p0: [f64; 2],
    v0: [f64; 2],
    steps: usize,
    dt: f64,
    mut accel: impl FnMut(usize, [f64; 2]) -> [f64; 2],
) -> Vec<AgentState> {
    let (mut p, mut v) = (p0, v0);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let a = accel(k, v);
        out.push(AgentState {
            t: k as f64 * dt,
            x: p[0],
            y: p[1],
            vx: v[0],
            vy: v[1],
            ax: a[0],
            ay: a[1],
        });
        p = [
            p[0] + v[0] * dt + 0.5 * a[0] * dt * dt,
            p[1] + v[1] * dt + 0.5 * a[1] * dt * dt,
        ];
        v = [v[0] + a[0] * dt, v[1] + a[1] * dt];
    }
    out
}

/// Longitudinal braking along +x that never reverses the vehicle.
fn brake_x(v: [f64; 2], decel: f64, dt: f64) -> [f64; 2] {
    [-decel.min(v[0].max(0.0) / dt), 0.0]
}

fn track(id: impl Into<String>, role: Role, states: Vec<AgentState>) -> AgentTrack {
    AgentTrack {
        agent_id: id.into(),
        role,
        states,
    }
}

fn straight_lane(id: &str, from: [f64; 2], to: [f64; 2]) -> LanePolyline {
    LanePolyline {
        lane_id: id.into(),
        points: vec![from, to],
    }
}

/// Step at which chain vehicle `k` (0 = lead) starts braking.
pub fn chain_reaction_step(brake_step: usize, reaction_delay: usize, k: usize) -> usize {
    brake_step + k * reaction_delay
}

/// Generates `count` scenes of `kind`. Scene `i` draws only from the stream
/// `(seed, "synth/<kind>/<i>")`, so any prefix of a larger run is identical.
pub fn generate_synthetic(
    kind: SynthKind,
    count: usize,
    seed: u64,
    params: &SynthParams,
) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(NestError::Usage("count must be > 0".into()));
    }
    if params.t_h < 2 || params.t_f == 0 || !(params.dt > 0.0) {
        return Err(NestError::Usage(
            "synthetic scenes need t_h >= 2, t_f >= 1 and dt > 0".into(),
        ));
    }
    let root = RngStream::new(seed, format!("synth/{kind}"));
    (0..count)
        .map(|i| {
            let mut rng = root.child(i).generator();
            let id = format!("{kind}-{seed}-{i:04}");
            let s = match kind {
                SynthKind::Chain => chain(id, params, &mut rng),
                SynthKind::Intersection => intersection(id, params, &mut rng),
                SynthKind::Merge => merge(id, params, &mut rng),
                SynthKind::Uturn => uturn(id, params, &mut rng),
            };
            s.validate().map_err(|detail| NestError::Scenario {
                scenario: s.scenario_id.clone(),
                detail,
            })?;
            Ok(s)
        })
        .collect()
}

fn chain(id: String, p: &SynthParams, rng: &mut impl Rng) -> Scenario {
    let n = p.vehicles.max(1);
    let (mut speed, mut gap, mut brake_step, mut delay, mut decel) =
        (p.speed, p.gap, p.brake_step, p.reaction_delay, p.decel);
    if p.jitter {
        speed *= rng.gen_range(0.8..1.2);
        gap *= rng.gen_range(0.8..1.2);
        brake_step = rng.gen_range(1..=p.t_h + 4);
        delay = rng.gen_range(1..=3);
        decel = rng.gen_range(2.0..4.0);
    }
    let decel = decel.min(p.a_max);
    let dt = p.dt;
    let mut tracks: Vec<AgentTrack> = (0..n)
        .map(|k| {
            let start = chain_reaction_step(brake_step, delay, k);
            let x0 = (n - 1 - k) as f64 * gap;
            let states = simulate([x0, 0.0], [speed, 0.0], p.steps(), dt, |step, v| {
                if step >= start && step < start + p.brake_steps {
                    brake_x(v, decel, dt)
                } else {
                    [0.0, 0.0]
                }
            });
            track(format!("veh{k}"), Role::Surrounding, states)
        })
        .collect();
    let mut target = tracks.pop().expect("at least one vehicle");
    target.role = Role::Target;
    Scenario {
        scenario_id: id,
        dt,
        target,
        surrounding: tracks,
        lanes: vec![straight_lane("main", [-100.0, 0.0], [300.0, 0.0])],
    }
}

fn intersection(id: String, p: &SynthParams, rng: &mut impl Rng) -> Scenario {
    let dt = p.dt;
    let now = (p.t_h - 1) as f64 * dt;
    let (v_t, remaining, v_c, arrival) = if p.jitter {
        (
            rng.gen_range(8.0..12.0),
            rng.gen_range(5.0..25.0),
            rng.gen_range(6.0..12.0),
            now + rng.gen_range(0.0..4.0),
        )
    } else {
        (p.speed, 15.0, p.speed, now + 1.5)
    };
    let target_arrival = now + remaining / v_t;
    let yields = (arrival - target_arrival).abs() < 1.5;
    let decel = p.decel.min(p.a_max);
    let accel_back = 2.0f64.min(p.a_max);
    let profile = move |step: usize, v: [f64; 2], offset: usize| -> [f64; 2] {
        let begin = p.t_h + offset;
        if !yields || step < begin {
            [0.0, 0.0]
        } else if step < begin + p.brake_steps {
            brake_x(v, decel, dt)
        } else if step < begin + 2 * p.brake_steps && v[0] < v_t {
            [accel_back.min((v_t - v[0]) / dt), 0.0]
        } else {
            [0.0, 0.0]
        }
    };
    let target_x0 = -(now * v_t + remaining);
    let target = simulate([target_x0, 0.0], [v_t, 0.0], p.steps(), dt, |k, v| {
        profile(k, v, 0)
    });
    let follower = simulate([target_x0 - p.gap, 0.0], [v_t, 0.0], p.steps(), dt, |k, v| {
        profile(k, v, p.reaction_delay)
    });
    let crossing = simulate([0.0, -v_c * arrival], [0.0, v_c], p.steps(), dt, |_, _| {
        [0.0, 0.0]
    });
    Scenario {
        scenario_id: id,
        dt,
        target: track("target", Role::Target, target),
        surrounding: vec![
            track("crossing", Role::Surrounding, crossing),
            track("follower", Role::Surrounding, follower),
        ],
        lanes: vec![
            straight_lane("east", [-150.0, 0.0], [150.0, 0.0]),
            straight_lane("north", [0.0, -150.0], [0.0, 150.0]),
        ],
    }
}

fn merge(id: String, p: &SynthParams, rng: &mut impl Rng) -> Scenario {
    const LANE_OFFSET: f64 = 3.5;
    const HALF: usize = 3;
    let dt = p.dt;
    let n = p.vehicles.max(1);
    let (mut speed, mut gap, mut merge_step) = (p.speed, p.gap, p.brake_step);
    if p.jitter {
        speed *= rng.gen_range(0.8..1.2);
        gap *= rng.gen_range(0.8..1.2);
        merge_step = rng.gen_range(1..=p.t_h + 4);
    }
    // Accelerate laterally for HALF steps, then decelerate for HALF steps:
    // total displacement a * dt^2 * HALF^2.
    let a_lat = (LANE_OFFSET / (dt * dt * (HALF * HALF) as f64)).min(p.a_max);
    let react_decel = 1.5f64.min(p.a_max);

    let mut main: Vec<AgentTrack> = (0..n)
        .map(|k| {
            let is_target = k == n - 1;
            let react = merge_step + p.reaction_delay;
            let states = simulate(
                [(n - 1 - k) as f64 * gap, 0.0],
                [speed, 0.0],
                p.steps(),
                dt,
                |step, v| {
                    if is_target && p.merging > 0 && step >= react && step < react + HALF {
                        brake_x(v, react_decel, dt)
                    } else {
                        [0.0, 0.0]
                    }
                },
            );
            track(format!("main{k}"), Role::Surrounding, states)
        })
        .collect();
    let ramp: Vec<AgentTrack> = (0..p.merging)
        .map(|m| {
            let start = merge_step + 2 * m;
            let states = simulate(
                [gap * (m as f64 + 0.5), -LANE_OFFSET],
                [speed, 0.0],
                p.steps(),
                dt,
                |step, _| {
                    if step >= start && step < start + HALF {
                        [0.0, a_lat]
                    } else if step >= start + HALF && step < start + 2 * HALF {
                        [0.0, -a_lat]
                    } else {
                        [0.0, 0.0]
                    }
                },
            );
            track(format!("ramp{m}"), Role::Surrounding, states)
        })
        .collect();
    let mut target = main.pop().expect("at least one vehicle");
    target.role = Role::Target;
    main.extend(ramp);
    Scenario {
        scenario_id: id,
        dt,
        target,
        surrounding: main,
        lanes: vec![
            straight_lane("main", [-200.0, 0.0], [300.0, 0.0]),
            straight_lane("ramp", [-200.0, -LANE_OFFSET], [100.0, -LANE_OFFSET]),
        ],
    }
}

/// Straight-or-U-turn scenes. Histories are identical across the dataset
/// (jitter is ignored); only the future differs, chosen 50/50 per scene.
fn uturn(id: String, p: &SynthParams, rng: &mut impl Rng) -> Scenario {
    const TURN_STEPS: usize = 6;
    const SPEED: f64 = 6.0;
    let dt = p.dt;
    let turning = rng.gen_bool(0.5);
    let omega = PI / (TURN_STEPS as f64 * dt);
    let (s, c) = (omega * dt).sin_cos();
    let x0 = -SPEED * (p.t_h - 1) as f64 * dt;
    let target = simulate([x0, 0.0], [SPEED, 0.0], p.steps(), dt, |step, v| {
        if turning && step >= p.t_h && step < p.t_h + TURN_STEPS {
            let rotated = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
            [(rotated[0] - v[0]) / dt, (rotated[1] - v[1]) / dt]
        } else {
            [0.0, 0.0]
        }
    });
    let oncoming = simulate([40.0, 3.5], [-SPEED, 0.0], p.steps(), dt, |_, _| [0.0, 0.0]);
    Scenario {
        scenario_id: id,
        dt,
        target: track("target", Role::Target, target),
        surrounding: vec![track("oncoming", Role::Surrounding, oncoming)],
        lanes: vec![
            straight_lane("eastbound", [-100.0, 0.0], [100.0, 0.0]),
            straight_lane("westbound", [100.0, 3.5], [-100.0, 3.5]),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinematically_consistent(s: &Scenario, a_max: f64) -> bool {
        let dt = s.dt;
        let bound = 0.5 * a_max * dt * dt + 1e-9;
        s.agents().all(|t| {
            t.states.iter().all(|st| st.ax.hypot(st.ay) <= a_max + 1e-9)
                && t.states.windows(2).all(|w| {
                    (w[1].x - w[0].x - w[0].vx * dt).abs() <= bound
                        && (w[1].y - w[0].y - w[0].vy * dt).abs() <= bound
                })
        })
    }

    #[test]
    fn chain_reaction_reaches_vehicle_four_at_step_eleven() {
        let params = SynthParams {
            vehicles: 5,
            brake_step: 3,
            reaction_delay: 2,
            jitter: false,
            ..SynthParams::default()
        };
        let s = &generate_synthetic(SynthKind::Chain, 1, 0, &params).unwrap()[0];
        // veh4 is the last vehicle and the target.
        assert_eq!(s.target.agent_id, "veh4");
        let first_brake = s.target.states.iter().position(|st| st.ax < 0.0);
        assert_eq!(first_brake, Some(11));
        let lead = &s.surrounding[0];
        assert_eq!(lead.states.iter().position(|st| st.ax < 0.0), Some(3));
    }

    #[test]
    fn merge_without_mergers_has_no_lateral_motion() {
        let params = SynthParams {
            merging: 0,
            ..SynthParams::default()
        };
        for s in generate_synthetic(SynthKind::Merge, 5, 3, &params).unwrap() {
            assert!(s.agents().all(|t| t
                .states
                .iter()
                .all(|st| st.vy == 0.0 && st.ay == 0.0 && st.y == 0.0)));
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        for kind in [
            SynthKind::Chain,
            SynthKind::Intersection,
            SynthKind::Merge,
            SynthKind::Uturn,
        ] {
            let a = generate_synthetic(kind, 4, 9, &SynthParams::default()).unwrap();
            let b = generate_synthetic(kind, 4, 9, &SynthParams::default()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn every_kind_is_kinematically_consistent() {
        let params = SynthParams::default();
        for kind in [
            SynthKind::Chain,
            SynthKind::Intersection,
            SynthKind::Merge,
            SynthKind::Uturn,
        ] {
            for s in generate_synthetic(kind, 30, 1, &params).unwrap() {
                assert!(kinematically_consistent(&s, params.a_max), "{}", s.scenario_id);
                assert_eq!(s.target.states.len(), params.t_h + params.t_f);
            }
        }
    }

    #[test]
    fn uturn_histories_identical_and_both_futures_present() {
        let p = SynthParams::default();
        let scenes = generate_synthetic(SynthKind::Uturn, 20, 4, &p).unwrap();
        let hist = |s: &Scenario| s.target.states[..p.t_h].to_vec();
        assert!(scenes.iter().all(|s| hist(s) == hist(&scenes[0])));
        let last = |s: &Scenario| s.target.states.last().unwrap().vx;
        assert!(scenes.iter().any(|s| last(s) < 0.0));
        assert!(scenes.iter().any(|s| last(s) > 0.0));
    }

    #[test]
    fn usage_errors() {
        assert!(matches!("zigzag".parse::<SynthKind>(), Err(NestError::Usage(_))));
        assert!(generate_synthetic(SynthKind::Chain, 0, 0, &SynthParams::default()).is_err());
    }
}
