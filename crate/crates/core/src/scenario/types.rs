use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Kinematic state at one timestamp. Serialized as `[t, x, y, vx, vy, ax, ay]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 7]", into = "[f64; 7]")]
pub struct AgentState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
}

impl From<[f64; 7]> for AgentState {
    fn from(v: [f64; 7]) -> Self {
        AgentState {
            t: v[0],
            x: v[1],
            y: v[2],
            vx: v[3],
            vy: v[4],
            ax: v[5],
            ay: v[6],
        }
    }
}

impl From<AgentState> for [f64; 7] {
    fn from(s: AgentState) -> Self {
        [s.t, s.x, s.y, s.vx, s.vy, s.ax, s.ay]
    }
}

impl AgentState {
    /// The six per-step encoder features `(x, y, vx, vy, ax, ay)`.
    pub fn features(&self) -> [f64; 6] {
        [self.x, self.y, self.vx, self.vy, self.ax, self.ay]
    }

    fn all_finite(&self) -> bool {
        <[f64; 7]>::from(*self).iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Surrounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: String,
    pub role: Role,
    pub states: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanePolyline {
    pub lane_id: String,
    pub points: Vec<[f64; 2]>,
}

impl LanePolyline {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

/// One traffic scene: a single target plus `n >= 0` surrounding agents.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub dt: f64,
    pub target: AgentTrack,
    pub surrounding: Vec<AgentTrack>,
    pub lanes: Vec<LanePolyline>,
}

/// Line format of a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ScenarioRecord {
    pub scenario_id: String,
    pub dt: f64,
    pub agents: Vec<AgentTrack>,
    #[serde(default)]
    pub lanes: Vec<LanePolyline>,
}

impl Scenario {
    pub fn num_surrounding(&self) -> usize {
        self.surrounding.len()
    }

    /// Target first, then surrounding agents in order.
    pub fn agents(&self) -> impl Iterator<Item = &AgentTrack> {
        std::iter::once(&self.target).chain(&self.surrounding)
    }

    pub fn agents_mut(&mut self) -> impl Iterator<Item = &mut AgentTrack> {
        std::iter::once(&mut self.target).chain(self.surrounding.iter_mut())
    }

    /// Checks every type invariant; the error names the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if self.target.role != Role::Target {
            return Err("target track must have role `target`".into());
        }
        if let Some(a) = self.surrounding.iter().find(|a| a.role != Role::Surrounding) {
            return Err(format!("agent `{}` must have role `surrounding`", a.agent_id));
        }
        let mut ids = HashSet::new();
        let start = self.target.states.first().map(|s| s.t);
        let tol = 1e-6 * self.dt.max(1.0);
        for track in self.agents() {
            if !ids.insert(track.agent_id.as_str()) {
                return Err(format!("duplicate agent_id `{}`", track.agent_id));
            }
            if track.states.is_empty() {
                return Err(format!("agent `{}` has no states", track.agent_id));
            }
            if track.states.iter().any(|s| !s.all_finite()) {
                return Err(format!("agent `{}` has non-finite state values", track.agent_id));
            }
            if let Some(t0) = start {
                if (track.states[0].t - t0).abs() > tol {
                    return Err(format!(
                        "agent `{}` starts at t={} but the target starts at t={t0}",
                        track.agent_id, track.states[0].t
                    ));
                }
            }
            for w in track.states.windows(2) {
                let step = w[1].t - w[0].t;
                if step <= 0.0 {
                    return Err(format!(
                        "agent `{}` timestamps not strictly increasing at t={}",
                        track.agent_id, w[1].t
                    ));
                }
                if (step - self.dt).abs() > tol {
                    return Err(format!(
                        "agent `{}` step {step} inconsistent with dt {}",
                        track.agent_id, self.dt
                    ));
                }
            }
        }
        for lane in &self.lanes {
            if lane.points.len() < 2 {
                return Err(format!("lane `{}` has fewer than 2 points", lane.lane_id));
            }
            if lane.points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(format!("lane `{}` has non-finite points", lane.lane_id));
            }
            if lane.points.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("lane `{}` repeats a point", lane.lane_id));
            }
        }
        Ok(())
    }

    pub(crate) fn from_record(rec: ScenarioRecord) -> Result<Scenario, String> {
        let mut target = None;
        let mut surrounding = Vec::new();
        for agent in rec.agents {
            match agent.role {
                Role::Target if target.is_some() => {
                    return Err(format!("second target agent `{}`", agent.agent_id));
                }
                Role::Target => target = Some(agent),
                Role::Surrounding => surrounding.push(agent),
            }
        }
        let target = target.ok_or_else(|| "no target agent".to_string())?;
        let s = Scenario {
            scenario_id: rec.scenario_id,
            dt: rec.dt,
            target,
            surrounding,
            lanes: rec.lanes,
        };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn to_record(&self) -> ScenarioRecord {
        ScenarioRecord {
            scenario_id: self.scenario_id.clone(),
            dt: self.dt,
            agents: self.agents().cloned().collect(),
            lanes: self.lanes.clone(),
        }
    }
}
