use super::frame::{normalize_frame, Frame};
use super::types::{LanePolyline, Scenario};
use crate::error::{NestError, Result};
use crate::numerics::Tensor;

/// Model-ready view of one scenario in its target-centric frame.
///
/// Row 0 is always the target. Rows whose `mask` entry is false are padding
/// and carry an all-zero history.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInput {
    pub scenario_id: String,
    pub dt: f64,
    pub agent_ids: Vec<String>,
    pub mask: Vec<bool>,
    /// One `t_h x 6` matrix of `(x, y, vx, vy, ax, ay)` per row.
    pub histories: Vec<Tensor>,
    pub lanes: Vec<LanePolyline>,
    /// Ground-truth target future `(x, y)`, when the scenario has one.
    pub future: Option<Vec<[f64; 2]>>,
    pub frame: Frame,
    pub heading_fallback: bool,
}

impl SceneInput {
    pub fn from_scenario(s: &Scenario, t_h: usize, t_f: usize, require_future: bool) -> Result<Self> {
        let bad = |detail: String| NestError::Scenario {
            scenario: s.scenario_id.clone(),
            detail,
        };
        let has_future = s.target.states.len() >= t_h + t_f;
        if require_future && !has_future {
            return Err(bad(format!(
                "target has {} states, need {} history + {} future",
                s.target.states.len(),
                t_h,
                t_f
            )));
        }
        let norm = normalize_frame(s, t_h)?;
        let mut histories = Vec::with_capacity(1 + s.surrounding.len());
        for track in norm.scenario.agents() {
            if track.states.len() < t_h {
                return Err(bad(format!(
                    "agent `{}` has {} states, history needs {t_h}",
                    track.agent_id,
                    track.states.len()
                )));
            }
            let data = track.states[..t_h].iter().flat_map(|st| st.features()).collect();
            histories.push(Tensor::matrix(t_h, 6, data)?);
        }
        let future = has_future.then(|| {
            norm.scenario.target.states[t_h..t_h + t_f]
                .iter()
                .map(|st| [st.x, st.y])
                .collect()
        });
        Ok(SceneInput {
            scenario_id: s.scenario_id.clone(),
            dt: s.dt,
            agent_ids: s.agents().map(|a| a.agent_id.clone()).collect(),
            mask: vec![true; histories.len()],
            histories,
            lanes: norm.scenario.lanes.clone(),
            future,
            frame: norm.frame,
            heading_fallback: norm.heading_fallback,
        })
    }

    pub fn rows(&self) -> usize {
        self.histories.len()
    }

    pub fn num_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Pads to `rows` agents with masked, all-zero rows.
    pub fn padded(&self, rows: usize) -> SceneInput {
        let mut out = self.clone();
        let (t_h, c) = self.histories[0].dims();
        while out.histories.len() < rows {
            out.histories.push(Tensor::zeros(t_h, c));
            out.mask.push(false);
            out.agent_ids.push(String::new());
        }
        out
    }
}

/// Converts scenarios and pads them to a common agent count.
pub fn make_batch(
    scenarios: &[Scenario],
    t_h: usize,
    t_f: usize,
    require_future: bool,
) -> Result<Vec<SceneInput>> {
    let scenes = scenarios
        .iter()
        .map(|s| SceneInput::from_scenario(s, t_h, t_f, require_future))
        .collect::<Result<Vec<_>>>()?;
    let rows = scenes.iter().map(SceneInput::rows).max().unwrap_or(0);
    Ok(scenes.iter().map(|s| s.padded(rows)).collect())
}
