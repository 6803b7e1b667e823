//! Scenario data model, JSONL ingestion, target-centric normalization and
//! synthetic scene generation.

pub mod batch;
pub mod frame;
pub mod io;
pub mod synth;
pub mod types;

pub use batch::{make_batch, SceneInput};
pub use frame::{denormalize, normalize_frame, Frame, NormalizedScenario};
pub use io::{load_scenarios, read_scenarios, save_scenarios, write_scenarios};
pub use synth::{generate_synthetic, SynthKind, SynthParams};
pub use types::{AgentState, AgentTrack, LanePolyline, Role, Scenario};
