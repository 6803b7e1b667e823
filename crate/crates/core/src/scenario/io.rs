use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::types::{Scenario, ScenarioRecord};
use crate::error::{NestError, Result};

/// Reads a JSON Lines scenario file. Blank lines are ignored; any malformed
/// or invalid record fails with its 1-based line number.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let file = fs::File::open(path).map_err(|e| NestError::io(path, e))?;
    read_scenarios(BufReader::new(file))
}

pub fn read_scenarios(reader: impl BufRead) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| NestError::Data {
            line: line_no,
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScenarioRecord = serde_json::from_str(&line).map_err(|e| NestError::Data {
            line: line_no,
            detail: format!("malformed record: {e}"),
        })?;
        let id = record.scenario_id.clone();
        let scenario = Scenario::from_record(record).map_err(|detail| NestError::Data {
            line: line_no,
            detail: format!("scenario `{id}`: {detail}"),
        })?;
        out.push(scenario);
    }
    Ok(out)
}

pub fn save_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| NestError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scenarios(&mut w, scenarios)?;
    w.flush().map_err(|e| NestError::io(path, e))
}

pub fn write_scenarios(w: &mut impl Write, scenarios: &[Scenario]) -> Result<()> {
    for s in scenarios {
        serde_json::to_writer(&mut *w, &s.to_record())?;
        w.write_all(b"\n")
            .map_err(|e| NestError::io("<scenario stream>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"scenario_id":"s1","dt":0.5,"agents":[{"agent_id":"a","role":"target","states":[[0,0,0,1,0,0,0],[0.5,0.5,0,1,0,0,0]]}],"lanes":[{"lane_id":"l","points":[[0,0],[10,0]]}]}"#;

    #[test]
    fn one_valid_record() {
        let s = read_scenarios(ONE.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].target.states[1].x, 0.5);
        assert_eq!(s[0].num_surrounding(), 0);
    }

    #[test]
    fn two_targets_names_the_line() {
        let bad = r#"{"scenario_id":"s2","dt":0.5,"agents":[{"agent_id":"a","role":"target","states":[[0,0,0,0,0,0,0]]},{"agent_id":"b","role":"target","states":[[0,1,0,0,0,0,0]]}]}"#;
        let text = format!("{ONE}\n\n{bad}\n");
        match read_scenarios(text.as_bytes()) {
            Err(NestError::Data { line, detail }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("second target"), "{detail}");
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_dt_and_missing_target() {
        let bad_dt = r#"{"scenario_id":"s","dt":0.5,"agents":[{"agent_id":"a","role":"target","states":[[0,0,0,0,0,0,0],[0.7,0,0,0,0,0,0]]}]}"#;
        assert!(matches!(
            read_scenarios(bad_dt.as_bytes()),
            Err(NestError::Data { line: 1, .. })
        ));
        let no_target = r#"{"scenario_id":"s","dt":0.5,"agents":[]}"#;
        assert!(read_scenarios(no_target.as_bytes()).is_err());
        assert!(read_scenarios("{not json".as_bytes()).is_err());
    }
}
