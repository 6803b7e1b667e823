//! Corrupted scenario files must produce errors, never panics.

use proptest::prelude::*;

use nest::scenario::{
    generate_synthetic, make_batch, read_scenarios, write_scenarios, SynthKind, SynthParams,
};
use nest::NestError;

fn valid_file() -> Vec<u8> {
    let scenes = generate_synthetic(SynthKind::Merge, 2, 3, &SynthParams::default()).unwrap();
    let mut buf = Vec::new();
    write_scenarios(&mut buf, &scenes).unwrap();
    buf
}

fn load(bytes: &[u8]) -> Result<(), NestError> {
    let scenes = read_scenarios(bytes)?;
    make_batch(&scenes, 8, 12, false).map(|_| ())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn byte_edits_never_panic(edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8)) {
        let mut bytes = valid_file();
        for (at, b) in edits {
            let i = at.index(bytes.len());
            bytes[i] = b;
        }
        let _ = load(&bytes);
    }

    #[test]
    fn truncation_never_panics(cut in any::<prop::sample::Index>()) {
        let bytes = valid_file();
        let n = cut.index(bytes.len());
        let _ = load(&bytes[..n]);
    }

    #[test]
    fn numeric_garbage_is_rejected(v in prop_oneof![Just("NaN"), Just("1e400"), Just("-1e400"), Just("null"), Just("\"x\"")]) {
        let text = String::from_utf8(valid_file()).unwrap();
        let first = text.lines().next().unwrap();
        let key = "\"dt\":";
        let at = first.find(key).unwrap() + key.len();
        let end = at + first[at..].find(|c| c == ',' || c == '}').unwrap();
        let broken = format!("{}{}{}\n", &first[..at], v, &first[end..]);
        prop_assert!(load(broken.as_bytes()).is_err());
    }
}

#[test]
fn empty_and_blank_input() {
    assert!(read_scenarios(&b""[..]).unwrap().is_empty());
    assert!(matches!(load(b"\n{}\n"), Err(NestError::Data { .. })));
}
