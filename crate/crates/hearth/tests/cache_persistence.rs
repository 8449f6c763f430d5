use hearth::store::{decode_embedding, encode_embedding, PersistentCache};
use hearth_core::clock::ManualClock;
use hearth_core::executor::{run, RunOptions};
use hearth_core::fixtures;
use hearth_core::memory::{Embedder, HashingEmbedder, ScriptStore, VerifiedProgram, DEFAULT_TAU};
use hearth_core::sim::{standard_registry, Fleet};
use hearth_core::validate::validate;
use proptest::prelude::*;

fn verified() -> VerifiedProgram {
    let program = fixtures::scenario2_program();
    let mut fleet = Fleet::new(fixtures::scenario2_scene()).unwrap();
    let registry = standard_registry::<Fleet>(&fleet);
    let v = validate(&program, &registry, &fleet);
    let r = run(&program, &registry, &mut fleet, RunOptions::default(), &ManualClock::new(0));
    VerifiedProgram::new(program, &v, &r).unwrap()
}

#[test]
fn entries_survive_reopen_and_compaction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/cache.jsonl");
    {
        let cache = PersistentCache::open(&path, DEFAULT_TAU).unwrap();
        cache.store("Improve internet speed for Eason.", verified(), 10).unwrap();
        cache.store("Count people in room.", verified(), 11).unwrap();
        let hit = cache.lookup("improve internet speed for eason", 12).unwrap();
        assert_eq!(hit.score, 1.0);
        assert_eq!(hit.entry.use_count, 1);
    }
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, 3);

    let cache = PersistentCache::open(&path, DEFAULT_TAU).unwrap();
    assert_eq!(cache.len(), 2);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    let entry = cache.entries().into_iter().find(|e| e.summary.starts_with("Improve")).unwrap();
    assert_eq!(entry.use_count, 1);
    assert_eq!(entry.program, fixtures::scenario2_program());
    assert_eq!(entry.embedding, HashingEmbedder::default().embed(&entry.summary));
    assert!(cache.lookup("Water the plants.", 20).is_none());
}

#[test]
fn corrupt_lines_are_reported_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    std::fs::write(&path, "{\"summary\": 1}\n").unwrap();
    let err = format!("{:#}", PersistentCache::open(&path, DEFAULT_TAU).unwrap_err());
    assert!(err.contains("cache.jsonl:1"), "{err}");
}

proptest! {
    #[test]
    fn embedding_codec_round_trips(v in prop::collection::vec(-1.0f32..1.0, 0..300)) {
        let wide: Vec<f64> = v.iter().map(|x| *x as f64).collect();
        prop_assert_eq!(decode_embedding(&encode_embedding(&wide)).unwrap(), v);
    }
}
