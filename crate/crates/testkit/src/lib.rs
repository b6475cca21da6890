//! Test support for tutorflow: reference oracles over plain data, seeded
//! generators, criterion checks and shared fixtures.
//!
//! The oracles in [`bm25`] and [`engagement`] deliberately avoid the core
//! crate's types and helpers.

pub mod bm25;
pub mod criteria;
pub mod engagement;
pub mod fsm;
pub mod gen;

/// Course outline used by the planning and journey fixtures.
pub const SYLLABUS: &str = include_str!("../fixtures/hdfs_syllabus.md");
/// Mock backend script for the journey fixture.
pub const JOURNEY_SCRIPT: &str = include_str!("../fixtures/journey_script.json");

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Prints one result line and returns whether the criterion held.
pub fn report(name: &str, result: &Result<String, String>) -> bool {
    match result {
        Ok(summary) => {
            println!("PASS  {name}: {summary}");
            true
        }
        Err(why) => {
            println!("FAIL  {name}: {why}");
            false
        }
    }
}
