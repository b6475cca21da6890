//! Domain logic for the tutorflow tutoring orchestrator.
//!
//! Everything in this crate is synchronous and free of I/O: validation of
//! onboarding requests, role-based authorization, layered prompt
//! composition, the tutoring state machine, BM25 retrieval and engagement
//! analytics. The HTTP service and the LLM backends live in sibling crates.

pub mod access;
pub mod analytics;
pub mod ids;
pub mod model;
pub mod prompt;
pub mod rag;
pub mod tutor;

/// UTC epoch milliseconds.
pub type TimestampMs = i64;

pub use ids::{ChunkId, DocId, EventId, LearnerId, PlanId, QuizId, SessionId, SupportId, UserId};
