//! HTTP service for tutorflow: authentication, onboarding, tutoring
//! sessions with streamed chat, material uploads, analytics and durable
//! file-based storage.
//!
//! ```text
//!  client ──HTTP/SSE──> routes ──> access checks ──> core (plan, fsm, prompts, rag, analytics)
//!                          │                          │
//!                          │                          └─ driver ports ──> llm gateway
//!                          └──> store: <kind>/<id>.json + events.jsonl
//! ```

pub mod auth;
pub mod config;
pub mod error;
pub mod ports;
pub mod routes;
pub mod state;
pub mod store;

pub use config::ServerConfig;
pub use routes::router;
pub use state::{App, AppState, Hooks, IdSource, PlainTextExtractor, TextExtractor};
