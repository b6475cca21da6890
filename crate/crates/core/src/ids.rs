//! Opaque identifiers. All of them are UUIDv4 text when generated here, but
//! any non-empty string is accepted when deserializing so fixtures can use
//! readable ids.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            /// Fresh random (v4) identifier.
            pub fn generate() -> Self {
                Self(uuid::Uuid::new_v4().to_string())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }
    };
}

id_type!(
    /// Any authenticated principal: learner, teacher, parent or administrator.
    UserId
);
id_type!(LearnerId);
id_type!(SupportId);
id_type!(PlanId);
id_type!(SessionId);
id_type!(QuizId);
id_type!(DocId);
id_type!(ChunkId);
id_type!(EventId);

impl From<LearnerId> for UserId {
    fn from(value: LearnerId) -> Self {
        UserId(value.0)
    }
}

impl From<&LearnerId> for UserId {
    fn from(value: &LearnerId) -> Self {
        UserId(value.0.clone())
    }
}

impl From<UserId> for LearnerId {
    fn from(value: UserId) -> Self {
        LearnerId(value.0)
    }
}
