//! Goal-directed dialogue simulator: entity inventory, user goals and
//! profiles, dialogue acts, the user model / system policy pair, template
//! realization, and batch corpus generation.

pub mod acts;
pub mod dialogue;
pub mod entities;
pub mod generate;
pub mod goal;
pub mod nlg;

pub use dialogue::{simulate_dialogue, SimulatedDialogue};
pub use entities::{EntityBank, EntityPool};
pub use generate::{generate_corpus, generate_dataset, CorpusCounts, SPLIT_FILES};
pub use goal::{sample_goal, SlotConstraint, UserGoal, UserProfile};
