//! The closed loop: spelled text goes to the LLM gateway, the answer becomes
//! a flicker paradigm, decoded gaze picks a block, and the block's instruction
//! runs on the simulated fleet. Every step is an event in an append-only log.

pub mod calibrate;
pub mod config;
pub mod engine;
pub mod log;
pub mod server;
pub mod state;

pub use config::ServiceConfig;
pub use engine::{Outcome, Session, SessionBuilder, SessionError, SessionSettings, DEFAULT_MARGIN_THRESHOLD};
pub use log::{read_events, replay, replay_reader, EventLog, ReplayError};
pub use server::{router, Service, SessionView};
pub use state::{
    ConfirmReason, ErrorStage, EventBody, GazeSource, PendingAction, Phase, SessionEvent, SessionFault, SessionState,
    StateError,
};
