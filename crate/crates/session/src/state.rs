use bci_core::devices::{DeviceError, ExecutionResult, Fleet};
use bci_core::intent::{ControlInstruction, TaskPlan};
use bci_core::paradigm::{BlockRole, ParadigmSpec};
use bci_core::tdca::TargetDecision;
use bci_gateway::{LlmRequest, LlmResponse};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Spelling,
    AwaitingLlm,
    ParadigmActive,
    Executing,
    Error,
}

impl Phase {
    /// The declared machine. `Error -> Spelling` is the explicit reset.
    pub fn can_transition(self, to: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, to),
            (Spelling, AwaitingLlm)
                | (AwaitingLlm, ParadigmActive)
                | (AwaitingLlm, Spelling)
                | (AwaitingLlm, Error)
                | (ParadigmActive, Executing)
                | (Executing, ParadigmActive)
                | (ParadigmActive, Spelling)
                | (Error, Spelling)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeSource {
    /// A trial submitted to the decoder.
    Trial,
    /// A block picked directly, without decoding.
    Choice,
    /// A block picked and then decoded from a synthesized trial.
    SynthesizedTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConfirmReason {
    LowMargin { margin: f64, threshold: f64 },
    UnsafeDevice { device: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorStage {
    Gateway,
    Paradigm,
    Decode,
    Device,
    Navigation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingAction {
    pub block_id: String,
    #[serde(with = "instruction_text")]
    pub instruction: ControlInstruction,
    pub reason: ConfirmReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFault {
    pub stage: ErrorStage,
    pub message: String,
    pub recoverable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    SessionStarted {
        session_id: String,
        language: String,
        model_ref: Option<String>,
        fleet: Fleet,
    },
    Spelled {
        text: String,
        language: String,
    },
    LlmRequest {
        request: LlmRequest,
    },
    LlmResponse {
        response: LlmResponse,
    },
    /// The model asked the user a question instead of answering.
    Prompt {
        question: String,
    },
    ParadigmUpdated {
        pages: Vec<ParadigmSpec>,
        plan: Option<TaskPlan>,
        warnings: Vec<String>,
    },
    GazeDecoded {
        source: GazeSource,
        block_id: String,
        decision: Option<TargetDecision>,
        /// Block the user picked, for synthesized trials.
        chosen_block: Option<String>,
        trial_seed: Option<u64>,
    },
    ConfirmRequired {
        pending: PendingAction,
    },
    InstructionExecuted {
        block_id: String,
        result: ExecutionResult,
    },
    Navigated {
        role: BlockRole,
        page: usize,
    },
    Error {
        #[serde(flatten)]
        fault: SessionFault,
    },
    Reset {},
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SessionStarted { .. } => "session_started",
            Self::Spelled { .. } => "spelled",
            Self::LlmRequest { .. } => "llm_request",
            Self::LlmResponse { .. } => "llm_response",
            Self::Prompt { .. } => "prompt",
            Self::ParadigmUpdated { .. } => "paradigm_updated",
            Self::GazeDecoded { .. } => "gaze_decoded",
            Self::ConfirmRequired { .. } => "confirm_required",
            Self::InstructionExecuted { .. } => "instruction_executed",
            Self::Navigated { .. } => "navigated",
            Self::Error { .. } => "error",
            Self::Reset {} => "reset",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    /// Milliseconds since the Unix epoch at commit time.
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("event seq {got} does not follow {last}")]
    Sequence { last: u64, got: u64 },
    #[error("{kind} is not valid in phase {phase:?}")]
    Phase { kind: &'static str, phase: Phase },
    #[error("illegal transition {from:?} -> {to:?}")]
    Transition { from: Phase, to: Phase },
    #[error("session_started must be the first event")]
    NotStarted,
    #[error("device change without a preceding gaze or choice")]
    Unprompted,
    #[error("page {page} out of range for {count} pages")]
    Page { page: usize, count: usize },
    #[error("recorded execution diverges from the simulator: {0}")]
    Diverged(String),
}

/// Everything a session knows, rebuilt by folding its events in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: Phase,
    pub spelled_buffer: String,
    pub language: String,
    pub pages: Vec<ParadigmSpec>,
    pub page: usize,
    pub pending_plan: Option<TaskPlan>,
    pub pending_confirm: Option<PendingAction>,
    pub prompt: Option<String>,
    pub last_error: Option<SessionFault>,
    pub fleet: Fleet,
    pub model_ref: Option<String>,
    /// Highest paradigm revision seen.
    pub revision: u64,
    /// Block of the latest decode that has not yet had an effect.
    pub armed_block: Option<String>,
    pub transcript: Vec<SessionEvent>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self::fresh()
    }
}

impl SessionState {
    /// State before any event, with the demo fleet.
    pub fn fresh() -> Self {
        Self {
            session_id: String::new(),
            phase: Phase::Spelling,
            spelled_buffer: String::new(),
            language: "en".into(),
            pages: Vec::new(),
            page: 0,
            pending_plan: None,
            pending_confirm: None,
            prompt: None,
            last_error: None,
            fleet: Fleet::demo(),
            model_ref: None,
            revision: 0,
            armed_block: None,
            transcript: Vec::new(),
        }
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<Self, StateError> {
        let mut s = Self::fresh();
        for e in events {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    pub fn active_paradigm(&self) -> Option<&ParadigmSpec> {
        self.pages.get(self.page)
    }

    pub fn last_seq(&self) -> u64 {
        self.transcript.last().map_or(0, |e| e.seq)
    }

    fn go(&mut self, to: Phase, trace: &mut Vec<(Phase, Phase)>) -> Result<(), StateError> {
        if self.phase == to {
            return Ok(());
        }
        if !self.phase.can_transition(to) {
            return Err(StateError::Transition { from: self.phase, to });
        }
        trace.push((self.phase, to));
        self.phase = to;
        Ok(())
    }

    fn need(&self, kind: &'static str, phases: &[Phase]) -> Result<(), StateError> {
        if phases.contains(&self.phase) {
            Ok(())
        } else {
            Err(StateError::Phase {
                kind,
                phase: self.phase,
            })
        }
    }

    fn leave_paradigm(&mut self) {
        self.pages.clear();
        self.page = 0;
        self.pending_plan = None;
        self.pending_confirm = None;
        self.armed_block = None;
    }

    /// Applies one event and returns the phase transitions it caused. The
    /// state is unchanged when an error is returned.
    pub fn apply(&mut self, event: SessionEvent) -> Result<Vec<(Phase, Phase)>, StateError> {
        let last = self.last_seq();
        let transcript = std::mem::take(&mut self.transcript);
        let mut next = self.clone();
        self.transcript = transcript;
        let trace = next.apply_inner(&event, last)?;
        next.transcript = std::mem::take(&mut self.transcript);
        next.transcript.push(event);
        *self = next;
        Ok(trace)
    }

    fn apply_inner(&mut self, event: &SessionEvent, last: u64) -> Result<Vec<(Phase, Phase)>, StateError> {
        if event.seq != last + 1 {
            return Err(StateError::Sequence { last, got: event.seq });
        }
        let started = last > 0;
        let kind = event.body.kind();
        if started == matches!(event.body, EventBody::SessionStarted { .. }) {
            return Err(StateError::NotStarted);
        }
        let mut trace = Vec::new();
        match &event.body {
            EventBody::SessionStarted {
                session_id,
                language,
                model_ref,
                fleet,
            } => {
                self.session_id = session_id.clone();
                self.language = language.clone();
                self.model_ref = model_ref.clone();
                self.fleet = fleet.clone();
            }
            EventBody::Spelled { text, language } => {
                self.need(kind, &[Phase::Spelling])?;
                self.spelled_buffer = text.clone();
                self.language = language.clone();
                self.prompt = None;
                self.last_error = None;
                self.go(Phase::AwaitingLlm, &mut trace)?;
            }
            EventBody::LlmRequest { .. } | EventBody::LlmResponse { .. } => {
                self.need(kind, &[Phase::AwaitingLlm])?;
            }
            EventBody::Prompt { question } => {
                self.need(kind, &[Phase::AwaitingLlm])?;
                self.prompt = Some(question.clone());
                self.go(Phase::Spelling, &mut trace)?;
            }
            EventBody::ParadigmUpdated { pages, plan, .. } => {
                self.need(kind, &[Phase::AwaitingLlm])?;
                if pages.is_empty() {
                    return Err(StateError::Page { page: 0, count: 0 });
                }
                self.revision = pages
                    .iter()
                    .map(|p| p.revision)
                    .max()
                    .unwrap_or(self.revision)
                    .max(self.revision);
                self.pages = pages.clone();
                self.page = 0;
                self.pending_plan = plan.clone();
                self.pending_confirm = None;
                self.armed_block = None;
                self.go(Phase::ParadigmActive, &mut trace)?;
            }
            EventBody::GazeDecoded { block_id, .. } => {
                self.need(kind, &[Phase::ParadigmActive])?;
                self.armed_block = Some(block_id.clone());
            }
            EventBody::ConfirmRequired { pending } => {
                self.need(kind, &[Phase::ParadigmActive])?;
                if self.armed_block.take().is_none() {
                    return Err(StateError::Unprompted);
                }
                self.pending_confirm = Some(pending.clone());
            }
            EventBody::InstructionExecuted { result, .. } => {
                self.need(kind, &[Phase::ParadigmActive])?;
                if self.armed_block.take().is_none() {
                    return Err(StateError::Unprompted);
                }
                self.go(Phase::Executing, &mut trace)?;
                let replayed = self
                    .fleet
                    .execute(&result.instruction)
                    .map_err(|e| StateError::Diverged(e.to_string()))?;
                if replayed != *result {
                    return Err(StateError::Diverged(format!(
                        "{} gave {:?}",
                        result.instruction, replayed.after
                    )));
                }
                self.pending_confirm = None;
                self.go(Phase::ParadigmActive, &mut trace)?;
            }
            EventBody::Navigated { role, page } => {
                self.need(kind, &[Phase::ParadigmActive])?;
                self.armed_block = None;
                match role {
                    BlockRole::Next | BlockRole::Prev => {
                        if *page >= self.pages.len() {
                            return Err(StateError::Page {
                                page: *page,
                                count: self.pages.len(),
                            });
                        }
                        self.page = *page;
                        self.pending_confirm = None;
                    }
                    BlockRole::Back if self.pending_confirm.is_some() => self.pending_confirm = None,
                    BlockRole::Back => {
                        self.leave_paradigm();
                        self.go(Phase::Spelling, &mut trace)?;
                    }
                    BlockRole::Home => {
                        self.leave_paradigm();
                        self.spelled_buffer.clear();
                        self.go(Phase::Spelling, &mut trace)?;
                    }
                    BlockRole::Confirm | BlockRole::Action => {
                        return Err(StateError::Phase {
                            kind,
                            phase: self.phase,
                        });
                    }
                }
            }
            EventBody::Error { fault } => {
                self.last_error = Some(fault.clone());
                match fault.stage {
                    ErrorStage::Gateway | ErrorStage::Paradigm => {
                        self.need(kind, &[Phase::AwaitingLlm])?;
                        self.go(Phase::Error, &mut trace)?;
                    }
                    ErrorStage::Device => {
                        self.need(kind, &[Phase::ParadigmActive])?;
                        if self.armed_block.take().is_none() {
                            return Err(StateError::Unprompted);
                        }
                        self.pending_confirm = None;
                        self.go(Phase::Executing, &mut trace)?;
                        self.go(Phase::ParadigmActive, &mut trace)?;
                    }
                    ErrorStage::Decode | ErrorStage::Navigation => {
                        self.need(kind, &[Phase::ParadigmActive])?;
                        self.armed_block = None;
                    }
                }
            }
            EventBody::Reset {} => {
                self.need(kind, &[Phase::Spelling, Phase::ParadigmActive, Phase::Error])?;
                self.leave_paradigm();
                self.spelled_buffer.clear();
                self.prompt = None;
                self.last_error = None;
                self.go(Phase::Spelling, &mut trace)?;
            }
        }
        Ok(trace)
    }
}

/// Device errors are reported, not applied; kept here so every error message
/// in the log has one shape.
pub fn device_fault(e: &DeviceError) -> SessionFault {
    SessionFault {
        stage: ErrorStage::Device,
        message: e.to_string(),
        recoverable: true,
    }
}

mod instruction_text {
    use bci_core::intent::{parse_instruction, ControlInstruction};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &ControlInstruction, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ControlInstruction, D::Error> {
        let text = String::deserialize(d)?;
        parse_instruction(&text).map_err(serde::de::Error::custom)
    }
}
