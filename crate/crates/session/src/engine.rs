use std::io;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use bci_core::devices::{discover, Fleet};
use bci_core::langmodel::LanguageStore;
use bci_core::paradigm::{
    build_paradigm, build_plan_paradigm, BlockRole, FrequencyStrategy, ParadigmBlock, ParadigmPages, ParadigmPrefs,
};
use bci_core::signal::{EegTrial, PreprocessError, Preprocessor};
use bci_core::tdca::{classify_among, TargetDecision, TdcaError, TdcaModel};
use bci_gateway::{infer, LlmClient, LlmRequest, Payload};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

use crate::calibrate::gaze_trial;
use crate::log::EventLog;
use crate::state::{
    device_fault, ConfirmReason, ErrorStage, EventBody, GazeSource, PendingAction, Phase, SessionEvent, SessionFault,
    SessionState, StateError,
};

pub const DEFAULT_MARGIN_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    pub language: String,
    /// Decisions with a smaller top-1 minus top-2 score ask for confirmation.
    pub margin_threshold: f64,
    pub paradigm: ParadigmPrefs,
    /// Upper bound on functions or steps the model may offer.
    pub max_blocks: usize,
    /// When set, block choices are decoded from a trial synthesized at this
    /// SNR (dB) instead of being taken at face value.
    pub synthesize_gaze_snr_db: Option<f64>,
    pub seed: u64,
    pub preprocessor: Option<Preprocessor>,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            language: "en".into(),
            margin_threshold: DEFAULT_MARGIN_THRESHOLD,
            paradigm: ParadigmPrefs::default(),
            max_blocks: 40,
            synthesize_gaze_snr_db: None,
            seed: 0,
            preprocessor: Some(Preprocessor::default()),
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{action} is not allowed in phase {phase:?}")]
    WrongPhase { action: &'static str, phase: Phase },
    #[error("spelled text is empty")]
    EmptyText,
    #[error("no block {0:?} on the active page")]
    UnknownBlock(String),
    #[error("no decoder model is loaded")]
    NoModel,
    #[error("trial does not match the model: {0}")]
    TrialMismatch(String),
    #[error("page cannot be decoded with this model: {0}")]
    NotDecodable(String),
    #[error("decoder: {0}")]
    Decode(#[from] TdcaError),
    #[error("event log: {0}")]
    Log(#[from] io::Error),
    #[error("internal state: {0}")]
    State(#[from] StateError),
    #[error("configuration: {0}")]
    Config(String),
}

/// What one command committed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub events: Vec<SessionEvent>,
    pub decision: Option<TargetDecision>,
}

pub struct SessionBuilder {
    settings: SessionSettings,
    gateway: Arc<dyn LlmClient>,
    model: Option<Arc<TdcaModel>>,
    store: Option<Arc<LanguageStore>>,
    fleet: Fleet,
    log: Option<EventLog>,
}

impl SessionBuilder {
    pub fn new(settings: SessionSettings, gateway: Arc<dyn LlmClient>) -> Self {
        Self {
            settings,
            gateway,
            model: None,
            store: None,
            fleet: Fleet::demo(),
            log: None,
        }
    }

    pub fn model(mut self, model: Arc<TdcaModel>) -> Self {
        self.model = Some(model);
        self
    }

    /// Used to detect the language of spelled text submitted without one.
    pub fn language_store(mut self, store: Arc<LanguageStore>) -> Self {
        self.store = Some(store);
        self
    }

    pub fn fleet(mut self, fleet: Fleet) -> Self {
        self.fleet = fleet;
        self
    }

    pub fn log_to(mut self, path: impl AsRef<Path>) -> io::Result<Self> {
        self.log = Some(EventLog::open(path)?);
        Ok(self)
    }

    fn check(&self) -> Result<(), SessionError> {
        if self.settings.margin_threshold.is_nan() || self.settings.margin_threshold < 0.0 {
            return Err(SessionError::Config("margin_threshold must be >= 0".into()));
        }
        if self.settings.synthesize_gaze_snr_db.is_some() && self.model.is_none() {
            return Err(SessionError::Config("synthesized gaze needs a decoder model".into()));
        }
        Ok(())
    }

    pub fn start(self, session_id: &str) -> Result<Session, SessionError> {
        self.check()?;
        let body = EventBody::SessionStarted {
            session_id: session_id.to_string(),
            language: self.settings.language.clone(),
            model_ref: self.model.as_ref().map(|m| m.model_id()),
            fleet: self.fleet.clone(),
        };
        let mut session = self.into_session(SessionState::fresh());
        session.commit(body)?;
        Ok(session)
    }

    /// Continues a replayed session; new events are appended after its last.
    pub fn resume(self, state: SessionState) -> Result<Session, SessionError> {
        self.check()?;
        if state.transcript.is_empty() {
            return Err(SessionError::Config(
                "cannot resume a session that never started".into(),
            ));
        }
        Ok(self.into_session(state))
    }

    fn into_session(self, state: SessionState) -> Session {
        Session {
            state,
            settings: self.settings,
            gateway: self.gateway,
            model: self.model,
            store: self.store,
            log: self.log,
            subscribers: Vec::new(),
        }
    }
}

/// One user's loop. Every mutation goes through [`Session::commit`], so the
/// transcript alone reproduces the state.
pub struct Session {
    state: SessionState,
    settings: SessionSettings,
    gateway: Arc<dyn LlmClient>,
    model: Option<Arc<TdcaModel>>,
    store: Option<Arc<LanguageStore>>,
    log: Option<EventLog>,
    subscribers: Vec<UnboundedSender<SessionEvent>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn model(&self) -> Option<&Arc<TdcaModel>> {
        self.model.as_ref()
    }

    /// Events after `after_seq`, plus a channel that receives every later
    /// event exactly once, in order.
    pub fn subscribe(&mut self, after_seq: u64) -> (Vec<SessionEvent>, UnboundedReceiver<SessionEvent>) {
        let (tx, rx) = unbounded_channel();
        self.subscribers.push(tx);
        let backlog = self
            .state
            .transcript
            .iter()
            .filter(|e| e.seq > after_seq)
            .cloned()
            .collect();
        (backlog, rx)
    }

    fn commit(&mut self, body: EventBody) -> Result<SessionEvent, SessionError> {
        let event = SessionEvent {
            seq: self.state.last_seq() + 1,
            timestamp_ms: now_ms(),
            body,
        };
        self.state.apply(event.clone())?;
        if let Some(log) = &mut self.log {
            log.append(&event)?;
        }
        self.subscribers.retain(|s| s.send(event.clone()).is_ok());
        Ok(event)
    }

    fn require(&self, action: &'static str, phase: Phase) -> Result<(), SessionError> {
        if self.state.phase == phase {
            Ok(())
        } else {
            Err(SessionError::WrongPhase {
                action,
                phase: self.state.phase,
            })
        }
    }

    fn resolve_language(&self, text: &str, language: Option<&str>) -> String {
        match language.map(str::trim).filter(|l| !l.is_empty() && *l != "auto") {
            Some(l) => l.to_string(),
            None => match &self.store {
                Some(store) => {
                    let d = store.detect(text);
                    if d.low_confidence {
                        self.state.language.clone()
                    } else {
                        d.language
                    }
                }
                None => self.state.language.clone(),
            },
        }
    }

    fn prefs(&self) -> ParadigmPrefs {
        let mut prefs = self.settings.paradigm.clone();
        prefs.prior_revision = self.state.revision;
        if let Some(m) = &self.model {
            prefs.strategy = FrequencyStrategy::CalibratedGrid(m.config.class_freqs_hz.clone());
        }
        prefs
    }

    /// Commits the text, asks the gateway, and turns the answer into a
    /// paradigm, a prompt, or an error.
    pub fn submit_spelled_text(&mut self, text: &str, language: Option<&str>) -> Result<Outcome, SessionError> {
        self.require("spell", Phase::Spelling)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::EmptyText);
        }
        let language = self.resolve_language(text, language);
        let mut events = vec![self.commit(EventBody::Spelled {
            text: text.to_string(),
            language: language.clone(),
        })?];
        let request = LlmRequest::paradigm(text, &language, discover(&self.state.fleet), self.settings.max_blocks);
        events.push(self.commit(EventBody::LlmRequest {
            request: request.clone(),
        })?);
        let response = match infer(self.gateway.as_ref(), &request) {
            Ok(r) => r,
            Err(e) => {
                events.push(self.commit(EventBody::Error {
                    fault: SessionFault {
                        stage: ErrorStage::Gateway,
                        message: e.to_string(),
                        recoverable: true,
                    },
                })?);
                return Ok(Outcome { events, decision: None });
            }
        };
        let payload = response.payload.clone();
        events.push(self.commit(EventBody::LlmResponse { response })?);
        let built: Result<(ParadigmPages, _), _> = match payload {
            Payload::Clarification { question } => {
                events.push(self.commit(EventBody::Prompt { question })?);
                return Ok(Outcome { events, decision: None });
            }
            Payload::Catalog(c) => build_paradigm(&c, &self.prefs(), &language).map(|p| (p, None)),
            Payload::TaskPlan(plan) => build_plan_paradigm(&plan, &self.prefs(), &language).map(|p| (p, Some(plan))),
        };
        let body = match built {
            Ok((pages, plan)) => EventBody::ParadigmUpdated {
                pages: pages.pages,
                plan,
                warnings: pages.warnings,
            },
            Err(e) => EventBody::Error {
                fault: SessionFault {
                    stage: ErrorStage::Paradigm,
                    message: e.to_string(),
                    recoverable: true,
                },
            },
        };
        events.push(self.commit(body)?);
        Ok(Outcome { events, decision: None })
    }

    fn active_blocks(&self) -> Result<&[ParadigmBlock], SessionError> {
        self.state
            .active_paradigm()
            .map(|p| p.blocks.as_slice())
            .ok_or(SessionError::WrongPhase {
                action: "gaze",
                phase: self.state.phase,
            })
    }

    /// Model class of every block on the page, in block order.
    fn block_classes(&self, model: &TdcaModel) -> Result<Vec<usize>, SessionError> {
        self.active_blocks()?
            .iter()
            .map(|b| {
                model
                    .config
                    .class_freqs_hz
                    .iter()
                    .position(|f| (f - b.freq_hz).abs() < 1e-6)
                    .ok_or_else(|| SessionError::NotDecodable(format!("{} at {} Hz", b.block_id, b.freq_hz)))
            })
            .collect()
    }

    /// Decodes among the blocks on the page. `Ok(Err(fault))` is a trial the
    /// preprocessing chain rejected.
    fn decode(&self, trial: &EegTrial) -> Result<Result<(TargetDecision, String), SessionFault>, SessionError> {
        let model = self.model.as_ref().ok_or(SessionError::NoModel)?;
        if *trial.config() != model.acquisition {
            return Err(SessionError::TrialMismatch(format!(
                "trial is {:?}, model expects {:?}",
                trial.config(),
                model.acquisition
            )));
        }
        let classes = self.block_classes(model)?;
        let trial = match &self.settings.preprocessor {
            None => trial.clone(),
            Some(p) => match p.run(trial) {
                Ok(t) => t,
                Err(PreprocessError::Artifact(r)) => {
                    return Ok(Err(SessionFault {
                        stage: ErrorStage::Decode,
                        message: format!("trial rejected: artifact on channels {:?}", r.channels),
                        recoverable: true,
                    }))
                }
                Err(PreprocessError::Signal(e)) => return Err(SessionError::Decode(e.into())),
            },
        };
        let decision = classify_among(model, &trial, Some(&classes))?;
        let idx = classes
            .iter()
            .position(|c| *c == decision.decided_class)
            .expect("decided class is a candidate");
        let block_id = self.active_blocks()?[idx].block_id.clone();
        Ok(Ok((decision, block_id)))
    }

    pub fn submit_gaze_trial(&mut self, trial: &EegTrial) -> Result<Outcome, SessionError> {
        self.require("gaze", Phase::ParadigmActive)?;
        match self.decode(trial)? {
            Ok((decision, block_id)) => self.dispatch(GazeSource::Trial, block_id, Some(decision), None, None),
            Err(fault) => Ok(Outcome {
                events: vec![self.commit(EventBody::Error { fault })?],
                decision: None,
            }),
        }
    }

    /// Same effects as a decoded gaze at `block_id`. With synthesized gaze on,
    /// a trial at the block's frequency goes through the real decoder and the
    /// decoded block, which may differ, is the one acted on.
    pub fn submit_block_choice(&mut self, block_id: &str) -> Result<Outcome, SessionError> {
        self.require("choose", Phase::ParadigmActive)?;
        let block = self
            .active_blocks()?
            .iter()
            .find(|b| b.block_id == block_id)
            .ok_or_else(|| SessionError::UnknownBlock(block_id.to_string()))?
            .clone();
        let (Some(snr), Some(model)) = (self.settings.synthesize_gaze_snr_db, self.model.clone()) else {
            return self.dispatch(GazeSource::Choice, block.block_id, None, None, None);
        };
        let seed = self
            .settings
            .seed
            .wrapping_add((self.state.last_seq() + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let trial = gaze_trial(&model, block.freq_hz, snr, seed).map_err(|e| SessionError::Decode(e.into()))?;
        match self.decode(&trial)? {
            Ok((decision, decoded)) => self.dispatch(
                GazeSource::SynthesizedTrial,
                decoded,
                Some(decision),
                Some(block.block_id),
                Some(seed),
            ),
            Err(fault) => Ok(Outcome {
                events: vec![self.commit(EventBody::Error { fault })?],
                decision: None,
            }),
        }
    }

    fn dispatch(
        &mut self,
        source: GazeSource,
        block_id: String,
        decision: Option<TargetDecision>,
        chosen_block: Option<String>,
        trial_seed: Option<u64>,
    ) -> Result<Outcome, SessionError> {
        let block = self
            .active_blocks()?
            .iter()
            .find(|b| b.block_id == block_id)
            .ok_or_else(|| SessionError::UnknownBlock(block_id.clone()))?
            .clone();
        let margin = decision.as_ref().map(|d| d.margin);
        let mut events = vec![self.commit(EventBody::GazeDecoded {
            source,
            block_id: block_id.clone(),
            decision: decision.clone(),
            chosen_block,
            trial_seed,
        })?];
        let threshold = self.settings.margin_threshold;
        let low = margin.filter(|m| *m < threshold);
        let body = match (block.role, low) {
            (BlockRole::Action, Some(margin)) => EventBody::ConfirmRequired {
                pending: PendingAction {
                    block_id,
                    instruction: block.action.clone(),
                    reason: ConfirmReason::LowMargin { margin, threshold },
                },
            },
            (_, Some(margin)) => EventBody::Error {
                fault: SessionFault {
                    stage: ErrorStage::Decode,
                    message: format!("ignored {block_id}: margin {margin:.4} below {threshold}"),
                    recoverable: true,
                },
            },
            (BlockRole::Action, None) => match self.state.fleet.target_kind(&block.action) {
                Ok(kind) if kind.requires_confirmation() => EventBody::ConfirmRequired {
                    pending: PendingAction {
                        block_id,
                        instruction: block.action.clone(),
                        reason: ConfirmReason::UnsafeDevice {
                            device: kind.instruction_name().to_string(),
                        },
                    },
                },
                _ => self.execution(block_id, &block.action),
            },
            (BlockRole::Confirm, None) => match self.state.pending_confirm.clone() {
                Some(p) => self.execution(p.block_id, &p.instruction),
                None => EventBody::Error {
                    fault: SessionFault {
                        stage: ErrorStage::Navigation,
                        message: "nothing to confirm".into(),
                        recoverable: true,
                    },
                },
            },
            (role @ (BlockRole::Next | BlockRole::Prev), None) => {
                let page = if role == BlockRole::Next {
                    self.state.page + 1
                } else {
                    self.state.page.saturating_sub(1)
                };
                EventBody::Navigated { role, page }
            }
            (role, None) => EventBody::Navigated {
                role,
                page: self.state.page,
            },
        };
        events.push(self.commit(body)?);
        Ok(Outcome { events, decision })
    }

    fn execution(&self, block_id: String, instruction: &bci_core::intent::ControlInstruction) -> EventBody {
        let mut fleet = self.state.fleet.clone();
        match fleet.execute(instruction) {
            Ok(result) => EventBody::InstructionExecuted { block_id, result },
            Err(e) => EventBody::Error {
                fault: device_fault(&e),
            },
        }
    }

    /// Leaves any paradigm or error and returns to spelling.
    pub fn reset(&mut self) -> Result<Outcome, SessionError> {
        if !matches!(self.state.phase, Phase::Spelling | Phase::ParadigmActive | Phase::Error) {
            return Err(SessionError::WrongPhase {
                action: "reset",
                phase: self.state.phase,
            });
        }
        Ok(Outcome {
            events: vec![self.commit(EventBody::Reset {})?],
            decision: None,
        })
    }
}
