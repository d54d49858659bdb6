#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use bci_core::tdca::TdcaModel;
use bci_gateway::{ChatMessage, GatewayError, LlmClient, LlmRequest, MockClient, Provider};
use bci_session::calibrate::{calibrate, CalibrationPlan};
use bci_session::{Phase, Session, SessionBuilder, SessionSettings, SessionState};

/// The 40-frequency model every session test decodes with.
pub fn model() -> Arc<TdcaModel> {
    static MODEL: OnceLock<Arc<TdcaModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| Arc::new(calibrate(&CalibrationPlan::default()).expect("calibration")))
        .clone()
}

pub fn mock() -> Arc<dyn LlmClient> {
    Arc::new(MockClient::new())
}

pub fn session(settings: SessionSettings) -> Session {
    SessionBuilder::new(settings, mock())
        .model(model())
        .start("test")
        .unwrap()
}

/// Always fails with the given error.
pub struct FailingClient(pub GatewayError);

impl LlmClient for FailingClient {
    fn provider(&self) -> Provider {
        Provider::Remote
    }

    fn complete(&self, _req: &LlmRequest, _messages: &[ChatMessage]) -> Result<String, GatewayError> {
        Err(self.0.clone())
    }
}

/// Replays the transcript and checks every phase change against the
/// declared machine and that no device changed without a decode before it.
pub fn assert_lawful(state: &SessionState) {
    let mut s = SessionState::fresh();
    let mut armed = false;
    for e in &state.transcript {
        let trace = s.apply(e.clone()).expect("transcript replays");
        for (from, to) in trace {
            assert!(from.can_transition(to), "{from:?} -> {to:?} at seq {}", e.seq);
        }
        match e.body.kind() {
            "gaze_decoded" => armed = true,
            "instruction_executed" => {
                assert!(armed, "execution at seq {} without a decode", e.seq);
                armed = false;
            }
            _ => {}
        }
    }
    assert_eq!(&s, state);
    assert_ne!(s.phase, Phase::Executing);
}

pub fn lamp_power(state: &SessionState, name: &str) -> String {
    state.fleet.query_state(name).unwrap().status()["power"].clone()
}
