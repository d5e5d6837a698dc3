//! Client for external model backends (prediction, CAMs, adversarial
//! examples) speaking newline-delimited JSON, plus a deterministic stub.

mod client;
pub mod protocol;
mod stub;
mod transport;

use std::time::Duration;

use thiserror::Error;

use crate::model::ModelError;

pub use client::{AdapterClient, AdapterConfig, HandshakeInfo, DEFAULT_TIMEOUT, SCRATCH_ENV};
pub use stub::{
    checkerboard, intensity_cam, ramp_cam, serve, stub_label, RequestHandler, StubBackend,
    INTENSITY_CAM, STUB_ADAPTER_ID, STUB_CAM,
};
pub use transport::{InProcessTransport, ProcessTransport, Transport};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter protocol mismatch: {0}")]
    ProtocolVersionMismatch(String),
    #[error("failed to start adapter: {0}")]
    SpawnFailure(String),
    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),
    #[error("backend error: {0}")]
    BackendError(String),
    #[error("cam method `{0}` not offered by the adapter")]
    UnsupportedCamMethod(String),
    #[error("attack `{0}` not offered by the adapter")]
    UnsupportedAttack(String),
    #[error("bad saliency file: {0}")]
    BadSaliencyFile(ModelError),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("{0}")]
    Exited(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
