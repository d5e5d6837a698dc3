use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::protocol::{decode_response, AttackRequest, Op, Request, Response, WireError};
use super::stub::RequestHandler;
use super::transport::{InProcessTransport, ProcessTransport, Transport};
use super::AdapterError;
use crate::model::{
    normalize_saliency, read_saliency, upsample_bilinear, Image, PredictionRecord, SaliencyMap,
};
use crate::perturb::Attack;

pub const SCRATCH_ENV: &str = "CAMROBUST_SCRATCH";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct AdapterConfig {
    /// Per-request limit; a timed-out backend is restarted once.
    pub timeout: Duration,
    /// Parent of the per-run scratch directory. Falls back to
    /// `$CAMROBUST_SCRATCH`, then the system temp directory.
    pub scratch_root: Option<PathBuf>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            scratch_root: None,
        }
    }
}

/// What the backend reported at handshake.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandshakeInfo {
    pub adapter_id: String,
    pub cams: Vec<String>,
    pub attacks: Vec<String>,
}

/// Protocol client bound to one backend. Not shared between threads; each
/// worker owns its own client.
pub struct AdapterClient {
    transport: Box<dyn Transport>,
    info: HandshakeInfo,
    timeout: Duration,
    next_id: u64,
    scratch: Option<TempDir>,
}

impl AdapterClient {
    /// Spawns `command` (shell-style quoting, no shell) and handshakes. The
    /// child sees the scratch directory in `$CAMROBUST_SCRATCH`.
    pub fn spawn(command: &str, config: &AdapterConfig) -> Result<Self, AdapterError> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| AdapterError::SpawnFailure(format!("cannot parse command `{command}`")))?;
        let scratch = make_scratch(config)?;
        let env = vec![(SCRATCH_ENV.to_owned(), scratch.path().display().to_string())];
        let transport = ProcessTransport::spawn(argv, env)?;
        Self::connect(Box::new(transport), scratch, config.timeout)
    }

    /// Runs a handler in-process; `make` receives the scratch directory.
    pub fn in_process<H, F>(make: F, config: &AdapterConfig) -> Result<Self, AdapterError>
    where
        H: RequestHandler + Send + 'static,
        F: FnOnce(&Path) -> H,
    {
        let scratch = make_scratch(config)?;
        let handler = make(scratch.path());
        Self::connect(
            Box::new(InProcessTransport::new(Box::new(handler))),
            scratch,
            config.timeout,
        )
    }

    /// Wraps an arbitrary transport. The caller owns file hygiene.
    pub fn with_transport(
        transport: Box<dyn Transport>,
        timeout: Duration,
    ) -> Result<Self, AdapterError> {
        let mut client = Self {
            transport,
            info: HandshakeInfo {
                adapter_id: String::new(),
                cams: Vec::new(),
                attacks: Vec::new(),
            },
            timeout,
            next_id: 0,
            scratch: None,
        };
        client.handshake()?;
        Ok(client)
    }

    fn connect(
        transport: Box<dyn Transport>,
        scratch: TempDir,
        timeout: Duration,
    ) -> Result<Self, AdapterError> {
        let mut client = Self::with_transport(transport, timeout)?;
        client.scratch = Some(scratch);
        Ok(client)
    }

    pub fn info(&self) -> &HandshakeInfo {
        &self.info
    }

    pub fn adapter_id(&self) -> &str {
        &self.info.adapter_id
    }

    /// Per-run exchange directory, removed on shutdown or drop.
    pub fn scratch_dir(&self) -> Option<&Path> {
        self.scratch.as_ref().map(TempDir::path)
    }

    fn handshake(&mut self) -> Result<(), AdapterError> {
        let req = self.request(Op::Handshake);
        let resp = self.exchange(&req).map_err(|e| match e {
            AdapterError::ProtocolError(detail) => AdapterError::ProtocolVersionMismatch(detail),
            AdapterError::Exited(detail) => AdapterError::SpawnFailure(detail),
            other => other,
        })?;
        self.info = HandshakeInfo {
            adapter_id: resp.adapter_id.expect("checked"),
            cams: resp.cams.expect("checked"),
            attacks: resp.attacks.expect("checked"),
        };
        Ok(())
    }

    fn request(&mut self, op: Op) -> Request {
        self.next_id += 1;
        Request::new(format!("r{}", self.next_id), op)
    }

    fn exchange(&mut self, req: &Request) -> Result<Response, AdapterError> {
        self.transport.send(&req.to_line())?;
        let line = self.transport.recv(self.timeout)?;
        let resp = decode_response(&line).map_err(|e| match e {
            WireError::Version { .. } => AdapterError::ProtocolVersionMismatch(e.to_string()),
            _ => AdapterError::ProtocolError(e.to_string()),
        })?;
        if resp.id != req.id {
            return Err(AdapterError::ProtocolError(format!(
                "response for unknown request id `{}` (pending `{}`)",
                resp.id, req.id
            )));
        }
        resp.check_for(req.op)
            .map_err(|e| AdapterError::ProtocolError(e.to_string()))?;
        if let Some(detail) = resp.error {
            return Err(AdapterError::BackendError(detail));
        }
        Ok(resp)
    }

    /// One exchange, with a single restart-and-retry after a timeout.
    fn call(&mut self, req: Request) -> Result<Response, AdapterError> {
        match self.exchange(&req) {
            Err(AdapterError::Timeout(after)) => {
                log::warn!(
                    "adapter timed out after {after:?} on {}; restarting once",
                    req.op.name()
                );
                self.transport.restart()?;
                self.handshake()?;
                self.exchange(&req)
            }
            other => other,
        }
    }

    pub fn predict(&mut self, image_path: &Path) -> Result<PredictionRecord, AdapterError> {
        let mut req = self.request(Op::Predict);
        req.image_path = Some(image_path.display().to_string());
        let resp = self.call(req)?;
        Ok(PredictionRecord {
            label: resp.label.expect("checked"),
            adapter_id: self.info.adapter_id.clone(),
        })
    }

    /// Loads the backend's map, min-max normalizes it and upsamples it to
    /// `width x height`.
    pub fn generate_cam(
        &mut self,
        image_path: &Path,
        cam_method: &str,
        width: u32,
        height: u32,
    ) -> Result<SaliencyMap, AdapterError> {
        if !self.info.cams.iter().any(|c| c == cam_method) {
            return Err(AdapterError::UnsupportedCamMethod(cam_method.to_owned()));
        }
        let mut req = self.request(Op::Cam);
        req.image_path = Some(image_path.display().to_string());
        req.cam_method = Some(cam_method.to_owned());
        let resp = self.call(req)?;
        let path = PathBuf::from(resp.saliency_path.expect("checked"));
        let raw = read_saliency(&path).map_err(AdapterError::BadSaliencyFile);
        self.discard(&path);
        let map = normalize_saliency(&raw?).map_err(AdapterError::BadSaliencyFile)?;
        upsample_bilinear(&map, width, height).map_err(AdapterError::BadSaliencyFile)
    }

    pub fn generate_adversarial(
        &mut self,
        image_path: &Path,
        attack: Attack,
        eps: Option<f64>,
    ) -> Result<Image, AdapterError> {
        if !self.info.attacks.iter().any(|a| a == attack.name()) {
            return Err(AdapterError::UnsupportedAttack(attack.name().to_owned()));
        }
        let mut req = self.request(Op::Adversarial);
        req.image_path = Some(image_path.display().to_string());
        req.attack = Some(AttackRequest {
            name: attack.name().to_owned(),
            eps,
            extra: Default::default(),
        });
        let resp = self.call(req)?;
        let path = PathBuf::from(resp.image_path.expect("checked"));
        let image = Image::load(&path).map_err(|e| {
            AdapterError::BackendError(format!("unreadable adversarial image: {e}"))
        });
        self.discard(&path);
        image
    }

    /// Deletes a backend output file once loaded, if it lives in scratch.
    fn discard(&self, path: &Path) {
        if let Some(dir) = self.scratch_dir() {
            if path.starts_with(dir) {
                let _ = std::fs::remove_file(path);
            }
        }
    }

    /// Sends `shutdown`, stops the backend and removes the scratch directory.
    pub fn shutdown(mut self) -> Result<(), AdapterError> {
        let req = self.request(Op::Shutdown);
        let result = self.exchange(&req).map(|_| ());
        self.transport.close();
        if let Some(dir) = self.scratch.take() {
            dir.close()?;
        }
        result
    }
}

impl Drop for AdapterClient {
    fn drop(&mut self) {
        self.transport.close();
    }
}

fn make_scratch(config: &AdapterConfig) -> Result<TempDir, AdapterError> {
    let root = config
        .scratch_root
        .clone()
        .or_else(|| std::env::var_os(SCRATCH_ENV).map(PathBuf::from))
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&root)?;
    Ok(tempfile::Builder::new().prefix("camrobust-").tempdir_in(root)?)
}
