use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use camrobust::adapter::protocol::{decode_request, Op, Request, Response};
use camrobust::adapter::{
    AdapterClient, AdapterConfig, AdapterError, InProcessTransport, RequestHandler, StubBackend,
    Transport, STUB_ADAPTER_ID,
};
use camrobust::model::Image;
use camrobust::perturb::Attack;

fn stub_command(extra: &str) -> String {
    format!("'{}' stub-adapter {extra}", env!("CARGO_BIN_EXE_camrobust"))
}

fn config(root: &Path) -> AdapterConfig {
    AdapterConfig {
        timeout: Duration::from_secs(10),
        scratch_root: Some(root.to_path_buf()),
    }
}

fn sample_image(dir: &Path) -> PathBuf {
    let path = dir.join("sample.png");
    Image::from_fn(20, 14, |x, y| [(x * 12) as u8, (y * 18) as u8, 90])
        .unwrap()
        .save_png(&path)
        .unwrap();
    path
}

fn scratch_entries(root: &Path) -> usize {
    std::fs::read_dir(root).unwrap().count()
}

#[test]
fn real_process_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let mut client = AdapterClient::spawn(&stub_command("--intensity-cam"), &config(root.path())).unwrap();
    assert_eq!(client.adapter_id(), STUB_ADAPTER_ID);
    assert_eq!(client.info().cams, ["stubcam", "intensitycam"]);
    assert_eq!(client.info().attacks, ["fgsm"]);

    let scratch = client.scratch_dir().unwrap().to_path_buf();
    assert!(scratch.starts_with(root.path()));

    let label = client.predict(&image).unwrap();
    assert_eq!(label.adapter_id, STUB_ADAPTER_ID);
    let cam = client.generate_cam(&image, "stubcam", 20, 14).unwrap();
    assert_eq!((cam.width(), cam.height()), (20, 14));
    assert_eq!(cam.get(0, 0), 0.0);
    assert_eq!(cam.get(19, 13), 1.0);
    let adv = client.generate_adversarial(&image, Attack::Fgsm, Some(0.1)).unwrap();
    assert_eq!((adv.width(), adv.height()), (20, 14));
    assert_eq!(std::fs::read_dir(&scratch).unwrap().count(), 0, "outputs left in scratch");

    client.shutdown().unwrap();
    assert!(!scratch.exists());
    assert_eq!(scratch_entries(root.path()), 1, "only the sample image remains");
}

#[test]
fn scratch_root_from_environment() {
    let root = tempfile::tempdir().unwrap();
    // the variable is read only when the config leaves the root unset
    unsafe { std::env::set_var(camrobust::adapter::SCRATCH_ENV, root.path()) };
    let client = AdapterClient::spawn(&stub_command(""), &AdapterConfig::default()).unwrap();
    unsafe { std::env::remove_var(camrobust::adapter::SCRATCH_ENV) };
    let scratch = client.scratch_dir().unwrap().to_path_buf();
    assert!(scratch.starts_with(root.path()), "{scratch:?}");
    client.shutdown().unwrap();
    assert!(!scratch.exists());
}

#[test]
fn garbage_handshake_is_protocol_mismatch() {
    let root = tempfile::tempdir().unwrap();
    let err = AdapterClient::spawn("sh -c 'echo garbage; sleep 1'", &config(root.path()))
        .err()
        .unwrap();
    assert!(matches!(err, AdapterError::ProtocolVersionMismatch(_)), "{err:?}");
}

#[test]
fn wrong_version_is_protocol_mismatch() {
    let root = tempfile::tempdir().unwrap();
    let reply = r#"{"v":2,"id":"r1","status":"ok","adapter_id":"x","cams":[],"attacks":[]}"#;
    let err = AdapterClient::spawn(&format!("sh -c 'read line; echo {}; sleep 1'", shell_quote(reply)), &config(root.path()))
        .err()
        .unwrap();
    assert!(matches!(err, AdapterError::ProtocolVersionMismatch(_)), "{err:?}");
}

fn shell_quote(s: &str) -> String {
    format!("'\\''{s}'\\''")
}

#[test]
fn exiting_backend_is_spawn_failure() {
    let root = tempfile::tempdir().unwrap();
    for command in ["false", "/nonexistent/adapter-binary"] {
        let err = AdapterClient::spawn(command, &config(root.path())).err().unwrap();
        assert!(matches!(err, AdapterError::SpawnFailure(_)), "{command}: {err:?}");
    }
}

#[test]
fn silent_backend_times_out() {
    let root = tempfile::tempdir().unwrap();
    let cfg = AdapterConfig {
        timeout: Duration::from_millis(200),
        scratch_root: Some(root.path().to_path_buf()),
    };
    let err = AdapterClient::spawn("sleep 5", &cfg).err().unwrap();
    assert!(matches!(err, AdapterError::Timeout(_)), "{err:?}");
}

#[test]
fn unsupported_methods_are_rejected_before_sending() {
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let mut client =
        AdapterClient::in_process(|dir| StubBackend::new(dir), &config(root.path())).unwrap();
    let err = client.generate_cam(&image, "gradcam", 20, 14).unwrap_err();
    assert!(matches!(err, AdapterError::UnsupportedCamMethod(ref m) if m == "gradcam"), "{err:?}");
    let err = client.generate_adversarial(&image, Attack::Cw, None).unwrap_err();
    assert!(matches!(err, AdapterError::UnsupportedAttack(ref a) if a == "cw"), "{err:?}");
    client.shutdown().unwrap();
}

#[test]
fn backend_error_is_reported() {
    let root = tempfile::tempdir().unwrap();
    let mut client =
        AdapterClient::in_process(|dir| StubBackend::new(dir), &config(root.path())).unwrap();
    let err = client.predict(&root.path().join("missing.png")).unwrap_err();
    assert!(matches!(err, AdapterError::BackendError(_)), "{err:?}");
    // the client is still usable afterwards
    client.predict(&sample_image(root.path())).unwrap();
}

/// Stub that truncates every saliency file it writes.
struct TruncatingBackend(StubBackend);

impl RequestHandler for TruncatingBackend {
    fn handle(&mut self, request: &Request) -> Response {
        let resp = self.0.handle(request);
        if let Some(path) = &resp.saliency_path {
            let bytes = std::fs::read(path).unwrap();
            std::fs::write(path, &bytes[..bytes.len() - 5]).unwrap();
        }
        resp
    }
}

#[test]
fn truncated_saliency_file_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let mut client = AdapterClient::in_process(
        |dir| TruncatingBackend(StubBackend::new(dir)),
        &config(root.path()),
    )
    .unwrap();
    let err = client.generate_cam(&image, "stubcam", 20, 14).unwrap_err();
    assert!(matches!(err, AdapterError::BadSaliencyFile(_)), "{err:?}");
    let scratch = client.scratch_dir().unwrap().to_path_buf();
    assert_eq!(std::fs::read_dir(&scratch).unwrap().count(), 0);
}

/// Swallows the first `hangs` cam requests, reporting a timeout instead.
struct HangingTransport {
    inner: InProcessTransport,
    scratch: PathBuf,
    hangs: usize,
    hanging: bool,
    restarts: Arc<AtomicUsize>,
}

impl Transport for HangingTransport {
    fn send(&mut self, line: &str) -> Result<(), AdapterError> {
        let req = decode_request(line.trim_end()).unwrap();
        if req.op == Op::Cam && self.hangs > 0 {
            self.hangs -= 1;
            self.hanging = true;
            return Ok(());
        }
        self.inner.send(line)
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        if std::mem::take(&mut self.hanging) {
            return Err(AdapterError::Timeout(timeout));
        }
        self.inner.recv(timeout)
    }

    fn restart(&mut self) -> Result<(), AdapterError> {
        self.restarts.fetch_add(1, Ordering::SeqCst);
        self.inner = InProcessTransport::new(Box::new(StubBackend::new(&self.scratch)));
        Ok(())
    }

    fn close(&mut self) {
        self.inner.close();
    }
}

fn hanging_client(root: &Path, hangs: usize) -> (AdapterClient, Arc<AtomicUsize>) {
    let restarts = Arc::new(AtomicUsize::new(0));
    let transport = HangingTransport {
        inner: InProcessTransport::new(Box::new(StubBackend::new(root))),
        scratch: root.to_path_buf(),
        hangs,
        hanging: false,
        restarts: restarts.clone(),
    };
    let client = AdapterClient::with_transport(Box::new(transport), Duration::from_millis(50)).unwrap();
    (client, restarts)
}

#[test]
fn one_timeout_restarts_and_retries() {
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let (mut client, restarts) = hanging_client(root.path(), 1);
    let cam = client.generate_cam(&image, "stubcam", 20, 14).unwrap();
    assert_eq!(cam.get(19, 13), 1.0);
    assert_eq!(restarts.load(Ordering::SeqCst), 1);
}

#[test]
fn second_timeout_is_fatal() {
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let (mut client, restarts) = hanging_client(root.path(), 2);
    let err = client.generate_cam(&image, "stubcam", 20, 14).unwrap_err();
    assert!(matches!(err, AdapterError::Timeout(_)), "{err:?}");
    assert_eq!(restarts.load(Ordering::SeqCst), 1);
}

#[test]
fn process_restart_rehandshakes() {
    // a real process that hangs on its first request after the handshake
    let root = tempfile::tempdir().unwrap();
    let image = sample_image(root.path());
    let marker = root.path().join("hung-once");
    let script = format!(
        "if [ -e '{m}' ]; then exec '{exe}' stub-adapter; else touch '{m}'; read l; \
         echo '{{\"v\":1,\"id\":\"r1\",\"status\":\"ok\",\"adapter_id\":\"stub-v1\",\"cams\":[\"stubcam\"],\"attacks\":[\"fgsm\"]}}'; sleep 30; fi",
        m = marker.display(),
        exe = env!("CARGO_BIN_EXE_camrobust"),
    );
    let cfg = AdapterConfig {
        timeout: Duration::from_millis(500),
        scratch_root: Some(root.path().to_path_buf()),
    };
    let command = format!("sh -c \"{}\"", script.replace('"', "\\\""));
    let mut client = AdapterClient::spawn(&command, &cfg).unwrap();
    let label = client.predict(&image).unwrap();
    assert_eq!(label.adapter_id, STUB_ADAPTER_ID);
    client.shutdown().unwrap();
}
