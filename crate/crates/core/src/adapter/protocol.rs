//! Wire format: one JSON object per line, UTF-8, `\n` terminated.
//!
//! ```text
//! > {"v":1,"id":"r1","op":"cam","image_path":"/tmp/x.png","cam_method":"stubcam"}
//! < {"v":1,"id":"r1","status":"ok","saliency_path":"/tmp/r1.salm"}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("protocol version {found}, expected {PROTOCOL_VERSION}")]
    Version { found: u64 },
    #[error("invalid {op} message: {detail}")]
    Invalid { op: &'static str, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Predict,
    Cam,
    Adversarial,
    Handshake,
    Shutdown,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Predict => "predict",
            Op::Cam => "cam",
            Op::Adversarial => "adversarial",
            Op::Handshake => "handshake",
            Op::Shutdown => "shutdown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRequest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Backend-specific extras, passed through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub v: u32,
    pub id: String,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cam_method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackRequest>,
}

impl Request {
    pub fn new(id: impl Into<String>, op: Op) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id: id.into(),
            op,
            image_path: None,
            cam_method: None,
            attack: None,
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("request serializes");
        line.push('\n');
        line
    }

    /// Checks that the op-specific fields are present.
    pub fn validate(&self) -> Result<(), WireError> {
        let invalid = |detail: &str| {
            Err(WireError::Invalid {
                op: self.op.name(),
                detail: detail.to_owned(),
            })
        };
        if self.v != PROTOCOL_VERSION {
            return Err(WireError::Version { found: self.v as u64 });
        }
        let needs_image = matches!(self.op, Op::Predict | Op::Cam | Op::Adversarial);
        if needs_image && self.image_path.is_none() {
            return invalid("image_path required");
        }
        if self.op == Op::Cam && self.cam_method.is_none() {
            return invalid("cam_method required");
        }
        if self.op == Op::Adversarial && self.attack.is_none() {
            return invalid("attack required");
        }
        Ok(())
    }
}

pub fn decode_request(line: &str) -> Result<Request, WireError> {
    check_version(line)?;
    let req: Request =
        serde_json::from_str(line).map_err(|e| WireError::Malformed(e.to_string()))?;
    req.validate()?;
    Ok(req)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub v: u32,
    pub id: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saliency_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cams: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(id: impl Into<String>) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            id: id.into(),
            status: Status::Ok,
            label: None,
            saliency_path: None,
            image_path: None,
            adapter_id: None,
            cams: None,
            attacks: None,
            error: None,
        }
    }

    pub fn error(id: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            status: Status::Error,
            error: Some(detail.into()),
            ..Self::ok(id)
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("response serializes");
        line.push('\n');
        line
    }

    /// An ok response must carry exactly the fields `op` produces; an error
    /// response carries only `error`.
    pub fn check_for(&self, op: Op) -> Result<(), WireError> {
        let present = [
            ("label", self.label.is_some()),
            ("saliency_path", self.saliency_path.is_some()),
            ("image_path", self.image_path.is_some()),
            ("adapter_id", self.adapter_id.is_some()),
            ("cams", self.cams.is_some()),
            ("attacks", self.attacks.is_some()),
            ("error", self.error.is_some()),
        ];
        let required: &[&str] = match (self.status, op) {
            (Status::Error, _) => &["error"],
            (Status::Ok, Op::Predict) => &["label"],
            (Status::Ok, Op::Cam) => &["saliency_path"],
            (Status::Ok, Op::Adversarial) => &["image_path"],
            (Status::Ok, Op::Handshake) => &["adapter_id", "cams", "attacks"],
            (Status::Ok, Op::Shutdown) => &[],
        };
        for (field, is_present) in present {
            let wanted = required.contains(&field);
            if wanted != is_present {
                return Err(WireError::Invalid {
                    op: op.name(),
                    detail: if wanted {
                        format!("missing `{field}`")
                    } else {
                        format!("unexpected `{field}`")
                    },
                });
            }
        }
        Ok(())
    }
}

/// Parses one response line. Shape per op is checked separately with
/// [`Response::check_for`], since only the caller knows the pending op.
pub fn decode_response(line: &str) -> Result<Response, WireError> {
    check_version(line)?;
    serde_json::from_str(line).map_err(|e| WireError::Malformed(e.to_string()))
}

fn check_version(line: &str) -> Result<(), WireError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| WireError::Malformed(e.to_string()))?;
    match value.get("v").and_then(Value::as_u64) {
        Some(v) if v == PROTOCOL_VERSION as u64 => Ok(()),
        Some(found) => Err(WireError::Version { found }),
        None => Err(WireError::Malformed("missing numeric `v`".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_framing_is_one_line() {
        let mut req = Request::new("r7", Op::Adversarial);
        req.image_path = Some("/tmp/a b.png".into());
        req.attack = Some(AttackRequest {
            name: "fgsm".into(),
            eps: Some(0.1),
            extra: BTreeMap::new(),
        });
        let line = req.to_line();
        assert_eq!(
            line,
            "{\"v\":1,\"id\":\"r7\",\"op\":\"adversarial\",\"image_path\":\"/tmp/a b.png\",\
             \"attack\":{\"name\":\"fgsm\",\"eps\":0.1}}\n"
        );
        assert_eq!(decode_request(line.trim_end()).unwrap(), req);
    }

    #[test]
    fn missing_op_fields_rejected() {
        let err = decode_request(r#"{"v":1,"id":"a","op":"cam","image_path":"x"}"#).unwrap_err();
        assert!(matches!(err, WireError::Invalid { op: "cam", .. }));
        let err = decode_request(r#"{"v":1,"id":"a","op":"adversarial","image_path":"x"}"#)
            .unwrap_err();
        assert!(matches!(err, WireError::Invalid { op: "adversarial", .. }));
    }

    #[test]
    fn version_checked_before_shape() {
        assert_eq!(
            decode_response(r#"{"v":2,"id":"a","status":"ok"}"#).unwrap_err(),
            WireError::Version { found: 2 }
        );
        assert!(matches!(decode_response("hello"), Err(WireError::Malformed(_))));
        assert!(matches!(decode_response(r#"{"id":"a"}"#), Err(WireError::Malformed(_))));
    }

    #[test]
    fn response_shape_per_op() {
        let mut r = Response::ok("a");
        r.label = Some(3);
        assert!(r.check_for(Op::Predict).is_ok());
        assert!(r.check_for(Op::Cam).is_err());
        r.saliency_path = Some("x".into());
        assert!(r.check_for(Op::Predict).is_err());
        assert!(Response::error("a", "boom").check_for(Op::Cam).is_ok());
        assert!(Response::ok("a").check_for(Op::Shutdown).is_ok());
    }

    #[test]
    fn unknown_attack_keys_pass_through() {
        let req = decode_request(
            r#"{"v":1,"id":"a","op":"adversarial","image_path":"x","attack":{"name":"pgd","eps":0.03,"steps":10}}"#,
        )
        .unwrap();
        let attack = req.attack.unwrap();
        assert_eq!(attack.extra.get("steps"), Some(&Value::from(10)));
    }
}
