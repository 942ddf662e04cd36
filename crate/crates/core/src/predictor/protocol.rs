//! Newline-delimited JSON wire format between the engine and an external model.
//!
//! ```text
//! -> {"id":0,"op":"hello"}
//! <- {"id":0,"classes":[],"n_classes":2}
//! -> {"id":1,"op":"predict","instances":[[0.1,0.9]]}
//! <- {"id":1,"classes":[1]}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ClassId, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instances: Option<Vec<Vec<f64>>>,
}

impl Request {
    pub fn hello() -> Self {
        Self {
            id: 0,
            op: "hello".into(),
            instances: None,
        }
    }

    pub fn predict(id: u64, instances: Vec<Vec<f64>>) -> Self {
        Self {
            id,
            op: "predict".into(),
            instances: Some(instances),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub classes: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<u32>,
}

/// Answers requests from `input` on `output` with `predictor` until EOF.
///
/// This is the server half of the bridge: it lets any built-in predictor be
/// exposed to another process.
pub fn serve<P, R, W>(predictor: &P, input: R, mut output: W) -> Result<()>
where
    P: Predictor + ?Sized,
    R: BufRead,
    W: Write,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = serde_json::from_str(&line)
            .map_err(|e| Error::ProtocolViolation(format!("bad request: {e}")))?;
        let resp = match req.op.as_str() {
            "hello" => Response {
                id: req.id,
                classes: vec![],
                n_classes: Some(predictor.n_classes() as u32),
            },
            "predict" => {
                let rows = req.instances.unwrap_or_default();
                let batch: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                let classes = predictor.predict(&batch)?;
                Response {
                    id: req.id,
                    classes: classes.into_iter().map(|ClassId(c)| c).collect(),
                    n_classes: None,
                }
            }
            other => return Err(Error::ProtocolViolation(format!("unknown op {other:?}"))),
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
