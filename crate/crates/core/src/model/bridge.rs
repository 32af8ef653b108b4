//! Client side of the line-delimited JSON model-server protocol.
//!
//! Each request and response is one UTF-8 JSON object terminated by `\n`.
//! A connection carries at most one in-flight request; responses echo the
//! request id.
//!
//! ```text
//! {"type":"predict","request_id":7,"target_event_id":1042,"excluded_event_ids":[311,512]}
//! {"request_id":7,"logit":2.854}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleError};
use crate::ctdg::{Event, EventId, GraphView, NodeId};
use crate::error::{Error, Result};

/// Endpoints of a query link that is not itself an event of the dataset
/// (negative samples). Sent alongside `target_event_id`, which then names
/// the event whose history cutoff the query shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryEndpoints {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BridgeRequest {
    Predict {
        request_id: u64,
        target_event_id: EventId,
        excluded_event_ids: Vec<EventId>,
        #[serde(default, skip_serializing_if = "Option::is_none", flatten)]
        query: Option<QueryEndpoints>,
    },
    Reset {
        request_id: u64,
    },
    Info {
        request_id: u64,
    },
}

impl BridgeRequest {
    pub fn request_id(&self) -> u64 {
        match self {
            BridgeRequest::Predict { request_id, .. }
            | BridgeRequest::Reset { request_id }
            | BridgeRequest::Info { request_id } => *request_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeInfo {
    pub model_name: String,
    pub num_layers: u32,
    #[serde(default)]
    pub dataset_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub request_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<BridgeInfo>,
}

/// Oracle backed by an external model server.
pub struct BridgeClient {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    next_id: u64,
    info: Option<BridgeInfo>,
    endpoint: String,
}

impl BridgeClient {
    pub fn from_streams(
        reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
        endpoint: impl Into<String>,
    ) -> Self {
        Self {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
            next_id: 0,
            info: None,
            endpoint: endpoint.into(),
        }
    }

    /// Connect to a server listening on `host:port`.
    pub fn connect(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::from_streams(reader, stream, addr))
    }

    /// Launch a server process and talk to it over its stdin/stdout.
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut client = Self::from_streams(BufReader::new(stdout), stdin, program);
        client.child = Some(child);
        Ok(client)
    }

    fn roundtrip(&mut self, request: &BridgeRequest) -> Result<BridgeResponse> {
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()?;

        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(Error::Bridge(format!("{} closed the connection", self.endpoint)));
        }
        let response: BridgeResponse = serde_json::from_str(reply.trim_end())
            .map_err(|e| Error::Bridge(format!("malformed response {reply:?}: {e}")))?;
        if response.request_id != request.request_id() {
            return Err(Error::Bridge(format!(
                "response id {} does not match request id {}",
                response.request_id,
                request.request_id()
            )));
        }
        Ok(response)
    }

    fn next_request_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn info(&mut self) -> Result<BridgeInfo> {
        if let Some(info) = &self.info {
            return Ok(info.clone());
        }
        let request_id = self.next_request_id();
        let response = self.roundtrip(&BridgeRequest::Info { request_id })?;
        if let Some(err) = response.error {
            return Err(Error::Bridge(err));
        }
        let info = response
            .info
            .ok_or_else(|| Error::Bridge("info response without info".into()))?;
        self.info = Some(info.clone());
        Ok(info)
    }

    pub fn reset(&mut self) -> Result<()> {
        let request_id = self.next_request_id();
        let response = self.roundtrip(&BridgeRequest::Reset { request_id })?;
        match response.error {
            Some(err) => Err(Error::Bridge(err)),
            None => Ok(()),
        }
    }

    pub fn predict_raw(
        &mut self,
        target_event_id: EventId,
        excluded_event_ids: Vec<EventId>,
        query: Option<QueryEndpoints>,
    ) -> Result<f64> {
        let request_id = self.next_request_id();
        let response = self.roundtrip(&BridgeRequest::Predict {
            request_id,
            target_event_id,
            excluded_event_ids,
            query,
        })?;
        match (response.logit, response.error) {
            (_, Some(err)) => Err(Error::Bridge(err)),
            (Some(logit), None) => Ok(logit),
            (None, None) => Err(Error::Bridge("predict response without logit".into())),
        }
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Oracle for BridgeClient {
    fn predict(&mut self, view: &GraphView<'_>, target: &Event) -> Result<f64, OracleError> {
        let query = match view.graph().event(target.event_id) {
            Some(e) if e.src == target.src && e.dst == target.dst => None,
            _ => Some(QueryEndpoints {
                src: target.src,
                dst: target.dst,
                timestamp: target.timestamp,
            }),
        };
        self.predict_raw(target.event_id, view.excluded().to_vec(), query)
            .map_err(|e| OracleError(e.to_string()))
    }

    fn num_layers(&mut self) -> Option<u32> {
        self.info().ok().map(|i| i.num_layers)
    }

    fn name(&self) -> String {
        format!("bridge:{}", self.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_request_wire_format() {
        let req = BridgeRequest::Predict {
            request_id: 7,
            target_event_id: 1042,
            excluded_event_ids: vec![311, 512],
            query: None,
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"type":"predict","request_id":7,"target_event_id":1042,"excluded_event_ids":[311,512]}"#
        );
        let resp: BridgeResponse = serde_json::from_str(r#"{"request_id":7,"logit":2.854}"#).unwrap();
        assert_eq!(resp.logit, Some(2.854));
        assert_eq!(
            serde_json::to_string(&resp).unwrap(),
            r#"{"request_id":7,"logit":2.854}"#
        );
    }

    #[test]
    fn other_request_kinds() {
        assert_eq!(
            serde_json::to_string(&BridgeRequest::Info { request_id: 1 }).unwrap(),
            r#"{"type":"info","request_id":1}"#
        );
        let parsed: BridgeRequest = serde_json::from_str(r#"{"type":"reset","request_id":3}"#).unwrap();
        assert_eq!(parsed, BridgeRequest::Reset { request_id: 3 });
    }

    #[test]
    fn synthetic_query_carries_endpoints() {
        let req = BridgeRequest::Predict {
            request_id: 0,
            target_event_id: 5,
            excluded_event_ids: vec![],
            query: Some(QueryEndpoints {
                src: 1,
                dst: 9,
                timestamp: 2.5,
            }),
        };
        let text = serde_json::to_string(&req).unwrap();
        assert!(text.contains(r#""src":1"#) && text.contains(r#""dst":9"#));
        assert_eq!(serde_json::from_str::<BridgeRequest>(&text).unwrap(), req);
    }
}
