use std::time::Duration;

use serde::Deserialize;
use ureq::Agent;

use super::{cemb, Embedded, EmbedderBackend};
use crate::error::{Error, Result};

/// Client for an embedding service speaking `POST /embed {code, language}`
/// (response body: `.cemb` bytes) and `GET /health`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    base_url: String,
    agent: Agent,
}

#[derive(Debug, Deserialize)]
struct Health {
    model: String,
    #[serde(default)]
    dim: Option<u32>,
}

const MAX_BODY: u64 = 256 * 1024 * 1024;

impl RemoteEmbedder {
    /// `pool` bounds idle keep-alive connections to the service.
    pub fn new(base_url: impl Into<String>, pool: usize, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .max_idle_connections(pool.max(1))
            .max_idle_connections_per_host(pool.max(1))
            .build()
            .into();
        RemoteEmbedder {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn health(&self) -> Result<Health> {
        let url = format!("{}/health", self.base_url);
        let body = self
            .agent
            .get(&url)
            .call()
            .and_then(|mut r| r.body_mut().read_to_string())
            .map_err(|e| Error::Backend(format!("{url}: {e}")))?;
        serde_json::from_str(&body).map_err(|e| Error::Backend(format!("{url}: bad health response: {e}")))
    }
}

impl EmbedderBackend for RemoteEmbedder {
    fn identity(&self) -> String {
        match self.health() {
            Ok(h) => format!("remote:{}#{}", self.base_url, h.model),
            Err(_) => format!("remote:{}", self.base_url),
        }
    }

    fn embed(&self, code: &str, language: &str) -> Result<Embedded> {
        let url = format!("{}/embed", self.base_url);
        let payload = serde_json::json!({ "code": code, "language": language }).to_string();
        let bytes = self
            .agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(payload)
            .and_then(|mut r| r.body_mut().with_config().limit(MAX_BODY).read_to_vec())
            .map_err(|e| Error::Backend(format!("{url}: {e}")))?;
        cemb::decode(&bytes).map_err(|e| Error::Backend(format!("{url}: {e}")))
    }

    fn check(&self) -> Result<()> {
        let h = self.health()?;
        if h.model.is_empty() || h.dim == Some(0) {
            return Err(Error::Backend("embedding service reported no model".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    use super::*;
    use crate::embedding::{score_code_pair, HashEmbedder};

    /// Minimal single-threaded service backed by the hash embedder.
    fn spawn_service(requests: usize) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            let hash = HashEmbedder { dim: 16, ..HashEmbedder::default() };
            for stream in listener.incoming().take(requests) {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                let mut content_length = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; content_length];
                reader.read_exact(&mut body).unwrap();
                let (ctype, payload) = if request_line.starts_with("GET /health") {
                    ("application/json", br#"{"model":"hash-test","dim":16}"#.to_vec())
                } else {
                    let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                    let e = hash
                        .embed(req["code"].as_str().unwrap(), req["language"].as_str().unwrap())
                        .unwrap();
                    ("application/octet-stream", cemb::encode(&e))
                };
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    payload.len()
                )
                .unwrap();
                stream.write_all(&payload).unwrap();
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn embeds_through_http() {
        let url = spawn_service(4);
        let remote = RemoteEmbedder::new(url, 2, Duration::from_secs(10));
        remote.check().unwrap();
        let code = "def f(x):\n    return x * 2";
        let s = score_code_pair(&remote, code, code, "python", None).unwrap();
        assert_eq!(s.f1, 1.0);
        let local = HashEmbedder { dim: 16, ..HashEmbedder::default() };
        assert_eq!(remote.embed(code, "python").unwrap(), local.embed(code, "python").unwrap());
    }

    #[test]
    fn unreachable_service_fails_check() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        drop(listener);
        let remote = RemoteEmbedder::new(format!("http://{addr}"), 1, Duration::from_secs(2));
        assert!(matches!(remote.check(), Err(Error::Backend(_))));
    }
}
