use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::Message;

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(extra: &[&str]) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_iwt"))
        .args(["serve", "--port", "0", "--rate", "40"])
        .args(extra)
        .env("IWT_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("server starts");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();
    Server { child, addr }
}

fn http_get(addr: &str, path: &str) -> (u16, String, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, head.to_ascii_lowercase(), body.to_string())
}

fn json_body(head: &str, body: &str) -> Value {
    // Chunked bodies: take the first chunk.
    if head.contains("transfer-encoding: chunked") {
        let (_, rest) = body.split_once("\r\n").unwrap();
        let end = rest.rfind('}').unwrap();
        return serde_json::from_str(&rest[..=end]).unwrap();
    }
    serde_json::from_str(body).unwrap()
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/live")).await.unwrap().0
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time").unwrap().unwrap();
        match msg {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Ping(_) | Message::Pong(_) => continue,
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn state_config_and_index() {
    let srv = start(&[]);
    let (code, head, body) = http_get(&srv.addr, "/state");
    assert_eq!(code, 200);
    let state = json_body(&head, &body);
    assert_eq!(state["type"], "snapshot");
    assert_eq!(state["version"], 1);
    assert_eq!(state["valves"].as_array().unwrap().len(), 12);

    let (code, head, body) = http_get(&srv.addr, "/config");
    assert_eq!(code, 200);
    let cfg = json_body(&head, &body);
    assert_eq!(cfg["n_conduits"], 12);
    assert_eq!(cfg["units"]["water_flow"], "L/h");
    assert!(cfg["plant"].is_object());

    let (code, head, body) = http_get(&srv.addr, "/");
    assert_eq!(code, 200);
    assert!(head.contains("text/html"));
    assert!(body.contains("/live"));
}

#[test]
fn static_dir_serves_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>dashboard build</html>").unwrap();
    let srv = start(&["--static-dir", dir.path().to_str().unwrap()]);
    let (code, _, body) = http_get(&srv.addr, "/");
    assert_eq!(code, 200);
    assert!(body.contains("dashboard build"));
    let (code, _, _) = http_get(&srv.addr, "/state");
    assert_eq!(code, 200);
}

#[test]
fn port_in_use_is_usage_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_iwt"))
        .args(["serve", "--port", &port])
        .env("IWT_LOG", "off")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[tokio::test]
async fn snapshots_are_ordered() {
    let srv = start(&[]);
    let mut ws = connect(&srv.addr).await;
    let mut last = -1i64;
    for _ in 0..15 {
        let v = next_json(&mut ws).await;
        assert_eq!(v["type"], "snapshot");
        let step = v["step"].as_i64().unwrap();
        assert!(step > last, "{step} after {last}");
        last = step;
    }
}

#[tokio::test]
async fn disable_valve_takes_effect() {
    let srv = start(&[]);
    let mut ws = connect(&srv.addr).await;
    next_json(&mut ws).await;
    ws.send(Message::Text(
        r#"{"type":"command","id":3,"action":"disable_valve","args":{"conduit":1}}"#.into(),
    ))
    .await
    .unwrap();
    let effective = loop {
        let v = next_json(&mut ws).await;
        if v["type"] == "ack" {
            assert_eq!(v["id"], 3);
            break v["effective_step"].as_u64().unwrap();
        }
        assert_eq!(v["type"], "snapshot");
    };
    let mut seen = 0;
    while seen < 3 {
        let v = next_json(&mut ws).await;
        if v["type"] == "snapshot" && v["step"].as_u64().unwrap() > effective {
            let valve = &v["valves"][0];
            assert_eq!(valve["water_enabled"], false);
            assert_eq!(valve["water_flow_lph"].as_f64().unwrap(), 0.0);
            assert_eq!(v["active_conduits"], 11);
            seen += 1;
        }
    }
}

#[tokio::test]
async fn invalid_command_gets_error_and_stays_open() {
    let srv = start(&[]);
    let mut ws = connect(&srv.addr).await;
    ws.send(Message::Text(
        r#"{"type":"command","id":9,"action":"set_water_setpoint","args":{"lph":-4}}"#.into(),
    ))
    .await
    .unwrap();
    let err = loop {
        let v = next_json(&mut ws).await;
        if v["type"] != "snapshot" {
            break v;
        }
    };
    assert_eq!(err["type"], "error");
    assert_eq!(err["id"], 9);
    assert_eq!(next_json(&mut ws).await["type"], "snapshot");
}

async fn collect(ws: &mut Ws, n: usize) -> std::collections::BTreeMap<u64, Value> {
    let mut rows = std::collections::BTreeMap::new();
    for _ in 0..n {
        let v = next_json(ws).await;
        rows.insert(v["step"].as_u64().unwrap(), v);
    }
    rows
}

#[tokio::test]
async fn clients_see_the_same_stream() {
    let srv = start(&[]);
    let mut a = connect(&srv.addr).await;
    let mut b = connect(&srv.addr).await;
    let ra = collect(&mut a, 12).await;
    let rb = collect(&mut b, 12).await;
    let mut common = 0;
    for (k, v) in &ra {
        if let Some(w) = rb.get(k) {
            assert_eq!(v, w, "step {k}");
            common += 1;
        }
    }
    assert!(common >= 5, "only {common} overlapping steps");
}

#[tokio::test]
async fn malformed_message_closes_with_policy() {
    let srv = start(&[]);
    let mut ws = connect(&srv.addr).await;
    ws.send(Message::Text("not json".into())).await.unwrap();
    let mut got_error = false;
    loop {
        let msg = timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time");
        match msg {
            Some(Ok(Message::Text(t))) => {
                let v: Value = serde_json::from_str(t.as_str()).unwrap();
                if v["type"] == "error" {
                    got_error = true;
                }
            }
            Some(Ok(Message::Close(frame))) => {
                assert!(got_error, "close before error frame");
                assert_eq!(frame.unwrap().code, CloseCode::Policy);
                break;
            }
            Some(Ok(_)) => {}
            Some(Err(e)) => panic!("{e}"),
            None => panic!("stream ended without close frame"),
        }
    }
}

#[tokio::test]
async fn scripted_run_reports_stop() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.json");
    std::fs::write(&sc, r#"{"duration_s": 5}"#).unwrap();
    let srv = start(&["--scenario", sc.to_str().unwrap(), "--accelerated"]);
    let mut ws = connect(&srv.addr).await;
    let first = next_json(&mut ws).await;
    assert_eq!(first["type"], "snapshot");
    ws.send(Message::Text(r#"{"type":"reset","id":1}"#.into())).await.unwrap();
    let mut acked = false;
    let mut steps = Vec::new();
    let stop = loop {
        let v = next_json(&mut ws).await;
        match v["type"].as_str().unwrap() {
            "ack" => acked = true,
            "snapshot" if v["run"] == 1 => steps.push(v["step"].as_u64().unwrap()),
            "stopped" if acked => break v,
            _ => {}
        }
    };
    assert_eq!(stop["step"], 5);
    assert!(steps.windows(2).all(|w| w[0] < w[1]), "{steps:?}");
    assert!(steps.iter().all(|s| *s <= 5));
}
