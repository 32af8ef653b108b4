use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;

use cody::ctdg::{Event, Partition, TemporalGraph};
use cody::model::{BridgeClient, BridgeInfo, BridgeRequest, BridgeResponse, QueryEndpoints};
use cody::{cody_explain, CodyConfig, Error, PolicyKind, PredictorSession};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic stand-in for a model: a logit in [-4, 4) derived from the
/// target, the sorted exclusion set and the query endpoints.
fn server_logit(target: u64, excluded: &[u64], query: Option<QueryEndpoints>) -> f64 {
    let mut sorted = excluded.to_vec();
    sorted.sort_unstable();
    let mut h = DefaultHasher::new();
    target.hash(&mut h);
    sorted.hash(&mut h);
    if let Some(q) = query {
        (q.src, q.dst, q.timestamp.to_bits()).hash(&mut h);
    }
    (h.finish() >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
}

#[derive(Clone, Copy)]
enum Behaviour {
    Honest,
    WrongId,
    Refuse,
    HangUp,
}

/// Serve one connection, forwarding every request seen to `log`.
fn serve(behaviour: Behaviour) -> (String, mpsc::Receiver<BridgeRequest>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        handle(stream, behaviour, tx);
    });
    (addr, rx)
}

fn handle(stream: TcpStream, behaviour: Behaviour, log: mpsc::Sender<BridgeRequest>) {
    let mut writer = stream.try_clone().unwrap();
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { return };
        let request: BridgeRequest = serde_json::from_str(&line).unwrap();
        let _ = log.send(request.clone());
        let request_id = request.request_id();
        let mut response = BridgeResponse {
            request_id,
            logit: None,
            error: None,
            info: None,
        };
        match (behaviour, request) {
            (Behaviour::HangUp, _) => return,
            (Behaviour::WrongId, _) => response.request_id += 1,
            (Behaviour::Refuse, _) => response.error = Some("model not loaded".into()),
            (Behaviour::Honest, BridgeRequest::Predict { target_event_id, excluded_event_ids, query, .. }) => {
                response.logit = Some(server_logit(target_event_id, &excluded_event_ids, query));
            }
            (Behaviour::Honest, BridgeRequest::Info { .. }) => {
                response.info = Some(BridgeInfo {
                    model_name: "stub".into(),
                    num_layers: 3,
                    dataset_name: "synthetic".into(),
                });
            }
            (Behaviour::Honest, BridgeRequest::Reset { .. }) => {}
        }
        let mut text = serde_json::to_string(&response).unwrap();
        text.push('\n');
        if writer.write_all(text.as_bytes()).is_err() {
            return;
        }
    }
}

#[test]
fn thousand_requests_keep_ids_and_values() {
    let (addr, log) = serve(Behaviour::Honest);
    let mut client = BridgeClient::connect(&addr).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut asked = Vec::new();
    for _ in 0..1000 {
        let target = rng.gen_range(0..50u64);
        let excluded: Vec<u64> = (0..rng.gen_range(0..6)).map(|_| rng.gen_range(0..50)).collect();
        let got = client.predict_raw(target, excluded.clone(), None).unwrap();
        assert_eq!(got.to_bits(), server_logit(target, &excluded, None).to_bits());
        asked.push((target, excluded, got));
    }
    // repeats reach the server again and return bit-identical logits
    for (target, excluded, first) in asked.iter().take(100) {
        let again = client.predict_raw(*target, excluded.clone(), None).unwrap();
        assert_eq!(again.to_bits(), first.to_bits());
    }
    let ids: Vec<u64> = log.try_iter().map(|r| r.request_id()).collect();
    assert_eq!(ids, (0..1100).collect::<Vec<_>>());
}

#[test]
fn info_is_fetched_once_and_reset_round_trips() {
    let (addr, log) = serve(Behaviour::Honest);
    let mut client = BridgeClient::connect(&addr).unwrap();
    let info = client.info().unwrap();
    assert_eq!(info.num_layers, 3);
    assert_eq!(client.info().unwrap(), info);
    client.reset().unwrap();
    let kinds: Vec<BridgeRequest> = log.try_iter().collect();
    assert_eq!(
        kinds,
        vec![BridgeRequest::Info { request_id: 0 }, BridgeRequest::Reset { request_id: 1 }]
    );
}

#[test]
fn mismatched_response_id_is_an_error() {
    let (addr, _log) = serve(Behaviour::WrongId);
    let mut client = BridgeClient::connect(&addr).unwrap();
    let err = client.predict_raw(1, vec![], None).unwrap_err();
    assert!(matches!(err, Error::Bridge(ref m) if m.contains("does not match")), "{err}");
}

#[test]
fn server_errors_are_reported() {
    let (addr, _log) = serve(Behaviour::Refuse);
    let mut client = BridgeClient::connect(&addr).unwrap();
    let err = client.predict_raw(1, vec![2], None).unwrap_err();
    assert!(matches!(err, Error::Bridge(ref m) if m == "model not loaded"), "{err}");
}

#[test]
fn closed_connection_is_an_error() {
    let (addr, _log) = serve(Behaviour::HangUp);
    let mut client = BridgeClient::connect(&addr).unwrap();
    let err = client.predict_raw(1, vec![], None).unwrap_err();
    assert!(matches!(err, Error::Bridge(ref m) if m.contains("closed")), "{err}");
}

fn chain_graph() -> TemporalGraph {
    let events = (0..12u64)
        .map(|i| Event::new(i, (i % 3) as u32, 3 + (i % 2) as u32, 1.0 + i as f64))
        .collect();
    TemporalGraph::new(events, 5, Partition::Bipartite { sources: 3 }).unwrap()
}

#[test]
fn session_over_bridge_sends_sorted_exclusions_and_query_endpoints() {
    let graph = chain_graph();
    let (addr, log) = serve(Behaviour::Honest);
    let mut session = PredictorSession::new(BridgeClient::connect(&addr).unwrap());
    assert_eq!(session.num_layers(), Some(3));

    let target = graph.event(11).unwrap().clone();
    let view = graph.temporal_view(&target, [7, 2, 5]).unwrap();
    let p = session.predict(&view, &target).unwrap();
    assert_eq!(p.value(), server_logit(11, &[2, 5, 7], None));
    // cached: no second request
    session.predict(&view, &target).unwrap();

    let mut negative = target.clone();
    negative.dst = 4 - (target.dst - 3);
    let q = session.predict(&view, &negative).unwrap();
    let endpoints = QueryEndpoints {
        src: negative.src,
        dst: negative.dst,
        timestamp: negative.timestamp,
    };
    assert_eq!(q.value(), server_logit(11, &[2, 5, 7], Some(endpoints)));
    assert_eq!(session.oracle_calls(), 2);

    let sent: Vec<BridgeRequest> = log.try_iter().collect();
    assert_eq!(sent.len(), 3);
    assert_eq!(
        sent[1],
        BridgeRequest::Predict {
            request_id: 1,
            target_event_id: 11,
            excluded_event_ids: vec![2, 5, 7],
            query: None,
        }
    );
    assert!(matches!(&sent[2], BridgeRequest::Predict { query: Some(e), .. } if *e == endpoints));
}

#[test]
fn explainer_runs_against_the_bridge() {
    let graph = chain_graph();
    let (addr, log) = serve(Behaviour::Honest);
    let mut session = PredictorSession::new(BridgeClient::connect(&addr).unwrap());
    let target = graph.event(11).unwrap().clone();
    let result = cody_explain(
        &mut session,
        &graph,
        &target,
        PolicyKind::Temporal,
        &CodyConfig {
            it_max: 20,
            ..CodyConfig::default()
        },
    )
    .unwrap();
    let predicts = log
        .try_iter()
        .filter(|r| matches!(r, BridgeRequest::Predict { .. }))
        .count() as u64;
    assert_eq!(result.oracle_calls, predicts);
    let expect = server_logit(11, &result.sorted_events(), None);
    assert_eq!(result.achieved_logit.value(), expect);
}
