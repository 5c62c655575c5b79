use lighthouse_api::{BiasRequest, NaiveRequest, SessionConfig, VerifyRequest};
use lighthouse_client::{ClientError, LighthouseClient};
use lighthouse_core::experiments::{BiasMode, ScenarioConfig, Tx};
use lighthouse_core::{hash, MerlinChain};

async fn start() -> LighthouseClient {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(lighthouse_server::serve(listener));
    LighthouseClient::new(format!("http://{addr}"))
}

#[tokio::test]
async fn full_round_trip() {
    let client = start().await;
    assert_eq!(client.health().await.unwrap().status, "ok");

    let config = ScenarioConfig::from_json(
        r#"{"master_seed": 3, "blocks": 40,
            "producers": [{"name": "a", "strategy": {"kind": "honest", "interval_blocks": 1}}]}"#,
    )
    .unwrap();
    let out = client.run_scenario(&config).await.unwrap();
    assert_eq!(out.summary.pulses, 20);
    let verdict = client
        .verify(&VerifyRequest {
            pulse_log: out.pulse_log,
            event_log: out.event_log,
            block_log: out.block_log,
        })
        .await
        .unwrap();
    assert!(verdict.ok);

    let report = client
        .bias(&BiasRequest {
            fractions: vec![0.2],
            trials: 10_000,
            seed: 1,
            mode: BiasMode::RawBlockhash,
        })
        .await
        .unwrap();
    assert_eq!(report.rows.len(), 1);
    let naive = client
        .naive_demo(&NaiveRequest {
            k_attempts: 1,
            trials: 1000,
            seed: 1,
        })
        .await
        .unwrap();
    assert_eq!(naive.trials, 1000);
}

#[tokio::test]
async fn session_calls() {
    let client = start().await;
    let s = client
        .create_session(&SessionConfig::default())
        .await
        .unwrap();
    let mut chain = MerlinChain::build(hash(b"c"), 10).unwrap();
    let (_, v) = chain.next().unwrap();
    client
        .submit(
            s.id,
            &Tx::Register {
                caller: "owner".into(),
                producer: "p".into(),
                v,
                u: 0,
            },
        )
        .await
        .unwrap();
    client.advance(s.id, 2).await.unwrap();
    let (_, v) = chain.next().unwrap();
    client
        .submit(
            s.id,
            &Tx::Reveal {
                sender: "p".into(),
                v,
                u: 0,
            },
        )
        .await
        .unwrap();
    let adv = client.advance(s.id, 1).await.unwrap();
    assert_eq!(adv.state.pulses, 1);
    assert_eq!(
        client.latest_pulse(s.id).await.unwrap(),
        client.pulse(s.id, 0).await.unwrap()
    );
    assert_eq!(client.pulses(s.id).await.unwrap().len(), 1);
    assert!(!client.logs(s.id).await.unwrap().event_log.is_empty());
    client.delete_session(s.id).await.unwrap();
    assert!(matches!(
        client.session(s.id).await,
        Err(ClientError::Api { .. })
    ));
}

#[tokio::test]
async fn errors_are_typed() {
    let client = start().await;
    let err = client
        .naive_demo(&NaiveRequest {
            k_attempts: 0,
            trials: 10,
            seed: 0,
        })
        .await
        .unwrap_err();
    assert!(err.is_invalid_input());
    assert!(err.to_string().contains("k_attempts"), "{err}");

    let dead = LighthouseClient::new("http://127.0.0.1:1");
    assert!(matches!(
        dead.health().await,
        Err(ClientError::Unreachable { .. })
    ));
}
