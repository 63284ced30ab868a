use adherence_core::envs::default_machine_replacement;
use adherence_core::{run_episode, HdmChoice, LearnerConfig, LearnerMode, LearnerState, ScriptedHdm};
use adherence_session::{router, SessionFile, SessionStore, StateView, StepDelta};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn create(app: &Router, body: Value) -> StateView {
    let (status, bytes) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn state(app: &Router, id: &str) -> StateView {
    let (status, bytes) = call(app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    serde_json::from_slice(&bytes).unwrap()
}

async fn act(app: &Router, id: &str, body: Value) -> (StatusCode, Vec<u8>) {
    call(app, "POST", &format!("/sessions/{id}/act"), Some(body)).await
}

async fn act_ok(app: &Router, id: &str, round: u64, choice: &str) -> StepDelta {
    let (status, bytes) = act(app, id, json!({"round": round, "choice": choice})).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

/// One state, two actions. Action 0 pays 1, action 1 pays 0.
fn single_state(baseline: usize) -> Value {
    json!({"mdp": {
        "n_states": 1, "n_actions": 2, "discount": 0.9,
        "reward": [[1.0, 0.0]],
        "transition": [[[1.0], [1.0]]],
        "baseline": [baseline]
    }})
}

#[tokio::test]
async fn create_starts_at_the_preset_state() {
    let app = router(SessionStore::new());
    let a = create(&app, json!({"env": {"preset": "machine_replacement"}})).await;
    let b = create(&app, json!({"env": {"preset": "machine_replacement"}})).await;
    assert_ne!(a.id, b.id);
    assert_eq!((a.x, a.x_label.as_str(), a.round), (0, "1", 0));
    assert!(a.rewards.is_empty());
    assert_eq!(a.theta_hat, 0.5);
    assert_eq!(a.n, 0);
    assert_eq!(state(&app, &a.id).await, a);
    assert_eq!(state(&app, &a.id).await, a);
}

#[tokio::test]
async fn scripted_seven_of_ten_gives_exactly_point_seven() {
    let app = router(SessionStore::new());
    let body = json!({"env": single_state(1), "learner": {"epsilon": {"kind": "constant", "epsilon": 0.0}}});
    let s = create(&app, body).await;
    let script = [
        "adhere", "baseline", "adhere", "adhere", "baseline", "adhere", "adhere", "baseline", "adhere", "adhere",
    ];
    for (round, choice) in script.iter().enumerate() {
        let view = state(&app, &s.id).await;
        assert!(view.informative, "round {round}");
        act_ok(&app, &s.id, round as u64, choice).await;
    }
    let (_, raw) = call(&app, "GET", &format!("/sessions/{}/state", s.id), None).await;
    let value: Value = serde_json::from_slice(&raw).unwrap();
    assert_eq!(value["theta_hat"].as_f64().unwrap(), 0.7);
    assert_eq!((value["adheres"].as_u64(), value["n"].as_u64()), (Some(7), Some(10)));
    assert_eq!(value["rewards"].as_array().unwrap().len(), 10);
}

#[tokio::test]
async fn first_adhered_step_sets_theta_to_one() {
    let app = router(SessionStore::new());
    let s = create(
        &app,
        json!({"env": single_state(1), "learner": {"epsilon": {"kind": "constant", "epsilon": 0.0}}}),
    )
    .await;
    let delta = act_ok(&app, &s.id, 0, "adhere").await;
    assert_eq!(
        delta.transition.observation,
        adherence_core::AdherenceObservation::Adhered
    );
    assert_eq!((delta.n, delta.theta_hat), (1, 1.0));
    assert_eq!(delta.state.round, 1);
}

#[tokio::test]
async fn baseline_matching_recommendation_is_uninformative() {
    let app = router(SessionStore::new());
    let s = create(
        &app,
        json!({"env": single_state(0), "learner": {"epsilon": {"kind": "constant", "epsilon": 0.0}}}),
    )
    .await;
    assert!(!s.informative);
    let delta = act_ok(&app, &s.id, 0, "baseline").await;
    assert_eq!(
        delta.transition.observation,
        adherence_core::AdherenceObservation::Uninformative
    );
    assert_eq!((delta.n, delta.theta_hat), (0, 0.5));
}

#[tokio::test]
async fn repeated_submission_is_rejected() {
    let app = router(SessionStore::new());
    let s = create(&app, json!({"env": {"preset": "machine_replacement"}, "seed": 4})).await;
    let first = act_ok(&app, &s.id, 0, "adhere").await;
    let (status, bytes) = act(&app, &s.id, json!({"round": 0, "choice": "adhere"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let body: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(body["expected_round"], 1);
    let now = state(&app, &s.id).await;
    assert_eq!(now, first.state);
    assert_eq!(now.step, 1);
}

#[tokio::test]
async fn harness_equivalence() {
    let seed = 17;
    let script: Vec<HdmChoice> = (0..40)
        .map(|i| {
            if i % 3 == 2 {
                HdmChoice::Baseline
            } else {
                HdmChoice::Adhere
            }
        })
        .collect();

    let app = router(SessionStore::new());
    let s = create(&app, json!({"env": {"preset": "machine_replacement"}, "seed": seed})).await;
    let mut deltas = Vec::new();
    for (round, choice) in script.iter().enumerate() {
        let name = match choice {
            HdmChoice::Adhere => "adhere",
            _ => "baseline",
        };
        deltas.push(act_ok(&app, &s.id, round as u64, name).await);
    }

    let (mdp, g_b) = default_machine_replacement();
    let mut learner = LearnerState::new(&mdp, LearnerConfig::new(LearnerMode::AdherenceAware, 0.9, g_b)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trajectory = run_episode(
        &mut learner,
        &mdp,
        &mut ScriptedHdm::new(script.clone()),
        0,
        40,
        &mut rng,
    )
    .unwrap();

    for (d, t) in deltas.iter().zip(&trajectory) {
        assert_eq!(
            (
                d.transition.x,
                d.transition.u_r,
                d.transition.u_b,
                d.transition.u,
                d.transition.next
            ),
            (t.x, t.recommended, t.baseline, t.implemented, t.next)
        );
        assert_eq!(d.transition.reward.to_bits(), t.reward.to_bits());
        assert_eq!(d.transition.observation, t.observation);
    }
    let last = &deltas.last().unwrap().state;
    assert_eq!(last.theta_hat.to_bits(), learner.adherence().theta_hat().to_bits());
    let expected_row: Vec<u64> = learner.q().row(last.x).iter().map(|v| v.to_bits()).collect();
    assert_eq!(last.q_row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), expected_row);
}

#[tokio::test]
async fn malformed_upload_names_the_row() {
    let app = router(SessionStore::new());
    let body = json!({"env": {"mdp": {
        "n_states": 2, "n_actions": 1, "discount": 0.9,
        "reward": [[0.0], [1.0]],
        "transition": [[[0.5, 0.5]], [[0.7, 0.2]]],
        "baseline": [0, 0]
    }}});
    let (status, bytes) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let err: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(err["row"], json!({"state": 1, "action": 0}));

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"env": {"preset": "chess"}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"nonsense": true}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let app = router(SessionStore::new());
    for uri in ["/sessions/nope/state", "/sessions/nope/history"] {
        assert_eq!(call(&app, "GET", uri, None).await.0, StatusCode::NOT_FOUND);
    }
    let (status, _) = act(&app, "nope", json!({"round": 0, "choice": "adhere"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn free_actions_need_the_unconstrained_mode() {
    let app = router(SessionStore::new());
    let body =
        json!({"env": {"preset": "inventory_small"}, "learner": {"epsilon": {"kind": "constant", "epsilon": 0.0}}});
    let strict = create(&app, body.clone()).await;
    assert_eq!((strict.u_r, strict.u_b), (0, 16));
    let (status, _) = act(&app, &strict.id, json!({"round": 0, "choice": "action", "action": 5})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(state(&app, &strict.id).await.step, 0);

    let mut loose_body = body;
    loose_body["unconstrained_hdm"] = json!(true);
    let loose = create(&app, loose_body).await;
    let (status, bytes) = act(&app, &loose.id, json!({"round": 0, "choice": "action", "action": 5})).await;
    assert_eq!(status, StatusCode::OK);
    let delta: StepDelta = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(delta.transition.u, 5);
    assert_eq!(
        delta.transition.observation,
        adherence_core::AdherenceObservation::Uninformative
    );
    assert_eq!(delta.theta_hat, 0.5);

    let (status, _) = act(&app, &loose.id, json!({"round": 1, "choice": "action", "action": 41})).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn history_is_csv() {
    let app = router(SessionStore::new());
    let s = create(&app, json!({"env": {"preset": "machine_replacement"}})).await;
    for round in 0..3 {
        act_ok(&app, &s.id, round, "baseline").await;
    }
    let (status, bytes) = call(&app, "GET", &format!("/sessions/{}/history", s.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("round,x,u_r,u_b,u,observation,reward,next,theta_hat"));
    assert!(lines[1].starts_with("0,0,"));
}

#[tokio::test]
async fn wire_ratios_are_exact() {
    let app = router(SessionStore::new());
    let s = create(
        &app,
        json!({"env": single_state(1), "learner": {"epsilon": {"kind": "constant", "epsilon": 0.0}}}),
    )
    .await;
    for (round, choice) in ["adhere", "adhere", "baseline"].iter().enumerate() {
        act_ok(&app, &s.id, round as u64, choice).await;
    }
    let (_, raw) = call(&app, "GET", &format!("/sessions/{}/state", s.id), None).await;
    let text = String::from_utf8(raw).unwrap();
    let field = text.split("\"theta_hat\":").nth(1).unwrap();
    let number: String = field.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
    assert!(number.trim_start_matches("0.").len() >= 12, "{number}");
    assert_eq!(number.parse::<f64>().unwrap(), 2.0 / 3.0);
}

#[tokio::test]
async fn sessions_persist_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let app = router(store.clone());
    let s = create(&app, json!({"env": {"preset": "machine_replacement"}, "seed": 9})).await;
    for round in 0..6 {
        act_ok(&app, &s.id, round, if round % 2 == 0 { "adhere" } else { "baseline" }).await;
    }
    let view = state(&app, &s.id).await;

    let file: SessionFile =
        serde_json::from_str(&std::fs::read_to_string(store.session_path(&s.id).unwrap()).unwrap()).unwrap();
    let n_actions = file.learner.n_actions;
    let row = &file.learner.q[view.x * n_actions..(view.x + 1) * n_actions];
    assert_eq!(
        row.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        view.q_row.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );

    let resumed = router(SessionStore::open(dir.path()).unwrap());
    assert_eq!(state(&resumed, &s.id).await, view);
    let a = act_ok(&app, &s.id, 6, "adhere").await;
    let b = act_ok(&resumed, &s.id, 6, "adhere").await;
    assert_eq!(a, b);
}
