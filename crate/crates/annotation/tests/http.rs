mod common;

use facetkit_annotation::http::serve;
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Server {
    base: String,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
    _dir: tempfile::TempDir,
}

async fn start(n_pairs: usize) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let service = common::open(&dir.path().join("log"), n_pairs, 9);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(serve(listener, service, async {
        let _ = rx.await;
    }));
    Server { base, stop: Some(tx), handle, _dir: dir }
}

impl Server {
    async fn shutdown(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap().unwrap();
    }
}

async fn qualify(client: &reqwest::Client, base: &str, who: &str, correct: usize) -> (StatusCode, Value) {
    let r = client
        .post(format!("{base}/annotators/{who}/qualification"))
        .json(&json!({ "answers": common::answers(correct) }))
        .send()
        .await
        .unwrap();
    (r.status(), r.json().await.unwrap())
}

#[tokio::test]
async fn full_session_over_http() {
    let server = start(2).await;
    let base = server.base.clone();
    let client = reqwest::Client::new();

    let gold: Value = client.get(format!("{base}/gold")).send().await.unwrap().json().await.unwrap();
    assert_eq!(gold.as_array().unwrap().len(), 5);
    assert!(!gold.to_string().contains("answer"));

    let (status, body) = qualify(&client, &base, "w1", 5).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "qualified");
    let (status, body) = qualify(&client, &base, "w1", 5).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "already_qualified");
    let (_, body) = qualify(&client, &base, "w2", 0).await;
    assert_eq!(body["status"], "rejected");

    let r = client
        .get(format!("{base}/tasks/next?annotator=w2&criterion=quality"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::FORBIDDEN);

    let mut judged = 0;
    loop {
        let r = client
            .get(format!("{base}/tasks/next?annotator=w1&criterion=quality"))
            .send()
            .await
            .unwrap();
        if r.status() == StatusCode::NO_CONTENT {
            break;
        }
        assert_eq!(r.status(), StatusCode::OK);
        let text = r.text().await.unwrap();
        for hidden in ["ground", "generated", "source", "truth_on"] {
            assert!(!text.contains(hidden), "task view leaks {hidden}: {text}");
        }
        let task: Value = serde_json::from_str(&text).unwrap();
        let submit = json!({
            "task_id": task["task_id"],
            "annotator_id": "w1",
            "criterion": "quality",
            "choice": "left",
        });
        let r = client.post(format!("{base}/judgments")).json(&submit).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let again = client.post(format!("{base}/judgments")).json(&submit).send().await.unwrap();
        assert_eq!(again.status(), StatusCode::CONFLICT);
        let err: Value = again.json().await.unwrap();
        assert_eq!(err["error"], "duplicate_judgment");
        judged += 1;
    }
    assert_eq!(judged, 2);

    let r = client
        .post(format!("{base}/judgments"))
        .json(&json!({"task_id": "zzz", "annotator_id": "w1", "criterion": "quality", "choice": "left"}))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);

    let progress: Value = client.get(format!("{base}/progress")).send().await.unwrap().json().await.unwrap();
    assert_eq!(progress["judgments"], 2);

    let export: Value = client
        .get(format!("{base}/export?criterion=quality"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(export["comparisons"].as_array().unwrap().len(), 0);
    assert_eq!(export["incomplete"].as_array().unwrap().len(), 2);

    let annotator: Value = client.get(format!("{base}/annotators/w1")).send().await.unwrap().json().await.unwrap();
    assert_eq!(annotator["qualification"], "qualified");

    server.shutdown().await;
}
