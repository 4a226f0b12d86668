use reqwest::StatusCode;
use serde_json::{json, Value};
use std::sync::Arc;

use vexeval_core::corpus::{EvaluationKey, VexCategory, VexJustification};
use vexeval_core::cvss::{parse_vector, CvssVersion};
use vexeval_core::inference::EvaluationDraft;
use vexeval_core::review::{ReviewQueue, SNAPSHOT_FILE};
use vexeval_service::api::serve;

struct Server {
    base: String,
    http: reqwest::Client,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    done: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Server {
    async fn start(queue: ReviewQueue) -> Self {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel();
        let done = tokio::spawn(serve(listener, Arc::new(queue), async {
            rx.await.ok();
        }));
        Self {
            base,
            http: reqwest::Client::new(),
            stop: Some(tx),
            done,
        }
    }

    async fn stop(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.done.await.unwrap().unwrap();
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (r.status(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: &Value, reviewer: Option<&str>) -> (StatusCode, Value) {
        let mut req = self.http.post(format!("{}{path}", self.base)).json(body);
        if let Some(r) = reviewer {
            req = req.bearer_auth(r);
        }
        let r = req.send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }
}

fn draft(asset: &str, category: VexCategory, vector: Option<&str>) -> Value {
    let v = vector.map(|s| parse_vector(s).unwrap());
    let mut d = EvaluationDraft::new(EvaluationKey::new(asset, "N1"), CvssVersion::V3_1, v);
    d.vex_category = Some(category);
    d.internal_comment = format!("note {asset}");
    if category == VexCategory::NotAffected {
        d.vex_justification = VexJustification::ComponentNotPresent;
    }
    serde_json::to_value(d).unwrap()
}

const CRITICAL: &str = "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H";

fn ids(page: &Value) -> Vec<u64> {
    page["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["item_id"].as_u64().unwrap())
        .collect()
}

#[tokio::test]
async fn enqueue_list_and_fetch() {
    let server = Server::start(ReviewQueue::in_memory()).await;
    let (status, health) = server.get("/healthz").await;
    assert_eq!(
        (status, health["status"].as_str()),
        (StatusCode::OK, Some("ok"))
    );

    let (s1, na) = server
        .post(
            "/drafts",
            &draft("A1", VexCategory::NotAffected, None),
            None,
        )
        .await;
    let (s2, affected) = server
        .post(
            "/drafts",
            &draft("A2", VexCategory::Affected, Some(CRITICAL)),
            None,
        )
        .await;
    let (s3, again) = server
        .post(
            "/drafts",
            &draft("A2", VexCategory::Affected, Some(CRITICAL)),
            None,
        )
        .await;
    assert_eq!(
        (s1, s2, s3),
        (StatusCode::CREATED, StatusCode::CREATED, StatusCode::OK)
    );
    assert_eq!(again["item_id"], affected["item_id"]);
    assert_eq!(again["created"], false);

    let (s, err) = server
        .post("/drafts", &draft("A3", VexCategory::EndOfLife, None), None)
        .await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("not_reviewable"))
    );
    let (s, err) = server
        .post("/drafts", &json!({"nonsense": true}), None)
        .await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_body"))
    );

    let (s, page) = server.get("/queue").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        ids(&page),
        vec![
            affected["item_id"].as_u64().unwrap(),
            na["item_id"].as_u64().unwrap()
        ]
    );
    assert_eq!(page["items"][0]["priority"]["score"], 9.8);

    let (_, first) = server.get("/queue?page_size=1").await;
    assert_eq!(ids(&first), vec![affected["item_id"].as_u64().unwrap()]);
    let cursor = first["next_cursor"].as_u64().unwrap();
    let (_, second) = server
        .get(&format!("/queue?page_size=1&cursor={cursor}"))
        .await;
    assert_eq!(ids(&second), vec![na["item_id"].as_u64().unwrap()]);
    assert!(second["next_cursor"].is_null());

    let (_, only_na) = server.get("/queue?category=Not%20Affected").await;
    assert_eq!(ids(&only_na), vec![na["item_id"].as_u64().unwrap()]);
    let (s, err) = server.get("/queue?status=Bogus").await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_query"))
    );

    let (s, item) = server.get(&format!("/items/{}", affected["item_id"])).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(item["draft"]["evaluation_key"]["asset_id"], "A2");
    let (s, err) = server.get("/items/999").await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::NOT_FOUND, Some("not_found"))
    );
    server.stop().await;
}

#[tokio::test]
async fn decisions_and_export() {
    let server = Server::start(ReviewQueue::in_memory()).await;
    let (_, a) = server
        .post(
            "/drafts",
            &draft("A1", VexCategory::NotAffected, None),
            None,
        )
        .await;
    let (_, b) = server
        .post(
            "/drafts",
            &draft("A2", VexCategory::Affected, Some(CRITICAL)),
            None,
        )
        .await;
    let (_, c) = server
        .post(
            "/drafts",
            &draft("A3", VexCategory::NotAffected, None),
            None,
        )
        .await;
    let path = |v: &Value| format!("/items/{}/decision", v["item_id"]);

    let (s, err) = server
        .post(&path(&a), &json!({"action": "Accept"}), None)
        .await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::UNAUTHORIZED, Some("unauthorized"))
    );

    let (s, item) = server
        .post(&path(&a), &json!({"action": "Accept"}), Some("alice"))
        .await;
    assert_eq!(
        (s, item["status"].as_str(), item["reviewer"].as_str()),
        (StatusCode::OK, Some("Accepted"), Some("alice"))
    );
    let (s, err) = server
        .post(&path(&a), &json!({"action": "Reject"}), Some("bob"))
        .await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::CONFLICT, Some("already_decided"))
    );

    let invalid =
        json!({"action": "Edit", "edited_fields": {"vex_justification": "ComponentNotPresent"}});
    let (s, err) = server.post(&path(&b), &invalid, Some("alice")).await;
    assert_eq!(
        (s, err["error"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid_edit"))
    );
    let edit = json!({"action": "Edit", "edited_fields": {"internal_comment": "confirmed exploitable"}, "note": "wording"});
    let (s, item) = server.post(&path(&b), &edit, Some("alice")).await;
    assert_eq!(
        (s, item["status"].as_str()),
        (StatusCode::OK, Some("Edited"))
    );
    let (s, _) = server
        .post(
            &path(&c),
            &json!({"action": "Reject", "note": "dup"}),
            Some("alice"),
        )
        .await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = server
        .post(
            "/items/42/decision",
            &json!({"action": "Accept"}),
            Some("alice"),
        )
        .await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, exported) = server.get("/export/accepted").await;
    assert_eq!(s, StatusCode::OK);
    let exported = exported.as_array().unwrap().clone();
    assert_eq!(exported.len(), 2);
    assert_eq!(exported[0]["asset_id"], "A1");
    assert_eq!(exported[1]["internal_comment"], "confirmed exploitable");

    let (_, accepted) = server.get("/queue?status=Accepted").await;
    assert_eq!(ids(&accepted), vec![a["item_id"].as_u64().unwrap()]);
    let (_, everything) = server.get("/queue?status=any").await;
    assert_eq!(ids(&everything).len(), 3);
    server.stop().await;
}

#[tokio::test]
async fn concurrent_decisions_have_one_winner() {
    let server = Arc::new(Server::start(ReviewQueue::in_memory()).await);
    let (_, a) = server
        .post("/drafts", &draft("A1", VexCategory::Affected, None), None)
        .await;
    let path = format!("/items/{}/decision", a["item_id"]);
    let tasks: Vec<_> = (0..10)
        .map(|n| {
            let (server, path) = (server.clone(), path.clone());
            tokio::spawn(async move {
                server
                    .post(&path, &json!({"action": "Accept"}), Some(&format!("r{n}")))
                    .await
                    .0
            })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(
        statuses
            .iter()
            .filter(|s| **s == StatusCode::CONFLICT)
            .count(),
        9
    );
}

#[tokio::test]
async fn shutdown_snapshots_the_queue() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(ReviewQueue::open(dir.path()).unwrap()).await;
    server
        .post("/drafts", &draft("A1", VexCategory::Affected, None), None)
        .await;
    server.stop().await;
    assert!(dir.path().join(SNAPSHOT_FILE).exists());
    let reopened = ReviewQueue::open(dir.path()).unwrap();
    assert_eq!(reopened.len(), 1);
    reopened.verify_audit().unwrap();
}
