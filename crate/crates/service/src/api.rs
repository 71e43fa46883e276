use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use dataref_core::detector::ArticleText;
use dataref_core::dictionary::{Feature, FeatureKind};
use dataref_core::exporter::{build_linkset, export, ArticleMetadata, Confirmation, ExportFormat};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ApiError, ApiResult};
use crate::session::{Choice, SessionEvent, SessionItem, Workflow};
use crate::state::{valid_id, AppState, FalsePositive, StoredArticle};
use crate::SCHEMA_VERSION;

pub type AppStateRef = Arc<AppState>;

fn envelope(status: StatusCode, data: impl Serialize) -> Response {
    (
        status,
        Json(json!({ "schema_version": SCHEMA_VERSION, "data": data })),
    )
        .into_response()
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewArticle {
    article_id: String,
    text: String,
    #[serde(default)]
    pid: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    journal: Option<String>,
    #[serde(default)]
    language: Option<String>,
}

/// Accepts a JSON object, or a plain-text body with `?article_id=`.
pub async fn post_article(
    State(state): State<AppStateRef>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    let new = if is_json {
        parse_json::<NewArticle>(&body)?
    } else {
        let text = String::from_utf8(body.to_vec())
            .map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
        NewArticle {
            article_id: query.get("article_id").cloned().ok_or_else(|| {
                ApiError::bad_request("plain-text uploads need an article_id query parameter")
            })?,
            text,
            pid: query.get("pid").cloned(),
            title: query.get("title").cloned(),
            journal: query.get("journal").cloned(),
            language: query.get("language").cloned(),
        }
    };
    if !valid_id(&new.article_id) {
        return Err(ApiError::bad_request(
            "article_id may only contain letters, digits, '-', '_' and '.'",
        ));
    }
    let mut article = ArticleText::new(&new.article_id, new.text)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    article.language = new.language;
    let metadata = ArticleMetadata {
        article_id: new.article_id.clone(),
        pid: new
            .pid
            .unwrap_or_else(|| format!("urn:dataref:article:{}", new.article_id)),
        title: new.title,
        journal: new.journal,
    };
    metadata
        .parsed_pid()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let stored = state.add_article(StoredArticle { article, metadata })?;
    let sentences = stored.article.sentences().len();
    Ok(envelope(
        StatusCode::CREATED,
        json!({
            "article_id": stored.article.article_id,
            "metadata": stored.metadata,
            "sentences": sentences,
        }),
    ))
}

pub async fn get_references(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let stored = state.article(&id)?;
    let refs = blocking(move || {
        let dictionary = state.dictionary();
        dataref_core::find_references(&stored.article, &dictionary)
    })
    .await?;
    Ok(envelope(
        StatusCode::OK,
        json!({ "article_id": id, "references": refs }),
    ))
}

pub async fn get_candidates(
    State(state): State<AppStateRef>,
    Path((id, n)): Path<(String, String)>,
) -> ApiResult<Response> {
    let n: usize = n.parse().map_err(|_| {
        ApiError::bad_request(format!(
            "reference index {n:?} is not a non-negative integer"
        ))
    })?;
    let stored = state.article(&id)?;
    let found = blocking(move || {
        let dictionary = state.dictionary();
        let refs = dataref_core::find_references(&stored.article, &dictionary);
        refs.get(n).cloned().map(|r| {
            let ranked = dataref_core::rank_candidates(
                &r,
                state.registry(),
                &stored.article,
                state.config(),
            );
            (r, ranked)
        })
    })
    .await?;
    let (reference, candidates) =
        found.ok_or_else(|| ApiError::not_found(format!("article {id:?} has no reference {n}")))?;
    Ok(envelope(
        StatusCode::OK,
        json!({ "article_id": id, "reference": n, "candidate_of": reference, "candidates": candidates }),
    ))
}

pub async fn get_features(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let stored = state.article(&id)?;
    let analysis = blocking(move || state.analyze(&stored.article)).await?;
    Ok(envelope(
        StatusCode::OK,
        json!({ "article_id": id, "references": analysis.references.len(), "features": analysis.groups }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    article_id: String,
    workflow: Workflow,
}

pub async fn post_session(State(state): State<AppStateRef>, body: Bytes) -> ApiResult<Response> {
    let new: NewSession = parse_json(&body)?;
    let stored = state.article(&new.article_id)?;
    let worker_state = state.clone();
    let analysis = blocking(move || worker_state.analyze(&stored.article)).await?;
    let items: Vec<SessionItem> = match new.workflow {
        Workflow::PerReference => analysis
            .references
            .iter()
            .zip(analysis.ranked)
            .enumerate()
            .map(|(i, (r, candidates))| SessionItem {
                item: i,
                feature: r.feature.clone(),
                references: vec![i],
                sentence: Some(r.sentence.clone()),
                span: Some(r.span),
                feature_span: Some(r.feature_span),
                candidates,
            })
            .collect(),
        Workflow::PerFeature => analysis
            .groups
            .into_iter()
            .enumerate()
            .map(|(i, g)| SessionItem {
                item: i,
                feature: g.feature,
                references: g.references,
                sentence: None,
                span: None,
                feature_span: None,
                candidates: g.matches,
            })
            .collect(),
    };
    let created = SessionEvent::Created {
        session_id: uuid::Uuid::new_v4().simple().to_string(),
        article_id: new.article_id,
        workflow: new.workflow,
        items,
    };
    let handle = state.create_session(created)?;
    let session = handle.lock().await;
    Ok(envelope(StatusCode::CREATED, session.view()))
}

pub async fn get_session(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let handle = state.session(&id)?;
    let session = handle.lock().await;
    Ok(envelope(StatusCode::OK, session.view()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    item: usize,
    #[serde(default)]
    doi: Option<String>,
    #[serde(default)]
    reject: bool,
}

pub async fn post_decision(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: DecisionRequest = parse_json(&body)?;
    let choice = match (req.doi, req.reject) {
        (Some(doi), false) => Choice::Dataset(doi),
        (None, true) => Choice::Rejected,
        _ => {
            return Err(ApiError::bad_request(
                "give exactly one of \"doi\" or \"reject\": true",
            ))
        }
    };
    let handle = state.session(&id)?;
    let mut session = handle.lock().await;
    state.record(
        &mut session,
        SessionEvent::Decision {
            item: req.item,
            choice,
        },
    )?;
    Ok(envelope(StatusCode::OK, session.view()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UndoRequest {
    item: usize,
}

pub async fn post_undo(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: UndoRequest = parse_json(&body)?;
    let handle = state.session(&id)?;
    let mut session = handle.lock().await;
    state.record(&mut session, SessionEvent::Undo { item: req.item })?;
    Ok(envelope(StatusCode::OK, session.view()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FalsePositiveRequest {
    text: String,
    kind: FeatureKind,
}

pub async fn post_false_positive(
    State(state): State<AppStateRef>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: FalsePositiveRequest = parse_json(&body)?;
    let text = req.text.trim().to_owned();
    if text.is_empty() {
        return Err(ApiError::bad_request(
            "false-positive text must not be empty",
        ));
    }
    let removed = state.add_false_positive(FalsePositive {
        text: text.clone(),
        kind: req.kind,
    })?;
    Ok(envelope(
        StatusCode::OK,
        json!({ "text": text, "kind": req.kind, "removed": removed }),
    ))
}

#[derive(Serialize)]
struct FeatureView<'a> {
    text: &'a str,
    source_titles: &'a std::collections::BTreeSet<String>,
}

fn feature_views<'a>(features: impl Iterator<Item = &'a Feature>) -> Vec<FeatureView<'a>> {
    features
        .map(|f| FeatureView {
            text: &f.text,
            source_titles: &f.source_titles,
        })
        .collect()
}

pub async fn get_dictionary(State(state): State<AppStateRef>) -> ApiResult<Response> {
    let dict = state.dictionary();
    Ok(envelope(
        StatusCode::OK,
        json!({
            "abbreviations": feature_views(dict.abbreviations()),
            "phrases": feature_views(dict.phrases()),
            "fp_abbreviations": dict.false_positives(FeatureKind::Abbreviation),
            "fp_phrases": dict.false_positives(FeatureKind::Phrase),
            "base_terms": dict.base_terms(),
        }),
    ))
}

/// The export document itself, not wrapped in an envelope; the schema
/// version travels in a header.
pub async fn get_export(
    State(state): State<AppStateRef>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let format: ExportFormat = query
        .get("format")
        .map(String::as_str)
        .unwrap_or("json")
        .parse()
        .map_err(ApiError::bad_request)?;
    let stored = state.article(&id)?;
    let mut confirmations = Vec::new();
    for handle in state.sessions_for(&id) {
        let session = handle.lock().await;
        for (item, doi) in session.confirmed() {
            let title = item
                .candidates
                .iter()
                .find(|c| c.doi == doi)
                .map(|c| c.title.clone())
                .unwrap_or_default();
            confirmations.push(Confirmation {
                doi: doi.to_owned(),
                title,
                feature: item.feature.clone(),
            });
        }
    }
    let worker_state = state.clone();
    let article = stored.clone();
    let analysis = blocking(move || worker_state.analyze(&article.article)).await?;
    let linkset = build_linkset(stored.metadata.clone(), &analysis.groups, &confirmations);
    let body = export(&linkset, format).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let filename = format!("{id}.{}", format.extension());
    Ok((
        StatusCode::OK,
        [
            (
                header::CONTENT_TYPE,
                format!("{}; charset=utf-8", format.media_type()),
            ),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{filename}\""),
            ),
        ],
        body,
    )
        .into_response())
}

pub async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}
