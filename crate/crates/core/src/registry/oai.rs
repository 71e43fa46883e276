//! OAI-PMH 2.0 harvesting of Dublin Core dataset records.
//!
//! A [`Harvester`] issues `ListRecords` (or `ListIdentifiers`) requests
//! through an [`OaiTransport`] and follows resumption tokens. Each
//! `<record>` element is parsed on its own, so a broken record is counted
//! and skipped without losing the rest of the page.

use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;
use std::sync::OnceLock;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use super::{year_from_title, DatasetRecord, ResourceType};
use crate::text::extract_years;

/// Continuation point of a harvest. Pass it back to resume after a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResumeState {
    pub token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cursor: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complete_list_size: Option<u64>,
}

impl ResumeState {
    pub fn new(token: impl Into<String>) -> Self {
        Self {
            token: token.into(),
            cursor: None,
            complete_list_size: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
}

impl TransportError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Fetches the body of an OAI-PMH request.
pub trait OaiTransport {
    fn get(&mut self, url: &Url) -> Result<String, TransportError>;
}

impl<T: OaiTransport + ?Sized> OaiTransport for &mut T {
    fn get(&mut self, url: &Url) -> Result<String, TransportError> {
        (**self).get(url)
    }
}

impl<T: OaiTransport + ?Sized> OaiTransport for Box<T> {
    fn get(&mut self, url: &Url) -> Result<String, TransportError> {
        (**self).get(url)
    }
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .user_agent(concat!("dataref/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::new(e.to_string()))?;
        Ok(Self { client })
    }
}

#[cfg(feature = "http")]
impl OaiTransport for HttpTransport {
    fn get(&mut self, url: &Url) -> Result<String, TransportError> {
        let response = self
            .client
            .get(url.clone())
            .send()
            .map_err(|e| TransportError::new(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::new(format!(
                "HTTP status {status} for {url}"
            )));
        }
        response
            .text()
            .map_err(|e| TransportError::new(e.to_string()))
    }
}

/// Serves pre-recorded responses from a directory: the first page of a verb
/// is `<dir>/<Verb>.xml`, a continuation page is `<dir>/<token>.xml` with
/// characters outside `[A-Za-z0-9._-]` replaced by `_`.
#[derive(Debug, Clone)]
pub struct DirectoryTransport {
    dir: PathBuf,
}

impl DirectoryTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn file_for(&self, url: &Url) -> PathBuf {
        let mut verb = None;
        let mut token = None;
        for (k, v) in url.query_pairs() {
            match k.as_ref() {
                "verb" => verb = Some(v.into_owned()),
                "resumptionToken" => token = Some(v.into_owned()),
                _ => {}
            }
        }
        let stem = match token {
            Some(t) => t
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                        c
                    } else {
                        '_'
                    }
                })
                .collect(),
            None => verb.unwrap_or_else(|| "ListRecords".to_owned()),
        };
        self.dir.join(format!("{stem}.xml"))
    }
}

impl OaiTransport for DirectoryTransport {
    fn get(&mut self, url: &Url) -> Result<String, TransportError> {
        let path = self.file_for(url);
        std::fs::read_to_string(&path)
            .map_err(|e| TransportError::new(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordError {
    MissingTitle { identifier: String },
    MissingDoi { identifier: String },
    Malformed { message: String },
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingTitle { identifier } => write!(f, "record {identifier} has no dc:title"),
            Self::MissingDoi { identifier } => {
                write!(f, "record {identifier} has no DOI identifier")
            }
            Self::Malformed { message } => write!(f, "malformed record: {message}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarvestError {
    /// Retryable: restart from `resume` (`None` means from the beginning).
    #[error("transport failure: {source}")]
    Transport {
        #[source]
        source: TransportError,
        resume: Option<ResumeState>,
    },
    #[error("OAI-PMH error {code}: {message}")]
    Endpoint { code: String, message: String },
    #[error("unreadable OAI-PMH response: {message}")]
    Malformed {
        message: String,
        resume: Option<ResumeState>,
    },
}

impl HarvestError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Transport { .. })
    }
}

/// One parsed response page.
#[derive(Debug, Clone, Default)]
pub struct HarvestPage {
    pub records: Vec<DatasetRecord>,
    pub errors: Vec<RecordError>,
    pub skipped_non_dataset: usize,
    pub deleted: usize,
    pub next: Option<ResumeState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    ListRecords,
    ListIdentifiers,
}

impl Verb {
    fn as_str(self) -> &'static str {
        match self {
            Self::ListRecords => "ListRecords",
            Self::ListIdentifiers => "ListIdentifiers",
        }
    }
}

pub struct Harvester<T> {
    transport: T,
    endpoint: Url,
    set_spec: Option<String>,
}

impl<T: OaiTransport> Harvester<T> {
    pub fn new(transport: T, endpoint: Url, set_spec: Option<String>) -> Self {
        Self {
            transport,
            endpoint,
            set_spec,
        }
    }

    pub fn request_url(&self, verb: Verb, resume: Option<&ResumeState>) -> Url {
        let mut url = self.endpoint.clone();
        {
            let mut query = url.query_pairs_mut();
            query.append_pair("verb", verb.as_str());
            match resume {
                Some(state) => {
                    query.append_pair("resumptionToken", &state.token);
                }
                None => {
                    query.append_pair("metadataPrefix", "oai_dc");
                    if let Some(set) = &self.set_spec {
                        query.append_pair("set", set);
                    }
                }
            }
        }
        url
    }

    pub fn fetch_page(
        &mut self,
        resume: Option<&ResumeState>,
    ) -> Result<HarvestPage, HarvestError> {
        let url = self.request_url(Verb::ListRecords, resume);
        let body = self
            .transport
            .get(&url)
            .map_err(|source| HarvestError::Transport {
                source,
                resume: resume.cloned(),
            })?;
        parse_list_records(&body).map_err(|e| match e {
            HarvestError::Malformed { message, .. } => HarvestError::Malformed {
                message,
                resume: resume.cloned(),
            },
            other => other,
        })
    }

    /// Harvests all identifiers (one page per call).
    pub fn list_identifiers(
        &mut self,
        resume: Option<&ResumeState>,
    ) -> Result<(Vec<String>, Option<ResumeState>), HarvestError> {
        let url = self.request_url(Verb::ListIdentifiers, resume);
        let body = self
            .transport
            .get(&url)
            .map_err(|source| HarvestError::Transport {
                source,
                resume: resume.cloned(),
            })?;
        let envelope = parse_envelope(&body)?;
        let ids = header_identifiers(&body);
        Ok((ids, envelope.resumption))
    }

    /// Streams records, starting at `resume` (or the beginning).
    pub fn records(self, resume: Option<ResumeState>) -> RecordStream<T> {
        RecordStream {
            harvester: self,
            position: match resume {
                Some(state) => Position::Token(state),
                None => Position::Start,
            },
            buffer: VecDeque::new(),
            errors: Vec::new(),
            skipped_non_dataset: 0,
            failed: false,
        }
    }
}

#[derive(Debug, Clone)]
enum Position {
    Start,
    Token(ResumeState),
    Done,
}

/// Record-by-record iterator over a harvest. Stops after the first error.
pub struct RecordStream<T> {
    harvester: Harvester<T>,
    position: Position,
    buffer: VecDeque<DatasetRecord>,
    errors: Vec<RecordError>,
    skipped_non_dataset: usize,
    failed: bool,
}

impl<T> RecordStream<T> {
    /// Where the next page request starts; `None` once the list is exhausted
    /// or before the first page when starting from scratch.
    pub fn resume_state(&self) -> Option<&ResumeState> {
        match &self.position {
            Position::Token(state) => Some(state),
            _ => None,
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.position, Position::Done) && self.buffer.is_empty()
    }

    pub fn record_errors(&self) -> &[RecordError] {
        &self.errors
    }

    pub fn skipped_non_dataset(&self) -> usize {
        self.skipped_non_dataset
    }
}

impl<T: OaiTransport> Iterator for RecordStream<T> {
    type Item = Result<DatasetRecord, HarvestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(record) = self.buffer.pop_front() {
                return Some(Ok(record));
            }
            if self.failed {
                return None;
            }
            let resume = match &self.position {
                Position::Done => return None,
                Position::Start => None,
                Position::Token(state) => Some(state.clone()),
            };
            match self.harvester.fetch_page(resume.as_ref()) {
                Ok(page) => {
                    self.buffer.extend(page.records);
                    self.errors.extend(page.errors);
                    self.skipped_non_dataset += page.skipped_non_dataset;
                    self.position = match page.next {
                        Some(state) => Position::Token(state),
                        None => Position::Done,
                    };
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

struct Envelope {
    error: Option<(String, String)>,
    resumption: Option<ResumeState>,
}

fn record_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?s)<(?:[A-Za-z_][\w.-]*:)?record[\s>].*?</(?:[A-Za-z_][\w.-]*:)?record\s*>")
            .expect("valid record regex")
    })
}

fn local_name(name: &[u8]) -> &[u8] {
    match name.iter().rposition(|&b| b == b':') {
        Some(i) => &name[i + 1..],
        None => name,
    }
}

/// Parses the response envelope with record bodies cut out, so that a
/// broken record cannot hide the error element or the resumption token.
fn parse_envelope(body: &str) -> Result<Envelope, HarvestError> {
    let stripped = record_regex().replace_all(body, "");
    let mut reader = Reader::from_str(&stripped);
    reader.config_mut().trim_text(true);
    let mut envelope = Envelope {
        error: None,
        resumption: None,
    };
    let mut in_error: Option<String> = None;
    let mut in_token: Option<ResumeState> = None;
    let mut saw_root = false;
    loop {
        let event = reader.read_event().map_err(|e| HarvestError::Malformed {
            message: e.to_string(),
            resume: None,
        })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = local_name(e.name().as_ref()).to_vec();
                match name.as_slice() {
                    b"OAI-PMH" => saw_root = true,
                    b"error" => {
                        let code = attr(e, b"code").unwrap_or_default();
                        if is_empty {
                            envelope.error = Some((code, String::new()));
                        } else {
                            in_error = Some(code);
                        }
                    }
                    b"resumptionToken" => {
                        let state = ResumeState {
                            token: String::new(),
                            cursor: attr(e, b"cursor").and_then(|v| v.parse().ok()),
                            complete_list_size: attr(e, b"completeListSize")
                                .and_then(|v| v.parse().ok()),
                        };
                        if !is_empty {
                            in_token = Some(state);
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| HarvestError::Malformed {
                    message: e.to_string(),
                    resume: None,
                })?;
                if let Some(code) = in_error.take() {
                    envelope.error = Some((code, text.trim().to_owned()));
                } else if let Some(mut state) = in_token.take() {
                    state.token = text.trim().to_owned();
                    if !state.token.is_empty() {
                        envelope.resumption = Some(state);
                    }
                }
            }
            Event::End(ref e) => match local_name(e.name().as_ref()) {
                b"error" => {
                    if let Some(code) = in_error.take() {
                        envelope.error = Some((code, String::new()));
                    }
                }
                b"resumptionToken" => in_token = None,
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_root {
        return Err(HarvestError::Malformed {
            message: "missing OAI-PMH root element".to_owned(),
            resume: None,
        });
    }
    Ok(envelope)
}

fn attr(e: &quick_xml::events::BytesStart<'_>, key: &[u8]) -> Option<String> {
    e.attributes()
        .flatten()
        .find(|a| local_name(a.key.as_ref()) == key)
        .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()))
}

/// Parses one `ListRecords` response body.
pub fn parse_list_records(body: &str) -> Result<HarvestPage, HarvestError> {
    let envelope = parse_envelope(body)?;
    if let Some((code, message)) = envelope.error {
        return Err(HarvestError::Endpoint { code, message });
    }
    let mut page = HarvestPage {
        next: envelope.resumption,
        ..HarvestPage::default()
    };
    for chunk in record_regex().find_iter(body) {
        match parse_record(chunk.as_str()) {
            Ok(RawRecord { deleted: true, .. }) => page.deleted += 1,
            Ok(raw) => match raw.into_dataset() {
                Ok(Some(record)) => page.records.push(record),
                Ok(None) => page.skipped_non_dataset += 1,
                Err(e) => page.errors.push(e),
            },
            Err(e) => page.errors.push(e),
        }
    }
    Ok(page)
}

fn header_identifiers(body: &str) -> Vec<String> {
    let mut reader = Reader::from_str(body);
    reader.config_mut().trim_text(true);
    let mut ids = Vec::new();
    let mut path: Vec<Vec<u8>> = Vec::new();
    while let Ok(event) = reader.read_event() {
        match event {
            Event::Start(e) => path.push(local_name(e.name().as_ref()).to_vec()),
            Event::End(_) => {
                path.pop();
            }
            Event::Text(t) => {
                let n = path.len();
                if n >= 2 && path[n - 1] == b"identifier" && path[n - 2] == b"header" {
                    if let Ok(text) = t.unescape() {
                        ids.push(text.trim().to_owned());
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    ids
}

#[derive(Debug, Default)]
struct RawRecord {
    header_identifier: String,
    deleted: bool,
    titles: Vec<String>,
    identifiers: Vec<String>,
    dates: Vec<String>,
    languages: Vec<String>,
    publishers: Vec<String>,
    types: Vec<String>,
}

fn parse_record(chunk: &str) -> Result<RawRecord, RecordError> {
    let malformed = |e: &dyn fmt::Display| RecordError::Malformed {
        message: e.to_string(),
    };
    let mut reader = Reader::from_str(chunk);
    reader.config_mut().trim_text(true);
    let mut raw = RawRecord::default();
    let mut path: Vec<Vec<u8>> = Vec::new();
    loop {
        match reader.read_event().map_err(|e| malformed(&e))? {
            Event::Start(e) => {
                let name = local_name(e.name().as_ref()).to_vec();
                if name == b"header" && attr(&e, b"status").as_deref() == Some("deleted") {
                    raw.deleted = true;
                }
                path.push(name);
            }
            Event::Empty(e) => {
                if local_name(e.name().as_ref()) == b"header"
                    && attr(&e, b"status").as_deref() == Some("deleted")
                {
                    raw.deleted = true;
                }
            }
            Event::End(_) => {
                path.pop().ok_or_else(|| malformed(&"unbalanced end tag"))?;
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| malformed(&e))?.trim().to_owned();
                push_field(&mut raw, &path, text);
            }
            Event::CData(t) => {
                let text = String::from_utf8_lossy(&t.into_inner()).trim().to_owned();
                push_field(&mut raw, &path, text);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !path.is_empty() {
        return Err(malformed(&"unclosed element"));
    }
    Ok(raw)
}

fn push_field(raw: &mut RawRecord, path: &[Vec<u8>], text: String) {
    if text.is_empty() {
        return;
    }
    let Some(leaf) = path.last() else { return };
    let in_header = path.iter().any(|p| p == b"header");
    let in_metadata = path.iter().any(|p| p == b"metadata");
    if in_header && leaf == b"identifier" {
        raw.header_identifier = text;
        return;
    }
    if !in_metadata {
        return;
    }
    match leaf.as_slice() {
        b"title" => raw.titles.push(text),
        b"identifier" => raw.identifiers.push(text),
        b"date" => raw.dates.push(text),
        b"language" => raw.languages.push(text),
        b"publisher" => raw.publishers.push(text),
        b"type" => raw.types.push(text),
        _ => {}
    }
}

fn doi_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"10\.\d{4,9}/\S+").expect("valid doi regex"))
}

fn normalize_language(code: &str) -> Option<String> {
    let code = code.trim().to_ascii_lowercase();
    let mapped = match code.as_str() {
        "ger" | "deu" | "german" | "deutsch" => "de",
        "eng" | "english" | "englisch" => "en",
        "fre" | "fra" | "french" => "fr",
        "spa" | "spanish" => "es",
        "ita" | "italian" => "it",
        "dut" | "nld" | "dutch" => "nl",
        other if other.len() == 2 && other.chars().all(|c| c.is_ascii_alphabetic()) => other,
        other => match other.split(['-', '_']).next() {
            Some(prefix) if prefix.len() == 2 && prefix != other => prefix,
            _ => return None,
        },
    };
    Some(mapped.to_owned())
}

impl RawRecord {
    fn into_dataset(self) -> Result<Option<DatasetRecord>, RecordError> {
        let identifier = self.header_identifier.clone();
        if !self.types.is_empty()
            && !self
                .types
                .iter()
                .any(|t| ResourceType::from_dc_type(t) == Some(ResourceType::Dataset))
        {
            return Ok(None);
        }
        let title = self
            .titles
            .into_iter()
            .find(|t| !t.trim().is_empty())
            .ok_or_else(|| RecordError::MissingTitle {
                identifier: identifier.clone(),
            })?;
        let doi = self
            .identifiers
            .iter()
            .chain(std::iter::once(&self.header_identifier))
            .find_map(|id| doi_regex().find(id).map(|m| m.as_str().to_owned()))
            .ok_or(RecordError::MissingDoi { identifier })?;
        let year = self
            .dates
            .iter()
            .find_map(|d| extract_years(d).into_iter().next())
            .or_else(|| year_from_title(&title));
        Ok(Some(DatasetRecord {
            doi,
            title,
            year,
            language: self.languages.iter().find_map(|l| normalize_language(l)),
            publisher: self.publishers.into_iter().next(),
            resource_type: ResourceType::Dataset,
        }))
    }
}
