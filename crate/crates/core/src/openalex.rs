//! OpenAlex works harvesting.
//!
//! [`build_query`] turns a [`QuerySpec`] into the `filter` parameter chain the
//! works endpoint understands. [`WorksClient`] pages through results with
//! cursor paging over a [`WorksTransport`], either live HTTP or a directory of
//! recorded page envelopes. Abstracts arrive as inverted indexes and are
//! rebuilt with [`reconstruct_abstract`]; [`filter_works`] applies the
//! abstract/topic eligibility rules.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::retry::{self, AttemptError, RateLimiter, RetryPolicy};

pub const OPENALEX_WORKS_URL: &str = "https://api.openalex.org/works";
const OPENALEX_PREFIX: &str = "https://openalex.org/";
pub const MAX_PAGE_SIZE: u32 = 200;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid query configuration: {0}")]
    Config(String),
    #[error("transport error{}: {message} (after {retries} retries)", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        message: String,
        retries: u32,
    },
    #[error("malformed response{}: {message}", record_id.as_ref().map(|id| format!(" in record {id}")).unwrap_or_default())]
    Decode {
        record_id: Option<String>,
        message: String,
    },
    #[error("duplicate work {0} within one fetch session")]
    DuplicateWork(String),
    #[error(transparent)]
    Abstract(#[from] AbstractError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AbstractError {
    #[error("inverted index is empty")]
    Empty,
    #[error("words {first:?} and {second:?} both claim position {position}")]
    Conflict {
        position: u32,
        first: String,
        second: String,
    },
}

/// Work types accepted by the harvest query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkType {
    Article,
    Preprint,
    BookChapter,
    Dissertation,
}

impl WorkType {
    pub const ALL: [WorkType; 4] = [
        WorkType::Article,
        WorkType::Preprint,
        WorkType::BookChapter,
        WorkType::Dissertation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkType::Article => "article",
            WorkType::Preprint => "preprint",
            WorkType::BookChapter => "book-chapter",
            WorkType::Dissertation => "dissertation",
        }
    }
}

impl fmt::Display for WorkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_true() -> bool {
    true
}

/// Harvest criteria for the works endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(default)]
    pub institution_ids: Vec<String>,
    #[serde(default = "default_true")]
    pub filter_institutions: bool,
    #[serde(default)]
    pub country_code: Option<String>,
    pub work_types: BTreeSet<WorkType>,
    /// Exclusive lower bound on publication year.
    pub min_publication_year: i32,
    #[serde(default)]
    pub excluded_domain_ids: BTreeSet<u32>,
    #[serde(default = "default_true")]
    pub corresponding_author_required: bool,
    #[serde(default)]
    pub contact_email: Option<String>,
}

impl QuerySpec {
    /// Six UK institutions, GB affiliation, primary-research types, works
    /// after 1999, Health Sciences (domain 4) and Social Sciences (domain 2)
    /// excluded.
    pub fn uk_climate_default() -> Self {
        Self {
            institution_ids: [
                "I82284825",
                "I47508984",
                "I98677209",
                "I130828816",
                "I241749",
                "I4210092773",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            filter_institutions: true,
            country_code: Some("GB".into()),
            work_types: WorkType::ALL.into_iter().collect(),
            min_publication_year: 1999,
            excluded_domain_ids: [2, 4].into_iter().collect(),
            corresponding_author_required: true,
            contact_email: None,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.filter_institutions && self.institution_ids.is_empty() {
            return Err(IngestError::Config(
                "institution filtering enabled but no institution ids given".into(),
            ));
        }
        for id in &self.institution_ids {
            normalize_institution_id(id)?;
        }
        if self.work_types.is_empty() {
            return Err(IngestError::Config("at least one work type required".into()));
        }
        if !(1000..=2100).contains(&self.min_publication_year) {
            return Err(IngestError::Config(format!(
                "min_publication_year {} out of range",
                self.min_publication_year
            )));
        }
        if let Some(cc) = &self.country_code {
            if cc.len() != 2 || !cc.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(IngestError::Config(format!("invalid country code {cc:?}")));
            }
        }
        Ok(())
    }
}

/// Accepts `I123` or `https://openalex.org/I123`; returns the full URL form.
pub fn normalize_institution_id(id: &str) -> Result<String, IngestError> {
    let short = id.trim().strip_prefix(OPENALEX_PREFIX).unwrap_or(id.trim());
    let valid = short.len() > 1
        && short.starts_with('I')
        && short[1..].chars().all(|c| c.is_ascii_digit());
    if valid {
        Ok(format!("{OPENALEX_PREFIX}{short}"))
    } else {
        Err(IngestError::Config(format!("invalid institution id {id:?}")))
    }
}

/// Query parameters for the works endpoint, excluding paging.
pub type QueryParams = BTreeMap<String, String>;

/// Encodes the harvest criteria as an OpenAlex `filter` chain, plus the
/// polite-pool `mailto` when a contact address is configured.
pub fn build_query(spec: &QuerySpec) -> Result<QueryParams, IngestError> {
    spec.validate()?;
    let mut filters = Vec::new();
    if let Some(cc) = &spec.country_code {
        filters.push(format!(
            "authorships.institutions.country_code:{}",
            cc.to_ascii_uppercase()
        ));
    }
    let types: Vec<&str> = spec.work_types.iter().map(|t| t.as_str()).collect();
    filters.push(format!("type:{}", types.join("|")));
    if spec.corresponding_author_required {
        filters.push("authorships.is_corresponding:true".into());
    }
    if spec.filter_institutions {
        let ids = spec
            .institution_ids
            .iter()
            .map(|id| normalize_institution_id(id))
            .collect::<Result<Vec<_>, _>>()?;
        filters.push(format!(
            "authorships.affiliations.institution_ids:{}",
            ids.join("|")
        ));
    }
    filters.push(format!("publication_year:>{}", spec.min_publication_year));
    for domain in &spec.excluded_domain_ids {
        filters.push(format!("primary_topic.domain.id:!{domain}"));
    }

    let mut params = QueryParams::new();
    params.insert("filter".into(), filters.join(","));
    if let Some(email) = &spec.contact_email {
        params.insert("mailto".into(), email.clone());
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRef {
    pub topic_id: String,
    pub subfield_id: String,
    pub domain_id: String,
}

/// One work as served by the API, with identifiers shortened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawWork {
    pub openalex_id: String,
    pub title: String,
    pub abstract_inverted_index: Option<BTreeMap<String, Vec<u32>>>,
    pub publication_year: i32,
    pub work_type: String,
    pub topics: Vec<TopicRef>,
    pub keywords: Vec<String>,
    pub corresponding_institutions: Vec<String>,
}

impl RawWork {
    pub fn abstract_text(&self) -> Result<String, AbstractError> {
        match &self.abstract_inverted_index {
            Some(index) => reconstruct_abstract(index),
            None => Err(AbstractError::Empty),
        }
    }

    /// The API's JSON shape for this work, as found in a results array.
    pub fn to_api_json(&self) -> serde_json::Value {
        let wire = WireWork {
            id: Some(format!("{OPENALEX_PREFIX}{}", self.openalex_id)),
            title: Some(self.title.clone()),
            display_name: Some(self.title.clone()),
            publication_year: Some(self.publication_year),
            work_type: Some(self.work_type.clone()),
            abstract_inverted_index: self.abstract_inverted_index.clone(),
            topics: self
                .topics
                .iter()
                .map(|t| WireTopic {
                    id: format!("{OPENALEX_PREFIX}{}", t.topic_id),
                    subfield: Some(WireIdRef {
                        id: format!("{OPENALEX_PREFIX}subfields/{}", t.subfield_id),
                    }),
                    domain: Some(WireIdRef {
                        id: format!("{OPENALEX_PREFIX}domains/{}", t.domain_id),
                    }),
                })
                .collect(),
            keywords: self
                .keywords
                .iter()
                .map(|k| WireKeyword {
                    display_name: k.clone(),
                })
                .collect(),
            corresponding_institution_ids: self
                .corresponding_institutions
                .iter()
                .map(|i| format!("{OPENALEX_PREFIX}{i}"))
                .collect(),
        };
        serde_json::to_value(wire).expect("work serializes")
    }
}

/// Last path segment of an OpenAlex URL id.
fn short_id(id: &str) -> String {
    id.trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or(id)
        .to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct WireIdRef {
    id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireTopic {
    id: String,
    #[serde(default)]
    subfield: Option<WireIdRef>,
    #[serde(default)]
    domain: Option<WireIdRef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireKeyword {
    display_name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireWork {
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default)]
    publication_year: Option<i32>,
    #[serde(default, rename = "type")]
    work_type: Option<String>,
    #[serde(default)]
    abstract_inverted_index: Option<BTreeMap<String, Vec<u32>>>,
    #[serde(default)]
    topics: Vec<WireTopic>,
    #[serde(default)]
    keywords: Vec<WireKeyword>,
    #[serde(default)]
    corresponding_institution_ids: Vec<String>,
}

impl WireWork {
    fn into_raw(self) -> Result<RawWork, IngestError> {
        let id = self.id.filter(|id| !id.trim().is_empty()).ok_or_else(|| {
            IngestError::Decode {
                record_id: None,
                message: "work without id".into(),
            }
        })?;
        let openalex_id = short_id(&id);
        let decode = |message: String| IngestError::Decode {
            record_id: Some(openalex_id.clone()),
            message,
        };
        if let Some(index) = &self.abstract_inverted_index {
            for positions in index.values() {
                let mut seen = HashSet::new();
                if !positions.iter().all(|p| seen.insert(*p)) {
                    return Err(decode("repeated position for one word".into()));
                }
            }
        }
        let topics = self
            .topics
            .into_iter()
            .map(|t| TopicRef {
                topic_id: short_id(&t.id),
                subfield_id: t.subfield.map(|s| short_id(&s.id)).unwrap_or_default(),
                domain_id: t.domain.map(|d| short_id(&d.id)).unwrap_or_default(),
            })
            .collect::<Vec<_>>();
        if topics.len() > 4 {
            return Err(decode(format!("{} topics listed, at most 4 expected", topics.len())));
        }
        Ok(RawWork {
            title: self.title.or(self.display_name).unwrap_or_default(),
            abstract_inverted_index: self.abstract_inverted_index,
            publication_year: self
                .publication_year
                .ok_or_else(|| decode("missing publication_year".into()))?,
            work_type: self.work_type.unwrap_or_default(),
            topics,
            keywords: self.keywords.into_iter().map(|k| k.display_name).collect(),
            corresponding_institutions: self
                .corresponding_institution_ids
                .iter()
                .map(|i| short_id(i))
                .collect(),
            openalex_id,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WireMeta {
    #[serde(default)]
    count: Option<u64>,
    #[serde(default)]
    per_page: Option<u32>,
    #[serde(default)]
    next_cursor: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireEnvelope {
    meta: WireMeta,
    results: Vec<serde_json::Value>,
}

/// One decoded page of results.
#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub works: Vec<RawWork>,
    /// `None` once the last page has been served.
    pub next_cursor: Option<String>,
    pub retries: u32,
}

/// Decodes a response envelope. Either every record decodes or none are returned.
pub fn decode_page(body: &[u8]) -> Result<(Vec<RawWork>, Option<String>), IngestError> {
    let envelope: WireEnvelope = serde_json::from_slice(body).map_err(|e| IngestError::Decode {
        record_id: None,
        message: e.to_string(),
    })?;
    let mut works = Vec::with_capacity(envelope.results.len());
    for value in envelope.results {
        let record_id = value.get("id").and_then(|v| v.as_str()).map(short_id);
        let wire: WireWork = serde_json::from_value(value).map_err(|e| IngestError::Decode {
            record_id: record_id.clone(),
            message: e.to_string(),
        })?;
        works.push(wire.into_raw()?);
    }
    let next = envelope.meta.next_cursor.filter(|c| !c.is_empty());
    Ok((works, next))
}

/// Builds a response envelope around already-encoded works.
pub fn encode_page(works: &[RawWork], next_cursor: Option<&str>, total: Option<u64>) -> String {
    let envelope = WireEnvelope {
        meta: WireMeta {
            count: total,
            per_page: Some(works.len() as u32),
            next_cursor: next_cursor.map(str::to_string),
        },
        results: works.iter().map(RawWork::to_api_json).collect(),
    };
    serde_json::to_string_pretty(&envelope).expect("envelope serializes")
}

/// Raw HTTP-level answer from a transport.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
    pub retry_after: Option<Duration>,
}

/// Source of works pages: a live endpoint or recorded fixtures.
pub trait WorksTransport: Send + Sync {
    /// Issues one GET with the given query parameters. `Err` means no HTTP
    /// answer was obtained at all.
    fn get(&self, params: &QueryParams) -> Result<TransportResponse, String>;
}

/// Blocking HTTP transport against an OpenAlex-compatible works endpoint.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>) -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent(concat!("climscan/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| IngestError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
        })
    }
}

impl WorksTransport for HttpTransport {
    fn get(&self, params: &QueryParams) -> Result<TransportResponse, String> {
        let url = reqwest::Url::parse_with_params(&self.endpoint, params.iter())
            .map_err(|e| format!("invalid endpoint {}: {e}", self.endpoint))?;
        let response = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = response.bytes().map_err(|e| e.to_string())?.to_vec();
        Ok(TransportResponse {
            status,
            body,
            retry_after,
        })
    }
}

/// Serves recorded page envelopes named `page-0001.json`, `page-0002.json`, ...
///
/// Pages chain by ordinal: the start cursor `*` maps to page 1 and each page
/// that records a next cursor is followed by the next ordinal. Page size
/// parameters are ignored; pages are served as recorded.
pub struct FixtureTransport {
    dir: PathBuf,
}

const FIXTURE_CURSOR_PREFIX: &str = "fixture-page:";

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn page_path(dir: &Path, ordinal: usize) -> PathBuf {
        dir.join(format!("page-{ordinal:04}.json"))
    }
}

impl WorksTransport for FixtureTransport {
    fn get(&self, params: &QueryParams) -> Result<TransportResponse, String> {
        let cursor = params.get("cursor").map(String::as_str).unwrap_or("*");
        let ordinal = if cursor == "*" {
            1
        } else {
            cursor
                .strip_prefix(FIXTURE_CURSOR_PREFIX)
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| format!("unknown fixture cursor {cursor:?}"))?
        };
        let path = Self::page_path(&self.dir, ordinal);
        if !path.exists() {
            if ordinal == 1 {
                // An empty fixture directory is an empty result set.
                return Ok(TransportResponse {
                    status: 200,
                    body: encode_page(&[], None, Some(0)).into_bytes(),
                    retry_after: None,
                });
            }
            return Ok(TransportResponse {
                status: 404,
                body: Vec::new(),
                retry_after: None,
            });
        }
        let body = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let body = match serde_json::from_slice::<serde_json::Value>(&body) {
            Ok(mut value) => {
                let has_next = value
                    .pointer("/meta/next_cursor")
                    .is_some_and(|c| c.as_str().is_some_and(|s| !s.is_empty()));
                let next = Self::page_path(&self.dir, ordinal + 1);
                let rewritten = if has_next && next.exists() {
                    serde_json::Value::String(format!("{FIXTURE_CURSOR_PREFIX}{}", ordinal + 1))
                } else {
                    serde_json::Value::Null
                };
                if let Some(meta) = value.get_mut("meta").and_then(|m| m.as_object_mut()) {
                    meta.insert("next_cursor".into(), rewritten);
                }
                serde_json::to_vec(&value).map_err(|e| e.to_string())?
            }
            // Let the decoder report malformed bodies.
            Err(_) => body,
        };
        Ok(TransportResponse {
            status: 200,
            body,
            retry_after: None,
        })
    }
}

/// Writes `works` as a chain of fixture pages of at most `page_size` records.
/// Returns the number of page files written.
pub fn write_fixture_pages(
    dir: &Path,
    works: &[RawWork],
    page_size: usize,
) -> Result<usize, IngestError> {
    let io = |source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let page_size = page_size.max(1);
    let chunks: Vec<&[RawWork]> = works.chunks(page_size).collect();
    let total = works.len() as u64;
    for (i, chunk) in chunks.iter().enumerate() {
        let ordinal = i + 1;
        let next = (ordinal < chunks.len()).then(|| format!("{FIXTURE_CURSOR_PREFIX}{}", ordinal + 1));
        let body = encode_page(chunk, next.as_deref(), Some(total));
        let path = FixtureTransport::page_path(dir, ordinal);
        fs::write(&path, body).map_err(|source| IngestError::Io { path, source })?;
    }
    Ok(chunks.len())
}

/// Cursor-paging client for the works endpoint.
pub struct WorksClient {
    transport: Box<dyn WorksTransport>,
    policy: RetryPolicy,
    limiter: Option<RateLimiter>,
}

/// All pages of one harvest.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchSummary {
    pub works: Vec<RawWork>,
    pub pages: usize,
    pub retries: u32,
}

impl WorksClient {
    pub fn new(transport: Box<dyn WorksTransport>, policy: RetryPolicy) -> Self {
        let limiter = RateLimiter::from_policy(&policy);
        Self {
            transport,
            policy,
            limiter,
        }
    }

    pub fn http(endpoint: &str, policy: RetryPolicy) -> Result<Self, IngestError> {
        Ok(Self::new(Box::new(HttpTransport::new(endpoint)?), policy))
    }

    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        Self::new(Box::new(FixtureTransport::new(dir)), RetryPolicy::immediate())
    }

    /// Fetches one page. `cursor = None` starts a new session.
    pub fn fetch_works(
        &self,
        spec: &QuerySpec,
        page_size: u32,
        cursor: Option<&str>,
    ) -> Result<Page, IngestError> {
        if !(1..=MAX_PAGE_SIZE).contains(&page_size) {
            return Err(IngestError::Config(format!(
                "page size {page_size} outside [1, {MAX_PAGE_SIZE}]"
            )));
        }
        let mut params = build_query(spec)?;
        params.insert("per-page".into(), page_size.to_string());
        params.insert("cursor".into(), cursor.unwrap_or("*").to_string());

        let outcome = retry::with_retries(&self.policy, self.limiter.as_ref(), || {
            match self.transport.get(&params) {
                Err(message) => Err(AttemptError::Retryable {
                    error: (None, message),
                    retry_after: None,
                }),
                Ok(resp) if resp.status == 200 => Ok(resp.body),
                Ok(resp) => {
                    let error = (
                        Some(resp.status),
                        String::from_utf8_lossy(&resp.body).chars().take(200).collect(),
                    );
                    if retry::is_retryable_status(resp.status) {
                        Err(AttemptError::Retryable {
                            error,
                            retry_after: resp.retry_after,
                        })
                    } else {
                        Err(AttemptError::Fatal(error))
                    }
                }
            }
        });
        let fetched = outcome.map_err(|((status, message), retries)| IngestError::Transport {
            status,
            message,
            retries,
        })?;
        let (mut works, next_cursor) = decode_page(&fetched.value)?;
        if works.len() > page_size as usize {
            log::warn!("server returned {} works for page size {page_size}", works.len());
            works.truncate(page_size as usize);
        }
        Ok(Page {
            works,
            next_cursor,
            retries: fetched.retries,
        })
    }

    /// Follows cursors until the end, optionally stopping after `max_pages`.
    pub fn fetch_all(
        &self,
        spec: &QuerySpec,
        page_size: u32,
        max_pages: Option<usize>,
    ) -> Result<FetchSummary, IngestError> {
        let mut seen = HashSet::new();
        let mut summary = FetchSummary {
            works: Vec::new(),
            pages: 0,
            retries: 0,
        };
        let mut cursor: Option<String> = None;
        loop {
            if max_pages.is_some_and(|max| summary.pages >= max) {
                break;
            }
            let page = self.fetch_works(spec, page_size, cursor.as_deref())?;
            summary.pages += 1;
            summary.retries += page.retries;
            for work in page.works {
                if !seen.insert(work.openalex_id.clone()) {
                    return Err(IngestError::DuplicateWork(work.openalex_id));
                }
                summary.works.push(work);
            }
            match page.next_cursor {
                Some(next) if Some(&next) != cursor.as_ref() => cursor = Some(next),
                _ => break,
            }
        }
        Ok(summary)
    }
}

/// Places each word at its positions and joins them with single spaces in
/// position order. Gaps between positions are closed.
pub fn reconstruct_abstract(index: &BTreeMap<String, Vec<u32>>) -> Result<String, AbstractError> {
    let mut placed: Vec<(u32, &str)> = index
        .iter()
        .flat_map(|(word, positions)| positions.iter().map(move |p| (*p, word.as_str())))
        .collect();
    if placed.is_empty() {
        return Err(AbstractError::Empty);
    }
    placed.sort_unstable();
    for pair in placed.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(AbstractError::Conflict {
                position: pair[0].0,
                first: pair[0].1.to_string(),
                second: pair[1].1.to_string(),
            });
        }
    }
    let words: Vec<&str> = placed.into_iter().map(|(_, w)| w).collect();
    Ok(words.join(" "))
}

/// Builds an inverted index from text split on single spaces.
pub fn invert_abstract(text: &str) -> BTreeMap<String, Vec<u32>> {
    let mut index: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (pos, word) in text.split(' ').enumerate() {
        index.entry(word.to_string()).or_default().push(pos as u32);
    }
    index
}

/// Topic ids considered in scope. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicWhitelist(BTreeSet<String>);

impl TopicWhitelist {
    pub fn new<I, S>(ids: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = ids
            .into_iter()
            .map(|s| short_id(s.as_ref().trim()))
            .filter(|s| !s.is_empty())
            .collect();
        if set.is_empty() {
            return Err(IngestError::Config("topic whitelist is empty".into()));
        }
        Ok(Self(set))
    }

    /// One id per line; blank lines and `#` comments ignored.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn contains(&self, topic_id: &str) -> bool {
        self.0.contains(topic_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Whether a work has a usable abstract, at least one topic and no topic
/// outside the whitelist.
pub fn is_eligible(work: &RawWork, whitelist: &TopicWhitelist) -> bool {
    work.abstract_text().is_ok()
        && !work.topics.is_empty()
        && work.topics.iter().all(|t| whitelist.contains(&t.topic_id))
}

/// Keeps eligible works, preserving order.
pub fn filter_works(works: &[RawWork], whitelist: &TopicWhitelist) -> Vec<RawWork> {
    works
        .iter()
        .filter(|w| is_eligible(w, whitelist))
        .cloned()
        .collect()
}
