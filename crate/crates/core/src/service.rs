//! Local HTTP audition service for adjust-then-rate listening sessions.
//!
//! Every item in the item directory is decomposed once at startup. Dial
//! positions are rendered on demand and cached; ratings are appended to a
//! line-delimited JSON log.
//!
//! Endpoints: `GET /items`, `GET /render?item=&dial=&fold=stereo`,
//! `POST /rating`, `GET /summary`, `GET /healthz`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audio_io::{read_wav, write_wav_to, SampleFormat};
use crate::pipeline::{LoudnessTarget, PipelineConfig, Upmixer};
use crate::upmix::DialSetting;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Rear gain of the stereo monitoring fold-down (about −3 dB).
pub const FOLD_DOWN_GAIN: f64 = 0.7;

/// RFR values below this are reported at this floor in summaries.
pub const RFR_FLOOR_DB: f64 = -30.0;

pub const SATISFACTION_RANGE: std::ops::RangeInclusive<i32> = -15..=15;

/// Labelled anchors of the satisfaction scale, five steps apart.
pub const SATISFACTION_LABELS: [(&str, i32); 7] = [
    ("much worse", -15),
    ("worse", -10),
    ("slightly worse", -5),
    ("same", 0),
    ("slightly better", 5),
    ("better", 10),
    ("much better", 15),
];

pub const DEFAULT_PORT: u16 = 8731;
pub const PORT_ENV: &str = "PADMIX_PORT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassTag {
    Speech,
    Singing,
    NonVoice,
    Unclassified,
}

impl ClassTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassTag::Speech => "speech",
            ClassTag::Singing => "singing",
            ClassTag::NonVoice => "non-voice",
            ClassTag::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemEntry {
    pub item_id: String,
    pub title: String,
    pub duration_s: f64,
    pub class_tag: ClassTag,
}

/// Optional `<item>.json` next to `<item>.wav`.
#[derive(Debug, Default, Deserialize)]
struct Sidecar {
    title: Option<String>,
    #[serde(alias = "class")]
    class_tag: Option<ClassTag>,
}

pub struct Item {
    pub entry: ItemEntry,
    pub upmixer: Upmixer,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub items_dir: PathBuf,
    /// Session log; defaults to `<items_dir>/sessions.jsonl`.
    pub log_path: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub cache_budget_bytes: usize,
}

impl ServiceConfig {
    pub fn new(items_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            items_dir: items_dir.into(),
            log_path: None,
            pipeline: PipelineConfig::default(),
            cache_budget_bytes: 512 << 20,
        }
    }

    fn log_path(&self) -> PathBuf {
        self.log_path
            .clone()
            .unwrap_or_else(|| self.items_dir.join("sessions.jsonl"))
    }
}

/// Load and decompose every `*.wav` in `dir`, ordered by item id.
pub fn load_items(dir: &Path, pipeline: &PipelineConfig) -> Result<Vec<Item>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no .wav items found in {}",
            dir.display()
        )));
    }

    let mut items = Vec::with_capacity(paths.len());
    for path in paths {
        let item_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Config(format!("bad item file name {}", path.display())))?
            .to_owned();
        let sidecar = read_sidecar(&path.with_extension("json"));
        let audio = read_wav(&path)?;
        if audio.num_channels() != 2 {
            return Err(Error::Config(format!(
                "item '{item_id}' has {} channels, stereo required",
                audio.num_channels()
            )));
        }
        log::info!("analyzing item '{item_id}' ({:.1} s)", audio.duration_secs());
        let entry = ItemEntry {
            title: sidecar.title.unwrap_or_else(|| item_id.clone()),
            item_id,
            duration_s: audio.duration_secs(),
            class_tag: sidecar.class_tag.unwrap_or(ClassTag::Unclassified),
        };
        items.push(Item {
            entry,
            upmixer: Upmixer::new(audio, pipeline)?,
        });
    }
    Ok(items)
}

fn read_sidecar(path: &Path) -> Sidecar {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Sidecar::default();
    };
    serde_json::from_str(&text).unwrap_or_else(|e| {
        log::warn!("ignoring malformed metadata {}: {e}", path.display());
        Sidecar::default()
    })
}

/// One WAV-encoded render plus the metrics reported alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedWav {
    pub wav: Vec<u8>,
    pub dial: usize,
    pub rfr_db: f64,
    pub loudness_lufs: f64,
    pub norm_gain_db: f64,
    pub fold_down: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RenderKey {
    item: String,
    dial: usize,
    fold_down: bool,
}

type Slot = Arc<OnceLock<std::result::Result<Arc<RenderedWav>, String>>>;

/// LRU render cache bounded by the total size of the cached WAV bytes.
///
/// Each key owns a once-cell, so concurrent requests for the same key render
/// once and share the result, while different keys render in parallel.
struct RenderCache {
    budget: usize,
    state: Mutex<CacheState>,
}

struct CacheState {
    slots: LruCache<RenderKey, Slot>,
    bytes: usize,
}

impl RenderCache {
    fn new(budget: usize) -> Self {
        RenderCache {
            budget,
            state: Mutex::new(CacheState {
                slots: LruCache::unbounded(),
                bytes: 0,
            }),
        }
    }

    fn get_or_render(
        &self,
        key: RenderKey,
        render: impl FnOnce() -> Result<RenderedWav>,
    ) -> std::result::Result<Arc<RenderedWav>, String> {
        let slot = {
            let mut state = self.state.lock().expect("cache lock");
            state
                .slots
                .get_or_insert(key.clone(), || Arc::new(OnceLock::new()))
                .clone()
        };
        let mut fresh = false;
        let result = slot
            .get_or_init(|| {
                fresh = true;
                render().map(Arc::new).map_err(|e| e.to_string())
            })
            .clone();

        let mut state = self.state.lock().expect("cache lock");
        match &result {
            Ok(rendered) if fresh => {
                state.bytes += rendered.wav.len();
                self.evict(&mut state, &key);
            }
            Err(_) => {
                state.slots.pop(&key);
            }
            _ => {}
        }
        result
    }

    fn evict(&self, state: &mut CacheState, keep: &RenderKey) {
        while state.bytes > self.budget {
            let Some((lru_key, _)) = state.slots.peek_lru() else {
                break;
            };
            if lru_key == keep {
                // promote so the next victim is something else, stop if alone
                if state.slots.len() == 1 {
                    break;
                }
                state.slots.promote(keep);
                continue;
            }
            if let Some((_, slot)) = state.slots.pop_lru() {
                if let Some(Ok(r)) = slot.get() {
                    state.bytes -= r.wav.len();
                }
            }
        }
    }

    #[cfg(test)]
    fn cached_bytes(&self) -> usize {
        self.state.lock().unwrap().bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub dial: i64,
    /// Seconds since the start of the adjustment.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RatingRequest {
    pub session_id: String,
    pub item_id: String,
    pub final_dial: i64,
    pub satisfaction: i64,
    #[serde(default)]
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub schema_version: u32,
    pub session_id: String,
    pub item_id: String,
    pub final_dial: usize,
    pub satisfaction: i32,
    /// Unix time in seconds when the rating was stored.
    pub timestamp: f64,
    pub adjustment_trace: Vec<TracePoint>,
}

impl RatingRequest {
    fn validate(self, known_item: bool) -> std::result::Result<RatingRecord, ApiError> {
        if self.session_id.trim().is_empty() {
            return Err(ApiError::bad_request("session_id must not be empty"));
        }
        if !known_item {
            return Err(ApiError::not_found(format!("unknown item '{}'", self.item_id)));
        }
        let final_dial = DialSetting::from_signed(self.final_dial)
            .map_err(|e| ApiError::bad_request(e.to_string()))?
            .index;
        let satisfaction = i32::try_from(self.satisfaction)
            .ok()
            .filter(|s| SATISFACTION_RANGE.contains(s))
            .ok_or_else(|| {
                ApiError::bad_request(format!(
                    "satisfaction {} outside -15..=15",
                    self.satisfaction
                ))
            })?;
        for (i, p) in self.trace.iter().enumerate() {
            if DialSetting::from_signed(p.dial).is_err() || !p.time.is_finite() {
                return Err(ApiError::bad_request(format!("trace point {i} is invalid")));
            }
            if i > 0 && p.time < self.trace[i - 1].time {
                return Err(ApiError::bad_request("trace must be time-ordered"));
            }
        }
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Ok(RatingRecord {
            schema_version: SCHEMA_VERSION,
            session_id: self.session_id,
            item_id: self.item_id,
            final_dial,
            satisfaction,
            timestamp,
            adjustment_trace: self.trace,
        })
    }
}

/// Append-only session log mirrored in memory.
struct SessionLog {
    file: File,
    records: Vec<RatingRecord>,
}

impl SessionLog {
    fn open(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        if let Ok(existing) = File::open(path) {
            for (n, line) in BufReader::new(existing).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(r) => records.push(r),
                    Err(e) => log::warn!("{}:{}: skipping bad record: {e}", path.display(), n + 1),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(SessionLog { file, records })
    }

    fn append(&mut self, record: RatingRecord) -> Result<usize> {
        let mut line = serde_json::to_vec(&record).map_err(|e| Error::Parse(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.records.push(record);
        Ok(self.records.len() - 1)
    }
}

pub struct AppState {
    items: Vec<Item>,
    index: HashMap<String, usize>,
    target: LoudnessTarget,
    cache: RenderCache,
    log: Mutex<SessionLog>,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Result<Self> {
        config.pipeline.validate()?;
        let items = load_items(&config.items_dir, &config.pipeline)?;
        Self::from_items(items, config)
    }

    pub fn from_items(items: Vec<Item>, config: &ServiceConfig) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config("the audition service needs at least one item".into()));
        }
        let mut index = HashMap::new();
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.entry.item_id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate item id '{}'", item.entry.item_id)));
            }
        }
        Ok(AppState {
            items,
            index,
            target: config.pipeline.loudness_target,
            cache: RenderCache::new(config.cache_budget_bytes),
            log: Mutex::new(SessionLog::open(&config.log_path())?),
        })
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemEntry> {
        self.items.iter().map(|i| &i.entry)
    }

    fn item(&self, id: &str) -> Option<&Item> {
        self.index.get(id).map(|&i| &self.items[i])
    }

    /// Normalized render of `item` at `dial`, WAV-encoded, cached.
    pub fn render(
        &self,
        item_id: &str,
        dial: DialSetting,
        fold_down: bool,
    ) -> std::result::Result<Arc<RenderedWav>, ApiError> {
        let item = self
            .item(item_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown item '{item_id}'")))?;
        let key = RenderKey {
            item: item_id.to_owned(),
            dial: dial.index,
            fold_down,
        };
        self.cache
            .get_or_render(key, || {
                let quad = item.upmixer.render(dial, self.target)?;
                let audio = if fold_down {
                    quad.fold_down(FOLD_DOWN_GAIN)
                } else {
                    quad.audio.clone()
                };
                let mut wav = Cursor::new(Vec::new());
                write_wav_to(&mut wav, &audio, SampleFormat::Float32)?;
                Ok(RenderedWav {
                    wav: wav.into_inner(),
                    dial: dial.index,
                    rfr_db: quad.rfr_db,
                    loudness_lufs: quad.loudness_lufs.unwrap_or(f64::NAN),
                    norm_gain_db: quad.norm_gain_db,
                    fold_down,
                })
            })
            .map_err(ApiError::internal)
    }

    pub fn submit_rating(&self, request: RatingRequest) -> std::result::Result<usize, ApiError> {
        let known = self.item(&request.item_id).is_some();
        let record = request.validate(known)?;
        let mut log = self.log.lock().expect("log lock");
        log.append(record).map_err(|e| ApiError::internal(e.to_string()))
    }

    pub fn records(&self) -> Vec<RatingRecord> {
        self.log.lock().expect("log lock").records.clone()
    }

    pub fn summary(&self) -> std::result::Result<Summary, ApiError> {
        let records = self.records();
        let mut rfr = HashMap::new();
        for r in &records {
            let key = (r.item_id.clone(), r.final_dial);
            if rfr.contains_key(&key) || self.item(&r.item_id).is_none() {
                continue;
            }
            let dial = DialSetting::new(r.final_dial).map_err(|e| ApiError::internal(e.to_string()))?;
            let rendered = self.render(&r.item_id, dial, false)?;
            rfr.insert(key, rendered.rfr_db);
        }
        Ok(summarize(
            &records,
            |id| self.item(id).map(|i| i.entry.class_tag),
            |id, dial| rfr.get(&(id.to_owned(), dial)).copied(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub median_final_rfr_db: f64,
    /// Nearest-rank 25th, 50th and 75th percentiles.
    pub satisfaction_quartiles: [i32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub post_screened_n: usize,
    pub all: Option<Aggregate>,
    pub screened: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub rfr_floor_db: f64,
    pub excluded_sessions: Vec<String>,
    pub groups: BTreeMap<String, GroupSummary>,
}

/// Lower median for even counts.
fn lower_median(sorted: &[f64]) -> f64 {
    sorted[(sorted.len() - 1) / 2]
}

fn nearest_rank<T: Copy>(sorted: &[T], p: f64) -> T {
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn aggregate(entries: &[(&RatingRecord, f64)]) -> Option<Aggregate> {
    if entries.is_empty() {
        return None;
    }
    let mut rfr: Vec<f64> = entries.iter().map(|(_, r)| r.max(RFR_FLOOR_DB)).collect();
    rfr.sort_by(f64::total_cmp);
    let mut sat: Vec<i32> = entries.iter().map(|(r, _)| r.satisfaction).collect();
    sat.sort_unstable();
    Some(Aggregate {
        n: entries.len(),
        median_final_rfr_db: lower_median(&rfr),
        satisfaction_quartiles: [
            nearest_rank(&sat, 0.25),
            nearest_rank(&sat, 0.5),
            nearest_rank(&sat, 0.75),
        ],
    })
}

/// Aggregate ratings per item class and overall.
///
/// The latest rating of each (session, item) pair counts. Sessions that used
/// the negative half of the scale at least once, in any submission, are left
/// out of the screened aggregates.
pub fn summarize(
    records: &[RatingRecord],
    class_of: impl Fn(&str) -> Option<ClassTag>,
    rfr_of: impl Fn(&str, usize) -> Option<f64>,
) -> Summary {
    let excluded: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.satisfaction < 0)
        .map(|r| r.session_id.as_str())
        .collect();

    let mut latest: BTreeMap<(&str, &str), &RatingRecord> = BTreeMap::new();
    for r in records {
        latest.insert((r.session_id.as_str(), r.item_id.as_str()), r);
    }

    let mut groups: BTreeMap<String, Vec<(&RatingRecord, f64)>> = BTreeMap::new();
    for r in latest.values() {
        let (Some(class), Some(rfr)) = (class_of(&r.item_id), rfr_of(&r.item_id, r.final_dial))
        else {
            continue;
        };
        groups.entry("overall".into()).or_default().push((r, rfr));
        groups.entry(class.as_str().into()).or_default().push((r, rfr));
    }

    let groups = groups
        .into_iter()
        .map(|(name, entries)| {
            let screened: Vec<_> = entries
                .iter()
                .copied()
                .filter(|(r, _)| !excluded.contains(r.session_id.as_str()))
                .collect();
            let summary = GroupSummary {
                n: entries.len(),
                post_screened_n: screened.len(),
                all: aggregate(&entries),
                screened: aggregate(&screened),
            };
            (name, summary)
        })
        .collect();

    Summary {
        schema_version: SCHEMA_VERSION,
        rfr_floor_db: RFR_FLOOR_DB,
        excluded_sessions: excluded.into_iter().map(str::to_owned).collect(),
        groups,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: msg.into(),
        }
    }

    fn not_found(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: msg.into(),
        }
    }

    fn internal(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: msg.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/items", get(list_items))
        .route("/render", get(get_render))
        .route("/rating", post(post_rating))
        .route("/summary", get(get_summary))
        .route("/healthz", get(healthz))
        .with_state(state)
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "items": state.items.len(),
    }))
}

async fn list_items(State(state): State<Arc<AppState>>) -> Json<Value> {
    let items: Vec<&ItemEntry> = state.items().collect();
    Json(json!({ "schema_version": SCHEMA_VERSION, "items": items }))
}

async fn get_render(
    State(state): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> std::result::Result<Response, ApiError> {
    let item = params
        .get("item")
        .ok_or_else(|| ApiError::bad_request("missing 'item' parameter"))?
        .clone();
    let dial = params
        .get("dial")
        .ok_or_else(|| ApiError::bad_request("missing 'dial' parameter"))?
        .parse::<i64>()
        .map_err(|_| ApiError::bad_request("'dial' must be an integer"))
        .and_then(|d| DialSetting::from_signed(d).map_err(|e| ApiError::bad_request(e.to_string())))?;
    let fold_down = match params.get("fold").map(String::as_str) {
        None | Some("") | Some("none") => false,
        Some("stereo") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown fold '{other}'"))),
    };
    if state.item(&item).is_none() {
        return Err(ApiError::not_found(format!("unknown item '{item}'")));
    }

    let rendered = tokio::task::spawn_blocking(move || state.render(&item, dial, fold_down))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;

    let mut response = (
        [(header::CONTENT_TYPE, HeaderValue::from_static("audio/wav"))],
        rendered.wav.clone(),
    )
        .into_response();
    let headers = response.headers_mut();
    let mut set = |name: &'static str, value: String| {
        if let Ok(v) = HeaderValue::from_str(&value) {
            headers.insert(HeaderName::from_static(name), v);
        }
    };
    set("x-schema-version", SCHEMA_VERSION.to_string());
    set("x-dial-index", rendered.dial.to_string());
    set("x-rfr-db", rendered.rfr_db.to_string());
    set("x-loudness-lufs", rendered.loudness_lufs.to_string());
    set("x-norm-gain-db", rendered.norm_gain_db.to_string());
    if rendered.fold_down {
        set(
            "x-fold-down",
            format!("monitoring-only stereo fold-down, rear gain {FOLD_DOWN_GAIN}"),
        );
    }
    Ok(response)
}

async fn post_rating(
    State(state): State<Arc<AppState>>,
    body: std::result::Result<Json<RatingRequest>, axum::extract::rejection::JsonRejection>,
) -> std::result::Result<Json<Value>, ApiError> {
    let Json(request) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let index = tokio::task::spawn_blocking(move || state.submit_rating(request))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "entry_index": index,
    })))
}

async fn get_summary(
    State(state): State<Arc<AppState>>,
) -> std::result::Result<Json<Summary>, ApiError> {
    let summary = tokio::task::spawn_blocking(move || state.summary())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(summary))
}

/// Bind `addr` and serve until interrupted.
pub async fn run(state: Arc<AppState>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("audition service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(session: &str, item: &str, dial: usize, satisfaction: i32) -> RatingRecord {
        RatingRecord {
            schema_version: SCHEMA_VERSION,
            session_id: session.into(),
            item_id: item.into(),
            final_dial: dial,
            satisfaction,
            timestamp: 0.0,
            adjustment_trace: vec![],
        }
    }

    fn rfr_table(_: &str, dial: usize) -> Option<f64> {
        Some(match dial {
            5 => f64::NEG_INFINITY,
            20 => -4.0,
            12 => -12.0,
            _ => -20.0,
        })
    }

    fn classes(id: &str) -> Option<ClassTag> {
        Some(if id.starts_with("talk") { ClassTag::Speech } else { ClassTag::NonVoice })
    }

    #[test]
    fn reference_rating_is_floored() {
        let s = summarize(&[record("s1", "talk", 5, 0)], classes, rfr_table);
        let overall = &s.groups["overall"];
        assert_eq!(overall.n, 1);
        assert_eq!(overall.all.as_ref().unwrap().median_final_rfr_db, RFR_FLOOR_DB);
    }

    #[test]
    fn negative_rating_excludes_whole_session() {
        let records = [
            record("s1", "talk", 12, 5),
            record("s1", "music", 20, -3),
            record("s2", "music", 20, 10),
        ];
        let s = summarize(&records, classes, rfr_table);
        assert_eq!(s.excluded_sessions, vec!["s1".to_string()]);
        let overall = &s.groups["overall"];
        assert_eq!(overall.n, 3);
        assert_eq!(overall.post_screened_n, 1);
        assert_eq!(overall.screened.as_ref().unwrap().satisfaction_quartiles, [10, 10, 10]);
        assert!(s.groups["speech"].screened.is_none());
    }

    #[test]
    fn latest_rating_wins_but_screening_sees_all() {
        let records = [record("s1", "talk", 12, -1), record("s1", "talk", 20, 5)];
        let s = summarize(&records, classes, rfr_table);
        let overall = &s.groups["overall"];
        assert_eq!(overall.n, 1);
        assert_eq!(overall.all.as_ref().unwrap().median_final_rfr_db, -4.0);
        assert_eq!(overall.post_screened_n, 0);
    }

    #[test]
    fn lower_median_of_two() {
        let records = [record("s1", "a", 5, 0), record("s1", "b", 20, 5)];
        let s = summarize(&records, classes, rfr_table);
        assert_eq!(s.groups["overall"].all.as_ref().unwrap().median_final_rfr_db, RFR_FLOOR_DB);
    }

    #[test]
    fn no_ratings_is_empty() {
        let s = summarize(&[], classes, rfr_table);
        assert!(s.groups.is_empty() && s.excluded_sessions.is_empty());
    }

    #[test]
    fn quartiles_nearest_rank() {
        let sat = [-5, 0, 5, 10, 15];
        assert_eq!(nearest_rank(&sat, 0.25), 0);
        assert_eq!(nearest_rank(&sat, 0.5), 5);
        assert_eq!(nearest_rank(&sat, 0.75), 10);
    }

    #[test]
    fn satisfaction_labels_are_five_apart() {
        for w in SATISFACTION_LABELS.windows(2) {
            assert_eq!(w[1].1 - w[0].1, 5);
        }
        assert_eq!(SATISFACTION_LABELS[3], ("same", 0));
    }

    fn rendered(bytes: usize) -> RenderedWav {
        RenderedWav {
            wav: vec![0; bytes],
            dial: 0,
            rfr_db: 0.0,
            loudness_lufs: 0.0,
            norm_gain_db: 0.0,
            fold_down: false,
        }
    }

    fn key(dial: usize) -> RenderKey {
        RenderKey { item: "x".into(), dial, fold_down: false }
    }

    #[test]
    fn cache_renders_once_per_key() {
        let cache = RenderCache::new(1000);
        let mut calls = 0;
        for _ in 0..3 {
            cache.get_or_render(key(1), || {
                calls += 1;
                Ok(rendered(10))
            })
            .unwrap();
        }
        assert_eq!(calls, 1);
        assert_eq!(cache.cached_bytes(), 10);
    }

    #[test]
    fn cache_respects_byte_budget() {
        let cache = RenderCache::new(250);
        for d in 0..5 {
            cache.get_or_render(key(d), || Ok(rendered(100))).unwrap();
        }
        assert_eq!(cache.cached_bytes(), 200);
        // oldest keys were evicted and render again
        let mut rerendered = false;
        cache.get_or_render(key(0), || {
            rerendered = true;
            Ok(rendered(100))
        })
        .unwrap();
        assert!(rerendered);
    }

    #[test]
    fn oversized_entry_is_kept_alone() {
        let cache = RenderCache::new(50);
        cache.get_or_render(key(0), || Ok(rendered(100))).unwrap();
        assert_eq!(cache.cached_bytes(), 100);
    }

    #[test]
    fn failed_render_is_not_cached() {
        let cache = RenderCache::new(1000);
        assert!(cache.get_or_render(key(0), || Err(Error::Silent)).is_err());
        assert!(cache.get_or_render(key(0), || Ok(rendered(1))).is_ok());
    }
}
