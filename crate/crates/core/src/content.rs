//! Content catalog, per-slot requests and SBS cache state.
//!
//! Sizes are integer bits so storage accounting is exact. A visible cache
//! entry costs `U_j * G_120` (one view per associated user); a 360-degree
//! entry costs `G_360`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(ContentId);
id_type!(UserId);
id_type!(SbsId);
id_type!(UavId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Format {
    /// The 120x120 degree field of view of one user.
    Visible,
    Full360,
}

impl Format {
    pub const ALL: [Format; 2] = [Format::Visible, Format::Full360];
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Visible => "visible",
            Format::Full360 => "360",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContentError {
    #[error("unknown content {0}")]
    UnknownContent(ContentId),
    #[error("content {0} is already cached; use replace")]
    Duplicate(ContentId),
    #[error("content {0} is not cached")]
    NotCached(ContentId),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(&'static str),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("horizon must be at least 1 slot")]
    EmptyHorizon,
    #[error("invalid Zipf exponent {0}")]
    InvalidZipf(f64),
    #[error("{users} associated users would need {required} bits of cache, capacity {capacity}")]
    WouldOverflow { users: u32, required: u64, capacity: u64 },
    #[error("request trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, ContentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentItem {
    pub id: ContentId,
    pub uav: UavId,
    pub size_360_bits: u64,
    pub size_visible_bits: u64,
    /// Data processed to extract one visible view.
    pub extract_workload_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentCatalog {
    items: Vec<ContentItem>,
    tracking_payload_bits: u64,
}

impl ContentCatalog {
    /// Ids must be `0..n` in order.
    pub fn new(items: Vec<ContentItem>, tracking_payload_bits: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(ContentError::EmptyCatalog);
        }
        for (k, item) in items.iter().enumerate() {
            if item.id != ContentId(k) {
                return Err(ContentError::InvalidCatalog("content ids must be contiguous from 0"));
            }
            if item.size_visible_bits == 0 || item.extract_workload_bits == 0 {
                return Err(ContentError::InvalidCatalog("sizes must be positive"));
            }
            if item.size_visible_bits >= item.size_360_bits {
                return Err(ContentError::InvalidCatalog("visible size must be below the 360 size"));
            }
        }
        if tracking_payload_bits == 0 {
            return Err(ContentError::InvalidCatalog("tracking payload must be positive"));
        }
        Ok(Self { items, tracking_payload_bits })
    }

    /// `per_uav` contents for each of `uavs` UAVs, all with the same sizes.
    /// Content `a` belongs to UAV `a / per_uav`.
    pub fn uniform(
        uavs: usize,
        per_uav: usize,
        size_360_bits: u64,
        size_visible_bits: u64,
        extract_workload_bits: u64,
        tracking_payload_bits: u64,
    ) -> Result<Self> {
        let items = (0..uavs * per_uav)
            .map(|a| ContentItem {
                id: ContentId(a),
                uav: UavId(a / per_uav.max(1)),
                size_360_bits,
                size_visible_bits,
                extract_workload_bits,
            })
            .collect();
        Self::new(items, tracking_payload_bits)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ContentItem] {
        &self.items
    }

    pub fn get(&self, id: ContentId) -> Result<&ContentItem> {
        self.items.get(id.0).ok_or(ContentError::UnknownContent(id))
    }

    pub fn tracking_payload_bits(&self) -> u64 {
        self.tracking_payload_bits
    }

    /// Storage cost of caching `id` in `format` at an SBS with `users` users.
    pub fn storage_cost(&self, id: ContentId, format: Format, users: u32) -> Result<u64> {
        let item = self.get(id)?;
        Ok(match format {
            Format::Full360 => item.size_360_bits,
            Format::Visible => item.size_visible_bits * users as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted { occupancy_bits: u64 },
    Rejected { deficit_bits: u64 },
}

impl Admission {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Admission::Accepted { .. })
    }
}

/// Contents stored at one SBS. Never exceeds its capacity: every mutation
/// checks the storage constraint first and leaves the state untouched on
/// rejection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheState {
    pub sbs: SbsId,
    capacity_bits: u64,
    associated_users: u32,
    entries: BTreeMap<ContentId, Format>,
}

impl CacheState {
    pub fn new(sbs: SbsId, capacity_bits: u64, associated_users: u32) -> Self {
        Self { sbs, capacity_bits, associated_users, entries: BTreeMap::new() }
    }

    pub fn capacity_bits(&self) -> u64 {
        self.capacity_bits
    }

    pub fn associated_users(&self) -> u32 {
        self.associated_users
    }

    pub fn entries(&self) -> &BTreeMap<ContentId, Format> {
        &self.entries
    }

    pub fn get(&self, id: ContentId) -> Option<Format> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, format: Format) -> usize {
        self.entries.values().filter(|f| **f == format).count()
    }

    pub fn occupancy(&self, catalog: &ContentCatalog) -> Result<u64> {
        occupancy_of(self.entries.iter().map(|(a, f)| (*a, *f)), self.associated_users, catalog)
    }

    fn try_insert(&mut self, id: ContentId, format: Format, catalog: &ContentCatalog) -> Result<Admission> {
        let previous = self.entries.insert(id, format);
        let occupancy = self.occupancy(catalog);
        let outcome = match occupancy {
            Ok(bits) if bits <= self.capacity_bits => return Ok(Admission::Accepted { occupancy_bits: bits }),
            Ok(bits) => Ok(Admission::Rejected { deficit_bits: bits - self.capacity_bits }),
            Err(e) => Err(e),
        };
        match previous {
            Some(f) => self.entries.insert(id, f),
            None => self.entries.remove(&id),
        };
        outcome
    }

    pub fn admit(&mut self, id: ContentId, format: Format, catalog: &ContentCatalog) -> Result<Admission> {
        if self.entries.contains_key(&id) {
            return Err(ContentError::Duplicate(id));
        }
        self.try_insert(id, format, catalog)
    }

    /// Changes the format of an existing entry.
    pub fn replace(&mut self, id: ContentId, format: Format, catalog: &ContentCatalog) -> Result<Admission> {
        if !self.entries.contains_key(&id) {
            return Err(ContentError::NotCached(id));
        }
        self.try_insert(id, format, catalog)
    }

    pub fn evict(&mut self, id: ContentId) -> Option<Format> {
        self.entries.remove(&id)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Visible entries scale with the user count, so a new association can
    /// overflow the cache; such a change is refused.
    pub fn set_associated_users(&mut self, users: u32, catalog: &ContentCatalog) -> Result<()> {
        let required = occupancy_of(self.entries.iter().map(|(a, f)| (*a, *f)), users, catalog)?;
        if required > self.capacity_bits {
            return Err(ContentError::WouldOverflow { users, required, capacity: self.capacity_bits });
        }
        self.associated_users = users;
        Ok(())
    }
}

/// Storage used by `entries` at an SBS with `users` associated users.
pub fn occupancy_of(
    entries: impl IntoIterator<Item = (ContentId, Format)>,
    users: u32,
    catalog: &ContentCatalog,
) -> Result<u64> {
    let mut total = 0u64;
    for (a, f) in entries {
        total += catalog.storage_cost(a, f, users)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    pub exponent: f64,
}

/// Content requests, one per user per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestTrace {
    users: usize,
    slots: Vec<Vec<ContentId>>,
}

impl RequestTrace {
    pub fn from_slots(users: usize, slots: Vec<Vec<ContentId>>) -> Result<Self> {
        if let Some(t) = slots.iter().position(|s| s.len() != users) {
            return Err(ContentError::Parse { line: t, reason: "slot does not cover every user".into() });
        }
        Ok(Self { users, slots })
    }

    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn request(&self, t: usize, user: UserId) -> ContentId {
        self.slots[t][user.0]
    }

    pub fn slot(&self, t: usize) -> &[ContentId] {
        &self.slots[t]
    }

    pub fn validate(&self, catalog: &ContentCatalog) -> Result<()> {
        for slot in &self.slots {
            for a in slot {
                catalog.get(*a)?;
            }
        }
        Ok(())
    }

    /// One `t,user_id,content_id` line per request.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, slot) in self.slots.iter().enumerate() {
            for (i, a) in slot.iter().enumerate() {
                out.push_str(&format!("{t},{i},{a}\n"));
            }
        }
        out
    }
}

impl FromStr for RequestTrace {
    type Err = ContentError;

    /// Lines may come in any order but must cover every (slot, user) pair once.
    fn from_str(s: &str) -> Result<Self> {
        let mut cells: BTreeMap<(usize, usize), ContentId> = BTreeMap::new();
        let mut max_t = None;
        let mut max_i = None;
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| ContentError::Parse { line: n + 1, reason: reason.to_string() };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected t,user_id,content_id"));
            }
            let parse = |x: &str| x.parse::<usize>().map_err(|_| err("not a non-negative integer"));
            let (t, i, a) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            if cells.insert((t, i), ContentId(a)).is_some() {
                return Err(err("duplicate (slot, user) pair"));
            }
            max_t = max_t.max(Some(t));
            max_i = max_i.max(Some(i));
        }
        let (Some(max_t), Some(max_i)) = (max_t, max_i) else {
            return Err(ContentError::EmptyHorizon);
        };
        let users = max_i + 1;
        let mut slots = Vec::with_capacity(max_t + 1);
        for t in 0..=max_t {
            let mut slot = Vec::with_capacity(users);
            for i in 0..users {
                match cells.get(&(t, i)) {
                    Some(a) => slot.push(*a),
                    None => {
                        return Err(ContentError::Parse {
                            line: 0,
                            reason: format!("missing request for slot {t}, user {i}"),
                        })
                    }
                }
            }
            slots.push(slot);
        }
        Self::from_slots(users, slots)
    }
}

/// Draws i.i.d. Zipf requests: content id `a` has rank `a + 1`.
pub fn generate_requests(
    popularity: ZipfParams,
    users: usize,
    catalog: &ContentCatalog,
    horizon: usize,
    seed: u64,
) -> Result<RequestTrace> {
    if catalog.is_empty() {
        return Err(ContentError::EmptyCatalog);
    }
    if horizon == 0 {
        return Err(ContentError::EmptyHorizon);
    }
    let zipf = Zipf::new(catalog.len() as f64, popularity.exponent)
        .map_err(|_| ContentError::InvalidZipf(popularity.exponent))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = (0..horizon)
        .map(|_| (0..users).map(|_| ContentId(zipf.sample(&mut rng) as usize - 1)).collect())
        .collect();
    Ok(RequestTrace { users, slots })
}

/// `U_ja`: how many of `users` request each content in one slot.
pub fn requesters_per_content(users: &[UserId], requests: &[ContentId]) -> BTreeMap<ContentId, u32> {
    let mut counts = BTreeMap::new();
    for u in users {
        *counts.entry(requests[u.0]).or_insert(0) += 1;
    }
    counts
}
