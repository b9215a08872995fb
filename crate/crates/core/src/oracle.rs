//! Per-slot decision rules for one SBS: the best transmission format for each
//! missed request given a cache plan, and the best cache plan given the
//! transmission formats, plus exhaustive verifiers for both.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{occupancy_of, requesters_per_content, ContentCatalog, ContentError, ContentId, Format, SbsId, UavId, UserId};
use crate::latency::{is_successful, ComputeBudget, DeliveryPath, DeliveryPlan, LatencyError, LinkRates};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error("content {0} is missed but has no requesters")]
    NoRequesters(ContentId),
    #[error("no transmission format for missed request of user {0}")]
    MissingFormat(UserId),
    #[error("user {0} appears twice in the snapshot")]
    DuplicateUser(UserId),
    #[error("exhaustive search over {size} items exceeds the limit {limit}")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// One associated user's request in the slot and the rates it sees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserDemand {
    pub user: UserId,
    pub content: ContentId,
    pub uav: UavId,
    pub rates: LinkRates<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSnapshot {
    pub sbs: SbsId,
    pub demands: Vec<UserDemand>,
    pub catalog: ContentCatalog,
    pub compute: ComputeBudget<f64>,
    pub deadline_s: f64,
    pub cache_capacity_bits: u64,
}

impl SlotSnapshot {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.demands {
            self.catalog.get(d.content)?;
            if !seen.insert(d.user) {
                return Err(OracleError::DuplicateUser(d.user));
            }
        }
        self.compute.validate()?;
        Ok(())
    }

    /// `U_j`.
    pub fn users(&self) -> u32 {
        self.demands.len() as u32
    }

    /// `U_ja` for every requested content.
    pub fn requesters(&self) -> BTreeMap<ContentId, u32> {
        let users: Vec<UserId> = (0..self.demands.len()).map(UserId).collect();
        let requests: Vec<ContentId> = self.demands.iter().map(|d| d.content).collect();
        requesters_per_content(&users, &requests)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    fn plan(&self, d: &UserDemand, path: DeliveryPath, requesters: u32) -> DeliveryPlan<f64> {
        DeliveryPlan {
            user: d.user,
            content: d.content,
            sbs: self.sbs,
            uav: d.uav,
            path,
            rates: d.rates,
            users_at_sbs: self.users(),
            requesters,
        }
    }

    fn succeeds(&self, d: &UserDemand, path: DeliveryPath, requesters: u32) -> Result<bool> {
        Ok(is_successful(&self.plan(d, path, requesters), &self.catalog, &self.compute, self.deadline_s)?)
    }
}

/// Transmission format per missed request.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatDecision {
    pub formats: BTreeMap<UserId, Format>,
}

impl FormatDecision {
    pub fn get(&self, user: UserId) -> Option<Format> {
        self.formats.get(&user).copied()
    }

    /// The same format for every request in the snapshot.
    pub fn uniform(snapshot: &SlotSnapshot, format: Format) -> Self {
        Self { formats: snapshot.demands.iter().map(|d| (d.user, format)).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachePlan {
    pub entries: BTreeMap<ContentId, Format>,
}

impl CachePlan {
    pub fn new(entries: BTreeMap<ContentId, Format>) -> Self {
        Self { entries }
    }

    pub fn occupancy(&self, snapshot: &SlotSnapshot) -> Result<u64> {
        Ok(occupancy_of(self.entries.iter().map(|(a, f)| (*a, *f)), snapshot.users(), &snapshot.catalog)?)
    }

    pub fn is_feasible(&self, snapshot: &SlotSnapshot) -> Result<bool> {
        Ok(self.occupancy(snapshot)? <= snapshot.cache_capacity_bits)
    }
}

/// Deadline-meeting requests, split by cache hit and miss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessCount {
    pub hits: u32,
    pub misses: u32,
}

impl SuccessCount {
    pub fn total(&self) -> u32 {
        self.hits + self.misses
    }
}

/// The closed-form format rule for a missed request: ship the 360-degree frame
/// when its multicast share is no larger than a visible view, otherwise when
/// the compute saving of extracting at the SBS outweighs the extra backhaul
/// time, else ship the visible view.
pub fn format_rule(
    catalog: &ContentCatalog,
    content: ContentId,
    users_at_sbs: u32,
    requesters: u32,
    backhaul_down_bps: f64,
    compute: &ComputeBudget<f64>,
) -> Result<Format> {
    if requesters == 0 {
        return Err(OracleError::NoRequesters(content));
    }
    let item = catalog.get(content)?;
    let (g360, g120, h) = (item.size_360_bits as f64, item.size_visible_bits as f64, item.extract_workload_bits as f64);
    let uja = requesters as f64;
    if g360 <= uja * g120 {
        return Ok(Format::Full360);
    }
    if !(backhaul_down_bps > 0.0) {
        // Both miss paths are unreachable.
        return Ok(Format::Full360);
    }
    let compute_term = h * users_at_sbs as f64 * (1.0 / compute.sbs_bps - compute.uav_share_factor() / compute.uav_bps);
    let transfer_term = if backhaul_down_bps.is_infinite() { 0.0 } else { (g360 / uja - g120) / backhaul_down_bps };
    Ok(if compute_term + transfer_term <= 0.0 { Format::Full360 } else { Format::Visible })
}

pub fn optimal_format(snapshot: &SlotSnapshot, cache_plan: &CachePlan) -> Result<FormatDecision> {
    let requesters = snapshot.requesters();
    let mut formats = BTreeMap::new();
    for d in &snapshot.demands {
        if cache_plan.entries.contains_key(&d.content) {
            continue;
        }
        let uja = requesters.get(&d.content).copied().unwrap_or(0);
        let f = format_rule(&snapshot.catalog, d.content, snapshot.users(), uja, d.rates.backhaul_down, &snapshot.compute)?;
        formats.insert(d.user, f);
    }
    Ok(FormatDecision { formats })
}

pub fn count_successes(snapshot: &SlotSnapshot, cache_plan: &CachePlan, formats: &FormatDecision) -> Result<SuccessCount> {
    let requesters = snapshot.requesters();
    let mut count = SuccessCount::default();
    for d in &snapshot.demands {
        let uja = requesters[&d.content];
        match cache_plan.entries.get(&d.content) {
            Some(&cached) => count.hits += snapshot.succeeds(d, DeliveryPath::Hit { cached }, uja)? as u32,
            None => {
                let transmit = formats.get(d.user).ok_or(OracleError::MissingFormat(d.user))?;
                count.misses += snapshot.succeeds(d, DeliveryPath::Miss { transmit }, uja)? as u32;
            }
        }
    }
    Ok(count)
}

/// Per-user success under each delivery path, for every user in the snapshot.
pub fn per_user_success(snapshot: &SlotSnapshot, cache_plan: &CachePlan, formats: &FormatDecision) -> Result<Vec<bool>> {
    let requesters = snapshot.requesters();
    snapshot
        .demands
        .iter()
        .map(|d| {
            let uja = requesters[&d.content];
            let path = match cache_plan.entries.get(&d.content) {
                Some(&cached) => DeliveryPath::Hit { cached },
                None => DeliveryPath::Miss { transmit: formats.get(d.user).ok_or(OracleError::MissingFormat(d.user))? },
            };
            snapshot.succeeds(d, path, uja)
        })
        .collect()
}

/// Default bound on missed requests for [`brute_force_format`].
pub const FORMAT_SEARCH_LIMIT: usize = 16;
/// Default bound on catalog size for [`brute_force_cache`].
pub const CACHE_SEARCH_LIMIT: usize = 12;

/// Exhaustive search over all format vectors of the missed requests.
pub fn brute_force_format(snapshot: &SlotSnapshot, cache_plan: &CachePlan, limit: usize) -> Result<FormatDecision> {
    let missed: Vec<UserId> = snapshot
        .demands
        .iter()
        .filter(|d| !cache_plan.entries.contains_key(&d.content))
        .map(|d| d.user)
        .collect();
    if missed.len() > limit {
        return Err(OracleError::TooLarge { size: missed.len(), limit });
    }
    let mut best: Option<(u32, FormatDecision)> = None;
    for mask in 0u64..(1u64 << missed.len()) {
        let formats = FormatDecision {
            formats: missed
                .iter()
                .enumerate()
                .map(|(k, u)| (*u, if mask >> k & 1 == 1 { Format::Full360 } else { Format::Visible }))
                .collect(),
        };
        let n = count_successes(snapshot, cache_plan, &formats)?.total();
        if best.as_ref().is_none_or(|(b, _)| n > *b) {
            best = Some((n, formats));
        }
    }
    Ok(best.map(|(_, f)| f).unwrap_or_default())
}

/// Marginal successes gained by caching one content in a given format, over
/// serving its requesters as misses with the given transmission formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheGain {
    pub content: ContentId,
    pub visible: i64,
    pub full_360: i64,
}

impl CacheGain {
    pub fn get(&self, format: Format) -> i64 {
        match format {
            Format::Visible => self.visible,
            Format::Full360 => self.full_360,
        }
    }
}

/// Gain of caching each requested content, per storage format.
pub fn cache_gains(snapshot: &SlotSnapshot, formats: &FormatDecision) -> Result<Vec<CacheGain>> {
    let requesters = snapshot.requesters();
    let mut gains: BTreeMap<ContentId, CacheGain> = BTreeMap::new();
    for d in &snapshot.demands {
        let uja = requesters[&d.content];
        let transmit = formats.get(d.user).ok_or(OracleError::MissingFormat(d.user))?;
        let baseline = snapshot.succeeds(d, DeliveryPath::Miss { transmit }, uja)? as i64;
        let vis = snapshot.succeeds(d, DeliveryPath::Hit { cached: Format::Visible }, uja)? as i64;
        let full = snapshot.succeeds(d, DeliveryPath::Hit { cached: Format::Full360 }, uja)? as i64;
        let g = gains.entry(d.content).or_insert(CacheGain { content: d.content, visible: 0, full_360: 0 });
        g.visible += vis - baseline;
        g.full_360 += full - baseline;
    }
    Ok(gains.into_values().collect())
}

/// Sum of cache gains of a plan; contents nobody requests add nothing.
pub fn cache_objective(snapshot: &SlotSnapshot, plan: &CachePlan, formats: &FormatDecision) -> Result<i64> {
    let gains = cache_gains(snapshot, formats)?;
    Ok(plan
        .entries
        .iter()
        .map(|(a, f)| gains.iter().find(|g| g.content == *a).map_or(0, |g| g.get(*f)))
        .sum())
}

/// Preference between two feasible plans: higher objective, then less storage,
/// then the lexicographically smaller `(content, format)` list.
fn better(a: (i64, u64, &CachePlan), b: (i64, u64, &CachePlan)) -> bool {
    let ord = b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.entries.iter().cmp(b.2.entries.iter()));
    ord == Ordering::Less
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CacheSearch {
    /// Exact branch and bound.
    #[default]
    Exact,
    /// Gain-per-bit greedy fill; not guaranteed optimal.
    GreedyDensity,
}

/// Feasible cache plan maximizing the summed cache gain for fixed formats.
pub fn optimal_cache(snapshot: &SlotSnapshot, formats: &FormatDecision) -> Result<CachePlan> {
    optimal_cache_with(snapshot, formats, CacheSearch::Exact)
}

pub fn optimal_cache_with(snapshot: &SlotSnapshot, formats: &FormatDecision, search: CacheSearch) -> Result<CachePlan> {
    let users = snapshot.users();
    let mut options = Vec::new();
    for g in cache_gains(snapshot, formats)? {
        // Options with no positive gain can never be part of the preferred plan.
        let mut opts = Vec::new();
        for f in Format::ALL {
            if g.get(f) > 0 {
                opts.push((f, g.get(f), snapshot.catalog.storage_cost(g.content, f, users)?));
            }
        }
        if !opts.is_empty() {
            options.push((g.content, opts));
        }
    }
    match search {
        CacheSearch::Exact => Ok(branch_and_bound(&options, snapshot.cache_capacity_bits)),
        CacheSearch::GreedyDensity => Ok(greedy_density(&options, snapshot.cache_capacity_bits)),
    }
}

type Options = Vec<(ContentId, Vec<(Format, i64, u64)>)>;

fn branch_and_bound(options: &Options, capacity: u64) -> CachePlan {
    // Suffix sums of the best gain of each remaining item, for the bound.
    let mut rest = vec![0i64; options.len() + 1];
    for k in (0..options.len()).rev() {
        rest[k] = rest[k + 1] + options[k].1.iter().map(|o| o.1).max().unwrap_or(0);
    }
    struct Search<'a> {
        options: &'a Options,
        rest: Vec<i64>,
        capacity: u64,
        current: CachePlan,
        best: CachePlan,
        best_key: (i64, u64),
    }
    impl Search<'_> {
        fn go(&mut self, k: usize, gain: i64, used: u64) {
            if gain + self.rest[k] < self.best_key.0 {
                return;
            }
            if k == self.options.len() {
                if better((gain, used, &self.current), (self.best_key.0, self.best_key.1, &self.best)) {
                    self.best = self.current.clone();
                    self.best_key = (gain, used);
                }
                return;
            }
            let (content, ref opts) = self.options[k];
            for &(f, g, cost) in opts {
                if used + cost <= self.capacity {
                    self.current.entries.insert(content, f);
                    self.go(k + 1, gain + g, used + cost);
                    self.current.entries.remove(&content);
                }
            }
            self.go(k + 1, gain, used);
        }
    }
    let mut s = Search {
        options,
        rest,
        capacity,
        current: CachePlan::default(),
        best: CachePlan::default(),
        best_key: (0, 0),
    };
    s.go(0, 0, 0);
    s.best
}

fn greedy_density(options: &Options, capacity: u64) -> CachePlan {
    let mut cands: Vec<(ContentId, Format, i64, u64)> =
        options.iter().flat_map(|(a, o)| o.iter().map(move |&(f, g, c)| (*a, f, g, c))).collect();
    cands.sort_by(|x, y| {
        let dx = x.2 as f64 / x.3.max(1) as f64;
        let dy = y.2 as f64 / y.3.max(1) as f64;
        dy.total_cmp(&dx).then(x.3.cmp(&y.3)).then(x.0.cmp(&y.0))
    });
    let mut plan = CachePlan::default();
    let mut used = 0;
    for (a, f, _, c) in cands {
        if !plan.entries.contains_key(&a) && used + c <= capacity {
            plan.entries.insert(a, f);
            used += c;
        }
    }
    plan
}

/// Exhaustive search over every (content, format) subset of the catalog.
pub fn brute_force_cache(snapshot: &SlotSnapshot, formats: &FormatDecision, limit: usize) -> Result<CachePlan> {
    let n = snapshot.catalog.len();
    if n > limit {
        return Err(OracleError::TooLarge { size: n, limit });
    }
    let gains = cache_gains(snapshot, formats)?;
    let gain_of = |a: ContentId, f: Format| gains.iter().find(|g| g.content == a).map_or(0, |g| g.get(f));
    let users = snapshot.users();
    let mut best = CachePlan::default();
    let mut best_key = (0i64, 0u64);
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut plan = CachePlan::default();
        let mut c = code;
        let (mut gain, mut used) = (0i64, 0u64);
        for a in 0..n {
            let digit = c % 3;
            c /= 3;
            let f = match digit {
                0 => continue,
                1 => Format::Visible,
                _ => Format::Full360,
            };
            let id = ContentId(a);
            plan.entries.insert(id, f);
            gain += gain_of(id, f);
            used += snapshot.catalog.storage_cost(id, f, users)?;
        }
        if used <= snapshot.cache_capacity_bits && better((gain, used, &plan), (best_key.0, best_key.1, &best)) {
            best = plan;
            best_key = (gain, used);
        }
    }
    Ok(best)
}
