//! Per-SBS learning agents: the action space each SBS chooses from, action
//! selection, the synchronous learning loop and the baseline learners.

mod learner;
mod policy;
mod qlearning;
pub mod theorem;

pub use learner::*;
pub use policy::*;
pub use qlearning::*;

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::content::{ContentCatalog, ContentError, ContentId, Format, SbsId, UserId};
use crate::oracle::{CachePlan, OracleError};
use crate::reservoir::ReservoirError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("SBS {0} has an empty action set")]
    EmptyActionSet(SbsId),
    #[error("action space of SBS {sbs} has {size} actions before sampling, too many to index")]
    ActionSpaceTooLarge { sbs: SbsId, size: u128 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
}

pub type Result<T> = std::result::Result<T, AgentError>;

/// Which decision the learned action carries besides user association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// The action fixes the cache; formats follow the closed-form rule.
    Cache,
    /// The action fixes the transmission format per content; the cache is the
    /// best plan for those formats.
    Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ModeChoice {
    /// [`Mode::Cache`] when the most requested content fits in the cache in
    /// its cheaper format, else [`Mode::Format`].
    #[default]
    Auto,
    Fixed(Mode),
}

/// Part of the delivery decision replaced by a uniform random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Ablation {
    #[default]
    None,
    RandomCache,
    RandomFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    /// The mode's component is drawn at random instead of learned.
    Random,
    /// Entry `k` is the cache slot for the space's `k`-th content.
    Cache(Vec<Option<Format>>),
    /// Entry `k` is the transmission format for the space's `k`-th content.
    Formats(Vec<Format>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    /// Entry `k` set means the SBS claims the space's `k`-th guest user.
    pub claims: Vec<bool>,
    pub choice: Choice,
}

/// What one SBS knows when building its action set.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView<'a> {
    pub sbs: SbsId,
    /// Users whose nearest SBS is this one; they stay unless another SBS claims them.
    pub home: Vec<UserId>,
    /// Users for which this SBS is one of the other candidate SBSs.
    pub guests: Vec<UserId>,
    /// Contents the action decides about, most popular first.
    pub contents: Vec<ContentId>,
    pub catalog: &'a ContentCatalog,
    pub capacity_bits: u64,
}

impl AgentView<'_> {
    /// Largest number of users the SBS can end up serving.
    pub fn max_users(&self) -> u32 {
        (self.home.len() + self.guests.len()) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLimits {
    pub cap: usize,
    pub seed: u64,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self { cap: 256, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub sbs: SbsId,
    pub mode: Mode,
    pub guests: Vec<UserId>,
    pub contents: Vec<ContentId>,
    pub actions: Vec<Action>,
    /// Every cache vector over `contents` that fits when all candidate users attach.
    pub feasible_caches: Vec<Vec<Option<Format>>>,
}

impl ActionSpace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn claimed(&self, action: usize) -> Vec<UserId> {
        self.guests.iter().zip(&self.actions[action].claims).filter(|(_, c)| **c).map(|(u, _)| *u).collect()
    }

    pub fn cache_plan(&self, vector: &[Option<Format>]) -> CachePlan {
        CachePlan::new(self.contents.iter().zip(vector).filter_map(|(a, f)| f.map(|f| (*a, f))).collect())
    }

    pub fn format_map(&self, formats: &[Format]) -> BTreeMap<ContentId, Format> {
        self.contents.iter().copied().zip(formats.iter().copied()).collect()
    }
}

pub fn choose_mode(view: &AgentView<'_>, choice: ModeChoice) -> Result<Mode> {
    Ok(match choice {
        ModeChoice::Fixed(m) => m,
        ModeChoice::Auto => {
            let Some(&top) = view.contents.first() else {
                return Ok(Mode::Format);
            };
            let users = view.max_users().max(1);
            let cheapest = view
                .catalog
                .storage_cost(top, Format::Visible, users)?
                .min(view.catalog.storage_cost(top, Format::Full360, users)?);
            if view.capacity_bits >= cheapest {
                Mode::Cache
            } else {
                Mode::Format
            }
        }
    })
}

const CACHE_OPTIONS: [Option<Format>; 3] = [None, Some(Format::Visible), Some(Format::Full360)];
const FORMAT_OPTIONS: [Format; 2] = [Format::Visible, Format::Full360];

/// All cache vectors over `view.contents` within capacity for `view.max_users()`,
/// in lexicographic order (none < visible < 360, first content most significant).
pub fn feasible_cache_vectors(view: &AgentView<'_>) -> Result<Vec<Vec<Option<Format>>>> {
    let users = view.max_users();
    let mut costs = Vec::with_capacity(view.contents.len());
    for &a in &view.contents {
        costs.push([
            0,
            view.catalog.storage_cost(a, Format::Visible, users)?,
            view.catalog.storage_cost(a, Format::Full360, users)?,
        ]);
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(costs.len());
    fn walk(
        costs: &[[u64; 3]],
        remaining: u64,
        current: &mut Vec<Option<Format>>,
        out: &mut Vec<Vec<Option<Format>>>,
    ) {
        let k = current.len();
        if k == costs.len() {
            out.push(current.clone());
            return;
        }
        for (o, opt) in CACHE_OPTIONS.iter().enumerate() {
            if costs[k][o] <= remaining {
                current.push(*opt);
                walk(costs, remaining - costs[k][o], current, out);
                current.pop();
            }
        }
    }
    walk(&costs, view.capacity_bits, &mut current, &mut out);
    Ok(out)
}

/// Fills the cache with the listed contents in order, as 360-degree copies,
/// skipping those that no longer fit.
pub fn greedy_cache_vector(view: &AgentView<'_>) -> Result<Vec<Option<Format>>> {
    let mut left = view.capacity_bits;
    let mut v = Vec::with_capacity(view.contents.len());
    for &a in &view.contents {
        let cost = view.catalog.storage_cost(a, Format::Full360, view.max_users())?;
        if cost <= left {
            left -= cost;
            v.push(Some(Format::Full360));
        } else {
            v.push(None);
        }
    }
    Ok(v)
}

/// Builds the SBS's action set: every claim pattern over its guests combined
/// with every choice of the mode's component. Above `limits.cap` actions a
/// seed-deterministic uniform sample is kept, always including the
/// no-claim/no-cache action and the no-claim/greedy-cache action.
pub fn enumerate_actions(view: &AgentView<'_>, mode: Mode, ablation: Ablation, limits: ActionLimits) -> Result<ActionSpace> {
    if limits.cap == 0 {
        return Err(AgentError::InvalidConfig("action cap must be >= 1"));
    }
    let feasible_caches = feasible_cache_vectors(view)?;
    let m = view.contents.len();
    let choices: Vec<Choice> = match (mode, ablation) {
        (Mode::Cache, Ablation::RandomCache) | (Mode::Format, Ablation::RandomFormat) => vec![Choice::Random],
        (Mode::Cache, _) => feasible_caches.iter().cloned().map(Choice::Cache).collect(),
        (Mode::Format, _) => (0..1usize << m)
            .map(|bits| Choice::Formats((0..m).map(|k| FORMAT_OPTIONS[(bits >> (m - 1 - k)) & 1]).collect()))
            .collect(),
    };
    let g = view.guests.len();
    let size = (1u128 << g.min(127)) * choices.len() as u128;
    if g >= 64 || size > u64::MAX as u128 {
        return Err(AgentError::ActionSpaceTooLarge { sbs: view.sbs, size });
    }
    let size = size as usize;
    let c = choices.len();

    let picked: Vec<usize> = if size <= limits.cap {
        (0..size).collect()
    } else {
        let mut forced = vec![0usize];
        if let Choice::Cache(_) = &choices[0] {
            let greedy = Choice::Cache(greedy_cache_vector(view)?);
            if let Some(k) = choices.iter().position(|ch| *ch == greedy) {
                forced.push(k);
            }
        }
        forced.sort_unstable();
        forced.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(limits.seed ^ (view.sbs.0 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let want = limits.cap.saturating_sub(forced.len());
        // Sample from the index space with the forced indices removed.
        let mut rest: Vec<usize> = index::sample(&mut rng, size - forced.len(), want)
            .into_iter()
            .map(|mut i| {
                for &f in &forced {
                    if i >= f {
                        i += 1;
                    }
                }
                i
            })
            .collect();
        rest.extend(forced.iter().take(limits.cap));
        rest.sort_unstable();
        rest
    };

    let actions = picked
        .into_iter()
        .map(|idx| {
            let (claim_bits, k) = (idx / c, idx % c);
            Action { claims: (0..g).map(|b| claim_bits >> b & 1 == 1).collect(), choice: choices[k].clone() }
        })
        .collect::<Vec<_>>();
    if actions.is_empty() {
        return Err(AgentError::EmptyActionSet(view.sbs));
    }
    Ok(ActionSpace {
        sbs: view.sbs,
        mode,
        guests: view.guests.clone(),
        contents: view.contents.clone(),
        actions,
        feasible_caches,
    })
}

/// Serving SBS of every user: the nearest candidate among those claiming it,
/// else its first (home) candidate. `claims[j]` lists the users SBS `j` claims.
pub fn resolve_association(candidates: &[Vec<SbsId>], claims: &[Vec<UserId>]) -> Vec<SbsId> {
    let mut claimed: Vec<Vec<bool>> = vec![vec![false; candidates.len()]; claims.len()];
    for (j, users) in claims.iter().enumerate() {
        for u in users {
            claimed[j][u.0] = true;
        }
    }
    candidates
        .iter()
        .enumerate()
        .map(|(i, cands)| cands.iter().skip(1).find(|s| claimed[s.0][i]).copied().unwrap_or(cands[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog(n: usize) -> ContentCatalog {
        ContentCatalog::uniform(1, n, 50, 12, 10, 1).unwrap()
    }

    fn view<'a>(cat: &'a ContentCatalog, home: usize, guests: usize, contents: usize, cap: u64) -> AgentView<'a> {
        AgentView {
            sbs: SbsId(0),
            home: (0..home).map(UserId).collect(),
            guests: (home..home + guests).map(UserId).collect(),
            contents: (0..contents).map(ContentId).collect(),
            catalog: cat,
            capacity_bits: cap,
        }
    }

    #[test]
    fn one_user_one_content() {
        let cat = catalog(1);
        let v = view(&cat, 1, 0, 1, 50);
        let f = enumerate_actions(&v, Mode::Format, Ablation::None, ActionLimits::default()).unwrap();
        assert_eq!(f.len(), 2);
        let c = enumerate_actions(&v, Mode::Cache, Ablation::None, ActionLimits::default()).unwrap();
        assert_eq!(c.len(), 3);
        let choices: Vec<_> = c.actions.iter().map(|a| a.choice.clone()).collect();
        assert_eq!(
            choices,
            vec![Choice::Cache(vec![None]), Choice::Cache(vec![Some(Format::Visible)]), Choice::Cache(vec![Some(Format::Full360)])]
        );
    }

    #[test]
    fn cache_vectors_respect_capacity_for_all_candidates() {
        let cat = catalog(3);
        // 2 home + 2 guests: visible costs 48, 360 costs 50.
        let v = view(&cat, 2, 2, 3, 100);
        let vecs = feasible_cache_vectors(&v).unwrap();
        for vec in &vecs {
            let used: u64 = vec
                .iter()
                .map(|f| match f {
                    None => 0,
                    Some(Format::Visible) => 48,
                    Some(Format::Full360) => 50,
                })
                .sum();
            assert!(used <= 100);
        }
        // Brute count: 3^3 vectors with at most two non-empty slots.
        assert_eq!(vecs.len(), 1 + 3 * 2 + 3 * 4);
    }

    #[test]
    fn capped_space_is_deterministic_and_keeps_anchor_actions() {
        let cat = catalog(3);
        let v = view(&cat, 2, 8, 3, 200);
        let limits = ActionLimits { cap: 256, seed: 7 };
        let a = enumerate_actions(&v, Mode::Cache, Ablation::None, limits).unwrap();
        let b = enumerate_actions(&v, Mode::Cache, Ablation::None, limits).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 256);
        let none = Action { claims: vec![false; 8], choice: Choice::Cache(vec![None; 3]) };
        let greedy = Action { claims: vec![false; 8], choice: Choice::Cache(greedy_cache_vector(&v).unwrap()) };
        assert!(a.actions.contains(&none));
        assert!(a.actions.contains(&greedy));
        let mut dedup = a.actions.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
        let other = enumerate_actions(&v, Mode::Cache, Ablation::None, ActionLimits { cap: 256, seed: 8 }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn ablations_drop_the_randomised_component() {
        let cat = catalog(3);
        let v = view(&cat, 1, 2, 3, 200);
        let s = enumerate_actions(&v, Mode::Cache, Ablation::RandomCache, ActionLimits::default()).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.actions.iter().all(|a| a.choice == Choice::Random));
        let s = enumerate_actions(&v, Mode::Format, Ablation::RandomFormat, ActionLimits::default()).unwrap();
        assert_eq!(s.len(), 4);
        let s = enumerate_actions(&v, Mode::Format, Ablation::None, ActionLimits::default()).unwrap();
        assert_eq!(s.len(), 4 * 8);
    }

    #[test]
    fn auto_mode_follows_capacity() {
        let cat = catalog(2);
        assert_eq!(choose_mode(&view(&cat, 2, 0, 2, 24), ModeChoice::Auto).unwrap(), Mode::Cache);
        assert_eq!(choose_mode(&view(&cat, 2, 0, 2, 23), ModeChoice::Auto).unwrap(), Mode::Format);
        assert_eq!(choose_mode(&view(&cat, 2, 0, 2, 0), ModeChoice::Fixed(Mode::Cache)).unwrap(), Mode::Cache);
    }

    #[test]
    fn association_prefers_nearest_claimer() {
        let cands = vec![vec![SbsId(0), SbsId(1), SbsId(2)], vec![SbsId(1), SbsId(0)], vec![SbsId(2), SbsId(0)]];
        let claims = vec![vec![UserId(1)], vec![], vec![UserId(0)]];
        assert_eq!(resolve_association(&cands, &claims), vec![SbsId(2), SbsId(0), SbsId(2)]);
        let claims = vec![vec![], vec![UserId(0)], vec![UserId(0)]];
        assert_eq!(resolve_association(&cands, &claims)[0], SbsId(1));
    }

    proptest! {
        #[test]
        fn association_is_a_partition(
            seed in any::<u64>(),
            users in 1usize..30,
            sbs in 1usize..6,
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cands: Vec<Vec<SbsId>> = (0..users)
                .map(|_| {
                    let mut order: Vec<usize> = (0..sbs).collect();
                    rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
                    order.into_iter().take(2).map(SbsId).collect()
                })
                .collect();
            let claims: Vec<Vec<UserId>> = (0..sbs)
                .map(|_| (0..users).filter(|_| rng.random_bool(0.3)).map(UserId).collect())
                .collect();
            let assoc = resolve_association(&cands, &claims);
            prop_assert_eq!(assoc.len(), users);
            for (i, s) in assoc.iter().enumerate() {
                prop_assert!(cands[i].contains(s));
                if *s != cands[i][0] {
                    prop_assert!(claims[s.0].contains(&UserId(i)));
                }
            }
        }

        #[test]
        fn every_cache_action_is_feasible(
            contents in 1usize..5,
            home in 0usize..4,
            guests in 0usize..5,
            cap in 0u64..250,
        ) {
            let cat = catalog(contents);
            let v = view(&cat, home, guests, contents, cap);
            let space = enumerate_actions(&v, Mode::Cache, Ablation::None, ActionLimits { cap: 64, seed: 1 }).unwrap();
            prop_assert!(space.len() <= 64);
            for a in &space.actions {
                let Choice::Cache(vec) = &a.choice else { unreachable!() };
                let used: u64 = space.contents.iter().zip(vec).filter_map(|(c, f)| f.map(|f| cat.storage_cost(*c, f, v.max_users()).unwrap())).sum();
                prop_assert!(used <= cap);
            }
        }
    }
}
