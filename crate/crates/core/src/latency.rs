//! Per-request delay: backhaul and access transmission, UAV and SBS view
//! extraction, the deadline test and the running per-user reliability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{ContentCatalog, ContentError, ContentId, Format, SbsId, UavId, UserId};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error("invalid compute budget: {0}")]
    InvalidBudget(&'static str),
    #[error("360-degree miss for content {0} with no requesters")]
    NoRequesters(ContentId),
    #[error("plan for user {0} has no associated users at its SBS")]
    NoUsers(UserId),
}

pub type Result<T> = std::result::Result<T, LatencyError>;

/// How a UAV's extraction capacity is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UavShare {
    /// `R_U` is available to each SBS separately.
    PerSbs,
    /// `R_U` is shared by `sbs_count` SBSs, so each user gets `R_U / (B * U_j)`.
    SharedAcross { sbs_count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeBudget<T> {
    /// `R_U`, bit/s.
    pub uav_bps: T,
    /// `R_S`, bit/s.
    pub sbs_bps: T,
    pub uav_share: UavShare,
}

impl<T: Scalar> ComputeBudget<T> {
    pub fn new(uav_bps: T, sbs_bps: T, uav_share: UavShare) -> Result<Self> {
        let b = Self { uav_bps, sbs_bps, uav_share };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.uav_bps > T::zero()) || !(self.sbs_bps > T::zero()) {
            return Err(LatencyError::InvalidBudget("rates must be > 0"));
        }
        if self.uav_bps > self.sbs_bps {
            return Err(LatencyError::InvalidBudget("UAV rate must not exceed the SBS rate"));
        }
        if let UavShare::SharedAcross { sbs_count: 0 } = self.uav_share {
            return Err(LatencyError::InvalidBudget("sharing across zero SBSs"));
        }
        Ok(())
    }

    /// The factor `B` multiplying `U_j / R_U` (1 when not shared).
    pub fn uav_share_factor(&self) -> T {
        match self.uav_share {
            UavShare::PerSbs => T::one(),
            UavShare::SharedAcross { sbs_count } => T::from_count(sbs_count as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRates<T> {
    pub backhaul_down: T,
    pub backhaul_up: T,
    pub access_down: T,
    pub access_up: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryPath {
    /// Served from the SBS cache in the stored format.
    Hit { cached: Format },
    /// Fetched from the UAV in the transmitted format.
    Miss { transmit: Format },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryPlan<T> {
    pub user: UserId,
    pub content: ContentId,
    pub sbs: SbsId,
    pub uav: UavId,
    pub path: DeliveryPath,
    pub rates: LinkRates<T>,
    /// `U_j`.
    pub users_at_sbs: u32,
    /// `U_ja`, users at the SBS requesting the same content.
    pub requesters: u32,
}

/// A delay, or the marker for a link with no capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Delay<T> {
    Finite(T),
    Unreachable,
}

impl<T: Scalar> Delay<T> {
    pub fn zero() -> Self {
        Delay::Finite(T::zero())
    }

    pub fn meets(&self, deadline_s: T) -> bool {
        match self {
            Delay::Finite(d) => *d <= deadline_s,
            Delay::Unreachable => false,
        }
    }

    pub fn seconds(&self) -> Option<T> {
        match self {
            Delay::Finite(d) => Some(*d),
            Delay::Unreachable => None,
        }
    }

    /// `bits / rate`; a non-positive rate is unreachable and an infinite one costs nothing.
    pub fn transfer(bits: T, rate: T) -> Self {
        if !(rate > T::zero()) {
            Delay::Unreachable
        } else if rate.is_infinite() {
            Delay::zero()
        } else {
            Delay::Finite(bits / rate)
        }
    }
}

impl<T: Scalar> std::ops::Add for Delay<T> {
    type Output = Delay<T>;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Delay::Finite(a), Delay::Finite(b)) => Delay::Finite(a + b),
            _ => Delay::Unreachable,
        }
    }
}

fn bits<T: Scalar>(b: u64) -> T {
    T::from_count(b)
}

/// Content and tracking transfer time over the backhaul (on a miss) and the
/// access link.
pub fn transmission_delay<T: Scalar>(plan: &DeliveryPlan<T>, catalog: &ContentCatalog) -> Result<Delay<T>> {
    let item = catalog.get(plan.content)?;
    let g120: T = bits(item.size_visible_bits);
    let tracking: T = bits(catalog.tracking_payload_bits());
    let r = &plan.rates;
    let access = Delay::transfer(g120, r.access_down) + Delay::transfer(tracking, r.access_up);
    Ok(match plan.path {
        DeliveryPath::Hit { .. } => access,
        DeliveryPath::Miss { transmit: Format::Visible } => {
            Delay::transfer(g120, r.backhaul_down) + Delay::transfer(tracking, r.backhaul_up) + access
        }
        DeliveryPath::Miss { transmit: Format::Full360 } => {
            if plan.requesters == 0 {
                return Err(LatencyError::NoRequesters(plan.content));
            }
            let share = bits::<T>(item.size_360_bits) / T::from_count(plan.requesters as u64);
            Delay::transfer(share, r.backhaul_down) + Delay::transfer(tracking, r.backhaul_up) + access
        }
    })
}

/// View extraction at the UAV; only for a miss shipped as a visible view.
pub fn uav_processing<T: Scalar>(
    plan: &DeliveryPlan<T>,
    catalog: &ContentCatalog,
    budget: &ComputeBudget<T>,
) -> Result<T> {
    match plan.path {
        DeliveryPath::Miss { transmit: Format::Visible } => {
            let h: T = bits(catalog.get(plan.content)?.extract_workload_bits);
            Ok(h * T::from_count(plan.users_at_sbs as u64) * budget.uav_share_factor() / budget.uav_bps)
        }
        _ => Ok(T::zero()),
    }
}

/// View extraction at the SBS, needed whenever it holds the 360-degree frame.
pub fn sbs_processing<T: Scalar>(
    plan: &DeliveryPlan<T>,
    catalog: &ContentCatalog,
    budget: &ComputeBudget<T>,
) -> Result<T> {
    match plan.path {
        DeliveryPath::Hit { cached: Format::Full360 } | DeliveryPath::Miss { transmit: Format::Full360 } => {
            let h: T = bits(catalog.get(plan.content)?.extract_workload_bits);
            Ok(h * T::from_count(plan.users_at_sbs as u64) / budget.sbs_bps)
        }
        _ => Ok(T::zero()),
    }
}

pub fn total_delay<T: Scalar>(
    plan: &DeliveryPlan<T>,
    catalog: &ContentCatalog,
    budget: &ComputeBudget<T>,
) -> Result<Delay<T>> {
    if plan.users_at_sbs == 0 {
        return Err(LatencyError::NoUsers(plan.user));
    }
    let processing = uav_processing(plan, catalog, budget)? + sbs_processing(plan, catalog, budget)?;
    Ok(Delay::Finite(processing) + transmission_delay(plan, catalog)?)
}

pub fn is_successful<T: Scalar>(
    plan: &DeliveryPlan<T>,
    catalog: &ContentCatalog,
    budget: &ComputeBudget<T>,
    deadline_s: T,
) -> Result<bool> {
    Ok(total_delay(plan, catalog, budget)?.meets(deadline_s))
}

/// Running fraction of a user's requests that met the deadline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityRecord {
    pub successes: u64,
    pub trials: u64,
}

impl ReliabilityRecord {
    pub fn update(&mut self, success: bool) {
        self.trials += 1;
        self.successes += success as u64;
    }

    /// 0 before the first trial.
    pub fn reliability(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

pub fn update_reliability(mut record: ReliabilityRecord, success: bool) -> ReliabilityRecord {
    record.update(success);
    record
}
