//! Trip pricing, reassignment compensation and the mediator's budget.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::Trip;
use crate::model::{CustomerId, TaxiId};

/// Tolerance for money comparisons.
pub const MONEY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconomicsError {
    #[error("fixed-price revenue requested without a contracted price")]
    MissingPrice,
    #[error("invalid pricing: {0}")]
    InvalidPricing(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PricingMode {
    /// Customer pays a flag fee plus a per-km fare for the ride; the taxi
    /// covers the cost of the empty pickup leg.
    DriverPaysPickup,
    /// Customer is also charged for the approach to the pickup point.
    CustomerPaysPickup,
    /// A closed price agreed with the customer before the trip.
    FixedPrice,
}

impl PricingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PricingMode::DriverPaysPickup => "driver_pays_pickup",
            PricingMode::CustomerPaysPickup => "customer_pays_pickup",
            PricingMode::FixedPrice => "fixed_price",
        }
    }
}

impl fmt::Display for PricingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PricingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "driver_pays_pickup" => Ok(PricingMode::DriverPaysPickup),
            "customer_pays_pickup" => Ok(PricingMode::CustomerPaysPickup),
            "fixed_price" => Ok(PricingMode::FixedPrice),
            other => Err(format!("unknown pricing mode `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PricingScheme {
    pub mode: PricingMode,
    /// Flag fee per trip, euros.
    pub fcost: f64,
    /// Fare per occupied kilometre, euros.
    pub fare: f64,
    /// Operating cost per driven kilometre, euros.
    pub cost: f64,
}

impl Default for PricingScheme {
    /// 2.4 € per trip, 1.05 €/km fare, 0.2 €/km operating cost.
    fn default() -> Self {
        Self {
            mode: PricingMode::DriverPaysPickup,
            fcost: 2.4,
            fare: 1.05,
            cost: 0.2,
        }
    }
}

impl PricingScheme {
    pub fn with_mode(mut self, mode: PricingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        let all_finite = self.fcost.is_finite() && self.fare.is_finite() && self.cost.is_finite();
        if !all_finite || self.cost < 0.0 || self.fare <= self.cost || self.fcost < 0.0 {
            return Err(EconomicsError::InvalidPricing(format!(
                "need fare > cost >= 0 and fcost >= 0, got fcost={} fare={} cost={}",
                self.fcost, self.fare, self.cost
            )));
        }
        Ok(())
    }

    /// Net earnings of the taxi for one trip.
    pub fn revenue(&self, trip: &Trip, contracted_price: Option<f64>) -> Result<f64, EconomicsError> {
        Ok(match self.mode {
            PricingMode::DriverPaysPickup => {
                self.fcost + self.fare * trip.ride - self.cost * trip.total()
            }
            PricingMode::CustomerPaysPickup => self.fcost + (self.fare - self.cost) * trip.ride,
            PricingMode::FixedPrice => {
                let price = contracted_price.ok_or(EconomicsError::MissingPrice)?;
                price - self.cost * trip.total()
            }
        })
    }

    /// What the customer is charged for the trip. Under every mode the
    /// taxi keeps `payment - cost * total`.
    pub fn payment(&self, trip: &Trip, contracted_price: Option<f64>) -> Result<f64, EconomicsError> {
        Ok(match self.mode {
            PricingMode::DriverPaysPickup => self.fcost + self.fare * trip.ride,
            PricingMode::CustomerPaysPickup => self.fcost + self.fare * trip.ride + self.cost * trip.pickup,
            PricingMode::FixedPrice => contracted_price.ok_or(EconomicsError::MissingPrice)?,
        })
    }

    /// Closed price offered to a customer whose ride is `ride_km` long:
    /// the metered price of the straight-line ride.
    pub fn quote(&self, ride_km: f64) -> f64 {
        self.fcost + self.fare * ride_km
    }

    /// Compensation for moving a taxi from its current customer `k` to `i`.
    ///
    /// Both trips are measured from the taxi's present position. Positive
    /// values are paid by the mediator to the taxi.
    pub fn compensation(
        &self,
        trip_k: &Trip,
        trip_i: &Trip,
        price_k: Option<f64>,
        price_i: Option<f64>,
    ) -> Result<f64, EconomicsError> {
        let r_k = self.revenue(trip_k, price_k)?;
        let r_i = self.revenue(trip_i, price_i)?;
        Ok(self.settle_difference(r_k, r_i, trip_k.total(), trip_i.total()))
    }

    /// Two-case compensation rule on precomputed revenues. Works for any
    /// mix of pricing schemes between the old and the new trip.
    ///
    /// When the new total distance is not longer the driver is made exactly
    /// whole; otherwise the driver also earns the margin `fare - cost` on every
    /// extra kilometre.
    pub fn settle_difference(&self, revenue_old: f64, revenue_new: f64, total_old: f64, total_new: f64) -> f64 {
        let c = revenue_old - revenue_new;
        if total_new <= total_old {
            c
        } else {
            c + (total_new - total_old) * (self.fare - self.cost)
        }
    }
}

/// A transfer between the mediator and one taxi for one reassignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Compensation {
    pub taxi: TaxiId,
    pub from_customer: CustomerId,
    pub to_customer: CustomerId,
    /// Positive: mediator pays the taxi. Negative: the taxi pays.
    pub amount: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LedgerMode {
    /// Reassignment rounds are adopted only if the accumulated balance stays
    /// non-negative. Starts from zero.
    BudgetGated,
    /// Same gate, starting from an external subsidy.
    Subsidized { initial: f64 },
    /// Participating taxis must accept every reassignment; no money moves.
    ForcedNoCompensation,
}

impl LedgerMode {
    pub fn initial_balance(&self) -> f64 {
        match self {
            LedgerMode::Subsidized { initial } => *initial,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LedgerMode::BudgetGated => "budget_gated",
            LedgerMode::Subsidized { .. } => "subsidized",
            LedgerMode::ForcedNoCompensation => "forced_no_compensation",
        }
    }
}

/// One adopted compensation together with the round it was settled in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub round: u64,
    pub compensation: Compensation,
}

/// The mediator's accumulated revenue and the history of transfers.
#[derive(Clone, Debug, PartialEq)]
pub struct MediatorLedger {
    mode: LedgerMode,
    balance: f64,
    history: Vec<LedgerEntry>,
    rounds_adopted: u64,
    rounds_rejected: u64,
}

impl MediatorLedger {
    pub fn new(mode: LedgerMode) -> Self {
        Self {
            mode,
            balance: mode.initial_balance(),
            history: Vec::new(),
            rounds_adopted: 0,
            rounds_rejected: 0,
        }
    }

    pub fn mode(&self) -> LedgerMode {
        self.mode
    }

    pub fn balance(&self) -> f64 {
        self.balance
    }

    pub fn initial_balance(&self) -> f64 {
        self.mode.initial_balance()
    }

    pub fn history(&self) -> &[LedgerEntry] {
        &self.history
    }

    pub fn rounds_adopted(&self) -> u64 {
        self.rounds_adopted
    }

    pub fn rounds_rejected(&self) -> u64 {
        self.rounds_rejected
    }

    /// Budget check for one reassignment round.
    ///
    /// Returns whether the round is adopted. Adopted rounds debit every
    /// compensation from the balance and are appended to the history (with
    /// zero amounts in forced mode); rejected rounds leave the ledger as is.
    /// The returned compensations are the amounts actually transferred.
    pub fn settle_round(&mut self, round: u64, compensations: &[Compensation]) -> (bool, Vec<Compensation>) {
        let settled: Vec<Compensation> = match self.mode {
            LedgerMode::ForcedNoCompensation => compensations
                .iter()
                .map(|c| Compensation { amount: 0.0, ..*c })
                .collect(),
            LedgerMode::BudgetGated | LedgerMode::Subsidized { .. } => {
                let tentative = compensations
                    .iter()
                    .fold(self.balance, |acc, c| acc - c.amount);
                if tentative < 0.0 {
                    self.rounds_rejected += 1;
                    return (false, Vec::new());
                }
                self.balance = tentative;
                compensations.to_vec()
            }
        };
        self.rounds_adopted += 1;
        self.history
            .extend(settled.iter().map(|&compensation| LedgerEntry { round, compensation }));
        (true, settled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> PricingScheme {
        PricingScheme::default()
    }

    fn comp(amount: f64) -> Compensation {
        Compensation {
            taxi: TaxiId(0),
            from_customer: CustomerId(0),
            to_customer: CustomerId(1),
            amount,
        }
    }

    #[test]
    fn revenue_examples() {
        let trip = Trip::new(2.0, 5.0);
        let r = scheme().revenue(&trip, None).unwrap();
        assert!((r - 6.25).abs() < 1e-12);

        let r = scheme().revenue(&Trip::default(), None).unwrap();
        assert!((r - 2.4).abs() < 1e-12);

        let s = scheme().with_mode(PricingMode::CustomerPaysPickup);
        assert!((s.revenue(&trip, None).unwrap() - 6.65).abs() < 1e-12);

        let s = scheme().with_mode(PricingMode::FixedPrice);
        assert!((s.revenue(&trip, Some(10.0)).unwrap() - 8.6).abs() < 1e-12);
        assert_eq!(s.revenue(&trip, None), Err(EconomicsError::MissingPrice));
    }

    #[test]
    fn compensation_examples() {
        let s = scheme();
        let k = Trip::new(2.0, 5.0);
        assert_eq!(s.compensation(&k, &k, None, None).unwrap(), 0.0);

        let i = Trip::new(1.0, 5.0);
        let c = s.compensation(&k, &i, None, None).unwrap();
        assert!((c + 0.20).abs() < 1e-9);

        let i = Trip::new(1.0, 8.0);
        let c = s.compensation(&k, &i, None, None).unwrap();
        assert!((c + 1.05).abs() < 1e-9);
        let r_i = s.revenue(&i, None).unwrap();
        let r_k = s.revenue(&k, None).unwrap();
        assert!((r_i + c - 7.95).abs() < 1e-9);
        assert!((r_i + c - (r_k + 2.0 * 0.85)).abs() < 1e-9);
    }

    #[test]
    fn mixed_schemes_share_the_rule() {
        let fixed = scheme().with_mode(PricingMode::FixedPrice);
        let metered = scheme();
        let k = Trip::new(2.0, 5.0);
        let i = Trip::new(1.0, 3.0);
        let r_k = fixed.revenue(&k, Some(9.0)).unwrap();
        let r_i = metered.revenue(&i, None).unwrap();
        let c = metered.settle_difference(r_k, r_i, k.total(), i.total());
        assert!((r_i + c - r_k).abs() < 1e-12);
    }

    #[test]
    fn pricing_validation() {
        assert!(scheme().validate().is_ok());
        let bad = PricingScheme { fare: 0.1, ..scheme() };
        assert!(bad.validate().is_err());
        let bad = PricingScheme { fcost: -1.0, ..scheme() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn settle_round_examples() {
        let mut ledger = MediatorLedger::new(LedgerMode::BudgetGated);
        let (adopt, _) = ledger.settle_round(1, &[comp(-0.5), comp(-0.3)]);
        assert!(adopt);
        assert!((ledger.balance() - 0.8).abs() < 1e-12);
        assert_eq!(ledger.history().len(), 2);

        let mut ledger = MediatorLedger::new(LedgerMode::BudgetGated);
        let (adopt, settled) = ledger.settle_round(1, &[comp(0.5)]);
        assert!(!adopt);
        assert!(settled.is_empty());
        assert_eq!(ledger, MediatorLedger {
            rounds_rejected: 1,
            ..MediatorLedger::new(LedgerMode::BudgetGated)
        });
        assert_eq!(ledger.balance(), 0.0);

        let mut ledger = MediatorLedger::new(LedgerMode::Subsidized { initial: 1.0 });
        let (adopt, _) = ledger.settle_round(1, &[comp(0.5)]);
        assert!(adopt);
        assert!((ledger.balance() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forced_mode_moves_no_money() {
        let mut ledger = MediatorLedger::new(LedgerMode::ForcedNoCompensation);
        let (adopt, settled) = ledger.settle_round(7, &[comp(3.0), comp(-1.0)]);
        assert!(adopt);
        assert_eq!(ledger.balance(), 0.0);
        assert!(settled.iter().all(|c| c.amount == 0.0));
        assert_eq!(ledger.history()[0].round, 7);
    }

    #[test]
    fn revenue_is_payment_minus_running_cost() {
        let trip = Trip::new(2.0, 5.0);
        for mode in [PricingMode::DriverPaysPickup, PricingMode::CustomerPaysPickup, PricingMode::FixedPrice] {
            let s = scheme().with_mode(mode);
            let price = Some(10.0);
            let r = s.revenue(&trip, price).unwrap();
            let p = s.payment(&trip, price).unwrap();
            assert!((p - s.cost * trip.total() - r).abs() < 1e-12, "{mode}");
        }
    }
}
