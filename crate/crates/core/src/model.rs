//! Taxis, customer requests and their lifecycle states.

use std::fmt;

use crate::geometry::{Point, Trip};
use crate::taxonomy::{CharSet, Taxonomy, TaxonomyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaxiId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CustomerId(pub u32);

impl TaxiId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CustomerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TaxiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for CustomerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaxiState {
    /// Idle and parked; does not cruise.
    Available,
    /// Dispatched to a customer, not yet carrying them.
    Assigned(CustomerId),
    /// Carrying the customer to the destination.
    Busy(CustomerId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Taxi {
    pub id: TaxiId,
    pub position: Point,
    pub state: TaxiState,
    /// Declared characteristics.
    pub characteristics: CharSet,
    /// Whether the taxi takes part in reassignment rounds.
    pub participates: bool,
    /// Accumulated net income, euros (trip revenues plus compensations).
    pub income: f64,
    pub odometer_empty: f64,
    pub odometer_occupied: f64,
    /// Seconds left in the current pickup or drop-off stop, if stopped.
    pub dwell: Option<f64>,
    /// Empty kilometres driven for the current job since dispatch.
    pub job_empty_km: f64,
    /// Occupied kilometres driven for the current job.
    pub job_occupied_km: f64,
    /// Compensations settled for the current job.
    pub job_compensation: f64,
}

impl Taxi {
    pub fn new(id: TaxiId, position: Point, characteristics: CharSet, participates: bool) -> Self {
        Self {
            id,
            position,
            state: TaxiState::Available,
            characteristics,
            participates,
            income: 0.0,
            odometer_empty: 0.0,
            odometer_occupied: 0.0,
            dwell: None,
            job_empty_km: 0.0,
            job_occupied_km: 0.0,
            job_compensation: 0.0,
        }
    }

    pub fn is_available(&self) -> bool {
        self.state == TaxiState::Available
    }

    /// Dispatched, still driving toward the customer. A taxi already waiting
    /// at the pickup point is no longer reassignable.
    pub fn is_en_route(&self) -> bool {
        matches!(self.state, TaxiState::Assigned(_)) && self.dwell.is_none()
    }

    pub fn assigned_customer(&self) -> Option<CustomerId> {
        match self.state {
            TaxiState::Assigned(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CustomerState {
    Unassigned,
    Assigned(TaxiId),
    /// On board.
    Served(TaxiId),
    Completed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CustomerRequest {
    pub id: CustomerId,
    pub origin: Point,
    pub destination: Point,
    pub requirements: CharSet,
    pub created_at: f64,
    /// Most recent dispatch time.
    pub assigned_at: Option<f64>,
    /// When the taxi reached the origin (start of the boarding stop).
    pub picked_up_at: Option<f64>,
    pub dropped_off_at: Option<f64>,
    pub state: CustomerState,
    /// Closed price, only under fixed-price pricing.
    pub contracted_price: Option<f64>,
    /// How many times the customer was moved to another taxi or released.
    pub reassignments: u32,
}

impl CustomerRequest {
    pub fn new(id: CustomerId, origin: Point, destination: Point, requirements: CharSet, created_at: f64) -> Self {
        Self {
            id,
            origin,
            destination,
            requirements,
            created_at,
            assigned_at: None,
            picked_up_at: None,
            dropped_off_at: None,
            state: CustomerState::Unassigned,
            contracted_price: None,
            reassignments: 0,
        }
    }

    pub fn is_waiting(&self) -> bool {
        matches!(self.state, CustomerState::Unassigned | CustomerState::Assigned(_))
    }

    pub fn ride_km(&self) -> f64 {
        crate::geometry::distance(self.origin, self.destination)
    }
}

/// The trip a taxi at its current position would make for `request`.
pub fn trip_of(taxi: &Taxi, request: &CustomerRequest) -> Trip {
    Trip::between(taxi.position, request.origin, request.destination)
}

/// Everything a strategy may look at: the fleet, every customer seen so far,
/// and the queue of customers not yet reached by a taxi.
///
/// Taxis are indexed by [`TaxiId`] and customers by [`CustomerId`].
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub clock: f64,
    pub taxis: Vec<Taxi>,
    pub customers: Vec<CustomerRequest>,
    /// Closure of each taxi's declared characteristics.
    pub offered: Vec<CharSet>,
    /// Customers still waiting for a taxi to arrive, ascending id.
    pub open: Vec<CustomerId>,
}

impl World {
    /// Builds a world and derives the offered sets and the open queue from
    /// the entity states. Ids must equal positions.
    pub fn new(
        taxis: Vec<Taxi>,
        customers: Vec<CustomerRequest>,
        taxonomy: &Taxonomy,
    ) -> Result<Self, TaxonomyError> {
        assert!(taxis.iter().enumerate().all(|(i, t)| t.id.index() == i), "taxi ids must be dense");
        assert!(
            customers.iter().enumerate().all(|(i, c)| c.id.index() == i),
            "customer ids must be dense"
        );
        let offered = taxis
            .iter()
            .map(|t| taxonomy.closure(t.characteristics))
            .collect::<Result<_, _>>()?;
        let open = customers
            .iter()
            .filter(|c| c.is_waiting() && c.picked_up_at.is_none())
            .map(|c| c.id)
            .collect();
        Ok(Self {
            clock: 0.0,
            taxis,
            customers,
            offered,
            open,
        })
    }

    pub fn taxi(&self, id: TaxiId) -> &Taxi {
        &self.taxis[id.index()]
    }

    pub fn customer(&self, id: CustomerId) -> &CustomerRequest {
        &self.customers[id.index()]
    }

    #[inline]
    pub fn compatible(&self, taxi: TaxiId, customer: CustomerId) -> bool {
        self.customers[customer.index()]
            .requirements
            .is_subset(self.offered[taxi.index()])
    }

    /// Idle taxis, ascending id.
    pub fn available(&self) -> Vec<TaxiId> {
        self.taxis.iter().filter(|t| t.is_available()).map(|t| t.id).collect()
    }

    /// Waiting customers without a taxi, in arrival order.
    pub fn unassigned(&self) -> Vec<CustomerId> {
        self.open
            .iter()
            .copied()
            .filter(|c| self.customers[c.index()].state == CustomerState::Unassigned)
            .collect()
    }

    /// The current assignment: dispatched taxis and their customers,
    /// ascending taxi id.
    pub fn assignment(&self) -> Vec<(TaxiId, CustomerId)> {
        self.taxis
            .iter()
            .filter_map(|t| t.assigned_customer().map(|c| (t.id, c)))
            .collect()
    }

    pub fn pickup_distance(&self, taxi: TaxiId, customer: CustomerId) -> f64 {
        crate::geometry::distance(self.taxis[taxi.index()].position, self.customers[customer.index()].origin)
    }
}
