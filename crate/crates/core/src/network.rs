//! Directed road network with BPR link performance, route sets and flow loading.
//!
//! Link identifiers are 1-based and dense (`1..=n`), matching the way
//! benchmark networks number their links. Node identifiers are arbitrary
//! unsigned integers.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type NodeId = u32;
/// 1-based link identifier.
pub type LinkId = usize;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_BETA: f64 = 4.0;

/// A directed link with BPR volume-delay parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Link<T> {
    pub id: LinkId,
    pub tail: NodeId,
    pub head: NodeId,
    /// Free-flow travel time.
    pub fftt: T,
    pub capacity: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> Link<T> {
    /// Creates a link with the default BPR coefficients (0.15, 4).
    pub fn new(id: LinkId, tail: NodeId, head: NodeId, fftt: T, capacity: T) -> Result<Self> {
        Self::with_bpr(
            id,
            tail,
            head,
            fftt,
            capacity,
            T::lit(DEFAULT_ALPHA),
            T::lit(DEFAULT_BETA),
        )
    }

    pub fn with_bpr(
        id: LinkId,
        tail: NodeId,
        head: NodeId,
        fftt: T,
        capacity: T,
        alpha: T,
        beta: T,
    ) -> Result<Self> {
        let link = Link {
            id,
            tail,
            head,
            fftt,
            capacity,
            alpha,
            beta,
        };
        link.validate()?;
        Ok(link)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::domain(format!("link {}: {what}", self.id)));
        if self.id == 0 {
            return bad("link ids are 1-based");
        }
        if self.tail == self.head {
            return bad("self-loops are not allowed");
        }
        if !(self.fftt > T::zero()) || !self.fftt.is_finite() {
            return bad("free-flow time must be positive and finite");
        }
        if !(self.capacity > T::zero()) || !self.capacity.is_finite() {
            return bad("capacity must be positive and finite");
        }
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return bad("alpha must be non-negative");
        }
        if !(self.beta >= T::one()) || !self.beta.is_finite() {
            return bad("beta must be at least 1");
        }
        Ok(())
    }

    fn check_flow(&self, v: T) -> Result<()> {
        if v < T::zero() || v.is_nan() {
            return Err(Error::domain(format!(
                "link {}: negative flow {}",
                self.id, v
            )));
        }
        Ok(())
    }

    /// BPR travel time `t0 (1 + alpha (v / cap)^beta)`.
    pub fn time(&self, v: T) -> Result<T> {
        self.check_flow(v)?;
        Ok(self.time_unchecked(v))
    }

    #[inline]
    pub(crate) fn time_unchecked(&self, v: T) -> T {
        self.fftt * (T::one() + self.alpha * (v / self.capacity).powf(self.beta))
    }

    /// Closed-form BPR antiderivative `t0 v (1 + alpha/(beta+1) (v/cap)^beta)`.
    pub fn integral(&self, v: T) -> Result<T> {
        self.check_flow(v)?;
        Ok(self.integral_unchecked(v))
    }

    #[inline]
    pub(crate) fn integral_unchecked(&self, v: T) -> T {
        let ratio = (v / self.capacity).powf(self.beta);
        self.fftt * v * (T::one() + self.alpha / (self.beta + T::one()) * ratio)
    }

    /// `dt/dv` at `v` (non-negative).
    pub fn time_derivative(&self, v: T) -> T {
        let v = v.max(T::zero());
        if self.alpha == T::zero() {
            return T::zero();
        }
        let x = v / self.capacity;
        self.fftt * self.alpha * self.beta * x.powf(self.beta - T::one()) / self.capacity
    }
}

/// Travel time on `link` carrying flow `v`.
pub fn bpr_time<T: Scalar>(link: &Link<T>, v: T) -> Result<T> {
    link.time(v)
}

/// `∫_0^v t(w) dw` for a BPR link.
pub fn beckmann_link_integral<T: Scalar>(link: &Link<T>, v: T) -> Result<T> {
    link.integral(v)
}

/// A directed graph of BPR links. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Network<T> {
    nodes: BTreeSet<NodeId>,
    links: Vec<Link<T>>,
    outgoing: BTreeMap<NodeId, Vec<LinkId>>,
}

impl<T: Scalar> Network<T> {
    /// Builds a network. Link ids must be exactly `1..=links.len()` (in any order).
    pub fn new(mut links: Vec<Link<T>>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Empty("network has no links".into()));
        }
        links.sort_by_key(|l| l.id);
        for (i, link) in links.iter().enumerate() {
            if link.id != i + 1 {
                return Err(Error::structure(format!(
                    "link ids must be unique and dense 1..={}; found {} at position {}",
                    links.len(),
                    link.id,
                    i + 1
                )));
            }
            link.validate()?;
        }
        let mut nodes = BTreeSet::new();
        let mut outgoing: BTreeMap<NodeId, Vec<LinkId>> = BTreeMap::new();
        for link in &links {
            nodes.insert(link.tail);
            nodes.insert(link.head);
            outgoing.entry(link.tail).or_default().push(link.id);
        }
        Ok(Network {
            nodes,
            links,
            outgoing,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, id: LinkId) -> Option<&Link<T>> {
        id.checked_sub(1).and_then(|i| self.links.get(i))
    }

    /// Outgoing link ids of `node`, in increasing id order.
    pub fn outgoing(&self, node: NodeId) -> &[LinkId] {
        self.outgoing.get(&node).map_or(&[], Vec::as_slice)
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// Link travel times at the given link flows.
    pub fn link_times(&self, link_flows: &[T]) -> Result<Vec<T>> {
        if link_flows.len() != self.links.len() {
            return Err(Error::structure(format!(
                "expected {} link flows, got {}",
                self.links.len(),
                link_flows.len()
            )));
        }
        self.links
            .iter()
            .zip(link_flows)
            .map(|(l, &v)| l.time(v))
            .collect()
    }

    /// Sum of Beckmann link integrals at the given link flows.
    pub fn beckmann(&self, link_flows: &[T]) -> Result<T> {
        if link_flows.len() != self.links.len() {
            return Err(Error::structure("link flow vector has the wrong length"));
        }
        self.links
            .iter()
            .zip(link_flows)
            .map(|(l, &v)| l.integral(v))
            .sum()
    }
}

/// Origin-destination pair with fixed demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdPair<T> {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand: T,
}

impl<T: Scalar> OdPair<T> {
    pub fn new(origin: NodeId, destination: NodeId, demand: T) -> Result<Self> {
        if origin == destination {
            return Err(Error::domain(format!(
                "OD pair ({origin}, {destination}): origin equals destination"
            )));
        }
        if !(demand >= T::zero()) || !demand.is_finite() {
            return Err(Error::domain(format!(
                "OD pair ({origin}, {destination}): demand must be non-negative, got {demand}"
            )));
        }
        Ok(OdPair {
            origin,
            destination,
            demand,
        })
    }
}

/// A simple path, stored as link ids in travel order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Route {
    link_ids: Vec<LinkId>,
}

impl Route {
    /// Builds a route from `origin` to `destination` out of `link_ids`.
    ///
    /// The ids may be given in any order (route tables often list them
    /// sorted); they are re-threaded into travel order. Fails unless the links
    /// form exactly one simple path between the endpoints.
    pub fn new<T: Scalar>(
        network: &Network<T>,
        origin: NodeId,
        destination: NodeId,
        link_ids: &[LinkId],
    ) -> Result<Self> {
        if link_ids.is_empty() {
            return Err(Error::structure("route has no links"));
        }
        let mut by_tail: BTreeMap<NodeId, LinkId> = BTreeMap::new();
        for &id in link_ids {
            let link = network
                .link(id)
                .ok_or_else(|| Error::structure(format!("route references unknown link {id}")))?;
            if by_tail.insert(link.tail, id).is_some() {
                return Err(Error::structure(format!(
                    "route {link_ids:?} leaves node {} twice",
                    link.tail
                )));
            }
        }
        let mut ordered = Vec::with_capacity(link_ids.len());
        let mut seen = HashSet::new();
        seen.insert(origin);
        let mut node = origin;
        while node != destination {
            let Some(id) = by_tail.remove(&node) else {
                return Err(Error::structure(format!(
                    "route {link_ids:?} does not continue from node {node} towards {destination}"
                )));
            };
            let head = network.links[id - 1].head;
            if !seen.insert(head) {
                return Err(Error::structure(format!(
                    "route {link_ids:?} revisits node {head}"
                )));
            }
            ordered.push(id);
            node = head;
        }
        if !by_tail.is_empty() {
            return Err(Error::structure(format!(
                "route {link_ids:?} has links off the origin-destination path"
            )));
        }
        Ok(Route { link_ids: ordered })
    }

    pub fn link_ids(&self) -> &[LinkId] {
        &self.link_ids
    }

    pub fn len(&self) -> usize {
        self.link_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.link_ids.is_empty()
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.link_ids.contains(&link)
    }
}

/// Routes of one OD pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OdRoutes<T> {
    pub pair: OdPair<T>,
    pub routes: Vec<Route>,
}

/// Per-OD ordered route lists with a stable global route index.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteSet<T> {
    ods: Vec<OdRoutes<T>>,
    offsets: Vec<usize>,
}

impl<T: Scalar> RouteSet<T> {
    /// Validates every route against `network` and indexes them.
    pub fn new(network: &Network<T>, entries: Vec<(OdPair<T>, Vec<Vec<LinkId>>)>) -> Result<Self> {
        let mut ods = Vec::with_capacity(entries.len());
        let mut seen_pairs = HashSet::new();
        for (pair, raw_routes) in entries {
            if !seen_pairs.insert((pair.origin, pair.destination)) {
                return Err(Error::structure(format!(
                    "OD pair ({}, {}) listed twice",
                    pair.origin, pair.destination
                )));
            }
            let mut routes = Vec::with_capacity(raw_routes.len());
            let mut seen = HashSet::new();
            for ids in &raw_routes {
                let route = Route::new(network, pair.origin, pair.destination, ids)?;
                if !seen.insert(route.clone()) {
                    return Err(Error::structure(format!(
                        "duplicate route {:?} for OD ({}, {})",
                        route.link_ids, pair.origin, pair.destination
                    )));
                }
                routes.push(route);
            }
            if pair.demand > T::zero() && routes.is_empty() {
                return Err(Error::structure(format!(
                    "OD ({}, {}) has demand but no routes",
                    pair.origin, pair.destination
                )));
            }
            ods.push(OdRoutes { pair, routes });
        }
        let mut offsets = Vec::with_capacity(ods.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for od in &ods {
            total += od.routes.len();
            offsets.push(total);
        }
        Ok(RouteSet { ods, offsets })
    }

    /// Enumerates routes for each pair and builds the set.
    pub fn enumerate(
        network: &Network<T>,
        pairs: &[OdPair<T>],
        limits: EnumerationLimits,
    ) -> Result<(Self, Vec<bool>)> {
        let mut entries = Vec::with_capacity(pairs.len());
        let mut truncated = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let found = enumerate_routes(network, pair.origin, pair.destination, limits)?;
            truncated.push(found.truncated);
            entries.push((*pair, found.routes));
        }
        Ok((RouteSet::new(network, entries)?, truncated))
    }

    pub fn ods(&self) -> &[OdRoutes<T>] {
        &self.ods
    }

    pub fn od_count(&self) -> usize {
        self.ods.len()
    }

    /// Total number of routes over all OD pairs.
    pub fn route_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Global index range of the routes belonging to OD `od`.
    pub fn range(&self, od: usize) -> Range<usize> {
        self.offsets[od]..self.offsets[od + 1]
    }

    pub fn demands(&self) -> Vec<T> {
        self.ods.iter().map(|o| o.pair.demand).collect()
    }

    /// `(od index, route)` in global order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Route)> + '_ {
        self.ods
            .iter()
            .enumerate()
            .flat_map(|(k, od)| od.routes.iter().map(move |r| (k, r)))
    }

    pub fn route(&self, global: usize) -> &Route {
        let od = self.od_of(global);
        &self.ods[od].routes[global - self.offsets[od]]
    }

    /// OD index owning the global route index.
    pub fn od_of(&self, global: usize) -> usize {
        assert!(global < self.route_count(), "route index out of range");
        self.offsets.partition_point(|&o| o <= global) - 1
    }

    pub fn find_od(&self, origin: NodeId, destination: NodeId) -> Option<usize> {
        self.ods
            .iter()
            .position(|o| o.pair.origin == origin && o.pair.destination == destination)
    }

    /// Copy of the set with demands replaced (same routes, same order).
    pub fn with_demands(&self, demands: &[T]) -> Result<Self> {
        if demands.len() != self.ods.len() {
            return Err(Error::structure("demand vector length differs from OD count"));
        }
        let mut out = self.clone();
        for (od, &q) in out.ods.iter_mut().zip(demands) {
            od.pair = OdPair::new(od.pair.origin, od.pair.destination, q)?;
            if q > T::zero() && od.routes.is_empty() {
                return Err(Error::structure("OD with demand has no routes"));
            }
        }
        Ok(out)
    }

    /// Link flows `v_a = Σ f_r δ_ar` (0-based by link position).
    pub(crate) fn accumulate_link_flows(&self, link_count: usize, route_flows: &[T]) -> Vec<T> {
        let mut v = vec![T::zero(); link_count];
        for ((_, route), &f) in self.iter().zip(route_flows) {
            if f != T::zero() {
                for &a in &route.link_ids {
                    v[a - 1] = v[a - 1] + f;
                }
            }
        }
        v
    }

    /// Route times `g_r = Σ t_a δ_ar`.
    pub(crate) fn route_times(&self, link_times: &[T]) -> Vec<T> {
        self.iter()
            .map(|(_, route)| route.link_ids.iter().map(|&a| link_times[a - 1]).sum())
            .collect()
    }
}

/// Route flows together with the derived link flows and times.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    pub route_flows: Vec<T>,
    pub link_flows: Vec<T>,
    pub link_times: Vec<T>,
    pub route_times: Vec<T>,
}

/// Aggregates route flows onto links and evaluates link and route times.
pub fn load_flows<T: Scalar>(
    network: &Network<T>,
    route_set: &RouteSet<T>,
    route_flows: &[T],
) -> Result<FlowState<T>> {
    if route_flows.len() != route_set.route_count() {
        return Err(Error::structure(format!(
            "expected {} route flows, got {}",
            route_set.route_count(),
            route_flows.len()
        )));
    }
    if let Some((i, f)) = route_flows
        .iter()
        .enumerate()
        .find(|(_, f)| !(**f >= T::zero()) || !f.is_finite())
    {
        return Err(Error::domain(format!("route {i} has invalid flow {f}")));
    }
    let link_flows = route_set.accumulate_link_flows(network.link_count(), route_flows);
    let link_times = network.link_times(&link_flows)?;
    let route_times = route_set.route_times(&link_times);
    Ok(FlowState {
        route_flows: route_flows.to_vec(),
        link_flows,
        link_times,
        route_times,
    })
}

/// Limits for simple-path enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_routes: usize,
    /// Maximum links per route; `None` means the node count.
    pub max_links: Option<usize>,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_routes: 64,
            max_links: None,
        }
    }
}

impl EnumerationLimits {
    pub fn unlimited() -> Self {
        EnumerationLimits {
            max_routes: usize::MAX,
            max_links: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumeratedRoutes {
    /// Routes as link ids in travel order, lexicographic by link-id sequence.
    pub routes: Vec<Vec<LinkId>>,
    /// Set when `max_routes` cut the enumeration short.
    pub truncated: bool,
}

/// All simple paths from `origin` to `destination` within `limits`.
///
/// Depth-first over outgoing links in increasing id order, which yields the
/// routes lexicographically ordered by their link-id sequences.
pub fn enumerate_routes<T: Scalar>(
    network: &Network<T>,
    origin: NodeId,
    destination: NodeId,
    limits: EnumerationLimits,
) -> Result<EnumeratedRoutes> {
    if !network.contains_node(origin) || !network.contains_node(destination) {
        return Err(Error::Disconnected {
            origin,
            destination,
        });
    }
    if origin == destination {
        return Err(Error::domain("origin equals destination"));
    }
    let max_links = limits.max_links.unwrap_or(network.nodes.len());
    let mut search = Dfs {
        network,
        destination,
        max_links,
        max_routes: limits.max_routes,
        visited: HashSet::from([origin]),
        path: Vec::new(),
        found: Vec::new(),
        truncated: false,
    };
    search.visit(origin);
    if search.found.is_empty() {
        if search.truncated {
            // max_routes == 0
            return Ok(EnumeratedRoutes {
                routes: Vec::new(),
                truncated: true,
            });
        }
        return Err(Error::Disconnected {
            origin,
            destination,
        });
    }
    Ok(EnumeratedRoutes {
        routes: search.found,
        truncated: search.truncated,
    })
}

struct Dfs<'a, T> {
    network: &'a Network<T>,
    destination: NodeId,
    max_links: usize,
    max_routes: usize,
    visited: HashSet<NodeId>,
    path: Vec<LinkId>,
    found: Vec<Vec<LinkId>>,
    truncated: bool,
}

impl<T: Scalar> Dfs<'_, T> {
    fn visit(&mut self, node: NodeId) {
        if self.truncated || self.path.len() >= self.max_links {
            return;
        }
        for &id in self.network.outgoing(node) {
            let head = self.network.links[id - 1].head;
            if self.visited.contains(&head) {
                continue;
            }
            self.path.push(id);
            if head == self.destination {
                if self.found.len() == self.max_routes {
                    self.truncated = true;
                } else {
                    self.found.push(self.path.clone());
                }
            } else {
                self.visited.insert(head);
                self.visit(head);
                self.visited.remove(&head);
            }
            self.path.pop();
            if self.truncated {
                return;
            }
        }
    }
}
