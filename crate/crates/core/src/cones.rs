//! Positive cones restricted to a ball.
//!
//! A [`PartialCone`] assigns a sign to every non-identity element of `B_r`.
//! It is admissible when it satisfies, inside the ball, the three cone
//! axioms: (a) positives are closed under products that stay in the ball,
//! (b) an element and its inverse never share a sign, (c) every element is
//! signed. Comparisons use `h < g  <=>  h^-1 g` positive (left order) and
//! `h ≺ g  <=>  g h^-1` positive (right order); a comparison whose quotient
//! leaves the ball is undecided and reported as `None`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::groups::{GroupCtx, GroupElement, GroupError};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("sign vector has {found} entries but the radius-{radius} ball has {expected} non-identity elements")]
    RadiusMismatch {
        radius: u32,
        expected: usize,
        found: usize,
    },
    #[error("element `{0}` is not in the ball")]
    NotInBall(String),
    #[error("cannot restrict a radius-{from} cone to radius {to}")]
    RestrictionRadius { from: u32, to: u32 },
    #[error("chain must be non-empty with pairwise distinct elements")]
    DegenerateChain,
    #[error("bad sign `{0}`, expected `+` or `-`")]
    BadSign(String),
    #[error("malformed cone document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sign {
    type Err = ConeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" => Ok(Sign::Positive),
            "-" => Ok(Sign::Negative),
            other => Err(ConeError::BadSign(other.to_string())),
        }
    }
}

pub(crate) const NO_PRODUCT: u32 = u32::MAX;

/// The non-identity elements of `B_r` with inverse and product lookups.
#[derive(Debug)]
pub struct Ball {
    ctx: GroupCtx,
    radius: u32,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
    inverse: Vec<usize>,
    products: OnceLock<Vec<u32>>,
}

impl Ball {
    pub fn new(ctx: &GroupCtx, radius: u32) -> Arc<Ball> {
        let elements: Vec<GroupElement> = ctx
            .ball(radius)
            .into_iter()
            .filter(|g| !g.is_identity())
            .collect();
        let index: HashMap<GroupElement, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        let inverse = elements
            .iter()
            .map(|g| index[&ctx.inv_unchecked(g)])
            .collect();
        Arc::new(Ball {
            ctx: ctx.clone(),
            radius,
            elements,
            index,
            inverse,
            products: OnceLock::new(),
        })
    }

    pub fn ctx(&self) -> &GroupCtx {
        &self.ctx
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Non-identity elements in canonical order.
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        self.index.get(g).copied()
    }

    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse[i]
    }

    /// Row-major table of `elements[i] * elements[j]`; [`NO_PRODUCT`] marks
    /// products that are the identity or leave the ball.
    pub(crate) fn products(&self) -> &[u32] {
        self.products.get_or_init(|| {
            let n = self.elements.len();
            let mut table = vec![NO_PRODUCT; n * n];
            for (i, g) in self.elements.iter().enumerate() {
                for (j, h) in self.elements.iter().enumerate() {
                    let gh = self.ctx.mul_unchecked(g, h);
                    if let Some(&k) = self.index.get(&gh) {
                        table[i * n + j] = k as u32;
                    }
                }
            }
            table
        })
    }

    pub fn product_index(&self, i: usize, j: usize) -> Option<usize> {
        let p = self.products()[i * self.len() + j];
        (p != NO_PRODUCT).then_some(p as usize)
    }

    /// Position of each element of `self` inside the larger ball `outer`.
    pub fn embedding_into(&self, outer: &Ball) -> Option<Vec<usize>> {
        self.elements.iter().map(|g| outer.index_of(g)).collect()
    }
}

impl PartialEq for Ball {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.radius == other.radius
    }
}

impl Eq for Ball {}

/// Which cone axiom an assignment breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    /// (a): `g`, `h` positive but `gh` in the ball is not.
    Closure {
        g: GroupElement,
        h: GroupElement,
        product: GroupElement,
    },
    /// (b): `g` and `g^-1` carry the same sign.
    Antisymmetry { g: GroupElement },
    /// (c): `g` has no sign.
    Totality { g: GroupElement },
}

impl Violation {
    pub fn axiom(&self) -> char {
        match self {
            Violation::Closure { .. } => 'a',
            Violation::Antisymmetry { .. } => 'b',
            Violation::Totality { .. } => 'c',
        }
    }
}

/// Checks the cone axioms on an arbitrary finite inverse-closed set using
/// only the group operations (no precomputed tables).
///
/// `signs` is aligned with `elements`; the identity must not appear.
pub fn verify_exhaustively(
    ctx: &GroupCtx,
    elements: &[GroupElement],
    signs: &[Option<Sign>],
) -> Vec<Violation> {
    let lookup: BTreeMap<&GroupElement, Option<Sign>> =
        elements.iter().zip(signs.iter().copied()).collect();
    let mut out = Vec::new();
    for (g, s) in elements.iter().zip(signs) {
        let Some(s) = s else {
            out.push(Violation::Totality { g: g.clone() });
            continue;
        };
        let inv = ctx.inv_unchecked(g);
        if lookup.get(&inv).copied().flatten() == Some(*s) {
            out.push(Violation::Antisymmetry { g: g.clone() });
        }
    }
    for (g, sg) in elements.iter().zip(signs) {
        if *sg != Some(Sign::Positive) {
            continue;
        }
        for (h, sh) in elements.iter().zip(signs) {
            if *sh != Some(Sign::Positive) {
                continue;
            }
            let gh = ctx.mul_unchecked(g, h);
            if gh.is_identity() {
                continue;
            }
            if let Some(sgh) = lookup.get(&gh) {
                if *sgh != Some(Sign::Positive) {
                    out.push(Violation::Closure {
                        g: g.clone(),
                        h: h.clone(),
                        product: gh,
                    });
                }
            }
        }
    }
    out
}

/// A total sign assignment on `B_r \ {1}`.
#[derive(Clone)]
pub struct PartialCone {
    ball: Arc<Ball>,
    signs: Vec<Sign>,
}

impl fmt::Debug for PartialCone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialCone")
            .field("group", &self.ball.ctx.to_string())
            .field("radius", &self.ball.radius)
            .field("signs", &self.signs_string())
            .finish()
    }
}

impl PartialEq for PartialCone {
    fn eq(&self, other: &Self) -> bool {
        self.ball.ctx == other.ball.ctx
            && self.ball.radius == other.ball.radius
            && self.signs == other.signs
    }
}

impl Eq for PartialCone {}

impl PartialOrd for PartialCone {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: radius, then the sign vector lexicographically
/// (`+` before `-`) in canonical ball order.
impl Ord for PartialCone {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ball
            .radius
            .cmp(&other.ball.radius)
            .then_with(|| self.signs.cmp(&other.signs))
    }
}

impl PartialCone {
    pub fn new(ball: Arc<Ball>, signs: Vec<Sign>) -> Result<Self, ConeError> {
        if signs.len() != ball.len() {
            return Err(ConeError::RadiusMismatch {
                radius: ball.radius,
                expected: ball.len(),
                found: signs.len(),
            });
        }
        Ok(PartialCone { ball, signs })
    }

    /// Builds a cone by evaluating `f` on every non-identity ball element.
    pub fn from_fn(ball: Arc<Ball>, mut f: impl FnMut(&GroupElement) -> Sign) -> Self {
        let signs = ball.elements.iter().map(&mut f).collect();
        PartialCone { ball, signs }
    }

    /// Builds a cone from an element-to-sign map that must cover the ball exactly.
    pub fn from_map(ball: Arc<Ball>, map: &BTreeMap<GroupElement, Sign>) -> Result<Self, ConeError> {
        if map.len() != ball.len() {
            return Err(ConeError::RadiusMismatch {
                radius: ball.radius,
                expected: ball.len(),
                found: map.len(),
            });
        }
        let mut signs = Vec::with_capacity(ball.len());
        for g in &ball.elements {
            match map.get(g) {
                Some(s) => signs.push(*s),
                None => return Err(ConeError::NotInBall(ball.ctx.format_element(g))),
            }
        }
        Ok(PartialCone { ball, signs })
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    pub fn ctx(&self) -> &GroupCtx {
        &self.ball.ctx
    }

    pub fn radius(&self) -> u32 {
        self.ball.radius
    }

    /// Signs aligned with [`Ball::elements`].
    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn signs_string(&self) -> String {
        self.signs.iter().map(|s| s.as_str()).collect()
    }

    /// Sign of a non-identity element, or `None` outside the ball.
    pub fn sign_of(&self, g: &GroupElement) -> Option<Sign> {
        self.ball.index_of(g).map(|i| self.signs[i])
    }

    pub fn is_positive(&self, g: &GroupElement) -> Option<bool> {
        self.sign_of(g).map(|s| s == Sign::Positive)
    }

    /// The cone of the reversed order.
    pub fn flipped(&self) -> PartialCone {
        PartialCone {
            ball: self.ball.clone(),
            signs: self.signs.iter().map(|s| s.flip()).collect(),
        }
    }

    /// Lists every axiom violation, using the ball's product table.
    pub fn check_axioms(&self) -> Vec<Violation> {
        let ball = &*self.ball;
        let n = ball.len();
        let products = ball.products();
        let mut out = Vec::new();
        for i in 0..n {
            if self.signs[ball.inverse[i]] == self.signs[i] {
                out.push(Violation::Antisymmetry {
                    g: ball.elements[i].clone(),
                });
            }
        }
        for i in (0..n).filter(|&i| self.signs[i] == Sign::Positive) {
            for j in (0..n).filter(|&j| self.signs[j] == Sign::Positive) {
                let k = products[i * n + j];
                if k != NO_PRODUCT && self.signs[k as usize] != Sign::Positive {
                    out.push(Violation::Closure {
                        g: ball.elements[i].clone(),
                        h: ball.elements[j].clone(),
                        product: ball.elements[k as usize].clone(),
                    });
                }
            }
        }
        out
    }

    pub fn is_admissible(&self) -> bool {
        self.check_axioms().is_empty()
    }

    fn quotient_sign(&self, q: GroupElement) -> Option<bool> {
        if q.is_identity() {
            return Some(false);
        }
        self.is_positive(&q)
    }

    /// `h < g`, i.e. `h^-1 g` is positive. `None` when the quotient is
    /// outside the ball.
    pub fn less_than(&self, h: &GroupElement, g: &GroupElement) -> Result<Option<bool>, ConeError> {
        let ctx = self.ctx();
        let q = ctx.multiply(&ctx.invert(h)?, g)?;
        Ok(self.quotient_sign(q))
    }

    /// `h ≺ g` for the right order, i.e. `g h^-1` is positive.
    pub fn right_less_than(
        &self,
        h: &GroupElement,
        g: &GroupElement,
    ) -> Result<Option<bool>, ConeError> {
        let ctx = self.ctx();
        let q = ctx.multiply(g, &ctx.invert(h)?)?;
        Ok(self.quotient_sign(q))
    }

    /// Whether `g_1 < g_2 < ... < g_n`; `None` when some consecutive quotient
    /// is outside the ball.
    pub fn satisfies_chain(&self, chain: &ChainCondition) -> Result<Option<bool>, ConeError> {
        let mut all = true;
        for w in chain.elements.windows(2) {
            match self.less_than(&w[0], &w[1])? {
                None => return Ok(None),
                Some(false) => all = false,
                Some(true) => {}
            }
        }
        Ok(Some(all))
    }

    /// Membership in `V_{g_1,...,g_n}`: every listed element is positive.
    pub fn in_basic_open(&self, elements: &[GroupElement]) -> Result<Option<bool>, ConeError> {
        let one = self.ctx().identity();
        let mut all = true;
        for g in elements {
            let chain = ChainCondition::new(vec![one.clone(), g.clone()])?;
            match self.satisfies_chain(&chain)? {
                None => return Ok(None),
                Some(v) => all &= v,
            }
        }
        Ok(Some(all))
    }

    /// Restriction to a smaller (or equal) ball of the same group.
    pub fn restrict_to(&self, ball: &Arc<Ball>) -> Result<PartialCone, ConeError> {
        if ball.ctx != self.ball.ctx || ball.radius > self.ball.radius {
            return Err(ConeError::RestrictionRadius {
                from: self.ball.radius,
                to: ball.radius,
            });
        }
        let signs = ball
            .elements
            .iter()
            .map(|g| self.signs[self.ball.index[g]])
            .collect();
        Ok(PartialCone {
            ball: ball.clone(),
            signs,
        })
    }

    pub fn restrict(&self, radius: u32) -> Result<PartialCone, ConeError> {
        if radius == self.ball.radius {
            return Ok(self.clone());
        }
        self.restrict_to(&Ball::new(self.ctx(), radius))
    }

    pub fn to_assignment(&self) -> PartialAssignment {
        PartialAssignment {
            ball: self.ball.clone(),
            signs: self.signs.iter().map(|&s| Some(s)).collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("cone serializes")
    }

    /// Parses the JSON document produced by serializing a cone.
    pub fn from_json(value: &serde_json::Value) -> Result<PartialCone, ConeError> {
        let doc: ConeDocument = serde_json::from_value(value.clone())
            .map_err(|e| ConeError::Malformed(e.to_string()))?;
        let ctx: GroupCtx = doc.group.parse()?;
        let ball = Ball::new(&ctx, doc.radius);
        let mut map = BTreeMap::new();
        for (k, v) in &doc.signs {
            let g = ctx.parse_element(k)?;
            if ball.index_of(&g).is_none() {
                return Err(ConeError::NotInBall(k.clone()));
            }
            map.insert(g, v.parse()?);
        }
        PartialCone::from_map(ball, &map)
    }
}

#[derive(Deserialize)]
struct ConeDocument {
    #[allow(dead_code)]
    schema_version: u32,
    group: String,
    radius: u32,
    signs: BTreeMap<String, String>,
}

/// Signs keyed by canonical element strings, in canonical ball order.
pub(crate) struct SignMap<'a>(pub &'a PartialCone);

impl Serialize for SignMap<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let cone = self.0;
        let mut map = serializer.serialize_map(Some(cone.signs.len()))?;
        for (g, s) in cone.ball.elements.iter().zip(&cone.signs) {
            map.serialize_entry(&cone.ctx().format_element(g), s.as_str())?;
        }
        map.end()
    }
}

impl Serialize for PartialCone {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("schema_version", &SCHEMA_VERSION)?;
        map.serialize_entry("group", &self.ctx().to_string())?;
        map.serialize_entry("radius", &self.radius())?;
        map.serialize_entry("signs", &SignMap(self))?;
        map.end()
    }
}

/// A chain `g_1 < ... < g_n` of pairwise distinct elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainCondition {
    elements: Vec<GroupElement>,
}

impl ChainCondition {
    pub fn new(elements: Vec<GroupElement>) -> Result<Self, ConeError> {
        if elements.is_empty() {
            return Err(ConeError::DegenerateChain);
        }
        for (i, a) in elements.iter().enumerate() {
            if elements[i + 1..].contains(a) {
                return Err(ConeError::DegenerateChain);
            }
        }
        Ok(ChainCondition { elements })
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }
}

/// Signs on a subset of `B_r \ {1}`; `None` means undetermined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    ball: Arc<Ball>,
    signs: Vec<Option<Sign>>,
}

impl PartialAssignment {
    pub fn empty(ball: Arc<Ball>) -> Self {
        let signs = vec![None; ball.len()];
        PartialAssignment { ball, signs }
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    pub fn signs(&self) -> &[Option<Sign>] {
        &self.signs
    }

    pub fn get(&self, g: &GroupElement) -> Option<Sign> {
        self.ball.index_of(g).and_then(|i| self.signs[i])
    }

    pub fn set(&mut self, g: &GroupElement, sign: Sign) -> Result<(), ConeError> {
        let i = self
            .ball
            .index_of(g)
            .ok_or_else(|| ConeError::NotInBall(self.ball.ctx.format_element(g)))?;
        self.signs[i] = Some(sign);
        Ok(())
    }

    pub fn assigned(&self) -> usize {
        self.signs.iter().filter(|s| s.is_some()).count()
    }

    /// `true` when `other` agrees with every sign fixed here.
    pub fn is_extended_by(&self, other: &PartialAssignment) -> bool {
        self.signs
            .iter()
            .zip(&other.signs)
            .all(|(a, b)| a.is_none() || a == b)
    }

    /// Converts to a cone when every element is signed.
    pub fn to_cone(&self) -> Option<PartialCone> {
        let signs: Option<Vec<Sign>> = self.signs.iter().copied().collect();
        signs.map(|signs| PartialCone {
            ball: self.ball.clone(),
            signs,
        })
    }
}

/// Why a deduction failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// A supplied sign contradicts what earlier signs already force.
    Given,
    /// `g` forces the opposite sign on `g^-1`.
    Inverse { of: GroupElement },
    /// Two same-signed elements force their product.
    Product { left: GroupElement, right: GroupElement },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clash {
    pub element: GroupElement,
    pub existing: Sign,
    pub forced: Sign,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagation {
    Extended(PartialAssignment),
    Refuted(Clash),
}

/// Runs the deduction rules to a fixed point:
/// `sign(g)` forces `-sign(g)` on `g^-1`, and two elements of equal sign
/// force that sign on their product when it is in the ball.
pub fn propagate(partial: &PartialAssignment) -> Propagation {
    let ball = &partial.ball;
    let mut prop = Propagator::new(ball);
    for (i, s) in partial.signs.iter().enumerate() {
        if let Some(s) = *s {
            if let Err(clash) = prop.assign(i, s) {
                return Propagation::Refuted(clash.describe(ball));
            }
        }
    }
    Propagation::Extended(PartialAssignment {
        ball: ball.clone(),
        signs: prop.signs,
    })
}

/// Index-level clash, converted to a [`Clash`] on demand.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawClash {
    element: usize,
    existing: Sign,
    cause: Cause,
}

#[derive(Debug, Clone, Copy)]
enum Cause {
    Given,
    Inverse(usize),
    Product(usize, usize),
}

impl RawClash {
    pub(crate) fn describe(self, ball: &Ball) -> Clash {
        let el = |i: usize| ball.elements[i].clone();
        let rule = match self.cause {
            Cause::Given => Rule::Given,
            Cause::Inverse(g) => Rule::Inverse { of: el(g) },
            Cause::Product(l, r) => Rule::Product {
                left: el(l),
                right: el(r),
            },
        };
        Clash {
            element: el(self.element),
            existing: self.existing,
            forced: self.existing.flip(),
            rule,
        }
    }
}

/// Incremental propagation with an undo trail, used by the backtracking
/// search.
pub(crate) struct Propagator<'a> {
    n: usize,
    inverse: &'a [usize],
    products: &'a [u32],
    pub(crate) signs: Vec<Option<Sign>>,
    trail: Vec<usize>,
    by_sign: [Vec<usize>; 2],
    queue: Vec<usize>,
}

fn slot(s: Sign) -> usize {
    match s {
        Sign::Positive => 0,
        Sign::Negative => 1,
    }
}

impl<'a> Propagator<'a> {
    pub(crate) fn new(ball: &'a Ball) -> Self {
        let n = ball.len();
        Propagator {
            n,
            inverse: &ball.inverse,
            products: ball.products(),
            signs: vec![None; n],
            trail: Vec::with_capacity(n),
            by_sign: [Vec::with_capacity(n), Vec::with_capacity(n)],
            queue: Vec::new(),
        }
    }

    pub(crate) fn mark(&self) -> usize {
        self.trail.len()
    }

    pub(crate) fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let i = self.trail.pop().expect("trail non-empty");
            let s = self.signs[i].take().expect("trailed element is signed");
            let popped = self.by_sign[slot(s)].pop();
            debug_assert_eq!(popped, Some(i));
        }
        self.queue.clear();
    }

    fn set(&mut self, i: usize, s: Sign, cause: Cause) -> Result<(), RawClash> {
        match self.signs[i] {
            Some(existing) if existing == s => Ok(()),
            Some(existing) => Err(RawClash {
                element: i,
                existing,
                cause,
            }),
            None => {
                self.signs[i] = Some(s);
                self.trail.push(i);
                self.by_sign[slot(s)].push(i);
                self.queue.push(i);
                Ok(())
            }
        }
    }

    /// Assigns `s` to element `i` and propagates. On a clash the partial
    /// deductions stay on the trail; callers undo to their mark.
    pub(crate) fn assign(&mut self, i: usize, s: Sign) -> Result<(), RawClash> {
        if let Some(existing) = self.signs[i] {
            if existing != s {
                return Err(RawClash {
                    element: i,
                    existing,
                    cause: Cause::Given,
                });
            }
            return Ok(());
        }
        self.signs[i] = Some(s);
        self.trail.push(i);
        self.by_sign[slot(s)].push(i);
        self.queue.clear();
        self.queue.push(i);
        let mut head = 0;
        while head < self.queue.len() {
            let g = self.queue[head];
            head += 1;
            let sg = self.signs[g].expect("queued element is signed");
            let inv = self.inverse[g];
            if let Err(c) = self.set(inv, sg.flip(), Cause::Inverse(g)) {
                self.queue.clear();
                return Err(c);
            }
            let mut k = 0;
            while k < self.by_sign[slot(sg)].len() {
                let h = self.by_sign[slot(sg)][k];
                k += 1;
                for (l, r) in [(g, h), (h, g)] {
                    let p = self.products[l * self.n + r];
                    if p != NO_PRODUCT {
                        if let Err(c) = self.set(p as usize, sg, Cause::Product(l, r)) {
                            self.queue.clear();
                            return Err(c);
                        }
                    }
                }
            }
        }
        self.queue.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::parse_group_spec;

    fn setup(spec: &str, r: u32) -> (GroupCtx, Arc<Ball>) {
        let ctx = parse_group_spec(spec).unwrap();
        let ball = Ball::new(&ctx, r);
        (ctx, ball)
    }

    fn el(ctx: &GroupCtx, s: &str) -> GroupElement {
        ctx.parse_element(s).unwrap()
    }

    fn z_standard(ball: &Arc<Ball>) -> PartialCone {
        PartialCone::from_fn(ball.clone(), |g| {
            if g.coords()[0] > 0 {
                Sign::Positive
            } else {
                Sign::Negative
            }
        })
    }

    fn z2_cone(ball: &Arc<Ball>, w: (i64, i64)) -> PartialCone {
        // sign of a generic linear functional
        PartialCone::from_fn(ball.clone(), |g| {
            let v = g.coords()[0] * w.0 + g.coords()[1] * w.1;
            assert_ne!(v, 0);
            if v > 0 {
                Sign::Positive
            } else {
                Sign::Negative
            }
        })
    }

    #[test]
    fn standard_order_on_z_is_admissible() {
        let (_, ball) = setup("Z", 2);
        let cone = z_standard(&ball);
        assert!(cone.check_axioms().is_empty());
    }

    #[test]
    fn antisymmetry_violation_is_witnessed() {
        let (ctx, ball) = setup("Z", 2);
        let cone = PartialCone::from_fn(ball, |g| {
            if g.coords()[0].abs() == 1 || g.coords()[0] == 2 {
                Sign::Positive
            } else {
                Sign::Negative
            }
        });
        let v = cone.check_axioms();
        assert!(v.contains(&Violation::Antisymmetry { g: el(&ctx, "a") }));
        assert!(v.iter().any(|x| x.axiom() == 'b'));
    }

    #[test]
    fn order_two_elements_cannot_be_signed() {
        let (ctx, ball) = setup("C2", 1);
        for s in [Sign::Positive, Sign::Negative] {
            let cone = PartialCone::new(ball.clone(), vec![s]).unwrap();
            assert_eq!(
                cone.check_axioms(),
                vec![Violation::Antisymmetry { g: el(&ctx, "a") }]
            );
        }
    }

    #[test]
    fn radius_mismatch_is_an_error() {
        let (_, ball) = setup("Z", 2);
        assert!(matches!(
            PartialCone::new(ball, vec![Sign::Positive; 3]),
            Err(ConeError::RadiusMismatch { expected: 4, found: 3, .. })
        ));
    }

    #[test]
    fn comparisons() {
        let (ctx, ball) = setup("Z", 2);
        let cone = z_standard(&ball);
        assert_eq!(cone.less_than(&el(&ctx, "a"), &el(&ctx, "a^3")).unwrap(), Some(true));
        assert_eq!(cone.less_than(&el(&ctx, "a^-2"), &el(&ctx, "a^2")).unwrap(), None);
        assert_eq!(cone.less_than(&el(&ctx, "a"), &el(&ctx, "a")).unwrap(), Some(false));

        let (ctx2, ball2) = setup("Z^2", 2);
        let cone2 = PartialCone::from_fn(ball2, |g| {
            let c = g.coords();
            if c[0] > 0 || (c[0] == 0 && c[1] < 0) {
                Sign::Positive
            } else {
                Sign::Negative
            }
        });
        assert!(cone2.is_admissible());
        assert_eq!(cone2.less_than(&el(&ctx2, "e2"), &ctx2.identity()).unwrap(), Some(true));
        assert_eq!(cone2.in_basic_open(&[el(&ctx2, "e1")]).unwrap(), Some(true));
        assert_eq!(cone2.in_basic_open(&[el(&ctx2, "e2")]).unwrap(), Some(false));
    }

    #[test]
    fn right_order_unfolds_definition() {
        let (ctx, ball) = setup("F2", 2);
        let a = el(&ctx, "a");
        let b = el(&ctx, "b");
        let ab = el(&ctx, "a*b");
        // any admissible radius-2 cone: take one from the search
        let cone = crate::orderspace::enumerate_level(&ctx, 2, &Default::default())
            .unwrap()
            .remove(0);
        assert_eq!(cone.ball().radius(), ball.radius());
        assert_eq!(cone.right_less_than(&b, &ab).unwrap(), cone.is_positive(&a));
        let (_, zb) = setup("Z", 3);
        let z = z_standard(&zb);
        for h in zb.elements() {
            for g in zb.elements() {
                assert_eq!(z.less_than(h, g).unwrap(), z.right_less_than(h, g).unwrap());
            }
        }
    }

    #[test]
    fn chains() {
        let (ctx, ball) = setup("Z", 2);
        let cone = z_standard(&ball);
        let chain = ChainCondition::new(vec![el(&ctx, "a^-1"), ctx.identity(), el(&ctx, "a")]).unwrap();
        assert_eq!(cone.satisfies_chain(&chain).unwrap(), Some(true));
        assert_eq!(
            ChainCondition::new(vec![el(&ctx, "a"), el(&ctx, "a")]),
            Err(ConeError::DegenerateChain)
        );
        let far = ChainCondition::new(vec![el(&ctx, "a^-2"), el(&ctx, "a^2")]).unwrap();
        assert_eq!(cone.satisfies_chain(&far).unwrap(), None);
    }

    #[test]
    fn propagation_completes_z() {
        let (ctx, ball) = setup("Z", 3);
        let mut p = PartialAssignment::empty(ball.clone());
        p.set(&el(&ctx, "a"), Sign::Positive).unwrap();
        let Propagation::Extended(out) = propagate(&p) else {
            panic!("refuted")
        };
        assert_eq!(out.to_cone().unwrap(), z_standard(&ball));
    }

    #[test]
    fn propagation_on_z2_leaves_diagonal_open() {
        let (ctx, ball) = setup("Z^2", 2);
        let mut p = PartialAssignment::empty(ball);
        p.set(&el(&ctx, "e1"), Sign::Positive).unwrap();
        p.set(&el(&ctx, "e2"), Sign::Positive).unwrap();
        let Propagation::Extended(out) = propagate(&p) else {
            panic!("refuted")
        };
        for s in ["e1^2", "e2^2", "e1*e2"] {
            assert_eq!(out.get(&el(&ctx, s)), Some(Sign::Positive), "{s}");
            let inv = ctx.invert(&el(&ctx, s)).unwrap();
            assert_eq!(out.get(&inv), Some(Sign::Negative));
        }
        assert_eq!(out.get(&el(&ctx, "e1*e2^-1")), None);
        assert_eq!(out.get(&el(&ctx, "e1^-1*e2")), None);
        assert_eq!(out.assigned(), 10);
    }

    #[test]
    fn propagation_of_empty_is_identity() {
        let (_, ball) = setup("F2", 2);
        let p = PartialAssignment::empty(ball);
        assert_eq!(propagate(&p), Propagation::Extended(p.clone()));
    }

    #[test]
    fn propagation_refutes_c3() {
        let (ctx, ball) = setup("C3", 1);
        let mut p = PartialAssignment::empty(ball);
        p.set(&el(&ctx, "a"), Sign::Positive).unwrap();
        let Propagation::Refuted(clash) = propagate(&p) else {
            panic!("expected a clash")
        };
        assert_eq!(clash.element, el(&ctx, "a^2"));
    }

    #[test]
    fn propagation_of_full_cone_is_identity() {
        let (_, ball) = setup("Z^2", 2);
        let cone = z2_cone(&ball, (3, 1));
        assert!(cone.is_admissible());
        let p = cone.to_assignment();
        assert_eq!(propagate(&p), Propagation::Extended(p.clone()));
    }

    #[test]
    fn json_round_trip() {
        let (ctx, ball) = setup("Z^2", 2);
        let cone = z2_cone(&ball, (2, -1));
        let json = cone.to_json();
        assert_eq!(json["group"], "Z^2");
        assert_eq!(json["radius"], 2);
        assert_eq!(json["signs"]["e1"], "+");
        assert_eq!(json["signs"]["e2"], "-");
        assert_eq!(PartialCone::from_json(&json).unwrap(), cone);
        let text = serde_json::to_string(&cone).unwrap();
        assert!(text.starts_with("{\"schema_version\":1,"));
        let mut broken = json.clone();
        broken["signs"].as_object_mut().unwrap().remove("e1");
        assert!(PartialCone::from_json(&broken).is_err());
        let _ = ctx;
    }

    #[test]
    fn table_and_exhaustive_checks_agree_on_all_z2_assignments() {
        let (ctx, ball) = setup("Z^2", 1);
        for mask in 0u32..16 {
            let signs: Vec<Sign> = (0..4)
                .map(|i| if mask >> i & 1 == 1 { Sign::Positive } else { Sign::Negative })
                .collect();
            let cone = PartialCone::new(ball.clone(), signs.clone()).unwrap();
            let opt: Vec<Option<Sign>> = signs.into_iter().map(Some).collect();
            let mut a = cone.check_axioms();
            let mut b = verify_exhaustively(&ctx, ball.elements(), &opt);
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn totality_violation_reported_for_missing_sign() {
        let (ctx, ball) = setup("Z", 1);
        let v = verify_exhaustively(&ctx, ball.elements(), &[Some(Sign::Negative), None]);
        assert!(v.contains(&Violation::Totality { g: el(&ctx, "a") }));
    }
}
