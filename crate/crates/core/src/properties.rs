//! Seeded randomized checks of the structural properties of cones, the
//! propagator and the conjugation action.
//!
//! Cones are sampled by a randomized depth-first completion on the ball, so
//! radii whose full prefix tree is too large to build can still be probed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cones::{propagate, Ball, PartialAssignment, PartialCone, Propagation, Propagator, Sign};
use crate::dynamics::{act, action_radius, verify_cocycle};
use crate::groups::{GroupCtx, GroupElement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PropertyError {
    #[error("{group} has no admissible cone at radius {radius}")]
    NoCones { group: String, radius: u32 },
    #[error("radius {radius} is too small for a non-identity element of {group} to act twice")]
    NoActingElements { group: String, radius: u32 },
    #[error("random completion exceeded {limit} decisions")]
    BudgetExceeded { limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub const PROPERTY_NAMES: [&str; 7] = [
    "order_axioms",
    "right_invariance",
    "propagate_monotone_idempotent",
    "action_preserves_admissibility",
    "cocycle",
    "inverse_action",
    "antipodal_involution",
];

/// A random branch of the completion search: signs are tried in random
/// order at each undetermined element. Returns `None` when the ball
/// admits no cone.
pub fn random_cone(ball: &std::sync::Arc<Ball>, rng: &mut impl Rng, limit: u64) -> Result<Option<PartialCone>, PropertyError> {
    fn go(
        prop: &mut Propagator<'_>,
        rng: &mut impl Rng,
        used: &mut u64,
        limit: u64,
    ) -> Result<bool, PropertyError> {
        let Some(i) = prop.signs.iter().position(Option::is_none) else {
            return Ok(true);
        };
        let first = if rng.gen() { Sign::Positive } else { Sign::Negative };
        for s in [first, first.flip()] {
            *used += 1;
            if *used > limit {
                return Err(PropertyError::BudgetExceeded { limit });
            }
            let mark = prop.mark();
            if prop.assign(i, s).is_ok() && go(prop, rng, used, limit)? {
                return Ok(true);
            }
            prop.undo_to(mark);
        }
        Ok(false)
    }
    let mut prop = Propagator::new(ball);
    let mut used = 0;
    if !go(&mut prop, rng, &mut used, limit)? {
        return Ok(None);
    }
    let signs = prop.signs.iter().map(|s| s.expect("complete")).collect();
    Ok(Some(PartialCone::new(ball.clone(), signs).expect("sized to ball")))
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            first_failure: self.first_failure,
        }
    }
}

/// Runs every property for `cases` samples each on radius-`radius` cones.
pub fn run_properties(
    ctx: &GroupCtx,
    radius: u32,
    cases: usize,
    seed: u64,
    limit: u64,
) -> Result<Vec<PropertyOutcome>, PropertyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball = Ball::new(ctx, radius);
    let pool_size = cases.clamp(1, 64);
    let mut pool = Vec::with_capacity(pool_size);
    for _ in 0..pool_size {
        match random_cone(&ball, &mut rng, limit)? {
            Some(c) => pool.push(c),
            None => {
                return Err(PropertyError::NoCones {
                    group: ctx.to_string(),
                    radius,
                })
            }
        }
    }
    let elements = ctx.ball(radius);
    let mut acting = Vec::new();
    for g in &elements {
        if let Some(r) = action_radius(ctx, radius, g).expect("same group") {
            acting.push((g.clone(), r));
        }
    }
    let reversible: Vec<GroupElement> = acting
        .iter()
        .filter(|(g, r)| matches!(action_radius(ctx, *r, &ctx.inv_unchecked(g)), Ok(Some(_))))
        .map(|(g, _)| g.clone())
        .collect();
    if reversible.iter().all(GroupElement::is_identity) {
        return Err(PropertyError::NoActingElements {
            group: ctx.to_string(),
            radius,
        });
    }
    let fmt = |g: &GroupElement| ctx.format_element(g);

    let mut order = Tally::new(PROPERTY_NAMES[0]);
    let mut right = Tally::new(PROPERTY_NAMES[1]);
    let mut propagation = Tally::new(PROPERTY_NAMES[2]);
    let mut admissible = Tally::new(PROPERTY_NAMES[3]);
    let mut cocycle = Tally::new(PROPERTY_NAMES[4]);
    let mut inverse = Tally::new(PROPERTY_NAMES[5]);
    let mut antipodal = Tally::new(PROPERTY_NAMES[6]);

    for _ in 0..cases {
        let cone = pool.choose(&mut rng).expect("nonempty pool");
        let pick = |rng: &mut ChaCha8Rng| elements.choose(rng).expect("ball has 1").clone();
        let (x, y, z, g) = (pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng));

        let lt = |a: &GroupElement, b: &GroupElement| cone.less_than(a, b).expect("same group");
        let irreflexive = lt(&x, &x) == Some(false);
        let antisymmetric = match (lt(&x, &y), lt(&y, &x)) {
            (Some(a), Some(b)) => (x == y && !a && !b) || (x != y && a != b),
            _ => true,
        };
        let transitive = match (lt(&x, &y), lt(&y, &z), lt(&x, &z)) {
            (Some(true), Some(true), Some(xz)) => xz,
            _ => true,
        };
        let gx = ctx.mul_unchecked(&g, &x);
        let gy = ctx.mul_unchecked(&g, &y);
        let invariant = lt(&x, &y) == lt(&gx, &gy);
        order.record(irreflexive && antisymmetric && transitive && invariant, || {
            format!("x={} y={} z={} g={}", fmt(&x), fmt(&y), fmt(&z), fmt(&g))
        });

        let rlt = |a: &GroupElement, b: &GroupElement| cone.right_less_than(a, b).expect("same group");
        let xg = ctx.mul_unchecked(&x, &g);
        let yg = ctx.mul_unchecked(&y, &g);
        let via_left = lt(&ctx.inv_unchecked(&y), &ctx.inv_unchecked(&x));
        right.record(rlt(&x, &y) == rlt(&xg, &yg) && rlt(&x, &y) == via_left, || {
            format!("x={} y={} g={}", fmt(&x), fmt(&y), fmt(&g))
        });

        let full = cone.to_assignment();
        let p = rng.gen_range(0.0..0.5);
        let mut larger = PartialAssignment::empty(cone.ball().clone());
        let mut smaller = PartialAssignment::empty(cone.ball().clone());
        for (e, s) in cone.ball().elements().iter().zip(cone.signs()) {
            if rng.gen_bool(p) {
                larger.set(e, *s).expect("in ball");
                if rng.gen_bool(0.5) {
                    smaller.set(e, *s).expect("in ball");
                }
            }
        }
        let ok = match (propagate(&smaller), propagate(&larger)) {
            (Propagation::Extended(a), Propagation::Extended(b)) => {
                smaller.is_extended_by(&a)
                    && a.is_extended_by(&b)
                    && b.is_extended_by(&full)
                    && propagate(&b) == Propagation::Extended(b.clone())
            }
            _ => false,
        };
        propagation.record(ok, || format!("cone {} density {p:.3}", cone.signs_string()));

        let (s, _) = acting.choose(&mut rng).expect("nonempty").clone();
        let image = act(cone, &s).expect("acting element");
        admissible.record(image.cone.check_axioms().is_empty(), || {
            format!("cone {} g={}", cone.signs_string(), fmt(&s))
        });
        let t = reversible.choose(&mut rng).expect("nonempty");
        let there = act(cone, t).expect("reversible element").cone;
        let ok = match act(&there, &ctx.inv_unchecked(t)) {
            Ok(b) => cone.restrict_to(b.cone.ball()).map(|r| r == b.cone).unwrap_or(false),
            Err(_) => false,
        };
        inverse.record(ok, || format!("cone {} g={}", cone.signs_string(), fmt(t)));

        let pairs: Vec<&(GroupElement, u32)> = acting
            .iter()
            .filter(|(h, _)| {
                matches!(action_radius(ctx, image.output_radius, h), Ok(Some(_)))
                    && matches!(action_radius(ctx, radius, &ctx.mul_unchecked(&s, h)), Ok(Some(_)))
            })
            .collect();
        let h = pairs.choose(&mut rng).map(|(h, _)| h.clone()).unwrap_or_else(|| ctx.identity());
        let ok = verify_cocycle(cone, &s, &h).unwrap_or(false);
        cocycle.record(ok, || format!("cone {} g={} h={}", cone.signs_string(), fmt(&s), fmt(&h)));

        antipodal.record(cone.flipped().check_axioms().is_empty() && cone.flipped().flipped() == *cone, || {
            format!("cone {}", cone.signs_string())
        });
    }
    Ok([order, right, propagation, admissible, cocycle, inverse, antipodal]
        .into_iter()
        .map(Tally::finish)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::parse_group_spec;

    #[test]
    fn random_cones_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (g, r) in [("Z^2", 4), ("F2", 4), ("H3", 3), ("KB", 5)] {
            let ctx = parse_group_spec(g).unwrap();
            let ball = Ball::new(&ctx, r);
            for _ in 0..5 {
                let c = random_cone(&ball, &mut rng, 1_000_000).unwrap().unwrap();
                assert!(c.check_axioms().is_empty());
            }
        }
        let c2 = parse_group_spec("C2").unwrap();
        assert_eq!(random_cone(&Ball::new(&c2, 1), &mut rng, 1000).unwrap(), None);
    }

    #[test]
    fn small_suite_passes_and_is_seeded() {
        let ctx = parse_group_spec("KB").unwrap();
        let a = run_properties(&ctx, 5, 50, 3, 1_000_000).unwrap();
        assert_eq!(a.len(), PROPERTY_NAMES.len());
        assert!(a.iter().all(|o| o.passed() && o.cases == 50), "{a:?}");
        assert_eq!(a, run_properties(&ctx, 5, 50, 3, 1_000_000).unwrap());
        let c3 = parse_group_spec("C3").unwrap();
        assert!(matches!(
            run_properties(&c3, 2, 10, 0, 1000),
            Err(PropertyError::NoCones { .. })
        ));
    }
}
