//! The right action of the group on its orders, `x <_g y  <=>  x^g < y^g`,
//! realised on finite cones.
//!
//! On cones the action reads `(P·g)(x) = P(g x g^-1)`. Conjugation by `g`
//! can push elements of `B_r` outside `B_r`, so acting on a radius-`r` cone
//! only determines the image on a smaller ball; the output radius is made
//! explicit in [`ActionResult`].

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::cones::{Ball, ConeError, PartialCone, Sign};
use crate::groups::{GroupCtx, GroupElement, GroupError};
use crate::orderspace::{PrefixTree, SearchError};
use crate::unionfind::UnionFind;
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DynamicsError {
    #[error("radius {radius} is too small to act by an element of norm {norm}")]
    InsufficientRadius { radius: u32, norm: u64 },
    #[error("level {level} is too small to act by `{generator}` and the tree is not deep enough to lift")]
    InsufficientLevel { level: u32, generator: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// A cone acted on by `acting`, with the radius bookkeeping.
#[derive(Debug, Clone)]
pub struct ActionResult {
    pub cone: PartialCone,
    pub acting: GroupElement,
    pub acting_norm: u64,
    pub input_radius: u32,
    pub output_radius: u32,
}

/// Largest radius `r'` on which the image of a radius-`radius` cone under
/// `g` is determined: `r' <= radius - 2|g|` and `g B_r' g^-1 ⊆ B_radius`.
///
/// For subadditive norms the first candidate always works; the Heisenberg
/// norm is not subadditive, so the containment is checked element by
/// element. Returns `None` when `radius <= 2|g|` for `g != 1`.
pub fn action_radius(ctx: &GroupCtx, radius: u32, g: &GroupElement) -> Result<Option<u32>, GroupError> {
    let norm = ctx.effective_norm(g)?;
    if g.is_identity() {
        return Ok(Some(radius));
    }
    if u64::from(radius) <= 2 * norm {
        return Ok(None);
    }
    let mut candidate = radius - 2 * norm as u32;
    loop {
        let fits = ctx
            .ball(candidate)
            .iter()
            .all(|x| ctx.in_ball(&ctx.conj_unchecked(x, g), radius));
        if fits || candidate == 0 {
            return Ok(Some(candidate));
        }
        candidate -= 1;
    }
}

/// The cone of `<_g`: `signs(x) = input signs(g x g^-1)`.
pub fn act(cone: &PartialCone, g: &GroupElement) -> Result<ActionResult, DynamicsError> {
    let ctx = cone.ctx();
    let norm = ctx.effective_norm(g)?;
    let output_radius =
        action_radius(ctx, cone.radius(), g)?.ok_or(DynamicsError::InsufficientRadius {
            radius: cone.radius(),
            norm,
        })?;
    let ball = if output_radius == cone.radius() {
        cone.ball().clone()
    } else {
        Ball::new(ctx, output_radius)
    };
    let image = PartialCone::from_fn(ball, |x| {
        cone.sign_of(&ctx.conj_unchecked(x, g))
            .expect("conjugate lies in the input ball")
    });
    Ok(ActionResult {
        cone: image,
        acting: g.clone(),
        acting_norm: norm,
        input_radius: cone.radius(),
        output_radius,
    })
}

/// Checks `<_{gh} = (<_g)_h` on the common radius of both sides.
pub fn verify_cocycle(
    cone: &PartialCone,
    g: &GroupElement,
    h: &GroupElement,
) -> Result<bool, DynamicsError> {
    let ctx = cone.ctx();
    let stepwise = act(&act(cone, g)?.cone, h)?.cone;
    let direct = act(cone, &ctx.multiply(g, h)?)?.cone;
    let common = stepwise.radius().min(direct.radius());
    Ok(stepwise.restrict(common)? == direct.restrict(common)?)
}

/// Finite-radius necessary condition for a bi-order: every generator fixes
/// the cone on the radius where its action is determined.
pub fn is_biorder_candidate(
    cone: &PartialCone,
    generators: &[GroupElement],
) -> Result<bool, DynamicsError> {
    for s in generators {
        let image = act(cone, s)?;
        if image.cone != cone.restrict_to(image.cone.ball())? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Why an orbit join is weaker than an exact identification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Caveat {
    /// The image was only determined on a smaller ball and matched every
    /// level node with that restriction.
    RestrictedMatch {
        node: String,
        generator: String,
        radius: u32,
        candidates: usize,
    },
    /// The image of a deeper node, restricted to the level, is not a node of
    /// the level (it was pruned away).
    ImageOutsideLevel { node: String, generator: String },
}

/// Orbits of the level nodes as index classes, with caveats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitPartition {
    pub level: u32,
    pub orbits: Vec<Vec<usize>>,
    pub caveats: Vec<Caveat>,
}

impl OrbitPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.orbits.iter().map(Vec::len).collect()
    }

    /// `{schema_version, group, level, orbits: {orbit_id: [node ids]}, caveats}`.
    pub fn to_json(&self, tree: &PrefixTree) -> serde_json::Value {
        let nodes = &tree.levels()[self.level as usize];
        let mut orbits = serde_json::Map::new();
        for (i, orbit) in self.orbits.iter().enumerate() {
            let ids: Vec<&str> = orbit.iter().map(|&n| nodes[n].id.as_str()).collect();
            orbits.insert(i.to_string(), serde_json::json!(ids));
        }
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "group": tree.ctx().to_string(),
            "level": self.level,
            "orbits": orbits,
            "caveats": self.caveats,
        })
    }
}

fn acting_set(ctx: &GroupCtx, generators: &[GroupElement]) -> Result<Vec<GroupElement>, GroupError> {
    let mut out = Vec::new();
    for s in generators {
        for t in [s.clone(), ctx.invert(s)?] {
            if !t.is_identity() && !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Smallest tree depth `m <= limit` at which every generator and inverse
/// acts on level-`m` cones with output radius at least `level`.
pub fn lift_depth(
    ctx: &GroupCtx,
    level: u32,
    generators: &[GroupElement],
    limit: u32,
) -> Result<Option<u32>, GroupError> {
    let acting = acting_set(ctx, generators)?;
    'depth: for m in level..=limit {
        for s in &acting {
            if !matches!(action_radius(ctx, m, s)?, Some(r) if r >= level) {
                continue 'depth;
            }
        }
        return Ok(Some(m));
    }
    Ok(None)
}

/// Partitions the level nodes into orbits of the action of `generators`.
///
/// When the tree reaches a level `m` deep enough that the action of `s`
/// on level-`m` cones is determined on the whole level-`level` ball, every
/// level-`m` node `w` joins `w|level` with `(w·s)|level`; this is exact
/// relative to the tree. Otherwise the level cone itself is acted on, and
/// the image (known only on a smaller ball) is matched against restrictions
/// of all level nodes; those joins are flagged with a caveat.
pub fn orbits_at_level(
    tree: &PrefixTree,
    level: u32,
    generators: &[GroupElement],
) -> Result<OrbitPartition, DynamicsError> {
    let ctx = tree.ctx();
    let nodes = tree.level(level)?;
    let by_signs: HashMap<&[Sign], usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.cone.signs(), i))
        .collect();
    let level_ball = match nodes.first() {
        Some(n) => n.cone.ball().clone(),
        None => Ball::new(ctx, level),
    };
    let mut uf = UnionFind::new(nodes.len());
    let mut caveats = Vec::new();
    for s in acting_set(ctx, generators)? {
        let name = ctx.format_element(&s);
        let mut lift = None;
        for m in level..=tree.max_radius() {
            if matches!(action_radius(ctx, m, &s)?, Some(r) if r >= level) {
                lift = Some(m);
                break;
            }
        }
        match lift {
            Some(m) => {
                for (wi, w) in tree.level(m)?.iter().enumerate() {
                    let u = tree.ancestor(m, wi, level);
                    let image = act(&w.cone, &s)?.cone.restrict_to(&level_ball)?;
                    match by_signs.get(image.signs()) {
                        Some(&v) => {
                            uf.union(u, v);
                        }
                        None => caveats.push(Caveat::ImageOutsideLevel {
                            node: w.id.clone(),
                            generator: name.clone(),
                        }),
                    }
                }
            }
            None => {
                if action_radius(ctx, level, &s)?.is_none() {
                    return Err(DynamicsError::InsufficientLevel {
                        level,
                        generator: name,
                    });
                }
                for (u, node) in nodes.iter().enumerate() {
                    let image = act(&node.cone, &s)?.cone;
                    let candidates: Vec<usize> = nodes
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| {
                            v.cone.restrict_to(image.ball()).map(|r| r == image).unwrap_or(false)
                        })
                        .map(|(i, _)| i)
                        .collect();
                    for &v in &candidates {
                        uf.union(u, v);
                    }
                    caveats.push(Caveat::RestrictedMatch {
                        node: node.id.clone(),
                        generator: name.clone(),
                        radius: image.radius(),
                        candidates: candidates.len(),
                    });
                }
            }
        }
    }
    caveats.sort();
    caveats.dedup();
    Ok(OrbitPartition {
        level,
        orbits: uf.classes(),
        caveats,
    })
}
