//! Admissible cones across radii: the prefix tree whose infinite branches
//! are the left orders of the group.
//!
//! Level `n` holds every admissible sign assignment on `B_n \ {1}`; each
//! node's parent is its restriction to `B_{n-1}`. Admissibility at a level is
//! only a necessary condition for being the shadow of a genuine order, so
//! level sets are upper approximations; [`PrefixTree::prune_to_horizon`]
//! tightens them by discarding nodes that do not survive to a given radius.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::cones::{
    verify_exhaustively, Ball, ChainCondition, ConeError, PartialCone, Propagator, SignMap,
};
use crate::groups::GroupCtx;
use crate::{Sign, SCHEMA_VERSION};

pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;
pub const DEFAULT_ORACLE_CAP: u64 = 1 << 24;

/// Search budgets and parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of branching decisions per level.
    pub node_limit: u64,
    /// Maximum number of raw assignments the brute-force oracle may scan.
    pub oracle_cap: u64,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            node_limit: DEFAULT_NODE_LIMIT,
            oracle_cap: DEFAULT_ORACLE_CAP,
            jobs: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("search budget of {limit} decisions exceeded at radius {radius}")]
    BudgetExceeded {
        radius: u32,
        limit: u64,
        /// Node counts of the levels finished before the budget ran out.
        completed_levels: Vec<usize>,
    },
    #[error("oracle would scan 2^{bits} assignments at radius {radius}, cap is {cap}")]
    OracleCapExceeded { radius: u32, bits: usize, cap: u64 },
    #[error("radius {requested} is beyond the tree's maximum radius {max_radius}")]
    BeyondTree { requested: u32, max_radius: u32 },
    #[error("chain is not decidable at radius {radius}")]
    UndecidableChain { radius: u32 },
    #[error(transparent)]
    Cone(#[from] ConeError),
}

struct Exceeded;

enum Halt {
    Exceeded,
    Enough,
}

impl From<Exceeded> for Halt {
    fn from(_: Exceeded) -> Self {
        Halt::Exceeded
    }
}

struct Budget<'a> {
    used: &'a AtomicU64,
    limit: u64,
}

impl Budget<'_> {
    fn tick(&self) -> Result<(), Exceeded> {
        if self.used.fetch_add(1, Ordering::Relaxed) >= self.limit {
            Err(Exceeded)
        } else {
            Ok(())
        }
    }
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

/// Depth-first completion of the current assignment: branch on the first
/// undetermined element in canonical order, `+` before `-`, propagating
/// after every decision. `visit` sees each total assignment and returns
/// `false` to stop the search.
fn complete(
    prop: &mut Propagator<'_>,
    start: usize,
    budget: &Budget<'_>,
    visit: &mut dyn FnMut(&[Option<Sign>]) -> bool,
) -> Result<(), Halt> {
    let Some(i) = (start..prop.signs.len()).find(|&i| prop.signs[i].is_none()) else {
        return if visit(&prop.signs) {
            Ok(())
        } else {
            Err(Halt::Enough)
        };
    };
    for s in [Sign::Positive, Sign::Negative] {
        budget.tick()?;
        let mark = prop.mark();
        let result = if prop.assign(i, s).is_ok() {
            complete(prop, i + 1, budget, visit)
        } else {
            Ok(())
        };
        prop.undo_to(mark);
        result?;
    }
    Ok(())
}

fn total(signs: &[Option<Sign>]) -> Vec<Sign> {
    signs.iter().map(|s| s.expect("complete")).collect()
}

/// All admissible completions of `fixed` (given by ball index) on `ball`.
fn completions(
    ball: &Ball,
    fixed: &[(usize, Sign)],
    budget: &Budget<'_>,
) -> Result<Vec<Vec<Sign>>, Exceeded> {
    let mut prop = Propagator::new(ball);
    for &(i, s) in fixed {
        if prop.assign(i, s).is_err() {
            return Ok(Vec::new());
        }
    }
    let mut out = Vec::new();
    let mut visit = |signs: &[Option<Sign>]| {
        out.push(total(signs));
        true
    };
    match complete(&mut prop, 0, budget, &mut visit) {
        Ok(()) | Err(Halt::Enough) => Ok(out),
        Err(Halt::Exceeded) => Err(Exceeded),
    }
}

/// Number of admissible completions of `fixed`, counting at most `cap`.
fn count_completions(
    ball: &Ball,
    fixed: &[(usize, Sign)],
    cap: usize,
    budget: &Budget<'_>,
) -> Result<usize, Exceeded> {
    let mut prop = Propagator::new(ball);
    for &(i, s) in fixed {
        if prop.assign(i, s).is_err() {
            return Ok(0);
        }
    }
    let mut found = 0;
    let mut visit = |_: &[Option<Sign>]| {
        found += 1;
        found < cap
    };
    match complete(&mut prop, 0, budget, &mut visit) {
        Ok(()) | Err(Halt::Enough) => Ok(found),
        Err(Halt::Exceeded) => Err(Exceeded),
    }
}

/// For each cone, the number of admissible cones on `B_horizon` restricting
/// to it, saturating at `cap`. Every such extension has admissible
/// restrictions at all intermediate radii, so this is the cone's descendant
/// count at the horizon in the fully built tree.
pub fn count_extensions(
    cones: &[PartialCone],
    horizon: u32,
    cap: usize,
    config: &SearchConfig,
) -> Result<Vec<usize>, SearchError> {
    let Some(first) = cones.first() else {
        return Ok(Vec::new());
    };
    let ctx = first.ctx();
    let outer = Ball::new(ctx, horizon);
    let used = AtomicU64::new(0);
    let budget = Budget {
        used: &used,
        limit: config.node_limit,
    };
    let count = |cone: &PartialCone| -> Result<usize, SearchError> {
        let embed = cone
            .ball()
            .embedding_into(&outer)
            .ok_or(ConeError::RestrictionRadius {
                from: horizon,
                to: cone.radius(),
            })?;
        let fixed: Vec<(usize, Sign)> = embed.into_iter().zip(cone.signs().iter().copied()).collect();
        count_completions(&outer, &fixed, cap, &budget).map_err(|_| SearchError::BudgetExceeded {
            radius: horizon,
            limit: config.node_limit,
            completed_levels: Vec::new(),
        })
    };
    if config.jobs <= 1 {
        cones.iter().map(count).collect()
    } else {
        with_pool(config.jobs, || cones.par_iter().map(count).collect())
    }
}

/// Splits the search into independent decision prefixes for parallel work.
/// Returns finished assignments found while splitting and the open prefixes.
#[allow(clippy::type_complexity)]
fn split_prefixes(
    ball: &Ball,
    target: usize,
    budget: &Budget<'_>,
) -> Result<(Vec<Vec<Sign>>, Vec<Vec<(usize, Sign)>>), Exceeded> {
    let mut done = Vec::new();
    let mut frontier: Vec<Vec<(usize, Sign)>> = vec![Vec::new()];
    let mut prop = Propagator::new(ball);
    while frontier.len() < target && !frontier.is_empty() {
        let mut next = Vec::new();
        let mut progressed = false;
        for prefix in frontier {
            let mark = prop.mark();
            for &(i, s) in &prefix {
                assert!(prop.assign(i, s).is_ok(), "prefix was consistent");
            }
            match prop.signs.iter().position(|s| s.is_none()) {
                None => done.push(total(&prop.signs)),
                Some(i) => {
                    progressed = true;
                    for s in [Sign::Positive, Sign::Negative] {
                        budget.tick()?;
                        let m = prop.mark();
                        if prop.assign(i, s).is_ok() {
                            let mut p = prefix.clone();
                            p.push((i, s));
                            next.push(p);
                        }
                        prop.undo_to(m);
                    }
                }
            }
            prop.undo_to(mark);
        }
        frontier = next;
        if !progressed {
            break;
        }
    }
    Ok((done, frontier))
}

/// Every admissible cone on `B_radius \ {1}`, canonically sorted.
pub fn enumerate_level(
    ctx: &GroupCtx,
    radius: u32,
    config: &SearchConfig,
) -> Result<Vec<PartialCone>, SearchError> {
    let ball = Ball::new(ctx, radius);
    let used = AtomicU64::new(0);
    let budget = Budget {
        used: &used,
        limit: config.node_limit,
    };
    let exceeded = || SearchError::BudgetExceeded {
        radius,
        limit: config.node_limit,
        completed_levels: Vec::new(),
    };
    let mut found = if config.jobs <= 1 {
        completions(&ball, &[], &budget).map_err(|_| exceeded())?
    } else {
        let (mut done, prefixes) =
            split_prefixes(&ball, config.jobs * 8, &budget).map_err(|_| exceeded())?;
        let parts: Result<Vec<Vec<Vec<Sign>>>, Exceeded> = with_pool(config.jobs, || {
            prefixes
                .par_iter()
                .map(|p| completions(&ball, p, &budget))
                .collect()
        });
        for part in parts.map_err(|_| exceeded())? {
            done.extend(part);
        }
        done
    };
    found.sort();
    Ok(found
        .into_iter()
        .map(|signs| PartialCone::new(ball.clone(), signs).expect("sized to ball"))
        .collect())
}

/// Brute force: scans all `2^(|B_r|-1)` sign assignments and keeps those
/// passing the table-free axiom check.
pub fn oracle_enumerate(
    ctx: &GroupCtx,
    radius: u32,
    cap: u64,
) -> Result<Vec<PartialCone>, SearchError> {
    let elements: Vec<_> = ctx
        .ball(radius)
        .into_iter()
        .filter(|g| !g.is_identity())
        .collect();
    let n = elements.len();
    if n >= 63 || (1u64 << n) > cap {
        return Err(SearchError::OracleCapExceeded {
            radius,
            bits: n,
            cap,
        });
    }
    let position: BTreeMap<_, usize> = elements.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let inverse: Vec<usize> = elements
        .iter()
        .map(|g| position[&ctx.invert(g).expect("same group")])
        .collect();
    let ball = Ball::new(ctx, radius);
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let positive = |i: usize| mask >> i & 1 == 1;
        // cheap pre-filter on (b) before the full check
        if (0..n).any(|i| positive(i) == positive(inverse[i])) {
            continue;
        }
        let signs: Vec<Option<Sign>> = (0..n)
            .map(|i| Some(if positive(i) { Sign::Positive } else { Sign::Negative }))
            .collect();
        if verify_exhaustively(ctx, &elements, &signs).is_empty() {
            let map = elements
                .iter()
                .cloned()
                .zip(signs.into_iter().map(|s| s.expect("total")))
                .collect();
            out.push(PartialCone::from_map(ball.clone(), &map)?);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: String,
    pub cone: PartialCone,
    /// Index of the parent in the previous level.
    pub parent: Option<usize>,
}

/// Per-level counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelSummary {
    pub radius: u32,
    pub node_count: usize,
    /// Children of each node at the next level; empty for the last level.
    pub child_counts: Vec<usize>,
}

/// Admissible cones at radii `0..=max_radius` linked by restriction.
#[derive(Debug, Clone)]
pub struct PrefixTree {
    ctx: GroupCtx,
    max_radius: u32,
    levels: Vec<Vec<TreeNode>>,
}

/// Child sign vectors of one parent, tagged with the parent index.
type Extensions = Vec<(Vec<Sign>, usize)>;

fn node_id(radius: usize, index: usize) -> String {
    format!("{radius}.{index}")
}

/// Builds levels `0..=max_radius`, extending every node of a level to the
/// next ball. The union of the extensions is exactly the next level's set of
/// admissible cones, since admissibility is inherited by restriction.
pub fn build_tree(
    ctx: &GroupCtx,
    max_radius: u32,
    config: &SearchConfig,
) -> Result<PrefixTree, SearchError> {
    let mut ball = Ball::new(ctx, 0);
    let root = PartialCone::new(ball.clone(), Vec::new())?;
    let mut levels = vec![vec![TreeNode {
        id: node_id(0, 0),
        cone: root,
        parent: None,
    }]];
    for radius in 1..=max_radius {
        let next = Ball::new(ctx, radius);
        let embed = ball.embedding_into(&next).expect("balls are nested");
        let used = AtomicU64::new(0);
        let budget = Budget {
            used: &used,
            limit: config.node_limit,
        };
        let parents = levels.last().expect("level 0 exists");
        let extend = |(pi, node): (usize, &TreeNode)| {
            let fixed: Vec<(usize, Sign)> = embed
                .iter()
                .zip(node.cone.signs())
                .map(|(&i, &s)| (i, s))
                .collect();
            completions(&next, &fixed, &budget)
                .map(|cs| cs.into_iter().map(|c| (c, pi)).collect::<Vec<_>>())
        };
        let result: Result<Vec<Extensions>, Exceeded> = if config.jobs <= 1 {
            parents.iter().enumerate().map(extend).collect()
        } else {
            with_pool(config.jobs, || parents.par_iter().enumerate().map(extend).collect())
        };
        let mut children: Vec<(Vec<Sign>, usize)> = match result {
            Ok(parts) => parts.into_iter().flatten().collect(),
            Err(Exceeded) => {
                return Err(SearchError::BudgetExceeded {
                    radius,
                    limit: config.node_limit,
                    completed_levels: levels.iter().map(Vec::len).collect(),
                })
            }
        };
        children.sort();
        let level = children
            .into_iter()
            .enumerate()
            .map(|(i, (signs, parent))| TreeNode {
                id: node_id(radius as usize, i),
                cone: PartialCone::new(next.clone(), signs).expect("sized to ball"),
                parent: Some(parent),
            })
            .collect();
        levels.push(level);
        ball = next;
    }
    Ok(PrefixTree {
        ctx: ctx.clone(),
        max_radius,
        levels,
    })
}

impl PrefixTree {
    pub fn ctx(&self) -> &GroupCtx {
        &self.ctx
    }

    pub fn max_radius(&self) -> u32 {
        self.max_radius
    }

    pub fn levels(&self) -> &[Vec<TreeNode>] {
        &self.levels
    }

    pub fn level(&self, radius: u32) -> Result<&[TreeNode], SearchError> {
        self.levels
            .get(radius as usize)
            .map(Vec::as_slice)
            .ok_or(SearchError::BeyondTree {
                requested: radius,
                max_radius: self.max_radius,
            })
    }

    pub fn level_cones(&self, radius: u32) -> Result<Vec<PartialCone>, SearchError> {
        Ok(self.level(radius)?.iter().map(|n| n.cone.clone()).collect())
    }

    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    /// Parent indices per level, the shape consumed by [`crate::cantor`].
    pub fn parent_links(&self) -> Vec<Vec<Option<usize>>> {
        self.levels
            .iter()
            .map(|l| l.iter().map(|n| n.parent).collect())
            .collect()
    }

    /// Index of the level-`to` ancestor of node `index` at level `from`.
    pub fn ancestor(&self, from: u32, index: usize, to: u32) -> usize {
        assert!(to <= from);
        let mut idx = index;
        for level in (to + 1..=from).rev() {
            idx = self.levels[level as usize][idx]
                .parent
                .expect("non-root node has a parent");
        }
        idx
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        let mut out = Vec::with_capacity(self.levels.len());
        for (r, level) in self.levels.iter().enumerate() {
            let child_counts = match self.levels.get(r + 1) {
                Some(next) => {
                    let mut counts = vec![0; level.len()];
                    for n in next {
                        counts[n.parent.expect("child has parent")] += 1;
                    }
                    counts
                }
                None => Vec::new(),
            };
            out.push(LevelSummary {
                radius: r as u32,
                node_count: level.len(),
                child_counts,
            });
        }
        out
    }

    /// Drops every level beyond `horizon` and every node with no descendant
    /// at the horizon; node ids are reassigned.
    pub fn prune_to_horizon(&self, horizon: u32) -> Result<PrefixTree, SearchError> {
        if horizon > self.max_radius {
            return Err(SearchError::BeyondTree {
                requested: horizon,
                max_radius: self.max_radius,
            });
        }
        let h = horizon as usize;
        let mut keep: Vec<Vec<bool>> = self.levels[..=h]
            .iter()
            .map(|l| vec![false; l.len()])
            .collect();
        keep[h].iter_mut().for_each(|k| *k = true);
        for r in (1..=h).rev() {
            for (i, node) in self.levels[r].iter().enumerate() {
                if keep[r][i] {
                    keep[r - 1][node.parent.expect("has parent")] = true;
                }
            }
        }
        let mut levels: Vec<Vec<TreeNode>> = Vec::with_capacity(h + 1);
        let mut remap: Vec<Option<usize>> = Vec::new();
        for (r, level) in self.levels[..=h].iter().enumerate() {
            let mut next_remap = vec![None; level.len()];
            let mut out = Vec::new();
            for (i, node) in level.iter().enumerate() {
                if !keep[r][i] {
                    continue;
                }
                next_remap[i] = Some(out.len());
                out.push(TreeNode {
                    id: node_id(r, out.len()),
                    cone: node.cone.clone(),
                    parent: node.parent.map(|p| remap[p].expect("kept parent")),
                });
            }
            levels.push(out);
            remap = next_remap;
        }
        Ok(PrefixTree {
            ctx: self.ctx.clone(),
            max_radius: horizon,
            levels,
        })
    }

    /// Indices of the level nodes satisfying `chain`: the level's view of
    /// the basic open set `U_{g_1,...,g_n}`.
    pub fn select_by_chain(
        &self,
        level: u32,
        chain: &ChainCondition,
    ) -> Result<Vec<usize>, SearchError> {
        let mut out = Vec::new();
        for (i, node) in self.level(level)?.iter().enumerate() {
            match node.cone.satisfies_chain(chain)? {
                None => return Err(SearchError::UndecidableChain { radius: level }),
                Some(true) => out.push(i),
                Some(false) => {}
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        writeln!(s, "digraph prefix_tree {{").unwrap();
        writeln!(
            s,
            "  label=\"{} prefix tree, radius 0..{}\";",
            self.ctx, self.max_radius
        )
        .unwrap();
        for (r, level) in self.levels.iter().enumerate() {
            for node in level {
                writeln!(s, "  \"{}\" [label=\"{}\\nlevel {}\"];", node.id, node.id, r).unwrap();
            }
        }
        for (r, level) in self.levels.iter().enumerate().skip(1) {
            for node in level {
                let parent = &self.levels[r - 1][node.parent.expect("has parent")];
                writeln!(s, "  \"{}\" -> \"{}\";", parent.id, node.id).unwrap();
            }
        }
        s.push_str("}\n");
        s
    }
}

struct LevelDoc<'a> {
    radius: usize,
    tree: &'a PrefixTree,
}

struct NodeDoc<'a> {
    node: &'a TreeNode,
    parent_id: Option<&'a str>,
}

impl Serialize for NodeDoc<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("id", &self.node.id)?;
        map.serialize_entry("signs", &SignMap(&self.node.cone))?;
        map.serialize_entry("parent_id", &self.parent_id)?;
        map.end()
    }
}

impl Serialize for LevelDoc<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let levels = &self.tree.levels;
        let nodes: Vec<NodeDoc<'_>> = levels[self.radius]
            .iter()
            .map(|node| NodeDoc {
                node,
                parent_id: node
                    .parent
                    .map(|p| levels[self.radius - 1][p].id.as_str()),
            })
            .collect();
        let mut map = serializer.serialize_map(Some(2))?;
        map.serialize_entry("radius", &self.radius)?;
        map.serialize_entry("nodes", &nodes)?;
        map.end()
    }
}

struct Levels<'a>(&'a PrefixTree);

impl Serialize for Levels<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.levels.len()))?;
        for radius in 0..self.0.levels.len() {
            seq.serialize_element(&LevelDoc {
                radius,
                tree: self.0,
            })?;
        }
        seq.end()
    }
}

impl Serialize for PrefixTree {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("schema_version", &SCHEMA_VERSION)?;
        map.serialize_entry("group", &self.ctx.to_string())?;
        map.serialize_entry("max_radius", &self.max_radius)?;
        map.serialize_entry("levels", &Levels(self))?;
        map.end()
    }
}

/// Shared handle to the ball of a given radius of a tree's group.
pub fn level_ball(tree: &PrefixTree, radius: u32) -> Arc<Ball> {
    match tree.levels.get(radius as usize).and_then(|l| l.first()) {
        Some(node) => node.cone.ball().clone(),
        None => Ball::new(&tree.ctx, radius),
    }
}
