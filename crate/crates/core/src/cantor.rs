//! Finite-horizon Cantor–Bendixson analysis of the order space.
//!
//! A node of the prefix tree is a basic clopen set of orders. It is *rigid to
//! the horizon* when exactly one horizon-level cone extends it; this is the
//! computable stand-in for an isolated point. Deleting rigid branches is the
//! finite shadow of taking the derived set `X'`.
//!
//! Every verdict here is evidence at a horizon, not a statement about the
//! full order space.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::groups::GroupCtx;
use crate::orderspace::{build_tree, count_extensions, PrefixTree, SearchConfig, SearchError};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CantorError {
    #[error("level {level} is above the horizon {horizon}")]
    LevelAboveHorizon { level: u32, horizon: u32 },
    #[error("horizon {horizon} is beyond the tree (max radius {max_radius})")]
    BeyondTree { horizon: u32, max_radius: u32 },
    #[error("node {node} has no descendant at the horizon; prune the tree first")]
    NotPruned { node: String },
    #[error("at least one derivative iteration is required")]
    NoIterations,
    #[error("stability window must be at least 1")]
    EmptyWindow,
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Shape of a rooted tree by levels: `parents[r][i]` is the index at level
/// `r - 1` of node `i` at level `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchTree {
    parents: Vec<Vec<usize>>,
}

impl BranchTree {
    /// Builds from parent indices; level 0 entries are ignored.
    pub fn from_parents(parents: Vec<Vec<usize>>) -> Self {
        assert!(!parents.is_empty(), "a tree has a root level");
        for r in 1..parents.len() {
            let above = parents[r - 1].len();
            assert!(parents[r].iter().all(|&p| p < above), "parent index out of range");
        }
        BranchTree { parents }
    }

    pub fn from_prefix_tree(tree: &PrefixTree) -> Self {
        let parents = tree
            .parent_links()
            .into_iter()
            .map(|l| l.into_iter().map(|p| p.unwrap_or(0)).collect())
            .collect();
        BranchTree { parents }
    }

    /// Complete binary tree with levels `0..=depth`.
    pub fn full_binary(depth: u32) -> Self {
        let mut parents = vec![vec![0]];
        for r in 1..=depth as usize {
            let above = parents[r - 1].len();
            parents.push((0..2 * above).map(|i| i / 2).collect());
        }
        BranchTree { parents }
    }

    /// A single branch with levels `0..=depth`.
    pub fn path(depth: u32) -> Self {
        BranchTree {
            parents: vec![vec![0]; depth as usize + 1],
        }
    }

    /// A new root whose level-1 children are the roots of `subtrees`,
    /// truncated to the shallowest subtree.
    pub fn join(subtrees: &[BranchTree]) -> Self {
        let depth = subtrees.iter().map(|t| t.parents.len()).min().unwrap_or(0);
        let mut parents = vec![vec![0]];
        for r in 0..depth {
            let mut level = Vec::new();
            let mut offset = 0;
            for t in subtrees {
                if r == 0 {
                    level.push(0);
                } else {
                    level.extend(t.parents[r].iter().map(|p| p + offset));
                    offset += t.parents[r - 1].len();
                }
            }
            parents.push(level);
        }
        BranchTree { parents }
    }

    pub fn max_radius(&self) -> u32 {
        self.parents.len() as u32 - 1
    }

    pub fn counts(&self) -> Vec<usize> {
        self.parents.iter().map(Vec::len).collect()
    }

    /// Number of level-`horizon` descendants of each level-`level` node.
    fn descendant_counts(&self, level: u32, horizon: u32) -> Vec<usize> {
        let mut counts = vec![1; self.parents[horizon as usize].len()];
        for r in (level + 1..=horizon).rev() {
            let mut up = vec![0; self.parents[r as usize - 1].len()];
            for (i, &p) in self.parents[r as usize].iter().enumerate() {
                up[p] += counts[i];
            }
            counts = up;
        }
        counts
    }

    fn check_range(&self, level: u32, horizon: u32) -> Result<(), CantorError> {
        if level > horizon {
            return Err(CantorError::LevelAboveHorizon { level, horizon });
        }
        if horizon > self.max_radius() {
            return Err(CantorError::BeyondTree {
                horizon,
                max_radius: self.max_radius(),
            });
        }
        Ok(())
    }
}

/// Descendant count at the horizon for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RigidityClass {
    pub node: String,
    pub level: u32,
    pub horizon: u32,
    pub descendant_count: usize,
}

impl RigidityClass {
    pub fn is_rigid(&self) -> bool {
        self.descendant_count == 1
    }
}

/// Classifies every level node of a tree pruned to `horizon`.
pub fn classify_rigidity(
    tree: &BranchTree,
    level: u32,
    horizon: u32,
) -> Result<Vec<RigidityClass>, CantorError> {
    tree.check_range(level, horizon)?;
    for r in 0..horizon {
        let counts = tree.descendant_counts(r, horizon);
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(CantorError::NotPruned {
                node: format!("{r}.{i}"),
            });
        }
    }
    Ok(tree
        .descendant_counts(level, horizon)
        .into_iter()
        .enumerate()
        .map(|(i, descendant_count)| RigidityClass {
            node: format!("{level}.{i}"),
            level,
            horizon,
            descendant_count,
        })
        .collect())
}

/// Iterated removal of rigid nodes given each node's horizon descendant
/// count. Removing a node deletes only its own descendants, so the other
/// counts are unchanged when re-classifying. Returns `iterations + 1` values.
fn derivative_trace(counts: &[usize], iterations: u32) -> Vec<usize> {
    let mut alive: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    let mut trace = vec![alive.len()];
    for _ in 0..iterations {
        alive.retain(|&c| c != 1);
        trace.push(alive.len());
    }
    trace
}

/// Surviving level-node counts under `iterations` rounds of deleting rigid
/// branches, starting with the undeleted count.
pub fn derivative_at_horizon(
    tree: &BranchTree,
    level: u32,
    horizon: u32,
    iterations: u32,
) -> Result<Vec<usize>, CantorError> {
    tree.check_range(level, horizon)?;
    if iterations == 0 {
        return Err(CantorError::NoIterations);
    }
    Ok(derivative_trace(&tree.descendant_counts(level, horizon), iterations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    FiniteEvidence(usize),
    PerfectKernelEvidence,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::FiniteEvidence(k) => write!(f, "FINITE_EVIDENCE({k})"),
            Verdict::PerfectKernelEvidence => f.write_str("PERFECT_KERNEL_EVIDENCE"),
            Verdict::Inconclusive => f.write_str("INCONCLUSIVE"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub const DEFAULT_WINDOW: u32 = 3;
pub const DEFAULT_ITERATIONS: u32 = 2;

#[derive(Debug, Clone)]
pub struct DichotomyConfig {
    /// Depth of the explicitly built tree.
    pub radius: u32,
    pub horizon: u32,
    /// Consecutive levels of constant count required for finite evidence.
    pub window: u32,
    pub iterations: u32,
    pub search: SearchConfig,
}

impl DichotomyConfig {
    pub fn new(radius: u32, horizon: u32) -> Self {
        DichotomyConfig {
            radius,
            horizon,
            window: DEFAULT_WINDOW,
            iterations: DEFAULT_ITERATIONS,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StableCount {
    Stable(usize),
    NotStabilized,
}

impl Serialize for StableCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StableCount::Stable(k) => s.serialize_u64(*k as u64),
            StableCount::NotStabilized => s.serialize_str("not stabilized"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DichotomyReport {
    pub schema_version: u32,
    pub group: GroupCtx,
    pub radius: u32,
    pub horizon: u32,
    pub window: u32,
    pub label: String,
    /// Node counts per level after pruning to the horizon; `None` where the
    /// level was not resolved.
    pub level_counts: Vec<Option<usize>>,
    /// Nodes at `radius` by horizon descendant count: 0, exactly 1, at least 2.
    pub pruned_nodes: usize,
    pub rigid_nodes: usize,
    pub branching_nodes: usize,
    pub stable_branch_count: StableCount,
    pub derivative_trace: Vec<usize>,
    pub verdict: Verdict,
    pub budget_exceeded: Option<String>,
}

impl DichotomyReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{}\n", self.verdict);
        out += &format!(
            "group {}  radius {}  horizon {}  window {}  ({})\n",
            self.group, self.radius, self.horizon, self.window, self.label
        );
        out += "level  nodes\n";
        for (r, c) in self.level_counts.iter().enumerate() {
            let c = c.map_or_else(|| "?".to_string(), |c| c.to_string());
            out += &format!("{r:>5}  {c}\n");
        }
        out += &format!(
            "level {}: {} rigid, {} branching, {} without horizon descendants\n",
            self.radius, self.rigid_nodes, self.branching_nodes, self.pruned_nodes
        );
        let trace: Vec<String> = self.derivative_trace.iter().map(|c| c.to_string()).collect();
        out += &format!("derivative trace: {}\n", trace.join(" "));
        let stable = match self.stable_branch_count {
            StableCount::Stable(k) => k.to_string(),
            StableCount::NotStabilized => "not stabilized".into(),
        };
        out += &format!("stable branch count: {stable}\n");
        if let Some(msg) = &self.budget_exceeded {
            out += &format!("budget exceeded: {msg}\n");
        }
        out
    }
}

/// Builds the tree to `radius`, counts (capped at 2) the horizon extensions
/// of each radius-level node, and assigns a verdict:
///
/// * `FINITE_EVIDENCE(k)`: every surviving node is rigid and the pruned level
///   counts are constantly `k` over the last `window` levels up to the horizon.
/// * `PERFECT_KERNEL_EVIDENCE`: some node survives and every surviving node
///   has at least two horizon descendants.
/// * `INCONCLUSIVE`: anything else, including an exhausted budget.
pub fn dichotomy_report(ctx: &GroupCtx, config: &DichotomyConfig) -> Result<DichotomyReport, CantorError> {
    if config.radius > config.horizon {
        return Err(CantorError::LevelAboveHorizon {
            level: config.radius,
            horizon: config.horizon,
        });
    }
    if config.window == 0 {
        return Err(CantorError::EmptyWindow);
    }
    if config.iterations == 0 {
        return Err(CantorError::NoIterations);
    }
    let (r, h) = (config.radius as usize, config.horizon as usize);
    let mut report = DichotomyReport {
        schema_version: SCHEMA_VERSION,
        group: ctx.clone(),
        radius: config.radius,
        horizon: config.horizon,
        window: config.window,
        label: format!("evidence at horizon {}", config.horizon),
        level_counts: vec![None; h + 1],
        pruned_nodes: 0,
        rigid_nodes: 0,
        branching_nodes: 0,
        stable_branch_count: StableCount::NotStabilized,
        derivative_trace: Vec::new(),
        verdict: Verdict::Inconclusive,
        budget_exceeded: None,
    };
    let tree = match build_tree(ctx, config.radius, &config.search) {
        Ok(t) => t,
        Err(e @ SearchError::BudgetExceeded { .. }) => {
            report.budget_exceeded = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let counts = match count_extensions(&tree.level_cones(config.radius)?, config.horizon, 2, &config.search) {
        Ok(c) => c,
        Err(e @ SearchError::BudgetExceeded { .. }) => {
            report.budget_exceeded = Some(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };

    let mut alive: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    report.level_counts[r] = Some(alive.iter().filter(|&&a| a).count());
    for level in (0..r).rev() {
        let mut up = vec![false; tree.level(level as u32)?.len()];
        for (i, node) in tree.level(level as u32 + 1)?.iter().enumerate() {
            if alive[i] {
                up[node.parent.expect("has parent")] = true;
            }
        }
        alive = up;
        report.level_counts[level] = Some(alive.iter().filter(|&&a| a).count());
    }
    report.pruned_nodes = counts.iter().filter(|&&c| c == 0).count();
    report.rigid_nodes = counts.iter().filter(|&&c| c == 1).count();
    report.branching_nodes = counts.iter().filter(|&&c| c >= 2).count();
    report.derivative_trace = derivative_trace(&counts, config.iterations);

    if report.branching_nodes == 0 {
        let k = report.rigid_nodes;
        for c in &mut report.level_counts[r..] {
            *c = Some(k);
        }
        let run = report
            .level_counts
            .iter()
            .rev()
            .take_while(|&&c| c == Some(k))
            .count();
        if run >= config.window as usize {
            report.stable_branch_count = StableCount::Stable(k);
            report.verdict = Verdict::FiniteEvidence(k);
        }
    } else if report.rigid_nodes == 0 {
        report.verdict = Verdict::PerfectKernelEvidence;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::parse_group_spec;

    fn report(group: &str, radius: u32, horizon: u32) -> DichotomyReport {
        let ctx = parse_group_spec(group).unwrap();
        dichotomy_report(&ctx, &DichotomyConfig::new(radius, horizon)).unwrap()
    }

    fn pruned(group: &str, max: u32, horizon: u32) -> BranchTree {
        let ctx = parse_group_spec(group).unwrap();
        let tree = build_tree(&ctx, max, &SearchConfig::default()).unwrap();
        BranchTree::from_prefix_tree(&tree.prune_to_horizon(horizon).unwrap())
    }

    #[test]
    fn synthetic_shapes() {
        assert_eq!(BranchTree::full_binary(3).counts(), vec![1, 2, 4, 8]);
        assert_eq!(BranchTree::path(2).counts(), vec![1, 1, 1]);
        let t = BranchTree::join(&[BranchTree::full_binary(2), BranchTree::path(2)]);
        assert_eq!(t.counts(), vec![1, 2, 3, 5]);
        let c = classify_rigidity(&t, 1, 3).unwrap();
        assert_eq!(c.iter().map(|c| c.descendant_count).collect::<Vec<_>>(), vec![4, 1]);
    }

    #[test]
    fn rigidity_examples() {
        let z = pruned("Z", 6, 6);
        let c = classify_rigidity(&z, 2, 6).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(RigidityClass::is_rigid));
        assert_eq!(c[1].node, "2.1");

        let z2 = pruned("Z^2", 4, 4);
        let c = classify_rigidity(&z2, 1, 4).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.iter().all(|c| c.descendant_count >= 2));

        let single = classify_rigidity(&BranchTree::path(4), 0, 4).unwrap();
        assert!(single[0].is_rigid());
    }

    #[test]
    fn rigidity_errors() {
        let t = BranchTree::full_binary(3);
        assert!(matches!(
            classify_rigidity(&t, 3, 2),
            Err(CantorError::LevelAboveHorizon { .. })
        ));
        assert!(matches!(
            classify_rigidity(&t, 0, 4),
            Err(CantorError::BeyondTree { .. })
        ));
        let h3 = parse_group_spec("H3").unwrap();
        let raw = build_tree(&h3, 4, &SearchConfig::default()).unwrap();
        assert!(matches!(
            classify_rigidity(&BranchTree::from_prefix_tree(&raw), 1, 4),
            Err(CantorError::NotPruned { .. })
        ));
        assert!(matches!(
            derivative_at_horizon(&t, 0, 3, 0),
            Err(CantorError::NoIterations)
        ));
    }

    #[test]
    fn derivative_examples() {
        let z = pruned("Z", 6, 6);
        assert_eq!(derivative_at_horizon(&z, 2, 6, 2).unwrap(), vec![2, 0, 0]);
        let full = BranchTree::full_binary(5);
        assert_eq!(derivative_at_horizon(&full, 2, 5, 3).unwrap(), vec![4, 4, 4, 4]);
        let mixed = BranchTree::join(&[BranchTree::full_binary(3), BranchTree::path(3)]);
        assert_eq!(derivative_at_horizon(&mixed, 1, 4, 2).unwrap(), vec![2, 1, 1]);
    }

    #[test]
    fn verdicts() {
        assert_eq!(report("Z", 2, 4).verdict, Verdict::FiniteEvidence(2));
        assert_eq!(report("1", 2, 4).verdict, Verdict::FiniteEvidence(1));
        assert_eq!(report("C2", 1, 3).verdict, Verdict::FiniteEvidence(0));
        assert_eq!(report("Z^2", 2, 4).verdict, Verdict::PerfectKernelEvidence);
        let h3 = report("H3", 2, 4);
        assert_eq!(h3.verdict, Verdict::PerfectKernelEvidence);
        assert_eq!((h3.pruned_nodes, h3.branching_nodes), (8, 40));
        assert_eq!(h3.level_counts[..3], [Some(1), Some(8), Some(40)]);
    }

    #[test]
    fn short_window_is_inconclusive() {
        let r = report("Z", 3, 4);
        assert_eq!(r.level_counts, vec![Some(1), Some(2), Some(2), Some(2), Some(2)]);
        assert_eq!(r.verdict, Verdict::FiniteEvidence(2));
        let ctx = parse_group_spec("Z").unwrap();
        let mut config = DichotomyConfig::new(1, 2);
        assert_eq!(dichotomy_report(&ctx, &config).unwrap().verdict, Verdict::Inconclusive);
        config.window = 2;
        assert_eq!(dichotomy_report(&ctx, &config).unwrap().verdict, Verdict::FiniteEvidence(2));
    }

    #[test]
    fn budget_gives_inconclusive_with_partial_data() {
        let ctx = parse_group_spec("F2").unwrap();
        let mut config = DichotomyConfig::new(4, 5);
        config.search.node_limit = 1000;
        let r = dichotomy_report(&ctx, &config).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.budget_exceeded.is_some());
    }

    #[test]
    fn report_renders() {
        let r = report("KB", 4, 8);
        assert_eq!(r.verdict, Verdict::FiniteEvidence(4));
        assert_eq!(r.stable_branch_count, StableCount::Stable(4));
        let json = r.to_json();
        assert_eq!(json["verdict"], "FINITE_EVIDENCE(4)");
        assert_eq!(json["group"], "KB");
        assert_eq!(json["label"], "evidence at horizon 8");
        assert!(r.to_table().starts_with("FINITE_EVIDENCE(4)\n"));
    }
}
