//! Restriction of cones to a subgroup given by generator words.
//!
//! Any left order on `G` restricts to a left order on a subgroup `H`. Here
//! `H` is presented by a list of ambient elements; its ball of radius `s` is
//! the set of products of at most `s` generators and their inverses, keyed by
//! ambient normal form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cones::{verify_exhaustively, ConeError, PartialCone, Sign, Violation};
use crate::groups::{GroupCtx, GroupElement, GroupError};
use crate::orderspace::{PrefixTree, SearchError};
use crate::SCHEMA_VERSION;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubgroupError {
    #[error("a subgroup needs at least one generator")]
    NoGenerators,
    #[error("subgroup ball of radius {subradius} needs ambient radius {needed}, cone has radius {radius}")]
    InsufficientRadius {
        subradius: u32,
        needed: u64,
        radius: u32,
    },
    #[error("element `{0}` is not in the subgroup ball")]
    NotInSubgroupBall(String),
    #[error("`{0}` is not a decidable subgroup element at this level")]
    OutOfRange(String),
    #[error("the identity does not define a basic open set")]
    IdentityElement,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// A word in the subgroup generators: letters `±(index + 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubgroupWord(Vec<i32>);

impl SubgroupWord {
    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SubgroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|&l| {
                if l > 0 {
                    format!("h{l}")
                } else {
                    format!("h{}^-1", -l)
                }
            })
            .collect();
        f.write_str(&parts.join("*"))
    }
}

/// A finitely generated subgroup of an ambient group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupSpec {
    ctx: GroupCtx,
    generators: Vec<GroupElement>,
    max_word_norm: u64,
}

impl SubgroupSpec {
    pub fn new(ctx: &GroupCtx, generators: Vec<GroupElement>) -> Result<Self, SubgroupError> {
        if generators.is_empty() {
            return Err(SubgroupError::NoGenerators);
        }
        let mut max_word_norm = 0;
        for g in &generators {
            max_word_norm = max_word_norm.max(ctx.effective_norm(g)?);
        }
        Ok(SubgroupSpec {
            ctx: ctx.clone(),
            generators,
            max_word_norm,
        })
    }

    /// Parses a comma-separated list of ambient words, e.g. `"e1"` or `"a*b"`.
    pub fn parse(ctx: &GroupCtx, text: &str) -> Result<Self, SubgroupError> {
        let gens = text
            .split(',')
            .map(|w| ctx.parse_element(w.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        SubgroupSpec::new(ctx, gens)
    }

    pub fn ctx(&self) -> &GroupCtx {
        &self.ctx
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    /// `L`, the largest effective norm among the generators.
    pub fn max_word_norm(&self) -> u64 {
        self.max_word_norm
    }

    /// Positions of generators equal to the identity.
    pub fn trivial_generators(&self) -> Vec<usize> {
        (0..self.generators.len())
            .filter(|&i| self.generators[i].is_identity())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupBallEntry {
    pub word: SubgroupWord,
    pub element: GroupElement,
}

/// Products of at most `s` generators and inverses, one entry per distinct
/// ambient element (with a shortest word), in canonical element order.
pub fn subgroup_ball(spec: &SubgroupSpec, s: u32) -> Vec<SubgroupBallEntry> {
    let ctx = &spec.ctx;
    let mut letters: Vec<(i32, GroupElement)> = Vec::new();
    for (i, g) in spec.generators.iter().enumerate() {
        let l = i as i32 + 1;
        letters.push((l, g.clone()));
        letters.push((-l, ctx.inv_unchecked(g)));
    }
    let mut seen: BTreeMap<GroupElement, SubgroupWord> = BTreeMap::new();
    seen.insert(ctx.identity(), SubgroupWord(Vec::new()));
    let mut frontier = vec![(SubgroupWord(Vec::new()), ctx.identity())];
    for _ in 0..s {
        let mut next = Vec::new();
        for (word, element) in &frontier {
            for (l, g) in &letters {
                if word.0.last() == Some(&-l) {
                    continue;
                }
                let e = ctx.mul_unchecked(element, g);
                if seen.contains_key(&e) {
                    continue;
                }
                let mut w = word.0.clone();
                w.push(*l);
                seen.insert(e.clone(), SubgroupWord(w.clone()));
                next.push((SubgroupWord(w), e));
            }
        }
        frontier = next;
    }
    seen.into_iter()
        .map(|(element, word)| SubgroupBallEntry { word, element })
        .collect()
}

/// Ambient signs on the non-identity elements of a subgroup ball.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedCone {
    spec: SubgroupSpec,
    subradius: u32,
    entries: Vec<(SubgroupEntrySign, GroupElement)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SubgroupEntrySign {
    word: SubgroupWord,
    sign: Sign,
}

impl RestrictedCone {
    pub fn spec(&self) -> &SubgroupSpec {
        &self.spec
    }

    pub fn subradius(&self) -> u32 {
        self.subradius
    }

    pub fn elements(&self) -> Vec<GroupElement> {
        self.entries.iter().map(|(_, g)| g.clone()).collect()
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.entries.iter().map(|(e, _)| e.sign).collect()
    }

    pub fn sign_of(&self, g: &GroupElement) -> Option<Sign> {
        self.entries
            .binary_search_by(|(_, e)| e.cmp(g))
            .ok()
            .map(|i| self.entries[i].0.sign)
    }

    /// Cone axioms on the subgroup ball, checked with the group operations.
    pub fn check_axioms(&self) -> Vec<Violation> {
        let signs: Vec<Option<Sign>> = self.entries.iter().map(|(e, _)| Some(e.sign)).collect();
        verify_exhaustively(&self.spec.ctx, &self.elements(), &signs)
    }

    /// Restricts further to a subgroup `K` whose ball of radius `t` lies in
    /// this subgroup ball.
    pub fn restrict_further(&self, kspec: &SubgroupSpec, t: u32) -> Result<RestrictedCone, SubgroupError> {
        let mut entries = Vec::new();
        for entry in subgroup_ball(kspec, t) {
            if entry.element.is_identity() {
                continue;
            }
            let sign = self.sign_of(&entry.element).ok_or_else(|| {
                SubgroupError::NotInSubgroupBall(self.spec.ctx.format_element(&entry.element))
            })?;
            entries.push((
                SubgroupEntrySign {
                    word: entry.word,
                    sign,
                },
                entry.element,
            ));
        }
        Ok(RestrictedCone {
            spec: kspec.clone(),
            subradius: t,
            entries,
        })
    }

    /// `{schema_version, group, subgroup, subradius, signs: {element: sign}, words: {element: word}}`.
    pub fn to_json(&self) -> serde_json::Value {
        let ctx = &self.spec.ctx;
        let mut signs = serde_json::Map::new();
        let mut words = serde_json::Map::new();
        for (e, g) in &self.entries {
            let key = ctx.format_element(g);
            signs.insert(key.clone(), e.sign.as_str().into());
            words.insert(key, e.word.to_string().into());
        }
        let gens: Vec<String> = self.spec.generators.iter().map(|g| ctx.format_element(g)).collect();
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "group": ctx.to_string(),
            "subgroup": gens,
            "subradius": self.subradius,
            "signs": signs,
            "words": words,
        })
    }
}

/// `ρ_{G,H}` at finite radius: ambient signs on the subgroup ball of radius
/// `s`. Requires `s·L <= r` and every subgroup-ball element inside `B_r`.
pub fn restrict_order(
    cone: &PartialCone,
    spec: &SubgroupSpec,
    s: u32,
) -> Result<RestrictedCone, SubgroupError> {
    let needed = u64::from(s) * spec.max_word_norm;
    let insufficient = SubgroupError::InsufficientRadius {
        subradius: s,
        needed,
        radius: cone.radius(),
    };
    if needed > u64::from(cone.radius()) {
        return Err(insufficient);
    }
    let mut entries = Vec::new();
    for entry in subgroup_ball(spec, s) {
        if entry.element.is_identity() {
            continue;
        }
        let sign = cone.sign_of(&entry.element).ok_or_else(|| insufficient.clone())?;
        entries.push((
            SubgroupEntrySign {
                word: entry.word,
                sign,
            },
            entry.element,
        ));
    }
    Ok(RestrictedCone {
        spec: spec.clone(),
        subradius: s,
        entries,
    })
}

/// Checks `ρ^-1(V(H)_h) = V(G)_h` on the nodes of one tree level: the nodes
/// whose restriction makes `h` positive are exactly the nodes making `h`
/// positive in `G`.
pub fn verify_restriction_continuity(
    tree: &PrefixTree,
    spec: &SubgroupSpec,
    h: &GroupElement,
    level: u32,
) -> Result<bool, SubgroupError> {
    let ctx = spec.ctx();
    if h.is_identity() {
        return Err(SubgroupError::IdentityElement);
    }
    let out_of_range = || SubgroupError::OutOfRange(ctx.format_element(h));
    if spec.max_word_norm == 0 {
        return Err(out_of_range());
    }
    let max_s = u64::from(level) / spec.max_word_norm;
    let s = (1..=max_s as u32)
        .find(|&s| subgroup_ball(spec, s).iter().any(|e| &e.element == h))
        .ok_or_else(out_of_range)?;
    let mut via_subgroup = BTreeSet::new();
    let mut in_group = BTreeSet::new();
    for (i, node) in tree.level(level)?.iter().enumerate() {
        let restricted = match restrict_order(&node.cone, spec, s) {
            Ok(r) => r,
            Err(SubgroupError::InsufficientRadius { .. }) => return Err(out_of_range()),
            Err(e) => return Err(e),
        };
        if restricted.sign_of(h) == Some(Sign::Positive) {
            via_subgroup.insert(i);
        }
        match node.cone.in_basic_open(std::slice::from_ref(h))? {
            Some(true) => {
                in_group.insert(i);
            }
            Some(false) => {}
            None => return Err(out_of_range()),
        }
    }
    Ok(via_subgroup == in_group)
}
