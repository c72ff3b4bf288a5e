//! Concrete finitely generated groups with canonical normal forms.
//!
//! Every supported family has a solvable word problem: elements are stored as
//! canonical coordinate vectors, so equality of elements is equality of
//! coordinates. Each family also carries a norm, and the symmetric balls
//! `B_n = {g : min(|g|, |g^-1|) <= n}` give the finite, increasing,
//! inverse-closed, exhaustive filtration used by everything downstream.
//!
//! Normal forms:
//!
//! | family | coordinates | rule |
//! |--------|-------------|------|
//! | `1`    | `[]`        | |
//! | `C<n>` | `[k]`, `0 <= k < n` | `a^k` |
//! | `S3`   | `[i, j]`, `i < 2`, `j < 3` | `s^i t^j`, `t s = s t^-1` |
//! | `Z^<d>`| exponent vector | |
//! | `F<k>` | reduced word, letters `±(index + 1)` | |
//! | `KB`   | `[m, n]` | `x^m y^n`, `x y x^-1 = y^-1` |
//! | `H3`   | `[a, b, c]` | `x^a y^b z^c`, `z` central, `y x = x y z^-1` |

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("unknown group family `{0}`")]
    UnknownFamily(String),
    #[error("group parameter must be positive in `{0}`")]
    NonPositiveParameter(String),
    #[error("free groups support at most 26 generators, got {0}")]
    TooManyGenerators(u32),
    #[error("element of {found} used with group {expected}")]
    FamilyMismatch { expected: Family, found: Family },
    #[error("cannot parse element `{input}`: {reason}")]
    ParseElement { input: String, reason: String },
}

/// A supported group family together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Trivial,
    Cyclic(u32),
    Sym3,
    Abelian(u32),
    Free(u32),
    Klein,
    Heisenberg,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Trivial => write!(f, "1"),
            Family::Cyclic(n) => write!(f, "C{n}"),
            Family::Sym3 => write!(f, "S3"),
            Family::Abelian(1) => write!(f, "Z"),
            Family::Abelian(d) => write!(f, "Z^{d}"),
            Family::Free(k) => write!(f, "F{k}"),
            Family::Klein => write!(f, "KB"),
            Family::Heisenberg => write!(f, "H3"),
        }
    }
}

impl Family {
    fn coord_len(self) -> Option<usize> {
        match self {
            Family::Trivial => Some(0),
            Family::Cyclic(_) => Some(1),
            Family::Sym3 | Family::Klein => Some(2),
            Family::Abelian(d) => Some(d as usize),
            Family::Heisenberg => Some(3),
            Family::Free(_) => None,
        }
    }
}

/// A group element in canonical normal form.
///
/// The derived ordering (family first, then coordinates lexicographically) is
/// the canonical ordering used for every deterministic listing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    family: Family,
    coords: Vec<i64>,
}

impl GroupElement {
    pub fn family(&self) -> Family {
        self.family
    }

    /// Normal-form coordinates; see the module table for their meaning.
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }
}

/// A concrete group: family, generators and norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupCtx {
    family: Family,
    generators: Vec<GroupElement>,
}

impl FromStr for GroupCtx {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_group_spec(s)
    }
}

impl fmt::Display for GroupCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.family.fmt(f)
    }
}

impl Serialize for GroupCtx {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupCtx {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn parse_param(spec: &str, digits: &str) -> Result<u32, GroupError> {
    let value: i64 = digits
        .parse()
        .map_err(|_| GroupError::UnknownFamily(spec.to_string()))?;
    if value <= 0 {
        return Err(GroupError::NonPositiveParameter(spec.to_string()));
    }
    u32::try_from(value).map_err(|_| GroupError::UnknownFamily(spec.to_string()))
}

/// Parses the group mini-language:
/// `1 | C<n> | S3 | Z | Z^<d> | F<k> | KB | H3`.
pub fn parse_group_spec(spec: &str) -> Result<GroupCtx, GroupError> {
    let s = spec.trim();
    let family = match s {
        "1" => Family::Trivial,
        "S3" => Family::Sym3,
        "Z" => Family::Abelian(1),
        "KB" => Family::Klein,
        "H3" => Family::Heisenberg,
        _ => {
            if let Some(rest) = s.strip_prefix("Z^") {
                Family::Abelian(parse_param(s, rest)?)
            } else if let Some(rest) = s.strip_prefix('C') {
                Family::Cyclic(parse_param(s, rest)?)
            } else if let Some(rest) = s.strip_prefix('F') {
                let k = parse_param(s, rest)?;
                if k > 26 {
                    return Err(GroupError::TooManyGenerators(k));
                }
                Family::Free(k)
            } else {
                return Err(GroupError::UnknownFamily(s.to_string()));
            }
        }
    };
    Ok(GroupCtx::new(family))
}

fn unit_vector(d: u32, i: u32) -> Vec<i64> {
    (0..d).map(|j| i64::from(j == i)).collect()
}

fn free_letter_name(letter: i64) -> char {
    (b'a' + (letter.unsigned_abs() - 1) as u8) as char
}

impl GroupCtx {
    pub fn new(family: Family) -> Self {
        let generators = match family {
            Family::Trivial => vec![],
            Family::Cyclic(n) => {
                if n == 1 {
                    vec![]
                } else {
                    vec![vec![1]]
                }
            }
            Family::Sym3 => vec![vec![1, 0], vec![0, 1]],
            Family::Abelian(d) => (0..d).map(|i| unit_vector(d, i)).collect(),
            Family::Free(k) => (1..=i64::from(k)).map(|l| vec![l]).collect(),
            Family::Klein => vec![vec![1, 0], vec![0, 1]],
            Family::Heisenberg => vec![vec![1, 0, 0], vec![0, 1, 0]],
        };
        let generators = generators
            .into_iter()
            .map(|coords| GroupElement { family, coords })
            .collect();
        GroupCtx { family, generators }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    /// Names accepted by the element parser, in generator order.
    pub fn generator_names(&self) -> Vec<String> {
        match self.family {
            Family::Trivial => vec![],
            Family::Cyclic(1) => vec![],
            Family::Cyclic(_) | Family::Abelian(1) => vec!["a".into()],
            Family::Sym3 => vec!["s".into(), "t".into()],
            Family::Abelian(d) => (1..=d).map(|i| format!("e{i}")).collect(),
            Family::Free(k) => (1..=i64::from(k))
                .map(|l| free_letter_name(l).to_string())
                .collect(),
            Family::Klein | Family::Heisenberg => vec!["x".into(), "y".into()],
        }
    }

    pub fn identity(&self) -> GroupElement {
        let len = self.family.coord_len().unwrap_or(0);
        GroupElement {
            family: self.family,
            coords: vec![0; len],
        }
    }

    fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        let shape_ok = match self.family.coord_len() {
            Some(len) => g.coords.len() == len,
            None => true,
        };
        if g.family != self.family || !shape_ok {
            return Err(GroupError::FamilyMismatch {
                expected: self.family,
                found: g.family,
            });
        }
        Ok(())
    }

    fn element(&self, coords: Vec<i64>) -> GroupElement {
        GroupElement {
            family: self.family,
            coords,
        }
    }

    /// Builds an element from raw normal-form coordinates, validating that
    /// they are canonical for this family.
    pub fn element_from_coords(&self, coords: Vec<i64>) -> Result<GroupElement, GroupError> {
        let bad = |reason: &str| GroupError::ParseElement {
            input: format!("{coords:?}"),
            reason: reason.to_string(),
        };
        match self.family {
            Family::Cyclic(n) => {
                if coords.len() != 1 || coords[0] < 0 || coords[0] >= i64::from(n) {
                    return Err(bad("residue out of range"));
                }
            }
            Family::Sym3 => {
                if coords.len() != 2 || !(0..2).contains(&coords[0]) || !(0..3).contains(&coords[1])
                {
                    return Err(bad("not a canonical s^i t^j pair"));
                }
            }
            Family::Free(k) => {
                let k = i64::from(k);
                if coords.iter().any(|&l| l == 0 || l.abs() > k) {
                    return Err(bad("letter out of range"));
                }
                if coords.windows(2).any(|w| w[0] == -w[1]) {
                    return Err(bad("word is not freely reduced"));
                }
            }
            _ => {
                if Some(coords.len()) != self.family.coord_len() {
                    return Err(bad("wrong number of coordinates"));
                }
            }
        }
        Ok(self.element(coords))
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    pub(crate) fn mul_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let (a, b) = (&g.coords, &h.coords);
        let coords = match self.family {
            Family::Trivial => vec![],
            Family::Cyclic(n) => vec![(a[0] + b[0]).rem_euclid(i64::from(n))],
            Family::Sym3 => {
                let j = if b[0] == 0 { a[1] } else { -a[1] };
                vec![(a[0] + b[0]) % 2, (j + b[1]).rem_euclid(3)]
            }
            Family::Abelian(_) => a.iter().zip(b).map(|(x, y)| x + y).collect(),
            Family::Free(_) => {
                let mut word = a.clone();
                for &letter in b {
                    if word.last() == Some(&-letter) {
                        word.pop();
                    } else {
                        word.push(letter);
                    }
                }
                word
            }
            Family::Klein => {
                let flipped = if b[0].rem_euclid(2) == 0 { a[1] } else { -a[1] };
                vec![a[0] + b[0], flipped + b[1]]
            }
            Family::Heisenberg => vec![a[0] + b[0], a[1] + b[1], a[2] + b[2] - a[1] * b[0]],
        };
        self.element(coords)
    }

    pub fn invert(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        Ok(self.inv_unchecked(g))
    }

    pub(crate) fn inv_unchecked(&self, g: &GroupElement) -> GroupElement {
        let a = &g.coords;
        let coords = match self.family {
            Family::Trivial => vec![],
            Family::Cyclic(n) => vec![(-a[0]).rem_euclid(i64::from(n))],
            Family::Sym3 => {
                let j = if a[0] == 0 { -a[1] } else { a[1] };
                vec![a[0], j.rem_euclid(3)]
            }
            Family::Abelian(_) => a.iter().map(|x| -x).collect(),
            Family::Free(_) => a.iter().rev().map(|l| -l).collect(),
            Family::Klein => {
                let n = if a[0].rem_euclid(2) == 0 { -a[1] } else { a[1] };
                vec![-a[0], n]
            }
            Family::Heisenberg => vec![-a[0], -a[1], -a[2] - a[0] * a[1]],
        };
        self.element(coords)
    }

    /// `a^g = g a g^-1`.
    pub fn conjugate(&self, a: &GroupElement, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        self.check(g)?;
        Ok(self.conj_unchecked(a, g))
    }

    pub(crate) fn conj_unchecked(&self, a: &GroupElement, g: &GroupElement) -> GroupElement {
        let ga = self.mul_unchecked(g, a);
        self.mul_unchecked(&ga, &self.inv_unchecked(g))
    }

    /// `g^n` for any integer `n`.
    pub fn pow(&self, g: &GroupElement, n: i64) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        let base = if n < 0 { self.inv_unchecked(g) } else { g.clone() };
        let mut acc = self.identity();
        for _ in 0..n.unsigned_abs() {
            acc = self.mul_unchecked(&acc, &base);
        }
        Ok(acc)
    }

    /// The family norm before symmetrization.
    pub fn norm(&self, g: &GroupElement) -> Result<u64, GroupError> {
        self.check(g)?;
        Ok(self.raw_norm(g))
    }

    fn raw_norm(&self, g: &GroupElement) -> u64 {
        let a = &g.coords;
        match self.family {
            Family::Trivial => 0,
            Family::Cyclic(n) => {
                let k = a[0] as u64;
                k.min(u64::from(n) - k)
            }
            Family::Sym3 => sym3_word_length(a[0], a[1]),
            Family::Free(_) => a.len() as u64,
            _ => a.iter().map(|c| c.unsigned_abs()).sum(),
        }
    }

    /// `min(norm(g), norm(g^-1))`; the norm that defines the balls.
    pub fn effective_norm(&self, g: &GroupElement) -> Result<u64, GroupError> {
        self.check(g)?;
        Ok(self.eff_norm_unchecked(g))
    }

    pub(crate) fn eff_norm_unchecked(&self, g: &GroupElement) -> u64 {
        self.raw_norm(g).min(self.raw_norm(&self.inv_unchecked(g)))
    }

    /// All elements of `B_r`, identity included, in canonical order.
    pub fn ball(&self, r: u32) -> Vec<GroupElement> {
        let r64 = i64::from(r);
        let mut raw: Vec<Vec<i64>> = Vec::new();
        match self.family {
            Family::Trivial => raw.push(vec![]),
            Family::Cyclic(n) => {
                let n = i64::from(n);
                raw.extend((0..n).filter(|&k| k.min(n - k) <= r64).map(|k| vec![k]));
            }
            Family::Sym3 => {
                for i in 0..2 {
                    for j in 0..3 {
                        if sym3_word_length(i, j) <= u64::from(r) {
                            raw.push(vec![i, j]);
                        }
                    }
                }
            }
            Family::Abelian(d) => l1_vectors(d as usize, r64, &mut raw),
            Family::Klein => l1_vectors(2, r64, &mut raw),
            Family::Heisenberg => l1_vectors(3, r64, &mut raw),
            Family::Free(k) => {
                raw.push(vec![]);
                let letters: Vec<i64> = (1..=i64::from(k)).flat_map(|l| [l, -l]).collect();
                let mut frontier = vec![Vec::<i64>::new()];
                for _ in 0..r {
                    let mut next = Vec::new();
                    for word in &frontier {
                        for &l in &letters {
                            if word.last() != Some(&-l) {
                                let mut w = word.clone();
                                w.push(l);
                                next.push(w);
                            }
                        }
                    }
                    raw.extend(next.iter().cloned());
                    frontier = next;
                }
            }
        }
        let mut set = BTreeSet::new();
        for coords in raw {
            let g = self.element(coords);
            set.insert(self.inv_unchecked(&g));
            set.insert(g);
        }
        set.into_iter().collect()
    }

    /// `true` iff `g` lies in `B_r`.
    pub fn in_ball(&self, g: &GroupElement, r: u32) -> bool {
        self.check(g).is_ok() && self.eff_norm_unchecked(g) <= u64::from(r)
    }

    /// Parses a word such as `x^2*y^-1`, `e1 e2^-3` or `1` and evaluates it.
    pub fn parse_element(&self, input: &str) -> Result<GroupElement, GroupError> {
        let err = |reason: String| GroupError::ParseElement {
            input: input.to_string(),
            reason,
        };
        let names = self.generator_names();
        let mut acc = self.identity();
        let mut any = false;
        for token in input.split(|c: char| c == '*' || c.is_whitespace()) {
            if token.is_empty() {
                continue;
            }
            any = true;
            if token == "1" {
                continue;
            }
            let (name, exp) = match token.split_once('^') {
                Some((name, exp)) => {
                    let exp: i64 = exp
                        .parse()
                        .map_err(|_| err(format!("bad exponent in `{token}`")))?;
                    (name, exp)
                }
                None => (token, 1),
            };
            let base = if let Some(pos) = names.iter().position(|n| n == name) {
                self.generators[pos].clone()
            } else if self.family == Family::Heisenberg && name == "z" {
                self.element(vec![0, 0, 1])
            } else {
                return Err(err(format!("unknown generator `{name}`")));
            };
            let factor = self.pow(&base, exp).expect("generator belongs to group");
            acc = self.mul_unchecked(&acc, &factor);
        }
        if !any {
            return Err(err("empty word".into()));
        }
        Ok(acc)
    }

    /// Canonical string of `g`: a normal-form word that [`parse_element`]
    /// maps back to `g`.
    ///
    /// [`parse_element`]: GroupCtx::parse_element
    pub fn format_element(&self, g: &GroupElement) -> String {
        if g.is_identity() {
            return "1".to_string();
        }
        let c = &g.coords;
        let mut factors: Vec<(String, i64)> = Vec::new();
        match self.family {
            Family::Trivial => {}
            Family::Cyclic(_) => factors.push(("a".into(), c[0])),
            Family::Sym3 => {
                factors.push(("s".into(), c[0]));
                factors.push(("t".into(), c[1]));
            }
            Family::Free(_) => {
                for &letter in c {
                    let name = free_letter_name(letter).to_string();
                    let step = letter.signum();
                    match factors.last_mut() {
                        Some((last, exp)) if *last == name => *exp += step,
                        _ => factors.push((name, step)),
                    }
                }
            }
            Family::Heisenberg => {
                factors.push(("x".into(), c[0]));
                factors.push(("y".into(), c[1]));
                factors.push(("z".into(), c[2]));
            }
            _ => {
                let names = self.generator_names();
                factors.extend(names.into_iter().zip(c.iter().copied()));
            }
        }
        factors
            .into_iter()
            .filter(|(_, e)| *e != 0)
            .map(|(name, e)| if e == 1 { name } else { format!("{name}^{e}") })
            .collect::<Vec<_>>()
            .join("*")
    }
}

fn l1_vectors(dim: usize, r: i64, out: &mut Vec<Vec<i64>>) {
    fn rec(prefix: &mut Vec<i64>, dim: usize, budget: i64, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for v in -budget..=budget {
            prefix.push(v);
            rec(prefix, dim, budget - v.abs(), out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(dim), dim, r, out);
}

/// Word length of `s^i t^j` over `{s, t, t^-1}`, by breadth-first search on
/// the six-element Cayley graph.
fn sym3_word_length(i: i64, j: i64) -> u64 {
    let ctx = GroupCtx {
        family: Family::Sym3,
        generators: Vec::new(),
    };
    let gens = [vec![1, 0], vec![0, 1], vec![0, 2]];
    let target = vec![i, j];
    let mut dist = std::collections::HashMap::new();
    let mut queue = VecDeque::new();
    dist.insert(vec![0, 0], 0u64);
    queue.push_back(vec![0i64, 0]);
    while let Some(cur) = queue.pop_front() {
        let d = dist[&cur];
        if cur == target {
            return d;
        }
        for g in &gens {
            let next = ctx
                .mul_unchecked(&ctx.element(cur.clone()), &ctx.element(g.clone()))
                .coords;
            if !dist.contains_key(&next) {
                dist.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    unreachable!("S3 Cayley graph is connected")
}
