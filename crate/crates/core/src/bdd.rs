//! Reduced ordered binary decision diagrams.
//!
//! A [`BddManager`] owns a hash-consed node table shared by any number of
//! roots. Variables are ordered by registration, optionally overridden by an
//! explicit label list given at construction. Nodes are never collected; a
//! manager lives for one solve.
//!
//! Algebraic model counting ([`BddManager::amc`]) treats the domain of the
//! weight map as the model universe: a variable skipped along an edge (or
//! above the root) contributes the factor `w(v) ⊕ w(v̄)`. The same pass with
//! `⊔`/`⊓` at selected variables gives the branch-and-bound bounds, see
//! [`BddManager::fold`].

use crate::error::{Error, Result};
use crate::semiring::Semiring;
use rustc_hash::FxHashMap;
use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

static NEXT_TAG: AtomicU32 = AtomicU32::new(1);

const FALSE: u32 = 0;
const TRUE: u32 = 1;
const TERMINAL: u32 = u32::MAX;

/// A registered variable. The index is dense in registration order; the
/// position in the variable order is tracked separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct VarId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: VarId,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: VarId, positive: bool) -> Self {
        Literal { var, positive }
    }
    pub fn pos(var: VarId) -> Self {
        Literal::new(var, true)
    }
    pub fn neg(var: VarId) -> Self {
        Literal::new(var, false)
    }
    pub fn negate(self) -> Self {
        Literal::new(self.var, !self.positive)
    }
}

/// Reference to a canonical node. Equal functions in one manager have equal
/// handles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BddHandle {
    node: u32,
    mgr: u32,
}

impl BddHandle {
    pub fn is_true(self) -> bool {
        self.node == TRUE
    }
    pub fn is_false(self) -> bool {
        self.node == FALSE
    }
    pub fn is_const(self) -> bool {
        self.node <= TRUE
    }
    /// Node index inside the owning manager.
    pub fn index(self) -> u32 {
        self.node
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Xor,
    Iff,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    var: u32,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Debug)]
struct VarInfo {
    label: String,
    rank: u64,
}

/// How [`BddManager::fold`] treats a variable of the weight map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// Sum the two cofactors (ordinary model counting).
    Sum,
    /// Join the two cofactors (upper bound over a branch variable).
    Join,
    /// Meet the two cofactors (lower bound over a branch variable).
    Meet,
    /// Outside the universe; must not occur in the diagram.
    Excluded,
}

/// Literal weights. Its domain is the model universe for counting.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap<S> {
    entries: BTreeMap<VarId, (S, S)>,
}

impl<S: Semiring> Default for WeightMap<S> {
    fn default() -> Self {
        WeightMap {
            entries: BTreeMap::new(),
        }
    }
}

impl<S: Semiring> WeightMap<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds weights for both literals of `var`. Re-adding identical weights is
    /// allowed; conflicting weights are an error.
    pub fn insert(&mut self, var: VarId, pos: S, neg: S) -> Result<()> {
        match self.entries.get(&var) {
            Some(&(p, n)) if p != pos || n != neg => {
                Err(Error::WeightConflict(format!("v{}", var.0)))
            }
            _ => {
                self.entries.insert(var, (pos, neg));
                Ok(())
            }
        }
    }

    pub fn get(&self, var: VarId) -> Option<(S, S)> {
        self.entries.get(&var).copied()
    }

    pub fn literal(&self, lit: Literal) -> Option<S> {
        self.get(lit.var)
            .map(|(p, n)| if lit.positive { p } else { n })
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.entries.contains_key(&var)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, S, S)> + '_ {
        self.entries.iter().map(|(&v, &(p, n))| (v, p, n))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Non-aliased union: shared variables must carry identical weights.
    pub fn union(&mut self, other: &WeightMap<S>) -> Result<()> {
        for (v, p, n) in other.iter() {
            self.insert(v, p, n)?;
        }
        Ok(())
    }
}

/// Counters exposed for instrumentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ManagerStats {
    pub nodes: usize,
    pub vars: usize,
    pub last_fold_visits: u64,
    pub last_fold_cache_hits: u64,
}

pub struct BddManager {
    tag: u32,
    nodes: Vec<Node>,
    unique: FxHashMap<(u32, u32, u32), u32>,
    apply_cache: FxHashMap<(BoolOp, u32, u32), u32>,
    not_cache: FxHashMap<u32, u32>,
    cond_cache: FxHashMap<(u32, u32, bool), u32>,
    vars: Vec<VarInfo>,
    labels: HashMap<String, VarId>,
    order: HashMap<String, u64>,
    fold_visits: Cell<u64>,
    fold_hits: Cell<u64>,
}

impl Default for BddManager {
    fn default() -> Self {
        Self::new()
    }
}

impl BddManager {
    pub fn new() -> Self {
        Self::with_order(Vec::new())
    }

    /// A manager whose variable order places the given labels first, in the
    /// given order; other variables follow in registration order.
    pub fn with_order(labels: Vec<String>) -> Self {
        let order = labels
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i as u64))
            .collect();
        BddManager {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            nodes: vec![
                Node {
                    var: TERMINAL,
                    lo: FALSE,
                    hi: FALSE,
                },
                Node {
                    var: TERMINAL,
                    lo: TRUE,
                    hi: TRUE,
                },
            ],
            unique: FxHashMap::default(),
            apply_cache: FxHashMap::default(),
            not_cache: FxHashMap::default(),
            cond_cache: FxHashMap::default(),
            vars: Vec::new(),
            labels: HashMap::new(),
            order,
            fold_visits: Cell::new(0),
            fold_hits: Cell::new(0),
        }
    }

    /// Registers a fresh variable. Labels are made unique by suffixing `#n`.
    pub fn new_var(&mut self, label: &str) -> VarId {
        let mut name = label.to_string();
        let mut n = 1;
        while self.labels.contains_key(&name) {
            n += 1;
            name = format!("{label}#{n}");
        }
        let id = VarId(self.vars.len() as u32);
        let rank = match self.order.get(&name) {
            Some(&p) => p,
            None => self.order.len() as u64 + id.0 as u64,
        };
        self.labels.insert(name.clone(), id);
        self.vars.push(VarInfo { label: name, rank });
        id
    }

    pub fn label(&self, var: VarId) -> &str {
        &self.vars[var.0 as usize].label
    }

    pub fn find_var(&self, label: &str) -> Option<VarId> {
        self.labels.get(label).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Position key of a variable in the order (smaller is closer to the root).
    pub fn rank(&self, var: VarId) -> u64 {
        self.vars[var.0 as usize].rank
    }

    /// All variables sorted by their position in the order.
    pub fn order(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = (0..self.vars.len() as u32).map(VarId).collect();
        v.sort_by_key(|&x| self.rank(x));
        v
    }

    pub fn stats(&self) -> ManagerStats {
        ManagerStats {
            nodes: self.nodes.len(),
            vars: self.vars.len(),
            last_fold_visits: self.fold_visits.get(),
            last_fold_cache_hits: self.fold_hits.get(),
        }
    }

    /// Number of nodes ever created, terminals included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn h(&self, node: u32) -> BddHandle {
        BddHandle {
            node,
            mgr: self.tag,
        }
    }

    fn check(&self, a: BddHandle) -> Result<()> {
        if a.mgr == self.tag {
            Ok(())
        } else {
            Err(Error::ManagerMismatch)
        }
    }

    fn own(&self, a: BddHandle) -> u32 {
        assert_eq!(a.mgr, self.tag, "BDD handle used with a foreign manager");
        a.node
    }

    fn node_rank(&self, n: u32) -> u64 {
        let var = self.nodes[n as usize].var;
        if var == TERMINAL {
            u64::MAX
        } else {
            self.vars[var as usize].rank
        }
    }

    fn mk(&mut self, var: u32, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        if let Some(&n) = self.unique.get(&(var, lo, hi)) {
            return n;
        }
        let n = self.nodes.len() as u32;
        self.nodes.push(Node { var, lo, hi });
        self.unique.insert((var, lo, hi), n);
        n
    }

    pub fn mk_true(&self) -> BddHandle {
        self.h(TRUE)
    }

    pub fn mk_false(&self) -> BddHandle {
        self.h(FALSE)
    }

    pub fn constant(&self, b: bool) -> BddHandle {
        if b {
            self.mk_true()
        } else {
            self.mk_false()
        }
    }

    pub fn mk_var(&mut self, var: VarId) -> Result<BddHandle> {
        if var.0 as usize >= self.vars.len() {
            return Err(Error::UnknownVariable(var.0));
        }
        let n = self.mk(var.0, FALSE, TRUE);
        Ok(self.h(n))
    }

    /// Single-variable diagram for a registered variable.
    pub fn var(&mut self, var: VarId) -> BddHandle {
        self.mk_var(var).expect("unregistered variable")
    }

    pub fn literal(&mut self, lit: Literal) -> BddHandle {
        let v = self.var(lit.var);
        if lit.positive {
            v
        } else {
            self.not(v)
        }
    }

    pub fn apply(&mut self, op: BoolOp, a: BddHandle, b: BddHandle) -> Result<BddHandle> {
        self.check(a)?;
        self.check(b)?;
        let n = self.apply_rec(op, a.node, b.node);
        Ok(self.h(n))
    }

    fn apply_rec(&mut self, op: BoolOp, a: u32, b: u32) -> u32 {
        match op {
            BoolOp::And => {
                if a == FALSE || b == FALSE {
                    return FALSE;
                }
                if a == TRUE || a == b {
                    return b;
                }
                if b == TRUE {
                    return a;
                }
            }
            BoolOp::Or => {
                if a == TRUE || b == TRUE {
                    return TRUE;
                }
                if a == FALSE || a == b {
                    return b;
                }
                if b == FALSE {
                    return a;
                }
            }
            BoolOp::Xor => {
                if a == b {
                    return FALSE;
                }
                if a == FALSE {
                    return b;
                }
                if b == FALSE {
                    return a;
                }
                if a == TRUE {
                    return self.not_rec(b);
                }
                if b == TRUE {
                    return self.not_rec(a);
                }
            }
            BoolOp::Iff => {
                if a == b {
                    return TRUE;
                }
                if a == TRUE {
                    return b;
                }
                if b == TRUE {
                    return a;
                }
                if a == FALSE {
                    return self.not_rec(b);
                }
                if b == FALSE {
                    return self.not_rec(a);
                }
            }
        }
        let key = (op, a.min(b), a.max(b));
        if let Some(&r) = self.apply_cache.get(&key) {
            return r;
        }
        let (ra, rb) = (self.node_rank(a), self.node_rank(b));
        let na = self.nodes[a as usize];
        let nb = self.nodes[b as usize];
        let (var, a0, a1, b0, b1) = if ra == rb {
            (na.var, na.lo, na.hi, nb.lo, nb.hi)
        } else if ra < rb {
            (na.var, na.lo, na.hi, b, b)
        } else {
            (nb.var, a, a, nb.lo, nb.hi)
        };
        let lo = self.apply_rec(op, a0, b0);
        let hi = self.apply_rec(op, a1, b1);
        let r = self.mk(var, lo, hi);
        self.apply_cache.insert(key, r);
        r
    }

    fn not_rec(&mut self, a: u32) -> u32 {
        if a == TRUE {
            return FALSE;
        }
        if a == FALSE {
            return TRUE;
        }
        if let Some(&r) = self.not_cache.get(&a) {
            return r;
        }
        let n = self.nodes[a as usize];
        let lo = self.not_rec(n.lo);
        let hi = self.not_rec(n.hi);
        let r = self.mk(n.var, lo, hi);
        self.not_cache.insert(a, r);
        self.not_cache.insert(r, a);
        r
    }

    pub fn not(&mut self, a: BddHandle) -> BddHandle {
        let n = self.own(a);
        let r = self.not_rec(n);
        self.h(r)
    }

    pub fn and(&mut self, a: BddHandle, b: BddHandle) -> BddHandle {
        self.apply(BoolOp::And, a, b)
            .expect("BDD handle used with a foreign manager")
    }

    pub fn or(&mut self, a: BddHandle, b: BddHandle) -> BddHandle {
        self.apply(BoolOp::Or, a, b)
            .expect("BDD handle used with a foreign manager")
    }

    pub fn xor(&mut self, a: BddHandle, b: BddHandle) -> BddHandle {
        self.apply(BoolOp::Xor, a, b)
            .expect("BDD handle used with a foreign manager")
    }

    pub fn iff(&mut self, a: BddHandle, b: BddHandle) -> BddHandle {
        self.apply(BoolOp::Iff, a, b)
            .expect("BDD handle used with a foreign manager")
    }

    /// `(g ∧ t) ∨ (¬g ∧ e)`.
    pub fn ite(&mut self, g: BddHandle, t: BddHandle, e: BddHandle) -> BddHandle {
        let gt = self.and(g, t);
        let ng = self.not(g);
        let ge = self.and(ng, e);
        self.or(gt, ge)
    }

    pub fn and_all(&mut self, items: impl IntoIterator<Item = BddHandle>) -> BddHandle {
        let mut acc = self.mk_true();
        for x in items {
            acc = self.and(acc, x);
        }
        acc
    }

    pub fn or_all(&mut self, items: impl IntoIterator<Item = BddHandle>) -> BddHandle {
        let mut acc = self.mk_false();
        for x in items {
            acc = self.or(acc, x);
        }
        acc
    }

    /// Conjunction of literals.
    pub fn cube(&mut self, lits: impl IntoIterator<Item = Literal>) -> BddHandle {
        let hs: Vec<BddHandle> = lits.into_iter().map(|l| self.literal(l)).collect();
        self.and_all(hs)
    }

    /// `a|_ℓ`: the cofactor with `ℓ` fixed true.
    pub fn condition(&mut self, a: BddHandle, lit: Literal) -> BddHandle {
        let n = self.own(a);
        let r = self.cond_rec(n, lit.var.0, lit.positive, self.rank(lit.var));
        self.h(r)
    }

    pub fn condition_all(
        &mut self,
        a: BddHandle,
        lits: impl IntoIterator<Item = Literal>,
    ) -> BddHandle {
        let mut acc = a;
        for l in lits {
            acc = self.condition(acc, l);
        }
        acc
    }

    fn cond_rec(&mut self, a: u32, var: u32, val: bool, rank: u64) -> u32 {
        let r_a = self.node_rank(a);
        if r_a > rank {
            return a;
        }
        let n = self.nodes[a as usize];
        if n.var == var {
            return if val { n.hi } else { n.lo };
        }
        if let Some(&r) = self.cond_cache.get(&(a, var, val)) {
            return r;
        }
        let lo = self.cond_rec(n.lo, var, val, rank);
        let hi = self.cond_rec(n.hi, var, val, rank);
        let r = self.mk(n.var, lo, hi);
        self.cond_cache.insert((a, var, val), r);
        r
    }

    /// Exactly one of `vars` is true.
    pub fn exactly_one(&mut self, vars: &[VarId]) -> Result<BddHandle> {
        if vars.is_empty() {
            return Err(Error::EmptyExactlyOne);
        }
        let mut sorted: Vec<VarId> = vars.to_vec();
        sorted.sort_by_key(|&v| self.rank(v));
        sorted.dedup();
        if sorted.len() != vars.len() {
            return Err(Error::Invalid("exactly-one over repeated variables".into()));
        }
        for &v in &sorted {
            if v.0 as usize >= self.vars.len() {
                return Err(Error::UnknownVariable(v.0));
            }
        }
        let (mut none, mut one) = (TRUE, FALSE);
        for &v in sorted.iter().rev() {
            let new_one = self.mk(v.0, one, none);
            let new_none = self.mk(v.0, none, FALSE);
            one = new_one;
            none = new_none;
        }
        Ok(self.h(one))
    }

    /// Evaluates the function under an assignment.
    pub fn eval(&self, root: BddHandle, assign: &dyn Fn(VarId) -> bool) -> bool {
        let mut n = self.own(root);
        while n > TRUE {
            let node = self.nodes[n as usize];
            n = if assign(VarId(node.var)) {
                node.hi
            } else {
                node.lo
            };
        }
        n == TRUE
    }

    /// Variables tested by the diagram.
    pub fn support(&self, root: BddHandle) -> BTreeSet<VarId> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self.own(root)];
        while let Some(n) = stack.pop() {
            if n <= TRUE || !seen.insert(n) {
                continue;
            }
            let node = self.nodes[n as usize];
            out.insert(VarId(node.var));
            stack.push(node.lo);
            stack.push(node.hi);
        }
        out
    }

    /// Number of internal nodes reachable from the roots.
    pub fn size(&self, roots: &[BddHandle]) -> usize {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<u32> = roots.iter().map(|&r| self.own(r)).collect();
        while let Some(n) = stack.pop() {
            if n <= TRUE || !seen.insert(n) {
                continue;
            }
            let node = self.nodes[n as usize];
            stack.push(node.lo);
            stack.push(node.hi);
        }
        seen.len()
    }

    /// Algebraic model count over the universe `dom(weights)`.
    pub fn amc<S: Semiring>(&self, root: BddHandle, weights: &WeightMap<S>) -> Result<S> {
        self.fold(root, weights, &|_| Combine::Sum)
    }

    /// One memoized bottom-up pass combining the cofactors of each variable
    /// as `role` dictates. Variables marked [`Combine::Excluded`] are dropped
    /// from the universe and must not appear in `root`.
    pub fn fold<S: Semiring>(
        &self,
        root: BddHandle,
        weights: &WeightMap<S>,
        role: &dyn Fn(VarId) -> Combine,
    ) -> Result<S> {
        let root = self.own(root);
        self.fold_visits.set(0);
        self.fold_hits.set(0);
        struct Slot<S> {
            pos: S,
            neg: S,
            role: Combine,
        }
        let mut universe: Vec<(u64, VarId)> = Vec::new();
        let mut slots: Vec<Slot<S>> = Vec::new();
        for (v, p, n) in weights.iter() {
            let r = role(v);
            if r != Combine::Excluded && (v.0 as usize) < self.vars.len() {
                universe.push((self.rank(v), v));
                slots.push(Slot {
                    pos: p,
                    neg: n,
                    role: r,
                });
            }
        }
        let mut idx: Vec<usize> = (0..universe.len()).collect();
        idx.sort_by_key(|&i| universe[i].0);
        let mut position: HashMap<u32, usize> = HashMap::with_capacity(idx.len());
        let mut ordered: Vec<Slot<S>> = Vec::with_capacity(idx.len());
        let mut slot_opt: Vec<Option<Slot<S>>> = slots.into_iter().map(Some).collect();
        for (p, &i) in idx.iter().enumerate() {
            position.insert(universe[i].1 .0, p);
            ordered.push(slot_opt[i].take().expect("slot used once"));
        }
        let len = ordered.len();
        let gaps: Vec<S> = ordered
            .iter()
            .map(|s| match s.role {
                Combine::Sum | Combine::Excluded => s.pos.add(s.neg),
                Combine::Join => s.pos.join(s.neg),
                Combine::Meet => s.pos.meet(s.neg),
            })
            .collect();
        let mut suffix = vec![S::one(); len + 1];
        for i in (0..len).rev() {
            suffix[i] = gaps[i].mul(suffix[i + 1]);
        }
        let gap = |a: usize, b: usize| -> S {
            if b >= len {
                return suffix[a.min(len)];
            }
            let mut acc = S::one();
            for g in &gaps[a..b] {
                acc = acc.mul(*g);
            }
            acc
        };
        let pos_of = |n: u32| -> Result<usize> {
            if n <= TRUE {
                return Ok(len);
            }
            let var = self.nodes[n as usize].var;
            position
                .get(&var)
                .copied()
                .ok_or_else(|| Error::Unweighted(self.vars[var as usize].label.clone()))
        };
        if root == FALSE {
            return Ok(S::zero());
        }
        // iterative post-order to keep deep diagrams off the call stack
        let mut memo: FxHashMap<u32, S> = FxHashMap::default();
        let mut stack: Vec<(u32, bool)> = vec![(root, false)];
        while let Some((n, expanded)) = stack.pop() {
            if n <= TRUE {
                continue;
            }
            if !expanded {
                if memo.contains_key(&n) {
                    self.fold_hits.set(self.fold_hits.get() + 1);
                    continue;
                }
                stack.push((n, true));
                let node = self.nodes[n as usize];
                stack.push((node.lo, false));
                stack.push((node.hi, false));
                continue;
            }
            if memo.contains_key(&n) {
                continue;
            }
            self.fold_visits.set(self.fold_visits.get() + 1);
            let node = self.nodes[n as usize];
            let p = pos_of(n)?;
            let child = |c: u32| -> Result<S> {
                if c == FALSE {
                    return Ok(S::zero());
                }
                let val = if c == TRUE { S::one() } else { memo[&c] };
                Ok(gap(p + 1, pos_of(c)?).mul(val))
            };
            let hi = child(node.hi)?;
            let lo = child(node.lo)?;
            let slot = &ordered[p];
            let (h, l) = (slot.pos.mul(hi), slot.neg.mul(lo));
            let v = match slot.role {
                Combine::Sum | Combine::Excluded => h.add(l),
                Combine::Join => h.join(l),
                Combine::Meet => h.meet(l),
            };
            memo.insert(n, v);
        }
        let top = pos_of(root)?;
        let val = if root == TRUE { S::one() } else { memo[&root] };
        Ok(gap(0, top).mul(val))
    }

    /// Interval variant of [`fold`](Self::fold): returns `(lo, hi)` enclosing
    /// the count of every way of fixing the variables whose role is
    /// [`Combine::Join`] or [`Combine::Meet`] (the two are treated alike).
    /// Free of branch variables the interval collapses to the model count.
    pub fn fold_box<S: Semiring>(
        &self,
        root: BddHandle,
        weights: &WeightMap<S>,
        role: &dyn Fn(VarId) -> Combine,
    ) -> Result<(S, S)> {
        let root = self.own(root);
        self.fold_visits.set(0);
        self.fold_hits.set(0);
        let mut ordered: Vec<(u64, VarId, S, S, bool)> = weights
            .iter()
            .filter(|&(v, _, _)| (v.0 as usize) < self.vars.len())
            .filter_map(|(v, p, n)| match role(v) {
                Combine::Excluded => None,
                Combine::Sum => Some((self.rank(v), v, p, n, false)),
                Combine::Join | Combine::Meet => Some((self.rank(v), v, p, n, true)),
            })
            .collect();
        ordered.sort_by_key(|s| s.0);
        let position: HashMap<u32, usize> = ordered
            .iter()
            .enumerate()
            .map(|(i, s)| (s.1 .0, i))
            .collect();
        let len = ordered.len();
        let gaps: Vec<(S, S)> = ordered
            .iter()
            .map(|&(_, _, p, n, branch)| {
                if branch {
                    (p.meet(n), p.join(n))
                } else {
                    (p.add(n), p.add(n))
                }
            })
            .collect();
        let one = (S::one(), S::one());
        let gap = |a: usize, b: usize| -> (S, S) {
            gaps[a.min(len)..b.min(len)]
                .iter()
                .fold(one, |acc, &g| S::mul_box(g, acc))
        };
        let pos_of = |n: u32| -> Result<usize> {
            if n <= TRUE {
                return Ok(len);
            }
            let var = self.nodes[n as usize].var;
            position
                .get(&var)
                .copied()
                .ok_or_else(|| Error::Unweighted(self.vars[var as usize].label.clone()))
        };
        if root == FALSE {
            return Ok((S::zero(), S::zero()));
        }
        let mut memo: FxHashMap<u32, (S, S)> = FxHashMap::default();
        let mut stack: Vec<(u32, bool)> = vec![(root, false)];
        while let Some((n, expanded)) = stack.pop() {
            if n <= TRUE {
                continue;
            }
            if !expanded {
                if memo.contains_key(&n) {
                    self.fold_hits.set(self.fold_hits.get() + 1);
                    continue;
                }
                stack.push((n, true));
                let node = self.nodes[n as usize];
                stack.push((node.lo, false));
                stack.push((node.hi, false));
                continue;
            }
            if memo.contains_key(&n) {
                continue;
            }
            self.fold_visits.set(self.fold_visits.get() + 1);
            let node = self.nodes[n as usize];
            let p = pos_of(n)?;
            let child = |c: u32| -> Result<(S, S)> {
                if c == FALSE {
                    return Ok((S::zero(), S::zero()));
                }
                let val = if c == TRUE { one } else { memo[&c] };
                Ok(S::mul_box(gap(p + 1, pos_of(c)?), val))
            };
            let (_, _, wp, wn, branch) = ordered[p];
            let h = S::mul_box((wp, wp), child(node.hi)?);
            let l = S::mul_box((wn, wn), child(node.lo)?);
            let v = if branch {
                (h.0.meet(l.0), h.1.join(l.1))
            } else {
                (h.0.add(l.0), h.1.add(l.1))
            };
            memo.insert(n, v);
        }
        let val = if root == TRUE { one } else { memo[&root] };
        Ok(S::mul_box(gap(0, pos_of(root)?), val))
    }

    /// All satisfying assignments over `universe`, each listed in the order of
    /// `universe`.
    pub fn enumerate_models(&self, root: BddHandle, universe: &[VarId]) -> Result<Vec<Vec<bool>>> {
        let support = self.support(root);
        for v in &support {
            if !universe.contains(v) {
                return Err(Error::Invalid(format!(
                    "universe does not cover {}",
                    self.label(*v)
                )));
            }
        }
        let mut order: Vec<usize> = (0..universe.len()).collect();
        order.sort_by_key(|&i| self.rank(universe[i]));
        let mut out = Vec::new();
        let mut current = vec![false; universe.len()];
        self.models_rec(self.own(root), 0, &order, universe, &mut current, &mut out);
        Ok(out)
    }

    fn models_rec(
        &self,
        n: u32,
        depth: usize,
        order: &[usize],
        universe: &[VarId],
        current: &mut Vec<bool>,
        out: &mut Vec<Vec<bool>>,
    ) {
        if n == FALSE {
            return;
        }
        if depth == order.len() {
            if n == TRUE {
                out.push(current.clone());
            }
            return;
        }
        let slot = order[depth];
        let var = universe[slot];
        let node = self.nodes[n as usize];
        for val in [false, true] {
            current[slot] = val;
            let next = if n > TRUE && node.var == var.0 {
                if val {
                    node.hi
                } else {
                    node.lo
                }
            } else {
                n
            };
            self.models_rec(next, depth + 1, order, universe, current, out);
        }
        current[slot] = false;
    }

    /// GraphViz rendering: solid edges are high branches, dashed edges low
    /// branches, terminals are boxes.
    pub fn to_dot(&self, roots: &[(&str, BddHandle)]) -> String {
        let mut s = String::from("digraph bdd {\n  node [shape=circle];\n");
        s.push_str("  n0 [shape=box,label=\"0\"];\n  n1 [shape=box,label=\"1\"];\n");
        let mut seen = BTreeSet::new();
        let mut stack: Vec<u32> = roots.iter().map(|(_, r)| self.own(*r)).collect();
        while let Some(n) = stack.pop() {
            if n <= TRUE || !seen.insert(n) {
                continue;
            }
            let node = self.nodes[n as usize];
            let label = self.vars[node.var as usize]
                .label
                .replace('\\', "\\\\")
                .replace('"', "\\\"");
            let _ = writeln!(s, "  n{n} [label=\"{label}\"];");
            let _ = writeln!(s, "  n{n} -> n{} [style=solid];", node.hi);
            let _ = writeln!(s, "  n{n} -> n{} [style=dashed];", node.lo);
            stack.push(node.lo);
            stack.push(node.hi);
        }
        for (i, (name, r)) in roots.iter().enumerate() {
            let name = name.replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(s, "  r{i} [shape=plaintext,label=\"{name}\"];");
            let _ = writeln!(s, "  r{i} -> n{};", r.node);
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::{ExpectationValue, RealValue};

    fn ev(p: f64, u: f64) -> ExpectationValue {
        ExpectationValue::new(p, u)
    }

    #[test]
    fn hash_consing_and_constants() {
        let mut m = BddManager::new();
        let r = m.new_var("r");
        let a = m.var(r);
        let b = m.var(r);
        assert_eq!(a, b);
        let t = m.mk_true();
        assert_eq!(m.not(t), m.mk_false());
        let na = m.not(a);
        assert!(m.and(a, na).is_false());
        assert_eq!(m.iff(a, t), a);
    }

    #[test]
    fn unknown_variable_is_an_error() {
        let mut m = BddManager::new();
        assert_eq!(m.mk_var(VarId(3)), Err(Error::UnknownVariable(3)));
    }

    #[test]
    fn foreign_handles_are_rejected() {
        let mut m1 = BddManager::new();
        let m2 = BddManager::new();
        let t = m2.mk_true();
        let f = m1.mk_false();
        assert_eq!(m1.apply(BoolOp::And, t, f), Err(Error::ManagerMismatch));
    }

    #[test]
    fn condition_drops_variable() {
        let mut m = BddManager::new();
        let x = m.new_var("x");
        let y = m.new_var("y");
        let (bx, by) = (m.var(x), m.var(y));
        let f = m.xor(bx, by);
        let g = m.condition(f, Literal::pos(x));
        assert_eq!(g, m.not(by));
        assert!(!m.support(g).contains(&x));
        assert_eq!(m.condition(g, Literal::pos(x)), g);
    }

    #[test]
    fn exactly_one_models() {
        let mut m = BddManager::new();
        let vs: Vec<VarId> = (0..5).map(|i| m.new_var(&format!("v{i}"))).collect();
        let e = m.exactly_one(&vs).unwrap();
        assert_eq!(m.enumerate_models(e, &vs).unwrap().len(), 5);
        let single = m.exactly_one(&vs[..1]).unwrap();
        assert_eq!(single, m.var(vs[0]));
        assert_eq!(m.exactly_one(&[]), Err(Error::EmptyExactlyOne));
    }

    #[test]
    fn amc_gap_factors() {
        // amc(⊤) over {x, r} = ((0.3,0) ⊕ (0.7,0)) ⊗ ((1,5) ⊕ (1,0)) = (2, 5)
        let mut m = BddManager::new();
        let x = m.new_var("x");
        let r = m.new_var("r");
        let mut w = WeightMap::new();
        w.insert(x, ev(0.3, 0.0), ev(0.7, 0.0)).unwrap();
        w.insert(r, ev(1.0, 5.0), ev(1.0, 0.0)).unwrap();
        let t = m.mk_true();
        let v = m.amc(t, &w).unwrap();
        assert!((v.prob - 2.0).abs() < 1e-12 && (v.util - 5.0).abs() < 1e-12);
        let f = m.mk_false();
        assert_eq!(m.amc(f, &w).unwrap(), ExpectationValue::zero());
    }

    #[test]
    fn amc_rejects_unweighted() {
        let mut m = BddManager::new();
        let x = m.new_var("x");
        let bx = m.var(x);
        let w: WeightMap<RealValue> = WeightMap::new();
        assert!(matches!(m.amc(bx, &w), Err(Error::Unweighted(_))));
    }

    #[test]
    fn fold_visits_each_node_once() {
        let mut m = BddManager::new();
        let vs: Vec<VarId> = (0..8).map(|i| m.new_var(&format!("v{i}"))).collect();
        let mut w = WeightMap::new();
        for &v in &vs {
            w.insert(v, RealValue(0.5), RealValue(0.5)).unwrap();
        }
        let mut f = m.mk_false();
        for pair in vs.chunks(2) {
            let (a, b) = (m.var(pair[0]), m.var(pair[1]));
            let x = m.xor(a, b);
            f = m.xor(f, x);
        }
        let v = m.amc(f, &w).unwrap();
        assert!((v.0 - 0.5).abs() < 1e-12);
        assert_eq!(m.stats().last_fold_visits as usize, m.size(&[f]));
    }

    #[test]
    fn weight_conflicts() {
        let mut w = WeightMap::new();
        w.insert(VarId(0), RealValue(0.5), RealValue(0.5)).unwrap();
        assert!(w.insert(VarId(0), RealValue(0.5), RealValue(0.5)).is_ok());
        assert!(w.insert(VarId(0), RealValue(0.4), RealValue(0.6)).is_err());
    }

    #[test]
    fn explicit_order_override() {
        let mut m = BddManager::with_order(vec!["b".into(), "a".into()]);
        let a = m.new_var("a");
        let b = m.new_var("b");
        let c = m.new_var("c");
        assert_eq!(m.order(), vec![b, a, c]);
        let (ba, bb) = (m.var(a), m.var(b));
        let f = m.and(ba, bb);
        assert!(m.eval(f, &|_| true));
        assert_eq!(
            m.enumerate_models(f, &[a, b]).unwrap(),
            vec![vec![true, true]]
        );
    }

    #[test]
    fn dot_output_shape() {
        let mut m = BddManager::new();
        let x = m.new_var("x");
        let bx = m.var(x);
        let dot = m.to_dot(&[("f", bx)]);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("style=dashed") && dot.contains("style=solid"));
        assert!(dot.contains("shape=box"));
        assert!(dot.trim_end().ends_with('}'));
    }
}
