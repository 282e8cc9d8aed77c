//! The branch-and-bound IR and its solver.
//!
//! A [`Bbir`] is a set of formulas sharing one manager, a set of branch
//! variables `X`, and a literal weight map. [`ub`]/[`lb`] compute the
//! single-pass bounds; [`bb`] runs the pruned depth-first search against an
//! [`Objective`] (expected utility in [`MeuObjective`], marginal MAP in
//! [`MmapObjective`]).

use crate::bdd::{BddHandle, BddManager, Combine, Literal, VarId, WeightMap};
use crate::error::{Error, Result};
use crate::semiring::{ExpectationValue, RealValue, Semiring};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

/// A partial assignment to branch variables.
pub type PartialPolicy = BTreeMap<VarId, bool>;
/// A total assignment to branch variables.
pub type Policy = BTreeMap<VarId, bool>;

/// Tolerance below which two marginal-MAP scores count as tied.
pub const MMAP_TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Bbir<S> {
    pub formulas: Vec<BddHandle>,
    /// Branch variables in registration order.
    pub branch_vars: Vec<VarId>,
    pub weights: WeightMap<S>,
    /// One-hot groups among the branch variables; a policy must set exactly
    /// one member of each group.
    pub groups: Vec<Vec<VarId>>,
}

impl<S: Semiring> Bbir<S> {
    pub fn new(formulas: Vec<BddHandle>, branch_vars: Vec<VarId>, weights: WeightMap<S>) -> Self {
        Bbir {
            formulas,
            branch_vars,
            weights,
            groups: Vec::new(),
        }
    }

    pub fn with_groups(mut self, groups: Vec<Vec<VarId>>) -> Self {
        self.groups = groups;
        self
    }

    /// Whether a total policy satisfies every one-hot group.
    pub fn valid(&self, policy: &Policy) -> bool {
        self.groups.iter().all(|g| {
            g.iter()
                .filter(|v| policy.get(v).copied().unwrap_or(false))
                .count()
                == 1
        })
    }

    fn weight_product(&self, policy: &PartialPolicy) -> Result<S> {
        let mut acc = S::one();
        for (&v, &b) in policy {
            let w = self
                .weights
                .literal(Literal::new(v, b))
                .ok_or_else(|| Error::Unweighted(format!("v{}", v.0)))?;
            acc = acc.mul(w);
        }
        Ok(acc)
    }

    fn check_partial(&self, partial: &PartialPolicy) -> Result<()> {
        for v in partial.keys() {
            if !self.branch_vars.contains(v) {
                return Err(Error::NotBranchVariable(format!("v{}", v.0)));
            }
        }
        Ok(())
    }
}

/// Which bound to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    Upper,
    Lower,
}

/// `h(φ)` on an already-conditioned formula: assigned and excluded variables
/// leave the universe, unassigned branch variables are joined (or met).
/// Returns the enclosing interval; `kind` picks its corner.
fn h<S: Semiring>(
    mgr: &BddManager,
    bbir: &Bbir<S>,
    conditioned: BddHandle,
    assigned: &PartialPolicy,
    excluded: &BTreeSet<VarId>,
    kind: BoundKind,
) -> Result<(S, S)> {
    let branch: BTreeSet<VarId> = bbir.branch_vars.iter().copied().collect();
    let role = |v: VarId| {
        if assigned.contains_key(&v) || excluded.contains(&v) {
            Combine::Excluded
        } else if branch.contains(&v) {
            match kind {
                BoundKind::Upper => Combine::Join,
                BoundKind::Lower => Combine::Meet,
            }
        } else {
            Combine::Sum
        }
    };
    mgr.fold_box(conditioned, &bbir.weights, &role)
}

fn bound_conditioned<S: Semiring>(
    mgr: &BddManager,
    bbir: &Bbir<S>,
    conditioned: BddHandle,
    partial: &PartialPolicy,
    excluded: &BTreeSet<VarId>,
    kind: BoundKind,
) -> Result<S> {
    let pm = bbir.weight_product(partial)?;
    let (lo, hi) = S::mul_box(
        (pm, pm),
        h(mgr, bbir, conditioned, partial, excluded, kind)?,
    );
    Ok(match kind {
        BoundKind::Upper => hi,
        BoundKind::Lower => lo,
    })
}

fn lits(partial: &PartialPolicy) -> Vec<Literal> {
    partial.iter().map(|(&v, &b)| Literal::new(v, b)).collect()
}

/// Upper bound `pm ⊗ h(φ|P)` over every completion of `partial`.
pub fn ub<S: Semiring>(
    mgr: &mut BddManager,
    bbir: &Bbir<S>,
    formula: BddHandle,
    partial: &PartialPolicy,
) -> Result<S> {
    bbir.check_partial(partial)?;
    let c = mgr.condition_all(formula, lits(partial));
    bound_conditioned(mgr, bbir, c, partial, &BTreeSet::new(), BoundKind::Upper)
}

/// Lower bound, the dual of [`ub`].
pub fn lb<S: Semiring>(
    mgr: &mut BddManager,
    bbir: &Bbir<S>,
    formula: BddHandle,
    partial: &PartialPolicy,
) -> Result<S> {
    bbir.check_partial(partial)?;
    let c = mgr.condition_all(formula, lits(partial));
    bound_conditioned(mgr, bbir, c, partial, &BTreeSet::new(), BoundKind::Lower)
}

/// An optimization objective over a [`Bbir`].
pub trait Objective {
    type S: Semiring;

    /// Formulas conditioned along the search, prior applied.
    fn initial_formulas(
        &self,
        mgr: &mut BddManager,
        bbir: &Bbir<Self::S>,
    ) -> Result<Vec<BddHandle>>;

    /// Upper bound on the objective of every completion of `partial`, given
    /// formulas already conditioned on it.
    fn bound(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<Self::S>,
        formulas: &[BddHandle],
        partial: &PartialPolicy,
    ) -> Result<Self::S>;

    /// Exact objective at a total policy, given conditioned formulas.
    fn value(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<Self::S>,
        formulas: &[BddHandle],
        total: &Policy,
    ) -> Result<Self::S>;

    /// Whether `candidate` replaces `incumbent`.
    fn improves(&self, candidate: Self::S, incumbent: Self::S) -> bool {
        !candidate.total_le(incumbent)
    }

    /// Literal values tried at each branch, in order.
    fn literal_order(&self) -> [bool; 2] {
        [true, false]
    }
}

/// Expected utility: `AMC(φ∧γ|π)⊗w(π) / AMC(γ|π)⊗w(π)` projected to its
/// probability for the denominator.
#[derive(Clone, Debug)]
pub struct MeuObjective {
    pub phi: BddHandle,
    pub gamma: BddHandle,
}

impl Objective for MeuObjective {
    type S = ExpectationValue;

    fn initial_formulas(
        &self,
        mgr: &mut BddManager,
        _: &Bbir<ExpectationValue>,
    ) -> Result<Vec<BddHandle>> {
        let pg = mgr.and(self.phi, self.gamma);
        Ok(vec![pg, self.gamma])
    }

    fn bound(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<ExpectationValue>,
        f: &[BddHandle],
        partial: &PartialPolicy,
    ) -> Result<ExpectationValue> {
        let none = BTreeSet::new();
        let t = bound_conditioned(mgr, bbir, f[0], partial, &none, BoundKind::Upper)?;
        let x = bound_conditioned(mgr, bbir, f[1], partial, &none, BoundKind::Lower)?.prob;
        let y = bound_conditioned(mgr, bbir, f[1], partial, &none, BoundKind::Upper)?.prob;
        Ok(meu_bound(t, x, y))
    }

    fn value(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<ExpectationValue>,
        f: &[BddHandle],
        total: &Policy,
    ) -> Result<ExpectationValue> {
        if !bbir.valid(total) {
            return Ok(ExpectationValue::bottom());
        }
        let none = BTreeSet::new();
        let num = bound_conditioned(mgr, bbir, f[0], total, &none, BoundKind::Upper)?;
        let den = bound_conditioned(mgr, bbir, f[1], total, &none, BoundKind::Upper)?;
        Ok(num.scalar_div(den.prob))
    }
}

/// Sound upper bound on `t'/k` for any `t' ⊑ t` and `k ∈ [x, y]`.
///
/// When `x > 0` this is `(t/x) ⊔ (t/y)` with the probability coordinate
/// clamped to 1 (the numerator formula implies the denominator one). A zero
/// lower denominator leaves a positive utility unbounded.
pub fn meu_bound(t: ExpectationValue, x: f64, y: f64) -> ExpectationValue {
    let util = if t.util >= 0.0 {
        if x > 0.0 {
            t.util / x
        } else if t.util == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else if y > 0.0 {
        t.util / y
    } else {
        f64::NEG_INFINITY
    };
    let prob = if x > 0.0 {
        (t.prob / x).min(1.0)
    } else if t.prob == 0.0 {
        0.0
    } else {
        1.0
    };
    ExpectationValue::new(prob, util)
}

/// Marginal MAP: `AMC(φ∧γ | m, e) ⊗ w(m) / Z`, `Z` the evidence mass.
#[derive(Clone, Debug)]
pub struct MmapObjective {
    pub phi: BddHandle,
    pub gamma: BddHandle,
    /// Prior assignment `e` to variables outside `X`.
    pub prior: BTreeMap<VarId, bool>,
    normalizer: std::cell::Cell<f64>,
}

impl MmapObjective {
    pub fn new(phi: BddHandle, gamma: BddHandle) -> Self {
        Self::with_prior(phi, gamma, BTreeMap::new())
    }

    pub fn with_prior(phi: BddHandle, gamma: BddHandle, prior: BTreeMap<VarId, bool>) -> Self {
        MmapObjective {
            phi,
            gamma,
            prior,
            normalizer: std::cell::Cell::new(f64::NAN),
        }
    }

    fn excluded(&self) -> BTreeSet<VarId> {
        self.prior.keys().copied().collect()
    }

    /// Evidence mass, available after [`Objective::initial_formulas`].
    pub fn normalizer(&self) -> f64 {
        self.normalizer.get()
    }
}

impl Objective for MmapObjective {
    type S = RealValue;

    fn initial_formulas(
        &self,
        mgr: &mut BddManager,
        bbir: &Bbir<RealValue>,
    ) -> Result<Vec<BddHandle>> {
        for v in self.prior.keys() {
            if bbir.branch_vars.contains(v) {
                return Err(Error::Invalid("prior assigns a branch variable".into()));
            }
        }
        let pg = mgr.and(self.phi, self.gamma);
        let lits: Vec<Literal> = self
            .prior
            .iter()
            .map(|(&v, &b)| Literal::new(v, b))
            .collect();
        let c = mgr.condition_all(pg, lits);
        let ex = self.excluded();
        let z = mgr.fold(c, &bbir.weights, &|v| {
            if ex.contains(&v) {
                Combine::Excluded
            } else {
                Combine::Sum
            }
        })?;
        if z.0 <= 0.0 {
            return Err(Error::ZeroEvidence(String::new()));
        }
        self.normalizer.set(z.0);
        Ok(vec![c])
    }

    fn bound(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<RealValue>,
        f: &[BddHandle],
        partial: &PartialPolicy,
    ) -> Result<RealValue> {
        let t = bound_conditioned(mgr, bbir, f[0], partial, &self.excluded(), BoundKind::Upper)?;
        Ok(RealValue(t.0 / self.normalizer.get()))
    }

    fn value(
        &self,
        mgr: &BddManager,
        bbir: &Bbir<RealValue>,
        f: &[BddHandle],
        total: &Policy,
    ) -> Result<RealValue> {
        if !bbir.valid(total) {
            return Ok(RealValue::bottom());
        }
        let t = bound_conditioned(mgr, bbir, f[0], total, &self.excluded(), BoundKind::Upper)?;
        Ok(RealValue(t.0 / self.normalizer.get()))
    }

    fn improves(&self, candidate: RealValue, incumbent: RealValue) -> bool {
        candidate.0 > incumbent.0 + MMAP_TIE_EPS
    }

    fn literal_order(&self) -> [bool; 2] {
        [false, true]
    }
}

/// Upper bound on the objective over completions of `partial`.
pub fn ub_f<O: Objective>(
    mgr: &mut BddManager,
    objective: &O,
    bbir: &Bbir<O::S>,
    partial: &PartialPolicy,
) -> Result<O::S> {
    bbir.check_partial(partial)?;
    let init = objective.initial_formulas(mgr, bbir)?;
    let f: Vec<BddHandle> = init
        .into_iter()
        .map(|h| mgr.condition_all(h, lits(partial)))
        .collect();
    objective.bound(mgr, bbir, &f, partial)
}

/// The objective at a total policy.
pub fn evaluate_objective<O: Objective>(
    mgr: &mut BddManager,
    objective: &O,
    bbir: &Bbir<O::S>,
    total: &Policy,
) -> Result<O::S> {
    bbir.check_partial(total)?;
    if total.len() != bbir.branch_vars.len() {
        return Err(Error::Invalid("policy is not total".into()));
    }
    let init = objective.initial_formulas(mgr, bbir)?;
    let f: Vec<BddHandle> = init
        .into_iter()
        .map(|h| mgr.condition_all(h, lits(total)))
        .collect();
    objective.value(mgr, bbir, &f, total)
}

/// Which unassigned branch variable to split next.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BranchHeuristic {
    /// First unassigned variable in registration order.
    #[default]
    Registration,
    /// Variable whose two children have the most different bounds.
    LargestGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub prune: bool,
    pub heuristic: BranchHeuristic,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            prune: true,
            heuristic: BranchHeuristic::Registration,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub nodes_created: usize,
    pub bound_calls: u64,
    pub prunes: u64,
    pub base_cases: u64,
    /// Children skipped because a one-hot group became unsatisfiable.
    pub infeasible: u64,
    /// Search nodes that branched.
    pub interior: u64,
    pub elapsed_ms: f64,
}

impl SolveStats {
    /// Every child of an interior node is pruned, infeasible, or visited.
    pub fn conserved(&self) -> bool {
        let calls = self.interior + self.base_cases;
        2 * self.interior == self.prunes + self.infeasible + calls - 1
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult<S> {
    pub value: S,
    pub witness: Policy,
    pub stats: SolveStats,
}

struct Search<'a, O: Objective> {
    mgr: &'a mut BddManager,
    bbir: &'a Bbir<O::S>,
    obj: &'a O,
    opts: SolveOptions,
    best: O::S,
    witness: Option<Policy>,
    stats: SolveStats,
    group_of: BTreeMap<VarId, usize>,
}

impl<O: Objective> Search<'_, O> {
    /// Extends `partial` with `r = val` plus forced one-hot consequences;
    /// `None` if a group becomes unsatisfiable.
    fn extend(&self, partial: &PartialPolicy, r: VarId, val: bool) -> Option<PartialPolicy> {
        let mut p = partial.clone();
        p.insert(r, val);
        let Some(&g) = self.group_of.get(&r) else {
            return Some(p);
        };
        let group = &self.bbir.groups[g];
        if val {
            for &o in group {
                if o != r {
                    match p.get(&o) {
                        Some(true) => return None,
                        Some(false) => {}
                        None => {
                            p.insert(o, false);
                        }
                    }
                }
            }
        } else {
            if group.iter().any(|o| p.get(o) == Some(&true)) {
                return Some(p);
            }
            let free: Vec<VarId> = group
                .iter()
                .copied()
                .filter(|o| !p.contains_key(o))
                .collect();
            match free.len() {
                0 => return None,
                1 => {
                    p.insert(free[0], true);
                }
                _ => {}
            }
        }
        Some(p)
    }

    fn child(
        &mut self,
        formulas: &[BddHandle],
        partial: &PartialPolicy,
        new: &PartialPolicy,
    ) -> Vec<BddHandle> {
        let added: Vec<Literal> = new
            .iter()
            .filter(|(v, _)| !partial.contains_key(v))
            .map(|(&v, &b)| Literal::new(v, b))
            .collect();
        formulas
            .iter()
            .map(|&f| self.mgr.condition_all(f, added.iter().copied()))
            .collect()
    }

    fn pick(
        &mut self,
        formulas: &[BddHandle],
        partial: &PartialPolicy,
        remaining: &[VarId],
    ) -> Result<VarId> {
        match self.opts.heuristic {
            BranchHeuristic::Registration => Ok(remaining[0]),
            BranchHeuristic::LargestGap => {
                let mut best = (remaining[0], f64::NEG_INFINITY);
                for &r in remaining {
                    let mut scores = [f64::NEG_INFINITY; 2];
                    for (i, val) in [true, false].into_iter().enumerate() {
                        if let Some(p) = self.extend(partial, r, val) {
                            let f = self.child(formulas, partial, &p);
                            self.stats.bound_calls += 1;
                            scores[i] = self.obj.bound(self.mgr, self.bbir, &f, &p)?.score();
                        }
                    }
                    let gap = if scores[0].is_finite() && scores[1].is_finite() {
                        (scores[0] - scores[1]).abs()
                    } else {
                        f64::INFINITY
                    };
                    if gap > best.1 {
                        best = (r, gap);
                    }
                }
                Ok(best.0)
            }
        }
    }

    fn run(&mut self, formulas: Vec<BddHandle>, partial: PartialPolicy) -> Result<()> {
        let remaining: Vec<VarId> = self
            .bbir
            .branch_vars
            .iter()
            .copied()
            .filter(|v| !partial.contains_key(v))
            .collect();
        if remaining.is_empty() {
            self.stats.base_cases += 1;
            let v = self.obj.value(self.mgr, self.bbir, &formulas, &partial)?;
            if self.witness.is_none() || self.obj.improves(v, self.best) {
                self.best = v;
                self.witness = Some(partial);
            }
            return Ok(());
        }
        self.stats.interior += 1;
        let r = self.pick(&formulas, &partial, &remaining)?;
        for val in self.obj.literal_order() {
            let Some(p) = self.extend(&partial, r, val) else {
                self.stats.infeasible += 1;
                continue;
            };
            let f = self.child(&formulas, &partial, &p);
            if self.opts.prune {
                self.stats.bound_calls += 1;
                let m = self.obj.bound(self.mgr, self.bbir, &f, &p)?;
                if self.witness.is_some() && m.partial_le(self.best) {
                    self.stats.prunes += 1;
                    continue;
                }
            }
            self.run(f, p)?;
        }
        Ok(())
    }
}

/// Maximizes the objective over all total policies satisfying the one-hot
/// groups.
pub fn bb<O: Objective>(
    mgr: &mut BddManager,
    objective: &O,
    bbir: &Bbir<O::S>,
    opts: SolveOptions,
) -> Result<SolveResult<O::S>> {
    let start = Instant::now();
    let nodes_before = mgr.node_count();
    for (v, _, _) in bbir.weights.iter() {
        if v.0 as usize >= mgr.num_vars() {
            return Err(Error::UnknownVariable(v.0));
        }
    }
    for &v in &bbir.branch_vars {
        if !bbir.weights.contains(v) {
            return Err(Error::Unweighted(mgr.label(v).to_string()));
        }
    }
    let formulas = objective.initial_formulas(mgr, bbir)?;
    let mut group_of = BTreeMap::new();
    for (i, g) in bbir.groups.iter().enumerate() {
        for &v in g {
            group_of.insert(v, i);
        }
    }
    let mut search = Search {
        mgr,
        bbir,
        obj: objective,
        opts,
        best: O::S::bottom(),
        witness: None,
        stats: SolveStats::default(),
        group_of,
    };
    search.run(formulas, PartialPolicy::new())?;
    let Search {
        best,
        witness,
        mut stats,
        mgr,
        ..
    } = search;
    let witness = witness
        .ok_or_else(|| Error::Invalid("no policy satisfies the choice constraints".into()))?;
    stats.nodes_created = mgr.node_count() - nodes_before;
    stats.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolveResult {
        value: best,
        witness,
        stats,
    })
}
