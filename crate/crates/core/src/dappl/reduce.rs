use super::ast::{Expr, ExprKind, Pure, UtilExpr};
use super::desugar::Desugared;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Collapses every choice under `policy` (site label → alternative),
/// producing a choice-free program.
pub fn reduce(d: &Desugared, policy: &BTreeMap<String, String>) -> Result<UtilExpr> {
    let mut env: Vec<(String, usize)> = Vec::new();
    go(d, &d.expr, policy, &mut env)
}

fn go(
    d: &Desugared,
    e: &Expr,
    policy: &BTreeMap<String, String>,
    env: &mut Vec<(String, usize)>,
) -> Result<UtilExpr> {
    Ok(match &e.kind {
        ExprKind::Pure(p) | ExprKind::Return(p) => UtilExpr::Return(p.clone()),
        ExprKind::Flip(t) => UtilExpr::Flip(*t),
        ExprKind::Reward(k, b) => UtilExpr::Reward(*k, Box::new(go(d, b, policy, env)?)),
        ExprKind::Observe(g, b) => UtilExpr::Observe(g.clone(), Box::new(go(d, b, policy, env)?)),
        ExprKind::Ite(g, t, f) => UtilExpr::Ite(
            g.clone(),
            Box::new(go(d, t, policy, env)?),
            Box::new(go(d, f, policy, env)?),
        ),
        ExprKind::Bind(x, rhs, body) => {
            let r = go(d, rhs, policy, env)?;
            if let ExprKind::Intro(_, Some(site)) = rhs.kind {
                env.push((x.clone(), site));
                let b = go(d, body, policy, env);
                env.pop();
                UtilExpr::Bind(x.clone(), Box::new(r), Box::new(b?))
            } else {
                UtilExpr::Bind(x.clone(), Box::new(r), Box::new(go(d, body, policy, env)?))
            }
        }
        ExprKind::Intro(_, _) => UtilExpr::Return(Pure::Const(true)),
        ExprKind::Choose(s, arms) => {
            let ExprKind::Pure(Pure::Var(x, _)) = &s.kind else {
                return Err(Error::Invalid(
                    "choose over a non-variable after desugaring".into(),
                ));
            };
            let site = env
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, s)| *s)
                .ok_or_else(|| Error::Invalid(format!("`{x}` is not bound to a choice")))?;
            let label = &d.sites[site].label;
            let pick = policy
                .get(label)
                .ok_or_else(|| Error::MissingPolicy(label.clone()))?;
            let arm = arms.iter().find(|a| &a.name == pick).ok_or_else(|| {
                Error::Invalid(format!("site {label} has no alternative `{pick}`"))
            })?;
            go(d, &arm.body, policy, env)?
        }
        ExprKind::Disc(_) | ExprKind::Loop(..) => {
            return Err(Error::Invalid("reduce expects a desugared program".into()));
        }
    })
}

/// Every total policy, in lexicographic order of alternative indices.
pub fn all_policies(d: &Desugared) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for s in &d.sites {
        let mut next = Vec::new();
        for p in &out {
            for a in &s.alternatives {
                let mut q = p.clone();
                q.insert(s.label.clone(), a.clone());
                next.push(q);
            }
        }
        out = next;
    }
    out
}
