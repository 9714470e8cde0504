use std::borrow::Cow;
use std::collections::BTreeSet;

use super::{Atom, Condition, SyntaxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SumKind {
    Internal,
    External,
}

impl SumKind {
    /// Kind of an unmarked single branch on `a`.
    pub fn default_for(a: &Atom) -> SumKind {
        if a.is_barred() || a.is_e() {
            SumKind::Internal
        } else {
            SumKind::External
        }
    }
}

/// Unilateral contracts. Empty sums of either kind denote `0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Contract {
    Sum(SumKind, Vec<(Atom, Contract)>),
    Rdy(Atom, Box<Contract>),
    Rec(String, Box<Contract>),
    Var(String),
}

impl Contract {
    pub fn zero() -> Contract {
        Contract::Sum(SumKind::External, Vec::new())
    }

    /// `E = rec X. (+)e.X`.
    pub fn end() -> Contract {
        Contract::Rec(
            "X0".to_string(),
            Box::new(Contract::Sum(
                SumKind::Internal,
                vec![(Atom::e(), Contract::Var("X0".to_string()))],
            )),
        )
    }

    pub fn internal(branches: Vec<(Atom, Contract)>) -> Contract {
        Contract::Sum(SumKind::Internal, branches)
    }

    pub fn external(branches: Vec<(Atom, Contract)>) -> Contract {
        Contract::Sum(SumKind::External, branches)
    }

    pub fn rdy(a: Atom, c: Contract) -> Contract {
        Contract::Rdy(a, Box::new(c))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Contract::Sum(_, bs) if bs.is_empty())
    }

    /// Whether the term is `rec X. (+)e.X` for some `X`.
    pub fn is_end(&self) -> bool {
        if let Contract::Rec(x, body) = self {
            if let Contract::Sum(SumKind::Internal, bs) = &**body {
                if let [(a, Contract::Var(y))] = bs.as_slice() {
                    return a.is_e() && x == y;
                }
            }
        }
        false
    }

    /// Same up to α-conversion, branch order, and empty-sum identification.
    pub fn alpha_eq(&self, other: &Contract) -> bool {
        alpha_normalize(self) == alpha_normalize(other)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Contract::Sum(_, bs) => {
                for (_, c) in bs {
                    c.collect_free(bound, out);
                }
            }
            Contract::Rdy(_, c) => c.collect_free(bound, out),
            Contract::Rec(x, c) => {
                bound.push(x.clone());
                c.collect_free(bound, out);
                bound.pop();
            }
            Contract::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
        }
    }

    /// Replaces free occurrences of `x` by the closed term `by`.
    pub fn subst(&self, x: &str, by: &Contract) -> Contract {
        match self {
            Contract::Sum(k, bs) => Contract::Sum(
                *k,
                bs.iter().map(|(a, c)| (a.clone(), c.subst(x, by))).collect(),
            ),
            Contract::Rdy(a, c) => Contract::Rdy(a.clone(), Box::new(c.subst(x, by))),
            Contract::Rec(y, c) if y == x => self.clone(),
            Contract::Rec(y, c) => Contract::Rec(y.clone(), Box::new(c.subst(x, by))),
            Contract::Var(y) if y == x => by.clone(),
            Contract::Var(_) => self.clone(),
        }
    }

    /// Unfolds top-level recursion until the head is a sum, `rdy`, or a free variable.
    pub fn unfold(&self) -> Contract {
        self.unfolded().into_owned()
    }

    /// As [`Contract::unfold`], borrowing when there is nothing to unfold.
    pub fn unfolded(&self) -> Cow<'_, Contract> {
        if !matches!(self, Contract::Rec(..)) {
            return Cow::Borrowed(self);
        }
        let mut c = self.clone();
        while let Contract::Rec(x, body) = &c {
            if !body.free_vars().contains(x) {
                c = (**body).clone();
                continue;
            }
            c = body.subst(x, &c);
        }
        Cow::Owned(c)
    }

    /// The head sum after unfolding, with `0` reported as an empty external sum.
    pub fn head_sum(&self) -> Option<(SumKind, Vec<(Atom, Contract)>)> {
        match self.unfold() {
            Contract::Sum(_, bs) if bs.is_empty() => Some((SumKind::External, bs)),
            Contract::Sum(k, bs) => Some((k, bs)),
            _ => None,
        }
    }

    pub fn count_rdy(&self) -> usize {
        match self {
            Contract::Sum(_, bs) => bs.iter().map(|(_, c)| c.count_rdy()).sum(),
            Contract::Rdy(_, c) => 1 + c.count_rdy(),
            Contract::Rec(_, c) => c.count_rdy(),
            Contract::Var(_) => 0,
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Contract::Sum(_, bs) => {
                for (a, c) in bs {
                    out.insert(a.clone());
                    c.collect_atoms(out);
                }
            }
            Contract::Rdy(a, c) => {
                out.insert(a.clone());
                c.collect_atoms(out);
            }
            Contract::Rec(_, c) => c.collect_atoms(out),
            Contract::Var(_) => {}
        }
    }

    /// Checks distinct branches, top-level `rdy`, guarded and closed
    /// recursion, and `E` after `e`.
    pub fn validate(&self) -> Result<(), SyntaxError> {
        if let Some(x) = self.free_vars().into_iter().next() {
            return Err(SyntaxError::invariant(
                Condition::ClosedContract,
                format!("unbound recursion variable {x}"),
            ));
        }
        self.check(true, &mut Vec::new())
    }

    fn check(&self, top: bool, unguarded: &mut Vec<String>) -> Result<(), SyntaxError> {
        match self {
            Contract::Sum(_, bs) => {
                let mut seen = BTreeSet::new();
                for (a, c) in bs {
                    if !seen.insert(a) {
                        return Err(SyntaxError::invariant(
                            Condition::DistinctBranches,
                            format!("atom {a} occurs twice in one sum"),
                        ));
                    }
                    if a.is_e() && !c.is_end() {
                        return Err(SyntaxError::invariant(
                            Condition::SuccessContinuation,
                            format!("branch e is followed by {c}"),
                        ));
                    }
                    c.check(false, &mut Vec::new())?;
                }
                Ok(())
            }
            Contract::Rdy(a, _) if !top => Err(SyntaxError::invariant(
                Condition::RdyTopLevel,
                format!("rdy {a} is nested"),
            )),
            Contract::Rdy(_, c) => c.check(false, &mut Vec::new()),
            Contract::Rec(..) if self.is_end() => Ok(()),
            Contract::Rec(x, c) => {
                unguarded.push(x.clone());
                let r = c.check(false, unguarded);
                unguarded.pop();
                r
            }
            Contract::Var(x) => {
                if unguarded.contains(x) {
                    Err(SyntaxError::invariant(
                        Condition::GuardedRecursion,
                        format!("variable {x} occurs unguarded"),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Canonical representative: bound variables renamed by nesting level
/// (`X0`, `X1`, ...), vacuous binders dropped, branches sorted, `0` external.
pub fn alpha_normalize(c: &Contract) -> Contract {
    fn go(c: &Contract, env: &mut Vec<(String, String)>) -> Contract {
        match c {
            Contract::Sum(k, bs) => {
                if bs.is_empty() {
                    return Contract::zero();
                }
                let mut out: Vec<(Atom, Contract)> =
                    bs.iter().map(|(a, c)| (a.clone(), go(c, env))).collect();
                out.sort();
                Contract::Sum(*k, out)
            }
            Contract::Rdy(a, c) => Contract::Rdy(a.clone(), Box::new(go(c, env))),
            Contract::Rec(x, body) => {
                if !body.free_vars().contains(x) {
                    return go(body, env);
                }
                let name = format!("X{}", env.len());
                env.push((x.clone(), name.clone()));
                let b = go(body, env);
                env.pop();
                Contract::Rec(name, Box::new(b))
            }
            Contract::Var(x) => match env.iter().rev().find(|(y, _)| y == x) {
                Some((_, n)) => Contract::Var(n.clone()),
                None => c.clone(),
            },
        }
    }
    go(c, &mut Vec::new())
}
