//! Exact 0-1 knapsack solving.
//!
//! [`solve_exact`] is a depth-first branch and bound over items sorted by
//! value/weight ratio, pruned with the Dantzig (fractional) upper bound.
//! [`brute_force`] enumerates every selection and serves as the test oracle.
//!
//! Both solvers report the objective and feasibility computed by summing in
//! original item order, and break objective ties towards the
//! lexicographically smallest selection, so their answers agree bit for bit.
//! The search itself accumulates in ratio order; it keeps every leaf whose
//! value lies within a small tolerance of the incumbent and resolves the
//! final choice with the original-order arithmetic.

use std::cmp::Ordering;

use crate::instance::{Dataset, KnapsackInstance, Label};
use crate::{Error, Result};

/// Safety valve on branch-and-bound nodes.
pub const NODE_LIMIT: u64 = 1_000_000_000;
/// Largest instance accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_ITEMS: usize = 25;

/// Slack on sums accumulated in ratio order, far above their rounding error.
const SEARCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub selection: Vec<bool>,
    pub objective: f64,
    pub nodes_explored: u64,
}

impl SolveResult {
    pub fn into_label(self) -> Label {
        Label {
            selection: self.selection,
            optimal_value: self.objective,
        }
    }
}

/// Orders selections by objective, preferring the lexicographically smaller
/// bit vector on ties. `Greater` means `a` is the better answer.
fn compare_candidates(a: (&[bool], f64), b: (&[bool], f64)) -> Ordering {
    a.1.partial_cmp(&b.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.0.cmp(a.0))
}

fn check_capacity(instance: &KnapsackInstance) -> Result<()> {
    if instance.capacity < 0.0 || !instance.capacity.is_finite() {
        return Err(Error::InvalidInstance {
            id: instance.id,
            message: format!("capacity {} must be a non-negative number", instance.capacity),
        });
    }
    if instance.weights.len() != instance.values.len() {
        return Err(Error::InvalidInstance {
            id: instance.id,
            message: "weights/values length mismatch".into(),
        });
    }
    Ok(())
}

/// Exhaustive enumeration of all `2^n` selections.
pub fn brute_force(instance: &KnapsackInstance) -> Result<SolveResult> {
    check_capacity(instance)?;
    let n = instance.n_items();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(Error::InvalidArgument(format!(
            "brute force limited to {BRUTE_FORCE_MAX_ITEMS} items, got {n}"
        )));
    }
    let mut best = vec![false; n];
    let mut best_value = 0.0;
    let mut selection = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        for (i, bit) in selection.iter_mut().enumerate() {
            *bit = mask >> i & 1 == 1;
        }
        if instance.selection_weight(&selection) > instance.capacity {
            continue;
        }
        let value = instance.selection_value(&selection);
        if compare_candidates((&selection, value), (&best, best_value)) == Ordering::Greater {
            best.clone_from(&selection);
            best_value = value;
        }
    }
    Ok(SolveResult {
        selection: best,
        objective: best_value,
        nodes_explored: 1u64 << n,
    })
}

/// Items that can ever appear in the lexicographically smallest optimum,
/// sorted by value/weight ratio descending, ties by original index.
///
/// Zero-value items are dropped: removing one never changes the objective
/// and yields a lexicographically smaller selection. Items heavier than the
/// capacity never fit.
fn ratio_order(instance: &KnapsackInstance) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.n_items())
        .filter(|&i| instance.values[i] > 0.0 && instance.weights[i] <= instance.capacity)
        .collect();
    let ratio = |i: usize| instance.values[i] / instance.weights[i];
    order.sort_by(|&a, &b| {
        ratio(b)
            .partial_cmp(&ratio(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Dantzig bound of the sub-problem that may still choose among
/// `order[depth..]` with `room` capacity left.
fn fractional_bound(instance: &KnapsackInstance, order: &[usize], depth: usize, room: f64) -> f64 {
    let mut room = room;
    let mut bound = 0.0;
    for &i in &order[depth..] {
        let w = instance.weights[i];
        if w <= room {
            room -= w;
            bound += instance.values[i];
        } else {
            bound += instance.values[i] * (room / w);
            break;
        }
    }
    bound
}

/// LP-relaxation upper bound of the whole instance.
pub fn dantzig_bound(instance: &KnapsackInstance) -> f64 {
    let order = ratio_order(instance);
    fractional_bound(instance, &order, 0, instance.capacity)
}

struct Search<'a> {
    instance: &'a KnapsackInstance,
    order: Vec<usize>,
    taken: Vec<bool>,
    best_value: f64,
    candidates: Vec<Vec<bool>>,
    nodes: u64,
}

impl Search<'_> {
    fn visit(&mut self, depth: usize, room: f64, value: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > NODE_LIMIT {
            return Err(Error::NodeLimit {
                id: self.instance.id,
                nodes: self.nodes,
            });
        }
        if depth == self.order.len() {
            self.record_leaf(value);
            return Ok(());
        }
        let bound = value + fractional_bound(self.instance, &self.order, depth, room.max(0.0));
        if bound < self.best_value - SEARCH_TOL {
            return Ok(());
        }
        let item = self.order[depth];
        let w = self.instance.weights[item];
        if w <= room + SEARCH_TOL {
            self.taken[item] = true;
            self.visit(depth + 1, room - w, value + self.instance.values[item])?;
            self.taken[item] = false;
        }
        self.visit(depth + 1, room, value)
    }

    fn record_leaf(&mut self, value: f64) {
        if value < self.best_value - SEARCH_TOL {
            return;
        }
        if value > self.best_value {
            self.best_value = value;
            let floor = value - SEARCH_TOL;
            let instance = self.instance;
            self.candidates
                .retain(|sel| instance.selection_value(sel) >= floor);
        }
        self.candidates.push(self.taken.clone());
    }
}

/// Exact optimum by branch and bound with the Dantzig bound.
pub fn solve_exact(instance: &KnapsackInstance) -> Result<SolveResult> {
    check_capacity(instance)?;
    let n = instance.n_items();
    let mut search = Search {
        instance,
        order: ratio_order(instance),
        taken: vec![false; n],
        best_value: 0.0,
        candidates: vec![vec![false; n]],
        nodes: 0,
    };
    search.visit(0, instance.capacity, 0.0)?;

    let mut best = vec![false; n];
    let mut best_value = 0.0;
    for selection in &search.candidates {
        if instance.selection_weight(selection) > instance.capacity {
            continue;
        }
        let value = instance.selection_value(selection);
        if compare_candidates((selection, value), (&best, best_value)) == Ordering::Greater {
            best.clone_from(selection);
            best_value = value;
        }
    }
    Ok(SolveResult {
        selection: best,
        objective: best_value,
        nodes_explored: search.nodes,
    })
}

/// Attaches exact labels to every unlabeled instance. Already-labeled
/// instances are left untouched.
pub fn label_dataset(mut dataset: Dataset) -> Result<Dataset> {
    for item in dataset.items.iter_mut().filter(|i| i.label.is_none()) {
        let result = solve_exact(&item.instance).map_err(|e| match e {
            e @ (Error::InvalidInstance { .. } | Error::NodeLimit { .. }) => e,
            other => Error::InvalidInstance {
                id: item.instance.id,
                message: other.to_string(),
            },
        })?;
        item.label = Some(result.into_label());
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_dataset;

    fn inst(weights: Vec<f64>, values: Vec<f64>, capacity: f64) -> KnapsackInstance {
        KnapsackInstance {
            id: 0,
            weights,
            values,
            capacity,
        }
    }

    #[test]
    fn item_that_cannot_fit() {
        let r = solve_exact(&inst(vec![0.5], vec![0.9], 0.4)).unwrap();
        assert_eq!(r.selection, vec![false]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn takes_the_more_valuable_of_two() {
        let r = solve_exact(&inst(vec![0.3, 0.3], vec![0.5, 0.6], 0.3)).unwrap();
        assert_eq!(r.selection, vec![false, true]);
        assert_eq!(r.objective, 0.6);
    }

    #[test]
    fn brute_force_small_cases() {
        let r = brute_force(&inst(vec![0.1], vec![0.2], 1.0)).unwrap();
        assert_eq!((r.selection, r.objective), (vec![true], 0.2));
        let r = brute_force(&inst(vec![0.7, 0.8], vec![0.2, 0.9], 0.5)).unwrap();
        assert_eq!((r.selection, r.objective), (vec![false, false], 0.0));
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest() {
        // {0} and {1} both worth 0.5; {1} = [0,1] is smaller than [1,0].
        let i = inst(vec![0.4, 0.4], vec![0.5, 0.5], 0.5);
        let expected = vec![false, true];
        assert_eq!(brute_force(&i).unwrap().selection, expected);
        assert_eq!(solve_exact(&i).unwrap().selection, expected);
        // zero-value items are never selected
        let i = inst(vec![0.1, 0.2, 0.1], vec![0.0, 0.7, 0.0], 1.0);
        assert_eq!(solve_exact(&i).unwrap().selection, vec![false, true, false]);
        assert_eq!(brute_force(&i).unwrap().selection, vec![false, true, false]);
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let i = inst(vec![0.1; 26], vec![0.1; 26], 1.0);
        assert!(brute_force(&i).is_err());
    }

    #[test]
    fn negative_capacity_rejected() {
        assert!(solve_exact(&inst(vec![0.1], vec![0.1], -1.0)).is_err());
    }

    #[test]
    fn root_bound_dominates_optimum() {
        let d = generate_dataset(40, 50, 11).unwrap();
        for item in &d.items {
            let r = solve_exact(&item.instance).unwrap();
            assert!(dantzig_bound(&item.instance) >= r.objective);
            assert!(item.instance.selection_weight(&r.selection) <= item.instance.capacity + 1e-12);
            assert_eq!(r, solve_exact(&item.instance).unwrap());
        }
    }

    #[test]
    fn labeling_matches_brute_force_and_is_idempotent() {
        let d = generate_dataset(15, 30, 5).unwrap();
        let labeled = label_dataset(d).unwrap();
        for item in &labeled.items {
            let oracle = brute_force(&item.instance).unwrap();
            let label = item.label.as_ref().unwrap();
            assert_eq!(label.selection, oracle.selection);
            assert_eq!(label.optimal_value, oracle.objective);
        }
        assert_eq!(label_dataset(labeled.clone()).unwrap(), labeled);
    }
}
