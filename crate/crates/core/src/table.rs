//! Data model for aggregation units (join tuples), users, Poisson sampling
//! and contribution statistics.
//!
//! A table holds the flattened join result: every unit carries a normalized
//! weight in [0, 1] and the ordered, duplicate-free list of users that
//! contribute to it. Two pieces of public metadata ride along: the tuple
//! bound Delta (no user may contribute to more units) and the per-unit
//! contributor count l. Tables are immutable once validated and safe to share
//! across threads; sampling takes its own RNG stream.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type UserId = u64;

/// One join tuple: a weight and the users that contribute to it.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationUnit {
    /// Opaque identifier, stable across sampling and user removal.
    pub id: usize,
    /// Normalized weight w_t in [0, 1].
    pub weight: f64,
    /// Contributing users, non-empty and duplicate-free. Order is preserved
    /// from the input; `contributors[0]` is the "first contributing user"
    /// that sample-and-explore keys on.
    pub contributors: Vec<UserId>,
    /// Component index for vector workloads.
    pub group_index: Option<usize>,
}

/// A validated collection of aggregation units plus public metadata.
#[derive(Debug, Clone)]
pub struct AggregationUnitTable {
    pub units: Vec<AggregationUnit>,
    /// Number of users m in the universe; contributor ids live in [0, m).
    pub user_universe_size: u64,
    /// Public per-user tuple cap Delta.
    pub tuple_bound: u64,
    /// Maximum number of users per tuple l.
    pub users_per_tuple: usize,
    /// Normalization divisor W applied to raw weights at load; final
    /// estimates are rescaled by W at report time.
    pub weight_scale: f64,
}

impl AggregationUnitTable {
    /// Builds and validates a table. Raw weights are already normalized;
    /// `weight_scale` only records the divisor used.
    pub fn new(
        units: Vec<AggregationUnit>,
        user_universe_size: u64,
        tuple_bound: u64,
        users_per_tuple: usize,
        weight_scale: f64,
    ) -> Result<Self> {
        let table = AggregationUnitTable {
            units,
            user_universe_size,
            tuple_bound,
            users_per_tuple,
            weight_scale,
        };
        table.validate()?;
        Ok(table)
    }

    /// Checks every table invariant: weights in [0, 1], contributor ids in
    /// the universe, contributor lists non-empty and duplicate-free with at
    /// most l entries, and no user on more than Delta units.
    pub fn validate(&self) -> Result<()> {
        if self.user_universe_size < 1 {
            return Err(Error::InvalidParams(
                "user universe must contain at least one user".into(),
            ));
        }
        if self.tuple_bound < 1 {
            return Err(Error::InvalidParams("tuple bound must be >= 1".into()));
        }
        if !(self.weight_scale > 0.0) {
            return Err(Error::InvalidParams(format!(
                "weight scale {} must be positive",
                self.weight_scale
            )));
        }
        let mut counts: HashMap<UserId, u64> = HashMap::new();
        for (idx, unit) in self.units.iter().enumerate() {
            if !(0.0..=1.0).contains(&unit.weight) {
                return Err(Error::WeightOutOfRange {
                    unit: idx,
                    weight: unit.weight,
                });
            }
            if unit.contributors.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "unit {idx} has no contributors"
                )));
            }
            if unit.contributors.len() > self.users_per_tuple {
                return Err(Error::InvalidParams(format!(
                    "unit {idx} lists {} contributors, more than l={}",
                    unit.contributors.len(),
                    self.users_per_tuple
                )));
            }
            let mut seen = unit.contributors.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != unit.contributors.len() {
                return Err(Error::InvalidParams(format!(
                    "unit {idx} lists a duplicate contributor"
                )));
            }
            for &u in &unit.contributors {
                if u >= self.user_universe_size {
                    return Err(Error::UnknownUser(u));
                }
                *counts.entry(u).or_insert(0) += 1;
            }
        }
        for (&user, &count) in &counts {
            if count > self.tuple_bound {
                return Err(Error::DeltaViolated {
                    user,
                    count,
                    bound: self.tuple_bound,
                });
            }
        }
        Ok(())
    }

    /// Normalized aggregate f(T) = sum of weights.
    pub fn aggregate(&self) -> f64 {
        self.units.iter().map(|u| u.weight).sum()
    }

    /// De-normalized query value f(T) * W.
    pub fn query_value(&self) -> f64 {
        self.aggregate() * self.weight_scale
    }

    /// Units each user contributes to.
    pub fn per_user_counts(&self) -> HashMap<UserId, u64> {
        let mut counts = HashMap::new();
        for unit in &self.units {
            for &u in &unit.contributors {
                *counts.entry(u).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Maximum number of units any single user contributes to.
    pub fn tau_star(&self) -> u64 {
        self.per_user_counts().values().copied().max().unwrap_or(0)
    }

    /// Independent Bernoulli sampling of units with probability q. Metadata
    /// (m, Delta, l, W) is preserved. Exact at the endpoints: q=1 returns the
    /// table unchanged, q=0 an empty one.
    pub fn poisson_sample(&self, q: f64, rng: &mut RngStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::QOutOfRange(q));
        }
        let units = self
            .units
            .iter()
            .filter(|_| rng.bernoulli(q))
            .cloned()
            .collect();
        Ok(AggregationUnitTable {
            units,
            ..self.clone()
        })
    }

    /// User-level neighbor: drops every unit the given user contributes to.
    /// The user stays in the universe with no units.
    pub fn remove_user(&self, user: UserId) -> Result<Self> {
        if user >= self.user_universe_size {
            return Err(Error::UnknownUser(user));
        }
        let units = self
            .units
            .iter()
            .filter(|u| !u.contributors.contains(&user))
            .cloned()
            .collect();
        Ok(AggregationUnitTable {
            units,
            ..self.clone()
        })
    }
}

/// d per-group aggregation tables sharing one user universe.
#[derive(Debug, Clone)]
pub struct VectorWorkload {
    pub components: Vec<AggregationUnitTable>,
}

/// Per-user contribution across a vector workload: summed weights per
/// component and the L2 norm of that vector.
#[derive(Debug, Clone)]
pub struct UserContribution {
    pub per_component: Vec<f64>,
    pub norm: f64,
}

impl VectorWorkload {
    pub fn new(components: Vec<AggregationUnitTable>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParams(
                "vector workload needs at least one component".into(),
            ));
        }
        let first = &components[0];
        for c in &components[1..] {
            if c.user_universe_size != first.user_universe_size
                || c.tuple_bound != first.tuple_bound
                || c.users_per_tuple != first.users_per_tuple
                || c.weight_scale != first.weight_scale
            {
                return Err(Error::InvalidParams(
                    "vector workload components must share user universe and tuple metadata"
                        .into(),
                ));
            }
        }
        for c in &components {
            c.validate()?;
        }
        Ok(VectorWorkload { components })
    }

    pub fn dimension(&self) -> usize {
        self.components.len()
    }

    pub fn user_universe_size(&self) -> u64 {
        self.components[0].user_universe_size
    }

    pub fn tuple_bound(&self) -> u64 {
        self.components[0].tuple_bound
    }

    pub fn weight_scale(&self) -> f64 {
        self.components[0].weight_scale
    }

    /// Normalized per-component aggregates F(T).
    pub fn aggregates(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.aggregate()).collect()
    }

    /// De-normalized query vector.
    pub fn query_values(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.query_value()).collect()
    }

    /// Samples every component independently at rate q.
    pub fn poisson_sample(&self, q: f64, rng: &mut RngStream) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.poisson_sample(q, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorWorkload { components })
    }

    pub fn remove_user(&self, user: UserId) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.remove_user(user))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorWorkload { components })
    }

    /// Per-user contribution vectors x_u (summed weights per component) and
    /// their L2 norms, indexed by user id over the whole universe.
    pub fn contribution_norms(&self) -> Vec<UserContribution> {
        let m = self.user_universe_size() as usize;
        let d = self.dimension();
        let mut per_user = vec![vec![0.0; d]; m];
        for (f, component) in self.components.iter().enumerate() {
            for unit in &component.units {
                for &u in &unit.contributors {
                    per_user[u as usize][f] += unit.weight;
                }
            }
        }
        per_user
            .into_iter()
            .map(|per_component| {
                let norm = per_component.iter().map(|x| x * x).sum::<f64>().sqrt();
                UserContribution {
                    per_component,
                    norm,
                }
            })
            .collect()
    }

    /// Largest per-user L2 contribution norm; the untruncated solution is
    /// feasible for any tau at or above this.
    pub fn max_contribution_norm(&self) -> f64 {
        self.contribution_norms()
            .iter()
            .map(|c| c.norm)
            .fold(0.0, f64::max)
    }
}

/// Convenience constructor: unit weights of 1.0 and contributor lists as
/// given, the shape every counting query produces.
pub fn counting_table(
    contributor_lists: Vec<Vec<UserId>>,
    user_universe_size: u64,
    tuple_bound: u64,
    users_per_tuple: usize,
) -> Result<AggregationUnitTable> {
    let units = contributor_lists
        .into_iter()
        .enumerate()
        .map(|(id, contributors)| AggregationUnit {
            id,
            weight: 1.0,
            contributors,
            group_index: None,
        })
        .collect();
    AggregationUnitTable::new(units, user_universe_size, tuple_bound, users_per_tuple, 1.0)
}


#[cfg(test)]
mod tests {
    use super::fixtures::triangle_table;
    use super::*;

    #[test]
    fn triangle_table_validates() {
        let t = triangle_table();
        assert_eq!(t.units.len(), 5);
        assert_eq!(t.tau_star(), 3);
        let counts = t.per_user_counts();
        let expected = [(0u64, 1u64), (1, 2), (2, 3), (3, 3), (4, 3), (5, 2), (6, 1)];
        for (user, count) in expected {
            assert_eq!(counts[&user], count, "user {user}");
        }
    }

    #[test]
    fn empty_table_is_accepted() {
        let t = counting_table(vec![], 1, 1, 1).unwrap();
        assert_eq!(t.tau_star(), 0);
        assert_eq!(t.aggregate(), 0.0);
    }

    #[test]
    fn delta_violation_is_rejected() {
        let lists = vec![vec![0], vec![0], vec![0], vec![0], vec![0]];
        let err = counting_table(lists, 1, 4, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::DeltaViolated {
                user: 0,
                count: 5,
                bound: 4
            }
        ));
    }

    #[test]
    fn unknown_contributor_is_rejected() {
        let err = counting_table(vec![vec![9]], 3, 2, 1).unwrap_err();
        assert!(matches!(err, Error::UnknownUser(9)));
    }

    #[test]
    fn weight_out_of_range_is_rejected() {
        let unit = AggregationUnit {
            id: 0,
            weight: 1.5,
            contributors: vec![0],
            group_index: None,
        };
        let err = AggregationUnitTable::new(vec![unit], 1, 1, 1, 1.0).unwrap_err();
        assert!(matches!(err, Error::WeightOutOfRange { unit: 0, .. }));
    }

    #[test]
    fn sampling_endpoints_are_exact() {
        let t = triangle_table();
        let mut rng = RngStream::new(5, 0);
        assert!(t.poisson_sample(0.0, &mut rng).unwrap().units.is_empty());
        let full = t.poisson_sample(1.0, &mut rng).unwrap();
        assert_eq!(full.units.len(), t.units.len());
        assert!(t.poisson_sample(1.5, &mut rng).is_err());
    }

    #[test]
    fn sample_size_concentrates() {
        // Binomial concentration: |size - 500| <= 3*sqrt(250) in >= 99% of runs.
        let lists: Vec<Vec<UserId>> = (0..1000u64).map(|i| vec![i]).collect();
        let t = counting_table(lists, 1000, 1, 1).unwrap();
        let bound = 3.0 * (1000.0f64 * 0.25).sqrt();
        let mut ok = 0;
        for trial in 0..1000 {
            let mut rng = RngStream::new(99, trial);
            let s = t.poisson_sample(0.5, &mut rng).unwrap();
            if (s.units.len() as f64 - 500.0).abs() <= bound {
                ok += 1;
            }
        }
        assert!(ok >= 990, "only {ok}/1000 within 3 sigma");
    }

    #[test]
    fn tau_star_never_grows_under_sampling() {
        let t = triangle_table();
        for trial in 0..50 {
            let mut rng = RngStream::new(17, trial);
            let s = t.poisson_sample(0.4, &mut rng).unwrap();
            assert!(s.tau_star() <= t.tau_star());
            assert!(s.tau_star() <= s.tuple_bound);
        }
    }

    #[test]
    fn tau_star_matches_counting_oracle_on_random_tables() {
        for trial in 0..20 {
            let mut rng = RngStream::new(23, trial);
            let m = 1 + rng.below(6);
            let n = rng.below(11) as usize;
            let lists: Vec<Vec<UserId>> = (0..n).map(|_| vec![rng.below(m)]).collect();
            let t = counting_table(lists.clone(), m, n.max(1) as u64, 1).unwrap();
            let mut oracle = vec![0u64; m as usize];
            for l in &lists {
                oracle[l[0] as usize] += 1;
            }
            assert_eq!(t.tau_star(), oracle.into_iter().max().unwrap_or(0));
        }
    }

    #[test]
    fn remove_user_drops_exactly_their_units() {
        let t = triangle_table();
        // C (id 2) appears in ABC, BCD, CDE; DEF and EFG remain.
        let without_c = t.remove_user(2).unwrap();
        assert_eq!(without_c.units.len(), 2);
        let ids: Vec<usize> = without_c.units.iter().map(|u| u.id).collect();
        assert_eq!(ids, vec![3, 4]);
        // Removing a user keeps everyone else's counts intact or smaller.
        let before = t.per_user_counts();
        let after = without_c.per_user_counts();
        for (user, count) in after {
            assert!(count <= before[&user]);
        }
        // A user with no units leaves the table unchanged.
        let lists = vec![vec![0u64]];
        let t2 = counting_table(lists, 2, 1, 1).unwrap();
        assert_eq!(t2.remove_user(1).unwrap().units.len(), 1);
        assert!(t2.remove_user(5).is_err());
    }

    #[test]
    fn removing_every_user_covers_every_unit() {
        let t = triangle_table();
        let mut covered = vec![false; t.units.len()];
        for user in 0..t.user_universe_size {
            let kept: Vec<usize> = t
                .remove_user(user)
                .unwrap()
                .units
                .iter()
                .map(|u| u.id)
                .collect();
            for (idx, unit) in t.units.iter().enumerate() {
                if !kept.contains(&unit.id) {
                    covered[idx] = true;
                }
            }
        }
        assert!(covered.into_iter().all(|c| c));
    }

    #[test]
    fn contribution_norms_sum_weights_per_component() {
        // Single user, two components with weights summing to (3, 4): norm 5.
        let c0 = AggregationUnitTable::new(
            (0..3)
                .map(|id| AggregationUnit {
                    id,
                    weight: 1.0,
                    contributors: vec![0],
                    group_index: Some(0),
                })
                .collect(),
            1,
            8,
            1,
            1.0,
        )
        .unwrap();
        let c1 = AggregationUnitTable::new(
            (0..4)
                .map(|id| AggregationUnit {
                    id: 3 + id,
                    weight: 1.0,
                    contributors: vec![0],
                    group_index: Some(1),
                })
                .collect(),
            1,
            8,
            1,
            1.0,
        )
        .unwrap();
        let w = VectorWorkload::new(vec![c0, c1]).unwrap();
        let norms = w.contribution_norms();
        assert_eq!(norms[0].per_component, vec![3.0, 4.0]);
        assert!((norms[0].norm - 5.0).abs() < 1e-12);
        assert!((w.max_contribution_norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn empty_workload_has_zero_norms() {
        let empty = counting_table(vec![], 2, 1, 1).unwrap();
        let w = VectorWorkload::new(vec![empty]).unwrap();
        assert!(w.contribution_norms().iter().all(|c| c.norm == 0.0));
    }

    #[test]
    fn random_workload_norms_match_direct_summation() {
        for trial in 0..10 {
            let mut rng = RngStream::new(31, trial);
            let m = 1 + rng.below(5);
            let d = 1 + rng.below(3) as usize;
            let mut components = Vec::new();
            let mut direct = vec![vec![0.0; d]; m as usize];
            for f in 0..d {
                let n = rng.below(6) as usize;
                let mut units = Vec::new();
                for id in 0..n {
                    let user = rng.below(m);
                    let weight = rng.uniform();
                    direct[user as usize][f] += weight;
                    units.push(AggregationUnit {
                        id,
                        weight,
                        contributors: vec![user],
                        group_index: Some(f),
                    });
                }
                components.push(AggregationUnitTable::new(units, m, 64, 1, 1.0).unwrap());
            }
            let w = VectorWorkload::new(components).unwrap();
            for (user, contrib) in w.contribution_norms().iter().enumerate() {
                for f in 0..d {
                    assert!((contrib.per_component[f] - direct[user][f]).abs() < 1e-12);
                }
            }
        }
    }
}
