use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dims, check_training_set};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: Some(8),
            min_leaf: 2,
            mtry: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.mtry == Some(0) || self.max_depth == Some(0) {
            return Err(Error::Config(
                "n_trees, min_leaf, mtry and max_depth must be positive".into(),
            ));
        }
        Ok(())
    }

    fn mtry_for(&self, d: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Training-sample counts for class 0 and class 1.
    Leaf { counts: [u32; 2] },
}

/// Binary tree stored as an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &[f64]) -> [u32; 2] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right } as usize,
                Node::Leaf { counts } => return *counts,
            }
        }
    }

    /// Majority class of the reached leaf; an even leaf votes 1.
    pub fn vote(&self, x: &[f64]) -> u8 {
        let [c0, c1] = self.leaf_for(x);
        u8::from(c1 >= c0)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

impl RandomForestModel {
    /// Returns `(label, score)` where `score` is the fraction of trees voting
    /// for class 1 and `label = 1` iff `score >= 0.5`.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, f64)> {
        check_dims(self.n_features, x.len())?;
        let votes: usize = self.trees.iter().map(|t| t.vote(x) as usize).sum();
        let score = votes as f64 / self.trees.len() as f64;
        Ok((u8::from(score >= 0.5), score))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Parse("forest has no trees".into()));
        }
        for tree in &self.trees {
            if tree.nodes.is_empty() {
                return Err(Error::Parse("tree has no nodes".into()));
            }
            for node in &tree.nodes {
                if let Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } = node
                {
                    let n = tree.nodes.len() as u32;
                    if *feature >= self.n_features || *left >= n || *right >= n || !threshold.is_finite() {
                        return Err(Error::Parse("malformed split node".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Grows `n_trees` Gini trees, tree `k` drawing from an RNG seeded with
/// `seed + k`.
pub fn train_rf(samples: &[Vec<f64>], labels: &[u8], cfg: &ForestConfig) -> Result<RandomForestModel> {
    cfg.validate()?;
    let d = check_training_set(samples, labels)?;
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
            let n = samples.len();
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut grower = Grower {
                samples,
                labels,
                cfg,
                mtry: cfg.mtry_for(d),
                d,
                rng,
                nodes: Vec::new(),
                scratch: Vec::with_capacity(n),
            };
            grower.grow(&mut idx, 0);
            Tree { nodes: grower.nodes }
        })
        .collect();
    Ok(RandomForestModel {
        n_features: d,
        config: cfg.clone(),
        trees,
    })
}

struct Grower<'a> {
    samples: &'a [Vec<f64>],
    labels: &'a [u8],
    cfg: &'a ForestConfig,
    mtry: usize,
    d: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

/// A candidate split scored by `Σ_children (c0² + c1²) / n_child`, which
/// Gini minimisation maximises. Kept as an exact fraction.
#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    num: u128,
    den: u128,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.num * other.den).cmp(&(other.num * self.den)) == Ordering::Greater
    }
}

impl Grower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let mut counts = [0u32; 2];
        for &i in idx.iter() {
            counts[self.labels[i] as usize] += 1;
        }
        self.nodes.push(Node::Leaf { counts });

        let pure = counts[0] == 0 || counts[1] == 0;
        let too_deep = self.cfg.max_depth.is_some_and(|m| depth >= m);
        if pure || too_deep || idx.len() < 2 * self.cfg.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(idx) else {
            return id;
        };

        let (f, t) = (best.feature, best.threshold);
        idx.sort_by_key(|&i| !(self.samples[i][f] <= t));
        let n_left = idx.partition_point(|&i| self.samples[i][f] <= t);
        let (l, r) = idx.split_at_mut(n_left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let mut features = sample(&mut self.rng, self.d, self.mtry).into_vec();
        features.sort_unstable();
        let min_leaf = self.cfg.min_leaf;
        let n = idx.len();
        let mut total = [0u64; 2];
        for &i in idx {
            total[self.labels[i] as usize] += 1;
        }

        let mut best: Option<Candidate> = None;
        for f in features {
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (self.samples[i][f], self.labels[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = [0u64; 2];
            for k in 0..n - 1 {
                left[self.scratch[k].1 as usize] += 1;
                let (a, b) = (self.scratch[k].0, self.scratch[k + 1].0);
                if a == b {
                    continue;
                }
                let nl = (k + 1) as u64;
                let nr = n as u64 - nl;
                if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let sl = (left[0] * left[0] + left[1] * left[1]) as u128;
                let sr = (right[0] * right[0] + right[1] * right[1]) as u128;
                let cand = Candidate {
                    feature: f,
                    threshold: midpoint(a, b),
                    num: sl * nr as u128 + sr * nl as u128,
                    den: nl as u128 * nr as u128,
                };
                if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

/// A threshold `t` with `a <= t < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t < b && t >= a {
        t
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn separable() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..50 {
            xs.push(vec![0.3 * i as f64 / 49.0]);
            ys.push(0);
        }
        for i in 0..50 {
            xs.push(vec![0.7 + 0.3 * i as f64 / 49.0]);
            ys.push(1);
        }
        (xs, ys)
    }

    #[test]
    fn separable_fixture_is_learned() {
        let (xs, ys) = separable();
        let m = train_rf(&xs, &ys, &ForestConfig::default()).unwrap();
        assert_eq!(m.trees.len(), 100);
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap().0, y);
        }
        assert_eq!(m.predict(&[0.1]).unwrap().0, 0);
        assert_eq!(m.predict(&[0.9]).unwrap().0, 1);
    }

    #[test]
    fn constant_labels_give_constant_predictor() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let m = train_rf(&xs, &[1; 10], &ForestConfig::default()).unwrap();
        for x in [-5.0, 0.0, 3.3, 100.0] {
            assert_eq!(m.predict(&[x]).unwrap(), (1, 1.0));
        }
        let m0 = train_rf(&xs, &[0; 10], &ForestConfig::default()).unwrap();
        assert_eq!(m0.predict(&[2.0]).unwrap(), (0, 0.0));
    }

    #[test]
    fn single_leaf_tree_scores_one() {
        let m = RandomForestModel {
            n_features: 1,
            config: ForestConfig::default(),
            trees: vec![Tree {
                nodes: vec![Node::Leaf { counts: [0, 3] }],
            }],
        };
        for x in [-1e9, 0.0, 7.0] {
            assert_eq!(m.predict(&[x]).unwrap().1, 1.0);
        }
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn training_errors() {
        assert!(matches!(train_rf(&[], &[], &ForestConfig::default()), Err(Error::EmptyData)));
        assert!(matches!(
            train_rf(&[vec![1.0], vec![2.0]], &[0, 2], &ForestConfig::default()),
            Err(Error::Label(2))
        ));
        assert!(matches!(
            train_rf(&[vec![1.0], vec![2.0, 3.0]], &[0, 1], &ForestConfig::default()),
            Err(Error::Shape { .. })
        ));
        let bad = ForestConfig { n_trees: 0, ..ForestConfig::default() };
        assert!(train_rf(&[vec![1.0]], &[0], &bad).is_err());
    }

    #[test]
    fn growth_respects_limits() {
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![(i * 37 % 101) as f64, (i % 7) as f64]).collect();
        let ys: Vec<u8> = (0..200).map(|i| ((i * 37 % 101) % 3 == 0) as u8).collect();
        let cfg = ForestConfig { n_trees: 5, max_depth: Some(3), min_leaf: 4, ..ForestConfig::default() };
        let m = train_rf(&xs, &ys, &cfg).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= 3);
            for node in &t.nodes {
                match node {
                    Node::Leaf { counts } => assert!(counts[0] + counts[1] >= 4),
                    Node::Split { feature, .. } => assert!(*feature < 2),
                }
            }
        }
    }

    #[test]
    fn ties_prefer_lowest_feature_and_threshold() {
        // Both features separate the classes perfectly at the same position.
        let xs = vec![vec![0.0, 10.0], vec![1.0, 11.0], vec![2.0, 12.0], vec![3.0, 13.0]];
        let ys = vec![0, 0, 1, 1];
        let cfg = ForestConfig {
            n_trees: 1,
            mtry: Some(2),
            bootstrap: false,
            min_leaf: 1,
            ..ForestConfig::default()
        };
        let m = train_rf(&xs, &ys, &cfg).unwrap();
        match &m.trees[0].nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 1.5);
            }
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a <= t && t < b);
        assert_eq!(midpoint(0.0, 1.0), 0.5);
    }
}
