use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::Rng;

pub type Triplet = (usize, usize, usize);

/// Anchor, positive and negative row indices into one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSet {
    pub triplets: Vec<Triplet>,
    pub split: String,
    pub seed: u64,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Checks label constraints, bounds and uniqueness.
    pub fn validate(&self, labels: &[usize]) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.triplets.len());
        for &(a, p, n) in &self.triplets {
            if a >= labels.len() || p >= labels.len() || n >= labels.len() {
                return Err(Error::Sampling(format!("triplet ({a}, {p}, {n}) out of bounds")));
            }
            if a == p || labels[a] != labels[p] || labels[n] == labels[a] {
                return Err(Error::Sampling(format!("triplet ({a}, {p}, {n}) violates label constraints")));
            }
            if !seen.insert((a, p, n)) {
                return Err(Error::Sampling(format!("duplicate triplet ({a}, {p}, {n})")));
            }
        }
        Ok(())
    }

    /// One `anchor,positive,negative` line of participant ids per triplet.
    pub fn to_csv(&self, ids: &[String]) -> String {
        let mut out = String::new();
        for &(a, p, n) in &self.triplets {
            writeln!(out, "{},{},{}", ids[a], ids[p], ids[n]).expect("write to String");
        }
        out
    }

    pub fn from_csv(text: &str, ids: &[String], split: &str, seed: u64) -> Result<Self> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut triplets = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::format(k + 1, "expected `anchor,positive,negative`"));
            }
            let look = |s: &str| {
                index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::format(k + 1, format!("unknown participant `{s}`")))
            };
            triplets.push((look(parts[0])?, look(parts[1])?, look(parts[2])?));
        }
        Ok(Self {
            triplets,
            split: split.to_string(),
            seed,
        })
    }
}

/// Number of distinct valid ordered triplets for the given labels.
pub fn distinct_triplet_count(labels: &[usize]) -> u128 {
    let mut sizes: HashMap<usize, u128> = HashMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    let total = labels.len() as u128;
    sizes.values().map(|&m| m * m.saturating_sub(1) * (total - m)).sum()
}

/// Draws `count` unique triplets: anchor class uniform over classes with at
/// least two members, anchor and positive distinct members of it, negative
/// class uniform over the remaining classes, members uniform within class.
pub fn sample_triplets(labels: &[usize], count: usize, rng: &mut Rng) -> Result<Vec<Triplet>> {
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    let mut classes: Vec<usize> = members.keys().copied().collect();
    classes.sort_unstable();
    let anchor_classes: Vec<usize> = classes.iter().copied().filter(|c| members[c].len() >= 2).collect();
    if anchor_classes.is_empty() || classes.len() < 2 {
        return Err(Error::Sampling(format!(
            "need two classes and one with two members; have {} classes",
            classes.len()
        )));
    }
    let available = distinct_triplet_count(labels);
    if count as u128 > available {
        return Err(Error::Sampling(format!(
            "{count} unique triplets requested but only {available} exist"
        )));
    }

    if 2 * count as u128 > available {
        let mut all = Vec::with_capacity(available as usize);
        for &c in &anchor_classes {
            for &a in &members[&c] {
                for &p in &members[&c] {
                    if a == p {
                        continue;
                    }
                    for (n, &ln) in labels.iter().enumerate() {
                        if ln != c {
                            all.push((a, p, n));
                        }
                    }
                }
            }
        }
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }

    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = anchor_classes[rng.random_range(0..anchor_classes.len())];
        let pool = &members[&c];
        let a_pos = rng.random_range(0..pool.len());
        let mut p_pos = rng.random_range(0..pool.len() - 1);
        if p_pos >= a_pos {
            p_pos += 1;
        }
        let mut nc_pos = rng.random_range(0..classes.len() - 1);
        if classes[nc_pos] >= c {
            nc_pos += 1;
        }
        let neg_pool = &members[&classes[nc_pos]];
        let n = neg_pool[rng.random_range(0..neg_pool.len())];
        let t = (pool[a_pos], pool[p_pos], n);
        if seen.insert(t) {
            out.push(t);
        }
    }
    Ok(out)
}
