use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{from_triples, node};
use crate::algebra::{Database, Value};

/// Label of edges from the unlabelled generators.
pub const DEFAULT_LABEL: &str = "e";

/// Seeded random graph description. Equal specs give equal graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GenSpec {
    /// Nodes `1..=n`; every ordered pair `(u, v)`, `u != v`, is an edge with
    /// probability `p`.
    ErdosRenyi { n: u64, p: f64, seed: u64 },
    /// Nodes `1..=n`; node `i + 1` becomes the child of a uniformly chosen
    /// node among `1..=i`.
    RandomTree { n: u64, seed: u64 },
    /// `base` with each edge given one of `labels` labels uniformly.
    Labeled {
        base: Box<GenSpec>,
        labels: usize,
        seed: u64,
    },
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            GenSpec::ErdosRenyi { n, p, .. } => {
                if *n == 0 {
                    return Err("n must be at least 1".into());
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("p = {p} is not a probability"));
                }
                Ok(())
            }
            GenSpec::RandomTree { n, .. } if *n == 0 => Err("n must be at least 1".into()),
            GenSpec::RandomTree { .. } => Ok(()),
            GenSpec::Labeled { base, labels, .. } => {
                if *labels == 0 {
                    return Err("at least one label is needed".into());
                }
                base.validate()
            }
        }
    }

    /// Directed edges with their label index (`None` for unlabelled).
    pub fn edges(&self) -> Vec<(u64, Option<usize>, u64)> {
        match self {
            GenSpec::ErdosRenyi { n, p, seed } => erdos_renyi(*n, *p, *seed)
                .into_iter()
                .map(|(u, v)| (u, None, v))
                .collect(),
            GenSpec::RandomTree { n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (2..=*n).map(|child| (rng.gen_range(1..child), None, child)).collect()
            }
            GenSpec::Labeled { base, labels, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                base.edges()
                    .into_iter()
                    .map(|(u, _, v)| (u, Some(rng.gen_range(0..*labels)), v))
                    .collect()
            }
        }
    }
}

/// `a`..`z`, then `l26`, `l27`, ...
pub fn label_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("l{i}")
    }
}

/// Skips over the `n(n-1)` candidate pairs with geometric gaps, which draws
/// the same distribution as one coin flip per pair.
fn erdos_renyi(n: u64, p: f64, seed: u64) -> Vec<(u64, u64)> {
    let slots = n * (n - 1);
    let pair = |k: u64| {
        let u = k / (n - 1);
        let r = k % (n - 1);
        let v = if r < u { r } else { r + 1 };
        (u + 1, v + 1)
    };
    if p <= 0.0 || slots == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..slots).map(pair).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_q = (1.0 - p).ln();
    let mut out = Vec::with_capacity((slots as f64 * p * 1.1) as usize + 16);
    let mut k: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (slots - k) as f64 {
            break;
        }
        k += gap as u64;
        out.push(pair(k));
        k += 1;
        if k >= slots {
            break;
        }
    }
    out
}

/// Materializes `spec` as the `edges` relation.
pub fn generate(spec: &GenSpec) -> Result<Database, String> {
    spec.validate()?;
    Ok(from_triples(spec.edges().into_iter().map(|(u, l, v)| {
        let label = l.map_or_else(|| DEFAULT_LABEL.to_string(), label_name);
        (node(u), Value::from(label), node(v))
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EDGES;

    #[test]
    fn tree_has_n_minus_one_edges() {
        for n in [1, 2, 10, 500] {
            let e = GenSpec::RandomTree { n, seed: 3 }.edges();
            assert_eq!(e.len() as u64, n - 1);
            assert!(e.iter().all(|&(p, _, c)| p < c));
        }
    }

    #[test]
    fn erdos_renyi_extremes() {
        let none = generate(&GenSpec::ErdosRenyi { n: 10, p: 0.0, seed: 1 }).unwrap();
        assert_eq!(none.get(EDGES).unwrap().len(), 0);
        let all = GenSpec::ErdosRenyi { n: 10, p: 1.0, seed: 1 }.edges();
        assert_eq!(all.len(), 90);
        assert!(all
            .iter()
            .all(|&(u, _, v)| u != v && (1..=10).contains(&u) && (1..=10).contains(&v)));
        assert!(GenSpec::ErdosRenyi { n: 1, p: 0.5, seed: 1 }.edges().is_empty());
    }

    #[test]
    fn seeded_and_labelled() {
        let spec = GenSpec::Labeled {
            base: Box::new(GenSpec::ErdosRenyi { n: 50, p: 0.1, seed: 7 }),
            labels: 3,
            seed: 8,
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let labels: std::collections::BTreeSet<_> = spec.edges().iter().map(|e| e.1.unwrap()).collect();
        assert_eq!(labels, (0..3).collect());
        assert_ne!(
            GenSpec::ErdosRenyi { n: 50, p: 0.1, seed: 7 }.edges(),
            GenSpec::ErdosRenyi { n: 50, p: 0.1, seed: 9 }.edges()
        );
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&GenSpec::ErdosRenyi { n: 0, p: 0.5, seed: 0 }).is_err());
        assert!(generate(&GenSpec::ErdosRenyi { n: 5, p: 1.5, seed: 0 }).is_err());
        let spec = GenSpec::Labeled {
            base: Box::new(GenSpec::RandomTree { n: 5, seed: 0 }),
            labels: 0,
            seed: 0,
        };
        assert!(generate(&spec).is_err());
        assert_eq!(label_name(1), "b");
        assert_eq!(label_name(30), "l30");
    }
}
