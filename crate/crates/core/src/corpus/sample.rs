use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError};

/// How documents are drawn for the development and evaluation samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SampleStrategy {
    Simple,
    /// Proportional allocation over the values of a metadata key.
    Stratified { by: String },
}

#[derive(Debug, Clone)]
pub struct Split {
    pub dev: Corpus,
    pub eval: Corpus,
}

/// Draw disjoint dev/eval samples.
///
/// Randomness comes from ChaCha8 seeded with `seed` via `seed_from_u64`, so a
/// split replicates on every platform. Both samples keep corpus order.
pub fn sample_split(
    corpus: &Corpus,
    n_dev: usize,
    n_eval: usize,
    strategy: &SampleStrategy,
    seed: u64,
) -> Result<Split, CorpusError> {
    let n = corpus.len();
    if n_dev + n_eval > n {
        return Err(CorpusError::InsufficientDocuments {
            requested: n_dev + n_eval,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = corpus.documents();

    let (dev_idx, eval_idx): (Vec<usize>, Vec<usize>) = match strategy {
        SampleStrategy::Simple => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            (
                order[..n_dev].to_vec(),
                order[n_dev..n_dev + n_eval].to_vec(),
            )
        }
        SampleStrategy::Stratified { by } => {
            let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, d) in docs.iter().enumerate() {
                let value = d.metadata.get(by).ok_or_else(|| CorpusError::UnknownStratum {
                    key: by.clone(),
                    doc: d.id.clone(),
                })?;
                strata.entry(value.as_str()).or_default().push(i);
            }
            let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
            let dev_alloc = allocate_largest_remainder(n_dev, &sizes);
            let eval_alloc = allocate_largest_remainder(n_eval, &sizes);

            let short: Vec<String> = strata
                .keys()
                .zip(sizes.iter().zip(dev_alloc.iter().zip(&eval_alloc)))
                .filter(|(_, (size, (d, e)))| *d + *e > **size)
                .map(|(k, (size, (d, e)))| format!("{k} (size {size}, needs {})", d + e))
                .collect();
            if !short.is_empty() {
                return Err(CorpusError::StrataTooSmall(short.join(", ")));
            }

            let mut dev = Vec::with_capacity(n_dev);
            let mut eval = Vec::with_capacity(n_eval);
            for (members, (d, e)) in strata.into_values().zip(dev_alloc.into_iter().zip(eval_alloc)) {
                let mut members = members;
                members.shuffle(&mut rng);
                dev.extend_from_slice(&members[..d]);
                eval.extend_from_slice(&members[d..d + e]);
            }
            (dev, eval)
        }
    };

    let pick = |idx: Vec<usize>| {
        let keep: HashSet<String> = idx.into_iter().map(|i| docs[i].id.clone()).collect();
        corpus.subset(&keep)
    };
    Ok(Split {
        dev: pick(dev_idx),
        eval: pick(eval_idx),
    })
}

/// Hamilton (largest remainder) apportionment of `total` over `sizes`.
///
/// Each stratum first gets `floor(total * size / N)`; leftover units go to the
/// largest fractional remainders, ties broken by stratum order. Integer
/// arithmetic only.
pub fn allocate_largest_remainder(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|s| total * s / n).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = total * sizes[a] % n;
        let rb = total * sizes[b] % n;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        alloc[i] += 1;
    }
    alloc
}
