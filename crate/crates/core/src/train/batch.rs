use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::model::{Instance, LossStats, Model};
use crate::numeric::{Gradients, Real, Tape};
use crate::train::corpus::Corpus;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchSpec {
    pub batch_size: usize,
    /// `None` keeps every translation-only instance.
    pub mt_data_cap: Option<f64>,
}

/// `(corpus, instance)` references for one epoch, grouped into batches.
///
/// Labeled instances are all used. Translation-only instances are
/// subsampled without replacement to `floor(mt_data_cap * labeled)`. The
/// pool is then shuffled uniformly and cut into consecutive batches, so
/// every batch mixes corpora at random.
pub fn make_batches<R: Rng>(corpora: &[Corpus], spec: &BatchSpec, rng: &mut R) -> Vec<Vec<(usize, usize)>> {
    let mut labeled = Vec::new();
    let mut translation = Vec::new();
    for (c, corpus) in corpora.iter().enumerate() {
        for (i, inst) in corpus.instances.iter().enumerate() {
            if inst.target_lang.srl {
                labeled.push((c, i));
            } else {
                translation.push((c, i));
            }
        }
    }
    let cap = match spec.mt_data_cap {
        Some(frac) => ((frac * labeled.len() as f64).floor() as usize).min(translation.len()),
        None => translation.len(),
    };
    translation.shuffle(rng);
    translation.truncate(cap);

    let mut pool = labeled;
    pool.extend(translation);
    pool.shuffle(rng);
    pool.chunks(spec.batch_size.max(1)).map(<[_]>::to_vec).collect()
}

const CHUNK: usize = 4;

/// Mean per-instance loss gradient over `batch`.
///
/// Instances are processed in fixed chunks of four, in parallel, and the
/// chunk sums are added in order; the result does not depend on the
/// thread count.
pub fn batch_gradients<T: Real>(model: &Model<T>, batch: &[&Instance]) -> Result<(Gradients<T>, LossStats)> {
    let parts: Vec<Result<(Gradients<T>, LossStats)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Gradients::zeros_like(&model.params);
            let mut stats = LossStats::default();
            for inst in chunk {
                let mut tape = Tape::new(&model.params);
                let (loss, s) = model.forward_loss(&mut tape, inst)?;
                tape.backward_into(loss, &mut g)?;
                stats.absorb(&s);
            }
            Ok((g, stats))
        })
        .collect();
    let mut total = Gradients::zeros_like(&model.params);
    let mut stats = LossStats::default();
    for part in parts {
        let (g, s) = part?;
        total.add_assign(&g);
        stats.absorb(&s);
    }
    if !batch.is_empty() {
        total.scale(T::one() / T::lit(batch.len() as f64));
    }
    Ok((total, stats))
}
