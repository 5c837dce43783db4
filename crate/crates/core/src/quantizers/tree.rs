use super::codebook::{TreeCodebook, TreeCodebookSet};
use super::lookup::DEFAULT_SEARCH_CAP;
use super::{assemble_result, QuantContext};
use crate::linalg::c;
use crate::{CVec, Error, QuantizationResult, Result};

/// Outcome of a point-to-point tree search.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSearch {
    pub index: usize,
    pub codeword: CVec,
    /// Two-way comparisons performed.
    pub comparisons: u32,
}

/// Descends the tree with one nearest-of-two decision per level (left child
/// on ties).
pub fn tree_quantize(x: &CVec, tree: &TreeCodebook) -> TreeSearch {
    let mut j = 0usize;
    let mut comparisons = 0;
    for b in 1..=tree.levels.len() {
        let (l, r) = if b == 1 { (0, 1) } else { TreeCodebook::children(j) };
        let level = tree.level(b);
        comparisons += 1;
        j = if (&level[r] - x).norm_squared() < (&level[l] - x).norm_squared() { r } else { l };
    }
    TreeSearch { index: j, codeword: tree.levels.last().expect("non-empty")[j].clone(), comparisons }
}

fn check_trees(ctx: &QuantContext, trees: &TreeCodebookSet) -> Result<()> {
    if trees.rus.len() != ctx.num_rus() {
        return Err(Error::config(format!("{} trees for {} RUs", trees.rus.len(), ctx.num_rus())));
    }
    if trees.rus.iter().zip(&ctx.dims).any(|(t, &d)| t.dim() != d) {
        return Err(Error::config("tree dimensions do not match the RUs"));
    }
    Ok(())
}

/// Independent per-RU tree search on `x_m / γ_m`, scored with sum-EI.
pub fn tree_quantize_all(ctx: &QuantContext, trees: &TreeCodebookSet) -> Result<QuantizationResult> {
    check_trees(ctx, trees)?;
    let obj = ctx.objective(&trees.gamma)?;
    let mut indices = Vec::new();
    let mut words = Vec::new();
    let mut evals = 0u64;
    for (m, tree) in trees.rus.iter().enumerate() {
        let r = tree_quantize(&(ctx.x_block(m) / c(trees.gamma[m])), tree);
        evals += 2 * r.comparisons as u64;
        indices.push(r.index);
        words.push(r.codeword);
    }
    let bits = trees.rus.iter().map(|t| t.bits()).collect();
    Ok(assemble_result(&obj, words, indices, bits, &trees.gamma, evals))
}

pub fn tree_mq_quantize(ctx: &QuantContext, trees: &TreeCodebookSet) -> Result<QuantizationResult> {
    tree_mq_quantize_with_cap(ctx, trees, DEFAULT_SEARCH_CAP)
}

/// Level-by-level joint search: at level `b` every RU with at least `b`
/// bits chooses between the two children of its current node, jointly over
/// the `2^{#active}` combinations; RUs whose tree is exhausted keep their
/// leaf. Counts one evaluation per combination.
pub fn tree_mq_quantize_with_cap(ctx: &QuantContext, trees: &TreeCodebookSet, cap: u128) -> Result<QuantizationResult> {
    check_trees(ctx, trees)?;
    let m_count = ctx.num_rus();
    if m_count >= 127 || (1u128 << m_count) > cap {
        return Err(Error::Complexity { required: 1u128.checked_shl(m_count as u32).unwrap_or(u128::MAX), cap });
    }
    let obj = ctx.objective(&trees.gamma)?;
    let depth = trees.rus.iter().map(|t| t.levels.len()).max().unwrap_or(0);
    let mut node = vec![0usize; m_count];
    let mut current: Vec<CVec> = trees.rus.iter().map(|t| CVec::zeros(t.dim())).collect();
    let mut evals = 0u64;
    for b in 1..=depth {
        let active: Vec<usize> = (0..m_count).filter(|&m| trees.rus[m].levels.len() >= b).collect();
        let mut base = -obj.t.clone();
        for m in (0..m_count).filter(|m| !active.contains(m)) {
            base += obj.contribution(m, &current[m]);
        }
        let options: Vec<[(usize, CVec); 2]> = active
            .iter()
            .map(|&m| {
                let (l, r) = if b == 1 { (0, 1) } else { TreeCodebook::children(node[m]) };
                let level = trees.rus[m].level(b);
                [(l, obj.contribution(m, &level[l])), (r, obj.contribution(m, &level[r]))]
            })
            .collect();
        let mut best = (0u64, f64::INFINITY);
        for combo in 0..1u64 << active.len() {
            let mut e = base.clone();
            for (k, opt) in options.iter().enumerate() {
                let bit = (combo >> (active.len() - 1 - k)) & 1;
                e += &opt[bit as usize].1;
            }
            let v = e.norm_squared();
            if v < best.1 {
                best = (combo, v);
            }
            evals += 1;
        }
        for (k, &m) in active.iter().enumerate() {
            let bit = ((best.0 >> (active.len() - 1 - k)) & 1) as usize;
            node[m] = options[k][bit].0;
            current[m] = trees.rus[m].level(b)[node[m]].clone();
        }
    }
    let bits = trees.rus.iter().map(|t| t.bits()).collect();
    Ok(assemble_result(&obj, current, node, bits, &trees.gamma, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{complex_gaussian, ChannelState, SystemConfig};
    use crate::quantizers::{mq_quantize, CodebookSet, LookupCodebook};
    use crate::{CMat, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_tree() -> TreeCodebook {
        let v = |x: f64| CVec::from_element(1, C64::new(x, 0.0));
        TreeCodebook::new(vec![vec![v(-2.0), v(2.0)], vec![v(-3.0), v(-1.0), v(1.0), v(3.0)]]).unwrap()
    }

    pub(crate) fn random_tree(dim: usize, bits: u32, rng: &mut ChaCha8Rng) -> TreeCodebook {
        TreeCodebook::new(
            (1..=bits)
                .map(|b| (0..1 << b).map(|_| CVec::from_fn(dim, |_, _| complex_gaussian(rng))).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_tree_trace() {
        let r = tree_quantize(&CVec::from_element(1, C64::new(0.5, 0.0)), &scalar_tree());
        assert_eq!(r.index, 2);
        assert_eq!(r.codeword[0], C64::new(1.0, 0.0));
        assert_eq!(r.comparisons, 2);
    }

    #[test]
    fn one_level_tree_is_vq() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tree(2, 1, &mut rng);
        let book = t.leaves();
        for _ in 0..20 {
            let x = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
            assert_eq!(tree_quantize(&x, &t).index, crate::quantizers::vq_quantize(&x, &book).0);
        }
    }

    #[test]
    fn tree_mq_counts_and_reduces_to_mq() {
        let cfg = SystemConfig::uniform(2, 2, 1, 1, 1, 3, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = ChannelState::new(CMat::from_fn(2, 2, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
        let w = CMat::from_fn(2, 2, |_, _| complex_gaussian(&mut rng));
        let s = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
        let ctx = QuantContext::single(&cfg, &ch, &w, &s).unwrap();
        let trees =
            TreeCodebookSet::new(vec![random_tree(1, 3, &mut rng), random_tree(1, 3, &mut rng)], vec![1.0, 1.0])
                .unwrap();
        assert_eq!(tree_mq_quantize(&ctx, &trees).unwrap().evaluations, 12);

        let flat = TreeCodebookSet::new(vec![random_tree(1, 1, &mut rng), random_tree(1, 1, &mut rng)], vec![1.0, 1.0])
            .unwrap();
        let books =
            CodebookSet::new(flat.rus.iter().map(|t| t.leaves()).collect::<Vec<LookupCodebook>>(), vec![1.0, 1.0])
                .unwrap();
        assert_eq!(tree_mq_quantize(&ctx, &flat).unwrap().indices, mq_quantize(&ctx, &books).unwrap().indices);
    }

    #[test]
    fn unequal_depths_freeze_short_trees() {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = ChannelState::new(CMat::from_fn(1, 2, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
        let ctx = QuantContext::single(
            &cfg,
            &ch,
            &CMat::from_fn(2, 1, |_, _| complex_gaussian(&mut rng)),
            &CVec::from_element(1, C64::new(1.0, 0.0)),
        )
        .unwrap();
        let trees =
            TreeCodebookSet::new(vec![random_tree(1, 1, &mut rng), random_tree(1, 3, &mut rng)], vec![1.0, 1.0])
                .unwrap();
        let r = tree_mq_quantize(&ctx, &trees).unwrap();
        assert_eq!(r.evaluations, 4 + 2 + 2);
        assert!(r.indices[0] < 2 && r.indices[1] < 8);
        assert_eq!(r.bit_widths, vec![1, 3]);
    }
}
