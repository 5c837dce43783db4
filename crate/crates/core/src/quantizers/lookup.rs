use super::{assemble_result, CodebookSet, LinearObjective, LookupCodebook, QuantContext};
use crate::{CVec, Error, QuantizationResult, Result};

/// Default cap on exhaustive-search objective evaluations.
pub const DEFAULT_SEARCH_CAP: u128 = 1 << 20;

/// Nearest codeword in Euclidean distance; lowest index on ties.
pub fn vq_quantize(x: &CVec, book: &LookupCodebook) -> (usize, CVec) {
    let mut best = (0usize, f64::INFINITY);
    for (i, w) in book.words.iter().enumerate() {
        let d = (w - x).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    (best.0, book.words[best.0].clone())
}

/// Per-RU VQ of `x_m / γ_m`, scored with the sum-EI objective.
pub fn vq_quantize_all(ctx: &QuantContext, books: &CodebookSet) -> Result<QuantizationResult> {
    let obj = ctx.objective(&books.gamma)?;
    check_books(ctx, books)?;
    let mut indices = Vec::new();
    let mut words = Vec::new();
    for (m, book) in books.rus.iter().enumerate() {
        let target = ctx.x_block(m) / crate::linalg::c(books.gamma[m]);
        let (i, w) = vq_quantize(&target, book);
        indices.push(i);
        words.push(w);
    }
    let evals = books.rus.iter().map(|b| b.len() as u64).sum();
    Ok(assemble_result(&obj, words, indices, books.bits(), &books.gamma, evals))
}

pub(crate) fn check_books(ctx: &QuantContext, books: &CodebookSet) -> Result<()> {
    if books.rus.len() != ctx.num_rus() {
        return Err(Error::config(format!("{} codebooks for {} RUs", books.rus.len(), ctx.num_rus())));
    }
    for (m, (b, &d)) in books.rus.iter().zip(&ctx.dims).enumerate() {
        if b.dim != d {
            return Err(Error::config(format!("codebook of RU {m} has dimension {}, expected {d}", b.dim)));
        }
    }
    Ok(())
}

/// Exhaustive joint search (default cap [`DEFAULT_SEARCH_CAP`]).
pub fn mq_quantize(ctx: &QuantContext, books: &CodebookSet) -> Result<QuantizationResult> {
    mq_quantize_with_cap(ctx, books, DEFAULT_SEARCH_CAP)
}

/// Exhaustive joint search over the Cartesian product of codebooks, in
/// lexicographic order with RU 0 most significant; the first minimizer wins.
pub fn mq_quantize_with_cap(ctx: &QuantContext, books: &CodebookSet, cap: u128) -> Result<QuantizationResult> {
    check_books(ctx, books)?;
    let required = books.rus.iter().try_fold(1u128, |acc, b| acc.checked_mul(b.len() as u128)).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Complexity { required, cap });
    }
    let obj = ctx.objective(&books.gamma)?;
    let (indices, _) = exhaustive(&obj, &contributions(&obj, books));
    let words = pick(books, &indices);
    Ok(assemble_result(&obj, words, indices, books.bits(), &books.gamma, required as u64))
}

pub(crate) fn contributions(obj: &LinearObjective, books: &CodebookSet) -> Vec<Vec<CVec>> {
    books.rus.iter().enumerate().map(|(m, b)| obj.contributions(m, b)).collect()
}

pub(crate) fn pick(books: &CodebookSet, indices: &[usize]) -> Vec<CVec> {
    indices.iter().zip(&books.rus).map(|(&i, b)| b.words[i].clone()).collect()
}

/// Odometer enumeration of all index tuples over `parts[m]`; returns the
/// first tuple attaining the minimum of `‖Σ parts[m][i_m] − t‖²`.
pub(crate) fn exhaustive(obj: &LinearObjective, parts: &[Vec<CVec>]) -> (Vec<usize>, f64) {
    let m_count = parts.len();
    let mut idx = vec![0usize; m_count];
    let mut best = (idx.clone(), f64::INFINITY);
    loop {
        let mut e = -obj.t.clone();
        for (m, &i) in idx.iter().enumerate() {
            e += &parts[m][i];
        }
        let v = e.norm_squared();
        if v < best.1 {
            best = (idx.clone(), v);
        }
        let mut m = m_count;
        loop {
            if m == 0 {
                return (best.0, best.1 + obj.offset);
            }
            m -= 1;
            idx[m] += 1;
            if idx[m] < parts[m].len() {
                break;
            }
            idx[m] = 0;
        }
    }
}

/// Sequential search: RUs in `order` each pick the codeword minimizing the
/// sum-EI with earlier RUs fixed and later RUs silent.
pub fn smq_quantize(ctx: &QuantContext, books: &CodebookSet, order: &[usize]) -> Result<QuantizationResult> {
    check_books(ctx, books)?;
    let m_count = ctx.num_rus();
    let mut seen = vec![false; m_count];
    if order.len() != m_count || order.iter().any(|&m| m >= m_count || std::mem::replace(&mut seen[m], true)) {
        return Err(Error::config("SMQ order must be a permutation of the RUs"));
    }
    let obj = ctx.objective(&books.gamma)?;
    let parts = contributions(&obj, books);
    let mut e = -obj.t.clone();
    let mut indices = vec![0usize; m_count];
    for &m in order {
        let i = best_local(&e, &parts[m]);
        e += &parts[m][i];
        indices[m] = i;
    }
    let evals = books.rus.iter().map(|b| b.len() as u64).sum();
    let words = pick(books, &indices);
    Ok(assemble_result(&obj, words, indices, books.bits(), &books.gamma, evals))
}

/// `argmin_i ‖base + parts[i]‖²`, lowest index on ties.
pub(crate) fn best_local(base: &CVec, parts: &[CVec]) -> usize {
    let mut best = (0usize, f64::INFINITY);
    for (i, p) in parts.iter().enumerate() {
        let v = (base + p).norm_squared();
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{complex_gaussian, ChannelState, SystemConfig};
    use crate::CMat;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (QuantContext, CodebookSet) {
        let cfg = SystemConfig::uniform(2, 1, 1, 1, 1, 1, 1.0, 0.1).unwrap();
        let ch = ChannelState::new(CMat::from_row_slice(1, 2, &[c(1.0), c(1.0)]), &cfg).unwrap();
        let w = CMat::from_row_slice(2, 1, &[c(0.5), c(0.5)]);
        let ctx = QuantContext::single(&cfg, &ch, &w, &CVec::from_element(1, c(1.0))).unwrap();
        let book = LookupCodebook::scalar(&[0.0, 1.0]).unwrap();
        (ctx, CodebookSet::new(vec![book.clone(), book], vec![1.0, 1.0]).unwrap())
    }

    #[test]
    fn vq_examples() {
        let book = LookupCodebook::scalar(&[1.0, -1.0]).unwrap();
        assert_eq!(vq_quantize(&CVec::from_element(1, c(0.9)), &book).0, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let big = LookupCodebook::gaussian(3, 6, 1.0, &mut rng).unwrap();
        assert_eq!(vq_quantize(&big.words[17], &big).0, 17);
        for _ in 0..50 {
            let x = CVec::from_fn(3, |_, _| complex_gaussian(&mut rng));
            let d: Vec<f64> = big.words.iter().map(|w| (w - &x).norm_squared()).collect();
            let oracle = (0..d.len()).fold(0, |b, i| if d[i] < d[b] { i } else { b });
            assert_eq!(vq_quantize(&x, &big).0, oracle);
        }
    }

    #[test]
    fn mq_toy_picks_lexicographic_minimizer() {
        let (ctx, books) = toy();
        let r = mq_quantize(&ctx, &books).unwrap();
        assert_eq!(r.indices, vec![0, 1]);
        assert!(r.objective.abs() < 1e-15);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn smq_toy() {
        let (ctx, books) = toy();
        let r = smq_quantize(&ctx, &books, &[0, 1]).unwrap();
        assert_eq!(r.indices, vec![1, 0]);
        assert!(r.objective.abs() < 1e-15);
        assert!(smq_quantize(&ctx, &books, &[0, 0]).is_err());
    }

    #[test]
    fn exact_codewords_give_zero_without_interference() {
        let cfg = SystemConfig::uniform(2, 2, 2, 1, 1, 2, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = ChannelState::new(CMat::from_fn(2, 4, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
        let w = crate::linalg::right_pinv(&ch.h).unwrap();
        let s = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
        let ctx = QuantContext::single(&cfg, &ch, &w, &s).unwrap();
        let books: Vec<LookupCodebook> = (0..2)
            .map(|m| {
                let mut b = LookupCodebook::gaussian(2, 2, 1.0, &mut rng).unwrap();
                b.words[2] = ctx.x_block(m);
                b
            })
            .collect();
        let set = CodebookSet::new(books, vec![1.0, 1.0]).unwrap();
        let r = mq_quantize(&ctx, &set).unwrap();
        assert!(r.objective < 1e-20, "{r:?}");
    }

    #[test]
    fn cap_is_enforced() {
        let (ctx, books) = toy();
        assert!(matches!(mq_quantize_with_cap(&ctx, &books, 3), Err(Error::Complexity { required: 4, cap: 3 })));
    }

    #[test]
    fn single_ru_smq_equals_mq() {
        let cfg = SystemConfig::uniform(1, 2, 2, 1, 1, 3, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let ch = ChannelState::new(CMat::from_fn(2, 2, |_, _| complex_gaussian(&mut rng)), &cfg).unwrap();
            let w = CMat::from_fn(2, 2, |_, _| complex_gaussian(&mut rng));
            let s = CVec::from_fn(2, |_, _| complex_gaussian(&mut rng));
            let ctx = QuantContext::single(&cfg, &ch, &w, &s).unwrap();
            let set =
                CodebookSet::new(vec![LookupCodebook::gaussian(2, 3, 1.0, &mut rng).unwrap()], vec![1.0]).unwrap();
            assert_eq!(smq_quantize(&ctx, &set, &[0]).unwrap().indices, mq_quantize(&ctx, &set).unwrap().indices);
        }
    }
}
