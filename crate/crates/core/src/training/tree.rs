use super::refit::{refit, Item, Slot};
use super::TrainingSet;
use crate::linalg::c;
use crate::quantizers::{tree_mq_quantize, TreeCodebook, TreeCodebookSet};
use crate::{par_map, CVec, Error, Result, C64};

/// Relative size of the split that seeds two children from their parent.
const SPLIT_JITTER: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeTrainOutcome {
    pub trees: TreeCodebookSet,
    /// Mean training objective after every assignment step, per level.
    pub traces: Vec<Vec<f64>>,
}

/// Trains one tree per RU level by level. Each level starts from its
/// parents split by a small jitter and runs `rounds` Lloyd-Max rounds in
/// which the assignments come from tree-MQ restricted to the levels trained
/// so far; earlier levels stay frozen. RU `m` gets `cfg.bits[m]` levels.
pub fn tree_codebook_train(set: &TrainingSet, gamma: &[f64], rounds: usize) -> Result<TreeTrainOutcome> {
    let cfg = &set.cfg;
    let m_count = cfg.num_rus();
    if rounds == 0 || gamma.len() != m_count {
        return Err(Error::config("tree training needs rounds >= 1 and one power scale per RU"));
    }
    let depth = cfg.bits.iter().copied().max().unwrap_or(0) as usize;
    let targets: Vec<Vec<CVec>> =
        set.samples.iter().map(|s| (0..m_count).map(|m| s.ctx.x_block(m) / c(gamma[m])).collect()).collect();
    let mut levels: Vec<Vec<Vec<CVec>>> = vec![Vec::new(); m_count];
    // Node of every sample at the deepest trained level, per RU.
    let mut nodes: Vec<Vec<usize>> = vec![vec![0; m_count]; set.len()];
    let mut traces = Vec::with_capacity(depth);
    for b in 1..=depth {
        let active: Vec<usize> = (0..m_count).filter(|&m| cfg.bits[m] as usize >= b).collect();
        for &m in &active {
            let parents: Vec<CVec> =
                if b == 1 { vec![mean(targets.iter().map(|t| &t[m]), cfg.n_tx[m])] } else { levels[m][b - 2].clone() };
            let mut children = Vec::with_capacity(2 * parents.len());
            for (j, p) in parents.iter().enumerate() {
                let members: Vec<&CVec> =
                    targets.iter().zip(&nodes).filter(|(_, n)| n[m] == j).map(|(t, _)| &t[m]).collect();
                let spread = if members.is_empty() {
                    0.0
                } else {
                    (members.iter().map(|t| (*t - p).norm_squared()).sum::<f64>() / members.len() as f64).sqrt()
                };
                let scale = if spread > 0.0 { spread } else { 1.0 };
                let dir = C64::new(1.0, 1.0) / 2f64.sqrt() * (SPLIT_JITTER * scale);
                children.push(p.map(|v| v - dir));
                children.push(p.map(|v| v + dir));
            }
            levels[m].push(children);
        }
        let mut trace = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let trees = truncated(&levels, gamma, b)?;
            let results = par_map(&set.samples, |s| tree_mq_quantize(&s.ctx, &trees));
            let results = results.into_iter().collect::<Result<Vec<_>>>()?;
            trace.push(results.iter().map(|r| r.objective).sum::<f64>() / set.len() as f64);
            let items = set
                .samples
                .iter()
                .zip(&results)
                .map(|(s, r)| {
                    let slots = (0..m_count)
                        .map(|m| {
                            if active.contains(&m) {
                                Slot::Var(r.indices[m])
                            } else {
                                Slot::Fixed(r.xhat_block(cfg, m))
                            }
                        })
                        .collect();
                    Ok(Item { obj: s.ctx.objective(gamma)?, slots })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut books: Vec<Vec<CVec>> =
                (0..m_count).map(|m| if active.contains(&m) { levels[m][b - 1].clone() } else { Vec::new() }).collect();
            refit(&mut books, &items)?;
            for &m in &active {
                levels[m][b - 1] = std::mem::take(&mut books[m]);
            }
            for (n, r) in nodes.iter_mut().zip(&results) {
                for &m in &active {
                    n[m] = r.indices[m];
                }
            }
        }
        log::debug!("tree level {b}: objective {:.6e}", trace.last().copied().unwrap_or(f64::NAN));
        traces.push(trace);
    }
    Ok(TreeTrainOutcome { trees: truncated(&levels, gamma, depth)?, traces })
}

fn mean<'a>(xs: impl Iterator<Item = &'a CVec>, dim: usize) -> CVec {
    let mut sum = CVec::zeros(dim);
    let mut n = 0usize;
    for x in xs {
        sum += x;
        n += 1;
    }
    if n > 0 {
        sum / c(n as f64)
    } else {
        sum
    }
}

fn truncated(levels: &[Vec<Vec<CVec>>], gamma: &[f64], b: usize) -> Result<TreeCodebookSet> {
    let trees = levels.iter().map(|l| TreeCodebook::new(l[..b.min(l.len())].to_vec())).collect::<Result<Vec<_>>>()?;
    TreeCodebookSet::new(trees, gamma.to_vec())
}
