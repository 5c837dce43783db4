//! Codeword re-fit with assignments held fixed.

use crate::linalg::hpd_solve;
use crate::quantizers::LinearObjective;
use crate::{CMat, CVec, Error, Result};

/// Relative Tikhonov damping toward the previous codewords.
pub(crate) const DAMPING: f64 = 1e-9;

/// Joint solves above this many complex unknowns fall back to one block
/// Gauss-Seidel sweep over the RUs.
pub(crate) const JOINT_LIMIT: usize = 2048;

/// Per-RU role in one training pair.
#[derive(Clone, Debug)]
pub(crate) enum Slot {
    /// Uses codeword `i` of the RU's trainable book.
    Var(usize),
    /// Contributes a frozen codeword.
    Fixed(CVec),
}

/// One training pair: its objective (power scales folded in) and slots.
pub(crate) struct Item {
    pub obj: LinearObjective,
    pub slots: Vec<Slot>,
}

impl Item {
    /// Target with the frozen contributions moved over.
    fn reduced_target(&self) -> CVec {
        let mut t = self.obj.t.clone();
        for (m, s) in self.slots.iter().enumerate() {
            if let Slot::Fixed(c) = s {
                t -= self.obj.contribution(m, c);
            }
        }
        t
    }
}

/// Minimizes `Σ_items obj(codewords)` over the trainable books in place.
pub(crate) fn refit(books: &mut [Vec<CVec>], items: &[Item]) -> Result<()> {
    let unknowns: usize = books.iter().map(|b| b.iter().map(|w| w.len()).sum::<usize>()).sum();
    if unknowns <= JOINT_LIMIT {
        joint(books, items, unknowns)
    } else {
        gauss_seidel(books, items)
    }
}

fn offsets(books: &[Vec<CVec>]) -> Vec<Vec<usize>> {
    let mut at = 0;
    books
        .iter()
        .map(|b| {
            b.iter()
                .map(|w| {
                    let o = at;
                    at += w.len();
                    o
                })
                .collect()
        })
        .collect()
}

fn damped_solve(mut g: CMat, mut rhs: CVec, prev: &CVec) -> Result<CVec> {
    let scale = (0..g.nrows()).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    let lambda = DAMPING * if scale > 0.0 { scale } else { 1.0 };
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    rhs += prev * crate::linalg::c(lambda);
    let z = hpd_solve(&g, &CMat::from_column_slice(rhs.len(), 1, rhs.as_slice())).ok_or_else(|| Error::NonFinite {
        step: 0,
        detail: "codeword re-fit system is not positive definite".into(),
    })?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0, detail: "codeword re-fit produced non-finite values".into() });
    }
    Ok(z.column(0).into_owned())
}

fn joint(books: &mut [Vec<CVec>], items: &[Item], n: usize) -> Result<()> {
    let off = offsets(books);
    let mut g = CMat::zeros(n, n);
    let mut rhs = CVec::zeros(n);
    for item in items {
        let t = item.reduced_target();
        let vars: Vec<(usize, usize)> = item
            .slots
            .iter()
            .enumerate()
            .filter_map(|(m, s)| if let Slot::Var(i) = s { Some((off[m][*i], m)) } else { None })
            .collect();
        for &(o, m) in &vars {
            let a = &item.obj.a[m];
            let d = a.ncols();
            let r = a.adjoint() * &t;
            let mut seg = rhs.rows_mut(o, d);
            seg += r;
            for &(o2, m2) in &vars {
                let block = a.adjoint() * &item.obj.a[m2];
                let mut view = g.view_mut((o, o2), (d, block.ncols()));
                view += block;
            }
        }
    }
    let prev = crate::model::concat_blocks(&books.iter().flatten().cloned().collect::<Vec<_>>());
    let z = damped_solve(g, rhs, &prev)?;
    for (m, book) in books.iter_mut().enumerate() {
        for (i, w) in book.iter_mut().enumerate() {
            let d = w.len();
            *w = z.rows(off[m][i], d).into_owned();
        }
    }
    Ok(())
}

fn gauss_seidel(books: &mut [Vec<CVec>], items: &[Item]) -> Result<()> {
    let targets: Vec<CVec> = items.iter().map(Item::reduced_target).collect();
    for m in 0..books.len() {
        let d = books[m].first().map_or(0, |w| w.len());
        let mut g: Vec<CMat> = vec![CMat::zeros(d, d); books[m].len()];
        let mut rhs: Vec<CVec> = vec![CVec::zeros(d); books[m].len()];
        for (item, t) in items.iter().zip(&targets) {
            let Slot::Var(i) = item.slots[m] else { continue };
            let mut rest = t.clone();
            for (m2, s) in item.slots.iter().enumerate() {
                if let (true, Slot::Var(i2)) = (m2 != m, s) {
                    rest -= item.obj.contribution(m2, &books[m2][*i2]);
                }
            }
            let a = &item.obj.a[m];
            g[i] += a.adjoint() * a;
            rhs[i] += a.adjoint() * rest;
        }
        for (i, (gi, ri)) in g.into_iter().zip(rhs).enumerate() {
            books[m][i] = damped_solve(gi, ri, &books[m][i])?;
        }
    }
    Ok(())
}
