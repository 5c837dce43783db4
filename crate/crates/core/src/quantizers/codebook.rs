use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::complex_gaussian;
use crate::{CVec, Error, Result, C64};

/// Codebook of `2^bits` complex vectors of length `dim`; index `i` is sent
/// as the `bits`-bit natural binary encoding of `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBook", into = "RawBook")]
pub struct LookupCodebook {
    pub dim: usize,
    pub bits: u32,
    pub words: Vec<CVec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBook {
    dim: usize,
    bits: u32,
    /// Row-major: codeword `i`, antenna `j` at `i * dim + j`, as `[re, im]`.
    entries: Vec<[f64; 2]>,
}

impl TryFrom<RawBook> for LookupCodebook {
    type Error = Error;

    fn try_from(raw: RawBook) -> Result<Self> {
        if raw.dim == 0 || !raw.entries.len().is_multiple_of(raw.dim) {
            return Err(Error::Format(format!(
                "{} entries do not split into vectors of {}",
                raw.entries.len(),
                raw.dim
            )));
        }
        let words = raw
            .entries
            .chunks(raw.dim)
            .map(|ch| CVec::from_iterator(raw.dim, ch.iter().map(|e| C64::new(e[0], e[1]))))
            .collect();
        let book = LookupCodebook::new(words)?;
        if book.bits != raw.bits {
            return Err(Error::Format(format!("declared {} bits, found {} codewords", raw.bits, book.len())));
        }
        Ok(book)
    }
}

impl From<LookupCodebook> for RawBook {
    fn from(b: LookupCodebook) -> Self {
        RawBook {
            dim: b.dim,
            bits: b.bits,
            entries: b.words.iter().flat_map(|w| w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect(),
        }
    }
}

impl LookupCodebook {
    /// Requires a power-of-two number of equally sized finite codewords.
    pub fn new(words: Vec<CVec>) -> Result<Self> {
        let count = words.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(Error::Format(format!("codebook size {count} is not a power of two >= 2")));
        }
        let dim = words[0].len();
        if dim == 0 || words.iter().any(|w| w.len() != dim) {
            return Err(Error::Format("codewords must share a non-zero dimension".into()));
        }
        if words.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Format("codewords must be finite".into()));
        }
        Ok(LookupCodebook { dim, bits: count.trailing_zeros(), words })
    }

    /// Scalar codebook from real values.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| CVec::from_element(1, C64::new(v, 0.0))).collect())
    }

    /// i.i.d. `CN(0, scale²)` entries.
    pub fn gaussian<R: Rng + ?Sized>(dim: usize, bits: u32, scale: f64, rng: &mut R) -> Result<Self> {
        check_bits(bits)?;
        Self::new((0..1usize << bits).map(|_| CVec::from_fn(dim, |_, _| complex_gaussian(rng) * scale)).collect())
    }

    /// Codewords drawn uniformly on the complex sphere of radius `radius`.
    pub fn uniform_sphere<R: Rng + ?Sized>(dim: usize, bits: u32, radius: f64, rng: &mut R) -> Result<Self> {
        check_bits(bits)?;
        Self::new(
            (0..1usize << bits)
                .map(|_| {
                    let v = CVec::from_fn(dim, |_, _| complex_gaussian(rng));
                    let n = v.norm();
                    v * C64::new(radius / n, 0.0)
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > 24 {
        return Err(Error::config(format!("lookup codebooks support 1..=24 bits, got {bits}")));
    }
    Ok(())
}

/// One lookup codebook per RU plus the power scales they were trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSet {
    pub format: String,
    pub gamma: Vec<f64>,
    pub rus: Vec<LookupCodebook>,
}

pub(crate) const CODEBOOK_FORMAT: &str = "fronthaul-mq/lookup-codebook/v1";
pub(crate) const TREE_FORMAT: &str = "fronthaul-mq/tree-codebook/v1";

impl CodebookSet {
    pub fn new(rus: Vec<LookupCodebook>, gamma: Vec<f64>) -> Result<Self> {
        if rus.len() != gamma.len() {
            return Err(Error::config("one power scale per codebook is required"));
        }
        Ok(CodebookSet { format: CODEBOOK_FORMAT.into(), gamma, rus })
    }

    pub fn bits(&self) -> Vec<u32> {
        self.rus.iter().map(|b| b.bits).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if set.format != CODEBOOK_FORMAT || set.rus.len() != set.gamma.len() {
            return Err(Error::Format(format!("unsupported codebook file ({})", set.format)));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Tree-structured codebook: level `b` (1-based) holds `2^b` codewords and
/// codeword `j` of level `b` owns codewords `2j` and `2j + 1` of level
/// `b + 1`, so a leaf index spells its root-to-leaf path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct TreeCodebook {
    pub levels: Vec<Vec<CVec>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    dim: usize,
    levels: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<RawTree> for TreeCodebook {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        if raw.dim == 0 {
            return Err(Error::Format("tree dimension must be positive".into()));
        }
        let levels = raw
            .levels
            .iter()
            .map(|lv| {
                lv.chunks(raw.dim)
                    .map(|ch| CVec::from_iterator(raw.dim, ch.iter().map(|e| C64::new(e[0], e[1]))))
                    .collect()
            })
            .collect();
        TreeCodebook::new(levels)
    }
}

impl From<TreeCodebook> for RawTree {
    fn from(t: TreeCodebook) -> Self {
        RawTree {
            dim: t.dim(),
            levels: t
                .levels
                .iter()
                .map(|lv| lv.iter().flat_map(|w| w.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect())
                .collect(),
        }
    }
}

impl TreeCodebook {
    pub fn new(levels: Vec<Vec<CVec>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Format("tree needs at least one level".into()));
        }
        let dim = levels[0].first().map(|w| w.len()).unwrap_or(0);
        for (b, lv) in levels.iter().enumerate() {
            if lv.len() != 1 << (b + 1) {
                return Err(Error::Format(format!(
                    "level {} has {} codewords, expected {}",
                    b + 1,
                    lv.len(),
                    1 << (b + 1)
                )));
            }
            if lv.iter().any(|w| w.len() != dim || w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
                return Err(Error::Format("tree codewords must be finite and share a dimension".into()));
            }
        }
        if dim == 0 {
            return Err(Error::Format("tree dimension must be positive".into()));
        }
        Ok(TreeCodebook { levels })
    }

    pub fn bits(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn dim(&self) -> usize {
        self.levels[0][0].len()
    }

    /// Codewords at 1-based level `b`.
    pub fn level(&self, b: usize) -> &[CVec] {
        &self.levels[b - 1]
    }

    pub fn children(j: usize) -> (usize, usize) {
        (2 * j, 2 * j + 1)
    }

    pub fn leaves(&self) -> LookupCodebook {
        LookupCodebook::new(self.levels.last().expect("non-empty").clone()).expect("validated tree")
    }
}

/// One tree per RU plus power scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeCodebookSet {
    pub format: String,
    pub gamma: Vec<f64>,
    pub rus: Vec<TreeCodebook>,
}

impl TreeCodebookSet {
    pub fn new(rus: Vec<TreeCodebook>, gamma: Vec<f64>) -> Result<Self> {
        if rus.len() != gamma.len() {
            return Err(Error::config("one power scale per tree is required"));
        }
        Ok(TreeCodebookSet { format: TREE_FORMAT.into(), gamma, rus })
    }

    /// Leaf codebooks as a lookup set.
    pub fn leaves(&self) -> CodebookSet {
        CodebookSet::new(self.rus.iter().map(|t| t.leaves()).collect(), self.gamma.clone()).expect("matching lengths")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if set.format != TREE_FORMAT || set.rus.len() != set.gamma.len() {
            return Err(Error::Format(format!("unsupported tree codebook file ({})", set.format)));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = CodebookSet::new(
            vec![LookupCodebook::gaussian(2, 3, 1.0, &mut rng).unwrap(), LookupCodebook::scalar(&[-1.0, 1.0]).unwrap()],
            vec![1.0, 0.5],
        )
        .unwrap();
        let back = CodebookSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(LookupCodebook::scalar(&[1.0, 2.0, 3.0]).is_err());
        let bad = r#"{"format":"fronthaul-mq/lookup-codebook/v1","gamma":[1.0],"rus":[{"dim":1,"bits":2,"entries":[[0,0],[1,0]]}]}"#;
        assert!(CodebookSet::from_json(bad).is_err());
    }

    #[test]
    fn tree_round_trip_and_shape() {
        let lv1 = vec![CVec::from_element(1, C64::new(-2.0, 0.0)), CVec::from_element(1, C64::new(2.0, 0.0))];
        let lv2 = [-3.0, -1.0, 1.0, 3.0].iter().map(|&v| CVec::from_element(1, C64::new(v, 0.0))).collect();
        let tree = TreeCodebook::new(vec![lv1, lv2]).unwrap();
        assert_eq!(tree.bits(), 2);
        let set = TreeCodebookSet::new(vec![tree], vec![1.0]).unwrap();
        assert_eq!(TreeCodebookSet::from_json(&set.to_json().unwrap()).unwrap(), set);
        assert!(TreeCodebook::new(vec![vec![CVec::zeros(1)]]).is_err());
    }
}
