//! Neural codebook checkpoints.
//!
//! Layout: the 8 magic bytes `FHQNEUR1`, a little-endian `u64` header
//! length, a UTF-8 JSON header, then every parameter as a little-endian
//! `f64`. Parameters are stored RU by RU and layer by layer, each layer as
//! its weight matrix in row-major order (`output x input`) followed by its
//! bias vector.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Activation, Mlp, NeuralCodebook};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FHQNEUR1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    activation: Activation,
    gamma: Vec<f64>,
    /// Per RU, the layer widths from input to output.
    widths: Vec<Vec<usize>>,
    num_params: usize,
}

pub fn write_checkpoint<W: Write>(code: &NeuralCodebook, mut out: W) -> Result<()> {
    let widths = code
        .rus
        .iter()
        .map(|net| std::iter::once(net.input_dim()).chain(net.layers.iter().map(|l| l.output_dim())).collect())
        .collect();
    let header = Header {
        activation: code.activation,
        gamma: code.gamma.clone(),
        widths,
        num_params: code.rus.iter().map(|n| n.num_params()).sum(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for net in &code.rus {
        for v in net.params() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<NeuralCodebook> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a neural codebook checkpoint".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(Error::Format("checkpoint header is implausibly large".into()));
    }
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    if header.gamma.len() != header.widths.len() {
        return Err(Error::Format("header has mismatched RU counts".into()));
    }
    let mut rus = Vec::with_capacity(header.widths.len());
    let mut total = 0;
    for widths in &header.widths {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Format("each network needs at least an input and an output width".into()));
        }
        let hidden = widths[1..widths.len() - 1].to_vec();
        if hidden.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Format("hidden layers must share one width".into()));
        }
        let mut net =
            Mlp::zeros(widths[0], hidden.first().copied().unwrap_or(0), hidden.len(), *widths.last().unwrap());
        let mut flat = vec![0.0; net.num_params()];
        let mut buf = [0u8; 8];
        for v in flat.iter_mut() {
            input.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        total += flat.len();
        net.set_params(&flat);
        rus.push(net);
    }
    if total != header.num_params {
        return Err(Error::Format(format!("header declares {} parameters, layout has {total}", header.num_params)));
    }
    Ok(NeuralCodebook { activation: header.activation, gamma: header.gamma, rus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let cfg = SystemConfig::uniform(3, 1, 2, 1, 1, 5, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut code = NeuralCodebook::xavier(&cfg, &[4, 3, 6], &[1, 0, 2], &mut rng).unwrap();
        code.gamma = vec![0.5, 1.0, 2.0];
        let mut bytes = Vec::new();
        write_checkpoint(&code, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(read_checkpoint(bytes.as_slice()).unwrap(), code);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOTMAGIC\0\0\0\0\0\0\0\0"[..]).is_err());
    }
}
