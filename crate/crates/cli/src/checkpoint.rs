//! JSON checkpoints of trained weight networks.
//!
//! ```json
//! {"format": "credal-weightnet", "version": 1, "net": {"layer_sizes": [...], "layers": [...],
//!  "input_shift": [...], "input_scale": [...]}}
//! ```
//!
//! Every layer stores `inputs`, `outputs`, row-major `weights` (`outputs x
//! inputs`) and `biases`. Floats are written in shortest round-trip form and
//! parsed exactly, so a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use credal_core::WeightNet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "credal-weightnet";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    net: WeightNet,
}

pub fn to_json(net: &WeightNet) -> String {
    serde_json::to_string_pretty(&Checkpoint { format: FORMAT.into(), version: VERSION, net: net.clone() })
        .expect("network serializes")
}

pub fn from_json(text: &str) -> CliResult<WeightNet> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| CliError::Data(format!("checkpoint: {e}")))?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(CliError::Data(format!("checkpoint format {} v{} not supported", ck.format, ck.version)));
    }
    Ok(ck.net)
}

pub fn save(path: &Path, net: &WeightNet) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    w.write_all(to_json(net).as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<WeightNet> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(f), &mut text).map_err(|e| CliError::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use credal_core::RngStream;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = WeightNet::with_hidden(3, &[7, 5], 4, RngStream::from_seed(3)).unwrap();
        let mut p = net.parameters();
        for (i, v) in p.iter_mut().enumerate() {
            *v += (i as f64).sin() * 1e-3 + 1.0 / 3.0;
        }
        net.set_parameters(&p).unwrap();
        net.set_input_transform(vec![0.1, 1.0 / 7.0, -2.5], vec![3.3, 1e-300, 7.0]).unwrap();
        let back = from_json(&to_json(&net)).unwrap();
        assert_eq!(back, net);
        let bits = |n: &WeightNet| n.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn rejects_foreign_json() {
        assert!(from_json("{\"format\": \"other\", \"version\": 1, \"net\": {}}").is_err());
        assert!(from_json("not json").is_err());
    }
}
