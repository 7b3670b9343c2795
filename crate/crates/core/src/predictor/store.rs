use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::PredictorModel;
use super::train::PredictorSample;
use crate::circuit::CircuitImage;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    input_dim: usize,
    hidden: usize,
    num_params: usize,
    activation: String,
    seed: u64,
    epochs: usize,
    adam_step: u64,
    loss_curve: Vec<f64>,
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// One JSON header line, then parameters, Adam first and second moments as
/// little-endian `f64`s.
pub fn save_checkpoint(model: &PredictorModel, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        input_dim: model.input_dim,
        hidden: model.hidden,
        num_params: model.num_params(),
        activation: "relu".into(),
        seed: model.seed,
        epochs: model.epochs_trained,
        adam_step: model.adam_step,
        loss_curve: model.loss_curve.clone(),
    };
    let mut f = File::create(path)?;
    f.write_all(serde_json::to_string(&header)?.as_bytes())?;
    f.write_all(b"\n")?;
    let mut blob = Vec::with_capacity(model.num_params() * 24);
    for v in model.params.iter().chain(&model.adam_m).chain(&model.adam_v) {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&blob)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PredictorModel> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| format_err(path, e.to_string()))?;
    let count = header.hidden * header.input_dim + 2 * header.hidden + 1;
    if count != header.num_params {
        return Err(format_err(path, "parameter count disagrees with dimensions"));
    }
    let mut blob = Vec::new();
    reader.read_to_end(&mut blob)?;
    if blob.len() != 3 * count * 8 {
        return Err(format_err(path, format!("weight blob of {} bytes", blob.len())));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(PredictorModel {
        input_dim: header.input_dim,
        hidden: header.hidden,
        params: values[..count].to_vec(),
        adam_m: values[count..2 * count].to_vec(),
        adam_v: values[2 * count..].to_vec(),
        adam_step: header.adam_step,
        seed: header.seed,
        epochs_trained: header.epochs,
        loss_curve: header.loss_curve,
    })
}

/// CSV with columns `hash,height,width,bits,target`.
pub fn save_samples(samples: &[PredictorSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["hash", "height", "width", "bits", "target"])?;
    for s in samples {
        w.write_record([
            s.hash.clone(),
            s.image.height().to_string(),
            s.image.width().to_string(),
            s.image.to_hex_bits(),
            format!("{:?}", s.target),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<Vec<PredictorSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |msg: &str| Error::Parse {
            row: i + 2,
            msg: msg.to_string(),
        };
        if rec.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let height: usize = rec[1].parse().map_err(|_| bad("bad height"))?;
        let width: usize = rec[2].parse().map_err(|_| bad("bad width"))?;
        let target: f64 = rec[4].parse().map_err(|_| bad("bad target"))?;
        out.push(PredictorSample {
            hash: rec[0].to_string(),
            image: CircuitImage::from_hex_bits(height, width, &rec[3])?,
            target,
        });
    }
    Ok(out)
}
