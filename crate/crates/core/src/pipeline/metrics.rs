use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Image, Mask};

fn check_lengths(what: &str, a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || a != c {
        return Err(Error::Validation(format!(
            "{what}: sequence lengths differ ({a}, {b}, {c})"
        )));
    }
    Ok(())
}

/// PSNR in dB (peak 1.0) over every pixel outside the masks, pooled across
/// frames. Identical inputs give `+inf`.
pub fn masked_psnr(generated: &[Image], reference: &[Image], masks: &[Mask]) -> Result<f64> {
    check_lengths("masked_psnr", generated.len(), reference.len(), masks.len())?;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for ((g, r), m) in generated.iter().zip(reference).zip(masks) {
        let (w, h) = (r.width(), r.height());
        g.check_size("generated frame", w, h)?;
        m.check_size("mask", w, h)?;
        for i in 0..w * h {
            if m.get_index(i) {
                continue;
            }
            let (a, b) = (g.get_index(i), r.get_index(i));
            for c in 0..3 {
                let d = a[c] as f64 - b[c] as f64;
                sum += d * d;
            }
            count += 3;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric("no unedited pixels".into()));
    }
    let mse = sum / count as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// JSON form of a dB value; infinity becomes the string `"inf"`.
pub fn db_json(v: f64) -> serde_json::Value {
    if v.is_infinite() && v > 0.0 {
        serde_json::Value::from("inf")
    } else {
        serde_json::Value::from(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouReport {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

/// Per-frame `|A ∩ B| / |A ∪ B|`; two empty masks score 1.
pub fn mask_iou(predicted: &[Mask], truth: &[Mask]) -> Result<IouReport> {
    check_lengths("mask_iou", predicted.len(), truth.len(), truth.len())?;
    let mut per_frame = Vec::with_capacity(truth.len());
    for (p, t) in predicted.iter().zip(truth) {
        p.check_size("predicted mask", t.width(), t.height())?;
        per_frame.push(p.iou(t));
    }
    let mean = if per_frame.is_empty() {
        1.0
    } else {
        per_frame.iter().sum::<f64>() / per_frame.len() as f64
    };
    Ok(IouReport { per_frame, mean })
}
