//! Scale/shift alignment of a relative depth map to scene depth.
//!
//! The edited frame's depth arrives in arbitrary relative units. It is first
//! min-max normalized, then fitted to the original depth with the affine map
//! `d ↦ s·d + t` minimizing `E(s, t) = Σ ((s·d̂ᵢ + t) − dᵢ)²` over pixels that
//! are unedited and valid in both maps. The minimizer is closed form:
//!
//! ```text
//! s = cov(d̂, d) / var(d̂),    t = mean(d) − s·mean(d̂)
//! ```
//!
//! Sums use a fixed-shape pairwise reduction so results are bit-stable
//! regardless of thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Mask};
use crate::par::pairwise_sum;

/// Variance below this fraction of the squared depth range is treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub scale: f64,
    pub shift: f64,
    pub residual_rmse: f64,
    pub pixel_count: usize,
}

impl Alignment {
    #[inline]
    pub fn apply(&self, relative: f64) -> f64 {
        relative * self.scale + self.shift
    }
}

/// Min-max maps valid values onto `[0, 1]`; validity is preserved.
pub fn normalize_depth(raw: &DepthMap) -> Result<DepthMap> {
    let (lo, hi) = raw
        .range(None)
        .ok_or_else(|| Error::DegenerateInput("depth map has no valid pixels".into()))?;
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "depth map is constant ({lo}); cannot normalize"
        )));
    }
    let mut out = DepthMap::invalid(raw.width(), raw.height());
    for i in 0..raw.len() {
        out.set_index(i, raw.get_index(i).map(|v| (v - lo) / span));
    }
    Ok(out)
}

/// Unedited region used for fitting: the complement of `mask` dilated by
/// `erode_radius` pixels (0 keeps the raw complement).
pub fn unedited_region(mask: &Mask, erode_radius: usize) -> Mask {
    mask.dilate(erode_radius).complement()
}

fn pairs(d_hat: &DepthMap, d_ori: &DepthMap, unedited: &Mask) -> Result<Vec<(f64, f64)>> {
    let (w, h) = (d_ori.width(), d_ori.height());
    d_hat.check_size("relative depth", w, h)?;
    unedited.check_size("unedited mask", w, h)?;
    Ok((0..d_ori.len())
        .filter(|&i| unedited.get_index(i))
        .filter_map(|i| Some((d_hat.get_index(i)?, d_ori.get_index(i)?)))
        .collect())
}

/// Closed-form least-squares `(s, t)` over unedited pixels valid in both maps.
pub fn solve_alignment(d_hat: &DepthMap, d_ori: &DepthMap, unedited: &Mask) -> Result<Alignment> {
    let p = pairs(d_hat, d_ori, unedited)?;
    let m = p.len();
    if m < 2 {
        return Err(Error::InsufficientOverlap { found: m });
    }
    let n = m as f64;
    let mean_x = pairwise_sum(&p, &|&(x, _)| x) / n;
    let mean_y = pairwise_sum(&p, &|&(_, y)| y) / n;
    let var = pairwise_sum(&p, &|&(x, _)| (x - mean_x) * (x - mean_x)) / n;
    let cov = pairwise_sum(&p, &|&(x, y)| (x - mean_x) * (y - mean_y)) / n;
    let (lo, hi) = p
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let span = hi - lo;
    if !(var > DEGENERATE_VARIANCE * span * span) {
        return Err(Error::DegenerateAlignment { variance: var });
    }
    let scale = cov / var;
    let shift = mean_y - scale * mean_x;
    Ok(Alignment {
        scale,
        shift,
        residual_rmse: rmse(&p, scale, shift),
        pixel_count: m,
    })
}

/// A user-supplied `(s, t)` with its residual measured on the same pixels
/// the solver would use. With fewer than one usable pixel the residual is 0.
pub fn manual_alignment(
    d_hat: &DepthMap,
    d_ori: &DepthMap,
    unedited: &Mask,
    scale: f64,
    shift: f64,
) -> Result<Alignment> {
    if !scale.is_finite() || scale == 0.0 || !shift.is_finite() {
        return Err(Error::Validation(format!(
            "manual alignment needs finite nonzero scale and finite shift, got ({scale}, {shift})"
        )));
    }
    let p = pairs(d_hat, d_ori, unedited)?;
    Ok(Alignment {
        scale,
        shift,
        residual_rmse: if p.is_empty() {
            0.0
        } else {
            rmse(&p, scale, shift)
        },
        pixel_count: p.len(),
    })
}

fn rmse(p: &[(f64, f64)], s: f64, t: f64) -> f64 {
    (energy_of(p, s, t) / p.len() as f64).sqrt()
}

fn energy_of(p: &[(f64, f64)], s: f64, t: f64) -> f64 {
    pairwise_sum(p, &|&(x, y)| {
        let r = s * x + t - y;
        r * r
    })
}

/// The objective `E(s, t)` on the pixels [`solve_alignment`] uses.
pub fn alignment_energy(
    d_hat: &DepthMap,
    d_ori: &DepthMap,
    unedited: &Mask,
    scale: f64,
    shift: f64,
) -> Result<f64> {
    Ok(energy_of(&pairs(d_hat, d_ori, unedited)?, scale, shift))
}

/// `D_ori` outside the mask, `s·D̂ + t` inside it.
pub fn merge_depth(
    d_ori: &DepthMap,
    d_hat: &DepthMap,
    align: &Alignment,
    mask: &Mask,
) -> Result<DepthMap> {
    let (w, h) = (d_ori.width(), d_ori.height());
    d_hat.check_size("relative depth", w, h)?;
    mask.check_size("mask", w, h)?;
    let mut out = DepthMap::invalid(w, h);
    for i in 0..out.len() {
        let (x, y) = (i % w, i / w);
        let v = if mask.get_index(i) {
            align.apply(d_hat.get_index(i).ok_or(Error::IncompleteDepth {
                source_name: "edited",
                x,
                y,
            })?)
        } else {
            d_ori.get_index(i).ok_or(Error::IncompleteDepth {
                source_name: "original",
                x,
                y,
            })?
        };
        out.set_index(i, Some(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(vals: &[f64]) -> DepthMap {
        DepthMap::from_fn(vals.len(), 1, |x, _| Some(vals[x]))
    }

    #[test]
    fn normalize_min_max() {
        let n = normalize_depth(&row(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!(
            n.iter().collect::<Vec<_>>(),
            vec![Some(0.0), Some(0.5), Some(1.0)]
        );
    }

    #[test]
    fn normalize_unit_range_is_identity() {
        let d = row(&[0.0, 0.3, 0.77, 1.0]);
        assert_eq!(normalize_depth(&d).unwrap(), d);
    }

    #[test]
    fn normalize_keeps_invalid_pixels() {
        let d = DepthMap::from_options(3, 1, vec![Some(1.0), None, Some(3.0)]);
        let n = normalize_depth(&d).unwrap();
        assert_eq!(
            n.iter().collect::<Vec<_>>(),
            vec![Some(0.0), None, Some(1.0)]
        );
    }

    #[test]
    fn normalize_rejects_constant_and_empty() {
        assert!(matches!(
            normalize_depth(&row(&[3.0, 3.0])),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            normalize_depth(&DepthMap::invalid(2, 2)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn identity_alignment() {
        let d = row(&[1.0, 2.0, 3.5, 4.0]);
        let a = solve_alignment(&d, &d, &Mask::filled(4, 1, true)).unwrap();
        assert!((a.scale - 1.0).abs() < 1e-15 && a.shift.abs() < 1e-14);
        assert!(a.residual_rmse < 1e-15);
        assert_eq!(a.pixel_count, 4);
    }

    #[test]
    fn exact_affine_preimage() {
        let d = row(&[1.0, 2.0, 3.5, 4.0, 7.25]);
        let d_hat = DepthMap::from_fn(5, 1, |x, _| Some((d.get(x, 0).unwrap() - 0.5) / 2.0));
        let a = solve_alignment(&d_hat, &d, &Mask::filled(5, 1, true)).unwrap();
        assert!((a.scale - 2.0).abs() < 1e-14);
        assert!((a.shift - 0.5).abs() < 1e-14);
        assert!(a.residual_rmse < 1e-14);
    }

    #[test]
    fn five_pixel_case_matches_normal_equations() {
        // oracle: [Σx² Σx; Σx m] [s t]ᵀ = [Σxy Σy]ᵀ solved by explicit 2x2 inverse
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ys = [1.0, 1.6, 1.9, 2.6, 3.1];
        let (mut sxx, mut sx, mut sxy, mut sy) = (0.0, 0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxx += x * x;
            sx += x;
            sxy += x * y;
            sy += y;
        }
        let m = 5.0;
        let det = sxx * m - sx * sx;
        let s_oracle = (m * sxy - sx * sy) / det;
        let t_oracle = (-sx * sxy + sxx * sy) / det;
        let a = solve_alignment(&row(&xs), &row(&ys), &Mask::filled(5, 1, true)).unwrap();
        assert!((a.scale - s_oracle).abs() < 1e-9);
        assert!((a.shift - t_oracle).abs() < 1e-9);
        // frozen from the oracle: s = 2.08, t = 1.0
        assert!((a.scale - 2.08).abs() < 1e-9 && (a.shift - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uses_only_unedited_valid_pixels() {
        let d = DepthMap::from_options(4, 1, vec![Some(1.0), Some(2.0), None, Some(9.0)]);
        let d_hat = row(&[1.0, 2.0, 3.0, 100.0]);
        let unedited = Mask::from_fn(4, 1, |x, _| x != 3);
        let a = solve_alignment(&d_hat, &d, &unedited).unwrap();
        assert_eq!(a.pixel_count, 2);
        assert!((a.scale - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_pixels() {
        let d = row(&[1.0, 2.0]);
        let r = solve_alignment(&d, &d, &Mask::from_fn(2, 1, |x, _| x == 0));
        assert!(matches!(r, Err(Error::InsufficientOverlap { found: 1 })));
    }

    #[test]
    fn constant_relative_depth_is_degenerate() {
        let r = solve_alignment(
            &row(&[0.5, 0.5, 0.5]),
            &row(&[1.0, 2.0, 3.0]),
            &Mask::filled(3, 1, true),
        );
        assert!(matches!(r, Err(Error::DegenerateAlignment { .. })));
    }

    #[test]
    fn manual_values_echoed_with_residual() {
        let d = row(&[1.0, 2.0, 3.0]);
        let d_hat = row(&[0.0, 0.5, 1.0]);
        let a = manual_alignment(&d_hat, &d, &Mask::filled(3, 1, true), 2.0, 0.5).unwrap();
        assert_eq!((a.scale, a.shift, a.pixel_count), (2.0, 0.5, 3));
        // residuals: -0.5, -0.5, -0.5
        assert!((a.residual_rmse - 0.5).abs() < 1e-15);
        assert!(manual_alignment(&d_hat, &d, &Mask::filled(3, 1, true), 0.0, 0.5).is_err());
    }

    #[test]
    fn merge_branches() {
        let d_ori = row(&[1.0, 2.0, 3.0, 4.0]);
        let d_hat = row(&[0.0, 0.25, 0.5, 0.75]);
        let a = Alignment {
            scale: 2.0,
            shift: 0.5,
            residual_rmse: 0.0,
            pixel_count: 4,
        };
        let none = merge_depth(&d_ori, &d_hat, &a, &Mask::new(4, 1)).unwrap();
        assert_eq!(none, d_ori);
        let ident = Alignment {
            scale: 1.0,
            shift: 0.0,
            ..a
        };
        let all = merge_depth(&d_ori, &d_hat, &ident, &Mask::filled(4, 1, true)).unwrap();
        assert_eq!(all, d_hat);
        let checker = Mask::from_fn(4, 1, |x, _| x % 2 == 1);
        let m = merge_depth(&d_ori, &d_hat, &a, &checker).unwrap();
        assert_eq!(
            m.iter().collect::<Vec<_>>(),
            vec![Some(1.0), Some(1.0), Some(3.0), Some(2.0)]
        );
    }

    #[test]
    fn merge_reports_missing_pixel() {
        let d_ori = DepthMap::from_options(2, 1, vec![Some(1.0), None]);
        let d_hat = row(&[0.0, 1.0]);
        let a = Alignment {
            scale: 1.0,
            shift: 0.0,
            residual_rmse: 0.0,
            pixel_count: 2,
        };
        match merge_depth(&d_ori, &d_hat, &a, &Mask::new(2, 1)) {
            Err(Error::IncompleteDepth {
                x: 1,
                y: 0,
                source_name: "original",
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn erosion_shrinks_unedited_region() {
        let mut m = Mask::new(5, 5);
        m.set(2, 2, true);
        assert_eq!(unedited_region(&m, 0).count(), 24);
        assert_eq!(unedited_region(&m, 1).count(), 16);
    }
}
