use crate::error::{Error, Result};

fn check_len(what: &'static str, w: usize, h: usize, len: usize) {
    assert_eq!(w * h, len, "{what}: buffer length does not match {w}x{h}");
}

/// Z-depth raster. Pixels without depth are invalid.
///
/// Valid values are always finite. Metric depth is additionally positive;
/// relative (normalized) depth may touch zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| Some(value))
    }

    /// Builds a map from a per-pixel closure; non-finite values become invalid.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Option<f64>) -> Self {
        let mut d = Self::invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                d.set(x, y, f(x, y));
            }
        }
        d
    }

    pub fn from_options(width: usize, height: usize, data: Vec<Option<f64>>) -> Self {
        check_len("DepthMap", width, height, data.len());
        let valid = data
            .iter()
            .map(|v| matches!(v, Some(x) if x.is_finite()))
            .collect::<Vec<_>>();
        let values = data
            .iter()
            .zip(&valid)
            .map(|(v, ok)| if *ok { v.unwrap() } else { 0.0 })
            .collect();
        Self {
            width,
            height,
            values,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.get_index(y * self.width + x)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<f64> {
        if self.valid[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Option<f64>) {
        let i = y * self.width + x;
        self.set_index(i, value);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: Option<f64>) {
        match value {
            Some(v) if v.is_finite() => {
                self.values[i] = v;
                self.valid[i] = true;
            }
            _ => {
                self.values[i] = 0.0;
                self.valid[i] = false;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        (0..self.len()).map(|i| self.get_index(i))
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// `(min, max)` over valid pixels selected by `mask` (all pixels if `None`).
    pub fn range(&self, mask: Option<&Mask>) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for i in 0..self.len() {
            if mask.is_some_and(|m| !m.get_index(i)) {
                continue;
            }
            if let Some(v) = self.get_index(i) {
                out = Some(match out {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        out
    }

    pub fn check_size(&self, what: &'static str, width: usize, height: usize) -> Result<()> {
        size_check(what, self.width, self.height, width, height)
    }
}

/// Binary raster; `true` marks the selected (edited) region.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        check_len("Mask", width, height, bits.len());
        Self {
            width,
            height,
            bits,
        }
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the raster.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.bits[i]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a || b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// `true` where every pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Square (Chebyshev) dilation by `radius` pixels.
    pub fn dilate(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        let r = radius as isize;
        Mask::from_fn(w, h, |x, y| {
            let (x, y) = (x as isize, y as isize);
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && self.get(nx as usize, ny as usize)
                })
            })
        })
    }

    /// Intersection-over-union; two empty masks score 1.
    pub fn iou(&self, other: &Mask) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn check_size(&self, what: &'static str, width: usize, height: usize) -> Result<()> {
        size_check(what, self.width, self.height, width, height)
    }
}

/// RGB raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl Image {
    pub fn black(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![clamp_rgb(rgb); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let data = (0..width * height)
            .map(|i| clamp_rgb(f(i % width, i / width)))
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<[f32; 3]>) -> Self {
        check_len("Image", width, height, data.len());
        Self {
            width,
            height,
            data: data.into_iter().map(clamp_rgb).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> [f32; 3] {
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        self.data[y * self.width + x] = clamp_rgb(rgb);
    }

    /// `self ⊙ ¬mask`: pixels under the mask become exactly zero.
    pub fn zero_masked(&self, mask: &Mask) -> Image {
        assert_eq!((self.width, self.height), (mask.width(), mask.height()));
        Image {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(mask.bits())
                .map(|(p, m)| if *m { [0.0; 3] } else { *p })
                .collect(),
        }
    }

    pub fn check_size(&self, what: &'static str, width: usize, height: usize) -> Result<()> {
        size_check(what, self.width, self.height, width, height)
    }
}

fn clamp_rgb(p: [f32; 3]) -> [f32; 3] {
    p.map(|c| if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) })
}

pub(crate) fn size_check(
    what: &'static str,
    got_w: usize,
    got_h: usize,
    want_w: usize,
    want_h: usize,
) -> Result<()> {
    if (got_w, got_h) == (want_w, want_h) {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            got_w,
            got_h,
            want_w,
            want_h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonfinite_depth_is_invalid() {
        let d = DepthMap::from_fn(3, 1, |x, _| match x {
            0 => Some(1.0),
            1 => Some(f64::NAN),
            _ => Some(f64::INFINITY),
        });
        assert_eq!(d.iter().collect::<Vec<_>>(), vec![Some(1.0), None, None]);
    }

    #[test]
    fn iou_counts() {
        let a = Mask::rect(30, 10, 0, 0, 10, 10);
        let b = Mask::rect(30, 10, 5, 0, 15, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-15);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(Mask::new(4, 4).iou(&Mask::new(4, 4)), 1.0);
        assert_eq!(a.iou(&Mask::rect(30, 10, 20, 0, 30, 10)), 0.0);
    }

    #[test]
    fn dilate_square() {
        let mut m = Mask::new(5, 5);
        m.set(2, 2, true);
        assert_eq!(m.dilate(1), Mask::rect(5, 5, 1, 1, 4, 4));
        assert_eq!(m.dilate(0), m);
    }

    #[test]
    fn zero_masked_is_exact() {
        let img = Image::from_fn(4, 4, |x, y| [x as f32 / 4.0, y as f32 / 4.0, 0.5]);
        let m = Mask::rect(4, 4, 1, 1, 3, 3);
        let z = img.zero_masked(&m);
        for y in 0..4 {
            for x in 0..4 {
                let want = if m.get(x, y) { [0.0; 3] } else { img.get(x, y) };
                assert_eq!(z.get(x, y), want);
            }
        }
    }

    #[test]
    fn range_respects_mask() {
        let d = DepthMap::from_fn(4, 1, |x, _| Some(x as f64 + 1.0));
        let m = Mask::from_fn(4, 1, |x, _| x >= 2);
        assert_eq!(d.range(Some(&m)), Some((3.0, 4.0)));
        assert_eq!(d.range(None), Some((1.0, 4.0)));
    }
}
