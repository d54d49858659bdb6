use serde::{Deserialize, Serialize};

use super::ParadigmError;

/// Axis-aligned rectangle in normalized screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn intersection_area(&self, o: &Rect) -> f64 {
        let dx = (self.x + self.w).min(o.x + o.w) - self.x.max(o.x);
        let dy = (self.y + self.h).min(o.y + o.h) - self.y.max(o.y);
        if dx > 0.0 && dy > 0.0 {
            dx * dy
        } else {
            0.0
        }
    }

    pub fn within_unit_square(&self) -> bool {
        let eps = 1e-12;
        self.w > 0.0
            && self.h > 0.0
            && self.x >= -eps
            && self.y >= -eps
            && self.x + self.w <= 1.0 + eps
            && self.y + self.h <= 1.0 + eps
    }
}

/// Number of distinct frequencies the band can hold at `min_sep` spacing.
pub fn band_capacity(band_hz: (f64, f64), min_sep_hz: f64) -> usize {
    let (lo, hi) = band_hz;
    ((hi - lo) / min_sep_hz + 1e-9).floor() as usize + 1
}

/// `n` frequencies spread evenly from `lo` to `hi` inclusive.
pub fn allocate_frequencies(n: usize, band_hz: (f64, f64), min_sep_hz: f64) -> Result<Vec<f64>, ParadigmError> {
    let (lo, hi) = band_hz;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) || min_sep_hz.is_nan() || min_sep_hz <= 0.0 {
        return Err(ParadigmError::InvalidBand {
            lo,
            hi,
            min_sep: min_sep_hz,
        });
    }
    let max = band_capacity(band_hz, min_sep_hz);
    if n == 0 || n > max {
        return Err(ParadigmError::Infeasible { requested: n, max });
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { hi } else { lo + k as f64 * step })
        .collect())
}

/// Picks `n` frequencies spread across a calibrated `grid` (restricted to the
/// band), so every block frequency is one the decoder was trained on.
pub fn allocate_from_grid(
    n: usize,
    grid: &[f64],
    band_hz: (f64, f64),
    min_sep_hz: f64,
) -> Result<Vec<f64>, ParadigmError> {
    let mut usable: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|f| *f >= band_hz.0 - 1e-9 && *f <= band_hz.1 + 1e-9)
        .collect();
    usable.sort_by(f64::total_cmp);
    usable.dedup();
    let m = usable.len();
    if n == 0 || n > m {
        return Err(ParadigmError::Infeasible { requested: n, max: m });
    }
    let picked: Vec<f64> = if n == 1 {
        vec![usable[0]]
    } else {
        (0..n)
            .map(|k| usable[((k * (m - 1)) as f64 / (n - 1) as f64).round() as usize])
            .collect()
    };
    if picked.windows(2).any(|w| w[1] - w[0] < min_sep_hz - 1e-9) {
        return Err(ParadigmError::InvalidBand {
            lo: band_hz.0,
            hi: band_hz.1,
            min_sep: min_sep_hz,
        });
    }
    Ok(picked)
}

/// Square blocks on a `cols = ceil(√n)` grid with a 10% gutter. `aspect` is
/// screen width over height; the last row is centered.
pub fn layout_blocks(n: usize, aspect: f64) -> Vec<Rect> {
    if n == 0 {
        return Vec::new();
    }
    let aspect = if aspect.is_finite() && aspect > 0.0 {
        aspect
    } else {
        1.0
    };
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let cell_w = 1.0 / cols as f64;
    let cell_h = 1.0 / rows as f64;
    // Side length in height units; the screen is `aspect` wide.
    let side = 0.9 * (aspect * cell_w).min(cell_h);
    let w = side / aspect;
    let h = side;
    let mut out = Vec::with_capacity(n);
    for r in 0..rows {
        let in_row = (n - r * cols).min(cols);
        let row_offset = (cols - in_row) as f64 * cell_w / 2.0;
        for c in 0..in_row {
            out.push(Rect {
                x: row_offset + c as f64 * cell_w + (cell_w - w) / 2.0,
                y: r as f64 * cell_h + (cell_h - h) / 2.0,
                w,
                h,
            });
        }
    }
    out
}
