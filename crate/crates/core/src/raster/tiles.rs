use super::{ProjectedGaussian, FOOTPRINT_Q};

pub const TILE_SIZE: usize = 16;

/// Per-tile splat lists, each sorted front to back.
#[derive(Clone, Debug)]
pub struct TileGrid {
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// Row-major tiles; entries index the projected slice.
    pub lists: Vec<Vec<u32>>,
}

impl TileGrid {
    pub fn num_tiles(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel bounds `(x0, x1, y0, y1)` of a tile, end-exclusive.
    pub fn tile_bounds(&self, tile: usize) -> (usize, usize, usize, usize) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        (x0, (x0 + TILE_SIZE).min(self.width), y0, (y0 + TILE_SIZE).min(self.height))
    }
}

/// Minimum of the splat's quadratic form over the rectangle of pixel centres
/// `[x0, x1] x [y0, y1]` (continuous coordinates).
fn min_mahalanobis_on_rect(p: &ProjectedGaussian, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let [mx, my] = p.mean2d;
    if mx >= x0 && mx <= x1 && my >= y0 && my <= y1 {
        return 0.0;
    }
    let [a, b, c] = p.conic;
    let q = |dx: f64, dy: f64| a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
    let mut best = f64::INFINITY;
    // vertical edges: dx fixed, minimize over dy
    for x in [x0, x1] {
        let dx = x - mx;
        let dy = (-b * dx / c).clamp(y0 - my, y1 - my);
        best = best.min(q(dx, dy));
    }
    for y in [y0, y1] {
        let dy = y - my;
        let dx = (-b * dy / a).clamp(x0 - mx, x1 - mx);
        best = best.min(q(dx, dy));
    }
    best
}

/// Bins splats into 16x16 tiles. A splat joins every tile holding at least
/// one pixel centre inside its 3-sigma ellipse; each list is ordered by
/// ascending depth with ties broken by primitive index.
pub fn tile_and_sort(projected: &[ProjectedGaussian], width: usize, height: usize) -> TileGrid {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let mut lists = vec![Vec::new(); tiles_x * tiles_y];
    let mut order: Vec<u32> = (0..projected.len() as u32).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&projected[i as usize], &projected[j as usize]);
        a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index))
    });
    for &i in &order {
        let p = &projected[i as usize];
        let [ex, ey] = p.half_extent();
        let [mx, my] = p.mean2d;
        // pixel centres sit at integer + 0.5
        let col_lo = ((mx - ex - 0.5).ceil().max(0.0)) as usize;
        let col_hi = (mx + ex - 0.5).floor();
        let row_lo = ((my - ey - 0.5).ceil().max(0.0)) as usize;
        let row_hi = (my + ey - 0.5).floor();
        if col_hi < 0.0 || row_hi < 0.0 {
            continue;
        }
        let col_hi = (col_hi as usize).min(width - 1);
        let row_hi = (row_hi as usize).min(height - 1);
        if col_lo > col_hi || row_lo > row_hi {
            continue;
        }
        for ty in row_lo / TILE_SIZE..=row_hi / TILE_SIZE {
            for tx in col_lo / TILE_SIZE..=col_hi / TILE_SIZE {
                let x0 = (tx * TILE_SIZE) as f64 + 0.5;
                let x1 = (((tx + 1) * TILE_SIZE).min(width) - 1) as f64 + 0.5;
                let y0 = (ty * TILE_SIZE) as f64 + 0.5;
                let y1 = (((ty + 1) * TILE_SIZE).min(height) - 1) as f64 + 0.5;
                if min_mahalanobis_on_rect(p, x0, x1, y0, y1) <= FOOTPRINT_Q {
                    lists[ty * tiles_x + tx].push(i);
                }
            }
        }
    }
    TileGrid {
        width,
        height,
        tiles_x,
        tiles_y,
        lists,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splat(index: usize, mean: [f64; 2], sigma: f64, depth: f64) -> ProjectedGaussian {
        let v = sigma * sigma;
        ProjectedGaussian {
            index,
            mean2d: mean,
            cov2d: [v, 0.0, v],
            conic: [1.0 / v, 0.0, 1.0 / v],
            depth,
            alpha: 0.5,
            channel_values: [0.5, 0.0, 0.0],
            clamped: 0,
        }
    }

    fn occupied(g: &TileGrid) -> usize {
        g.lists.iter().filter(|l| !l.is_empty()).count()
    }

    #[test]
    fn small_splat_in_one_tile() {
        let g = tile_and_sort(&[splat(0, [8.0, 8.0], 1.0, 1.0)], 64, 64);
        assert_eq!(occupied(&g), 1);
        assert_eq!(g.lists[0], vec![0]);
    }

    #[test]
    fn corner_splat_in_four_tiles() {
        // 3 sigma = 2 px, centred on the corner shared by four tiles
        let g = tile_and_sort(&[splat(0, [16.0, 16.0], 2.0 / 3.0, 1.0)], 64, 64);
        assert_eq!(occupied(&g), 4);
        for t in [0, 1, 4, 5] {
            assert_eq!(g.lists[t], vec![0]);
        }
    }

    #[test]
    fn depth_order_with_index_ties() {
        let ps = [
            splat(3, [8.0, 8.0], 2.0, 2.0),
            splat(1, [8.0, 8.0], 2.0, 1.0),
            splat(2, [8.0, 8.0], 2.0, 1.0),
            splat(0, [8.0, 8.0], 2.0, 5.0),
        ];
        let g = tile_and_sort(&ps, 32, 32);
        let idx: Vec<usize> = g.lists[0].iter().map(|&i| ps[i as usize].index).collect();
        assert_eq!(idx, vec![1, 2, 3, 0]);
    }

    #[test]
    fn partial_tiles() {
        let g = tile_and_sort(&[splat(0, [39.0, 39.0], 0.5, 1.0)], 40, 40);
        assert_eq!(g.tiles_x, 3);
        assert_eq!(g.tile_bounds(8), (32, 40, 32, 40));
        assert_eq!(g.lists[8], vec![0]);
    }

    #[test]
    fn rotated_ellipse_skips_untouched_tiles() {
        // long thin ellipse along the diagonal; its bounding box covers four
        // tiles but the anti-diagonal corners stay clear of the footprint
        let (l, s) = (64.0f64, 0.01f64);
        let (c, d) = (0.5 * (l + s), 0.5 * (l - s));
        let det = c * c - d * d;
        let p = ProjectedGaussian {
            cov2d: [c, d, c],
            conic: [c / det, -d / det, c / det],
            ..splat(0, [16.0, 16.0], 1.0, 1.0)
        };
        let g = tile_and_sort(&[p], 32, 32);
        assert_eq!(g.lists[0], vec![0]);
        assert_eq!(g.lists[3], vec![0]);
        assert!(g.lists[1].is_empty() && g.lists[2].is_empty());
    }
}
