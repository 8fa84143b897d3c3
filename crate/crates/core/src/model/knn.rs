use std::collections::HashMap;

use crate::Vec3;

/// Mean distance from each point to its `k` nearest other points, using a
/// uniform hash grid. Points with no neighbours get `None`.
pub fn mean_knn_distance(points: &[Vec3], k: usize) -> Vec<Option<f64>> {
    let n = points.len();
    if n < 2 || k == 0 {
        return vec![None; n];
    }
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    // Aim for roughly two points per occupied cell.
    let vol = ext.iter().map(|e| e.max(1e-9)).product::<f64>();
    let cell = (2.0 * vol / n as f64).cbrt().max(ext.max() / 256.0).max(1e-9);
    let key = |p: &Vec3| -> (i64, i64, i64) {
        let q = (p - lo) / cell;
        (q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64)
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let max_ring = (ext.max() / cell).ceil() as i64 + 1;
    let k = k.min(n - 1);

    crate::par::map_range(n, |i| {
        let p = points[i];
        let c = key(&p);
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let Some(ids) = grid.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) else {
                            continue;
                        };
                        for &j in ids {
                            if j == i {
                                continue;
                            }
                            let d = (points[j] - p).norm();
                            if best.len() < k || d < best[k - 1] {
                                let pos = best.partition_point(|b| *b <= d);
                                best.insert(pos, d);
                                best.truncate(k);
                            }
                        }
                    }
                }
            }
            // Anything outside the searched shell is at least `ring * cell` away.
            if best.len() == k && best[k - 1] <= ring as f64 * cell {
                break;
            }
            if ring > max_ring {
                break;
            }
            ring += 1;
        }
        (!best.is_empty()).then(|| best.iter().sum::<f64>() / best.len() as f64)
    })
}
