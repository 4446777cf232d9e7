//! Energy-landscape grids over a 2-D latent space, with grid-local minima
//! detection.

use crate::error::{Error, Result};
use crate::memory::{log_prior_balanced, mchn_energy, MemoryMatrix};
use crate::numerics::Vector;

/// Which energy to chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandscapePrior {
    /// Negative log-density of the balanced mixture.
    Balanced { sigma: f64 },
    /// The continuous Hopfield energy.
    Mchn { beta: f64 },
}

impl LandscapePrior {
    pub fn label(self) -> &'static str {
        match self {
            LandscapePrior::Balanced { .. } => "balanced",
            LandscapePrior::Mchn { .. } => "mchn",
        }
    }
}

/// A sampled energy surface.
#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    /// Sample coordinates along each axis (the grid is square).
    pub coords: Vec<f64>,
    /// Row-major energies: `energy[iy * resolution + ix]` at
    /// `(coords[ix], coords[iy])`.
    pub energy: Vec<f64>,
    /// Coordinates of interior grid cells strictly below all 8 neighbors.
    pub minima: Vec<(f64, f64)>,
}

impl LandscapeGrid {
    pub fn resolution(&self) -> usize {
        self.coords.len()
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.energy[iy * self.coords.len() + ix]
    }

    /// `x,y,energy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,energy\n");
        let n = self.coords.len();
        for iy in 0..n {
            for ix in 0..n {
                out.push_str(&format!(
                    "{:.6e},{:.6e},{:.10e}\n",
                    self.coords[ix],
                    self.coords[iy],
                    self.value(ix, iy)
                ));
            }
        }
        out
    }

    /// `x,y` rows of detected minima.
    pub fn minima_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in &self.minima {
            out.push_str(&format!("{x:.6e},{y:.6e}\n"));
        }
        out
    }

    /// Does some detected minimum lie within `radius` of `point`?
    pub fn has_minimum_near(&self, point: (f64, f64), radius: f64) -> bool {
        self.minima.iter().any(|&(x, y)| {
            let (dx, dy) = (x - point.0, y - point.1);
            (dx * dx + dy * dy).sqrt() <= radius
        })
    }
}

/// Evaluate the chosen energy on a square grid over `[lo, hi]^2` with
/// `resolution` samples per axis, and detect grid-local minima. The memory
/// must be 2-dimensional.
pub fn energy_landscape(
    memory: &MemoryMatrix,
    prior: LandscapePrior,
    bounds: (f64, f64),
    resolution: usize,
) -> Result<LandscapeGrid> {
    if memory.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "landscape requires d=2, memory has d={}",
            memory.dim()
        )));
    }
    if resolution < 3 {
        return Err(Error::InvalidParameter(
            "resolution must be at least 3".into(),
        ));
    }
    let (lo, hi) = bounds;
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "bounds must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    memory.matrix()?;

    let step = (hi - lo) / (resolution - 1) as f64;
    let coords: Vec<f64> = (0..resolution).map(|i| lo + step * i as f64).collect();
    let mut energy = Vec::with_capacity(resolution * resolution);
    for &y in &coords {
        for &x in &coords {
            let z = Vector::new(vec![x, y]);
            let e = match prior {
                LandscapePrior::Balanced { sigma } => -log_prior_balanced(&z, memory, sigma)?,
                LandscapePrior::Mchn { beta } => mchn_energy(&z, memory, beta)?,
            };
            energy.push(e);
        }
    }

    let minima = detect_minima(&coords, &energy, resolution);
    Ok(LandscapeGrid {
        coords,
        energy,
        minima,
    })
}

/// Interior cells no higher than any of their 8 neighbors, with bit-equal
/// plateaus merged into one minimum each. Plateaus appear whenever a basin's
/// true minimum falls exactly midway between grid lines, which makes the two
/// straddling samples tie; strict comparison would drop such basins.
fn detect_minima(coords: &[f64], energy: &[f64], resolution: usize) -> Vec<(f64, f64)> {
    let value = |ix: usize, iy: usize| energy[iy * resolution + ix];
    let mut weak = vec![false; resolution * resolution];
    for iy in 1..resolution - 1 {
        for ix in 1..resolution - 1 {
            let center = value(ix, iy);
            let mut is_weak = true;
            'probe: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let jx = (ix as i64 + dx) as usize;
                    let jy = (iy as i64 + dy) as usize;
                    if value(jx, jy) < center {
                        is_weak = false;
                        break 'probe;
                    }
                }
            }
            if is_weak {
                weak[iy * resolution + ix] = true;
            }
        }
    }

    // flood-fill 8-connected plateaus; report each cluster's lowest cell
    let mut seen = vec![false; resolution * resolution];
    let mut minima = Vec::new();
    for iy in 1..resolution - 1 {
        for ix in 1..resolution - 1 {
            let idx = iy * resolution + ix;
            if !weak[idx] || seen[idx] {
                continue;
            }
            let mut stack = vec![(ix, iy)];
            seen[idx] = true;
            let mut best = (ix, iy, value(ix, iy));
            while let Some((cx, cy)) = stack.pop() {
                let v = value(cx, cy);
                if v < best.2 || (v == best.2 && (cy, cx) < (best.1, best.0)) {
                    best = (cx, cy, v);
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let jx = (cx as i64 + dx) as usize;
                        let jy = (cy as i64 + dy) as usize;
                        if jx == 0 || jy == 0 || jx >= resolution - 1 || jy >= resolution - 1 {
                            continue;
                        }
                        let jdx = jy * resolution + jx;
                        if weak[jdx] && !seen[jdx] {
                            seen[jdx] = true;
                            stack.push((jx, jy));
                        }
                    }
                }
            }
            minima.push((coords[best.0], coords[best.1]));
        }
    }
    minima.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    minima
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{aligned_dominated_memory, DOMINATED_INDEX};

    #[test]
    fn single_pattern_has_one_minimum_at_the_pattern() {
        let mem = MemoryMatrix::from_patterns(&[Vector::new(vec![0.4, -0.3])]).unwrap();
        let grid = energy_landscape(
            &mem,
            LandscapePrior::Balanced { sigma: 0.3 },
            (-2.0, 2.0),
            201,
        )
        .unwrap();
        assert_eq!(grid.minima.len(), 1);
        let (x, y) = grid.minima[0];
        assert!((x - 0.4).abs() < 0.03 && (y + 0.3).abs() < 0.03);
    }

    #[test]
    fn balanced_landscape_keeps_every_pattern() {
        let mem = aligned_dominated_memory();
        let grid = energy_landscape(
            &mem,
            LandscapePrior::Balanced { sigma: 0.2 },
            (-3.0, 3.0),
            201,
        )
        .unwrap();
        assert_eq!(grid.minima.len(), 4, "minima: {:?}", grid.minima);
        for k in 0..4 {
            let p = mem.pattern(k).unwrap();
            assert!(grid.has_minimum_near((p[0], p[1]), 0.05), "pattern {k}");
        }
    }

    #[test]
    fn hopfield_landscape_drops_the_dominated_pattern() {
        let mem = aligned_dominated_memory();
        let grid = energy_landscape(
            &mem,
            LandscapePrior::Mchn { beta: 100.0 },
            (-3.0, 3.0),
            201,
        )
        .unwrap();
        assert!(grid.minima.len() < 4, "minima: {:?}", grid.minima);
        let dominated = mem.pattern(DOMINATED_INDEX).unwrap();
        assert!(!grid.has_minimum_near((dominated[0], dominated[1]), 0.05));
    }

    #[test]
    fn non_planar_memory_rejected() {
        let mem = MemoryMatrix::from_patterns(&[Vector::new(vec![0.0, 0.0, 0.0])]).unwrap();
        let err = energy_landscape(
            &mem,
            LandscapePrior::Balanced { sigma: 0.2 },
            (-1.0, 1.0),
            11,
        )
        .unwrap_err();
        assert!(err.to_string().contains("d=2"));
    }

    #[test]
    fn csv_has_header_and_full_grid() {
        let mem = MemoryMatrix::from_patterns(&[Vector::new(vec![0.0, 0.0])]).unwrap();
        let grid = energy_landscape(
            &mem,
            LandscapePrior::Balanced { sigma: 0.5 },
            (-1.0, 1.0),
            11,
        )
        .unwrap();
        let csv = grid.to_csv();
        assert_eq!(csv.lines().count(), 1 + 11 * 11);
        assert!(csv.starts_with("x,y,energy\n"));
        assert!(grid.minima_csv().starts_with("x,y\n"));
    }
}
