//! Raw initial-data families. All presets produce unmollified profiles; the
//! run loop smooths them and applies the density lift.

use super::{FieldState, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum InitialPreset {
    Constant {
        density: f64,
        velocity: f64,
    },
    /// Two constant states split at `split`.
    RiemannStep {
        left_density: f64,
        left_velocity: f64,
        right_density: f64,
        right_velocity: f64,
        split: f64,
    },
    /// Gaussian perturbation on a constant background; negative amplitude
    /// carves a dip.
    Bump {
        background: f64,
        amplitude: f64,
        width: f64,
        center: f64,
        velocity: f64,
    },
    /// Sampled columns interpolated linearly onto the grid, clamped to the
    /// end values outside the tabulated range.
    Tabulated {
        xs: Vec<f64>,
        density: Vec<f64>,
        momentum: Vec<f64>,
    },
}

pub fn build_initial(preset: &InitialPreset, grid: Grid) -> Result<FieldState> {
    let xs = grid.nodes();
    let (density, momentum): (Vec<f64>, Vec<f64>) = match preset {
        InitialPreset::Constant { density, velocity } => {
            if !(*density > 0.0) {
                return Err(Error::invalid("constant preset needs positive density"));
            }
            (
                vec![*density; grid.n_cells],
                vec![density * velocity; grid.n_cells],
            )
        }
        InitialPreset::RiemannStep {
            left_density,
            left_velocity,
            right_density,
            right_velocity,
            split,
        } => {
            if !(*left_density > 0.0 && *right_density > 0.0) {
                return Err(Error::invalid("step preset needs positive densities"));
            }
            let d: Vec<f64> = xs
                .iter()
                .map(|&x| if x < *split { *left_density } else { *right_density })
                .collect();
            let m: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    if x < *split {
                        left_density * left_velocity
                    } else {
                        right_density * right_velocity
                    }
                })
                .collect();
            (d, m)
        }
        InitialPreset::Bump {
            background,
            amplitude,
            width,
            center,
            velocity,
        } => {
            if !(*width > 0.0) {
                return Err(Error::invalid("bump preset needs positive width"));
            }
            if !(*background > 0.0) || background + amplitude.min(0.0) <= 0.0 {
                return Err(Error::invalid("bump preset would touch vacuum"));
            }
            let d: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let xi = (x - center) / width;
                    background + amplitude * (-xi * xi).exp()
                })
                .collect();
            let m: Vec<f64> = d.iter().map(|r| r * velocity).collect();
            (d, m)
        }
        InitialPreset::Tabulated {
            xs: txs,
            density,
            momentum,
        } => {
            if txs.len() < 2 || txs.len() != density.len() || txs.len() != momentum.len() {
                return Err(Error::invalid("tabulated initial data: bad column lengths"));
            }
            if txs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid("tabulated initial data: x must ascend"));
            }
            if density.iter().any(|&r| !(r > 0.0)) {
                return Err(Error::invalid("tabulated initial data: density must be positive"));
            }
            let interp = |x: f64, ys: &[f64]| -> f64 {
                if x <= txs[0] {
                    return ys[0];
                }
                if x >= txs[txs.len() - 1] {
                    return ys[ys.len() - 1];
                }
                let i = match txs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                    Ok(i) => return ys[i],
                    Err(i) => i - 1,
                };
                let t = (x - txs[i]) / (txs[i + 1] - txs[i]);
                (1.0 - t) * ys[i] + t * ys[i + 1]
            };
            (
                xs.iter().map(|&x| interp(x, density)).collect(),
                xs.iter().map(|&x| interp(x, momentum)).collect(),
            )
        }
    };
    FieldState::new(grid, 0.0, density, momentum)
}

/// Parse a three-column "x density momentum" text table; '#' starts a comment.
pub fn read_state_table(path: &std::path::Path) -> Result<InitialPreset> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut density = Vec::new();
    let mut momentum = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::invalid(format!(
                "state table line {}: expected three columns",
                lineno + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::invalid(format!("state table line {}: bad number", lineno + 1)))
        };
        xs.push(parse(cols[0])?);
        density.push(parse(cols[1])?);
        momentum.push(parse(cols[2])?);
    }
    Ok(InitialPreset::Tabulated {
        xs,
        density,
        momentum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peak_hits_requested_amplitude() {
        let grid = Grid::new(-8.0, 8.0, 1601).unwrap();
        let s = build_initial(
            &InitialPreset::Bump {
                background: 1.0,
                amplitude: 15.0,
                width: 1.0,
                center: 0.0,
                velocity: 0.0,
            },
            grid,
        )
        .unwrap();
        let peak = s.density.iter().cloned().fold(0.0f64, f64::max);
        assert!((peak - 16.0).abs() < 1e-12);
    }

    #[test]
    fn dip_must_stay_above_vacuum() {
        let grid = Grid::new(-8.0, 8.0, 64).unwrap();
        assert!(build_initial(
            &InitialPreset::Bump {
                background: 1.0,
                amplitude: -1.0,
                width: 1.0,
                center: 0.0,
                velocity: 0.0,
            },
            grid,
        )
        .is_err());
    }

    #[test]
    fn step_splits_at_interface() {
        let grid = Grid::new(-2.0, 2.0, 401).unwrap();
        let s = build_initial(
            &InitialPreset::RiemannStep {
                left_density: 1.2,
                left_velocity: 0.0,
                right_density: 0.6,
                right_velocity: 0.5,
                split: 0.0,
            },
            grid,
        )
        .unwrap();
        assert_eq!(s.density[0], 1.2);
        assert_eq!(s.density[grid.n_cells - 1], 0.6);
        assert_eq!(s.momentum[grid.n_cells - 1], 0.3);
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let grid = Grid::new(0.0, 4.0, 41).unwrap();
        let s = build_initial(
            &InitialPreset::Tabulated {
                xs: vec![1.0, 2.0, 3.0],
                density: vec![1.0, 2.0, 1.0],
                momentum: vec![0.0, 1.0, 0.0],
            },
            grid,
        )
        .unwrap();
        assert_eq!(s.density[0], 1.0);
        assert!((s.density[15] - 1.5).abs() < 1e-12);
        assert_eq!(s.density[40], 1.0);
    }
}
