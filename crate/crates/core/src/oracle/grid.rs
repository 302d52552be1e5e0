use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::exec::Exec;
use crate::ratesolver::NetworkModel;

pub const MAX_GRID_ALPHABET: usize = 8;
pub const MAX_GRID_DIMENSION: usize = 4;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    /// Best `min_J H(X_{J^c})` found, in bits.
    pub value: f64,
    pub p_x: Vec<f64>,
    /// Free coordinates left after eliminating the marginal constraints.
    pub dimension: usize,
    pub grid_points: u128,
    pub feasible_points: u128,
}

/// `p = offset + sum_f coef[f] * p_free[f]` for each pivot coordinate.
struct Elimination {
    free: Vec<usize>,
    pivots: Vec<(usize, f64, Vec<f64>)>,
}

/// Reduced row echelon form of `[a | b]`.
fn eliminate(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, cols: usize) -> Elimination {
    let rows = a.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let Some(best) = (r..rows).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())) else { break };
        if a[best][col].abs() < PIVOT_TOL {
            continue;
        }
        a.swap(r, best);
        b.swap(r, best);
        let lead = a[r][col];
        for v in &mut a[r] {
            *v /= lead;
        }
        b[r] /= lead;
        for other in 0..rows {
            if other != r {
                let f = a[other][col];
                if f != 0.0 {
                    for c in 0..cols {
                        a[other][c] -= f * a[r][c];
                    }
                    b[other] -= f * b[r];
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let pivots = pivot_cols
        .iter()
        .enumerate()
        .map(|(row, &col)| (col, b[row], free.iter().map(|&f| -a[row][f]).collect()))
        .collect();
    Elimination { free, pivots }
}

fn entropy(mass: &[f64]) -> f64 {
    mass.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// Exhaustive grid search for the optimum of the max-min entropy program over
/// the polytope of link laws whose marginal on every jam set equals the
/// innocent one. The free coordinates run over `{0, r, 2r, ...} ∩ [0, 1]`.
pub fn grid_solve_b(model: &NetworkModel, resolution: f64, exec: Exec) -> Result<GridSolution, OracleError> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(OracleError::BadResolution(resolution));
    }
    let sizes = model.link_alphabet_sizes().to_vec();
    let total: usize = sizes.iter().product();
    if total > MAX_GRID_ALPHABET {
        return Err(OracleError::AlphabetTooLarge { found: total, max: MAX_GRID_ALPHABET });
    }
    let symbols: Vec<Vec<usize>> = (0..total)
        .map(|mut x| {
            let mut s = vec![0; sizes.len()];
            for l in (0..sizes.len()).rev() {
                s[l] = x % sizes[l];
                x /= sizes[l];
            }
            s
        })
        .collect();
    let index_on = |links: &[usize], x: usize| links.iter().fold(0, |acc, &l| acc * sizes[l] + symbols[x][l]);
    let family = model.jam_family();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut kept_maps = Vec::new();
    for j in family.iter() {
        let inn = model.innocent_marginal(j);
        for (v, &target) in inn.iter().enumerate() {
            a.push((0..total).map(|x| if index_on(j.links(), x) == v { 1.0 } else { 0.0 }).collect());
            b.push(target);
        }
        let keep = j.complement(sizes.len());
        let cells: usize = keep.iter().map(|&l| sizes[l]).product();
        kept_maps.push((cells, (0..total).map(|x| index_on(&keep, x)).collect::<Vec<_>>()));
    }
    let el = eliminate(a, b, total);
    let dim = el.free.len();
    if dim > MAX_GRID_DIMENSION {
        return Err(OracleError::DimensionTooLarge { found: dim, max: MAX_GRID_DIMENSION });
    }
    let steps = (1.0 / resolution + 1e-9).floor() as u64 + 1;
    let grid_points = (steps as u128).pow(dim as u32);
    let evaluate = |point: u64, p: &mut Vec<f64>, scratch: &mut Vec<f64>| -> Option<f64> {
        let mut rest = point;
        let mut free_vals = [0.0; MAX_GRID_DIMENSION];
        for (f, &col) in el.free.iter().enumerate() {
            let v = (rest % steps) as f64 * resolution;
            rest /= steps;
            free_vals[f] = v;
            p[col] = v;
        }
        for (col, off, coef) in &el.pivots {
            let v = off + coef.iter().zip(&free_vals).map(|(c, f)| c * f).sum::<f64>();
            if v < -1e-12 {
                return None;
            }
            p[*col] = v.max(0.0);
        }
        let mut worst = f64::INFINITY;
        for (cells, map) in &kept_maps {
            scratch.clear();
            scratch.resize(*cells, 0.0);
            for (x, &c) in map.iter().enumerate() {
                scratch[c] += p[x];
            }
            worst = worst.min(entropy(scratch));
        }
        Some(worst)
    };
    // chunks over the outermost free coordinate keep the scan order fixed
    let chunk = if dim == 0 { 1 } else { (steps as u128).pow(dim as u32 - 1) as u64 };
    let chunks = if dim == 0 { 1 } else { steps };
    let results = exec.map(0..chunks, |ci| {
        let mut p = vec![0.0; total];
        let mut scratch = Vec::new();
        let mut best: Option<(f64, u64)> = None;
        let mut feasible = 0u128;
        for k in 0..chunk {
            // outermost coordinate varies slowest
            let point = k + ci * chunk;
            if let Some(v) = evaluate(point, &mut p, &mut scratch) {
                feasible += 1;
                if best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, point));
                }
            }
        }
        (best, feasible)
    });
    let mut best: Option<(f64, u64)> = None;
    let mut feasible_points = 0;
    for (b, f) in results {
        feasible_points += f;
        if let Some((v, pt)) = b {
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, pt));
            }
        }
    }
    let (value, point) = best.ok_or(OracleError::NoFeasiblePoint(resolution))?;
    let mut p_x = vec![0.0; total];
    evaluate(point, &mut p_x, &mut Vec::new());
    Ok(GridSolution { value, p_x, dimension: dim, grid_points, feasible_points })
}
