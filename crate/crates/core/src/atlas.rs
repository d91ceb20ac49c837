//! Entropy contour atlas over the admissible (mu, t) strip of the unimodal
//! normal form: per-cell entropy and moduli coordinates, banded
//! classification of the values, connectivity of the bands at grid
//! resolution, marching-squares isolines, and the CSV / SVG / JSON
//! emitters behind the command-line `grid` runs.

use rayon::prelude::*;
use thiserror::Error;

use crate::entropy::{entropy_lap, EntropyMethod, LapOptions};
use crate::family::NormalFormParams;
use crate::num::fmt_f64;

/// Band partition of [0, log 2]: half-open cells, the last one closed.
pub const BAND_EDGES: [f64; 6] = [0.1, 0.25, 0.4, 0.48, 0.55, 0.65];
/// Slack over log 2 tolerated on classified values.
pub const BAND_CAP_TOL: f64 = 1e-3;
/// Pixels closer than this to a separating band edge stay out of the
/// connectivity analysis: entropy noise there would fragment bands.
pub const BAND_NEUTRAL_TOL: f64 = 2e-3;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("entropy value {h} outside [0, log 2 + {BAND_CAP_TOL}]")]
    OutOfRange { h: f64 },
}

/// Grid request over a (mu, t) rectangle; cells are evaluated at centers.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub entropy: LapOptions,
}

impl GridSpec {
    /// The default window [-4, 0) x [-4, 0) intersected with the strip.
    /// Longer lap runs with a lower cap than the generic defaults: cells
    /// near entropy zero need depth, cells near log 2 need none.
    pub fn default_window(nx: usize, ny: usize) -> Self {
        Self {
            mu_min: -4.0,
            mu_max: 0.0,
            t_min: -4.0,
            t_max: 0.0,
            nx,
            ny,
            entropy: LapOptions {
                n_max: 100,
                lap_cap: 50_000,
                tol: 1e-3,
                window: 5,
            },
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let dx = (self.mu_max - self.mu_min) / self.nx as f64;
        let dy = (self.t_max - self.t_min) / self.ny as f64;
        (
            self.mu_min + (ix as f64 + 0.5) * dx,
            self.t_min + (iy as f64 + 0.5) * dy,
        )
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy)]
pub struct GridCell {
    pub mu: f64,
    pub t: f64,
    pub admissible: bool,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub entropy: Option<f64>,
    pub upper_bound: Option<f64>,
    pub band: Option<u8>,
    pub method: Option<EntropyMethod>,
    pub converged: bool,
}

impl GridCell {
    fn inadmissible(mu: f64, t: f64) -> Self {
        Self {
            mu,
            t,
            admissible: false,
            sigma1: None,
            sigma2: None,
            entropy: None,
            upper_bound: None,
            band: None,
            method: None,
            converged: true,
        }
    }
}

/// Row-major (by iy, then ix) grid of evaluated cells.
#[derive(Debug, Clone)]
pub struct EntropyGrid {
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
}

impl EntropyGrid {
    pub fn cell(&self, ix: usize, iy: usize) -> &GridCell {
        &self.cells[iy * self.spec.nx + ix]
    }

    /// Test/synthetic constructor: entropy values only, every valued cell
    /// admissible and self-classified.
    pub fn from_values(spec: GridSpec, values: Vec<Option<f64>>) -> Self {
        assert_eq!(values.len(), spec.nx * spec.ny);
        let cells = values
            .into_iter()
            .enumerate()
            .map(|(idx, v)| {
                let (mu, t) = spec.cell_center(idx % spec.nx, idx / spec.nx);
                match v {
                    None => GridCell::inadmissible(mu, t),
                    Some(h) => GridCell {
                        mu,
                        t,
                        admissible: true,
                        sigma1: None,
                        sigma2: None,
                        entropy: Some(h),
                        upper_bound: Some(h),
                        band: band_classify(h).ok(),
                        method: Some(EntropyMethod::Lap),
                        converged: true,
                    },
                }
            })
            .collect();
        Self { spec, cells }
    }
}

fn evaluate_cell(spec: &GridSpec, ix: usize, iy: usize) -> GridCell {
    let (mu, t) = spec.cell_center(ix, iy);
    if !NormalFormParams::admissible(mu, t) {
        return GridCell::inadmissible(mu, t);
    }
    let sys = match NormalFormParams::new(mu, t) {
        Ok(p) => p.to_system(),
        Err(_) => return GridCell::inadmissible(mu, t),
    };
    let model = sys.interval_model();
    match entropy_lap(&model, &spec.entropy) {
        Ok(est) => GridCell {
            mu,
            t,
            admissible: true,
            sigma1: Some(sys.sigma.sigma1),
            sigma2: Some(sys.sigma.sigma2),
            entropy: Some(est.value),
            upper_bound: Some(est.upper_bound),
            band: band_classify(est.value).ok(),
            method: Some(est.method),
            converged: est.converged,
        },
        Err(_) => GridCell {
            mu,
            t,
            admissible: true,
            sigma1: Some(sys.sigma.sigma1),
            sigma2: Some(sys.sigma.sigma2),
            entropy: None,
            upper_bound: None,
            band: None,
            method: None,
            converged: false,
        },
    }
}

/// Evaluates the grid. Cells are independent; `workers` only sizes the
/// thread pool and never changes the output bytes.
pub fn entropy_grid(spec: &GridSpec, workers: Option<usize>) -> EntropyGrid {
    let compute = || -> Vec<GridCell> {
        (0..spec.nx * spec.ny)
            .into_par_iter()
            .map(|idx| evaluate_cell(spec, idx % spec.nx, idx / spec.nx))
            .collect()
    };
    let cells = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(compute),
        None => compute(),
    };
    EntropyGrid { spec: *spec, cells }
}

/// Index of the band containing h under the partition
/// [0, 0.1), [0.1, 0.25), [0.25, 0.4), [0.4, 0.48), [0.48, 0.55),
/// [0.55, 0.65), [0.65, log 2].
pub fn band_classify(h: f64) -> Result<u8, AtlasError> {
    if !(0.0..=2.0f64.ln() + BAND_CAP_TOL).contains(&h) {
        return Err(AtlasError::OutOfRange { h });
    }
    for (i, edge) in BAND_EDGES.iter().enumerate() {
        if h < *edge {
            return Ok(i as u8);
        }
    }
    Ok(6)
}

/// Distance from h to the nearest separating band edge.
fn edge_distance(h: f64) -> f64 {
    BAND_EDGES
        .iter()
        .map(|e| (h - e).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Per-band component count under 8-connectivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandReport {
    pub band: u8,
    pub pixels: usize,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityReport {
    pub bands: Vec<BandReport>,
    pub neutral_pixels: usize,
}

/// Labels the admissible pixels of each band (pixels within the neutral
/// tolerance of a band edge are excluded) and counts 8-connected
/// components per band.
pub fn band_connectivity(grid: &EntropyGrid) -> ConnectivityReport {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let mut label: Vec<Option<u8>> = vec![None; nx * ny];
    let mut neutral = 0usize;
    for (i, cell) in grid.cells.iter().enumerate() {
        if !cell.admissible {
            continue;
        }
        if let (Some(h), Some(band)) = (cell.entropy, cell.band) {
            if edge_distance(h) < BAND_NEUTRAL_TOL {
                neutral += 1;
            } else {
                label[i] = Some(band);
            }
        }
    }
    let mut visited = vec![false; nx * ny];
    let mut bands: Vec<BandReport> = (0..7u8)
        .map(|band| BandReport {
            band,
            pixels: label.iter().flatten().filter(|b| **b == band).count(),
            components: 0,
        })
        .collect();
    for start in 0..nx * ny {
        let band = match label[start] {
            Some(b) if !visited[start] => b,
            _ => continue,
        };
        bands[band as usize].components += 1;
        // Flood fill with 8-connectivity.
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(idx) = stack.pop() {
            let (x, y) = ((idx % nx) as isize, (idx / nx) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nxx, nyy) = (x + dx, y + dy);
                    if nxx < 0 || nyy < 0 || nxx >= nx as isize || nyy >= ny as isize {
                        continue;
                    }
                    let nidx = nyy as usize * nx + nxx as usize;
                    if !visited[nidx] && label[nidx] == Some(band) {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
    }
    ConnectivityReport {
        bands,
        neutral_pixels: neutral,
    }
}

/// Marching squares over the cell-center lattice: segments with linear
/// interpolation, saddles resolved by the center average, chained into
/// polylines. Squares touching an unvalued cell are skipped.
pub fn contour_extract(grid: &EntropyGrid, level: f64) -> Vec<Vec<[f64; 2]>> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let value = |ix: usize, iy: usize| -> Option<f64> { grid.cell(ix, iy).entropy };
    let pos = |ix: usize, iy: usize| -> [f64; 2] {
        let (mu, t) = grid.spec.cell_center(ix, iy);
        [mu, t]
    };
    let mut segments: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for iy in 0..ny.saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            let corners = [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)];
            let vals = [
                value(corners[0].0, corners[0].1),
                value(corners[1].0, corners[1].1),
                value(corners[2].0, corners[2].1),
                value(corners[3].0, corners[3].1),
            ];
            let vals = match (vals[0], vals[1], vals[2], vals[3]) {
                (Some(a), Some(b), Some(c), Some(d)) => [a, b, c, d],
                _ => continue,
            };
            let mut case = 0usize;
            for (k, v) in vals.iter().enumerate() {
                if *v > level {
                    case |= 1 << k;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }
            // Interpolated crossing on edge (corner k -> corner k+1).
            let cross = |k: usize| -> [f64; 2] {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                let (va, vb) = (vals[k], vals[(k + 1) % 4]);
                let t = ((level - va) / (vb - va)).clamp(0.0, 1.0);
                let pa = pos(a.0, a.1);
                let pb = pos(b.0, b.1);
                [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
            };
            let mut emit = |e1: usize, e2: usize| segments.push((cross(e1), cross(e2)));
            match case {
                1 => emit(3, 0),
                2 => emit(0, 1),
                3 => emit(3, 1),
                4 => emit(1, 2),
                6 => emit(0, 2),
                7 => emit(3, 2),
                8 => emit(2, 3),
                9 => emit(2, 0),
                11 => emit(2, 1),
                12 => emit(1, 3),
                13 => emit(1, 0),
                14 => emit(0, 3),
                5 | 10 => {
                    // Saddle: split by the center average.
                    let center = 0.25 * (vals[0] + vals[1] + vals[2] + vals[3]);
                    let center_above = center > level;
                    if (case == 5) == center_above {
                        emit(3, 0);
                        emit(1, 2);
                    } else {
                        emit(0, 1);
                        emit(2, 3);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    chain_segments(
        segments,
        grid.spec.cell_center(1, 0).0 - grid.spec.cell_center(0, 0).0,
    )
}

fn chain_segments(segments: Vec<([f64; 2], [f64; 2])>, scale: f64) -> Vec<Vec<[f64; 2]>> {
    use std::collections::HashMap;
    let quant = |p: [f64; 2]| -> (i64, i64) {
        let q = 1e6 / scale.abs().max(1e-12);
        ((p[0] * q).round() as i64, (p[1] * q).round() as i64)
    };
    let mut by_endpoint: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, b)) in segments.iter().enumerate() {
        by_endpoint.entry(quant(*a)).or_default().push(i);
        by_endpoint.entry(quant(*b)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut line = vec![a, b];
        // Extend forward then backward.
        for _pass in 0..2 {
            loop {
                let tail = *line.last().unwrap();
                let key = quant(tail);
                let next = by_endpoint
                    .get(&key)
                    .and_then(|ids| ids.iter().find(|i| !used[**i]).copied());
                match next {
                    Some(i) => {
                        used[i] = true;
                        let (p, q) = segments[i];
                        if quant(p) == key {
                            line.push(q);
                        } else {
                            line.push(p);
                        }
                    }
                    None => break,
                }
            }
            line.reverse();
        }
        polylines.push(line);
    }
    polylines
}

/// Fig-style color order, lowest band first.
pub const BAND_COLORS: [&str; 7] = ["black", "blue", "magenta", "green", "cyan", "yellow", "red"];

/// CSV artifact: header `mu,t,admissible,sigma1,sigma2,entropy,upper_bound,band,method`,
/// one row per cell, row-major by (ny, nx), floats with 17 significant
/// digits, empty fields on inadmissible cells.
pub fn write_grid_csv(grid: &EntropyGrid) -> String {
    let mut out = String::with_capacity(grid.cells.len() * 64);
    out.push_str("mu,t,admissible,sigma1,sigma2,entropy,upper_bound,band,method\n");
    for cell in &grid.cells {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(cell.mu),
            fmt_f64(cell.t),
            cell.admissible,
            opt(cell.sigma1),
            opt(cell.sigma2),
            opt(cell.entropy),
            opt(cell.upper_bound),
            cell.band.map(|b| b.to_string()).unwrap_or_default(),
            cell.method.map(|m| m.as_str()).unwrap_or_default(),
        ));
    }
    out
}

/// JSON artifact for the connectivity report.
pub fn write_connectivity_json(report: &ConnectivityReport) -> String {
    let mut out = String::from("{\n  \"bands\": [\n");
    for (i, b) in report.bands.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"band\": {}, \"components\": {}, \"pixels\": {}}}{}\n",
            b.band,
            b.components,
            b.pixels,
            if i + 1 < report.bands.len() { "," } else { "" }
        ));
    }
    out.push_str(&format!(
        "  ],\n  \"neutral_pixels\": {}\n}}\n",
        report.neutral_pixels
    ));
    out
}

/// SVG rendering: band-colored pixels (color order black < blue < magenta
/// < green < cyan < yellow < red), optional isolines on top.
pub fn write_grid_svg(grid: &EntropyGrid, contour_levels: &[f64]) -> String {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let (w, h) = (800.0, 800.0);
    let px = w / nx as f64;
    let py = h / ny as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    out.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    for iy in 0..ny {
        for ix in 0..nx {
            if let Some(band) = grid.cell(ix, iy).band {
                // SVG y runs downward; flip so increasing t points up.
                let x = ix as f64 * px;
                let y = (ny - 1 - iy) as f64 * py;
                out.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                    x,
                    y,
                    px + 0.5,
                    py + 0.5,
                    BAND_COLORS[band as usize]
                ));
            }
        }
    }
    let to_px = |p: [f64; 2]| -> (f64, f64) {
        let fx = (p[0] - grid.spec.mu_min) / (grid.spec.mu_max - grid.spec.mu_min);
        let fy = (p[1] - grid.spec.t_min) / (grid.spec.t_max - grid.spec.t_min);
        (fx * w, (1.0 - fy) * h)
    };
    for level in contour_levels {
        for line in contour_extract(grid, *level) {
            let mut d = String::new();
            for (i, p) in line.iter().enumerate() {
                let (x, y) = to_px(*p);
                d.push_str(&format!(
                    "{}{:.2} {:.2} ",
                    if i == 0 { "M" } else { "L" },
                    x,
                    y
                ));
            }
            out.push_str(&format!(
                "<path d=\"{}\" fill=\"none\" stroke=\"white\" stroke-width=\"0.6\"/>\n",
                d.trim_end()
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
