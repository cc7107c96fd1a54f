//! Conventional swap spectroscopy: average many shots on every point of a
//! rectangular `(omega_q, t)` grid, then fit `(g, omega_r)` to the whole map
//! by maximum likelihood.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sci;
use crate::optimize::NelderMead;
use crate::physics::{outcome_likelihood, ControlSetting, NoiseParams, SystemParams};
use crate::smc::PriorSpec;
use crate::strategy::grid_setting;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    /// Repetitions averaged at every setting.
    pub m_r: u64,
}

impl GridSpec {
    pub fn new(omega: (f64, f64), n_omega: usize, t: (f64, f64), n_t: usize, m_r: u64) -> Result<Self> {
        let grid = Self {
            omega_min: omega.0,
            omega_max: omega.1,
            n_omega,
            t_min: t.0,
            t_max: t.1,
            n_t,
            m_r,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_omega < 2 || self.n_t < 2 {
            return Err(Error::invalid("grid.n_omega", "grid needs at least 2 points per axis"));
        }
        if !(self.omega_max > self.omega_min) || !self.omega_max.is_finite() || !self.omega_min.is_finite() {
            return Err(Error::invalid("grid.omega_max", "omega range is degenerate"));
        }
        if !(self.t_min >= 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::invalid("grid.t_max", "t range must satisfy 0 <= t_min < t_max"));
        }
        if self.m_r == 0 {
            return Err(Error::invalid("grid.m_r", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_settings(&self) -> usize {
        self.n_omega * self.n_t
    }

    pub fn total_shots(&self) -> u64 {
        self.n_settings() as u64 * self.m_r
    }

    pub fn omega_at(&self, i: usize) -> f64 {
        self.omega_min + (self.omega_max - self.omega_min) * i as f64 / (self.n_omega - 1) as f64
    }

    pub fn t_at(&self, j: usize) -> f64 {
        self.t_min + (self.t_max - self.t_min) * j as f64 / (self.n_t - 1) as f64
    }

    pub fn settings(&self) -> impl Iterator<Item = ControlSetting> + '_ {
        (0..self.n_settings()).map(|i| grid_setting(i, self).expect("index in range"))
    }
}

/// One averaged grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub setting: ControlSetting,
    pub probability: f64,
    pub m_r: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridData {
    pub cells: Vec<GridCell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Acquisition {
    /// Each cell is the mean of `m_r` simulated shots.
    Sampled,
    /// Each cell is the exact reported-excited probability (no projection noise).
    Exact,
}

pub fn acquire_grid<R: Rng + ?Sized>(
    truth: &SystemParams,
    grid: &GridSpec,
    noise: &NoiseParams,
    acquisition: Acquisition,
    rng: &mut R,
) -> Result<GridData> {
    grid.validate()?;
    let cells = grid
        .settings()
        .map(|setting| {
            let p = outcome_likelihood(true, truth, &setting, noise);
            let probability = match acquisition {
                Acquisition::Exact => p,
                Acquisition::Sampled => {
                    let k = Binomial::new(grid.m_r, p).map_err(|e| Error::invalid("probability", e.to_string()))?;
                    k.sample(rng) as f64 / grid.m_r as f64
                }
            };
            Ok(GridCell {
                setting,
                probability,
                m_r: grid.m_r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridData { cells })
}

impl GridData {
    pub fn total_shots(&self) -> u64 {
        self.cells.iter().map(|c| c.m_r).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega_q", "t", "empirical_probability", "m_r"])?;
        for c in &self.cells {
            w.write_record([sci(c.setting.omega_q), sci(c.setting.t), sci(c.probability), c.m_r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        let expected = ["omega_q", "t", "empirical_probability", "m_r"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Csv(format!("expected header {}", expected.join(","))));
        }
        let mut cells = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let num = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: column {}: {e}", row + 1, expected[i])))
            };
            let setting = ControlSetting::new(num(0)?, num(1)?)?;
            let probability = num(2)?;
            if !(0.0..=1.0).contains(&probability) {
                return Err(Error::Csv(format!("row {}: probability outside [0, 1]", row + 1)));
            }
            let m_r = record[3]
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::Csv(format!("row {}: m_r: {e}", row + 1)))?;
            cells.push(GridCell {
                setting,
                probability,
                m_r,
            });
        }
        Ok(Self { cells })
    }

    /// Binomial negative log-likelihood of the observed counts under `params`.
    pub fn negative_log_likelihood(&self, params: &SystemParams, noise: &NoiseParams) -> f64 {
        const FLOOR: f64 = 1e-300;
        self.cells
            .iter()
            .map(|c| {
                let p = outcome_likelihood(true, params, &c.setting, noise);
                let m = c.m_r as f64;
                let mut nll = 0.0;
                if c.probability > 0.0 {
                    nll -= m * c.probability * p.max(FLOOR).ln();
                }
                if c.probability < 1.0 {
                    nll -= m * (1.0 - c.probability) * (1.0 - p).max(FLOOR).ln();
                }
                nll
            })
            .sum()
    }

    /// The likelihood of the data under its own empirical frequencies.
    fn saturated_nll(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let (p, m) = (c.probability, c.m_r as f64);
                let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
                m * (h(p) + h(1.0 - p))
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridFit {
    pub estimate: SystemParams,
    pub negative_log_likelihood: f64,
    /// `2 (NLL - NLL_saturated)`; near zero for a perfect fit.
    pub deviance: f64,
    /// The optimum sits within one coarse cell of the search box edge.
    pub on_boundary: bool,
    /// Deviance far above its chi-square expectation (`n_cells - 2` degrees
    /// of freedom): the data are not explained by any point in the box.
    pub poor_fit: bool,
    pub evaluations: usize,
}

/// Number of coarse candidates polished by Nelder-Mead.
const POLISH_CANDIDATES: usize = 4;
const MAX_COARSE_PER_AXIS: usize = 400;

/// Maximum-likelihood `(g, omega_r)` for the grid data, searched inside the
/// `+-4 sigma` box of `search_prior`.
///
/// The likelihood oscillates in both parameters, so the box is first
/// scanned on a lattice fine enough to resolve one fringe at the longest
/// waiting time, and the best lattice points are then polished locally.
pub fn fit_grid(data: &GridData, noise: &NoiseParams, search_prior: &PriorSpec) -> Result<GridFit> {
    search_prior.validate()?;
    if data.cells.is_empty() {
        return Err(Error::FitFailure("no grid cells".into()));
    }
    if data.cells.iter().all(|c| c.probability == 0.0) || data.cells.iter().all(|c| c.probability == 1.0) {
        return Err(Error::FitFailure("likelihood surface is flat (constant data)".into()));
    }

    let g_lo = (search_prior.mu_g - 4.0 * search_prior.sigma_g).max(1e-3 * search_prior.mu_g);
    let g_hi = search_prior.mu_g + 4.0 * search_prior.sigma_g;
    let w_lo = search_prior.mu_omega - 4.0 * search_prior.sigma_omega;
    let w_hi = search_prior.mu_omega + 4.0 * search_prior.sigma_omega;
    let t_span = data.cells.iter().map(|c| c.setting.t).fold(0.0, f64::max).max(1e-12);
    let points = |width: f64, phase_step: f64| ((width * t_span / phase_step).ceil() as usize + 1).clamp(9, MAX_COARSE_PER_AXIS);
    let n_g = points(g_hi - g_lo, 0.5);
    let n_w = points(w_hi - w_lo, 1.0);
    let dg = (g_hi - g_lo) / (n_g - 1) as f64;
    let dw = (w_hi - w_lo) / (n_w - 1) as f64;

    let nll = |g: f64, w: f64| data.negative_log_likelihood(&SystemParams { g, omega_r: w }, noise);
    let mut lattice = Vec::with_capacity(n_g * n_w);
    for i in 0..n_g {
        for j in 0..n_w {
            let (g, w) = (g_lo + dg * i as f64, w_lo + dw * j as f64);
            lattice.push((nll(g, w), g, w));
        }
    }
    let mut evaluations = lattice.len();
    lattice.sort_by(|a, b| a.0.total_cmp(&b.0));

    let in_box = |x: &[f64]| x[0] >= g_lo && x[0] <= g_hi && x[1] >= w_lo && x[1] <= w_hi;
    let mut best: Option<(f64, f64, f64)> = None;
    for &(_, g0, w0) in lattice.iter().take(POLISH_CANDIDATES) {
        let m = NelderMead::default().minimize(
            |x| if in_box(x) { nll(x[0], x[1]) } else { f64::INFINITY },
            &[g0, w0],
            &[0.5 * dg, 0.5 * dw],
        );
        evaluations += m.evaluations;
        if best.is_none_or(|b| m.value < b.0) {
            best = Some((m.value, m.x[0], m.x[1]));
        }
    }
    let (value, g, w) = best.expect("at least one candidate");
    if !value.is_finite() {
        return Err(Error::FitFailure("no finite likelihood inside the search box".into()));
    }
    let on_boundary = g - g_lo < dg || g_hi - g < dg || w - w_lo < dw || w_hi - w < dw;
    let deviance = 2.0 * (value - data.saturated_nll());
    let dof = data.cells.len().saturating_sub(2).max(1) as f64;
    Ok(GridFit {
        estimate: SystemParams { g, omega_r: w },
        negative_log_likelihood: value,
        deviance,
        on_boundary,
        poor_fit: deviance > dof + 10.0 * (2.0 * dof).sqrt(),
        evaluations,
    })
}
