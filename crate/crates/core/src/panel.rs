//! Binary site-by-time observation panel with missingness bookkeeping.
//!
//! Sites and times are zero-based internally. Cells before a site's first
//! observation are treated as missing at random and contribute nothing to
//! the likelihood; from the first observation onward a missing cell enters
//! the state-dependent missingness model.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    Missing,
    /// Observed in the source data but masked for held-out evaluation. The
    /// outcome is hidden and the cell is excluded from the missingness term.
    HeldOut,
}

impl Cell {
    pub fn value(self) -> Option<bool> {
        match self {
            Cell::Zero => Some(false),
            Cell::One => Some(true),
            Cell::Missing | Cell::HeldOut => None,
        }
    }

    pub fn from_value(y: Option<bool>) -> Self {
        match y {
            Some(true) => Cell::One,
            Some(false) => Cell::Zero,
            None => Cell::Missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    n_sites: usize,
    n_times: usize,
    start_month: u8,
    cells: Vec<Cell>,
    first_obs: Vec<Option<usize>>,
    // CSR index of observed cells per time
    obs_offsets: Vec<usize>,
    obs_sites: Vec<u32>,
    obs_values: Vec<bool>,
    active_count: Vec<u32>,
    missing_count: Vec<u32>,
}

impl ObservationPanel {
    /// Builds a panel from row-major cells (`cells[site * n_times + time]`).
    /// `start_month` is the calendar month (1..=12) of time index 0.
    pub fn new(n_sites: usize, n_times: usize, cells: Vec<Cell>, start_month: u8) -> Result<Self> {
        if n_sites == 0 || n_times == 0 {
            return Err(Error::RangeError("panel needs at least one site and one time".into()));
        }
        if !(1..=12).contains(&start_month) {
            return Err(Error::RangeError(format!("start month {start_month} not in 1..=12")));
        }
        if cells.len() != n_sites * n_times {
            return Err(Error::LengthMismatch { expected: n_sites * n_times, got: cells.len() });
        }
        let first_obs = (0..n_sites)
            .map(|i| {
                cells[i * n_times..(i + 1) * n_times]
                    .iter()
                    .position(|c| !matches!(c, Cell::Missing))
            })
            .collect();
        Ok(Self::with_first_obs(n_sites, n_times, cells, start_month, first_obs))
    }

    /// Convenience constructor from nested `y[site][time]` options.
    pub fn from_rows(rows: &[Vec<Option<bool>>], start_month: u8) -> Result<Self> {
        let n_sites = rows.len();
        let n_times = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(n_sites * n_times);
        for row in rows {
            if row.len() != n_times {
                return Err(Error::LengthMismatch { expected: n_times, got: row.len() });
            }
            cells.extend(row.iter().map(|&y| Cell::from_value(y)));
        }
        Self::new(n_sites, n_times, cells, start_month)
    }

    fn with_first_obs(
        n_sites: usize,
        n_times: usize,
        cells: Vec<Cell>,
        start_month: u8,
        first_obs: Vec<Option<usize>>,
    ) -> Self {
        let mut obs_offsets = Vec::with_capacity(n_times + 1);
        let mut obs_sites = Vec::new();
        let mut obs_values = Vec::new();
        let mut active_count = vec![0u32; n_times];
        let mut missing_count = vec![0u32; n_times];
        obs_offsets.push(0);
        for t in 0..n_times {
            for i in 0..n_sites {
                let cell = cells[i * n_times + t];
                if let Some(y) = cell.value() {
                    obs_sites.push(i as u32);
                    obs_values.push(y);
                }
                if first_obs[i].is_some_and(|f| t >= f) && cell != Cell::HeldOut {
                    active_count[t] += 1;
                    if cell == Cell::Missing {
                        missing_count[t] += 1;
                    }
                }
            }
            obs_offsets.push(obs_sites.len());
        }
        Self {
            n_sites,
            n_times,
            start_month,
            cells,
            first_obs,
            obs_offsets,
            obs_sites,
            obs_values,
            active_count,
            missing_count,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn start_month(&self) -> u8 {
        self.start_month
    }

    pub fn cell(&self, site: usize, time: usize) -> Cell {
        self.cells[site * self.n_times + time]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn y(&self, site: usize, time: usize) -> Option<bool> {
        self.cell(site, time).value()
    }

    /// Missingness indicator: true exactly when `y` is unobserved.
    pub fn r(&self, site: usize, time: usize) -> bool {
        self.y(site, time).is_none()
    }

    /// First time index with an observed outcome, `None` for never-observed sites.
    pub fn first_obs(&self, site: usize) -> Option<usize> {
        self.first_obs[site]
    }

    /// Zero-based month index (0 = January) of time `t`.
    #[inline]
    pub fn month_index(&self, t: usize) -> usize {
        (self.start_month as usize - 1 + t) % 12
    }

    /// Scaled calendar time `(t - 1) / (T - 1)` for one-based `t`; zero when `T = 1`.
    #[inline]
    pub fn scaled_time(&self, t: usize) -> f64 {
        if self.n_times <= 1 {
            0.0
        } else {
            t as f64 / (self.n_times - 1) as f64
        }
    }

    /// Whether cell `(site, time)` enters the missingness likelihood.
    pub fn in_missingness_model(&self, site: usize, time: usize) -> bool {
        self.first_obs[site].is_some_and(|f| time >= f) && self.cell(site, time) != Cell::HeldOut
    }

    /// Observed `(site, y)` pairs at time `t`.
    pub fn observed_at(&self, t: usize) -> impl ExactSizeIterator<Item = (usize, bool)> + '_ {
        let range = self.obs_offsets[t]..self.obs_offsets[t + 1];
        self.obs_sites[range.clone()]
            .iter()
            .zip(&self.obs_values[range])
            .map(|(&i, &y)| (i as usize, y))
    }

    pub(crate) fn observed_slices(&self, t: usize) -> (&[u32], &[bool]) {
        let range = self.obs_offsets[t]..self.obs_offsets[t + 1];
        (&self.obs_sites[range.clone()], &self.obs_values[range])
    }

    /// Number of cells in the missingness model at time `t`, and how many of them are missing.
    pub fn missingness_counts(&self, t: usize) -> (u32, u32) {
        (self.active_count[t], self.missing_count[t])
    }

    pub fn n_observed(&self) -> usize {
        self.obs_sites.len()
    }

    /// Fraction of all cells with unobserved outcomes.
    pub fn missingness_rate(&self) -> f64 {
        1.0 - self.n_observed() as f64 / (self.n_sites * self.n_times) as f64
    }

    /// Missingness among cells at or after each site's first observation.
    pub fn missingness_rate_after_first_obs(&self) -> f64 {
        let (active, missing) = (0..self.n_times).fold((0u64, 0u64), |(a, m), t| {
            (a + self.active_count[t] as u64, m + self.missing_count[t] as u64)
        });
        if active == 0 {
            0.0
        } else {
            missing as f64 / active as f64
        }
    }

    /// Returns a copy with one cell replaced, keeping first-observation indices fixed.
    pub fn with_cell(&self, site: usize, time: usize, cell: Cell) -> Self {
        let mut cells = self.cells.clone();
        cells[site * self.n_times + time] = cell;
        Self::with_first_obs(self.n_sites, self.n_times, cells, self.start_month, self.first_obs.clone())
    }

    /// Marks the given cells as held out, keeping first-observation indices fixed.
    pub fn mask_cells(&self, cells_to_mask: &[(usize, usize)]) -> Result<Self> {
        let mut cells = self.cells.clone();
        for &(i, t) in cells_to_mask {
            if i >= self.n_sites || t >= self.n_times {
                return Err(Error::IndexOutOfRange {
                    index: i * self.n_times + t,
                    size: self.n_sites * self.n_times,
                });
            }
            cells[i * self.n_times + t] = Cell::HeldOut;
        }
        Ok(Self::with_first_obs(self.n_sites, self.n_times, cells, self.start_month, self.first_obs.clone()))
    }

    /// Restricts the panel to a subset of sites, in the given order.
    pub fn select_sites(&self, sites: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(sites.len() * self.n_times);
        let mut first_obs = Vec::with_capacity(sites.len());
        for &i in sites {
            cells.extend_from_slice(&self.cells[i * self.n_times..(i + 1) * self.n_times]);
            first_obs.push(self.first_obs[i]);
        }
        Self::with_first_obs(sites.len(), self.n_times, cells, self.start_month, first_obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ObservationPanel {
        ObservationPanel::from_rows(
            &[
                vec![None, Some(true), None, Some(false)],
                vec![None, None, None, None],
                vec![Some(false), Some(false), Some(true), None],
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn derived_indicators() {
        let p = small();
        assert_eq!(p.first_obs(0), Some(1));
        assert_eq!(p.first_obs(1), None);
        assert_eq!(p.first_obs(2), Some(0));
        assert!(p.r(0, 0));
        assert!(!p.r(0, 1));
        for i in 0..3 {
            for t in 0..4 {
                assert_eq!(p.r(i, t), p.y(i, t).is_none());
            }
        }
        // t=0: site 2 active; t=2: sites 0 (missing) and 2
        assert_eq!(p.missingness_counts(0), (1, 0));
        assert_eq!(p.missingness_counts(2), (2, 1));
        assert_eq!(p.missingness_counts(3), (2, 1));
        assert_eq!(p.observed_at(1).collect::<Vec<_>>(), vec![(0, true), (2, false)]);
    }

    #[test]
    fn months_wrap_from_start_month() {
        let p = ObservationPanel::new(1, 30, vec![Cell::Zero; 30], 11).unwrap();
        assert_eq!(p.month_index(0), 10);
        assert_eq!(p.month_index(1), 11);
        assert_eq!(p.month_index(2), 0);
        assert_eq!(p.month_index(14), 0);
        assert!((p.scaled_time(29) - 1.0).abs() < 1e-15);
        assert_eq!(p.scaled_time(0), 0.0);
    }

    #[test]
    fn masking_keeps_first_obs_and_drops_missingness_term() {
        let p = small();
        let m = p.mask_cells(&[(2, 0)]).unwrap();
        assert_eq!(m.first_obs(2), Some(0));
        assert_eq!(m.cell(2, 0), Cell::HeldOut);
        assert_eq!(m.missingness_counts(0), (0, 0));
        assert!(m.r(2, 0));
        assert!(!m.in_missingness_model(2, 0));
    }

    #[test]
    fn rates() {
        let p = small();
        assert!((p.missingness_rate() - 7.0 / 12.0).abs() < 1e-15);
        // active cells: site0 t1..3 (3, one missing), site2 t0..3 (4, one missing)
        assert!((p.missingness_rate_after_first_obs() - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(ObservationPanel::new(2, 2, vec![Cell::Zero; 3], 1).is_err());
        assert!(ObservationPanel::new(1, 1, vec![Cell::Zero], 13).is_err());
    }
}
