use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsituObs {
    pub site_id: usize,
    pub x: f64,
    pub y: f64,
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteObs {
    pub block_id: usize,
    pub t: usize,
    pub value: f64,
}

/// Point and block observations over days `1..=t_len`. Missing satellite
/// cells are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub t_len: usize,
    pub insitu: Vec<InsituObs>,
    pub satellite: Vec<SatelliteObs>,
    /// Coordinates are demeaned about this point to form the covariates.
    pub center: [f64; 2],
}

/// Number of columns of `x(s, t)`: intercept and two demeaned coordinates.
pub const N_COVARIATES: usize = 3;

pub fn covariates(p: [f64; 2], center: [f64; 2]) -> [f64; N_COVARIATES] {
    [1.0, p[0] - center[0], p[1] - center[1]]
}

impl ObservationSet {
    pub fn new(
        t_len: usize,
        insitu: Vec<InsituObs>,
        satellite: Vec<SatelliteObs>,
        center: [f64; 2],
    ) -> Result<Self> {
        let o = ObservationSet {
            t_len,
            insitu,
            satellite,
            center,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 {
            return Err(Error::config("time horizon must be at least 1"));
        }
        let bad_t = |t: usize| t == 0 || t > self.t_len;
        for (i, r) in self.insitu.iter().enumerate() {
            if bad_t(r.t) {
                return Err(Error::config(format!(
                    "in situ row {i}: day {} outside 1..={}",
                    r.t, self.t_len
                )));
            }
            if !(r.x.is_finite() && r.y.is_finite() && r.value.is_finite()) {
                return Err(Error::config(format!(
                    "in situ row {i} has a non-finite entry"
                )));
            }
        }
        let mut seen = HashSet::new();
        for (i, r) in self.satellite.iter().enumerate() {
            if bad_t(r.t) {
                return Err(Error::config(format!(
                    "satellite row {i}: day {} outside 1..={}",
                    r.t, self.t_len
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::config(format!(
                    "satellite row {i} has a non-finite value"
                )));
            }
            if !seen.insert((r.block_id, r.t)) {
                return Err(Error::config(format!(
                    "satellite block {} appears twice on day {}",
                    r.block_id, r.t
                )));
            }
        }
        Ok(())
    }

    /// Drops every row after day `last`; the horizon is unchanged.
    pub fn through_day(&self, last: usize) -> Self {
        ObservationSet {
            t_len: self.t_len,
            insitu: self
                .insitu
                .iter()
                .filter(|r| r.t <= last)
                .copied()
                .collect(),
            satellite: self
                .satellite
                .iter()
                .filter(|r| r.t <= last)
                .copied()
                .collect(),
            center: self.center,
        }
    }

    /// Distinct in situ sites with their coordinates, ordered by id.
    pub fn sites(&self) -> Vec<(usize, [f64; 2])> {
        let mut s: Vec<(usize, [f64; 2])> = self
            .insitu
            .iter()
            .map(|r| (r.site_id, [r.x, r.y]))
            .collect();
        s.sort_by(|a, b| a.0.cmp(&b.0));
        s.dedup_by_key(|e| e.0);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_block_day_rejected() {
        let s = vec![
            SatelliteObs {
                block_id: 3,
                t: 1,
                value: 0.0,
            },
            SatelliteObs {
                block_id: 3,
                t: 2,
                value: 0.0,
            },
            SatelliteObs {
                block_id: 3,
                t: 1,
                value: 1.0,
            },
        ];
        assert!(matches!(
            ObservationSet::new(2, vec![], s, [0.0, 0.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn day_range_checked() {
        let r = InsituObs {
            site_id: 0,
            x: 0.0,
            y: 0.0,
            t: 4,
            value: 1.0,
        };
        assert!(ObservationSet::new(3, vec![r], vec![], [0.0, 0.0]).is_err());
        assert!(ObservationSet::new(4, vec![r], vec![], [0.0, 0.0]).is_ok());
    }
}
