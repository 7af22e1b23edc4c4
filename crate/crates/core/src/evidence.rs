//! Dempster–Shafer mass algebra on the two-element frame {O, F}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CellClass;

const CLOSURE_TOL: f64 = 1e-9;
const CONFLICT_TOL: f64 = 1e-12;

/// Belief masses on `{O}`, `{F}` and `{O, F}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefMass {
    pub m_o: f64,
    pub m_f: f64,
    pub m_u: f64,
}

impl BeliefMass {
    /// Total ignorance.
    pub const VACUOUS: BeliefMass = BeliefMass { m_o: 0.0, m_f: 0.0, m_u: 1.0 };

    pub fn new(m_o: f64, m_f: f64, m_u: f64) -> Result<Self> {
        let m = Self { m_o, m_f, m_u };
        if m.is_valid() {
            Ok(m)
        } else {
            Err(Error::InvalidConfig(format!("masses ({m_o}, {m_f}, {m_u}) are not a valid assignment")))
        }
    }

    /// Builds a mass from the two stored channels; `{O, F}` takes the rest.
    pub fn from_channels(m_o: f64, m_f: f64) -> Result<Self> {
        Self::new(m_o, m_f, 1.0 - m_o - m_f)
    }

    /// Like [`BeliefMass::from_channels`] but repairs rounding from narrow
    /// storage: components are clamped and rescaled so the sum is one.
    pub fn from_channels_lossy(m_o: f64, m_f: f64) -> Self {
        let m_o = m_o.clamp(0.0, 1.0);
        let m_f = m_f.clamp(0.0, 1.0);
        let known = m_o + m_f;
        if known > 1.0 {
            BeliefMass { m_o: m_o / known, m_f: m_f / known, m_u: 0.0 }
        } else {
            BeliefMass { m_o, m_f, m_u: 1.0 - known }
        }
    }

    pub fn is_valid(&self) -> bool {
        let parts = [self.m_o, self.m_f, self.m_u];
        parts.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v))
            && (parts.iter().sum::<f64>() - 1.0).abs() <= CLOSURE_TOL
    }

    pub fn is_vacuous(&self) -> bool {
        self.m_o == 0.0 && self.m_f == 0.0
    }
}

/// Dempster's rule of combination.
///
/// Fails with [`Error::TotalConflict`] when the conflict mass is one, i.e.
/// the two sources are categorical and contradictory.
pub fn combine_masses(a: BeliefMass, b: BeliefMass) -> Result<BeliefMass> {
    let conflict = a.m_o * b.m_f + a.m_f * b.m_o;
    let norm = 1.0 - conflict;
    if norm <= CONFLICT_TOL {
        return Err(Error::TotalConflict);
    }
    let m_o = (a.m_o * b.m_o + a.m_o * b.m_u + a.m_u * b.m_o) / norm;
    let m_f = (a.m_f * b.m_f + a.m_f * b.m_u + a.m_u * b.m_f) / norm;
    let m_u = a.m_u * b.m_u / norm;
    Ok(BeliefMass { m_o, m_f, m_u })
}

/// Shifts `1 - gamma` of the committed mass onto ignorance.
pub fn discount_mass(m: BeliefMass, gamma: f64) -> BeliefMass {
    let gamma = gamma.clamp(0.0, 1.0);
    let m_o = gamma * m.m_o;
    let m_f = gamma * m.m_f;
    BeliefMass { m_o, m_f, m_u: gamma * m.m_u + (1.0 - gamma) }
}

/// Pignistic occupancy probability: ignorance is split evenly.
pub fn pignistic(m: BeliefMass) -> f64 {
    (m.m_o + 0.5 * m.m_u).clamp(0.0, 1.0)
}

/// Class of the largest mass. Ties prefer ignorance, then occupied.
pub fn classify_mass(m: BeliefMass) -> CellClass {
    if m.m_u >= m.m_o && m.m_u >= m.m_f {
        CellClass::Occluded
    } else if m.m_o >= m.m_f {
        CellClass::Occupied
    } else {
        CellClass::Free
    }
}
