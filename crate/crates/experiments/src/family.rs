//! One-parameter families of near-isometries used by the harnesses.

use heis_core::maps::Potential;
use heis_core::{inverse, IsometryDescriptor, MapDescriptor, Point};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::{invalid, ExpError, ExpResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    /// `δ_{1+ε}`
    Dilation,
    /// `S_k` with `k = ε`
    Spiral,
    /// A fixed isometry, independent of ε.
    Isometry,
    /// Contact flow of `sin x` for time `ε`.
    KrFlow,
}

impl MapFamily {
    pub const ALL: [MapFamily; 4] = [MapFamily::Dilation, MapFamily::Spiral, MapFamily::Isometry, MapFamily::KrFlow];

    pub fn name(&self) -> &'static str {
        match self {
            MapFamily::Dilation => "dilation",
            MapFamily::Spiral => "spiral",
            MapFamily::Isometry => "isometry",
            MapFamily::KrFlow => "krflow",
        }
    }

    /// The isometry used by [`MapFamily::Isometry`].
    pub fn fixed_isometry() -> IsometryDescriptor {
        IsometryDescriptor::new(Point::new(0.3, -0.2, 0.5), 0.7, 0).expect("valid isometry")
    }

    pub fn member(&self, eps: f64) -> ExpResult<MapDescriptor> {
        Ok(match self {
            MapFamily::Dilation => MapDescriptor::dilation(1.0 + eps)?,
            MapFamily::Spiral => MapDescriptor::spiral(eps)?,
            MapFamily::Isometry => MapDescriptor::Isometry(Self::fixed_isometry()),
            MapFamily::KrFlow => MapDescriptor::kr_flow(Potential::SinX, eps, heis_core::maps::DEFAULT_FLOW_STEP)?,
        })
    }
}

impl fmt::Display for MapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MapFamily {
    type Err = ExpError;

    fn from_str(s: &str) -> ExpResult<Self> {
        match s {
            "dilation" => Ok(MapFamily::Dilation),
            "spiral" => Ok(MapFamily::Spiral),
            "isometry" => Ok(MapFamily::Isometry),
            "krflow" => Ok(MapFamily::KrFlow),
            _ => invalid(format!("unknown family '{s}' (expected dilation, spiral, isometry, krflow)")),
        }
    }
}

/// `L_{f(0)^{-1}} ∘ f`, so that the result fixes the origin.
pub fn normalized(m: MapDescriptor) -> ExpResult<MapDescriptor> {
    let f0 = m.eval(&Point::origin())?;
    if f0.is_origin() {
        return Ok(m);
    }
    let back = MapDescriptor::Isometry(IsometryDescriptor::translation(inverse(&f0)));
    Ok(MapDescriptor::composition(vec![back, m])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_fix_origin_after_normalization() {
        for fam in MapFamily::ALL {
            let m = normalized(fam.member(0.05).unwrap()).unwrap();
            let o = m.eval(&Point::origin()).unwrap();
            assert!(o.x.abs() < 1e-15 && o.y.abs() < 1e-15 && o.t.abs() < 1e-15, "{fam}: {o}");
            assert_eq!(fam.name().parse::<MapFamily>().unwrap(), fam);
        }
        assert!("warp".parse::<MapFamily>().is_err());
    }
}
