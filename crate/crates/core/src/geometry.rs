//! Linear array geometry along the y axis and the distance difference
//! function (DDF).
//!
//! Element `m` sits at `[0, (D/2)·α_m]` with `1 ≥ α_1 > α_2 > … > α_M ≥ -1`.
//! The DDF measures, for a point on the array at relative coefficient
//! `Δ = 1 - α ∈ [0, 2]`, how much farther it is from the UE than the
//! reference edge `[0, D/2]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Minimum separation between neighbouring coefficients, as a fraction of
/// the aperture, enforced by [`ArrayGeometry::random`].
const MIN_SPACING_FRACTION: f64 = 1e-9;

/// Coincidence threshold for element/UE distances.
const DEGENERATE_DISTANCE: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    alphas: Vec<f64>,
    aperture: f64,
}

impl ArrayGeometry {
    /// Builds a geometry from element coefficients, checking the ordering,
    /// range and aperture invariants.
    pub fn new(alphas: Vec<f64>, aperture: f64) -> Result<Self> {
        if !(aperture.is_finite() && aperture > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "aperture must be positive, got {aperture}"
            )));
        }
        if alphas.is_empty() {
            return Err(Error::InvalidGeometry("no elements".into()));
        }
        for (m, &a) in alphas.iter().enumerate() {
            if !(-1.0..=1.0).contains(&a) {
                return Err(Error::InvalidGeometry(format!(
                    "alpha[{m}] = {a} outside [-1, 1]"
                )));
            }
        }
        if let Some(m) = alphas.windows(2).position(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGeometry(format!(
                "coefficients must be strictly decreasing (alpha[{}] = {} >= alpha[{}] = {})",
                m + 1,
                alphas[m + 1],
                m,
                alphas[m]
            )));
        }
        Ok(Self { alphas, aperture })
    }

    /// Uniform linear array spanning the full aperture:
    /// `α_m = 1 - 2(m-1)/(M-1)`.
    pub fn uniform(num_elements: usize, aperture: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements, got {num_elements}"
            )));
        }
        let denom = (num_elements - 1) as f64;
        let alphas = (0..num_elements)
            .map(|i| 1.0 - 2.0 * i as f64 / denom)
            .collect();
        Self::new(alphas, aperture)
    }

    /// Random non-uniform array. The end elements are pinned to ±1 so the
    /// realized aperture is exactly `aperture`; the `M - 2` interior
    /// coefficients are drawn uniformly in (-1, 1) and sorted.
    pub fn random(num_elements: usize, aperture: f64, seed: u64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements, got {num_elements}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // spacing in α units: (D/2)·Δα ≥ 1e-9·D
        let min_gap = 2.0 * MIN_SPACING_FRACTION;
        loop {
            let mut interior: Vec<f64> = (0..num_elements - 2)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            interior.sort_by(|a, b| b.total_cmp(a));

            let mut alphas = Vec::with_capacity(num_elements);
            alphas.push(1.0);
            alphas.extend(interior);
            alphas.push(-1.0);

            if alphas.windows(2).all(|w| w[0] - w[1] >= min_gap) {
                return Self::new(alphas, aperture);
            }
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Full aperture `D` in meters.
    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Element positions `[0, (D/2)·α_m]`.
    pub fn antenna_positions(&self) -> Vec<[f64; 2]> {
        let half = 0.5 * self.aperture;
        self.alphas.iter().map(|&a| [0.0, half * a]).collect()
    }

    /// Distance from element `m` (zero-based) to the UE.
    pub fn distance(&self, m: usize, ue: &UePosition) -> Result<f64> {
        let alpha = *self
            .alphas
            .get(m)
            .ok_or_else(|| Error::dims("element index", self.len(), m))?;
        let d = point_distance([0.0, 0.5 * self.aperture * alpha], ue.xy());
        if d < DEGENERATE_DISTANCE {
            return Err(Error::DegeneratePosition {
                element: m,
                distance: d,
            });
        }
        Ok(d)
    }

    /// Distances from every element to the UE.
    pub fn distances(&self, ue: &UePosition) -> Result<Vec<f64>> {
        (0..self.len()).map(|m| self.distance(m, ue)).collect()
    }

    /// Reference point `[0, D/2]` (the `α = 1` edge).
    pub fn reference_point(&self) -> [f64; 2] {
        [0.0, 0.5 * self.aperture]
    }

    /// Distance difference function `d(Δ) - d_ref` for a point at relative
    /// coefficient `delta ∈ [0, 2]`.
    pub fn ddf(&self, delta: f64, ue: &UePosition) -> Result<f64> {
        if !(0.0..=2.0).contains(&delta) {
            return Err(Error::OutOfRange {
                what: "relative coefficient",
                value: delta,
                range: "[0, 2]".into(),
            });
        }
        let half = 0.5 * self.aperture;
        let d_ref = point_distance(self.reference_point(), ue.xy());
        let d = point_distance([0.0, (1.0 - delta) * half], ue.xy());
        Ok(d - d_ref)
    }

    /// Shape of the DDF over `Δ ∈ [0, 2]` for this UE. `|q_y| = D/2` is
    /// classified as [`DdfRegime::Valley`].
    pub fn ddf_regime(&self, ue: &UePosition) -> DdfRegime {
        let half = 0.5 * self.aperture;
        let qy = ue.y();
        if qy > half {
            DdfRegime::MonotoneIncreasing
        } else if qy < -half {
            DdfRegime::MonotoneDecreasing
        } else {
            DdfRegime::Valley
        }
    }
}

/// UE antenna position in the array plane; `q_x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePosition {
    q: [f64; 2],
}

impl UePosition {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("UE position"));
        }
        if x <= 0.0 {
            return Err(Error::InvalidPosition(format!("q_x must be > 0, got {x}")));
        }
        Ok(Self { q: [x, y] })
    }

    pub fn x(&self) -> f64 {
        self.q[0]
    }

    pub fn y(&self) -> f64 {
        self.q[1]
    }

    pub fn xy(&self) -> [f64; 2] {
        self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DdfRegime {
    /// `q_y > D/2`
    MonotoneIncreasing,
    /// `q_y < -D/2`
    MonotoneDecreasing,
    /// `|q_y| ≤ D/2`: decreases, then increases.
    Valley,
}

fn point_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn positions_match_coefficients() {
        let g = ArrayGeometry::new(vec![1.0, -1.0], 2.0).unwrap();
        assert_eq!(g.antenna_positions(), vec![[0.0, 1.0], [0.0, -1.0]]);

        let g = ArrayGeometry::new(vec![0.0], 5.0).unwrap();
        assert_eq!(g.antenna_positions(), vec![[0.0, 0.0]]);

        let g = ArrayGeometry::new(vec![1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0], 2.0).unwrap();
        let ys: Vec<f64> = g.antenna_positions().iter().map(|p| p[1]).collect();
        for (y, want) in ys.iter().zip([1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0]) {
            assert!(close(*y, want, 1e-15));
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(ArrayGeometry::new(vec![1.0, 1.0], 1.0).is_err());
        assert!(ArrayGeometry::new(vec![-1.0, 1.0], 1.0).is_err());
        assert!(ArrayGeometry::new(vec![1.5, 0.0], 1.0).is_err());
        assert!(ArrayGeometry::new(vec![1.0, 0.0], 0.0).is_err());
        assert!(ArrayGeometry::new(vec![], 1.0).is_err());
        assert!(UePosition::new(0.0, 1.0).is_err());
        assert!(UePosition::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn distances() {
        let g = ArrayGeometry::new(vec![1.0, 0.0], 2.0).unwrap();
        let ue = UePosition::new(2.0, -2.0).unwrap();
        assert!(close(g.distance(0, &ue).unwrap(), 13f64.sqrt(), 1e-14));

        let ue = UePosition::new(1.0, 0.0).unwrap();
        assert_eq!(g.distance(1, &ue).unwrap(), 1.0);
        assert!(g.distance(2, &ue).is_err());
    }

    #[test]
    fn coincident_ue_is_degenerate() {
        // q_x > 0 keeps a validated UE off the array, so check the raw path
        // through a UE nudged onto element 0.
        let g = ArrayGeometry::new(vec![1.0, 0.0], 2.0).unwrap();
        let ue = UePosition { q: [0.0, 1.0] };
        assert!(matches!(
            g.distance(0, &ue),
            Err(Error::DegeneratePosition { element: 0, .. })
        ));
        assert!(g.distance(1, &ue).is_ok());
    }

    #[test]
    fn ddf_values() {
        let g = ArrayGeometry::uniform(3, 2.0).unwrap();
        let ue = UePosition::new(2.0, -2.0).unwrap();
        assert_eq!(g.ddf(0.0, &ue).unwrap(), 0.0);
        assert!(close(
            g.ddf(2.0, &ue).unwrap(),
            5f64.sqrt() - 13f64.sqrt(),
            1e-14
        ));
        let ue = UePosition::new(3.0, 0.0).unwrap();
        assert!(close(g.ddf(1.0, &ue).unwrap(), 3.0 - 10f64.sqrt(), 1e-14));
        assert!(g.ddf(-0.1, &ue).is_err());
        assert!(g.ddf(2.1, &ue).is_err());
    }

    #[test]
    fn regimes() {
        let g = ArrayGeometry::uniform(4, 2.0).unwrap();
        let r = |x, y| g.ddf_regime(&UePosition::new(x, y).unwrap());
        assert_eq!(r(1.0, 5.0), DdfRegime::MonotoneIncreasing);
        assert_eq!(r(1.0, -5.0), DdfRegime::MonotoneDecreasing);
        assert_eq!(r(1.0, 0.0), DdfRegime::Valley);
        assert_eq!(r(1.0, 1.0), DdfRegime::Valley);
        assert_eq!(r(1.0, -1.0), DdfRegime::Valley);
    }

    #[test]
    fn uniform_coefficients() {
        assert_eq!(ArrayGeometry::uniform(2, 1.0).unwrap().alphas(), &[1.0, -1.0]);
        assert_eq!(
            ArrayGeometry::uniform(3, 1.0).unwrap().alphas(),
            &[1.0, 0.0, -1.0]
        );
        let g = ArrayGeometry::uniform(4, 1.0).unwrap();
        for (a, want) in g.alphas().iter().zip([1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0]) {
            assert!(close(*a, want, 1e-15));
        }
        assert!(ArrayGeometry::uniform(1, 1.0).is_err());
    }

    #[test]
    fn random_geometry() {
        assert_eq!(
            ArrayGeometry::random(2, 1.0, 99).unwrap().alphas(),
            &[1.0, -1.0]
        );
        let a = ArrayGeometry::random(256, 0.38, 5).unwrap();
        let b = ArrayGeometry::random(256, 0.38, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ArrayGeometry::random(256, 0.38, 6).unwrap());

        let g = ArrayGeometry::random(5, 1.0, 11).unwrap();
        let interior = &g.alphas()[1..4];
        assert!(interior.iter().all(|a| *a > -1.0 && *a < 1.0));
        assert!(interior.windows(2).all(|w| w[0] > w[1]));
        assert!(ArrayGeometry::random(1, 1.0, 0).is_err());
    }
}
