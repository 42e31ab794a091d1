use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::savgol::{savitzky_golay, SavGolParams};

/// Number of samples per branch on the canonical strain grid.
pub const CANONICAL_POINTS: usize = 120;

/// 1 MPa·(strain) of enclosed area equals 1000 kJ/m³.
pub const KJ_PER_M3_PER_MPA: f64 = 1000.0;

/// A compression test: loading samples followed by unloading samples.
///
/// Stress is engineering stress in MPa, strain is dimensionless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct StressStrainCurve<T> {
    strain: Vec<T>,
    stress: Vec<T>,
    /// Number of loading samples; the last loading sample is the apex.
    load_len: usize,
}

impl<T: Scalar> StressStrainCurve<T> {
    /// Splits the samples at the first global strain maximum.
    pub fn new(strain: Vec<T>, stress: Vec<T>) -> Result<Self> {
        if strain.is_empty() {
            return Err(Error::Curve("curve has no samples".into()));
        }
        let mut apex = 0;
        for (i, &e) in strain.iter().enumerate() {
            if e > strain[apex] {
                apex = i;
            }
        }
        Self::with_split(strain, stress, apex + 1)
    }

    /// Uses an explicit number of loading samples.
    pub fn with_split(strain: Vec<T>, stress: Vec<T>, load_len: usize) -> Result<Self> {
        let c = StressStrainCurve {
            strain,
            stress,
            load_len,
        };
        c.validate()?;
        Ok(c)
    }

    /// Builds a curve from separate loading and unloading sample lists.
    pub fn from_branches(loading: &[(T, T)], unloading: &[(T, T)]) -> Result<Self> {
        let (strain, stress) = loading.iter().chain(unloading).copied().unzip();
        Self::with_split(strain, stress, loading.len())
    }

    fn validate(&self) -> Result<()> {
        let n = self.strain.len();
        if n != self.stress.len() {
            return Err(Error::Curve(format!(
                "{n} strain samples but {} stress samples",
                self.stress.len()
            )));
        }
        if n < 3 {
            return Err(Error::Curve(format!("need at least 3 samples, got {n}")));
        }
        if self.load_len == 0 || self.load_len > n {
            return Err(Error::Curve(format!("bad loading length {}", self.load_len)));
        }
        if !(self.strain[0] >= T::zero()) {
            return Err(Error::Curve(format!("first strain {} is negative", self.strain[0])));
        }
        if self.strain.iter().chain(&self.stress).any(|v| !v.is_finite()) {
            return Err(Error::Curve("non-finite sample".into()));
        }
        let apex = self.load_len - 1;
        if self.strain[..=apex].windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Curve("strain decreases during loading".into()));
        }
        if self.strain[apex..].windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Curve("strain increases during unloading".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.strain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strain.is_empty()
    }

    pub fn strain(&self) -> &[T] {
        &self.strain
    }

    pub fn stress(&self) -> &[T] {
        &self.stress
    }

    pub fn load_len(&self) -> usize {
        self.load_len
    }

    pub fn strain_max(&self) -> T {
        self.strain[self.load_len - 1]
    }

    pub fn has_unloading(&self) -> bool {
        self.load_len < self.len()
    }

    /// Loading branch in ascending strain.
    pub fn loading(&self) -> (Vec<T>, Vec<T>) {
        (
            self.strain[..self.load_len].to_vec(),
            self.stress[..self.load_len].to_vec(),
        )
    }

    /// Unloading branch in ascending strain, starting from the apex. If the first
    /// unloading sample sits below the apex strain, the loading apex is prepended so
    /// the branch stays connected.
    pub fn unloading(&self) -> (Vec<T>, Vec<T>) {
        let apex = self.load_len - 1;
        let start = if self.has_unloading() && self.strain[self.load_len] == self.strain[apex] {
            self.load_len
        } else {
            apex
        };
        let mut e: Vec<T> = self.strain[start..].to_vec();
        let mut s: Vec<T> = self.stress[start..].to_vec();
        e.reverse();
        s.reverse();
        (e, s)
    }

    /// Savitzky-Golay smoothing of each branch's stress separately.
    ///
    /// Branches shorter than the window use the longest odd window that still fits
    /// above the polynomial order, or are left untouched.
    pub fn denoised(&self, params: SavGolParams) -> Result<Self> {
        params.validate()?;
        let smooth = |seg: &[T]| -> Result<Vec<T>> {
            let mut window = params.window.min(seg.len());
            if window % 2 == 0 {
                window -= 1;
            }
            if window <= params.order || window < 3 {
                return Ok(seg.to_vec());
            }
            savitzky_golay(seg, window, params.order)
        };
        let mut stress = smooth(&self.stress[..self.load_len])?;
        if self.has_unloading() {
            stress.extend(smooth(&self.stress[self.load_len..])?);
        }
        Self::with_split(self.strain.clone(), stress, self.load_len)
    }

    /// Multiplies every stress sample by `c`.
    pub fn scaled(&self, c: T) -> Self {
        StressStrainCurve {
            strain: self.strain.clone(),
            stress: self.stress.iter().map(|&s| s * c).collect(),
            load_len: self.load_len,
        }
    }
}

/// Linear interpolation on ascending knots, holding the end values outside the range.
pub fn interp_clamped<T: Scalar>(xs: &[T], ys: &[T], x: T) -> T {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // First knot strictly above x.
    let hi = xs.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let span = xs[hi] - xs[lo];
    if span <= T::zero() {
        return ys[hi];
    }
    let s = (x - xs[lo]) / span;
    ys[lo] + s * (ys[hi] - ys[lo])
}

fn even_grid<T: Scalar>(a: T, b: T, n: usize) -> Vec<T> {
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a + (b - a) * T::from_usize_lossy(k) / last
            }
        })
        .collect()
}

/// Pointwise mean of replicate tests.
///
/// Replicates sampled at identical strains are averaged directly. Otherwise each
/// branch is resampled onto an even grid ending at the smallest apex strain among
/// the replicates, using as many points as the densest replicate.
pub fn average_replicates<T: Scalar>(curves: &[StressStrainCurve<T>]) -> Result<StressStrainCurve<T>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Curve("no replicates to average".into()))?;
    if curves.len() == 1 {
        return Ok(first.clone());
    }
    if curves.iter().any(|c| c.has_unloading() != first.has_unloading()) {
        return Err(Error::Curve(
            "replicates disagree on whether an unloading branch exists".into(),
        ));
    }
    let n = T::from_usize_lossy(curves.len());

    if curves
        .iter()
        .all(|c| c.strain == first.strain && c.load_len == first.load_len)
    {
        let stress = (0..first.len())
            .map(|i| curves.iter().map(|c| c.stress[i]).sum::<T>() / n)
            .collect();
        return StressStrainCurve::with_split(first.strain.clone(), stress, first.load_len);
    }

    let apex = curves.iter().map(|c| c.strain_max()).fold(T::infinity(), T::min);
    let load_start = curves.iter().map(|c| c.strain[0]).fold(T::zero(), T::max);
    let load_n = curves.iter().map(|c| c.load_len).max().unwrap().max(2);
    let load_grid = even_grid(load_start, apex, load_n);
    let mean_at = |branch: &dyn Fn(&StressStrainCurve<T>) -> (Vec<T>, Vec<T>), x: T| -> T {
        curves
            .iter()
            .map(|c| {
                let (e, s) = branch(c);
                interp_clamped(&e, &s, x)
            })
            .sum::<T>()
            / n
    };
    let mut strain = load_grid.clone();
    let mut stress: Vec<T> = load_grid.iter().map(|&x| mean_at(&|c| c.loading(), x)).collect();

    if first.has_unloading() {
        let unload_end = curves
            .iter()
            .map(|c| *c.strain.last().unwrap())
            .fold(T::zero(), T::max)
            .min(apex);
        let unload_n = curves.iter().map(|c| c.len() - c.load_len + 1).max().unwrap().max(2);
        let mut grid = even_grid(unload_end, apex, unload_n);
        grid.reverse();
        for &x in &grid {
            strain.push(x);
            stress.push(mean_at(&|c| c.unloading(), x));
        }
    }
    StressStrainCurve::with_split(strain, stress, load_grid.len())
}

/// Loading and unloading stress on 120 evenly spaced strains over `[0, ε_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct CanonicalCurve<T> {
    strain_max: T,
    loading: Vec<T>,
    unloading: Vec<T>,
}

impl<T: Scalar> CanonicalCurve<T> {
    pub fn new(strain_max: T, loading: Vec<T>, unloading: Vec<T>) -> Result<Self> {
        if loading.len() != CANONICAL_POINTS || unloading.len() != CANONICAL_POINTS {
            return Err(Error::Curve(format!(
                "canonical branches need {CANONICAL_POINTS} samples, got {} and {}",
                loading.len(),
                unloading.len()
            )));
        }
        if !(strain_max > T::zero()) || !strain_max.is_finite() {
            return Err(Error::Curve(format!("bad maximum strain {strain_max}")));
        }
        if loading.iter().chain(&unloading).any(|v| !v.is_finite()) {
            return Err(Error::Curve("non-finite canonical stress".into()));
        }
        Ok(CanonicalCurve {
            strain_max,
            loading,
            unloading,
        })
    }

    pub fn strain_max(&self) -> T {
        self.strain_max
    }

    pub fn spacing(&self) -> T {
        self.strain_max / T::from_usize_lossy(CANONICAL_POINTS - 1)
    }

    pub fn grid(&self) -> Vec<T> {
        Self::grid_for(self.strain_max)
    }

    pub fn grid_for(strain_max: T) -> Vec<T> {
        even_grid(T::zero(), strain_max, CANONICAL_POINTS)
    }

    pub fn loading(&self) -> &[T] {
        &self.loading
    }

    pub fn unloading(&self) -> &[T] {
        &self.unloading
    }

    /// Back to a raw curve: the loading grid ascending, then the unloading grid descending.
    pub fn to_curve(&self) -> StressStrainCurve<T> {
        let grid = self.grid();
        let mut strain = grid.clone();
        let mut stress = self.loading.clone();
        for k in (0..CANONICAL_POINTS).rev() {
            strain.push(grid[k]);
            stress.push(self.unloading[k]);
        }
        StressStrainCurve::with_split(strain, stress, CANONICAL_POINTS).expect("canonical grid is a valid curve")
    }

    pub fn cast<U: Scalar>(&self) -> CanonicalCurve<U> {
        let c = |v: &T| U::lit(v.to_f64_lossy());
        CanonicalCurve {
            strain_max: U::lit(self.strain_max.to_f64_lossy()),
            loading: self.loading.iter().map(c).collect(),
            unloading: self.unloading.iter().map(c).collect(),
        }
    }
}

/// Resamples both branches onto the canonical grid over `[0, ε_max]`.
pub fn canonicalize<T: Scalar>(curve: &StressStrainCurve<T>) -> Result<CanonicalCurve<T>> {
    let (le, ls) = curve.loading();
    let (ue, us) = curve.unloading();
    if le.len() < 2 || ue.len() < 2 {
        return Err(Error::Curve(format!(
            "branches need at least 2 samples (loading {}, unloading {})",
            le.len(),
            ue.len()
        )));
    }
    let grid = CanonicalCurve::grid_for(curve.strain_max());
    let loading = grid.iter().map(|&x| interp_clamped(&le, &ls, x)).collect();
    let unloading = grid.iter().map(|&x| interp_clamped(&ue, &us, x)).collect();
    CanonicalCurve::new(curve.strain_max(), loading, unloading)
}

/// Trapezoidal area between loading and unloading stress, in kJ/m³.
pub fn energy_dissipation<T: Scalar>(curve: &CanonicalCurve<T>) -> T {
    let h = curve.spacing();
    let diff: Vec<T> = curve
        .loading
        .iter()
        .zip(&curve.unloading)
        .map(|(&l, &u)| l - u)
        .collect();
    let interior: T = diff[1..CANONICAL_POINTS - 1].iter().copied().sum();
    let area = h * (interior + (diff[0] + diff[CANONICAL_POINTS - 1]) * T::lit(0.5));
    area * T::lit(KJ_PER_M3_PER_MPA)
}

/// Trapezoidal loop area on the curve's own samples, in kJ/m³: the loading
/// integral minus the unloading integral, each over its branch's knots.
pub fn loop_dissipation<T: Scalar>(curve: &StressStrainCurve<T>) -> T {
    let trapz = |e: &[T], s: &[T]| -> T {
        e.windows(2)
            .zip(s.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * T::lit(0.5))
            .sum()
    };
    let (le, ls) = curve.loading();
    let (ue, us) = curve.unloading();
    (trapz(&le, &ls) - trapz(&ue, &us)) * T::lit(KJ_PER_M3_PER_MPA)
}

#[cfg(test)]
mod tests {
    use super::*;

    use proptest::prelude::*;

    fn triangle_loop() -> StressStrainCurve<f64> {
        StressStrainCurve::from_branches(&[(0.0, 0.0), (0.5, 1.0)], &[(0.25, 0.0), (0.0, 0.0)]).unwrap()
    }

    #[test]
    fn invariants_are_checked() {
        assert!(StressStrainCurve::<f64>::new(vec![0.0, 0.1], vec![0.0, 1.0]).is_err());
        assert!(StressStrainCurve::<f64>::new(vec![0.0, 0.1, 0.2], vec![0.0, 1.0]).is_err());
        assert!(StressStrainCurve::<f64>::new(vec![-0.1, 0.1, 0.0], vec![0.0, 1.0, 0.0]).is_err());
        assert!(StressStrainCurve::<f64>::new(vec![0.0, 0.1, 0.0], vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(StressStrainCurve::<f64>::with_split(vec![0.0, 0.2, 0.1, 0.15], vec![0.0; 4], 2).is_err());
        let c = StressStrainCurve::<f64>::new(vec![0.0, 0.1, 0.3, 0.2, 0.0], vec![0.0, 1.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(c.load_len(), 3);
        assert_eq!(c.strain_max(), 0.3);
    }

    #[test]
    fn triangle_loop_dissipation() {
        let c = triangle_loop();
        // 0.25 MPa under loading minus 0.125 MPa under unloading.
        assert_eq!(loop_dissipation(&c), 125.0);
        let canon = canonicalize(&c).unwrap();
        let d = energy_dissipation(&canon);
        // The unloading kink at 0.25 falls between canonical knots.
        let h = 0.5 / 119.0;
        assert!((d - 125.0).abs() <= 0.5 * h * h * 4.0 * KJ_PER_M3_PER_MPA + 1e-9, "{d}");
    }

    #[test]
    fn equal_branches_dissipate_nothing() {
        let load: Vec<f64> = (0..CANONICAL_POINTS).map(|k| (k as f64).sqrt()).collect();
        let c = CanonicalCurve::new(0.6, load.clone(), load).unwrap();
        assert_eq!(energy_dissipation(&c), 0.0);
    }

    #[test]
    fn linear_loading_canonical_values() {
        let strain: Vec<f64> = vec![0.0, 0.3, 0.6, 0.3, 0.0];
        let stress: Vec<f64> = vec![0.0, 0.6, 1.2, 0.3, 0.0];
        let c = canonicalize(&StressStrainCurve::new(strain, stress).unwrap()).unwrap();
        for (k, &s) in c.loading().iter().enumerate() {
            assert!((s - 2.0 * (0.6 * k as f64 / 119.0)).abs() < 1e-12);
        }
        let g = c.grid();
        assert_eq!(g.len(), 120);
        for w in g.windows(2) {
            assert!((w[1] - w[0] - 0.6 / 119.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_on_grid_is_recovered_exactly() {
        let grid = CanonicalCurve::<f64>::grid_for(0.55);
        let load: Vec<f64> = grid
            .iter()
            .map(|e| 3.0 * e + if *e > 0.2 { e - 0.2 } else { 0.0 })
            .collect();
        let unload: Vec<f64> = grid.iter().map(|e| 0.5 * e * e).collect();
        let c = CanonicalCurve::new(0.55, load.clone(), unload.clone()).unwrap();
        let again = canonicalize(&c.to_curve()).unwrap();
        assert_eq!(again.loading(), &load[..]);
        assert_eq!(again.unloading(), &unload[..]);
    }

    #[test]
    fn dense_sine_curve_interpolation_error_bound() {
        let f = |e: f64| 2.0 * e + 0.1 * (12.0 * e).sin();
        let n = 3000;
        let strain: Vec<f64> = (0..=n).map(|i| 0.6 * i as f64 / n as f64).collect();
        let mut e = strain.clone();
        let mut s: Vec<f64> = strain.iter().map(|&x| f(x)).collect();
        for &x in strain.iter().rev().skip(1) {
            e.push(x);
            s.push(0.5 * f(x));
        }
        let c = canonicalize(&StressStrainCurve::new(e, s).unwrap()).unwrap();
        let h = 0.6 / 119.0;
        for (x, &y) in c.grid().iter().zip(c.loading()) {
            assert!((y - f(*x)).abs() < h * h);
        }
    }

    #[test]
    fn replicate_averaging() {
        let a = triangle_loop();
        assert_eq!(average_replicates(&[a.clone()]).unwrap(), a);
        assert_eq!(average_replicates(&[a.clone(), a.clone()]).unwrap(), a);
        assert!(average_replicates::<f64>(&[]).is_err());

        let line = |slope: f64, emax: f64, n: usize| {
            let load: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let e = emax * i as f64 / (n - 1) as f64;
                    (e, slope * e)
                })
                .collect();
            let unload = [(emax * 0.5, 0.0), (0.0, 0.0)];
            StressStrainCurve::from_branches(&load, &unload).unwrap()
        };
        let avg = average_replicates(&[line(1.0, 0.6, 7), line(3.0, 0.55, 5)]).unwrap();
        assert!((avg.strain_max() - 0.55).abs() < 1e-15);
        let (e, s) = avg.loading();
        for (x, y) in e.iter().zip(s) {
            assert!((y - 2.0 * x).abs() < 1e-12);
        }

        let no_unload = StressStrainCurve::from_branches(&[(0.0, 0.0), (0.2, 1.0), (0.4, 2.0)], &[]).unwrap();
        assert!(average_replicates(&[a, no_unload]).is_err());
    }

    #[test]
    fn canonicalize_needs_two_points_per_branch() {
        let c = StressStrainCurve::from_branches(&[(0.0, 0.0), (0.2, 1.0), (0.4, 2.0)], &[]).unwrap();
        assert!(canonicalize(&c).is_err());
    }

    #[test]
    fn denoising_keeps_straight_branches() {
        let load: Vec<(f64, f64)> = (0..40).map(|i| (i as f64 * 0.015, 2.0 * i as f64 * 0.015)).collect();
        let unload: Vec<(f64, f64)> = (0..39)
            .rev()
            .map(|i| (i as f64 * 0.015, 0.5 * i as f64 * 0.015))
            .collect();
        let c = StressStrainCurve::from_branches(&load, &unload).unwrap();
        let d = c.denoised(SavGolParams::default()).unwrap();
        for (a, b) in c.stress().iter().zip(d.stress()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn smooth_loop(amp: f64, freq: f64, emax: f64) -> CanonicalCurve<f64> {
        let grid = CanonicalCurve::grid_for(emax);
        let load = grid.iter().map(|&e| 3.0 * e + amp * (freq * e).sin().powi(2)).collect();
        let unload = grid.iter().map(|&e| 1.5 * e * e / emax).collect();
        CanonicalCurve::new(emax, load, unload).unwrap()
    }

    proptest! {
        #[test]
        fn scaling_is_linear(c in 0.1f64..10.0, amp in 0.0f64..1.0) {
            let base = smooth_loop(amp, 7.0, 0.6);
            let scaled = canonicalize(&base.to_curve().scaled(c)).unwrap();
            let d0 = energy_dissipation(&base);
            let d1 = energy_dissipation(&scaled);
            prop_assert!((d1 - c * d0).abs() <= 1e-9 * d0.abs().max(1.0));
        }

        #[test]
        fn dominated_unloading_is_nonnegative(amp in 0.0f64..1.0, freq in 0.5f64..20.0) {
            let grid = CanonicalCurve::grid_for(0.6);
            let load: Vec<f64> = grid.iter().map(|&e| 2.0 * e + amp * (freq * e).sin().abs()).collect();
            let unload: Vec<f64> = load.iter().zip(&grid).map(|(l, e)| l * (0.2 + e)).collect();
            let c = CanonicalCurve::new(0.6, load, unload).unwrap();
            prop_assert!(energy_dissipation(&c) >= 0.0);
        }

        #[test]
        fn canonicalize_is_idempotent(amp in 0.0f64..2.0, freq in 0.5f64..30.0, emax in 0.3f64..0.7) {
            let c = smooth_loop(amp, freq, emax);
            let once = canonicalize(&c.to_curve()).unwrap();
            let twice = canonicalize(&once.to_curve()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
