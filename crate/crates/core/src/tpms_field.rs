//! Implicit TPMS primitives, their barycentric blend, and the sheet-solid predicate.
//!
//! Every primitive is a trigonometric level-set function with period `2π` along
//! each axis. A design is a convex combination of the eight primitives,
//! `F(p) = Σ w_i f_i(p)`, and the printable solid is a sheet of thickness `t`
//! around the zero level set of `F`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const NUM_PRIMITIVES: usize = 8;

pub type Point3<T> = [T; 3];

/// The eight primitives in their fixed, file-format-stable order (1-based index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    SchwarzP,
    Gyroid,
    Diamond,
    Iwp,
    Neovius,
    FischerKochS,
    Lidinoid,
    SplitP,
}

impl Primitive {
    pub const ALL: [Primitive; NUM_PRIMITIVES] = [
        Primitive::SchwarzP,
        Primitive::Gyroid,
        Primitive::Diamond,
        Primitive::Iwp,
        Primitive::Neovius,
        Primitive::FischerKochS,
        Primitive::Lidinoid,
        Primitive::SplitP,
    ];

    /// 1-based index used in files and reports.
    pub fn index(self) -> usize {
        self.slot() + 1
    }

    /// 0-based position in a weight vector.
    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if (1..=NUM_PRIMITIVES).contains(&index) {
            Ok(Self::ALL[index - 1])
        } else {
            Err(Error::Domain(format!(
                "primitive index {index} outside 1..={NUM_PRIMITIVES}"
            )))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Primitive::SchwarzP => "Schwarz P",
            Primitive::Gyroid => "Schoen Gyroid",
            Primitive::Diamond => "Schwarz Diamond",
            Primitive::Iwp => "Schoen I-WP",
            Primitive::Neovius => "Neovius",
            Primitive::FischerKochS => "Fischer-Koch S",
            Primitive::Lidinoid => "Lidinoid",
            Primitive::SplitP => "Split-P",
        }
    }

    /// Short identifier safe for file names.
    pub fn slug(self) -> &'static str {
        match self {
            Primitive::SchwarzP => "schwarz-p",
            Primitive::Gyroid => "gyroid",
            Primitive::Diamond => "diamond",
            Primitive::Iwp => "iwp",
            Primitive::Neovius => "neovius",
            Primitive::FischerKochS => "fischer-koch-s",
            Primitive::Lidinoid => "lidinoid",
            Primitive::SplitP => "split-p",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.slug() == slug)
    }

    #[inline]
    pub(crate) fn value_trig<T: Scalar>(self, tr: &Trig<T>) -> T {
        let [sx, sy, sz] = tr.s;
        let [cx, cy, cz] = tr.c;
        let [s2x, s2y, s2z] = tr.s2;
        let [c2x, c2y, c2z] = tr.c2;
        let two = T::lit(2.0);
        match self {
            Primitive::SchwarzP => cx + cy + cz,
            Primitive::Gyroid => sx * cy + sy * cz + sz * cx,
            Primitive::Diamond => sx * sy * sz + sx * cy * cz + cx * sy * cz + cx * cy * sz,
            Primitive::Iwp => two * (cx * cy + cy * cz + cz * cx) - (c2x + c2y + c2z),
            Primitive::Neovius => T::lit(3.0) * (cx + cy + cz) + T::lit(4.0) * cx * cy * cz,
            Primitive::FischerKochS => c2x * sy * cz + cx * c2y * sz + sx * cy * c2z,
            Primitive::Lidinoid => {
                T::lit(0.5) * (s2x * cy * sz + sx * s2y * cz + cx * sy * s2z)
                    - T::lit(0.5) * (c2x * c2y + c2y * c2z + c2z * c2x)
                    + T::lit(0.15)
            }
            Primitive::SplitP => {
                T::lit(1.1) * (s2x * sz * cy + s2y * sx * cz + s2z * sy * cx)
                    - T::lit(0.2) * (c2x * c2y + c2y * c2z + c2z * c2x)
                    - T::lit(0.4) * (c2x + c2y + c2z)
            }
        }
    }

    #[inline]
    pub(crate) fn gradient_trig<T: Scalar>(self, tr: &Trig<T>) -> [T; 3] {
        let [sx, sy, sz] = tr.s;
        let [cx, cy, cz] = tr.c;
        let [s2x, s2y, s2z] = tr.s2;
        let [c2x, c2y, c2z] = tr.c2;
        let two = T::lit(2.0);
        match self {
            Primitive::SchwarzP => [-sx, -sy, -sz],
            Primitive::Gyroid => [cx * cy - sz * sx, -sx * sy + cy * cz, -sy * sz + cz * cx],
            Primitive::Diamond => [
                cx * sy * sz + cx * cy * cz - sx * sy * cz - sx * cy * sz,
                sx * cy * sz - sx * sy * cz + cx * cy * cz - cx * sy * sz,
                sx * sy * cz - sx * cy * sz - cx * sy * sz + cx * cy * cz,
            ],
            Primitive::Iwp => [
                -two * sx * (cy + cz) + two * s2x,
                -two * sy * (cx + cz) + two * s2y,
                -two * sz * (cx + cy) + two * s2z,
            ],
            Primitive::Neovius => {
                let (k3, k4) = (T::lit(3.0), T::lit(4.0));
                [
                    -k3 * sx - k4 * sx * cy * cz,
                    -k3 * sy - k4 * cx * sy * cz,
                    -k3 * sz - k4 * cx * cy * sz,
                ]
            }
            Primitive::FischerKochS => [
                -two * s2x * sy * cz - sx * c2y * sz + cx * cy * c2z,
                c2x * cy * cz - two * cx * s2y * sz - sx * sy * c2z,
                -c2x * sy * sz + cx * c2y * cz - two * sx * cy * s2z,
            ],
            Primitive::Lidinoid => {
                let h = T::lit(0.5);
                [
                    h * (two * c2x * cy * sz + cx * s2y * cz - sx * sy * s2z) + s2x * (c2y + c2z),
                    h * (-s2x * sy * sz + two * sx * c2y * cz + cx * cy * s2z) + s2y * (c2x + c2z),
                    h * (s2x * cy * cz - sx * s2y * sz + two * cx * sy * c2z) + s2z * (c2x + c2y),
                ]
            }
            Primitive::SplitP => {
                let (a, b, c) = (T::lit(1.1), T::lit(0.4), T::lit(0.8));
                [
                    a * (two * c2x * sz * cy + s2y * cx * cz - s2z * sy * sx) + b * s2x * (c2y + c2z) + c * s2x,
                    a * (-s2x * sz * sy + two * c2y * sx * cz + s2z * cy * cx) + b * s2y * (c2x + c2z) + c * s2y,
                    a * (s2x * cz * cy - s2y * sx * sz + two * c2z * sy * cx) + b * s2z * (c2x + c2y) + c * s2z,
                ]
            }
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sines and cosines of `p` and `2p`, shared by all primitive evaluations at a point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Trig<T> {
    pub s: [T; 3],
    pub c: [T; 3],
    pub s2: [T; 3],
    pub c2: [T; 3],
}

impl<T: Scalar> Trig<T> {
    #[inline]
    pub fn at(p: &Point3<T>) -> Self {
        let mut tr = Trig {
            s: [T::zero(); 3],
            c: [T::zero(); 3],
            s2: [T::zero(); 3],
            c2: [T::zero(); 3],
        };
        for k in 0..3 {
            let (s, c) = p[k].sin_cos();
            tr.s[k] = s;
            tr.c[k] = c;
            tr.s2[k] = (s + s) * c;
            tr.c2[k] = c * c - s * s;
        }
        tr
    }

    /// Assemble from per-axis tables (used by the voxelizer, where each axis is separable).
    #[inline]
    pub fn from_axes(x: &AxisTrig<T>, y: &AxisTrig<T>, z: &AxisTrig<T>) -> Self {
        Trig {
            s: [x.s, y.s, z.s],
            c: [x.c, y.c, z.c],
            s2: [x.s2, y.s2, z.s2],
            c2: [x.c2, y.c2, z.c2],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AxisTrig<T> {
    pub s: T,
    pub c: T,
    pub s2: T,
    pub c2: T,
}

impl<T: Scalar> AxisTrig<T> {
    pub fn at(v: T) -> Self {
        let (s, c) = v.sin_cos();
        AxisTrig {
            s,
            c,
            s2: (s + s) * c,
            c2: c * c - s * s,
        }
    }
}

/// Value of primitive `id` at `p`.
pub fn eval_primitive<T: Scalar>(id: Primitive, p: &Point3<T>) -> T {
    id.value_trig(&Trig::at(p))
}

/// Analytic gradient of primitive `id` at `p`.
pub fn primitive_gradient<T: Scalar>(id: Primitive, p: &Point3<T>) -> [T; 3] {
    id.gradient_trig(&Trig::at(p))
}

/// Value of the primitive with 1-based index `index`; unknown indices are a domain error.
pub fn eval_primitive_index<T: Scalar>(index: usize, p: &Point3<T>) -> Result<T> {
    Ok(eval_primitive(Primitive::from_index(index)?, p))
}

/// Barycentric weights over the eight primitives: nonnegative, summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "[T; NUM_PRIMITIVES]",
    into = "[T; NUM_PRIMITIVES]",
    bound = "T: Scalar + Serialize + serde::de::DeserializeOwned"
)]
pub struct WeightVector<T> {
    w: [T; NUM_PRIMITIVES],
}

impl<T: Scalar> WeightVector<T> {
    pub fn sum_tolerance() -> T {
        T::lit(1e-9).max(T::epsilon() * T::lit(16.0))
    }

    pub fn new(w: [T; NUM_PRIMITIVES]) -> Result<Self> {
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi < T::zero() {
                return Err(Error::InvalidWeights(format!(
                    "component {} is {wi}; weights must be finite and nonnegative",
                    i + 1
                )));
            }
        }
        let sum: T = w.iter().copied().sum();
        if (sum - T::one()).abs() > Self::sum_tolerance() {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(WeightVector { w })
    }

    /// Rescales nonnegative raw values onto the simplex.
    pub fn normalized(raw: [T; NUM_PRIMITIVES]) -> Result<Self> {
        let sum: T = raw.iter().copied().sum();
        if !(sum > T::zero()) || !sum.is_finite() {
            return Err(Error::InvalidWeights(format!(
                "cannot normalize weights with sum {sum}"
            )));
        }
        let mut w = raw;
        for wi in &mut w {
            *wi = *wi / sum;
        }
        Self::new(w)
    }

    pub fn unit(p: Primitive) -> Self {
        let mut w = [T::zero(); NUM_PRIMITIVES];
        w[p.slot()] = T::one();
        WeightVector { w }
    }

    /// Mixes exactly two primitives; `fraction_a` goes to `a`.
    pub fn pair(a: Primitive, b: Primitive, fraction_a: T) -> Result<Self> {
        let mut w = [T::zero(); NUM_PRIMITIVES];
        w[a.slot()] = w[a.slot()] + fraction_a;
        w[b.slot()] = w[b.slot()] + (T::one() - fraction_a);
        Self::new(w)
    }

    pub fn as_array(&self) -> &[T; NUM_PRIMITIVES] {
        &self.w
    }

    pub fn get(&self, p: Primitive) -> T {
        self.w[p.slot()]
    }

    /// Primitive carrying the largest weight (lowest index on ties).
    pub fn dominant(&self) -> Primitive {
        let mut best = 0;
        for i in 1..NUM_PRIMITIVES {
            if self.w[i] > self.w[best] {
                best = i;
            }
        }
        Primitive::ALL[best]
    }

    pub fn distance(&self, other: &Self) -> T {
        self.w
            .iter()
            .zip(other.w.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> WeightVector<U> {
        WeightVector {
            w: self.w.map(|v| U::lit(v.to_f64_lossy())),
        }
    }
}

impl<T: Scalar> TryFrom<[T; NUM_PRIMITIVES]> for WeightVector<T> {
    type Error = Error;

    fn try_from(w: [T; NUM_PRIMITIVES]) -> Result<Self> {
        Self::new(w)
    }
}

impl<T> From<WeightVector<T>> for [T; NUM_PRIMITIVES] {
    fn from(v: WeightVector<T>) -> Self {
        v.w
    }
}

impl<T: Scalar> fmt::Display for WeightVector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.w.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl<T: Scalar + FromStr> FromStr for WeightVector<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != NUM_PRIMITIVES {
            return Err(Error::InvalidWeights(format!(
                "expected {NUM_PRIMITIVES} comma-separated values, got {}",
                parts.len()
            )));
        }
        let mut w = [T::zero(); NUM_PRIMITIVES];
        for (slot, part) in w.iter_mut().zip(parts) {
            *slot = part
                .parse()
                .map_err(|_| Error::InvalidWeights(format!("`{part}` is not a number")))?;
        }
        Self::new(w)
    }
}

/// How the wall half-width around `F = 0` is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThicknessMode {
    /// `|F| ≤ (t/2)·‖∇F‖`: first-order distance to the level set is at most `t/2`,
    /// so walls are close to `t` thick everywhere.
    #[default]
    Normalized,
    /// `|F|·‖∇F‖ ≤ t/2`: offset `±t/(2‖∇F‖)` applied directly to the level value.
    InverseGradient,
    /// `|F| ≤ t/2`: constant offset in level-value units; wall thickness varies
    /// with the local gradient magnitude.
    Constant,
}

/// A blended TPMS sheet: weights, wall thickness `t` (implicit units) and offset rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct TpmsField<T> {
    pub weights: WeightVector<T>,
    thickness: T,
    #[serde(default)]
    pub mode: ThicknessMode,
}

impl<T: Scalar> TpmsField<T> {
    pub const DEFAULT_THICKNESS: f64 = 0.5;

    pub fn new(weights: WeightVector<T>, thickness: T) -> Result<Self> {
        Self::with_mode(weights, thickness, ThicknessMode::default())
    }

    pub fn with_mode(weights: WeightVector<T>, thickness: T, mode: ThicknessMode) -> Result<Self> {
        if !(thickness > T::zero()) || !thickness.is_finite() {
            return Err(Error::Config(format!(
                "wall thickness must be positive, got {thickness}"
            )));
        }
        Ok(TpmsField {
            weights,
            thickness,
            mode,
        })
    }

    /// Field at the default thickness of 0.5.
    pub fn from_weights(weights: WeightVector<T>) -> Self {
        TpmsField {
            weights,
            thickness: T::lit(Self::DEFAULT_THICKNESS),
            mode: ThicknessMode::default(),
        }
    }

    pub fn thickness(&self) -> T {
        self.thickness
    }

    pub fn value(&self, p: &Point3<T>) -> T {
        self.value_trig(&Trig::at(p))
    }

    pub fn gradient(&self, p: &Point3<T>) -> [T; 3] {
        self.value_gradient_trig(&Trig::at(p)).1
    }

    pub fn value_and_gradient(&self, p: &Point3<T>) -> (T, [T; 3]) {
        self.value_gradient_trig(&Trig::at(p))
    }

    /// Signed membership margin: `≤ 0` inside the wall.
    pub fn margin(&self, p: &Point3<T>) -> T {
        self.margin_trig(&Trig::at(p))
    }

    pub fn is_solid(&self, p: &Point3<T>) -> bool {
        self.margin(p) <= T::zero()
    }

    #[inline]
    pub(crate) fn value_trig(&self, tr: &Trig<T>) -> T {
        let mut f = T::zero();
        for (prim, &w) in Primitive::ALL.iter().zip(self.weights.w.iter()) {
            if w != T::zero() {
                f = f + w * prim.value_trig(tr);
            }
        }
        f
    }

    #[inline]
    pub(crate) fn value_gradient_trig(&self, tr: &Trig<T>) -> (T, [T; 3]) {
        let mut f = T::zero();
        let mut g = [T::zero(); 3];
        for (prim, &w) in Primitive::ALL.iter().zip(self.weights.w.iter()) {
            if w != T::zero() {
                f = f + w * prim.value_trig(tr);
                let gi = prim.gradient_trig(tr);
                for k in 0..3 {
                    g[k] = g[k] + w * gi[k];
                }
            }
        }
        (f, g)
    }

    #[inline]
    pub(crate) fn margin_trig(&self, tr: &Trig<T>) -> T {
        let (f, g) = self.value_gradient_trig(tr);
        let grad_norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let half = self.thickness * T::lit(0.5);
        match self.mode {
            ThicknessMode::Normalized => f.abs() - half * grad_norm,
            ThicknessMode::InverseGradient => f.abs() * grad_norm - half,
            ThicknessMode::Constant => f.abs() - half,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(rng: &mut ChaCha8Rng) -> WeightVector<f64> {
        let raw: [f64; 8] = std::array::from_fn(|_| rng.random::<f64>());
        WeightVector::normalized(raw).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
        std::array::from_fn(|_| rng.random_range(-10.0..10.0))
    }

    #[test]
    fn origin_values() {
        let o = [0.0f64; 3];
        assert_eq!(eval_primitive(Primitive::SchwarzP, &o), 3.0);
        assert_eq!(eval_primitive(Primitive::Gyroid, &o), 0.0);
        assert!((eval_primitive(Primitive::Gyroid, &[FRAC_PI_2, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn index_mapping_is_fixed() {
        assert_eq!(Primitive::from_index(1).unwrap(), Primitive::SchwarzP);
        assert_eq!(Primitive::from_index(2).unwrap(), Primitive::Gyroid);
        assert_eq!(Primitive::from_index(6).unwrap(), Primitive::FischerKochS);
        assert_eq!(Primitive::from_index(8).unwrap(), Primitive::SplitP);
        for p in Primitive::ALL {
            assert_eq!(Primitive::from_index(p.index()).unwrap(), p);
            assert_eq!(Primitive::from_slug(p.slug()), Some(p));
        }
    }

    #[test]
    fn invalid_index_is_domain_error() {
        for bad in [0usize, 9, 100] {
            let err = eval_primitive_index::<f64>(bad, &[0.0; 3]).unwrap_err();
            assert!(matches!(err, Error::Domain(_)), "{err}");
        }
    }

    #[test]
    fn blended_field_at_origin() {
        let w = WeightVector::<f64>::pair(Primitive::Gyroid, Primitive::SchwarzP, 0.4).unwrap();
        let f = TpmsField::from_weights(w);
        assert!((f.value(&[0.0f64; 3]) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn unit_weights_reproduce_primitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for prim in Primitive::ALL {
            let f = TpmsField::from_weights(WeightVector::unit(prim));
            for _ in 0..20 {
                let p = random_point(&mut rng);
                assert_eq!(f.value(&p), eval_primitive(prim, &p));
            }
        }
    }

    #[test]
    fn field_matches_per_primitive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let w = random_weights(&mut rng);
            let p = random_point(&mut rng);
            let f = TpmsField::from_weights(w);
            let oracle: f64 = Primitive::ALL.iter().map(|&q| w.get(q) * eval_primitive(q, &p)).sum();
            assert!((f.value(&p) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_examples() {
        let o = [0.0f64; 3];
        assert_eq!(primitive_gradient(Primitive::SchwarzP, &o), [0.0, 0.0, 0.0]);
        assert_eq!(primitive_gradient(Primitive::Gyroid, &o), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for prim in Primitive::ALL {
            for _ in 0..300 {
                let p = random_point(&mut rng);
                let g = primitive_gradient(prim, &p);
                for k in 0..3 {
                    let mut a = p;
                    let mut b = p;
                    a[k] += h;
                    b[k] -= h;
                    let fd = (eval_primitive(prim, &a) - eval_primitive(prim, &b)) / (2.0 * h);
                    let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-6, "{prim} axis {k}: {} vs {fd}", g[k]);
                }
            }
        }
    }

    #[test]
    fn primitives_are_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for prim in Primitive::ALL {
            for _ in 0..100 {
                let p = random_point(&mut rng);
                for k in 0..3 {
                    let mut q = p;
                    q[k] += TAU;
                    assert!((eval_primitive(prim, &p) - eval_primitive(prim, &q)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn solid_examples() {
        let gyroid = TpmsField::from_weights(WeightVector::unit(Primitive::Gyroid));
        assert!(gyroid.is_solid(&[0.0; 3]));
        for t in [1e-6, 0.1, 5.0] {
            for mode in [
                ThicknessMode::Normalized,
                ThicknessMode::InverseGradient,
                ThicknessMode::Constant,
            ] {
                let g = TpmsField::with_mode(WeightVector::unit(Primitive::Gyroid), t, mode).unwrap();
                assert!(g.is_solid(&[0.0; 3]));
            }
        }

        // Critical point of Schwarz P: the inverse-gradient rule keeps it solid
        // without dividing by the vanishing gradient.
        let p_inv = TpmsField::with_mode(
            WeightVector::unit(Primitive::SchwarzP),
            0.5,
            ThicknessMode::InverseGradient,
        )
        .unwrap();
        assert!(p_inv.is_solid(&[0.0; 3]));
        // Under the distance-normalized rule the same point (F = 3, far from the sheet) is void.
        let p_norm = TpmsField::from_weights(WeightVector::unit(Primitive::SchwarzP));
        assert!(!p_norm.is_solid(&[0.0; 3]));

        // Gyroid at (π/2, 0, 0): |F| = 1, ∇F = (0, 1, 0).
        let q = [FRAC_PI_2, 0.0, 0.0];
        let g = gyroid.gradient(&q);
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        for mode in [
            ThicknessMode::Normalized,
            ThicknessMode::InverseGradient,
            ThicknessMode::Constant,
        ] {
            let f = TpmsField::with_mode(WeightVector::unit(Primitive::Gyroid), 0.5, mode).unwrap();
            assert!(!f.is_solid(&q), "{mode:?}");
        }
    }

    #[test]
    fn shell_symmetry_of_schwarz_p() {
        // f_P(p + (π,π,π)) = -f_P(p), and the sheet predicate only sees |F|.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for mode in [
            ThicknessMode::Normalized,
            ThicknessMode::InverseGradient,
            ThicknessMode::Constant,
        ] {
            let f = TpmsField::with_mode(WeightVector::unit(Primitive::SchwarzP), 0.5, mode).unwrap();
            for _ in 0..500 {
                let p = random_point(&mut rng);
                let q = [p[0] + PI, p[1] + PI, p[2] + PI];
                assert!((f.value(&p) + f.value(&q)).abs() < 1e-12);
                if f.margin(&p).abs() > 1e-9 {
                    assert_eq!(f.is_solid(&p), f.is_solid(&q));
                }
            }
        }
    }

    #[test]
    fn division_free_forms_agree_with_literal_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let w = random_weights(&mut rng);
            let p = random_point(&mut rng);
            let t = rng.random_range(0.1..1.5);
            let inv = TpmsField::with_mode(w, t, ThicknessMode::InverseGradient).unwrap();
            let norm = TpmsField::with_mode(w, t, ThicknessMode::Normalized).unwrap();
            let (f, g) = inv.value_and_gradient(&p);
            let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if gn > 1e-8 && inv.margin(&p).abs() > 1e-12 {
                assert_eq!(inv.is_solid(&p), f.abs() <= t / (2.0 * gn));
            }
            if gn > 1e-8 && norm.margin(&p).abs() > 1e-12 {
                assert_eq!(norm.is_solid(&p), f.abs() / gn <= t / 2.0);
            }
        }
    }

    #[test]
    fn weight_vector_validation_and_text() {
        assert!(WeightVector::<f64>::new([0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_ok());
        assert!(WeightVector::<f64>::new([0.5, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, -0.1]).is_err());
        assert!(WeightVector::<f64>::new([0.5, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        let w: WeightVector<f64> = "0.6,0.4,0,0,0,0,0,0".parse().unwrap();
        assert_eq!(w.get(Primitive::SchwarzP), 0.6);
        assert_eq!(w.dominant(), Primitive::SchwarzP);
        let back: WeightVector<f64> = w.to_string().parse().unwrap();
        assert_eq!(back, w);
        assert!("1,0,0".parse::<WeightVector<f64>>().is_err());
        assert!(serde_json::from_str::<WeightVector<f64>>("[1,1,0,0,0,0,0,0]").is_err());
    }

    #[test]
    fn thickness_must_be_positive() {
        let w = WeightVector::<f64>::unit(Primitive::Gyroid);
        assert!(TpmsField::new(w, 0.0).is_err());
        assert!(TpmsField::new(w, -1.0).is_err());
    }

    #[test]
    fn single_precision_field() {
        let w = WeightVector::<f32>::pair(Primitive::Gyroid, Primitive::SchwarzP, 0.4).unwrap();
        let f = TpmsField::from_weights(w);
        assert!((f.value(&[0.0f32; 3]) - 1.8).abs() < 1e-6);
    }
}
