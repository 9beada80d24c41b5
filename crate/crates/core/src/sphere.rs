//! Geometry on the unit sphere: directions, semi-ellipsoids with a focus at
//! the origin, vector Snell refraction and the spherical caps on which one
//! ellipsoid lies below another.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Half-width of the band around ±1 in which the cap cosine is snapped.
const CAP_SNAP: f64 = 1e-14;

/// A point of S², stored as three components of unit Euclidean norm.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitDirection {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitDirection {
    /// Normalizes `(x, y, z)`. Zero and non-finite vectors are rejected.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidInput(format!(
                "cannot normalize ({x}, {y}, {z})"
            )));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Direction of the homogeneous coordinates `[a : b : c]`.
    pub fn homogeneous(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(a, b, c)
    }

    pub const fn north() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        }
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(&self, other: &UnitDirection) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn as_vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    /// Great-circle distance in radians.
    pub fn geodesic_distance(&self, other: &UnitDirection) -> f64 {
        self.dot(other).clamp(-1.0, 1.0).acos()
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }
}

impl Neg for UnitDirection {
    type Output = UnitDirection;

    fn neg(self) -> Self::Output {
        Self {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl fmt::Debug for UnitDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Plain 3-vector for intermediate (non-unit) quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Result<UnitDirection> {
        UnitDirection::new(self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;

    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;

    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;

    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

/// Ratio `n2 / n1` of the refractive indices; restricted to `(0, 1)`, the
/// dense-to-rare regime in which the refracting surfaces are ellipsoids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefractionConstant {
    kappa: f64,
    indices: Option<(f64, f64)>,
}

impl RefractionConstant {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidInput(format!(
                "kappa must lie in (0, 1), got {kappa}"
            )));
        }
        Ok(Self {
            kappa,
            indices: None,
        })
    }

    /// From the index `n1` of the medium around the source and `n2` outside.
    pub fn from_indices(n1: f64, n2: f64) -> Result<Self> {
        if !(n1 > 0.0 && n2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "refractive indices must be positive, got n1 = {n1}, n2 = {n2}"
            )));
        }
        let mut k = Self::new(n2 / n1)?;
        k.indices = Some((n1, n2));
        Ok(k)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.kappa
    }

    /// `(n1, n2)`; when built from `kappa` alone, `n1 = 1`.
    pub fn indices(&self) -> (f64, f64) {
        self.indices.unwrap_or((1.0, self.kappa))
    }
}

/// Polar radius `coeff / (1 - kappa * dot)` of a semi-ellipsoid at a ray whose
/// cosine with the axis is `dot`. Every radius in the crate goes through this
/// expression so that comparisons are bitwise reproducible.
#[inline(always)]
pub fn ellipsoid_radius(coeff: f64, kappa: f64, dot: f64) -> f64 {
    coeff / (1.0 - kappa * dot)
}

/// The refracting cap `E(m, b)` of an ellipsoid of revolution with one focus
/// at the origin, axis `m` and eccentricity `kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiEllipsoid {
    pub axis: UnitDirection,
    coeff: f64,
}

impl SemiEllipsoid {
    pub fn new(axis: UnitDirection, coeff: f64) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ellipsoid coefficient must be positive, got {coeff}"
            )));
        }
        Ok(Self { axis, coeff })
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// The focus other than the origin.
    pub fn second_focus(&self, kappa: RefractionConstant) -> Vec3 {
        let k = kappa.value();
        (2.0 * k * self.coeff / (1.0 - k * k)) * self.axis.as_vector()
    }

    /// Outward unit normal at the surface point above `x`.
    pub fn normal(&self, x: &UnitDirection, kappa: RefractionConstant) -> Result<UnitDirection> {
        (x.as_vector() - kappa.value() * self.axis.as_vector()).normalize()
    }
}

/// Polar radius of `e` along `x`. Rays with `axis·x < kappa` leave through the
/// part of the ellipsoid that does not refract into the axis and are rejected.
pub fn polar_radius(
    e: &SemiEllipsoid,
    x: &UnitDirection,
    kappa: RefractionConstant,
) -> Result<f64> {
    let dot = e.axis.dot(x);
    if dot < kappa.value() {
        return Err(Error::DomainViolation {
            dot,
            kappa: kappa.value(),
        });
    }
    Ok(ellipsoid_radius(e.coeff, kappa.value(), dot))
}

/// A single refraction at an interface: `incident - kappa * refracted = multiplier * normal`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefractionEvent {
    pub incident: UnitDirection,
    pub normal: UnitDirection,
    pub refracted: UnitDirection,
    pub multiplier: f64,
}

/// Refracts `x` through a surface with unit normal `nu` pointing into the
/// rarer medium.
pub fn refract(
    x: &UnitDirection,
    nu: &UnitDirection,
    kappa: RefractionConstant,
) -> Result<RefractionEvent> {
    let k = kappa.value();
    let c = x.dot(nu);
    let critical = (1.0 - k * k).sqrt();
    if c < critical {
        return Err(Error::TotalInternalReflection {
            cos_incidence: c,
            critical,
        });
    }
    let radicand = (1.0 - (1.0 - c * c) / (k * k)).max(0.0);
    let multiplier = c - k * radicand.sqrt();
    let m = (1.0 / k) * (x.as_vector() - multiplier * nu.as_vector());
    Ok(RefractionEvent {
        incident: *x,
        normal: *nu,
        refracted: m.normalize()?,
        multiplier,
    })
}

/// Where one ellipsoid lies on or below another: empty, the whole sphere, or a
/// closed geodesic disk `{x : x·center >= cos(angular_radius)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiskRegion {
    Empty,
    FullSphere,
    Cap {
        center: UnitDirection,
        angular_radius: f64,
        /// `cos(angular_radius)` as computed before the arccos; membership tests use this value.
        cos_radius: f64,
    },
}

impl DiskRegion {
    pub fn contains(&self, x: &UnitDirection) -> bool {
        match self {
            DiskRegion::Empty => false,
            DiskRegion::FullSphere => true,
            DiskRegion::Cap {
                center, cos_radius, ..
            } => x.dot(center) >= *cos_radius,
        }
    }

    /// Signed distance `x·center - cos(radius)` of `x` from the cap boundary
    /// (`None` when there is no boundary).
    pub fn boundary_offset(&self, x: &UnitDirection) -> Option<f64> {
        match self {
            DiskRegion::Cap {
                center, cos_radius, ..
            } => Some(x.dot(center) - cos_radius),
            _ => None,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            DiskRegion::Empty => 0.0,
            DiskRegion::FullSphere => 4.0 * PI,
            DiskRegion::Cap { cos_radius, .. } => 2.0 * PI * (1.0 - cos_radius),
        }
    }
}

/// Region of S² on which `E(m_i, b_i)` is on or below `E(m_j, b_j)`:
/// `{x : b_i / (1 - κ m_i·x) <= b_j / (1 - κ m_j·x)}`.
pub fn classify_dominance_disk(
    b_i: f64,
    m_i: &UnitDirection,
    b_j: f64,
    m_j: &UnitDirection,
    kappa: RefractionConstant,
) -> Result<DiskRegion> {
    if !(b_i > 0.0 && b_j > 0.0) {
        return Err(Error::InvalidInput(format!(
            "coefficients must be positive, got {b_i} and {b_j}"
        )));
    }
    let separation = (m_i.as_vector() - m_j.as_vector()).norm();
    if separation <= 1e-12 {
        return Err(Error::DegenerateAxes { separation });
    }
    let axis = b_i * m_j.as_vector() - b_j * m_i.as_vector();
    let len = axis.norm();
    let mut q = (b_i - b_j) / (kappa.value() * len);
    if (q - 1.0).abs() <= CAP_SNAP {
        q = 1.0;
    } else if (q + 1.0).abs() <= CAP_SNAP {
        q = -1.0;
    }
    if q > 1.0 {
        return Ok(DiskRegion::Empty);
    }
    if q <= -1.0 {
        return Ok(DiskRegion::FullSphere);
    }
    Ok(DiskRegion::Cap {
        center: axis.normalize()?,
        angular_radius: q.clamp(-1.0, 1.0).acos(),
        cos_radius: q,
    })
}

/// Result of scanning source and target samples for total internal reflection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionCheck {
    pub ok: bool,
    pub min_dot: f64,
    /// Indices `(source, target)` of the pair attaining `min_dot`.
    pub worst_pair: (usize, usize),
}

/// Checks `m·x >= kappa` over all source/target pairs.
pub fn check_no_total_reflection(
    omega_samples: &[UnitDirection],
    targets: &[UnitDirection],
    kappa: RefractionConstant,
) -> ReflectionCheck {
    let mut min_dot = f64::INFINITY;
    let mut worst_pair = (0, 0);
    for (s, x) in omega_samples.iter().enumerate() {
        for (t, m) in targets.iter().enumerate() {
            let d = m.dot(x);
            if d < min_dot {
                min_dot = d;
                worst_pair = (s, t);
            }
        }
    }
    ReflectionCheck {
        ok: !omega_samples.is_empty() && !targets.is_empty() && min_dot >= kappa.value(),
        min_dot,
        worst_pair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> RefractionConstant {
        RefractionConstant::new(0.5).unwrap()
    }

    fn dir(x: f64, y: f64, z: f64) -> UnitDirection {
        UnitDirection::new(x, y, z).unwrap()
    }

    /// Unit vector at angle `theta` from the north pole in the xz-plane.
    fn tilted(theta: f64) -> UnitDirection {
        dir(theta.sin(), 0.0, theta.cos())
    }

    fn rotate(v: Vec3, axis: &UnitDirection, angle: f64) -> Vec3 {
        let k = axis.as_vector();
        let (s, c) = angle.sin_cos();
        c * v + s * k.cross(&v) + ((1.0 - c) * k.dot(&v)) * k
    }

    #[test]
    fn rejects_zero_vector() {
        assert!(UnitDirection::new(0.0, 0.0, 0.0).is_err());
        assert!(UnitDirection::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn kappa_range() {
        assert!(RefractionConstant::new(1.0).is_err());
        assert!(RefractionConstant::new(0.0).is_err());
        let k = RefractionConstant::from_indices(1.5, 1.0).unwrap();
        assert!((k.value() - 2.0 / 3.0).abs() < 1e-15);
        assert!(RefractionConstant::from_indices(1.0, 1.5).is_err());
    }

    #[test]
    fn radius_along_axis() {
        let e = SemiEllipsoid::new(UnitDirection::north(), 1.0).unwrap();
        let r = polar_radius(&e, &UnitDirection::north(), half()).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn radius_at_cap_boundary() {
        let e = SemiEllipsoid::new(UnitDirection::north(), 1.0).unwrap();
        // m·x = 1/2 = kappa
        let x = UnitDirection::new(3f64.sqrt(), 0.0, 1.0).unwrap();
        assert!(x.z() >= 0.5 && x.z() - 0.5 < 1e-15);
        let r = polar_radius(&e, &x, half()).unwrap();
        assert!((r - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn radius_outside_cap_is_domain_violation() {
        let e = SemiEllipsoid::new(UnitDirection::north(), 1.0).unwrap();
        let x = tilted(1.2);
        assert!(matches!(
            polar_radius(&e, &x, half()),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn second_focus() {
        let e = SemiEllipsoid::new(UnitDirection::north(), 1.0).unwrap();
        let f = e.second_focus(half());
        assert_eq!((f.x, f.y), (0.0, 0.0));
        assert!((f.z - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normal_incidence_passes_straight() {
        let x = dir(0.3, -0.2, 1.0);
        let ev = refract(&x, &x, half()).unwrap();
        assert!((ev.multiplier - 0.5).abs() < 1e-15);
        assert!(ev.refracted.geodesic_distance(&x) < 1e-7);
        assert!((ev.refracted.dot(&x) - 1.0).abs() < 1e-14);
    }

    fn assert_event_invariants(ev: &RefractionEvent, kappa: RefractionConstant) {
        let k = kappa.value();
        let lhs = ev.incident.as_vector() - k * ev.refracted.as_vector();
        let rhs = ev.multiplier * ev.normal.as_vector();
        assert!(
            (lhs - rhs).norm() < 1e-10,
            "lambda identity {:?} vs {:?}",
            lhs,
            rhs
        );
        let (n1, n2) = kappa.indices();
        let a = n1 * ev.incident.as_vector().cross(&ev.normal.as_vector());
        let b = n2 * ev.refracted.as_vector().cross(&ev.normal.as_vector());
        assert!((a - b).norm() < 1e-10, "snell cross product");
        assert!((ev.refracted.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn refraction_at_cosine_point_nine() {
        let x = UnitDirection::north();
        let nu = tilted(0.9f64.acos());
        let ev = refract(&x, &nu, half()).unwrap();
        // 0.9 - 0.5 * sqrt(1 - 4 * 0.19)
        let expected = 0.9 - 0.5 * 0.24f64.sqrt();
        assert!((ev.multiplier - expected).abs() < 1e-12);
        assert!((ev.multiplier - 0.65505).abs() < 1e-5);
        assert_event_invariants(&ev, half());
    }

    #[test]
    fn grazing_exit_at_critical_angle() {
        let x = UnitDirection::north();
        let c = 3f64.sqrt() / 2.0;
        let nu = dir((1.0 - c * c).sqrt(), 0.0, c);
        let ev = refract(&x, &nu, half()).unwrap();
        assert!(ev.refracted.dot(&nu).abs() < 1e-9);
    }

    #[test]
    fn total_internal_reflection() {
        let x = UnitDirection::north();
        let nu = tilted(1.1);
        assert!(matches!(
            refract(&x, &nu, half()),
            Err(Error::TotalInternalReflection { .. })
        ));
    }

    #[test]
    fn ellipsoid_refracts_into_its_axis() {
        let kappa = RefractionConstant::new(0.4).unwrap();
        let axis = dir(0.1, 0.2, 1.0);
        let e = SemiEllipsoid::new(axis, 1.3).unwrap();
        for x in [dir(0.0, 0.0, 1.0), dir(0.3, -0.1, 1.0), dir(-0.4, 0.4, 1.0)] {
            let nu = e.normal(&x, kappa).unwrap();
            let ev = refract(&x, &nu, kappa).unwrap();
            assert!(ev.refracted.geodesic_distance(&axis) < 1e-7);
        }
    }

    #[test]
    fn equal_coefficients_give_hemisphere() {
        let mi = dir(0.0, 0.0, 1.0);
        let mj = dir(0.0, 1.0, 5.0);
        match classify_dominance_disk(1.0, &mi, 1.0, &mj, half()).unwrap() {
            DiskRegion::Cap {
                center,
                angular_radius,
                ..
            } => {
                let expected = (mj.as_vector() - mi.as_vector()).normalize().unwrap();
                assert!(center.geodesic_distance(&expected) < 1e-7);
                assert!((angular_radius - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
            }
            other => panic!("expected cap, got {other:?}"),
        }
    }

    #[test]
    fn dominated_ellipsoid_has_empty_region() {
        let mi = dir(0.0, 0.0, 1.0);
        let mj = dir(0.0, 1.0, 5.0);
        // b_i - b_j = 1 far exceeds kappa |b_i m_j - b_j m_i|
        let region = classify_dominance_disk(2.0, &mi, 1.0, &mj, half()).unwrap();
        assert_eq!(region, DiskRegion::Empty);
        let region = classify_dominance_disk(1.0, &mi, 2.0, &mj, half()).unwrap();
        assert_eq!(region, DiskRegion::FullSphere);
    }

    #[test]
    fn identical_axes_rejected() {
        let m = dir(0.0, 0.0, 1.0);
        assert!(matches!(
            classify_dominance_disk(1.0, &m, 2.0, &m, half()),
            Err(Error::DegenerateAxes { .. })
        ));
    }

    #[test]
    fn reflection_check_examples() {
        let n = [UnitDirection::north()];
        let c = check_no_total_reflection(&n, &n, half());
        assert!(c.ok);
        assert_eq!(c.min_dot, 1.0);

        let gen = |h: f64| -> Vec<UnitDirection> {
            [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
                .iter()
                .map(|&(a, b)| dir(a, b, h))
                .collect()
        };
        let c = check_no_total_reflection(&gen(2.0), &gen(5.0), half());
        assert!(c.ok);
        assert!((c.min_dot - 8.0 / (6f64.sqrt() * 27f64.sqrt())).abs() < 1e-14);

        let c = check_no_total_reflection(&[dir(1.0, 0.0, 0.0)], &n, half());
        assert!(!c.ok);
        assert_eq!(c.min_dot, 0.0);
    }

    fn unit() -> impl Strategy<Value = UnitDirection> {
        (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
            let r = (1.0 - z * z).sqrt();
            dir(r * phi.cos(), r * phi.sin(), z)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn refraction_invariants_hold(x in unit(), nu in unit(), k in 0.05f64..0.95) {
            let kappa = RefractionConstant::new(k).unwrap();
            match refract(&x, &nu, kappa) {
                Ok(ev) => assert_event_invariants(&ev, kappa),
                Err(Error::TotalInternalReflection { .. }) => prop_assert!(x.dot(&nu) < (1.0 - k * k).sqrt()),
                Err(e) => panic!("{e}"),
            }
        }

        #[test]
        fn radius_rotation_invariant(axis in unit(), rot in unit(), angle in 0.0f64..std::f64::consts::TAU, t in 0.0f64..1.0, k in 0.05f64..0.9) {
            let kappa = RefractionConstant::new(k).unwrap();
            // a ray inside the refracting cap of `axis`
            let other = if axis.z().abs() < 0.9 { dir(0.0, 0.0, 1.0) } else { dir(1.0, 0.0, 0.0) };
            let perp = axis.as_vector().cross(&other.as_vector()).normalize().unwrap();
            let theta = t * k.acos();
            let x = (theta.cos() * axis.as_vector() + theta.sin() * perp.as_vector()).normalize().unwrap();
            let e = SemiEllipsoid::new(axis, 1.7).unwrap();
            let r0 = polar_radius(&e, &x, kappa).unwrap();
            let axis_r = rotate(axis.as_vector(), &rot, angle).normalize().unwrap();
            let x_r = rotate(x.as_vector(), &rot, angle).normalize().unwrap();
            let e_r = SemiEllipsoid::new(axis_r, 1.7).unwrap();
            if let Ok(r1) = polar_radius(&e_r, &x_r, kappa) {
                prop_assert!((r0 - r1).abs() < 1e-12 * r0.max(1.0));
            }
        }

        #[test]
        fn dominance_disk_antisymmetric(bi in 0.2f64..3.0, bj in 0.2f64..3.0, mi in unit(), mj in unit(), k in 0.05f64..0.95) {
            prop_assume!((mi.as_vector() - mj.as_vector()).norm() > 1e-6);
            let kappa = RefractionConstant::new(k).unwrap();
            let a = classify_dominance_disk(bi, &mi, bj, &mj, kappa).unwrap();
            let b = classify_dominance_disk(bj, &mj, bi, &mi, kappa).unwrap();
            match (a, b) {
                (DiskRegion::Empty, DiskRegion::FullSphere) | (DiskRegion::FullSphere, DiskRegion::Empty) => {}
                (DiskRegion::Cap { center: c1, angular_radius: r1, .. }, DiskRegion::Cap { center: c2, angular_radius: r2, .. }) => {
                    prop_assert!((r1 + r2 - std::f64::consts::PI).abs() < 1e-12);
                    prop_assert!((c1.as_vector() + c2.as_vector()).norm() < 1e-12);
                }
                other => prop_assert!(false, "unexpected pair {:?}", other),
            }
        }

        #[test]
        fn dominance_disk_dilation_invariant(bi in 0.2f64..3.0, bj in 0.2f64..3.0, c in 0.1f64..10.0, mi in unit(), mj in unit(), k in 0.05f64..0.95) {
            prop_assume!((mi.as_vector() - mj.as_vector()).norm() > 1e-6);
            let kappa = RefractionConstant::new(k).unwrap();
            let a = classify_dominance_disk(bi, &mi, bj, &mj, kappa).unwrap();
            let b = classify_dominance_disk(c * bi, &mi, c * bj, &mj, kappa).unwrap();
            match (a, b) {
                (DiskRegion::Cap { center: c1, cos_radius: q1, .. }, DiskRegion::Cap { center: c2, cos_radius: q2, .. }) => {
                    prop_assert!((q1 - q2).abs() < 1e-12);
                    prop_assert!((c1.as_vector() - c2.as_vector()).norm() < 1e-12);
                }
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
