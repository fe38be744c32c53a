//! Model constants, growth vector field, emission law and the
//! dimensional to nondimensional parameter map.
//!
//! Everything here is a pure function of its arguments. Volumes, carrying
//! capacities and times are nondimensional unless the type says otherwise:
//! volumes are fractions of the maximal reachable volume `V* = (b/d)^(3/2)`
//! and time is measured in units of `1/a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{pow_two_thirds, Scalar};

/// Nondimensional model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    /// Angiogenic stimulation coefficient.
    pub b: T,
    /// Efficacy of the circulating inhibitor.
    pub e: T,
    /// Clearance rate of the circulating inhibitor.
    pub k: T,
    /// Intrinsic metastatic potential.
    pub m: T,
    /// Dissemination exponent, in `[0, 1]`.
    pub alpha: T,
    /// Volume of a newborn tumor.
    #[serde(rename = "V0")]
    pub v0: T,
    /// Carrying capacity of a newborn tumor.
    #[serde(rename = "K0")]
    pub k0: T,
    /// Tumors smaller than this do not emit.
    #[serde(rename = "Vm")]
    pub vm: T,
}

impl<T: Scalar> ModelParams<T> {
    /// The reference parameter set: every coefficient at one, `alpha = 2/3`,
    /// newborn tumors at `(0.1, 0.2)` and the emission threshold at `V0`.
    pub fn base() -> Self {
        let v0 = T::lit(0.1);
        Self {
            b: T::one(),
            e: T::one(),
            k: T::one(),
            m: T::one(),
            alpha: T::lit(2.0 / 3.0),
            v0,
            k0: T::lit(0.2),
            vm: v0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("b", self.b),
            ("e", self.e),
            ("k", self.k),
            ("m", self.m),
            ("alpha", self.alpha),
            ("V0", self.v0),
            ("K0", self.k0),
            ("Vm", self.vm),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        let zero = T::zero();
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams(msg.to_string()))
            }
        };
        check(self.b > zero, "b must be > 0")?;
        check(self.e >= zero, "e must be >= 0")?;
        check(self.k > zero, "k must be > 0")?;
        check(self.m >= zero, "m must be >= 0")?;
        check(
            self.alpha >= zero && self.alpha <= T::one(),
            "alpha must lie in [0, 1]",
        )?;
        check(self.v0 > zero, "V0 must be > 0")?;
        check(self.v0 < self.k0, "V0 must be < K0")?;
        check(self.vm >= zero, "Vm must be >= 0")
    }
}

/// Volume and carrying capacity of one tumor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumorState<T> {
    #[serde(rename = "V")]
    pub v: T,
    #[serde(rename = "K")]
    pub k: T,
}

impl<T: Scalar> TumorState<T> {
    pub fn new(v: T, k: T) -> Self {
        Self { v, k }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.k.is_finite()
    }
}

/// Velocity of a tumor in the `(V, K)` plane under inhibitor amount
/// `inhibitor`:
///
/// ```text
/// dV/dt = V ln(K / V)
/// dK/dt = b (V - V^(2/3) K) - e I K
/// ```
///
/// Volume relaxes toward the carrying capacity in Gompertz fashion, so the
/// only equilibrium of the uninhibited field is `(1, 1)`.
pub fn growth_field<T: Scalar>(
    s: TumorState<T>,
    inhibitor: T,
    p: &ModelParams<T>,
) -> Result<(T, T)> {
    if !s.is_finite() || !inhibitor.is_finite() {
        return Err(Error::InvalidState(format!(
            "non-finite input (V = {}, K = {}, I = {})",
            s.v, s.k, inhibitor
        )));
    }
    if s.v <= T::zero() || s.k <= T::zero() {
        return Err(Error::InvalidState(format!(
            "V and K must be positive (V = {}, K = {})",
            s.v, s.k
        )));
    }
    Ok(field_unchecked(s.v, s.k, inhibitor, p))
}

/// Hot-loop variant of [`growth_field`]; the caller guarantees positivity.
#[inline]
pub(crate) fn field_unchecked<T: Scalar>(v: T, k: T, inhibitor: T, p: &ModelParams<T>) -> (T, T) {
    let dv = v * (k / v).ln();
    let dk = p.b * (v - pow_two_thirds(v) * k) - p.e * inhibitor * k;
    (dv, dk)
}

/// Number of successful metastases emitted per unit time by a tumor of
/// volume `v`: `m V^alpha` above the threshold `Vm`, zero below.
#[inline]
pub fn emission_rate<T: Scalar>(v: T, p: &ModelParams<T>) -> T {
    if v >= p.vm {
        p.m * v.powf(p.alpha)
    } else {
        T::zero()
    }
}

/// State of every newborn tumor, and of the primary tumor at `t = 0`.
pub fn birth_state<T: Scalar>(p: &ModelParams<T>) -> TumorState<T> {
    TumorState::new(p.v0, p.k0)
}

/// Inputs from which the local inhibition coefficient `d` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biophysical<T> {
    /// Sensitivity of the carrying capacity to inhibitor concentration.
    pub e_hat: T,
    /// Distribution volume of the host compartment.
    #[serde(rename = "Vd")]
    pub vd: T,
    /// Inhibitor production rate per unit tumor volume.
    pub p: T,
    /// Diffusion length scale (`D^2` is the diffusion coefficient).
    #[serde(rename = "D")]
    pub diffusion: T,
}

/// Raw biophysical constants, before rescaling.
///
/// `d`, `e` and the production rate `p` may each be given directly or be
/// derived from the [`Biophysical`] group. Giving both is a configuration
/// error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams<T> {
    pub a: T,
    pub b: T,
    #[serde(default)]
    pub d: Option<T>,
    #[serde(default)]
    pub e: Option<T>,
    pub k: T,
    pub m: T,
    pub alpha: T,
    #[serde(rename = "V0")]
    pub v0: T,
    #[serde(rename = "K0")]
    pub k0: T,
    /// Emission threshold; defaults to `V0`.
    #[serde(rename = "Vm", default)]
    pub vm: Option<T>,
    #[serde(default)]
    pub p: Option<T>,
    #[serde(default)]
    pub biophysical: Option<Biophysical<T>>,
}

impl<T: Scalar> DimensionalParams<T> {
    /// Local inhibition coefficient, given or derived.
    pub fn resolved_d(&self) -> Result<T> {
        match (self.d, self.biophysical) {
            (Some(_), Some(_)) => Err(Error::Config(
                "d given both directly and through the biophysical group".into(),
            )),
            (Some(d), None) => Ok(d),
            (None, Some(bp)) => {
                local_inhibition_coefficient(bp.e_hat / bp.vd, bp.vd, bp.p, bp.diffusion)
            }
            (None, None) => Err(Error::Config(
                "d missing: give it directly or through the biophysical group".into(),
            )),
        }
    }

    /// Systemic sensitivity `e = e_hat / Vd`, given or derived.
    pub fn resolved_e(&self) -> Result<T> {
        match (self.e, self.biophysical) {
            (Some(_), Some(_)) => Err(Error::Config(
                "e given both directly and through the biophysical group".into(),
            )),
            (Some(e), None) => Ok(e),
            (None, Some(bp)) => Ok(bp.e_hat / bp.vd),
            (None, None) => Err(Error::Config(
                "e missing: give it directly or through the biophysical group".into(),
            )),
        }
    }

    /// Inhibitor production rate, if known.
    pub fn resolved_p(&self) -> Result<Option<T>> {
        match (self.p, self.biophysical) {
            (Some(_), Some(_)) => Err(Error::Config(
                "p given both directly and through the biophysical group".into(),
            )),
            (Some(p), None) => Ok(Some(p)),
            (None, Some(bp)) => Ok(Some(bp.p)),
            (None, None) => Ok(None),
        }
    }

    /// Maximal reachable volume `V* = (b/d)^(3/2)`.
    pub fn max_volume(&self) -> Result<T> {
        Ok((self.b / self.resolved_d()?).powf(T::lit(1.5)))
    }

    fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let positive = [
            ("a", self.a),
            ("b", self.b),
            ("k", self.k),
            ("V0", self.v0),
            ("K0", self.k0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > zero) {
                return Err(Error::Config(format!("{name} must be finite and > 0")));
            }
        }
        if let Some(vm) = self.vm {
            if !(vm.is_finite() && vm > zero) {
                return Err(Error::Config("Vm must be finite and > 0".into()));
            }
        }
        if !(self.m.is_finite() && self.m >= zero) {
            return Err(Error::Config("m must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Rescales raw constants by `a` (time), `V*` (volume) and `p` (inhibitor).
///
/// `p` only enters through the inhibitor efficacy, so it may be omitted when
/// `e = 0`.
pub fn nondimensionalize<T: Scalar>(d: &DimensionalParams<T>) -> Result<ModelParams<T>> {
    d.validate()?;
    let local = d.resolved_d()?;
    if !(local.is_finite() && local > T::zero()) {
        return Err(Error::Config("d must be finite and > 0".into()));
    }
    let e = d.resolved_e()?;
    let production = d.resolved_p()?;
    let v_star = d.max_volume()?;
    let e_tilde = if e == T::zero() {
        T::zero()
    } else {
        let p = production.ok_or_else(|| {
            Error::Config("inhibitor production rate p is required when e > 0".into())
        })?;
        e * p * v_star / d.a
    };
    let params = ModelParams {
        b: d.b / d.a,
        e: e_tilde,
        k: d.k / d.a,
        m: d.m / d.a * v_star.powf(d.alpha),
        alpha: d.alpha,
        v0: d.v0 / v_star,
        k0: d.k0 / v_star,
        vm: d.vm.unwrap_or(d.v0) / v_star,
    };
    params.validate()?;
    Ok(params)
}

/// Inverse of [`nondimensionalize`] for given time scale `a`, local
/// inhibition coefficient `d` and production rate `production`.
pub fn redimensionalize<T: Scalar>(
    p: &ModelParams<T>,
    a: T,
    d: T,
    production: T,
) -> DimensionalParams<T> {
    let b = p.b * a;
    let v_star = (b / d).powf(T::lit(1.5));
    DimensionalParams {
        a,
        b,
        d: Some(d),
        e: Some(p.e * a / (production * v_star)),
        k: p.k * a,
        m: p.m * a / v_star.powf(p.alpha),
        alpha: p.alpha,
        v0: p.v0 * v_star,
        k0: p.k0 * v_star,
        vm: Some(p.vm * v_star),
        p: Some(production),
        biophysical: None,
    }
}

/// Local inhibition coefficient obtained by averaging the quasi-steady
/// radial inhibitor profile over a spherical tumor:
/// `d = e Vd p / (15 D^2) (3 / (4 pi))^(2/3)`.
pub fn local_inhibition_coefficient<T: Scalar>(e: T, vd: T, p: T, diffusion: T) -> Result<T> {
    let inputs = [("e", e), ("Vd", vd), ("p", p), ("D", diffusion)];
    if let Some((name, _)) = inputs
        .iter()
        .find(|(_, v)| !(v.is_finite() && *v > T::zero()))
    {
        return Err(Error::Config(format!("{name} must be finite and > 0")));
    }
    let geometric = pow_two_thirds(T::lit(3.0) / (T::lit(4.0) * T::PI()));
    Ok(e * vd * p / (T::lit(15.0) * diffusion * diffusion) * geometric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn base() -> ModelParams<f64> {
        ModelParams::base()
    }

    #[test]
    fn field_examples() {
        let p = base();
        let (dv, _) = growth_field(TumorState::new(0.5, 0.5), 0.0, &p).unwrap();
        assert_eq!(dv, 0.0);

        let (dv, dk) = growth_field(TumorState::new(1.0, 1.0), 0.0, &p).unwrap();
        assert_eq!(dv, 0.0);
        assert_eq!(dk, 0.0);

        let (dv, dk) = growth_field(TumorState::new(0.1, 0.2), 0.0, &p).unwrap();
        assert_relative_eq!(dv, 0.0693147181, epsilon = 1e-9);
        assert_relative_eq!(dk, 0.0569113062, epsilon = 1e-9);
    }

    #[test]
    fn field_rejects_bad_states() {
        let p = base();
        for (v, k, i) in [
            (f64::NAN, 1.0, 0.0),
            (1.0, f64::INFINITY, 0.0),
            (1.0, 1.0, f64::NAN),
            (0.0, 1.0, 0.0),
            (1.0, -1.0, 0.0),
        ] {
            assert!(matches!(
                growth_field(TumorState::new(v, k), i, &p),
                Err(Error::InvalidState(_))
            ));
        }
    }

    #[test]
    fn emission_examples() {
        let p = ModelParams { vm: 0.1, ..base() };
        assert_relative_eq!(emission_rate(1.0, &p), 1.0);
        assert_eq!(emission_rate(0.05, &p), 0.0);
        assert_relative_eq!(emission_rate(0.5, &p), 0.629961, epsilon = 1e-6);
    }

    #[test]
    fn birth_state_examples() {
        assert_eq!(birth_state(&base()), TumorState::new(0.1, 0.2));
        let deep = ModelParams {
            v0: 1e-4,
            k0: 1e-3,
            vm: 1e-4,
            ..base()
        };
        assert_eq!(birth_state(&deep), TumorState::new(1e-4, 1e-3));
    }

    #[test]
    fn validation() {
        assert!(base().validate().is_ok());
        let bad = [
            ModelParams { b: 0.0, ..base() },
            ModelParams { e: -1.0, ..base() },
            ModelParams { k: 0.0, ..base() },
            ModelParams {
                alpha: 1.5,
                ..base()
            },
            ModelParams { k0: 0.1, ..base() },
            ModelParams { vm: -0.1, ..base() },
            ModelParams {
                m: f64::NAN,
                ..base()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    fn dimensional_unit() -> DimensionalParams<f64> {
        DimensionalParams {
            a: 1.0,
            b: 1.0,
            d: Some(1.0),
            e: Some(1.0),
            k: 1.0,
            m: 1.0,
            alpha: 2.0 / 3.0,
            v0: 0.1,
            k0: 0.2,
            vm: None,
            p: Some(1.0),
            biophysical: None,
        }
    }

    #[test]
    fn nondimensionalize_identity_when_scales_are_one() {
        let p = nondimensionalize(&dimensional_unit()).unwrap();
        assert_relative_eq!(p.b, 1.0);
        assert_relative_eq!(p.e, 1.0);
        assert_relative_eq!(p.k, 1.0);
        assert_relative_eq!(p.m, 1.0);
        assert_relative_eq!(p.v0, 0.1);
        assert_relative_eq!(p.k0, 0.2);
        assert_relative_eq!(p.vm, 0.1);
    }

    #[test]
    fn max_volume_example() {
        let d = DimensionalParams {
            b: 5.85,
            d: Some(0.00873),
            ..dimensional_unit()
        };
        assert_relative_eq!(d.max_volume().unwrap(), 17346.5229, max_relative = 1e-8);
    }

    #[test]
    fn nondimensionalize_divides_rates_by_a() {
        let d = DimensionalParams {
            a: 2.0,
            b: 2.0,
            d: Some(2.0),
            e: Some(0.0),
            k: 2.0,
            m: 2.0,
            alpha: 0.0,
            p: None,
            ..dimensional_unit()
        };
        let p = nondimensionalize(&d).unwrap();
        assert_relative_eq!(p.b, 1.0);
        assert_relative_eq!(p.k, 1.0);
        assert_relative_eq!(p.m, 1.0);
        assert_eq!(p.e, 0.0);
    }

    #[test]
    fn missing_production_rate_is_config_error() {
        let d = DimensionalParams {
            p: None,
            ..dimensional_unit()
        };
        assert!(matches!(nondimensionalize(&d), Err(Error::Config(_))));
    }

    #[test]
    fn biophysical_group_builds_d_and_e() {
        let bp = Biophysical {
            e_hat: 2.0,
            vd: 4.0,
            p: 15.0,
            diffusion: 1.0,
        };
        let d = DimensionalParams {
            d: None,
            e: None,
            p: None,
            biophysical: Some(bp),
            ..dimensional_unit()
        };
        let expected_d = local_inhibition_coefficient(0.5, 4.0, 15.0, 1.0).unwrap();
        assert_relative_eq!(d.resolved_d().unwrap(), expected_d);
        assert_relative_eq!(d.resolved_e().unwrap(), 0.5);
        assert_eq!(d.resolved_p().unwrap(), Some(15.0));

        let both = DimensionalParams {
            biophysical: Some(bp),
            ..dimensional_unit()
        };
        assert!(matches!(both.resolved_d(), Err(Error::Config(_))));
    }

    #[test]
    fn local_inhibition_examples() {
        let d = local_inhibition_coefficient(1.0, 1.0, 15.0, 1.0).unwrap();
        assert_relative_eq!(d, 0.3848347316, epsilon = 1e-9);
        let doubled = local_inhibition_coefficient(2.0, 1.0, 15.0, 1.0).unwrap();
        assert_relative_eq!(doubled, 2.0 * d, max_relative = 1e-15);
        let wide = local_inhibition_coefficient(1.0, 1.0, 15.0, 2.0).unwrap();
        assert_relative_eq!(wide, 0.0962086829, epsilon = 1e-9);
        assert!(local_inhibition_coefficient(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(local_inhibition_coefficient(1.0, 1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let p = ModelParams::<f32>::base();
        let (dv, dk) = growth_field(TumorState::new(0.1f32, 0.2), 0.0, &p).unwrap();
        assert!((dv - 0.069315).abs() < 1e-5);
        assert!((dk - 0.0569113).abs() < 1e-5);
    }

    fn any_params() -> impl Strategy<Value = ModelParams<f64>> {
        (
            0.05f64..10.0,
            0.0f64..10.0,
            0.05f64..10.0,
            0.0f64..10.0,
            0.0f64..=1.0,
            1e-4f64..0.5,
            1.01f64..20.0,
        )
            .prop_map(|(b, e, k, m, alpha, v0, ratio)| ModelParams {
                b,
                e,
                k,
                m,
                alpha,
                v0,
                k0: v0 * ratio,
                vm: v0,
            })
    }

    proptest! {
        #[test]
        fn volume_velocity_sign_follows_k_minus_v(
            v in 1e-4f64..10.0, k in 1e-4f64..10.0, i in 0.0f64..10.0, p in any_params()
        ) {
            let (dv, _) = growth_field(TumorState::new(v, k), i, &p).unwrap();
            if v < k { prop_assert!(dv > 0.0); }
            if v > k { prop_assert!(dv < 0.0); }
        }

        #[test]
        fn capacity_velocity_decreases_with_inhibitor(
            v in 1e-4f64..10.0, k in 1e-4f64..10.0, i in 0.0f64..10.0, p in any_params()
        ) {
            prop_assume!(p.e > 0.0);
            let (_, lo) = growth_field(TumorState::new(v, k), i, &p).unwrap();
            let (_, hi) = growth_field(TumorState::new(v, k), i + 1.0, &p).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn capacity_velocity_decreases_with_capacity(
            v in 1e-4f64..10.0, k in 1e-4f64..10.0, i in 0.0f64..10.0, p in any_params()
        ) {
            let (_, lo) = growth_field(TumorState::new(v, k), i, &p).unwrap();
            let (_, hi) = growth_field(TumorState::new(v, k * 1.5), i, &p).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn k_axis_is_repelling(v in 1e-4f64..10.0, p in any_params()) {
            let (_, dk) = growth_field(TumorState::new(v, 1e-300), 1.0, &p).unwrap();
            prop_assert!((dk - p.b * v).abs() <= 1e-12 * p.b * v);
            prop_assert!(dk > 0.0);
        }

        #[test]
        fn newborn_tumors_grow(p in any_params()) {
            let (dv, _) = growth_field(birth_state(&p), 0.0, &p).unwrap();
            prop_assert!(dv > 0.0);
        }

        #[test]
        fn emission_is_monotone_and_homogeneous(
            v in 1e-4f64..10.0, dv in 0.0f64..5.0, c in 0.0f64..10.0, p in any_params()
        ) {
            prop_assert!(emission_rate(v + dv, &p) >= emission_rate(v, &p));
            let scaled = ModelParams { m: c * p.m, ..p };
            let lhs = emission_rate(v, &scaled);
            let rhs = c * emission_rate(v, &p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
        }

        #[test]
        fn nondimensionalize_round_trips(
            a in 0.1f64..10.0, b in 0.1f64..10.0, d in 0.01f64..10.0, e in 0.0f64..5.0,
            k in 0.1f64..10.0, m in 0.0f64..10.0, alpha in 0.0f64..=1.0,
            v0 in 1e-3f64..1.0, ratio in 1.01f64..10.0, prod in 0.1f64..10.0,
        ) {
            let dim = DimensionalParams {
                a, b, d: Some(d), e: Some(e), k, m, alpha,
                v0, k0: v0 * ratio, vm: Some(v0), p: Some(prod), biophysical: None,
            };
            let back = redimensionalize(&nondimensionalize(&dim).unwrap(), a, d, prod);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
            prop_assert!(close(back.a, a) && close(back.b, b) && close(back.k, k));
            prop_assert!(close(back.m, m) && close(back.alpha, alpha));
            prop_assert!(close(back.e.unwrap(), e) && close(back.d.unwrap(), d));
            prop_assert!(close(back.v0, v0) && close(back.k0, v0 * ratio));
            prop_assert!(close(back.vm.unwrap(), v0));
        }
    }
}
