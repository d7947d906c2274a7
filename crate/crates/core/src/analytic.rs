//! Closed-form reference values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labels of a bound state of the complex-shifted Coulomb problem; `q = ±1`
/// is the quasi-parity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumNumbers {
    pub n: u32,
    pub q: i8,
    pub ell: f64,
}

impl QuantumNumbers {
    pub fn new(n: u32, q: i8, ell: f64) -> Result<Self> {
        if q != 1 && q != -1 {
            return Err(Error::InvalidProblem(format!("quasi-parity must be ±1, got {q}")));
        }
        if !ell.is_finite() {
            return Err(Error::InvalidProblem("ell must be finite".into()));
        }
        Ok(Self { n, q, ell })
    }

    /// `2n + 1 − q − 2qℓ`.
    pub fn denominator(&self) -> f64 {
        let q = f64::from(self.q);
        2.0 * f64::from(self.n) + 1.0 - q - 2.0 * q * self.ell
    }

    fn nonzero_denominator(&self) -> Result<f64> {
        let d = self.denominator();
        if d == 0.0 {
            Err(Error::SingularQuantumNumbers)
        } else {
            Ok(d)
        }
    }
}

/// `E = λ² / (2n + 1 − q − 2qℓ)²`.
pub fn pt_coulomb_energy(qn: QuantumNumbers, lambda: f64) -> Result<f64> {
    let d = qn.nonzero_denominator()?;
    Ok(lambda * lambda / (d * d))
}

/// Both charges `±√E·(2n + 1 − q − 2qℓ)` that produce energy `E`, the
/// positive-denominator branch first.
pub fn pt_coulomb_eigencharge(qn: QuantumNumbers, energy: f64) -> Result<(f64, f64)> {
    let d = qn.nonzero_denominator()?;
    if !(energy > 0.0) {
        return Err(Error::NonpositiveEnergy(energy));
    }
    let lambda = energy.sqrt() * d;
    Ok((lambda, -lambda))
}

/// Charges of `−u″ + ℓ(ℓ+1)u/r² + κ²u = λu/r` on the half-line:
/// `λ_n = 2κ(n + ℓ + 1)`.
pub fn hermitian_coulomb_charge(n: u32, ell: f64, kappa: f64) -> Result<f64> {
    if !(ell > -1.0) || !(kappa > 0.0) || !kappa.is_finite() || !ell.is_finite() {
        return Err(Error::InvalidProblem(format!(
            "need ell > -1 and kappa > 0, got ell = {ell}, kappa = {kappa}"
        )));
    }
    Ok(2.0 * kappa * (f64::from(n) + ell + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_examples() {
        let qn = QuantumNumbers::new(0, -1, 0.0).unwrap();
        assert_eq!(qn.denominator(), 2.0);
        assert_eq!(pt_coulomb_energy(qn, 1.0).unwrap(), 0.25);

        let qn = QuantumNumbers::new(2, 1, 0.5).unwrap();
        assert_eq!(qn.denominator(), 3.0);
        assert_eq!(pt_coulomb_energy(qn, 2.0).unwrap(), 4.0 / 9.0);

        let qn = QuantumNumbers::new(0, 1, 0.0).unwrap();
        assert!(matches!(pt_coulomb_energy(qn, 1.0), Err(Error::SingularQuantumNumbers)));
        assert!(matches!(pt_coulomb_eigencharge(qn, 1.0), Err(Error::SingularQuantumNumbers)));
    }

    #[test]
    fn eigencharge_examples() {
        let qn = QuantumNumbers::new(0, -1, 0.0).unwrap();
        assert_eq!(pt_coulomb_eigencharge(qn, 0.25).unwrap(), (1.0, -1.0));
        let qn = QuantumNumbers::new(2, 1, 0.5).unwrap();
        let (p, m) = pt_coulomb_eigencharge(qn, 4.0 / 9.0).unwrap();
        assert!((p - 2.0).abs() < 1e-15 && (m + 2.0).abs() < 1e-15);
        assert!(matches!(
            pt_coulomb_eigencharge(qn, 0.0),
            Err(Error::NonpositiveEnergy(_))
        ));
        assert!(QuantumNumbers::new(0, 0, 0.0).is_err());
    }

    #[test]
    fn hermitian_charges() {
        let l: Vec<f64> = (0..3).map(|n| hermitian_coulomb_charge(n, 0.0, 0.5).unwrap()).collect();
        assert_eq!(l, vec![1.0, 2.0, 3.0]);
        assert_eq!(hermitian_coulomb_charge(0, 1.0, 1.0).unwrap(), 4.0);
        assert!(hermitian_coulomb_charge(0, -1.0, 1.0).is_err());
        assert!(hermitian_coulomb_charge(0, 0.0, 0.0).is_err());
    }

    fn qn_strategy() -> impl Strategy<Value = QuantumNumbers> {
        (0u32..50, prop_oneof![Just(1i8), Just(-1i8)], -5.0f64..5.0)
            .prop_map(|(n, q, ell)| QuantumNumbers { n, q, ell })
            .prop_filter("regular", |qn| qn.denominator().abs() > 1e-6)
    }

    proptest! {
        #[test]
        fn energy_is_even_in_lambda(qn in qn_strategy(), lambda in -20.0f64..20.0) {
            prop_assert_eq!(pt_coulomb_energy(qn, lambda).unwrap(), pt_coulomb_energy(qn, -lambda).unwrap());
        }

        #[test]
        fn energy_invariant_under_parity_and_ell_reflection(qn in qn_strategy(), lambda in -20.0f64..20.0) {
            let mirrored = QuantumNumbers { n: qn.n, q: -qn.q, ell: -qn.ell - 1.0 };
            let (e1, e2) = (pt_coulomb_energy(qn, lambda).unwrap(), pt_coulomb_energy(mirrored, lambda).unwrap());
            prop_assert!((e1 - e2).abs() <= 1e-12 * e1.abs().max(1.0));
        }

        #[test]
        fn inversion_round_trips(qn in qn_strategy(), energy in 1e-6f64..100.0) {
            let (p, m) = pt_coulomb_eigencharge(qn, energy).unwrap();
            for lambda in [p, m] {
                let e = pt_coulomb_energy(qn, lambda).unwrap();
                prop_assert!((e - energy).abs() <= 1e-12 * energy);
            }
        }

        #[test]
        fn charge_is_linear_in_kappa(n in 0u32..20, ell in -0.9f64..5.0, kappa in 0.01f64..10.0, scale in 0.1f64..10.0) {
            let a = hermitian_coulomb_charge(n, ell, scale * kappa).unwrap();
            let b = scale * hermitian_coulomb_charge(n, ell, kappa).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }
}
