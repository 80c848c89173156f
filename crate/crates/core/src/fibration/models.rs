//! Fibrations used throughout the tests and the CLI defaults.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Kodaira, WeierstrassFibration, MAX_DEG_A, MAX_DEG_B};
use crate::poly::Poly;

/// Seed of the default generic model; its 24 fibers are well separated on
/// the sphere.
pub const DEFAULT_K3_SEED: u64 = 8;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn kostlan(rng: &mut ChaCha8Rng, n: usize) -> Poly {
    Poly::new(
        (0..=n)
            .map(|k| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * (binom(n, k) / 2.0).sqrt()
            })
            .collect(),
    )
}

/// Random K3 model with `SU(2)`-invariant Gaussian coefficients of degrees (8, 12);
/// almost surely it has 24 fibers of type I1.
pub fn generic_k3(seed: u64) -> WeierstrassFibration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = kostlan(&mut rng, MAX_DEG_A);
    let b = kostlan(&mut rng, MAX_DEG_B);
    WeierstrassFibration::new(format!("generic-k3-{seed}"), a, b).expect("nonzero discriminant")
}

pub fn default_generic_k3() -> WeierstrassFibration {
    generic_k3(DEFAULT_K3_SEED)
}

/// A fibration whose fiber at `t = 0` has the given type.
///
/// `I_k` and `I_k*` use the index of `kind`; the remaining fibers are of type
/// I1, and the chart at infinity is generally non-minimal.
pub fn engineered(kind: Kodaira) -> WeierstrassFibration {
    let mono = |k: usize| Poly::monomial(k, Complex64::new(1.0, 0.0));
    let zero = Poly::zero();
    let (a, b) = match kind {
        Kodaira::I(k) => (
            Poly::from_real(&[-3.0]),
            Poly::from_real(&[2.0]).add(&mono(k as usize)),
        ),
        Kodaira::II => (zero, mono(1)),
        Kodaira::III => (mono(1), zero),
        Kodaira::IV => (zero, mono(2)),
        Kodaira::I0Star => (mono(2), mono(3)),
        Kodaira::IStar(k) => (
            Poly::monomial(2, Complex64::new(-3.0, 0.0)),
            Poly::monomial(3, Complex64::new(2.0, 0.0)).add(&mono(3 + k as usize)),
        ),
        Kodaira::IVStar => (zero, mono(4)),
        Kodaira::IIIStar => (mono(3), zero),
        Kodaira::IIStar => (zero, mono(5)),
    };
    WeierstrassFibration::new(format!("engineered-{kind}"), a, b).expect("nonzero discriminant")
}

/// `a = -3`, `b = 1 + t`: two I1 fibers at `t = 1` and `t = -3`.
pub fn two_nodal() -> WeierstrassFibration {
    WeierstrassFibration::from_real("two-nodal", &[-3.0], &[1.0, 1.0]).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibration::{singular_fibers, FiberLocation};

    #[test]
    fn engineered_models_have_the_requested_fiber_at_zero() {
        let kinds = Kodaira::table().into_iter().chain([Kodaira::I(3), Kodaira::IStar(2)]);
        for kind in kinds {
            let w = engineered(kind);
            let scan = singular_fibers(&w).unwrap();
            let at0 = scan
                .records
                .iter()
                .find(|r| matches!(r.location, FiberLocation::Finite(z) if z.norm() < 1e-12))
                .unwrap_or_else(|| panic!("no fiber at 0 for {kind}"));
            assert_eq!(at0.kodaira_type, kind);
        }
    }

    #[test]
    fn generic_model_has_24_simple_fibers() {
        let w = default_generic_k3();
        assert_eq!(w.discriminant().degree(), Some(24));
        let scan = singular_fibers(&w).unwrap();
        assert_eq!(scan.records.len(), 24);
        assert!(scan.issues.is_empty());
        assert!(scan.records.iter().all(|r| r.kodaira_type == Kodaira::I(1)));
        assert_eq!(scan.total_discriminant_order(), 24);
    }
}
