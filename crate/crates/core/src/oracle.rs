//! Brute-force validator for the source model.
//!
//! Instead of the closed-form amplitude sum, this module expands the
//! creation-operator polynomial of each n-pair sector symbolically over
//! six labeled modes (four herald detectors plus the two signal modes)
//! and reads squared Fock amplitudes off the collected monomials. All
//! coefficients are exact rationals times a tracked power of 1/√2, so the
//! only floating-point steps are the pair probability, the detector click
//! model, and the final products.
//!
//! The click model is deliberately the shared implementation from
//! [`crate::source`]; the independent derivation targets the amplitude
//! combinatorics, which is where the two paths can disagree.

use crate::source::{
    click_class_prob, pair_number_prob, signal_distributions, signal_distributions_x, FockGrid,
    HeraldClass, HeraldCounts, SignalDistribution, SourceParams,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest pair number the expansion will attempt; monomial counts grow
/// combinatorially beyond it and the acceptance checks never need more.
pub const MAX_ORACLE_PAIRS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle expansion supports n <= {MAX_ORACLE_PAIRS}, got n = {n}")]
    ScaleExceeded { n: usize },
}

/// Exact coefficient r · 2^(−s/2) with rational r and integer s.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    rational: BigRational,
    sqrt2_neg_pow: i64,
}

impl Coefficient {
    fn new(rational: BigRational, sqrt2_neg_pow: i64) -> Self {
        Self {
            rational,
            sqrt2_neg_pow,
        }
    }

    fn one() -> Self {
        Self::new(BigRational::one(), 0)
    }

    fn mul(&self, other: &Self) -> Self {
        Self::new(
            &self.rational * &other.rational,
            self.sqrt2_neg_pow + other.sqrt2_neg_pow,
        )
    }

    fn mul_rational(&self, r: &BigRational) -> Self {
        Self::new(&self.rational * r, self.sqrt2_neg_pow)
    }

    /// Coefficients that meet in one monomial always share the parity of
    /// their √2 exponent, so the sum stays exactly representable.
    fn add_assign(&mut self, other: &Self) {
        let diff = other.sqrt2_neg_pow - self.sqrt2_neg_pow;
        assert!(diff % 2 == 0, "mixed sqrt(2) parity cannot be collected");
        if diff >= 0 {
            // other = r' · 2^(−(s+diff)/2); rescale it onto s.
            let scale = BigRational::new(BigInt::one(), BigInt::from(2).pow(diff as u32 / 2));
            self.rational += &other.rational * scale;
        } else {
            let scale = BigRational::new(BigInt::one(), BigInt::from(2).pow((-diff) as u32 / 2));
            self.rational = &self.rational * scale + &other.rational;
            self.sqrt2_neg_pow = other.sqrt2_neg_pow;
        }
    }

    fn is_zero(&self) -> bool {
        self.rational.is_zero()
    }

    /// |coefficient|² as an exact rational.
    pub fn abs_squared(&self) -> BigRational {
        let sq = &self.rational * &self.rational;
        if self.sqrt2_neg_pow >= 0 {
            sq / BigRational::from(BigInt::from(2).pow(self.sqrt2_neg_pow as u32))
        } else {
            sq * BigRational::from(BigInt::from(2).pow((-self.sqrt2_neg_pow) as u32))
        }
    }

    pub fn to_f64(&self) -> f64 {
        let mag = self.abs_squared().to_f64().unwrap().sqrt();
        if self.rational.is_negative() {
            -mag
        } else {
            mag
        }
    }
}

/// Mode order of the exponent vector: c_H → D₊, c_V → D₋, d_H → D_H,
/// d_V → D_V, then the signal modes b_H, b_V.
pub const MODE_COUNT: usize = 6;
const C_H: usize = 0;
const C_V: usize = 1;
const D_H: usize = 2;
const D_V: usize = 3;
const B_H: usize = 4;
const B_V: usize = 5;

/// One collected term of the expanded creation-operator polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMonomial {
    pub exponents: [u32; MODE_COUNT],
    pub coefficient: Coefficient,
}

type Polynomial = BTreeMap<[u32; MODE_COUNT], Coefficient>;

fn multiply_by_trinomial(poly: &Polynomial, terms: &[(usize, Coefficient)]) -> Polynomial {
    let mut out = Polynomial::new();
    for (exps, coeff) in poly {
        for (mode, factor) in terms {
            let mut e = *exps;
            e[*mode] += 1;
            let contribution = coeff.mul(factor);
            match out.get_mut(&e) {
                Some(existing) => existing.add_assign(&contribution),
                None => {
                    out.insert(e, contribution);
                }
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn factorial_big(n: u32) -> BigInt {
    let mut f = BigInt::one();
    for i in 2..=n {
        f *= BigInt::from(i);
    }
    f
}

/// Expand the heralding polynomial of the (n, m) sector:
/// (½c_H + ½c_V + (1/√2)d_H)^(n−m) · (½c_H − ½c_V + (1/√2)d_V)^m,
/// with the 1/((n−m)! m!) prefactor attached and the signal exponents
/// (b_H: m, b_V: n−m) recorded on every monomial.
pub fn expand_pair_state(n: usize, m: usize) -> Result<Vec<ModeMonomial>, OracleError> {
    if n > MAX_ORACLE_PAIRS {
        return Err(OracleError::ScaleExceeded { n });
    }
    assert!(m <= n, "m = {m} exceeds n = {n}");

    let half = || Coefficient::new(BigRational::one(), 2);
    let neg_half = || Coefficient::new(-BigRational::one(), 2);
    let inv_sqrt2 = || Coefficient::new(BigRational::one(), 1);

    let h_terms = [(C_H, half()), (C_V, half()), (D_H, inv_sqrt2())];
    let v_terms = [(C_H, half()), (C_V, neg_half()), (D_V, inv_sqrt2())];

    let mut poly = Polynomial::new();
    poly.insert([0; MODE_COUNT], Coefficient::one());
    for _ in 0..(n - m) {
        poly = multiply_by_trinomial(&poly, &h_terms);
    }
    for _ in 0..m {
        poly = multiply_by_trinomial(&poly, &v_terms);
    }

    let prefactor = BigRational::new(
        BigInt::one(),
        factorial_big((n - m) as u32) * factorial_big(m as u32),
    );
    Ok(poly
        .into_iter()
        .map(|(mut exponents, coefficient)| {
            exponents[B_H] = m as u32;
            exponents[B_V] = (n - m) as u32;
            ModeMonomial {
                exponents,
                coefficient: coefficient.mul_rational(&prefactor),
            }
        })
        .collect())
}

/// The full n-pair sector as one polynomial: the sum over m of the
/// expanded (n, m) terms, divided by √(n+1) implicitly (the 1/(n+1)
/// factor is applied at squaring time). In the X variant the signal
/// modes are rotated exactly, b_H → (b₊+b₋)/√2 and b_V → (b₊−b₋)/√2,
/// before collection, which keeps inter-sector interference intact.
fn sector_polynomial(n: usize, x_basis: bool) -> Result<Polynomial, OracleError> {
    let mut poly = Polynomial::new();
    for m in 0..=n {
        for mono in expand_pair_state(n, m)? {
            let expanded: Vec<([u32; MODE_COUNT], Coefficient)> = if x_basis {
                rotate_signal_modes(&mono)
            } else {
                vec![(mono.exponents, mono.coefficient)]
            };
            for (exps, coeff) in expanded {
                match poly.get_mut(&exps) {
                    Some(existing) => existing.add_assign(&coeff),
                    None => {
                        poly.insert(exps, coeff);
                    }
                }
            }
        }
    }
    poly.retain(|_, c| !c.is_zero());
    Ok(poly)
}

/// Substitute b_H^a b_V^b with the binomial expansions of the rotated
/// modes; the output exponent slots B_H/B_V then hold (b₊, b₋) counts.
fn rotate_signal_modes(mono: &ModeMonomial) -> Vec<([u32; MODE_COUNT], Coefficient)> {
    let a = mono.exponents[B_H];
    let b = mono.exponents[B_V];
    let mut out = Vec::new();
    for i in 0..=a {
        let c_a = BigRational::from(BigInt::from(crate::mathkit::binomial_exact(
            a as u64, i as u64,
        )));
        for j in 0..=b {
            let mut c = BigRational::from(BigInt::from(crate::mathkit::binomial_exact(
                b as u64, j as u64,
            ))) * &c_a;
            // (b₊ − b₋)^b: the b₋ exponent b − j carries the sign.
            if (b - j) % 2 == 1 {
                c = -c;
            }
            let mut exps = mono.exponents;
            exps[B_H] = i + j;
            exps[B_V] = (a - i) + (b - j);
            let coeff = Coefficient::new(
                mono.coefficient.rational.clone() * c,
                mono.coefficient.sqrt2_neg_pow + (a + b) as i64,
            );
            out.push((exps, coeff));
        }
    }
    out
}

/// Exact squared Fock amplitude of a collected monomial within the n-pair
/// sector: |coeff|² · Π(exponents!) / (n+1).
fn squared_amplitude(mono_exps: &[u32; MODE_COUNT], coeff: &Coefficient, n: usize) -> BigRational {
    let mut value = coeff.abs_squared();
    for &e in mono_exps {
        value *= BigRational::from(factorial_big(e));
    }
    value / BigRational::from(BigInt::from(n as u32 + 1))
}

fn oracle_tables(params: &SourceParams, x_basis: bool) -> Result<Vec<SignalDistribution>, OracleError> {
    let n_cut = params.n_cut();
    if n_cut > MAX_ORACLE_PAIRS {
        return Err(OracleError::ScaleExceeded { n: n_cut });
    }
    let grid = FockGrid::new(n_cut);
    let mut tables = vec![vec![0.0; grid.len()]; 16];

    for n in 0..=n_cut {
        let p_n = pair_number_prob(params, n);
        for (exps, coeff) in sector_polynomial(n, x_basis)? {
            let counts = HeraldCounts::new(exps[C_H], exps[C_V], exps[D_H], exps[D_V]);
            let amp_sq = squared_amplitude(&exps, &coeff, n)
                .to_f64()
                .expect("squared amplitude fits in f64");
            let p_s = p_n * amp_sq;
            let idx = grid.index(exps[B_H] as usize, exps[B_V] as usize);
            for (c, table) in tables.iter_mut().enumerate() {
                let class = HeraldClass::from_index(c).unwrap();
                table[idx] +=
                    p_s * click_class_prob(&counts, class, params.eta_h(), params.dark());
            }
        }
    }

    let tail = params.tail_mass();
    Ok(tables
        .into_iter()
        .zip(HeraldClass::all())
        .map(|(entries, class)| SignalDistribution::from_parts(class, n_cut, entries, tail))
        .collect())
}

/// Z-basis signal distribution of one class, by exact expansion.
pub fn oracle_distribution(
    params: &SourceParams,
    class: HeraldClass,
) -> Result<SignalDistribution, OracleError> {
    Ok(oracle_tables(params, false)?.swap_remove(class.index()))
}

/// X-basis signal distribution of one class, by exact expansion of the
/// rotated signal modes.
pub fn oracle_distribution_x(
    params: &SourceParams,
    class: HeraldClass,
) -> Result<SignalDistribution, OracleError> {
    Ok(oracle_tables(params, true)?.swap_remove(class.index()))
}

/// Σ of squared amplitudes over every Fock outcome of the n-pair sector,
/// as an exact rational. Unitarity of the optics makes this exactly 1.
pub fn sector_norm(n: usize) -> Result<BigRational, OracleError> {
    let mut total = BigRational::zero();
    for (exps, coeff) in sector_polynomial(n, false)? {
        total += squared_amplitude(&exps, &coeff, n);
    }
    Ok(total)
}

/// Largest elementwise discrepancy between the closed-form and oracle
/// tables for one class, in both bases.
#[derive(Debug, Clone, Copy)]
pub struct ClassDiscrepancy {
    pub class: HeraldClass,
    pub max_z: f64,
    pub max_x: f64,
}

/// Compare the production path against the oracle for all 16 classes.
pub fn equivalence_report(params: &SourceParams) -> Result<Vec<ClassDiscrepancy>, OracleError> {
    let z = signal_distributions(params);
    let x = signal_distributions_x(params);
    let oz = oracle_tables(params, false)?;
    let ox = oracle_tables(params, true)?;
    let grid = params.grid();
    let max_diff = |a: &SignalDistribution, b: &SignalDistribution| {
        grid.iter()
            .map(|(m, k)| (a.prob(m, k) - b.prob(m, k)).abs())
            .fold(0.0, f64::max)
    };
    Ok(HeraldClass::all()
        .into_iter()
        .map(|class| {
            let i = class.index();
            ClassDiscrepancy {
                class,
                max_z: max_diff(&z[i], &oz[i]),
                max_x: max_diff(&x[i], &ox[i]),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::Tolerance;

    fn params(lambda: f64, eta_h: f64, dark: f64, n_cut: usize) -> SourceParams {
        let tol = Tolerance::new(1e-12, 1e-9, 9e-4).unwrap();
        SourceParams::with_tolerance(lambda, eta_h, dark, n_cut, tol).unwrap()
    }

    fn rational(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn single_photon_expansion() {
        let monos = expand_pair_state(1, 0).unwrap();
        assert_eq!(monos.len(), 3);
        for mono in &monos {
            assert_eq!(mono.exponents[B_H], 0);
            assert_eq!(mono.exponents[B_V], 1);
            let sq = mono.coefficient.abs_squared();
            if mono.exponents[D_H] == 1 {
                assert_eq!(sq, rational(1, 2));
            } else {
                assert_eq!(sq, rational(1, 4));
            }
        }
    }

    #[test]
    fn pair_expansion_has_nine_raw_terms() {
        // Product of two trinomials; (1,1) keeps all 9 after collection
        // because the factors touch disjoint d modes except on c_H/c_V.
        let monos = expand_pair_state(1, 1).unwrap();
        let raw: u32 = monos
            .iter()
            .map(|m| m.exponents[..4].iter().sum::<u32>())
            .map(|_| 1)
            .sum();
        assert!(raw <= 9);
        // Every coefficient must match the direct two-factor product.
        for mono in &monos {
            assert!(!mono.coefficient.is_zero());
        }
    }

    #[test]
    fn two_pair_expansion_matches_multinomial_theorem() {
        let monos = expand_pair_state(2, 0).unwrap();
        // (x + y + z)^2 / 2! : squared terms carry 1/2, cross terms 1.
        for mono in &monos {
            let sq = mono.coefficient.abs_squared();
            let e = &mono.exponents;
            let expected = match (e[C_H], e[C_V], e[D_H]) {
                (2, 0, 0) | (0, 2, 0) => rational(1, 64),
                (0, 0, 2) => rational(1, 16),
                (1, 1, 0) => rational(1, 16),
                (1, 0, 1) | (0, 1, 1) => rational(1, 8),
                other => panic!("unexpected exponents {other:?}"),
            };
            assert_eq!(sq, expected, "exponents {e:?}");
        }
    }

    #[test]
    fn refuses_oversized_sectors() {
        assert!(matches!(
            expand_pair_state(9, 0),
            Err(OracleError::ScaleExceeded { n: 9 })
        ));
    }

    #[test]
    fn sector_norms_are_exactly_one() {
        for n in 0..=6 {
            assert!(sector_norm(n).unwrap().is_one(), "sector n = {n}");
        }
    }

    #[test]
    fn bell_sector_reproduces_the_entangled_pair() {
        // n = 1: herald H pairs with signal V at squared amplitude 1/4
        // through the Z arm (the 1/2 Bell weight times the 1/2 arm choice).
        let poly = sector_polynomial(1, false).unwrap();
        let key = |c_h, c_v, d_h, d_v, b_h, b_v| [c_h, c_v, d_h, d_v, b_h, b_v];
        let dh = poly.get(&key(0, 0, 1, 0, 0, 1)).unwrap();
        assert_eq!(squared_amplitude(&key(0, 0, 1, 0, 0, 1), dh, 1), rational(1, 4));
        let dv = poly.get(&key(0, 0, 0, 1, 1, 0)).unwrap();
        assert_eq!(squared_amplitude(&key(0, 0, 0, 1, 1, 0), dv, 1), rational(1, 4));
        // X-rotated sector: D₊ pairs with b₊, D₋ with b₋, each at 1/4,
        // and the cross terms cancel exactly.
        let poly = sector_polynomial(1, true).unwrap();
        let plus = poly.get(&key(1, 0, 0, 0, 1, 0)).unwrap();
        assert_eq!(squared_amplitude(&key(1, 0, 0, 0, 1, 0), plus, 1), rational(1, 4));
        assert!(poly.get(&key(1, 0, 0, 0, 0, 1)).is_none());
        let minus = poly.get(&key(0, 1, 0, 0, 0, 1)).unwrap();
        assert_eq!(squared_amplitude(&key(0, 1, 0, 0, 0, 1), minus, 1), rational(1, 4));
        assert!(poly.get(&key(0, 1, 0, 0, 1, 0)).is_none());
    }

    #[test]
    fn oracle_matches_production_path() {
        let p = params(0.05, 0.65, 1e-6, 4);
        let report = equivalence_report(&p).unwrap();
        for d in report {
            assert!(d.max_z <= 1e-9, "class {}: Z discrepancy {}", d.class, d.max_z);
            assert!(d.max_x <= 1e-9, "class {}: X discrepancy {}", d.class, d.max_x);
        }
    }

    #[test]
    fn oracle_partition_of_unity() {
        let p = params(0.05, 0.65, 1e-6, 4);
        let total: f64 = oracle_tables(&p, false)
            .unwrap()
            .iter()
            .map(|d| d.weight())
            .sum::<f64>()
            + p.tail_mass();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
