//! Feature families with matched sizes for reconstruction comparisons.
//!
//! Every family delivers the same number of observables so differences in
//! reconstruction quality come from the basis, not its size. The binomial
//! family is bounded by construction; the others are built from bounded
//! representatives of their kind on the unit interval (decaying
//! exponentials, shifted logarithms and reciprocals, a Fourier ladder,
//! fractional powers).

use crate::error::{Error, Result};
use crate::features::{FeatureLibrary, FeatureSpec, TrigWave};

/// The comparison families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Binomial,
    Polynomial,
    Exponential,
    Logarithmic,
    Trigonometric,
    SquareRoot,
    Reciprocal,
}

impl FamilyKind {
    pub fn all() -> [FamilyKind; 7] {
        [
            FamilyKind::Binomial,
            FamilyKind::Polynomial,
            FamilyKind::Exponential,
            FamilyKind::Logarithmic,
            FamilyKind::Trigonometric,
            FamilyKind::SquareRoot,
            FamilyKind::Reciprocal,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Binomial => "binomial",
            FamilyKind::Polynomial => "polynomial",
            FamilyKind::Exponential => "exponential",
            FamilyKind::Logarithmic => "logarithmic",
            FamilyKind::Trigonometric => "trigonometric",
            FamilyKind::SquareRoot => "square-root",
            FamilyKind::Reciprocal => "reciprocal",
        }
    }
}

/// Build a 1-d library of `count` features of the given family.
pub fn family_library(kind: FamilyKind, count: usize) -> Result<FeatureLibrary> {
    if count < 2 {
        return Err(Error::InvalidFeature(format!(
            "family needs at least 2 features, got {count}"
        )));
    }
    let constant = FeatureSpec::Polynomial { powers: vec![0] };
    let specs: Vec<FeatureSpec> = match kind {
        FamilyKind::Binomial => {
            return Ok(FeatureLibrary::binomial(count as u32 - 1, 1));
        }
        FamilyKind::Polynomial => (0..count as u32)
            .map(|p| FeatureSpec::Polynomial { powers: vec![p] })
            .collect(),
        FamilyKind::Exponential => (0..count)
            .map(|i| FeatureSpec::Exponential {
                rates: vec![i as f64],
            })
            .collect(),
        FamilyKind::Logarithmic => std::iter::once(constant)
            .chain((1..count).map(|i| FeatureSpec::Logarithmic {
                scales: vec![i as f64],
            }))
            .collect(),
        FamilyKind::Trigonometric => std::iter::once(constant)
            .chain((1..count).map(|i| {
                let freq = i.div_ceil(2) as f64;
                let wave = if i % 2 == 1 { TrigWave::Sin } else { TrigWave::Cos };
                FeatureSpec::Trigonometric {
                    waves: vec![(wave, freq)],
                }
            }))
            .collect(),
        FamilyKind::SquareRoot => (0..count as u32)
            .map(|h| FeatureSpec::SquareRoot {
                half_powers: vec![h],
            })
            .collect(),
        FamilyKind::Reciprocal => std::iter::once(constant)
            .chain((1..count).map(|i| FeatureSpec::Reciprocal {
                scales: vec![i as f64],
            }))
            .collect(),
    };
    FeatureLibrary::new(specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn all_families_have_matched_size() {
        for kind in FamilyKind::all() {
            let lib = family_library(kind, 21).unwrap();
            assert_eq!(lib.len(), 21, "{} family size", kind.name());
        }
    }

    #[test]
    fn all_families_evaluate_on_unit_interval() {
        let grid = Grid::unit_line(101);
        for kind in FamilyKind::all() {
            let lib = family_library(kind, 21).unwrap();
            let m = crate::features::eval_library(&lib, &grid).unwrap();
            assert!(
                m.values().iter().all(|v| v.is_finite()),
                "{} family produced non-finite values",
                kind.name()
            );
        }
    }
}
