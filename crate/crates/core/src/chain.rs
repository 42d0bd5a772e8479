//! Chain definitions and external potential profiles.
//!
//! Three classes of one-dimensional chains are supported: clean (homogeneous),
//! disordered with point-like impurities of a single strength, and `X:Y`
//! superlattices. All chains use open boundaries and hopping `t = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition of the chain. Only open chains are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Boundary {
    #[default]
    Open,
}

/// Full problem definition of a spin-balanced Hubbard chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    sites: usize,
    n_up: usize,
    n_down: usize,
    u: f64,
    potential: Vec<f64>,
    boundary: Boundary,
}

impl ChainSpec {
    /// Spin-balanced chain with `per_spin` particles of each spin.
    pub fn new(sites: usize, per_spin: usize, u: f64, potential: Vec<f64>) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidSpec(
                "chain must have at least one site".into(),
            ));
        }
        if per_spin > sites {
            return Err(Error::InvalidSpec(format!(
                "{per_spin} particles per spin do not fit on {sites} sites"
            )));
        }
        if potential.len() != sites {
            return Err(Error::InvalidSpec(format!(
                "potential has {} entries for {sites} sites",
                potential.len()
            )));
        }
        if !u.is_finite() || u < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "interaction must be finite and non-negative, got {u}"
            )));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(
                "potential contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            sites,
            n_up: per_spin,
            n_down: per_spin,
            u,
            potential,
            boundary: Boundary::Open,
        })
    }

    /// Clean chain (all `V_i = 0`).
    pub fn clean(sites: usize, per_spin: usize, u: f64) -> Result<Self> {
        Self::new(sites, per_spin, u, vec![0.0; sites])
    }

    /// Chain whose potential is generated from `potential`.
    pub fn with_potential(
        sites: usize,
        per_spin: usize,
        u: f64,
        potential: &PotentialSpec,
    ) -> Result<Self> {
        Self::new(sites, per_spin, u, build_potential(potential, sites)?)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn particles(&self) -> usize {
        self.n_up + self.n_down
    }

    /// Filling factor `N / L`.
    pub fn filling(&self) -> f64 {
        self.particles() as f64 / self.sites as f64
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Same chain with a different interaction strength.
    pub fn with_u(&self, u: f64) -> Result<Self> {
        Self::new(self.sites, self.n_up, u, self.potential.clone())
    }
}

/// External potential profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Homogeneous,
    /// `round(C L)` randomly placed impurities of strength `strength`.
    Disorder {
        concentration: f64,
        strength: f64,
        seed: u64,
    },
    /// Blocks of `impurity_sites` sites at `strength` followed by `clean_sites` zeros.
    Superlattice {
        impurity_sites: usize,
        clean_sites: usize,
        strength: f64,
    },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Homogeneous => Ok(()),
            PotentialSpec::Disorder {
                concentration,
                strength,
                ..
            } => {
                if !(0.0..=1.0).contains(&concentration) {
                    return Err(Error::InvalidSpec(format!(
                        "impurity concentration {concentration} outside [0, 1]"
                    )));
                }
                if !strength.is_finite() {
                    return Err(Error::InvalidSpec(
                        "impurity strength must be finite".into(),
                    ));
                }
                Ok(())
            }
            PotentialSpec::Superlattice {
                impurity_sites,
                clean_sites,
                strength,
            } => {
                if impurity_sites == 0 || clean_sites == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "superlattice blocks must be non-empty, got {impurity_sites}:{clean_sites}"
                    )));
                }
                if !strength.is_finite() {
                    return Err(Error::InvalidSpec(
                        "superlattice strength must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Number of impurity sites for concentration `c` on `sites` sites,
/// `round(c * sites)` with halves rounded up.
pub fn impurity_count(c: f64, sites: usize) -> usize {
    // Slack absorbs representation error in products such as 0.35 * 10.
    let raw = (c * sites as f64 + 0.5 + 1e-9).floor();
    (raw.max(0.0) as usize).min(sites)
}

/// Site energies `V_i` for a chain of `sites` sites.
///
/// Disorder configurations are drawn with a partial Fisher-Yates shuffle of
/// the site indices driven by a ChaCha8 stream seeded from `seed`, so a seed
/// pins the configuration.
pub fn build_potential(spec: &PotentialSpec, sites: usize) -> Result<Vec<f64>> {
    if sites == 0 {
        return Err(Error::InvalidSpec(
            "chain must have at least one site".into(),
        ));
    }
    spec.validate()?;
    let mut v = vec![0.0; sites];
    match *spec {
        PotentialSpec::Homogeneous => {}
        PotentialSpec::Superlattice {
            impurity_sites,
            clean_sites,
            strength,
        } => {
            let period = impurity_sites + clean_sites;
            for (i, vi) in v.iter_mut().enumerate() {
                if i % period < impurity_sites {
                    *vi = strength;
                }
            }
        }
        PotentialSpec::Disorder {
            concentration,
            strength,
            seed,
        } => {
            let count = impurity_count(concentration, sites);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..sites).collect();
            for i in 0..count {
                let j = rng.random_range(i..sites);
                order.swap(i, j);
            }
            for &site in &order[..count] {
                v[site] = strength;
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn homogeneous_is_zero() {
        let v = build_potential(&PotentialSpec::Homogeneous, 5).unwrap();
        assert_eq!(v, vec![0.0; 5]);
    }

    #[test]
    fn superlattice_two_seven() {
        let spec = PotentialSpec::Superlattice {
            impurity_sites: 2,
            clean_sites: 7,
            strength: 1.0,
        };
        let v = build_potential(&spec, 9).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn superlattice_truncates() {
        let spec = PotentialSpec::Superlattice {
            impurity_sites: 3,
            clean_sites: 2,
            strength: -2.0,
        };
        let v = build_potential(&spec, 7).unwrap();
        assert_eq!(v, vec![-2.0, -2.0, -2.0, 0.0, 0.0, -2.0, -2.0]);
    }

    #[test]
    fn disorder_forty_percent() {
        let spec = PotentialSpec::Disorder {
            concentration: 0.4,
            strength: -3.0,
            seed: 17,
        };
        let v = build_potential(&spec, 100).unwrap();
        assert_eq!(v.iter().filter(|&&x| x == -3.0).count(), 40);
        assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), 60);
        assert_eq!(v, build_potential(&spec, 100).unwrap());
    }

    #[test]
    fn impurity_count_rounding() {
        assert_eq!(impurity_count(0.4, 100), 40);
        assert_eq!(impurity_count(0.0, 100), 0);
        assert_eq!(impurity_count(0.25, 10), 3);
        assert_eq!(impurity_count(0.35, 10), 4);
        assert_eq!(impurity_count(1.0, 7), 7);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            build_potential(&PotentialSpec::Homogeneous, 0),
            Err(Error::InvalidSpec(_))
        ));
        let bad = PotentialSpec::Disorder {
            concentration: 1.2,
            strength: 1.0,
            seed: 0,
        };
        assert!(matches!(
            build_potential(&bad, 10),
            Err(Error::InvalidSpec(_))
        ));
        let bad = PotentialSpec::Superlattice {
            impurity_sites: 0,
            clean_sites: 3,
            strength: 1.0,
        };
        assert!(build_potential(&bad, 10).is_err());
    }

    #[test]
    fn chain_spec_rejects_bad_input() {
        assert!(ChainSpec::clean(4, 5, 1.0).is_err());
        assert!(ChainSpec::clean(4, 2, -1.0).is_err());
        assert!(ChainSpec::new(4, 2, 1.0, vec![0.0; 3]).is_err());
        let spec = ChainSpec::clean(10, 3, 2.0).unwrap();
        assert_eq!(spec.particles(), 6);
        assert!((spec.filling() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn potential_spec_json() {
        let spec: PotentialSpec = serde_json::from_str(
            r#"{"kind":"superlattice","impurity_sites":3,"clean_sites":6,"strength":2.0}"#,
        )
        .unwrap();
        assert_eq!(
            spec,
            PotentialSpec::Superlattice {
                impurity_sites: 3,
                clean_sites: 6,
                strength: 2.0
            }
        );
    }

    proptest! {
        #[test]
        fn disorder_seed_properties(c in 0.0f64..=1.0, sites in 1usize..200, s1: u64, s2: u64, v in -5.0f64..5.0) {
            prop_assume!(v != 0.0);
            let a = PotentialSpec::Disorder { concentration: c, strength: v, seed: s1 };
            let b = PotentialSpec::Disorder { concentration: c, strength: v, seed: s2 };
            let va = build_potential(&a, sites).unwrap();
            let vb = build_potential(&b, sites).unwrap();
            prop_assert_eq!(&va, &build_potential(&a, sites).unwrap());
            let k = impurity_count(c, sites);
            prop_assert_eq!(va.iter().filter(|&&x| x == v).count(), k);
            prop_assert_eq!(vb.iter().filter(|&&x| x == v).count(), k);
            let mean = va.iter().sum::<f64>() / sites as f64;
            prop_assert!((mean - k as f64 * v / sites as f64).abs() <= 1e-12 * v.abs());
        }

        #[test]
        fn superlattice_is_periodic(x in 1usize..6, y in 1usize..6, reps in 1usize..6, v in -4.0f64..4.0) {
            let period = x + y;
            let spec = PotentialSpec::Superlattice { impurity_sites: x, clean_sites: y, strength: v };
            let pot = build_potential(&spec, period * reps).unwrap();
            for i in period..pot.len() {
                prop_assert_eq!(pot[i], pot[i - period]);
            }
        }
    }
}
