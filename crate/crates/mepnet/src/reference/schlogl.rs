//! The Schlögl bistable birth-death network: exact stochastic simulation
//! and a truncated master-equation oracle.
//!
//! One species with combinatorial propensities
//! `a₁ = k₁′n(n−1)`, `a₂ = k₂n(n−1)(n−2)`, `a₃ = k₃′`, `a₄ = k₄n` and
//! state changes `+1, −1, +1, −1`; `k₁′ = k₁[A]` and `k₃′ = k₃[B]` fold
//! the buffered species into pseudo rate constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ProbabilityField, SampleHistogram};
use crate::grid::Grid;
use crate::numerics::rk45_integrate;

/// Fully parameterized Schlögl system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchloglSpec {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Buffered molecule counts [A] and [B].
    pub a_count: f64,
    pub b_count: f64,
    pub x0: u64,
    pub horizon: f64,
    /// State-space truncation for the master-equation oracle and a safety
    /// bound for trajectories.
    pub n_max: u64,
}

impl Default for SchloglSpec {
    fn default() -> Self {
        Self {
            k1: 1.5e-7,
            k2: 1.0e-4 / 6.0,
            k3: 1.0e-3,
            k4: 3.5,
            a_count: 1.0e5,
            b_count: 2.0e5,
            x0: 250,
            horizon: 5.0,
            n_max: 800,
        }
    }
}

impl SchloglSpec {
    /// Pseudo rate `k₁′ = k₁[A]`.
    pub fn k1_prime(&self) -> f64 {
        self.k1 * self.a_count
    }

    /// Pseudo rate `k₃′ = k₃[B]`.
    pub fn k3_prime(&self) -> f64 {
        self.k3 * self.b_count
    }

    /// Birth propensity `a₁ + a₃` at state `n`.
    pub fn birth_rate(&self, n: f64) -> f64 {
        self.k1_prime() * n * (n - 1.0).max(0.0) + self.k3_prime()
    }

    /// Death propensity `a₂ + a₄` at state `n`.
    pub fn death_rate(&self, n: f64) -> f64 {
        self.k2 * n * (n - 1.0).max(0.0) * (n - 2.0).max(0.0) + self.k4 * n
    }
}

fn simulate_one(
    spec: &SchloglSpec,
    snapshot_times: &[f64],
    mut rng: ChaCha8Rng,
) -> Result<Vec<u64>> {
    let mut state = spec.x0;
    let mut t = 0.0;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut next_snapshot = 0;
    loop {
        let n = state as f64;
        let a1 = spec.k1_prime() * n * (n - 1.0).max(0.0);
        let a2 = spec.k2 * n * (n - 1.0).max(0.0) * (n - 2.0).max(0.0);
        let a3 = spec.k3_prime();
        let a4 = spec.k4 * n;
        let total = a1 + a2 + a3 + a4;
        let (tau, reaction) = if total > 0.0 {
            let u: f64 = rng.gen::<f64>();
            let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
            let tau = -u.ln() / total;
            let pick = rng.gen::<f64>() * total;
            let reaction = if pick < a1 {
                0
            } else if pick < a1 + a2 {
                1
            } else if pick < a1 + a2 + a3 {
                2
            } else {
                3
            };
            (tau, Some(reaction))
        } else {
            (f64::INFINITY, None)
        };
        // Record every snapshot the next jump passes over.
        while next_snapshot < snapshot_times.len() && t + tau >= snapshot_times[next_snapshot] {
            snapshots.push(state);
            next_snapshot += 1;
        }
        if next_snapshot >= snapshot_times.len() {
            return Ok(snapshots);
        }
        let Some(reaction) = reaction else {
            continue; // absorbing state: remaining snapshots flushed above
        };
        t += tau;
        state = match reaction {
            0 | 2 => state + 1,
            _ => state.saturating_sub(1),
        };
        if state >= spec.n_max {
            return Err(Error::TruncationReached {
                state,
                n_max: spec.n_max,
            });
        }
    }
}

/// Run independent trajectories of the exact stochastic simulation and
/// histogram the states at the requested snapshot times.
///
/// Every trajectory draws from its own counter-indexed stream of one
/// seeded generator, so results are reproducible regardless of how the
/// parallel scheduler interleaves them.
pub fn gillespie_simulate(
    spec: &SchloglSpec,
    n_trajectories: u64,
    snapshot_times: &[f64],
    seed: u64,
) -> Result<SampleHistogram> {
    if n_trajectories == 0 {
        return Err(Error::InvalidConfig("need at least one trajectory".into()));
    }
    let per_trajectory: Vec<Vec<u64>> = (0..n_trajectories)
        .into_par_iter()
        .map(|traj| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(traj);
            simulate_one(spec, snapshot_times, rng)
        })
        .collect::<Result<_>>()?;

    let n_states = spec.n_max as usize + 1;
    let mut counts = vec![vec![0u64; n_states]; snapshot_times.len()];
    for states in &per_trajectory {
        for (k, &s) in states.iter().enumerate() {
            counts[k][s as usize] += 1;
        }
    }
    SampleHistogram::new(
        (0..=spec.n_max).map(|s| s as f64).collect(),
        snapshot_times.to_vec(),
        counts,
        n_trajectories,
    )
}

/// Re-bin a histogram into contiguous bins of `width` states, labeling
/// each bin by its center.
pub fn rebin_histogram(hist: &SampleHistogram, width: usize) -> Result<SampleHistogram> {
    if width == 0 {
        return Err(Error::InvalidConfig("bin width must be positive".into()));
    }
    let n_bins = hist.states.len().div_ceil(width);
    let states: Vec<f64> = (0..n_bins)
        .map(|b| {
            let lo = b * width;
            let hi = (lo + width - 1).min(hist.states.len() - 1);
            0.5 * (hist.states[lo] + hist.states[hi])
        })
        .collect();
    let counts: Vec<Vec<u64>> = hist
        .counts
        .iter()
        .map(|row| {
            (0..n_bins)
                .map(|b| {
                    row[b * width..((b + 1) * width).min(row.len())]
                        .iter()
                        .sum()
                })
                .collect()
        })
        .collect();
    SampleHistogram::new(states, hist.times.clone(), counts, hist.total_trajectories)
}

/// Integrate the truncated master equation from a point mass at `x0` and
/// return the state distribution at each requested time.
///
/// Birth out of the top state is suppressed so total probability is
/// conserved; if more than `1e-10` of the mass ever reaches the boundary
/// the truncation is too small and an error is returned.
pub fn cme_ode_oracle(
    spec: &SchloglSpec,
    n_max: u64,
    times: &[f64],
) -> Result<Vec<ProbabilityField>> {
    let n_states = n_max as usize + 1;
    if spec.x0 > n_max {
        return Err(Error::TruncationReached {
            state: spec.x0,
            n_max,
        });
    }
    let births: Vec<f64> = (0..n_states)
        .map(|n| {
            if n == n_states - 1 {
                0.0
            } else {
                spec.birth_rate(n as f64)
            }
        })
        .collect();
    let deaths: Vec<f64> = (0..n_states).map(|n| spec.death_rate(n as f64)).collect();

    let mut p0 = vec![0.0; n_states];
    p0[spec.x0 as usize] = 1.0;

    let rhs = |_t: f64, p: &[f64], dp: &mut [f64]| {
        for n in 0..n_states {
            let mut acc = -(births[n] + deaths[n]) * p[n];
            if n > 0 {
                acc += births[n - 1] * p[n - 1];
            }
            if n + 1 < n_states {
                acc += deaths[n + 1] * p[n + 1];
            }
            dp[n] = acc;
        }
    };

    let inspect = |_t: f64, p: &[f64]| -> Result<()> {
        let boundary = p[n_states - 1];
        if boundary > 1e-10 {
            return Err(Error::BoundaryLeak { leak: boundary });
        }
        Ok(())
    };

    let solutions = rk45_integrate(rhs, 0.0, &p0, times, 1e-8, 1e-12, inspect)?;
    let grid = Grid::line(0.0, n_max as f64, n_states)?;
    solutions
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::Other(format!(
                    "master equation lost probability: sum {sum} at output {k}"
                )));
            }
            // Clip integration noise slightly below zero.
            let clipped: Vec<f64> = p.iter().map(|&v| v.max(0.0)).collect();
            Ok(ProbabilityField::new(grid.clone(), clipped)?)
        })
        .collect()
}

/// Mean state of a distribution over integer states.
pub fn distribution_mean(p: &ProbabilityField) -> f64 {
    let grid = p.grid();
    p.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * grid.node(i)[0])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pure_birth_spec(rate: f64) -> SchloglSpec {
        SchloglSpec {
            k1: 0.0,
            k2: 0.0,
            k3: rate,
            k4: 0.0,
            a_count: 1.0,
            b_count: 1.0,
            x0: 250,
            horizon: 5.0,
            n_max: 800,
        }
    }

    fn pure_death_spec(rate: f64) -> SchloglSpec {
        SchloglSpec {
            k1: 0.0,
            k2: 0.0,
            k3: 0.0,
            k4: rate,
            a_count: 1.0,
            b_count: 1.0,
            x0: 250,
            horizon: 5.0,
            n_max: 800,
        }
    }

    #[test]
    fn pure_birth_matches_poisson_mean() {
        // Only k₃′ active: a Poisson process, mean X(0) + k₃′t.
        let spec = pure_birth_spec(20.0);
        let hist = gillespie_simulate(&spec, 4000, &[2.0], 11).unwrap();
        let mean = hist.mean(0);
        let se = hist.mean_standard_error(0);
        let expected = 250.0 + 20.0 * 2.0;
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn pure_death_matches_exponential_decay() {
        let spec = pure_death_spec(0.5);
        let hist = gillespie_simulate(&spec, 4000, &[1.0, 3.0], 13).unwrap();
        for (k, &t) in [1.0, 3.0].iter().enumerate() {
            let mean = hist.mean(k);
            let se = hist.mean_standard_error(k);
            let expected = 250.0 * (-0.5f64 * t).exp();
            assert!(
                (mean - expected).abs() < 3.0 * se,
                "t = {t}: mean {mean} vs {expected} (se {se})"
            );
        }
    }

    #[test]
    fn trajectories_reproducible_and_stream_indexed() {
        let spec = SchloglSpec::default();
        let a = gillespie_simulate(&spec, 200, &[0.5], 42).unwrap();
        let b = gillespie_simulate(&spec, 200, &[0.5], 42).unwrap();
        assert_eq!(a.counts, b.counts);
        let c = gillespie_simulate(&spec, 200, &[0.5], 43).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn full_spec_is_bimodal_at_horizon() {
        let spec = SchloglSpec::default();
        let hist = gillespie_simulate(&spec, 20_000, &[5.0], 7).unwrap();
        let binned = rebin_histogram(&hist, 10).unwrap();
        let masses = binned.masses(0);
        // Find local maxima over the binned axis.
        let mut maxima = Vec::new();
        for i in 1..masses.len() - 1 {
            if masses[i] > masses[i - 1] && masses[i] >= masses[i + 1] && masses[i] > 0.005 {
                maxima.push(binned.states[i]);
            }
        }
        assert!(
            maxima.len() >= 2,
            "expected a bimodal histogram, maxima at {maxima:?}"
        );
        let spread = maxima.iter().cloned().fold(f64::MIN, f64::max)
            - maxima.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread >= 50.0, "modes too close: {maxima:?}");
    }

    #[test]
    fn cme_starts_at_point_mass_and_conserves() {
        let spec = SchloglSpec::default();
        let fields = cme_ode_oracle(&spec, 900, &[0.0, 0.1]).unwrap();
        let p0 = &fields[0];
        assert_eq!(p0.values()[250], 1.0);
        for f in &fields {
            let sum: f64 = f.values().iter().sum();
            assert!((sum - 1.0).abs() < 1e-8);
            assert!(f.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn cme_mean_tracks_ssa_mean() {
        let spec = SchloglSpec::default();
        let times = [0.1, 2.6, 5.0];
        let hist = gillespie_simulate(&spec, 20_000, &times, 99).unwrap();
        let fields = cme_ode_oracle(&spec, 900, &times).unwrap();
        for k in 0..times.len() {
            let ssa_mean = hist.mean(k);
            let se = hist.mean_standard_error(k);
            let cme_mean = distribution_mean(&fields[k]);
            assert!(
                (ssa_mean - cme_mean).abs() < 3.0 * se,
                "t = {}: SSA {ssa_mean} vs CME {cme_mean} (se {se})",
                times[k]
            );
        }
    }

    #[test]
    fn standard_error_shrinks_with_more_trajectories() {
        let spec = SchloglSpec::default();
        let small = gillespie_simulate(&spec, 2000, &[1.0], 5).unwrap();
        let large = gillespie_simulate(&spec, 8000, &[1.0], 5).unwrap();
        let ratio = large.mean_standard_error(0) / small.mean_standard_error(0);
        // Quadrupling the sample should halve the standard error.
        assert!(
            (0.35..0.7).contains(&ratio),
            "SE ratio {ratio}, expected ≈ 0.5"
        );
    }

    #[test]
    fn truncation_error_reported() {
        let mut spec = SchloglSpec::default();
        spec.n_max = 260;
        let result = gillespie_simulate(&spec, 50, &[5.0], 1);
        assert!(matches!(result, Err(Error::TruncationReached { .. })));
    }
}
