//! Exact and Monte Carlo kinetics on explicit continuous-time Markov chains.
//!
//! Everything here is dense; the intended range is a few thousand states at
//! most. These routines serve as the reference for quantities estimated from
//! sampled trajectories elsewhere in the crate.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum CtmcError {
    #[error("rate matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("negative or non-finite rate {rate} at ({from}, {to})")]
    InvalidRate { from: usize, to: usize, rate: f64 },
    #[error("row {row} sums to {sum}, not zero")]
    RowSum { row: usize, sum: f64 },
    #[error("rate {from}->{to} is positive but the reverse rate is zero")]
    AsymmetricSupport { from: usize, to: usize },
    #[error("state {0} has no exits")]
    AbsorbingState(usize),
    #[error("states {0:?} cannot reach the target set")]
    Unreachable(Vec<usize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed rate matrix file: {0}")]
    Format(String),
}

/// CTMC generator: non-negative off-diagonal rates (s⁻¹) and a diagonal that
/// makes every row sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    k: DMatrix<f64>,
}

impl RateMatrix {
    /// Validates a full generator matrix.
    pub fn new(k: DMatrix<f64>) -> Result<Self, CtmcError> {
        if !k.is_square() {
            return Err(CtmcError::NotSquare {
                rows: k.nrows(),
                cols: k.ncols(),
            });
        }
        for i in 0..k.nrows() {
            let mut scale: f64 = 0.0;
            let mut sum = 0.0;
            for j in 0..k.ncols() {
                let r = k[(i, j)];
                if !r.is_finite() || (i != j && r < 0.0) {
                    return Err(CtmcError::InvalidRate {
                        from: i,
                        to: j,
                        rate: r,
                    });
                }
                sum += r;
                scale = scale.max(r.abs());
            }
            if sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(CtmcError::RowSum { row: i, sum });
            }
        }
        Ok(Self { k })
    }

    /// Builds a generator from off-diagonal rates; the diagonal of `rates`
    /// is ignored and recomputed.
    pub fn from_rates(mut rates: DMatrix<f64>) -> Result<Self, CtmcError> {
        if !rates.is_square() {
            return Err(CtmcError::NotSquare {
                rows: rates.nrows(),
                cols: rates.ncols(),
            });
        }
        for i in 0..rates.nrows() {
            rates[(i, i)] = 0.0;
            let exit: f64 = rates.row(i).sum();
            rates[(i, i)] = -exit;
        }
        Self::new(rates)
    }

    pub fn len(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.k[(from, to)]
    }

    /// Total exit rate `-K(x,x)`.
    pub fn exit_rate(&self, x: usize) -> f64 {
        -self.k[(x, x)]
    }

    /// Dense row-major JSON: `{"n": 2, "rates": [...]}`.
    pub fn to_json(&self) -> String {
        let n = self.len();
        let rates: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.k[(i, j)])
            .collect();
        serde_json::to_string(&RateDoc { n, rates }).expect("rate matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CtmcError> {
        let doc: RateDoc =
            serde_json::from_str(text).map_err(|e| CtmcError::Format(e.to_string()))?;
        if doc.rates.len() != doc.n * doc.n {
            return Err(CtmcError::Format(format!(
                "expected {} entries, found {}",
                doc.n * doc.n,
                doc.rates.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(doc.n, doc.n, &doc.rates))
    }

    /// One row per line, comma separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.k.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CtmcError> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|_| CtmcError::Format(format!("bad number {c:?}")))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CtmcError::Format("rows of unequal length".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat))
    }
}

#[derive(Serialize, Deserialize)]
struct RateDoc {
    n: usize,
    rates: Vec<f64>,
}

/// Free energies (kcal/mol) and inverse energy β (mol/kcal).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub energies: Vec<f64>,
    pub beta: f64,
}

impl EnergyModel {
    pub fn new(energies: Vec<f64>, beta: f64) -> Result<Self, CtmcError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(CtmcError::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(CtmcError::InvalidArgument("non-finite energy".into()));
        }
        Ok(Self { energies, beta })
    }
}

/// Gibbs-Boltzmann distribution over the listed states.
pub fn boltzmann(e: &EnergyModel) -> Vec<f64> {
    let min = e.energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e
        .energies
        .iter()
        .map(|&g| (-e.beta * (g - min)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceViolation {
    pub from: usize,
    pub to: usize,
    /// `K(from,to) / K(to,from)`.
    pub ratio: f64,
    /// `exp(-β (ΔG(to) - ΔG(from)))`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BalanceReport {
    pub pairs_checked: usize,
    pub violations: Vec<BalanceViolation>,
}

impl BalanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the rate ratio of every adjacent pair against the Boltzmann factor.
/// A pair passes when `|ratio - expected| <= tol * max(expected, 1)`.
pub fn check_detailed_balance(
    k: &RateMatrix,
    e: &EnergyModel,
    tol: f64,
) -> Result<BalanceReport, CtmcError> {
    let n = k.len();
    if e.energies.len() != n {
        return Err(CtmcError::InvalidArgument(format!(
            "{} energies for {n} states",
            e.energies.len()
        )));
    }
    let mut report = BalanceReport::default();
    for i in 0..n {
        for j in i + 1..n {
            let (fwd, rev) = (k.rate(i, j), k.rate(j, i));
            match (fwd > 0.0, rev > 0.0) {
                (false, false) => continue,
                (true, false) => return Err(CtmcError::AsymmetricSupport { from: i, to: j }),
                (false, true) => return Err(CtmcError::AsymmetricSupport { from: j, to: i }),
                (true, true) => {}
            }
            report.pairs_checked += 1;
            let ratio = fwd / rev;
            let expected = (-e.beta * (e.energies[j] - e.energies[i])).exp();
            if (ratio - expected).abs() > tol * expected.max(1.0) {
                report.violations.push(BalanceViolation {
                    from: i,
                    to: j,
                    ratio,
                    expected,
                });
            }
        }
    }
    Ok(report)
}

/// Embedded jump chain `P(x,x') = K(x,x') / -K(x,x)`. Rows without exits are
/// an error unless `allow_absorbing`, in which case they become self-loops.
pub fn transition_probabilities(
    k: &RateMatrix,
    allow_absorbing: bool,
) -> Result<DMatrix<f64>, CtmcError> {
    let n = k.len();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let exit = k.exit_rate(i);
        if exit <= 0.0 {
            if allow_absorbing {
                p[(i, i)] = 1.0;
                continue;
            }
            return Err(CtmcError::AbsorbingState(i));
        }
        for j in 0..n {
            if j != i {
                p[(i, j)] = k.rate(i, j) / exit;
            }
        }
    }
    Ok(p)
}

/// Transient propagator `Q_t = exp(tK)`.
pub fn propagator(k: &RateMatrix, t: f64) -> DMatrix<f64> {
    assert!(t >= 0.0, "propagator time must be non-negative");
    linalg::expm(&(k.matrix() * t))
}

/// Mean first passage times into `targets`, zero on the targets themselves.
pub fn mfpt(k: &RateMatrix, targets: &[usize]) -> Result<Vec<f64>, CtmcError> {
    let n = k.len();
    if targets.is_empty() {
        return Err(CtmcError::InvalidArgument("empty target set".into()));
    }
    let mut in_target = vec![false; n];
    for &f in targets {
        if f >= n {
            return Err(CtmcError::InvalidArgument(format!("target {f} out of range")));
        }
        in_target[f] = true;
    }

    // backwards search over positive rates
    let mut reaches = in_target.clone();
    let mut queue: VecDeque<usize> = targets.iter().copied().collect();
    while let Some(y) = queue.pop_front() {
        for x in 0..n {
            if !reaches[x] && x != y && k.rate(x, y) > 0.0 {
                reaches[x] = true;
                queue.push_back(x);
            }
        }
    }
    let stuck: Vec<usize> = (0..n).filter(|&x| !reaches[x]).collect();
    if !stuck.is_empty() {
        return Err(CtmcError::Unreachable(stuck));
    }

    let free: Vec<usize> = (0..n).filter(|&x| !in_target[x]).collect();
    let m = free.len();
    let mut tau = vec![0.0; n];
    if m == 0 {
        return Ok(tau);
    }
    let a = DMatrix::from_fn(m, m, |r, c| -k.rate(free[r], free[c]));
    let b = DVector::from_element(m, 1.0);
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| CtmcError::Unreachable(free.clone()))?;
    for (r, &x) in free.iter().enumerate() {
        if !sol[r].is_finite() || sol[r] < 0.0 {
            return Err(CtmcError::Unreachable(vec![x]));
        }
        tau[x] = sol[r];
    }
    Ok(tau)
}

/// Expected passage time from an initial distribution.
pub fn mfpt_from(initial: &[f64], tau: &[f64]) -> f64 {
    initial.iter().zip(tau).map(|(p, t)| p * t).sum()
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub states: Vec<usize>,
    /// Arrival time of each state, seconds.
    pub times: Vec<f64>,
    /// Whether the stop set was reached before `max_steps` transitions.
    pub reached: bool,
}

impl SampledPath {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("paths have at least one step")
    }
}

/// Gillespie direct method. The initial state is drawn from `initial`; the
/// path ends on entering `stop`, after `max_steps` transitions, or in a
/// state without exits. Bit-identical for a fixed seed.
pub fn ssa_sample(
    k: &RateMatrix,
    initial: &[f64],
    stop: &[usize],
    seed: u64,
    max_steps: usize,
) -> SampledPath {
    let n = k.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_stop = vec![false; n];
    for &s in stop {
        is_stop[s] = true;
    }
    let mut x = draw(&mut rng, initial.iter().copied());
    let mut t = 0.0;
    let mut states = vec![x];
    let mut times = vec![0.0];
    for _ in 0..max_steps {
        if is_stop[x] {
            return SampledPath {
                states,
                times,
                reached: true,
            };
        }
        let exit = k.exit_rate(x);
        if exit <= 0.0 {
            break;
        }
        let hold: f64 = Exp1.sample(&mut rng);
        t += hold / exit;
        let row = k.matrix().row(x);
        x = draw(
            &mut rng,
            row.iter()
                .enumerate()
                .map(|(j, &r)| if j == x { 0.0 } else { r }),
        );
        states.push(x);
        times.push(t);
    }
    let reached = is_stop[x];
    SampledPath {
        states,
        times,
        reached,
    }
}

/// Independent runs with seeds `base_seed + run`.
pub fn ssa_batch(
    k: &RateMatrix,
    initial: &[f64],
    stop: &[usize],
    base_seed: u64,
    runs: usize,
    max_steps: usize,
) -> Vec<SampledPath> {
    (0..runs)
        .into_par_iter()
        .map(|r| ssa_sample(k, initial, stop, base_seed.wrapping_add(r as u64), max_steps))
        .collect()
}

fn draw<I>(rng: &mut ChaCha8Rng, weights: I) -> usize
where
    I: Iterator<Item = f64> + Clone,
{
    let total: f64 = weights.clone().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = j;
            if target < acc {
                return j;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn chain3() -> RateMatrix {
        RateMatrix::from_rates(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ))
        .unwrap()
    }

    #[test]
    fn validation() {
        assert!(matches!(
            RateMatrix::new(DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -2.0])),
            Err(CtmcError::RowSum { row: 1, .. })
        ));
        assert!(matches!(
            RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])),
            Err(CtmcError::InvalidRate { from: 0, to: 1, .. })
        ));
        assert!(EnergyModel::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn boltzmann_examples() {
        let p = boltzmann(&EnergyModel::new(vec![1.0, 1.0], 2.0).unwrap());
        assert_eq!(p, vec![0.5, 0.5]);
        let p = boltzmann(&EnergyModel::new(vec![0.0, -LN_2], 1.0).unwrap());
        assert_relative_eq!(p[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(boltzmann(&EnergyModel::new(vec![-7.0], 1.0).unwrap()), vec![1.0]);
        // shifting avoids overflow
        let p = boltzmann(&EnergyModel::new(vec![-2000.0, -2000.0], 1.0).unwrap());
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn detailed_balance_cases() {
        let e = EnergyModel::new(vec![0.0, -LN_2], 1.0).unwrap();
        let ok = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]))
            .unwrap();
        assert!(check_detailed_balance(&ok, &e, 1e-12).unwrap().holds());

        let sym = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]))
            .unwrap();
        let flat = EnergyModel::new(vec![1.0, 1.0], 1.0).unwrap();
        assert!(check_detailed_balance(&sym, &flat, 1e-12).unwrap().holds());

        let bad = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .unwrap();
        let r = check_detailed_balance(&bad, &e, 1e-9).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_relative_eq!(r.violations[0].expected, 2.0, epsilon = 1e-12);

        let one_way = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]))
            .unwrap();
        assert_eq!(
            check_detailed_balance(&one_way, &e, 1e-9),
            Err(CtmcError::AsymmetricSupport { from: 0, to: 1 })
        );
    }

    #[test]
    fn jump_chain() {
        let k = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]))
            .unwrap();
        assert_eq!(transition_probabilities(&k, false).unwrap()[(0, 1)], 1.0);

        let k = RateMatrix::from_rates(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 3.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ))
        .unwrap();
        let p = transition_probabilities(&k, false).unwrap();
        assert_eq!((p[(0, 1)], p[(0, 2)]), (0.25, 0.75));

        let cycle = RateMatrix::from_rates(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let p = transition_probabilities(&cycle, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }

        let absorbing =
            RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            transition_probabilities(&absorbing, false),
            Err(CtmcError::AbsorbingState(1))
        );
        assert_eq!(transition_probabilities(&absorbing, true).unwrap()[(1, 1)], 1.0);
    }

    #[test]
    fn propagator_closed_form() {
        let k = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .unwrap();
        assert_eq!(propagator(&k, 0.0), DMatrix::identity(2, 2));
        let t: f64 = 0.5;
        let e = (-2.0 * t).exp();
        let want = DMatrix::from_row_slice(2, 2, &[1.0 + e, 1.0 - e, 1.0 - e, 1.0 + e]) * 0.5;
        assert_relative_eq!(propagator(&k, t), want, epsilon = 1e-14);
    }

    #[test]
    fn mfpt_examples() {
        let k = RateMatrix::from_rates(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]))
            .unwrap();
        assert_relative_eq!(mfpt(&k, &[1]).unwrap()[0], 0.5, epsilon = 1e-15);

        let tau = mfpt(&chain3(), &[2]).unwrap();
        for (got, want) in tau.iter().zip([3.0, 2.0, 0.0]) {
            assert!((got - want).abs() <= 1e-12, "{tau:?}");
        }
        assert_relative_eq!(mfpt_from(&[0.5, 0.5, 0.0], &tau), 2.5, epsilon = 1e-12);

        let split = RateMatrix::from_rates(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        ))
        .unwrap();
        assert_eq!(mfpt(&split, &[2]), Err(CtmcError::Unreachable(vec![0, 1])));
        assert!(mfpt(&split, &[]).is_err());
    }

    #[test]
    fn ssa_contract() {
        let k = chain3();
        let p = ssa_sample(&k, &[0.0, 0.0, 1.0], &[2], 7, 100);
        assert_eq!(p.states, vec![2]);
        assert_eq!(p.times, vec![0.0]);
        assert!(p.reached);

        let a = ssa_sample(&k, &[1.0, 0.0, 0.0], &[2], 42, 1000);
        let b = ssa_sample(&k, &[1.0, 0.0, 0.0], &[2], 42, 1000);
        assert_eq!(a, b);
        assert!(a.reached);
        assert!(a.times.windows(2).all(|w| w[0] <= w[1]));

        let capped = ssa_sample(&k, &[1.0, 0.0, 0.0], &[2], 42, 1);
        assert!(!capped.reached);
        assert_eq!(capped.states, vec![0, 1]);
    }

    #[test]
    fn matrix_file_formats() {
        let k = chain3();
        assert_eq!(RateMatrix::from_json(&k.to_json()).unwrap(), k);
        assert_eq!(RateMatrix::from_csv(&k.to_csv()).unwrap(), k);
        assert!(RateMatrix::from_json(r#"{"n":2,"rates":[0,0,0]}"#).is_err());
        assert!(RateMatrix::from_csv("0,1\n1\n").is_err());
    }
}
