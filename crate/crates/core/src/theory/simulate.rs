//! Teacher and student accuracies of the linearized model under label noise,
//! from the large-sample case formulas or from sampled finite instances.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::argmax;
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;

use super::closed_form::{balanced_labels, build_similarity, closed_form_predictions, TargetMatrix};
use super::linalg::Matrix;
use super::noise::{condition_top1, condition_top2, NoiseMatrix};
use super::params::TheoryParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Trained on the noisy labels directly.
    Teacher,
    /// Trained on the teacher's argmax.
    Top1,
    /// Trained on half mass at each of the teacher's two largest entries.
    Top2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Teacher, Mode::Top1, Mode::Top2];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub accuracy: f64,
    /// Cells where choosing the teacher's top-k needed a tie-break.
    pub ambiguous_cells: usize,
}

/// Entries within this relative gap of the maximum count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// `Some(k)` iff `k` beats every other entry by more than the tie tolerance.
fn strict_argmax<T: Scalar>(p: &[T]) -> Option<usize> {
    let k = argmax(p);
    let tol = T::of(TIE_TOLERANCE) * p[k].abs().max(T::one());
    p.iter().enumerate().all(|(i, &x)| i == k || p[k] - x > tol).then_some(k)
}

/// Indices of the `k` largest entries, lowest index first among equals, and
/// whether a tie straddled the cut.
fn top_k<T: Scalar>(p: &[T], k: usize) -> (Vec<usize>, bool) {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let tied = k < p.len() && (p[idx[k - 1]] - p[idx[k]]).abs() <= T::of(TIE_TOLERANCE);
    idx.truncate(k);
    (idx, tied)
}

fn spread<T: Scalar>(labels: &[usize], c: usize) -> Vec<T> {
    let w = T::one() / T::of_usize(labels.len());
    let mut q = vec![T::zero(); c];
    for &l in labels {
        q[l] += w;
    }
    q
}

fn top_k_target<T: Scalar>(p: &[T], mode: Mode) -> (Vec<T>, bool) {
    let k = if mode == Mode::Top2 { 2 } else { 1 };
    let (idx, tied) = top_k(p, k);
    (spread(&idx, p.len()), tied)
}

/// `θ q + (φ-θ) m + (1-φ)/C`.
fn combine<T: Scalar>(q: &[T], class_mean: &[T], theta: T, phi: T) -> Vec<T> {
    let u = T::one() / T::of_usize(q.len());
    q.iter().zip(class_mean).map(|(&a, &b)| theta * a + (phi - theta) * b + (T::one() - phi) * u).collect()
}

/// Large-sample accuracy: the class-mean target of class `y` is replaced by its
/// expectation under `R`, and each (true, observed) cell is weighted by
/// `R[y][ỹ]/C`. Ties at the argmax count as errors.
pub fn simulate_infinite<T: Scalar>(params: &TheoryParams<T>, r: &NoiseMatrix<T>, mode: Mode) -> Result<Simulation> {
    params.validate()?;
    let c = r.num_classes();
    if c != params.num_classes {
        return Err(Error::DimensionMismatch { expected: params.num_classes, got: c });
    }
    let s = params.shrinkage();
    let (theta, phi) = (s.theta, s.phi);
    let mut correct = T::zero();
    let (mut any_right, mut any_wrong) = (false, false);
    let mut ambiguous = 0;
    for y in 0..c {
        let noise_row = r.row(y);
        let teacher: Vec<Vec<T>> = (0..c).map(|obs| combine(&spread(&[obs], c), noise_row, theta, phi)).collect();
        let preds: Vec<Vec<T>> = if mode == Mode::Teacher {
            teacher
        } else {
            let mut targets = Vec::with_capacity(c);
            for (obs, p) in teacher.iter().enumerate() {
                let (q, tied) = top_k_target(p, mode);
                if tied && noise_row[obs] > T::zero() {
                    ambiguous += 1;
                }
                targets.push(q);
            }
            let mut class_mean = vec![T::zero(); c];
            for (obs, q) in targets.iter().enumerate() {
                for k in 0..c {
                    class_mean[k] += noise_row[obs] * q[k];
                }
            }
            targets.iter().map(|q| combine(q, &class_mean, theta, phi)).collect()
        };
        for (obs, p) in preds.iter().enumerate().filter(|(obs, _)| noise_row[*obs] > T::zero()) {
            if strict_argmax(p) == Some(y) {
                correct += noise_row[obs];
                any_right = true;
            } else {
                any_wrong = true;
            }
        }
    }
    // Exact endpoints; the row sums only reach 1 up to rounding.
    let accuracy = match (any_right, any_wrong) {
        (true, false) => 1.0,
        (false, _) => 0.0,
        _ => (correct / T::of_usize(c)).as_f64(),
    };
    Ok(Simulation { accuracy, ambiguous_cells: ambiguous })
}

/// Sampled accuracy on `params.num_samples` points with balanced true labels:
/// noisy labels are drawn from `R`, the teacher is fitted in closed form on
/// them, and students are fitted on the teacher's top-1 or top-2 columns.
/// Argmax ties resolve to the lowest index.
pub fn simulate_finite<T: Scalar>(
    params: &TheoryParams<T>,
    r: &NoiseMatrix<T>,
    mode: Mode,
    seed: u64,
) -> Result<Simulation> {
    params.validate()?;
    let c = r.num_classes();
    if c != params.num_classes {
        return Err(Error::DimensionMismatch { expected: params.num_classes, got: c });
    }
    if params.num_samples > 2000 {
        return Err(Error::InvalidArgument(format!("{} samples exceeds the dense limit of 2000", params.num_samples)));
    }
    let labels = balanced_labels(params.num_samples, c);
    let mut rng = stream(seed, Stream::Theory);
    let observed: Vec<usize> = labels
        .iter()
        .map(|&y| {
            let u = T::of(rng.random::<f64>());
            let mut acc = T::zero();
            for k in 0..c {
                acc += r.get(y, k);
                if u < acc {
                    return k;
                }
            }
            // Rounding left u above the cumulative sum: last class with mass.
            (0..c).rev().find(|&k| r.get(y, k) > T::zero()).unwrap_or(c - 1)
        })
        .collect();
    let s = build_similarity(&labels, params.intra, params.inter);
    let teacher = closed_form_predictions(&TargetMatrix::one_hot(&observed, c)?, &s, params.lambda)?;
    let mut ambiguous = 0;
    let preds: Matrix<T> = match mode {
        Mode::Teacher => teacher,
        Mode::Top1 | Mode::Top2 => {
            let mut q = Matrix::zeros(c, labels.len());
            for j in 0..labels.len() {
                let (col, tied) = top_k_target(&teacher.column(j), mode);
                ambiguous += usize::from(tied);
                for k in 0..c {
                    q[(k, j)] = col[k];
                }
            }
            closed_form_predictions(&TargetMatrix::from_matrix(q)?, &s, params.lambda)?
        }
    };
    let hits = (0..labels.len()).filter(|&j| argmax(&preds.column(j)) == labels[j]).count();
    Ok(Simulation { accuracy: hits as f64 / labels.len() as f64, ambiguous_cells: ambiguous })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Mean off-diagonal noise mass; `ρ` for symmetric noise.
    pub rho: f64,
    pub teacher_acc: f64,
    pub top1_acc: f64,
    pub top2_acc: f64,
    pub cond_top1: bool,
    pub cond_top2: bool,
}

pub const SWEEP_CSV_HEADER: &str = "rho,teacher_acc,top1_acc,top2_acc,cond_top1,cond_top2";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        let flag = |b: bool| if b { "PASS" } else { "FAIL" };
        format!(
            "{:.4},{:.6},{:.6},{:.6},{},{}",
            self.rho,
            self.teacher_acc,
            self.top1_acc,
            self.top2_acc,
            flag(self.cond_top1),
            flag(self.cond_top2)
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn symmetric_grid<T: Scalar>(num_classes: usize, rhos: &[T]) -> Result<Vec<NoiseMatrix<T>>> {
    rhos.iter().map(|&rho| NoiseMatrix::symmetric(num_classes, rho)).collect()
}

/// Large-sample accuracies and both conditions at every grid point, in grid order.
pub fn phase_sweep<T: Scalar>(params: &TheoryParams<T>, grid: &[NoiseMatrix<T>]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("noise grid"));
    }
    let s = params.shrinkage();
    grid.par_iter()
        .map(|r| {
            Ok(SweepRow {
                rho: r.noise_rate().as_f64(),
                teacher_acc: simulate_infinite(params, r, Mode::Teacher)?.accuracy,
                top1_acc: simulate_infinite(params, r, Mode::Top1)?.accuracy,
                top2_acc: simulate_infinite(params, r, Mode::Top2)?.accuracy,
                cond_top1: condition_top1(r, s.theta, s.phi).pass,
                cond_top2: condition_top2(r).pass,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> TheoryParams<f64> {
        TheoryParams::new(2, 100, 0.8, 0.2, 0.01).unwrap()
    }

    #[test]
    fn single_label_modes_are_perfect_without_noise() {
        let r = NoiseMatrix::identity(2).unwrap();
        for mode in [Mode::Teacher, Mode::Top1] {
            assert_eq!(simulate_infinite(&params(), &r, mode).unwrap().accuracy, 1.0);
        }
    }

    #[test]
    fn top1_fails_inside_the_band() {
        let r = NoiseMatrix::symmetric(2, 0.48).unwrap();
        let p = params();
        assert!(simulate_infinite(&p, &r, Mode::Teacher).unwrap().accuracy < 1.0);
        assert!(simulate_infinite(&p, &r, Mode::Top1).unwrap().accuracy < 1.0);
    }

    #[test]
    fn two_class_top2_target_is_uninformative() {
        // Both classes always land in a two-class top-2 set, so every target is
        // [0.5, 0.5] and the student cannot separate them.
        for rho in [0.0, 0.2, 0.48] {
            let r = NoiseMatrix::symmetric(2, rho).unwrap();
            assert_eq!(simulate_infinite(&params(), &r, Mode::Top2).unwrap().accuracy, 0.0);
        }
    }

    #[test]
    fn top2_tolerates_more_noise_with_more_classes() {
        let p = TheoryParams::new(4, 120, 0.8, 0.2, 0.01).unwrap();
        // Single-label band ends at ρ ≈ 0.71, top-2 at 0.75.
        let r = NoiseMatrix::symmetric(4, 0.73).unwrap();
        assert!(!condition_top1(&r, p.theta(), p.phi()).pass);
        assert!(condition_top2(&r).pass);
        assert_eq!(simulate_infinite(&p, &r, Mode::Top2).unwrap().accuracy, 1.0);
        assert!(simulate_infinite(&p, &r, Mode::Top1).unwrap().accuracy < 1.0);
    }

    #[test]
    fn finite_is_deterministic() {
        let r = NoiseMatrix::symmetric(2, 0.2).unwrap();
        let a = simulate_finite(&params(), &r, Mode::Top1, 3).unwrap();
        let b = simulate_finite(&params(), &r, Mode::Top1, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_of_zero_is_one_row() {
        let grid = symmetric_grid(2, &[0.0]).unwrap();
        let rows = phase_sweep(&params(), &grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].cond_top1 && rows[0].cond_top2);
        assert_eq!(rows[0].teacher_acc, 1.0);
        assert!(sweep_csv(&rows).starts_with(SWEEP_CSV_HEADER));
        assert!(phase_sweep(&params(), &[]).is_err());
    }

    #[test]
    fn top_k_breaks_ties_low() {
        assert_eq!(top_k(&[0.2, 0.4, 0.4], 1), (vec![1], true));
        assert_eq!(top_k(&[0.5, 0.3, 0.2], 2), (vec![0, 1], false));
        assert_eq!(strict_argmax(&[0.5, 0.5]), None);
    }
}
