//! Self-correction of a single mispredicted node under one smoothing step.
//!
//! Setting: a d-regular graph where a fraction `h` of each node's neighbors
//! share its class, a teacher that puts mass `p` on its predicted class, an
//! error ratio `ε` of wrongly predicted nodes, and a star node of class 0
//! whose teacher row is `[q, (1−q)/(K−1), …]`. After one step of
//! `γÃ + (1−γ)I` the star's row is `[β, β′, …, β′]`, and the star is
//! corrected iff `β > β′`.
//!
//! This module normalizes the adjacency without self-loops (`D^{-1/2}AD^{-1/2}`,
//! i.e. `A/d` on a regular graph), unlike the rest of the crate.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::{
    gen_regular_homophily, probs_from_predictions, same_class_degree, synth_teacher_output, RegularConfig,
};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency_no_self_loops, NormalizedAdjacency};
use crate::propagation::ProbMatrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub h: f64,
    pub p: f64,
    pub num_classes: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub q: f64,
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.num_classes < 2 {
            return Err(Error::input("need at least two classes"));
        }
        if !unit(self.h) || !unit(self.p) || !unit(self.q) {
            return Err(Error::input("h, p and q must lie in [0, 1]"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::input(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::input(format!("epsilon must be in [0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_q(self, q: f64) -> Self {
        Self { q, ..self }
    }
}

/// Closed-form `(β, β′)` with every `(K−2)/(K−1)` factor kept exact.
pub fn beta_exact(t: &TheoryParams) -> Result<(f64, f64)> {
    t.validate()?;
    let (h, p, g, e, q) = (t.h, t.p, t.gamma, t.epsilon, t.q);
    let k1 = (t.num_classes - 1) as f64;
    let k2 = (t.num_classes - 2) as f64;
    // Mass a neighbor group puts on a class it does not (correctly) predict.
    let spill = e / k1 * p + (k1 - e) / (k1 * k1) * (1.0 - p);
    let beta = (1.0 - g) * q + g * h * ((1.0 - e) * p + e * (1.0 - p) / k1) + g * (1.0 - h) * spill;
    let beta_prime = (1.0 - g) * (1.0 - q) / k1
        + g * h * spill
        + g * (1.0 - h) / k1 * (e / k1 * (1.0 - p) + (1.0 - e) * p)
        + g * (1.0 - h) * k2 / k1 * spill;
    Ok((beta, beta_prime))
}

/// `C = (1 + 1/K)hp − (h + p)/K`.
pub fn c_constant(h: f64, p: f64, num_classes: usize) -> f64 {
    let k = num_classes as f64;
    (1.0 + 1.0 / k) * h * p - (h + p) / k
}

/// Smallest `q` that still gets corrected, using the `(K−2)/(K−1) ≈ 1`
/// simplification: `max(0, 1/K − γ/(1−γ)·(C − b(ε)))`, `b(ε) = (C + hp/K)ε`.
pub fn correction_threshold(h: f64, p: f64, num_classes: usize, gamma: f64, epsilon: f64) -> Result<f64> {
    TheoryParams {
        h,
        p,
        num_classes,
        gamma,
        epsilon,
        q: 0.0,
    }
    .validate()?;
    let k = num_classes as f64;
    let c = c_constant(h, p, num_classes);
    let b = (c + h * p / k) * epsilon;
    Ok((1.0 / k - gamma / (1.0 - gamma) * (c - b)).max(0.0))
}

/// Largest tolerable error ratio, `(Kh − 1)/((K + 1)h − 1)`.
pub fn epsilon_bound(h: f64, num_classes: usize) -> Result<f64> {
    let k = num_classes as f64;
    if num_classes < 2 || !(h > 1.0 / k && h <= 1.0) {
        return Err(Error::input(format!("epsilon bound needs 1/K < h <= 1, got h = {h}")));
    }
    Ok((k * h - 1.0) / ((k + 1.0) * h - 1.0))
}

/// Bisection of a monotone predicate over `q ∈ [0, 1/K]`: the smallest `q`
/// for which `corrected(q)` holds, 0 if it holds everywhere and `1/K` if
/// it holds nowhere.
fn bisect_threshold(num_classes: usize, mut corrected: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0 / num_classes as f64);
    if corrected(lo)? {
        return Ok(0.0);
    }
    if !corrected(hi)? {
        return Ok(hi);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if corrected(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Threshold on `q` where `β − β′` changes sign, from the exact formulas.
pub fn q_star_exact(t: &TheoryParams) -> Result<f64> {
    bisect_threshold(t.num_classes, |q| {
        let (b, bp) = beta_exact(&t.with_q(q))?;
        Ok(b > bp)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConfig {
    pub degree: usize,
    pub h: f64,
    pub num_classes: usize,
    pub nodes_per_class: usize,
    pub p: f64,
    pub epsilon: f64,
    pub q: f64,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOutcome {
    /// `β > β′` from the closed form at the realized homophily.
    pub predicted: bool,
    /// The star's class-0 score beats every other class after one step.
    pub observed: bool,
    pub q_star_empirical: f64,
    pub beta: f64,
    pub beta_prime: f64,
    /// Realized homophily `round(h·d)/d`.
    pub h_realized: f64,
}

fn near_int(v: f64) -> Option<usize> {
    let r = v.round();
    ((v - r).abs() < 1e-9 && r >= 0.0).then_some(r as usize)
}

/// Predicted classes where the star's neighborhood has exactly the expected
/// error composition: `ε·s` same-class neighbors flipped evenly over the
/// wrong classes, and in each other class `ε·u` neighbors flipped evenly
/// over the classes other than their own. The rest of the `round(ε(|V|−1))`
/// flips land uniformly at random outside the neighborhood.
fn composed_predictions(
    labels: &[usize],
    k: usize,
    neighbors: &[u32],
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let mut predicted = labels.to_vec();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &v in neighbors {
        groups[labels[v as usize]].push(v as usize);
    }
    let mut touched = 0;
    for (class, group) in groups.iter().enumerate() {
        let flips = near_int(epsilon * group.len() as f64)
            .filter(|f| f % (k - 1) == 0)
            .ok_or_else(|| {
                Error::Construction(format!(
                    "ε·{} is not a whole multiple of K−1; the neighborhood cannot match the expected composition",
                    group.len()
                ))
            })?;
        let wrong: Vec<usize> = (0..k).filter(|&c| c != class).collect();
        for (j, &v) in group.iter().take(flips).enumerate() {
            predicted[v] = wrong[j % wrong.len()];
        }
        touched += flips;
    }
    let n = labels.len();
    let total = (epsilon * (n - 1) as f64).round() as usize;
    let mut in_nbhd = vec![false; n];
    in_nbhd[0] = true;
    neighbors.iter().for_each(|&v| in_nbhd[v as usize] = true);
    let outside: Vec<usize> = (0..n).filter(|&v| !in_nbhd[v]).collect();
    let rest = total.checked_sub(touched).filter(|&r| r <= outside.len()).ok_or_else(|| {
        Error::Construction("graph too small for the requested error ratio".into())
    })?;
    for idx in sample(rng, outside.len(), rest).iter() {
        let v = outside[idx];
        predicted[v] = (labels[v] + rng.random_range(1..k)) % k;
    }
    Ok(predicted)
}

fn star_corrected(a: &NormalizedAdjacency, pt: &ProbMatrix, gamma: f64) -> Result<bool> {
    let agg = a.apply_row(0, pt.matrix())?;
    let row: Vec<f64> = agg
        .iter()
        .zip(pt.row(0))
        .map(|(&n, &s)| gamma * n + (1.0 - gamma) * s)
        .collect();
    Ok(row[1..].iter().all(|&v| row[0] > v))
}

fn set_star(pt: &mut ProbMatrix, q: f64) {
    let k = pt.cols();
    let rest = (1.0 - q) / (k - 1) as f64;
    for (c, v) in pt.matrix_mut().row_mut(0).iter_mut().enumerate() {
        *v = if c == 0 { q } else { rest };
    }
}

/// Builds the regular graph, a teacher with the expected neighborhood error
/// composition around star node 0, applies one smoothing step and compares
/// the outcome with the closed form. Also bisects the observed threshold.
pub fn verify_correction_empirical(cfg: &EmpiricalConfig) -> Result<EmpiricalOutcome> {
    let k = cfg.num_classes;
    let ds = gen_regular_homophily(
        &RegularConfig {
            degree: cfg.degree,
            homophily: cfg.h,
            num_classes: k,
            nodes_per_class: cfg.nodes_per_class,
            feature_noise: 0.0,
        },
        cfg.seed,
    )?;
    let h_realized = same_class_degree(cfg.degree, cfg.h) as f64 / cfg.degree as f64;
    let params = TheoryParams {
        h: h_realized,
        p: cfg.p,
        num_classes: k,
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        q: cfg.q,
    };
    let (beta, beta_prime) = beta_exact(&params)?;
    let a = normalized_adjacency_no_self_loops(&ds.graph);
    let mut rng = RngStream::new(cfg.seed).fork(30);
    let predicted_classes =
        composed_predictions(&ds.labels, k, ds.graph.neighbors(0), cfg.epsilon, &mut rng)?;
    if !(cfg.p > 1.0 / k as f64 && cfg.p <= 1.0) {
        return Err(Error::input("p must be in (1/K, 1]"));
    }
    let mut pt = probs_from_predictions(&predicted_classes, k, cfg.p, 0, cfg.q)?;
    let observed = star_corrected(&a, &pt, cfg.gamma)?;
    let q_star_empirical = bisect_threshold(k, |q| {
        set_star(&mut pt, q);
        star_corrected(&a, &pt, cfg.gamma)
    })?;
    Ok(EmpiricalOutcome {
        predicted: beta > beta_prime,
        observed,
        q_star_empirical,
        beta,
        beta_prime,
        h_realized,
    })
}

/// Fraction of `trials` teachers with fully random flips
/// (see [`synth_teacher_output`]) whose one-step outcome matches `β > β′`.
pub fn monte_carlo_agreement(cfg: &EmpiricalConfig, trials: usize) -> Result<f64> {
    if trials == 0 {
        return Err(Error::input("need at least one trial"));
    }
    let k = cfg.num_classes;
    let ds = gen_regular_homophily(
        &RegularConfig {
            degree: cfg.degree,
            homophily: cfg.h,
            num_classes: k,
            nodes_per_class: cfg.nodes_per_class,
            feature_noise: 0.0,
        },
        cfg.seed,
    )?;
    let h = same_class_degree(cfg.degree, cfg.h) as f64 / cfg.degree as f64;
    let (b, bp) = beta_exact(&TheoryParams {
        h,
        p: cfg.p,
        num_classes: k,
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        q: cfg.q,
    })?;
    let a = normalized_adjacency_no_self_loops(&ds.graph);
    let root = RngStream::new(cfg.seed).fork(31);
    let mut agree = 0;
    for t in 0..trials {
        let mut rng = root.fork(t as u64);
        let pt = synth_teacher_output(&ds.labels, k, cfg.p, cfg.epsilon, cfg.q, 0, &mut rng)?;
        if star_corrected(&a, &pt, cfg.gamma)? == (b > bp) {
            agree += 1;
        }
    }
    Ok(agree as f64 / trials as f64)
}

/// One grid point of the verification sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub h: f64,
    pub p: f64,
    pub num_classes: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub q_min_approx: f64,
    pub q_star_exact: f64,
    pub q_star_empirical: f64,
    pub agree: bool,
    pub q: f64,
    pub degree: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryGrid {
    pub classes: Vec<usize>,
    /// Same-class neighbors per unit, one entry per homophily level; each
    /// other class contributes one unit.
    pub same_units: Vec<usize>,
    pub p: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Error ratios as (numerator, denominator).
    pub epsilon: Vec<(usize, usize)>,
    /// Probes are placed at `q* ± offset`.
    pub probe_offset: f64,
}

impl Default for TheoryGrid {
    fn default() -> Self {
        Self {
            classes: vec![3, 5],
            same_units: vec![3, 8],
            p: vec![0.6, 0.9],
            gamma: vec![0.1, 0.3, 0.6],
            epsilon: vec![(0, 1), (1, 4)],
            probe_offset: 0.02,
        }
    }
}

/// Runs the deterministic-composition harness over the grid. For `K` classes
/// and `i` same-class units the star has `s = unit·i` same-class neighbors
/// and `unit` neighbors in every other class, where `unit = b(K−1)` for
/// `ε = a/b`, so every flip count is whole and evenly divisible.
pub fn theory_sweep(grid: &TheoryGrid, seed: u64) -> Result<Vec<TheoryRow>> {
    let mut rows = Vec::new();
    for &k in &grid.classes {
        for &i in &grid.same_units {
            // Scale homophily levels so that K = 5 hits the same h as K = 3.
            let i = i * (k - 1) / 2;
            for &(num, den) in &grid.epsilon {
                if den == 0 || num >= den {
                    return Err(Error::config("epsilon must be a fraction in [0, 1)"));
                }
                let unit = if num == 0 { 1 } else { den * (k - 1) };
                let s = unit * i;
                let d = s + unit * (k - 1);
                let h = s as f64 / d as f64;
                let m = (s + 2 + (s % 2)).max(unit);
                let epsilon = num as f64 / den as f64;
                for &p in &grid.p {
                    for &gamma in &grid.gamma {
                        let base = TheoryParams {
                            h,
                            p,
                            num_classes: k,
                            gamma,
                            epsilon,
                            q: 0.0,
                        };
                        let inv_k = 1.0 / k as f64;
                        let q_star = q_star_exact(&base)?;
                        let q_min = correction_threshold(h, p, k, gamma, epsilon)?.min(inv_k);
                        for q in [q_star - grid.probe_offset, q_star + grid.probe_offset] {
                            if !(0.0..inv_k).contains(&q) {
                                continue;
                            }
                            let out = verify_correction_empirical(&EmpiricalConfig {
                                degree: d,
                                h,
                                num_classes: k,
                                nodes_per_class: m,
                                p,
                                epsilon,
                                q,
                                gamma,
                                seed,
                            })?;
                            rows.push(TheoryRow {
                                h,
                                p,
                                num_classes: k,
                                gamma,
                                epsilon,
                                q_min_approx: q_min,
                                q_star_exact: q_star,
                                q_star_empirical: out.q_star_empirical,
                                agree: out.predicted == out.observed,
                                q,
                                degree: d,
                                margin: (out.beta - out.beta_prime).abs(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}
