//! Evaluation metrics over a question net: coverage fractions, mean entropy,
//! mean link bias, answer density, and the answer/degree distributions.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::net::{AnswerTally, QuestionNet};
use crate::policy::link_bias;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("the net has no questions")]
    EmptyNet,
    #[error("denominator {name}={total} is smaller than the current count {current}")]
    BadDenominator {
        name: &'static str,
        total: usize,
        current: usize,
    },
    #[error("need at least 3 distinct degrees in [{k_min}, {k_max}], found {found}")]
    InsufficientSupport { k_min: u32, k_max: u32, found: usize },
}

/// Totals used to turn item and question counts into fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Denominators {
    pub items: usize,
    pub questions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MetricsSnapshot<T> {
    pub t: u64,
    pub f_nodes: T,
    pub f_edges: T,
    /// Mean binary entropy in bits of the smoothed answer proportions.
    pub avg_entropy: T,
    pub avg_link_bias: T,
    pub avg_answer_density: T,
}

/// Entropy in bits of the Laplace-smoothed answer distribution.
pub fn smoothed_entropy<T: Scalar>(tally: &AnswerTally) -> T {
    let p: T = tally.smoothed_yes();
    let q = T::one() - p;
    -(p * p.log2() + q * q.log2())
}

/// Mean entropy and mean link bias over all questions (0 for an empty net).
pub fn uncertainty<T: Scalar>(net: &QuestionNet) -> (T, T) {
    let m = net.question_count();
    if m == 0 {
        return (T::zero(), T::zero());
    }
    let (s, d) = net.questions().iter().fold((T::zero(), T::zero()), |(s, d), q| {
        (
            s + smoothed_entropy::<T>(&q.tally),
            d + link_bias::<T>(&q.tally).value(),
        )
    });
    let m = T::of_count(m as u64);
    (s / m, d / m)
}

pub fn snapshot<T: Scalar>(net: &QuestionNet, denom: Denominators) -> Result<MetricsSnapshot<T>, MetricsError> {
    if net.is_empty() {
        return Err(MetricsError::EmptyNet);
    }
    if denom.items < net.item_count() {
        return Err(MetricsError::BadDenominator {
            name: "items",
            total: denom.items,
            current: net.item_count(),
        });
    }
    if denom.questions < net.question_count() {
        return Err(MetricsError::BadDenominator {
            name: "questions",
            total: denom.questions,
            current: net.question_count(),
        });
    }
    let (avg_entropy, avg_link_bias) = uncertainty(net);
    let m = T::of_count(net.question_count() as u64);
    Ok(MetricsSnapshot {
        t: net.clock(),
        f_nodes: T::of_count(net.item_count() as u64) / T::of_count(denom.items as u64),
        f_edges: m / T::of_count(denom.questions as u64),
        avg_entropy,
        avg_link_bias,
        // Every answer lands on exactly one question, so the sum of totals is the clock.
        avg_answer_density: T::of_count(net.clock()) / m,
    })
}

/// Number of questions by total answer count.
pub fn answers_histogram(net: &QuestionNet) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    for q in net.questions() {
        *hist.entry(q.tally.total()).or_insert(0) += 1;
    }
    hist
}

/// Degree counts, poolable across nets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DegreeCounts(pub BTreeMap<u32, u64>);

impl DegreeCounts {
    pub fn of(net: &QuestionNet) -> Self {
        let mut counts = Self::default();
        counts.add(net);
        counts
    }

    pub fn add(&mut self, net: &QuestionNet) {
        for k in net.degrees() {
            *self.0.entry(k).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: &DegreeCounts) {
        for (&k, &c) in &other.0 {
            *self.0.entry(k).or_insert(0) += c;
        }
    }

    /// Rows `(k, count, P(K >= k))` in increasing `k`.
    pub fn rows<T: Scalar>(&self) -> Vec<DegreeRow<T>> {
        let total: u64 = self.0.values().sum();
        let mut at_least = total;
        let mut rows = Vec::with_capacity(self.0.len());
        for (&k, &count) in &self.0 {
            rows.push(DegreeRow {
                k,
                count,
                ccdf: T::of_count(at_least) / T::of_count(total),
            });
            at_least -= count;
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeRow<T> {
    pub k: u32,
    pub count: u64,
    pub ccdf: T,
}

pub fn degree_distribution<T: Scalar>(net: &QuestionNet) -> Vec<DegreeRow<T>> {
    DegreeCounts::of(net).rows()
}

/// Least-squares slope of `ln ccdf` against `ln k` over rows with `k` in `[k_min, k_max]`.
pub fn fit_tail_slope<T: Scalar>(rows: &[DegreeRow<T>], k_min: u32, k_max: u32) -> Result<T, MetricsError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k >= k_min && r.k <= k_max && r.k > 0 && r.ccdf > T::zero())
        .map(|r| (f64::from(r.k).ln(), r.ccdf.to_f64_lossy().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(MetricsError::InsufficientSupport {
            k_min,
            k_max,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(T::of(sxy / sxx))
}

pub fn write_snapshots_csv<T: Scalar, W: Write>(rows: &[MetricsSnapshot<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,f_nodes,f_edges,S_mean,d_mean,A_mean")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t, r.f_nodes, r.f_edges, r.avg_entropy, r.avg_link_bias, r.avg_answer_density
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(hist: &BTreeMap<u64, u64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "n_answers,count")?;
    for (n, c) in hist {
        writeln!(w, "{n},{c}")?;
    }
    Ok(())
}

pub fn write_degree_csv<T: Scalar, W: Write>(rows: &[DegreeRow<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,count,ccdf")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.k, r.count, r.ccdf)?;
    }
    Ok(())
}

/// Element-wise mean of equally long snapshot series, summed in input order.
pub fn mean_series<T: Scalar>(series: &[Vec<MetricsSnapshot<T>>]) -> Vec<MetricsSnapshot<T>> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let n = T::of_count(series.len() as u64);
    (0..first.len())
        .map(|i| {
            let mut acc: MetricsSnapshot<T> = MetricsSnapshot {
                t: first[i].t,
                ..Default::default()
            };
            for s in series {
                let r = &s[i];
                debug_assert_eq!(r.t, acc.t);
                acc.f_nodes = acc.f_nodes + r.f_nodes;
                acc.f_edges = acc.f_edges + r.f_edges;
                acc.avg_entropy = acc.avg_entropy + r.avg_entropy;
                acc.avg_link_bias = acc.avg_link_bias + r.avg_link_bias;
                acc.avg_answer_density = acc.avg_answer_density + r.avg_answer_density;
            }
            MetricsSnapshot {
                t: acc.t,
                f_nodes: acc.f_nodes / n,
                f_edges: acc.f_edges / n,
                avg_entropy: acc.avg_entropy / n,
                avg_link_bias: acc.avg_link_bias / n,
                avg_answer_density: acc.avg_answer_density / n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Answer, ItemId, QuestionKey};
    use proptest::prelude::*;

    fn net_with(tallies: &[(u64, u64)]) -> QuestionNet {
        let mut net = QuestionNet::new();
        let hub = net.add_item();
        for &(y, n) in tallies {
            let leaf = net.add_item();
            let key = net.add_question(hub, leaf).unwrap();
            (0..y).for_each(|_| {
                net.record_answer(key, Answer::Yes).unwrap();
            });
            (0..n).for_each(|_| {
                net.record_answer(key, Answer::No).unwrap();
            });
        }
        net
    }

    fn full(net: &QuestionNet) -> Denominators {
        Denominators {
            items: net.item_count(),
            questions: net.question_count(),
        }
    }

    #[test]
    fn unanswered_question_is_maximally_uncertain() {
        let net = QuestionNet::seeded();
        let s: MetricsSnapshot<f64> = snapshot(&net, full(&net)).unwrap();
        assert_eq!((s.avg_entropy, s.avg_link_bias, s.avg_answer_density), (1.0, 0.0, 0.0));
        assert_eq!((s.f_nodes, s.f_edges), (1.0, 1.0));
    }

    #[test]
    fn one_yes_answer() {
        let net = net_with(&[(1, 0)]);
        let s: MetricsSnapshot<f64> = snapshot(&net, full(&net)).unwrap();
        // H(2/3) = log2(3) - 2/3, evaluated with mpmath at 50 digits.
        assert!((s.avg_entropy - 0.918_295_834_054_489_6).abs() < 1e-15);
        assert!((s.avg_link_bias - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(s.avg_answer_density, 1.0);
    }

    #[test]
    fn opposed_questions() {
        let net = net_with(&[(2, 0), (0, 2)]);
        let s: MetricsSnapshot<f64> = snapshot(&net, full(&net)).unwrap();
        assert!((s.avg_link_bias - 0.25).abs() < 1e-15);
        assert_eq!(s.avg_answer_density, 2.0);
        let s32: MetricsSnapshot<f32> = snapshot(&net, full(&net)).unwrap();
        assert!((s32.avg_link_bias - 0.25).abs() < 1e-6);
    }

    #[test]
    fn fractions_use_denominators() {
        let net = QuestionNet::seeded();
        let s: MetricsSnapshot<f64> = snapshot(
            &net,
            Denominators {
                items: 400,
                questions: 800,
            },
        )
        .unwrap();
        assert_eq!(s.f_edges, 1.0 / 800.0);
        assert_eq!(s.f_nodes, 2.0 / 400.0);
        assert!(matches!(
            snapshot::<f64>(
                &net,
                Denominators {
                    items: 1,
                    questions: 800
                }
            ),
            Err(MetricsError::BadDenominator { .. })
        ));
        assert_eq!(
            snapshot::<f64>(&QuestionNet::new(), Denominators { items: 1, questions: 1 }),
            Err(MetricsError::EmptyNet)
        );
    }

    #[test]
    fn histogram_of_seed_net() {
        let mut net = QuestionNet::seeded();
        assert_eq!(answers_histogram(&net), BTreeMap::from([(0, 1)]));
        for _ in 0..3 {
            net.record_answer(QuestionKey(0), Answer::No).unwrap();
        }
        assert_eq!(answers_histogram(&net), BTreeMap::from([(3, 1)]));
    }

    #[test]
    fn star_degrees() {
        let mut net = QuestionNet::new();
        let c = net.add_item();
        for _ in 0..5 {
            let l = net.add_item();
            net.add_question(c, l).unwrap();
        }
        let rows: Vec<DegreeRow<f64>> = degree_distribution(&net);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].k, rows[0].count, rows[0].ccdf), (1, 5, 1.0));
        assert_eq!((rows[1].k, rows[1].count), (5, 1));
        assert!((rows[1].ccdf - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            fit_tail_slope(&rows, 1, 10),
            Err(MetricsError::InsufficientSupport { found: 2, .. })
        ));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<DegreeRow<f64>> = (1..=50)
            .map(|k| DegreeRow {
                k,
                count: 1,
                ccdf: (k as f64).powf(-2.0),
            })
            .collect();
        assert!((fit_tail_slope(&rows, 4, 40).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_series_averages_fields() {
        let a: MetricsSnapshot<f64> = MetricsSnapshot {
            t: 5,
            f_nodes: 0.2,
            f_edges: 0.4,
            avg_entropy: 1.0,
            avg_link_bias: 0.0,
            avg_answer_density: 2.0,
        };
        let b = MetricsSnapshot {
            t: 5,
            f_nodes: 0.4,
            f_edges: 0.6,
            avg_entropy: 0.5,
            avg_link_bias: 0.2,
            avg_answer_density: 4.0,
        };
        let m = mean_series(&[vec![a], vec![b]]);
        assert_eq!(m[0].t, 5);
        assert!((m[0].f_nodes - 0.3).abs() < 1e-15);
        assert!((m[0].avg_answer_density - 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_snapshots_csv::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(buf, b"t,f_nodes,f_edges,S_mean,d_mean,A_mean\n");
        buf.clear();
        write_histogram_csv(&BTreeMap::from([(1, 2)]), &mut buf).unwrap();
        assert_eq!(buf, b"n_answers,count\n1,2\n");
    }

    proptest! {
        #[test]
        fn snapshot_reconciles_with_net_totals(tallies in prop::collection::vec((0u64..30, 0u64..30), 1..20)) {
            let net = net_with(&tallies);
            let s: MetricsSnapshot<f64> = snapshot(&net, full(&net)).unwrap();
            prop_assert_eq!(s.avg_answer_density, net.clock() as f64 / net.question_count() as f64);
            prop_assert!(s.avg_entropy >= 0.0 && s.avg_entropy <= 1.0);
            prop_assert!(s.avg_link_bias >= 0.0 && s.avg_link_bias <= 0.5);
            let all_even = tallies.iter().all(|(y, n)| y == n);
            prop_assert_eq!(all_even, s.avg_entropy == 1.0);
            prop_assert_eq!(all_even, s.avg_link_bias == 0.0);

            let hist = answers_histogram(&net);
            prop_assert_eq!(hist.values().sum::<u64>(), net.question_count() as u64);
            prop_assert_eq!(hist.iter().map(|(n, c)| n * c).sum::<u64>(), net.clock());
        }

        #[test]
        fn majority_yes_never_lowers_bias(y in 0u64..50, extra in 0u64..50) {
            let before = AnswerTally::new(y + extra, y);
            let mut after = before;
            after.record(Answer::Yes);
            prop_assert!(link_bias::<f64>(&after).value() >= link_bias::<f64>(&before).value());
        }
    }

    #[test]
    fn handshake_on_degree_counts() {
        let mut net = QuestionNet::seeded();
        let w = net.add_item();
        net.add_question(ItemId(0), w).unwrap();
        net.add_question(ItemId(1), w).unwrap();
        let rows: Vec<DegreeRow<f64>> = degree_distribution(&net);
        let degree_sum: u64 = rows.iter().map(|r| u64::from(r.k) * r.count).sum();
        assert_eq!(degree_sum, 2 * net.question_count() as u64);
    }
}
