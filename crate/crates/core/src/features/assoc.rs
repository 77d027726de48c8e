//! Bigram association measures from 2x2 contingency tables.
//!
//! The table for a word pair (w1, w2) is cut from corpus counts: O11 is
//! the bigram count, the margins R1/C1 are the unigram frequencies of w1
//! and w2, and N is the corpus token count. Expected cells Eij = Ri*Cj/N
//! are the independence baseline.

use crate::corpus::BigramTable;
use crate::error::{Error, Result};

/// 2x2 observed-frequency table with its sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContingencyTable {
    pub o11: f64,
    pub o12: f64,
    pub o21: f64,
    pub o22: f64,
    pub n: f64,
}

impl ContingencyTable {
    pub fn from_cells(o11: f64, o12: f64, o21: f64, o22: f64) -> Result<ContingencyTable> {
        for (name, v) in [("O11", o11), ("O12", o12), ("O21", o21), ("O22", o22)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} = {v} must be a non-negative real")));
            }
        }
        let n = o11 + o12 + o21 + o22;
        if n <= 0.0 {
            return Err(Error::Validation("empty contingency table".into()));
        }
        Ok(ContingencyTable { o11, o12, o21, o22, n })
    }

    pub fn r1(&self) -> f64 {
        self.o11 + self.o12
    }

    pub fn r2(&self) -> f64 {
        self.o21 + self.o22
    }

    pub fn c1(&self) -> f64 {
        self.o11 + self.o21
    }

    pub fn c2(&self) -> f64 {
        self.o12 + self.o22
    }

    pub fn e11(&self) -> f64 {
        self.r1() * self.c1() / self.n
    }

    pub fn e12(&self) -> f64 {
        self.r1() * self.c2() / self.n
    }

    pub fn e21(&self) -> f64 {
        self.r2() * self.c1() / self.n
    }

    pub fn e22(&self) -> f64 {
        self.r2() * self.c2() / self.n
    }
}

/// Build the contingency table for (w1, w2), or None when either word
/// has no (non-zero) unigram count — the coverage gap propagated to the
/// feature matrix as missing cells.
pub fn contingency(table: &BigramTable, w1: &str, w2: &str) -> Option<ContingencyTable> {
    let r1 = table.unigram(w1) as f64;
    let c1 = table.unigram(w2) as f64;
    if r1 == 0.0 || c1 == 0.0 {
        return None;
    }
    let n = table.corpus_size as f64;
    let o11 = table.bigram(w1, w2) as f64;
    let o22 = n - r1 - c1 + o11;
    if o22 < 0.0 {
        // Marginal frequencies too large for the unigram-margin cut;
        // no meaningful table exists.
        return None;
    }
    Some(ContingencyTable {
        o11,
        o12: r1 - o11,
        o21: c1 - o11,
        o22,
        n,
    })
}

/// The eight association measures. `pmi` and `t_score` are undefined at
/// O11 = 0 and reported missing; every produced value is finite.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AmScores {
    pub pmi: Option<f64>,
    pub t_score: Option<f64>,
    pub z_score: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub simple_ll: Option<f64>,
    pub dice: Option<f64>,
    pub deltap_2g1: Option<f64>,
    pub deltap_1g2: Option<f64>,
}

impl AmScores {
    pub const NAMES: [&'static str; 8] = [
        "pmi",
        "t_score",
        "z_score",
        "log_likelihood",
        "simple_ll",
        "dice",
        "deltap_2g1",
        "deltap_1g2",
    ];

    pub fn as_array(&self) -> [Option<f64>; 8] {
        [
            self.pmi,
            self.t_score,
            self.z_score,
            self.log_likelihood,
            self.simple_ll,
            self.dice,
            self.deltap_2g1,
            self.deltap_1g2,
        ]
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

// 0 * ln(0/E) is taken as 0; an observed cell can only be positive when
// its expected cell is.
fn ll_term(o: f64, e: f64) -> f64 {
    if o > 0.0 {
        o * (o / e).ln()
    } else {
        0.0
    }
}

/// Evaluate all eight measures on one table. PMI uses log base 2; the
/// likelihood statistics use natural log.
pub fn am_scores(t: &ContingencyTable) -> AmScores {
    let (o11, e11) = (t.o11, t.e11());
    let pmi = (o11 > 0.0).then(|| (o11 / e11).log2()).and_then(finite);
    let t_score = (o11 > 0.0)
        .then(|| (o11 - e11) / o11.sqrt())
        .and_then(finite);
    let z_score = finite((o11 - e11) / e11.sqrt());
    let log_likelihood = finite(
        2.0 * (ll_term(o11, e11)
            + ll_term(t.o12, t.e12())
            + ll_term(t.o21, t.e21())
            + ll_term(t.o22, t.e22())),
    );
    let simple_ll = finite(2.0 * (ll_term(o11, e11) - (o11 - e11)));
    let dice = finite(2.0 * o11 / (t.r1() + t.c1()));
    let deltap_2g1 = finite(o11 / t.r1() - t.o21 / t.r2());
    let deltap_1g2 = finite(o11 / t.c1() - t.o12 / t.c2());
    AmScores {
        pmi,
        t_score,
        z_score,
        log_likelihood,
        simple_ll,
        dice,
        deltap_2g1,
        deltap_1g2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BigramTable;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn toy_table() -> BigramTable {
        // N = 1000, f(w1) = 10, f(w2) = 20, f(w1 w2) = 5; separate
        // sequences keep pair counts exact.
        let mut seqs: Vec<Vec<String>> = Vec::new();
        for _ in 0..5 {
            seqs.push(vec!["w1".into(), "w2".into()]);
        }
        for _ in 0..5 {
            seqs.push(vec!["w1".into(), "x".into()]);
        }
        for _ in 0..15 {
            seqs.push(vec!["w2".into(), "x".into()]);
        }
        for _ in 0..(1000 - 50) {
            seqs.push(vec!["filler".into()]);
        }
        BigramTable::from_token_sequences(&seqs)
    }

    #[test]
    fn margin_arithmetic() {
        let table = toy_table();
        let t = contingency(&table, "w1", "w2").unwrap();
        assert_eq!((t.o11, t.o12, t.o21, t.o22), (5.0, 5.0, 15.0, 975.0));
        assert_eq!(t.n, 1000.0);
        assert!(close(t.e11(), 0.2, 1e-12));
        assert!(contingency(&table, "nope", "w2").is_none());

        // Observed zero with both unigrams known stays a valid table.
        let z = contingency(&table, "w2", "w1").unwrap();
        assert_eq!(z.o11, 0.0);
    }

    #[test]
    fn known_scores() {
        // High-precision closed-form evaluation of each measure on the
        // (1000, 10, 20, 5) table.
        let t = ContingencyTable::from_cells(5.0, 5.0, 15.0, 975.0).unwrap();
        let s = am_scores(&t);
        assert!(close(s.pmi.unwrap(), 4.643_856_189_774_724, 1e-12));
        assert!(close(s.t_score.unwrap(), 2.1466252583997981, 1e-12));
        assert!(close(s.z_score.unwrap(), 10.733_126_291_998_99, 1e-12));
        assert!(close(s.log_likelihood.unwrap(), 26.754070032434842, 1e-10));
        assert!(close(s.simple_ll.unwrap(), 22.588_758_248_682_01, 1e-10));
        assert!(close(s.dice.unwrap(), 1.0 / 3.0, 1e-12));
        assert!(close(s.deltap_2g1.unwrap(), 0.48484848484848485, 1e-12));
        assert!(close(s.deltap_1g2.unwrap(), 0.24489795918367347, 1e-12));
    }

    #[test]
    fn independence_is_zero() {
        // All cells equal to their expecteds: R1 = 10, C1 = 20, N = 100.
        let t = ContingencyTable::from_cells(2.0, 8.0, 18.0, 72.0).unwrap();
        assert!(close(t.e11(), 2.0, 1e-12));
        let s = am_scores(&t);
        assert!(close(s.pmi.unwrap(), 0.0, 1e-9));
        assert!(close(s.t_score.unwrap(), 0.0, 1e-9));
        assert!(close(s.z_score.unwrap(), 0.0, 1e-9));
        assert!(close(s.log_likelihood.unwrap(), 0.0, 1e-9));
        assert!(close(s.simple_ll.unwrap(), 0.0, 1e-9));
    }

    #[test]
    fn zero_observed_cell_conventions() {
        let t = ContingencyTable::from_cells(0.0, 10.0, 20.0, 970.0).unwrap();
        let s = am_scores(&t);
        assert_eq!(s.pmi, None);
        assert_eq!(s.t_score, None);
        assert!(s.log_likelihood.unwrap() >= 0.0);
        assert_eq!(s.dice, Some(0.0));
    }

    #[test]
    fn rejects_negative_cells() {
        assert!(ContingencyTable::from_cells(-1.0, 0.0, 0.0, 5.0).is_err());
    }
}
