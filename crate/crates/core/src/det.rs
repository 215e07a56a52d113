//! Fuglede–Kadison log-determinants by a trace power series.
//!
//! With `P = M*M`, a pivot `K² ≥ ‖P‖` and `Q = I − P/K²`,
//!
//! ```text
//! log det M = ½ [ n·log K² − Σ_{k≥1} tr(Qᵏ)/k ]
//! ```
//!
//! Since `0 ≤ Q ≤ I` every trace is nonnegative, so partial sums decrease
//! towards the true value. Traces are paired as `tr(Q^{2m}) = ⟨Qᵐ, Qᵐ⟩` and
//! `tr(Q^{2m+1}) = ⟨Q^{m+1}, Qᵐ⟩`, which halves the powers that must be formed.

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use num_bigint::BigInt;

use crate::ring::{ratio_to_f64, rational_string, rational_to_f64, Rational, RingMatrix, Scalar};


#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetOptions {
    pub terms: usize,
    /// Use `f64` coefficients instead of exact rationals.
    pub float: bool,
    /// Fit a model to the trace tail and subtract the implied remainder.
    pub extrapolate: Option<TailModel>,
    /// Stop forming powers once their total support exceeds this.
    pub support_cap: Option<usize>,
}

impl DetOptions {
    pub fn exact(terms: usize) -> Self {
        DetOptions {
            terms,
            float: false,
            extrapolate: None,
            support_cap: None,
        }
    }
}

/// Shape assumed for the tail of `tr(Qᵏ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailModel {
    /// `k^{-1/2}·(A + B/k)`, the decay seen for polynomials with roots on
    /// the unit circle and for mapping-torus operators.
    HalfPower,
    /// `A·k^{-α}` with `α` fitted.
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub model: TailModel,
    /// Fitted on `k ∈ [from, to]`; `coefficients` are `(A, B)` or `(A, α)`.
    pub coefficients: [f64; 2],
    pub from: usize,
    pub to: usize,
    /// Estimated `½·Σ_{k>T} tr(Qᵏ)/k`.
    pub remainder: f64,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetEstimate {
    /// Exact squared pivot `K²` as `p/q`.
    pub k_squared: String,
    pub k: f64,
    pub dimension: usize,
    pub partial_sums: Vec<f64>,
    pub traces: Vec<f64>,
    pub estimate: f64,
    pub terms_requested: usize,
    pub terms_used: usize,
    pub exact_traces: bool,
    pub max_support: usize,
    pub extrapolation: Option<TailFit>,
    pub warnings: Vec<String>,
}

impl DetEstimate {
    /// Last ten partial sums.
    pub fn tail(&self) -> &[f64] {
        let n = self.partial_sums.len();
        &self.partial_sums[n.saturating_sub(10)..]
    }

    /// The extrapolated value when requested and available, else the raw estimate.
    pub fn best(&self) -> f64 {
        self.extrapolation.as_ref().map_or(self.estimate, |t| t.estimate)
    }
}

/// Trace sequence `tr(Qᵏ)` for `k = 1..=terms` (fewer if the cap stops it),
/// and the largest support seen.
fn trace_series<S: Scalar>(q: &RingMatrix<S>, terms: usize, cap: Option<usize>) -> Result<(Vec<S>, usize, bool)> {
    let n = q.rows();
    let mut out: Vec<S> = Vec::with_capacity(terms);
    let mut prev = RingMatrix::identity(q.context().clone(), n);
    let mut max_support = n;
    let mut capped = false;
    // prev = Qᵐ and out holds tr(Qᵏ) for k ≤ 2m.
    while out.len() < terms {
        let next = prev.mul(q)?;
        max_support = max_support.max(next.support());
        // tr(Q^{2m+1}) = ⟨Q^{m+1}, Qᵐ⟩
        out.push(next.trace_against(&prev)?);
        if out.len() < terms {
            // tr(Q^{2m+2}) = ⟨Q^{m+1}, Q^{m+1}⟩
            out.push(next.trace_against(&next)?);
        }
        prev = next;
        if let Some(c) = cap {
            if prev.support() > c && out.len() < terms {
                capped = true;
                break;
            }
        }
    }
    Ok((out, max_support, capped))
}

/// Estimates `log det_G(M)` with `terms` series terms.
pub fn log_det_fk(m: &RingMatrix<Rational>, opts: &DetOptions) -> Result<DetEstimate> {
    if opts.terms == 0 {
        return Err(Error::ZeroTerms);
    }
    if !m.is_square() {
        return Err(Error::Shape("log-determinant of a non-square matrix".into()));
    }
    let n = m.rows();
    let k_sq = m.norm_bound_sq();
    let mut warnings = Vec::new();
    if Zero::is_zero(&k_sq) {
        warnings.push("zero matrix: determinant is 0".into());
        return Ok(DetEstimate {
            k_squared: "0".into(),
            k: 0.0,
            dimension: n,
            partial_sums: vec![f64::NEG_INFINITY],
            traces: Vec::new(),
            estimate: f64::NEG_INFINITY,
            terms_requested: opts.terms,
            terms_used: 0,
            exact_traces: true,
            max_support: 0,
            extrapolation: None,
            warnings,
        });
    }
    let p = m.adjoint()?.mul(m)?;
    let q = RingMatrix::identity(m.context().clone(), n).sub(&p.scale(&(<Rational as One>::one() / &k_sq)))?;
    let log_k_sq = ln_rational(&k_sq);
    let head = n as f64 * log_k_sq;

    let (traces, partial_sums, max_support, capped) = if opts.float {
        let (t, ms, capped) = trace_series(&q.to_f64(), opts.terms, opts.support_cap)?;
        let mut acc = 0.0f64;
        let sums: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(i, c)| {
                acc += c / (i + 1) as f64;
                0.5 * (head - acc)
            })
            .collect();
        (t, sums, ms, capped)
    } else {
        // Work with Q = N/E over the integers so no gcds are taken.
        let (qn, e) = q.clear_denominators();
        let (t, ms, capped) = trace_series(&qn, opts.terms, opts.support_cap)?;
        let mut ek = <BigInt as One>::one();
        let traces: Vec<f64> = t
            .iter()
            .map(|c| {
                ek *= &e;
                ratio_to_f64(c, &ek)
            })
            .collect();
        let mut acc = 0.0f64;
        let sums = traces
            .iter()
            .enumerate()
            .map(|(i, c)| {
                acc += c / (i + 1) as f64;
                0.5 * (head - acc)
            })
            .collect();
        (traces, sums, ms, capped)
    };
    if capped {
        warnings.push(format!(
            "truncated-support: stopped after {} of {} terms (support cap {})",
            traces.len(),
            opts.terms,
            opts.support_cap.unwrap_or(0)
        ));
    }
    if opts.float {
        warnings.push("float coefficients: traces are approximate".into());
    }
    let estimate = *partial_sums.last().expect("at least one term");
    let extrapolation = if let Some(model) = opts.extrapolate {
        let fit = fit_tail(model, &traces, estimate);
        if fit.is_none() {
            warnings.push("tail fit unavailable: too few positive traces".into());
        }
        fit
    } else {
        None
    };
    Ok(DetEstimate {
        k_squared: rational_string(&k_sq),
        k: (0.5 * log_k_sq).exp(),
        dimension: n,
        terms_used: traces.len(),
        partial_sums,
        traces,
        estimate,
        terms_requested: opts.terms,
        exact_traces: !opts.float,
        max_support,
        extrapolation,
        warnings,
    })
}

fn ln_rational(r: &Rational) -> f64 {
    // Split off powers of two so huge values stay finite.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db;
    let scaled = if shift > 0 {
        r / Rational::from_integer(<BigInt as One>::one() << (shift as usize))
    } else {
        r * Rational::from_integer(<BigInt as One>::one() << ((-shift) as usize))
    };
    rational_to_f64(&scaled).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Fits the tail model on the second half of the sequence and estimates the
/// missing `½·Σ_{k>T} tr(Qᵏ)/k`.
pub fn fit_tail(model: TailModel, traces: &[f64], raw_estimate: f64) -> Option<TailFit> {
    let t = traces.len();
    let from = (t / 2).max(1);
    let done = |coefficients, remainder: f64| TailFit {
        model,
        coefficients,
        from,
        to: t,
        remainder,
        estimate: raw_estimate - remainder,
    };
    if traces.iter().all(|&c| c == 0.0) {
        return Some(done([0.0, 0.0], 0.0));
    }
    match model {
        TailModel::HalfPower => {
            if t - from + 1 < 3 {
                return None;
            }
            // Normal equations for c_k = A·k^{-1/2} + B·k^{-3/2}.
            let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in from..=t {
                let kf = k as f64;
                let (u, v) = (kf.powf(-0.5), kf.powf(-1.5));
                let c = traces[k - 1];
                s11 += u * u;
                s12 += u * v;
                s22 += v * v;
                y1 += u * c;
                y2 += v * c;
            }
            let det = s11 * s22 - s12 * s12;
            if det.abs() < f64::MIN_POSITIVE {
                return None;
            }
            let a = (y1 * s22 - y2 * s12) / det;
            let b = (s11 * y2 - s12 * y1) / det;
            let sum = a * hurwitz_tail(1.5, t) + b * hurwitz_tail(2.5, t);
            Some(done([a, b], 0.5 * sum))
        }
        TailModel::PowerLaw => {
            let pts: Vec<(f64, f64)> = (from..=t)
                .filter_map(|k| {
                    let c = traces[k - 1];
                    (c > 0.0).then(|| ((k as f64).ln(), c.ln()))
                })
                .collect();
            if pts.len() < 3 {
                return None;
            }
            let np = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / np;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / np;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let alpha = -sxy / sxx;
            if alpha.is_nan() || alpha <= 0.0 {
                return None;
            }
            let amplitude = (my + alpha * mx).exp();
            let sum = amplitude * hurwitz_tail(alpha + 1.0, t);
            Some(done([amplitude, alpha], 0.5 * sum))
        }
    }
}

/// `Σ_{k>T} k^{-s}` for `s > 1`: exact terms up to a cutoff, then
/// Euler–Maclaurin.
fn hurwitz_tail(s: f64, t: usize) -> f64 {
    let n0 = (t + 1).max(64);
    let head: f64 = (t + 1..n0).map(|k| (k as f64).powf(-s)).sum();
    let n = n0 as f64;
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{parse_element, GroupContext};
    use crate::word::NameTable;
    use std::sync::Arc;

    fn z(s: &str) -> RingMatrix<Rational> {
        let e = parse_element(s, &NameTable::standard(0)).unwrap();
        RingMatrix::from_rows(Arc::new(GroupContext::Integers), vec![vec![e]]).unwrap()
    }

    #[test]
    fn scalar_is_exact_after_one_term() {
        let ctx = Arc::new(GroupContext::Free { rank: 1 });
        let two = parse_element("2", &NameTable::standard(1)).unwrap();
        let m = RingMatrix::from_rows(ctx, vec![vec![two]]).unwrap();
        let d = log_det_fk(&m, &DetOptions::exact(1)).unwrap();
        assert!((d.estimate - 2f64.ln()).abs() < 1e-15);
        assert_eq!(d.k_squared, "4");
    }

    #[test]
    fn mahler_t_minus_two() {
        let d = log_det_fk(&z("t - 2"), &DetOptions::exact(200)).unwrap();
        assert!((d.estimate - 2f64.ln()).abs() < 1e-3, "{}", d.estimate);
        assert!(d.partial_sums.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let f = log_det_fk(&z("t - 2"), &DetOptions { float: true, ..DetOptions::exact(200) }).unwrap();
        assert!((f.estimate - d.estimate).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_tail_matches_reference() {
        // ζ(5/2, 11)
        assert!((hurwitz_tail(2.5, 10) - 0.019566421534366166).abs() < 1e-13);
    }

    #[test]
    fn half_power_tail_recovers_one_minus_t() {
        let opts = DetOptions {
            extrapolate: Some(TailModel::HalfPower),
            ..DetOptions::exact(200)
        };
        let d = log_det_fk(&z("1 - t"), &opts).unwrap();
        assert!(d.estimate > 0.03);
        assert!(d.best().abs() < 1e-4, "{}", d.best());
    }

    #[test]
    fn zero_terms_rejected() {
        assert_eq!(log_det_fk(&z("t"), &DetOptions::exact(0)), Err(Error::ZeroTerms));
    }

    #[test]
    fn support_cap_stops_early() {
        let opts = DetOptions {
            support_cap: Some(8),
            ..DetOptions::exact(100)
        };
        let d = log_det_fk(&z("t - 2"), &opts).unwrap();
        assert!(d.terms_used < 100);
        assert!(d.warnings.iter().any(|w| w.starts_with("truncated-support")));
    }
}
