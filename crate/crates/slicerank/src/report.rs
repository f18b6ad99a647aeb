//! Assembles everything a single instance yields — μ, α, Γ, ε_q, the
//! counting and growth bounds, and optionally the exact search size with
//! its sandwich check — into one machine-readable report, plus table
//! sweeps over (q, |S|, n) ranges.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::counting::sumfree_bound;
use crate::error::{Error, Result};
use crate::gamma::{compute_gamma, GammaResult, DEFAULT_LOG_TOL};
use crate::gf::field_for_order;
use crate::search::{
    build_hypergraph, max_independent_exact, DifferenceInstance, SearchOptions, SearchStatus,
    DEFAULT_VERTEX_GATE,
};

/// Smallest uniform |S| covered by the power-saving bound:
/// ⌊(q+1)/2⌋ + 1, the least size exceeding (q+1)/2.
pub fn feasibility_threshold(q: u32) -> u32 {
    q.div_ceil(2) + 1
}

/// The same bound in its two printed forms: q raised to (1−ε)n, which
/// equals Γ^n by the identity 1 − ε = log_q Γ.
#[derive(Debug, Clone, Serialize)]
pub struct PowerBound {
    pub value: f64,
    pub base: u32,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub size: usize,
    pub status: SearchStatus,
    pub witness_lex_least: bool,
    pub best_set: Vec<String>,
    /// size ≤ Γ^n, checked when the instance is feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_growth: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub q: u32,
    pub n: u16,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform_s_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<String>>>,
    /// Exact rationals as strings.
    pub mu: String,
    pub alpha: String,
    /// α < 1/2; equivalently μ < (q−1)/2, and |S| > (q+1)/2 when uniform.
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_power_form: Option<PowerBound>,
    /// Γ^n.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_growth: Option<f64>,
    /// 3·M(n, (q−1)n/3, q−1) as a decimal string.
    pub bound_counting: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSummary>,
}

#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    /// Run the exact searcher (when q^n fits the gate) with these options.
    pub search: Option<SearchOptions>,
    pub search_gate: Option<u64>,
}

pub fn make_report(inst: &DifferenceInstance, opts: &ReportOptions) -> Result<BoundReport> {
    let field = inst.field();
    let q = field.q();
    let n = inst.n();
    let mu = inst.mu();
    let alpha = inst.alpha();
    let feasible = alpha < Ratio::new(1, 2);
    debug_assert_eq!(feasible, mu < Ratio::new(q as i64 - 1, 2));

    let (gamma, epsilon, bound_power_form, bound_growth) = if feasible {
        let g = compute_gamma(alpha, q, DEFAULT_LOG_TOL)?;
        let eps = 1.0 - g.value.ln() / (q as f64).ln();
        let exponent = (1.0 - eps) * n as f64;
        let power_form = PowerBound {
            value: (q as f64).powf(exponent),
            base: q,
            exponent,
        };
        let growth = g.value.powi(n as i32);
        (Some(g), Some(eps), Some(power_form), Some(growth))
    } else {
        (None, None, None, None)
    };

    let search = match &opts.search {
        Some(search_opts) => {
            let gate = opts.search_gate.unwrap_or(DEFAULT_VERTEX_GATE);
            let within_gate = (q as u128)
                .checked_pow(n as u32)
                .is_some_and(|v| v <= gate as u128);
            if within_gate {
                let h = build_hypergraph(inst, gate)?;
                let r = max_independent_exact(&h, search_opts)?;
                let within_growth = bound_growth.map(|b| r.size as f64 <= b);
                Some(SearchSummary {
                    size: r.size,
                    status: r.status,
                    witness_lex_least: r.witness_lex_least,
                    best_set: r
                        .best_set
                        .iter()
                        .map(|v| field.vector_to_string(v))
                        .collect(),
                    within_growth,
                })
            } else {
                None
            }
        }
        None => None,
    };

    let uniform_s_size = inst.uniform_size();
    let sets = if uniform_s_size.is_some() {
        None
    } else {
        Some(
            inst.sets()
                .iter()
                .map(|s| s.iter().map(|&e| field.elem_to_string(e)).collect())
                .collect(),
        )
    };

    Ok(BoundReport {
        q,
        n,
        uniform_s_size,
        sets,
        mu: mu.to_string(),
        alpha: alpha.to_string(),
        feasible,
        gamma,
        epsilon,
        bound_power_form,
        bound_growth,
        bound_counting: sumfree_bound(n as u32, q, 3).to_string(),
        search,
    })
}

/// One report per (q, |S|, n) cell with uniform S taken as the first |S|
/// elements in canonical order; rows sorted by (q, |S|, n) and cells
/// computed concurrently. Sizes exceeding q are skipped.
pub fn table(
    q_values: &[u32],
    s_sizes: &[u32],
    n_values: &[u16],
    opts: &ReportOptions,
) -> Result<Vec<BoundReport>> {
    let mut qs = q_values.to_vec();
    qs.sort_unstable();
    qs.dedup();
    let mut ss = s_sizes.to_vec();
    ss.sort_unstable();
    ss.dedup();
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let mut cells = Vec::new();
    for &q in &qs {
        let field = field_for_order(q)?;
        for &s in &ss {
            if s < 1 || s > q {
                continue;
            }
            for &n in &ns {
                let set = field.elements().take(s as usize).collect();
                cells.push(DifferenceInstance::uniform(field.clone(), n, set)?);
            }
        }
    }

    cells
        .par_iter()
        .map(|inst| make_report(inst, opts))
        .collect()
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Stable column order; floats carry 9 significant digits; infeasible rows
/// keep their flag and leave the Γ-derived columns empty.
pub fn table_to_csv(reports: &[BoundReport]) -> String {
    let mut out = String::from(
        "q,s_size,n,mu,alpha,feasible,gamma_star,gamma_value,gamma_tolerance,epsilon,\
         bound_power_form,bound_growth,bound_counting,search_size,search_status\n",
    );
    for r in reports {
        let s_size = r.uniform_s_size.map(|s| s.to_string()).unwrap_or_default();
        let (gs, gv, gt, eps, b1, bc) =
            match (&r.gamma, r.epsilon, &r.bound_power_form, r.bound_growth) {
                (Some(g), Some(e), Some(t1), Some(c)) => (
                    sig9(g.gamma_star),
                    sig9(g.value),
                    sig9(g.tolerance),
                    sig9(e),
                    sig9(t1.value),
                    sig9(c),
                ),
                _ => Default::default(),
            };
        let (size, status) = match &r.search {
            Some(s) => (
                s.size.to_string(),
                match s.status {
                    SearchStatus::Exact => "exact".to_string(),
                    SearchStatus::LowerBound => "lower_bound".to_string(),
                },
            ),
            None => Default::default(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.q,
            s_size,
            r.n,
            r.mu,
            r.alpha,
            r.feasible,
            gs,
            gv,
            gt,
            eps,
            b1,
            bc,
            r.bound_counting,
            size,
            status
        ));
    }
    out
}

/// Validates that q is an odd prime power usable by the pipeline.
pub fn check_order(q: u32) -> Result<()> {
    if q.is_multiple_of(2) {
        return Err(Error::InvalidField(format!("q must be odd, got {q}")));
    }
    field_for_order(q).map(|_| ())
}
