//! CLI for the slicerank toolkit. Every subcommand emits human-readable
//! text by default and machine-readable JSON with `--json`; `--out FILE`
//! redirects the output. Exit codes: 0 success, 2 invalid input, 3 size
//! gate or term budget exceeded, 4 invariant violation (a bug).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use slicerank::counting::{count_m, count_m_inclusion_exclusion, sumfree_bound};
use slicerank::families::{
    from_progression_free, tensor_power, verify_condition, verify_condition_sampled, Family,
    VectorSet,
};
use slicerank::gamma::{compute_gamma, epsilon_q};
use slicerank::gf::{factor_prime_power, field_for_order, make_field};
use slicerank::poly::{build_f, build_g, slice_rank_upper_bound, ProductForm};
use slicerank::rational::parse_ratio;
use slicerank::report::{make_report, table, table_to_csv, ReportOptions};
use slicerank::search::{
    build_hypergraph, max_independent_exact, result_to_json, DifferenceInstance, SearchOptions,
    VertexOrder, DEFAULT_VERTEX_GATE,
};
use slicerank::tensor::{build_tensor, diagonal_rank_check};
use slicerank::{Error, Result};

#[derive(Parser)]
#[command(
    name = "slicerank",
    version,
    about = "Slice-rank bounds and exact search for progression-free sets with restricted differences over F_q^n"
)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Write the output to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// RNG seed for sampling modes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CountMethod {
    Dp,
    InclusionExclusion,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Default,
    Reversed,
}

impl From<OrderArg> for VertexOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Default => VertexOrder::DegreeDesc,
            OrderArg::Reversed => VertexOrder::DegreeDescReversed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Construct GF(p^k) and check the field axioms.
    FieldCheck {
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },

    /// Count M(n, D, a), or the multicolor sum-free ceiling with --sumfree.
    Count {
        #[arg(long)]
        n: u32,
        /// Sum cap D, an exact rational like 4/3.
        #[arg(long, value_name = "RATIONAL", conflicts_with = "sumfree")]
        cap: Option<String>,
        /// Per-coordinate maximum a.
        #[arg(long, value_name = "A", conflicts_with = "sumfree")]
        max: Option<u32>,
        /// Compute d·M(n, (q−1)n/d, q−1) instead of a plain count.
        #[arg(long, requires = "q")]
        sumfree: bool,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long, default_value_t = 3)]
        d: u32,
        #[arg(long, value_enum, default_value_t = CountMethod::Both)]
        method: CountMethod,
    },

    /// Minimize the growth objective; report Γ, its minimizer, and ε.
    Gamma {
        /// α as an exact rational in (0, 1/2), e.g. 1/3 or 0.45.
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },

    /// Bound report for one instance (file, or uniform via --q/--n/--s).
    Bound {
        /// Instance JSON: {p, k, n, sets: [[element strings]]}.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["q", "n", "s"])]
        instance: Option<PathBuf>,
        #[arg(long, requires = "n", requires = "s")]
        q: Option<u32>,
        #[arg(long)]
        n: Option<u16>,
        /// Uniform |S|; S is the first s elements in canonical order.
        #[arg(long)]
        s: Option<u32>,
        #[arg(long)]
        with_search: bool,
        #[arg(long, default_value = "60s")]
        budget: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },

    /// Bound reports over (q, |S|, n) ranges; CSV by default, JSON with --json.
    Table {
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u16>,
        #[arg(long)]
        with_search: bool,
        #[arg(long, default_value = "60s")]
        budget: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },

    /// Exact maximum progression-free set search for an instance file.
    Search {
        #[arg(long, value_name = "FILE")]
        instance: PathBuf,
        #[arg(long, default_value = "60s")]
        budget: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = OrderArg::Default)]
        order: OrderArg,
        /// Cap on q^n when materializing the hypergraph.
        #[arg(long, default_value_t = DEFAULT_VERTEX_GATE)]
        gate: u64,
    },

    /// Check the diagonal-solution condition for a family.
    VerifyFamily {
        /// Family JSON: {q, n, d, members: [[vector strings per block]]}.
        #[arg(long, value_name = "FILE", conflicts_with = "set")]
        family: Option<PathBuf>,
        /// Vector set JSON {p, k, n, vectors}; builds the standard d=3 family.
        #[arg(long, value_name = "FILE")]
        set: Option<PathBuf>,
        /// Instance file supplying S_1..S_n for the side polynomial g;
        /// omitted means g ≡ 1.
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
        /// Sample this many random tuples instead of exhausting; never
        /// certifies.
        #[arg(long, value_name = "K")]
        sample: Option<u64>,
    },

    /// Tensor-power a family (and its side polynomial) k times.
    Power {
        #[arg(long, value_name = "FILE", conflicts_with = "set")]
        family: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        set: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
        #[arg(long)]
        k: u32,
        /// Exhaustively verify the powered family.
        #[arg(long)]
        verify: bool,
    },

    /// Slice-rank certificate: diagonal tensor + block-split witness.
    TensorCert {
        #[arg(long, value_name = "FILE", conflicts_with = "set")]
        family: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        set: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
        /// Expansion budget in terms for the witness polynomial.
        #[arg(long, default_value_t = 200_000)]
        term_budget: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn parse_budget(s: &str) -> Result<Duration> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("cannot parse duration {s:?} (try 60s, 500ms, 2m)"));
    if let Some(ms) = s.strip_suffix("ms") {
        return ms
            .trim()
            .parse::<u64>()
            .map(Duration::from_millis)
            .map_err(|_| bad());
    }
    if let Some(min) = s.strip_suffix('m') {
        let v: f64 = min.trim().parse().map_err(|_| bad())?;
        return Ok(Duration::from_secs_f64(v * 60.0));
    }
    let v: f64 = s
        .strip_suffix('s')
        .unwrap_or(s)
        .trim()
        .parse()
        .map_err(|_| bad())?;
    if v.is_nan() || v < 0.0 {
        return Err(bad());
    }
    Ok(Duration::from_secs_f64(v))
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{} is not valid JSON: {e}", path.display())))
}

fn emit(cli: &Cli, json: serde_json::Value, text: String) -> Result<()> {
    let payload = if cli.json {
        let mut s = serde_json::to_string_pretty(&json)
            .map_err(|e| Error::Internal(format!("serializing output: {e}")))?;
        s.push('\n');
        s
    } else {
        text
    };
    match &cli.out {
        Some(path) => fs::write(path, payload)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn modulus_string(coeffs: &[u32]) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (i, &c) in coeffs.iter().enumerate().rev() {
        if c == 0 {
            continue;
        }
        let part = match (i, c) {
            (0, c) => c.to_string(),
            (1, 1) => "x".into(),
            (1, c) => format!("{c}x"),
            (i, 1) => format!("x^{i}"),
            (i, c) => format!("{c}x^{i}"),
        };
        parts.push(part);
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Loads a family either from a family file (bare or wrapped in a `family`
/// key, as `power` emits) or by building the standard d=3 family from a
/// vector-set file.
fn load_family(family: &Option<PathBuf>, set: &Option<PathBuf>) -> Result<Family> {
    match (family, set) {
        (Some(path), _) => {
            let mut json = read_json(path)?;
            if let Some(inner) = json.get("family") {
                json = inner.clone();
            }
            Family::from_json(&json)
        }
        (None, Some(path)) => {
            let vs = VectorSet::from_json(&read_json(path)?)?;
            from_progression_free(vs.field.clone(), vs.n, &vs.vectors)
        }
        (None, None) => Err(Error::InvalidInput(
            "supply either --family or --set".into(),
        )),
    }
}

/// Side polynomial for a family: g from an instance file, or the constant 1.
fn load_side_poly(instance: &Option<PathBuf>, fam: &Family) -> Result<ProductForm> {
    match instance {
        Some(path) => {
            let inst = DifferenceInstance::from_json(&read_json(path)?)?;
            if **inst.field() != **fam.field() || inst.n() != fam.n() {
                return Err(Error::InvalidInput(format!(
                    "instance is over GF({})^{} but the family lives in GF({})^{}",
                    inst.field().q(),
                    inst.n(),
                    fam.field().q(),
                    fam.n()
                )));
            }
            if fam.d() != 3 {
                return Err(Error::InvalidInput(
                    "the side polynomial g is defined for d = 3 families".into(),
                ));
            }
            build_g(fam.field().clone(), inst.sets())
        }
        None => Ok(ProductForm::one(fam.field().clone(), fam.d(), fam.n())),
    }
}

fn uniform_instance(q: u32, n: u16, s: u32) -> Result<DifferenceInstance> {
    let field = field_for_order(q)?;
    if s < 1 || s > q {
        return Err(Error::InvalidInput(format!(
            "uniform |S| = {s} out of range for q = {q}"
        )));
    }
    let set = field.elements().take(s as usize).collect();
    DifferenceInstance::uniform(field, n, set)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FieldCheck { p, k } => {
            let field = make_field(*p, *k)?;
            let axioms_checked = field.q() <= 81;
            if axioms_checked {
                field.verify_axioms()?;
            }
            let json = serde_json::json!({
                "p": field.p(),
                "k": field.k(),
                "q": field.q(),
                "modulus": field.modulus(),
                "modulus_string": modulus_string(field.modulus()),
                "axioms": if axioms_checked { "verified_exhaustively" } else { "skipped_large_field" },
            });
            let text = format!(
                "GF({}) = GF({}^{}), modulus {}, axioms {}\n",
                field.q(),
                field.p(),
                field.k(),
                modulus_string(field.modulus()),
                if axioms_checked {
                    "verified exhaustively"
                } else {
                    "skipped (q > 81)"
                },
            );
            emit(cli, json, text)
        }

        Command::Count {
            n,
            cap,
            max,
            sumfree,
            q,
            d,
            method,
        } => {
            if *sumfree {
                let q = q.ok_or_else(|| Error::InvalidInput("--sumfree requires --q".into()))?;
                if q < 3 || *d < 2 {
                    return Err(Error::InvalidInput(
                        "sumfree bound needs q >= 3 and d >= 2".into(),
                    ));
                }
                let bound = sumfree_bound(*n, q, *d);
                let json = serde_json::json!({
                    "n": n, "q": q, "d": d, "bound": bound.to_string(),
                });
                return emit(cli, json, format!("{bound}\n"));
            }
            let cap = cap
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("--cap is required without --sumfree".into()))?;
            let max = max
                .ok_or_else(|| Error::InvalidInput("--max is required without --sumfree".into()))?;
            let cap = parse_ratio(cap)?;
            let count = match method {
                CountMethod::Dp => count_m(*n, cap, max),
                CountMethod::InclusionExclusion => count_m_inclusion_exclusion(*n, cap, max),
                CountMethod::Both => {
                    let a = count_m(*n, cap, max);
                    let b = count_m_inclusion_exclusion(*n, cap, max);
                    if a != b {
                        return Err(Error::InvariantViolation(format!(
                            "counting paths disagree: dp = {a}, inclusion-exclusion = {b}"
                        )));
                    }
                    a
                }
            };
            let json = serde_json::json!({
                "n": n, "cap": cap.to_string(), "max": max, "count": count.to_string(),
            });
            emit(cli, json, format!("{count}\n"))
        }

        Command::Gamma { alpha, m, tol } => {
            let alpha = parse_ratio(alpha)?;
            let g = compute_gamma(alpha, *m, *tol)?;
            // ε is meaningful when m is an odd prime power usable as q.
            let epsilon = match factor_prime_power(*m) {
                Some((p, _)) if p % 2 == 1 && *m >= 3 => Some(epsilon_q(*m, alpha)?),
                _ => None,
            };
            let mut json = serde_json::to_value(&g)
                .map_err(|e| Error::Internal(format!("serializing gamma: {e}")))?;
            json["epsilon"] = serde_json::json!(epsilon);
            let text = format!(
                "Gamma_{{{}, {}}} = {:.9} at gamma = {:.9} (tolerance {:.3e}){}\n",
                g.alpha,
                g.m,
                g.value,
                g.gamma_star,
                g.tolerance,
                epsilon
                    .map(|e| format!(", epsilon = {e:.9}"))
                    .unwrap_or_default(),
            );
            emit(cli, json, text)
        }

        Command::Bound {
            instance,
            q,
            n,
            s,
            with_search,
            budget,
            workers,
        } => {
            let inst = match instance {
                Some(path) => DifferenceInstance::from_json(&read_json(path)?)?,
                None => {
                    let (q, n, s) = match (q, n, s) {
                        (Some(q), Some(n), Some(s)) => (*q, *n, *s),
                        _ => {
                            return Err(Error::InvalidInput(
                                "supply --instance FILE or all of --q/--n/--s".into(),
                            ))
                        }
                    };
                    uniform_instance(q, n, s)?
                }
            };
            let search = if *with_search {
                Some(SearchOptions {
                    budget: parse_budget(budget)?,
                    workers: *workers,
                    order: VertexOrder::DegreeDesc,
                })
            } else {
                None
            };
            let opts = ReportOptions {
                search,
                search_gate: None,
            };
            let report = make_report(&inst, &opts)?;
            let json = serde_json::to_value(&report)
                .map_err(|e| Error::Internal(format!("serializing report: {e}")))?;
            let mut text = format!(
                "q = {}, n = {}, mu = {}, alpha = {}, feasible = {}\n",
                report.q, report.n, report.mu, report.alpha, report.feasible
            );
            if let (Some(g), Some(eps), Some(c)) =
                (&report.gamma, report.epsilon, report.bound_growth)
            {
                text += &format!(
                    "Gamma = {:.9}, epsilon = {:.9}, bound Gamma^n = {:.9}\n",
                    g.value, eps, c
                );
            }
            text += &format!("sum-free ceiling 3M = {}\n", report.bound_counting);
            if let Some(s) = &report.search {
                text += &format!(
                    "search: size = {} ({:?}), within Gamma^n: {}\n",
                    s.size,
                    s.status,
                    s.within_growth
                        .map(|b| b.to_string())
                        .unwrap_or_else(|| "n/a".into()),
                );
            }
            emit(cli, json, text)
        }

        Command::Table {
            q,
            s,
            n,
            with_search,
            budget,
            workers,
        } => {
            let search = if *with_search {
                Some(SearchOptions {
                    budget: parse_budget(budget)?,
                    workers: *workers,
                    order: VertexOrder::DegreeDesc,
                })
            } else {
                None
            };
            let opts = ReportOptions {
                search,
                search_gate: None,
            };
            let reports = table(q, s, n, &opts)?;
            let json = serde_json::to_value(&reports)
                .map_err(|e| Error::Internal(format!("serializing table: {e}")))?;
            let csv = table_to_csv(&reports);
            emit(cli, json, csv)
        }

        Command::Search {
            instance,
            budget,
            workers,
            order,
            gate,
        } => {
            let inst = DifferenceInstance::from_json(&read_json(instance)?)?;
            let h = build_hypergraph(&inst, *gate)?;
            let opts = SearchOptions {
                budget: parse_budget(budget)?,
                workers: *workers,
                order: (*order).into(),
            };
            let result = max_independent_exact(&h, &opts)?;
            let json = result_to_json(&result, &inst);
            let field = inst.field();
            let text = format!(
                "size = {} ({:?}), {} vertices, {} edges, {} nodes, {:.2?}\nbest set: {}\n",
                result.size,
                result.status,
                h.vertex_count(),
                h.edge_count(),
                result.nodes_explored,
                result.wall_time,
                result
                    .best_set
                    .iter()
                    .map(|v| field.vector_to_string(v))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            emit(cli, json, text)
        }

        Command::VerifyFamily {
            family,
            set,
            instance,
            sample,
        } => {
            let fam = load_family(family, set)?;
            let g = load_side_poly(instance, &fam)?;
            let g_opt = (!g.factors().is_empty()).then_some(&g);
            let report = match sample {
                Some(k) => verify_condition_sampled(&fam, g_opt, *k, cli.seed)?,
                None => verify_condition(&fam, g_opt)?,
            };
            let json = serde_json::to_value(&report)
                .map_err(|e| Error::Internal(format!("serializing report: {e}")))?;
            let text = match (&report.verified, &report.violation) {
                (true, _) => format!(
                    "verified: all {} tuples satisfy the diagonal-solution condition\n",
                    report.tuples_checked
                ),
                (false, Some(v)) => format!(
                    "violation at members {:?}: {:?}\n",
                    v.member_indices, v.clause
                ),
                (false, None) => format!(
                    "no violation found among {} sampled tuples (not a certificate)\n",
                    report.tuples_checked
                ),
            };
            emit(cli, json, text)
        }

        Command::Power {
            family,
            set,
            instance,
            k,
            verify,
        } => {
            let fam = load_family(family, set)?;
            let g = load_side_poly(instance, &fam)?;
            let (powered, g_bar) = tensor_power(&fam, &g, *k)?;
            let verification = if *verify {
                let g_opt = (!g_bar.factors().is_empty()).then_some(&g_bar);
                Some(verify_condition(&powered, g_opt)?)
            } else {
                None
            };
            let json = serde_json::json!({
                "family": powered.to_json(),
                "k": k,
                "base_members": fam.len(),
                "members": powered.len(),
                "g_degree": g.degree(),
                "g_bar_degree": g_bar.degree(),
                "verification": verification,
            });
            let text = format!(
                "power k = {}: {} members over GF({})^{}, deg g_bar = {}{}\n",
                k,
                powered.len(),
                powered.field().q(),
                powered.n(),
                g_bar.degree(),
                match &verification {
                    Some(r) if r.verified => ", verified".to_string(),
                    Some(_) => ", NOT verified".to_string(),
                    None => String::new(),
                },
            );
            emit(cli, json, text)
        }

        Command::TensorCert {
            family,
            set,
            instance,
            term_budget,
        } => {
            let fam = load_family(family, set)?;
            let g = load_side_poly(instance, &fam)?;
            let f = build_f(fam.field().clone(), fam.n(), fam.d());
            let p = f.mul(&g);
            let tensor = build_tensor(&p, &fam)?;
            let expanded = p.expand(*term_budget)?.reduce_exponents();
            let witness = slice_rank_upper_bound(&expanded)?;
            let cert = diagonal_rank_check(&tensor, &witness)?;
            let json = serde_json::to_value(&cert)
                .map_err(|e| Error::Internal(format!("serializing certificate: {e}")))?;
            let text = format!(
                "diagonal tensor: N = {} <= witness {} <= bound {} (D = {}, d = {})\n",
                cert.n_members, cert.witness_total, cert.bound, cert.degree, cert.d,
            );
            emit(cli, json, text)
        }
    }
}
