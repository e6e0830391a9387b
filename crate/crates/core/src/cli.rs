//! Command-line front end. Every value printed is an exact `p/q` string;
//! `--float` adds a decimal column next to it, never instead of it.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bdn::{self, PseudoboundedSet};
use crate::demo::{self, ConditionalSeries};
use crate::error::{Result, SeriesError};
use crate::exact_core::{
    apply_permutation, bracket_series, coverage_index, CauchyModulus, ConvergentSeries, IndexMap,
    Permutation, Rational, TermStream,
};
use crate::instrument::{self, Certified, PlusTailPredicate, SMembership};
use crate::oscillate::{self, Side};
use crate::rearrange::{riemann_permutation, RearrangementTarget, RiemannSchedule};

fn bad(msg: impl Into<String>) -> SeriesError {
    SeriesError::InvalidArgument(msg.into())
}

fn parse_rational(s: &str) -> Result<Rational> {
    s.trim().parse().map_err(|e| bad(format!("{s:?}: {e}")))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|e| bad(format!("{p:?}: {e}"))))
        .collect()
}

/// `alt-harmonic | alt-log | geometric:p/q | literal:t1,t2,... | bdn:<set>`
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesSpec {
    AltHarmonic,
    AltLog,
    Geometric(Rational),
    Literal(Vec<Rational>),
    Bdn(SetSpec),
}

impl FromStr for SeriesSpec {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "alt-harmonic" => Ok(Self::AltHarmonic),
            "alt-log" => Ok(Self::AltLog),
            "geometric" => {
                let r = parse_rational(rest)?;
                if r.abs() >= Rational::one() {
                    return Err(bad(format!("geometric ratio must satisfy |r| < 1; got {r}")));
                }
                Ok(Self::Geometric(r))
            }
            "literal" => Ok(Self::Literal(
                parse_list::<String>(rest)?.iter().map(|t| parse_rational(t)).collect::<Result<_>>()?,
            )),
            "bdn" => Ok(Self::Bdn(rest.parse()?)),
            _ => Err(bad(format!("unknown series {s:?}"))),
        }
    }
}

/// A series as the commands need it.
pub struct Resolved {
    pub series: ConvergentSeries,
    pub conditional: Option<ConditionalSeries>,
    /// Modulus of the absolute series, when it converges.
    pub absolute: Option<CauchyModulus>,
}

impl SeriesSpec {
    pub fn resolve(&self) -> Result<Resolved> {
        Ok(match self {
            Self::AltHarmonic => {
                let c = demo::alt_harmonic_conditional();
                Resolved { series: c.series.clone(), conditional: Some(c), absolute: None }
            }
            Self::AltLog => {
                let c = demo::alt_log();
                Resolved { series: c.series.clone(), conditional: Some(c), absolute: None }
            }
            Self::Geometric(r) => Resolved {
                series: demo::geometric(r)?,
                conditional: None,
                absolute: Some(demo::geometric_abs_modulus(r)),
            },
            Self::Literal(t) => {
                let len = t.len() as u64;
                Resolved {
                    series: demo::literal(t.clone()),
                    conditional: None,
                    absolute: Some(CauchyModulus::new(move |_| len + 1)),
                }
            }
            Self::Bdn(set) => {
                let s = bdn::bdn_series(&bdn::monotone_closure(&set.build()?))?;
                Resolved {
                    series: ConvergentSeries::new(s.signed, s.modulus),
                    conditional: None,
                    absolute: None,
                }
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SetJson {
    FiniteSup {
        values: Vec<u64>,
    },
    Identity,
    Custom {
        #[serde(rename = "enum")]
        enumeration: Vec<u64>,
        #[serde(default = "constant_tail")]
        tail: String,
    },
}

fn constant_tail() -> String {
    "constant".into()
}

/// `finite-sup:1,2,3 | identity | custom:1,1,5` or the JSON form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetSpec {
    FiniteSup(Vec<u64>),
    Identity,
    Custom(Vec<u64>),
}

impl FromStr for SetSpec {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let j: SetJson = serde_json::from_str(s).map_err(|e| bad(format!("set spec: {e}")))?;
            return match j {
                SetJson::FiniteSup { values } => Ok(Self::FiniteSup(values)),
                SetJson::Identity => Ok(Self::Identity),
                SetJson::Custom { enumeration, tail } if tail == "constant" => Ok(Self::Custom(enumeration)),
                SetJson::Custom { tail, .. } => Err(bad(format!("unsupported tail rule {tail:?}"))),
            };
        }
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "finite-sup" => Ok(Self::FiniteSup(parse_list(rest)?)),
            "identity" => Ok(Self::Identity),
            "custom" => Ok(Self::Custom(parse_list(rest)?)),
            _ => Err(bad(format!("unknown set {s:?}"))),
        }
    }
}

impl SetSpec {
    pub fn build(&self) -> Result<PseudoboundedSet> {
        match self {
            Self::FiniteSup(v) => PseudoboundedSet::finite_sup(v.clone()),
            Self::Identity => Ok(PseudoboundedSet::identity()),
            Self::Custom(v) => PseudoboundedSet::custom(v.clone()),
        }
    }
}

/// `identity | two-pos-one-neg | riemann:<x|+inf|-inf> | explicit:2,1,3 |
/// shuffle:<seed>[:<max block>] | sigma-from-lambda:<eps>:<upto>`
#[derive(Clone, Debug, PartialEq)]
pub enum PermSpec {
    Identity,
    TwoPosOneNeg,
    Riemann(RearrangementTarget),
    Explicit(Vec<u64>),
    Shuffle(u64, u64),
    SigmaFromLambda(Rational, u64),
}

impl FromStr for PermSpec {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "identity" => Ok(Self::Identity),
            "two-pos-one-neg" => Ok(Self::TwoPosOneNeg),
            "riemann" => Ok(Self::Riemann(rest.parse()?)),
            "explicit" => Ok(Self::Explicit(parse_list(rest)?)),
            "shuffle" => {
                let parts: Vec<u64> = rest
                    .split(':')
                    .map(|p| p.parse().map_err(|_| bad(format!("shuffle parameter {p:?}"))))
                    .collect::<Result<_>>()?;
                match parts[..] {
                    [seed] => Ok(Self::Shuffle(seed, 8)),
                    [seed, max] => Ok(Self::Shuffle(seed, max)),
                    _ => Err(bad("shuffle:<seed>[:<max block>]")),
                }
            }
            "sigma-from-lambda" => {
                let (eps, upto) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("sigma-from-lambda:<eps>:<upto>"))?;
                let upto = upto.parse().map_err(|_| bad(format!("upto {upto:?}")))?;
                Ok(Self::SigmaFromLambda(parse_rational(eps)?, upto))
            }
            _ => Err(bad(format!("unknown permutation {s:?}"))),
        }
    }
}

/// `s_n = n^2`, each certified by `kappa`.
fn squares_in_s(p: &PlusTailPredicate, fuel: u64) -> impl Fn(u64) -> Certified + 'static {
    let p = p.clone();
    move |n| {
        let value = n * n;
        match instrument::kappa(&p, value, fuel) {
            Ok(SMembership::Member(m)) => Certified { value, witness: m },
            // an uncertified point: report a witness that fails the check
            _ => Certified { value, witness: value },
        }
    }
}

fn sigma_from_lambda_for(
    terms: &TermStream,
    eps: &Rational,
    upto: u64,
) -> Result<(Permutation, Vec<instrument::BadInterval>)> {
    let p = PlusTailPredicate::new(terms, eps.clone())?;
    let lam = instrument::lambda_stream(&p, squares_in_s(&p, 1 << 14))?;
    let ivs = lam.bad_intervals(upto)?;
    Ok((instrument::sigma_from_lambda(terms, &ivs)?, ivs))
}

impl PermSpec {
    pub fn build(&self, series: &Resolved) -> Result<Permutation> {
        Ok(match self {
            Self::Identity => Permutation::identity(),
            Self::TwoPosOneNeg => Permutation::two_pos_one_neg(),
            Self::Explicit(p) => Permutation::from_prefix(p.clone())?,
            Self::Shuffle(seed, max) => Permutation::block_shuffle(*seed, *max),
            Self::Riemann(target) => {
                let c = series
                    .conditional
                    .as_ref()
                    .ok_or_else(|| bad("riemann permutations need a series with divergence certificates"))?;
                riemann_permutation(
                    &c.series.terms,
                    target.clone(),
                    c.cert_plus.clone(),
                    c.cert_minus.clone(),
                    c.series.modulus.clone(),
                )
            }
            Self::SigmaFromLambda(eps, upto) => sigma_from_lambda_for(&series.series.terms, eps, *upto)?.0,
        })
    }
}

fn parse_f(s: &str) -> Result<IndexMap> {
    match s {
        "identity" => Ok(IndexMap::identity()),
        "odd" => Ok(IndexMap::odd()),
        "dyadic" => Ok(IndexMap::dyadic()),
        _ => Err(bad(format!("unknown index map {s:?}; use identity, odd or dyadic"))),
    }
}

#[derive(Parser, Debug)]
#[command(name = "permseries", version, about = "Exact rearrangements of conditionally convergent series")]
struct Cli {
    /// Add a decimal column next to exact values.
    #[arg(long, global = true)]
    float: bool,
    /// Emit certificates as JSON instead of CSV where supported.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partial sums `n,term,partial_sum`, optionally after a permutation.
    Sums {
        #[arg(long)]
        series: String,
        #[arg(long)]
        terms: u64,
        #[arg(long)]
        perm: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy rearrangement towards a target, with its switch log.
    Rearrange {
        #[arg(long)]
        series: String,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long)]
        terms: u64,
    },
    /// Block sums of a bracketing and the telescoping check.
    Bracket {
        #[arg(long)]
        series: String,
        #[arg(long)]
        f: String,
        #[arg(long, default_value_t = 10)]
        blocks: u64,
    },
    /// Oscillating rearrangement between two limits.
    Oscillate {
        #[arg(long)]
        series: String,
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        delta: String,
        #[arg(long, default_value_t = 5)]
        blocks: usize,
        #[arg(long, default_value = "s-below-t")]
        side: String,
    },
    #[command(subcommand)]
    Bdn(BdnCommand),
    #[command(subcommand)]
    Instrument(InstrumentCommand),
}

#[derive(Subcommand, Debug)]
enum BdnCommand {
    /// Terms and partial sums of the signed series.
    Build {
        #[arg(long)]
        set: String,
        #[arg(long)]
        terms: u64,
    },
    /// Convergent bracketing of a rearrangement.
    Bracket {
        #[arg(long)]
        set: String,
        #[arg(long)]
        perm: String,
        #[arg(long, default_value_t = 8)]
        blocks: usize,
    },
    /// Bound on the set from a tail check.
    Bound {
        #[arg(long)]
        set: String,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        range: u64,
    },
}

#[derive(Args, Debug)]
struct InstrumentArgs {
    #[arg(long)]
    series: String,
    #[arg(long)]
    eps: String,
    #[arg(long, default_value_t = 10_000)]
    fuel: u64,
    #[arg(long, default_value_t = 100)]
    upto: u64,
}

#[derive(Subcommand, Debug)]
enum InstrumentCommand {
    /// Membership table for the set of indices with a heavy positive tail.
    SScan(InstrumentArgs),
    /// Permutation from the bad intervals, with block witnesses.
    Sigma(InstrumentArgs),
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    float: bool,
    json: bool,
}

fn io(e: impl std::fmt::Display) -> SeriesError {
    bad(format!("i/o: {e}"))
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn write_sums(w: &mut dyn Write, terms: &TermStream, n: u64, float: bool) -> Result<()> {
    let mut wr = csv_writer(w);
    let mut header = vec!["n", "term", "partial_sum"];
    if float {
        header.push("partial_sum_float");
    }
    wr.write_record(&header).map_err(io)?;
    for row in terms.partial_sums().take(n as usize) {
        let (i, t, s) = row?;
        let mut rec = vec![i.to_string(), t.to_string(), s.to_string()];
        if float {
            rec.push(s.to_f64().to_string());
        }
        wr.write_record(&rec).map_err(io)?;
    }
    wr.flush().map_err(io)
}

#[derive(Serialize)]
struct OscBlock {
    i: usize,
    k_start: u64,
    k_end: u64,
    f_start: u64,
    f_end: u64,
    block_sum: Rational,
    bound: Rational,
    passes: bool,
}

#[derive(Serialize)]
struct WbBlock {
    i: usize,
    k: u64,
    j: u64,
    n: u64,
    block_sum: Rational,
    bound: Rational,
}

#[derive(Serialize)]
struct Sig1Row {
    lo: u64,
    hi: u64,
    j: u64,
    k: u64,
    block_sum: Rational,
}

/// Modulus of the rearranged series, where one is known.
fn rearranged_series(spec: &SeriesSpec, res: &Resolved, sigma_spec: &PermSpec) -> Result<ConvergentSeries> {
    match (spec, sigma_spec) {
        (_, PermSpec::Identity) => Ok(res.series.clone()),
        (SeriesSpec::AltHarmonic, PermSpec::TwoPosOneNeg) => Ok(demo::two_pos_one_neg_alt_harmonic()),
        _ => match &res.absolute {
            Some(abs) => Ok(demo::rearranged_absolute(&res.series, abs, &sigma_spec.build(res)?)),
            None => Err(bad("no modulus is known for this rearrangement")),
        },
    }
}

fn run(cli: Cli, ctx: &mut Ctx<'_>) -> Result<()> {
    match cli.command {
        Command::Sums { series, terms, perm, out } => {
            let spec: SeriesSpec = series.parse()?;
            let res = spec.resolve()?;
            let stream = match perm {
                Some(p) => {
                    let sigma = p.parse::<PermSpec>()?.build(&res)?;
                    apply_permutation(&res.series.terms, &sigma)
                }
                None => res.series.terms.clone(),
            };
            match out {
                Some(path) => {
                    let mut f = File::create(&path).map_err(io)?;
                    write_sums(&mut f, &stream, terms, ctx.float)
                }
                None => write_sums(ctx.out, &stream, terms, ctx.float),
            }
        }
        Command::Rearrange { series, target, terms } => {
            let res = series.parse::<SeriesSpec>()?.resolve()?;
            let c = res
                .conditional
                .ok_or_else(|| bad("rearranging needs a series with divergence certificates"))?;
            let mut sched = RiemannSchedule::new(
                &c.series.terms,
                target.parse()?,
                c.cert_plus,
                c.cert_minus,
                c.series.modulus,
            );
            let mut wr = csv_writer(ctx.out);
            wr.write_record(["position", "index", "term", "partial_sum", "event"]).map_err(io)?;
            for _ in 0..terms {
                let st = sched.step()?;
                let event = match (st.switch, st.level) {
                    (true, _) => "switch".to_string(),
                    (_, Some(k)) => format!("passed {k}"),
                    _ => String::new(),
                };
                wr.write_record([
                    st.position.to_string(),
                    st.index.to_string(),
                    st.term.to_string(),
                    sched.partial_sum().to_string(),
                    event,
                ])
                .map_err(io)?;
            }
            wr.flush().map_err(io)
        }
        Command::Bracket { series, f, blocks } => {
            let res = series.parse::<SeriesSpec>()?.resolve()?;
            let br = bracket_series(&res.series.terms, parse_f(&f)?)?;
            let mut wr = csv_writer(ctx.out);
            wr.write_record(["k", "f_k", "block", "block_partial_sum", "series_partial_sum"]).map_err(io)?;
            let mut failed = None;
            for k in 1..=blocks {
                let (lhs, rhs) = br.telescoping_sides(k)?;
                wr.write_record([
                    k.to_string(),
                    br.boundary(k)?.to_string(),
                    br.block(k)?.to_string(),
                    lhs.to_string(),
                    rhs.to_string(),
                ])
                .map_err(io)?;
                if lhs != rhs && failed.is_none() {
                    failed = Some((k, lhs, rhs));
                }
            }
            wr.flush().map_err(io)?;
            drop(wr);
            match failed {
                None => writeln!(ctx.out, "# telescoping ok for K = 1..{blocks}").map_err(io),
                Some((k, l, r)) => Err(SeriesError::Certificate(format!(
                    "telescoping fails at K = {k}: blocks sum to {l}, terms to {r}"
                ))),
            }
        }
        Command::Oscillate { series, sigma, delta, blocks, side } => {
            let spec: SeriesSpec = series.parse()?;
            let res = spec.resolve()?;
            let sigma_spec: PermSpec = sigma.parse()?;
            let perm = sigma_spec.build(&res)?;
            let re = rearranged_series(&spec, &res, &sigma_spec)?;
            let br = bracket_series(&re.terms, IndexMap::identity())?;
            let m = br.modulus_from_series(&re.modulus);
            let delta = parse_rational(&delta)?;
            let w = oscillate::build_oscillation(&res.series, &perm, &br, &m, &delta, side.parse::<Side>()?)?;
            let bound = &delta / &Rational::from(3);
            let mut rows = Vec::new();
            for i in 1..=blocks {
                let s = w.block_sum(i)?;
                rows.push(OscBlock {
                    i,
                    k_start: w.k(i)?,
                    k_end: w.k(i + 1)?,
                    f_start: w.boundary(i)?,
                    f_end: w.boundary(i + 1)?,
                    passes: s.abs() > bound,
                    block_sum: s,
                    bound: bound.clone(),
                });
            }
            let ok = rows.iter().all(|r| r.passes);
            if ctx.json {
                serde_json::to_writer_pretty(&mut *ctx.out, &rows).map_err(io)?;
                writeln!(ctx.out).map_err(io)?;
            } else {
                let mut wr = csv_writer(ctx.out);
                wr.write_record(["i", "k_i", "k_next", "f_k_i", "f_k_next", "block_sum", "bound", "passes"])
                    .map_err(io)?;
                for r in &rows {
                    wr.write_record([
                        r.i.to_string(),
                        r.k_start.to_string(),
                        r.k_end.to_string(),
                        r.f_start.to_string(),
                        r.f_end.to_string(),
                        r.block_sum.to_string(),
                        r.bound.to_string(),
                        r.passes.to_string(),
                    ])
                    .map_err(io)?;
                }
                wr.flush().map_err(io)?;
            }
            if !ok {
                return Err(SeriesError::Modulus("a block did not exceed delta/3".into()));
            }
            Ok(())
        }
        Command::Bdn(cmd) => run_bdn(cmd, ctx),
        Command::Instrument(cmd) => run_instrument(cmd, ctx),
    }
}

fn run_bdn(cmd: BdnCommand, ctx: &mut Ctx<'_>) -> Result<()> {
    match cmd {
        BdnCommand::Build { set, terms } => {
            let set = bdn::monotone_closure(&set.parse::<SetSpec>()?.build()?);
            let s = bdn::bdn_series(&set)?;
            write_sums(ctx.out, &s.signed, terms, ctx.float)
        }
        BdnCommand::Bracket { set, perm, blocks } => {
            let set = bdn::monotone_closure(&set.parse::<SetSpec>()?.build()?);
            let s = bdn::bdn_series(&set)?;
            let res = Resolved {
                series: ConvergentSeries::new(s.signed.clone(), s.modulus.clone()),
                conditional: None,
                absolute: None,
            };
            let sigma = perm.parse::<PermSpec>()?.build(&res)?;
            let wb = bdn::weak_bracketing(&set, &sigma)?;
            let mut rows = Vec::new();
            for i in 1..=blocks {
                let k = wb.selected(i)?;
                rows.push(WbBlock {
                    i,
                    k,
                    j: wb.j(k)?,
                    n: wb.n(k)?,
                    block_sum: wb.block_sum(i)?,
                    bound: Rational::pow2(-(k as i64)),
                });
            }
            if ctx.json {
                serde_json::to_writer_pretty(&mut *ctx.out, &rows).map_err(io)?;
                writeln!(ctx.out).map_err(io)
            } else {
                let mut wr = csv_writer(ctx.out);
                wr.write_record(["i", "k_i", "j_k_i", "n_k_i", "block_sum", "bound"]).map_err(io)?;
                for r in &rows {
                    wr.write_record([
                        r.i.to_string(),
                        r.k.to_string(),
                        r.j.to_string(),
                        r.n.to_string(),
                        r.block_sum.to_string(),
                        r.bound.to_string(),
                    ])
                    .map_err(io)?;
                }
                wr.flush().map_err(io)
            }
        }
        BdnCommand::Bound { set, n, range } => {
            let set = bdn::monotone_closure(&set.parse::<SetSpec>()?.build()?);
            let b = bdn::bounded_from_convergence(&set, n, range)?;
            if ctx.json {
                writeln!(ctx.out, "{}", serde_json::json!({ "n": n, "range": range, "bound": b })).map_err(io)
            } else {
                writeln!(ctx.out, "{b}").map_err(io)
            }
        }
    }
}

fn run_instrument(cmd: InstrumentCommand, ctx: &mut Ctx<'_>) -> Result<()> {
    match cmd {
        InstrumentCommand::SScan(a) => {
            let res = a.series.parse::<SeriesSpec>()?.resolve()?;
            let p = PlusTailPredicate::new(&res.series.terms, parse_rational(&a.eps)?)?;
            let mut wr = csv_writer(ctx.out);
            wr.write_record(["n", "member", "witness", "searched_up_to"]).map_err(io)?;
            for n in 1..=a.upto {
                let rec = match instrument::kappa(&p, n, a.fuel)? {
                    SMembership::Member(m) => [n.to_string(), "yes".into(), m.to_string(), String::new()],
                    SMembership::Unknown { searched_up_to } => {
                        [n.to_string(), "unknown".into(), String::new(), searched_up_to.to_string()]
                    }
                };
                wr.write_record(&rec).map_err(io)?;
            }
            wr.flush().map_err(io)
        }
        InstrumentCommand::Sigma(a) => {
            let res = a.series.parse::<SeriesSpec>()?.resolve()?;
            let eps = parse_rational(&a.eps)?;
            let terms = &res.series.terms;
            let (sigma, ivs) = sigma_from_lambda_for(terms, &eps, a.upto)?;
            let mut rows = Vec::new();
            for iv in &ivs {
                let (j, k) = instrument::verify_sig1(terms, &sigma, iv, &eps)?;
                let mut sum = Rational::zero();
                for pos in j + 1..=k {
                    sum += terms.term(sigma.image(pos)?)?;
                }
                rows.push(Sig1Row { lo: iv.lo, hi: iv.hi, j, k, block_sum: sum });
            }
            let prefix = sigma.prefix(a.upto)?;
            coverage_index(&sigma, a.upto)?;
            if ctx.json {
                let doc = serde_json::json!({ "sigma": prefix, "intervals": rows });
                serde_json::to_writer_pretty(&mut *ctx.out, &doc).map_err(io)?;
                writeln!(ctx.out).map_err(io)
            } else {
                let joined: Vec<String> = prefix.iter().map(u64::to_string).collect();
                writeln!(ctx.out, "# sigma: {}", joined.join(" ")).map_err(io)?;
                let mut wr = csv_writer(ctx.out);
                wr.write_record(["lo", "hi", "j", "k", "block_sum"]).map_err(io)?;
                for r in &rows {
                    wr.write_record([
                        r.lo.to_string(),
                        r.hi.to_string(),
                        r.j.to_string(),
                        r.k.to_string(),
                        r.block_sum.to_string(),
                    ])
                    .map_err(io)?;
                }
                wr.flush().map_err(io)
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// exit status: 0 on success, 2 for bad input, 3 for a violated
/// certificate or invariant.
pub fn run_command<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut ctx = Ctx { out, float: cli.float, json: cli.json };
    match run(cli, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.out, "error: {e}");
            if e.is_violation() {
                3
            } else {
                2
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_core::rat;

    fn run_str(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_command(std::iter::once("permseries").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("geometric:-1/2".parse::<SeriesSpec>().unwrap(), SeriesSpec::Geometric(rat(-1, 2)));
        assert!("geometric:3/2".parse::<SeriesSpec>().is_err());
        assert_eq!(
            "bdn:finite-sup:1,2,3".parse::<SeriesSpec>().unwrap(),
            SeriesSpec::Bdn(SetSpec::FiniteSup(vec![1, 2, 3]))
        );
        assert_eq!(
            r#"{"kind":"custom","enum":[1,4],"tail":"constant"}"#.parse::<SetSpec>().unwrap(),
            SetSpec::Custom(vec![1, 4])
        );
        assert_eq!(r#"{"kind":"identity"}"#.parse::<SetSpec>().unwrap(), SetSpec::Identity);
        assert_eq!("shuffle:3".parse::<PermSpec>().unwrap(), PermSpec::Shuffle(3, 8));
        assert_eq!(
            "riemann:-inf".parse::<PermSpec>().unwrap(),
            PermSpec::Riemann(RearrangementTarget::MinusInfinity)
        );
    }

    #[test]
    fn sums_last_row() {
        let (code, out) = run_str(&["sums", "--series", "alt-harmonic", "--terms", "4"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().last().unwrap(), "4,-1/4,7/12");
        assert_eq!(out.lines().next().unwrap(), "n,term,partial_sum");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_str(&["sums", "--series", "nope", "--terms", "4"]).0, 2);
        assert_eq!(run_str(&["frobnicate"]).0, 2);
        let (code, out) = run_str(&["bdn", "bound", "--set", "identity", "--n", "2", "--range", "10"]);
        assert_eq!(code, 3);
        assert!(out.contains("lambda_2"));
    }
}
