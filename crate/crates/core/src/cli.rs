//! Command-line front end: JSON run configs, dispatch, and deterministic
//! CSV/JSON output.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 computation error, 3 a
//! verification command found a violation.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::Value;

use crate::calculus::{
    boundary, fixes, ratio_trace, weighted_upper_density, Affine, FixPolicy, Ratio, SubsetSequence,
};
use crate::classical::{
    ap_search, ap_search_all, classify_g_sigma, empirical_measure_eval, fixing_ratio,
    upper_density, verify_invariance_trend, ApBounds, BoxRadius, DensitySet, Element,
    GroupSubsetSequence, GroupUniverse, Side,
};
use crate::ergodic::{
    fixed_projector, orbit_test, verify_conjugate_eigenvectors, verify_mean_convergence,
    verify_orbit_decay, DecayOptions, Envelope, ModelSpec, OrbitVerdict, VectorH, DECAY_TOL,
    IDENTITY_TOL,
};
use crate::error::Error;
use crate::fusion::json::{from_json, RingSpec};
use crate::fusion::{verify_ring_axioms, AxiomCheckOptions, FusionRing, IrrepLabel};
use crate::stabilizer::classify_window;

#[derive(Debug, Parser)]
#[command(
    name = "folner",
    version,
    about = "Følner calculus, stabilizers, ergodic averages and progression search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for random sets, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Inner and outer boundary ∂_S(F_n).
    Boundary,
    /// Ratio traces and fix verdicts for chosen labels.
    FolnerCheck,
    /// Classify a window of labels.
    Stabilizer,
    /// Spectral-model checks: mean-convergence, orbit-decay, conjugate-eigen, orbit.
    Ergodic,
    /// Classical fixing-ratio trace of one element.
    FixRatio,
    /// Upper density of a set along a sequence.
    Density,
    /// Search for an arithmetic progression in a set.
    ApSearch,
    /// Empirical measure of a cylinder event, or its shift-invariance trend.
    Measure,
    /// Recompute the fusion-ring axioms on a window.
    VerifyRing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A rectangular result with a few summary lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(vec![]);
                w.write_record(&self.columns).expect("in-memory write");
                for r in &self.rows {
                    w.write_record(r).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
            }
            Format::Json => {
                let summary: serde_json::Map<String, Value> = self
                    .summary
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                let doc = serde_json::json!({
                    "columns": self.columns,
                    "rows": self.rows,
                    "summary": summary,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json values");
                s.push('\n');
                s
            }
        }
    }
}

/// A trace entry: exact where the computation is exact.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceValue {
    Exact(Ratio),
    Float(f64),
}

impl std::fmt::Display for TraceValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceValue::Exact(r) => write!(f, "{r}"),
            TraceValue::Float(x) => f.write_str(&fmt_float(*x)),
        }
    }
}

/// 12 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

/// A two-column `n,ratio` trace.
pub fn emit_trace(trace: &[(usize, TraceValue)], format: Format) -> String {
    let mut t = Table::new(&["n", "ratio"]);
    for (n, v) in trace {
        t.push([n.to_string(), v.to_string()]);
    }
    t.render(format)
}

#[derive(Debug)]
pub enum CliError {
    Config(Error),
    Compute(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Compute(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Compute(e) => write!(f, "computation error: {e}"),
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    /// A verification found a violation.
    pub failed: bool,
}

type CliResult<T> = std::result::Result<T, CliError>;

fn cfg<T>(r: crate::Result<T>, path: &str) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => CliError::Config(e),
        other => CliError::Config(Error::config(path, other.to_string())),
    })
}

fn compute<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(CliError::Compute)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SequenceSpec {
    /// Labels start(n), start(n)+step, …, ≤ end(n), with start(n) = a·n + b.
    Intervals {
        start: (i64, i64),
        end: (i64, i64),
        #[serde(default = "one")]
        step: i64,
    },
    InitialSegments,
    SymmetricIntervals,
    Explicit {
        sets: Vec<Vec<IrrepLabel>>,
    },
}

fn one() -> i64 {
    1
}

impl SequenceSpec {
    fn build(&self, ring: &FusionRing, path: &str) -> CliResult<SubsetSequence> {
        let seq = match self {
            SequenceSpec::Intervals { start, end, step } => SubsetSequence::intervals(
                ring,
                Affine::new(start.0, start.1),
                Affine::new(end.0, end.1),
                *step,
            ),
            SequenceSpec::InitialSegments => SubsetSequence::initial_segments(ring),
            SequenceSpec::SymmetricIntervals => SubsetSequence::symmetric_intervals(ring),
            SequenceSpec::Explicit { sets } => SubsetSequence::explicit(ring, sets.clone()),
        };
        cfg(seq, path)
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "group", rename_all = "snake_case", deny_unknown_fields)]
enum GroupSpec {
    FreeAbelian {
        #[serde(default = "one_usize")]
        rank: usize,
    },
    Cyclic {
        moduli: Vec<u64>,
    },
    Heisenberg,
    FreeGroup {
        #[serde(default = "two")]
        rank: u8,
    },
}

fn one_usize() -> usize {
    1
}

fn two() -> u8 {
    2
}

impl GroupSpec {
    fn build(&self) -> CliResult<GroupUniverse> {
        cfg(
            match self {
                GroupSpec::FreeAbelian { rank } => GroupUniverse::free_abelian(*rank),
                GroupSpec::Cyclic { moduli } => GroupUniverse::cyclic(moduli.clone()),
                GroupSpec::Heisenberg => Ok(GroupUniverse::Heisenberg),
                GroupSpec::FreeGroup { rank } => GroupUniverse::free_group(*rank),
            },
            "$.group",
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GroupSequenceSpec {
    Intervals {
        start: (i64, i64),
        end: (i64, i64),
        #[serde(default = "one")]
        step: i64,
    },
    Boxes {
        #[serde(default)]
        radii: Option<Vec<BoxRadius>>,
    },
    Balls,
    Powers {
        base: i64,
    },
    Explicit {
        sets: Vec<Vec<Value>>,
    },
}

impl GroupSequenceSpec {
    fn build(&self, group: &GroupUniverse) -> CliResult<GroupSubsetSequence> {
        let path = "$.sequence";
        let seq = match self {
            GroupSequenceSpec::Intervals { start, end, step } => GroupSubsetSequence::intervals(
                group,
                Affine::new(start.0, start.1),
                Affine::new(end.0, end.1),
                *step,
            ),
            GroupSequenceSpec::Boxes { radii: None } => GroupSubsetSequence::boxes(group),
            GroupSequenceSpec::Boxes { radii: Some(r) } => {
                GroupSubsetSequence::boxes_with(group, r.clone())
            }
            GroupSequenceSpec::Balls => Ok(GroupSubsetSequence::balls(group)),
            GroupSequenceSpec::Powers { base } => GroupSubsetSequence::powers(group, *base),
            GroupSequenceSpec::Explicit { sets } => {
                let sets = sets
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        s.iter()
                            .enumerate()
                            .map(|(j, v)| {
                                parse_element(group, v, &format!("{path}.sets[{i}][{j}]"))
                            })
                            .collect::<CliResult<Vec<_>>>()
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                GroupSubsetSequence::explicit(group, sets)
            }
        };
        cfg(seq, path)
    }
}

/// An element from JSON: an integer or coordinate list, or for free groups a
/// word string such as "aB" ("e" is the identity) or a list of signed letters.
pub fn parse_element(group: &GroupUniverse, v: &Value, path: &str) -> CliResult<Element> {
    let bad = |msg: &str| CliError::Config(Error::config(path, msg));
    let raw = match (group, v) {
        (GroupUniverse::FreeGroup(_), Value::String(s)) => {
            let mut w = Vec::new();
            for c in s.chars().filter(|c| *c != 'e') {
                if !c.is_ascii_alphabetic() {
                    return Err(bad("words use letters a..z and their capitals"));
                }
                let l = (c.to_ascii_lowercase() as u8 - b'a' + 1) as i8;
                w.push(if c.is_ascii_uppercase() { -l } else { l });
            }
            Element::Word(w)
        }
        (GroupUniverse::FreeGroup(_), Value::Array(a)) => Element::Word(
            a.iter()
                .map(|x| {
                    x.as_i64()
                        .and_then(|l| i8::try_from(l).ok())
                        .ok_or_else(|| bad("letters are small signed integers"))
                })
                .collect::<CliResult<_>>()?,
        ),
        (GroupUniverse::FreeGroup(_), _) => return Err(bad("expected a word")),
        (_, Value::Number(n)) => {
            Element::int(n.as_i64().ok_or_else(|| bad("expected an integer"))?)
        }
        (_, Value::Array(a)) => Element::Tuple(
            a.iter()
                .map(|x| {
                    x.as_i64()
                        .ok_or_else(|| bad("expected integer coordinates"))
                })
                .collect::<CliResult<_>>()?,
        ),
        _ => return Err(bad("expected an integer or a list of integers")),
    };
    let g = group.normalize(raw);
    cfg(group.check(&g), path)?;
    Ok(g)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SetSpec {
    Residue {
        #[serde(rename = "mod")]
        modulus: i64,
        classes: Vec<i64>,
        #[serde(default)]
        weights: Option<Vec<i64>>,
    },
    Explicit {
        elements: Vec<Value>,
    },
    Random {
        density: f64,
        seed: u64,
        window: (i64, i64),
    },
    Interval {
        lo: i64,
        hi: i64,
    },
    Intersection {
        parts: Vec<SetSpec>,
    },
}

impl SetSpec {
    fn build(&self, group: &GroupUniverse, path: &str, seed: Option<u64>) -> CliResult<DensitySet> {
        let set = match self {
            SetSpec::Residue {
                modulus,
                classes,
                weights,
            } => DensitySet::residue_weighted(
                *modulus,
                weights.clone().unwrap_or_else(|| vec![1]),
                classes,
            ),
            SetSpec::Explicit { elements } => Ok(DensitySet::explicit(
                elements
                    .iter()
                    .enumerate()
                    .map(|(i, v)| parse_element(group, v, &format!("{path}.elements[{i}]")))
                    .collect::<CliResult<Vec<_>>>()?,
            )),
            SetSpec::Random {
                density,
                seed: s,
                window,
            } => DensitySet::random(*density, seed.unwrap_or(*s), window.0, window.1),
            SetSpec::Interval { lo, hi } => Ok(DensitySet::Interval { lo: *lo, hi: *hi }),
            SetSpec::Intersection { parts } => Ok(DensitySet::Intersection(
                parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.build(group, &format!("{path}.parts[{i}]"), seed))
                    .collect::<CliResult<Vec<_>>>()?,
            )),
        };
        cfg(set, path)
    }
}

fn check_labels(ring: &FusionRing, labels: &[IrrepLabel], path: &str) -> CliResult<()> {
    for (i, l) in labels.iter().enumerate() {
        cfg(ring.check(l), &format!("{path}[{i}]"))?;
    }
    Ok(())
}

fn check_policy(p: &FixPolicy, path: &str) -> CliResult<()> {
    cfg(p.validate(), path)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryConfig {
    ring: RingSpec,
    sequence: SequenceSpec,
    n: usize,
    s: Vec<IrrepLabel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FolnerConfig {
    ring: RingSpec,
    sequence: SequenceSpec,
    labels: Vec<IrrepLabel>,
    policy: FixPolicy,
    /// Trace n = 1..=n_max instead of the tail window only.
    #[serde(default)]
    full_trace: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StabilizerConfig {
    ring: RingSpec,
    sequence: SequenceSpec,
    window: Vec<IrrepLabel>,
    policy: FixPolicy,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum ErgodicCheck {
    MeanConvergence,
    OrbitDecay,
    ConjugateEigen,
    Orbit,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    fn value(&self) -> Complex64 {
        match self {
            ComplexValue::Real(x) => Complex64::new(*x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(*re, *im),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ErgodicConfig {
    model: String,
    #[serde(default)]
    grid: Vec<Value>,
    #[serde(default)]
    rank: Option<usize>,
    #[serde(default)]
    m: Option<u64>,
    #[serde(default)]
    n: Option<u64>,
    check: ErgodicCheck,
    #[serde(default)]
    sequence: Option<SequenceSpec>,
    #[serde(default)]
    n_max: Option<usize>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    horizon: Option<usize>,
    #[serde(default)]
    x: Option<Vec<ComplexValue>>,
    #[serde(default)]
    y: Option<Vec<ComplexValue>>,
    #[serde(default)]
    witness: Option<(IrrepLabel, IrrepLabel)>,
    #[serde(default)]
    window: Option<Vec<IrrepLabel>>,
    #[serde(default)]
    policy: Option<FixPolicy>,
    #[serde(default)]
    envelope: Option<Envelope>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixRatioConfig {
    group: GroupSpec,
    sequence: GroupSequenceSpec,
    element: Value,
    #[serde(default = "left")]
    side: Side,
    n_max: usize,
    #[serde(default)]
    policy: Option<FixPolicy>,
    /// Classify these elements too (G_Σ on a window).
    #[serde(default)]
    window: Option<Vec<Value>>,
}

fn left() -> Side {
    Side::Left
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityConfig {
    #[serde(default)]
    group: Option<GroupSpec>,
    #[serde(default)]
    sequence: Option<GroupSequenceSpec>,
    #[serde(default)]
    set: Option<SetSpec>,
    /// Weighted density on a fusion ring instead of a group.
    #[serde(default)]
    ring: Option<RingSpec>,
    #[serde(default)]
    ring_sequence: Option<SequenceSpec>,
    #[serde(default)]
    labels: Option<Vec<IrrepLabel>>,
    n_max: usize,
    #[serde(default = "one_usize")]
    tail: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApConfig {
    group: GroupSpec,
    set: SetSpec,
    b: Value,
    k: usize,
    n_max: usize,
    /// Starting points a range over the spiral window of this radius.
    radius: usize,
    #[serde(default = "left")]
    side: Side,
    #[serde(default)]
    all: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureConfig {
    group: GroupSpec,
    sequence: GroupSequenceSpec,
    set: SetSpec,
    /// Cylinder conditions [s, bit].
    event: Vec<(Value, bool)>,
    n_max: usize,
    /// Track |μ_n(b⁻¹·A) − μ_n(A)| for this b.
    #[serde(default)]
    shift: Option<Value>,
    #[serde(default)]
    policy: Option<FixPolicy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    ring: RingSpec,
    #[serde(default)]
    window: Option<Vec<IrrepLabel>>,
    #[serde(default)]
    window_size: Option<usize>,
    #[serde(default)]
    assoc_span: Option<usize>,
    #[serde(default)]
    assoc_samples: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> CliResult<T> {
    from_json(text).map_err(CliError::Config)
}

fn ring_of(spec: &RingSpec) -> CliResult<FusionRing> {
    spec.build("$.ring").map_err(CliError::Config)
}

/// Validates `config_text` for `command` and runs it.
pub fn execute(command: Command, config_text: &str, seed: Option<u64>) -> CliResult<Outcome> {
    match command {
        Command::Boundary => run_boundary(parse(config_text)?),
        Command::FolnerCheck => run_folner(parse(config_text)?),
        Command::Stabilizer => run_stabilizer(parse(config_text)?),
        Command::Ergodic => run_ergodic(parse(config_text)?),
        Command::FixRatio => run_fix_ratio(parse(config_text)?),
        Command::Density => run_density(parse(config_text)?, seed),
        Command::ApSearch => run_ap(parse(config_text)?, seed),
        Command::Measure => run_measure(parse(config_text)?, seed),
        Command::VerifyRing => run_verify(parse(config_text)?),
    }
}

fn ok(table: Table) -> CliResult<Outcome> {
    Ok(Outcome {
        table,
        failed: false,
    })
}

fn run_boundary(c: BoundaryConfig) -> CliResult<Outcome> {
    let ring = ring_of(&c.ring)?;
    let seq = c.sequence.build(&ring, "$.sequence")?;
    check_labels(&ring, &c.s, "$.s")?;
    cfg(seq.check_index(c.n), "$.n")?;
    let f = compute(seq.term(c.n))?;
    let b = compute(boundary(&f, &c.s))?;
    let mut t = Table::new(&["label", "part", "dim"]);
    for (part, labels) in [("inner", &b.inner), ("outer", &b.outer)] {
        for l in labels {
            t.push([
                l.to_string(),
                part.to_string(),
                compute(ring.dim(l))?.to_string(),
            ]);
        }
    }
    t.note("weighted_set", f.weighted_card());
    t.note("weighted_inner", &b.weighted_inner);
    t.note("weighted_outer", &b.weighted_outer);
    t.note(
        "ratio",
        crate::calculus::ratio(&b.weighted_total(), &f.weighted_card()),
    );
    ok(t)
}

fn run_folner(c: FolnerConfig) -> CliResult<Outcome> {
    let ring = ring_of(&c.ring)?;
    let seq = c.sequence.build(&ring, "$.sequence")?;
    check_labels(&ring, &c.labels, "$.labels")?;
    check_policy(&c.policy, "$.policy")?;
    cfg(seq.check_index(c.policy.n_max), "$.policy.n_max")?;
    let mut t = Table::new(&["label", "n", "ratio", "verdict"]);
    for l in &c.labels {
        let report = compute(fixes(&seq, l, &c.policy))?;
        let trace = if c.full_trace {
            compute(ratio_trace(&seq, l, 1..=c.policy.n_max))?
        } else {
            report.trace.clone()
        };
        for p in trace {
            t.push([
                l.to_string(),
                p.n.to_string(),
                p.ratio.to_string(),
                report.verdict.to_string(),
            ]);
        }
        t.note(&format!("verdict[{l}]"), report.verdict);
    }
    ok(t)
}

fn run_stabilizer(c: StabilizerConfig) -> CliResult<Outcome> {
    let ring = ring_of(&c.ring)?;
    let seq = c.sequence.build(&ring, "$.sequence")?;
    check_labels(&ring, &c.window, "$.window")?;
    check_policy(&c.policy, "$.policy")?;
    cfg(seq.check_index(c.policy.n_max), "$.policy.n_max")?;
    let st = compute(classify_window(&seq, &c.window, &c.policy))?;
    let mut t = Table::new(&["label", "verdict", "final_ratio"]);
    for (l, r) in &st.reports {
        t.push([
            l.to_string(),
            r.verdict.to_string(),
            r.final_ratio().to_string(),
        ]);
    }
    let members: Vec<String> = st.members.iter().map(ToString::to_string).collect();
    t.note("members", members.join(" "));
    ok(t)
}

fn vector(v: &Option<Vec<ComplexValue>>, key: &str) -> CliResult<VectorH> {
    let v = v.as_ref().ok_or_else(|| {
        CliError::Config(Error::config(
            format!("$.{key}"),
            format!("this check requires \"{key}\""),
        ))
    })?;
    Ok(VectorH::new(v.iter().map(ComplexValue::value).collect()))
}

fn run_ergodic(c: ErgodicConfig) -> CliResult<Outcome> {
    let spec = ModelSpec {
        model: c.model.clone(),
        grid: c.grid.clone(),
        rank: c.rank,
        m: c.m,
        n: c.n,
    };
    let model = spec.build("$").map_err(CliError::Config)?;
    let ring = model.ring().clone();
    let seq = match &c.sequence {
        Some(s) => Some(s.build(&ring, "$.sequence")?),
        None => None,
    };
    let need_seq = || {
        seq.clone().ok_or_else(|| {
            CliError::Config(Error::config(
                "$.sequence",
                "this check requires \"sequence\"",
            ))
        })
    };
    let n_max = c.n_max.unwrap_or(100);
    for (key, v) in [("x", &c.x), ("y", &c.y)] {
        if let Some(v) = v {
            if v.len() != model.len() {
                return Err(CliError::Config(Error::config(
                    format!("$.{key}"),
                    format!(
                        "expected {} coordinates, one per spectral point",
                        model.len()
                    ),
                )));
            }
        }
    }
    let points: Vec<String> = model.points().iter().map(ToString::to_string).collect();
    match c.check {
        ErgodicCheck::MeanConvergence => {
            let seq = need_seq()?;
            let tol = c.tol.unwrap_or(IDENTITY_TOL);
            let rep = compute(verify_mean_convergence(&model, &seq, n_max, tol))?;
            let mut t = Table::new(&["n", "max_deviation"]);
            for (n, d) in &rep.trace {
                t.push([n.to_string(), fmt_float(*d)]);
            }
            let fixed: Vec<&str> = rep
                .projector
                .fixed_points()
                .map(|i| points[i].as_str())
                .collect();
            t.note("fixed_points", fixed.join(" "));
            t.note("tp_residual", fmt_float(rep.tp_residual));
            t.note("pt_residual", fmt_float(rep.pt_residual));
            t.note("passed", rep.passed());
            Ok(Outcome {
                failed: !rep.passed(),
                table: t,
            })
        }
        ErgodicCheck::OrbitDecay => {
            let seq = need_seq()?;
            let (x, y) = (vector(&c.x, "x")?, vector(&c.y, "y")?);
            let (a, b) = c.witness.clone().ok_or_else(|| {
                CliError::Config(Error::config(
                    "$.witness",
                    "orbit_decay requires \"witness\"",
                ))
            })?;
            check_labels(&ring, &[a.clone(), b.clone()], "$.witness")?;
            let policy = match c.policy {
                Some(p) => p,
                None => cfg(FixPolicy::new(n_max, 0.05, 10.min(n_max)), "$.n_max")?,
            };
            check_policy(&policy, "$.policy")?;
            let options = DecayOptions {
                n_max,
                tol: c.tol.unwrap_or(DECAY_TOL),
                tail_window: policy.tail_window,
                envelope: c.envelope,
            };
            let d = compute(verify_orbit_decay(
                &model,
                &seq,
                &x,
                &y,
                (&a, &b),
                &policy,
                &options,
            ))?;
            let mut t = Table::new(&["n", "norm"]);
            for (n, v) in &d.trace {
                t.push([n.to_string(), fmt_float(*v)]);
            }
            t.note("final", fmt_float(d.final_value()));
            t.note("passed", d.passed);
            Ok(Outcome {
                failed: !d.passed,
                table: t,
            })
        }
        ErgodicCheck::ConjugateEigen => {
            let tol = c.tol.unwrap_or(IDENTITY_TOL);
            let rep = compute(verify_conjugate_eigenvectors(
                &model,
                c.horizon.unwrap_or(30),
                tol,
            ))?;
            let mut t = Table::new(&["label", "point", "deviation", "conjugate_deviation"]);
            for v in &rep.violations {
                t.push([
                    v.label.to_string(),
                    points[v.point].clone(),
                    fmt_float(v.deviations.0),
                    fmt_float(v.deviations.1),
                ]);
            }
            t.note("checked", rep.checked);
            t.note("premises_met", rep.premises_met);
            Ok(Outcome {
                failed: !rep.violations.is_empty(),
                table: t,
            })
        }
        ErgodicCheck::Orbit => {
            let (x, y) = (vector(&c.x, "x")?, vector(&c.y, "y")?);
            let window = c
                .window
                .clone()
                .unwrap_or_else(|| ring.enumerate(c.horizon.unwrap_or(10)));
            check_labels(&ring, &window, "$.window")?;
            let tol = c.tol.unwrap_or(IDENTITY_TOL);
            let mut t = Table::new(&["alpha", "beta", "residual"]);
            match compute(orbit_test(&model, &x, &y, &window, tol))? {
                OrbitVerdict::Witness {
                    alpha,
                    beta,
                    residual,
                } => {
                    t.push([alpha.to_string(), beta.to_string(), fmt_float(residual)]);
                    t.note("verdict", "witness");
                }
                OrbitVerdict::NotFoundInWindow => t.note("verdict", "not_found_in_window"),
            }
            if let Some(seq) = &seq {
                let p = compute(fixed_projector(&model, seq, n_max))?;
                let fixed: Vec<&str> = p.fixed_points().map(|i| points[i].as_str()).collect();
                t.note("fixed_points", fixed.join(" "));
            }
            ok(t)
        }
    }
}

fn run_fix_ratio(c: FixRatioConfig) -> CliResult<Outcome> {
    let group = c.group.build()?;
    let seq = c.sequence.build(&group)?;
    let g = parse_element(&group, &c.element, "$.element")?;
    cfg(seq.check_index(c.n_max), "$.n_max")?;
    let trace = (1..=c.n_max)
        .map(|n| Ok((n, TraceValue::Exact(fixing_ratio(&seq, &g, c.side, n)?))))
        .collect::<crate::Result<Vec<_>>>();
    let trace = compute(trace)?;
    let mut t = Table::new(&["n", "ratio"]);
    for (n, v) in &trace {
        t.push([n.to_string(), v.to_string()]);
    }
    if let Some(p) = &c.policy {
        check_policy(p, "$.policy")?;
        cfg(seq.check_index(p.n_max), "$.policy.n_max")?;
        let window = match &c.window {
            Some(w) => w
                .iter()
                .enumerate()
                .map(|(i, v)| parse_element(&group, v, &format!("$.window[{i}]")))
                .collect::<CliResult<Vec<_>>>()?,
            None => vec![g.clone()],
        };
        let st = compute(classify_g_sigma(&seq, &window, p, c.side))?;
        for (e, r) in &st.reports {
            t.note(&format!("verdict[{e}]"), r.verdict);
        }
        if !st.anomalies.is_empty() {
            t.note("closure_anomalies", st.anomalies.len());
        }
    }
    ok(t)
}

fn run_density(c: DensityConfig, seed: Option<u64>) -> CliResult<Outcome> {
    let mut t = Table::new(&["n", "ratio"]);
    let estimate = if let Some(ring_spec) = &c.ring {
        let ring = ring_of(ring_spec)?;
        let seq = c
            .ring_sequence
            .as_ref()
            .ok_or_else(|| {
                CliError::Config(Error::config(
                    "$.ring_sequence",
                    "ring densities need \"ring_sequence\"",
                ))
            })?
            .build(&ring, "$.ring_sequence")?;
        let labels = c.labels.clone().ok_or_else(|| {
            CliError::Config(Error::config("$.labels", "ring densities need \"labels\""))
        })?;
        check_labels(&ring, &labels, "$.labels")?;
        let set: std::collections::BTreeSet<IrrepLabel> = labels.into_iter().collect();
        let d = compute(weighted_upper_density(
            &seq,
            &|l| set.contains(l),
            c.n_max,
            c.tail,
        ))?;
        for (n, r) in &d.trace {
            t.push([n.to_string(), r.to_string()]);
        }
        d.estimate
    } else {
        let missing = |k: &str| {
            CliError::Config(Error::config(
                format!("$.{k}"),
                format!("group densities need \"{k}\""),
            ))
        };
        let group = c.group.as_ref().ok_or_else(|| missing("group"))?.build()?;
        let seq = c
            .sequence
            .as_ref()
            .ok_or_else(|| missing("sequence"))?
            .build(&group)?;
        let set = c
            .set
            .as_ref()
            .ok_or_else(|| missing("set"))?
            .build(&group, "$.set", seed)?;
        let d = compute(upper_density(&seq, &set, c.n_max, c.tail))?;
        for (n, r) in &d.trace {
            t.push([n.to_string(), r.to_string()]);
        }
        d.estimate
    };
    t.note("estimate", estimate);
    ok(t)
}

fn run_ap(c: ApConfig, seed: Option<u64>) -> CliResult<Outcome> {
    let group = c.group.build()?;
    let set = c.set.build(&group, "$.set", seed)?;
    let b = parse_element(&group, &c.b, "$.b")?;
    let bounds = ApBounds {
        n_max: c.n_max,
        a_window: group.spiral(c.radius),
    };
    let witnesses = if c.all {
        compute(ap_search_all(&group, &set, &b, c.k, &bounds, c.side))?
    } else {
        vec![compute(ap_search(&group, &set, &b, c.k, &bounds, c.side))?]
    };
    let mut t = Table::new(&["a", "n", "elements"]);
    for w in &witnesses {
        let elems: Vec<String> = w.elements.iter().map(ToString::to_string).collect();
        t.push([w.a.to_string(), w.n.to_string(), elems.join(" ")]);
    }
    t.note("j_range", format!("0..{}", c.k));
    t.note("witnesses", witnesses.len());
    ok(t)
}

fn run_measure(c: MeasureConfig, seed: Option<u64>) -> CliResult<Outcome> {
    let group = c.group.build()?;
    let seq = c.sequence.build(&group)?;
    let set = c.set.build(&group, "$.set", seed)?;
    let event = c
        .event
        .iter()
        .enumerate()
        .map(|(i, (v, bit))| Ok((parse_element(&group, v, &format!("$.event[{i}][0]"))?, *bit)))
        .collect::<CliResult<Vec<_>>>()?;
    cfg(seq.check_index(c.n_max), "$.n_max")?;
    match &c.shift {
        None => {
            let mut t = Table::new(&["n", "measure"]);
            for n in 1..=c.n_max {
                t.push([
                    n.to_string(),
                    compute(empirical_measure_eval(&seq, &set, &event, n))?.to_string(),
                ]);
            }
            ok(t)
        }
        Some(v) => {
            let b = parse_element(&group, v, "$.shift")?;
            let policy = match c.policy {
                Some(p) => p,
                None => cfg(FixPolicy::new(c.n_max, 0.05, 10.min(c.n_max)), "$.n_max")?,
            };
            check_policy(&policy, "$.policy")?;
            let trend = compute(verify_invariance_trend(&seq, &set, &b, &event, &policy))?;
            let mut t = Table::new(&["n", "difference", "bound"]);
            for r in &trend.rows {
                t.push([
                    r.n.to_string(),
                    r.difference.to_string(),
                    r.bound.to_string(),
                ]);
            }
            t.note("constant", &trend.constant);
            t.note("passed", trend.passed());
            Ok(Outcome {
                failed: !trend.passed(),
                table: t,
            })
        }
    }
}

fn run_verify(c: VerifyConfig) -> CliResult<Outcome> {
    let ring = ring_of(&c.ring)?;
    let window = match (&c.window, c.window_size) {
        (Some(w), _) => {
            check_labels(&ring, w, "$.window")?;
            w.clone()
        }
        (None, size) => ring.enumerate(size.unwrap_or(100)),
    };
    let defaults = AxiomCheckOptions::default();
    let opts = AxiomCheckOptions {
        assoc_span: c.assoc_span.unwrap_or(defaults.assoc_span),
        assoc_samples: c.assoc_samples.unwrap_or(defaults.assoc_samples),
        seed: c.seed.unwrap_or(defaults.seed),
    };
    let report = compute(verify_ring_axioms(&ring, &window, &opts))?;
    let mut t = Table::new(&["violation"]);
    for v in &report.violations {
        t.push([v.to_string()]);
    }
    t.note("labels_checked", report.labels_checked);
    t.note("pairs_checked", report.pairs_checked);
    t.note("triples_checked", report.triples_checked);
    Ok(Outcome {
        failed: !report.is_clean(),
        table: t,
    })
}

/// Parses arguments, runs, writes output and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> i32 {
    let Some(path) = &cli.config else {
        eprintln!("configuration error: --config <file> is required");
        return 1;
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("configuration error: cannot read {}: {e}", path.display());
            return 1;
        }
    };
    let outcome = match execute(cli.command, &text, cli.seed) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let body = outcome.table.render(cli.format);
    let written = match &cli.out {
        Some(p) => std::fs::write(p, body.as_bytes()),
        None => {
            print!("{body}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("computation error: cannot write output: {e}");
        return 2;
    }
    if !cli.quiet && cli.format == Format::Csv {
        let mut s = String::new();
        for (k, v) in &outcome.table.summary {
            let _ = writeln!(s, "{k}: {v}");
        }
        eprint!("{s}");
    }
    if outcome.failed {
        3
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Ratio {
        Ratio::new(n.into(), d.into())
    }

    #[test]
    fn trace_formatting() {
        let trace: Vec<_> = (1..=5)
            .map(|n| (n, TraceValue::Exact(q(2, n as i64 + 1))))
            .collect();
        assert_eq!(
            emit_trace(&trace, Format::Csv),
            "n,ratio\n1,1\n2,2/3\n3,1/2\n4,2/5\n5,1/3\n"
        );
        assert_eq!(emit_trace(&[], Format::Csv), "n,ratio\n");
        assert_eq!(fmt_float(2.0 / 401.0), "4.98753117207e-3");
        assert_eq!(TraceValue::Float(1.0).to_string(), "1.00000000000e0");
    }

    #[test]
    fn csv_quotes_tuple_labels() {
        let mut t = Table::new(&["label", "verdict"]);
        t.push(["(1,-4)".to_string(), "Fixes".to_string()]);
        assert_eq!(t.render(Format::Csv), "label,verdict\n\"(1,-4)\",Fixes\n");
    }

    #[test]
    fn stabilizer_command_on_odd_intervals() {
        let text = r#"{
            "ring": {"family": "integer_dual"},
            "sequence": {"kind": "intervals", "start": [0, 1], "end": [2, 1], "step": 2},
            "window": [-3, -2, -1, 0, 1, 2, 3],
            "policy": {"n_max": 200, "epsilon": 0.05, "tail_window": 10}
        }"#;
        let out = execute(Command::Stabilizer, text, None).unwrap();
        let verdicts: Vec<(&str, &str)> = out
            .table
            .rows
            .iter()
            .map(|r| (r[0].as_str(), r[1].as_str()))
            .collect();
        assert_eq!(verdicts[0], ("-3", "DoesNotFix"));
        assert_eq!(verdicts[1], ("-2", "Fixes"));
        assert_eq!(verdicts[3], ("0", "Fixes"));
        assert_eq!(out.table.rows[4][2], "2");
    }

    #[test]
    fn config_errors_carry_paths() {
        let err = execute(Command::Stabilizer, r#"{"ring": {"family": "su2"}}"#, None).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let text = r#"{
            "ring": {"family": "su2"},
            "sequence": {"kind": "initial_segments"},
            "window": [0, -1],
            "policy": {"n_max": 20, "epsilon": 0.05, "tail_window": 5}
        }"#;
        match execute(Command::Stabilizer, text, None).unwrap_err() {
            CliError::Config(Error::Config { path, .. }) => assert_eq!(path, "$.window[1]"),
            other => panic!("{other}"),
        }
        let text = r#"{
            "ring": {"family": "su2"},
            "sequence": {"kind": "initial_segments"},
            "window": [0],
            "policy": {"n_max": 20, "epsilon": 1.5, "tail_window": 5}
        }"#;
        assert!(matches!(
            execute(Command::Stabilizer, text, None),
            Err(CliError::Config(Error::Config { ref path, .. })) if path == "$.policy"
        ));
    }

    #[test]
    fn verify_ring_flags_failures() {
        let clean = execute(
            Command::VerifyRing,
            r#"{"ring": {"family": "su2"}, "window_size": 9}"#,
            None,
        )
        .unwrap();
        assert!(!clean.failed);
        assert!(clean.table.rows.is_empty());
        let broken = r#"{"ring": {
            "labels": [{"id": 0, "dim": 1, "conj": 0}, {"id": 1, "dim": 1, "conj": 1}],
            "fusion": [[0,0,0,1],[0,1,1,1],[1,0,1,1],[1,1,1,1]]
        }, "window": [0, 1]}"#;
        assert!(execute(Command::VerifyRing, broken, None).unwrap().failed);
    }

    #[test]
    fn ergodic_orbit_decay_command() {
        let text = r#"{
            "model": "integer_dual", "grid": ["1"],
            "sequence": {"kind": "symmetric_intervals"},
            "check": "orbit_decay", "n_max": 200, "tol": 0.005,
            "x": [1, 1], "y": [1, -1], "witness": [1, 0]
        }"#;
        let out = execute(Command::Ergodic, text, None).unwrap();
        assert!(!out.failed);
        assert_eq!(out.table.rows.len(), 200);
        assert_eq!(
            out.table.rows[0],
            vec!["1".to_string(), fmt_float(2.0 / 3.0)]
        );
        let bad = text.replace("\"tol\"", "\"tolerance\"");
        assert!(matches!(
            execute(Command::Ergodic, &bad, None),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn free_group_words_parse() {
        let f2 = GroupUniverse::free_group(2).unwrap();
        let g = parse_element(&f2, &serde_json::json!("aBb"), "$").unwrap();
        assert_eq!(g, Element::Word(vec![1]));
        assert_eq!(
            parse_element(&f2, &serde_json::json!("e"), "$").unwrap(),
            f2.identity()
        );
        assert!(parse_element(&f2, &serde_json::json!("c"), "$").is_err());
    }

    #[test]
    fn seed_flag_overrides_random_sets() {
        let text = r#"{
            "group": {"group": "free_abelian"},
            "set": {"kind": "random", "density": 0.6, "seed": 1, "window": [0, 100]},
            "b": 1, "k": 3, "n_max": 20, "radius": 100
        }"#;
        let a = execute(Command::ApSearch, text, None).unwrap().table;
        let b = execute(Command::ApSearch, text, Some(1)).unwrap().table;
        assert_eq!(a, b);
    }
}
