//! Experiment configuration files (TOML).
//!
//! Every number may be written as a TOML number or as a string holding a
//! decimal or a fraction such as `"1/3"`. Errors carry the line of the
//! offending key or section.

use std::ops::Range;
use std::path::{Path, PathBuf};

use accim::analysis::{HoleFamily, SolveOptions};
use accim::maps::{Branch, Form, Hole, PiecewiseExpandingMap};
use accim::montecarlo::InitialMeasure;
use accim::tower::{HoleBound, TowerOptions};
use accim::{Error, Interval, Result};
use serde::Deserialize;
use toml::Spanned;

/// A number or a fraction string.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Num {
    Float(f64),
    Text(String),
}

impl Num {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Num::Float(v) => Ok(*v),
            Num::Text(s) => parse_number(s),
        }
    }
}

/// Parses `"0.25"`, `"1/3"` or `"-2 / 7"`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let bad = || format!("cannot read {s:?} as a number or fraction");
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            a / b
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
enum FormSpec {
    Affine {
        intercept: Num,
        slope: Num,
    },
    Polynomial {
        coeffs: Vec<Num>,
    },
    AffineSine {
        intercept: Num,
        slope: Num,
        amplitude: Num,
        frequency: Num,
        #[serde(default)]
        phase: Option<Num>,
    },
}

impl FormSpec {
    fn build(&self) -> std::result::Result<Form, String> {
        Ok(match self {
            FormSpec::Affine { intercept, slope } => Form::Affine {
                intercept: intercept.value()?,
                slope: slope.value()?,
            },
            FormSpec::Polynomial { coeffs } => Form::Polynomial {
                coeffs: coeffs.iter().map(Num::value).collect::<std::result::Result<_, _>>()?,
            },
            FormSpec::AffineSine {
                intercept,
                slope,
                amplitude,
                frequency,
                phase,
            } => Form::AffineSine {
                intercept: intercept.value()?,
                slope: slope.value()?,
                amplitude: amplitude.value()?,
                frequency: frequency.value()?,
                phase: phase.as_ref().map_or(Ok(0.0), Num::value)?,
            },
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchSpec {
    domain: [Num; 2],
    form: FormSpec,
    #[serde(default)]
    shift: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MapKind {
    ModOne,
    Branches,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapSpec {
    kind: MapKind,
    #[serde(default)]
    lift: Option<FormSpec>,
    #[serde(default)]
    branches: Vec<BranchSpec>,
    alpha: Num,
    holder_const: Num,
    mu: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoleSpec {
    #[serde(default)]
    intervals: Vec<[Num; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FamilyKind {
    Centered,
    Right,
    Explicit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberSpec {
    s: Num,
    intervals: Vec<[Num; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    kind: FamilyKind,
    #[serde(default)]
    center: Option<Num>,
    #[serde(default)]
    left: Option<Num>,
    #[serde(default)]
    sizes: Vec<Num>,
    #[serde(default)]
    members: Vec<MemberSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TowerSpec {
    delta: Option<Num>,
    xi: Option<Num>,
    l_max: Option<usize>,
    l_cap: Option<usize>,
    tail_rel: Option<Num>,
    max_nodes: Option<usize>,
    hole_bound: Option<HoleBound>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSpec {
    samples: Option<usize>,
    tol: Option<Num>,
    max_iter: Option<usize>,
    grid: Option<usize>,
    ulam_bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MonteCarloSpec {
    particles: Option<u64>,
    steps: Option<usize>,
    seed: Option<u64>,
    initial: Option<InitialMeasure>,
    hist_step: Option<usize>,
    bins: Option<usize>,
    fit_from: Option<usize>,
    fit_to: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    map: Spanned<MapSpec>,
    hole: Option<Spanned<HoleSpec>>,
    family: Option<Spanned<FamilySpec>>,
    #[serde(default)]
    tower: Option<Spanned<TowerSpec>>,
    #[serde(default)]
    solver: Option<Spanned<SolverSpec>>,
    #[serde(default)]
    montecarlo: Option<Spanned<MonteCarloSpec>>,
    #[serde(default)]
    output: Option<OutputSpec>,
}

#[derive(Clone, Debug)]
pub struct MonteCarloConfig {
    pub particles: u64,
    pub steps: usize,
    pub seed: u64,
    pub initial: InitialMeasure,
    /// Step at which to histogram the survivors, if any.
    pub hist_step: Option<usize>,
    pub bins: usize,
    pub fit_from: usize,
    pub fit_to: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            particles: 1_000_000,
            steps: 20,
            seed: 0,
            initial: InitialMeasure::Uniform,
            hist_step: None,
            bins: 64,
            fit_from: 5,
            fit_to: 15,
        }
    }
}

/// A parsed, validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub map: PiecewiseExpandingMap,
    pub hole: Hole,
    pub family: Option<HoleFamily>,
    pub solve: SolveOptions,
    pub ulam_bins: Option<usize>,
    pub montecarlo: MonteCarloConfig,
    pub output_dir: PathBuf,
}

struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn line(&self, span: &Range<usize>) -> usize {
        self.0[..span.start.min(self.0.len())].matches('\n').count() + 1
    }

    fn err(&self, span: &Range<usize>, msg: impl std::fmt::Display) -> Error {
        Error::Config {
            line: Some(self.line(span)),
            msg: msg.to_string(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: None,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let lines = Lines(text);
    let spec: FileSpec = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| lines.line(&s)),
        msg: e.message().to_string(),
    })?;

    let map = build_map(&spec.map, &lines)?;

    let hole = match &spec.hole {
        Some(h) => {
            let intervals = read_intervals(&h.get_ref().intervals).map_err(|m| lines.err(&h.span(), m))?;
            Hole::new(intervals).map_err(|e| lines.err(&h.span(), e))?
        }
        None => Hole::empty(),
    };

    let family = spec.family.as_ref().map(|f| build_family(f, &lines)).transpose()?;

    let mut solve = SolveOptions::default();
    if let Some(t) = &spec.tower {
        let span = t.span();
        let t = t.get_ref();
        let num = |n: &Option<Num>| n.as_ref().map(Num::value).transpose().map_err(|m| lines.err(&span, m));
        solve.delta = num(&t.delta)?;
        solve.xi = num(&t.xi)?;
        let d = TowerOptions::default();
        solve.tower = TowerOptions {
            l_max: t.l_max.unwrap_or(d.l_max),
            l_cap: t.l_cap.unwrap_or(d.l_cap),
            tail_rel: num(&t.tail_rel)?.unwrap_or(d.tail_rel),
            max_nodes: t.max_nodes.unwrap_or(d.max_nodes),
            hole_bound: t.hole_bound.unwrap_or(d.hole_bound),
        };
        if let Some(delta) = solve.delta {
            if !(delta > 0.0) {
                return Err(lines.err(&span, format!("delta must be positive, got {delta}")));
            }
        }
    }
    let mut ulam_bins = None;
    if let Some(s) = &spec.solver {
        let span = s.span();
        let s = s.get_ref();
        if let Some(g) = s.samples {
            if g < 2 {
                return Err(lines.err(&span, "samples must be at least 2"));
            }
            solve.samples = Some(g);
        }
        if let Some(tol) = &s.tol {
            solve.tol = tol.value().map_err(|m| lines.err(&span, m))?;
        }
        solve.max_iter = s.max_iter.unwrap_or(solve.max_iter);
        if let Some(g) = s.grid {
            if g == 0 {
                return Err(lines.err(&span, "grid must be positive"));
            }
            solve.grid = g;
        }
        ulam_bins = s.ulam_bins;
    }

    let mut montecarlo = MonteCarloConfig::default();
    if let Some(m) = &spec.montecarlo {
        let span = m.span();
        let m = m.get_ref();
        montecarlo.particles = m.particles.unwrap_or(montecarlo.particles);
        montecarlo.steps = m.steps.unwrap_or(montecarlo.steps);
        montecarlo.seed = m.seed.unwrap_or(montecarlo.seed);
        montecarlo.initial = m.initial.unwrap_or_default();
        montecarlo.hist_step = m.hist_step;
        montecarlo.bins = m.bins.unwrap_or(montecarlo.bins);
        montecarlo.fit_from = m.fit_from.unwrap_or(montecarlo.fit_from);
        montecarlo.fit_to = m.fit_to.unwrap_or(montecarlo.fit_to);
        if montecarlo.particles == 0 {
            return Err(lines.err(&span, "particles must be at least 1"));
        }
        if montecarlo.fit_from >= montecarlo.fit_to {
            return Err(lines.err(&span, "fit_from must be below fit_to"));
        }
    }

    Ok(ExperimentConfig {
        map,
        hole,
        family,
        solve,
        ulam_bins,
        montecarlo,
        output_dir: spec.output.and_then(|o| o.dir).unwrap_or_else(|| PathBuf::from("out")),
    })
}

fn read_intervals(raw: &[[Num; 2]]) -> std::result::Result<Vec<Interval>, String> {
    raw.iter()
        .map(|[a, b]| {
            let (a, b) = (a.value()?, b.value()?);
            if a >= b {
                return Err(format!("interval ({a}, {b}) is empty or reversed"));
            }
            Ok(Interval::new(a, b))
        })
        .collect()
}

fn build_map(spec: &Spanned<MapSpec>, lines: &Lines) -> Result<PiecewiseExpandingMap> {
    let span = spec.span();
    let m = spec.get_ref();
    let err = |msg: String| lines.err(&span, msg);
    let alpha = m.alpha.value().map_err(err)?;
    let holder = m.holder_const.value().map_err(err)?;
    let mu = m.mu.value().map_err(err)?;
    let built = match m.kind {
        MapKind::ModOne => {
            let lift = m.lift.as_ref().ok_or_else(|| err("mod_one maps need a `lift`".into()))?;
            if !m.branches.is_empty() {
                return Err(err("mod_one maps take a `lift`, not `branches`".into()));
            }
            PiecewiseExpandingMap::mod_one(lift.build().map_err(err)?, alpha, holder, mu)
        }
        MapKind::Branches => {
            if m.branches.is_empty() {
                return Err(err("`branches` maps need at least one [[map.branches]] entry".into()));
            }
            let branches = m
                .branches
                .iter()
                .map(|b| {
                    let [lo, hi] = &b.domain;
                    let shift = b.shift.as_ref().map_or(Ok(0.0), Num::value)?;
                    Ok(Branch::new(Interval::new(lo.value()?, hi.value()?), b.form.build()?, shift))
                })
                .collect::<std::result::Result<Vec<_>, String>>()
                .map_err(err)?;
            PiecewiseExpandingMap::from_branches(branches, alpha, holder, mu)
        }
    };
    built.map_err(|e| lines.err(&span, e))
}

fn build_family(spec: &Spanned<FamilySpec>, lines: &Lines) -> Result<HoleFamily> {
    let span = spec.span();
    let f = spec.get_ref();
    let err = |msg: String| lines.err(&span, msg);
    let sizes = f
        .sizes
        .iter()
        .map(Num::value)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(err)?;
    match f.kind {
        FamilyKind::Centered => {
            let c = f.center.as_ref().ok_or_else(|| err("centered families need `center`".into()))?;
            HoleFamily::centered(c.value().map_err(err)?, &sizes)
        }
        FamilyKind::Right => {
            let a = f.left.as_ref().ok_or_else(|| err("right families need `left`".into()))?;
            HoleFamily::right(a.value().map_err(err)?, &sizes)
        }
        FamilyKind::Explicit => {
            let members = f
                .members
                .iter()
                .map(|m| {
                    let s = m.s.value().map_err(err)?;
                    let iv = read_intervals(&m.intervals).map_err(err)?;
                    let hole = Hole::new(iv).map_err(|e| Error::Family(e.to_string()))?;
                    Ok((s, hole))
                })
                .collect::<Result<Vec<_>>>()?;
            HoleFamily::explicit(members)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MARKOV: &str = r#"
[map]
kind = "mod_one"
lift = { form = "affine", intercept = 0, slope = 3 }
alpha = 1
holder_const = 0
mu = 3

[hole]
intervals = [["1/3", "2/3"]]
"#;

    #[test]
    fn parses_fractions() {
        assert_eq!(parse_number("1/4").unwrap(), 0.25);
        assert_eq!(parse_number(" -2 / 8 ").unwrap(), -0.25);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("one").is_err());
    }

    #[test]
    fn markov_config() {
        let c = parse_config(MARKOV).unwrap();
        assert_eq!(c.hole.intervals()[0], Interval::new(1.0 / 3.0, 2.0 / 3.0));
        assert_eq!(c.map.branches().len(), 3);
        assert!(c.family.is_none());
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn errors_carry_lines() {
        let bad = MARKOV.replace("mu = 3", "mu = \"three\"");
        match parse_config(&bad) {
            Err(Error::Config { line: Some(l), .. }) => assert_eq!(l, 2),
            other => panic!("{other:?}"),
        }
        let unknown = format!("{MARKOV}\n[solver]\nsamplez = 3\n");
        match parse_config(&unknown) {
            Err(Error::Config { line: Some(l), msg }) => {
                assert_eq!(l, 13, "{msg}");
                assert!(msg.contains("samplez"));
            }
            other => panic!("{other:?}"),
        }
        match parse_config("[map\n") {
            Err(Error::Config { line: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_map_is_reported_at_map_section() {
        let bad = MARKOV.replace("mu = 3", "mu = 4");
        assert!(matches!(parse_config(&bad), Err(Error::Config { line: Some(2), .. })));
    }

    #[test]
    fn families() {
        let text = format!("{MARKOV}\n[family]\nkind = \"centered\"\ncenter = 0.5\nsizes = [0.01, 0.02]\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.family.unwrap().members.len(), 2);
        let text = format!(
            "{MARKOV}\n[family]\nkind = \"explicit\"\nmembers = [{{ s = 0.02, intervals = [[0.1, 0.12]] }}, {{ s = 0.01, intervals = [[0.5, 0.51]] }}]\n"
        );
        assert!(matches!(parse_config(&text), Err(Error::Family(_))));
    }
}
