//! Subcommand implementations. Each returns the bytes to emit.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use vecdep::archimedean::{
    sample_scenario, ArchimedeanGenerator, Family, Margin, ScenarioKind, ScenarioSpec,
};
use vecdep::assess::{assess_independence, render_svg};
use vecdep::asymptotics::{bootstrap_ci, with_asymptotic_ci, Estimator, TupleSampling};
use vecdep::collapse::{collapse_group, Arity, CollapseKind, CollapseSpec};
use vecdep::kendall::{kendall_univariate, JointKendallModel};
use vecdep::measures::{
    chi_pit_pearson, chi_pit_spearman, measure_collapsed, CiMethod, DependenceEstimate,
    MeasureKind, MeasureSpec,
};
use vecdep::{GroupedData, Matrix};

use crate::args::*;
use crate::io::{
    csv_writer, finish_csv, fmt_f64, fmt_opt, load_grouped, to_json, GroupEntry, GroupsConfig,
};
use crate::{DataError, UsageError, SCHEMA};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| usage(format!("cannot parse {what} `{s}`")))
        })
        .collect()
}

fn parse_dims(s: &str) -> anyhow::Result<Vec<usize>> {
    let dims: Vec<usize> = parse_list(s, "--dims")?;
    if dims.is_empty() || dims.len() > 2 || dims.contains(&0) {
        return Err(usage(format!(
            "--dims expects `p` or `p,q` with positive entries, got `{s}`"
        )));
    }
    Ok(dims)
}

fn generator(
    family: Family,
    theta: Option<f64>,
    tau: Option<f64>,
    max_order: Option<usize>,
) -> anyhow::Result<ArchimedeanGenerator> {
    let gen = match (family, theta, tau) {
        (Family::Independence, None, None) => ArchimedeanGenerator::independence(),
        (Family::Independence, _, _) => {
            return Err(usage(
                "the independence family takes neither --theta nor --tau",
            ))
        }
        (_, Some(t), None) => {
            ArchimedeanGenerator::new(family, t).map_err(|e| usage(e.to_string()))?
        }
        (_, None, Some(t)) => {
            ArchimedeanGenerator::from_tau(family, t).map_err(|e| usage(e.to_string()))?
        }
        (_, None, None) => return Err(usage(format!("{family} needs --theta or --tau"))),
        (_, Some(_), Some(_)) => return Err(usage("give only one of --theta and --tau")),
    };
    Ok(match max_order {
        Some(k) => gen.with_max_order(k),
        None => gen,
    })
}

fn headers_for(dims: &[usize]) -> Vec<String> {
    match dims {
        [d] => (1..=*d).map(|i| format!("x{i}")).collect(),
        _ => (1..=dims[0])
            .map(|i| format!("x{i}"))
            .chain((1..=dims[1]).map(|i| format!("y{i}")))
            .collect(),
    }
}

fn groups_for(headers: &[String], dims: &[usize]) -> GroupsConfig {
    let mut groups = vec![GroupEntry {
        name: "X".to_string(),
        columns: headers[..dims[0]].to_vec(),
    }];
    if dims.len() == 2 {
        groups.push(GroupEntry {
            name: "Y".to_string(),
            columns: headers[dims[0]..].to_vec(),
        });
    }
    GroupsConfig { groups }
}

fn matrix_csv(headers: &[String], m: &Matrix) -> anyhow::Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(headers)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    finish_csv(w)
}

fn margin(m: MarginArg) -> Margin {
    match m {
        MarginArg::Uniform => Margin::Uniform,
        MarginArg::Normal => Margin::Normal,
        MarginArg::Exponential => Margin::Exponential,
    }
}

/// Returns the sample CSV and the matching groups configuration.
pub fn simulate(a: &SimulateArgs) -> anyhow::Result<(Vec<u8>, GroupsConfig)> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let dims = match (&a.dims, a.dim) {
        (Some(s), None) => parse_dims(s)?,
        (None, Some(d)) if d > 0 => vec![d],
        (None, None) => return Err(usage("give --dims p,q or --dim d")),
        _ => return Err(usage("--dim must be positive")),
    };
    let headers = headers_for(&dims);
    let family = match a.family {
        SimFamily::Clayton => Some(Family::Clayton),
        SimFamily::Gumbel => Some(Family::Gumbel),
        SimFamily::Independence => Some(Family::Independence),
        _ => None,
    };
    let values = match family {
        Some(f) => {
            let gen = generator(f, a.theta, a.tau, None)?;
            let d: usize = dims.iter().sum();
            let m = gen.sample(d, a.n, a.seed)?;
            let mg = margin(a.margin);
            Matrix::new(
                m.into_vec().into_iter().map(|u| mg.quantile(u)).collect(),
                a.n,
                d,
            )?
        }
        None => {
            if a.theta.is_some() || a.tau.is_some() {
                return Err(usage("--theta/--tau apply only to Archimedean families"));
            }
            if dims.len() != 2 {
                return Err(usage("scenarios need --dims p,q"));
            }
            let kind = match a.family {
                SimFamily::Comonotone => ScenarioKind::Comonotone,
                SimFamily::Countermonotone => ScenarioKind::Countermonotone,
                _ => ScenarioKind::IndependentGroups,
            };
            let mut spec = ScenarioSpec::new(kind, dims[0], dims[1]);
            spec.margin = margin(a.margin);
            sample_scenario(&spec, a.n, a.seed)?.values().clone()
        }
    };
    Ok((matrix_csv(&headers, &values)?, groups_for(&headers, &dims)))
}

/// Build a collapse specification from its kind, optional JSON parameters
/// and the rank-margins flag.
pub fn collapse_spec(opts: &CollapseOpts) -> anyhow::Result<CollapseSpec> {
    let mut obj = match &opts.collapse_params {
        Some(s) => match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(usage("--collapse-params must be a JSON object")),
            Err(e) => return Err(usage(format!("--collapse-params is not valid JSON: {e}"))),
        },
        None => Map::new(),
    };
    let kind = match opts.collapse {
        CollapseName::WeightedAverage => "weighted-average",
        CollapseName::ExtremeAverage => "extreme-average",
        CollapseName::Maximum => "maximum",
        CollapseName::Minimum => "minimum",
        CollapseName::Distance => "distance",
        CollapseName::Kernel => "kernel",
        CollapseName::MultivariateRank => "multivariate-rank",
        CollapseName::Pit => "pit",
    };
    obj.insert("kind".into(), json!(kind));
    if opts.collapse == CollapseName::Distance {
        obj.entry("metric").or_insert(json!({"name": "euclidean"}));
    }
    if opts.collapse == CollapseName::Kernel {
        obj.entry("kernel").or_insert(json!({"name": "gaussian"}));
    }
    if opts.rank_margins {
        obj.insert("rank_margins".into(), json!(true));
    }
    serde_json::from_value(Value::Object(obj))
        .map_err(|e| usage(format!("invalid collapse parameters: {e}")))
}

pub fn collapse(a: &CollapseArgs) -> anyhow::Result<Vec<u8>> {
    let data = load_grouped(&a.input.input, &a.input.groups)?;
    let spec = collapse_spec(&a.collapse)?;
    let s = collapse_group(&data, &a.group, &spec)?;
    let mut w = csv_writer();
    match s.arity {
        Arity::OneSample => {
            w.write_record(["index", "value"])?;
            for (i, v) in s.values.iter().enumerate() {
                w.write_record([(i + 1).to_string(), fmt_f64(*v)])?;
            }
        }
        Arity::Pairwise => {
            let mut header = vec!["i", "j", "value"];
            if s.reverse.is_some() {
                header.push("reverse");
            }
            w.write_record(&header)?;
            let n = s.source_n;
            let mut idx = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let mut rec = vec![
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        fmt_f64(s.values[idx]),
                    ];
                    if let Some(r) = &s.reverse {
                        rec.push(fmt_f64(r[idx]));
                    }
                    w.write_record(&rec)?;
                    idx += 1;
                }
            }
        }
    }
    finish_csv(w)
}

fn measure_kind(m: MeasureName) -> MeasureKind {
    match m {
        MeasureName::Pearson => MeasureKind::Pearson,
        MeasureName::Spearman => MeasureKind::Spearman,
        MeasureName::Tau => MeasureKind::Tau,
        MeasureName::TailUpper => MeasureKind::TailUpper,
        MeasureName::TailLower => MeasureKind::TailLower,
    }
}

fn check_opts(o: &MeasureOpts, spec: &CollapseSpec) -> anyhow::Result<()> {
    if !(o.level > 0.0 && o.level < 1.0) {
        return Err(usage(format!(
            "--level must lie in (0, 1), got {}",
            o.level
        )));
    }
    if o.ci == CiName::Asymptotic {
        if spec.kind == CollapseKind::Pit {
            return Err(usage(
                "bootstrap required for PIT: no asymptotic variance is available for the PIT estimator; use --ci bootstrap",
            ));
        }
        if !matches!(o.measure, MeasureName::Pearson | MeasureName::Tau) {
            return Err(usage(
                "asymptotic intervals are available for pearson and tau only; use --ci bootstrap",
            ));
        }
    }
    if o.ci == CiName::Bootstrap && o.bootstrap_reps < vecdep::asymptotics::MIN_BOOTSTRAP {
        return Err(usage(format!(
            "--bootstrap-reps must be at least {}",
            vecdep::asymptotics::MIN_BOOTSTRAP
        )));
    }
    Ok(())
}

/// Point estimate plus the requested interval for one data set.
pub fn estimate(
    data: &GroupedData,
    o: &MeasureOpts,
    spec: &CollapseSpec,
) -> anyhow::Result<DependenceEstimate> {
    let mut mspec = MeasureSpec::new(measure_kind(o.measure));
    mspec.tail_k = o.tail_k;
    let (ga, gb) = (o.group_a.as_str(), o.group_b.as_str());
    let pit = spec.kind == CollapseKind::Pit;
    let estimator = match (pit, mspec.kind) {
        (true, MeasureKind::Pearson) => Estimator::PitPearson,
        (true, MeasureKind::Spearman) => Estimator::PitSpearman,
        _ => Estimator::Collapsed {
            cspec: spec.clone(),
            mspec,
        },
    };
    let est = match o.ci {
        CiName::Bootstrap => {
            bootstrap_ci(data, ga, gb, &estimator, o.bootstrap_reps, o.level, o.seed)?
        }
        CiName::None | CiName::Asymptotic => {
            if let Estimator::PitPearson = estimator {
                chi_pit_pearson(data, ga, gb)?
            } else if let Estimator::PitSpearman = estimator {
                chi_pit_spearman(data, ga, gb)?
            } else {
                let sx = collapse_group(data, ga, spec)?;
                let sy = collapse_group(data, gb, spec)?;
                let est = measure_collapsed(&sx, &sy, &mspec)?;
                if o.ci == CiName::Asymptotic {
                    let sampling = match o.tuples {
                        Some(b) => TupleSampling::Incomplete { b },
                        None => TupleSampling::Auto,
                    };
                    with_asymptotic_ci(est, &sx, &sy, o.level, sampling, o.seed)?
                } else {
                    est
                }
            }
        }
    };
    Ok(est)
}

#[derive(Serialize)]
struct MeasureOutput<'a> {
    schema: &'static str,
    command: &'static str,
    measure: &'static str,
    collapse: &'a CollapseSpec,
    groups: [&'a str; 2],
    estimate: f64,
    std_error: Option<f64>,
    ci: Option<[f64; 2]>,
    level: Option<f64>,
    method: CiMethod,
    n: usize,
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_k: Option<usize>,
    warnings: &'a [String],
}

pub fn measure(a: &MeasureArgs) -> anyhow::Result<Vec<u8>> {
    let spec = collapse_spec(&a.opts.collapse)?;
    check_opts(&a.opts, &spec)?;
    let data = load_grouped(&a.input.input, &a.input.groups)?;
    let est = estimate(&data, &a.opts, &spec)?;
    to_json(&MeasureOutput {
        schema: SCHEMA,
        command: "measure",
        measure: est.measure.label(),
        collapse: &spec,
        groups: [&a.opts.group_a, &a.opts.group_b],
        estimate: est.value,
        std_error: est.std_error,
        ci: est.ci.map(|(l, h)| [l, h]),
        level: est.level,
        method: est.method,
        n: est.n,
        k: est.k,
        tail_k: est.tail_k,
        warnings: &est.warnings,
    })
}

#[derive(Serialize)]
struct PanelSummary<'a> {
    group_a: &'a str,
    group_b: &'a str,
    spearman: f64,
    tau: f64,
    tail_upper: f64,
    tail_lower: f64,
}

#[derive(Serialize)]
struct AssessOutput<'a> {
    schema: &'static str,
    command: &'static str,
    collapse: &'a CollapseSpec,
    groups: &'a [String],
    n: usize,
    k: usize,
    tail_k: usize,
    ties: bool,
    panels: Vec<PanelSummary<'a>>,
}

pub fn assess(a: &AssessArgs) -> anyhow::Result<Vec<u8>> {
    let spec = collapse_spec(&a.collapse)?;
    if a.format == AssessFormat::Svg && !(a.cell.is_finite() && a.cell > 0.0) {
        return Err(usage("--cell must be positive"));
    }
    let data = load_grouped(&a.input.input, &a.input.groups)?;
    let r = assess_independence(&data, &spec)?;
    match a.format {
        AssessFormat::Csv => {
            let mut w = csv_writer();
            w.write_record(["group_a", "group_b", "index", "u_a", "u_b"])?;
            for p in &r.panels {
                for (i, (ua, ub)) in p.u_a.iter().zip(&p.u_b).enumerate() {
                    w.write_record([
                        p.group_a.clone(),
                        p.group_b.clone(),
                        (i + 1).to_string(),
                        fmt_f64(*ua),
                        fmt_f64(*ub),
                    ])?;
                }
            }
            finish_csv(w)
        }
        AssessFormat::Json => to_json(&AssessOutput {
            schema: SCHEMA,
            command: "assess",
            collapse: &spec,
            groups: &r.groups,
            n: r.n,
            k: r.k,
            tail_k: r.tail_k,
            ties: r.ties,
            panels: r
                .panels
                .iter()
                .map(|p| PanelSummary {
                    group_a: &p.group_a,
                    group_b: &p.group_b,
                    spearman: p.spearman,
                    tau: p.tau,
                    tail_upper: p.tail_upper,
                    tail_lower: p.tail_lower,
                })
                .collect(),
        }),
        AssessFormat::Svg => Ok(render_svg(&r, a.cell).into_bytes()),
    }
}

#[derive(Serialize)]
struct KendallOutput<'a> {
    schema: &'static str,
    command: &'static str,
    mode: &'static str,
    family: String,
    theta: f64,
    dims: &'a [usize],
    points: Vec<Value>,
}

pub fn kendall(a: &KendallArgs) -> anyhow::Result<Vec<u8>> {
    let family = match a.family {
        GenFamily::Clayton => Family::Clayton,
        GenFamily::Gumbel => Family::Gumbel,
        GenFamily::Independence => Family::Independence,
    };
    let gen = generator(family, a.theta, a.tau, a.max_order)?;
    let dims = parse_dims(&a.dims)?;
    let need_q = || -> anyhow::Result<usize> {
        dims.get(1)
            .copied()
            .ok_or_else(|| usage("this mode needs --dims p,q"))
    };
    let at: Option<Vec<f64>> = a.at.as_deref().map(|s| parse_list(s, "--at")).transpose()?;
    if a.grid < 2 && at.is_none() {
        return Err(usage("--grid must be at least 2"));
    }
    let grid: Vec<f64> = (0..a.grid)
        .map(|i| i as f64 / (a.grid - 1) as f64)
        .collect();
    let pairs = |at: &Option<Vec<f64>>| -> anyhow::Result<Vec<(f64, f64)>> {
        match at {
            Some(v) if v.len() == 2 => Ok(vec![(v[0], v[1])]),
            Some(_) => Err(usage("--at expects `t1,t2` in this mode")),
            None => Ok(grid
                .iter()
                .flat_map(|&x| grid.iter().map(move |&y| (x, y)))
                .collect()),
        }
    };
    let (mode, header, rows): (&str, Vec<&str>, Vec<Vec<f64>>) = match a.mode {
        KendallMode::Sample => {
            let q = need_q()?;
            let (Some(n), Some(seed)) = (a.n, a.seed) else {
                return Err(usage("sample mode needs --n and --seed"));
            };
            if n == 0 {
                return Err(usage("--n must be positive"));
            }
            let model = JointKendallModel::new(gen.clone(), dims[0], q)?;
            let m = model.sample(n, seed)?;
            return matrix_csv(&["u1".to_string(), "u2".to_string()], &m);
        }
        KendallMode::Univariate => {
            let ts = match &at {
                Some(v) if v.len() == 1 => v.clone(),
                Some(_) => return Err(usage("--at expects a single `t` in univariate mode")),
                None => grid.clone(),
            };
            let rows = ts
                .par_iter()
                .map(|&t| Ok(vec![t, kendall_univariate(&gen, dims[0], t)?]))
                .collect::<vecdep::Result<Vec<_>>>()?;
            ("univariate", vec!["t", "value"], rows)
        }
        KendallMode::Joint => {
            let model = JointKendallModel::new(gen.clone(), dims[0], need_q()?)?;
            let rows = pairs(&at)?
                .par_iter()
                .map(|&(x, y)| Ok(vec![x, y, model.joint(x, y)?]))
                .collect::<vecdep::Result<Vec<_>>>()?;
            ("joint", vec!["t1", "t2", "value"], rows)
        }
        KendallMode::Copula => {
            let model = JointKendallModel::new(gen.clone(), dims[0], need_q()?)?;
            let rows = pairs(&at)?
                .par_iter()
                .map(|&(x, y)| Ok(vec![x, y, model.copula(x, y)?]))
                .collect::<vecdep::Result<Vec<_>>>()?;
            ("copula", vec!["u1", "u2", "value"], rows)
        }
    };
    match a.format {
        OutFormat::Csv => {
            let mut w = csv_writer();
            w.write_record(&header)?;
            for r in &rows {
                w.write_record(r.iter().map(|v| fmt_f64(*v)))?;
            }
            finish_csv(w)
        }
        OutFormat::Json => {
            let points = rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> = header
                        .iter()
                        .zip(r)
                        .map(|(h, v)| (h.to_string(), json!(v)))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            to_json(&KendallOutput {
                schema: SCHEMA,
                command: "kendall",
                mode,
                family: gen.family().to_string(),
                theta: gen.theta(),
                dims: &dims,
                points,
            })
        }
    }
}

pub const MIN_WINDOW: usize = 10;

pub fn rolling(a: &RollingArgs) -> anyhow::Result<Vec<u8>> {
    let spec = collapse_spec(&a.opts.collapse)?;
    check_opts(&a.opts, &spec)?;
    if a.window < MIN_WINDOW {
        return Err(usage(format!("--window must be at least {MIN_WINDOW}")));
    }
    if a.step == 0 {
        return Err(usage("--step must be positive"));
    }
    let data = load_grouped(&a.input.input, &a.input.groups)?;
    let n = data.n();
    if a.window > n {
        return Err(DataError(format!(
            "window {} exceeds the {n} available rows",
            a.window
        ))
        .into());
    }
    let ends: Vec<usize> = (a.window..=n).step_by(a.step).collect();
    let results = ends
        .par_iter()
        .map(|&t| {
            let rows: Vec<usize> = (t - a.window..t).collect();
            let window = data.select_rows(&rows)?;
            estimate(&window, &a.opts, &spec)
                .map_err(|e| e.context(format!("window ending at row {t}")))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut w = csv_writer();
    w.write_record(["window_end", "estimate", "std_error", "ci_lo", "ci_hi"])?;
    for (t, e) in ends.iter().zip(&results) {
        w.write_record([
            t.to_string(),
            fmt_f64(e.value),
            fmt_opt(e.std_error),
            fmt_opt(e.ci.map(|c| c.0)),
            fmt_opt(e.ci.map(|c| c.1)),
        ])?;
    }
    finish_csv(w)
}
