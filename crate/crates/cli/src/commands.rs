use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value as Json};

use mid_core::bench::{run_solver_bench, BenchConfig};
use mid_core::data::{load_csv, read_features_csv, save_csv, Builtin, GeneratorMeta, TypeHints, RNG_ALGORITHM};
use mid_core::interpret::{self, shap_importance};
use mid_core::pd::{h_statistic, pd_grid, Predictor};
use mid_core::scenario::{run_friedman, run_stability};
use mid_core::{Column, ColumnType, Dataset, EncoderKind, FitOptions, MidModel, SolverConfig, SolverMethod, TermKey, Value};

use crate::output::{csv_text, emit, json_text, meta, num, write_json_file, Format, Table};
use crate::svg::{render, Chart, Plot, Series};
use crate::{
    BenchArgs, BreakdownArgs, EffectsArgs, EncodingArg, FitArgs, HstatArgs, IceArgs, OutArgs, PdArgs, PredictorArgs, QueryArgs,
    Scenario, SimulateArgs, SolverArgs, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_k(s: &str) -> Result<(usize, usize)> {
    let bad = || usage(format!("--k expects two positive integers 'main,inter', got '{s}'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn solver_config(a: &SolverArgs) -> Result<SolverConfig> {
    let method: SolverMethod = a.method.parse()?;
    if a.kappa.is_some() && method != SolverMethod::Penalty {
        return Err(usage("--kappa only applies to --method penalty"));
    }
    let cfg = SolverConfig {
        method,
        kappa: a.kappa,
        rank_tol: a.rank_tol,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_term(label: &str, names: &[String]) -> Result<TermKey> {
    let idx = |n: &str| {
        names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| usage(format!("unknown feature '{n}' in term '{label}'")))
    };
    match label.split(':').collect::<Vec<_>>()[..] {
        [a] => Ok(TermKey::main(idx(a)?)),
        [a, b] => Ok(TermKey::pair(idx(a)?, idx(b)?)?),
        _ => Err(usage(format!("terms have one or two features, got '{label}'"))),
    }
}

fn load_model(path: &Path) -> Result<MidModel> {
    MidModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn read_data(path: &Path, hints: &TypeHints) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_features_csv(file, hints).with_context(|| format!("reading {}", path.display()))
}

/// Query data aligned to the model's features; extra columns are ignored.
fn model_data(model: &MidModel, path: &Path) -> Result<Dataset> {
    Ok(model.align(&read_data(path, &model.type_hints())?)?)
}

fn drop_column(ds: &Dataset, name: &str) -> Result<Dataset> {
    let idx = ds
        .index_of(name)
        .ok_or_else(|| usage(format!("column '{name}' not found")))?;
    let cols = ds
        .names()
        .iter()
        .zip(ds.columns())
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, (n, c))| (n.clone(), c.clone()))
        .collect();
    Ok(Dataset::new(cols)?)
}

fn axis(values: &[Value]) -> (Vec<f64>, Option<Vec<String>>) {
    match values.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>() {
        Some(xs) => (xs, None),
        None => (
            (0..values.len()).map(|i| i as f64).collect(),
            Some(values.iter().map(ToString::to_string).collect()),
        ),
    }
}

fn labels(values: &[Value]) -> Vec<String> {
    values.iter().map(ToString::to_string).collect()
}

fn write_output(out: &OutArgs, meta: &Json, table: impl FnOnce() -> Table, data: impl FnOnce() -> Json, plots: impl FnOnce() -> Vec<Plot>) -> Result<()> {
    let text = match out.format {
        Format::Csv => csv_text(meta, &table())?,
        Format::Json => json_text(meta, data())?,
        Format::Svg => render(&plots(), &meta.to_string()),
    };
    emit(out.out.as_deref(), &text)
}

fn fmt_uvr(u: Option<f64>) -> String {
    match u {
        None => "undefined (constant predictions)".into(),
        Some(v) if v != 0.0 && v.abs() < 1e-4 => format!("{v:.3e}"),
        Some(v) => format!("{v:.6}"),
    }
}

pub fn fit(a: FitArgs) -> Result<()> {
    let (k_main, k_inter) = parse_k(&a.k)?;
    if !(1..=2).contains(&a.order) {
        return Err(usage(format!(
            "--order must be 1 or 2, got {} (only main effects and pairwise interactions are fitted)",
            a.order
        )));
    }
    let mut hints = TypeHints::new();
    for c in &a.categorical {
        hints.insert(c.clone(), ColumnType::Categorical);
    }
    for c in &a.numeric {
        if hints.insert(c.clone(), ColumnType::Numeric).is_some() {
            return Err(usage(format!("column '{c}' is hinted both numeric and categorical")));
        }
    }
    let solver = solver_config(&a.solver)?;
    let (ds, y) = load_csv(&a.data, &a.pred_col, &hints).with_context(|| format!("reading {}", a.data.display()))?;
    let terms = a
        .terms
        .as_ref()
        .map(|t| t.iter().map(|l| parse_term(l, ds.names())).collect::<Result<Vec<_>>>())
        .transpose()?;
    let provenance = meta("fit", json!({ "data": a.data, "pred_col": a.pred_col }));
    let opts = FitOptions {
        order: a.order,
        terms,
        k_main,
        k_inter,
        encoding: match a.encoding {
            None | Some(EncodingArg::Linear) => EncoderKind::Linear,
            Some(EncodingArg::Step) => EncoderKind::Step,
            Some(EncodingArg::Indicator) => EncoderKind::Indicator,
        },
        solver,
        provenance: Some(provenance),
    };
    let model = mid_core::fit(&ds, &y, &opts)?;
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;

    let fm = model.fit_meta().expect("freshly fitted model");
    println!("Maximum interpretation decomposition of order {}", a.order);
    println!("Rows: {}  Features: {}", ds.n_rows(), ds.n_cols());
    println!("Intercept: {}", model.intercept());
    println!("Main effect terms: {}", model.n_main_terms());
    println!("Interaction terms: {}", model.n_interaction_terms());
    println!("Uninterpreted Variation Ratio: {}", fmt_uvr(model.uvr_train()));
    let rank = fm.report.rank.map_or("not determined".to_string(), |r| r.to_string());
    println!(
        "Solver: {} (rank {rank}, {} dead columns, {:.1} ms)",
        fm.report.method_used, fm.report.dead_columns, fm.report.elapsed_ms
    );
    println!("Model written to {}", a.out.display());
    Ok(())
}

struct EffectGrid {
    label: String,
    features: Vec<String>,
    grids: Vec<Vec<Value>>,
    points: Vec<Vec<Value>>,
    values: Vec<f64>,
}

pub fn effects(a: EffectsArgs) -> Result<()> {
    if a.grid < 2 || a.pair_grid < 2 {
        return Err(usage("grid sizes must be at least 2"));
    }
    let model = load_model(&a.model)?;
    let names = model.feature_names();
    let keys: Vec<TermKey> = if a.term.is_empty() {
        model.term_keys()
    } else {
        a.term.iter().map(|l| model.term_key(l)).collect::<mid_core::Result<_>>()?
    };
    let mut out = Vec::new();
    for key in keys {
        let feats = key.features();
        let grids: Vec<Vec<Value>> = if key.is_main() {
            vec![model.feature_grid(key.first(), a.grid)]
        } else {
            feats.iter().map(|&j| model.feature_grid(j, a.pair_grid)).collect()
        };
        let points: Vec<Vec<Value>> = if key.is_main() {
            grids[0].iter().map(|v| vec![v.clone()]).collect()
        } else {
            grids[1]
                .iter()
                .flat_map(|q| grids[0].iter().map(move |p| vec![p.clone(), q.clone()]))
                .collect()
        };
        let values = model.effect(&key, &points, a.include_main)?;
        out.push(EffectGrid {
            label: model.term_label(&key),
            features: feats.iter().map(|&j| names[j].clone()).collect(),
            grids,
            points,
            values,
        });
    }
    let m = meta("effects", json!({ "model": a.model, "terms": out.iter().map(|e| &e.label).collect::<Vec<_>>(), "include_main": a.include_main }));
    write_output(
        &a.out,
        &m,
        || {
            if out.len() == 1 {
                let e = &out[0];
                let mut t = Table::new(e.features.iter().cloned().chain(["effect".to_string()]));
                for (p, v) in e.points.iter().zip(&e.values) {
                    t.push(p.iter().map(ToString::to_string).chain([num(*v)]).collect());
                }
                t
            } else {
                let mut t = Table::new(["term", "value1", "value2", "effect"]);
                for e in &out {
                    for (p, v) in e.points.iter().zip(&e.values) {
                        let second = p.get(1).map_or(String::new(), ToString::to_string);
                        t.push(vec![e.label.clone(), p[0].to_string(), second, num(*v)]);
                    }
                }
                t
            }
        },
        || {
            Json::Array(
                out.iter()
                    .map(|e| {
                        json!({
                            "term": e.label,
                            "features": e.features,
                            "grid": e.grids,
                            "effect": e.values,
                        })
                    })
                    .collect(),
            )
        },
        || {
            out.iter()
                .map(|e| {
                    let chart = if e.features.len() == 1 {
                        let (xs, x_labels) = axis(&e.grids[0]);
                        Chart::Lines {
                            xs,
                            x_labels,
                            x_title: e.features[0].clone(),
                            y_title: "effect".into(),
                            series: vec![Series { name: e.label.clone(), ys: e.values.clone() }],
                        }
                    } else {
                        let np = e.grids[0].len();
                        Chart::Heatmap {
                            x_labels: labels(&e.grids[0]),
                            y_labels: labels(&e.grids[1]),
                            x_title: e.features[0].clone(),
                            y_title: e.features[1].clone(),
                            values: e.values.chunks(np).map(<[f64]>::to_vec).collect(),
                        }
                    };
                    Plot { id: e.label.clone(), title: format!("effect of {}", e.label), chart }
                })
                .collect()
        },
    )
}

pub fn importance(a: QueryArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = model_data(&model, &a.data)?;
    let imp = interpret::importance(&model, &ds)?;
    let m = meta("importance", json!({ "model": a.model, "data": a.data, "rows": ds.n_rows() }));
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(["term", "importance", "rank"]);
            for r in &imp.rows {
                t.push(vec![r.label.clone(), num(r.importance), r.rank.to_string()]);
            }
            t
        },
        || serde_json::to_value(&imp.rows).unwrap_or(Json::Null),
        || {
            let names = model.feature_names();
            let d = names.len();
            let mut grid = vec![vec![0.0; d]; d];
            for r in &imp.rows {
                match r.term.second() {
                    None => grid[r.term.first()][r.term.first()] = r.importance,
                    Some(q) => {
                        grid[r.term.first()][q] = r.importance;
                        grid[q][r.term.first()] = r.importance;
                    }
                }
            }
            vec![
                Plot {
                    id: "importance".into(),
                    title: "term importance".into(),
                    chart: Chart::Bars {
                        labels: imp.rows.iter().map(|r| r.label.clone()).collect(),
                        start: vec![0.0; imp.rows.len()],
                        end: imp.rows.iter().map(|r| r.importance).collect(),
                        x_title: "mean |effect|".into(),
                    },
                },
                Plot {
                    id: "importance-heatmap".into(),
                    title: "importance by feature pair".into(),
                    chart: Chart::Heatmap {
                        x_labels: names.clone(),
                        y_labels: names,
                        x_title: String::new(),
                        y_title: String::new(),
                        values: grid,
                    },
                },
            ]
        },
    )
}

pub fn breakdown(a: BreakdownArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = model_data(&model, &a.data)?;
    if a.row == 0 || a.row > ds.n_rows() {
        return Err(usage(format!("--row must be between 1 and {}, got {}", ds.n_rows(), a.row)));
    }
    let b = interpret::breakdown(&model, &ds, a.row - 1)?;
    let m = meta("breakdown", json!({ "model": a.model, "data": a.data, "row": a.row, "prediction": b.total }));
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(["term", "contribution", "cumulative"]);
            t.push(vec!["(intercept)".into(), num(b.intercept), num(b.intercept)]);
            for i in &b.items {
                t.push(vec![i.label.clone(), num(i.contribution), num(i.cumulative)]);
            }
            t
        },
        || {
            json!({
                "row": a.row,
                "intercept": b.intercept,
                "prediction": b.total,
                "items": b.items.iter().map(|i| json!({ "term": i.label, "contribution": i.contribution, "cumulative": i.cumulative })).collect::<Vec<_>>(),
            })
        },
        || {
            let mut prev = b.intercept;
            let mut start = Vec::new();
            let mut end = Vec::new();
            for i in &b.items {
                start.push(prev);
                end.push(i.cumulative);
                prev = i.cumulative;
            }
            vec![Plot {
                id: format!("breakdown-{}", a.row),
                title: format!("breakdown of row {}: prediction {:.4}", a.row, b.total),
                chart: Chart::Bars {
                    labels: b.items.iter().map(|i| i.label.clone()).collect(),
                    start,
                    end,
                    x_title: "cumulative prediction".into(),
                },
            }]
        },
    )
}

pub fn ice(a: IceArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = model_data(&model, &a.data)?;
    let term = a.term.as_deref().map(|t| model.term_key(t)).transpose()?;
    let c = interpret::ice(&model, &ds, &a.variable, a.grid, a.centered, term)?;
    let what = if term.is_some() { "effect" } else { "prediction" };
    let m = meta(
        "ice",
        json!({ "model": a.model, "data": a.data, "variable": a.variable, "centered": a.centered, "term": a.term, "reference": c.reference.as_ref().map(ToString::to_string) }),
    );
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(["row".to_string(), a.variable.clone(), what.to_string()]);
            for (r, curve) in c.curves.iter().enumerate() {
                for (g, v) in c.grid.iter().zip(curve) {
                    t.push(vec![(r + 1).to_string(), g.to_string(), num(*v)]);
                }
            }
            t
        },
        || json!({ "variable": a.variable, "grid": c.grid, "centered": a.centered, "curves": c.curves }),
        || {
            let (xs, x_labels) = axis(&c.grid);
            vec![Plot {
                id: format!("ice-{}", a.variable),
                title: format!("{}ICE of {}", if a.centered { "centered " } else { "" }, a.variable),
                chart: Chart::Lines {
                    xs,
                    x_labels,
                    x_title: a.variable.clone(),
                    y_title: what.into(),
                    series: c
                        .curves
                        .iter()
                        .enumerate()
                        .map(|(r, ys)| Series { name: format!("row {}", r + 1), ys: ys.clone() })
                        .collect(),
                },
            }]
        },
    )
}

pub fn shap(a: QueryArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = model_data(&model, &a.data)?;
    let s = interpret::mid_shapley(&model, &ds)?;
    let imp = shap_importance(&s);
    let m = meta("shap", json!({ "model": a.model, "data": a.data, "intercept": s.intercept }));
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(s.names.iter().cloned());
            for row in &s.values {
                t.push(row.iter().map(|v| num(*v)).collect());
            }
            t
        },
        || json!({ "names": s.names, "intercept": s.intercept, "values": s.values, "importance": imp }),
        || {
            vec![Plot {
                id: "shap-importance".into(),
                title: "mean |Shapley value|".into(),
                chart: Chart::Bars {
                    labels: imp.iter().map(|(n, _)| n.clone()).collect(),
                    start: vec![0.0; imp.len()],
                    end: imp.iter().map(|(_, v)| *v).collect(),
                    x_title: "mean |phi|".into(),
                },
            }]
        },
    )
}

enum Black {
    Model(MidModel),
    Builtin(Builtin),
}

impl Black {
    fn predictor(&self) -> &dyn Predictor {
        match self {
            Black::Model(m) => m,
            Black::Builtin(b) => b,
        }
    }

    fn describe(&self, a: &PredictorArgs) -> Json {
        match self {
            Black::Model(_) => json!({ "model": a.model }),
            Black::Builtin(b) => json!({ "builtin": b.name() }),
        }
    }
}

fn load_predictor(a: &PredictorArgs, data: &Path) -> Result<(Black, Dataset)> {
    match (&a.model, &a.builtin) {
        (Some(path), _) => {
            let model = load_model(path)?;
            let ds = model_data(&model, data)?;
            Ok((Black::Model(model), ds))
        }
        (None, Some(name)) => {
            let b: Builtin = name.parse()?;
            let mut ds = read_data(data, &TypeHints::new())?;
            if let Some(c) = &a.pred_col {
                ds = drop_column(&ds, c)?;
            }
            Ok((Black::Builtin(b), ds))
        }
        (None, None) => Err(usage("one of --model or --builtin is required")),
    }
}

fn feature_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.index_of(name)
        .ok_or_else(|| usage(format!("unknown feature '{name}'")))
}

pub fn pd(a: PdArgs) -> Result<()> {
    if a.features.is_empty() || a.features.len() > 2 {
        return Err(usage("--features takes one or two names"));
    }
    if a.grid < 2 {
        return Err(usage("--grid must be at least 2"));
    }
    let (black, ds) = load_predictor(&a.predictor, &a.data)?;
    let idx: Vec<usize> = a.features.iter().map(|f| feature_index(&ds, f)).collect::<Result<_>>()?;
    let grids: Vec<Vec<Value>> = idx.iter().map(|&j| pd_grid(&ds, j, a.grid)).collect();
    let points: Vec<Vec<Value>> = if idx.len() == 1 {
        grids[0].iter().map(|v| vec![v.clone()]).collect()
    } else {
        grids[1]
            .iter()
            .flat_map(|q| grids[0].iter().map(move |p| vec![p.clone(), q.clone()]))
            .collect()
    };
    let values = mid_core::pd::pd(black.predictor(), &ds, &idx, &points)?;
    let mut extra = black.describe(&a.predictor);
    extra["data"] = json!(a.data);
    extra["features"] = json!(a.features);
    let m = meta("pd", extra);
    let label = a.features.join(":");
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(a.features.iter().cloned().chain(["pd".to_string()]));
            for (p, v) in points.iter().zip(&values) {
                t.push(p.iter().map(ToString::to_string).chain([num(*v)]).collect());
            }
            t
        },
        || json!({ "features": a.features, "grid": grids, "pd": values }),
        || {
            let chart = if idx.len() == 1 {
                let (xs, x_labels) = axis(&grids[0]);
                Chart::Lines {
                    xs,
                    x_labels,
                    x_title: a.features[0].clone(),
                    y_title: "partial dependence".into(),
                    series: vec![Series { name: label.clone(), ys: values.clone() }],
                }
            } else {
                Chart::Heatmap {
                    x_labels: labels(&grids[0]),
                    y_labels: labels(&grids[1]),
                    x_title: a.features[0].clone(),
                    y_title: a.features[1].clone(),
                    values: values.chunks(grids[0].len()).map(<[f64]>::to_vec).collect(),
                }
            };
            vec![Plot { id: label.clone(), title: format!("partial dependence on {label}"), chart }]
        },
    )
}

pub fn hstat(a: HstatArgs) -> Result<()> {
    let (black, ds) = load_predictor(&a.predictor, &a.data)?;
    let pairs: Vec<(usize, usize)> = if a.all {
        let d = ds.n_cols();
        (0..d).flat_map(|p| (p + 1..d).map(move |q| (p, q))).collect()
    } else {
        a.pair
            .iter()
            .map(|s| {
                let (x, y) = s
                    .split_once(':')
                    .ok_or_else(|| usage(format!("pairs look like x1:x2, got '{s}'")))?;
                Ok((feature_index(&ds, x)?, feature_index(&ds, y)?))
            })
            .collect::<Result<_>>()?
    };
    let names = ds.names();
    let mut rows = Vec::new();
    for (p, q) in pairs {
        let h = h_statistic(black.predictor(), &ds, (p, q))?;
        rows.push((format!("{}:{}", names[p], names[q]), h));
    }
    let mut extra = black.describe(&a.predictor);
    extra["data"] = json!(a.data);
    let m = meta("hstat", extra);
    write_output(
        &a.out,
        &m,
        || {
            let mut t = Table::new(["pair", "h"]);
            for (pair, h) in &rows {
                t.push(vec![pair.clone(), h.map_or("NA".to_string(), num)]);
            }
            t
        },
        || Json::Array(rows.iter().map(|(pair, h)| json!({ "pair": pair, "h": h })).collect()),
        || {
            vec![Plot {
                id: "hstat".into(),
                title: "H-statistic".into(),
                chart: Chart::Bars {
                    labels: rows.iter().map(|(p, _)| p.clone()).collect(),
                    start: vec![0.0; rows.len()],
                    end: rows.iter().map(|(_, h)| h.unwrap_or(0.0)).collect(),
                    x_title: "H".into(),
                },
            }]
        },
    )
}

fn sidecar(path: &Path, meta: &GeneratorMeta) -> Result<()> {
    let mut side = path.as_os_str().to_owned();
    side.push(".meta.json");
    write_json_file(&PathBuf::from(side), &serde_json::to_value(meta)?)
}

fn write_table(path: &Path, meta: &Json, table: &Table) -> Result<()> {
    emit(Some(path), &csv_text(meta, table)?)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let (k_main, k_inter) = parse_k(&a.k)?;
    let solver = solver_config(&a.solver)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.scenario {
        Scenario::Friedman => {
            let n = a.n.unwrap_or(2000);
            let opts = FitOptions {
                order: 2,
                k_main,
                k_inter,
                solver,
                provenance: Some(json!({ "scenario": "friedman", "n": n, "seed": a.seed })),
                ..Default::default()
            };
            let run = run_friedman(n, a.seed, &opts)?;
            for (file, ds, y, seed, role) in [
                ("train.csv", &run.train, &run.train_predictions, run.report.seed, "train"),
                ("test.csv", &run.test, &run.test_predictions, run.report.test_seed, "test"),
            ] {
                let path = a.out.join(file);
                save_csv(&path, ds, Some(("yhat", y.as_slice()))).with_context(|| format!("writing {}", path.display()))?;
                sidecar(
                    &path,
                    &GeneratorMeta {
                        scenario: "friedman1".into(),
                        n,
                        seed,
                        algorithm: RNG_ALGORITHM.into(),
                        parameters: json!({ "features": 10, "noise_sd": 0.0, "role": role }),
                    },
                )?;
            }
            run.model.save(a.out.join("model.json"))?;
            let report = json!({ "meta": meta("simulate", json!({ "scenario": "friedman" })), "report": run.report });
            write_json_file(&a.out.join("report.json"), &report)?;
            println!("friedman scenario: n={n} seed={} (test seed {})", a.seed, run.report.test_seed);
            println!("Main effect terms: {}", run.report.n_main_terms);
            println!("Interaction terms: {}", run.report.n_interaction_terms);
            println!("Uninterpreted Variation Ratio (train): {}", fmt_uvr(run.report.uvr_train));
            println!("Uninterpreted Variation Ratio (test): {}", fmt_uvr(run.report.uvr_test));
        }
        Scenario::Stability => {
            let n = a.n.unwrap_or(200);
            let opts = FitOptions {
                order: 1,
                k_main,
                k_inter,
                solver,
                provenance: Some(json!({ "scenario": "stability", "n": n, "seed": a.seed })),
                ..Default::default()
            };
            let run = run_stability(n, a.seed, &opts, a.grid)?;
            let mut cols: Vec<(String, Column)> = run
                .data
                .names()
                .iter()
                .cloned()
                .zip(run.data.columns().iter().cloned())
                .collect();
            cols.push(("yhat_a".into(), Column::Numeric(run.predictions_a.as_slice().to_vec())));
            cols.push(("yhat_b".into(), Column::Numeric(run.predictions_b.as_slice().to_vec())));
            let path = a.out.join("data.csv");
            save_csv(&path, &Dataset::new(cols)?, None).with_context(|| format!("writing {}", path.display()))?;
            sidecar(
                &path,
                &GeneratorMeta {
                    scenario: "correlated_pair".into(),
                    n,
                    seed: a.seed,
                    algorithm: RNG_ALGORITHM.into(),
                    parameters: json!({ "noise_sd": 0.05, "predictions": ["stability_a", "stability_b"] }),
                },
            )?;
            run.model_a.save(a.out.join("model_a.json"))?;
            run.model_b.save(a.out.join("model_b.json"))?;

            let m = meta("simulate", json!({ "scenario": "stability", "n": n, "seed": a.seed, "grid": a.grid }));
            let mut table = Table::new(["feature", "mid_max_diff", "pd_diff_at_min", "pd_diff_at_max"]);
            for r in &run.report.rows {
                table.push(vec![r.feature.clone(), num(r.mid_max_diff), num(r.pd_diff_at_min), num(r.pd_diff_at_max)]);
            }
            write_table(&a.out.join("stability.csv"), &m, &table)?;
            let mut curves = Table::new(["feature", "x", "mid_a", "mid_b", "pd_a", "pd_b"]);
            for c in &run.report.curves {
                for i in 0..c.grid.len() {
                    curves.push(vec![
                        c.feature.clone(),
                        num(c.grid[i]),
                        num(c.mid_a[i]),
                        num(c.mid_b[i]),
                        num(c.pd_a[i]),
                        num(c.pd_b[i]),
                    ]);
                }
            }
            write_table(&a.out.join("curves.csv"), &m, &curves)?;
            write_json_file(&a.out.join("report.json"), &json!({ "meta": m, "report": run.report }))?;

            println!("stability scenario: n={n} seed={}", a.seed);
            println!("max on-sample |f_a - f_b|: {:.4}", run.report.on_sample_max_diff);
            println!("{:<8} {:>14} {:>14} {:>14}", "feature", "mid_max_diff", "pd_diff_min", "pd_diff_max");
            for r in &run.report.rows {
                println!(
                    "{:<8} {:>14.4} {:>14.4} {:>14.4}",
                    r.feature, r.mid_max_diff, r.pd_diff_at_min, r.pd_diff_at_max
                );
            }
        }
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let (k_main, k_inter) = parse_k(&a.k)?;
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<SolverMethod>())
        .collect::<mid_core::Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        n: a.n,
        d: a.d,
        k_main,
        k_inter,
        methods,
        reps: a.reps,
        seed: a.seed,
    };
    let r = run_solver_bench(&cfg)?;
    let m = meta("bench", json!({ "n": r.n, "d": r.d, "k": [r.k_main, r.k_inter], "m": r.m, "columns": r.columns, "reps": a.reps, "seed": a.seed }));
    let mut t = Table::new(["method", "n", "d", "m", "mean_ms", "min_ms", "reps", "rank", "max_effect_diff"]);
    for x in &r.timings {
        t.push(vec![
            x.method.to_string(),
            r.n.to_string(),
            r.d.to_string(),
            r.m.to_string(),
            format!("{:.3}", x.mean_ms),
            format!("{:.3}", x.min_ms),
            x.reps.to_string(),
            x.rank.map_or("NA".into(), |v| v.to_string()),
            num(x.max_effect_diff),
        ]);
    }
    println!("n={} d={} m={} ({} columns after knot merging), tolerance {:e}", r.n, r.d, r.m, r.columns, r.tolerance);
    println!("{:<16} {:>12} {:>12} {:>6} {:>8} {:>14}", "method", "mean_ms", "min_ms", "reps", "rank", "max_diff");
    for x in &r.timings {
        println!(
            "{:<16} {:>12.1} {:>12.1} {:>6} {:>8} {:>14.3e}",
            x.method.to_string(),
            x.mean_ms,
            x.min_ms,
            x.reps,
            x.rank.map_or("NA".into(), |v| v.to_string()),
            x.max_effect_diff
        );
    }
    if let Some(out) = &a.out {
        write_table(out, &m, &t)?;
    }
    Ok(())
}
