//! Heston pricing-function learning: dataset generation, ELM, EIR-ELM, GPR
//! and the Table-1-style benchmark.

use std::path::Path;
use std::time::Instant;

use elmfin::gpr::{gpr_fit, grid_search, GprModel, GprParams, GridSpec};
use elmfin::incremental::{eir_train, trace_csv, EirConfig, UpdateMode};
use elmfin::metrics::{mae, mape, rmse};
use elmfin::oracles::{generate_heston_dataset, HestonDatasetConfig, HestonRanges};
use elmfin::{Activation, Dataset, ElmModel, HiddenLayer, InputScaler};
use serde_json::json;

use crate::config::{key, Config, Key};
use crate::error::{CliError, CliResult};
use crate::run::{num, RunDir, Table};

fn data_keys(n: usize) -> Vec<Key> {
    vec![
        key("data", "", "Heston CSV written by gen-heston; empty generates in memory"),
        key("n", n, "rows to generate when data is empty"),
        key("data_seed", 1, "dataset generator seed"),
        key("train_frac", 0.8, "training share of the random split"),
        key("split_seed", 1, "train/test split seed"),
    ]
}

fn generator_keys() -> Vec<Key> {
    let d = HestonDatasetConfig::default();
    vec![
        key("cos_terms", d.cos_terms, "COS expansion terms"),
        key("cos_width", d.cos_width, "COS truncation half-width in standard deviations"),
        key("min_vega", d.min_vega, "rows with smaller Black-Scholes vega are resampled"),
        key("max_attempts_per_row", d.max_attempts_per_row, "resample budget per requested row"),
    ]
}

fn generator_config(cfg: &Config) -> CliResult<HestonDatasetConfig> {
    Ok(HestonDatasetConfig {
        ranges: HestonRanges::default(),
        cos_terms: cfg.get("cos_terms")?,
        cos_width: cfg.get("cos_width")?,
        min_vega: cfg.get("min_vega")?,
        max_attempts_per_row: cfg.get("max_attempts_per_row")?,
    })
}

fn load_split(cfg: &Config, run: &mut RunDir) -> CliResult<(Dataset, Dataset)> {
    let path = cfg.raw("data").to_string();
    let ds = if path.is_empty() {
        let n: usize = cfg.get("n")?;
        let seed: u64 = cfg.get("data_seed")?;
        let gen = generator_config(cfg)?;
        let (ds, meta) = run.timed("generate", || generate_heston_dataset(n, seed, &gen))?;
        run.record("dataset", json!({ "rows": meta.rows, "seed": meta.seed, "failures": meta.failures }));
        ds
    } else {
        let ds = Dataset::read_csv(&path)?;
        run.record("dataset", json!({ "path": path, "rows": ds.len() }));
        ds
    };
    Ok(ds.split(cfg.get("train_frac")?, cfg.get("split_seed")?)?)
}

fn slice(a: &ndarray::Array1<f64>) -> &[f64] {
    a.as_slice().expect("contiguous")
}

/// `split,rows,rmse,mae,mape,mape_excluded`; MAPE in percent.
fn metric_row(split: &str, pred: &[f64], truth: &[f64]) -> CliResult<Vec<String>> {
    let m = mape(pred, truth)?;
    Ok(vec![
        split.to_string(),
        truth.len().to_string(),
        num(rmse(pred, truth)?),
        num(mae(pred, truth)?),
        num(m.percent),
        m.excluded.to_string(),
    ])
}

const METRIC_HEADER: [&str; 6] = ["split", "rows", "rmse", "mae", "mape", "mape_excluded"];

fn metrics_json(row: &[String]) -> serde_json::Value {
    json!({
        "rows": row[1].parse::<usize>().unwrap_or(0),
        "rmse": row[2].parse::<f64>().unwrap_or(f64::NAN),
        "mae": row[3].parse::<f64>().unwrap_or(f64::NAN),
        "mape": row[4].parse::<f64>().unwrap_or(f64::NAN),
    })
}

pub fn gen_heston_schema() -> Vec<Key> {
    let mut k = vec![
        key("out_dir", "runs/gen-heston", "run directory"),
        key("n", 15000, "rows"),
        key("seed", 1, "generator seed"),
    ];
    k.extend(generator_keys());
    k
}

pub fn gen_heston(cfg: &Config) -> CliResult<std::path::PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let n: usize = cfg.get("n")?;
    let seed: u64 = cfg.get("seed")?;
    let gen = generator_config(cfg)?;
    let (ds, meta) = run.timed("generate", || generate_heston_dataset(n, seed, &gen))?;
    ds.write_csv(run.file("heston.csv"), "iv")?;
    meta.write(run.file("heston.meta.json"))?;
    let iv = &ds.targets;
    let mean = iv.sum() / iv.len() as f64;
    let sd = (iv.mapv(|v| (v - mean).powi(2)).sum() / (iv.len().max(2) - 1) as f64).sqrt();
    run.log(format!("{} rows, {} failed inversions resampled, IV mean {mean:.4} sd {sd:.4}", meta.rows, meta.failures));
    run.record("rows", json!(meta.rows));
    run.record("failures", json!(meta.failures));
    run.record("iv_mean", json!(mean));
    run.record("iv_std", json!(sd));
    run.finish()
}

pub fn train_elm_schema() -> Vec<Key> {
    let mut k = vec![
        key("out_dir", "runs/train-elm", "run directory"),
        key("nodes", 3000, "hidden nodes L"),
        key("scale", 0.5, "hidden weight and bias scale"),
        key("ridge", 1e-8, "ridge penalty C"),
        key("activation", "sine", "sine, tanh or sigmoid"),
        key("seed", 1, "hidden layer seed"),
        key("batch", 0, "prediction batch rows, 0 for a single batch"),
        key("save_model", false, "write model.json"),
    ];
    k.extend(data_keys(15000));
    k.extend(generator_keys());
    k
}

pub fn train_elm(cfg: &Config) -> CliResult<std::path::PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let (train, test) = load_split(cfg, &mut run)?;
    let act: Activation = cfg.get("activation")?;
    let layer = HiddenLayer::random(train.dim(), cfg.get("nodes")?, cfg.get("scale")?, act, cfg.get("seed")?)?;
    let ridge: f64 = cfg.get("ridge")?;
    let model = run.timed("train", || ElmModel::fit(layer, train.inputs.view(), train.targets.view(), ridge))?;
    let batch: usize = cfg.get("batch")?;
    let predict = |x: &Dataset| if batch == 0 { model.predict(x.inputs.view()) } else { model.predict_batched(x.inputs.view(), batch) };
    let p_train = predict(&train)?;
    let p_test = run.timed("predict_test", || predict(&test))?;

    let mut metrics = Table::new(&METRIC_HEADER);
    let tr = metric_row("train", slice(&p_train), slice(&train.targets))?;
    let te = metric_row("test", slice(&p_test), slice(&test.targets))?;
    run.record("train", metrics_json(&tr));
    run.record("test", metrics_json(&te));
    run.log(format!("test rmse {} mae {} mape {}%", te[2], te[3], te[4]));
    metrics.push(tr);
    metrics.push(te);
    run.table("metrics.csv", &metrics)?;

    let mut preds = Table::new(&["row", "truth", "prediction"]);
    for (i, (t, p)) in test.targets.iter().zip(p_test.iter()).enumerate() {
        preds.push(vec![i.to_string(), num(*t), num(*p)]);
    }
    run.table("predictions.csv", &preds)?;
    if cfg.get::<bool>("save_model")? {
        model.save(run.file("model.json"))?;
    }
    run.finish()
}

pub fn train_eir_schema() -> Vec<Key> {
    let d = EirConfig::default();
    let mut k = vec![
        key("out_dir", "runs/train-eir", "run directory"),
        key("n0", d.n0, "initial nodes"),
        key("n_max", d.n_max, "node budget"),
        key("epsilon", 0.0, "stop once training RMSE reaches this"),
        key("k", d.k, "candidates per step"),
        key("ridge", d.ridge, "ridge penalty C"),
        key("seed", 1, "candidate seed"),
        key("scale", 0.35, "candidate weight scale"),
        key("activation", "sine", "sine, tanh or sigmoid"),
        key("mode", "recursive", "recursive or exact"),
        key("max_attempts", d.max_attempts, "draws per candidate slot before giving up"),
        key("target", 0.00577, "test RMSE whose first crossing is reported"),
    ];
    k.extend(data_keys(2000));
    k.extend(generator_keys());
    k
}

pub fn train_eir(cfg: &Config) -> CliResult<std::path::PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let (train, test) = load_split(cfg, &mut run)?;
    let mode = match cfg.raw("mode") {
        "recursive" => UpdateMode::Recursive,
        "exact" => UpdateMode::Exact,
        other => return Err(CliError::config(format!("mode must be recursive or exact, got {other:?}"))),
    };
    let eir = EirConfig {
        n0: cfg.get("n0")?,
        n_max: cfg.get("n_max")?,
        epsilon: cfg.get("epsilon")?,
        k: cfg.get("k")?,
        ridge: cfg.get("ridge")?,
        seed: cfg.get("seed")?,
        scale: cfg.get("scale")?,
        activation: cfg.get("activation")?,
        mode,
        max_attempts: cfg.get("max_attempts")?,
    };
    let res = run.timed("train", || eir_train(&train, Some(&test), &eir))?;
    run.write("trace.csv", &trace_csv(&res.trace, false))?;
    run.write("trace_timing.csv", &trace_csv(&res.trace, true))?;
    let target: f64 = cfg.get("target")?;
    let reached = res.nodes_to_reach(target);
    let best = res.trace.iter().filter_map(|r| r.test_rmse).fold(f64::INFINITY, f64::min);
    let p_test = res.model.predict(test.inputs.view())?;
    let te = metric_row("test", slice(&p_test), slice(&test.targets))?;
    let mut metrics = Table::new(&METRIC_HEADER);
    metrics.push(te.clone());
    run.table("metrics.csv", &metrics)?;
    run.log(format!("nodes {} best test rmse {best:.5}, target {target} reached at {reached:?}", res.state.nodes()));
    run.record("nodes", json!(res.state.nodes()));
    run.record("nodes_to_target", json!(reached));
    run.record("best_test_rmse", json!(best));
    run.record("test", metrics_json(&te));
    run.finish()
}

fn gpr_keys() -> Vec<Key> {
    // chosen by validation grid search on a 3,000-row Heston set
    vec![
        key("sigma_f", 0.1, "kernel amplitude"),
        key("length_scale", 4.0, "kernel length scale on inputs mapped to [-1, 1]"),
        key("sigma_n", 1e-5, "observation noise"),
        key("max_train", 0, "cap on training rows, 0 for all"),
    ]
}

/// Inputs mapped to `[-1, 1]` with bounds from the training set.
fn gpr_fit_scaled(train: &Dataset, p: &GprParams, cap: usize) -> CliResult<(InputScaler, GprModel)> {
    let train = if cap > 0 && cap < train.len() { train.head(cap)? } else { train.clone() };
    let sc = InputScaler::fit(train.inputs.view())?;
    let x = sc.transform(train.inputs.view())?;
    let m = gpr_fit(x.view(), train.targets.view(), p)?;
    Ok((sc, m))
}

fn gpr_params(cfg: &Config) -> CliResult<GprParams> {
    let p = GprParams {
        sigma_f: cfg.get("sigma_f")?,
        length_scale: cfg.get("length_scale")?,
        sigma_n: cfg.get("sigma_n")?,
    };
    p.validate()?;
    Ok(p)
}

pub fn train_gpr_schema() -> Vec<Key> {
    let g = GridSpec::default();
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut k = vec![
        key("out_dir", "runs/train-gpr", "run directory"),
        key("grid", false, "pick sigma_f and length_scale by validation grid search"),
        key("grid_sigma_f", list(&g.sigma_f), "grid values for sigma_f"),
        key("grid_length_scale", list(&g.length_scale), "grid values for length_scale"),
        key("valid_frac", 0.2, "validation share of the training rows for the grid search"),
    ];
    k.extend(gpr_keys());
    k.extend(data_keys(15000));
    k.extend(generator_keys());
    k
}

pub fn train_gpr(cfg: &Config) -> CliResult<std::path::PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let (train, test) = load_split(cfg, &mut run)?;
    let mut params = gpr_params(cfg)?;
    let cap: usize = cfg.get("max_train")?;
    if cfg.get::<bool>("grid")? {
        let vf: f64 = cfg.get("valid_frac")?;
        let (fit_part, valid) = train.split(1.0 - vf, cfg.get::<u64>("split_seed")?.wrapping_add(1))?;
        let sc = InputScaler::fit(fit_part.inputs.view())?;
        let scale = |d: &Dataset| -> CliResult<Dataset> {
            Ok(Dataset::new(sc.transform(d.inputs.view())?, d.targets.clone(), d.feature_names.clone())?)
        };
        let spec = GridSpec {
            sigma_f: cfg.list("grid_sigma_f")?,
            length_scale: cfg.list("grid_length_scale")?,
            sigma_n: params.sigma_n,
        };
        let (fp, vd) = (scale(&fit_part)?, scale(&valid)?);
        let (best, table) = run.timed("grid_search", || grid_search(&fp, &vd, &spec))?;
        let mut t = Table::new(&["sigma_f", "length_scale", "sigma_n", "valid_rmse"]);
        for g in &table {
            t.push(vec![num(g.params.sigma_f), num(g.params.length_scale), num(g.params.sigma_n), num(g.rmse)]);
        }
        run.table("grid.csv", &t)?;
        params = best;
    }
    let (sc, model) = run.timed("train", || gpr_fit_scaled(&train, &params, cap))?;
    let xt = sc.transform(test.inputs.view())?;
    let pred = run.timed("predict_test", || model.predict(xt.view()))?;
    let xtr = sc.transform(train.inputs.view())?;
    let ptr = model.predict_mean(xtr.view())?;
    let mut metrics = Table::new(&METRIC_HEADER);
    let tr = metric_row("train", slice(&ptr), slice(&train.targets))?;
    let te = metric_row("test", slice(&pred.mean), slice(&test.targets))?;
    run.log(format!("test rmse {} (sigma_f {}, length_scale {})", te[2], params.sigma_f, params.length_scale));
    run.record("params", json!({"sigma_f": params.sigma_f, "length_scale": params.length_scale, "sigma_n": params.sigma_n}));
    run.record("train", metrics_json(&tr));
    run.record("test", metrics_json(&te));
    run.record("variance_clamped", json!(pred.clamped));
    metrics.push(tr);
    metrics.push(te);
    run.table("metrics.csv", &metrics)?;
    run.finish()
}

pub fn bench_schema() -> Vec<Key> {
    let mut k = vec![
        key("out_dir", "runs/bench", "run directory"),
        key("elm_nodes", "1000,3000", "ELM sizes for the comparison table"),
        key("scale", 0.5, "hidden weight scale for the table"),
        key("ridge", 1e-8, "ridge penalty C"),
        key("activation", "sine", "sine, tanh or sigmoid"),
        key("seed", 1, "hidden layer seed for the table"),
        key("gpr", true, "include the GPR baseline"),
        key("sweep", true, "run the node and scale sweeps"),
        key("sweep_nodes", "250,500,1000,2000,3000", "node counts, at the table scale"),
        key("sweep_scales", "0.1,0.25,0.5,1,2", "scales, at sweep_scale_nodes nodes"),
        key("sweep_scale_nodes", 1000, "node count for the scale sweep"),
        key("sweep_seeds", "1,2,3", "hidden layer seeds per sweep point"),
    ];
    k.extend(gpr_keys());
    k.extend(data_keys(15000));
    k.extend(generator_keys());
    k
}

struct Fitted {
    train_ms: f64,
    predict_ms: f64,
    train: Vec<String>,
    test: Vec<String>,
}

fn bench_elm(train: &Dataset, test: &Dataset, nodes: usize, scale: f64, act: Activation, ridge: f64, seed: u64) -> CliResult<Fitted> {
    let layer = HiddenLayer::random(train.dim(), nodes, scale, act, seed)?;
    let t0 = Instant::now();
    let model = ElmModel::fit(layer, train.inputs.view(), train.targets.view(), ridge)?;
    let train_ms = t0.elapsed().as_secs_f64() * 1e3;
    let t1 = Instant::now();
    let p_test = model.predict(test.inputs.view())?;
    let predict_ms = t1.elapsed().as_secs_f64() * 1e3;
    let p_train = model.predict(train.inputs.view())?;
    Ok(Fitted {
        train_ms,
        predict_ms,
        train: metric_row("train", slice(&p_train), slice(&train.targets))?,
        test: metric_row("test", slice(&p_test), slice(&test.targets))?,
    })
}

pub fn bench(cfg: &Config) -> CliResult<std::path::PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let (train, test) = load_split(cfg, &mut run)?;
    let act: Activation = cfg.get("activation")?;
    let ridge: f64 = cfg.get("ridge")?;
    let scale: f64 = cfg.get("scale")?;
    let seed: u64 = cfg.get("seed")?;

    let header = ["panel", "model", "rows", "rmse", "mae", "mape", "mape_excluded"];
    let mut table = Table::new(&header);
    let mut timing = Table::new(&["panel", "model", "wall_ms"]);
    let mut add = |model: &str, f: &Fitted| {
        for (panel, row, ms) in [("train", &f.train, f.train_ms), ("test", &f.test, f.predict_ms)] {
            let mut r = vec![panel.to_string(), model.to_string()];
            r.extend(row[1..].iter().cloned());
            table.push(r);
            timing.push(vec![panel.to_string(), model.to_string(), format!("{ms:.3}")]);
        }
    };
    let mut results = serde_json::Map::new();
    for nodes in cfg.list::<usize>("elm_nodes")? {
        let name = format!("ELM ({nodes})");
        let f = bench_elm(&train, &test, nodes, scale, act, ridge, seed)?;
        run.log(format!("{name}: test rmse {} train {:.0} ms", f.test[2], f.train_ms));
        results.insert(name.clone(), json!({"test": metrics_json(&f.test), "train_ms": f.train_ms}));
        add(&name, &f);
    }
    if cfg.get::<bool>("gpr")? {
        let p = gpr_params(cfg)?;
        let cap: usize = cfg.get("max_train")?;
        let t0 = Instant::now();
        let (sc, model) = gpr_fit_scaled(&train, &p, cap)?;
        let train_ms = t0.elapsed().as_secs_f64() * 1e3;
        let xt = sc.transform(test.inputs.view())?;
        let t1 = Instant::now();
        let pt = model.predict_mean(xt.view())?;
        let predict_ms = t1.elapsed().as_secs_f64() * 1e3;
        let ptr = model.predict_mean(sc.transform(train.inputs.view())?.view())?;
        drop(model);
        let f = Fitted {
            train_ms,
            predict_ms,
            train: metric_row("train", slice(&ptr), slice(&train.targets))?,
            test: metric_row("test", slice(&pt), slice(&test.targets))?,
        };
        run.log(format!("GPR: test rmse {} train {:.0} ms", f.test[2], f.train_ms));
        results.insert("GPR".into(), json!({"test": metrics_json(&f.test), "train_ms": f.train_ms}));
        add("GPR", &f);
    }
    run.table("table1.csv", &table)?;
    run.table("table1_timing.csv", &timing)?;
    run.record("table", serde_json::Value::Object(results));

    if cfg.get::<bool>("sweep")? {
        let seeds: Vec<u64> = cfg.list("sweep_seeds")?;
        let mut points = Table::new(&["sweep", "nodes", "scale", "seed", "test_rmse"]);
        let mut times = Table::new(&["sweep", "nodes", "scale", "seed", "train_ms", "predict_ms"]);
        let mut best = Table::new(&["sweep", "nodes", "scale", "best_test_rmse"]);
        let node_list: Vec<usize> = cfg.list("sweep_nodes")?;
        let scale_list: Vec<f64> = cfg.list("sweep_scales")?;
        let scale_nodes: usize = cfg.get("sweep_scale_nodes")?;
        let plan: Vec<(&str, usize, f64)> = node_list
            .iter()
            .map(|&l| ("nodes", l, scale))
            .chain(scale_list.iter().map(|&s| ("scale", scale_nodes, s)))
            .collect();
        for (sweep, nodes, s) in plan {
            let mut lowest = f64::INFINITY;
            for &sd in &seeds {
                let f = bench_elm(&train, &test, nodes, s, act, ridge, sd)?;
                let r: f64 = f.test[2].parse().unwrap_or(f64::NAN);
                lowest = lowest.min(r);
                points.push(vec![sweep.into(), nodes.to_string(), num(s), sd.to_string(), f.test[2].clone()]);
                times.push(vec![
                    sweep.into(),
                    nodes.to_string(),
                    num(s),
                    sd.to_string(),
                    format!("{:.3}", f.train_ms),
                    format!("{:.3}", f.predict_ms),
                ]);
            }
            run.log(format!("sweep {sweep}: L={nodes} scale={s} best rmse {lowest:.5}"));
            best.push(vec![sweep.into(), nodes.to_string(), num(s), num(lowest)]);
        }
        run.table("sweep.csv", &points)?;
        run.table("sweep_best.csv", &best)?;
        run.table("sweep_timing.csv", &times)?;
    }
    run.finish()
}

/// Rows of `sweep_best.csv` as `(sweep, nodes, scale, best_rmse)`.
pub fn read_sweep_best(path: &Path) -> CliResult<Vec<(String, usize, f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> CliResult<f64> {
            rec[i].parse().map_err(|e| CliError::other(format!("bad number in {}: {e}", path.display())))
        };
        out.push((rec[0].to_string(), parse(1)? as usize, parse(2)?, parse(3)?));
    }
    Ok(out)
}
