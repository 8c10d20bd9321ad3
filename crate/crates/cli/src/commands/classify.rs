//! `classify-run`: synthetic market, features, rolling ELM vs logistic
//! regression.

use std::path::PathBuf;

use elmfin::classify::{
    build_rows, daily_metrics_csv, daily_timing_csv, generate_market, rolling_protocol, write_snapshots_csv,
    write_trades_csv, ElmClassifierConfig, FeatureConfig, LogisticConfig, MarketConfig, ModelKind, RollingConfig,
};
use serde_json::json;

use crate::config::{key, Config, Key};
use crate::error::CliResult;
use crate::run::RunDir;

pub fn schema() -> Vec<Key> {
    let m = MarketConfig::default();
    let f = FeatureConfig::default();
    let e = ElmClassifierConfig::default();
    let l = LogisticConfig::default();
    let r = RollingConfig::default();
    vec![
        key("out_dir", "runs/classify-run", "run directory"),
        key("days", m.days, "trading days"),
        key("market_seed", 7, "market generator seed"),
        key("session_secs", m.session_secs, "session length in seconds"),
        key("snapshot_secs", m.snapshot_secs, "order book snapshot spacing"),
        key("trade_rate", m.trade_rate, "trades per second"),
        key("levels", m.levels, "book levels per side"),
        key("tick", m.tick, "price tick"),
        key("start_price", m.start_price, "opening price of the first day"),
        key("vol", m.vol, "log-price volatility per root second"),
        key("signal", m.signal, "drift per second per unit of latent imbalance"),
        key("imbalance_halflife", m.imbalance_halflife, "mean-reversion time of the latent imbalance"),
        key("window_secs", f.window_secs, "feature window and label horizon"),
        key("step_secs", f.step_secs, "spacing of consecutive rows"),
        key("drop_twap", true, "drop the TWAP feature (collinear with VWAP)"),
        key("initial_days", r.initial_days, "training-only days before the first test day"),
        key("elm_nodes", e.nodes, "ELM hidden nodes"),
        key("elm_scale", e.scale, "ELM weight scale"),
        key("elm_activation", e.activation, "ELM activation"),
        key("elm_ridge", e.ridge, "ELM ridge penalty"),
        key("elm_seed", e.seed, "ELM hidden layer seed"),
        key("lr_iterations", l.iterations, "logistic regression gradient steps"),
        key("lr_rate", l.learning_rate, "initial step size"),
        key("lr_decay", l.decay, "step decay horizon"),
        key("lr_l2", l.l2, "L2 penalty on the weights"),
        key("write_market", false, "write trades.csv and snapshots.csv"),
    ]
}

pub fn run(cfg: &Config) -> CliResult<PathBuf> {
    let mut run = RunDir::create(cfg.raw("out_dir"), cfg)?;
    let mc = MarketConfig {
        days: cfg.get("days")?,
        session_secs: cfg.get("session_secs")?,
        snapshot_secs: cfg.get("snapshot_secs")?,
        trade_rate: cfg.get("trade_rate")?,
        levels: cfg.get("levels")?,
        tick: cfg.get("tick")?,
        start_price: cfg.get("start_price")?,
        vol: cfg.get("vol")?,
        signal: cfg.get("signal")?,
        imbalance_halflife: cfg.get("imbalance_halflife")?,
    };
    let mut fc = FeatureConfig {
        window_secs: cfg.get("window_secs")?,
        step_secs: cfg.get("step_secs")?,
        ..FeatureConfig::default()
    };
    if !cfg.get::<bool>("drop_twap")? {
        fc.mask = [true; 13];
    }
    let rc = RollingConfig {
        initial_days: cfg.get("initial_days")?,
        elm: ElmClassifierConfig {
            nodes: cfg.get("elm_nodes")?,
            scale: cfg.get("elm_scale")?,
            activation: cfg.get("elm_activation")?,
            ridge: cfg.get("elm_ridge")?,
            seed: cfg.get("elm_seed")?,
        },
        lr: LogisticConfig {
            iterations: cfg.get("lr_iterations")?,
            learning_rate: cfg.get("lr_rate")?,
            decay: cfg.get("lr_decay")?,
            l2: cfg.get("lr_l2")?,
        },
    };
    let seed: u64 = cfg.get("market_seed")?;
    let days = run.timed("generate", || generate_market(&mc, seed))?;
    if cfg.get::<bool>("write_market")? {
        write_trades_csv(run.file("trades.csv"), &days)?;
        write_snapshots_csv(run.file("snapshots.csv"), &days)?;
    }
    let rows = run.timed("features", || build_rows(&days, mc.session_secs, &fc))?;
    run.log(format!("{} rows, {} dropped at session close", rows.y.len(), rows.dropped));
    let results = rolling_protocol(&rows, &rc)?;
    run.write("daily_metrics.csv", &daily_metrics_csv(&results)?)?;
    run.write("daily_timing.csv", &daily_timing_csv(&results)?)?;

    let mut models = serde_json::Map::new();
    for kind in [ModelKind::Elm, ModelKind::Lr] {
        let rs: Vec<_> = results.iter().filter(|r| r.model == kind).collect();
        let n = rs.len() as f64;
        let acc = rs.iter().map(|r| r.scores.accuracy).sum::<f64>() / n;
        let sd = (rs.iter().map(|r| (r.scores.accuracy - acc).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let f1 = rs.iter().map(|r| r.scores.f1).sum::<f64>() / n;
        let ms = rs.iter().map(|r| r.train_ms).sum::<f64>();
        run.log(format!("{}: accuracy {acc:.2}% (sd {sd:.2}) f1 {f1:.2} train {ms:.0} ms", kind.name()));
        models.insert(kind.name().to_string(), json!({"mean_accuracy": acc, "sd_accuracy": sd, "mean_f1": f1, "test_days": rs.len()}));
    }
    run.record("rows", json!(rows.y.len()));
    run.record("features", json!(fc.names()));
    run.record("models", serde_json::Value::Object(models));
    run.finish()
}
