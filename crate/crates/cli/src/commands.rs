use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hemo_core::estimation::{estimate, synthetic_measurement, OptimizerSettings};
use hemo_core::kernel::{read_model, write_model, InterpolantModel, KernelFamily};
use hemo_core::network::load_network_file;
use hemo_core::pipeline::{
    build_datasets, cached_warm_up, evaluate_model, model_path, read_dataset, run_full_model, time_evaluation,
    time_full_model, train_all, write_curve, write_dataset, write_error_report, Quantity, SeriesKey,
    SnapshotProtocol,
};
use hemo_core::vkoga::CvSpec;
use hemo_core::{desk, Error, Network, Result};

use crate::manifest::{manifest_for_file, read_text, sha256_file, Manifest, MANIFEST_NAME};
use crate::{BenchArgs, Cli, Command, EstimateArgs, EvalArgs, PredictArgs, ProtocolArgs, SimulateArgs, SnapshotArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Snapshot(a) => snapshot(cli, a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Estimate(a) => estimate_cmd(cli, a),
        Command::Bench(a) => bench(cli, a),
    }
}

/// A path, a file in the config directory (with or without `.toml`), or
/// the built-in `desk`.
fn resolve_network(cli: &Cli, spec: &str) -> Result<(Network, Option<PathBuf>)> {
    let direct = PathBuf::from(spec);
    let mut candidates = vec![direct.clone()];
    if let Some(dir) = &cli.config_dir {
        candidates.push(dir.join(spec));
        candidates.push(dir.join(format!("{spec}.toml")));
    }
    for c in &candidates {
        if c.is_file() {
            return Ok((load_network_file(c)?, Some(c.clone())));
        }
    }
    if spec == "desk" {
        return Ok((desk::desk_network()?, None));
    }
    Err(Error::MissingArtifact(direct))
}

fn check_degree(rs: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rs) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("--rs must lie in [0, 1], got {rs}")))
    }
}

fn warm_state(net: &Network, p: &ProtocolArgs, out: &Path) -> Result<(SnapshotProtocol, hemo_core::SimState)> {
    let protocol = p.protocol();
    protocol.validate()?;
    let cache = p.cache.clone().unwrap_or_else(|| out.join("cache"));
    let warm = cached_warm_up(&cache, net, &protocol)?;
    Ok((protocol, warm))
}

fn with_manifest_line(text: &str, manifest: &str) -> String {
    match text.split_once('\n') {
        Some((first, rest)) => format!("{first}\n# manifest {manifest}\n{rest}"),
        None => text.to_string(),
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    check_degree(a.rs)?;
    let (net, net_path) = resolve_network(cli, &a.network)?;
    let mut m = Manifest::start("simulate");
    m.config(net_path.as_deref(), &net.name)?;
    let (protocol, warm) = warm_state(&net, &a.protocol, &a.out)?;
    let snap = run_full_model(&net, &warm, a.rs, &protocol)?;
    let times = protocol.sample_times();
    for (label, p, f) in &snap.curves {
        for (q, values) in [(Quantity::Pressure, p), (Quantity::Flow, f)] {
            let head = format!("# manifest {MANIFEST_NAME}\n# network {} R_s {:?}\n", net.name, a.rs);
            let text = head + &write_curve(&times, values, q.name(), q.unit());
            let key = SeriesKey {
                monitor: label.clone(),
                quantity: q,
            };
            m.write(&a.out.join(format!("{}.csv", key.file_stem())), &text)?;
        }
    }
    println!(
        "simulated R_s = {} on '{}': {} curves in {}, mean stenosis flow {:.4} cm3/s",
        a.rs,
        net.name,
        2 * snap.curves.len(),
        a.out.display(),
        snap.stenosis_flow
    );
    m.finish(&a.out.join(MANIFEST_NAME))
}

fn snapshot(cli: &Cli, a: &SnapshotArgs) -> Result<()> {
    let (net, net_path) = resolve_network(cli, &a.network)?;
    let mut m = Manifest::start("snapshot");
    m.config(net_path.as_deref(), &net.name)?;
    let (protocol, warm) = warm_state(&net, &a.protocol, &a.out)?;
    let mut sizes = a.sizes.clone();
    if a.test > 0 {
        sizes.push(a.test);
    }
    if sizes.is_empty() {
        return Err(Error::InvalidInput("no dataset sizes requested".into()));
    }
    let t0 = std::time::Instant::now();
    let datasets = build_datasets(&net, &warm, &sizes, &protocol)?;
    for (i, d) in datasets.iter().enumerate() {
        let name = if a.test > 0 && i + 1 == datasets.len() {
            "test.csv".to_string()
        } else {
            format!("d{}.csv", d.len())
        };
        m.write(&a.out.join(&name), &with_manifest_line(&write_dataset(d), MANIFEST_NAME))?;
        println!("{name}: {} inputs, {} series, q = {}", d.len(), d.series.len(), d.q);
    }
    println!("snapshot runs took {:.1} s", t0.elapsed().as_secs_f64());
    m.finish(&a.out.join(MANIFEST_NAME))
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut m = Manifest::start("train");
    m.seed("cv_shuffle", a.seed);
    let text = read_text(&a.dataset)?;
    m.input(&a.dataset)?;
    let mut dataset = read_dataset(&text, &a.dataset.display().to_string())?;
    if let Some(keep) = &a.series {
        let keys: Vec<SeriesKey> = keep
            .iter()
            .map(|s| SeriesKey::parse(s).ok_or_else(|| Error::InvalidInput(format!("bad series '{s}'"))))
            .collect::<Result<_>>()?;
        for k in &keys {
            if !dataset.series.contains_key(k) {
                return Err(Error::InvalidInput(format!("dataset has no series {}", k.label())));
            }
        }
        dataset.series.retain(|k, _| keys.contains(k));
    }
    let n = dataset.len();
    let mut spec = CvSpec::standard(n, a.seed);
    if let Some(k) = a.folds {
        spec.folds = k;
    }
    spec.family = match a.kernel.as_str() {
        "gaussian" => KernelFamily::Gaussian,
        "wendland" => KernelFamily::Wendland {
            smoothness: a.smoothness,
        },
        other => return Err(Error::InvalidInput(format!("unknown kernel '{other}' (gaussian|wendland)"))),
    };
    if let Some(s) = &a.shapes {
        spec.shapes = s.clone();
    }
    if let Some(l) = &a.lambdas {
        spec.regularizations = l.clone();
    }
    let dataset_hash = sha256_file(&a.dataset)?;
    let trained = train_all(&dataset, &spec)?;
    let p = &dataset.provenance;
    for t in &trained {
        let r = &t.result.report;
        let meta: BTreeMap<String, String> = [
            ("series", t.key.label()),
            ("unit", t.key.quantity.unit().to_string()),
            ("network", p.network.clone()),
            ("network_hash", p.network_hash.clone()),
            ("record_start", format!("{:?}", p.protocol.record_start)),
            ("sample_rate", format!("{:?}", p.protocol.sample_rate)),
            ("training_points", n.to_string()),
            ("dataset_sha256", dataset_hash.clone()),
            ("seed", a.seed.to_string()),
            ("folds", spec.folds.to_string()),
            ("stop", format!("{:?}", r.stop)),
            ("manifest", MANIFEST_NAME.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        m.write(&model_path(&a.out, &t.key), &write_model(t.model(), &meta))?;
        let report = serde_json::to_string_pretty(r).expect("report serialises") + "\n";
        m.write(&a.out.join(format!("{}.report.json", t.key.file_stem())), &report)?;
        println!(
            "{}: ε = {:.4e}, λ = {:.1e}, {} of {} centres ({:?})",
            t.key.label(),
            r.shape,
            r.regularization,
            r.centers,
            n,
            r.stop
        );
    }
    m.finish(&a.out.join(MANIFEST_NAME))
}

fn load_model(path: &Path) -> Result<(InterpolantModel, BTreeMap<String, String>)> {
    read_model(&read_text(path)?, &path.display().to_string())
}

fn model_key(meta: &BTreeMap<String, String>, path: &Path) -> Result<SeriesKey> {
    meta.get("series")
        .and_then(|s| SeriesKey::parse(s))
        .ok_or_else(|| Error::Format {
            file: path.display().to_string(),
            msg: "model metadata lacks a valid 'series' entry".into(),
        })
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut m = Manifest::start("eval");
    let entries = std::fs::read_dir(&a.models).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(a.models.clone()),
        _ => Error::Io(e),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MissingArtifact(a.models.join("*.model")));
    }
    let test = read_dataset(&read_text(&a.test)?, &a.test.display().to_string())?;
    m.input(&a.test)?;
    let mut summary = String::from("# hemo-error-summary 1\n# manifest manifest.json\nseries,unit,centers,max_absolute,max_relative\n");
    let mut timing = String::from("# hemo-timing 1\nseries,inputs,repeats,mean_s_per_input,stddev_s\n");
    for path in &paths {
        m.input(path)?;
        let (model, meta) = load_model(path)?;
        let key = model_key(&meta, path)?;
        let report = evaluate_model(&model, &key, &test)?;
        let shared = hemo_core::pipeline::coincident_inputs(&model.centers, &test.inputs);
        if shared.len() > 2 {
            println!("note: {} test inputs coincide with centres of {}", shared.len(), key.label());
        }
        let text = with_manifest_line(
            &write_error_report(&report),
            &format!("{MANIFEST_NAME}\n# unit {}", key.quantity.unit()),
        );
        m.write(&a.out.join(format!("{}.errors.csv", key.file_stem())), &text)?;
        let _ = writeln!(
            summary,
            "{},{},{},{:?},{:?}",
            report.series,
            key.quantity.unit(),
            report.centers,
            report.max_absolute,
            report.max_relative
        );
        let t = time_evaluation(&model, &test.inputs, a.repeats);
        let _ = writeln!(timing, "{},{},{},{:e},{:e}", report.series, t.inputs, t.repeats, t.mean, t.stddev);
        println!(
            "{}: E_A = {:.4e} {}, E_R = {:.4e}, {} centres, {:.3e} s per input",
            report.series,
            report.max_absolute,
            key.quantity.unit(),
            report.max_relative,
            report.centers,
            t.mean
        );
    }
    m.write(&a.out.join("summary.csv"), &summary)?;
    m.write(&a.out.join("timing.csv"), &timing)?;
    m.finish(&a.out.join(MANIFEST_NAME))
}

fn sample_times(meta: &BTreeMap<String, String>, q: usize) -> Vec<f64> {
    let d = SnapshotProtocol::default();
    let start = meta.get("record_start").and_then(|v| v.parse().ok()).unwrap_or(d.record_start);
    let rate: f64 = meta.get("sample_rate").and_then(|v| v.parse().ok()).unwrap_or(d.sample_rate);
    (0..q).map(|k| start + k as f64 / rate).collect()
}

fn predict(a: &PredictArgs) -> Result<()> {
    check_degree(a.rs)?;
    let (model, meta) = load_model(&a.model)?;
    let key = model_key(&meta, &a.model)?;
    let values = model.evaluate_scalar(a.rs);
    let times = sample_times(&meta, values.len());
    let head = format!("# series {} R_s {:?}\n", key.label(), a.rs);
    let text = head + &write_curve(&times, &values, key.quantity.name(), key.quantity.unit());
    match &a.out {
        Some(out) => {
            let mut m = Manifest::start("predict");
            m.input(&a.model)?;
            let manifest = manifest_for_file(out);
            let name = manifest.file_name().unwrap().to_string_lossy().to_string();
            m.write(out, &format!("# manifest {name}\n{text}"))?;
            m.finish(&manifest)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Second column of a CSV curve; comment and header lines are skipped.
fn read_curve(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let field = cols.get(1).or(cols.first()).unwrap().trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() => continue,
            Err(_) => {
                return Err(Error::Format {
                    file: path.display().to_string(),
                    msg: format!("line {}: bad value '{field}'", i + 1),
                })
            }
        }
    }
    Ok(values)
}

fn estimate_cmd(cli: &Cli, a: &EstimateArgs) -> Result<()> {
    let mut m = Manifest::start("estimate");
    m.seed("noise", a.seed);
    let (model, meta) = load_model(&a.model)?;
    m.input(&a.model)?;
    let key = model_key(&meta, &a.model)?;
    let (source, y) = match (&a.curve, a.truth) {
        (Some(path), _) => {
            m.input(path)?;
            (format!("curve:{}", path.display()), read_curve(path)?)
        }
        (None, Some(truth)) => {
            check_degree(truth)?;
            let (source, f) = match &a.network {
                Some(spec) => {
                    let (net, net_path) = resolve_network(cli, spec)?;
                    m.config(net_path.as_deref(), &net.name)?;
                    let dir = a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
                    let (protocol, warm) = warm_state(&net, &a.protocol, dir)?;
                    let snap = run_full_model(&net, &warm, truth, &protocol)?;
                    let curve = snap
                        .curve(&key)
                        .ok_or_else(|| Error::InvalidInput(format!("network has no monitor for {}", key.label())))?
                        .to_vec();
                    (format!("full-model:{}", net.name), curve)
                }
                None => ("surrogate".to_string(), model.evaluate_scalar(truth)),
            };
            (source, synthetic_measurement(&f, a.noise, a.seed)?.values)
        }
        (None, None) => return Err(Error::InvalidInput("give --curve or --truth".into())),
    };
    let settings = OptimizerSettings {
        scan_points: (a.scan > 0).then_some(a.scan),
        ..OptimizerSettings::default()
    };
    let result = estimate(&y, &model, &settings)?;
    let mut out = serde_json::json!({
        "schema": "hemo-estimate/1",
        "manifest": manifest_for_file(&a.out).file_name().unwrap().to_string_lossy(),
        "model": a.model.display().to_string(),
        "series": key.label(),
        "measurement": source,
        "noise_level": a.noise,
        "seed": a.seed,
        "estimate": result.estimate,
        "cost": result.cost,
        "iterations": result.iterations,
        "converged": result.converged,
    });
    if let Some(t) = a.truth {
        out["truth"] = t.into();
        out["error"] = (result.estimate - t).abs().into();
    }
    if let Some(profile) = &result.profile {
        let mut name = a.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".profile.csv");
        let path = a.out.with_file_name(name);
        let mut text = String::from("R_s,cost\n");
        for (r, j) in profile {
            let _ = writeln!(text, "{r:?},{j:?}");
        }
        m.write(&path, &text)?;
        out["profile"] = path.display().to_string().into();
    }
    m.write(&a.out, &(serde_json::to_string_pretty(&out).expect("json") + "\n"))?;
    println!(
        "{}: R_s ≈ {:.6} (J = {:.3e}, {} iterations{})",
        key.label(),
        result.estimate,
        result.cost,
        result.iterations,
        a.truth.map(|t| format!(", error {:.3e}", (result.estimate - t).abs())).unwrap_or_default()
    );
    m.finish(&manifest_for_file(&a.out))
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    if a.inputs == 0 || a.repeats == 0 {
        return Err(Error::InvalidInput("--inputs and --repeats must be >= 1".into()));
    }
    let mut m = Manifest::start("bench");
    let (model, meta) = load_model(&a.model)?;
    m.input(&a.model)?;
    let key = model_key(&meta, &a.model)?;
    let inputs = hemo_core::pipeline::degree_grid(a.inputs, 1e-6);
    let t = time_evaluation(&model, &inputs, a.repeats);
    let full = match &a.network {
        Some(spec) => {
            let (net, net_path) = resolve_network(cli, spec)?;
            m.config(net_path.as_deref(), &net.name)?;
            let dir = a
                .out
                .as_deref()
                .and_then(Path::parent)
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            let (protocol, warm) = warm_state(&net, &a.protocol, dir)?;
            Some(time_full_model(&net, &warm, 0.5, &protocol, 1)?)
        }
        None => None,
    };
    let mut text = String::from("# hemo-bench 1\nseries,centers,inputs,repeats,mean_s_per_input,stddev_s,full_model_s,speedup\n");
    let _ = writeln!(
        text,
        "{},{},{},{},{:e},{:e},{},{}",
        key.label(),
        model.center_count(),
        t.inputs,
        t.repeats,
        t.mean,
        t.stddev,
        full.map(|f| format!("{:e}", f.mean)).unwrap_or_default(),
        full.map(|f| format!("{:.4e}", f.mean / t.mean)).unwrap_or_default()
    );
    print!("{text}");
    if let Some(out) = &a.out {
        let manifest = manifest_for_file(out);
        let name = manifest.file_name().unwrap().to_string_lossy().to_string();
        m.write(out, &with_manifest_line(&text, &name))?;
        m.finish(&manifest)?;
    }
    Ok(())
}
