use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde_json::{json, Value};

use bci_itr::io::{load_confusions, parse_inline_channel, parse_matrix_csv, write_confusion_csv};
use bci_itr::sim::{evaluate_loto, synth_ssvep, FilterBankSpec, Method, StimulusTable, SynthConfig, TrialDataset};
use bci_itr::stats::{normalize_confusion, pool_confusions};
use bci_itr::{
    asymmetry_score, balanced_matrix, blahut_arimoto, conventional_itr, fano_check, joint_optimize,
    mutual_information_fixed_input, AccuracyTarget, BaConfig, ConfusionRecord, DesignConfig,
    Distribution,
};

use crate::report::{num, opt, Report};
use crate::{BaArgs, CapacityArgs, Cli, Command, DesignArgs, EvaluateArgs, ItrArgs, MethodArgs, Outcome, SimulateArgs};

const DEFAULT_GAZE_S: f64 = 0.5;

pub fn run(cli: &Cli) -> Result<(String, Outcome)> {
    let (report, converged) = match &cli.command {
        Command::Capacity(a) => capacity(a)?,
        Command::Itr(a) => itr(a)?,
        Command::Design(a) => design(a, cli.seed)?,
        Command::Simulate(a) => simulate(a, cli.seed)?,
        Command::Evaluate(a) => evaluate(a)?,
    };
    let outcome = if converged { Outcome::Done } else { Outcome::NotConverged };
    Ok((report.render(cli.format), outcome))
}

fn positive(key: &str, v: f64) -> Result<()> {
    ensure!(v > 0.0 && v.is_finite(), "invalid `--{key}`: {v} is not a positive number");
    Ok(())
}

fn ba_config(a: &BaArgs) -> Result<BaConfig<f64>> {
    positive("threshold", a.threshold)?;
    ensure!(a.max_iter > 0, "invalid `--max-iter`: must be at least 1");
    Ok(BaConfig { gap_threshold: a.threshold, max_iter: a.max_iter, initial_input: None })
}

fn method(a: &MethodArgs) -> Result<Method> {
    let mut m = Method::new(a.algorithm, a.ensemble);
    if a.filter_bank > 0 {
        m.filter_bank = FilterBankSpec::standard(a.filter_bank)?;
    }
    Ok(m)
}

fn capacity(a: &CapacityArgs) -> Result<(Report, bool)> {
    let ba = ba_config(&a.ba)?;
    if let Some(t) = a.period {
        positive("period", t)?;
    }
    let ch = match (&a.inline, &a.file) {
        (Some(spec), _) => parse_inline_channel(spec).with_context(|| format!("inline channel `{spec}`"))?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_matrix_csv(&text).with_context(|| path.display().to_string())?
        }
        (None, None) => bail!("give a matrix file or --inline"),
    };
    let r = blahut_arimoto(&ch, &ba)?;
    let mut rows = vec![
        vec!["capacity_bits".into(), num(r.capacity)],
        vec!["iterations".into(), r.iterations.to_string()],
        vec!["gap".into(), format!("{:.3e}", r.gap)],
        vec!["converged".into(), r.converged.to_string()],
    ];
    for (i, p) in r.optimal_input.as_slice().iter().enumerate() {
        rows.push(vec![format!("input[{i}]"), num(*p)]);
    }
    let per_min = a.period.map(|t| 60.0 / t * r.capacity);
    if let Some(v) = per_min {
        rows.push(vec!["bits_per_min".into(), num(v)]);
    }
    let json = json!({
        "capacity": r.capacity,
        "optimal_input": r.optimal_input.as_slice(),
        "iterations": r.iterations,
        "gap": r.gap,
        "converged": r.converged,
        "bits_per_min": per_min,
    });
    Ok((Report { notes: vec![], headers: vec!["quantity".into(), "value".into()], rows, json }, r.converged))
}

struct Item {
    source: String,
    record: ConfusionRecord,
    window: f64,
    gaze: f64,
}

fn itr(a: &ItrArgs) -> Result<(Report, bool)> {
    let ba = ba_config(&a.ba)?;
    for (k, v) in [("window", a.window), ("reference-window", a.reference_window)] {
        if let Some(v) = v {
            positive(k, v)?;
        }
    }
    if let Some(g) = a.gaze {
        ensure!(g >= 0.0 && g.is_finite(), "invalid `--gaze`: {g} is negative");
    }

    let mut items = Vec::new();
    for path in &a.files {
        let records = load_confusions(path).map_err(|e| match e {
            bci_itr::Error::Io(_) => anyhow::Error::new(e),
            _ => anyhow::Error::new(e).context(path.display().to_string()),
        })?;
        for record in records {
            let window = record
                .window_s
                .or(a.window)
                .with_context(|| format!("{}: no window length in file; pass --window", path.display()))?;
            let gaze = a.gaze.or(record.gaze_s).unwrap_or(DEFAULT_GAZE_S);
            items.push(Item { source: path.display().to_string(), record, window, gaze });
        }
    }
    if a.pooled {
        let mut groups: BTreeMap<(u64, u64), Vec<Item>> = BTreeMap::new();
        for it in items {
            groups.entry((it.window.to_bits(), it.gaze.to_bits())).or_default().push(it);
        }
        items = groups
            .into_values()
            .map(|g| {
                let recs: Vec<ConfusionRecord> = g.iter().map(|i| i.record.clone()).collect();
                let mut pooled = pool_confusions(&recs).context("pooling")?;
                pooled.subject = Some("pooled".into());
                Ok(Item { source: format!("{} files", g.len()), record: pooled, window: g[0].window, gaze: g[0].gaze })
            })
            .collect::<Result<_>>()?;
    }
    items.sort_by(|x, y| x.record.subject.cmp(&y.record.subject).then(x.window.total_cmp(&y.window)));

    let mut reference: BTreeMap<Option<String>, Distribution<f64>> = BTreeMap::new();
    if let Some(w) = a.reference_window {
        for it in items.iter().filter(|i| i.window == w) {
            let p = normalize_confusion(&it.record).with_context(|| it.source.clone())?;
            reference.insert(it.record.subject.clone(), blahut_arimoto(&p, &ba)?.optimal_input);
        }
    }

    let mut rows = Vec::new();
    let mut out = Vec::new();
    let mut converged = true;
    for it in &items {
        let p = normalize_confusion(&it.record).with_context(|| it.source.clone())?;
        let m = p.inputs();
        let own = blahut_arimoto(&p, &ba)?;
        converged &= own.converged;
        let px = match a.reference_window {
            Some(w) => reference
                .get(&it.record.subject)
                .cloned()
                .with_context(|| format!("{}: no record at reference window {w}", it.source))?,
            None => own.optimal_input.clone(),
        };
        let period = it.window + it.gaze;
        let scale = 60.0 / period;
        let accuracy = p.diagonal().iter().sum::<f64>() / m as f64;
        let conv = conventional_itr(m, accuracy, period)?;
        let bal = balanced_matrix(&[accuracy], m)?;
        let balanced = scale * mutual_information_fixed_input(&bal, &px)?;
        let asym = scale * mutual_information_fixed_input(&p, &px)?;
        let delta_asm = asymmetry_score(&p).ok();
        let delta_itr = (conv.bits_per_min > 0.0).then(|| (asym - conv.bits_per_min) / conv.bits_per_min);
        let fano = fano_check(&p, &px)?;
        let subject = it.record.subject.clone().unwrap_or_else(|| "-".into());
        rows.push(vec![
            subject.clone(),
            num(it.window),
            num(period),
            num(accuracy),
            num(conv.bits_per_min),
            num(balanced),
            num(asym),
            opt(delta_asm),
            opt(delta_itr),
            fano.satisfied.to_string(),
        ]);
        out.push(json!({
            "source": it.source,
            "subject": it.record.subject,
            "method": it.record.method,
            "window_s": it.window,
            "gaze_s": it.gaze,
            "period_s": period,
            "accuracy": accuracy,
            "below_chance": conv.below_chance,
            "conventional_bits_per_min": conv.bits_per_min,
            "balanced_optimal_id_bits_per_min": balanced,
            "asym_optimal_id_bits_per_min": asym,
            "capacity_bits_per_min": scale * own.capacity,
            "optimal_input": px.as_slice(),
            "delta_asm": delta_asm,
            "delta_itr": delta_itr,
            "conditional_entropy": fano.conditional_entropy,
            "fano_bound": fano.bound,
            "fano_satisfied": fano.satisfied,
            "converged": own.converged,
        }));
    }
    let gaze_note = match a.gaze {
        Some(g) => format!("gaze {g} s"),
        None => format!("gaze from file, else {DEFAULT_GAZE_S} s"),
    };
    let headers = ["subject", "window_s", "T_s", "accuracy", "conventional", "balanced_opt_id", "asym_opt_id", "delta_asm", "delta_itr", "fano_ok"];
    Ok((
        Report {
            notes: vec![format!("bits/min over T = window + gaze ({gaze_note})")],
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows,
            json: json!({ "version": 1, "rows": out }),
        },
        converged,
    ))
}

fn design(a: &DesignArgs, seed: u64) -> Result<(Report, bool)> {
    let ba = ba_config(&a.ba)?;
    ensure!(a.alphabet >= 2, "invalid `--alphabet`: {} < 2", a.alphabet);
    ensure!(a.restarts >= 1, "invalid `--restarts`: must be at least 1");
    ensure!(a.max_outer >= 1, "invalid `--max-outer`: must be at least 1");
    positive("tolerance", a.tolerance)?;
    if let Some(t) = a.period {
        positive("period", t)?;
    }
    let targets = a
        .targets
        .iter()
        .map(|&t| AccuracyTarget::new(t).with_context(|| format!("invalid `--targets` entry {t}")))
        .collect::<Result<Vec<_>>>()?;
    let cfg = DesignConfig { restarts: a.restarts, seed, max_outer: a.max_outer, tolerance: a.tolerance, ba, ..Default::default() };

    let mut results = Vec::with_capacity(targets.len());
    for t in &targets {
        let r = joint_optimize(a.alphabet, *t, &cfg).with_context(|| format!("target accuracy {}", t.accuracy()))?;
        results.push(r);
    }
    let converged = results.iter().all(|r| r.converged);
    let mut headers = vec!["target".to_string()];
    headers.extend(targets.iter().map(|t| format!("{}", t.accuracy())));
    let row = |name: &str, f: &dyn Fn(usize) -> String| {
        let mut r = vec![name.to_string()];
        r.extend((0..results.len()).map(f));
        r
    };
    let mut rows = vec![
        row("Capacity", &|i| num(results[i].capacity)),
        row("Conditional Entropy", &|i| num(results[i].conditional_entropy)),
        row("Fano's Bound", &|i| num(results[i].fano_bound)),
        row("Error", &|i| num(results[i].achieved_error)),
    ];
    if let Some(t) = a.period {
        rows.push(row("Bits/min", &|i| num(60.0 / t * results[i].capacity)));
    }
    let mut notes = vec![format!("M = {}, {} restarts, seed {seed}", a.alphabet, a.restarts)];
    if a.show_channels {
        for (t, r) in targets.iter().zip(&results) {
            let rows: Vec<String> = r.channel.to_rows().iter().map(|row| row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")).collect();
            notes.push(format!("A = {}: P = [{}], px = {:?}", t.accuracy(), rows.join("; "), r.input.as_slice()));
        }
    }
    let json: Vec<Value> = targets
        .iter()
        .zip(&results)
        .map(|(t, r)| {
            json!({
                "target_accuracy": t.accuracy(),
                "capacity": r.capacity,
                "conditional_entropy": r.conditional_entropy,
                "fano_bound": r.fano_bound,
                "fano_satisfied": r.fano_satisfied,
                "achieved_error": r.achieved_error,
                "channel": r.channel.to_rows(),
                "input": r.input.as_slice(),
                "iterations": r.iterations,
                "converged": r.converged,
                "bits_per_min": a.period.map(|p| 60.0 / p * r.capacity),
            })
        })
        .collect();
    Ok((Report { notes, headers, rows, json: json!({ "version": 1, "alphabet": a.alphabet, "results": json }) }, converged))
}

fn record_row(rec: &ConfusionRecord, residual: Option<f64>, file: &Path) -> (Vec<String>, Value) {
    let subject = rec.subject.clone().unwrap_or_else(|| "-".into());
    let window = rec.window_s.unwrap_or(f64::NAN);
    (
        vec![subject, num(window), num(rec.accuracy()), residual.map_or("-".into(), |r| format!("{r:.2e}")), file.display().to_string()],
        json!({
            "subject": rec.subject,
            "window_s": rec.window_s,
            "method": rec.method,
            "accuracy": rec.accuracy(),
            "max_eigen_residual": residual,
            "file": file.display().to_string(),
            "counts": rec.counts(),
        }),
    )
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<(Report, bool)> {
    ensure!(a.classes >= 2, "invalid `--classes`: {} < 2", a.classes);
    ensure!(a.trials >= 3, "invalid `--trials`: leave-one-trial-out needs at least 3");
    ensure!(a.channels >= 1, "invalid `--channels`: must be at least 1");
    ensure!(a.subjects >= 1, "invalid `--subjects`: must be at least 1");
    ensure!(!a.windows.is_empty(), "invalid `--windows`: empty");
    for &w in &a.windows {
        positive("windows", w)?;
    }
    positive("sample-rate", a.sample_rate)?;
    ensure!(a.latency >= 0.0 && a.latency.is_finite(), "invalid `--latency`: {}", a.latency);
    ensure!(a.gaze >= 0.0 && a.gaze.is_finite(), "invalid `--gaze`: {}", a.gaze);
    ensure!(a.snr_db.is_finite(), "invalid `--snr-db`: {}", a.snr_db);
    let method = method(&a.method)?;
    bci_itr::sim::check_filter_bank(&method.filter_bank, a.sample_rate).context("invalid `--filter-bank`")?;
    let stimuli = StimulusTable::grid(a.classes)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut rows = Vec::new();
    let mut out = Vec::new();
    for s in 0..a.subjects {
        for &w in &a.windows {
            let cfg = SynthConfig {
                n_channels: a.channels,
                n_trials: a.trials,
                window_s: w,
                sample_rate: a.sample_rate,
                snr_db: a.snr_db,
                harmonics: a.harmonics,
                latency_s: a.latency,
                seed: seed.wrapping_add(s as u64),
            };
            let ds = synth_ssvep(&stimuli, &cfg)?;
            let name = format!("s{:02}_w{w}", s + 1);
            if a.save_datasets {
                let path = a.out.join(format!("{name}.dataset.json"));
                let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                ds.write_json(std::io::BufWriter::new(f))?;
            }
            let loto = evaluate_loto(&ds, &method)?;
            let mut rec = loto.confusion;
            rec.subject = Some(format!("s{:02}", s + 1));
            rec.gaze_s = Some(a.gaze);
            let path = a.out.join(format!("{name}.csv"));
            fs::write(&path, write_confusion_csv(&rec)).with_context(|| format!("writing {}", path.display()))?;
            let (r, j) = record_row(&rec, loto.max_residual, &path);
            rows.push(r);
            out.push(j);
        }
    }
    Ok((
        Report {
            notes: vec![format!("{} classes, {} at {} dB SNR, seed {seed}", a.classes, method.label(), a.snr_db)],
            headers: ["subject", "window_s", "accuracy", "eigen_residual", "file"].iter().map(|s| s.to_string()).collect(),
            rows,
            json: json!({ "version": 1, "method": method.label(), "records": out }),
        },
        true,
    ))
}

fn evaluate(a: &EvaluateArgs) -> Result<(Report, bool)> {
    ensure!(a.gaze >= 0.0 && a.gaze.is_finite(), "invalid `--gaze`: {}", a.gaze);
    let method = method(&a.method)?;
    let f = fs::File::open(&a.dataset).with_context(|| format!("opening {}", a.dataset.display()))?;
    let ds = TrialDataset::read_json(std::io::BufReader::new(f)).with_context(|| a.dataset.display().to_string())?;
    let loto = evaluate_loto(&ds, &method)?;
    let mut rec = loto.confusion;
    rec.gaze_s = Some(a.gaze);
    let file: PathBuf = match &a.out {
        Some(p) => {
            fs::write(p, write_confusion_csv(&rec)).with_context(|| format!("writing {}", p.display()))?;
            p.clone()
        }
        None => PathBuf::from("-"),
    };
    let (r, j) = record_row(&rec, loto.max_residual, &file);
    Ok((
        Report {
            notes: vec![format!("{} on {}", method.label(), a.dataset.display())],
            headers: ["subject", "window_s", "accuracy", "eigen_residual", "file"].iter().map(|s| s.to_string()).collect(),
            rows: vec![r],
            json: json!({ "version": 1, "method": method.label(), "records": [j] }),
        },
        true,
    ))
}
