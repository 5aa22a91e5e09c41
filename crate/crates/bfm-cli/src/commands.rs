use serde::Serialize;
use serde_json::{json, Value};

use bfm::config::parse_params;
use bfm::data::{
    authenticity, bundled, empirical_mrl, empirical_risks, expected_counts, kaplan_meier, parse_dataset_str,
    CensoredObservation, Dataset, PlotSeries, SeriesKind, Status,
};
use bfm::distribution::{bfm_frf, bfm_quantile, bfm_sample, bfm_sf, BfmParams, CauseLabel};
use bfm::hazard::{model_mrl, HazardModel};
use bfm::hmc::{
    envelope_coverage, hmc_run, posterior_predictive_sets, summarize, GammaPrior, HmcConfig, PosteriorChains,
};
use bfm::metrics::{mttf, scaled_ttt, ttt_shape, MrlMethod};
use bfm::mle::{default_starts, fit_bfm, fit_mle, MleConfig, MleFit, ParamSpace};
use bfm::models::{competitor_risks, evaluate_model, info_criteria, model_by_name, rank_models};
use bfm::risk::{risk_mc, risk_p1, risk_p2, risk_p3, RiskEstimate};

use crate::args::{
    Command, CompareArgs, CompatArgs, FitBayesArgs, FitMleArgs, HmcArgs, RisksArgs, SampleArgs, Space, Stratum, TttArgs,
};
use crate::error::CliError;
use crate::output::{num, resolve_out_dir, table, Run};

const BFM_NAMES: [&str; 4] = ["nu", "theta", "tau", "zeta"];

pub fn dispatch(command: Command, flags: Vec<(String, String)>) -> Result<(), CliError> {
    let name = command.name();
    let (out_dir, run) = match &command {
        Command::FitMle(a) => (a.common.out_dir.clone(), name),
        Command::FitBayes(a) => (a.common.out_dir.clone(), name),
        Command::Risks(a) => (a.common.out_dir.clone(), name),
        Command::Compare(a) => (a.common.out_dir.clone(), name),
        Command::Compat(a) => (a.common.out_dir.clone(), name),
        Command::Ttt(a) => (a.common.out_dir.clone(), name),
        Command::Sample(a) => (a.common.out_dir.clone(), name),
    };
    let mut run = Run::new(resolve_out_dir(out_dir.as_deref()), run, flags)?;
    match command {
        Command::FitMle(a) => fit_mle_cmd(&mut run, &a)?,
        Command::FitBayes(a) => fit_bayes_cmd(&mut run, &a)?,
        Command::Risks(a) => risks_cmd(&mut run, &a)?,
        Command::Compare(a) => compare_cmd(&mut run, &a)?,
        Command::Compat(a) => compat_cmd(&mut run, &a)?,
        Command::Ttt(a) => ttt_cmd(&mut run, &a)?,
        Command::Sample(a) => sample_cmd(&mut run, &a)?,
    }
    let manifest = run.finish()?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

fn load_data(run: &mut Run, source: &str) -> Result<Dataset, CliError> {
    let data = if let Some(name) = source.strip_prefix("bundled:") {
        let d = bundled(name).map_err(|e| CliError::Usage(e.to_string()))?;
        run.record_input(source, d.to_text().as_bytes());
        d
    } else {
        let bytes = std::fs::read(source).map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Data(format!("{source}: not UTF-8 text")))?;
        let d = parse_dataset_str(&text).map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        run.record_input(source, &bytes);
        d
    };
    if expected_counts(&data.name).is_some() {
        let a = authenticity(&data);
        if !a.verified {
            eprintln!(
                "warning: dataset `{}` does not match the reference counts/likelihood (counts ok: {}, nll {:?} vs reference {:?})",
                data.name, a.counts_match, a.observed_nll, a.reference_nll
            );
        }
    }
    Ok(data)
}

fn params_arg(s: &str, expected: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let v = parse_params(s).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))?;
    if v.len() != expected {
        return Err(CliError::Usage(format!(
            "--{flag} needs {expected} values, got {}",
            v.len()
        )));
    }
    Ok(v)
}

fn bfm_params(v: &[f64]) -> Result<BfmParams, CliError> {
    BfmParams::from_slice(v).map_err(|e| CliError::Usage(e.to_string()))
}

fn mle_config(seed: u64, starts: usize, space: Space) -> MleConfig {
    MleConfig {
        space: match space {
            Space::Log => ParamSpace::Log,
            Space::Natural => ParamSpace::Natural,
        },
        random_starts: starts,
        seed,
        ..MleConfig::default()
    }
}

fn write_text(run: &mut Run, name: &str, text: &str) -> Result<(), CliError> {
    print!("{text}");
    run.write(name, text.as_bytes())
}

fn params_json(names: &[String], values: &[f64]) -> Value {
    let mut m = serde_json::Map::new();
    for (n, v) in names.iter().zip(values) {
        m.insert(n.clone(), json!(v));
    }
    Value::Object(m)
}

fn fit_mle_cmd(run: &mut Run, a: &FitMleArgs) -> Result<(), CliError> {
    let model = model_by_name(&a.model).map_err(|e| CliError::Usage(e.to_string()))?;
    let data = load_data(run, &a.data)?;
    let cfg = mle_config(a.common.seed, a.starts, a.space);
    let starts = default_starts(model.as_ref(), &data, cfg.random_starts, cfg.seed);
    let fit = fit_mle(model.as_ref(), &data, &starts, &cfg)?;
    let crit = info_criteria(fit.nll, model.param_count(), data.len());
    let report = json!({
        "dataset": data.name,
        "n": data.len(),
        "model": fit.model,
        "params": params_json(&fit.param_names, &fit.params),
        "std_devs": params_json(&fit.param_names, &fit.std_devs),
        "aci95": fit.aci,
        "nll": fit.nll,
        "aic": crit.aic,
        "bic": crit.bic,
        "bc": crit.bc,
        "condition_number": fit.condition_number,
        "converged": fit.converged,
    });
    run.write_json("fit.json", &report)?;
    let rows: Vec<Vec<String>> = (0..fit.params.len())
        .map(|k| {
            vec![
                fit.param_names[k].clone(),
                num(fit.params[k]),
                num(fit.std_devs[k]),
                num(fit.aci[k].0),
                num(fit.aci[k].1),
            ]
        })
        .collect();
    let mut text = format!("{} fit to {} (n = {})\n\n", fit.model, data.name, data.len());
    text += &table(&["param", "estimate", "st-dev", "aci lo", "aci hi"], &rows);
    text += &format!(
        "\n-logL {:.4}  AIC {:.4}  BIC {:.4}  BC {:.4}\n",
        fit.nll, crit.aic, crit.bic, crit.bc
    );
    if !fit.converged {
        text += "warning: optimizer did not report convergence\n";
    }
    write_text(run, "fit.txt", &text)
}

fn hmc_config(h: &HmcArgs, seed: u64) -> Result<HmcConfig, CliError> {
    let cfg = HmcConfig {
        epsilon: h.eps,
        leapfrog_steps: h.leapfrog_steps,
        mass_diag: params_arg(&h.mass, 4, "mass")?,
        iterations: h.iterations,
        warmup: h.warmup,
        chains: h.chains,
        seed,
        tune: !h.no_tune,
    };
    cfg.validate(4)?;
    Ok(cfg)
}

fn priors_around(center: &[f64], h: &HmcArgs) -> Result<[GammaPrior; 4], CliError> {
    let rates = parse_params(&h.prior_rate).map_err(|e| CliError::Usage(format!("--prior-rate: {e}")))?;
    let rates = match rates.len() {
        1 => vec![rates[0]; 4],
        4 => rates,
        n => return Err(CliError::Usage(format!("--prior-rate needs 1 or 4 values, got {n}"))),
    };
    let mut out = [GammaPrior::new(1.0, 1.0)?; 4];
    for k in 0..4 {
        out[k] = GammaPrior::with_mean(center[k], rates[k])?;
    }
    Ok(out)
}

struct BayesFit {
    mle: MleFit,
    priors: [GammaPrior; 4],
    chains: PosteriorChains,
    mean: [f64; 4],
}

fn bayes_fit(
    data: &Dataset,
    h: &HmcArgs,
    cfg: &HmcConfig,
    mle_seed: u64,
    explicit: bool,
) -> Result<BayesFit, CliError> {
    let mle = fit_bfm(data, &mle_config(mle_seed, 8, Space::Log))?;
    let center = match (&h.prior_mean, explicit) {
        (Some(s), true) => params_arg(s, 4, "prior-mean")?,
        _ => mle.params.clone(),
    };
    let priors = priors_around(&center, h)?;
    let init = match (&h.init, explicit) {
        (Some(s), true) => params_arg(s, 4, "init")?,
        _ => mle.params.clone(),
    };
    let chains = hmc_run(data, &priors, cfg, &bfm_params(&init)?)?;
    let s = summarize(&chains)?;
    Ok(BayesFit {
        mle,
        priors,
        chains,
        mean: [s.mean[0], s.mean[1], s.mean[2], s.mean[3]],
    })
}

fn warn_unhealthy(label: &str, chains: &PosteriorChains) {
    for c in chains.unhealthy_chains() {
        eprintln!(
            "warning: {label} chain {c} unhealthy (acceptance {:.3}, {} divergences)",
            chains.accept_rate[c], chains.divergences[c]
        );
    }
}

#[derive(Serialize)]
struct ParamSummary {
    name: &'static str,
    mean: f64,
    sd: f64,
    hpd95: (f64, f64),
    rhat: Option<f64>,
}

fn fit_bayes_cmd(run: &mut Run, a: &FitBayesArgs) -> Result<(), CliError> {
    let cfg = hmc_config(&a.hmc, a.common.seed)?;
    let data = load_data(run, &a.data)?;
    let fit = bayes_fit(&data, &a.hmc, &cfg, a.common.seed, true)?;
    warn_unhealthy("posterior", &fit.chains);
    let s = summarize(&fit.chains)?;
    let params: Vec<ParamSummary> = (0..4)
        .map(|k| ParamSummary {
            name: BFM_NAMES[k],
            mean: s.mean[k],
            sd: s.sd[k],
            hpd95: s.hpd95[k],
            rhat: s.rhat[k].is_finite().then_some(s.rhat[k]),
        })
        .collect();
    let kept = cfg.iterations - cfg.warmup;
    let report = json!({
        "dataset": data.name,
        "n": data.len(),
        "mle": { "params": fit.mle.params, "nll": fit.mle.nll },
        "priors": fit.priors.iter().map(|p| json!({ "shape": p.a, "rate": p.b })).collect::<Vec<_>>(),
        "chains": cfg.chains,
        "kept_draws_per_chain": kept,
        "rhat_available": cfg.chains >= 2,
        "summary": params,
        "acceptance": fit.chains.accept_rate,
        "divergences": fit.chains.divergences,
        "final_epsilon": fit.chains.final_epsilon,
    });
    run.write_json("posterior.json", &report)?;
    if a.dump_draws {
        let mut csv = String::from("chain,iteration,nu,theta,tau,zeta\n");
        for (c, chain) in fit.chains.draws.iter().enumerate() {
            for (i, d) in chain.iter().enumerate() {
                csv += &format!("{c},{i},{},{},{},{}\n", d[0], d[1], d[2], d[3]);
            }
        }
        run.write("draws.csv", csv.as_bytes())?;
    }
    let rows: Vec<Vec<String>> = params
        .iter()
        .map(|p| {
            vec![
                p.name.to_string(),
                num(p.mean),
                num(p.sd),
                num(p.hpd95.0),
                num(p.hpd95.1),
                p.rhat.map_or("unavailable".into(), |r| format!("{r:.4}")),
            ]
        })
        .collect();
    let mut text = format!(
        "BFM posterior for {} ({} chains x {} kept draws)\n\n",
        data.name, cfg.chains, kept
    );
    text += &table(&["param", "mean", "sd", "hpd lo", "hpd hi", "R-hat"], &rows);
    let acc: Vec<String> = fit.chains.accept_rate.iter().map(|r| format!("{r:.3}")).collect();
    text += &format!("\nacceptance: {}\n", acc.join(" "));
    if cfg.chains < 2 {
        text += "R-hat is unavailable with a single chain\n";
    }
    write_text(run, "posterior.txt", &text)
}

fn risk_row(label: &str, r: &RiskEstimate, note: String) -> Vec<String> {
    vec![
        label.to_string(),
        format!("{:.4}", r.f1),
        format!("{:.4}", r.f2),
        format!("{:.4}", r.sum()),
        note,
    ]
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

fn risks_cmd(run: &mut Run, a: &RisksArgs) -> Result<(), CliError> {
    if a.p2_points == 0 {
        return Err(CliError::Usage("--p2-points must be >= 1".into()));
    }
    let (p, data) = match (&a.params, &a.data) {
        (Some(s), None) => (bfm_params(&params_arg(s, 4, "params")?)?, None),
        (None, Some(src)) => {
            let d = load_data(run, src)?;
            let fit = fit_bfm(&d, &mle_config(a.common.seed, 8, Space::Log))?;
            (bfm_params(&fit.params)?, Some(d))
        }
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --params or --data, not both".into())),
        (None, None) => return Err(CliError::Usage("risks needs --params or --data".into())),
    };
    let p1 = risk_p1(&p)?;
    let p3 = risk_p3(&p, a.series_tol, a.series_max_terms);
    let mc = if a.mc_draws == 0 {
        None
    } else {
        Some(risk_mc(&p, a.mc_draws, a.common.seed)?)
    };
    let mean = mttf(&p, MrlMethod::Quadrature)?.value;
    let grid = log_grid(bfm_quantile(0.01, &p)?, bfm_quantile(0.99, &p)?, a.p2_points);
    let mut p2 = Vec::new();
    for &x in &grid {
        p2.push((x, risk_p2(x, &p)?));
    }
    let p2_mttf = risk_p2(mean, &p)?;
    let empirical = data.as_ref().and_then(|d| empirical_risks(d).ok());

    let mut rows = vec![risk_row("P1 quadrature", &p1, String::new())];
    match &p3 {
        Ok(r) => {
            let note = r.detail.map_or(String::new(), |d| {
                format!(
                    "converged {}/{}{}",
                    d.cause1.converged,
                    d.cause2.converged,
                    if d.cause2_inner_converged {
                        ""
                    } else {
                        " (inner sum not converged)"
                    }
                )
            });
            rows.push(risk_row("P3 series", r, note));
        }
        Err(e) => rows.push(vec![
            "P3 series".into(),
            "n/a".into(),
            "n/a".into(),
            "n/a".into(),
            e.to_string(),
        ]),
    }
    if let Some(r) = &mc {
        rows.push(risk_row(
            "Monte Carlo",
            r,
            format!("se {:.5}, {} draws", r.std_error.unwrap_or(f64::NAN), a.mc_draws),
        ));
    }
    rows.push(risk_row("P2 at MTTF", &p2_mttf, format!("x = {}", num(mean))));
    if let Some((e1, e2)) = empirical {
        rows.push(vec![
            "empirical".into(),
            format!("{e1:.4}"),
            format!("{e2:.4}"),
            format!("{:.4}", e1 + e2),
            String::new(),
        ]);
    }
    let mut text = format!(
        "Risks at nu={} theta={} tau={} zeta={}\n\n",
        num(p.nu()),
        num(p.theta()),
        num(p.tau()),
        num(p.zeta())
    );
    text += &table(&["method", "F1", "F2", "sum", "note"], &rows);
    let p2_rows: Vec<Vec<String>> = p2
        .iter()
        .map(|(x, r)| vec![num(*x), format!("{:.4}", r.f1), format!("{:.4}", r.f2)])
        .collect();
    text += "\nhazard ratio r1/r over the 1%-99% quantile range\n";
    text += &table(&["x", "P2 F1", "P2 F2"], &p2_rows);

    let report = json!({
        "params": params_json(&BFM_NAMES.map(String::from), &p.to_array()),
        "dataset": data.as_ref().map(|d| d.name.clone()),
        "p1": p1,
        "p3": p3.as_ref().ok(),
        "p3_error": p3.as_ref().err().map(|e| e.to_string()),
        "monte_carlo": mc,
        "mttf": mean,
        "p2_at_mttf": p2_mttf,
        "p2_curve": p2.iter().map(|(x, r)| json!({ "x": x, "f1": r.f1, "f2": r.f2 })).collect::<Vec<_>>(),
        "empirical": empirical.map(|(a, b)| json!({ "f1": a, "f2": b })),
    });
    run.write_json("risks.json", &report)?;
    write_text(run, "risks.txt", &text)
}

fn linear_grid(hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| hi * k as f64 / n as f64).collect()
}

fn compare_cmd(run: &mut Run, a: &CompareArgs) -> Result<(), CliError> {
    let names: Vec<String> = a
        .models
        .split(',')
        .map(|s| s.trim().to_ascii_lowercase())
        .filter(|s| !s.is_empty())
        .collect();
    if names.len() < 2 {
        return Err(CliError::Usage("compare needs at least two models".into()));
    }
    let mut models: Vec<Box<dyn HazardModel>> = Vec::new();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::Usage(format!("model `{n}` listed twice")));
        }
        models.push(model_by_name(n).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    if let Some(r) = a.bootstrap {
        if r < 199 {
            return Err(CliError::Usage(format!(
                "--bootstrap needs at least 199 replicates, got {r}"
            )));
        }
    }
    if a.grid_points < 2 {
        return Err(CliError::Usage("--grid-points must be >= 2".into()));
    }
    let data = load_data(run, &a.data)?;
    let cfg = mle_config(a.common.seed, a.starts, Space::Log);
    let boot = a.bootstrap.map(|r| (r, a.common.seed.wrapping_add(1)));

    let mut survivors = Vec::new();
    let mut failed = Vec::new();
    for m in &models {
        eprintln!("fitting {}", m.name());
        match evaluate_model(m.as_ref(), &data, &cfg, boot) {
            Ok(r) => survivors.push(r),
            Err(e) => {
                eprintln!("warning: {} failed: {e}", m.name());
                failed.push(json!({ "model": m.name(), "error": e.to_string() }));
            }
        }
    }
    if survivors.len() < 2 {
        return Err(CliError::Numerical(format!(
            "only {} model(s) could be fitted",
            survivors.len()
        )));
    }
    let report = rank_models(&data.name, survivors)?;
    let by_name = |n: &str| models.iter().find(|m| m.name() == n).expect("fitted model is listed");

    let mut entries = Vec::new();
    for r in &report.models {
        let m = by_name(&r.metrics.model);
        let risks = competitor_risks(m.as_ref(), &r.metrics.params)
            .ok()
            .map(|e| (e.f1, e.f2));
        entries.push(json!({
            "model": r.metrics.model,
            "param_names": m.param_names(),
            "params": r.metrics.params,
            "std_devs": r.metrics.std_devs,
            "nll": r.metrics.nll,
            "aic": r.metrics.criteria.aic,
            "bic": r.metrics.criteria.bic,
            "bc": r.metrics.criteria.bc,
            "ks": r.metrics.gof.ks,
            "ad": r.metrics.gof.ad,
            "cvm": r.metrics.gof.cvm,
            "pvalues": r.metrics.pvalues,
            "ranks": r.ranks,
            "average_rank": r.average_rank,
            "risks": risks,
        }));
    }
    let wins: Vec<Value> = report
        .models
        .iter()
        .map(|r| json!({ "model": r.metrics.model, "wins": report.wins(&r.metrics.model) }))
        .collect();
    run.write_json(
        "compare.json",
        &json!({
            "dataset": data.name,
            "n": data.len(),
            "models": entries,
            "wins": wins,
            "failed": failed,
            "empirical_risks": empirical_risks(&data).ok(),
        }),
    )?;

    let rows: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|r| {
            let mut row = vec![r.metrics.model.clone()];
            row.extend(r.metrics.metric_values().iter().map(|v| format!("{v:.4}")));
            row.push(format!("{:.2}", r.average_rank));
            row.push(report.wins(&r.metrics.model).to_string());
            row
        })
        .collect();
    let mut text = format!("Model comparison on {} (n = {})\n\n", data.name, data.len());
    text += &table(
        &[
            "model", "-logL", "AIC", "BIC", "BC", "KS", "AD", "CvM", "avg rank", "wins",
        ],
        &rows,
    );
    if report.models.iter().any(|r| r.metrics.pvalues.is_some()) {
        let prow: Vec<Vec<String>> = report
            .models
            .iter()
            .filter_map(|r| {
                r.metrics.pvalues.as_ref().map(|p| {
                    vec![
                        r.metrics.model.clone(),
                        format!("{:.3}", p.ks),
                        format!("{:.3}", p.ad),
                        format!("{:.3}", p.cvm),
                        p.replicates_used.to_string(),
                    ]
                })
            })
            .collect();
        text += "\nbootstrap p-values\n";
        text += &table(&["model", "KS", "AD", "CvM", "replicates"], &prow);
    }
    for f in &failed {
        text += &format!(
            "failed: {} ({})\n",
            f["model"].as_str().unwrap_or(""),
            f["error"].as_str().unwrap_or("")
        );
    }
    write_text(run, "compare.txt", &text)?;

    let grid = linear_grid(data.max_time(), a.grid_points);
    let mut series = Vec::new();
    for r in &report.models {
        let m = by_name(&r.metrics.model);
        let p = &r.metrics.params;
        let name = &r.metrics.model;
        series.push(PlotSeries::new(
            name.clone(),
            SeriesKind::Rf,
            grid.clone(),
            grid.iter().map(|&x| (-m.chf(x, p)).exp()).collect(),
        )?);
        series.push(PlotSeries::new(
            name.clone(),
            SeriesKind::Frf,
            grid.clone(),
            grid.iter().map(|&x| m.frf(x, p)).collect(),
        )?);
        match grid
            .iter()
            .map(|&x| model_mrl(m.as_ref(), x, p))
            .collect::<bfm::Result<Vec<f64>>>()
        {
            Ok(y) => series.push(PlotSeries::new(name.clone(), SeriesKind::Mrl, grid.clone(), y)?),
            Err(e) => eprintln!("warning: no MRL curve for {name}: {e}"),
        }
    }
    let km = kaplan_meier(&data);
    series.push(PlotSeries::new(
        "empirical",
        SeriesKind::Rf,
        km.iter().map(|p| p.0).collect(),
        km.iter().map(|p| p.1).collect(),
    )?);
    let (mx, my): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .filter_map(|&x| empirical_mrl(&km, x).map(|m| (x, m)))
        .unzip();
    if !mx.is_empty() {
        series.push(PlotSeries::new("empirical", SeriesKind::Mrl, mx, my)?);
    }
    run.write_series("curves", &series, a.format)
}

fn bfm_curves(label: &str, p: &BfmParams, grid: &[f64]) -> Result<(PlotSeries, PlotSeries), CliError> {
    let frf = grid.iter().map(|&x| bfm_frf(x, p)).collect::<bfm::Result<Vec<f64>>>()?;
    let rf = grid.iter().map(|&x| bfm_sf(x, p)).collect::<bfm::Result<Vec<f64>>>()?;
    Ok((
        PlotSeries::new(label, SeriesKind::Frf, grid.to_vec(), frf)?,
        PlotSeries::new(label, SeriesKind::Rf, grid.to_vec(), rf)?,
    ))
}

fn compat_cmd(run: &mut Run, a: &CompatArgs) -> Result<(), CliError> {
    if a.sets == 0 {
        return Err(CliError::Usage("--sets must be >= 1".into()));
    }
    if a.grid_points < 2 {
        return Err(CliError::Usage("--grid-points must be >= 2".into()));
    }
    let seed = a.common.seed;
    let cfg = hmc_config(&a.hmc, seed)?;
    let data = load_data(run, &a.data)?;
    eprintln!("sampling posterior for {}", data.name);
    let observed = bayes_fit(&data, &a.hmc, &cfg, seed, true)?;
    warn_unhealthy("observed", &observed.chains);
    let sets = posterior_predictive_sets(&observed.chains, data.len(), a.sets, seed.wrapping_add(1))?;
    let grid = linear_grid(data.max_time(), a.grid_points);
    let p_obs = bfm_params(&observed.mean)?;
    let (obs_frf, obs_rf) = bfm_curves("observed", &p_obs, &grid)?;
    let mut frfs = vec![obs_frf.clone()];
    let mut rfs = vec![obs_rf.clone()];
    let mut set_reports = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        eprintln!("sampling posterior for simulated set {}", k + 1);
        let set_cfg = HmcConfig {
            seed: seed.wrapping_add(100 * (k as u64 + 1)),
            ..cfg.clone()
        };
        let fit = bayes_fit(set, &a.hmc, &set_cfg, seed, false)?;
        warn_unhealthy(&format!("set {}", k + 1), &fit.chains);
        let (f, r) = bfm_curves(&format!("set-{}", k + 1), &bfm_params(&fit.mean)?, &grid)?;
        frfs.push(f);
        rfs.push(r);
        set_reports.push(json!({
            "name": format!("set-{}", k + 1),
            "n": set.len(),
            "mle": fit.mle.params,
            "posterior_mean": fit.mean,
        }));
    }
    let cov_frf = envelope_coverage(&obs_frf.y, &frfs[1..].iter().map(|s| s.y.clone()).collect::<Vec<_>>());
    let cov_rf = envelope_coverage(&obs_rf.y, &rfs[1..].iter().map(|s| s.y.clone()).collect::<Vec<_>>());
    run.write_json(
        "compat.json",
        &json!({
            "dataset": data.name,
            "observed_posterior_mean": observed.mean,
            "sets": set_reports,
            "coverage_frf": cov_frf,
            "coverage_rf": cov_rf,
        }),
    )?;
    run.write_series("compat-frf", &frfs, a.format)?;
    run.write_series("compat-rf", &rfs, a.format)?;
    let text = format!(
        "Posterior-predictive check on {} with {} simulated sets\nobserved-fit curve inside the simulated envelope: FRF {:.1}%, RF {:.1}% of grid points\n",
        data.name,
        a.sets,
        100.0 * cov_frf,
        100.0 * cov_rf
    );
    write_text(run, "compat.txt", &text)
}

fn ttt_cmd(run: &mut Run, a: &TttArgs) -> Result<(), CliError> {
    let data = load_data(run, &a.data)?;
    let strata: Vec<(&str, Vec<f64>)> = {
        let c1 = ("cause1", data.times_with_status(Status::FailureCause1));
        let c2 = ("cause2", data.times_with_status(Status::FailureCause2));
        let all = ("combined", data.failure_times());
        match a.stratum {
            Stratum::All => vec![c1, c2, all],
            Stratum::Cause1 => vec![c1],
            Stratum::Cause2 => vec![c2],
            Stratum::Combined => vec![all],
        }
    };
    let explicit = a.stratum != Stratum::All;
    let mut series = Vec::new();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (name, times) in strata {
        if times.is_empty() {
            if explicit {
                return Err(CliError::Data(format!("stratum `{name}` has no failures")));
            }
            skipped.push(name);
            continue;
        }
        let curve = scaled_ttt(&times)?;
        let shape = ttt_shape(&curve);
        let (x, y): (Vec<f64>, Vec<f64>) = curve.points.iter().copied().unzip();
        series.push(PlotSeries::new(name, SeriesKind::Ttt, x, y)?);
        rows.push(vec![
            name.to_string(),
            times.len().to_string(),
            format!("{:?}", shape.shape_label),
            shape
                .locations
                .iter()
                .map(|u| format!("{u:.3}"))
                .collect::<Vec<_>>()
                .join(" "),
        ]);
        entries.push(json!({
            "stratum": name,
            "failures": times.len(),
            "shape": shape.shape_label,
            "turning_points": shape.locations,
        }));
    }
    if series.is_empty() {
        return Err(CliError::Data("dataset has no failures".into()));
    }
    run.write_json(
        "ttt.json",
        &json!({ "dataset": data.name, "strata": entries, "skipped": skipped }),
    )?;
    run.write_series("ttt", &series, a.format)?;
    let mut text = format!("Scaled TTT on {}\n\n", data.name);
    text += &table(&["stratum", "failures", "rate shape", "turns at i/n"], &rows);
    for s in &skipped {
        text += &format!("skipped {s}: no failures\n");
    }
    write_text(run, "ttt.txt", &text)
}

fn sample_cmd(run: &mut Run, a: &SampleArgs) -> Result<(), CliError> {
    let p = bfm_params(&params_arg(&a.params, 4, "params")?)?;
    if a.count == 0 {
        return Err(CliError::Usage("--count must be >= 1".into()));
    }
    if let Some(c) = a.censor_at {
        if !(c.is_finite() && c > 0.0) {
            return Err(CliError::Usage(format!("--censor-at must be finite and > 0, got {c}")));
        }
    }
    let obs = bfm_sample(&p, a.count, a.common.seed)
        .into_iter()
        .map(|d| match a.censor_at {
            Some(c) if d.time > c => CensoredObservation::new(c, Status::Censored),
            _ => CensoredObservation::new(
                d.time,
                match d.cause {
                    CauseLabel::Cause1 => Status::FailureCause1,
                    CauseLabel::Cause2 => Status::FailureCause2,
                },
            ),
        })
        .collect::<bfm::Result<Vec<_>>>()?;
    let mut d = Dataset::from_observations(&a.name, obs)?;
    d.time_unit = "model time".into();
    d.cause_labels = "c1=Dhillon component; c2=exponential-power component".into();
    d.notes.push(format!(
        "simulated: nu={} theta={} tau={} zeta={} seed={}",
        p.nu(),
        p.theta(),
        p.tau(),
        p.zeta(),
        a.common.seed
    ));
    run.write("sample.csv", d.to_text().as_bytes())?;
    let c = d.counts();
    println!(
        "{} lifetimes: {} cause 1, {} cause 2, {} censored",
        d.len(),
        c.cause1,
        c.cause2,
        c.censored
    );
    Ok(())
}
