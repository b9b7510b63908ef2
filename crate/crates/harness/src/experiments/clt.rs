use loopsoup::graph::GreensFunction;
use loopsoup::loops::clt_variance;
use loopsoup::planar::{WindingModel, WindingTable};

use super::{fmt_num, mc_gate, new_report, non_increasing_gates, sampler, Result, Runner};
use crate::config::ExperimentConfig;
use crate::report::{Gate, Histogram, Report, Table};
use crate::stats::{batch_means, ks_distance_normal};

/// Variance of `∫_{L^λ} A / √λ` against `σ²(A)`, with KS distance of the
/// standardized samples per λ.
///
/// The zero mean of `∫A` is used, so the estimator is `X²/λ`.
pub fn run_clt_experiment(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report> {
    let g = cfg.graph()?;
    let p = g.transition();
    let a = cfg.one_form(&g)?;
    let sigma2 = clt_variance(&p, &GreensFunction::new(&p)?, &a)?;
    let sampler = sampler(cfg, &p)?;
    let mut report = new_report(cfg, runner);
    let mut table = Table::new("clt", &["lambda", "var_mc", "stderr", "sigma2", "ks", "n"]);
    let (mut labels, mut ks_values) = (Vec::new(), Vec::new());
    let mut last = Vec::new();
    let degenerate = sigma2 == 0.0;
    for (block, &lambda) in cfg.lambdas.iter().enumerate() {
        let xs = runner.replicas(block as u32, cfg.samples, |rng| {
            let mut x = 0.0;
            sampler.for_each_loop(lambda, rng, |v| x += a.integrate(v));
            x
        });
        let label = format!("λ={}", fmt_num(lambda));
        let sq: Vec<f64> = xs.iter().map(|x| x * x / lambda).collect();
        let var = batch_means(&sq, cfg.batches);
        if degenerate {
            let all_zero = xs.iter().all(|&x| x == 0.0);
            let note = if all_zero {
                "degenerate: σ² = 0 and every sample is 0"
            } else {
                "degenerate: σ² = 0 but some samples are nonzero"
            };
            report.gate(if all_zero {
                Gate::skipped(format!("variance {label}"), note)
            } else {
                Gate::within(format!("variance {label}"), var.mean, 0.0, 0.0, "trace-form").with_note(note)
            });
            table.push(vec![lambda.into(), var.mean.into(), var.stderr.into(), sigma2.into(), "n/a".into(), cfg.samples.into()]);
            continue;
        }
        let z: Vec<f64> = xs.iter().map(|x| x / (lambda * sigma2).sqrt()).collect();
        let ks = ks_distance_normal(&z);
        report.gate(mc_gate(format!("variance {label}"), var, sigma2, "trace-form"));
        table.push(vec![lambda.into(), var.mean.into(), var.stderr.into(), sigma2.into(), ks.into(), cfg.samples.into()]);
        labels.push(label);
        ks_values.push(ks);
        last = xs.iter().map(|x| x / lambda.sqrt()).collect();
    }
    if degenerate {
        report.gate(Gate::skipped("ks trend", "degenerate: σ² = 0, no normal limit to compare with"));
    } else {
        for gate in non_increasing_gates("ks", &labels, &ks_values) {
            report.gate(gate);
        }
    }
    report.tables.push(table);
    if cfg.histogram && !last.is_empty() {
        report.histograms.push(Histogram::from_samples("integral", &last, 40, Some(sigma2.sqrt())));
    }
    Ok(report)
}

/// Entrywise covariance of the winding field `W_λ/√λ` against the limit
/// kernel, the direct two-point formula against the kernel, and KS
/// distances of the first face's standardized winding.
pub fn run_winding_experiment(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report> {
    let map = cfg.planar_map()?;
    let faces = cfg.face_list(&map)?;
    let model = WindingModel::new(map)?;
    let cuts = model.cuts(&faces)?;
    let table_w = WindingTable::new(&cuts);
    let sampler = sampler(cfg, model.transition())?;
    let m = faces.len();
    let mut kernel = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            kernel[i][j] = model.covariance_with_cuts(&cuts[i], &cuts[j])?;
        }
    }
    let mut report = new_report(cfg, runner);

    let mut direct = Table::new("two_point", &["face_i", "face_j", "direct", "kernel", "abs_diff"]);
    if model.transition().is_symmetric() {
        for i in 0..m {
            for j in i..m {
                let d = model.two_point_direct(&cuts[i], &cuts[j])?;
                direct.push(vec![faces[i].into(), faces[j].into(), d.into(), kernel[i][j].into(), (d - kernel[i][j]).abs().into()]);
                report.gate(Gate::within(
                    format!("two-point direct ({}, {})", faces[i], faces[j]),
                    d,
                    kernel[i][j],
                    1e-10,
                    "polarization kernel",
                ));
            }
        }
    } else {
        report.gate(Gate::skipped("two-point direct", "transition matrix is not symmetric"));
    }

    let mut cov = Table::new("winding_cov", &["face_i", "face_j", "K_exact", "K_mc", "stderr", "lambda"]);
    let mut norm = Table::new("normality", &["lambda", "face", "ks"]);
    let (mut labels, mut ks_values) = (Vec::new(), Vec::new());
    let mut last = Vec::new();
    for (block, &lambda) in cfg.lambdas.iter().enumerate() {
        let ws = runner.replicas(block as u32, cfg.samples, |rng| {
            let mut w = vec![0i64; m];
            sampler.for_each_loop(lambda, rng, |v| table_w.accumulate(v, &mut w));
            w
        });
        let label = format!("λ={}", fmt_num(lambda));
        for i in 0..m {
            for j in i..m {
                let prods: Vec<f64> = ws.iter().map(|w| (w[i] * w[j]) as f64 / lambda).collect();
                let est = batch_means(&prods, cfg.batches);
                cov.push(vec![
                    faces[i].into(),
                    faces[j].into(),
                    kernel[i][j].into(),
                    est.mean.into(),
                    est.stderr.into(),
                    lambda.into(),
                ]);
                report.gate(mc_gate(
                    format!("covariance ({}, {}) {label}", faces[i], faces[j]),
                    est,
                    kernel[i][j],
                    "polarization kernel",
                ));
            }
        }
        let sd = (lambda * kernel[0][0]).sqrt();
        if sd > 0.0 {
            let z: Vec<f64> = ws.iter().map(|w| w[0] as f64 / sd).collect();
            let ks = ks_distance_normal(&z);
            norm.push(vec![lambda.into(), faces[0].into(), ks.into()]);
            labels.push(label);
            ks_values.push(ks);
        }
        last = ws.iter().map(|w| w[0] as f64 / lambda.sqrt()).collect();
    }
    for gate in non_increasing_gates(&format!("ks face {}", faces[0]), &labels, &ks_values) {
        report.gate(gate);
    }
    report.tables.extend([cov, direct, norm]);
    if cfg.histogram && !last.is_empty() {
        let sd = kernel[0][0].sqrt();
        report
            .histograms
            .push(Histogram::from_samples(&format!("winding_face{}", faces[0]), &last, 40, (sd > 0.0).then_some(sd)));
    }
    Ok(report)
}
