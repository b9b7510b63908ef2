use loopsoup::graph::GreensFunction;
use loopsoup::loops::{clt_variance, exact_charfn};

use super::{fmt_num, mc_gate, new_report, sampler, Result, Runner};
use crate::config::ExperimentConfig;
use crate::report::{Histogram, Report, Table};
use crate::stats::batch_means;

/// Empirical vs exact `E[exp(iβ ∫_{L^λ} A)]` on the β grid, for every λ.
pub fn run_charfn_experiment(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report> {
    let g = cfg.graph()?;
    let p = g.transition();
    let a = cfg.one_form(&g)?;
    let sampler = sampler(cfg, &p)?;
    let betas = cfg.beta_grid();
    let mut report = new_report(cfg, runner);
    let mut table =
        Table::new("charfn", &["beta", "re_exact", "im_exact", "re_mc", "im_mc", "stderr", "n", "lambda", "stderr_im"]);
    let mut last = Vec::new();
    for (block, &lambda) in cfg.lambdas.iter().enumerate() {
        let xs = runner.replicas(block as u32, cfg.samples, |rng| {
            let mut x = 0.0;
            sampler.for_each_loop(lambda, rng, |v| x += a.integrate(v));
            x
        });
        for &beta in &betas {
            let exact = exact_charfn(&p, &a, beta, lambda)?;
            let re: Vec<f64> = xs.iter().map(|x| (beta * x).cos()).collect();
            let im: Vec<f64> = xs.iter().map(|x| (beta * x).sin()).collect();
            let (re, im) = (batch_means(&re, cfg.batches), batch_means(&im, cfg.batches));
            table.push(vec![
                beta.into(),
                exact.re.into(),
                exact.im.into(),
                re.mean.into(),
                im.mean.into(),
                re.stderr.into(),
                cfg.samples.into(),
                lambda.into(),
                im.stderr.into(),
            ]);
            let label = format!("charfn λ={} β={}", fmt_num(lambda), fmt_num(beta));
            report.gate(mc_gate(format!("{label} re"), re, exact.re, "determinant"));
            report.gate(mc_gate(format!("{label} im"), im, exact.im, "determinant"));
        }
        last = xs.iter().map(|x| x / lambda.sqrt()).collect();
    }
    report.tables.push(table);
    if cfg.histogram && !last.is_empty() {
        let sd = clt_variance(&p, &GreensFunction::new(&p)?, &a)?.sqrt();
        report.histograms.push(Histogram::from_samples("integral", &last, 40, (sd > 0.0).then_some(sd)));
    }
    Ok(report)
}
