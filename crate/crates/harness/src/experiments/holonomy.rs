use loopsoup::graph::GreensFunction;
use loopsoup::holonomy::{exact_holonomy_expectation, holonomy_limit, holonomy_log_det_ratio, oracle_holonomy_log, Connection};
use loopsoup::loops::{exact_charfn, tail_bound};
use loopsoup::{Complex64, OneForm, WeightedGraph};
use nalgebra::DMatrix;

use super::{fmt_num, mc_gate, new_report, non_increasing_gates, sampler, Result, Runner};
use crate::config::ExperimentConfig;
use crate::report::{Gate, Report, Table};
use crate::stats::batch_means;

const DEFAULT_K_MAX: usize = 12;

/// The scalar forms `A_k(x, y) = (A_xy)_kk` when every generator is
/// diagonal, `None` otherwise.
pub(crate) fn diagonal_channels(g: &WeightedGraph, conn: &Connection) -> Option<Vec<OneForm>> {
    let d = conn.dim();
    let n = g.vertex_count();
    let mut mats = vec![DMatrix::<f64>::zeros(n, n); d];
    for &(x, y) in g.edges() {
        let a = conn.generator(x, y);
        for r in 0..d {
            for c in 0..d {
                if r != c && a[(r, c)].norm() != 0.0 {
                    return None;
                }
            }
            mats[r][(x, y)] = a[(r, r)].re;
            mats[r][(y, x)] = -a[(r, r)].re;
        }
    }
    mats.into_iter().map(|m| OneForm::from_matrix(g, m).ok()).collect()
}

/// `∏_k (scalar charfn of channel k at intensity λ/d)`.
pub(crate) fn channel_product(g: &WeightedGraph, forms: &[OneForm], beta: f64, lambda: f64) -> Result<Complex64> {
    let p = g.transition();
    let d = forms.len() as f64;
    let mut prod = Complex64::new(1.0, 0.0);
    for a in forms {
        prod *= exact_charfn(&p, a, beta, lambda / d)?;
    }
    Ok(prod)
}

/// Enumeration oracle vs block determinant over the β grid, reduction to
/// scalar characteristic functions for diagonal connections, convergence of
/// the expectation at `β = λ^{-1/2}` towards the limit, and an optional
/// Monte Carlo check.
pub fn run_holonomy_experiment(cfg: &ExperimentConfig, runner: &Runner) -> Result<Report> {
    let g = cfg.graph()?;
    let p = g.transition();
    let conn = cfg.connection(&g)?;
    let d = conn.dim() as f64;
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    let betas = cfg.beta_grid();
    let mut report = new_report(cfg, runner);

    let tail = tail_bound(&p, k_max);
    let mut oracle = Table::new("oracle", &["beta", "re_det", "im_det", "re_enum", "im_enum", "abs_diff", "tail"]);
    for &beta in &betas {
        let det = -holonomy_log_det_ratio(&p, &conn, beta)? / d;
        let en = oracle_holonomy_log(&p, &conn, beta, k_max)?;
        let diff = (det - en).norm();
        oracle.push(vec![beta.into(), det.re.into(), det.im.into(), en.re.into(), en.im.into(), diff.into(), tail.into()]);
        report.gate(Gate::within(format!("enumeration k≤{k_max} β={}", fmt_num(beta)), diff, 0.0, tail, "enumeration"));
    }
    report.tables.push(oracle);

    match diagonal_channels(&g, &conn) {
        Some(forms) => {
            let lambdas = if cfg.lambdas.is_empty() { vec![1.0] } else { cfg.lambdas.clone() };
            for &lambda in &lambdas {
                for &beta in &betas {
                    let block = exact_holonomy_expectation(&p, &conn, beta, lambda)?;
                    let scalar = channel_product(&g, &forms, beta, lambda)?;
                    report.gate(Gate::within(
                        format!("reduction d={} λ={} β={}", conn.dim(), fmt_num(lambda), fmt_num(beta)),
                        (block - scalar).norm(),
                        0.0,
                        1e-12 * scalar.norm().max(1.0),
                        "scalar determinant",
                    ));
                }
            }
        }
        None => report.gate(Gate::skipped("reduction", "connection is not diagonal")),
    }

    let limit = holonomy_limit(&p, &GreensFunction::new(&p)?, &conn)?;
    let lambdas = if cfg.lambdas.is_empty() { vec![1e2, 1e3, 1e4] } else { cfg.lambdas.clone() };
    let mut conv = Table::new("convergence", &["lambda", "beta", "re_expectation", "im_expectation", "limit", "abs_error"]);
    let (mut labels, mut errors) = (Vec::new(), Vec::new());
    for &lambda in &lambdas {
        let beta = lambda.sqrt().recip();
        let e = exact_holonomy_expectation(&p, &conn, beta, lambda)?;
        let err = (e - limit).norm();
        conv.push(vec![lambda.into(), beta.into(), e.re.into(), e.im.into(), limit.into(), err.into()]);
        labels.push(format!("λ={}", fmt_num(lambda)));
        errors.push(err);
    }
    for gate in non_increasing_gates("limit error", &labels, &errors) {
        report.gate(gate);
    }
    report.tables.push(conv);

    if let Some(mc) = &cfg.mc {
        let exact = exact_holonomy_expectation(&p, &conn, mc.beta, mc.lambda)?;
        let n = g.vertex_count();
        let unitaries: Vec<_> = (0..n * n)
            .map(|i| g.adjacent(i / n, i % n).then(|| conn.unitary(i / n, i % n, mc.beta)))
            .collect();
        let sampler = sampler(cfg, &p)?;
        let dim = conn.dim();
        let values = runner.replicas(0, mc.samples, |rng| {
            let mut prod = Complex64::new(1.0, 0.0);
            sampler.for_each_loop(mc.lambda, rng, |v| {
                let k = v.len();
                let mut u = DMatrix::<Complex64>::identity(dim, dim);
                for i in 0..k {
                    u *= unitaries[v[i] * n + v[(i + 1) % k]].as_ref().expect("walk edge");
                }
                prod *= u.trace() / dim as f64;
            });
            prod
        });
        let re = batch_means(&values.iter().map(|z| z.re).collect::<Vec<_>>(), cfg.batches);
        let im = batch_means(&values.iter().map(|z| z.im).collect::<Vec<_>>(), cfg.batches);
        let mut t = Table::new("holonomy_mc", &["lambda", "beta", "re_exact", "im_exact", "re_mc", "im_mc", "stderr", "stderr_im", "n"]);
        t.push(vec![
            mc.lambda.into(),
            mc.beta.into(),
            exact.re.into(),
            exact.im.into(),
            re.mean.into(),
            im.mean.into(),
            re.stderr.into(),
            im.stderr.into(),
            mc.samples.into(),
        ]);
        let label = format!("holonomy mc λ={} β={}", fmt_num(mc.lambda), fmt_num(mc.beta));
        report.gate(mc_gate(format!("{label} re"), re, exact.re, "block determinant"));
        report.gate(mc_gate(format!("{label} im"), im, exact.im, "block determinant"));
        report.tables.push(t);
    }
    Ok(report)
}
