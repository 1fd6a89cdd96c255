//! The five subcommands.

use anyhow::{anyhow, Context, Result};
use delocspec_core::approximation::telescope_check;
use delocspec_core::cyclotomic::Cyclotomic;
use delocspec_core::linalg::SparseMatrix;
use delocspec_core::oracle::{oracle_density, oracle_kernel_coefficient, oracle_lndet};
use delocspec_core::ring::RingMatrix;
use delocspec_core::sofic::CERTIFICATE_LIMIT;
use delocspec_core::sofic::{certify, det_star, galois_summed_lndet, sofic_kernel, LabeledGraph};
use delocspec_core::spectral::{
    density, determinant_report, kernel_coefficients_exact, kernel_dim_exact,
    kernel_fourier_coefficient, lndet_definite, spectral_data_with, within_norm_bound,
    DensityFunction, DensityKind, SpectralData,
};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, SchemeSpec};
use crate::report::{cell, csv_text, write_file, Check, Report};
use crate::stages::{map_stages, Scheme, Stage};

fn header(exp: &Experiment, command: &str) -> Report {
    let mut r = Report::default();
    r.put("command", command);
    r.put("group", exp.group.describe());
    let rows: Vec<String> = exp
        .config
        .matrix
        .iter()
        .map(|row| format!("[{}]", row.join(", ")))
        .collect();
    r.put("matrix", format!("[{}]", rows.join(", ")));
    r.put("kappa", exp.matrix.kappa().kappa);
    r.put("scheme", scheme_name(&exp.config.scheme));
    r.put(
        "stages",
        format!("{} ({} stages)", summarize(&exp.stages), exp.stages.len()),
    );
    r.put(
        "track",
        exp.tracked
            .iter()
            .map(|t| t.word.as_str())
            .collect::<Vec<_>>()
            .join(", "),
    );
    r.put("seed", exp.config.seed);
    r.put("reproducible", exp.config.reproducible);
    r
}

fn scheme_name(s: &SchemeSpec) -> String {
    match s {
        SchemeSpec::Quotient => "quotient".into(),
        SchemeSpec::Folner => "folner".into(),
        SchemeSpec::Prufer { window } => format!("prufer (window {window})"),
        SchemeSpec::Collapsing { depth } => format!("collapsing (depth {depth})"),
        SchemeSpec::Finite => "finite".into(),
    }
}

fn summarize(stages: &[u64]) -> String {
    match stages {
        [] => String::new(),
        [a] => a.to_string(),
        [a, .., b] if stages.windows(2).all(|w| w[1] == w[0] + 1) => format!("{a}..{b}"),
        _ => stages
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    }
}

fn is_integral(a: &RingMatrix) -> bool {
    a.entries().iter().all(|e| {
        e.terms()
            .values()
            .all(|c| c.as_exact().is_some_and(Cyclotomic::is_algebraic_integer))
    })
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn spectral(exp: &Experiment, st: &Stage) -> Result<Option<SpectralData>> {
    if st.real.dim() > exp.config.compute.float_max_dim {
        return Ok(None);
    }
    Ok(Some(spectral_data_with(
        &st.real,
        &st.classes,
        &exp.config.tolerances.thresholds(),
    )?))
}

// ---------------------------------------------------------------- converge

/// A kernel coefficient `⟨F(0)δ_e, δ_g⟩` at one stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassValue {
    pub float: Option<Complex64>,
    pub exact: Option<Cyclotomic>,
}

impl ClassValue {
    pub fn value(&self) -> Option<Complex64> {
        self.exact
            .as_ref()
            .map(Cyclotomic::to_complex)
            .or(self.float)
    }
}

#[derive(Clone, Debug)]
pub struct StageRow {
    pub index: u64,
    pub dim: usize,
    pub f0_float: Option<f64>,
    pub f0_exact: Option<BigRational>,
    pub coeffs: Vec<ClassValue>,
    pub kappa_ok: Option<bool>,
    pub weights_ok: Option<bool>,
    pub agreement_ok: Option<bool>,
    /// `(passed, total)` telescope estimates on Følner stages.
    pub telescope: Option<(usize, usize)>,
}

impl StageRow {
    pub fn f0(&self) -> Option<f64> {
        self.f0_exact.as_ref().map(to_f64).or(self.f0_float)
    }
}

/// Limit value a stage coefficient is compared with.
#[derive(Clone, Debug, PartialEq)]
pub enum Limit {
    Exact(Cyclotomic),
    Oracle(Complex64),
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub words: Vec<String>,
    pub rows: Vec<StageRow>,
    pub oracle_f0: Option<f64>,
    pub oracle_coeffs: Vec<Option<Complex64>>,
    pub limits: Vec<Option<Limit>>,
    /// `deltas[row][class]`.
    pub deltas: Vec<Vec<Option<f64>>>,
}

fn delta(v: &ClassValue, limit: &Limit) -> Option<f64> {
    match (&v.exact, limit) {
        (Some(x), Limit::Exact(l)) => Some(x.sub_ref(l).to_complex().norm()),
        (_, Limit::Exact(l)) => v.float.map(|f| (f - l.to_complex()).norm()),
        (_, Limit::Oracle(o)) => v.value().map(|f| (f - o).norm()),
    }
}

fn converge_stage(exp: &Experiment, scheme: &Scheme, index: u64) -> Result<StageRow> {
    let st = scheme.stage(exp, index)?;
    let h = &st.real;
    let tol = &exp.config.tolerances;
    let mut row = StageRow {
        index,
        dim: h.dim(),
        f0_float: None,
        f0_exact: None,
        coeffs: vec![ClassValue::default(); st.classes.len()],
        kappa_ok: None,
        weights_ok: None,
        agreement_ok: None,
        telescope: None,
    };
    if exp.config.compute.exact && h.exact.is_some() {
        if st.classes.is_empty() {
            row.f0_exact = Some(kernel_dim_exact(h)?);
        }
        for (c, cls) in st.classes.iter().enumerate() {
            let (std, raw) = kernel_coefficients_exact(h, cls)?;
            let size = cls.size().expect("finite stage class") as i64;
            if row.f0_exact.is_none() {
                row.f0_exact = Some(
                    std.as_rational()
                        .cloned()
                        .ok_or_else(|| anyhow!("non-real stage trace"))?,
                );
            }
            row.coeffs[c].exact = Some(&raw * &Cyclotomic::from_fraction(1, size));
        }
    }
    if let Some(sd) = spectral(exp, &st)? {
        let f0 = density(&sd, DensityKind::Standard, 0.0)?;
        row.f0_float = Some(f0);
        for c in 0..st.classes.len() {
            row.coeffs[c].float = Some(kernel_fourier_coefficient(&sd, c)?);
        }
        row.kappa_ok = Some(within_norm_bound(&sd, h.source_kappa));
        row.weights_ok = Some(weights_dominated(&sd, tol.weights)?);
        if let Some(x) = &row.f0_exact {
            let mut ok = (to_f64(x) - f0).abs() <= tol.agreement;
            for v in &row.coeffs {
                if let (Some(e), Some(f)) = (&v.exact, v.float) {
                    ok &= (e.to_complex() - f).norm() <= tol.agreement;
                }
            }
            row.agreement_ok = Some(ok);
        }
    }
    if let Some(fs) = &st.folner {
        let mut elements: Vec<_> = exp.tracked.iter().map(|t| t.element.clone()).collect();
        if elements.is_empty() {
            elements.push(exp.group.identity());
        }
        let (mut passed, mut total) = (0, 0);
        for g in &elements {
            for n in 1..=exp.config.compute.telescope_powers {
                total += 1;
                passed += telescope_check(&exp.matrix, fs, g, n)?.pass as usize;
            }
        }
        row.telescope = Some((passed, total));
    }
    Ok(row)
}

/// Deviated weights are `≥ −tol` and `|raw_j| ≤ |cls|·std_j + tol`.
fn weights_dominated(sd: &SpectralData, tol: f64) -> Result<bool> {
    for c in 0..sd.classes.len() {
        let size = sd.class_size(c)? as f64;
        for j in 0..sd.eigenvalues.len() {
            if sd.weights_deloc[c][j].norm() > size * sd.weights_standard[j] + tol {
                return Ok(false);
            }
            for kind in [DensityKind::DelocRe(c), DensityKind::DelocIm(c)] {
                if sd.weight(kind, j)?.re < -tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

pub fn converge(exp: &Experiment) -> Result<(ConvergenceReport, Report)> {
    let scheme = Scheme::prepare(exp)?;
    let rows = map_stages(exp, |i| converge_stage(exp, &scheme, i))?;
    let mut report = header(exp, "converge");

    let mut oracle_f0 = None;
    let mut oracle_coeffs = vec![None; exp.tracked.len()];
    if exp.config.oracle.enabled {
        let grid = exp.config.oracle.grid;
        match oracle_density(&exp.matrix, 0.0, grid) {
            Ok(est) => {
                oracle_f0 = Some(est.value);
                report.put("oracle.grid", grid);
                report.put("oracle.F0", est.value);
                for (c, t) in exp.tracked.iter().enumerate() {
                    let (v, est) = oracle_kernel_coefficient(&exp.matrix, &t.element, grid)?;
                    oracle_coeffs[c] = Some(v);
                    report.put(format!("oracle.coeff.{}", t.word), fmt_complex(v));
                    report.put(format!("oracle.coeff.{}.error", t.word), est.error);
                    if est.flagged {
                        report.put(
                            format!("oracle.coeff.{}.flagged", t.word),
                            "kernel not separated from the continuous spectrum",
                        );
                    }
                }
            }
            Err(e) => report.put("oracle", format!("unavailable: {e}")),
        }
    }
    let limits: Vec<Option<Limit>> = exp
        .tracked
        .iter()
        .zip(&oracle_coeffs)
        .map(|(t, o)| t.limit.clone().map(Limit::Exact).or(o.map(Limit::Oracle)))
        .collect();
    let deltas: Vec<Vec<Option<f64>>> = rows
        .iter()
        .map(|r| {
            r.coeffs
                .iter()
                .zip(&limits)
                .map(|(v, l)| l.as_ref().and_then(|l| delta(v, l)))
                .collect()
        })
        .collect();

    let tol = &exp.config.tolerances;
    let mut kappa = Check::new("kappa_bound");
    let mut weights = Check::new("weight_domination");
    let mut agree = Check::new("exact_float_agreement");
    let mut tele = Check::new("telescope");
    for r in &rows {
        if let Some(ok) = r.kappa_ok {
            kappa.record(ok, || format!("stage {}", r.index));
        }
        if let Some(ok) = r.weights_ok {
            weights.record(ok, || format!("stage {}", r.index));
        }
        if let Some(ok) = r.agreement_ok {
            agree.record(ok, || format!("stage {}", r.index));
        }
        if let Some((p, t)) = r.telescope {
            tele.record(p == t, || format!("stage {}: {p}/{t}", r.index));
        }
    }
    report.check(kappa);
    report.check(weights);
    report.check(agree);
    report.check(tele);
    if let Some(limit) = tol.final_delta {
        let mut fin = Check::new("final_delta");
        if let Some(last) = deltas.last() {
            for (t, d) in exp.tracked.iter().zip(last) {
                if let Some(d) = d {
                    fin.record(*d <= limit, || format!("{}: {d:e} > {limit:e}", t.word));
                }
            }
        }
        report.check(fin);
    }

    for (c, t) in exp.tracked.iter().enumerate() {
        let w = &t.word;
        if let Some(l) = &limits[c] {
            report.put(
                format!("limit.{w}"),
                match l {
                    Limit::Exact(x) => format!("{x} (given)"),
                    Limit::Oracle(o) => format!("{} (oracle)", fmt_complex(*o)),
                },
            );
        }
        let ds: Vec<f64> = deltas.iter().filter_map(|d| d[c]).collect();
        if let Some(last) = ds.last() {
            report.put(format!("delta.{w}.final"), last);
            report.put(
                format!("delta.{w}.max"),
                ds.iter().cloned().fold(0.0, f64::max),
            );
            let monotone = ds.windows(2).all(|p| p[1] <= p[0] + tol.agreement);
            report.put(format!("delta.{w}.nonincreasing"), monotone);
        }
        let values: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.coeffs[c].value().map(|v| v.re))
            .collect();
        tail_summary(&mut report, &format!("tail.{w}"), &values, tol.tail_spread);
    }
    let f0s: Vec<f64> = rows.iter().filter_map(StageRow::f0).collect();
    tail_summary(&mut report, "tail.F0", &f0s, tol.tail_spread);
    if let Some(last) = rows.last() {
        if let Some(x) = &last.f0_exact {
            report.put("final.F0_exact", x);
        }
        if let Some(x) = last.f0() {
            report.put("final.F0", x);
        }
    }

    let conv = ConvergenceReport {
        words: exp.tracked.iter().map(|t| t.word.clone()).collect(),
        rows,
        oracle_f0,
        oracle_coeffs,
        limits,
        deltas,
    };
    write_file(&exp.out_dir, "convergence.csv", &convergence_csv(&conv)?)?;
    report.write(&exp.out_dir)?;
    Ok((conv, report))
}

/// limsup/liminf estimates over the second half of the computed stages.
fn tail_summary(report: &mut Report, key: &str, values: &[f64], spread: f64) {
    if values.is_empty() {
        return;
    }
    let tail = &values[values.len() / 2..];
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    report.put(format!("{key}.limsup"), hi);
    report.put(format!("{key}.liminf"), lo);
    if hi - lo > spread {
        report.put(
            format!("{key}.flag"),
            format!("limsup − liminf = {:e} exceeds {spread:e}", hi - lo),
        );
    }
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        z.re.to_string()
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

pub fn convergence_csv(c: &ConvergenceReport) -> Result<String> {
    let mut header: Vec<String> = ["i", "dim", "F0", "F0_exact"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for w in &c.words {
        header.extend([
            format!("coeff[{w}]"),
            format!("coeff_im[{w}]"),
            format!("coeff_exact[{w}]"),
            format!("delta[{w}]"),
        ]);
    }
    let mut rows = Vec::new();
    for (r, ds) in c.rows.iter().zip(&c.deltas) {
        let mut cells = vec![
            r.index.to_string(),
            r.dim.to_string(),
            cell(r.f0()),
            r.f0_exact
                .as_ref()
                .map_or_else(String::new, |x| x.to_string()),
        ];
        for (v, d) in r.coeffs.iter().zip(ds) {
            cells.push(cell(v.value().map(|z| z.re)));
            cells.push(cell(v.value().map(|z| z.im)));
            cells.push(v.exact.as_ref().map_or_else(String::new, |x| x.to_string()));
            cells.push(cell(*d));
        }
        rows.push(cells);
    }
    if c.oracle_f0.is_some() {
        let mut cells = vec![
            "oracle".to_string(),
            String::new(),
            cell(c.oracle_f0),
            String::new(),
        ];
        for o in &c.oracle_coeffs {
            cells.extend([
                cell(o.map(|z| z.re)),
                cell(o.map(|z| z.im)),
                String::new(),
                String::new(),
            ]);
        }
        rows.push(cells);
    }
    csv_text(&header, &rows)
}

// ---------------------------------------------------------------- density

pub fn density_cmd(exp: &Experiment) -> Result<Report> {
    let scheme = Scheme::prepare(exp)?;
    let k = exp.tracked.len();
    let per_stage = map_stages(exp, |i| {
        let st = scheme.stage(exp, i)?;
        let Some(sd) = spectral(exp, &st)? else {
            return Ok(None);
        };
        let std = DensityFunction::new(&sd, DensityKind::Standard)?;
        let dev: Vec<(DensityFunction, DensityFunction)> = (0..k)
            .map(|c| {
                Ok((
                    DensityFunction::new(&sd, DensityKind::DelocRe(c))?,
                    DensityFunction::new(&sd, DensityKind::DelocIm(c))?,
                ))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for j in 0..std.jumps.len() {
            let mut r = vec![
                "stage".to_string(),
                i.to_string(),
                std.jumps[j].to_string(),
                std.values[j].to_string(),
            ];
            for (re, im) in &dev {
                r.push(re.values[j].to_string());
                r.push(im.values[j].to_string());
            }
            rows.push(r);
        }
        Ok(Some(rows))
    })?;
    let mut report = header(exp, "density");
    let mut header_row: Vec<String> = ["source", "stage", "lambda", "F"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for t in &exp.tracked {
        header_row.push(format!("F_re[{}]", t.word));
        header_row.push(format!("F_im[{}]", t.word));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in exp.stages.iter().zip(per_stage) {
        match r {
            Some(r) => rows.extend(r),
            None => skipped.push(i.to_string()),
        }
    }
    if !skipped.is_empty() {
        report.put(
            "skipped",
            format!(
                "stages {} exceed compute.float_max_dim = {}",
                skipped.join(","),
                exp.config.compute.float_max_dim
            ),
        );
    }
    if exp.config.oracle.enabled {
        let kappa = exp.matrix.kappa().kappa;
        let pts = exp.config.oracle.density_points.max(2);
        for p in 0..pts {
            let lambda = kappa * p as f64 / (pts - 1) as f64;
            match oracle_density(&exp.matrix, lambda, exp.config.oracle.grid) {
                Ok(est) => {
                    let mut r = vec![
                        "oracle".to_string(),
                        String::new(),
                        lambda.to_string(),
                        est.value.to_string(),
                    ];
                    r.extend(std::iter::repeat_n(String::new(), 2 * k));
                    rows.push(r);
                }
                Err(e) => {
                    report.put("oracle", format!("unavailable: {e}"));
                    break;
                }
            }
        }
    }
    report.put("rows", rows.len());
    write_file(
        &exp.out_dir,
        "densities.csv",
        &csv_text(&header_row, &rows)?,
    )?;
    report.write(&exp.out_dir)?;
    Ok(report)
}

// ---------------------------------------------------------------- detbound

fn determinant_header(exp: &Experiment) -> Vec<String> {
    let mut h: Vec<String> = ["source", "stage", "dim", "lndet"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for t in &exp.tracked {
        h.push(format!("lndet_re[{}]", t.word));
        h.push(format!("lndet_im[{}]", t.word));
    }
    h.extend(
        [
            "B0",
            "B1",
            "bounds",
            "det_star_ln",
            "det_star_certificate",
            "certified",
            "good_fraction",
            "galois_sum",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

#[derive(Default)]
struct DetRow {
    source: String,
    stage: String,
    dim: Option<usize>,
    lndet: Option<f64>,
    dev: Vec<(f64, f64)>,
    bounds_ok: Option<bool>,
    det_star_ln: Option<f64>,
    certificate: Option<String>,
    certified: Option<bool>,
    good_fraction: Option<f64>,
    galois_sum: Option<f64>,
}

impl DetRow {
    fn cells(&self, k: usize, b: Option<(f64, f64)>) -> Vec<String> {
        let mut c = vec![
            self.source.clone(),
            self.stage.clone(),
            self.dim.map_or_else(String::new, |d| d.to_string()),
            cell(self.lndet),
        ];
        for j in 0..k {
            let d = self.dev.get(j);
            c.push(cell(d.map(|x| x.0)));
            c.push(cell(d.map(|x| x.1)));
        }
        c.push(cell(b.map(|x| x.0)));
        c.push(cell(b.map(|x| x.1)));
        c.push(self.bounds_ok.map_or_else(String::new, |ok| {
            if ok {
                "PASS".into()
            } else {
                "FAIL".into()
            }
        }));
        c.push(cell(self.det_star_ln));
        c.push(self.certificate.clone().unwrap_or_default());
        c.push(self.certified.map_or_else(String::new, |x| x.to_string()));
        c.push(cell(self.good_fraction));
        c.push(cell(self.galois_sum));
        c
    }
}

fn det_star_cells(m: &SparseMatrix, row: &mut DetRow) -> Result<()> {
    if m.n <= CERTIFICATE_LIMIT {
        let d = delocspec_core::sofic::det_star_of(m)?;
        row.det_star_ln = Some(d.ln_value);
        row.certificate = d.certificate.map(|c| c.to_string());
        row.certified = Some(d.certified);
    }
    Ok(())
}

pub fn detbound(exp: &Experiment) -> Result<Report> {
    let scheme = Scheme::prepare(exp)?;
    let a = &exp.matrix;
    let slack = exp.config.tolerances.bounds;
    let integral = is_integral(a);
    let integer = integral && a.conductor() == Some(1);
    let bounds = if a.is_exact() {
        Some(a.determinant_lower_bound_rhs()?)
    } else {
        None
    };
    let rows = map_stages(exp, |i| {
        let st = scheme.stage(exp, i)?;
        let h = &st.real;
        let mut row = DetRow {
            source: "stage".into(),
            stage: i.to_string(),
            dim: Some(h.dim()),
            ..Default::default()
        };
        if let Some(sd) = spectral(exp, &st)? {
            let rep = determinant_report(h, &sd, a)?;
            row.lndet = Some(rep.lndet);
            row.dev = rep
                .lndet_dev_re
                .iter()
                .cloned()
                .zip(rep.lndet_dev_im.iter().cloned())
                .collect();
            row.bounds_ok = rep.respects_bounds(slack);
        } else if let Ok(v) = lndet_definite(h) {
            row.lndet = Some(v);
            row.bounds_ok = bounds.as_ref().map(|b| v >= b.b0 - slack);
        }
        if integer {
            det_star_cells(&h.matrix, &mut row)?;
        }
        Ok(row)
    })?;
    let mut report = header(exp, "detbound");
    if let Some(b) = &bounds {
        report.put("B0", b.b0 + 0.0);
        report.put("B1", b.b1 + 0.0);
        report.put("conductor", a.conductor().unwrap_or(1));
    }
    report.put("integer_coefficients", integer);
    let mut bound_check = Check::new("determinant_bounds");
    let mut nonneg = Check::new("lndet_nonnegative");
    let mut cert = Check::new("det_star_certificate");
    let mut out = Vec::new();
    let k = exp.tracked.len();
    let b = bounds.as_ref().map(|b| (b.b0, b.b1));
    for r in &rows {
        if let Some(ok) = r.bounds_ok {
            bound_check.record(ok, || format!("stage {}", r.stage));
            if !integer {
                if let (Some(v), Some((b0, _))) = (r.lndet, b) {
                    println!(
                        "stage {}: lndet = {v:.6} ≥ B0 = {b0:.6}: {}",
                        r.stage,
                        if ok { "PASS" } else { "FAIL" }
                    );
                }
            }
        }
        if integer {
            if let Some(v) = r.lndet {
                let ok = v >= -slack;
                nonneg.record(ok, || format!("stage {}: lndet = {v}", r.stage));
                println!(
                    "stage {}: lndet = {v:.6} ≥ 0: {}",
                    r.stage,
                    if ok { "PASS" } else { "FAIL" }
                );
            }
            if let Some(c) = r.certified {
                cert.record(c, || format!("stage {}", r.stage));
            }
        }
        out.push(r.cells(k, b));
    }
    if exp.config.oracle.enabled {
        match oracle_lndet(a, exp.config.oracle.grid) {
            Ok(est) => {
                report.put("oracle.lndet", est.value);
                report.put("oracle.lndet.error", est.error);
                let row = DetRow {
                    source: "oracle".into(),
                    lndet: Some(est.value),
                    ..Default::default()
                };
                out.push(row.cells(k, b));
            }
            Err(e) => report.put("oracle", format!("unavailable: {e}")),
        }
    }
    report.check(bound_check);
    report.check(nonneg);
    report.check(cert);
    write_file(
        &exp.out_dir,
        "determinants.csv",
        &csv_text(&determinant_header(exp), &out)?,
    )?;
    report.write(&exp.out_dir)?;
    Ok(report)
}

// ---------------------------------------------------------------- sofic

pub fn sofic_cmd(exp: &Experiment) -> Result<Report> {
    let a = &exp.matrix;
    let spec = &exp.config.sofic;
    let slack = exp.config.tolerances.bounds;
    let radius = match spec.radius {
        Some(r) => r,
        None => a.support_radius()? as usize,
    };
    let mut graphs: Vec<(String, LabeledGraph, Option<Vec<usize>>)> = Vec::new();
    match exp.config.scheme {
        SchemeSpec::Quotient => {
            for &n in &exp.stages {
                let n32 = u32::try_from(n).context("modulus too large")?;
                graphs.push((
                    format!("quotient {n}"),
                    LabeledGraph::reduction(&exp.group, n32)?,
                    None,
                ));
            }
        }
        SchemeSpec::Finite => {
            graphs.push(("cayley".into(), LabeledGraph::cayley(&exp.group)?, None))
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(exp.config.seed);
    if spec.corrupt > 0 {
        for g in &mut graphs {
            g.1 = g.1.corrupt(spec.corrupt, &mut rng);
        }
    }
    for path in &spec.files {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (g, good) =
            LabeledGraph::parse(&text).with_context(|| format!("in {}", path.display()))?;
        graphs.push((path.display().to_string(), g, good));
    }
    if graphs.is_empty() {
        anyhow::bail!(
            "no graphs: use the `quotient` or `finite` scheme, or list files under [sofic]"
        );
    }
    let integral = is_integral(a);
    let integer = integral && a.conductor() == Some(1);
    let galois = integral && a.conductor().is_some_and(|n| n > 1);
    let rows = graphs
        .iter()
        .map(|(name, g, good)| {
            let cg = certify(g, &exp.group, radius, good.as_deref())
                .with_context(|| format!("graph {name}"))?;
            let k = sofic_kernel(a, &cg)?;
            let det = det_star(&k)?;
            let n = cg.graph.vertex_count() as f64;
            let galois_sum = if galois {
                Some(galois_summed_lndet(a, &cg)?.1)
            } else {
                None
            };
            Ok(DetRow {
                source: "sofic".into(),
                stage: name.clone(),
                dim: Some(k.matrix.n),
                lndet: Some(det.ln_value / n),
                det_star_ln: Some(det.ln_value),
                certified: det.certificate.is_some().then_some(det.certified),
                certificate: det.certificate.map(|c| c.to_string()),
                good_fraction: Some(1.0 - cg.delta),
                galois_sum,
                ..Default::default()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = header(exp, "sofic");
    report.put("radius", radius);
    report.put("corrupted_edges", spec.corrupt);
    let mut nonneg = Check::new("sofic_lndet_nonnegative");
    let mut cert = Check::new("det_star_certificate");
    let mut gal = Check::new("galois_sum_nonnegative");
    let mut out = Vec::new();
    for r in &rows {
        if integer {
            let v = r.det_star_ln.unwrap_or(0.0);
            nonneg.record(v >= -slack, || format!("{}: ln det* = {v}", r.stage));
            if let Some(c) = r.certified {
                cert.record(c, || r.stage.clone());
            }
        }
        if let Some(s) = r.galois_sum {
            gal.record(s >= -slack, || format!("{}: {s}", r.stage));
        }
        report.put(
            format!("graph.{}.lndet", r.stage.replace(' ', "_")),
            cell(r.lndet),
        );
        out.push(r.cells(exp.tracked.len(), None));
    }
    if exp.config.oracle.enabled {
        if let Ok(est) = oracle_lndet(a, exp.config.oracle.grid) {
            report.put("oracle.lndet", est.value);
            out.push(
                DetRow {
                    source: "oracle".into(),
                    lndet: Some(est.value),
                    ..Default::default()
                }
                .cells(exp.tracked.len(), None),
            );
        }
    }
    report.check(nonneg);
    report.check(cert);
    report.check(gal);
    write_file(
        &exp.out_dir,
        "determinants.csv",
        &csv_text(&determinant_header(exp), &out)?,
    )?;
    report.write(&exp.out_dir)?;
    Ok(report)
}

// ---------------------------------------------------------------- oracle

pub fn oracle_cmd(exp: &Experiment) -> Result<Report> {
    let a = &exp.matrix;
    let grid = exp.config.oracle.grid;
    let mut report = header(exp, "oracle");
    report.put("oracle.grid", grid);
    let mut table = Vec::new();
    let mut words: Vec<(String, delocspec_core::group::GroupElement)> = exp
        .tracked
        .iter()
        .map(|t| (t.word.clone(), t.element.clone()))
        .collect();
    if words.is_empty() {
        words.push(("e".into(), exp.group.identity()));
    }
    for (w, g) in &words {
        let (v, est) = oracle_kernel_coefficient(a, g, grid)?;
        let shown = fmt_complex(Complex64::new(round(v.re), round(v.im)));
        table.push(format!("{w}: {shown}"));
        report.put(format!("oracle.coeff.{w}"), fmt_complex(v));
        report.put(format!("oracle.coeff.{w}.error"), est.error);
        if est.flagged {
            report.put(
                format!("oracle.coeff.{w}.flagged"),
                "kernel not separated from the continuous spectrum",
            );
        }
    }
    let f0 = oracle_density(a, 0.0, grid)?;
    report.put("oracle.F0", f0.value);
    match oracle_lndet(a, grid) {
        Ok(est) => {
            report.put("oracle.lndet", est.value);
            report.put("oracle.lndet.error", est.error);
            report.put("oracle.lndet.excluded_measure", est.excluded_measure);
        }
        Err(e) => report.put("oracle.lndet", format!("unavailable: {e}")),
    }
    println!("{{{}}}", table.join(", "));
    report.write(&exp.out_dir)?;
    Ok(report)
}

/// Rounds away quadrature noise below `1e−12` for display.
fn round(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
