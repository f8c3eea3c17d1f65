use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use countflow_core::diagnostics::{correlogram, cumulative_periodogram, overdispersion_summary, Dispersion};
use countflow_core::inference::{filter_intensity, fit, pearson_residuals};
use countflow_core::lgc::{copula_select_with_params, CopulaSelection};
use countflow_core::simulate::simulate;
use countflow_core::stationarity::{check_conditions, DEFAULT_SERIES_MAX_J, DEFAULT_SERIES_TOL};
use countflow_core::{CountSeries, ModelKind, ModelParams};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{CommandKind, RunConfig};
use crate::csvio::{read_counts_csv, write_counts_csv, write_curve, write_table, write_text};
use crate::report::{norms_text, FitReport, NormsRecord, RECORD_VERSION};

/// Two-sided 95% white-noise band for a sample autocorrelation.
const ACF_BAND_Z: f64 = 1.959_963_984_540_054;

/// What a command printed and wrote.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub text: String,
    pub files: Vec<PathBuf>,
}

impl Summary {
    fn file(&mut self, path: PathBuf) -> &Path {
        self.files.push(path);
        self.files.last().unwrap()
    }
}

/// Runs one command inside a pool of `config.workers` threads.
pub fn run_command(config: &RunConfig) -> Result<Summary> {
    fs::create_dir_all(&config.output)
        .with_context(|| format!("cannot create output directory {}", config.output.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build()?;
    pool.install(|| match config.command {
        CommandKind::Simulate => run_simulate(config),
        CommandKind::Fit => run_fit(config),
        CommandKind::CheckStationarity => run_check(config),
        CommandKind::Diagnose => run_diagnose(config),
        CommandKind::CopulaSelect => run_select(config),
    })
    .with_context(|| format!("`{}` failed", config.command))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_report(path: &Path) -> Result<FitReport> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read fit report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a fit report", path.display()))
}

fn labelled(y: CountSeries) -> Result<CountSeries> {
    let labels = y.labels_or_default();
    Ok(y.with_labels(labels)?)
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    version: u32,
    model: ModelKind,
    d: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    copula: countflow_core::copula::CopulaSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
    files: Vec<&'a str>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn run_simulate(c: &RunConfig) -> Result<Summary> {
    let params = c.params.as_ref().context("`simulate` needs --preset or a params table")?;
    let (y, path) = simulate(params, c.copula, &c.simulation)?;
    let y = labelled(y)?;
    let mut s = Summary::default();
    write_counts_csv(s.file(c.output.join("counts.csv")), &y)?;
    let mut files = vec!["counts.csv"];
    if c.write_intensity {
        let header: Vec<String> = y.labels_or_default().iter().map(|l| format!("lambda_{l}")).collect();
        let means = path.to_means();
        write_table(s.file(c.output.join("intensity.csv")), &header, means.rows())?;
        files.push("intensity.csv");
    }
    let record = SimulationRecord {
        version: RECORD_VERSION,
        model: params.kind(),
        d: params.d().iter().copied().collect(),
        a: rows(params.a()),
        b: rows(params.b()),
        copula: c.copula,
        n: c.simulation.n,
        burn_in: c.simulation.burn_in,
        seed: c.seed,
        files,
    };
    write_json(s.file(c.output.join("simulation.json")), &record)?;
    let means: Vec<String> = y.column_means().iter().map(|m| format!("{m:.3}")).collect();
    s.text = format!(
        "simulated {} x {} counts ({} model, {} copula, seed {}); column means {}\n",
        y.n(),
        y.p(),
        params.kind(),
        c.copula.family,
        c.seed,
        means.join(", ")
    );
    Ok(s)
}

fn run_fit(c: &RunConfig) -> Result<Summary> {
    let input = c.require_input()?;
    let y = labelled(read_counts_csv(input)?)?;
    let f = fit(&y, c.model, &c.fit_options(y.p()))?;
    if !f.convergence.status.is_success() {
        log::warn!("optimizer stopped with status {}", f.convergence.status);
    }
    let norms = check_conditions(&f.params, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
    let labels = y.labels_or_default();
    let report = FitReport::new(&f, labels.clone(), &norms);
    let mut s = Summary::default();
    write_json(s.file(c.output.join("fit.json")), &report)?;
    let text = report.to_text();
    write_text(s.file(c.output.join("fit.txt")), &text)?;
    let header: Vec<String> = labels.iter().map(|l| format!("lambda_{l}")).collect();
    write_table(s.file(c.output.join("intensities.csv")), &header, f.fitted_intensity.to_means().rows())?;
    let e = pearson_residuals(&f, &y)?;
    let e_rows = rows(&e);
    write_table(s.file(c.output.join("residuals.csv")), &labels, e_rows.iter().map(Vec::as_slice))?;
    s.text = text;
    Ok(s)
}

#[derive(Serialize)]
struct StationarityRecord {
    version: u32,
    model: ModelKind,
    all_hold: bool,
    norms: NormsRecord,
}

fn run_check(c: &RunConfig) -> Result<Summary> {
    let params = match (&c.params, &c.fit_report) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => read_report(path)?.params()?,
        (None, None) => bail!("`check-stationarity` needs --preset, a params table or --fit"),
    };
    let report = check_conditions(&params, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
    let record = StationarityRecord {
        version: RECORD_VERSION,
        model: params.kind(),
        all_hold: report.all_hold(),
        norms: (&report).into(),
    };
    let mut s = Summary::default();
    write_json(s.file(c.output.join("stationarity.json")), &record)?;
    s.text = norms_text(&record.norms);
    Ok(s)
}

/// Parameters from `--fit` when given, otherwise a fresh fit of `y`.
fn fitted_params(c: &RunConfig, y: &CountSeries) -> Result<ModelParams> {
    match &c.fit_report {
        Some(path) => {
            let report = read_report(path)?;
            if report.p() != y.p() {
                bail!("fit report has p = {} but the counts have {} columns", report.p(), y.p());
            }
            report.params()
        }
        None => Ok(fit(y, c.model, &c.fit_options(y.p()))?.params),
    }
}

#[derive(Serialize)]
struct ComponentDiagnostics {
    component: String,
    residual_mean: f64,
    residual_variance: f64,
    periodogram_max_deviation: f64,
    periodogram_band_halfwidth: f64,
    inside_band: bool,
    counts: Dispersion,
}

#[derive(Serialize)]
struct DiagnosticsRecord {
    version: u32,
    n: usize,
    max_lag: usize,
    components: Vec<ComponentDiagnostics>,
}

fn run_diagnose(c: &RunConfig) -> Result<Summary> {
    let input = c.require_input()?;
    let y = labelled(read_counts_csv(input)?)?;
    let params = fitted_params(c, &y)?;
    let path = filter_intensity(&params, &y)?.to_means();
    let (n, p) = (y.n(), y.p());
    let e = DMatrix::from_fn(n, p, |t, i| {
        let l = path.row(t)[i];
        (y.row(t)[i] as f64 - l) / l.sqrt()
    });
    let labels = y.labels_or_default();
    let dispersion = overdispersion_summary(&y)?;
    let mut s = Summary::default();

    let max_lag = c.max_lag.min(n.saturating_sub(1));
    let acf = correlogram(&e, max_lag)?;
    let band = ACF_BAND_Z / (n as f64).sqrt();
    let lags: Vec<f64> = (0..=max_lag).map(|h| h as f64).collect();
    for i in 0..p {
        for j in 0..p {
            let values: Vec<f64> = (0..=max_lag).map(|h| acf.get(h, i, j)).collect();
            let upper = vec![band; lags.len()];
            let lower = vec![-band; lags.len()];
            let file = c.output.join(format!("correlogram_{}_{}.csv", i + 1, j + 1));
            write_curve(s.file(file), &lags, &values, Some((&upper, &lower)))?;
        }
    }

    let mut components = Vec::with_capacity(p);
    let mut lines = Vec::with_capacity(p);
    for i in 0..p {
        let col: Vec<f64> = e.column(i).iter().copied().collect();
        let cp = cumulative_periodogram(&col)?;
        let diag = cp.diagonal();
        let upper: Vec<f64> = diag.iter().map(|v| v + cp.band_halfwidth).collect();
        let lower: Vec<f64> = diag.iter().map(|v| v - cp.band_halfwidth).collect();
        let file = c.output.join(format!("periodogram_{}.csv", i + 1));
        write_curve(s.file(file), &cp.frequencies, &cp.cumulative, Some((&upper, &lower)))?;
        let mean = col.iter().sum::<f64>() / n as f64;
        let variance = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        lines.push(format!(
            "{:<10} residual mean {mean:>8.4}  variance {variance:>7.4}  periodogram {} (max dev {:.4}, band {:.4})",
            labels[i],
            if cp.inside_band() { "inside band " } else { "outside band" },
            cp.max_deviation,
            cp.band_halfwidth
        ));
        components.push(ComponentDiagnostics {
            component: labels[i].clone(),
            residual_mean: mean,
            residual_variance: variance,
            periodogram_max_deviation: cp.max_deviation,
            periodogram_band_halfwidth: cp.band_halfwidth,
            inside_band: cp.inside_band(),
            counts: dispersion[i],
        });
    }
    let record = DiagnosticsRecord { version: RECORD_VERSION, n, max_lag, components };
    write_json(s.file(c.output.join("diagnostics.json")), &record)?;
    s.text = lines.join("\n") + "\n";
    Ok(s)
}

#[derive(Serialize)]
struct SelectionRecord<'a> {
    version: u32,
    seed: u64,
    replications: usize,
    jitter: bool,
    #[serde(flatten)]
    selection: &'a CopulaSelection,
}

fn run_select(c: &RunConfig) -> Result<Summary> {
    let input = c.require_input()?;
    let y = labelled(read_counts_csv(input)?)?;
    let params = fitted_params(c, &y)?;
    let sel = copula_select_with_params(&y, &params, &c.select)?;
    let mut s = Summary::default();
    let record = SelectionRecord {
        version: RECORD_VERSION,
        seed: c.select.seed,
        replications: c.select.replications,
        jitter: c.select.jitter,
        selection: &sel,
    };
    write_json(s.file(c.output.join("selection.json")), &record)?;
    for curve in &sel.curves {
        let file = c.output.join(format!("curve_{}.csv", curve.family));
        write_curve(s.file(file), &curve.phis, &curve.distances, None)?;
    }
    let mut text = format!(
        "selected {} copula, phi = {} (distance {:.5}) over {} grid points\n",
        sel.family,
        sel.phi_hat,
        sel.distance,
        sel.grid.len()
    );
    if let Some(b) = &sel.bootstrap {
        let votes: Vec<String> = b.votes.iter().map(|(f, k)| format!("{f} {k}")).collect();
        text.push_str(&format!(
            "bootstrap votes over {} generations: {}; modal-family phi mean {:.3} (sd {:.3})\n",
            b.replications,
            votes.join(", "),
            b.phi_mean,
            b.phi_se
        ));
    }
    s.text = text;
    Ok(s)
}
