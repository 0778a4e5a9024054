//! Monte-Carlo benchmark harness.
//!
//! A plan is a flat `key = value` text file:
//!
//! ```text
//! # lines starting with '#' are comments
//! datasets   = D2, file:data/credit.csv:data/credit.schema
//! mechanisms = MCAR, MAR
//! rates      = 0.1, 0.2
//! methods    = rf=missforest, sgbm=gbm, mean
//! runs       = 30
//! seed       = 1
//! n          = 250
//! compare    = sgbm<rf
//! rf_trees   = 100
//! gbm_trees  = 400
//! gbm_step   = 0.005
//! max_iter   = 10
//! ```
//!
//! `compare = a<b` runs a one-sided Brunner-Munzel test that method `a` has
//! smaller errors than `b`. File paths are relative to the plan file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ampute::{ampute, AmputeConfig, Mechanism};
use crate::data::{initial_impute, DataMatrix};
use crate::error::{Error, Result};
use crate::imputer::{impute, LearnerSpec, DEFAULT_MAX_ITER};
use crate::io::{load_csv, DEFAULT_NA_TOKEN};
use crate::metrics::{brunner_munzel, nrmse, pfc, quantile_sorted, stars, Alternative, EvalTriple};
use crate::rng::derive_seed;
use crate::synthdata::{generate, Design, DesignSpec, DEFAULT_ROWS};

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Design(Design),
    File { csv: PathBuf, schema: PathBuf },
}

impl Dataset {
    pub fn label(&self) -> String {
        match self {
            Dataset::Design(d) => d.to_string(),
            Dataset::File { csv, .. } => csv
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| csv.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Learners(LearnerSpec),
    /// Mean / mode fill only.
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMethod {
    pub label: String,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub datasets: Vec<Dataset>,
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub methods: Vec<NamedMethod>,
    pub runs: usize,
    pub seed: u64,
    pub n: usize,
    /// `(better, worse)` label pairs.
    pub compare: Vec<(String, String)>,
    pub max_iter: usize,
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("plan key {key}: cannot parse {v:?}")))
}

impl BenchmarkPlan {
    /// Parses plan text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("plan line {}: expected key = value", lineno + 1)))?;
            let k = k.trim().to_ascii_lowercase();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidParameter(format!("plan key {k} given twice")));
            }
        }
        let known = [
            "datasets", "mechanisms", "rates", "methods", "runs", "seed", "n", "compare", "rf_trees", "gbm_trees",
            "gbm_step", "max_iter",
        ];
        if let Some(k) = kv.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("unknown plan key {k}")));
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::InvalidParameter(format!("plan is missing {k}")))
        };

        let datasets = list(get("datasets")?)
            .map(|s| {
                if let Some(rest) = s.strip_prefix("file:") {
                    let (csv, schema) = rest
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidParameter(format!("dataset {s:?}: expected file:CSV:SCHEMA")))?;
                    Ok(Dataset::File {
                        csv: base.join(csv),
                        schema: base.join(schema),
                    })
                } else {
                    Ok(Dataset::Design(s.parse()?))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mechanisms = list(get("mechanisms")?).map(str::parse).collect::<Result<Vec<Mechanism>>>()?;
        let rates = list(get("rates")?).map(|r| parse_num::<f64>("rates", r)).collect::<Result<Vec<_>>>()?;
        if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::InvalidParameter(format!("rate {r} outside (0, 1)")));
        }

        let rf_trees = kv.get("rf_trees").map(|v| parse_num::<usize>("rf_trees", v)).transpose()?;
        let gbm_trees = kv.get("gbm_trees").map(|v| parse_num::<usize>("gbm_trees", v)).transpose()?;
        let gbm_step = kv.get("gbm_step").map(|v| parse_num::<f64>("gbm_step", v)).transpose()?;
        let methods = list(get("methods")?)
            .map(|m| {
                let (label, name) = m.split_once('=').map_or((m, m), |(l, n)| (l.trim(), n.trim()));
                let method = if name.eq_ignore_ascii_case("mean") {
                    Method::Mean
                } else {
                    let mut spec = LearnerSpec::preset(name)
                        .ok_or_else(|| Error::InvalidParameter(format!("unknown method {name:?}")))?;
                    if let Some(t) = rf_trees {
                        spec = spec.with_forest_trees(t);
                    }
                    if gbm_trees.is_some() || gbm_step.is_some() {
                        let defaults = crate::boosting::GbmParams::default();
                        spec = spec.with_boosting(gbm_trees.unwrap_or(defaults.n_iter), gbm_step.unwrap_or(defaults.step));
                    }
                    Method::Learners(spec)
                };
                Ok(NamedMethod {
                    label: label.to_string(),
                    method,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut labels: Vec<&str> = methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("method labels must be unique".into()));
        }

        let compare = match kv.get("compare") {
            None => Vec::new(),
            Some(v) => list(v)
                .map(|c| {
                    let (a, b) = c
                        .split_once('<')
                        .ok_or_else(|| Error::InvalidParameter(format!("compare {c:?}: expected a<b")))?;
                    let (a, b) = (a.trim().to_string(), b.trim().to_string());
                    for l in [&a, &b] {
                        if !methods.iter().any(|m| &m.label == l) {
                            return Err(Error::InvalidParameter(format!("compare names unknown method {l:?}")));
                        }
                    }
                    Ok((a, b))
                })
                .collect::<Result<Vec<_>>>()?,
        };

        let plan = Self {
            datasets,
            mechanisms,
            rates,
            methods,
            runs: parse_num("runs", get("runs")?)?,
            seed: kv.get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(1),
            n: kv.get("n").map(|v| parse_num("n", v)).transpose()?.unwrap_or(DEFAULT_ROWS),
            compare,
            max_iter: kv
                .get("max_iter")
                .map(|v| parse_num("max_iter", v))
                .transpose()?
                .unwrap_or(DEFAULT_MAX_ITER),
        };
        if plan.datasets.is_empty() || plan.mechanisms.is_empty() || plan.rates.is_empty() || plan.methods.is_empty() {
            return Err(Error::InvalidParameter("plan lists must not be empty".into()));
        }
        if plan.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Nrmse,
    Pfc,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Metric::Nrmse => "NRMSE",
            Metric::Pfc => "PFC",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub method: String,
    pub run: usize,
    pub metric: Metric,
    /// `None` when the run failed.
    pub value: Option<f64>,
    pub mask_hash: Option<u64>,
    pub reason: String,
}

/// Scores one imputation against the truth.
pub fn score(truth: &DataMatrix, imputed: &DataMatrix, mask: &crate::data::Mask, metric: Metric) -> Result<f64> {
    let e = EvalTriple::new(truth, imputed, mask)?;
    match metric {
        Metric::Nrmse => nrmse(&e),
        Metric::Pfc => pfc(&e),
    }
}

fn metrics_for(d: &DataMatrix) -> Vec<Metric> {
    let mut out = Vec::new();
    if (0..d.n_cols()).any(|j| !d.kind(j).is_categorical()) {
        out.push(Metric::Nrmse);
    }
    if (0..d.n_cols()).any(|j| d.kind(j).is_categorical()) {
        out.push(Metric::Pfc);
    }
    out
}

struct Task {
    ds: usize,
    mech: usize,
    rate: usize,
    run: usize,
}

/// Runs every (dataset, mechanism, rate, run) cell. All methods in a run see
/// the same amputed matrix and the same imputation seed. Failures become
/// records without a value.
pub fn run_plan(plan: &BenchmarkPlan, na_token: &str, log: Option<&(dyn Fn(&str) + Sync)>) -> Result<Vec<RunRecord>> {
    let truths: Vec<Option<DataMatrix>> = plan
        .datasets
        .iter()
        .map(|ds| match ds {
            Dataset::Design(_) => Ok(None),
            Dataset::File { csv, schema } => {
                let d = load_csv(csv, schema, na_token)?;
                if !d.is_complete() {
                    return Err(Error::InvalidParameter(format!(
                        "benchmark data {} must be complete",
                        csv.display()
                    )));
                }
                Ok(Some(d))
            }
        })
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for ds in 0..plan.datasets.len() {
        for mech in 0..plan.mechanisms.len() {
            for rate in 0..plan.rates.len() {
                for run in 0..plan.runs {
                    tasks.push(Task { ds, mech, rate, run });
                }
            }
        }
    }

    let chunks: Vec<Vec<RunRecord>> = tasks
        .par_iter()
        .map(|t| {
            let recs = run_task(plan, t, truths[t.ds].as_ref());
            if let Some(log) = log {
                let failed = recs.iter().filter(|r| r.value.is_none()).count();
                log(&format!(
                    "{} {} {} run {}: {} records, {} failed",
                    plan.datasets[t.ds].label(),
                    plan.mechanisms[t.mech],
                    plan.rates[t.rate],
                    t.run,
                    recs.len(),
                    failed
                ));
            }
            recs
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn run_task(plan: &BenchmarkPlan, t: &Task, file_truth: Option<&DataMatrix>) -> Vec<RunRecord> {
    let ids = [t.ds as u64, t.mech as u64, t.rate as u64, t.run as u64];
    let dataset = &plan.datasets[t.ds];
    let mechanism = plan.mechanisms[t.mech];
    let rate = plan.rates[t.rate];
    let record = |method: &str, metric: Metric, value: Option<f64>, mask_hash: Option<u64>, reason: String| RunRecord {
        dataset: dataset.label(),
        mechanism,
        rate,
        method: method.to_string(),
        run: t.run,
        metric,
        value,
        mask_hash,
        reason,
    };

    let truth = match (dataset, file_truth) {
        (_, Some(d)) => Ok(d.clone()),
        (Dataset::Design(design), None) => generate(&DesignSpec {
            design: *design,
            n: plan.n,
            seed: derive_seed(plan.seed, "bench-data", &[t.ds as u64, t.run as u64]),
        }),
        (Dataset::File { .. }, None) => unreachable!("file data loaded up front"),
    };
    let amputed = truth.and_then(|truth| {
        let cfg = AmputeConfig {
            mechanism,
            rate,
            seed: derive_seed(plan.seed, "bench-mask", &ids),
        };
        ampute(&truth, &cfg).map(|a| (truth, a))
    });
    let (truth, amputed) = match amputed {
        Ok(v) => v,
        Err(e) => {
            let metrics = file_truth.map(metrics_for).unwrap_or_else(|| match dataset {
                Dataset::Design(d) if d.is_categorical() => vec![Metric::Pfc],
                _ => vec![Metric::Nrmse],
            });
            return plan
                .methods
                .iter()
                .flat_map(|m| metrics.iter().map(|&mt| record(&m.label, mt, None, None, e.to_string())).collect::<Vec<_>>())
                .collect();
        }
    };
    let hash = amputed.mask.digest();
    let metrics = metrics_for(&truth);
    let impute_seed = derive_seed(plan.seed, "bench-impute", &ids);

    let mut out = Vec::new();
    for m in &plan.methods {
        let imputed = match &m.method {
            Method::Mean => initial_impute(&amputed.data),
            Method::Learners(spec) => impute(&amputed.data, spec, plan.max_iter, impute_seed).map(|r| r.data),
        };
        for &metric in &metrics {
            let scored = imputed
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|imp| score(&truth, imp, &amputed.mask, metric).map_err(|e| e.to_string()));
            out.push(match scored {
                Ok(v) => record(&m.label, metric, Some(v), Some(hash), String::new()),
                Err(reason) => record(&m.label, metric, None, Some(hash), reason),
            });
        }
    }
    out
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

pub fn write_records<W: Write>(w: W, records: &[RunRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["dataset", "mechanism", "rate", "method", "run", "metric", "value", "mask_hash", "reason"])
        .map_err(csv_err)?;
    for r in records {
        wtr.write_record([
            r.dataset.clone(),
            r.mechanism.to_string(),
            r.rate.to_string(),
            r.method.clone(),
            r.run.to_string(),
            r.metric.to_string(),
            r.value.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            r.mask_hash.map_or_else(String::new, |h| format!("{h:016x}")),
            r.reason.clone(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(csv_err)
}

/// Aggregate of one (dataset, mechanism, rate, metric, method) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub metric: Metric,
    pub method: String,
    pub n: usize,
    pub failed: usize,
    pub mean: f64,
    pub sd: f64,
    /// min, lower quartile, median, upper quartile, max.
    pub five_number: [f64; 5],
    pub comparison: Option<Comparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub against: String,
    pub relative_effect: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub note: String,
}

pub fn summarize(plan: &BenchmarkPlan, records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, usize, usize, Metric), BTreeMap<String, (Vec<f64>, usize)>> = BTreeMap::new();
    let index = |r: &RunRecord| -> Option<(usize, usize, usize)> {
        let ds = plan.datasets.iter().position(|d| d.label() == r.dataset)?;
        let me = plan.mechanisms.iter().position(|m| *m == r.mechanism)?;
        let ra = plan.rates.iter().position(|x| *x == r.rate)?;
        Some((ds, me, ra))
    };
    for r in records {
        let Some((ds, me, ra)) = index(r) else { continue };
        let slot = cells.entry((ds, me, ra, r.metric)).or_default().entry(r.method.clone()).or_default();
        match r.value {
            Some(v) => slot.0.push(v),
            None => slot.1 += 1,
        }
    }

    let mut out = Vec::new();
    for ((ds, me, ra, metric), by_method) in &cells {
        for m in &plan.methods {
            let Some((values, failed)) = by_method.get(&m.label) else { continue };
            let n = values.len();
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let sd = if n > 1 {
                (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            let five_number = if n > 0 {
                [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile_sorted(&sorted, q))
            } else {
                [f64::NAN; 5]
            };
            let base = SummaryRow {
                dataset: plan.datasets[*ds].label(),
                mechanism: plan.mechanisms[*me],
                rate: plan.rates[*ra],
                metric: *metric,
                method: m.label.clone(),
                n,
                failed: *failed,
                mean,
                sd,
                five_number,
                comparison: None,
            };
            let mine: Vec<&(String, String)> = plan.compare.iter().filter(|(a, _)| *a == m.label).collect();
            if mine.is_empty() {
                out.push(base);
                continue;
            }
            for (_, against) in mine {
                let other = by_method.get(against).map(|v| v.0.as_slice()).unwrap_or(&[]);
                let comparison = match brunner_munzel(values, other, Alternative::Less) {
                    Ok(r) => Comparison {
                        against: against.clone(),
                        relative_effect: r.relative_effect,
                        statistic: Some(r.statistic),
                        p_value: Some(r.p_value),
                        note: String::new(),
                    },
                    Err(Error::DegenerateTest { relative_effect }) => Comparison {
                        against: against.clone(),
                        relative_effect,
                        statistic: None,
                        p_value: None,
                        note: "zero variance estimate".into(),
                    },
                    Err(e) => Comparison {
                        against: against.clone(),
                        relative_effect: f64::NAN,
                        statistic: None,
                        p_value: None,
                        note: e.to_string(),
                    },
                };
                out.push(SummaryRow {
                    comparison: Some(comparison),
                    ..base.clone()
                });
            }
        }
    }
    out
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "dataset", "mechanism", "rate", "metric", "method", "n", "failed", "mean", "sd", "min", "q1", "median", "q3",
        "max", "compared_to", "p_hat", "bm_statistic", "bm_p_value", "stars", "note",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let mut fields = vec![
            r.dataset.clone(),
            r.mechanism.to_string(),
            r.rate.to_string(),
            r.metric.to_string(),
            r.method.clone(),
            r.n.to_string(),
            r.failed.to_string(),
            num(r.mean),
            num(r.sd),
        ];
        fields.extend(r.five_number.iter().map(|&v| num(v)));
        match &r.comparison {
            None => fields.extend(std::iter::repeat_n(String::new(), 6)),
            Some(c) => fields.extend([
                c.against.clone(),
                num(c.relative_effect),
                c.statistic.map_or_else(|| "NA".into(), num),
                c.p_value.map_or_else(|| "NA".into(), num),
                c.p_value.map_or("", stars).to_string(),
                c.note.clone(),
            ]),
        }
        wtr.write_record(&fields).map_err(csv_err)?;
    }
    wtr.flush().map_err(csv_err)
}

/// Runs a plan and writes `records.csv` and `summary.csv` into `out_dir`.
pub fn run_to_dir(plan: &BenchmarkPlan, out_dir: &Path, na_token: Option<&str>, log: Option<&(dyn Fn(&str) + Sync)>) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let records = run_plan(plan, na_token.unwrap_or(DEFAULT_NA_TOKEN), log)?;
    let rec_path = out_dir.join("records.csv");
    let sum_path = out_dir.join("summary.csv");
    let create = |p: &Path| {
        std::fs::File::create(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    write_records(create(&rec_path)?, &records)?;
    write_summary(create(&sum_path)?, &summarize(plan, &records))?;
    Ok((rec_path, sum_path))
}
