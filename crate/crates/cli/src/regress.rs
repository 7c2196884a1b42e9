//! The regress and report stages: standard analysis forms over the metric
//! tables (trend models, innovation models, consensus models, core-versus-
//! periphery comparisons) and the collated percent-change report.

use std::collections::BTreeMap;
use std::fs::{self, File};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use coreperi_core::ingest::{self, FieldScheme};
use coreperi_core::metrics::{self, ChangeOrientation, MesoMetricRow, MetricRow};
use coreperi_core::stats::{self, RegressionResult, StatsError};

use crate::artifacts::{read_csv, Paths};
use crate::manifest::{hash_bytes, require_artifact};
use crate::stages::{CdRow, ConsensusRow, ProfileRow, StructureChurnRow};
use crate::RunContext;

/// One row of regression_report.csv.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionRow {
    pub model: String,
    pub kind: String,
    pub term: String,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

fn coef_rows(model: &str, fit: &RegressionResult) -> Vec<RegressionRow> {
    let mut rows = Vec::new();
    for coef in &fit.coefficients {
        rows.push(RegressionRow {
            model: model.to_string(),
            kind: "coef".into(),
            term: coef.term.clone(),
            estimate: Some(coef.estimate),
            std_error: Some(coef.std_error),
            statistic: Some(coef.statistic),
            p_value: Some(coef.p_value),
        });
    }
    let fit_row = |term: &str, value: f64| RegressionRow {
        model: model.to_string(),
        kind: "fit".into(),
        term: term.to_string(),
        estimate: Some(value),
        std_error: None,
        statistic: None,
        p_value: None,
    };
    rows.push(fit_row("n_obs", fit.n_obs as f64));
    if let Some(r2) = fit.adj_r_squared {
        rows.push(fit_row("adj_r_squared", r2));
    }
    if let Some(r2) = fit.mcfadden_r_squared {
        rows.push(fit_row("mcfadden_r_squared", r2));
    }
    if let Some(joint) = fit.joint_test {
        rows.push(RegressionRow {
            model: model.to_string(),
            kind: "fit".into(),
            term: "joint_F".into(),
            estimate: Some(joint.statistic),
            std_error: Some(joint.df1),
            statistic: Some(joint.df2),
            p_value: Some(joint.p_value),
        });
    }
    rows
}

fn error_row(model: &str, err: &StatsError) -> RegressionRow {
    RegressionRow {
        model: model.to_string(),
        kind: "error".into(),
        term: err.to_string(),
        estimate: None,
        std_error: None,
        statistic: None,
        p_value: None,
    }
}

fn welch_row(model: &str, term: &str, mean_diff: f64, t: &stats::WelchT) -> RegressionRow {
    RegressionRow {
        model: model.to_string(),
        kind: "welch".into(),
        term: term.to_string(),
        estimate: Some(mean_diff),
        std_error: Some(t.dof),
        statistic: Some(t.t),
        p_value: Some(t.p),
    }
}


/// Drops constant predictors (zero variance makes them collinear with the
/// intercept) and reports what was removed.
fn drop_constant_predictors<'a>(
    model: &str,
    predictors: Vec<(&'a str, Vec<f64>)>,
) -> Vec<(&'a str, Vec<f64>)> {
    predictors
        .into_iter()
        .filter(|(name, values)| {
            let varies = values.windows(2).any(|w| w[0] != w[1]);
            if !varies {
                log::warn!("{model}: predictor {name:?} is constant, dropped");
            }
            varies
        })
        .collect()
}

struct PaperMeta {
    subfield: String,
    year: i32,
    n_authors: f64,
    n_refs: f64,
}

pub fn stage_regress(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.metrics_csv(), "metrics")?;
    require_artifact(&paths.meso_csv(), "metrics")?;
    require_artifact(&paths.cd_csv(), "cd-index")?;
    require_artifact(&paths.consensus_csv(), "consensus")?;
    for artifact in [paths.metrics_csv(), paths.meso_csv()] {
        ctx.manifest.check_freshness(&cfg.out_dir, "metrics", &artifact)?;
    }

    let metric_rows: Vec<MetricRow> = read_csv(&paths.metrics_csv())?;
    let meso_rows: Vec<MesoMetricRow> = read_csv(&paths.meso_csv())?;
    let cd_rows: Vec<CdRow> = read_csv(&paths.cd_csv())?;
    let consensus_rows: Vec<ConsensusRow> = read_csv(&paths.consensus_csv())?;
    let profile_rows: Vec<ProfileRow> = read_csv(&paths.profiles_csv()).unwrap_or_default();
    let structure_rows: Vec<StructureChurnRow> =
        read_csv(&paths.structure_churn_csv()).unwrap_or_default();

    let scheme = FieldScheme::load(&cfg.scheme, cfg.assignment_mode_enum()?)?;
    let (records, _) = ingest::load_corpus(&cfg.corpus, (cfg.year_min, cfg.year_max))?;
    let papers: BTreeMap<String, PaperMeta> = records
        .iter()
        .map(|r| {
            let subfield = scheme
                .assigned_subfields(r)
                .first()
                .map(|s| s.to_string())
                .unwrap_or_default();
            (
                r.paper_id.clone(),
                PaperMeta {
                    subfield,
                    year: r.year,
                    n_authors: f64::from(r.author_count),
                    n_refs: r.reference_ids.len() as f64,
                },
            )
        })
        .collect();

    let metric_by_cell: BTreeMap<(String, i32), &MetricRow> =
        metric_rows.iter().map(|m| ((m.subfield.clone(), m.year), m)).collect();

    let mut rows: Vec<RegressionRow> = Vec::new();

    // trend models per meso field (metric ~ year)
    let mut meso_series: BTreeMap<&str, Vec<&MesoMetricRow>> = BTreeMap::new();
    for row in &meso_rows {
        meso_series.entry(&row.meso).or_default().push(row);
    }
    for (meso, series) in &meso_series {
        let trends: [(&str, Box<dyn Fn(&MesoMetricRow) -> Option<f64>>); 3] = [
            ("churn", Box::new(|r| r.churn)),
            ("rel_core_size", Box::new(|r| r.rel_core_size)),
            ("n_cores", Box::new(|r| r.n_cores)),
        ];
        for (metric, value_of) in trends {
            let data: Vec<(f64, f64)> = series
                .iter()
                .filter_map(|r| value_of(r).map(|v| (r.year as f64, v)))
                .collect();
            let model = format!("trend_{metric}__{meso}");
            if data.len() < 3 {
                log::warn!("{model}: fewer than 3 observations, skipped");
                continue;
            }
            let years: Vec<f64> = data.iter().map(|(y, _)| *y).collect();
            let values: Vec<f64> = data.iter().map(|(_, v)| *v).collect();
            match stats::ols_fe(&values, &[("year", years)], &[], &[]) {
                Ok(fit) => rows.extend(coef_rows(&model, &fit)),
                Err(err) => rows.push(error_row(&model, &err)),
            }
        }
    }

    // innovation models: cd ~ churn + rel_core_size + log(n_cores) + FE
    struct InnovationRow {
        cd: f64,
        churn: f64,
        rel: f64,
        log_cores: f64,
        year: String,
        subfield: String,
        n_authors: f64,
        n_refs: f64,
    }
    let innovation: Vec<InnovationRow> = cd_rows
        .iter()
        .filter_map(|r| {
            let cd = r.cd?;
            let meta = papers.get(&r.paper_id)?;
            let cell = metric_by_cell.get(&(meta.subfield.clone(), meta.year))?;
            let churn = cell.churn?;
            if cell.n_cores == 0 {
                return None;
            }
            Some(InnovationRow {
                cd,
                churn,
                rel: cell.rel_core_size,
                log_cores: (cell.n_cores as f64).ln(),
                year: meta.year.to_string(),
                subfield: meta.subfield.clone(),
                n_authors: meta.n_authors,
                n_refs: meta.n_refs,
            })
        })
        .collect();
    for (model, with_controls) in [("innovation_m1", false), ("innovation_m2", true)] {
        if innovation.len() < 20 {
            log::warn!("{model}: only {} usable papers, skipped", innovation.len());
            continue;
        }
        let outcome: Vec<f64> = innovation.iter().map(|r| r.cd).collect();
        let mut predictors: Vec<(&str, Vec<f64>)> = vec![
            ("churn", innovation.iter().map(|r| r.churn).collect()),
            ("rel_core_size", innovation.iter().map(|r| r.rel).collect()),
            ("log_n_cores", innovation.iter().map(|r| r.log_cores).collect()),
        ];
        if with_controls {
            predictors.push(("n_authors", innovation.iter().map(|r| r.n_authors).collect()));
            predictors.push(("n_refs", innovation.iter().map(|r| r.n_refs).collect()));
        }
        let fixed: Vec<(&str, Vec<String>)> = vec![
            ("year", innovation.iter().map(|r| r.year.clone()).collect()),
            ("subfield", innovation.iter().map(|r| r.subfield.clone()).collect()),
        ];
        let predictors = drop_constant_predictors(model, predictors);
        let joint: Vec<&str> = ["churn", "rel_core_size", "log_n_cores"]
            .into_iter()
            .filter(|t| predictors.iter().any(|(name, _)| name == t))
            .collect();
        match stats::ols_fe(&outcome, &predictors, &fixed, &joint) {
            Ok(fit) => rows.extend(coef_rows(model, &fit)),
            Err(err) => rows.push(error_row(model, &err)),
        }
    }

    // consensus models: counts ~ structure + log(1 + pos counts) + FE,
    // restricted to abstracts commenting on prior work
    struct ConsensusCase {
        count: f64,
        churn: f64,
        rel: f64,
        log_cores: f64,
        log_pos: [f64; 4],
        year: String,
        subfield: String,
        n_authors: f64,
        n_refs: f64,
    }
    let consensus: Vec<ConsensusCase> = consensus_rows
        .iter()
        .filter(|r| r.has_prior_work_comment)
        .filter_map(|r| {
            let meta = papers.get(&r.paper_id)?;
            let cell = metric_by_cell.get(&(meta.subfield.clone(), meta.year))?;
            let churn = cell.churn?;
            if cell.n_cores == 0 {
                return None;
            }
            Some(ConsensusCase {
                count: f64::from(r.consensus_count),
                churn,
                rel: cell.rel_core_size,
                log_cores: (cell.n_cores as f64).ln(),
                log_pos: [
                    f64::from(r.n_nouns).ln_1p(),
                    f64::from(r.n_adj).ln_1p(),
                    f64::from(r.n_verbs).ln_1p(),
                    f64::from(r.n_adv).ln_1p(),
                ],
                year: meta.year.to_string(),
                subfield: meta.subfield.clone(),
                n_authors: meta.n_authors,
                n_refs: meta.n_refs,
            })
        })
        .collect();
    for (model, with_controls) in [("consensus_m1", false), ("consensus_m2", true)] {
        if consensus.len() < 20 {
            log::warn!("{model}: only {} usable abstracts, skipped", consensus.len());
            continue;
        }
        let counts: Vec<f64> = consensus.iter().map(|r| r.count).collect();
        let mut predictors: Vec<(&str, Vec<f64>)> = vec![
            ("churn", consensus.iter().map(|r| r.churn).collect()),
            ("rel_core_size", consensus.iter().map(|r| r.rel).collect()),
            ("log_n_cores", consensus.iter().map(|r| r.log_cores).collect()),
            ("log_nouns", consensus.iter().map(|r| r.log_pos[0]).collect()),
            ("log_adjectives", consensus.iter().map(|r| r.log_pos[1]).collect()),
            ("log_verbs", consensus.iter().map(|r| r.log_pos[2]).collect()),
            ("log_adverbs", consensus.iter().map(|r| r.log_pos[3]).collect()),
        ];
        if with_controls {
            predictors.push(("n_authors", consensus.iter().map(|r| r.n_authors).collect()));
            predictors.push(("n_refs", consensus.iter().map(|r| r.n_refs).collect()));
        }
        let fixed: Vec<(&str, Vec<String>)> = vec![
            ("year", consensus.iter().map(|r| r.year.clone()).collect()),
            ("subfield", consensus.iter().map(|r| r.subfield.clone()).collect()),
        ];
        let predictors = drop_constant_predictors(model, predictors);
        match stats::poisson_fit(&counts, &predictors, &fixed) {
            Ok(fit) => rows.extend(coef_rows(model, &fit)),
            Err(err) => rows.push(error_row(model, &err)),
        }
    }

    // core vs periphery concept properties (Welch)
    let core: Vec<&ProfileRow> = profile_rows.iter().filter(|p| p.core_share > 0.5).collect();
    let periphery: Vec<&ProfileRow> = profile_rows.iter().filter(|p| p.core_share <= 0.5).collect();
    let properties: [(&str, fn(&ProfileRow) -> f64); 5] = [
        ("n_words", |p| f64::from(p.n_words)),
        ("n_chars", |p| f64::from(p.n_chars)),
        ("n_digits", |p| f64::from(p.n_digits)),
        ("n_subfields", |p| f64::from(p.n_subfields)),
        ("n_papers", |p| f64::from(p.n_papers)),
    ];
    for (name, value_of) in properties {
        let a: Vec<f64> = core.iter().map(|p| value_of(p)).collect();
        let b: Vec<f64> = periphery.iter().map(|p| value_of(p)).collect();
        match stats::welch_t(&a, &b) {
            Ok(t) => {
                let diff = a.iter().sum::<f64>() / a.len().max(1) as f64
                    - b.iter().sum::<f64>() / b.len().max(1) as f64;
                rows.push(welch_row("profile_welch", name, diff, &t));
            }
            Err(err) => log::warn!("profile_welch {name}: {err}"),
        }
    }

    // largest core vs other cores churn (Welch)
    let largest: Vec<f64> =
        structure_rows.iter().filter(|r| r.is_largest).map(|r| r.churn).collect();
    let rest: Vec<f64> =
        structure_rows.iter().filter(|r| !r.is_largest).map(|r| r.churn).collect();
    match stats::welch_t(&largest, &rest) {
        Ok(t) => {
            let diff = largest.iter().sum::<f64>() / largest.len().max(1) as f64
                - rest.iter().sum::<f64>() / rest.len().max(1) as f64;
            rows.push(welch_row("structure_churn_welch", "largest_vs_rest", diff, &t));
        }
        Err(err) => log::warn!("structure_churn_welch: {err}"),
    }

    metrics::write_csv(&rows, File::create(paths.regression_csv())?)?;
    fs::write(paths.regression_txt(), render_regressions(&rows))?;

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "regress",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[
            paths.metrics_csv(),
            paths.meso_csv(),
            paths.cd_csv(),
            paths.consensus_csv(),
        ],
        &[paths.regression_csv(), paths.regression_txt()],
        Default::default(),
    )
}

fn render_regressions(rows: &[RegressionRow]) -> String {
    let mut out = String::from("Regression report\n=================\n");
    let mut by_model: BTreeMap<&str, Vec<&RegressionRow>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for row in rows {
        if !by_model.contains_key(row.model.as_str()) {
            order.push(&row.model);
        }
        by_model.entry(&row.model).or_default().push(row);
    }
    for model in order {
        out.push_str(&format!("\n{model}\n{}\n", "-".repeat(model.len())));
        for row in &by_model[model] {
            let fmt = |v: Option<f64>| v.map_or("".into(), |x| format!("{x:.6}"));
            match row.kind.as_str() {
                "coef" => out.push_str(&format!(
                    "  {:<28} est {:>12}  se {:>12}  t {:>10}  p {:>10}\n",
                    row.term,
                    fmt(row.estimate),
                    fmt(row.std_error),
                    fmt(row.statistic),
                    fmt(row.p_value),
                )),
                "fit" if row.term == "joint_F" => out.push_str(&format!(
                    "  joint F({}, {}) = {}  p = {}\n",
                    fmt(row.std_error),
                    fmt(row.statistic),
                    fmt(row.estimate),
                    fmt(row.p_value),
                )),
                "fit" => out.push_str(&format!("  {:<28} {}\n", row.term, fmt(row.estimate))),
                "welch" => out.push_str(&format!(
                    "  {:<28} mean diff {:>10}  t {:>10}  dof {:>8}  p {:>10}\n",
                    row.term,
                    fmt(row.estimate),
                    fmt(row.statistic),
                    fmt(row.std_error),
                    fmt(row.p_value),
                )),
                _ => out.push_str(&format!("  error: {}\n", row.term)),
            }
        }
    }
    out
}

/// One row of percent_change.csv.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PercentChangeRow {
    pub meso: String,
    pub metric: String,
    pub year_start: i32,
    pub year_end: i32,
    pub value_start: f64,
    pub value_end: f64,
    pub pct_decline: Option<f64>,
    pub pct_increase: Option<f64>,
}

pub fn stage_report(ctx: &mut RunContext) -> Result<()> {
    let cfg = &ctx.cfg;
    let paths = Paths::new(&cfg.out_dir);
    require_artifact(&paths.metrics_csv(), "metrics")?;
    require_artifact(&paths.meso_csv(), "metrics")?;

    let metric_rows: Vec<MetricRow> = read_csv(&paths.metrics_csv())?;
    let meso_rows: Vec<MesoMetricRow> = read_csv(&paths.meso_csv())?;

    let mut change_rows: Vec<PercentChangeRow> = Vec::new();
    let mut meso_names: Vec<&str> = Vec::new();
    let mut by_meso: BTreeMap<&str, Vec<&MesoMetricRow>> = BTreeMap::new();
    for row in &meso_rows {
        if !by_meso.contains_key(row.meso.as_str()) {
            meso_names.push(&row.meso);
        }
        by_meso.entry(&row.meso).or_default().push(row);
    }
    for (meso, series) in &by_meso {
        let metrics_list: [(&str, Box<dyn Fn(&MesoMetricRow) -> Option<f64>>); 4] = [
            ("churn", Box::new(|r| r.churn)),
            ("rel_core_size", Box::new(|r| r.rel_core_size)),
            ("n_cores", Box::new(|r| r.n_cores)),
            ("herfindahl", Box::new(|r| r.herfindahl)),
        ];
        for (metric, value_of) in metrics_list {
            let series_map: BTreeMap<i32, f64> = series
                .iter()
                .filter_map(|r| value_of(r).map(|v| (r.year, v)))
                .collect();
            let (Some((&y0, &v0)), Some((&y1, &v1))) =
                (series_map.iter().next(), series_map.iter().next_back())
            else {
                continue;
            };
            if y0 == y1 {
                continue;
            }
            change_rows.push(PercentChangeRow {
                meso: meso.to_string(),
                metric: metric.to_string(),
                year_start: y0,
                year_end: y1,
                value_start: v0,
                value_end: v1,
                pct_decline: metrics::percent_change(
                    &series_map,
                    y0,
                    y1,
                    ChangeOrientation::Decline,
                ),
                pct_increase: metrics::percent_change(
                    &series_map,
                    y0,
                    y1,
                    ChangeOrientation::Increase,
                ),
            });
        }
    }
    metrics::write_csv(&change_rows, File::create(paths.percent_change_csv())?)?;

    let subfields: BTreeMap<&str, usize> =
        metric_rows.iter().fold(BTreeMap::new(), |mut m, r| {
            *m.entry(r.subfield.as_str()).or_insert(0) += 1;
            m
        });
    let years: Vec<i32> = metric_rows.iter().map(|r| r.year).collect();
    let mut report = String::new();
    report.push_str("Core/periphery analysis report\n==============================\n\n");
    report.push_str(&format!(
        "Cells analyzed: {} across {} subfields, years {}..={}\n",
        metric_rows.len(),
        subfields.len(),
        years.iter().min().copied().unwrap_or_default(),
        years.iter().max().copied().unwrap_or_default(),
    ));
    report.push_str(&format!("Meso fields: {}\n\n", meso_names.join(", ")));
    report.push_str("Percent change (first -> last defined year per meso series)\n");
    report.push_str(&format!(
        "{:<28} {:<15} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}\n",
        "meso", "metric", "y0", "y1", "v0", "v1", "decline%", "increase%"
    ));
    for row in &change_rows {
        report.push_str(&format!(
            "{:<28} {:<15} {:>6} {:>6} {:>10.4} {:>10.4} {:>10} {:>10}\n",
            row.meso,
            row.metric,
            row.year_start,
            row.year_end,
            row.value_start,
            row.value_end,
            row.pct_decline.map_or("".into(), |v| format!("{v:.2}")),
            row.pct_increase.map_or("".into(), |v| format!("{v:.2}")),
        ));
    }
    if paths.regression_csv().exists() {
        report.push_str("\nRegression details: regression_report.txt\n");
    }
    if paths.nullmodel_csv().exists() {
        report.push_str("Null-model z-scores: nullmodel.csv\n");
    }
    fs::write(paths.report_txt(), &report)?;

    ctx.manifest.record_stage(
        &cfg.out_dir,
        "report",
        hash_bytes(cfg.canonical_json().as_bytes()),
        &[paths.metrics_csv(), paths.meso_csv()],
        &[paths.report_txt(), paths.percent_change_csv()],
        Default::default(),
    )
}
