//! Seeded parameter sweeps and the comparison tables they feed.

use std::collections::BTreeMap;

use crate::analysis::{compare, Report};
use crate::harness::config::RunConfig;
use crate::harness::runner::{run, HarnessError};

/// One sweep dimension: a config key and the values to try.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// One run inside a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Axis settings applied for this run, in axis order.
    pub settings: Vec<(String, String)>,
    pub seed: u64,
    pub report: Report,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

impl SweepOutcome {
    fn setting_label(settings: &[(String, String)]) -> String {
        if settings.is_empty() {
            "(base config)".to_string()
        } else {
            settings
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        }
    }

    /// Per-setting aggregate tables (mean +/- stddev over seeds), plus a
    /// latency-gain table whenever both protocols appear in the sweep.
    pub fn render_tables(&self) -> String {
        let mut by_setting: BTreeMap<String, Vec<&SweepRow>> = BTreeMap::new();
        for row in &self.rows {
            by_setting
                .entry(Self::setting_label(&row.settings))
                .or_default()
                .push(row);
        }
        let mut out = String::new();
        out.push_str("setting | runs | latency_ms (mean+/-sd) | rate | delivery | convergence_samples | censored\n");
        for (label, rows) in &by_setting {
            let latencies: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.report.latency_ms.map(|v| v as f64))
                .collect();
            let rates: Vec<f64> = rows.iter().map(|r| r.report.rate).collect();
            let delivery: Vec<f64> = rows.iter().map(|r| r.report.delivery_ratio).collect();
            let conv: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.report.convergence_samples.map(|v| v as f64))
                .collect();
            let censored = rows.iter().filter(|r| r.report.censored).count();
            let (lm, ls) = mean_std(&latencies);
            let (rm, rs) = mean_std(&rates);
            let (dm, ds) = mean_std(&delivery);
            let (cm, cs) = mean_std(&conv);
            out.push_str(&format!(
                "{label} | {} | {lm:.0}+/-{ls:.0} | {rm:.3}+/-{rs:.3} | {dm:.3}+/-{ds:.3} | {cm:.1}+/-{cs:.1} | {censored}\n",
                rows.len()
            ));
        }

        let gains = self.gain_rows();
        if !gains.is_empty() {
            out.push('\n');
            out.push_str("gain table (harvest vs straw)\n");
            out.push_str("setting | seeds | latency_gain (mean+/-sd)\n");
            let mut by_label: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (label, _seed, gain) in gains {
                by_label.entry(label).or_default().push(gain);
            }
            for (label, gains) in by_label {
                let (gm, gs) = mean_std(&gains);
                out.push_str(&format!("{label} | {} | {gm:.4}+/-{gs:.4}\n", gains.len()));
            }
        }
        out
    }

    /// Latency gains for every (setting, seed) pair covered by both
    /// protocols.
    pub fn gain_rows(&self) -> Vec<(String, u64, f64)> {
        let mut harvest: BTreeMap<(String, u64), &Report> = BTreeMap::new();
        let mut straw: BTreeMap<(String, u64), &Report> = BTreeMap::new();
        for row in &self.rows {
            let label: Vec<(String, String)> = row
                .settings
                .iter()
                .filter(|(k, _)| k != "protocol")
                .cloned()
                .collect();
            let key = (Self::setting_label(&label), row.seed);
            match row.report.protocol.as_str() {
                "harvest" => {
                    harvest.insert(key, &row.report);
                }
                "straw" => {
                    straw.insert(key, &row.report);
                }
                _ => {}
            }
        }
        let mut gains = Vec::new();
        for (key, h) in &harvest {
            if let Some(s) = straw.get(key) {
                if let Ok(summary) = compare(h, s) {
                    gains.push((key.0.clone(), key.1, summary.latency_gain));
                }
            }
        }
        gains
    }

    /// Flat CSV of all rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "setting,seed,protocol,latency_ms,rate,per_packet_ms,delivery_ratio,convergence_samples,data_tx,cmd_tx,sessions,censored\n",
        );
        for row in &self.rows {
            let r = &row.report;
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.3},{:.6},{},{},{},{},{}\n",
                Self::setting_label(&row.settings),
                row.seed,
                r.protocol,
                r.latency_ms.map(|v| v.to_string()).unwrap_or_default(),
                r.rate,
                r.per_packet_ms,
                r.delivery_ratio,
                r.convergence_samples.map(|v| v.to_string()).unwrap_or_default(),
                r.data_tx,
                r.cmd_tx,
                r.sessions,
                r.censored,
            ));
        }
        out
    }
}

/// Run the cross-product of `axes` values, each repeated for `seeds`
/// consecutive seeds starting at the base config's seed. Any failing run
/// aborts the sweep with the offending config echoed.
pub fn sweep(
    base: &RunConfig,
    axes: &[SweepAxis],
    seeds: u64,
) -> Result<SweepOutcome, HarnessError> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::new();
        for combo in &combos {
            for value in &axis.values {
                let mut c = combo.clone();
                c.push((axis.key.clone(), value.clone()));
                next.push(c);
            }
        }
        combos = next;
    }

    let mut rows = Vec::new();
    for combo in &combos {
        for seed_offset in 0..seeds.max(1) {
            let mut cfg = base.clone();
            for (key, value) in combo {
                cfg.set_field(key, value).map_err(|e| HarnessError::SweepRun {
                    config: base.render(),
                    cause: e.to_string(),
                })?;
            }
            cfg.seed = base.seed + seed_offset;
            let output = run(&cfg).map_err(|e| HarnessError::SweepRun {
                config: cfg.render(),
                cause: e.to_string(),
            })?;
            rows.push(SweepRow {
                settings: combo.clone(),
                seed: cfg.seed,
                report: output.report,
            });
        }
    }
    rows.sort_by(|a, b| (&a.settings, a.seed).cmp(&(&b.settings, b.seed)));
    Ok(SweepOutcome { rows })
}
