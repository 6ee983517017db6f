use std::fmt::Write as _;
use std::io;

use super::{StudyRow, TreatmentType};
use crate::error::Result;

pub const CSV_HEADER: &str = "scenario_id,n_queries,n_advertisers,quota_frac,mu0,mu1,v,p_x,treatment_type,scheme,throttle_mode,convention,n_outer,n_inner,tau_star,tau_star_se,mean_est,bias,rel_bias,rel_bias_se,variance,var_ratio,seed";

/// Write rows with a header line. Missing values are empty fields.
pub fn write_csv<W: io::Write>(rows: &[StudyRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(reader: R) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(crate::error::invalid_input(format!(
            "unexpected CSV header; expected `{CSV_HEADER}`"
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<Vec<StudyRow>, _>>()?)
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn with_se(value: Option<f64>, se: Option<f64>) -> String {
    match (value, se) {
        (Some(v), Some(s)) => format!("{v:+.3} ± {:.3}", 2.0 * s),
        (Some(v), None) => format!("{v:+.3}"),
        _ => "n/a".to_owned(),
    }
}

/// Text tables, one block per (treatment, size, scheme, throttle mode,
/// convention): rows are quota fractions, columns are the treatment mean
/// (bid treatments) or the covariate rate (quota treatments).
pub fn render_report(rows: &[StudyRow]) -> String {
    let mut groups: Vec<(TreatmentType, usize, &str, String, String)> = Vec::new();
    for r in rows {
        let key = (r.treatment_type, r.n_queries, r.scheme.as_str(), r.throttle_mode.to_string(), r.convention.to_string());
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut out = String::new();
    for (treatment, nq, scheme, mode, conv) in groups {
        let members: Vec<&StudyRow> = rows
            .iter()
            .filter(|r| {
                r.treatment_type == treatment
                    && r.n_queries == nq
                    && r.scheme == scheme
                    && r.throttle_mode.to_string() == mode
                    && r.convention.to_string() == conv
            })
            .collect();
        let column = |r: &StudyRow| match treatment {
            TreatmentType::Bid => r.mu1,
            TreatmentType::Quota => r.p_x.unwrap_or(f64::NAN),
        };
        let cols = distinct(members.iter().map(|r| column(r)));
        let quotas = distinct(members.iter().map(|r| r.quota_frac));
        let col_name = if treatment == TreatmentType::Bid { "mu1" } else { "p_x" };
        let _ = writeln!(out, "== {treatment} treatment | n_queries={nq} | scheme={scheme} | throttle={mode} | {conv} ==");

        let mut table = |title: &str, cell: &dyn Fn(&StudyRow) -> String| {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:<12}", format!("quota\\{col_name}"));
            for c in &cols {
                let _ = write!(out, "{:>20}", format!("{c}"));
            }
            out.push('\n');
            for q in &quotas {
                let _ = write!(out, "{:<12}", format!("{q:.3}"));
                for c in &cols {
                    let text = members
                        .iter()
                        .find(|r| r.quota_frac == *q && column(r) == *c)
                        .map(|r| cell(r))
                        .unwrap_or_else(|| "-".to_owned());
                    let _ = write!(out, "{text:>20}");
                }
                out.push('\n');
            }
        };
        table("relative bias (± 2 SE)", &|r| with_se(r.rel_bias, r.rel_bias_se));
        if scheme != "query_balanced" && members.iter().any(|r| r.var_ratio.is_some()) {
            table("variance ratio vs query_balanced", &|r| {
                r.var_ratio.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".to_owned())
            });
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::WeightingConvention;
    use crate::throttle::QuotaMode;

    fn row(scheme: &str, mu1: f64, var_ratio: Option<f64>) -> StudyRow {
        StudyRow {
            scenario_id: 0,
            n_queries: 90,
            n_advertisers: 3,
            quota_frac: 1.0 / 3.0,
            mu0: 1.0,
            mu1,
            v: 0.1,
            p_x: None,
            treatment_type: TreatmentType::Bid,
            scheme: scheme.to_owned(),
            throttle_mode: QuotaMode::Joint,
            convention: WeightingConvention::HorvitzThompson,
            n_outer: 200,
            n_inner: 10,
            tau_star: 1.5,
            tau_star_se: 0.01,
            mean_est: 2.0,
            bias: 0.5,
            rel_bias: Some(0.25),
            rel_bias_se: Some(0.02),
            variance: Some(3.0),
            var_ratio,
            seed: 7,
            runtime_secs: 1.0,
        }
    }

    #[test]
    fn csv_round_trip_keeps_header_and_values() {
        let rows = vec![row("query_balanced", 1.05, Some(1.0)), row("pair_balanced", 1.05, None)];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].var_ratio, None);
        assert_eq!(back[0].tau_star, rows[0].tau_star);
        assert_eq!(back[0].scheme, "query_balanced");
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn report_lays_out_quota_rows_and_mean_columns() {
        let rows = vec![row("pair_balanced", 1.05, Some(4.0)), row("pair_balanced", 2.0, Some(2.0))];
        let text = render_report(&rows);
        assert!(text.contains("quota\\mu1"));
        assert!(text.contains("+0.250 ± 0.040"));
        assert!(text.contains("4.000"));
        assert!(text.lines().any(|l| l.starts_with("0.333")));
    }
}
