//! CSV input and output.
//!
//! Three data layouts, one per observation shape:
//! - scalar: a single `y` column;
//! - replicated: long format `subject,x1..xd,y`, rows grouped by subject
//!   with a constant replicate count;
//! - series: wide format `y1..yT`, optionally followed by a 0/1 `truth`
//!   column.
//!
//! Malformed input reports the offending line number.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fdr::{TestDecision, TestMetrics};
use crate::inference::FitResult;
use crate::kernel::Observation;
use crate::sim::StudyReport;

fn csv_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Csv {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| csv_err(line, format!("'{field}' is not a number")))
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

/// Read the scalar layout: one `y` column.
pub fn read_scalar_csv(path: &Path) -> Result<Vec<Observation>> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let y_idx = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| csv_err(1, "missing 'y' column"))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        let field = rec.get(y_idx).ok_or_else(|| csv_err(line, "short row"))?;
        out.push(Observation::Scalar(parse_f64(field, line)?));
    }
    if out.is_empty() {
        return Err(csv_err(2, "no data rows"));
    }
    Ok(out)
}

/// Read the replicated layout: `subject,x1..xd,y` with constant replicate
/// counts per subject.
pub fn read_replicated_csv(path: &Path, xdim: usize) -> Result<Vec<Observation>> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let mut expected = vec!["subject".to_string()];
    for k in 1..=xdim {
        expected.push(format!("x{k}"));
    }
    expected.push("y".to_string());
    let actual: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if actual != expected {
        return Err(csv_err(
            1,
            format!("expected header {}, found {}", expected.join(","), actual.join(",")),
        ));
    }

    // Collect rows grouped by consecutive subject label.
    let mut groups: Vec<(String, Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        if rec.len() != xdim + 2 {
            return Err(csv_err(line, format!("expected {} fields", xdim + 2)));
        }
        let subject = rec.get(0).unwrap().to_string();
        let mut x = Vec::with_capacity(xdim);
        for k in 0..xdim {
            x.push(parse_f64(rec.get(k + 1).unwrap(), line)?);
        }
        let y = parse_f64(rec.get(xdim + 1).unwrap(), line)?;
        match groups.last_mut() {
            Some((s, xs, ys)) if *s == subject => {
                xs.push(x);
                ys.push(y);
            }
            _ => groups.push((subject, vec![x], vec![y])),
        }
    }
    if groups.is_empty() {
        return Err(csv_err(2, "no data rows"));
    }
    let r = groups[0].1.len();
    let mut out = Vec::with_capacity(groups.len());
    for (subject, xs, ys) in &groups {
        if xs.len() != r {
            return Err(Error::argument(format!(
                "subject '{subject}' has {} replicates; expected {r}",
                xs.len()
            )));
        }
        let rows: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        out.push(Observation::replicated(&rows, ys)?);
    }
    Ok(out)
}

/// Read the series layout: `y1..yT` wide, optional trailing `truth`.
/// Returns the series and the truth labels when the column is present.
pub fn read_series_csv(path: &Path) -> Result<(Vec<Observation>, Option<Vec<bool>>)> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_truth = names.last() == Some(&"truth");
    let t = names.len() - usize::from(has_truth);
    for (k, name) in names.iter().take(t).enumerate() {
        let want = format!("y{}", k + 1);
        if *name != want {
            return Err(csv_err(1, format!("expected column '{want}', found '{name}'")));
        }
    }
    if t < 2 {
        return Err(csv_err(1, "series layout needs at least columns y1,y2"));
    }
    let mut data = Vec::new();
    let mut truths = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        if rec.len() != names.len() {
            return Err(csv_err(line, format!("expected {} fields", names.len())));
        }
        let mut y = Vec::with_capacity(t);
        for k in 0..t {
            y.push(parse_f64(rec.get(k).unwrap(), line)?);
        }
        data.push(Observation::series(y)?);
        if has_truth {
            let v = parse_f64(rec.get(t).unwrap(), line)?;
            truths.push(v != 0.0);
        }
    }
    if data.is_empty() {
        return Err(csv_err(2, "no data rows"));
    }
    Ok((data, has_truth.then_some(truths)))
}

/// Write observations back out in the layout matching their shape.
pub fn write_observations_csv(
    path: &Path,
    data: &[Observation],
    truths: Option<&[bool]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match data.first() {
        Some(Observation::Scalar(_)) => {
            w.write_record(["y"])?;
            for obs in data {
                if let Observation::Scalar(y) = obs {
                    w.write_record([format!("{y}")])?;
                }
            }
        }
        Some(Observation::Replicated { xdim, .. }) => {
            let mut header = vec!["subject".to_string()];
            for k in 1..=*xdim {
                header.push(format!("x{k}"));
            }
            header.push("y".to_string());
            w.write_record(&header)?;
            for (i, obs) in data.iter().enumerate() {
                if let Observation::Replicated { x, xdim, y } = obs {
                    for (j, yy) in y.iter().enumerate() {
                        let mut rec = vec![format!("{}", i + 1)];
                        for k in 0..*xdim {
                            rec.push(format!("{}", x[j * xdim + k]));
                        }
                        rec.push(format!("{yy}"));
                        w.write_record(&rec)?;
                    }
                }
            }
        }
        Some(Observation::Series(y0)) => {
            let mut header: Vec<String> = (1..=y0.len()).map(|k| format!("y{k}")).collect();
            if truths.is_some() {
                header.push("truth".to_string());
            }
            w.write_record(&header)?;
            for (i, obs) in data.iter().enumerate() {
                if let Observation::Series(y) = obs {
                    let mut rec: Vec<String> = y.iter().map(|v| format!("{v}")).collect();
                    if let Some(t) = truths {
                        rec.push(if t[i] { "1".into() } else { "0".into() });
                    }
                    w.write_record(&rec)?;
                }
            }
        }
        None => return Err(Error::argument("nothing to write")),
    }
    w.flush()?;
    Ok(())
}

/// Fit report: one row per theta component plus scalar diagnostics.
pub fn write_fit_report(path: &Path, fit: &FitResult) -> Result<()> {
    let mut out = String::new();
    out.push_str("component,estimate,ci_lo,ci_hi,ci_valid\n");
    for (j, (v, ci)) in fit
        .theta_hat
        .values()
        .iter()
        .zip(&fit.intervals)
        .enumerate()
    {
        out.push_str(&format!(
            "{},{v},{},{},{}\n",
            j + 1,
            ci.lo,
            ci.hi,
            ci.valid
        ));
    }
    out.push_str(&format!(
        "# objective={} loglik={} converged={} boundary={} pd_warning={} iterations={}\n",
        fit.objective, fit.loglik_at_max, fit.converged, fit.boundary, fit.pd_warning, fit.iterations
    ));
    std::fs::write(path, out)?;
    Ok(())
}

/// Likelihood-curve rows: scalar theta, both log likelihoods, and columns
/// normalized to integrate to 1 over the theta grid (trapezoid rule).
pub fn write_curve_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let norm = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
        let max = rows.iter().map(|r| pick(r)).fold(f64::NEG_INFINITY, f64::max);
        let vals: Vec<f64> = rows.iter().map(|r| (pick(r) - max).exp()).collect();
        let mut total = 0.0;
        for i in 1..rows.len() {
            let h = rows[i].0 - rows[i - 1].0;
            total += 0.5 * h * (vals[i] + vals[i - 1]);
        }
        vals.iter().map(|v| v / total).collect()
    };
    let n_prml = norm(&|r| r.1);
    let n_prof = norm(&|r| r.2);
    let mut out = String::new();
    out.push_str("theta,loglik_prml,loglik_profile,norm_prml,norm_profile\n");
    for (i, (t, lp, lf)) in rows.iter().enumerate() {
        out.push_str(&format!("{t},{lp},{lf},{},{}\n", n_prml[i], n_prof[i]));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Decision rows plus a trailing metrics summary when truths were known.
pub fn write_decisions_csv(
    path: &Path,
    decisions: &[TestDecision],
    metrics: Option<&TestMetrics>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("index,lfdr,flagged,truth\n");
    for d in decisions {
        let truth = match d.truth {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        out.push_str(&format!("{},{},{},{truth}\n", d.index + 1, d.lfdr, u8::from(d.flagged)));
    }
    if let Some(m) = metrics {
        out.push_str(&format!(
            "# fdr={} mp={} discoveries={} false_discoveries={} missed={}\n",
            m.fdr, m.mp, m.discoveries, m.false_discoveries, m.missed
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Study rows as CSV and a short aggregate summary as text.
pub fn write_study_report(dir: &Path, report: &StudyReport) -> Result<()> {
    let d = report.truth.len();
    let mut rows = String::new();
    let mut header = vec!["rep".to_string()];
    for j in 1..=d {
        header.push(format!("estimate{j}"));
        header.push(format!("covered{j}"));
    }
    header.extend([
        "converged".into(),
        "boundary".into(),
        "fdr".into(),
        "mp".into(),
        "oracle_fdr".into(),
        "oracle_mp".into(),
    ]);
    rows.push_str(&header.join(","));
    rows.push('\n');
    for r in &report.rows {
        let mut rec = vec![format!("{}", r.rep)];
        for j in 0..d {
            rec.push(format!("{}", r.estimate[j]));
            rec.push(format!("{}", u8::from(r.covered[j])));
        }
        rec.push(format!("{}", u8::from(r.converged)));
        rec.push(format!("{}", u8::from(r.boundary)));
        match &r.test {
            Some((p, o)) => rec.extend([
                format!("{}", p.fdr),
                format!("{}", p.mp),
                format!("{}", o.fdr),
                format!("{}", o.mp),
            ]),
            None => rec.extend(["".into(), "".into(), "".into(), "".into()]),
        }
        rows.push_str(&rec.join(","));
        rows.push('\n');
    }
    std::fs::write(dir.join("replications.csv"), rows)?;

    let mut f = std::fs::File::create(dir.join("summary.txt"))?;
    writeln!(f, "replications: {}", report.len())?;
    writeln!(f, "failures: {}", report.failures.len())?;
    for j in 0..d {
        writeln!(
            f,
            "component {}: truth {} mean {:.6} sd {:.6} rmse {:.6} coverage {:.1}%",
            j + 1,
            report.truth[j],
            report.mean(j),
            report.sd(j),
            report.rmse(j),
            report.coverage(j)
        )?;
    }
    if let Some(((fdr, mp), (ofdr, omp))) = report.mean_test_rates() {
        writeln!(f, "plug-in: fdr {fdr:.4} mp {mp:.4}")?;
        writeln!(f, "oracle:  fdr {ofdr:.4} mp {omp:.4}")?;
    }
    writeln!(f, "elapsed: {:.1}s", report.elapsed_secs)?;
    Ok(())
}
