//! Gnuplot scripts for the tables of a report directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{LabError, Result};

fn preamble(stem: &str, title: &str) -> String {
    format!(
        "set terminal pngcairo size 900,600\nset output '{stem}.png'\nset datafile separator ','\n\
         set key autotitle columnhead\nset title '{title}'\nset grid\n"
    )
}

/// Least-squares slope of `log y` against `log x` over rows with both positive.
fn loglog_slope(path: &Path, x_col: &str, y_col: &str) -> Result<Option<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabError::Config(format!("{}: no column {name}", path.display())))
    };
    let (xi, yi) = (col(x_col)?, col(y_col)?);
    let mut pts = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
        if let (Some(x), Some(y)) = (parse(xi), parse(yi)) {
            if x > 0.0 && y > 0.0 {
                pts.push((x.ln(), y.ln()));
            }
        }
    }
    if pts.len() < 2 {
        return Ok(None);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok((sxx > 0.0).then(|| sxy / sxx))
}

fn trace_script(stem: &str, table: &str, title: &str) -> String {
    let mut s = preamble(stem, title);
    s.push_str("set logscale y\nset xlabel 'k'\nset ylabel 'E_k'\nset key off\n");
    let _ = writeln!(
        s,
        "plot '{table}' using 2:($5 > 0 ? $5 : NaN):1 with linespoints lc variable pt 7"
    );
    s
}

/// Writes one script per recognized table and returns their paths.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| LabError::NothingToPlot(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut scripts = Vec::new();
    for table in &names {
        let stem = table.trim_end_matches(".csv");
        let out = script_stem(stem);
        let script = match stem {
            "traces" => trace_script(&out, table, "De Giorgi energies E_k"),
            "amplified_traces" => trace_script(&out, table, "Amplified energies E_k"),
            s if s.starts_with("scan_k") => {
                let slope = loglog_slope(&dir.join(table), "R", "energy")?;
                let mut s = preamble(&out, &format!("Energy scan, {stem}"));
                s.push_str("set logscale xy\nset xlabel 'R'\nset ylabel 'energy'\n");
                if let Some(k) = slope {
                    let _ = writeln!(s, "set label 1 sprintf('fitted slope = %.4f', {k}) at graph 0.05, 0.9");
                }
                let _ = writeln!(s, "plot '{table}' using 1:($3 > 0 ? $3 : NaN) with linespoints pt 7");
                s
            }
            "reports" => {
                let mut s = preamble(&out, "Estimate ratio against resolution");
                s.push_str("set xlabel 'm'\nset ylabel 'ratio'\nset logscale x 2\n");
                let _ = writeln!(s, "plot '{table}' using 2:7 with points pt 7");
                s
            }
            "solve" => {
                let mut s = preamble(&out, "Max-norm error against resolution");
                s.push_str("set logscale xy\nset xlabel 'm'\nset ylabel 'max error'\n");
                if let Some(k) = loglog_slope(&dir.join(table), "m", "max_error")? {
                    let _ = writeln!(s, "set label 1 sprintf('fitted slope = %.4f', {k}) at graph 0.05, 0.9");
                }
                let _ = writeln!(s, "plot '{table}' using 2:($6 > 0 ? $6 : NaN) with linespoints pt 7");
                s
            }
            "growth" => {
                let mut s = preamble(&out, "Tail growth slope against claimed gamma");
                s.push_str("set xlabel 'gamma'\nset ylabel 'tail slope'\n");
                let _ = writeln!(s, "plot '{table}' using 1:2 with linespoints pt 7, x title 'gamma'");
                s
            }
            "blowup" => {
                let mut s = preamble(&out, "Blow-up sequence");
                s.push_str("set logscale y\nset xlabel 'step'\n");
                let _ = writeln!(
                    s,
                    "plot '{table}' using 1:4 with linespoints pt 7, '' using 1:5 with linespoints pt 5"
                );
                s
            }
            "approximation" => {
                let mut s = preamble(&out, "H1 error against mollification radius");
                s.push_str("set logscale xy\nset xlabel 'epsilon'\nset ylabel 'H1 error'\n");
                let _ = writeln!(s, "plot '{table}' using 1:2 with linespoints pt 7");
                s
            }
            "holder_exponent" => {
                let mut s = preamble(&out, "Measured Hölder exponent at the origin");
                s.push_str("set logscale x 2\nset xlabel 'm'\n");
                let _ = writeln!(s, "plot '{table}' using 1:2 with linespoints pt 7, '' using 1:3 with lines");
                s
            }
            _ => continue,
        };
        let path = dir.join(format!("{out}.gp"));
        fs::write(&path, script)?;
        scripts.push(path);
    }
    if scripts.is_empty() {
        return Err(LabError::NothingToPlot(dir.display().to_string()));
    }
    Ok(scripts)
}

fn script_stem(table_stem: &str) -> String {
    match table_stem {
        "traces" => "degiorgi_traces".into(),
        "amplified_traces" => "degiorgi_amplified".into(),
        "reports" => "ratios".into(),
        "solve" => "solve_error".into(),
        "growth" => "liouville_growth".into(),
        s if s.starts_with("scan_k") => format!("liouville_{s}"),
        s => s.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plots(dir.path()), Err(LabError::NothingToPlot(_))));
        assert!(matches!(emit_plots(&dir.path().join("missing")), Err(LabError::NothingToPlot(_))));
    }

    #[test]
    fn scan_script_carries_slope() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("scan_k1.csv"),
            "R,order,energy,base_energy,window_slope\n1,1,2,1,\n2,1,32,1,4\n4,1,512,1,4\n",
        )
        .unwrap();
        fs::write(dir.path().join("traces.csv"), "instance,k,b_k,r_k,E_k\n0,0,0,0.9,1e-2\n").unwrap();
        let scripts = emit_plots(dir.path()).unwrap();
        assert_eq!(scripts.len(), 2);
        let scan = fs::read_to_string(dir.path().join("liouville_scan_k1.gp")).unwrap();
        assert!(scan.contains("4.0000") || scan.contains("fitted slope = %.4f', 4"), "{scan}");
        assert!(fs::read_to_string(dir.path().join("degiorgi_traces.gp")).unwrap().contains("logscale y"));
    }
}
