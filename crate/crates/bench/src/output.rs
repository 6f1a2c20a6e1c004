//! CSV emission and parsing of comparison reports, and gnuplot scripts laid
//! out as figure grids (rows: input power, columns: ports or port groups).
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so output is byte-identical for identical input and round-trips
//! exactly.

use crate::config::{Observable, SweepAxis};
use crate::scenario::{
    abscissa_column, discrepancy_metrics, value_columns, ComparisonReport, Discrepancy, Row,
};
use cavsim_core::observables::ModelTag;
use cavsim_core::params::Port;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed report file: {0}")]
    Format(String),
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

fn optional(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn header(obs: Observable) -> Vec<&'static str> {
    let mut h = vec!["sweep_value", "n_in", "g", "model", "port"];
    h.extend(abscissa_column(obs));
    h.extend(value_columns(obs));
    h.extend(["n_max", "error_code"]);
    h
}

fn record(obs: Observable, r: &Row) -> Vec<String> {
    let mut out = vec![
        format_number(r.sweep_value),
        format_number(r.n_in),
        format_number(r.g),
        r.model.as_str().to_string(),
        r.port.label(),
    ];
    if abscissa_column(obs).is_some() {
        out.push(optional(r.abscissa));
    }
    let width = value_columns(obs).len();
    out.extend((0..width).map(|k| optional(r.values.get(k).copied().flatten())));
    out.push(r.n_max.map(|n| n.to_string()).unwrap_or_default());
    out.push(r.error.clone().unwrap_or_else(|| "ok".to_string()));
    out
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    let written = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if written.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(written?)
}

/// CSV text of a report.
pub fn csv_string(report: &ComparisonReport) -> Result<String, OutputError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(report.observable))?;
    for r in &report.rows {
        w.write_record(record(report.observable, r))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| OutputError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| OutputError::Format(e.to_string()))
}

/// Write the report as CSV via a temporary file and a rename.
pub fn emit_csv(report: &ComparisonReport, path: &Path) -> Result<(), OutputError> {
    write_atomically(path, csv_string(report)?.as_bytes())
}

/// Rows read back from a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub observable: Observable,
    pub rows: Vec<Row>,
}

impl CsvTable {
    pub fn models(&self) -> Vec<ModelTag> {
        let mut out: Vec<ModelTag> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model) {
                out.push(r.model);
            }
        }
        out
    }

    pub fn metrics(&self) -> Vec<Discrepancy> {
        discrepancy_metrics(self.observable, &self.models(), &self.rows)
    }
}

fn parse_num(s: &str, what: &str) -> Result<f64, OutputError> {
    s.parse()
        .map_err(|_| OutputError::Format(format!("bad {what} `{s}`")))
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>, OutputError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_num(s, what).map(Some)
    }
}

/// Parse a CSV written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<CsvTable, OutputError> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<CsvTable, OutputError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let head: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let observable = [Observable::Flux, Observable::Spectrum, Observable::G2]
        .into_iter()
        .find(|&o| header(o) == head)
        .ok_or_else(|| OutputError::Format("unrecognised header".into()))?;
    let has_x = abscissa_column(observable).is_some();
    let width = value_columns(observable).len();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f: Vec<&str> = rec.iter().collect();
        let mut k = 5;
        let abscissa = if has_x {
            k += 1;
            parse_opt(f[5], "abscissa")?
        } else {
            None
        };
        let values = (0..width)
            .map(|i| parse_opt(f[k + i], "value"))
            .collect::<Result<Vec<_>, _>>()?;
        k += width;
        let n_max = if f[k].is_empty() {
            None
        } else {
            Some(
                f[k].parse()
                    .map_err(|_| OutputError::Format(format!("bad n_max `{}`", f[k])))?,
            )
        };
        let error = match f[k + 1] {
            "ok" => None,
            code => Some(code.to_string()),
        };
        rows.push(Row {
            sweep_value: parse_num(f[0], "sweep value")?,
            n_in: parse_num(f[1], "n_in")?,
            g: parse_num(f[2], "g")?,
            model: ModelTag::parse(f[3])
                .ok_or_else(|| OutputError::Format(format!("bad model `{}`", f[3])))?,
            port: Port::parse(f[4])
                .ok_or_else(|| OutputError::Format(format!("bad port `{}`", f[4])))?,
            abscissa,
            values,
            n_max,
            error,
        });
    }
    Ok(CsvTable { observable, rows })
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.iter().any(|u| u.to_bits() == v.to_bits()) {
            out.push(v);
        }
    }
    out
}

fn style(model: ModelTag) -> &'static str {
    match model {
        ModelTag::Analytic => "lines lw 2 lc rgb '#1f4e9c'",
        ModelTag::Reduced => "lines dt 2 lw 2 lc rgb '#2a9d3a'",
        ModelTag::Full => "lines dt 3 lw 2 lc rgb '#c0392b'",
    }
}

fn port_title(port: Port, obs: Observable) -> String {
    match (obs, port) {
        (Observable::Flux, Port::Cavity(0)) => "reflected (cc1)".to_string(),
        (Observable::Flux, Port::Cavity(1)) => "transmitted (cc2)".to_string(),
        (Observable::Flux, Port::Atom(l)) => format!("emitted (ac{})", l + 1),
        _ => port.label(),
    }
}

/// Gnuplot script text for a report stored at `csv_path`.
pub fn plot_script(report: &ComparisonReport, csv_path: &Path) -> String {
    let obs = report.observable;
    let file = csv_path.display().to_string().replace('\'', "''");
    let mut powers = distinct(report.rows.iter().map(|r| r.n_in));
    powers.sort_by(|a, b| b.total_cmp(a));
    let couplings = distinct(report.rows.iter().map(|r| r.g));
    let ports: Vec<Port> = if report.ports.is_empty() {
        let mut p: Vec<Port> = Vec::new();
        for r in &report.rows {
            if !p.contains(&r.port) {
                p.push(r.port);
            }
        }
        p
    } else {
        report.ports.clone()
    };
    // each column is a set of ports plotted together
    let groups: Vec<(String, Vec<Port>)> = match obs {
        Observable::Flux => ports
            .iter()
            .map(|&p| (port_title(p, obs), vec![p]))
            .collect(),
        _ => {
            let cc: Vec<Port> = ports
                .iter()
                .copied()
                .filter(|p| matches!(p, Port::Cavity(_)))
                .collect();
            let ac: Vec<Port> = ports
                .iter()
                .copied()
                .filter(|p| matches!(p, Port::Atom(_)))
                .collect();
            [("CC ports".to_string(), cc), ("AC ports".to_string(), ac)]
                .into_iter()
                .filter(|(_, v)| !v.is_empty())
                .collect()
        }
    };
    let columns: Vec<(f64, &(String, Vec<Port>))> = couplings
        .iter()
        .flat_map(|&g| groups.iter().map(move |grp| (g, grp)))
        .collect();
    let x_col = if abscissa_column(obs).is_some() { 6 } else { 1 };
    let first_value = x_col.max(5) + 1;
    let (y_expr, y_label) = match obs {
        Observable::Flux => (
            format!("(column({})/column({}))", first_value + 2, first_value + 5),
            "flux / phi_in",
        ),
        Observable::Spectrum => (
            format!("(column({first_value}))"),
            "incoherent spectral density",
        ),
        Observable::G2 => (format!("(column({first_value}))"), "g2(tau)"),
    };
    let x_label = match (obs, report.axis) {
        (Observable::Spectrum, _) => "(omega - omega_las) / kappa",
        (Observable::G2, _) => "kappa tau",
        (_, SweepAxis::LaserDetuning) => "laser detuning / kappa",
        (_, SweepAxis::InputPower) => "N_in",
        (_, SweepAxis::CouplingG) => "g / kappa",
    };

    let mut s = String::new();
    let _ = writeln!(s, "# {} comparison, data in {}", obs.as_str(), file);
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(
        s,
        "set terminal pngcairo size {},{}",
        420 * columns.len().max(1),
        300 * powers.len().max(1)
    );
    let _ = writeln!(s, "set output '{}.png'", file.trim_end_matches(".csv"));
    let _ = writeln!(s, "set key top right font ',8'");
    let _ = writeln!(s, "set xlabel '{x_label}'");
    let _ = writeln!(s, "set ylabel '{y_label}'");
    if obs == Observable::Flux && report.axis == SweepAxis::InputPower {
        let _ = writeln!(s, "set logscale x");
    }
    let _ = writeln!(
        s,
        "set multiplot layout {},{}",
        powers.len().max(1),
        columns.len().max(1)
    );
    for &n in &powers {
        for (g, (title, group)) in &columns {
            let _ = writeln!(
                s,
                "set title 'N_in = {}, g = {}, {}'",
                format_number(n),
                format_number(*g),
                title
            );
            let mut curves = Vec::new();
            for &m in &report.models {
                for p in group {
                    let filter = format!(
                        "(strcol(2) eq '{}' && strcol(3) eq '{}' && strcol(4) eq '{}' && strcol(5) eq '{}' ? {} : NaN)",
                        format_number(n),
                        format_number(*g),
                        m.as_str(),
                        p.label(),
                        y_expr
                    );
                    curves.push(format!(
                        "'{}' using {}:{} skip 1 with {} title '{} {}'",
                        file,
                        x_col,
                        filter,
                        style(m),
                        m.as_str(),
                        p.label()
                    ));
                }
            }
            let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        }
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

/// Write a gnuplot script that reads the CSV at `csv_path`.
pub fn emit_plot_script(
    report: &ComparisonReport,
    csv_path: &Path,
    path: &Path,
) -> Result<(), OutputError> {
    write_atomically(path, plot_script(report, csv_path).as_bytes())
}

/// Plain-text table of discrepancy metrics.
pub fn metrics_table(metrics: &[Discrepancy]) -> String {
    let mut s = String::from(
        "model     reference port  n_in         g        points  max_abs      max_rel      l2\n",
    );
    for m in metrics {
        let _ = writeln!(
            s,
            "{:<9} {:<9} {:<5} {:<12} {:<8} {:<7} {:<12.4e} {:<12.4e} {:.4e}",
            m.model.as_str(),
            m.reference.as_str(),
            m.port.label(),
            format_number(m.n_in),
            format_number(m.g),
            m.compared,
            m.max_abs,
            m.max_rel,
            m.l2
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: ModelTag, v: f64) -> Row {
        Row {
            sweep_value: -0.5,
            n_in: 1e-4,
            g: 0.125,
            model,
            port: Port::Cavity(0),
            abscissa: Some(0.1 + 0.2),
            values: vec![Some(v), None],
            n_max: if model == ModelTag::Full {
                Some(7)
            } else {
                None
            },
            error: None,
        }
    }

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.1 + 0.2,
            1e-300,
            -0.0,
            6.02e23,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            123456789.0,
        ] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn header_only_for_empty_report() {
        let r = ComparisonReport::empty(Observable::Flux, SweepAxis::LaserDetuning);
        let text = csv_string(&r).unwrap();
        assert_eq!(text, "sweep_value,n_in,g,model,port,coherent,incoherent,total,amplitude_re,amplitude_im,phi_in,n_max,error_code\n");
        let t = parse_csv(&text).unwrap();
        assert!(t.rows.is_empty());
    }

    #[test]
    fn rows_round_trip() {
        let mut r = ComparisonReport::empty(Observable::Spectrum, SweepAxis::InputPower);
        r.models = vec![ModelTag::Analytic, ModelTag::Full];
        r.rows = vec![
            row(ModelTag::Analytic, 0.7 / 3.0),
            row(ModelTag::Full, 2.0 / 9.0),
        ];
        r.rows[1].error = Some("no_convergence".into());
        let t = parse_csv(&csv_string(&r).unwrap()).unwrap();
        assert_eq!(t.observable, Observable::Spectrum);
        assert_eq!(t.rows, r.rows);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = std::env::temp_dir().join(format!("cavsim-out-{}", std::process::id()));
        let path = dir.join("sub").join("r.csv");
        let r = ComparisonReport::empty(Observable::G2, SweepAxis::InputPower);
        emit_csv(&r, &path).unwrap();
        let names: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("r.csv")]);
        fs::remove_dir_all(&dir).unwrap();
    }
}
