//! File formats: panels, edge lists, draws, summaries and trajectories.
//!
//! Site, time and state indices are one-based in every file. Floats are
//! written with 17 significant digits so files round-trip bit-exactly.

pub mod config;
pub mod report;
pub mod svg;

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;
use crate::panel::{Cell, ObservationPanel};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Writes a header and string rows.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::MalformedRow {
            path: path_str(path),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn parse_index(path: &Path, line: usize, field: &str, what: &str) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::MalformedRow {
            path: path_str(path),
            line,
            message: format!("{what} `{field}` is not a positive integer"),
        }),
    }
}

/// Reads a `site,time,y` panel (y in `0`, `1` or `NA`; absent cells are NA).
///
/// Dimensions default to the largest site and time present.
pub fn load_panel(
    path: &Path,
    n_sites: Option<usize>,
    n_times: Option<usize>,
    start_month: u8,
) -> Result<ObservationPanel> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["site", "time", "y"])?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(Error::MalformedRow { path: path_str(path), line, message: "expected 3 fields".into() });
        }
        let site = parse_index(path, line, &rec[0], "site")?;
        let time = parse_index(path, line, &rec[1], "time")?;
        let y = match &rec[2] {
            "0" => Some(false),
            "1" => Some(true),
            "NA" | "" => None,
            other => {
                return Err(Error::MalformedRow {
                    path: path_str(path),
                    line,
                    message: format!("y `{other}` is not 0, 1 or NA"),
                })
            }
        };
        entries.push((line, site - 1, time - 1, y));
    }
    let max_site = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    let max_time = entries.iter().map(|e| e.2 + 1).max().unwrap_or(0);
    let n = n_sites.unwrap_or(max_site);
    let t_count = n_times.unwrap_or(max_time);
    if max_site > n || max_time > t_count {
        return Err(Error::RangeError(format!(
            "{}: panel has site {max_site} and time {max_time}, beyond {n} x {t_count}",
            path_str(path)
        )));
    }
    if n == 0 || t_count == 0 {
        return Err(Error::RangeError(format!("{}: empty panel", path_str(path))));
    }
    let mut cells = vec![Cell::Missing; n * t_count];
    let mut seen = vec![false; n * t_count];
    for (line, i, t, y) in entries {
        let k = i * t_count + t;
        if seen[k] {
            return Err(Error::DuplicateCell { path: path_str(path), line, site: i + 1, time: t + 1 });
        }
        seen[k] = true;
        cells[k] = Cell::from_value(y);
    }
    ObservationPanel::new(n, t_count, cells, start_month)
}

/// Writes every cell of the panel; missing and held-out cells as `NA`.
pub fn write_panel(path: &Path, panel: &ObservationPanel) -> Result<()> {
    let rows = (0..panel.n_sites()).flat_map(|i| {
        (0..panel.n_times()).map(move |t| {
            let y = match panel.y(i, t) {
                Some(true) => "1",
                Some(false) => "0",
                None => "NA",
            };
            vec![(i + 1).to_string(), (t + 1).to_string(), y.to_string()]
        })
    });
    write_table(path, &["site", "time", "y"], rows)
}

/// Reads a `site_a,site_b` edge list.
pub fn load_edges(path: &Path, n_sites: usize) -> Result<NeighborhoodGraph> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["site_a", "site_b"])?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::MalformedRow { path: path_str(path), line, message: "expected 2 fields".into() });
        }
        let a = parse_index(path, line, &rec[0], "site_a")?;
        let b = parse_index(path, line, &rec[1], "site_b")?;
        edges.push((a - 1, b - 1));
    }
    NeighborhoodGraph::new(n_sites, &edges)
}

pub fn write_edges(path: &Path, graph: &NeighborhoodGraph) -> Result<()> {
    let rows = graph.edges().iter().map(|&(a, b)| vec![(a + 1).to_string(), (b + 1).to_string()]);
    write_table(path, &["site_a", "site_b"], rows)
}

/// One row of a draws file.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRow {
    pub chain: usize,
    pub draw: usize,
    pub lp: f64,
    pub values: Vec<f64>,
}

/// Writes `chain,draw,lp,<names...>` rows.
pub fn write_draws(path: &Path, names: &[String], rows: &[DrawRow]) -> Result<()> {
    let mut header: Vec<&str> = vec!["chain", "draw", "lp"];
    header.extend(names.iter().map(String::as_str));
    let body = rows.iter().map(|r| {
        [(r.chain + 1).to_string(), (r.draw + 1).to_string(), fmt_f64(r.lp)]
            .into_iter()
            .chain(r.values.iter().map(|v| fmt_f64(*v)))
    });
    write_table(path, &header, body)
}

/// Reads a draws file, returning the parameter names and rows.
pub fn read_draws(path: &Path) -> Result<(Vec<String>, Vec<DrawRow>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 3 || &header[0] != "chain" || &header[1] != "draw" || &header[2] != "lp" {
        return Err(Error::MalformedRow { path: path_str(path), line: 1, message: "expected chain,draw,lp,...".into() });
    }
    let names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |m: String| Error::MalformedRow { path: path_str(path), line, message: m };
        if rec.len() != header.len() {
            return Err(bad(format!("expected {} fields, got {}", header.len(), rec.len())));
        }
        let chain = parse_index(path, line, &rec[0], "chain")? - 1;
        let draw = parse_index(path, line, &rec[1], "draw")? - 1;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
        let lp = parse(&rec[2])?;
        let values = rec.iter().skip(3).map(parse).collect::<Result<Vec<f64>>>()?;
        rows.push(DrawRow { chain, draw, lp, values });
    }
    Ok((names, rows))
}

/// Writes a `param,value` file.
pub fn write_named(path: &Path, values: &[(String, f64)]) -> Result<()> {
    write_table(path, &["param", "value"], values.iter().map(|(k, v)| vec![k.clone(), fmt_f64(*v)]))
}

pub fn read_named(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["param", "value"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v = rec[1].parse::<f64>().map_err(|_| Error::MalformedRow {
            path: path_str(path),
            line,
            message: format!("`{}` is not a number", &rec[1]),
        })?;
        out.push((rec[0].to_string(), v));
    }
    Ok(out)
}

/// Writes one-based state sequences, one row per trajectory, one column per time.
pub fn write_trajectories(path: &Path, n_times: usize, rows: &[Vec<usize>]) -> Result<()> {
    let header: Vec<String> = (1..=n_times).map(|t| format!("t{t}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, rows.iter().map(|r| r.iter().map(|s| (s + 1).to_string())))
}

/// Reads one-based state sequences written by [`write_trajectories`]; returns zero-based states.
pub fn read_trajectories(path: &Path) -> Result<Vec<Vec<usize>>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push(rec.iter().map(|f| parse_index(path, line, f, "state").map(|s| s - 1)).collect::<Result<_>>()?);
    }
    Ok(out)
}

/// Reads a table with a header into string records.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
