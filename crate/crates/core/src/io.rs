//! CSV and key-value file formats.
//!
//! Timepoints are written 1-based. Floats carry 17 significant digits so every file
//! reads back to the identical `f64`.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::gmm::GmmParams;
use crate::membership::{LossTag, QuadTerm};
use crate::sim::SimulationRecord;
use crate::solve::MembershipEstimate;
use crate::Point;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column suffixes for coordinates: `x`, `y`, `z`.
pub fn axis_names(dim: usize) -> Result<&'static [&'static str]> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    if dim == 0 || dim > AXES.len() {
        return Err(Error::InvalidInput(format!("file formats support 1 to 3 dimensions, got {dim}")));
    }
    Ok(&AXES[..dim])
}

fn columns(prefix: &str, dim: usize) -> Result<Vec<String>> {
    Ok(axis_names(dim)?.iter().map(|a| format!("{prefix}{a}")).collect())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(csv_error)
}

fn point_fields(p: &Point) -> impl Iterator<Item = String> + '_ {
    p.iter().map(|&x| fmt_f64(x))
}

/// Reads a CSV whose header must equal `expected`; returns the records with their line
/// numbers.
fn read_table<R: Read>(input: R, expected: &[String]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}', got '{}'", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(csv_error)?;
            let line = r.position().map(|p| p.line() as usize).unwrap_or(0);
            Ok((line, r))
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse { line, message: format!("bad field {} '{raw}'", idx + 1) })
}

fn optional<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<Option<T>> {
    if rec.get(idx).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        field(rec, idx, line).map(Some)
    }
}

fn flag(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<bool> {
    match rec.get(idx) {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        other => Err(Error::Parse { line, message: format!("expected 0 or 1, got {other:?}") }),
    }
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn read_point(rec: &csv::StringRecord, start: usize, dim: usize, line: usize) -> Result<Point> {
    (0..dim)
        .map(|i| field(rec, start + i, line))
        .collect::<Result<Vec<f64>>>()
        .map(Point::from_vec)
}

fn particle_header(dim: usize) -> Result<Vec<String>> {
    let mut h = vec!["t".to_string()];
    h.extend(columns("p", dim)?);
    h.extend(["inside".to_string(), "nearest".to_string()]);
    Ok(h)
}

fn clusters_header(dim: usize) -> Result<Vec<String>> {
    let mut h = vec!["t".to_string(), "n".to_string()];
    h.extend(columns("c", dim)?);
    Ok(h)
}

/// `t,px,py,inside,nearest`; `nearest` is empty while outside.
pub fn write_particle_csv<W: Write>(record: &SimulationRecord, out: W) -> Result<()> {
    let mut w = writer(out);
    write_row(&mut w, &particle_header(record.dim())?)?;
    for (idx, p) in record.particle.iter().enumerate() {
        let mut row = vec![(idx + 1).to_string()];
        row.extend(point_fields(p));
        row.push(bit(record.inside[idx]));
        row.push(record.nearest[idx].map(|n| n.to_string()).unwrap_or_default());
        write_row(&mut w, &row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,n,cx,cy`, ordered by time then cluster.
pub fn write_clusters_csv<W: Write>(record: &SimulationRecord, out: W) -> Result<()> {
    let mut w = writer(out);
    write_row(&mut w, &clusters_header(record.dim())?)?;
    for idx in 0..record.horizon() {
        for (n, path) in record.clusters.iter().enumerate() {
            let mut row = vec![(idx + 1).to_string(), n.to_string()];
            row.extend(point_fields(&path[idx]));
            write_row(&mut w, &row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a record from its particle and cluster files.
pub fn read_record<P: Read, C: Read>(particle: P, clusters: C, dim: usize) -> Result<SimulationRecord> {
    let rows = read_table(particle, &particle_header(dim)?)?;
    let horizon = rows.len();
    let mut path = Vec::with_capacity(horizon);
    let mut inside = Vec::with_capacity(horizon);
    let mut nearest = Vec::with_capacity(horizon);
    for (expected_t, (line, rec)) in (1..).zip(&rows) {
        if field::<usize>(rec, 0, *line)? != expected_t {
            return Err(Error::Parse { line: *line, message: format!("expected t={expected_t}") });
        }
        path.push(read_point(rec, 1, dim, *line)?);
        inside.push(flag(rec, dim + 1, *line)?);
        nearest.push(optional(rec, dim + 2, *line)?);
    }

    let mut cluster_paths: Vec<Vec<Point>> = Vec::new();
    for (line, rec) in read_table(clusters, &clusters_header(dim)?)? {
        let t: usize = field(&rec, 0, line)?;
        let n: usize = field(&rec, 1, line)?;
        if n == cluster_paths.len() && t == 1 {
            cluster_paths.push(Vec::with_capacity(horizon));
        }
        let path = cluster_paths
            .get_mut(n)
            .filter(|p| p.len() + 1 == t)
            .ok_or_else(|| Error::Parse { line, message: format!("cluster row (t={t}, n={n}) out of order") })?;
        path.push(read_point(&rec, 2, dim, line)?);
    }
    let record = SimulationRecord { particle: path, clusters: cluster_paths, inside, nearest };
    record.validate()?;
    Ok(record)
}

const GMM_KEYS: [&str; 4] = ["alpha_in", "alpha_out", "var_in", "var_out"];

/// One `key = value` per line: weights, mean components (`mu_in_x`, ...), variances.
pub fn write_gmm<W: Write>(params: &GmmParams, mut out: W) -> Result<()> {
    writeln!(out, "alpha_in = {}", fmt_f64(params.alpha_in))?;
    writeln!(out, "alpha_out = {}", fmt_f64(params.alpha_out))?;
    for (name, mu) in [("mu_in", &params.mu_in), ("mu_out", &params.mu_out)] {
        for (axis, v) in axis_names(params.dim())?.iter().zip(mu.iter()) {
            writeln!(out, "{name}_{axis} = {}", fmt_f64(*v))?;
        }
    }
    writeln!(out, "var_in = {}", fmt_f64(params.var_in))?;
    writeln!(out, "var_out = {}", fmt_f64(params.var_out))?;
    Ok(())
}

pub fn read_gmm<R: BufRead>(input: R) -> Result<GmmParams> {
    let mut scalars = [None; 4];
    let mut means: [Vec<Option<f64>>; 2] = [vec![None; 3], vec![None; 3]];
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, message: "expected 'key = value'".into() })?;
        let (key, value) = (key.trim(), value.trim());
        let v: f64 =
            value.parse().map_err(|_| Error::Parse { line: line_no, message: format!("bad number '{value}'") })?;
        if let Some(i) = GMM_KEYS.iter().position(|k| *k == key) {
            scalars[i] = Some(v);
            continue;
        }
        let slot = ["mu_in_", "mu_out_"].iter().enumerate().find_map(|(m, prefix)| {
            let axis = key.strip_prefix(prefix)?;
            ["x", "y", "z"].iter().position(|a| *a == axis).map(|a| (m, a))
        });
        match slot {
            Some((m, a)) => means[m][a] = Some(v),
            None => return Err(Error::Parse { line: line_no, message: format!("unknown key '{key}'") }),
        }
    }
    let missing = |what: &str| Error::Parse { line: 0, message: format!("missing key '{what}'") };
    let [alpha_in, alpha_out, var_in, var_out] = {
        let mut out = [0.0; 4];
        for (i, s) in scalars.iter().enumerate() {
            out[i] = s.ok_or_else(|| missing(GMM_KEYS[i]))?;
        }
        out
    };
    let dim = means[0].iter().take_while(|v| v.is_some()).count();
    let mean = |m: usize, name: &str| -> Result<Point> {
        if means[m].iter().skip(dim).any(Option::is_some) || means[m].iter().take(dim).any(Option::is_none) || dim == 0 {
            return Err(missing(name));
        }
        Ok(Point::from_iterator(dim, means[m].iter().take(dim).map(|v| v.unwrap())))
    };
    let params = GmmParams { alpha_in, alpha_out, mu_in: mean(0, "mu_in")?, mu_out: mean(1, "mu_out")?, var_in, var_out };
    params.validate()?;
    Ok(params)
}

/// `t,target,weight,tag`.
pub fn write_terms_csv<W: Write>(terms: &[QuadTerm], out: W) -> Result<()> {
    let mut w = writer(out);
    write_row(&mut w, &["t", "target", "weight", "tag"].map(String::from))?;
    for q in terms {
        write_row(&mut w, &[q.t.to_string(), bit(q.target), fmt_f64(q.weight), q.tag.name().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_terms_csv<R: Read>(input: R) -> Result<Vec<QuadTerm>> {
    let header = ["t", "target", "weight", "tag"].map(String::from);
    read_table(input, &header)?
        .into_iter()
        .map(|(line, rec)| {
            let tag = match rec.get(3) {
                Some("radius") => LossTag::Radius,
                Some("similarity") => LossTag::Similarity,
                other => return Err(Error::Parse { line, message: format!("unknown tag {other:?}") }),
            };
            Ok(QuadTerm { t: field(&rec, 0, line)?, target: flag(&rec, 1, line)?, weight: field(&rec, 2, line)?, tag })
        })
        .collect()
}

/// `t,e,label,truth`; `label` is empty outside the scored range.
pub fn write_estimate_csv<W: Write>(estimate: &MembershipEstimate, truth: &[bool], out: W) -> Result<()> {
    if truth.len() != estimate.e.len() {
        return Err(Error::InvalidInput(format!("{} truth values for {} estimates", truth.len(), estimate.e.len())));
    }
    let mut w = writer(out);
    write_row(&mut w, &["t", "e", "label", "truth"].map(String::from))?;
    for (idx, e) in estimate.e.iter().enumerate() {
        let t = idx + 1;
        let label = estimate.label_at(t).map(bit).unwrap_or_default();
        write_row(&mut w, &[t.to_string(), fmt_f64(*e), label, bit(truth[idx])])?;
    }
    w.flush()?;
    Ok(())
}

/// One timepoint of the trajectory plot: position, state, and the carrying cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub t: usize,
    pub position: Point,
    pub inside: bool,
    /// Cluster index, center, and radius; only while inside.
    pub cluster: Option<(usize, Point, f64)>,
}

fn plot_header(dim: usize) -> Result<Vec<String>> {
    let mut h = vec!["t".to_string()];
    h.extend(columns("p", dim)?);
    h.extend(["inside".to_string(), "nearest".to_string()]);
    h.extend(columns("c", dim)?);
    h.push("r".to_string());
    Ok(h)
}

/// Trajectory rows with the carrying cluster's center and radius.
pub fn plot_rows(record: &SimulationRecord, radius: f64) -> Vec<PlotRow> {
    (0..record.horizon())
        .map(|idx| PlotRow {
            t: idx + 1,
            position: record.particle[idx].clone(),
            inside: record.inside[idx],
            cluster: record.nearest[idx].map(|n| (n, record.clusters[n][idx].clone(), radius)),
        })
        .collect()
}

/// `t,px,py,inside,nearest,cx,cy,r`; the cluster fields are empty while outside.
pub fn write_plotdata<W: Write>(record: &SimulationRecord, radius: f64, out: W) -> Result<()> {
    let dim = record.dim();
    let mut w = writer(out);
    write_row(&mut w, &plot_header(dim)?)?;
    for row in plot_rows(record, radius) {
        let mut fields = vec![row.t.to_string()];
        fields.extend(point_fields(&row.position));
        fields.push(bit(row.inside));
        match &row.cluster {
            Some((n, c, r)) => {
                fields.push(n.to_string());
                fields.extend(point_fields(c));
                fields.push(fmt_f64(*r));
            }
            None => fields.extend(std::iter::repeat_n(String::new(), dim + 2)),
        }
        write_row(&mut w, &fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plotdata<R: Read>(input: R, dim: usize) -> Result<Vec<PlotRow>> {
    read_table(input, &plot_header(dim)?)?
        .into_iter()
        .map(|(line, rec)| {
            let nearest: Option<usize> = optional(&rec, dim + 2, line)?;
            let cluster = match nearest {
                Some(n) => Some((n, read_point(&rec, dim + 3, dim, line)?, field(&rec, 2 * dim + 3, line)?)),
                None => None,
            };
            Ok(PlotRow {
                t: field(&rec, 0, line)?,
                position: read_point(&rec, 1, dim, line)?,
                inside: flag(&rec, dim + 1, line)?,
                cluster,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig};

    fn record() -> SimulationRecord {
        simulate(&SimConfig { horizon: 60, arena: 2.0, seed: 3, ..SimConfig::default() }).unwrap()
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn record_round_trip() {
        let rec = record();
        assert!(rec.inside.iter().any(|&b| b) && rec.inside.iter().any(|&b| !b));
        let (mut p, mut c) = (Vec::new(), Vec::new());
        write_particle_csv(&rec, &mut p).unwrap();
        write_clusters_csv(&rec, &mut c).unwrap();
        let text = String::from_utf8(p.clone()).unwrap();
        assert!(text.starts_with("t,px,py,inside,nearest\n"));
        assert!(String::from_utf8(c.clone()).unwrap().starts_with("t,n,cx,cy\n"));
        assert_eq!(read_record(&p[..], &c[..], 2).unwrap(), rec);
    }

    #[test]
    fn record_read_errors() {
        let rec = record();
        let (mut p, mut c) = (Vec::new(), Vec::new());
        write_particle_csv(&rec, &mut p).unwrap();
        write_clusters_csv(&rec, &mut c).unwrap();
        let bad_header = String::from_utf8(p.clone()).unwrap().replacen("px", "qx", 1);
        assert!(matches!(read_record(bad_header.as_bytes(), &c[..], 2), Err(Error::Parse { line: 1, .. })));
        let mut lines: Vec<&str> = std::str::from_utf8(&p).unwrap().lines().collect();
        lines.swap(2, 3);
        let shuffled = lines.join("\n");
        assert!(read_record(shuffled.as_bytes(), &c[..], 2).is_err());
    }

    #[test]
    fn gmm_round_trip() {
        let params = GmmParams {
            alpha_in: 0.54,
            alpha_out: 0.46,
            mu_in: Point::from_vec(vec![0.3, 0.3]),
            mu_out: Point::from_vec(vec![-0.01, 1.0 / 3.0]),
            var_in: 0.25,
            var_out: 0.49,
        };
        let mut buf = Vec::new();
        write_gmm(&params, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(keys, ["alpha_in", "alpha_out", "mu_in_x", "mu_in_y", "mu_out_x", "mu_out_y", "var_in", "var_out"]);
        assert_eq!(read_gmm(&buf[..]).unwrap(), params);
        assert!(read_gmm("alpha_in = 1".as_bytes()).is_err());
        assert!(read_gmm(&b"sigma = 2\n"[..]).is_err());
    }

    #[test]
    fn terms_round_trip() {
        let terms = vec![
            QuadTerm { t: 1, target: true, weight: 0.25, tag: LossTag::Radius },
            QuadTerm { t: 7, target: false, weight: 1.0 / 3.0, tag: LossTag::Similarity },
        ];
        let mut buf = Vec::new();
        write_terms_csv(&terms, &mut buf).unwrap();
        assert!(buf.starts_with(b"t,target,weight,tag\n"));
        assert_eq!(read_terms_csv(&buf[..]).unwrap(), terms);
    }

    #[test]
    fn estimate_csv_layout() {
        use crate::membership::random_objective;
        use crate::seed::rng_stream;
        use crate::solve::{closed_form_minimize, InitPolicy};
        let obj = random_objective(&mut rng_stream(1, 0), 10, 2);
        let est = closed_form_minimize(&obj, &InitPolicy::Constant(0.5));
        let mut buf = Vec::new();
        write_estimate_csv(&est, &[true; 10], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,e,label,truth");
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[1].split(',').nth(2), Some(""));
        assert_ne!(lines[3].split(',').nth(2), Some(""));
        assert_eq!(lines[10].split(',').nth(2), Some(""));
        assert!(write_estimate_csv(&est, &[true; 3], Vec::new()).is_err());
    }

    #[test]
    fn plotdata_round_trip() {
        let rec = record();
        let mut buf = Vec::new();
        write_plotdata(&rec, 0.7, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next(), Some("t,px,py,inside,nearest,cx,cy,r"));
        for (line, inside) in text.lines().skip(1).zip(&rec.inside) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 8);
            assert_eq!(fields[4..].iter().all(|f| f.is_empty()), !inside);
        }
        assert_eq!(read_plotdata(&buf[..], 2).unwrap(), plot_rows(&rec, 0.7));
    }
}
