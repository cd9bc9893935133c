//! CSV serialization of densities, samples and tables.
//!
//! Every file has exactly one header line; sample files additionally start with a
//! `#` comment carrying the seed. Numbers are written with 17 significant digits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::pde::{DensityGrid1D, DensityGrid2D};
use crate::sampling::{Sample, Sample1D, Sample2D};

/// Formats `v` with 17 significant digits, enough to round-trip any f64.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        // Keeps "-0" out of the files.
        return "0".to_string();
    }
    format!("{v:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits.
struct Json17(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident),*) => {$(
        fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
            self.0.$name(w)
        }
    )*};
}

impl serde_json::ser::Formatter for Json17 {
    delegate!(
        begin_array,
        end_array,
        begin_object,
        end_object,
        end_object_value
    );

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(fmt_num(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// Writes `value` as pretty JSON with 17-significant-digit floats and a final newline.
pub fn write_json<W: Write, T: serde::Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(
        &mut w,
        Json17(serde_json::ser::PrettyFormatter::new()),
    );
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(format!("JSON serialization failed: {e}")))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<T: serde::Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: not a number: {s:?}")))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

/// Writes a header and rows of preformatted cells.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "table row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.write_record(row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a numeric table, returning the header and the rows.
pub fn read_numeric_table<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = reader(r);
    let header: Vec<String> = rd
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|c| parse_num(c, k + 2))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns",
                k + 2,
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes `axis,value` rows.
pub fn write_density_1d<W: Write>(w: W, d: &DensityGrid1D, axis: &str) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..d.n_x)
        .map(|i| vec![fmt_num(d.x(i)), fmt_num(d.values[i])])
        .collect();
    write_table(w, &[axis, "value"], &rows)
}

fn uniform_step(nodes: &[f64], what: &str) -> Result<f64> {
    if nodes.len() < 2 || nodes[0].abs() > 1e-12 {
        return Err(Error::Parse(format!(
            "{what} nodes must start at 0 and have at least two entries"
        )));
    }
    let h = nodes[1] - nodes[0];
    if !(h > 0.0) {
        return Err(Error::Parse(format!("{what} nodes must increase")));
    }
    for (k, x) in nodes.iter().enumerate() {
        if (x - k as f64 * h).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::Parse(format!(
                "{what} nodes are not uniformly spaced at row {}",
                k + 1
            )));
        }
    }
    Ok(h)
}

/// Reads a two-column density table on uniform nodes starting at 0.
pub fn read_density_1d<R: Read>(r: R) -> Result<DensityGrid1D> {
    let (header, rows) = read_numeric_table(r)?;
    if header.len() != 2 {
        return Err(Error::Parse(format!(
            "expected 2 columns, header is {header:?}"
        )));
    }
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let h = uniform_step(&nodes, "density")?;
    DensityGrid1D::new(h * rows.len() as f64, rows.iter().map(|r| r[1]).collect())
}

/// Writes `a,x,value` rows, `a` outermost.
pub fn write_density_2d<W: Write>(w: W, d: &DensityGrid2D) -> Result<()> {
    let (da, dx) = (d.da(), d.dx());
    let mut rows = Vec::with_capacity(d.n_a * d.n_x);
    for i in 0..d.n_a {
        for j in 0..d.n_x {
            rows.push(vec![
                fmt_num(i as f64 * da),
                fmt_num(j as f64 * dx),
                fmt_num(d.at(i, j)),
            ]);
        }
    }
    write_table(w, &["a", "x", "value"], &rows)
}

pub fn read_density_2d<R: Read>(r: R) -> Result<DensityGrid2D> {
    let (header, rows) = read_numeric_table(r)?;
    if header.len() != 3 {
        return Err(Error::Parse(format!(
            "expected 3 columns, header is {header:?}"
        )));
    }
    let n_x = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
    if n_x < 2 || rows.len() % n_x != 0 {
        return Err(Error::Parse(
            "2-D density rows do not form a full tensor grid".into(),
        ));
    }
    let n_a = rows.len() / n_x;
    let xs: Vec<f64> = rows[..n_x].iter().map(|r| r[1]).collect();
    let a_nodes: Vec<f64> = (0..n_a).map(|i| rows[i * n_x][0]).collect();
    let dx = uniform_step(&xs, "x")?;
    let da = uniform_step(&a_nodes, "a")?;
    for (k, r) in rows.iter().enumerate() {
        if r[0] != a_nodes[k / n_x] || r[1] != xs[k % n_x] {
            return Err(Error::Parse(format!(
                "row {} breaks the tensor-grid order",
                k + 2
            )));
        }
    }
    DensityGrid2D::new(
        da * n_a as f64,
        dx * n_x as f64,
        n_a,
        n_x,
        rows.iter().map(|r| r[2]).collect(),
    )
}

/// Writes a sample with a `# seed=… source=…` comment line before the header.
pub fn write_sample<W: Write>(mut w: W, s: &Sample) -> Result<()> {
    let (seed, source) = match s {
        Sample::One(s) => (s.seed, s.source.as_str()),
        Sample::Two(s) => (s.seed, s.source.as_str()),
    };
    writeln!(
        w,
        "# seed={seed} source={}",
        source.replace(['\n', '\r'], " ")
    )?;
    match s {
        Sample::One(s) => {
            let rows: Vec<Vec<String>> = s.points.iter().map(|&x| vec![fmt_num(x)]).collect();
            write_table(w, &["x"], &rows)
        }
        Sample::Two(s) => {
            let rows: Vec<Vec<String>> = s
                .points
                .iter()
                .map(|p| vec![fmt_num(p[0]), fmt_num(p[1])])
                .collect();
            write_table(w, &["a", "x"], &rows)
        }
    }
}

pub fn read_sample<R: Read>(mut r: R) -> Result<Sample> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or("");
    let meta = first
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("sample file must start with a '# seed=' comment".into()))?
        .trim();
    let rest = meta
        .strip_prefix("seed=")
        .ok_or_else(|| Error::Parse("sample file must start with a '# seed=' comment".into()))?;
    let (seed_str, source) = match rest.split_once(' ') {
        Some((s, tail)) => (
            s,
            tail.trim().strip_prefix("source=").unwrap_or(tail.trim()),
        ),
        None => (rest, ""),
    };
    let seed: u64 = seed_str
        .parse()
        .map_err(|_| Error::Parse(format!("bad seed {seed_str:?} in sample header")))?;
    let (header, rows) = read_numeric_table(text.as_bytes())?;
    match header.len() {
        1 => Ok(Sample::One(Sample1D {
            points: rows.into_iter().map(|r| r[0]).collect(),
            seed,
            source: source.to_string(),
        })),
        2 => Ok(Sample::Two(Sample2D {
            points: rows.into_iter().map(|r| [r[0], r[1]]).collect(),
            seed,
            source: source.to_string(),
        })),
        k => Err(Error::Parse(format!(
            "sample files have 1 or 2 columns, got {k}"
        ))),
    }
}
