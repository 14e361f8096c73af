//! Field files.
//!
//! Layout: one line of JSON (the [`FieldHeader`]) terminated by `\n`, then
//! `count` little-endian f64 values, then `count` mask bytes
//! (0 exterior, 1 interior, 2 collar). Values are in lattice order, last axis
//! fastest. Point `i` has coordinates `anchor + h·(idx(i) − anchor_index)`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use cmalab_core::field::{BallDomain, Cell, GridField, Lattice};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "cmalab-field";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub lattice: Lattice,
    pub ball: Option<BallDomain>,
    pub collar: usize,
    pub count: usize,
}

pub fn write_field(w: &mut impl Write, f: &GridField) -> Result<()> {
    let header = FieldHeader {
        format: FORMAT.into(),
        version: VERSION,
        n: f.n,
        lattice: f.lattice,
        ball: f.ball,
        collar: f.collar,
        count: f.values.len(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(9 * f.values.len());
    for v in &f.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend(f.mask.iter().map(|&c| c as u8));
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(r: impl Read) -> Result<GridField> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line).context("reading field header")?;
    let header: FieldHeader = serde_json::from_str(line.trim_end()).context("parsing field header")?;
    ensure!(header.format == FORMAT, "not a field file (format `{}`)", header.format);
    ensure!(header.version == VERSION, "unsupported field version {}", header.version);
    ensure!(header.lattice.dim == 2 * header.n, "lattice dimension does not match n");
    ensure!(header.count == header.lattice.len(), "count {} != lattice size", header.count);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    ensure!(bytes.len() == 9 * header.count, "payload has {} bytes, want {}", bytes.len(), 9 * header.count);
    let (vals, mask) = bytes.split_at(8 * header.count);
    let values = vals
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut cells = Vec::with_capacity(header.count);
    for &b in mask {
        match Cell::from_u8(b) {
            Some(c) => cells.push(c),
            None => bail!("invalid mask byte {b}"),
        }
    }
    Ok(GridField {
        n: header.n,
        lattice: header.lattice,
        values,
        mask: cells,
        ball: header.ball,
        collar: header.collar,
    })
}

pub fn save(path: &Path, f: &GridField) -> Result<()> {
    let mut file = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    write_field(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<GridField> {
    read_field(std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?)
}

/// CSV dump of the defined points: coordinates, value, mask.
pub fn write_field_csv(w: impl Write, f: &GridField) -> Result<()> {
    let dim = f.dim();
    let mut out = csv::Writer::from_writer(w);
    let mut head: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    head.push("value".into());
    head.push("cell".into());
    out.write_record(&head)?;
    for i in f.defined() {
        let p = f.point(i);
        let mut rec: Vec<String> = p[..dim].iter().map(|v| v.to_string()).collect();
        rec.push(f.values[i].to_string());
        rec.push((f.mask[i] as u8).to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
