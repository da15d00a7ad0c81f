//! Readers and writers for PLY (ascii, binary little-endian), ASCII PCD and
//! whitespace-separated XYZ text. Only x, y, z survive a load.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudFormat {
    PlyAscii,
    PlyBinaryLe,
    PcdAscii,
    XyzText,
}

impl CloudFormat {
    /// Guess from the file extension; PLY files are sniffed for their encoding.
    pub fn from_path(path: &Path) -> Option<CloudFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pcd" => Some(CloudFormat::PcdAscii),
            "xyz" | "txt" | "pts" => Some(CloudFormat::XyzText),
            "ply" => {
                let head = fs::read(path).ok()?;
                let head = &head[..head.len().min(512)];
                if contains(head, b"binary_little_endian") {
                    Some(CloudFormat::PlyBinaryLe)
                } else {
                    Some(CloudFormat::PlyAscii)
                }
            }
            _ => None,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply_ascii" => Ok(CloudFormat::PlyAscii),
            "ply_binary_le" => Ok(CloudFormat::PlyBinaryLe),
            "pcd_ascii" => Ok(CloudFormat::PcdAscii),
            "xyz_text" => Ok(CloudFormat::XyzText),
            other => Err(Error::InvalidParameter(format!(
                "unknown cloud format `{other}`"
            ))),
        }
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Points dropped for NaN / infinite coordinates.
    pub rejected: usize,
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<(PointCloud, LoadReport)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&bytes, format)
}

pub fn parse_cloud(bytes: &[u8], format: CloudFormat) -> Result<(PointCloud, LoadReport)> {
    let raw = match format {
        CloudFormat::XyzText => parse_xyz(bytes)?,
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => parse_ply(bytes, format)?,
        CloudFormat::PcdAscii => parse_pcd(bytes)?,
    };
    let (cloud, rejected) = PointCloud::from_lossy(raw);
    if cloud.is_empty() {
        return Err(Error::EmptyCloud { rejected });
    }
    Ok((cloud, LoadReport { rejected }))
}

/// Iterates lines as (byte offset of line start, line text without newline).
struct Lines<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Lines { bytes, pos: 0 }
    }

    fn next_line(&mut self) -> Option<Result<(usize, &'a str)>> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        let start = self.pos;
        let end = self.bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(self.bytes.len(), |i| start + i);
        self.pos = (end + 1).min(self.bytes.len());
        if end == self.bytes.len() {
            self.pos = end;
        }
        let line = &self.bytes[start..end];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        Some(
            std::str::from_utf8(line)
                .map(|s| (start, s))
                .map_err(|_| Error::parse(start, "line is not valid UTF-8")),
        )
    }
}

fn parse_f64(tok: &str, offset: usize) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::parse(offset, format!("`{tok}` is not a number")))
}

fn parse_xyz(bytes: &[u8]) -> Result<Vec<[f64; 3]>> {
    let mut lines = Lines::new(bytes);
    let mut out = Vec::new();
    while let Some(line) = lines.next_line() {
        let (off, line) = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
            continue;
        }
        let mut toks = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty());
        let mut p = [0.0; 3];
        for c in &mut p {
            let tok = toks
                .next()
                .ok_or_else(|| Error::parse(off, "expected at least 3 columns"))?;
            *c = parse_f64(tok, off)?;
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

fn parse_ply(bytes: &[u8], format: CloudFormat) -> Result<Vec<[f64; 3]>> {
    let mut lines = Lines::new(bytes);
    let magic = lines.next_line().transpose()?;
    if magic.map(|(_, l)| l.trim()) != Some("ply") {
        return Err(Error::parse(0, "missing `ply` magic"));
    }
    let mut declared = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let (off, line) = lines
            .next_line()
            .ok_or_else(|| Error::parse(bytes.len(), "header ended without end_header"))??;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", enc, _ver] => {
                declared = Some(match *enc {
                    "ascii" => CloudFormat::PlyAscii,
                    "binary_little_endian" => CloudFormat::PlyBinaryLe,
                    other => {
                        return Err(Error::parse(
                            off,
                            format!("unsupported PLY encoding `{other}`"),
                        ))
                    }
                });
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(off, format!("bad element count `{count}`")))?,
                props: Vec::new(),
            }),
            ["property", "list", cty, ity, _name] => {
                let (count, item) = Scalar::parse(cty)
                    .zip(Scalar::parse(ity))
                    .ok_or_else(|| Error::parse(off, "unknown list property type"))?;
                last_element(&mut elements, off)?
                    .props
                    .push(PlyProperty::List { count, item });
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(off, format!("unknown property type `{ty}`")))?;
                last_element(&mut elements, off)?
                    .props
                    .push(PlyProperty::Scalar {
                        name: name.to_string(),
                        ty,
                    });
            }
            _ => {
                return Err(Error::parse(
                    off,
                    format!("unexpected header line `{line}`"),
                ))
            }
        }
    }
    let declared = declared.ok_or_else(|| Error::parse(0, "missing format line"))?;
    if declared != format {
        return Err(Error::parse(
            0,
            format!("file declares {declared:?} but {format:?} was requested"),
        ));
    }
    let body_start = lines.pos;
    match declared {
        CloudFormat::PlyAscii => ply_ascii_body(&mut lines, &elements),
        _ => ply_binary_body(bytes, body_start, &elements),
    }
}

fn last_element(elements: &mut [PlyElement], off: usize) -> Result<&mut PlyElement> {
    elements
        .last_mut()
        .ok_or_else(|| Error::parse(off, "property before any element"))
}

fn xyz_slots(el: &PlyElement, off: usize) -> Result<[usize; 3]> {
    let find = |axis: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, PlyProperty::Scalar { name, .. } if name == axis))
            .ok_or_else(|| Error::parse(off, format!("vertex element lacks `{axis}`")))
    };
    Ok([find("x")?, find("y")?, find("z")?])
}

fn ply_ascii_body(lines: &mut Lines<'_>, elements: &[PlyElement]) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for el in elements {
        let is_vertex = el.name == "vertex";
        let slots = if is_vertex {
            Some(xyz_slots(el, lines.pos)?)
        } else {
            None
        };
        for _ in 0..el.count {
            let (off, line) = lines.next_line().ok_or_else(|| {
                Error::parse(lines.pos, format!("truncated `{}` data", el.name))
            })??;
            let Some(slots) = slots else { continue };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < el.props.len() {
                return Err(Error::parse(off, "too few values on vertex line"));
            }
            out.push([
                parse_f64(toks[slots[0]], off)?,
                parse_f64(toks[slots[1]], off)?,
                parse_f64(toks[slots[2]], off)?,
            ]);
        }
        if is_vertex {
            break;
        }
    }
    Ok(out)
}

fn ply_binary_body(bytes: &[u8], mut pos: usize, elements: &[PlyElement]) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for el in elements {
        let is_vertex = el.name == "vertex";
        let slots = if is_vertex {
            Some(xyz_slots(el, pos)?)
        } else {
            None
        };
        for _ in 0..el.count {
            let mut p = [0.0; 3];
            for (k, prop) in el.props.iter().enumerate() {
                match prop {
                    PlyProperty::Scalar { ty, .. } => {
                        let end = pos + ty.size();
                        let b = bytes
                            .get(pos..end)
                            .ok_or_else(|| Error::parse(pos, "truncated binary data"))?;
                        if let Some(s) = slots {
                            if let Some(axis) = s.iter().position(|&i| i == k) {
                                p[axis] = ty.read_le(b);
                            }
                        }
                        pos = end;
                    }
                    PlyProperty::List { count, item } => {
                        let b = bytes
                            .get(pos..pos + count.size())
                            .ok_or_else(|| Error::parse(pos, "truncated list count"))?;
                        let n = count.read_le(b) as usize;
                        pos += count.size() + n * item.size();
                    }
                }
            }
            if slots.is_some() {
                out.push(p);
            }
        }
        if is_vertex {
            break;
        }
    }
    Ok(out)
}

fn parse_pcd(bytes: &[u8]) -> Result<Vec<[f64; 3]>> {
    let mut lines = Lines::new(bytes);
    let mut fields: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut points: Option<usize> = None;
    loop {
        let (off, line) = lines
            .next_line()
            .ok_or_else(|| Error::parse(bytes.len(), "PCD header ended without DATA"))??;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let rest: Vec<&str> = toks.collect();
        match key {
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "COUNT" => {
                counts = rest
                    .iter()
                    .map(|s| s.parse().map_err(|_| Error::parse(off, "bad COUNT")))
                    .collect::<Result<_>>()?
            }
            "POINTS" => {
                points = Some(
                    rest.first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::parse(off, "bad POINTS"))?,
                )
            }
            "DATA" => {
                if rest.first() != Some(&"ascii") {
                    return Err(Error::parse(
                        off,
                        "only `DATA ascii` PCD files are supported",
                    ));
                }
                break;
            }
            "VERSION" | "SIZE" | "TYPE" | "WIDTH" | "HEIGHT" | "VIEWPOINT" => {}
            other => {
                return Err(Error::parse(
                    off,
                    format!("unknown PCD header key `{other}`"),
                ))
            }
        }
    }
    if counts.is_empty() {
        counts = vec![1; fields.len()];
    }
    if counts.len() != fields.len() {
        return Err(Error::parse(0, "COUNT and FIELDS lengths differ"));
    }
    // column of each field's first value
    let mut col = Vec::with_capacity(fields.len());
    let mut acc = 0;
    for c in &counts {
        col.push(acc);
        acc += c;
    }
    let slot = |axis: &str| {
        fields
            .iter()
            .position(|f| f == axis)
            .map(|i| col[i])
            .ok_or_else(|| Error::parse(0, format!("PCD lacks field `{axis}`")))
    };
    let slots = [slot("x")?, slot("y")?, slot("z")?];
    let mut out = Vec::with_capacity(points.unwrap_or(0));
    while let Some(line) = lines.next_line() {
        let (off, line) = line?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < acc {
            return Err(Error::parse(off, "too few values on PCD data line"));
        }
        out.push([
            parse_f64(toks[slots[0]], off)?,
            parse_f64(toks[slots[1]], off)?,
            parse_f64(toks[slots[2]], off)?,
        ]);
    }
    if let Some(n) = points {
        if n != out.len() {
            return Err(Error::parse(
                bytes.len(),
                format!("POINTS says {n} but {} data lines found", out.len()),
            ));
        }
    }
    Ok(out)
}

/// Writes `cloud` in `format`. ASCII output uses shortest round-trip float
/// formatting, so a reload reproduces every coordinate exactly.
pub fn write_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_cloud(&mut w, cloud, format)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn encode_cloud(
    w: &mut impl Write,
    cloud: &PointCloud,
    format: CloudFormat,
) -> std::io::Result<()> {
    let pts = cloud.points();
    match format {
        CloudFormat::XyzText => {
            for p in pts {
                writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
            }
        }
        CloudFormat::PlyAscii | CloudFormat::PlyBinaryLe => {
            let enc = if format == CloudFormat::PlyAscii {
                "ascii"
            } else {
                "binary_little_endian"
            };
            writeln!(w, "ply\nformat {enc} 1.0\nelement vertex {}", pts.len())?;
            writeln!(
                w,
                "property double x\nproperty double y\nproperty double z\nend_header"
            )?;
            for p in pts {
                if format == CloudFormat::PlyAscii {
                    writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
                } else {
                    for c in p {
                        w.write_all(&c.to_le_bytes())?;
                    }
                }
            }
        }
        CloudFormat::PcdAscii => {
            writeln!(w, "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7")?;
            writeln!(w, "FIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1")?;
            writeln!(w, "WIDTH {}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0", pts.len())?;
            writeln!(w, "POINTS {}\nDATA ascii", pts.len())?;
            for p in pts {
                writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
            }
        }
    }
    Ok(())
}

/// Writes an ASCII PLY polygon mesh (vertices plus polygonal faces).
pub fn write_ply_mesh(path: &Path, vertices: &[[f64; 3]], faces: &[Vec<u32>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        writeln!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}",
            vertices.len()
        )?;
        writeln!(w, "property double x\nproperty double y\nproperty double z")?;
        writeln!(
            w,
            "element face {}\nproperty list uchar uint vertex_indices\nend_header",
            faces.len()
        )?;
        for v in vertices {
            writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
        }
        for f in faces {
            write!(w, "{}", f.len())?;
            for i in f {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
