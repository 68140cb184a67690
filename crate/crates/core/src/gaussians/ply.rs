//! Gaussian asset PLY reader/writer.
//!
//! Two value conventions are understood:
//!
//! * `linear`: `scale_*` are standard deviations, `opacity` is in (0, 1].
//! * `splat`: the common splatting export, `scale_*` are log standard
//!   deviations and `opacity` is a logit.
//!
//! A header line `comment gsedit-convention linear` (or `splat`) selects one
//! explicitly. Otherwise files carrying `f_dc_*` color fields are read as
//! `splat` and everything else as `linear`. Color comes from `f_dc_0..2`
//! (spherical-harmonic DC band) when present, else from `red, green, blue`.

use nalgebra::{Quaternion, UnitQuaternion};
use thiserror::Error;

use super::{Gaussian3D, GaussianCloud};
use crate::geometry::{Vec3, QUAT_REJECT_TOL};

/// Zeroth-order real spherical harmonic, `1 / (2√π)`.
const SH_C0: f64 = 0.282_094_791_77;
const CONVENTION_TAG: &str = "gsedit-convention";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlyError {
    #[error("malformed PLY: {0}")]
    MalformedPly(String),
    #[error("non-finite value in property `{property}` of vertex {vertex}")]
    NonFiniteValue { vertex: usize, property: String },
    #[error("degenerate gaussian at vertex {vertex}: {reason}")]
    DegenerateGaussian { vertex: usize, reason: String },
}

fn malformed(msg: impl Into<String>) -> PlyError {
    PlyError::MalformedPly(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlyConvention {
    #[default]
    Auto,
    Linear,
    Splat,
}

impl std::str::FromStr for PlyConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "linear" => Ok(Self::Linear),
            "splat" => Ok(Self::Splat),
            other => Err(format!("unknown PLY convention `{other}` (auto|linear|splat)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    encoding: Encoding,
    vertex_count: usize,
    properties: Vec<(String, Scalar)>,
    declared: Option<PlyConvention>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0;
    let mut next_line = || -> Result<&str, PlyError> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("unterminated header"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| malformed("header is not UTF-8"))
    };

    if next_line()? != "ply" {
        return Err(malformed("missing `ply` magic"));
    }
    let mut encoding = None;
    let mut vertex_count = None;
    let mut properties = Vec::new();
    let mut declared = None;
    // Only the first element (which must be `vertex`) is read.
    let mut in_vertex = false;
    let mut seen_element = false;
    loop {
        let line = next_line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                encoding = Some(match (words.next(), words.next()) {
                    (Some("ascii"), Some("1.0")) => Encoding::Ascii,
                    (Some("binary_little_endian"), Some("1.0")) => Encoding::BinaryLe,
                    (Some(f), _) => return Err(malformed(format!("unsupported format `{f}`"))),
                    _ => return Err(malformed("bad format line")),
                });
            }
            Some("comment") | Some("obj_info") => {
                if words.next() == Some(CONVENTION_TAG) {
                    declared = Some(match words.next() {
                        Some("linear") => PlyConvention::Linear,
                        Some("splat") => PlyConvention::Splat,
                        other => {
                            return Err(malformed(format!("unknown convention {other:?}")))
                        }
                    });
                }
            }
            Some("element") => {
                let name = words.next().ok_or_else(|| malformed("element without name"))?;
                let count: usize = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| malformed("element without count"))?;
                if !seen_element {
                    if name != "vertex" {
                        return Err(malformed("first element must be `vertex`"));
                    }
                    vertex_count = Some(count);
                    in_vertex = true;
                } else {
                    in_vertex = false;
                }
                seen_element = true;
            }
            Some("property") => {
                if !in_vertex {
                    continue;
                }
                let ty = words.next().ok_or_else(|| malformed("property without type"))?;
                if ty == "list" {
                    return Err(malformed("list properties are not allowed on vertices"));
                }
                let ty = Scalar::parse(ty).ok_or_else(|| malformed(format!("unknown type `{ty}`")))?;
                let name = words.next().ok_or_else(|| malformed("property without name"))?;
                properties.push((name.to_string(), ty));
            }
            Some("end_header") => break,
            Some(other) => return Err(malformed(format!("unexpected header keyword `{other}`"))),
            None => {}
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| malformed("missing format line"))?,
        vertex_count: vertex_count.ok_or_else(|| malformed("missing vertex element"))?,
        properties,
        declared,
        body_offset: pos,
    })
}

fn read_rows(bytes: &[u8], header: &Header) -> Result<Vec<Vec<f64>>, PlyError> {
    let body = &bytes[header.body_offset..];
    let nprops = header.properties.len();
    match header.encoding {
        Encoding::BinaryLe => {
            let stride: usize = header.properties.iter().map(|(_, t)| t.size()).sum();
            let needed = stride
                .checked_mul(header.vertex_count)
                .ok_or_else(|| malformed("vertex count overflows"))?;
            if body.len() < needed {
                return Err(malformed(format!(
                    "truncated body: need {needed} bytes, have {}",
                    body.len()
                )));
            }
            Ok(body[..needed]
                .chunks_exact(stride.max(1))
                .take(header.vertex_count)
                .map(|row| {
                    let mut off = 0;
                    header
                        .properties
                        .iter()
                        .map(|(_, t)| {
                            let v = t.read_le(&row[off..]);
                            off += t.size();
                            v
                        })
                        .collect()
                })
                .collect())
        }
        Encoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| malformed("ascii body is not UTF-8"))?;
            let mut tokens = text.split_whitespace();
            let mut rows = Vec::with_capacity(header.vertex_count);
            for v in 0..header.vertex_count {
                let mut row = Vec::with_capacity(nprops);
                for (name, _) in &header.properties {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| malformed(format!("vertex {v}: missing `{name}`")))?;
                    let val: f64 = tok
                        .parse()
                        .map_err(|_| malformed(format!("vertex {v}: bad number `{tok}`")))?;
                    row.push(val);
                }
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

pub fn load_asset(bytes: &[u8]) -> Result<GaussianCloud, PlyError> {
    load_asset_with(bytes, PlyConvention::Auto)
}

/// Parses a Gaussian asset; `convention` overrides header detection unless
/// it is [`PlyConvention::Auto`].
pub fn load_asset_with(bytes: &[u8], convention: PlyConvention) -> Result<GaussianCloud, PlyError> {
    let header = parse_header(bytes)?;
    let find = |name: &str| header.properties.iter().position(|(n, _)| n == name);
    let require = |name: &str| find(name).ok_or_else(|| malformed(format!("missing property `{name}`")));

    let pos = [require("x")?, require("y")?, require("z")?];
    let rot = [require("rot_0")?, require("rot_1")?, require("rot_2")?, require("rot_3")?];
    let scale = [require("scale_0")?, require("scale_1")?, require("scale_2")?];
    let opacity = require("opacity")?;
    let sh_dc = match (find("f_dc_0"), find("f_dc_1"), find("f_dc_2")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    if sh_dc.is_none() && rgb.is_none() {
        return Err(malformed("need either f_dc_0..2 or red/green/blue"));
    }

    let convention = match convention {
        PlyConvention::Auto => header.declared.unwrap_or(if sh_dc.is_some() {
            PlyConvention::Splat
        } else {
            PlyConvention::Linear
        }),
        explicit => explicit,
    };
    let splat = convention == PlyConvention::Splat;

    let rows = read_rows(bytes, &header)?;
    let mut gaussians = Vec::with_capacity(rows.len());
    for (v, row) in rows.iter().enumerate() {
        if let Some(i) = row.iter().position(|x| !x.is_finite()) {
            return Err(PlyError::NonFiniteValue {
                vertex: v,
                property: header.properties[i].0.clone(),
            });
        }
        let degenerate = |reason: String| PlyError::DegenerateGaussian { vertex: v, reason };

        let q = Quaternion::new(row[rot[0]], row[rot[1]], row[rot[2]], row[rot[3]]);
        let norm = q.norm();
        if !(norm > 1e-12) || (!splat && (norm - 1.0).abs() > QUAT_REJECT_TOL) {
            return Err(degenerate(format!("quaternion norm {norm}")));
        }
        let mut s = Vec3::new(row[scale[0]], row[scale[1]], row[scale[2]]);
        if splat {
            s = s.map(f64::exp);
        }
        if s.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(degenerate(format!("scale {:?}", s.as_slice())));
        }
        let mut a = row[opacity];
        if splat {
            a = 1.0 / (1.0 + (-a).exp());
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(degenerate(format!("opacity {a}")));
        }
        let color = if let Some(dc) = sh_dc {
            dc.map(|i| (0.5 + SH_C0 * row[i]).clamp(0.0, 1.0))
        } else {
            let idx = rgb.unwrap();
            let byte = matches!(header.properties[idx[0]].1, Scalar::U8);
            idx.map(|i| {
                let c = if byte { row[i] / 255.0 } else { row[i] };
                c.clamp(0.0, 1.0)
            })
        };
        gaussians.push(Gaussian3D {
            mean: Vec3::new(row[pos[0]], row[pos[1]], row[pos[2]]),
            rotation: UnitQuaternion::from_quaternion(q),
            scale: s,
            opacity: a,
            color,
        });
    }
    Ok(GaussianCloud::local(gaussians))
}

/// Binary little-endian export in the `splat` convention (log scales,
/// logit opacity, DC color), the layout common splatting tools read.
pub fn write_asset(cloud: &GaussianCloud) -> Vec<u8> {
    let names = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
        "rot_0", "rot_1", "rot_2", "rot_3",
    ];
    let mut out = String::from("ply\nformat binary_little_endian 1.0\n");
    out.push_str(&format!("comment {CONVENTION_TAG} splat\n"));
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    for n in names {
        out.push_str(&format!("property float {n}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for g in &cloud.gaussians {
        let q = g.rotation.quaternion();
        let a = g.opacity.clamp(1e-6, 1.0 - 1e-6);
        let vals = [
            g.mean.x,
            g.mean.y,
            g.mean.z,
            (g.color[0] - 0.5) / SH_C0,
            (g.color[1] - 0.5) / SH_C0,
            (g.color[2] - 0.5) / SH_C0,
            (a / (1.0 - a)).ln(),
            g.scale.x.ln(),
            g.scale.y.ln(),
            g.scale.z.ln(),
            q.w,
            q.i,
            q.j,
            q.k,
        ];
        for v in vals {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}
