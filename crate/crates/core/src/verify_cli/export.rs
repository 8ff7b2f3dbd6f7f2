use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use super::CliError;
use crate::envelope_solver::{GridField, Lattice3};

const FIELD_MAGIC: &[u8; 8] = b"PLXFLD01";

/// File holding the full field of result `id`.
pub fn field_file(output_dir: &Path, id: &str) -> PathBuf {
    output_dir.join(format!("{id}_field.bin"))
}

/// Writes a field as: magic, little-endian `u64` header length, JSON
/// lattice header, then one little-endian `f64` per node (`inf` off the mask).
pub fn write_field(path: &Path, field: &GridField) -> Result<(), CliError> {
    let header = serde_json::to_vec(&field.lattice).expect("lattice serializes");
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * field.values.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for (i, &v) in field.values.iter().enumerate() {
        let v = if field.mask[i] { v } else { f64::INFINITY };
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn read_field(path: &Path) -> Result<GridField, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let corrupt = || CliError::CorruptResult(path.to_path_buf());
    if bytes.len() < 16 || &bytes[..8] != FIELD_MAGIC {
        return Err(corrupt());
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = 16usize.checked_add(hlen).filter(|&b| b <= bytes.len()).ok_or_else(corrupt)?;
    let lattice: Lattice3 = serde_json::from_slice(&bytes[16..body]).map_err(|_| corrupt())?;
    let data = &bytes[body..];
    if data.len() != 8 * lattice.len() {
        return Err(corrupt());
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mask: Arc<[bool]> = values.iter().map(|v| v.is_finite()).collect::<Vec<_>>().into();
    Ok(GridField { lattice, mask, values })
}

/// Slice plane: the line `w = 0` or the slice `|z| = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlicePlane {
    W0,
    T(f64),
}

impl FromStr for SlicePlane {
    type Err = CliError;

    /// `w0` (or `w=0`), or `t=<value>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "w0" || s == "w=0" {
            return Ok(SlicePlane::W0);
        }
        s.strip_prefix("t=")
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite())
            .map(SlicePlane::T)
            .ok_or_else(|| CliError::InvalidConfig(format!("unknown slice plane {s:?}; use w0 or t=<value>")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceFormat {
    Csv,
    Json,
}

impl FromStr for SliceFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(SliceFormat::Csv),
            "json" => Ok(SliceFormat::Json),
            _ => Err(CliError::InvalidConfig(format!("unknown slice format {s:?}"))),
        }
    }
}

/// Canonical result id: `omega1` (alias `omega1_proxy`) or `omega2`.
fn canonical_id(id: &str) -> Option<&'static str> {
    match id {
        "omega1" | "omega1_proxy" => Some("omega1"),
        "omega2" => Some("omega2"),
        _ => None,
    }
}

#[derive(Serialize)]
struct LineSlice<'a> {
    result: &'a str,
    plane: &'static str,
    t: Vec<f64>,
    value: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct PlaneSlice<'a> {
    result: &'a str,
    plane: &'static str,
    t: f64,
    re_w: Vec<f64>,
    im_w: Vec<f64>,
    /// `value[j][k]` at `(re_w[j], im_w[k])`, `null` off the mask.
    value: Vec<Vec<Option<f64>>>,
}

fn t_tag(t: f64) -> String {
    format!("{t}").replace('-', "m")
}

/// Writes a slice of a stored result to `output_dir` and returns its path.
pub fn export_slice(
    output_dir: &Path,
    result_id: &str,
    plane: SlicePlane,
    format: SliceFormat,
) -> Result<PathBuf, CliError> {
    let id = canonical_id(result_id).ok_or_else(|| CliError::UnknownResult(result_id.to_string()))?;
    let src = field_file(output_dir, id);
    if !src.is_file() {
        return Err(CliError::UnknownResult(result_id.to_string()));
    }
    let field = read_field(&src)?;
    let l = field.lattice;
    let (name, text) = match (plane, format) {
        (SlicePlane::W0, SliceFormat::Csv) => {
            let mut s = format!("# t,value: {id} on the line w = 0 (value empty off the mask)\n");
            for (t, v) in field.slice_w0() {
                match v {
                    Some(v) => writeln!(s, "{t},{v}").unwrap(),
                    None => writeln!(s, "{t},").unwrap(),
                }
            }
            (format!("{id}_slice_w0.csv"), s)
        }
        (SlicePlane::W0, SliceFormat::Json) => {
            let (t, value) = field.slice_w0().into_iter().unzip();
            let body = LineSlice {
                result: id,
                plane: "w0",
                t,
                value,
            };
            (format!("{id}_slice_w0.json"), to_json(&body))
        }
        (SlicePlane::T(t), SliceFormat::Csv) => {
            let t_node = l.t.coord(l.t.nearest(t));
            let mut s = format!("# re_w,im_w,value: {id} on the slice |z| = {t_node} (masked nodes only)\n");
            for (re, im, v) in field.slice_t(t) {
                writeln!(s, "{re},{im},{v}").unwrap();
            }
            (format!("{id}_slice_t{}.csv", t_tag(t)), s)
        }
        (SlicePlane::T(t), SliceFormat::Json) => {
            let i = l.t.nearest(t);
            let body = PlaneSlice {
                result: id,
                plane: "t",
                t: l.t.coord(i),
                re_w: (0..l.u.n).map(|j| l.u.coord(j)).collect(),
                im_w: (0..l.v.n).map(|k| l.v.coord(k)).collect(),
                value: (0..l.u.n)
                    .map(|j| {
                        (0..l.v.n)
                            .map(|k| {
                                let idx = l.index(i, j, k);
                                field.mask[idx].then_some(field.values[idx])
                            })
                            .collect()
                    })
                    .collect(),
            };
            (format!("{id}_slice_t{}.json", t_tag(t)), to_json(&body))
        }
    };
    let path = output_dir.join(name);
    write_text(&path, &text)?;
    Ok(path)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope_solver::Axis;

    fn small_field() -> GridField {
        let lattice = Lattice3 {
            t: Axis { min: 0.0, spacing: 0.5, n: 5 },
            u: Axis { min: -1.0, spacing: 0.5, n: 5 },
            v: Axis { min: -1.0, spacing: 0.5, n: 5 },
        };
        let mask: Arc<[bool]> = (0..lattice.len())
            .map(|i| lattice.point(i).1.norm() < 0.8)
            .collect::<Vec<_>>()
            .into();
        GridField::from_fn(lattice, mask, |t, w| t - w.norm_sqr())
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = small_field();
        let p = field_file(dir.path(), "omega2");
        write_field(&p, &f).unwrap();
        assert_eq!(read_field(&p).unwrap(), f);
        fs::write(&p, b"garbage").unwrap();
        assert!(matches!(read_field(&p), Err(CliError::CorruptResult(_))));
    }

    #[test]
    fn slices_and_unknown_results() {
        let dir = tempfile::tempdir().unwrap();
        write_field(&field_file(dir.path(), "omega1"), &small_field()).unwrap();
        let p = export_slice(dir.path(), "omega1", SlicePlane::W0, SliceFormat::Csv).unwrap();
        let text = fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# t,value"));
        assert_eq!(lines.next(), Some("0,0"));
        assert_eq!(lines.last(), Some("2,2"));
        assert_eq!(text.lines().count(), 6);

        let p = export_slice(dir.path(), "omega1_proxy", SlicePlane::T(1.0), SliceFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["t"], 1.0);
        assert_eq!(v["value"][2][2], 1.0);
        assert!(v["value"][0][0].is_null());

        for id in ["omega2", "omega3"] {
            assert!(matches!(
                export_slice(dir.path(), id, SlicePlane::W0, SliceFormat::Csv),
                Err(CliError::UnknownResult(_))
            ));
        }
    }

    #[test]
    fn plane_parsing() {
        assert_eq!("w0".parse::<SlicePlane>().unwrap(), SlicePlane::W0);
        assert_eq!("t=9".parse::<SlicePlane>().unwrap(), SlicePlane::T(9.0));
        assert!("z=1".parse::<SlicePlane>().is_err());
    }
}
