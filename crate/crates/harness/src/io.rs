//! File formats shared with the extraction sidecar and the CLI: NPY / CSV
//! matrices, downbeat lists, boundary lists and tab-separated annotations.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use msa_core::{AnnotatedSegment, Annotation};

use crate::error::{io_err, HarnessError, Result};

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";

fn format_error(path: &Path, offset: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Reads a 2-D matrix from an NPY file (little-endian `f4`/`f8`, C order)
/// or from a CSV file with an optional header line.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(NPY_MAGIC) {
        parse_npy(path, &bytes)
    } else if bytes.first() == Some(&0x93) {
        Err(format_error(path, 0, "bad NPY magic string"))
    } else {
        parse_csv(path, &bytes)
    }
}

struct NpyHeader {
    little_f8: bool,
    shape: (usize, usize),
}

fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    let quoted = [format!("'{key}'"), format!("\"{key}\"")];
    let pos = quoted.iter().find_map(|k| header.find(k.as_str()).map(|p| p + k.len()))?;
    let rest = header[pos..].trim_start().strip_prefix(':')?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')')? + 1
    } else {
        rest.find([',', '}']).unwrap_or(rest.len())
    };
    Some(rest[..end].trim())
}

fn parse_npy_header(path: &Path, header: &str, offset: usize) -> Result<NpyHeader> {
    let err = |m: String| format_error(path, offset, m);
    let descr = header_value(header, "descr")
        .ok_or_else(|| err("header has no 'descr'".into()))?
        .trim_matches(|c| c == '\'' || c == '"');
    let little_f8 = match descr {
        "<f8" => true,
        "<f4" => false,
        other => return Err(err(format!("unsupported dtype {other:?} (need '<f4' or '<f8')"))),
    };
    match header_value(header, "fortran_order") {
        Some("False") => {}
        Some("True") => return Err(err("fortran_order arrays are not supported".into())),
        other => return Err(err(format!("bad fortran_order {other:?}"))),
    }
    let shape = header_value(header, "shape").ok_or_else(|| err("header has no 'shape'".into()))?;
    let dims: Vec<usize> = shape
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(format!("bad shape {shape}: {e}")))?;
    match dims.as_slice() {
        &[rows, cols] => Ok(NpyHeader {
            little_f8,
            shape: (rows, cols),
        }),
        _ => Err(err(format!("expected a 2-D array, got shape {shape}"))),
    }
}

fn parse_npy(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < 10 {
        return Err(format_error(path, bytes.len(), "truncated NPY preamble"));
    }
    let (len_bytes, header_start) = match bytes[6] {
        1 => (2, 10),
        2 | 3 => (4, 12),
        v => return Err(format_error(path, 6, format!("unsupported NPY version {v}.{}", bytes[7]))),
    };
    if bytes.len() < header_start {
        return Err(format_error(path, bytes.len(), "truncated NPY preamble"));
    }
    let header_len = if len_bytes == 2 {
        usize::from(u16::from_le_bytes([bytes[8], bytes[9]]))
    } else {
        u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(format_error(path, bytes.len(), "NPY header runs past end of file"));
    }
    let header = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|e| format_error(path, header_start + e.valid_up_to(), "header is not UTF-8"))?;
    let NpyHeader { little_f8, shape } = parse_npy_header(path, header, header_start)?;

    let width = if little_f8 { 8 } else { 4 };
    let expected = shape.0 * shape.1 * width;
    let data = &bytes[data_start..];
    if data.len() != expected {
        return Err(format_error(
            path,
            data_start,
            format!("shape {shape:?} needs {expected} data bytes, found {}", data.len()),
        ));
    }
    let values: Vec<f64> = if little_f8 {
        data.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect()
    } else {
        data.chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4-byte chunk"))))
            .collect()
    };
    Ok(Array2::from_shape_vec(shape, values).expect("length checked"))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Array2<f64>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| format_error(path, e.valid_up_to(), "CSV file is not UTF-8"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // A non-numeric first line is a header.
            Err(_) if rows.is_empty() && idx == 0 => continue,
            Err(e) => {
                return Err(HarnessError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(format_error(path, 0, "CSV file holds no numeric rows"));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(format_error(path, 0, format!("row {bad} has a different column count")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((flat.len() / cols, cols), flat).expect("rectangular"))
}

/// Writes a little-endian `f8` NPY v1.0 file.
pub fn write_npy(path: impl AsRef<Path>, matrix: &Array2<f64>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = matrix.dim();
    let dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    // Preamble + header + newline padded to a multiple of 64 bytes.
    let unpadded = 10 + dict.len() + 1;
    let padding = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + padding + 1;

    let mut out = Vec::with_capacity(10 + header_len + rows * cols * 8);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padding));
    out.push(b'\n');
    for v in matrix.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &out)
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(
        ".{name}.{}.{:?}.tmp",
        std::process::id(),
        std::thread::current().id()
    ));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        HarnessError::Io {
            path: path.to_path_buf(),
            source: e,
        }
    })
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

/// One time in seconds per line (only the first column is read).
pub fn read_times(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let first = text.split_whitespace().next().unwrap_or_default();
            first
                .split(',')
                .next()
                .unwrap_or_default()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| HarnessError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("not a time: {text:?}"),
                })
        })
        .collect()
}

/// One boundary per line, 6 decimals.
pub fn format_times(times: &[f64]) -> String {
    times.iter().map(|t| format!("{t:.6}\n")).collect()
}

pub fn write_times(path: impl AsRef<Path>, times: &[f64]) -> Result<()> {
    write_atomic(path.as_ref(), format_times(times).as_bytes())
}

/// `start<TAB>end<TAB>label` per line. Whitespace-separated files are
/// accepted too; the label is then the rest of the line.
pub fn read_annotation(path: impl AsRef<Path>) -> Result<Annotation> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut segments = Vec::new();
    for (line, text) in read_lines(path)? {
        let fields: Vec<&str> = if text.contains('\t') {
            text.splitn(3, '\t').collect()
        } else {
            text.splitn(3, char::is_whitespace).collect()
        };
        if fields.len() < 2 {
            return Err(parse_err(line, format!("expected start, end, label: {text:?}")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{s:?}: {e}")))
        };
        segments.push(AnnotatedSegment {
            start: num(fields[0])?,
            end: num(fields[1])?,
            label: fields.get(2).map_or("", |l| l.trim()).to_string(),
        });
    }
    Annotation::new(segments).map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))
}

pub fn format_annotation(annotation: &Annotation) -> String {
    annotation
        .segments()
        .iter()
        .map(|s| format!("{:.6}\t{:.6}\t{}\n", s.start, s.end, s.label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn npy_bytes(dict: &str, data: &[u8]) -> Vec<u8> {
        let mut out = NPY_MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        let header = format!("{dict}\n");
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn reads_f4_npy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.npy");
        let data: Vec<u8> = (1..=6).flat_map(|v| (v as f32).to_le_bytes()).collect();
        assert_eq!(data.len(), 24);
        fs::write(&path, npy_bytes("{'descr':'<f4','fortran_order':False,'shape':(2,3)}", &data)).unwrap();
        let m = read_matrix(&path).unwrap();
        assert_eq!(m, array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn fortran_order_rejected_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.npy");
        fs::write(&path, npy_bytes("{'descr':'<f8','fortran_order':True,'shape':(1,1)}", &[0; 8])).unwrap();
        match read_matrix(&path) {
            Err(HarnessError::Format { offset, message, .. }) => {
                assert_eq!(offset, 10);
                assert!(message.contains("fortran"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.npy");
        fs::write(&path, b"\x93NUMPX\x01\x00").unwrap();
        assert!(matches!(read_matrix(&path), Err(HarnessError::Format { offset: 0, .. })));
        fs::write(&path, npy_bytes("{'descr':'<f8','fortran_order':False,'shape':(2,2)}", &[0; 8])).unwrap();
        assert!(matches!(read_matrix(&path), Err(HarnessError::Format { .. })));
        fs::write(&path, npy_bytes("{'descr':'>f8','fortran_order':False,'shape':(1,1)}", &[0; 8])).unwrap();
        assert!(matches!(read_matrix(&path), Err(HarnessError::Format { .. })));
        fs::write(&path, npy_bytes("{'descr':'<f8','fortran_order':False,'shape':(8,)}", &[0; 64])).unwrap();
        assert!(matches!(read_matrix(&path), Err(HarnessError::Format { .. })));
    }

    #[test]
    fn csv_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "1.0,2.0\n3.0,4.0").unwrap();
        assert_eq!(read_matrix(&path).unwrap(), array![[1.0, 2.0], [3.0, 4.0]]);
        fs::write(&path, "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(read_matrix(&path).unwrap(), array![[1.0, 2.0], [3.0, 4.0]]);
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_matrix(&path).is_err());
    }

    #[test]
    fn npy_written_here_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.npy");
        let m = Array2::from_shape_fn((7, 5), |(i, j)| i as f64 * 0.1 - j as f64 / 3.0);
        write_npy(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn annotation_and_times() {
        let dir = tempfile::tempdir().unwrap();
        let ann = dir.path().join("a.tsv");
        fs::write(&ann, "0.000000\t1.500000\tSilence\n1.5\t30.25\tverse A\n30.25\t31\tend\n").unwrap();
        let a = read_annotation(&ann).unwrap();
        assert_eq!(a.segments().len(), 3);
        assert_eq!(a.segments()[1].label, "verse A");
        assert_eq!(format_annotation(&a).lines().next().unwrap(), "0.000000\t1.500000\tSilence");

        let lab = dir.path().join("a.lab");
        fs::write(&lab, "0 10 intro\n10 20 chorus part\n").unwrap();
        assert_eq!(read_annotation(&lab).unwrap().segments()[1].label, "chorus part");

        let times = dir.path().join("t.txt");
        write_times(&times, &[0.0, 1.25, 2.5]).unwrap();
        assert_eq!(fs::read_to_string(&times).unwrap(), "0.000000\n1.250000\n2.500000\n");
        assert_eq!(read_times(&times).unwrap(), vec![0.0, 1.25, 2.5]);
        fs::write(&times, "0.5\nabc\n").unwrap();
        assert!(matches!(read_times(&times), Err(HarnessError::Parse { line: 2, .. })));
    }
}
